use std::str::FromStr;

use clap::{ArgGroup, Args};
use lhv::bounds::{
    delta_from_epsilon, eta_all_click, eta_dimension, eta_multiparty, eta_two_party, DimensionBoundMode,
};
use lhv::rational::to_fraction_string;
use serde::Serialize;

use crate::output::{envelope, fmt15, sig15, sink, write_json};
use crate::{CliError, Common, Format, Status};

/// Inclusive integer range written `A` or `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub lo: u64,
    pub hi: u64,
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("not an integer: {t:?}"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => (parse(s)?, parse(s)?),
        };
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Span { lo, hi })
    }
}

impl Span {
    fn iter(self) -> impl Iterator<Item = u64> {
        self.lo..=self.hi
    }
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("table").required(true).args(["two_party", "multiparty", "dimension"])))]
pub struct BoundsArgs {
    /// Two parties with `ma` and `mb` settings.
    #[arg(long)]
    pub two_party: bool,
    /// N parties with M settings each, plus the all-click threshold.
    #[arg(long)]
    pub multiparty: bool,
    /// Dimension-only model: efficiency for a given error epsilon.
    #[arg(long)]
    pub dimension: bool,
    #[arg(long, default_value = "2")]
    pub ma: Span,
    #[arg(long, default_value = "2")]
    pub mb: Span,
    #[arg(long, default_value = "2")]
    pub n: Span,
    #[arg(long, default_value = "2")]
    pub m: Span,
    #[arg(long, default_value = "2")]
    pub d: Span,
    /// Comma-separated error values, each in (0, 2d).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub epsilon: Vec<f64>,
}

#[derive(Serialize)]
struct Config<'a> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a BoundsArgs,
    format: Format,
}

#[derive(Serialize)]
struct Table<R> {
    rows: Vec<R>,
}

pub fn run(common: &Common, args: &BoundsArgs) -> Result<Status, CliError> {
    let format = common.format.unwrap_or(Format::Csv);
    let config = Config { command: "bounds", args, format };
    let mut records: Vec<Vec<String>> = Vec::new();
    let header: &[&str];
    let json: serde_json::Value;
    if args.two_party {
        header = &["ma", "mb", "eta"];
        let mut rows = Vec::new();
        for ma in args.ma.iter() {
            for mb in args.mb.iter() {
                let eta = to_fraction_string(&eta_two_party(ma, mb)?);
                records.push(vec![ma.to_string(), mb.to_string(), eta.clone()]);
                rows.push(serde_json::json!({ "ma": ma, "mb": mb, "eta": eta }));
            }
        }
        json = serde_json::to_value(Table { rows })?;
    } else if args.multiparty {
        header = &["n", "m", "eta", "eta_all_click"];
        let mut rows = Vec::new();
        for n in args.n.iter() {
            for m in args.m.iter() {
                let eta = to_fraction_string(&eta_multiparty(n, m)?);
                let all = eta_all_click(n, m)?;
                records.push(vec![n.to_string(), m.to_string(), eta.clone(), fmt15(all)]);
                rows.push(serde_json::json!({ "n": n, "m": m, "eta": eta, "eta_all_click": sig15(all) }));
            }
        }
        json = serde_json::to_value(Table { rows })?;
    } else {
        header = &["d", "epsilon", "delta", "eta", "eta_lower_bound"];
        let mut rows = Vec::new();
        for d in args.d.iter() {
            for &eps in &args.epsilon {
                let delta = delta_from_epsilon(d, eps)?;
                let eta = eta_dimension(d, eps, DimensionBoundMode::ExactFromDelta)?;
                let lower = eta_dimension(d, eps, DimensionBoundMode::LowerBound)?;
                records.push(vec![d.to_string(), fmt15(eps), fmt15(delta), fmt15(eta), fmt15(lower)]);
                rows.push(serde_json::json!({
                    "d": d,
                    "epsilon": sig15(eps),
                    "delta": sig15(delta),
                    "eta": sig15(eta),
                    "eta_lower_bound": sig15(lower),
                }));
            }
        }
        json = serde_json::to_value(Table { rows })?;
    }
    match format {
        Format::Json => write_json(common.out.as_deref(), &envelope(&config, json))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(common.out.as_deref())?);
            w.write_record(header)?;
            for r in &records {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(Status::Done)
}
