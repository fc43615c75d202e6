use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::{Args, ValueEnum};
use lhv::lhv::protocol::{positivity_scan_each, solve_weights, ScanMode, ScanRow};
use lhv::rational::to_fraction_string;
use serde::Serialize;

use crate::output::{envelope, sink, write_json};
use crate::{CliError, Common, Format, Status};

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub m: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    /// Check the M-independent sequence r_k.
    R,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 2)]
    pub n_min: u64,
    #[arg(long)]
    pub n_max: u64,
    /// `r` checks every M at once through r_k.
    #[arg(long, value_enum, conflicts_with = "m")]
    pub mode: Option<ModeArg>,
    /// Check the weights p_i for this M only.
    #[arg(long)]
    pub m: Option<u64>,
    /// Continue an interrupted CSV scan in `--out`, after its last row.
    #[arg(long, requires = "out")]
    pub resume: bool,
}

#[derive(Serialize)]
struct Config<'a, A: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a A,
    format: Format,
}

#[derive(Serialize)]
struct ScanConfig<'a> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a ScanArgs,
    resolved_mode: ScanMode,
    format: Format,
}

pub fn solve(common: &Common, args: &SolveArgs) -> Result<Status, CliError> {
    let format = common.format.unwrap_or(Format::Json);
    let mix = solve_weights(args.n, args.m)?;
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                #[serde(flatten)]
                mixture: &'a lhv::lhv::protocol::ProtocolMixture,
                nonnegative: bool,
            }
            let config = Config { command: "multiparty solve", args, format };
            let report = Report { mixture: &mix, nonnegative: mix.is_nonnegative() };
            write_json(common.out.as_deref(), &envelope(&config, report))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(common.out.as_deref())?);
            w.write_record(["i", "p", "r"])?;
            for (i, (p, r)) in mix.weights.iter().zip(&mix.r_sequence).enumerate() {
                w.write_record([i.to_string(), to_fraction_string(p), to_fraction_string(r)])?;
            }
            w.flush()?;
        }
    }
    Ok(Status::Done)
}

fn header(mode: ScanMode) -> [&'static str; 4] {
    match mode {
        ScanMode::AllM => ["n", "min_r", "argmin", "pass"],
        ScanMode::FixedM(_) => ["n", "min_p", "argmin", "pass"],
    }
}

fn record(row: &ScanRow) -> [String; 4] {
    [row.n.to_string(), to_fraction_string(&row.min), row.argmin.to_string(), row.pass.to_string()]
}

/// Last N already written to an earlier scan file with the same header.
fn resume_point(path: &Path, mode: ScanMode) -> Result<Option<u64>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    truncate_torn_tail(path)?;
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if found != header(mode) {
        return Err(CliError(format!(
            "{} has header {found:?}, expected {:?}",
            path.display(),
            header(mode)
        )));
    }
    let mut last = None;
    for rec in reader.records() {
        // a torn final line from an interrupted run is ignored
        let Ok(rec) = rec else { break };
        let complete = rec.len() == 4 && rec[3].parse::<bool>().is_ok();
        match rec[0].parse::<u64>() {
            Ok(n) if complete => last = Some(n),
            _ => break,
        }
    }
    Ok(last)
}

pub fn scan(common: &Common, args: &ScanArgs) -> Result<Status, CliError> {
    let format = common.format.unwrap_or(Format::Csv);
    let mode = match args.m {
        Some(m) => ScanMode::FixedM(m),
        None => ScanMode::AllM,
    };
    if args.n_min < 2 || args.n_min > args.n_max {
        return Err(CliError(format!("need 2 <= n-min <= n-max (got {}, {})", args.n_min, args.n_max)));
    }
    let config = ScanConfig { command: "multiparty scan", args, resolved_mode: mode, format };
    eprintln!("config: {}", serde_json::to_string(&config)?);
    let mut failures = 0u64;
    match format {
        Format::Csv => {
            let mut start = args.n_min;
            let mut file: Box<dyn Write> = match (&common.out, args.resume) {
                (Some(path), true) => match resume_point(path, mode)? {
                    Some(last) => {
                        start = last + 1;
                        eprintln!("resuming after N = {last}");
                        Box::new(BufWriter::new(OpenOptions::new().append(true).open(path)?))
                    }
                    None => fresh(Some(path), mode)?,
                },
                (out, _) => fresh(out.as_deref(), mode)?,
            };
            positivity_scan_each(start, args.n_max, mode, |row| {
                let row = row?;
                failures += u64::from(!row.pass);
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                w.write_record(record(&row))?;
                file.write_all(&w.into_inner().map_err(|e| CliError(e.to_string()))?)?;
                file.flush()?;
                Ok::<(), CliError>(())
            })?;
        }
        Format::Json => {
            let mut rows = Vec::new();
            positivity_scan_each(args.n_min, args.n_max, mode, |row| {
                let row = row?;
                failures += u64::from(!row.pass);
                rows.push(row);
                Ok::<(), CliError>(())
            })?;
            #[derive(Serialize)]
            struct Report {
                rows: Vec<ScanRow>,
                all_pass: bool,
            }
            let report = Report { rows, all_pass: failures == 0 };
            write_json(common.out.as_deref(), &envelope(&config, report))?;
        }
    }
    if failures == 0 {
        eprintln!("N = {}..={}: all pass", args.n_min, args.n_max);
    } else {
        eprintln!("N = {}..={}: {failures} failing", args.n_min, args.n_max);
    }
    Ok(Status::Done)
}

fn fresh(out: Option<&Path>, mode: ScanMode) -> Result<Box<dyn Write>, CliError> {
    let mut w = sink(out)?;
    writeln!(w, "{}", header(mode).join(","))?;
    w.flush()?;
    Ok(w)
}

/// Drops a partial last line so appended rows start on a fresh line.
fn truncate_torn_tail(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read(path)?;
    if let Some(pos) = text.iter().rposition(|&b| b == b'\n') {
        if pos + 1 != text.len() {
            OpenOptions::new().write(true).open(path)?.set_len(pos as u64 + 1)?;
        }
    }
    Ok(())
}
