use std::path::{Path, PathBuf};

use clap::Args;
use lhv::lhv::dimension::{run_dimension_model, DimensionModelParams, DimensionReport};
use lhv::lhv::multiparty::MultipartyModel;
use lhv::lhv::two_party::TwoPartyModel;
use lhv::lhv::{exact_distribution, sample_counts, LocalModel};
use lhv::quantum::{QuantumState, Scenario, ScenarioJson};
use lhv::rational::to_fraction_string;
use lhv::verify::{compare_float, statistical_match, ComparisonReport, DEFAULT_TOL};
use lhv::{OutcomeDistribution, Probability, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{envelope, resolve_seed, sink, write_json};
use crate::{CliError, Common, Format, Status};

#[derive(Args, Debug, Serialize)]
pub struct ModelVerifyArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Also draw this many samples and test them against the exact table.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Entrywise tolerance for the exact comparison.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum ModelKind {
    TwoParty,
    Multiparty,
}

fn read_scenario_json(path: &Path) -> Result<ScenarioJson, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read scenario file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError(format!("malformed scenario JSON in {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    read_scenario_json(path)?
        .into_scenario()
        .map_err(|e| CliError(format!("invalid scenario {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Config<'a, A: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a A,
    seed: Option<u64>,
    format: Format,
}

#[derive(Serialize)]
struct SettingError {
    settings: Vec<usize>,
    max_abs_error: f64,
}

#[derive(Serialize)]
struct ModelReport {
    model: &'static str,
    #[serde(serialize_with = "lhv::rational::serialize")]
    eta: Rational,
    /// Model parameters beyond `eta`, as exact fractions.
    parameters: serde_json::Value,
    exact: ComparisonReport,
    per_setting: Vec<SettingError>,
    sampling: Option<ComparisonReport>,
    pass: bool,
}

fn per_setting(a: &OutcomeDistribution<f64>, b: &OutcomeDistribution<f64>) -> Vec<SettingError> {
    (0..a.settings_count())
        .map(|s| SettingError {
            settings: a.settings_tuple(s),
            max_abs_error: a
                .block(s)
                .iter()
                .zip(b.block(s))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        })
        .collect()
}

/// Exact table, target table, exact comparison, sampled comparison.
type ModelCheck =
    (OutcomeDistribution<f64>, OutcomeDistribution<f64>, ComparisonReport, Option<ComparisonReport>);

fn check_model<M: LocalModel>(
    model: &M,
    quantum: &OutcomeDistribution<f64>,
    eta: f64,
    args: &ModelVerifyArgs,
    seed: Option<u64>,
) -> Result<ModelCheck, CliError> {
    let exact = exact_distribution(model);
    let target = quantum.extend_with_inefficiency(&eta)?;
    let report = compare_float(&exact, &target, args.tol)?;
    let sampling = match (args.samples, seed) {
        (Some(n), Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Some(statistical_match(&sample_counts(model, n, &mut rng)?, &exact)?)
        }
        _ => None,
    };
    Ok((exact, target, report, sampling))
}

pub fn run_model(common: &Common, args: &ModelVerifyArgs, kind: ModelKind) -> Result<Status, CliError> {
    let format = common.format.unwrap_or(Format::Json);
    let scenario = load_scenario(&args.scenario)?;
    let seed = args.samples.map(|_| resolve_seed(common.seed));
    let quantum = scenario.quantum_distribution();
    let (name, eta_exact, parameters, (exact, target, report, sampling)) = match kind {
        ModelKind::TwoParty => {
            let model = TwoPartyModel::new(&scenario)?;
            let s = model.solution().clone();
            let checked = check_model(&model, &quantum, s.eta.to_f64(), args, seed)?;
            let params = serde_json::json!({
                "proceed": to_fraction_string(&s.proceed),
                "role": to_fraction_string(&s.role),
                "ma": s.ma,
                "mb": s.mb,
            });
            ("two_party", s.eta, params, checked)
        }
        ModelKind::Multiparty => {
            let model = MultipartyModel::new(&scenario)?;
            let mix = model.mixture().clone();
            let checked = check_model(&model, &quantum, mix.eta.to_f64(), args, seed)?;
            let params = serde_json::json!({
                "n": mix.n,
                "m": mix.m,
                "weights": mix.weights.iter().map(to_fraction_string).collect::<Vec<_>>(),
            });
            ("multiparty", mix.eta, params, checked)
        }
    };
    let pass = report.pass && sampling.as_ref().is_none_or(|r| r.pass);
    eprintln!(
        "{name}: max |model - quantum| = {:.3e} (tol {:.0e}){} -> {}",
        report.max_abs_error,
        args.tol,
        sampling.as_ref().map(|s| format!(", sampling {} failing cells", s.failing_cells)).unwrap_or_default(),
        if pass { "pass" } else { "FAIL" }
    );
    let command = match kind {
        ModelKind::TwoParty => "two-party verify",
        ModelKind::Multiparty => "multiparty verify",
    };
    let config = Config { command, args, seed, format };
    match format {
        Format::Json => {
            let full = ModelReport {
                model: name,
                eta: eta_exact,
                parameters,
                per_setting: per_setting(&exact, &target),
                exact: report,
                sampling,
                pass,
            };
            write_json(common.out.as_deref(), &envelope(&config, full))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(common.out.as_deref())?);
            w.write_record(["cell", "model", "target", "abs_error"])?;
            for (s, o, v) in exact.cells() {
                let t = target.block(s)[o];
                w.write_record([exact.cell_label(s, o), v.to_string(), t.to_string(), (v - t).abs().to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(if pass { Status::Done } else { Status::VerificationFailed })
}

#[derive(Args, Debug, Serialize)]
pub struct DimVerifyArgs {
    /// Local dimension; taken from the measurements when omitted.
    #[arg(long)]
    pub d: Option<usize>,
    /// Threshold angle in (0, pi/2].
    #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
    pub delta: Option<f64>,
    /// Target error in (0, 2d); sets delta.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Scenario JSON with two parties; the state may be omitted and
    /// otherwise must be the maximally entangled state.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
}

#[derive(Serialize)]
struct PairReport {
    alice_setting: usize,
    bob_setting: usize,
    #[serde(flatten)]
    report: DimensionReport,
}

#[derive(Serialize)]
struct DimReport {
    params: DimensionModelParams,
    q_hat: f64,
    q_theory: f64,
    eta: f64,
    pairs: Vec<PairReport>,
    pass: bool,
}

/// Seed of the run for one settings pair.
fn pair_seed(seed: u64, pair: usize) -> u64 {
    seed ^ (pair as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const STATE_FIDELITY_TOL: f64 = 1e-10;

pub fn run_dimension(common: &Common, args: &DimVerifyArgs) -> Result<Status, CliError> {
    let format = common.format.unwrap_or(Format::Json);
    let json = read_scenario_json(&args.scenario)?;
    if json.parties != 2 || json.settings.len() != 2 {
        return Err(CliError("the dimension model needs a two-party scenario".into()));
    }
    let povms = json.povms().map_err(|e| CliError(format!("invalid scenario: {e}")))?;
    let d_found = povms[0].first().map(|p| p.dim()).ok_or_else(|| CliError("Alice has no settings".into()))?;
    let d = args.d.unwrap_or(d_found);
    if let Some(p) = povms.iter().flatten().find(|p| p.dim() != d) {
        return Err(CliError(format!("measurement of dimension {} in a d = {d} run", p.dim())));
    }
    if let Some(state) = json.state.clone() {
        let state = state.into_state().map_err(|e| CliError(format!("invalid state: {e}")))?;
        let phi = QuantumState::maximally_entangled(d)?;
        let f = state.fidelity_with_pure(&phi).map_err(|e| CliError(format!("invalid state: {e}")))?;
        if (1.0 - f).abs() > STATE_FIDELITY_TOL {
            return Err(CliError(format!("state is not maximally entangled (fidelity {f})")));
        }
    }
    let params = match (args.delta, args.epsilon) {
        (Some(delta), _) => DimensionModelParams::from_delta(d, delta)?,
        (None, Some(eps)) => DimensionModelParams::from_epsilon(d, eps)?,
        (None, None) => unreachable!("clap requires one of delta, epsilon"),
    };
    if d >= 5 {
        eprintln!(
            "warning: d = {d}: only a fraction {:.2e} of samples fire; expect large sigmas",
            params.q
        );
    }
    let seed = resolve_seed(common.seed);
    let refined = |p: &lhv::quantum::Povm| p.refine_to_rank_one().map_err(|e| CliError(format!("invalid POVM: {e}")));
    let mut pairs = Vec::new();
    for (x, px) in povms[0].iter().enumerate() {
        for (y, py) in povms[1].iter().enumerate() {
            let report = run_dimension_model(&params, &refined(px)?, &refined(py)?, args.samples, pair_seed(seed, pairs.len()))?;
            pairs.push(PairReport { alice_setting: x, bob_setting: y, report });
        }
    }
    let fired: u64 = pairs.iter().map(|p| p.report.fired).sum();
    let total: u64 = pairs.iter().map(|p| p.report.samples).sum();
    let pass = pairs.iter().all(|p| p.report.pass);
    let report = DimReport {
        params,
        q_hat: fired as f64 / total as f64,
        q_theory: params.q,
        eta: params.eta,
        pass,
        pairs,
    };
    eprintln!(
        "dim-model d={d} delta={:.6}: Q_hat {:.5} vs Q {:.5} -> {}",
        params.delta,
        report.q_hat,
        report.q_theory,
        if pass { "pass" } else { "FAIL" }
    );
    let config = Config { command: "dim-model verify", args, seed: Some(seed), format };
    match format {
        Format::Json => write_json(common.out.as_deref(), &envelope(&config, report))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(common.out.as_deref())?);
            w.write_record(["x", "y", "level", "a", "b", "empirical", "target", "bound", "sigma", "pass"])?;
            for p in &report.pairs {
                let levels = [("refined", &p.report.refined_cells), ("outcome", &p.report.cells)];
                for (level, cells) in levels {
                    for c in cells {
                        w.write_record([
                            p.alice_setting.to_string(),
                            p.bob_setting.to_string(),
                            level.to_string(),
                            c.a.to_string(),
                            c.b.to_string(),
                            c.empirical.to_string(),
                            c.target.to_string(),
                            c.bound.to_string(),
                            c.sigma.to_string(),
                            c.pass.to_string(),
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(if pass { Status::Done } else { Status::VerificationFailed })
}
