//! A model whose efficiency depends only on the local dimension `d`.
//!
//! Works for the maximally entangled state `Σ|ii>/√d` and any rank-one
//! measurements `x_a = |x_a| |u_a><u_a|`. The hidden variable is a Haar
//! random pure state `φ`. Alice draws `a` with probability `|x_a|/d` and
//! reports it only if `|<φ|u_a>|² >= cos²δ`, which happens with
//! probability `Q = sin^(2(d-1)) δ`. Bob always answers, with
//! `P(b) = |y_b| |<φ*|v_b>|²`. Given that Alice fired, every joint
//! probability is within `ε P(a) P(b)` of the quantum one, with
//! `ε = d(sin²δ + 2 sin δ)`.
//!
//! Verification is by Monte Carlo over fixed-size batches, each with its
//! own ChaCha stream, so a report depends only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::draw_index;
use crate::bounds::{delta_from_epsilon, epsilon_from_delta, firing_probability};
use crate::error::{Error, Result};
use crate::quantum::{conjugate_in_schmidt_basis, haar_random_state, CVector, RankOnePovm};
use crate::verify::SIGMA_MULTIPLIER;
use crate::Outcome;

/// Smallest Monte Carlo budget accepted by [`run_dimension_model`].
pub const MIN_DIMENSION_SAMPLES: u64 = 10_000;
/// Samples per independent RNG stream.
pub const BATCH_SIZE: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionModelParams {
    pub d: usize,
    pub delta: f64,
    pub q: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl DimensionModelParams {
    pub fn from_delta(d: usize, delta: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {d}")));
        }
        if !(delta > 0.0 && delta <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain(format!("delta must lie in (0, pi/2], got {delta}")));
        }
        let q = firing_probability(d as u64, delta);
        Ok(DimensionModelParams {
            d,
            delta,
            q,
            epsilon: epsilon_from_delta(d as u64, delta),
            eta: symmetrized_efficiency(q)?,
        })
    }

    /// Needs `0 < epsilon < 2d`.
    pub fn from_epsilon(d: usize, epsilon: f64) -> Result<Self> {
        Self::from_delta(d, delta_from_epsilon(d as u64, epsilon)?)
    }
}

/// `2Q / (1 + Q)`: efficiency after randomizing which party thresholds and
/// silencing both parties part of the time. `Q = 1` (no threshold) gives 1.
pub fn symmetrized_efficiency(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("firing probability must lie in (0, 1], got {q}")));
    }
    Ok(2.0 * q / (1.0 + q))
}

fn check_measurement(phi: &CVector, povm: &RankOnePovm) -> Result<()> {
    if phi.len() != povm.dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, measurement {}",
            phi.len(),
            povm.dim()
        )));
    }
    povm.check_weight_sum()
}

fn alice_unchecked<R: Rng + ?Sized>(phi: &CVector, x: &RankOnePovm, cos2: f64, rng: &mut R) -> Outcome {
    let weights: Vec<f64> = x.elements().iter().map(|e| e.weight).collect();
    let a = draw_index(&weights, rng);
    let s = x.elements()[a].direction.dotc(phi).norm_sqr();
    if s >= cos2 {
        Outcome::Click(a)
    } else {
        Outcome::NoClick
    }
}

/// Alice's answer given `φ`: a refined outcome index or `∅`.
pub fn alice_respond<R: Rng + ?Sized>(
    phi: &CVector,
    x: &RankOnePovm,
    delta: f64,
    rng: &mut R,
) -> Result<Outcome> {
    check_measurement(phi, x)?;
    Ok(alice_unchecked(phi, x, delta.cos().powi(2), rng))
}

/// `P(b | Y, φ) = |y_b| |<φ*|v_b>|²` for each refined outcome `b`.
pub fn bob_distribution(phi: &CVector, y: &RankOnePovm) -> Result<Vec<f64>> {
    check_measurement(phi, y)?;
    Ok(bob_unchecked(&conjugate_in_schmidt_basis(phi), y))
}

fn bob_unchecked(phi_conj: &CVector, y: &RankOnePovm) -> Vec<f64> {
    y.elements().iter().map(|e| e.weight * phi_conj.dotc(&e.direction).norm_sqr()).collect()
}

/// Bob's answer given `φ`; never `∅`.
pub fn bob_respond<R: Rng + ?Sized>(phi: &CVector, y: &RankOnePovm, rng: &mut R) -> Result<Outcome> {
    Ok(Outcome::Click(draw_index(&bob_distribution(phi, y)?, rng)))
}

/// Quantum joint probability for `Σ|ii>/√d`:
/// `(1/d) |x_a| |y_b| |<u_a*|v_b>|²`.
pub fn target_joint(x: &RankOnePovm, y: &RankOnePovm) -> Vec<Vec<f64>> {
    let d = x.dim() as f64;
    x.elements()
        .iter()
        .map(|ea| {
            let ua_conj = conjugate_in_schmidt_basis(&ea.direction);
            y.elements()
                .iter()
                .map(|eb| ea.weight * eb.weight * ua_conj.dotc(&eb.direction).norm_sqr() / d)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionCell {
    pub a: usize,
    pub b: usize,
    pub empirical: f64,
    pub target: f64,
    pub bound: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub outcome: usize,
    pub empirical: f64,
    pub target: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub params: DimensionModelParams,
    pub samples: u64,
    pub fired: u64,
    pub q_hat: f64,
    pub q_theory: f64,
    pub q_sigma: f64,
    pub q_pass: bool,
    /// Joint table over rank-one outcomes, conditional on Alice firing.
    pub refined_cells: Vec<DimensionCell>,
    /// The same table summed back onto the original outcome labels.
    pub cells: Vec<DimensionCell>,
    /// Alice's outcome given that she fired, against `|x_a|/d`.
    pub alice_marginal: Vec<MarginalCheck>,
    /// Bob's outcome over all samples, against `|y_b|/d`.
    pub bob_marginal: Vec<MarginalCheck>,
    /// Bob's outcome given that Alice fired. Only approximately `|y_b|/d`;
    /// reported, not part of `pass`.
    pub bob_conditional_marginal: Vec<MarginalCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
struct Tally {
    fired: u64,
    joint: Vec<Vec<u64>>,
    bob_all: Vec<u64>,
}

impl Tally {
    fn new(ka: usize, kb: usize) -> Self {
        Tally { fired: 0, joint: vec![vec![0; kb]; ka], bob_all: vec![0; kb] }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.fired += other.fired;
        for (r, o) in self.joint.iter_mut().zip(&other.joint) {
            for (c, v) in r.iter_mut().zip(o) {
                *c += v;
            }
        }
        for (c, v) in self.bob_all.iter_mut().zip(&other.bob_all) {
            *c += v;
        }
        self
    }
}

fn run_batch(params: &DimensionModelParams, x: &RankOnePovm, y: &RankOnePovm, seed: u64, batch: u64, n: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let cos2 = params.delta.cos().powi(2);
    let mut tally = Tally::new(x.len(), y.len());
    for _ in 0..n {
        let phi = haar_random_state(params.d, &mut rng);
        let alice = alice_unchecked(&phi, x, cos2, &mut rng);
        let b = draw_index(&bob_unchecked(&conjugate_in_schmidt_basis(&phi), y), &mut rng);
        tally.bob_all[b] += 1;
        if let Outcome::Click(a) = alice {
            tally.fired += 1;
            tally.joint[a][b] += 1;
        }
    }
    tally
}

fn proportion_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn marginal_checks(counts: &[u64], total: u64, targets: &[f64]) -> Vec<MarginalCheck> {
    counts
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(outcome, (&c, &target))| {
            let empirical = c as f64 / total as f64;
            let sigma = proportion_sigma(target, total);
            let pass = (empirical - target).abs() <= SIGMA_MULTIPLIER * sigma + 1e-12;
            MarginalCheck { outcome, empirical, target, sigma, pass }
        })
        .collect()
}

fn cell(a: usize, b: usize, count: u64, fired: u64, target: f64, bound: f64) -> DimensionCell {
    let empirical = count as f64 / fired as f64;
    let sigma = proportion_sigma(empirical, fired);
    let pass = (empirical - target).abs() <= bound + SIGMA_MULTIPLIER * sigma + 1e-12;
    DimensionCell { a, b, empirical, target, bound, sigma, pass }
}

/// Samples the model `samples` times for one pair of measurements and
/// checks the firing rate, the marginals and the joint error bound.
pub fn run_dimension_model(
    params: &DimensionModelParams,
    x: &RankOnePovm,
    y: &RankOnePovm,
    samples: u64,
    seed: u64,
) -> Result<DimensionReport> {
    for povm in [x, y] {
        if povm.dim() != params.d {
            return Err(Error::Dimension(format!(
                "measurement acts on dimension {}, model on {}",
                povm.dim(),
                params.d
            )));
        }
        povm.check_weight_sum()?;
    }
    if samples < MIN_DIMENSION_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{samples} < {MIN_DIMENSION_SAMPLES}"
        )));
    }
    let batches = samples.div_ceil(BATCH_SIZE);
    let tally = (0..batches)
        .into_par_iter()
        .map(|b| {
            let n = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            run_batch(params, x, y, seed, b, n)
        })
        .reduce(|| Tally::new(x.len(), y.len()), Tally::merge);
    if tally.fired == 0 {
        return Err(Error::NoFiringEvents { samples });
    }
    let d = params.d as f64;
    let fired = tally.fired;
    let pa: Vec<f64> = x.elements().iter().map(|e| e.weight / d).collect();
    let pb: Vec<f64> = y.elements().iter().map(|e| e.weight / d).collect();
    let target = target_joint(x, y);

    let mut refined_cells = Vec::new();
    for a in 0..x.len() {
        for b in 0..y.len() {
            let bound = params.epsilon * pa[a] * pb[b];
            refined_cells.push(cell(a, b, tally.joint[a][b], fired, target[a][b], bound));
        }
    }

    let (na, nb) = (x.parent_count(), y.parent_count());
    let mut coarse_counts = vec![vec![0u64; nb]; na];
    let mut coarse_target = vec![vec![0.0; nb]; na];
    for (a, ea) in x.elements().iter().enumerate() {
        for (b, eb) in y.elements().iter().enumerate() {
            coarse_counts[ea.parent][eb.parent] += tally.joint[a][b];
            coarse_target[ea.parent][eb.parent] += target[a][b];
        }
    }
    let coarse_pa = x.coarse_grain(&pa);
    let coarse_pb = y.coarse_grain(&pb);
    let mut cells = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            let bound = params.epsilon * coarse_pa[a] * coarse_pb[b];
            cells.push(cell(a, b, coarse_counts[a][b], fired, coarse_target[a][b], bound));
        }
    }

    let alice_counts: Vec<u64> = tally.joint.iter().map(|r| r.iter().sum()).collect();
    let bob_cond_counts: Vec<u64> =
        (0..y.len()).map(|b| tally.joint.iter().map(|r| r[b]).sum()).collect();
    let alice_marginal = marginal_checks(&alice_counts, fired, &pa);
    let bob_marginal = marginal_checks(&tally.bob_all, samples, &pb);
    let bob_conditional_marginal = marginal_checks(&bob_cond_counts, fired, &pb);

    let q_hat = fired as f64 / samples as f64;
    let q_sigma = proportion_sigma(params.q, samples);
    let q_pass = (q_hat - params.q).abs() <= SIGMA_MULTIPLIER * q_sigma + 1e-12;
    let pass = q_pass
        && refined_cells.iter().chain(&cells).all(|c| c.pass)
        && alice_marginal.iter().chain(&bob_marginal).all(|m| m.pass);
    Ok(DimensionReport {
        params: *params,
        samples,
        fired,
        q_hat,
        q_theory: params.q,
        q_sigma,
        q_pass,
        refined_cells,
        cells,
        alice_marginal,
        bob_marginal,
        bob_conditional_marginal,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Povm, QuantumState, Scenario, C64};
    use std::f64::consts::PI;

    fn computational(d: usize) -> RankOnePovm {
        Povm::computational(d).refine_to_rank_one().unwrap()
    }

    #[test]
    fn params() {
        let p = DimensionModelParams::from_delta(2, PI / 6.0).unwrap();
        assert!((p.q - 0.25).abs() < 1e-12);
        assert!((p.epsilon - 2.5).abs() < 1e-12);
        assert!((p.eta - 0.4).abs() < 1e-12);
        let back = DimensionModelParams::from_epsilon(2, 2.5).unwrap();
        assert!((back.delta - PI / 6.0).abs() < 1e-9);
        assert!(DimensionModelParams::from_delta(1, 0.3).is_err());
        assert!(DimensionModelParams::from_delta(2, 0.0).is_err());
        assert!(DimensionModelParams::from_delta(2, 1.6).is_err());
    }

    #[test]
    fn efficiency_identities() {
        assert!((symmetrized_efficiency(0.25).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(symmetrized_efficiency(1.0).unwrap(), 1.0);
        assert!(symmetrized_efficiency(0.0).is_err());
        assert!(symmetrized_efficiency(1.5).is_err());
        for q in [1.0 / 9.0, 0.25, 0.5, 0.9, 1e-6] {
            let eta = symmetrized_efficiency(q).unwrap();
            let s = 1.0 - (1.0 - eta) * (1.0 - eta);
            assert!((eta * eta - s * q).abs() < 1e-12);
            assert!((eta * (1.0 - eta) - s * (1.0 - q) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alice_always_fires_without_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = computational(3);
        for _ in 0..1000 {
            let phi = haar_random_state(3, &mut rng);
            assert!(matches!(alice_respond(&phi, &x, PI / 2.0, &mut rng).unwrap(), Outcome::Click(_)));
        }
    }

    #[test]
    fn bob_basis_state() {
        let y = computational(2);
        let phi = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(bob_distribution(&phi, &y).unwrap(), vec![1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(bob_respond(&phi, &y, &mut rng).unwrap(), Outcome::Click(0));
    }

    #[test]
    fn bob_distribution_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 2..=4 {
            let y = Povm::random(d, d + 2, &mut rng).refine_to_rank_one().unwrap();
            for _ in 0..50 {
                let phi = haar_random_state(d, &mut rng);
                let total: f64 = bob_distribution(&phi, &y).unwrap().iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = computational(2);
        let phi = haar_random_state(3, &mut rng);
        assert!(matches!(alice_respond(&phi, &x, 0.5, &mut rng), Err(Error::Dimension(_))));
        assert!(matches!(bob_distribution(&phi, &x), Err(Error::Dimension(_))));
        let p = DimensionModelParams::from_delta(3, 0.5).unwrap();
        assert!(matches!(
            run_dimension_model(&p, &x, &x, 10_000, 1),
            Err(Error::Dimension(_))
        ));
        // incomplete measurements never get this far
        let half = Povm::new(vec![Povm::computational(2).elements()[0].clone()]).unwrap();
        assert!(half.refine_to_rank_one().is_err());
    }

    #[test]
    fn target_matches_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 3;
        let x = Povm::random(d, 4, &mut rng).refine_to_rank_one().unwrap();
        let y = Povm::random(d, 3, &mut rng).refine_to_rank_one().unwrap();
        let s = Scenario::new(
            QuantumState::maximally_entangled(d).unwrap(),
            vec![vec![x.to_povm()], vec![y.to_povm()]],
        )
        .unwrap();
        let t = target_joint(&x, &y);
        for (a, row) in t.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                let q = s.quantum_joint(&[0, 0], &[Some(a), Some(b)]).unwrap();
                assert!((cell - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn computational_qubit_run() {
        let p = DimensionModelParams::from_delta(2, PI / 6.0).unwrap();
        let x = computational(2);
        let r = run_dimension_model(&p, &x, &x, 100_000, 11).unwrap();
        assert!(r.pass, "{r:#?}");
        assert_eq!(r.cells.len(), 4);
        assert!((r.q_hat - 0.25).abs() <= 3.0 * r.q_sigma);
    }

    #[test]
    fn deterministic_and_needs_samples() {
        let p = DimensionModelParams::from_delta(2, PI / 4.0).unwrap();
        let x = computational(2);
        let a = run_dimension_model(&p, &x, &x, 25_000, 9).unwrap();
        let b = run_dimension_model(&p, &x, &x, 25_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            run_dimension_model(&p, &x, &x, 500, 9),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn no_firing_is_reported() {
        let p = DimensionModelParams::from_delta(4, 1e-3).unwrap();
        let x = computational(4);
        assert!(matches!(
            run_dimension_model(&p, &x, &x, 10_000, 2),
            Err(Error::NoFiringEvents { samples: 10_000 })
        ));
    }

    #[test]
    fn zero_weight_outcome_cell_is_zero() {
        let mut els = Povm::computational(2).elements().to_vec();
        els.push(crate::quantum::CMatrix::zeros(2, 2));
        let x = Povm::new(els).unwrap().refine_to_rank_one().unwrap();
        let p = DimensionModelParams::from_delta(2, PI / 3.0).unwrap();
        let r = run_dimension_model(&p, &x, &computational(2), 20_000, 4).unwrap();
        for c in r.cells.iter().filter(|c| c.a == 2) {
            assert_eq!(c.empirical, 0.0);
            assert_eq!(c.target, 0.0);
        }
    }
}
