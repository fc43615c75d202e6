//! Local hidden variable models.
//!
//! A model is a distribution over hidden variables `λ` plus one response
//! function per party. [`LocalModel::respond`] receives the party index,
//! `λ` and that party's own setting, nothing else, so every model built on
//! this trait has the factorized form
//! `P(o | X) = Σ_λ p(λ) Π_j P(o_j | X_j, λ)` by construction.

pub mod dimension;
pub mod multiparty;
pub mod protocol;
pub mod two_party;

use rand::Rng;

use crate::distribution::{OutcomeCounts, OutcomeDistribution, OutcomeTable};
use crate::error::Result;
use crate::Outcome;

/// Quantum probabilities at or below this are treated as zero when used as
/// the weight of a guessed outcome.
pub const SUPPORT_FLOOR: f64 = 1e-14;

/// A party's local answer: outcomes with their probabilities.
pub type Response = Vec<(Outcome, f64)>;

pub trait LocalModel {
    type Hidden;

    fn n_parties(&self) -> usize;

    /// `alphabets[party][setting]` = number of click outcomes.
    fn alphabets(&self) -> Vec<Vec<usize>>;

    /// Every hidden value with nonzero weight.
    fn hidden_support(&self) -> Vec<(f64, Self::Hidden)>;

    fn sample_hidden<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Hidden;

    fn respond(&self, party: usize, hidden: &Self::Hidden, setting: usize) -> Response;
}

/// Sums `p(λ) Π_j P(o_j | X_j, λ)` over the whole hidden support.
pub fn exact_distribution<M: LocalModel>(model: &M) -> OutcomeDistribution<f64> {
    let mut table = OutcomeTable::filled(model.alphabets(), true, 0.0);
    let n = model.n_parties();
    let counts = table.settings_counts();
    for (weight, hidden) in model.hidden_support() {
        // responses[party][setting]
        let responses: Vec<Vec<Response>> = (0..n)
            .map(|p| (0..counts[p]).map(|x| model.respond(p, &hidden, x)).collect())
            .collect();
        for s in 0..table.settings_count() {
            let settings = table.settings_tuple(s);
            let local: Vec<&Response> =
                settings.iter().enumerate().map(|(p, &x)| &responses[p][x]).collect();
            accumulate_product(&mut table, &settings, &local, weight);
        }
    }
    table
}

fn accumulate_product(
    table: &mut OutcomeDistribution<f64>,
    settings: &[usize],
    local: &[&Response],
    weight: f64,
) {
    let n = local.len();
    let mut cursor = vec![0usize; n];
    let mut outcomes = vec![Outcome::NoClick; n];
    loop {
        let mut p = weight;
        for j in 0..n {
            let (o, q) = local[j][cursor[j]];
            outcomes[j] = o;
            p *= q;
        }
        if p != 0.0 {
            *table.get_mut(settings, &outcomes).expect("response within alphabet") += p;
        }
        // odometer over the sparse responses
        let mut j = n;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            cursor[j] += 1;
            if cursor[j] < local[j].len() {
                break;
            }
            cursor[j] = 0;
        }
    }
}

/// Draws one outcome per party: `λ` first, then each party answers from
/// `λ` and its own setting.
pub fn sample<M: LocalModel, R: Rng + ?Sized>(
    model: &M,
    settings: &[usize],
    rng: &mut R,
) -> Vec<Outcome> {
    let hidden = model.sample_hidden(rng);
    settings
        .iter()
        .enumerate()
        .map(|(party, &x)| draw(&model.respond(party, &hidden, x), rng))
        .collect()
}

/// Runs `draws` samples, cycling through the settings tuples in order, and
/// tabulates the outcomes.
pub fn sample_counts<M: LocalModel, R: Rng + ?Sized>(
    model: &M,
    draws: u64,
    rng: &mut R,
) -> Result<OutcomeCounts> {
    let mut counts = OutcomeTable::filled(model.alphabets(), true, 0u64);
    let n_settings = counts.settings_count() as u64;
    for t in 0..draws {
        let settings = counts.settings_tuple((t % n_settings) as usize);
        let outcomes = sample(model, &settings, rng);
        counts.record(&settings, &outcomes)?;
    }
    Ok(counts)
}

pub(crate) fn draw<R: Rng + ?Sized>(response: &Response, rng: &mut R) -> Outcome {
    if let [(o, _)] = response.as_slice() {
        return *o;
    }
    let total: f64 = response.iter().map(|(_, p)| p).sum();
    let mut u = rng.random::<f64>() * total;
    for (o, p) in response {
        if u < *p {
            return *o;
        }
        u -= p;
    }
    // rounding fallthrough: last outcome with positive weight
    response.iter().rev().find(|(_, p)| *p > 0.0).map(|(o, _)| *o).unwrap_or(Outcome::NoClick)
}

/// Index drawn proportionally to `weights`.
pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
