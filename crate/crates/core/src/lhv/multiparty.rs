//! The N-party mixture of guessing protocols.
//!
//! Under protocol `P_i` a uniformly random set of `i` parties is silent, a
//! uniformly random one of the rest is the special party, and every other
//! party `g` carries a guessed setting `X'_g` (uniform) and a guessed
//! outcome, the guessed outcomes jointly drawn from the quantum marginal
//! `P(a_G | X'_G)`. A guessed party clicks iff its setting equals the guess.
//! The special party always clicks and samples
//! `P(a_G, b | X'_G, X_s) / P(a_G | X'_G)`.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::protocol::{solve_weights, ProtocolIndex, ProtocolMixture};
use super::{draw_index, LocalModel, Response, SUPPORT_FLOOR};
use crate::distribution::{decode_radix, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::quantum::Scenario;
use crate::{Outcome, Probability};

pub const MAX_PARTIES: usize = 5;
pub const MAX_SETTINGS: usize = 4;
pub const MAX_OUTCOMES: usize = 4;
/// Largest outcome table (settings tuples times outcome tuples with `∅`).
pub const MAX_TABLE_CELLS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyRole {
    Silent,
    Special,
    Guessed { setting: usize, outcome: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MultipartyHidden {
    pub protocol: usize,
    pub roles: Vec<PartyRole>,
}

impl MultipartyHidden {
    fn guessed(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.roles.iter().enumerate().filter_map(|(p, r)| match *r {
            PartyRole::Guessed { setting, outcome } => Some((p, setting, outcome)),
            _ => None,
        })
    }
}

type GuessKey = (u32, Vec<usize>);

pub struct MultipartyModel {
    mixture: ProtocolMixture,
    weights: Vec<f64>,
    quantum: OutcomeDistribution<f64>,
    m: usize,
    /// `P(a_G | X'_G)` over all `a_G`, keyed by (mask of G, settings of G).
    guess_cache: Mutex<HashMap<GuessKey, Vec<f64>>>,
}

impl MultipartyModel {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let n = scenario.n_parties();
        let m = scenario.uniform_settings_count().ok_or_else(|| {
            Error::Domain("every party needs the same number of settings".into())
        })?;
        let alphabets = scenario.alphabets();
        let k_max = alphabets.iter().flatten().copied().max().unwrap_or(0);
        if n > MAX_PARTIES || m > MAX_SETTINGS || k_max > MAX_OUTCOMES {
            return Err(Error::SizeGuard(format!(
                "N={n}, M={m}, K={k_max} exceeds N<={MAX_PARTIES}, M<={MAX_SETTINGS}, K<={MAX_OUTCOMES}"
            )));
        }
        let cells: usize = alphabets
            .iter()
            .map(|per| per.iter().map(|k| k + 1).sum::<usize>())
            .product();
        if cells > MAX_TABLE_CELLS {
            return Err(Error::SizeGuard(format!("{cells} cells > {MAX_TABLE_CELLS}")));
        }
        if m < 2 {
            return Err(Error::Domain("need at least 2 settings per party".into()));
        }
        let mixture = solve_weights(n as u64, m as u64)?;
        if !mixture.is_nonnegative() {
            return Err(Error::Domain(format!("negative protocol weight for N={n}, M={m}")));
        }
        let weights = mixture.weights.iter().map(|p| p.to_f64()).collect();
        Ok(MultipartyModel {
            mixture,
            weights,
            quantum: scenario.quantum_distribution(),
            m,
            guess_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn mixture(&self) -> &ProtocolMixture {
        &self.mixture
    }

    pub fn quantum(&self) -> &OutcomeDistribution<f64> {
        &self.quantum
    }

    fn n(&self) -> usize {
        self.quantum.n_parties()
    }

    /// `P(a_G | X'_G)` for every `a_G` in radix order over `G`.
    fn guess_distribution(&self, mask: u32, settings_g: &[usize]) -> Vec<f64> {
        let key = (mask, settings_g.to_vec());
        if let Some(v) = self.guess_cache.lock().expect("cache").get(&key) {
            return v.clone();
        }
        let n = self.n();
        let group: Vec<usize> = (0..n).filter(|p| mask >> p & 1 == 1).collect();
        let mut settings = vec![0; n];
        for (&p, &x) in group.iter().zip(settings_g) {
            settings[p] = x;
        }
        let radices: Vec<usize> =
            group.iter().map(|&p| self.quantum.alphabets()[p][settings[p]]).collect();
        let size: usize = radices.iter().product();
        let mut outcomes = vec![None; n];
        let dist: Vec<f64> = (0..size)
            .map(|j| {
                for (&p, a) in group.iter().zip(decode_radix(j, &radices)) {
                    outcomes[p] = Some(a);
                }
                self.quantum.marginal(&settings, &outcomes).expect("in range")
            })
            .collect();
        self.guess_cache.lock().expect("cache").insert(key, dist.clone());
        dist
    }

    fn special_response(&self, hidden: &MultipartyHidden, special: usize, setting: usize) -> Response {
        let n = self.n();
        let mut settings = vec![0; n];
        let mut outcomes = vec![None; n];
        for (p, x, a) in hidden.guessed() {
            settings[p] = x;
            outcomes[p] = Some(a);
        }
        settings[special] = setting;
        let k = self.quantum.alphabets()[special][setting];
        let joint: Vec<f64> = (0..k)
            .map(|b| {
                outcomes[special] = Some(b);
                self.quantum.marginal(&settings, &outcomes).expect("in range")
            })
            .collect();
        let total: f64 = joint.iter().sum();
        joint
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(b, p)| (Outcome::Click(b), p / total))
            .collect()
    }

    /// Every hidden value of protocol `i` with its probability inside `P_i`.
    fn protocol_support(&self, i: usize) -> Vec<(f64, MultipartyHidden)> {
        let n = self.n();
        let subsets: Vec<u32> = (0u32..1 << n).filter(|s| s.count_ones() as usize == i).collect();
        let mut out = Vec::new();
        for &silent in &subsets {
            let w_subset = 1.0 / subsets.len() as f64;
            if i == n {
                out.push((w_subset, MultipartyHidden { protocol: i, roles: vec![PartyRole::Silent; n] }));
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|p| silent >> p & 1 == 0).collect();
            for &special in &free {
                let group: Vec<usize> = free.iter().copied().filter(|&p| p != special).collect();
                let mask = group.iter().fold(0u32, |acc, p| acc | 1 << p);
                let setting_radices = vec![self.m; group.len()];
                let n_guesses = self.m.pow(group.len() as u32);
                let w_guess = w_subset / free.len() as f64 / n_guesses as f64;
                for sj in 0..n_guesses {
                    let settings_g = decode_radix(sj, &setting_radices);
                    let dist = self.guess_distribution(mask, &settings_g);
                    let radices: Vec<usize> = group
                        .iter()
                        .zip(&settings_g)
                        .map(|(&p, &x)| self.quantum.alphabets()[p][x])
                        .collect();
                    for (aj, &pa) in dist.iter().enumerate() {
                        if pa <= SUPPORT_FLOOR {
                            continue;
                        }
                        let mut roles = vec![PartyRole::Silent; n];
                        roles[special] = PartyRole::Special;
                        for ((&p, &x), a) in group.iter().zip(&settings_g).zip(decode_radix(aj, &radices)) {
                            roles[p] = PartyRole::Guessed { setting: x, outcome: a };
                        }
                        out.push((w_guess * pa, MultipartyHidden { protocol: i, roles }));
                    }
                }
            }
        }
        out
    }
}

impl LocalModel for MultipartyModel {
    type Hidden = MultipartyHidden;

    fn n_parties(&self) -> usize {
        self.n()
    }

    fn alphabets(&self) -> Vec<Vec<usize>> {
        self.quantum.alphabets().to_vec()
    }

    fn hidden_support(&self) -> Vec<(f64, MultipartyHidden)> {
        ProtocolIndex::all(self.n())
            .filter(|i| self.weights[i.get()] > 0.0)
            .flat_map(|i| {
                let w = self.weights[i.get()];
                self.protocol_support(i.get()).into_iter().map(move |(p, h)| (w * p, h))
            })
            .collect()
    }

    fn sample_hidden<R: Rng + ?Sized>(&self, rng: &mut R) -> MultipartyHidden {
        let n = self.n();
        let i = draw_index(&self.weights, rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut roles = vec![PartyRole::Silent; n];
        if i == n {
            return MultipartyHidden { protocol: i, roles };
        }
        // order[..i] silent, order[i] special, the rest guessed
        roles[order[i]] = PartyRole::Special;
        let mut group: Vec<usize> = order[i + 1..].to_vec();
        group.sort_unstable();
        let mask = group.iter().fold(0u32, |acc, p| acc | 1 << p);
        let settings_g: Vec<usize> = group.iter().map(|_| rng.random_range(0..self.m)).collect();
        let dist: Vec<f64> = self
            .guess_distribution(mask, &settings_g)
            .into_iter()
            .map(|p| if p > SUPPORT_FLOOR { p } else { 0.0 })
            .collect();
        let radices: Vec<usize> = group
            .iter()
            .zip(&settings_g)
            .map(|(&p, &x)| self.quantum.alphabets()[p][x])
            .collect();
        let aj = draw_index(&dist, rng);
        for ((&p, &x), a) in group.iter().zip(&settings_g).zip(decode_radix(aj, &radices)) {
            roles[p] = PartyRole::Guessed { setting: x, outcome: a };
        }
        MultipartyHidden { protocol: i, roles }
    }

    fn respond(&self, party: usize, hidden: &MultipartyHidden, setting: usize) -> Response {
        match hidden.roles[party] {
            PartyRole::Silent => vec![(Outcome::NoClick, 1.0)],
            PartyRole::Guessed { setting: x, outcome } if x == setting => {
                vec![(Outcome::Click(outcome), 1.0)]
            }
            PartyRole::Guessed { .. } => vec![(Outcome::NoClick, 1.0)],
            PartyRole::Special => self.special_response(hidden, party, setting),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::two_party::TwoPartyModel;
    use crate::lhv::{exact_distribution, sample_counts};
    use crate::quantum::{Povm, QuantumState};
    use crate::verify::{compare_float, statistical_match};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ghz_scenario(n: usize, m: usize) -> Scenario {
        let ghz = QuantumState::ghz(n, 2).unwrap();
        let povms = (0..m).map(|x| Povm::qubit_angle(PI * x as f64 / m as f64)).collect();
        Scenario::uniform(ghz, povms).unwrap()
    }

    fn check_reproduction(s: &Scenario) {
        let model = MultipartyModel::new(s).unwrap();
        let eta = model.mixture().eta.to_f64();
        let exact = exact_distribution(&model);
        let target = s.quantum_distribution().extend_with_inefficiency(&eta).unwrap();
        let report = compare_float(&exact, &target, 1e-10).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn reproduces_ghz_three_parties() {
        let s = ghz_scenario(3, 2);
        check_reproduction(&s);
        let exact = exact_distribution(&MultipartyModel::new(&s).unwrap());
        let silent = exact.get(&[0, 1, 0], &[Outcome::NoClick; 3]).unwrap();
        assert!((silent - 8.0 / 125.0).abs() < 1e-12);
    }

    #[test]
    fn reproduces_larger_cases() {
        check_reproduction(&ghz_scenario(3, 3));
        check_reproduction(&ghz_scenario(4, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = QuantumState::ghz(3, 2).unwrap();
        let povms = vec![Povm::random(2, 3, &mut rng), Povm::computational(2)];
        check_reproduction(&Scenario::uniform(w, povms).unwrap());
    }

    #[test]
    fn two_parties_agree_with_two_party_model() {
        let s = ghz_scenario(2, 3);
        let multi = exact_distribution(&MultipartyModel::new(&s).unwrap());
        let two = exact_distribution(&TwoPartyModel::new(&s).unwrap());
        assert!(compare_float(&multi, &two, 1e-10).unwrap().pass);
    }

    #[test]
    fn size_guard() {
        let ghz = QuantumState::ghz(6, 2).unwrap();
        let s = Scenario::uniform(ghz, vec![Povm::computational(2), Povm::qubit_angle(1.0)]).unwrap();
        assert!(matches!(MultipartyModel::new(&s), Err(Error::SizeGuard(_))));
        let s = ghz_scenario(3, 5);
        assert!(matches!(MultipartyModel::new(&s), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn rejects_unequal_settings() {
        let ghz = QuantumState::ghz(3, 2).unwrap();
        let c = Povm::computational(2);
        let s = Scenario::new(ghz, vec![vec![c.clone()], vec![c.clone(), c.clone()], vec![c]]).unwrap();
        assert!(matches!(MultipartyModel::new(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn support_weights_sum_to_one() {
        let model = MultipartyModel::new(&ghz_scenario(4, 3)).unwrap();
        let total: f64 = model.hidden_support().iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_matches_exact_distribution() {
        let s = ghz_scenario(3, 2);
        let model = MultipartyModel::new(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let counts = sample_counts(&model, 200_000, &mut rng).unwrap();
        let report = statistical_match(&counts, &exact_distribution(&model)).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
