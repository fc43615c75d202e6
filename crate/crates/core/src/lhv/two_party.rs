//! The setting-guessing model for two parties.
//!
//! The hidden variable names one party (the "guessed" party), one of its
//! settings and an outcome drawn from that setting's quantum marginal. The
//! guessed party clicks only when its actual setting equals the guess and
//! then reports the guessed outcome; the other party always clicks and
//! samples the quantum conditional given the guess. A gate variable makes
//! both parties silent with probability `1 - proceed`, and the role is
//! assigned to Alice with probability `role`. At
//! `eta = (M_A + M_B - 2)/(M_A M_B - 1)` this reproduces the quantum
//! statistics with inefficient detectors exactly.

use rand::Rng;
use serde::Serialize;

use super::{draw_index, LocalModel, Response, SUPPORT_FLOOR};
use crate::bounds::{solve_symmetrization, SymmetrizationSolution};
use crate::distribution::OutcomeDistribution;
use crate::error::{Error, Result};
use crate::quantum::Scenario;
use crate::{Outcome, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AliceGuessed,
    BobGuessed,
}

impl Role {
    fn guessed_party(self) -> usize {
        match self {
            Role::AliceGuessed => 0,
            Role::BobGuessed => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPartyHidden {
    BothSilent,
    Proceed { role: Role, guessed_setting: usize, guessed_outcome: usize },
}

pub struct TwoPartyModel {
    solution: SymmetrizationSolution,
    /// Click-only quantum table.
    quantum: OutcomeDistribution<f64>,
    /// `marginals[party][setting][outcome]`.
    marginals: Vec<Vec<Vec<f64>>>,
}

impl TwoPartyModel {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        if scenario.n_parties() != 2 {
            return Err(Error::Dimension(format!(
                "two-party model needs 2 parties, got {}",
                scenario.n_parties()
            )));
        }
        let counts = scenario.settings_counts();
        let solution = solve_symmetrization(counts[0] as u64, counts[1] as u64)?;
        let quantum = scenario.quantum_distribution();
        let marginals = (0..2)
            .map(|party| {
                scenario
                    .settings(party)
                    .iter()
                    .enumerate()
                    .map(|(x, povm)| {
                        (0..povm.len())
                            .map(|a| {
                                let mut settings = [0, 0];
                                let mut outcomes = [None, None];
                                settings[party] = x;
                                outcomes[party] = Some(a);
                                scenario.quantum_joint(&settings, &outcomes)
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TwoPartyModel { solution, quantum, marginals })
    }

    pub fn solution(&self) -> &SymmetrizationSolution {
        &self.solution
    }

    pub fn quantum(&self) -> &OutcomeDistribution<f64> {
        &self.quantum
    }

    /// Probability of the three gate/role branches:
    /// (both silent, Alice guessed, Bob guessed).
    fn branch_weights(&self) -> [f64; 3] {
        let proceed = self.solution.proceed.to_f64();
        let role = self.solution.role.to_f64();
        [1.0 - proceed, proceed * role, proceed * (1.0 - role)]
    }

    /// Conditional distribution of the responding party given the guess,
    /// `P(a', b | X', Y) / P(a' | X')`, normalized over `b`.
    fn conditional(&self, guessed: usize, x_guess: usize, a_guess: usize, setting: usize) -> Response {
        let responder = 1 - guessed;
        let mut settings = [0; 2];
        settings[guessed] = x_guess;
        settings[responder] = setting;
        let k = self.quantum.alphabets()[responder][setting];
        let joint: Vec<f64> = (0..k)
            .map(|b| {
                let mut outcomes = [Outcome::Click(0); 2];
                outcomes[guessed] = Outcome::Click(a_guess);
                outcomes[responder] = Outcome::Click(b);
                *self.quantum.get(&settings, &outcomes).expect("in range")
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
}

impl LocalModel for TwoPartyModel {
    type Hidden = TwoPartyHidden;

    fn n_parties(&self) -> usize {
        2
    }

    fn alphabets(&self) -> Vec<Vec<usize>> {
        self.quantum.alphabets().to_vec()
    }

    fn hidden_support(&self) -> Vec<(f64, TwoPartyHidden)> {
        let [silent, alice, bob] = self.branch_weights();
        let mut out = Vec::new();
        if silent > 0.0 {
            out.push((silent, TwoPartyHidden::BothSilent));
        }
        for (role, w) in [(Role::AliceGuessed, alice), (Role::BobGuessed, bob)] {
            if w <= 0.0 {
                continue;
            }
            let margs = &self.marginals[role.guessed_party()];
            let m = margs.len() as f64;
            for (x, probs) in margs.iter().enumerate() {
                for (a, &p) in probs.iter().enumerate() {
                    if p > SUPPORT_FLOOR {
                        out.push((
                            w / m * p,
                            TwoPartyHidden::Proceed { role, guessed_setting: x, guessed_outcome: a },
                        ));
                    }
                }
            }
        }
        out
    }

    fn sample_hidden<R: Rng + ?Sized>(&self, rng: &mut R) -> TwoPartyHidden {
        let role = match draw_index(&self.branch_weights(), rng) {
            0 => return TwoPartyHidden::BothSilent,
            1 => Role::AliceGuessed,
            _ => Role::BobGuessed,
        };
        let margs = &self.marginals[role.guessed_party()];
        let x = rng.random_range(0..margs.len());
        let floored: Vec<f64> =
            margs[x].iter().map(|&p| if p > SUPPORT_FLOOR { p } else { 0.0 }).collect();
        let a = draw_index(&floored, rng);
        TwoPartyHidden::Proceed { role, guessed_setting: x, guessed_outcome: a }
    }

    fn respond(&self, party: usize, hidden: &TwoPartyHidden, setting: usize) -> Response {
        match *hidden {
            TwoPartyHidden::BothSilent => vec![(Outcome::NoClick, 1.0)],
            TwoPartyHidden::Proceed { role, guessed_setting, guessed_outcome } => {
                let guessed = role.guessed_party();
                if party == guessed {
                    if setting == guessed_setting {
                        vec![(Outcome::Click(guessed_outcome), 1.0)]
                    } else {
                        vec![(Outcome::NoClick, 1.0)]
                    }
                } else {
                    self.conditional(guessed, guessed_setting, guessed_outcome, setting)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::{exact_distribution, sample, sample_counts};
    use crate::quantum::{random_density_matrix, CMatrix, Povm, QuantumState};
    use crate::verify::{compare_float, statistical_match};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chsh() -> Scenario {
        use std::f64::consts::PI;
        let phi = QuantumState::maximally_entangled(2).unwrap();
        Scenario::new(
            phi,
            vec![
                vec![Povm::qubit_angle(0.0), Povm::qubit_angle(PI / 2.0)],
                vec![Povm::qubit_angle(PI / 4.0), Povm::qubit_angle(-PI / 4.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn reproduces_inefficient_quantum_statistics() {
        let s = chsh();
        let model = TwoPartyModel::new(&s).unwrap();
        let exact = exact_distribution(&model);
        let target = s.quantum_distribution().extend_with_inefficiency(&(2.0 / 3.0)).unwrap();
        let report = compare_float(&exact, &target, 1e-10).unwrap();
        assert!(report.pass, "{report:?}");
        let both_silent = exact.get(&[1, 0], &[Outcome::NoClick, Outcome::NoClick]).unwrap();
        assert!((both_silent - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn click_click_is_scaled_quantum() {
        let s = chsh();
        let exact = exact_distribution(&TwoPartyModel::new(&s).unwrap());
        let q = s.quantum_distribution();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let o = [Outcome::Click(a), Outcome::Click(b)];
                        let lhv = exact.get(&[x, y], &o).unwrap();
                        let qm = q.get(&[x, y], &o).unwrap();
                        assert!((lhv - 4.0 / 9.0 * qm).abs() < 1e-12);
                    }
                }
            }
        }
        let cond = exact.conditional_on_all_clicks().unwrap();
        assert!(compare_float(&cond, &q, 1e-10).unwrap().pass);
    }

    #[test]
    fn zero_weight_outcome_never_appears() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let zero = CMatrix::zeros(2, 2);
        let degenerate = Povm::new(vec![
            Povm::computational(2).elements()[0].clone(),
            Povm::computational(2).elements()[1].clone(),
            zero,
        ])
        .unwrap();
        let state = QuantumState::mixed(vec![2, 2], random_density_matrix(4, &mut rng)).unwrap();
        let s = Scenario::new(
            state,
            vec![vec![degenerate.clone(), Povm::random(2, 2, &mut rng)], vec![degenerate]],
        )
        .unwrap();
        let exact = exact_distribution(&TwoPartyModel::new(&s).unwrap());
        for (si, oi, v) in exact.cells() {
            let settings = exact.settings_tuple(si);
            let outs = exact.decode_outcomes(&settings, oi);
            let hits_zero = outs
                .iter()
                .enumerate()
                .any(|(p, o)| *o == Outcome::Click(2) && !(p == 0 && settings[0] == 1));
            if hits_zero {
                assert_eq!(*v, 0.0, "{}", exact.cell_label(si, oi));
            }
        }
    }

    #[test]
    fn alice_clicks_independent_of_her_label() {
        // P(a clicks with label a | X) / P^QM(a|X) is the same for every a
        let s = chsh();
        let exact = exact_distribution(&TwoPartyModel::new(&s).unwrap());
        let q = s.quantum_distribution();
        for x in 0..2 {
            let ratios: Vec<f64> = (0..2)
                .map(|a| {
                    let click: f64 = [Outcome::Click(0), Outcome::Click(1), Outcome::NoClick]
                        .iter()
                        .map(|ob| exact.get(&[x, 0], &[Outcome::Click(a), *ob]).unwrap())
                        .sum();
                    click / q.marginal(&[x, 0], &[Some(a), None]).unwrap()
                })
                .collect();
            assert!((ratios[0] - ratios[1]).abs() < 1e-12);
            assert!((ratios[0] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_three_parties() {
        let ghz = QuantumState::ghz(3, 2).unwrap();
        let s = Scenario::uniform(ghz, vec![Povm::computational(2)]).unwrap();
        assert!(matches!(TwoPartyModel::new(&s), Err(Error::Dimension(_))));
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let model = TwoPartyModel::new(&chsh()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..500).map(|i| sample(&model, &[i % 2, (i / 2) % 2], &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(99), run(99));
        assert_ne!(run(99), run(100));
    }

    #[test]
    fn sampler_matches_exact_distribution() {
        let model = TwoPartyModel::new(&chsh()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let counts = sample_counts(&model, 200_000, &mut rng).unwrap();
        let report = statistical_match(&counts, &exact_distribution(&model)).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
