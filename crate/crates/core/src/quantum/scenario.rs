use serde::{Deserialize, Serialize};

use super::{CMatrix, CVector, Povm, QuantumState, RankOnePovm, C64};
use crate::distribution::{OutcomeDistribution, OutcomeTable};
use crate::error::{Error, Result};

/// A Bell experiment: a shared state and, for each party, the list of
/// measurements it may choose from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    state: QuantumState,
    settings: Vec<Vec<Povm>>,
}

impl Scenario {
    pub fn new(state: QuantumState, settings: Vec<Vec<Povm>>) -> Result<Self> {
        let n = state.n_parties();
        if n < 2 {
            return Err(Error::Dimension(format!("a scenario needs at least 2 parties, got {n}")));
        }
        if settings.len() != n {
            return Err(Error::Dimension(format!(
                "state has {n} parties but {} setting lists were given",
                settings.len()
            )));
        }
        for (party, list) in settings.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Dimension(format!("party {party} has no settings")));
            }
            for (x, povm) in list.iter().enumerate() {
                if povm.dim() != state.dims()[party] {
                    return Err(Error::Dimension(format!(
                        "party {party} setting {x}: POVM dimension {} but local dimension {}",
                        povm.dim(),
                        state.dims()[party]
                    )));
                }
                povm.validate()?;
            }
        }
        Ok(Scenario { state, settings })
    }

    /// Every party uses the same list of measurements.
    pub fn uniform(state: QuantumState, povms: Vec<Povm>) -> Result<Self> {
        let n = state.n_parties();
        Scenario::new(state, vec![povms; n])
    }

    pub fn n_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn state(&self) -> &QuantumState {
        &self.state
    }

    pub fn settings(&self, party: usize) -> &[Povm] {
        &self.settings[party]
    }

    pub fn povm(&self, party: usize, setting: usize) -> Option<&Povm> {
        self.settings.get(party)?.get(setting)
    }

    pub fn settings_counts(&self) -> Vec<usize> {
        self.settings.iter().map(Vec::len).collect()
    }

    /// The common number of settings, if every party has the same count.
    pub fn uniform_settings_count(&self) -> Option<usize> {
        let m = self.settings[0].len();
        self.settings.iter().all(|s| s.len() == m).then_some(m)
    }

    /// `alphabets[party][setting]` = number of outcomes of that POVM.
    pub fn alphabets(&self) -> Vec<Vec<usize>> {
        self.settings.iter().map(|l| l.iter().map(Povm::len).collect()).collect()
    }

    /// `Tr((x_a ⊗ y_b ⊗ ...) rho)`. A `None` outcome puts the identity on
    /// that party, giving the marginal over the others.
    pub fn quantum_joint(&self, settings: &[usize], outcomes: &[Option<usize>]) -> Result<f64> {
        let n = self.n_parties();
        if settings.len() != n || outcomes.len() != n {
            return Err(Error::IndexOutOfRange(format!(
                "expected {n} settings and outcomes, got {} and {}",
                settings.len(),
                outcomes.len()
            )));
        }
        let mut ops: Vec<Option<&CMatrix>> = Vec::with_capacity(n);
        for party in 0..n {
            let povm = self.povm(party, settings[party]).ok_or_else(|| {
                Error::IndexOutOfRange(format!("party {party} setting {}", settings[party]))
            })?;
            ops.push(match outcomes[party] {
                Some(a) => Some(povm.element(a).ok_or_else(|| {
                    Error::IndexOutOfRange(format!("party {party} outcome {a}"))
                })?),
                None => None,
            });
        }
        Ok(self.state.local_expectation(&ops).max(0.0))
    }

    /// The full click-only table `P(a, b, ... | X, Y, ...)`.
    pub fn quantum_distribution(&self) -> OutcomeDistribution<f64> {
        let mut table = OutcomeTable::filled(self.alphabets(), false, 0.0);
        for s in 0..table.settings_count() {
            let settings = table.settings_tuple(s);
            for o in 0..table.block(s).len() {
                let outcomes: Vec<Option<usize>> = table
                    .decode_outcomes(&settings, o)
                    .into_iter()
                    .map(|x| match x {
                        crate::Outcome::Click(a) => Some(a),
                        crate::Outcome::NoClick => unreachable!("click-only table"),
                    })
                    .collect();
                table.block_mut(s)[o] =
                    self.quantum_joint(&settings, &outcomes).expect("indices from table");
            }
        }
        table
    }

    /// The same experiment with every POVM refined to rank one, plus the
    /// refinements (for coarse-graining back).
    pub fn refine_to_rank_one(&self) -> Result<(Scenario, Vec<Vec<RankOnePovm>>)> {
        let refined: Vec<Vec<RankOnePovm>> = self
            .settings
            .iter()
            .map(|l| l.iter().map(Povm::refine_to_rank_one).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let settings = refined.iter().map(|l| l.iter().map(RankOnePovm::to_povm).collect()).collect();
        Ok((Scenario::new(self.state.clone(), settings)?, refined))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ScenarioJson>(s)?.into_scenario()
    }

    pub fn to_json(&self) -> ScenarioJson {
        let state = &self.state;
        let data = match state.amplitudes() {
            Some(v) => v.iter().map(|z| [z.re, z.im]).collect(),
            None => {
                let rho = state.density_matrix();
                let d = rho.nrows();
                (0..d * d).map(|i| rho[(i / d, i % d)]).map(|z| [z.re, z.im]).collect()
            }
        };
        ScenarioJson {
            parties: self.n_parties(),
            state: Some(StateJson {
                kind: if state.is_pure() { StateKind::Pure } else { StateKind::Mixed },
                dims: state.dims().to_vec(),
                data,
            }),
            settings: self
                .settings
                .iter()
                .map(|l| l.iter().map(povm_to_json).collect())
                .collect(),
        }
    }
}

/// On-disk scenario. Complex numbers are `[re, im]`; a POVM is a list of
/// matrices, each a list of rows. Mixed-state data is the density matrix
/// flattened row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJson {
    pub parties: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateJson>,
    pub settings: Vec<Vec<PovmJson>>,
}

/// POVM elements, each a list of rows of `[re, im]` entries.
pub type PovmJson = Vec<Vec<Vec<[f64; 2]>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub kind: StateKind,
    pub dims: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

impl StateJson {
    pub fn into_state(self) -> Result<QuantumState> {
        let values: Vec<C64> = self.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
        match self.kind {
            StateKind::Pure => QuantumState::pure(self.dims, CVector::from_vec(values)),
            StateKind::Mixed => {
                let total: usize = self.dims.iter().product();
                if values.len() != total * total {
                    return Err(Error::Dimension(format!(
                        "mixed state needs {} entries, got {}",
                        total * total,
                        values.len()
                    )));
                }
                QuantumState::mixed(self.dims, CMatrix::from_row_slice(total, total, &values))
            }
        }
    }
}

impl ScenarioJson {
    pub fn povms(&self) -> Result<Vec<Vec<Povm>>> {
        self.settings
            .iter()
            .map(|l| l.iter().map(|p| povm_from_json(p)).collect::<Result<_>>())
            .collect()
    }

    pub fn into_scenario(self) -> Result<Scenario> {
        let povms = self.povms()?;
        let state = self
            .state
            .ok_or_else(|| Error::Dimension("scenario has no \"state\"".into()))?
            .into_state()?;
        if state.n_parties() != self.parties {
            return Err(Error::Dimension(format!(
                "\"parties\" is {} but the state has {} parties",
                self.parties,
                state.n_parties()
            )));
        }
        Scenario::new(state, povms)
    }
}

fn povm_from_json(elements: &[Vec<Vec<[f64; 2]>>]) -> Result<Povm> {
    let matrices = elements
        .iter()
        .map(|rows| {
            let d = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Dimension("POVM element is not square".into()));
            }
            Ok(CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::new(matrices)
}

fn povm_to_json(p: &Povm) -> Vec<Vec<Vec<[f64; 2]>>> {
    p.elements()
        .iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        })
        .collect()
}
