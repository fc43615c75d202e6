//! Probability (and count) tables over settings choices and outcome tuples.
//!
//! A table holds one block per settings tuple. Inside a block, outcome
//! tuples are laid out in mixed radix with party 0 most significant. When the
//! table includes the no-click symbol it occupies the last digit value of
//! each party.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// One party's result: a detector click with an outcome label, or silence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    Click(usize),
    NoClick,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Click(a) => write!(f, "{a}"),
            Outcome::NoClick => f.write_str("∅"),
        }
    }
}

/// Numbers a distribution can be built from: `f64` or exact rationals.
pub trait Probability:
    Clone
    + fmt::Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
{
    fn to_f64(&self) -> f64;
}

impl Probability for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Probability for Rational {
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable<T> {
    /// `alphabets[party][setting]` = number of click outcomes.
    alphabets: Vec<Vec<usize>>,
    with_no_click: bool,
    blocks: Vec<Vec<T>>,
}

pub type OutcomeDistribution<P> = OutcomeTable<P>;
pub type OutcomeCounts = OutcomeTable<u64>;

impl<T: Clone> OutcomeTable<T> {
    pub fn filled(alphabets: Vec<Vec<usize>>, with_no_click: bool, value: T) -> Self {
        let mut table = OutcomeTable { alphabets, with_no_click, blocks: Vec::new() };
        table.blocks = (0..table.settings_count())
            .map(|s| {
                let settings = table.settings_tuple(s);
                vec![value.clone(); table.block_len(&settings)]
            })
            .collect();
        table
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, mut f: F) -> OutcomeTable<U> {
        OutcomeTable {
            alphabets: self.alphabets.clone(),
            with_no_click: self.with_no_click,
            blocks: self.blocks.iter().map(|b| b.iter().map(&mut f).collect()).collect(),
        }
    }
}

impl<T> OutcomeTable<T> {
    pub fn n_parties(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[Vec<usize>] {
        &self.alphabets
    }

    pub fn has_no_click(&self) -> bool {
        self.with_no_click
    }

    pub fn settings_counts(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    /// Number of settings tuples (blocks).
    pub fn settings_count(&self) -> usize {
        self.alphabets.iter().map(Vec::len).product()
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape<U>(&self, other: &OutcomeTable<U>) -> bool {
        self.alphabets == other.alphabets && self.with_no_click == other.with_no_click
    }

    pub fn settings_tuple(&self, index: usize) -> Vec<usize> {
        decode_radix(index, &self.settings_counts())
    }

    pub fn settings_index(&self, settings: &[usize]) -> Option<usize> {
        encode_radix(settings, &self.settings_counts())
    }

    fn radices(&self, settings: &[usize]) -> Vec<usize> {
        settings
            .iter()
            .enumerate()
            .map(|(p, &x)| self.alphabets[p][x] + usize::from(self.with_no_click))
            .collect()
    }

    fn block_len(&self, settings: &[usize]) -> usize {
        self.radices(settings).iter().product()
    }

    pub fn outcome_index(&self, settings: &[usize], outcomes: &[Outcome]) -> Option<usize> {
        if outcomes.len() != self.n_parties() {
            return None;
        }
        let digits: Option<Vec<usize>> = outcomes
            .iter()
            .enumerate()
            .map(|(p, o)| {
                let k = self.alphabets[p][settings[p]];
                match o {
                    Outcome::Click(a) if *a < k => Some(*a),
                    Outcome::NoClick if self.with_no_click => Some(k),
                    _ => None,
                }
            })
            .collect();
        encode_radix(&digits?, &self.radices(settings))
    }

    pub fn decode_outcomes(&self, settings: &[usize], index: usize) -> Vec<Outcome> {
        decode_radix(index, &self.radices(settings))
            .into_iter()
            .enumerate()
            .map(|(p, digit)| {
                if digit == self.alphabets[p][settings[p]] {
                    Outcome::NoClick
                } else {
                    Outcome::Click(digit)
                }
            })
            .collect()
    }

    pub fn block(&self, settings_index: usize) -> &[T] {
        &self.blocks[settings_index]
    }

    pub fn block_mut(&mut self, settings_index: usize) -> &mut [T] {
        &mut self.blocks[settings_index]
    }

    pub fn get(&self, settings: &[usize], outcomes: &[Outcome]) -> Option<&T> {
        let s = self.settings_index(settings)?;
        let o = self.outcome_index(settings, outcomes)?;
        self.blocks[s].get(o)
    }

    pub fn get_mut(&mut self, settings: &[usize], outcomes: &[Outcome]) -> Option<&mut T> {
        let s = self.settings_index(settings)?;
        let o = self.outcome_index(settings, outcomes)?;
        self.blocks[s].get_mut(o)
    }

    /// Human-readable cell identifier such as `X=(0,1) o=(1,∅)`.
    pub fn cell_label(&self, settings_index: usize, outcome_index: usize) -> String {
        let settings = self.settings_tuple(settings_index);
        let outcomes = self.decode_outcomes(&settings, outcome_index);
        format!("X=({}) o=({})", join(&settings), join(&outcomes))
    }

    /// Iterates `(settings_index, outcome_index, value)` over every cell.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(s, b)| b.iter().enumerate().map(move |(o, v)| (s, o, v)))
    }
}

impl<P: Probability> OutcomeDistribution<P> {
    pub fn block_sums(&self) -> Vec<P> {
        self.blocks
            .iter()
            .map(|b| b.iter().cloned().fold(P::zero(), |acc, x| acc + x))
            .collect()
    }

    /// Marginal of a click-only table: `None` parties are summed out, with
    /// their setting taken from `settings`.
    pub fn marginal(&self, settings: &[usize], outcomes: &[Option<usize>]) -> Result<P> {
        if self.with_no_click {
            return Err(Error::Domain("marginal of a table that already contains ∅".into()));
        }
        let s = self
            .settings_index(settings)
            .ok_or_else(|| Error::IndexOutOfRange(format!("settings {settings:?}")))?;
        let radices = self.radices(settings);
        for (p, o) in outcomes.iter().enumerate() {
            if let Some(a) = o {
                if *a >= radices[p] {
                    return Err(Error::IndexOutOfRange(format!("outcome {a} of party {p}")));
                }
            }
        }
        let free: Vec<usize> = (0..outcomes.len()).filter(|&p| outcomes[p].is_none()).collect();
        let free_radices: Vec<usize> = free.iter().map(|&p| radices[p]).collect();
        let mut digits: Vec<usize> = outcomes.iter().map(|o| o.unwrap_or(0)).collect();
        let mut total = P::zero();
        for j in 0..free_radices.iter().product::<usize>() {
            for (p, d) in free.iter().zip(decode_radix(j, &free_radices)) {
                digits[*p] = d;
            }
            let idx = encode_radix(&digits, &radices).expect("digits in range");
            total = total + self.blocks[s][idx].clone();
        }
        Ok(total)
    }

    /// Adds independent detector failures with click probability `eta`.
    ///
    /// A cell where the parties in `K` are silent and the rest show
    /// `outcomes_S` gets `eta^(N-|K|) (1-eta)^|K| P(outcomes_S | settings)`,
    /// the marginal being taken over the silent parties.
    pub fn extend_with_inefficiency(&self, eta: &P) -> Result<OutcomeDistribution<P>> {
        if self.with_no_click {
            return Err(Error::Domain("input already contains no-click outcomes".into()));
        }
        if *eta < P::zero() || *eta > P::one() {
            return Err(Error::Domain(format!("eta {eta:?} outside [0, 1]")));
        }
        let n = self.n_parties();
        let miss = P::one() - eta.clone();
        let pattern_weight: Vec<P> = (0..=n)
            .map(|k| {
                let mut w = P::one();
                for _ in 0..n - k {
                    w = w * eta.clone();
                }
                for _ in 0..k {
                    w = w * miss.clone();
                }
                w
            })
            .collect();
        let mut out = OutcomeTable::filled(self.alphabets.clone(), true, P::zero());
        for s in 0..self.settings_count() {
            let settings = self.settings_tuple(s);
            let radices = self.radices(&settings);
            let ext_radices = out.radices(&settings);
            for (o, p) in self.blocks[s].iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let digits = decode_radix(o, &radices);
                for mask in 0u32..(1 << n) {
                    let silent = mask.count_ones() as usize;
                    let ext: Vec<usize> = (0..n)
                        .map(|q| if mask >> q & 1 == 1 { radices[q] } else { digits[q] })
                        .collect();
                    let idx = encode_radix(&ext, &ext_radices).expect("in range");
                    let cell = &mut out.blocks[s][idx];
                    *cell = cell.clone() + pattern_weight[silent].clone() * p.clone();
                }
            }
        }
        Ok(out)
    }

    /// Distribution conditioned on every party clicking, as a click-only table.
    pub fn conditional_on_all_clicks(&self) -> Result<OutcomeDistribution<f64>> {
        if !self.with_no_click {
            return Ok(self.map(Probability::to_f64));
        }
        let mut out = OutcomeTable::filled(self.alphabets.clone(), false, 0.0);
        for s in 0..self.settings_count() {
            let settings = self.settings_tuple(s);
            let mut norm = 0.0;
            let len = out.blocks[s].len();
            for o in 0..len {
                let outcomes = out.decode_outcomes(&settings, o);
                let v = self.get(&settings, &outcomes).expect("same alphabet").to_f64();
                out.blocks[s][o] = v;
                norm += v;
            }
            if norm <= 0.0 {
                return Err(Error::Domain(format!("no all-click events for settings {settings:?}")));
            }
            for v in &mut out.blocks[s] {
                *v /= norm;
            }
        }
        Ok(out)
    }
}

impl OutcomeCounts {
    pub fn record(&mut self, settings: &[usize], outcomes: &[Outcome]) -> Result<()> {
        let cell = self
            .get_mut(settings, outcomes)
            .ok_or_else(|| Error::IndexOutOfRange(format!("{settings:?} {outcomes:?}")))?;
        *cell += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.blocks.iter().flatten().sum()
    }

    pub fn block_total(&self, settings_index: usize) -> u64 {
        self.blocks[settings_index].iter().sum()
    }

    /// Adds another count table of the same shape into this one.
    pub fn merge(&mut self, other: &OutcomeCounts) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::IndexSetMismatch("count tables differ in shape".into()));
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

pub(crate) fn decode_radix(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (slot, &r) in digits.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
    digits
}

pub(crate) fn encode_radix(digits: &[usize], radices: &[usize]) -> Option<usize> {
    if digits.len() != radices.len() {
        return None;
    }
    digits.iter().zip(radices).try_fold(0usize, |acc, (&d, &r)| (d < r).then(|| acc * r + d))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
