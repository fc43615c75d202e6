//! The N-party protocol family and its mixture weights.
//!
//! Protocol `P_i` (`i = 0, 2, 3, ..., N`) silences a uniformly chosen set of
//! `i` parties, picks one of the remaining `N - i` parties as the special
//! party that always clicks, and guesses settings for the other
//! `N - i - 1`, each of which clicks with probability `1/M`. Mixing the
//! protocols with weights `p_i` reproduces the inefficient-detector click
//! statistics `eta^(N-k) (1-eta)^k` at `eta = N/((N-1)M + 1)` whenever the
//! weights come out nonnegative.
//!
//! All arithmetic here is exact: the weight recursion is numerically
//! unstable and cannot be run in floating point.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::eta_multiparty;
use crate::error::{Error, Result};
use crate::rational::{binomial, cmp_fractions, int, pow, reduce, Rational};

/// Number of parties forced silent; never 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ProtocolIndex(usize);

impl ProtocolIndex {
    pub fn new(n: usize, i: usize) -> Result<Self> {
        if i == 1 || i > n {
            return Err(Error::Domain(format!("no protocol P_{i} for N = {n}")));
        }
        Ok(ProtocolIndex(i))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// `0, 2, 3, ..., n`.
    pub fn all(n: usize) -> impl Iterator<Item = ProtocolIndex> {
        (0..=n).filter(|&i| i != 1).map(ProtocolIndex)
    }
}

fn check_nm(n: u64, m: u64) -> Result<()> {
    if n < 2 || m < 2 {
        return Err(Error::Domain(format!("need N >= 2 and M >= 2 (got {n}, {m})")));
    }
    Ok(())
}

/// Probability under `P_i` that `k` given parties are silent and the other
/// `N - k` click:
/// `C(k,i)/C(N,i) · (N-k)/(N-i) · (M-1)^(k-i) / M^(N-i-1)`, zero for
/// `k < i`, and 1 for `i = k = N`.
pub fn q_i_k(n: u64, m: u64, i: ProtocolIndex, k: u64) -> Result<Rational> {
    check_nm(n, m)?;
    let iu = i.get() as u64;
    if iu > n || k > n {
        return Err(Error::Domain(format!("i = {iu}, k = {k} out of range for N = {n}")));
    }
    if k < iu {
        return Ok(Rational::zero());
    }
    if iu == n {
        return Ok(Rational::one());
    }
    Ok(q_prime(n, i, k)?
        * pow(&int(m - 1), k - iu)
        / pow(&int(m), n - iu - 1))
}

/// `q_i_k` with the `M` dependence stripped:
/// `C(k,i)/C(N,i) · (N-k)/(N-i)`.
///
/// For `i = k = N` the formula is `0/0`; this returns `1 = 1/C(N,N)`, which
/// keeps every `q'` free of `M`. See [`r_to_weight_factor`] for how that
/// choice enters the relation between `r_N` and `p_N`.
pub fn q_prime(n: u64, i: ProtocolIndex, k: u64) -> Result<Rational> {
    let iu = i.get() as u64;
    if n < 2 || k > n {
        return Err(Error::Domain(format!("k = {k} out of range for N = {n}")));
    }
    if k < iu {
        return Err(Error::Domain(format!("q' needs k >= i (k = {k}, i = {iu})")));
    }
    if iu == n {
        return Ok(Rational::one());
    }
    Ok(Rational::new(binomial(k, iu), binomial(n, iu))
        * Rational::new((n - k).into(), (n - iu).into()))
}

/// The `M`-independent sequence `r_0..r_N` by direct exact recursion:
/// `r_0 = 1`, `r_1 = 0`,
/// `r_k = (1/q'^k(k)) Σ_{i<k} r_i (ρ q'^i(k-1) - q'^i(k))` with
/// `ρ = q'^0(1)/q'^0(0)`.
pub fn recursion_r(n: u64) -> Result<Vec<Rational>> {
    if n < 2 {
        return Err(Error::Domain(format!("need N >= 2, got {n}")));
    }
    let nu = n as usize;
    let p0 = ProtocolIndex(0);
    let rho = q_prime(n, p0, 1)? / q_prime(n, p0, 0)?;
    let mut r = vec![Rational::one(), Rational::zero()];
    for k in 2..=n {
        let mut acc = Rational::zero();
        for i in ProtocolIndex::all(nu).take_while(|i| (i.get() as u64) < k) {
            let ri = &r[i.get()];
            if ri.is_zero() {
                continue;
            }
            acc += ri * (&rho * q_prime(n, i, k - 1)? - q_prime(n, i, k)?);
        }
        r.push(acc / q_prime(n, ProtocolIndex(k as usize), k)?);
    }
    Ok(r)
}

/// The recursion for `r` rewritten over the integers.
///
/// With `t_i = r_i / (C(N,i)(N-i))` every term `r_i q'^i(k)` becomes
/// `t_i C(k,i)(N-k)`, so
/// `t_k = Σ_{i<k} t_i e(k,i) / (N(N-k))` with the integer coefficient
/// `e(k,i) = (N-1)(N-k+1)C(k-1,i) - N(N-k)C(k,i)`. Writing
/// `t_k = T_k / D_k`, `D_0 = N`, `D_k = D_{k-1} N(N-k)`, the numerators obey
/// `T_k = Σ_{i<k} T_i e(k,i) Π_{j=i+1}^{k-1} N(N-j)`, evaluated in Horner
/// form with no gcd work. Returns `(numerator, denominator)` pairs of
/// `r_0..r_N`, unreduced, with positive denominators.
fn recursion_r_integer(n: u64) -> Vec<(BigInt, BigInt)> {
    let nn = BigInt::from(n);
    let f = |j: u64| BigInt::from(n * (n - j));
    let mut t_num: Vec<BigInt> = vec![BigInt::one(), BigInt::zero()];
    let mut den: Vec<BigInt> = vec![nn.clone(), nn.clone() * f(1)];
    let mut out = vec![(BigInt::one(), BigInt::one()), (BigInt::zero(), BigInt::one())];
    for k in 2..=n {
        let (lead_prev, lead) = (BigInt::from((n - 1) * (n - k + 1)), BigInt::from(n * (n - k)));
        // C(k-1, i) and C(k, i), advanced along i
        let (mut c_prev, mut c_cur) = (BigInt::one(), BigInt::one());
        let mut acc = BigInt::zero();
        for i in 0..k {
            if i > 0 {
                acc *= f(i);
                c_prev = c_prev * (k - i) / i;
                c_cur = c_cur * (k + 1 - i) / i;
            }
            let ti = &t_num[i as usize];
            if !ti.is_zero() {
                acc += ti * (&lead_prev * &c_prev - &lead * &c_cur);
            }
        }
        if k < n {
            let dk = &den[(k - 1) as usize] * f(k);
            let scale = binomial(n, k) * BigInt::from(n - k);
            out.push((&acc * scale, dk.clone()));
            t_num.push(acc);
            den.push(dk);
        } else {
            // r_N = S_N = H_N / (N D_{N-1})
            out.push((acc, &nn * &den[(n - 1) as usize]));
        }
    }
    out
}

/// Same values as [`recursion_r`], computed through the integer route.
pub fn recursion_r_scaled(n: u64) -> Result<Vec<Rational>> {
    if n < 2 {
        return Err(Error::Domain(format!("need N >= 2, got {n}")));
    }
    Ok(recursion_r_integer(n).into_iter().map(|(a, b)| reduce(a, b)).collect())
}

/// Factor `c_k` in `p_k / p_0 = c_k r_k`: `((M-1)/M)^k` for `k < N` and
/// `(M-1)^N / M^(N-1)` for `k = N` (the extra `M` comes from
/// `q^N(N) = 1` against the `M`-free `q'^N(N) = 1`).
pub fn r_to_weight_factor(n: u64, m: u64, k: u64) -> Rational {
    let base = Rational::new((m - 1).into(), m.into());
    if k < n {
        pow(&base, k)
    } else {
        pow(&base, k) * int(m)
    }
}

/// Mixture weights `p_0, p_1 = 0, p_2, ..., p_N` (summing to 1) obtained
/// from an `r` sequence for a given `M`.
pub fn weights_from_r(n: u64, m: u64, r: &[Rational]) -> Vec<Rational> {
    let raw: Vec<Rational> = r
        .iter()
        .enumerate()
        .map(|(k, rk)| rk * r_to_weight_factor(n, m, k as u64))
        .collect();
    let total: Rational = raw.iter().cloned().sum();
    raw.into_iter().map(|p| p / &total).collect()
}

/// `q(k)` for `k = 0..N`: probability that `k` given detectors are silent
/// and the rest fire.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClickPatternProbabilities {
    pub n: u64,
    #[serde(serialize_with = "crate::rational::serialize_vec")]
    pub values: Vec<Rational>,
}

impl ClickPatternProbabilities {
    pub fn for_protocol(n: u64, m: u64, i: ProtocolIndex) -> Result<Self> {
        let values = (0..=n).map(|k| q_i_k(n, m, i, k)).collect::<Result<_>>()?;
        Ok(ClickPatternProbabilities { n, values })
    }

    pub fn quantum(n: u64, eta: &Rational) -> Self {
        let miss = Rational::one() - eta;
        let values = (0..=n).map(|k| pow(eta, n - k) * pow(&miss, k)).collect();
        ClickPatternProbabilities { n, values }
    }

    /// `Σ_k C(N,k) q(k)`; equals 1 for any well-formed model.
    pub fn total(&self) -> Rational {
        self.values
            .iter()
            .enumerate()
            .map(|(k, q)| q * Rational::from_integer(binomial(self.n, k as u64)))
            .sum()
    }

    /// `q(k) / q(k+1)` for `k = 0..N-1` (None where `q(k+1) = 0`).
    pub fn ratios(&self) -> Vec<Option<Rational>> {
        self.values
            .windows(2)
            .map(|w| (!w[1].is_zero()).then(|| &w[0] / &w[1]))
            .collect()
    }
}

/// Solved weights over the protocol family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolMixture {
    pub n: u64,
    pub m: u64,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub eta: Rational,
    /// `p_0..p_N`; `p_1` is always 0.
    #[serde(serialize_with = "crate::rational::serialize_vec")]
    pub weights: Vec<Rational>,
    /// `r_k = p_k / (p_0 c_k)`, see [`r_to_weight_factor`].
    #[serde(serialize_with = "crate::rational::serialize_vec")]
    pub r_sequence: Vec<Rational>,
}

impl ProtocolMixture {
    pub fn weight(&self, i: ProtocolIndex) -> &Rational {
        &self.weights[i.get()]
    }

    pub fn sum(&self) -> Rational {
        self.weights.iter().cloned().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|p| !p.is_negative())
    }

    /// `q^LHV(k) = Σ_i p_i q^i(k)`.
    pub fn click_patterns(&self) -> Result<ClickPatternProbabilities> {
        let values = (0..=self.n)
            .map(|k| {
                ProtocolIndex::all(self.n as usize)
                    .map(|i| Ok(self.weight(i) * q_i_k(self.n, self.m, i, k)?))
                    .sum::<Result<Rational>>()
            })
            .collect::<Result<_>>()?;
        Ok(ClickPatternProbabilities { n: self.n, values })
    }
}

/// Solves `eta^(N-k)(1-eta)^k = Σ_{i<=k} p_i q^i(k)` for `k = 0..N` at
/// `eta = N/((N-1)M+1)`. The system is lower triangular: row 0 gives
/// `p_0`, row 1 must hold identically, and rows `k >= 2` give `p_k` by
/// forward substitution.
pub fn solve_weights(n: u64, m: u64) -> Result<ProtocolMixture> {
    check_nm(n, m)?;
    let eta = eta_multiparty(n, m)?;
    let rhs = ClickPatternProbabilities::quantum(n, &eta).values;
    let nu = n as usize;
    let mut weights = vec![Rational::zero(); nu + 1];
    let p0 = ProtocolIndex(0);
    weights[0] = &rhs[0] / q_i_k(n, m, p0, 0)?;
    if &weights[0] * q_i_k(n, m, p0, 1)? != rhs[1] {
        return Err(Error::ConsistencyViolated { n: nu, m: m as usize });
    }
    for k in 2..=n {
        let mut known = Rational::zero();
        for i in ProtocolIndex::all(nu).take_while(|i| (i.get() as u64) < k) {
            if !weights[i.get()].is_zero() {
                known += &weights[i.get()] * q_i_k(n, m, i, k)?;
            }
        }
        weights[k as usize] =
            (&rhs[k as usize] - known) / q_i_k(n, m, ProtocolIndex(k as usize), k)?;
    }
    let r_sequence = weights
        .iter()
        .enumerate()
        .map(|(k, p)| p / (&weights[0] * r_to_weight_factor(n, m, k as u64)))
        .collect();
    Ok(ProtocolMixture { n, m, eta, weights, r_sequence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Check `r_k >= 0`, which covers every `M` at once.
    AllM,
    /// Check `p_i >= 0` for one `M`.
    FixedM(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: u64,
    /// Smallest `r_k` (or `p_i`) over `k ∈ {0, 2, ..., N}`; the fixed
    /// `r_1 = p_1 = 0` is left out.
    #[serde(serialize_with = "crate::rational::serialize")]
    pub min: Rational,
    pub argmin: u64,
    pub pass: bool,
}

/// Positivity check for one `N`.
pub fn scan_one(n: u64, mode: ScanMode) -> Result<ScanRow> {
    match mode {
        ScanMode::AllM => {
            if n < 2 {
                return Err(Error::Domain(format!("need N >= 2, got {n}")));
            }
            let r = recursion_r_integer(n);
            let mut best = 0usize;
            for k in 2..r.len() {
                let (a, b) = &r[k];
                let (c, d) = &r[best];
                if cmp_fractions(a, b, c, d).is_lt() {
                    best = k;
                }
            }
            let (a, b) = r[best].clone();
            let pass = r.iter().all(|(a, _)| !a.is_negative());
            Ok(ScanRow { n, min: reduce(a, b), argmin: best as u64, pass })
        }
        ScanMode::FixedM(m) => {
            let mix = solve_weights(n, m)?;
            let (argmin, min) = mix
                .weights
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != 1)
                .min_by(|x, y| x.1.cmp(y.1))
                .map(|(i, p)| (i as u64, p.clone()))
                .expect("N >= 2");
            Ok(ScanRow { n, pass: mix.is_nonnegative(), min, argmin })
        }
    }
}

/// Runs [`scan_one`] for `n_min..=n_max` in parallel and hands the rows to
/// `sink` in increasing `N`, as soon as each batch is done.
pub fn positivity_scan_each<E, F>(n_min: u64, n_max: u64, mode: ScanMode, mut sink: F) -> Result<(), E>
where
    F: FnMut(Result<ScanRow>) -> Result<(), E>,
{
    let batch = (rayon::current_num_threads() * 2).max(1) as u64;
    let mut start = n_min.max(2);
    while start <= n_max {
        let end = (start + batch - 1).min(n_max);
        let rows: Vec<Result<ScanRow>> =
            (start..=end).into_par_iter().map(|n| scan_one(n, mode)).collect();
        for row in rows {
            sink(row)?;
        }
        start = end + 1;
    }
    Ok(())
}

/// All rows for `N = 2..=n_max`.
pub fn positivity_scan(n_max: u64, mode: ScanMode) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    positivity_scan_each(2, n_max, mode, |row| {
        rows.push(row?);
        Ok::<(), Error>(())
    })?;
    Ok(rows)
}
