//! Diagonal operators as sparse sums of `Z`-strings.
//!
//! Mask bit `s` set means a Pauli `Z` on qubit `s`, so the string for mask `m`
//! has diagonal entries `(-1)^popcount(m & k)`. Synthesis and analysis are the
//! two directions of the Walsh–Hadamard transform; products of sums are XOR
//! convolutions of their coefficients.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AtaError, Result};
use crate::grid::{log2_exact, Spectrum};

/// Absolute magnitude below which coefficients are not stored.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// Tolerance used by [`decompose_operator`] for both pruning and the support
/// check.
pub const DECOMPOSE_TOL: f64 = 1e-10;

/// Scalar field for Pauli-sum coefficients: `f64` for Hermitian diagonals,
/// `Complex64` for state representations.
pub trait Coefficient:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn scale(self, factor: f64) -> Self;
    fn magnitude(self) -> f64;
    fn to_complex(self) -> Complex64;

    fn norm_sqr(self) -> f64 {
        let m = self.magnitude();
        m * m
    }
}

impl Coefficient for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn scale(self, factor: f64) -> Self {
        self * factor
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

/// `Σ_m h_m Π_m` over `n` qubits, stored sparsely by mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPauliSum<C = f64> {
    n: u32,
    terms: BTreeMap<usize, C>,
    prune: f64,
}

impl<C: Coefficient> DiagonalPauliSum<C> {
    pub fn new(n: u32) -> Self {
        Self { n, terms: BTreeMap::new(), prune: DEFAULT_PRUNE }
    }

    pub fn identity(n: u32) -> Self {
        Self::from_terms(n, [(0, C::one())]).expect("mask 0 is always valid")
    }

    pub fn from_terms(n: u32, terms: impl IntoIterator<Item = (usize, C)>) -> Result<Self> {
        let mut sum = Self::new(n);
        for (mask, coeff) in terms {
            sum.add_term(mask, coeff)?;
        }
        Ok(sum)
    }

    /// Sets a different prune threshold and reapplies it.
    pub fn with_prune(mut self, prune: f64) -> Self {
        self.prune = prune;
        self.terms.retain(|_, c| c.magnitude() > prune);
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, mask: usize) -> C {
        self.terms.get(&mask).copied().unwrap_or_else(C::zero)
    }

    /// Terms in ascending mask order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, C)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn masks(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().copied()
    }

    /// Accumulates `coeff` onto `mask`, dropping the entry if it falls under
    /// the prune threshold.
    pub fn add_term(&mut self, mask: usize, coeff: C) -> Result<()> {
        if mask >= self.dim() {
            return Err(AtaError::InvalidParameter(format!(
                "mask {mask} out of range for {} qubits",
                self.n
            )));
        }
        let entry = self.terms.entry(mask).or_insert_with(C::zero);
        *entry += coeff;
        if entry.magnitude() <= self.prune {
            self.terms.remove(&mask);
        }
        Ok(())
    }

    /// `Σ |h_m|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|c| c.scale(factor))
    }

    pub fn map<D: Coefficient>(&self, f: impl Fn(C) -> D) -> DiagonalPauliSum<D> {
        let mut out = DiagonalPauliSum::new(self.n);
        out.prune = self.prune;
        for (&m, &c) in &self.terms {
            let v = f(c);
            if v.magnitude() > out.prune {
                out.terms.insert(m, v);
            }
        }
        out
    }

    pub fn to_complex(&self) -> DiagonalPauliSum<Complex64> {
        self.map(Coefficient::to_complex)
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: C, other: &Self, b: C) -> Result<Self> {
        check_qubits(self.n, other.n)?;
        let mut out = Self::new(self.n);
        out.prune = self.prune;
        for (m, c) in self.iter() {
            out.add_term(m, a * c)?;
        }
        for (m, c) in other.iter() {
            out.add_term(m, b * c)?;
        }
        Ok(out)
    }

    /// Dense coefficient vector of length `2^n`.
    pub fn to_dense_coefficients(&self) -> Vec<C> {
        let mut v = vec![C::zero(); self.dim()];
        for (&m, &c) in &self.terms {
            v[m] = c;
        }
        v
    }

    /// Diagonal entries `D_kk = Σ_m h_m (-1)^popcount(m & k)`.
    pub fn wht_synthesize(&self) -> Vec<C> {
        let mut v = self.to_dense_coefficients();
        fwht_in_place(&mut v);
        v
    }
}

fn check_qubits(a: u32, b: u32) -> Result<()> {
    if a != b {
        return Err(AtaError::QubitMismatch(a, b));
    }
    Ok(())
}

/// Unnormalized in-place fast Walsh–Hadamard transform.
///
/// Applying it twice multiplies by the length. Panics if the length is not a
/// power of two.
pub fn fwht_in_place<C: Coefficient>(data: &mut [C]) {
    let len = data.len();
    assert!(len.is_power_of_two(), "FWHT length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `h_p = 2^-n Σ_i λ_i (-1)^popcount(i & p)`, the exact inverse of
/// [`DiagonalPauliSum::wht_synthesize`].
pub fn wht_analyze<C: Coefficient>(diag: &[C]) -> Result<DiagonalPauliSum<C>> {
    let n = log2_exact(diag.len())?;
    let mut v = diag.to_vec();
    fwht_in_place(&mut v);
    let inv = 1.0 / diag.len() as f64;
    let mut sum = DiagonalPauliSum::new(n);
    for (m, c) in v.into_iter().enumerate() {
        let c = c.scale(inv);
        if c.magnitude() > sum.prune {
            sum.terms.insert(m, c);
        }
    }
    Ok(sum)
}

/// Z-string decomposition of a piecewise-quadratic spectrum.
///
/// Analyzes `s`, prunes at [`DECOMPOSE_TOL`], and rejects any surviving term
/// acting on more than two qubits.
pub fn decompose_operator(s: &Spectrum) -> Result<DiagonalPauliSum<f64>> {
    let sum = wht_analyze(s.values())?.with_prune(DECOMPOSE_TOL);
    if let Some((mask, coeff)) = sum.iter().find(|(m, _)| m.count_ones() > 2) {
        return Err(AtaError::SupportViolation { mask, popcount: mask.count_ones(), coeff });
    }
    Ok(sum)
}

/// Coefficients of the product operator: `(a*b)_m = Σ_{p^q=m} a_p b_q`.
///
/// Sparse double loop for small operands; falls back to pointwise products in
/// the diagonal domain when the pair count exceeds a dense transform's cost.
pub fn xor_convolve<C: Coefficient>(
    a: &DiagonalPauliSum<C>,
    b: &DiagonalPauliSum<C>,
) -> Result<DiagonalPauliSum<C>> {
    check_qubits(a.n, b.n)?;
    let dim = a.dim();
    let pairs = a.len().saturating_mul(b.len());
    let dense_cost = dim.saturating_mul(a.n as usize + 2).saturating_mul(3);
    let mut acc = vec![C::zero(); dim];
    if pairs <= dense_cost {
        for (p, x) in a.iter() {
            for (q, y) in b.iter() {
                acc[p ^ q] += x * y;
            }
        }
    } else {
        let (da, db) = (a.wht_synthesize(), b.wht_synthesize());
        acc = da.into_iter().zip(db).map(|(x, y)| x * y).collect();
        fwht_in_place(&mut acc);
        let inv = 1.0 / dim as f64;
        acc.iter_mut().for_each(|c| *c = c.scale(inv));
    }
    let prune = a.prune.min(b.prune);
    let mut out = DiagonalPauliSum::new(a.n);
    out.prune = prune;
    for (m, c) in acc.into_iter().enumerate() {
        if c.magnitude() > prune {
            out.terms.insert(m, c);
        }
    }
    Ok(out)
}

/// Keeps the `d_cut` largest-magnitude terms; ties go to the smaller mask.
pub fn truncate_top<C: Coefficient>(p: &DiagonalPauliSum<C>, d_cut: usize) -> DiagonalPauliSum<C> {
    truncate_top_with_dropped(p, d_cut).0
}

/// Like [`truncate_top`], also returning the dropped squared mass `Σ|h|²`.
pub fn truncate_top_with_dropped<C: Coefficient>(
    p: &DiagonalPauliSum<C>,
    d_cut: usize,
) -> (DiagonalPauliSum<C>, f64) {
    if p.len() <= d_cut {
        return (p.clone(), 0.0);
    }
    let mut ranked: Vec<(usize, C)> = p.iter().collect();
    ranked.sort_by(|(ma, ca), (mb, cb)| {
        cb.magnitude().total_cmp(&ca.magnitude()).then(ma.cmp(mb))
    });
    let dropped = ranked[d_cut..].iter().map(|(_, c)| c.norm_sqr()).sum();
    let mut out = DiagonalPauliSum::new(p.n);
    out.prune = p.prune;
    out.terms.extend(ranked.into_iter().take(d_cut));
    (out, dropped)
}

#[derive(Serialize, Deserialize)]
struct SumJson<C> {
    n: u32,
    terms: Vec<(usize, C)>,
}

impl<C: Coefficient> Serialize for DiagonalPauliSum<C> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SumJson { n: self.n, terms: self.iter().collect() }.serialize(s)
    }
}

impl<'de, C: Coefficient> Deserialize<'de> for DiagonalPauliSum<C> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SumJson::<C>::deserialize(d)?;
        DiagonalPauliSum::from_terms(raw.n, raw.terms).map_err(serde::de::Error::custom)
    }
}
