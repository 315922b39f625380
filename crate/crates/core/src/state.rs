//! Dense complex statevectors in position or Fourier representation.
//!
//! Every ansatz unitary is `M†·Π_mask·M` with `M` the unitary DFT, so once a
//! vector sits in the Fourier domain each node costs `2^n` sign flips.

use std::cell::RefCell;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::grid::{log2_exact, Spectrum, MAX_QUBITS};
use crate::pauli::{fwht_in_place, Coefficient, DiagonalPauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Position,
    Fourier,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Position => "position",
            Domain::Fourier => "fourier",
        })
    }
}

/// A tree node: the unitary `M†·Π_mask·M` relative to the root.
///
/// Sequences of node unitaries compose by XOR of their masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub mask: usize,
}

impl NodeRef {
    pub fn new(mask: usize) -> Self {
        Self { mask }
    }

    pub fn then(self, other: NodeRef) -> NodeRef {
        NodeRef { mask: self.mask ^ other.mask }
    }
}

/// `(-1)^popcount(mask & k)`.
#[inline]
pub fn sign(mask: usize, k: usize) -> f64 {
    if (mask & k).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: u32,
    amps: Vec<Complex64>,
    domain: Domain,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn dft_in_place(data: &mut [Complex64], inverse: bool) {
    let len = data.len();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    });
    fft.process(data);
    let scale = 1.0 / (len as f64).sqrt();
    data.iter_mut().for_each(|a| *a *= scale);
}

impl Statevector {
    pub fn from_amps(amps: Vec<Complex64>, domain: Domain) -> Result<Self> {
        let n = log2_exact(amps.len())?;
        if n > MAX_QUBITS {
            return Err(AtaError::Capacity(format!("{n} qubits exceeds the {MAX_QUBITS}-qubit budget")));
        }
        Ok(Self { n, amps, domain })
    }

    /// Real position-domain data.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::from_amps(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), Domain::Position)
    }

    pub fn zeros(n: u32, domain: Domain) -> Self {
        Self { n, amps: vec![Complex64::new(0.0, 0.0); 1 << n], domain }
    }

    /// Computational basis state `|index>` in the position domain.
    pub fn basis(n: u32, index: usize) -> Self {
        let mut s = Self::zeros(n, Domain::Position);
        s.amps[index] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Unit-norm copy together with the original norm.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(AtaError::ZeroVector);
        }
        Ok((self.scaled(Complex64::new(1.0 / norm, 0.0)), norm))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { n: self.n, amps: self.amps.iter().map(|a| a * factor).collect(), domain: self.domain }
    }

    /// `self + factor·other`.
    pub fn axpy(&self, factor: Complex64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + factor * b).collect();
        Ok(Self { n: self.n, amps, domain: self.domain })
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>| / (‖self‖·‖other‖)`; invariant under complex scaling of
    /// either side.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ip = self.inner(other)?;
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Err(AtaError::ZeroVector);
        }
        Ok((ip.norm() / denom).min(1.0))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(AtaError::LengthMismatch { expected: self.len(), actual: other.len() });
        }
        if self.domain != other.domain {
            return Err(AtaError::WrongDomain { expected: self.domain, actual: other.domain });
        }
        Ok(())
    }

    fn require(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(AtaError::WrongDomain { expected: domain, actual: self.domain });
        }
        Ok(())
    }

    /// Unitary DFT, kernel `e^{-2πi·jk/2^n} / 2^{n/2}`.
    pub fn fourier(&self) -> Result<Self> {
        self.require(Domain::Position)?;
        let mut amps = self.amps.clone();
        dft_in_place(&mut amps, false);
        Ok(Self { n: self.n, amps, domain: Domain::Fourier })
    }

    pub fn inverse_fourier(&self) -> Result<Self> {
        self.require(Domain::Fourier)?;
        let mut amps = self.amps.clone();
        dft_in_place(&mut amps, true);
        Ok(Self { n: self.n, amps, domain: Domain::Position })
    }

    /// Either domain, converting as needed.
    pub fn to_domain(&self, domain: Domain) -> Result<Self> {
        match (self.domain, domain) {
            (a, b) if a == b => Ok(self.clone()),
            (Domain::Position, Domain::Fourier) => self.fourier(),
            _ => self.inverse_fourier(),
        }
    }

    /// `amps[k] *= (-1)^popcount(mask & k)`.
    pub fn apply_zstring(&self, mask: usize) -> Result<Self> {
        self.require(Domain::Fourier)?;
        let mut out = self.clone();
        for (k, a) in out.amps.iter_mut().enumerate() {
            if (mask & k).count_ones() & 1 == 1 {
                *a = -*a;
            }
        }
        Ok(out)
    }

    /// `amps[k] *= D_kk` with `D` the synthesized diagonal of `p`.
    pub fn apply_diag_sum<C: Coefficient>(&self, p: &DiagonalPauliSum<C>) -> Result<Self> {
        self.require(Domain::Fourier)?;
        if p.n() != self.n {
            return Err(AtaError::QubitMismatch(self.n, p.n()));
        }
        let diag = p.wht_synthesize();
        let amps = self.amps.iter().zip(diag).map(|(a, d)| a * d.to_complex()).collect();
        Ok(Self { n: self.n, amps, domain: Domain::Fourier })
    }

    /// Multiplies the Fourier amplitudes by a spectrum, i.e. applies the
    /// circulant operator it describes.
    pub fn apply_spectrum(&self, s: &Spectrum) -> Result<Self> {
        self.require(Domain::Fourier)?;
        if s.len() != self.len() {
            return Err(AtaError::LengthMismatch { expected: self.len(), actual: s.len() });
        }
        let amps = self.amps.iter().zip(s.values()).map(|(a, l)| a * l).collect();
        Ok(Self { n: self.n, amps, domain: Domain::Fourier })
    }

    /// Norm of the imaginary part relative to the total norm, measured in the
    /// position domain.
    pub fn reality_leakage(&self) -> Result<f64> {
        let pos = self.to_domain(Domain::Position)?;
        let total = pos.norm();
        if total == 0.0 {
            return Ok(0.0);
        }
        let imag: f64 = pos.amps.iter().map(|a| a.im * a.im).sum();
        Ok(imag.sqrt() / total)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.re).collect()
    }

    /// `index,real,imag` rows with a header, LF terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,real,imag\n");
        for (i, a) in self.amps.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{}", a.re, a.im);
        }
        out
    }
}

/// `M†·(Σ h_p Π_p)·M·|0…0>`, returned in the position domain.
///
/// Its Fourier image is the synthesized diagonal scaled by `2^{-n/2}`.
pub fn prepare_from_pauli_sum<C: Coefficient>(p: &DiagonalPauliSum<C>) -> Statevector {
    let n = p.n();
    let amp = 1.0 / ((1usize << n) as f64).sqrt();
    let amps = p.wht_synthesize().into_iter().map(|d| d.to_complex() * amp).collect();
    Statevector { n, amps, domain: Domain::Fourier }
        .inverse_fourier()
        .expect("constructed in the Fourier domain")
}

/// `<i|A′²|j>` for all pairs and `<i|A′|root>` for each `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlaps {
    pub gram: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
}

/// Direct evaluation: `Σ_k conj(r_k) σ_i(k) λ_k^p σ_j(k) r_k`, `O(2^n)` per
/// entry.
pub fn overlaps(
    root: &Statevector,
    spectrum: &Spectrum,
    masks_i: &[usize],
    masks_j: &[usize],
) -> Result<Overlaps> {
    root.require(Domain::Fourier)?;
    if spectrum.len() != root.len() {
        return Err(AtaError::LengthMismatch { expected: root.len(), actual: spectrum.len() });
    }
    let r = root.amps();
    let lam = spectrum.values();
    let entry = |i: usize, j: usize, power: i32| -> Complex64 {
        r.iter()
            .zip(lam)
            .enumerate()
            .map(|(k, (rk, l))| rk.conj() * rk * (sign(i, k) * l.powi(power) * sign(j, k)))
            .sum()
    };
    let gram = DMatrix::from_fn(masks_i.len(), masks_j.len(), |a, b| entry(masks_i[a], masks_j[b], 2));
    let rhs = DVector::from_fn(masks_i.len(), |a, _| entry(masks_i[a], 0, 1));
    Ok(Overlaps { gram, rhs })
}

/// All overlaps at once through Walsh tables.
///
/// With `w_k = |r_k|²`, `<i|A′²|j> = WHT(w·λ²)[i⊕j]` and
/// `<i|A′|root> = WHT(w·λ)[i]`. Building costs `O(n·2^n)`; lookups are
/// constant time.
#[derive(Debug, Clone)]
pub struct WalshTables {
    weights: Vec<f64>,
    lambda: Vec<f64>,
    second: Vec<f64>,
    first: Vec<f64>,
}

impl WalshTables {
    pub fn new(root: &Statevector, spectrum: &Spectrum) -> Result<Self> {
        root.require(Domain::Fourier)?;
        if spectrum.len() != root.len() {
            return Err(AtaError::LengthMismatch { expected: root.len(), actual: spectrum.len() });
        }
        let weights: Vec<f64> = root.amps().iter().map(|a| a.norm_sqr()).collect();
        let lambda = spectrum.values().to_vec();
        let mut second: Vec<f64> = weights.iter().zip(&lambda).map(|(w, l)| w * l * l).collect();
        let mut first: Vec<f64> = weights.iter().zip(&lambda).map(|(w, l)| w * l).collect();
        fwht_in_place(&mut second);
        fwht_in_place(&mut first);
        Ok(Self { weights, lambda, second, first })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `<i|A′²|j>`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.second[i ^ j]
    }

    /// `<i|A′|root>`.
    pub fn rhs(&self, i: usize) -> f64 {
        self.first[i]
    }

    pub fn overlaps(&self, masks_i: &[usize], masks_j: &[usize]) -> Overlaps {
        let gram = DMatrix::from_fn(masks_i.len(), masks_j.len(), |a, b| {
            Complex64::new(self.gram(masks_i[a], masks_j[b]), 0.0)
        });
        let rhs = DVector::from_fn(masks_i.len(), |a, _| Complex64::new(self.rhs(masks_i[a]), 0.0));
        Overlaps { gram, rhs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{approx_spectrum, GridSpec};
    use crate::pauli::decompose_operator;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(n: u32, seed: u64, domain: Domain) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1 << n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        Statevector::from_amps(amps, domain).unwrap()
    }

    // Textbook O(N²) DFT.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let len = x.len();
        (0..len)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / len as f64))
                    .sum::<Complex64>()
                    / (len as f64).sqrt()
            })
            .collect()
    }

    // Dense circulant A(c)-like matrix from a spectrum: F† diag(λ) F.
    fn dense_from_spectrum(s: &Spectrum) -> DMatrix<Complex64> {
        let len = s.len();
        let f = DMatrix::from_fn(len, len, |k, j| {
            Complex64::from_polar(1.0 / (len as f64).sqrt(), -2.0 * PI * (j * k) as f64 / len as f64)
        });
        let d = DMatrix::from_diagonal(&DVector::from_iterator(len, s.values().iter().map(|&l| c(l, 0.0))));
        f.adjoint() * d * f
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn fourier_of_delta_is_uniform() {
        let f = Statevector::basis(4, 0).fourier().unwrap();
        assert_eq!(f.domain(), Domain::Fourier);
        for a in f.amps() {
            assert!((a - c(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fourier_column() {
        let f = Statevector::basis(2, 1).fourier().unwrap();
        assert_close(f.amps(), &[c(0.5, 0.0), c(0.0, -0.5), c(-0.5, 0.0), c(0.0, 0.5)], 1e-15);
    }

    #[test]
    fn fourier_matches_naive_dft() {
        let s = random_state(6, 1, Domain::Position);
        assert_close(s.fourier().unwrap().amps(), &naive_dft(s.amps()), 1e-12);
    }

    #[test]
    fn fourier_round_trip_and_norm() {
        let s = random_state(8, 2, Domain::Position);
        let f = s.fourier().unwrap();
        assert!((f.norm() - s.norm()).abs() < 1e-12);
        assert_close(f.inverse_fourier().unwrap().amps(), s.amps(), 1e-12);
    }

    #[test]
    fn inverse_of_uniform_is_delta() {
        let u = Statevector::from_amps(vec![c(0.5, 0.0); 4], Domain::Fourier).unwrap();
        assert_close(u.inverse_fourier().unwrap().amps(), Statevector::basis(2, 0).amps(), 1e-15);
    }

    #[test]
    fn inverse_fourier_is_linear() {
        let a = random_state(5, 3, Domain::Fourier);
        let b = random_state(5, 4, Domain::Fourier);
        let z = c(0.3, -1.2);
        let lhs = a.axpy(z, &b).unwrap().inverse_fourier().unwrap();
        let rhs = a.inverse_fourier().unwrap().axpy(z, &b.inverse_fourier().unwrap()).unwrap();
        assert_close(lhs.amps(), rhs.amps(), 1e-12);
    }

    #[test]
    fn domain_checks() {
        let p = Statevector::basis(3, 0);
        assert!(matches!(p.inverse_fourier(), Err(AtaError::WrongDomain { .. })));
        assert!(matches!(p.apply_zstring(1), Err(AtaError::WrongDomain { .. })));
        let f = p.fourier().unwrap();
        assert!(matches!(f.fourier(), Err(AtaError::WrongDomain { .. })));
    }

    #[test]
    fn zstring_patterns() {
        let s = Statevector::from_amps(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)], Domain::Fourier)
            .unwrap();
        assert_eq!(s.apply_zstring(0).unwrap(), s);
        assert_eq!(s.apply_zstring(3).unwrap().real_parts(), vec![1.0, -2.0, -3.0, 4.0]);
        let r = random_state(6, 5, Domain::Fourier);
        assert_eq!(r.apply_zstring(37).unwrap().apply_zstring(37).unwrap(), r);
    }

    #[test]
    fn diag_sum_identity_and_single_mask() {
        let s = random_state(5, 6, Domain::Fourier);
        assert_eq!(s.apply_diag_sum(&DiagonalPauliSum::<f64>::identity(5)).unwrap(), s);
        let p = DiagonalPauliSum::from_terms(5, [(9, -2.0)]).unwrap();
        let want = s.apply_zstring(9).unwrap().scaled(c(-2.0, 0.0));
        assert_close(s.apply_diag_sum(&p).unwrap().amps(), want.amps(), 1e-15);
        let q = DiagonalPauliSum::<f64>::identity(4);
        assert_eq!(s.apply_diag_sum(&q).unwrap_err(), AtaError::QubitMismatch(5, 4));
    }

    #[test]
    fn diag_sum_of_decomposition_matches_dense_operator() {
        let g = GridSpec::dimensionless(6, 0.1).unwrap();
        let spec = approx_spectrum(&g);
        let p = decompose_operator(&spec).unwrap();
        let b = random_state(6, 7, Domain::Position);
        let got = b.fourier().unwrap().apply_diag_sum(&p).unwrap().inverse_fourier().unwrap();
        let want = dense_from_spectrum(&spec) * DVector::from_column_slice(b.amps());
        assert_close(got.amps(), want.as_slice(), 1e-10);
    }

    #[test]
    fn prepare_identity_gives_ground_state() {
        let s = prepare_from_pauli_sum(&DiagonalPauliSum::<f64>::identity(4));
        assert_close(s.amps(), Statevector::basis(4, 0).amps(), 1e-15);
    }

    #[test]
    fn prepare_fourier_image_is_proportional_to_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = DiagonalPauliSum::new(7);
        for _ in 0..12 {
            p.add_term(rng.random_range(0..128), rng.random_range(-1.0..1.0)).unwrap();
        }
        let img = prepare_from_pauli_sum(&p).fourier().unwrap();
        let diag = p.wht_synthesize();
        let scale = 1.0 / 128f64.sqrt();
        let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for (a, d) in img.amps().iter().zip(&diag) {
            assert!((a - c(d * scale, 0.0)).norm() / (max * scale) < 1e-12);
        }
    }

    #[test]
    fn prepare_heater_cooler_matches_dense_construction() {
        // Fourier image +1 on bin 0 and -1 on bin N/2: mask 0 and the top bit.
        let n = 5;
        let len = 1usize << n;
        let mut diag = vec![0.0; len];
        diag[0] = 1.0;
        diag[len / 2] = -1.0;
        let p = crate::pauli::wht_analyze(&diag).unwrap();
        let got = prepare_from_pauli_sum(&p);
        let img: Vec<Complex64> = diag.iter().map(|&d| c(d / (len as f64).sqrt(), 0.0)).collect();
        let fwd = DMatrix::from_fn(len, len, |k, j| {
            Complex64::from_polar(1.0 / (len as f64).sqrt(), -2.0 * PI * (j * k) as f64 / len as f64)
        });
        let want = fwd.adjoint() * DVector::from_vec(img);
        assert_close(got.amps(), want.as_slice(), 1e-12);
    }

    #[test]
    fn overlap_constant_spectrum() {
        let (root, _) = random_state(4, 9, Domain::Fourier).normalized().unwrap();
        let o = overlaps(&root, &Spectrum::constant(4, -0.3), &[0], &[0]).unwrap();
        assert!((o.rhs[0] - c(-0.3, 0.0)).norm() < 1e-14);
        assert!((o.gram[(0, 0)] - c(0.09, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn overlaps_match_dense_products() {
        let n = 5;
        let g = GridSpec::dimensionless(n, 0.4).unwrap();
        let spec = approx_spectrum(&g);
        let b = random_state(n, 10, Domain::Position);
        let root = b.fourier().unwrap();
        let masks = [0usize, 3, 7, 12, 31];
        let o = overlaps(&root, &spec, &masks, &masks).unwrap();
        let a = dense_from_spectrum(&spec);
        let node = |m: usize| {
            let v = root.apply_zstring(m).unwrap().inverse_fourier().unwrap();
            DVector::from_column_slice(v.amps())
        };
        let bv = DVector::from_column_slice(b.amps());
        for (x, &i) in masks.iter().enumerate() {
            let vi = node(i);
            let r = (vi.adjoint() * &a * &bv)[0];
            assert!((o.rhs[x] - r).norm() < 1e-10);
            for (y, &j) in masks.iter().enumerate() {
                let gij = (vi.adjoint() * &a * &a * node(j))[0];
                assert!((o.gram[(x, y)] - gij).norm() < 1e-10);
            }
        }
        let tables = WalshTables::new(&root, &spec).unwrap().overlaps(&masks, &masks);
        assert!((tables.gram - o.gram).norm() < 1e-10);
        assert!((tables.rhs - o.rhs).norm() < 1e-10);
    }

    #[test]
    fn csv_export() {
        let s = Statevector::from_amps(vec![c(1.0, 0.0), c(-0.5, 2.0)], Domain::Position).unwrap();
        assert_eq!(s.to_csv(), "index,real,imag\n0,1,0\n1,-0.5,2\n");
    }

    #[test]
    fn reality_leakage_of_real_and_imaginary_vectors() {
        let r = Statevector::from_real(&[1.0, 2.0, -1.0, 0.5]).unwrap();
        assert!(r.reality_leakage().unwrap() < 1e-15);
        assert!(r.fourier().unwrap().reality_leakage().unwrap() < 1e-15);
        let i = r.scaled(c(0.0, 1.0));
        assert!((i.reality_leakage().unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn node_sequence_collapses_to_xor(seed in 0u64..10_000, len in 1usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(6, seed, Domain::Fourier);
            let mut applied = s.clone();
            let mut combined = NodeRef::new(0);
            for _ in 0..len {
                let m = rng.random_range(0..64usize);
                applied = applied.apply_zstring(m).unwrap();
                combined = combined.then(NodeRef::new(m));
            }
            let direct = s.apply_zstring(combined.mask).unwrap();
            for (a, b) in applied.amps().iter().zip(direct.amps()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn fourier_preserves_norm(n in 1u32..=10, seed in 0u64..10_000) {
            let s = random_state(n, seed, Domain::Position);
            prop_assert!((s.fourier().unwrap().norm() - s.norm()).abs() < 1e-12 * s.norm().max(1.0));
        }

        #[test]
        fn gram_is_hermitian_psd(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = GridSpec::dimensionless(5, 0.2).unwrap();
            let root = random_state(5, seed, Domain::Fourier);
            let masks: Vec<usize> = (0..6).map(|_| rng.random_range(0..32)).collect();
            let o = overlaps(&root, &approx_spectrum(&g), &masks, &masks).unwrap();
            prop_assert!((&o.gram - o.gram.adjoint()).norm() < 1e-9);
            let eig = o.gram.clone().symmetric_eigen();
            let scale = o.gram.norm().max(1.0);
            prop_assert!(eig.eigenvalues.iter().all(|&e| e > -1e-9 * scale));
        }
    }
}
