//! Discretization of the periodic heat equation and the spectra of its
//! implicit-step operator.
//!
//! The implicit scheme couples consecutive time layers through the circulant
//! matrix `A(c)` with `-2 - c` on the diagonal and `1` on the two cyclic
//! off-diagonals. Its Fourier eigenvalues are [`exact_spectrum`]; the solver
//! works with the piecewise quadratic [`approx_spectrum`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::state::{Domain, Statevector};

/// Largest register (in qubits) any dense object in this crate may allocate.
pub const MAX_QUBITS: u32 = 24;

/// Grid and time-step parameters.
///
/// `c = dz² / (a2·dt)` is the dimensionless grid parameter. Small `c` means a
/// large time step relative to the diffusion time of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Qubit count; the grid has `2^n` points.
    pub n: u32,
    pub c: f64,
    /// Diffusivity `a²`.
    pub a2: f64,
    pub dz: f64,
    pub dt: f64,
    /// Number of time steps.
    pub n_t: usize,
}

impl GridSpec {
    /// Builds a grid from diffusivity and time step, deriving `dz`.
    pub fn new(n: u32, c: f64, a2: f64, dt: f64, n_t: usize) -> Result<Self> {
        let dz = (c * a2 * dt).sqrt();
        Self { n, c, a2, dz, dt, n_t }.validated()
    }

    /// Dimensionless mode: `a2 = dt = 1`, hence `dz = sqrt(c)`.
    pub fn dimensionless(n: u32, c: f64) -> Result<Self> {
        Self::new(n, c, 1.0, 1.0, 1)
    }

    /// Unit interval in space and time: `dz = 2^-n`, `dt = 1/n_t`, with the
    /// diffusivity chosen so that the requested `c` holds.
    pub fn unit_interval(n: u32, c: f64, n_t: usize) -> Result<Self> {
        if n_t == 0 {
            return Err(AtaError::InvalidGrid("n_t must be positive".into()));
        }
        let dz = 1.0 / (1u64 << n.min(63)) as f64;
        let dt = 1.0 / n_t as f64;
        let a2 = dz * dz / (c * dt);
        Self { n, c, a2, dz, dt, n_t }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(AtaError::InvalidGrid("n must be at least 1".into()));
        }
        if self.n > MAX_QUBITS {
            return Err(AtaError::Capacity(format!(
                "{} qubits exceeds the {MAX_QUBITS}-qubit budget",
                self.n
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(AtaError::InvalidGrid(format!("c must be positive, got {}", self.c)));
        }
        if !(self.dz > 0.0 && self.dt > 0.0 && self.a2 > 0.0) {
            return Err(AtaError::InvalidGrid("dz, dt and a2 must be positive".into()));
        }
        let lhs = self.c * self.a2 * self.dt;
        let rhs = self.dz * self.dz;
        if ((lhs - rhs) / rhs).abs() > 1e-12 {
            return Err(AtaError::InvalidGrid(format!(
                "c·a2·dt = {lhs:e} does not match dz² = {rhs:e}"
            )));
        }
        Ok(self)
    }

    /// Number of grid points, `2^n`.
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Operator eigenvalues indexed by wave number `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    n: u32,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = log2_exact(values.len())?;
        Ok(Self { n, values })
    }

    /// Constant spectrum, i.e. `value·I`.
    pub fn constant(n: u32, value: f64) -> Self {
        Self { n, values: vec![value; 1 << n] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for Spectrum {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

pub(crate) fn log2_exact(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(AtaError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

fn exact_values(n: u32, c: f64) -> Vec<f64> {
    let len = 1usize << n;
    (0..len)
        .map(|k| {
            let s = (PI * k as f64 / len as f64).sin();
            -c - 4.0 * s * s
        })
        .collect()
}

/// `λ_k = -c - 4 sin²(πk/2^n)`.
pub fn exact_spectrum(g: &GridSpec) -> Spectrum {
    Spectrum { n: g.n, values: exact_values(g.n, g.c) }
}

/// `λ'_k = -c - π²(|k/2^(n-1) - 1| - 1)²`.
///
/// Agrees with [`exact_spectrum`] to fourth order in `πk/2^n` near `k = 0`
/// (and symmetrically near `k = 2^n`); at `k = 2^(n-1)` it reaches `-c - π²`
/// where the exact value is `-c - 4`.
pub fn approx_spectrum(g: &GridSpec) -> Spectrum {
    let half = (1usize << (g.n - 1)) as f64;
    let values = (0..g.len())
        .map(|k| {
            let u = (k as f64 / half - 1.0).abs() - 1.0;
            -g.c - PI * PI * u * u
        })
        .collect();
    Spectrum { n: g.n, values }
}

/// Spectrum of the `d_r`-dimensional operator
/// `A(0)⊗I⊗…⊗I + … + I⊗…⊗A(0) - c·I`.
///
/// Flat index `k` splits into `d_r` digits of `n` bits, most significant digit
/// first, matching the Kronecker ordering of `F⊗F⊗…⊗F`.
pub fn multidim_spectrum(g: &GridSpec, d_r: u32) -> Result<Spectrum> {
    if d_r == 0 {
        return Err(AtaError::InvalidParameter("d_r must be at least 1".into()));
    }
    let total = g.n.checked_mul(d_r).filter(|&t| t <= MAX_QUBITS).ok_or_else(|| {
        AtaError::Capacity(format!(
            "{} dimensions of {} qubits exceed the {MAX_QUBITS}-qubit budget",
            d_r, g.n
        ))
    })?;
    let base = exact_values(g.n, 0.0);
    let digit_mask = (1usize << g.n) - 1;
    let values = (0..1usize << total)
        .map(|flat| {
            let laplacian: f64 = (0..d_r)
                .map(|j| base[(flat >> (j * g.n)) & digit_mask])
                .sum();
            laplacian - g.c
        })
        .collect();
    Ok(Spectrum { n: total, values })
}

/// Right-hand side of one implicit step: `b_i = c·(dt·f_i - u_i)`.
pub fn rhs_from_state(u: &Statevector, f: &Statevector, g: &GridSpec) -> Result<Statevector> {
    for s in [u, f] {
        if s.len() != g.len() {
            return Err(AtaError::LengthMismatch { expected: g.len(), actual: s.len() });
        }
        if s.domain() != Domain::Position {
            return Err(AtaError::WrongDomain { expected: Domain::Position, actual: s.domain() });
        }
    }
    let amps = u
        .amps()
        .iter()
        .zip(f.amps())
        .map(|(&ui, &fi)| (fi * g.dt - ui) * g.c)
        .collect();
    Statevector::from_amps(amps, Domain::Position)
}
