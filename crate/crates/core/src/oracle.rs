//! Exact classical references for the implicit scheme.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::grid::{exact_spectrum, GridSpec, Spectrum};
use crate::pauli::{Coefficient, DiagonalPauliSum};
use crate::state::{Domain, Statevector};

/// Largest register [`dense_reference`] will materialize.
pub const DENSE_MAX_QUBITS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Spectral,
    Tridiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    /// `‖Ax - b‖ / ‖b‖`.
    pub residual: f64,
    pub method: SolveMethod,
}

/// `(A(c)·x)_i = x_{i-1} + x_{i+1} - (2 + c)·x_i`, cyclic.
pub fn apply_cyclic(x: &[f64], c: f64) -> Vec<f64> {
    let len = x.len();
    (0..len)
        .map(|i| x[(i + len - 1) % len] + x[(i + 1) % len] - (2.0 + c) * x[i])
        .collect()
}

fn relative_residual(x: &[f64], b: &[f64], c: f64) -> f64 {
    let ax = apply_cyclic(x, c);
    let num: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(AtaError::InvalidGrid(format!("c must be positive, got {c}")));
    }
    Ok(())
}

/// Divides each Fourier mode by its exact eigenvalue.
pub fn solve_spectral(b: &[f64], c: f64) -> Result<Vec<f64>> {
    check_c(c)?;
    let s = Statevector::from_real(b)?;
    let spec = exact_spectrum(&GridSpec::dimensionless(s.n(), c)?);
    Ok(solve_fourier(&s.fourier()?, &spec)?.inverse_fourier()?.real_parts())
}

/// `x̂_k = b̂_k / λ_k` on a Fourier-domain vector.
pub fn solve_fourier(b_hat: &Statevector, spectrum: &Spectrum) -> Result<Statevector> {
    if b_hat.domain() != Domain::Fourier {
        return Err(AtaError::WrongDomain { expected: Domain::Fourier, actual: b_hat.domain() });
    }
    if spectrum.len() != b_hat.len() {
        return Err(AtaError::LengthMismatch { expected: b_hat.len(), actual: spectrum.len() });
    }
    let amps = b_hat.amps().iter().zip(spectrum.values()).map(|(b, l)| b / l).collect();
    Statevector::from_amps(amps, Domain::Fourier)
}

/// Thomas algorithm with a Sherman–Morrison correction for the two corner
/// entries.
pub fn solve_tridiagonal(b: &[f64], c: f64) -> Result<Vec<f64>> {
    check_c(c)?;
    let len = b.len();
    let diag = -2.0 - c;
    match len {
        0 => return Err(AtaError::EmptyInput("right-hand side")),
        1 => return Ok(vec![b[0] / -c]),
        // Both neighbours coincide, so the off-diagonal entries double.
        2 => {
            let det = diag * diag - 4.0;
            return Ok(vec![(diag * b[0] - 2.0 * b[1]) / det, (diag * b[1] - 2.0 * b[0]) / det]);
        }
        _ => {}
    }
    // A = T + u·vᵀ with u = (γ, 0, …, 0, 1), v = (1, 0, …, 0, 1/γ).
    let gamma = -diag;
    let mut main = vec![diag; len];
    main[0] -= gamma;
    main[len - 1] -= 1.0 / gamma;
    let mut u = vec![0.0; len];
    u[0] = gamma;
    u[len - 1] = 1.0;
    let y = thomas(&main, b);
    let z = thomas(&main, &u);
    let factor = (y[0] + y[len - 1] / gamma) / (1.0 + z[0] + z[len - 1] / gamma);
    Ok(y.iter().zip(&z).map(|(y, z)| y - factor * z).collect())
}

// Tridiagonal solve with unit off-diagonals.
fn thomas(main: &[f64], rhs: &[f64]) -> Vec<f64> {
    let len = main.len();
    let mut cp = vec![0.0; len];
    let mut dp = vec![0.0; len];
    cp[0] = 1.0 / main[0];
    dp[0] = rhs[0] / main[0];
    for i in 1..len {
        let m = main[i] - cp[i - 1];
        cp[i] = 1.0 / m;
        dp[i] = (rhs[i] - dp[i - 1]) / m;
    }
    let mut x = vec![0.0; len];
    x[len - 1] = dp[len - 1];
    for i in (0..len - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Solves `A(c)·x = b` for a real right-hand side.
pub fn solve_exact(b: &Statevector, g: &GridSpec) -> Result<OracleSolution> {
    solve_exact_with(b, g, SolveMethod::Spectral)
}

pub fn solve_exact_with(b: &Statevector, g: &GridSpec, method: SolveMethod) -> Result<OracleSolution> {
    check_c(g.c)?;
    let pos = b.to_domain(Domain::Position)?;
    let scale = pos.norm().max(f64::MIN_POSITIVE);
    if pos.amps().iter().any(|a| a.im.abs() > 1e-9 * scale.max(1.0)) {
        return Err(AtaError::DomainViolation("right-hand side must be real".into()));
    }
    let rhs = pos.real_parts();
    let x = match method {
        SolveMethod::Spectral => solve_spectral(&rhs, g.c)?,
        SolveMethod::Tridiagonal => solve_tridiagonal(&rhs, g.c)?,
    };
    let residual = relative_residual(&x, &rhs, g.c);
    Ok(OracleSolution { x, residual, method })
}

/// Exact implicit-scheme trajectory `U^0 = χ, …, U^{n_steps}` with
/// `b^τ = c·(δt·f^τ - U^τ)`.
pub fn evolve_exact(
    chi: &[f64],
    mut source: impl FnMut(usize) -> Vec<f64>,
    g: &GridSpec,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if chi.len() != g.len() {
        return Err(AtaError::LengthMismatch { expected: g.len(), actual: chi.len() });
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(chi.to_vec());
    for tau in 0..n_steps {
        let f = source(tau);
        if f.len() != g.len() {
            return Err(AtaError::LengthMismatch { expected: g.len(), actual: f.len() });
        }
        let u = &out[tau];
        let b: Vec<f64> = f.iter().zip(u).map(|(f, u)| g.c * (g.dt * f - u)).collect();
        out.push(solve_spectral(&b, g.c)?);
    }
    Ok(out)
}

/// Fourier-domain tracker of the exact trajectory; accepts complex sources.
#[derive(Debug, Clone)]
pub struct ExactTracker {
    grid: GridSpec,
    spectrum: Spectrum,
    u_hat: Statevector,
}

impl ExactTracker {
    pub fn new(grid: GridSpec, initial: &Statevector) -> Result<Self> {
        if initial.len() != grid.len() {
            return Err(AtaError::LengthMismatch { expected: grid.len(), actual: initial.len() });
        }
        Ok(Self { spectrum: exact_spectrum(&grid), u_hat: initial.to_domain(Domain::Fourier)?, grid })
    }

    /// Advances one step with source image `f` (either domain).
    pub fn step(&mut self, f: &Statevector) -> Result<&Statevector> {
        let f_hat = f.to_domain(Domain::Fourier)?;
        let b = f_hat
            .scaled(Complex64::new(self.grid.c * self.grid.dt, 0.0))
            .axpy(Complex64::new(-self.grid.c, 0.0), &self.u_hat)?;
        self.u_hat = solve_fourier(&b, &self.spectrum)?;
        Ok(&self.u_hat)
    }

    /// Current solution in the Fourier domain.
    pub fn current(&self) -> &Statevector {
        &self.u_hat
    }
}

/// Steady state of the scheme under a constant zero-mean source `f`:
/// `(A + c·I)·U = c·δt·f`, with the undetermined mean fixed to zero.
pub fn stationary_profile(f: &[f64], g: &GridSpec) -> Result<Vec<f64>> {
    if f.len() != g.len() {
        return Err(AtaError::LengthMismatch { expected: g.len(), actual: f.len() });
    }
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if mean.abs() > 1e-12 * scale {
        return Err(AtaError::DomainViolation(format!("source has nonzero mean {mean:e}")));
    }
    let f_hat = Statevector::from_real(f)?.fourier()?;
    let laplacian = exact_spectrum(&GridSpec { c: 0.0, ..*g });
    let amps = f_hat
        .amps()
        .iter()
        .zip(laplacian.values())
        .enumerate()
        .map(|(k, (fk, l))| if k == 0 { Complex64::new(0.0, 0.0) } else { fk * (g.c * g.dt / l) })
        .collect();
    Ok(Statevector::from_amps(amps, Domain::Fourier)?.inverse_fourier()?.real_parts())
}

/// `|<x|y>| / (‖x‖·‖y‖)`.
pub fn fidelity<C: Coefficient>(x: &[C], y: &[C]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AtaError::LengthMismatch { expected: x.len(), actual: y.len() });
    }
    let ip: Complex64 = x.iter().zip(y).map(|(a, b)| a.to_complex().conj() * b.to_complex()).sum();
    let nx: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(AtaError::ZeroVector);
    }
    Ok((ip.norm() / (nx * ny)).min(1.0))
}

fn dft_matrix(len: usize) -> DMatrix<Complex64> {
    let norm = 1.0 / (len as f64).sqrt();
    DMatrix::from_fn(len, len, |k, j| {
        let phase = -2.0 * std::f64::consts::PI * ((j * k) % len) as f64 / len as f64;
        Complex64::from_polar(norm, phase)
    })
}

/// Explicit `F†·diag(λ)·F` for a circulant operator.
pub fn dense_reference(spectrum: &Spectrum) -> Result<DMatrix<Complex64>> {
    dense_from_diagonal(spectrum.n(), spectrum.values().iter().map(|&l| Complex64::new(l, 0.0)).collect())
}

/// Explicit `F†·(Σ h_p Π_p)·F`.
pub fn dense_from_pauli<C: Coefficient>(p: &DiagonalPauliSum<C>) -> Result<DMatrix<Complex64>> {
    dense_from_diagonal(p.n(), p.wht_synthesize().into_iter().map(Coefficient::to_complex).collect())
}

fn dense_from_diagonal(n: u32, diag: Vec<Complex64>) -> Result<DMatrix<Complex64>> {
    if n > DENSE_MAX_QUBITS {
        return Err(AtaError::Capacity(format!(
            "dense matrices are limited to {DENSE_MAX_QUBITS} qubits, got {n}"
        )));
    }
    let f = dft_matrix(1 << n);
    Ok(f.adjoint() * DMatrix::from_diagonal(&DVector::from_vec(diag)) * f)
}

/// The cyclic tridiagonal `A(c)` assembled entry by entry.
pub fn dense_cyclic(n: u32, c: f64) -> Result<DMatrix<f64>> {
    if n > DENSE_MAX_QUBITS {
        return Err(AtaError::Capacity(format!(
            "dense matrices are limited to {DENSE_MAX_QUBITS} qubits, got {n}"
        )));
    }
    let len = 1usize << n;
    let mut a = DMatrix::zeros(len, len);
    for i in 0..len {
        a[(i, i)] += -2.0 - c;
        a[(i, (i + 1) % len)] += 1.0;
        a[(i, (i + len - 1) % len)] += 1.0;
    }
    Ok(a)
}
