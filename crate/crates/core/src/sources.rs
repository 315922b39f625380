//! Initial temperature distributions and heat sources.
//!
//! Random fields are Chebyshev series `f(z,t) = Σ h_ij T_i(2t-1) T_j(2z-1)`
//! with coefficients uniform on `[-1, 1]`. All randomness comes from
//! [`RNG_NAME`]; a field drawn with `(seed, stream)` is reproducible on any
//! platform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::pauli::{wht_analyze, DiagonalPauliSum};
use crate::state::{prepare_from_pauli_sum, Statevector};

/// Generator used for every random draw, recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), u64 seed, one stream per field";

/// Simpson intervals per axis for the normalization integrals.
pub const QUADRATURE_INTERVALS: usize = 1024;

/// Stream ids used when one seed drives several fields.
pub mod stream {
    pub const CHI: u64 = 0;
    pub const SOURCE: u64 = 1;
    pub const MASKS: u64 = 2;
    pub const HAAR: u64 = 3;
}

/// Seeded generator on a given stream.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Degrees of a field; `g_t = 0` gives a time-independent (1-D) field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub g_z: usize,
    #[serde(default)]
    pub g_t: usize,
}

/// `h_ij` stored row-major, `i` the temporal and `j` the spatial degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChebyshevField {
    pub g_z: usize,
    pub g_t: usize,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ChebyshevField {
    pub fn new(g_z: usize, g_t: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != (g_z + 1) * (g_t + 1) {
            return Err(AtaError::LengthMismatch { expected: (g_z + 1) * (g_t + 1), actual: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(AtaError::InvalidParameter("field coefficients must be finite".into()));
        }
        Ok(Self { g_z, g_t, coeffs, seed: None })
    }

    /// Spatial-only field `Σ g_j T_j(2z-1)`.
    pub fn spatial(coeffs: Vec<f64>) -> Result<Self> {
        let g_z = coeffs.len().checked_sub(1).ok_or(AtaError::EmptyInput("coefficients"))?;
        Self::new(g_z, 0, coeffs)
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.g_z + 1) + j]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect(), ..self.clone() }
    }

    fn coeff_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.g_t + 1, self.g_z + 1, &self.coeffs)
    }
}

/// I.i.d. uniform `[-1, 1]` coefficients on stream [`stream::CHI`] for 1-D
/// fields and [`stream::SOURCE`] otherwise.
pub fn sample_field(spec: FieldSpec, seed: u64) -> ChebyshevField {
    let s = if spec.g_t == 0 { stream::CHI } else { stream::SOURCE };
    sample_field_on(spec, seed, s)
}

pub fn sample_field_on(spec: FieldSpec, seed: u64, stream: u64) -> ChebyshevField {
    let mut r = rng(seed, stream);
    let coeffs = (0..(spec.g_z + 1) * (spec.g_t + 1)).map(|_| r.random_range(-1.0..=1.0)).collect();
    ChebyshevField { g_z: spec.g_z, g_t: spec.g_t, coeffs, seed: Some(seed) }
}

/// `T_0(x), …, T_deg(x)` by the three-term recurrence.
pub fn chebyshev_values(x: f64, deg: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(deg + 1);
    t.push(1.0);
    if deg >= 1 {
        t.push(x);
    }
    for i in 2..=deg {
        t.push(2.0 * x * t[i - 1] - t[i - 2]);
    }
    t
}

/// `f(z, t)`; time is ignored by 1-D fields.
pub fn evaluate(field: &ChebyshevField, z: f64, t: f64) -> Result<f64> {
    for (name, v) in [("z", z), ("t", t)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(AtaError::DomainViolation(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let tz = chebyshev_values(2.0 * z - 1.0, field.g_z);
    let tt = chebyshev_values(2.0 * t - 1.0, field.g_t);
    let mut acc = 0.0;
    for (i, ti) in tt.iter().enumerate() {
        let row: f64 = tz.iter().enumerate().map(|(j, tj)| field.h(i, j) * tj).sum();
        acc += ti * row;
    }
    Ok(acc)
}

fn simpson_weights(intervals: usize) -> Vec<f64> {
    let h = 1.0 / intervals as f64;
    (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn basis_matrix(deg: usize, intervals: usize) -> DMatrix<f64> {
    DMatrix::from_fn(intervals + 1, deg + 1, |p, i| {
        let x = 2.0 * p as f64 / intervals as f64 - 1.0;
        // cos(i·acos x) is exact for |x| ≤ 1 and avoids the recurrence per entry.
        (i as f64 * x.clamp(-1.0, 1.0).acos()).cos()
    })
}

/// `∫₀¹∫₀¹ |f| dz dt` (or `∫₀¹ |f| dz` for 1-D fields), composite Simpson.
pub fn abs_integral(field: &ChebyshevField) -> f64 {
    let m = QUADRATURE_INTERVALS;
    let w = simpson_weights(m);
    let tz = basis_matrix(field.g_z, m);
    let h = field.coeff_matrix();
    if field.g_t == 0 {
        let vals = &tz * h.transpose();
        return vals.iter().zip(&w).map(|(v, w)| v.abs() * w).sum();
    }
    let tt = basis_matrix(field.g_t, m);
    // grid[t, z] = Σ_ij T_i(t) h_ij T_j(z)
    let grid = &tt * h * tz.transpose();
    let mut total = 0.0;
    for (a, wa) in w.iter().enumerate() {
        let row: f64 = grid.row(a).iter().zip(&w).map(|(v, wb)| v.abs() * wb).sum();
        total += wa * row;
    }
    total
}

/// Rescales `f` so that `∫∫|f| dz dt = ∫|χ| dz`.
pub fn normalize_pair(chi: &ChebyshevField, f: &ChebyshevField) -> Result<ChebyshevField> {
    let ic = abs_integral(chi);
    let if_ = abs_integral(f);
    if ic <= 0.0 || if_ <= 0.0 || !ic.is_finite() || !if_.is_finite() {
        return Err(AtaError::DegenerateNormalization);
    }
    Ok(f.scaled(ic / if_))
}

/// Samples a field at `z_i = i/2^n` for time `t`.
pub fn discretize(field: &ChebyshevField, n: u32, t: f64) -> Result<Statevector> {
    let len = 1usize << n;
    let values = (0..len)
        .map(|i| evaluate(field, i as f64 / len as f64, t))
        .collect::<Result<Vec<_>>>()?;
    Statevector::from_real(&values)
}

/// Pauli-sum representation whose prepared state is `v`:
/// `prepare_from_pauli_sum(field_to_repr(v)) = v`.
pub fn field_to_repr(v: &Statevector) -> Result<DiagonalPauliSum<Complex64>> {
    let img = v.to_domain(crate::state::Domain::Fourier)?;
    let root = (v.len() as f64).sqrt();
    let scaled: Vec<Complex64> = img.amps().iter().map(|a| a * root).collect();
    wht_analyze(&scaled)
}

pub fn discretize_repr(field: &ChebyshevField, n: u32, t: f64) -> Result<DiagonalPauliSum<Complex64>> {
    field_to_repr(&discretize(field, n, t)?)
}

/// Heater/cooler windows in the position domain: `+1` on `width` cells from
/// `heater`, `-1` from `cooler`, cyclically. Integer valued, so the sum is
/// exactly zero.
pub fn heater_cooler_field(n: u32, heater: usize, cooler: usize, width: usize) -> Result<Vec<f64>> {
    let len = 1usize << n;
    if width == 0 {
        return Err(AtaError::InvalidParameter("window width must be positive".into()));
    }
    if heater >= len || cooler >= len || heater == cooler {
        return Err(AtaError::InvalidParameter(format!(
            "heater and cooler must be distinct cells below {len}, got {heater} and {cooler}"
        )));
    }
    let mut cells = vec![0i64; len];
    if width >= len {
        // Both windows cover the grid and cancel.
        return Ok(vec![0.0; len]);
    }
    let gap = (cooler + len - heater) % len;
    if gap < width || len - gap < width {
        return Err(AtaError::OverlappingWindows);
    }
    for o in 0..width {
        cells[(heater + o) % len] += 1;
        cells[(cooler + o) % len] -= 1;
    }
    debug_assert_eq!(cells.iter().sum::<i64>(), 0);
    Ok(cells.into_iter().map(|c| c as f64).collect())
}

/// `(χ, f)` representations of the heater/cooler problem; `χ = 0`.
pub fn heater_cooler_preset(
    n: u32,
    positions: (usize, usize),
    width: usize,
) -> Result<(DiagonalPauliSum<Complex64>, DiagonalPauliSum<Complex64>)> {
    let f = heater_cooler_field(n, positions.0, positions.1, width)?;
    Ok((DiagonalPauliSum::new(n), field_to_repr(&Statevector::from_real(&f)?)?))
}

/// Heat source as a function of the step index, in representation form.
pub trait SourceModel: Send + Sync {
    fn n(&self) -> u32;

    fn repr_at(&self, step: usize) -> Result<DiagonalPauliSum<Complex64>>;

    /// Position-domain field for the same step.
    fn field_at(&self, step: usize) -> Result<Statevector> {
        Ok(prepare_from_pauli_sum(&self.repr_at(step)?))
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSource {
    pub n: u32,
}

impl SourceModel for ZeroSource {
    fn n(&self) -> u32 {
        self.n
    }

    fn repr_at(&self, _: usize) -> Result<DiagonalPauliSum<Complex64>> {
        Ok(DiagonalPauliSum::new(self.n))
    }
}

/// Time-independent source.
#[derive(Debug, Clone)]
pub struct StaticSource {
    pub repr: DiagonalPauliSum<Complex64>,
}

impl SourceModel for StaticSource {
    fn n(&self) -> u32 {
        self.repr.n()
    }

    fn repr_at(&self, _: usize) -> Result<DiagonalPauliSum<Complex64>> {
        Ok(self.repr.clone())
    }
}

/// Chebyshev field sampled on the grid at `t = step / n_steps`, clamped to 1.
#[derive(Debug, Clone)]
pub struct FieldSource {
    pub field: ChebyshevField,
    pub n: u32,
    pub n_steps: usize,
}

impl FieldSource {
    pub fn time(&self, step: usize) -> f64 {
        (step as f64 / self.n_steps.max(1) as f64).min(1.0)
    }
}

impl SourceModel for FieldSource {
    fn n(&self) -> u32 {
        self.n
    }

    fn repr_at(&self, step: usize) -> Result<DiagonalPauliSum<Complex64>> {
        discretize_repr(&self.field, self.n, self.time(step))
    }

    fn field_at(&self, step: usize) -> Result<Statevector> {
        discretize(&self.field, self.n, self.time(step))
    }
}

/// Source given directly by a few mask coefficients, each following its own
/// Chebyshev time envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PauliSource {
    pub n: u32,
    pub masks: Vec<usize>,
    /// One temporal series per mask, stored as 1-D fields in `t`.
    pub envelopes: Vec<Vec<f64>>,
    pub scale: f64,
    pub n_steps: usize,
}

impl PauliSource {
    /// `terms` distinct random masks with degree-`g_t` envelopes.
    pub fn sample(n: u32, terms: usize, g_t: usize, n_steps: usize, seed: u64) -> Result<Self> {
        let masks = random_masks(n, terms, seed, stream::SOURCE)?;
        let mut r = rng(seed, stream::SOURCE + 16);
        let envelopes = (0..terms).map(|_| (0..=g_t).map(|_| r.random_range(-1.0..=1.0)).collect()).collect();
        Ok(Self { n, masks, envelopes, scale: 1.0, n_steps })
    }

    fn coefficient(&self, i: usize, step: usize) -> f64 {
        let t = (step as f64 / self.n_steps.max(1) as f64).min(1.0);
        let env = &self.envelopes[i];
        let tv = chebyshev_values(2.0 * t - 1.0, env.len() - 1);
        self.scale * env.iter().zip(tv).map(|(h, t)| h * t).sum::<f64>()
    }

    /// Mean over steps of `(1/N)·Σ_i |f_i|`, the discrete `∫∫|f|`.
    pub fn mean_abs(&self) -> Result<f64> {
        let steps = self.n_steps.max(1);
        let mut acc = 0.0;
        for s in 0..steps {
            acc += mean_abs(&self.field_at(s)?);
        }
        Ok(acc / steps as f64)
    }
}

impl SourceModel for PauliSource {
    fn n(&self) -> u32 {
        self.n
    }

    fn repr_at(&self, step: usize) -> Result<DiagonalPauliSum<Complex64>> {
        DiagonalPauliSum::from_terms(
            self.n,
            self.masks.iter().enumerate().map(|(i, &m)| (m, Complex64::new(self.coefficient(i, step), 0.0))),
        )
    }
}

/// `(1/N)·Σ|v_i|`, the grid approximation of `∫|v| dz`.
pub fn mean_abs(v: &Statevector) -> f64 {
    v.amps().iter().map(|a| a.norm()).sum::<f64>() / v.len() as f64
}

/// `count` distinct masks below `2^n`, ascending.
pub fn random_masks(n: u32, count: usize, seed: u64, stream_id: u64) -> Result<Vec<usize>> {
    let len = 1usize << n;
    if count > len {
        return Err(AtaError::InvalidParameter(format!("{count} masks requested from {len}")));
    }
    let mut r = rng(seed, stream_id + 32);
    let mut masks = sample(&mut r, len, count).into_vec();
    masks.sort_unstable();
    Ok(masks)
}

/// Random initial state with `terms` uniform mask coefficients.
pub fn random_pauli_state(n: u32, terms: usize, seed: u64) -> Result<DiagonalPauliSum<Complex64>> {
    let masks = random_masks(n, terms, seed, stream::CHI)?;
    let mut r = rng(seed, stream::CHI + 16);
    DiagonalPauliSum::from_terms(n, masks.into_iter().map(|m| (m, Complex64::new(r.random_range(-1.0..=1.0), 0.0))))
}

/// Scales `f` so that its mean absolute field matches that of `chi`.
pub fn normalize_pauli_pair(chi: &DiagonalPauliSum<Complex64>, mut f: PauliSource) -> Result<PauliSource> {
    let ic = mean_abs(&prepare_from_pauli_sum(chi));
    f.scale = 1.0;
    let if_ = f.mean_abs()?;
    if ic <= 0.0 || if_ <= 0.0 {
        return Err(AtaError::DegenerateNormalization);
    }
    f.scale = ic / if_;
    Ok(f)
}
