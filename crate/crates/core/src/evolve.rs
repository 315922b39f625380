//! Time stepping with the ansatz-tree solver.
//!
//! The right-hand side `b^τ` lives as a Pauli-sum representation: its Fourier
//! image is `b_scale · synth(b_repr) / 2^{n/2}`. A tree `Σ α_j Π_j` acts on it
//! by XOR convolution, the source is added coefficient-wise and the result is
//! truncated to the `D_cut` largest terms before the next solve.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ata::{grow, AnsatzTree, AtaConfig, DepthReport};
use crate::error::{AtaError, Result};
use crate::grid::{approx_spectrum, GridSpec, Spectrum};
use crate::oracle::ExactTracker;
use crate::pauli::{decompose_operator, truncate_top_with_dropped, xor_convolve, DiagonalPauliSum};
use crate::sources::SourceModel;
use crate::state::{prepare_from_pauli_sum, Domain, Statevector};

/// How the source enters the next right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceCoupling {
    /// The implicit scheme itself: `b^{τ+1} = c·(δt·f^{τ+1} - x^τ)`,
    /// `b^0 = c·(δt·f^0 - χ)`.
    Implicit,
    /// `b^{τ+1} = x^τ + γ·f^{τ+1}`, `b^0 = χ`.
    Additive { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub grid: GridSpec,
    pub ata: AtaConfig,
    /// Dropout width; `None` keeps every term.
    pub d_cut: Option<usize>,
    pub coupling: SourceCoupling,
    /// Zero Fourier modes with `min(k, N-k) > lowpass_k` in the root used to
    /// fit the weights.
    pub lowpass_k: Option<usize>,
    /// Masks seeding every tree.
    pub warm_start: Option<Vec<usize>>,
    /// Pre-truncation term count above which a step is flagged.
    pub term_cap: Option<usize>,
    pub track_oracle: bool,
    pub record_trees: bool,
}

impl EvolveConfig {
    pub fn new(grid: GridSpec, ata: AtaConfig) -> Self {
        Self {
            grid,
            ata,
            d_cut: None,
            coupling: SourceCoupling::Implicit,
            lowpass_k: None,
            warm_start: None,
            term_cap: None,
            track_oracle: true,
            record_trees: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validated()?;
        self.ata.validate()?;
        if self.d_cut == Some(0) {
            return Err(AtaError::InvalidParameter("d_cut must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub loss: f64,
    pub depth: usize,
    /// Against the exact trajectory; NaN when not tracked.
    pub fidelity: f64,
    /// Squared coefficient mass removed by dropout, relative to the total.
    pub dropped_mass: f64,
    pub reality_leakage: f64,
    /// Terms in the next right-hand side before truncation.
    pub term_count: usize,
    pub blowup: bool,
}

/// `b^τ = b_scale · prepare_from_pauli_sum(b_repr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveState {
    pub step: usize,
    pub b_repr: DiagonalPauliSum<Complex64>,
    pub b_scale: f64,
    /// Latest solution `x^{τ-1}` as `(repr, scale)`, once a step has run.
    pub x: Option<(DiagonalPauliSum<Complex64>, f64)>,
    pub last: Option<StepDiagnostics>,
}

impl EvolveState {
    fn from_sum(step: usize, sum: DiagonalPauliSum<Complex64>) -> Self {
        let (b_repr, b_scale) = normalize_sum(sum);
        Self { step, b_repr, b_scale, x: None, last: None }
    }

    /// Working right-hand side, position domain.
    pub fn b_state(&self) -> Statevector {
        prepare_from_pauli_sum(&self.b_repr).scaled(Complex64::new(self.b_scale, 0.0))
    }

    /// Latest solution, position domain.
    pub fn solution(&self) -> Option<Statevector> {
        self.x.as_ref().map(|(r, s)| prepare_from_pauli_sum(r).scaled(Complex64::new(*s, 0.0)))
    }
}

fn normalize_sum(sum: DiagonalPauliSum<Complex64>) -> (DiagonalPauliSum<Complex64>, f64) {
    let norm = sum.l2_norm();
    if norm == 0.0 {
        (sum, 0.0)
    } else {
        (sum.scaled(1.0 / norm), norm)
    }
}

/// Fourier image of `scale · prepare_from_pauli_sum(repr)`.
fn fourier_image(repr: &DiagonalPauliSum<Complex64>, scale: f64) -> Result<Statevector> {
    let amp = scale / (repr.dim() as f64).sqrt();
    Statevector::from_amps(repr.wht_synthesize().into_iter().map(|v| v * amp).collect(), Domain::Fourier)
}

fn lowpass(s: &Statevector, k_max: usize) -> Result<Statevector> {
    let len = s.len();
    let amps = s
        .amps()
        .iter()
        .enumerate()
        .map(|(k, &a)| if k.min(len - k) > k_max { Complex64::new(0.0, 0.0) } else { a })
        .collect();
    Statevector::from_amps(amps, Domain::Fourier)
}

/// Solver inputs shared by every step of a run.
pub struct Stepper<'a> {
    cfg: &'a EvolveConfig,
    spectrum: Spectrum,
    decomposition: DiagonalPauliSum<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a EvolveConfig) -> Result<Self> {
        cfg.validate()?;
        let spectrum = approx_spectrum(&cfg.grid);
        let decomposition = decompose_operator(&spectrum)?;
        Ok(Self { cfg, spectrum, decomposition })
    }

    /// Right-hand side for step 0.
    pub fn initial(&self, chi: &DiagonalPauliSum<Complex64>, f0: &DiagonalPauliSum<Complex64>) -> Result<EvolveState> {
        let g = &self.cfg.grid;
        let sum = match self.cfg.coupling {
            SourceCoupling::Implicit => f0.linear_combination(
                Complex64::new(g.c * g.dt, 0.0),
                chi,
                Complex64::new(-g.c, 0.0),
            )?,
            SourceCoupling::Additive { .. } => chi.clone(),
        };
        let (sum, _) = self.truncate(sum);
        Ok(EvolveState::from_sum(0, sum))
    }

    fn truncate(&self, sum: DiagonalPauliSum<Complex64>) -> (DiagonalPauliSum<Complex64>, f64) {
        match self.cfg.d_cut {
            Some(d) => {
                let total = sum.norm_sqr();
                let (kept, dropped) = truncate_top_with_dropped(&sum, d);
                (kept, if total > 0.0 { dropped / total } else { 0.0 })
            }
            None => (sum, 0.0),
        }
    }

    /// Grows the tree for the current right-hand side.
    pub fn solve(&self, state: &EvolveState) -> Result<Option<AnsatzTree>> {
        if state.b_scale == 0.0 {
            return Ok(None);
        }
        let mut root = fourier_image(&state.b_repr, 1.0)?;
        if let Some(k) = self.cfg.lowpass_k {
            root = lowpass(&root, k)?;
            if root.norm() == 0.0 {
                root = fourier_image(&state.b_repr, 1.0)?;
            }
        }
        let seed = self.cfg.warm_start.as_deref().unwrap_or(&[0]);
        let tree = AnsatzTree::with_masks(&root, seed)?;
        Ok(Some(grow(tree, &self.spectrum, &self.decomposition, &self.cfg.ata)?))
    }

    /// One time step: solve, form `x^τ`, add the source `f^{τ+1}`, truncate.
    pub fn step(
        &self,
        state: &EvolveState,
        next_source: &DiagonalPauliSum<Complex64>,
    ) -> Result<(EvolveState, Option<AnsatzTree>, StepDiagnostics)> {
        let g = &self.cfg.grid;
        if next_source.n() != g.n || state.b_repr.n() != g.n {
            return Err(AtaError::QubitMismatch(g.n, next_source.n().max(state.b_repr.n())));
        }
        let tree = self.solve(state)?;
        let (x_repr, loss, depth) = match &tree {
            Some(t) => (xor_convolve(&t.to_pauli_sum(), &state.b_repr)?, t.loss().unwrap_or(0.0), t.depth()),
            None => (DiagonalPauliSum::new(g.n), 0.0, 0),
        };
        let x_scale = state.b_scale;
        let next = match self.cfg.coupling {
            SourceCoupling::Implicit => next_source.linear_combination(
                Complex64::new(g.c * g.dt, 0.0),
                &x_repr,
                Complex64::new(-g.c * x_scale, 0.0),
            )?,
            SourceCoupling::Additive { gamma } => {
                x_repr.linear_combination(Complex64::new(x_scale, 0.0), next_source, Complex64::new(gamma, 0.0))?
            }
        };
        let term_count = next.len();
        let blowup = self.cfg.term_cap.is_some_and(|cap| term_count > cap);
        let (kept, dropped_mass) = self.truncate(next);
        let x_state = fourier_image(&x_repr, 1.0)?;
        let reality_leakage = if x_state.norm() > 0.0 { x_state.reality_leakage()? } else { 0.0 };
        let diag = StepDiagnostics {
            step: state.step,
            loss,
            depth,
            fidelity: f64::NAN,
            dropped_mass,
            reality_leakage,
            term_count,
            blowup,
        };
        let mut out = EvolveState::from_sum(state.step + 1, kept);
        out.x = Some((x_repr, x_scale));
        out.last = Some(diag);
        Ok((out, tree, diag))
    }
}

/// `step` as a free function; builds the spectrum and decomposition each call.
pub fn step(
    state: &EvolveState,
    next_source: &DiagonalPauliSum<Complex64>,
    cfg: &EvolveConfig,
) -> Result<EvolveState> {
    Ok(Stepper::new(cfg)?.step(state, next_source)?.0)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_state: EvolveState,
    /// Trees in step order when `record_trees` is set.
    pub trees: Vec<AnsatzTree>,
    /// Exact solution after the last step, position domain, when tracked.
    pub reference: Option<Statevector>,
}

impl Trajectory {
    pub fn final_fidelity(&self) -> Option<f64> {
        self.diagnostics.last().map(|d| d.fidelity).filter(|f| !f.is_nan())
    }

    /// `step,loss,depth,fidelity,dropped_mass,reality_leakage,term_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,depth,fidelity,dropped_mass,reality_leakage,term_count\n");
        for d in &self.diagnostics {
            let _ = writeln!(
                out,
                "{},{:e},{},{},{:e},{:e},{}",
                d.step, d.loss, d.depth, d.fidelity, d.dropped_mass, d.reality_leakage, d.term_count
            );
        }
        out
    }
}

/// Runs `n_steps` steps from initial temperature `chi`.
pub fn run(
    chi: &DiagonalPauliSum<Complex64>,
    source: &dyn SourceModel,
    cfg: &EvolveConfig,
    n_steps: usize,
) -> Result<Trajectory> {
    run_with(chi, source, cfg, n_steps, |_, _| Ok(true))
}

/// Like [`run`]; `keep_going(step, diagnostics)` can end the run early.
pub fn run_with(
    chi: &DiagonalPauliSum<Complex64>,
    source: &dyn SourceModel,
    cfg: &EvolveConfig,
    n_steps: usize,
    mut keep_going: impl FnMut(usize, &StepDiagnostics) -> Result<bool>,
) -> Result<Trajectory> {
    let stepper = Stepper::new(cfg)?;
    if chi.n() != cfg.grid.n || source.n() != cfg.grid.n {
        return Err(AtaError::QubitMismatch(cfg.grid.n, chi.n().max(source.n())));
    }
    let mut tracker = if cfg.track_oracle {
        Some(ExactTracker::new(cfg.grid, &prepare_from_pauli_sum(chi))?)
    } else {
        None
    };
    let mut f_next = source.repr_at(0)?;
    let mut state = stepper.initial(chi, &f_next)?;
    let mut diagnostics = Vec::with_capacity(n_steps);
    let mut trees = Vec::new();
    for tau in 0..n_steps {
        let f_now = f_next;
        f_next = source.repr_at(tau + 1)?;
        let (next, tree, mut diag) = stepper.step(&state, &f_next)?;
        if let Some(tr) = tracker.as_mut() {
            let exact = tr.step(&fourier_image(&f_now, 1.0)?)?;
            let (x_repr, x_scale) = next.x.as_ref().expect("step always records x");
            let x = fourier_image(x_repr, *x_scale)?;
            diag.fidelity = if x.norm() > 0.0 && exact.norm() > 0.0 { x.fidelity(exact)? } else { f64::NAN };
        }
        state = next;
        state.last = Some(diag);
        diagnostics.push(diag);
        if cfg.record_trees {
            if let Some(t) = tree {
                trees.push(t);
            }
        }
        if !keep_going(tau, &diag)? {
            break;
        }
    }
    let reference = match tracker {
        Some(t) => Some(t.current().inverse_fourier()?),
        None => None,
    };
    Ok(Trajectory { diagnostics, final_state: state, trees, reference })
}

/// Replays recorded trees on explicit statevectors: every node is applied as
/// its Z-string in the Fourier domain and the source is added as a vector.
///
/// Returns the solutions `x^τ`, position domain. With no dropout this must
/// agree with the representation path.
pub fn replay_statevector(
    chi: &DiagonalPauliSum<Complex64>,
    source: &dyn SourceModel,
    cfg: &EvolveConfig,
    trees: &[AnsatzTree],
) -> Result<Vec<Statevector>> {
    let g = &cfg.grid;
    let chi_hat = prepare_from_pauli_sum(chi).fourier()?;
    let f0 = source.field_at(0)?.fourier()?;
    let mut b = match cfg.coupling {
        SourceCoupling::Implicit => f0.scaled(Complex64::new(g.c * g.dt, 0.0)).axpy(Complex64::new(-g.c, 0.0), &chi_hat)?,
        SourceCoupling::Additive { .. } => chi_hat,
    };
    let mut out = Vec::with_capacity(trees.len());
    for (tau, tree) in trees.iter().enumerate() {
        let mut x = Statevector::zeros(g.n, Domain::Fourier);
        for (node, &alpha) in tree.nodes().iter().zip(tree.alphas()) {
            x = x.axpy(alpha, &b.apply_zstring(node.mask)?)?;
        }
        let f = source.field_at(tau + 1)?.fourier()?;
        b = match cfg.coupling {
            SourceCoupling::Implicit => f.scaled(Complex64::new(g.c * g.dt, 0.0)).axpy(Complex64::new(-g.c, 0.0), &x)?,
            SourceCoupling::Additive { gamma } => x.axpy(Complex64::new(gamma, 0.0), &f)?,
        };
        out.push(x.inverse_fourier()?);
    }
    Ok(out)
}

/// `(m, 1/2^m)` with `m = ⌈log₂ d⌉` ancilla qubits for a depth-`d` tree.
pub fn preparation_cost(d: usize) -> Result<(u32, f64)> {
    if d == 0 {
        return Err(AtaError::InvalidParameter("tree depth must be at least 1".into()));
    }
    let m = usize::BITS - (d - 1).leading_zeros();
    let m = if d == 1 { 0 } else { m };
    Ok((m, 1.0 / (1u64 << m) as f64))
}

/// Smallest per-step depth cap for which the final fidelity after `n_steps`
/// reaches `target`, scanning caps `1..=max_cap`.
pub fn min_depth_multistep(
    chi: &DiagonalPauliSum<Complex64>,
    source: &dyn SourceModel,
    cfg: &EvolveConfig,
    n_steps: usize,
    target: f64,
    max_cap: usize,
) -> Result<DepthReport> {
    let mut best = 0.0f64;
    for d in 1..=max_cap {
        let c = EvolveConfig {
            ata: AtaConfig { max_depth: d, ..cfg.ata },
            track_oracle: true,
            record_trees: false,
            ..cfg.clone()
        };
        let traj = run(chi, source, &c, n_steps)?;
        let f = traj.final_fidelity().unwrap_or(0.0);
        best = best.max(f);
        if f >= target {
            return Ok(DepthReport::Reached { depth: d, fidelity: f });
        }
    }
    Ok(DepthReport::Saturated {
        depth: max_cap,
        grown: max_cap,
        fidelity: best,
        stop: crate::ata::StopReason::MaxDepth,
    })
}
