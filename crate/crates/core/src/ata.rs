//! Greedy ansatz-tree solver for a single system `A′x = b`.
//!
//! The solution is sought as `x = Σ_j α_j·U_j|b>` where every node `U_j` is a
//! Z-string conjugated by the DFT. Each round re-optimizes all weights, scores
//! the children of the current frontier by the gradient of the loss and adds
//! the strongest one.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::grid::{approx_spectrum, exact_spectrum, GridSpec, Spectrum};
use crate::oracle::solve_fourier;
use crate::pauli::{decompose_operator, fwht_in_place, DiagonalPauliSum};
use crate::state::{Domain, NodeRef, Statevector, WalshTables};

/// Relative normal-equation residual above which the Cholesky solution is
/// replaced by a truncated SVD solve.
const CHOLESKY_RESIDUAL_TOL: f64 = 1e-6;
/// Singular values below this fraction of the largest are discarded.
const SVD_CUTOFF: f64 = 1e-10;
/// Relative score gap below which two candidates are tied.
const TIE_TOL: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 2;
/// Candidate count above which scoring runs on the rayon pool.
const PARALLEL_SCORING: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expansion {
    /// Children of the most recently added node only.
    LatestNode,
    /// Children of every node in the tree.
    FullFrontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtaConfig {
    /// Node count cap `d`.
    pub max_depth: usize,
    /// Stop once the loss falls to this value.
    pub loss_tol: f64,
    /// Stop when the relative loss improvement of a round falls below this;
    /// zero disables the check.
    pub stagnation_tol: f64,
    pub expansion: Expansion,
    /// Ridge added to the Gram diagonal, relative to `trace(G)/dim`.
    pub ridge: f64,
}

impl Default for AtaConfig {
    fn default() -> Self {
        Self {
            max_depth: 35,
            loss_tol: 1e-12,
            stagnation_tol: 0.0,
            expansion: Expansion::LatestNode,
            ridge: 1e-12,
        }
    }
}

impl AtaConfig {
    pub fn with_depth(max_depth: usize) -> Self {
        Self { max_depth, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(AtaError::InvalidParameter("max_depth must be at least 1".into()));
        }
        for (name, v) in [("loss_tol", self.loss_tol), ("stagnation_tol", self.stagnation_tol), ("ridge", self.ridge)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(AtaError::InvalidParameter(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxDepth,
    LossTol,
    Stagnation,
    Exhausted,
    /// A caller-supplied predicate was satisfied.
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzTree {
    /// Unit-norm root in the Fourier domain.
    root: Statevector,
    root_norm: f64,
    nodes: Vec<NodeRef>,
    alphas: Vec<Complex64>,
    loss_history: Vec<f64>,
    stop: Option<StopReason>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    masks: Vec<usize>,
    alphas: Vec<[f64; 2]>,
    loss_history: Vec<f64>,
}

impl AnsatzTree {
    /// Single-node tree `{mask 0}` on root `b` (either domain).
    pub fn new(b: &Statevector) -> Result<Self> {
        Self::with_masks(b, &[0])
    }

    /// Tree seeded with the given masks; mask 0 is placed first and
    /// duplicates are dropped.
    pub fn with_masks(b: &Statevector, masks: &[usize]) -> Result<Self> {
        let (root, root_norm) = b.to_domain(Domain::Fourier)?.normalized()?;
        let mut nodes = vec![NodeRef::new(0)];
        let mut seen = BTreeSet::from([0usize]);
        for &m in masks {
            if m >= root.len() {
                return Err(AtaError::InvalidParameter(format!("mask {m} out of range")));
            }
            if seen.insert(m) {
                nodes.push(NodeRef::new(m));
            }
        }
        Ok(Self { root, root_norm, nodes, alphas: Vec::new(), loss_history: Vec::new(), stop: None })
    }

    /// Solves the weights for the current nodes and records the loss.
    pub fn solved(mut self, spectrum: &Spectrum) -> Result<Self> {
        let (alphas, loss) = solve_weights(&self, spectrum)?;
        self.alphas = alphas;
        self.loss_history.push(loss);
        Ok(self)
    }

    pub fn root(&self) -> &Statevector {
        &self.root
    }

    /// Norm of the right-hand side the tree was built from.
    pub fn root_norm(&self) -> f64 {
        self.root_norm
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn masks(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.mask).collect()
    }

    pub fn depth(&self) -> usize {
        self.nodes.len()
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    fn weights_current(&self) -> bool {
        self.alphas.len() == self.nodes.len()
    }

    /// `Σ_j α_j Π_{mask_j}`; XOR-convolving it with a representation of `b`
    /// yields one of `x`.
    pub fn to_pauli_sum(&self) -> DiagonalPauliSum<Complex64> {
        let n = self.root.n();
        let mut s = DiagonalPauliSum::new(n);
        for (node, &a) in self.nodes.iter().zip(&self.alphas) {
            s.add_term(node.mask, a).expect("tree masks are in range");
        }
        s
    }

    /// Per-mode multiplier `p_k = Σ_j α_j σ_j(k)`.
    fn multiplier(&self) -> Vec<Complex64> {
        multiplier(self.root.len(), &self.masks(), &self.alphas)
    }

    /// `x = Σ α_j U_j |b>` for the original, unnormalized `b`, Fourier domain.
    pub fn solution_fourier(&self) -> Result<Statevector> {
        if !self.weights_current() {
            return Err(AtaError::InvalidParameter("weights are not solved".into()));
        }
        let amps = self
            .multiplier()
            .into_iter()
            .zip(self.root.amps())
            .map(|(p, b)| p * b * self.root_norm)
            .collect();
        Statevector::from_amps(amps, Domain::Fourier)
    }

    pub fn solution(&self) -> Result<Statevector> {
        self.solution_fourier()?.inverse_fourier()
    }

    pub fn to_json(&self) -> String {
        let j = TreeJson {
            masks: self.masks(),
            alphas: self.alphas.iter().map(|a| [a.re, a.im]).collect(),
            loss_history: self.loss_history.clone(),
        };
        serde_json::to_string(&j).expect("tree JSON is always serializable")
    }
}

fn multiplier(len: usize, masks: &[usize], alphas: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(0.0, 0.0); len];
    for (&m, &a) in masks.iter().zip(alphas) {
        p[m] += a;
    }
    fwht_in_place(&mut p);
    p
}

/// Precomputed overlap tables for one root and spectrum.
#[derive(Debug, Clone)]
pub struct Workspace {
    tables: WalshTables,
}

impl Workspace {
    pub fn new(tree: &AnsatzTree, spectrum: &Spectrum) -> Result<Self> {
        Ok(Self { tables: WalshTables::new(&tree.root, spectrum)? })
    }

    fn solve(&self, masks: &[usize], ridge: f64) -> Result<(Vec<Complex64>, f64)> {
        let d = masks.len();
        if d == 0 {
            return Err(AtaError::EmptyInput("tree nodes"));
        }
        let t = &self.tables;
        let g = DMatrix::from_fn(d, d, |i, j| t.gram(masks[i], masks[j]));
        let r = DVector::from_fn(d, |i, _| t.rhs(masks[i]));
        let alpha = solve_normal(&g, &r, ridge)?;
        let alphas: Vec<Complex64> = alpha.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let p = multiplier(t.weights().len(), masks, &alphas);
        // Direct residual Σ w_k |λ_k p_k - 1|²; avoids the cancellation in the
        // expanded quadratic form.
        let loss = t
            .weights()
            .iter()
            .zip(t.lambda())
            .zip(&p)
            .map(|((w, l), p)| w * (p * l - 1.0).norm_sqr())
            .sum();
        Ok((alphas, loss))
    }

    /// `|g_c| = |2Σ_j α_j <c|A′²|j> - 2<c|A′|b>|` for each candidate.
    fn gradient(&self, masks: &[usize], alphas: &[Complex64], cands: &[usize]) -> Vec<f64> {
        let t = &self.tables;
        let score = |&c: &usize| {
            let s: Complex64 = masks.iter().zip(alphas).map(|(&j, a)| a * t.gram(c, j)).sum();
            (2.0 * (s - t.rhs(c))).norm()
        };
        if cands.len() > PARALLEL_SCORING {
            cands.par_iter().map(score).collect()
        } else {
            cands.iter().map(score).collect()
        }
    }
}

fn solve_normal(g: &DMatrix<f64>, r: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let d = g.nrows();
    let shift = ridge * g.trace() / d as f64;
    let rnorm = r.norm().max(f64::MIN_POSITIVE);
    let regularized = g + DMatrix::identity(d, d) * shift;
    if let Some(ch) = regularized.cholesky() {
        let mut a = ch.solve(r);
        // Refinement against the unshifted G removes the ridge bias.
        for _ in 0..REFINEMENT_STEPS {
            a += ch.solve(&(r - g * &a));
        }
        if a.iter().all(|v| v.is_finite()) && (g * &a - r).norm() / rnorm <= CHOLESKY_RESIDUAL_TOL {
            return Ok(a);
        }
    }
    let svd = g.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0 && smax.is_finite()) {
        return Err(AtaError::DegenerateBasis);
    }
    let a = svd.solve(r, SVD_CUTOFF * smax).map_err(|_| AtaError::DegenerateBasis)?;
    if a.iter().all(|v| v.is_finite()) {
        Ok(a)
    } else {
        Err(AtaError::DegenerateBasis)
    }
}

/// Minimizes `‖A′x - b‖²` (root normalized) over the tree's span.
pub fn solve_weights(tree: &AnsatzTree, spectrum: &Spectrum) -> Result<(Vec<Complex64>, f64)> {
    Workspace::new(tree, spectrum)?.solve(&tree.masks(), AtaConfig::default().ridge)
}

/// Candidate children with their gradient magnitudes, ascending by mask.
///
/// Returns [`AtaError::Exhausted`] when every child is already in the tree.
pub fn score_children(
    tree: &AnsatzTree,
    spectrum: &Spectrum,
    decomposition: &DiagonalPauliSum<f64>,
    expansion: Expansion,
) -> Result<Vec<(usize, f64)>> {
    let ws = Workspace::new(tree, spectrum)?;
    let alphas = if tree.weights_current() { tree.alphas.clone() } else { ws.solve(&tree.masks(), AtaConfig::default().ridge)?.0 };
    score_with(&ws, tree, &alphas, decomposition, expansion)
}

fn candidates(tree: &AnsatzTree, decomposition: &DiagonalPauliSum<f64>, expansion: Expansion) -> Vec<usize> {
    let present: BTreeSet<usize> = tree.nodes.iter().map(|n| n.mask).collect();
    let parents: Vec<usize> = match expansion {
        Expansion::LatestNode => vec![tree.nodes.last().expect("tree is never empty").mask],
        Expansion::FullFrontier => present.iter().copied().collect(),
    };
    let set: BTreeSet<usize> = parents
        .iter()
        .flat_map(|&p| decomposition.masks().map(move |m| p ^ m))
        .filter(|c| !present.contains(c))
        .collect();
    set.into_iter().collect()
}

fn score_with(
    ws: &Workspace,
    tree: &AnsatzTree,
    alphas: &[Complex64],
    decomposition: &DiagonalPauliSum<f64>,
    expansion: Expansion,
) -> Result<Vec<(usize, f64)>> {
    let cands = candidates(tree, decomposition, expansion);
    if cands.is_empty() {
        return Err(AtaError::Exhausted);
    }
    let scores = ws.gradient(&tree.masks(), alphas, &cands);
    Ok(cands.into_iter().zip(scores).collect())
}

/// Highest score; scores within `TIE_TOL` of the maximum count as ties and
/// go to the smallest mask.
fn best(scored: &[(usize, f64)]) -> usize {
    let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scored
        .iter()
        .filter(|s| s.1 >= max - TIE_TOL * max.abs())
        .map(|s| s.0)
        .min()
        .expect("candidate list is non-empty")
}

/// Grows the tree until the depth cap, loss tolerance, stagnation or
/// exhaustion.
pub fn grow(
    tree: AnsatzTree,
    spectrum: &Spectrum,
    decomposition: &DiagonalPauliSum<f64>,
    cfg: &AtaConfig,
) -> Result<AnsatzTree> {
    grow_until(tree, spectrum, decomposition, cfg, |_| Ok(false))
}

/// Like [`grow`], additionally stopping with [`StopReason::Target`] as soon as
/// `done` returns true after a weight solve.
pub fn grow_until(
    mut tree: AnsatzTree,
    spectrum: &Spectrum,
    decomposition: &DiagonalPauliSum<f64>,
    cfg: &AtaConfig,
    mut done: impl FnMut(&AnsatzTree) -> Result<bool>,
) -> Result<AnsatzTree> {
    cfg.validate()?;
    if decomposition.n() != tree.root.n() {
        return Err(AtaError::QubitMismatch(tree.root.n(), decomposition.n()));
    }
    let ws = Workspace::new(&tree, spectrum)?;
    loop {
        if !tree.weights_current() {
            let (alphas, loss) = ws.solve(&tree.masks(), cfg.ridge)?;
            tree.alphas = alphas;
            tree.loss_history.push(loss);
        }
        let loss = *tree.loss_history.last().expect("weights were just solved");
        let stop = if done(&tree)? {
            Some(StopReason::Target)
        } else if loss <= cfg.loss_tol {
            Some(StopReason::LossTol)
        } else if cfg.stagnation_tol > 0.0 && stagnated(&tree.loss_history, cfg.stagnation_tol) {
            Some(StopReason::Stagnation)
        } else if tree.nodes.len() >= cfg.max_depth {
            Some(StopReason::MaxDepth)
        } else {
            None
        };
        if stop.is_some() {
            tree.stop = stop;
            return Ok(tree);
        }
        match score_with(&ws, &tree, &tree.alphas, decomposition, cfg.expansion) {
            Ok(scored) => tree.nodes.push(NodeRef::new(best(&scored))),
            Err(AtaError::Exhausted) => {
                tree.stop = Some(StopReason::Exhausted);
                return Ok(tree);
            }
            Err(e) => return Err(e),
        }
    }
}

fn stagnated(history: &[f64], tol: f64) -> bool {
    match history {
        [.., prev, last] if *prev > 0.0 => (prev - last) / prev < tol,
        _ => false,
    }
}

/// One linear system with its exact reference solution.
#[derive(Debug, Clone)]
pub struct Problem {
    pub b: Statevector,
    pub spectrum: Spectrum,
    pub decomposition: DiagonalPauliSum<f64>,
    /// Reference solution, Fourier domain.
    pub reference: Statevector,
}

impl Problem {
    /// Approximate operator for the solver; the reference solves with the
    /// exact cyclic matrix.
    pub fn new(b: &Statevector, g: &GridSpec) -> Result<Self> {
        let spectrum = approx_spectrum(g);
        let b_hat = b.to_domain(Domain::Fourier)?;
        let reference = solve_fourier(&b_hat, &exact_spectrum(g))?;
        Ok(Self { b: b.clone(), decomposition: decompose_operator(&spectrum)?, spectrum, reference })
    }

    /// Reference solved with the same operator the tree uses.
    pub fn self_consistent(b: &Statevector, g: &GridSpec) -> Result<Self> {
        let spectrum = approx_spectrum(g);
        let reference = solve_fourier(&b.to_domain(Domain::Fourier)?, &spectrum)?;
        Ok(Self { b: b.clone(), decomposition: decompose_operator(&spectrum)?, spectrum, reference })
    }

    pub fn fidelity(&self, tree: &AnsatzTree) -> Result<f64> {
        tree.solution_fourier()?.fidelity(&self.reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum DepthReport {
    Reached { depth: usize, fidelity: f64 },
    /// Target not met; `depth` is the cap and `grown` the nodes actually built.
    Saturated { depth: usize, grown: usize, fidelity: f64, stop: StopReason },
}

impl DepthReport {
    pub fn depth(&self) -> usize {
        match *self {
            DepthReport::Reached { depth, .. } | DepthReport::Saturated { depth, .. } => depth,
        }
    }

    pub fn fidelity(&self) -> f64 {
        match *self {
            DepthReport::Reached { fidelity, .. } | DepthReport::Saturated { fidelity, .. } => fidelity,
        }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self, DepthReport::Saturated { .. })
    }
}

/// Smallest node count whose solution reaches `target` fidelity against the
/// problem's reference, growing greedily up to `cfg.max_depth`.
///
/// The loss tolerance is ignored here so that growth continues until the
/// target or the cap.
pub fn min_depth_for_fidelity(problem: &Problem, target: f64, cfg: &AtaConfig) -> Result<DepthReport> {
    let cfg = AtaConfig { loss_tol: 0.0, ..*cfg };
    let mut last = 0.0;
    let tree = grow_until(AnsatzTree::new(&problem.b)?, &problem.spectrum, &problem.decomposition, &cfg, |t| {
        last = problem.fidelity(t)?;
        Ok(last >= target)
    })?;
    Ok(match tree.stop_reason() {
        Some(StopReason::Target) => DepthReport::Reached { depth: tree.depth(), fidelity: last },
        stop => DepthReport::Saturated {
            depth: cfg.max_depth,
            grown: tree.depth(),
            fidelity: last,
            stop: stop.unwrap_or(StopReason::MaxDepth),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense_reference;
    use crate::state::overlaps;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_real_state(n: u32, seed: u64) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Statevector::from_real(&v).unwrap()
    }

    // Smooth field: a few low cosine modes.
    fn smooth_state(n: u32, seed: u64) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = 1usize << n;
        let coeffs: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3))).collect();
        let v: Vec<f64> = (0..len)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, ph))| a * (2.0 * PI * (k * i) as f64 / len as f64 + ph).cos())
                    .sum()
            })
            .collect();
        Statevector::from_real(&v).unwrap()
    }

    fn setup(n: u32, c: f64) -> (Spectrum, DiagonalPauliSum) {
        let g = GridSpec::dimensionless(n, c).unwrap();
        let s = approx_spectrum(&g);
        let d = decompose_operator(&s).unwrap();
        (s, d)
    }

    // Dense least squares over the node basis, position domain.
    fn dense_alphas(tree: &AnsatzTree, spectrum: &Spectrum) -> Vec<Complex64> {
        let a = dense_reference(spectrum).unwrap();
        let root = tree.root();
        let b = DVector::from_column_slice(root.inverse_fourier().unwrap().amps());
        let cols: Vec<DVector<Complex64>> = tree
            .masks()
            .iter()
            .map(|&m| &a * DVector::from_column_slice(root.apply_zstring(m).unwrap().inverse_fourier().unwrap().amps()))
            .collect();
        let v = DMatrix::from_columns(&cols);
        let sol = v.svd(true, true).solve(&b, 1e-14).unwrap();
        sol.iter().copied().collect()
    }

    #[test]
    fn constant_spectrum_single_node() {
        let b = random_real_state(4, 1);
        let tree = AnsatzTree::new(&b).unwrap();
        let (alphas, loss) = solve_weights(&tree, &Spectrum::constant(4, -0.5)).unwrap();
        assert!((alphas[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!(loss.abs() < 1e-20);
    }

    #[test]
    fn full_group_at_two_qubits_is_exact() {
        let (s, _) = setup(2, 0.3);
        let b = random_real_state(2, 2);
        let tree = AnsatzTree::with_masks(&b, &[0, 1, 2, 3]).unwrap();
        let (_, loss) = solve_weights(&tree, &s).unwrap();
        assert!(loss < 1e-20, "{loss}");
    }

    #[test]
    fn weights_match_dense_least_squares() {
        let (s, _) = setup(6, 0.2);
        let b = random_real_state(6, 3);
        let tree = AnsatzTree::with_masks(&b, &[0, 1, 6, 17, 40]).unwrap();
        let (alphas, _) = solve_weights(&tree, &s).unwrap();
        for (a, d) in alphas.iter().zip(dense_alphas(&tree, &s)) {
            assert!((a - d).norm() < 1e-9, "{a} vs {d}");
        }
    }

    #[test]
    fn loss_matches_expanded_form() {
        let (s, _) = setup(5, 0.4);
        let b = random_real_state(5, 4);
        let tree = AnsatzTree::with_masks(&b, &[0, 3, 9]).unwrap();
        let (alphas, loss) = solve_weights(&tree, &s).unwrap();
        let masks = tree.masks();
        let o = overlaps(tree.root(), &s, &masks, &masks).unwrap();
        let a = DVector::from_vec(alphas);
        let quad = (a.adjoint() * &o.gram * &a)[0].re;
        let lin = (a.adjoint() * &o.rhs)[0].re;
        assert!((loss - (quad - 2.0 * lin + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn scores_vanish_at_exact_solution() {
        let (s, d) = setup(2, 0.3);
        let b = random_real_state(2, 5);
        let mut tree = AnsatzTree::with_masks(&b, &[0, 1, 2]).unwrap();
        let (alphas, _) = solve_weights(&tree, &s).unwrap();
        tree.alphas = alphas;
        // Force exactness: the full group, then score against itself.
        let full = AnsatzTree::with_masks(&b, &[0, 1, 2, 3]).unwrap();
        let ws = Workspace::new(&full, &s).unwrap();
        let (alphas, loss) = ws.solve(&full.masks(), 1e-12).unwrap();
        assert!(loss < 1e-20);
        for g in ws.gradient(&full.masks(), &alphas, &[0, 1, 2, 3]) {
            assert!(g < 1e-9);
        }
        assert!(score_children(&tree, &s, &d, Expansion::LatestNode).is_ok());
    }

    #[test]
    fn depth_one_candidate_count() {
        let (s, d) = setup(6, 0.1);
        let tree = AnsatzTree::new(&random_real_state(6, 6)).unwrap();
        let scored = score_children(&tree, &s, &d, Expansion::LatestNode).unwrap();
        assert_eq!(scored.len(), d.len() - 1);
    }

    #[test]
    fn argmax_matches_dense_gradient() {
        let (s, d) = setup(4, 0.1);
        let b = smooth_state(4, 7);
        let mut tree = AnsatzTree::with_masks(&b, &[0, 3]).unwrap();
        let (alphas, _) = solve_weights(&tree, &s).unwrap();
        tree.alphas = alphas.clone();
        let scored = score_children(&tree, &s, &d, Expansion::LatestNode).unwrap();
        // Dense gradient 2A²x - 2Ab, projected on each candidate node.
        let a = dense_reference(&s).unwrap();
        let root = tree.root();
        let node = |m: usize| DVector::from_column_slice(root.apply_zstring(m).unwrap().inverse_fourier().unwrap().amps());
        let x: DVector<Complex64> = tree.masks().iter().zip(&alphas).map(|(&m, al)| node(m) * *al).sum();
        let bv = node(0);
        let grad = (&a * &a * &x) * Complex64::new(2.0, 0.0) - (&a * &bv) * Complex64::new(2.0, 0.0);
        let brute: Vec<(usize, f64)> = scored.iter().map(|&(m, _)| (m, (node(m).adjoint() * &grad)[0].norm())).collect();
        for ((m1, g1), (m2, g2)) in scored.iter().zip(&brute) {
            assert_eq!(m1, m2);
            assert!((g1 - g2).abs() < 1e-10);
        }
        assert_eq!(best(&scored), best(&brute));
    }

    #[test]
    fn exhaustion_signal() {
        let (s, d) = setup(2, 0.3);
        let tree = AnsatzTree::with_masks(&random_real_state(2, 8), &[0, 1, 2, 3]).unwrap();
        assert_eq!(score_children(&tree, &s, &d, Expansion::FullFrontier).unwrap_err(), AtaError::Exhausted);
    }

    #[test]
    fn eigenvector_root_needs_one_node() {
        let (s, d) = setup(6, 0.1);
        let len = 64;
        let v: Vec<f64> = (0..len).map(|i| (2.0 * PI * 3.0 * i as f64 / len as f64).cos()).collect();
        let tree = grow(AnsatzTree::new(&Statevector::from_real(&v).unwrap()).unwrap(), &s, &d, &AtaConfig::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert!(tree.loss().unwrap() < 1e-12);
        assert_eq!(tree.stop_reason(), Some(StopReason::LossTol));
    }

    #[test]
    fn two_qubit_growth_reaches_exact_solution() {
        let (s, d) = setup(2, 0.5);
        let cfg = AtaConfig { max_depth: 4, loss_tol: 1e-20, expansion: Expansion::FullFrontier, ..AtaConfig::default() };
        for seed in 0..5 {
            let b = random_real_state(2, seed);
            let tree = grow(AnsatzTree::new(&b).unwrap(), &s, &d, &cfg).unwrap();
            assert!(tree.loss().unwrap() < 1e-20);
            let exact = solve_fourier(&b.fourier().unwrap(), &s).unwrap();
            assert!(tree.solution_fourier().unwrap().fidelity(&exact).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn smooth_root_converges_at_n11() {
        let g = GridSpec::dimensionless(11, 0.1).unwrap();
        let b = smooth_state(11, 9);
        let p = Problem::new(&b, &g).unwrap();
        let r = min_depth_for_fidelity(&p, 0.99, &AtaConfig::with_depth(35)).unwrap();
        assert!(!r.is_saturated(), "{r:?}");
    }

    #[test]
    fn min_depth_trivial_targets() {
        let g = GridSpec::dimensionless(5, 0.1).unwrap();
        let p = Problem::new(&random_real_state(5, 10), &g).unwrap();
        assert_eq!(min_depth_for_fidelity(&p, 0.0, &AtaConfig::default()).unwrap().depth(), 1);
        let v: Vec<f64> = (0..32).map(|i| (2.0 * PI * i as f64 / 32.0).sin()).collect();
        let e = Problem::self_consistent(&Statevector::from_real(&v).unwrap(), &g).unwrap();
        assert_eq!(min_depth_for_fidelity(&e, 1.0 - 1e-12, &AtaConfig::default()).unwrap().depth(), 1);
    }

    #[test]
    fn optimality_certificate_at_loss_tol() {
        let (s, d) = setup(3, 1.0);
        let cfg = AtaConfig { max_depth: 8, loss_tol: 1e-8, expansion: Expansion::FullFrontier, ..AtaConfig::default() };
        let b = random_real_state(3, 11);
        let tree = grow(AnsatzTree::new(&b).unwrap(), &s, &d, &cfg).unwrap();
        assert_eq!(tree.stop_reason(), Some(StopReason::LossTol));
        let x = tree.solution_fourier().unwrap();
        let ax = x.apply_spectrum(&s).unwrap();
        let bh = b.fourier().unwrap();
        let res = ax.axpy(Complex64::new(-1.0, 0.0), &bh).unwrap().norm() / bh.norm();
        assert!(res <= 1e-4 + 1e-12);
    }

    #[test]
    fn tree_json() {
        let (s, d) = setup(3, 1.0);
        let tree = grow(AnsatzTree::new(&random_real_state(3, 12)).unwrap(), &s, &d, &AtaConfig::with_depth(2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&tree.to_json()).unwrap();
        assert_eq!(v["masks"].as_array().unwrap().len(), 2);
        assert_eq!(v["alphas"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["loss_history"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(AtaConfig::with_depth(0).validate().is_err());
        assert!(AtaConfig { loss_tol: -1.0, ..AtaConfig::default() }.validate().is_err());
        let parsed: AtaConfig = serde_json::from_str(r#"{"max_depth": 7, "expansion": "full-frontier"}"#).unwrap();
        assert_eq!(parsed.max_depth, 7);
        assert_eq!(parsed.expansion, Expansion::FullFrontier);
        assert!(serde_json::from_str::<AtaConfig>(r#"{"depth": 7}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn loss_is_monotone(seed in 0u64..10_000, c in prop::sample::select(vec![0.1, 1.0, 10.0])) {
            let (s, d) = setup(6, c);
            let tree = grow(AnsatzTree::new(&random_real_state(6, seed)).unwrap(), &s, &d, &AtaConfig::with_depth(20)).unwrap();
            for w in tree.loss_history().windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn selection_is_scale_equivariant(seed in 0u64..10_000, scale in 0.01f64..100.0) {
            let (s, d) = setup(5, 0.3);
            let b = smooth_state(5, seed);
            let cfg = AtaConfig::with_depth(10);
            let t1 = grow(AnsatzTree::new(&b).unwrap(), &s, &d, &cfg).unwrap();
            let t2 = grow(AnsatzTree::new(&b.scaled(Complex64::new(scale, 0.0))).unwrap(), &s, &d, &cfg).unwrap();
            prop_assert_eq!(t1.masks(), t2.masks());
        }

        #[test]
        fn converged_scores_are_small(seed in 0u64..10_000) {
            // At n = 2 the full frontier spans the whole group.
            let (s, d) = setup(2, 0.7);
            let b = random_real_state(2, seed);
            let cfg = AtaConfig { max_depth: 4, loss_tol: 0.0, expansion: Expansion::FullFrontier, ..AtaConfig::default() };
            let tree = grow(AnsatzTree::new(&b).unwrap(), &s, &d, &cfg).unwrap();
            let ws = Workspace::new(&tree, &s).unwrap();
            let bound = 1e-8 * s.max_abs();
            for g in ws.gradient(&tree.masks(), tree.alphas(), &[0, 1, 2, 3]) {
                prop_assert!(g <= bound);
            }
        }
    }
}
