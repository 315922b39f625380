//! Stationary clusters: tree nodes that recur across many solves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ata::{grow, AnsatzTree, AtaConfig};
use crate::error::{AtaError, Result};
use crate::grid::{approx_spectrum, GridSpec, Spectrum};
use crate::pauli::decompose_operator;
use crate::sources::rng;
use crate::state::{Domain, Statevector};

/// Streams for Haar samples start here; sample `i` uses `HAAR_STREAM + i`.
pub const HAAR_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Members, by descending occurrence then ascending mask.
    pub masks: Vec<usize>,
    pub occurrence: BTreeMap<usize, usize>,
    pub trees_analyzed: usize,
    pub threshold: f64,
    /// Mean node count of the analyzed trees.
    pub mean_tree_size: f64,
}

impl ClusterReport {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// `mask,popcount,count,fraction`, ascending by mask.
    pub fn occurrence_csv(&self) -> String {
        let mut out = String::from("mask,popcount,count,fraction\n");
        for (&m, &c) in &self.occurrence {
            let _ = writeln!(out, "{m},{},{c},{}", m.count_ones(), c as f64 / self.trees_analyzed as f64);
        }
        out
    }
}

/// Masks present in at least `threshold` of the trees.
pub fn detect(trees: &[AnsatzTree], threshold: f64) -> Result<ClusterReport> {
    let sets: Vec<Vec<usize>> = trees.iter().map(|t| t.masks()).collect();
    detect_masks(&sets, threshold)
}

pub fn detect_masks(trees: &[Vec<usize>], threshold: f64) -> Result<ClusterReport> {
    if trees.len() < 2 {
        return Err(AtaError::EmptyInput("at least two trees are needed"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(AtaError::InvalidParameter(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    let mut occurrence = BTreeMap::new();
    for t in trees {
        for m in t.iter().copied().collect::<BTreeSet<_>>() {
            *occurrence.entry(m).or_insert(0usize) += 1;
        }
    }
    let needed = (threshold * trees.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    let mut masks: Vec<usize> = occurrence.iter().filter(|&(_, &c)| c >= needed).map(|(&m, _)| m).collect();
    masks.sort_by(|a, b| occurrence[b].cmp(&occurrence[a]).then(a.cmp(b)));
    let mean_tree_size = trees.iter().map(|t| t.len()).sum::<usize>() as f64 / trees.len() as f64;
    Ok(ClusterReport { masks, occurrence, trees_analyzed: trees.len(), threshold, mean_tree_size })
}

/// Tree seeded with every cluster mask, weights solved.
pub fn warm_start(cluster: &ClusterReport, root: &Statevector, spectrum: &Spectrum) -> Result<AnsatzTree> {
    if cluster.is_empty() {
        return Err(AtaError::EmptyInput("cluster"));
    }
    AnsatzTree::with_masks(root, &cluster.masks)?.solved(spectrum)
}

/// Normalized complex Gaussian vector, uniform on the unit sphere.
pub fn haar_state(n: u32, seed: u64, sample: u64) -> Result<Statevector> {
    let mut r = rng(seed, HAAR_STREAM + sample);
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
        .collect();
    Ok(Statevector::from_amps(amps, Domain::Position)?.normalized()?.0)
}

/// One tree per Haar-random root, grown to `depth_cap` nodes, then
/// intersected at `threshold`.
pub fn haar_random_study(
    n: u32,
    samples: usize,
    depth_cap: usize,
    c: f64,
    seed: u64,
    threshold: f64,
) -> Result<ClusterReport> {
    if samples < 2 {
        return Err(AtaError::InvalidParameter("at least two samples are needed".into()));
    }
    let g = GridSpec::dimensionless(n, c)?;
    let spectrum = approx_spectrum(&g);
    let decomposition = decompose_operator(&spectrum)?;
    let cfg = AtaConfig { max_depth: depth_cap, loss_tol: 0.0, ..AtaConfig::default() };
    let trees = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let root = haar_state(n, seed, s)?;
            Ok(grow(AnsatzTree::new(&root)?, &spectrum, &decomposition, &cfg)?.masks())
        })
        .collect::<Result<Vec<_>>>()?;
    detect_masks(&trees, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ata::solve_weights;
    use proptest::prelude::*;

    fn tree_with(masks: &[usize]) -> Vec<usize> {
        masks.to_vec()
    }

    #[test]
    fn identical_trees_give_full_cluster() {
        let t = tree_with(&[0, 3, 5, 9]);
        let r = detect_masks(&[t.clone(), t.clone(), t], 1.0).unwrap();
        assert_eq!(r.masks.iter().copied().collect::<BTreeSet<_>>(), BTreeSet::from([0, 3, 5, 9]));
    }

    #[test]
    fn disjoint_trees_share_only_the_root() {
        let r = detect_masks(&[tree_with(&[0, 1, 2]), tree_with(&[0, 4, 8])], 1.0).unwrap();
        assert_eq!(r.masks, vec![0]);
        let half = detect_masks(&[tree_with(&[0, 1, 2]), tree_with(&[0, 4, 8])], 0.5).unwrap();
        assert_eq!(half.masks, vec![0, 1, 2, 4, 8]);
    }

    #[test]
    fn detect_rejects_bad_input() {
        assert!(detect_masks(&[], 1.0).is_err());
        assert!(detect_masks(&[tree_with(&[0])], 1.0).is_err());
        assert!(detect_masks(&[tree_with(&[0]), tree_with(&[0])], 0.0).is_err());
        assert!(detect_masks(&[tree_with(&[0]), tree_with(&[0])], 1.5).is_err());
    }

    #[test]
    fn occurrence_csv_layout() {
        let r = detect_masks(&[tree_with(&[0, 3]), tree_with(&[0])], 1.0).unwrap();
        assert_eq!(r.occurrence_csv(), "mask,popcount,count,fraction\n0,0,2,1\n3,2,1,0.5\n");
    }

    #[test]
    fn warm_start_from_root_cluster_is_cold_start() {
        let g = GridSpec::dimensionless(5, 0.1).unwrap();
        let s = approx_spectrum(&g);
        let root = haar_state(5, 1, 0).unwrap();
        let cluster = detect_masks(&[vec![0], vec![0]], 1.0).unwrap();
        let warm = warm_start(&cluster, &root, &s).unwrap();
        let cold = AnsatzTree::new(&root).unwrap();
        let (alphas, loss) = solve_weights(&cold, &s).unwrap();
        assert_eq!(warm.masks(), vec![0]);
        assert!((warm.alphas()[0] - alphas[0]).norm() < 1e-15);
        assert!((warm.loss().unwrap() - loss).abs() < 1e-15);
    }

    #[test]
    fn identical_haar_seeds_overlap_fully() {
        let a = haar_state(6, 3, 0).unwrap();
        let b = haar_state(6, 3, 0).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_study_is_deterministic() {
        let a = haar_random_study(5, 6, 20, 0.1, 7, 1.0).unwrap();
        let b = haar_random_study(5, 6, 20, 0.1, 7, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.masks.contains(&0));
        assert_eq!(a.trees_analyzed, 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn detect_is_monotone_in_threshold(seed in 0u64..10_000, lo in 0.05f64..1.0, hi in 0.05f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let mut r = rng(seed, 0);
            use rand::Rng;
            let trees: Vec<Vec<usize>> = (0..6)
                .map(|_| std::iter::once(0).chain((0..8).map(|_| r.random_range(0..32usize))).collect())
                .collect();
            let a = detect_masks(&trees, lo).unwrap();
            let b = detect_masks(&trees, hi).unwrap();
            prop_assert!(a.masks.len() >= b.masks.len());
            let sa: BTreeSet<_> = a.masks.iter().collect();
            prop_assert!(b.masks.iter().all(|m| sa.contains(m)));
            if hi == 1.0 {
                for t in &trees {
                    prop_assert!(b.masks.iter().all(|m| t.contains(m)));
                }
            }
        }

        #[test]
        fn warm_loss_never_exceeds_cold(seed in 0u64..10_000) {
            let g = GridSpec::dimensionless(6, 0.1).unwrap();
            let s = approx_spectrum(&g);
            let root = haar_state(6, seed, 0).unwrap();
            let cluster = detect_masks(&[vec![0, 1, 3, 7], vec![0, 1, 3, 12]], 1.0).unwrap();
            let warm = warm_start(&cluster, &root, &s).unwrap();
            let (_, cold) = solve_weights(&AnsatzTree::new(&root).unwrap(), &s).unwrap();
            prop_assert!(warm.loss().unwrap() <= cold + 1e-12);
        }

        #[test]
        fn membership_is_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let g = GridSpec::dimensionless(5, 0.3).unwrap();
            let s = approx_spectrum(&g);
            let d = decompose_operator(&s).unwrap();
            let cfg = AtaConfig { max_depth: 10, loss_tol: 0.0, ..AtaConfig::default() };
            let roots: Vec<Statevector> = (0..3).map(|i| haar_state(5, seed, i).unwrap()).collect();
            let grow_all = |k: f64| -> Vec<Vec<usize>> {
                roots.iter().map(|r| grow(AnsatzTree::new(&r.scaled(Complex64::new(k, 0.0))).unwrap(), &s, &d, &cfg).unwrap().masks()).collect()
            };
            let a = detect_masks(&grow_all(1.0), 1.0).unwrap();
            let b = detect_masks(&grow_all(scale), 1.0).unwrap();
            prop_assert_eq!(a.masks, b.masks);
        }
    }
}
