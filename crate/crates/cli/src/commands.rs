//! The five experiment commands. Each returns its CSV bodies and a JSON
//! summary; writing files is left to the caller.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use ata_core::ata::{grow, grow_until, Problem};
use ata_core::cluster::{detect, haar_random_study};
use ata_core::evolve::run;
use ata_core::grid::{approx_spectrum, exact_spectrum, rhs_from_state};
use ata_core::oracle::stationary_profile;
use ata_core::pauli::decompose_operator;
use ata_core::resources::{ata_estimate, hhl_estimate, Method, ResourceEstimate};
use ata_core::sources::{
    discretize_repr, heater_cooler_preset, normalize_pair, normalize_pauli_pair, random_pauli_state, sample_field,
    FieldSource, FieldSpec, PauliSource, SourceModel, StaticSource, ZeroSource,
};
use ata_core::state::prepare_from_pauli_sum;
use ata_core::{AnsatzTree, Complex64, DiagonalPauliSum, EvolveConfig, GridSpec, Statevector};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Reference, SourceKind, SourcesSection};

pub struct Output {
    /// `(file name, CSV body)`.
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

type Initial = (DiagonalPauliSum<Complex64>, Box<dyn SourceModel>);

/// Initial temperature and source for `n` qubits over `steps` steps.
pub fn build_sources(s: &SourcesSection, n: u32, steps: usize, seed: u64) -> Result<Initial> {
    let g_t = s.g_t.unwrap_or(s.g);
    let smooth_chi = || sample_field(FieldSpec { g_z: s.g, g_t: 0 }, seed);
    Ok(match s.kind {
        SourceKind::Smooth => {
            let chi = smooth_chi();
            let f = normalize_pair(&chi, &sample_field(FieldSpec { g_z: s.g, g_t }, seed))?;
            (discretize_repr(&chi, n, 0.0)?, Box::new(FieldSource { field: f, n, n_steps: steps }))
        }
        SourceKind::Decay => (discretize_repr(&smooth_chi(), n, 0.0)?, Box::new(ZeroSource { n })),
        SourceKind::Pauli => {
            let chi = random_pauli_state(n, s.terms, seed)?;
            let f = normalize_pauli_pair(&chi, PauliSource::sample(n, s.terms, g_t, steps, seed)?)?;
            (chi, Box::new(f))
        }
        SourceKind::HeaterCooler => {
            let len = 1usize << n;
            let cooler = s.cooler.unwrap_or((s.heater + len / 2) % len);
            let (chi, f) = heater_cooler_preset(n, (s.heater, cooler), s.width)?;
            (chi, Box::new(StaticSource { repr: f }))
        }
    })
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<Output> {
    let g = cfg.grid.spec()?;
    let exact = exact_spectrum(&g);
    let approx = approx_spectrum(&g);
    let mut csv = String::from("k,exact,approx\n");
    for k in 0..g.len() {
        let _ = writeln!(csv, "{k},{},{}", exact[k], approx[k]);
    }
    let max_gap = exact.values().iter().zip(approx.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Output {
        files: vec![("spectrum.csv".into(), csv)],
        summary: json!({ "points": g.len(), "max_abs_difference": max_gap }),
    })
}

pub fn step(cfg: &ExperimentConfig, oracle: bool) -> Result<Output> {
    let g = cfg.grid.spec()?;
    let (chi, source) = build_sources(&cfg.sources, g.n, g.n_t, cfg.seed)?;
    let b = rhs_from_state(&prepare_from_pauli_sum(&chi), &source.field_at(0)?, &g)?;
    if b.norm() == 0.0 {
        bail!("the configured sources give a zero right-hand side");
    }
    let mut fidelities = Vec::new();
    let tree = if oracle {
        let problem = match cfg.step.reference {
            Reference::Exact => Problem::new(&b, &g)?,
            Reference::Approx => Problem::self_consistent(&b, &g)?,
        };
        let target = cfg.step.target_fidelity;
        grow_until(AnsatzTree::new(&b)?, &problem.spectrum, &problem.decomposition, &cfg.ata, |t| {
            let f = problem.fidelity(t)?;
            fidelities.push(f);
            Ok(target.is_some_and(|x| f >= x))
        })?
    } else {
        let spectrum = approx_spectrum(&g);
        grow(AnsatzTree::new(&b)?, &spectrum, &decompose_operator(&spectrum)?, &cfg.ata)?
    };
    let mut csv = String::from("depth,mask,loss,fidelity\n");
    let masks = tree.masks();
    for (i, loss) in tree.loss_history().iter().enumerate() {
        let fid = fidelities.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{},{},{loss:e},{fid}", i + 1, masks[i]);
    }
    let tree_json: Value = serde_json::from_str(&tree.to_json())?;
    Ok(Output {
        files: vec![("step.csv".into(), csv)],
        summary: json!({
            "depth": tree.depth(),
            "loss": tree.loss(),
            "fidelity": fidelities.last(),
            "stop_reason": tree.stop_reason(),
            "tree": tree_json,
        }),
    })
}

fn evolve_config(cfg: &ExperimentConfig, grid: GridSpec, oracle: bool) -> EvolveConfig {
    EvolveConfig {
        d_cut: cfg.evolve.d_cut,
        coupling: cfg.evolve.coupling,
        lowpass_k: cfg.evolve.lowpass_k,
        term_cap: cfg.evolve.term_cap,
        track_oracle: oracle,
        ..EvolveConfig::new(grid, cfg.ata)
    }
}

pub fn evolve(cfg: &ExperimentConfig, oracle: bool) -> Result<Output> {
    let g = cfg.grid.spec()?;
    let steps = cfg.evolve_steps();
    let (chi, source) = build_sources(&cfg.sources, g.n, steps, cfg.seed)?;
    let ecfg = evolve_config(cfg, g, oracle);
    let traj = run(&chi, source.as_ref(), &ecfg, steps)?;
    let mut summary = json!({
        "steps": traj.diagnostics.len(),
        "final_fidelity": traj.final_fidelity(),
        "max_depth": traj.diagnostics.iter().map(|d| d.depth).max(),
        "blowup_steps": traj.diagnostics.iter().filter(|d| d.blowup).count(),
    });
    if oracle && cfg.sources.kind == SourceKind::HeaterCooler {
        let f = source.field_at(0)?.real_parts();
        let target = Statevector::from_real(&stationary_profile(&f, &g)?)?;
        if let Some(x) = traj.final_state.solution() {
            summary["stationary_fidelity"] = json!(x.fidelity(&target)?);
        }
    }
    let mut files = vec![("evolve.csv".into(), traj.to_csv())];
    if !cfg.evolve.d_cut_sweep.is_empty() {
        if !oracle {
            bail!("the dropout sweep measures infidelity and needs --oracle on");
        }
        files.push(("evolve_dropout.csv".into(), dropout_sweep(cfg, g, steps)?));
    }
    Ok(Output { files, summary })
}

/// Mean infidelity and dropped mass per step for every sweep width.
fn dropout_sweep(cfg: &ExperimentConfig, g: GridSpec, steps: usize) -> Result<String> {
    let jobs: Vec<(usize, u64)> = cfg
        .evolve
        .d_cut_sweep
        .iter()
        .flat_map(|&d| (0..cfg.evolve.sweep_seeds as u64).map(move |s| (d, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(d, s)| {
            let (chi, source) = build_sources(&cfg.sources, g.n, steps, cfg.seed + s)?;
            let ecfg = EvolveConfig { d_cut: Some(d), ..evolve_config(cfg, g, true) };
            Ok(run(&chi, source.as_ref(), &ecfg, steps)?.diagnostics)
        })
        .collect::<Result<Vec<_>>>()?;
    let seeds = cfg.evolve.sweep_seeds.max(1);
    let mut csv = String::from("d_cut,step,mean_infidelity,mean_dropped_mass\n");
    for (i, &d) in cfg.evolve.d_cut_sweep.iter().enumerate() {
        let group = &runs[i * seeds..(i + 1) * seeds];
        for t in 0..steps {
            let inf = group.iter().map(|r| 1.0 - r[t].fidelity).sum::<f64>() / seeds as f64;
            let dropped = group.iter().map(|r| r[t].dropped_mass).sum::<f64>() / seeds as f64;
            let _ = writeln!(csv, "{d},{t},{inf:e},{dropped:e}");
        }
    }
    Ok(csv)
}

pub fn cluster(cfg: &ExperimentConfig) -> Result<Output> {
    let c = &cfg.cluster;
    let g = cfg.grid.spec()?;
    let sweep = c
        .g_values
        .par_iter()
        .map(|&gv| {
            let sources = SourcesSection { kind: SourceKind::Smooth, g: gv, g_t: None, ..cfg.sources };
            let (chi, source) = build_sources(&sources, g.n, c.steps, cfg.seed)?;
            let ecfg = EvolveConfig { record_trees: true, track_oracle: false, ..evolve_config(cfg, g, false) };
            let traj = run(&chi, source.as_ref(), &ecfg, c.steps)?;
            detect(&traj.trees, c.threshold).with_context(|| format!("cluster for G = {gv}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sweep_csv = String::from("g,cluster_size,mean_tree_size,trees\n");
    for (gv, r) in c.g_values.iter().zip(&sweep) {
        let _ = writeln!(sweep_csv, "{gv},{},{},{}", r.len(), r.mean_tree_size, r.trees_analyzed);
    }
    let haar = c
        .haar_n
        .iter()
        .map(|&n| Ok(haar_random_study(n, c.haar_samples, c.haar_depth.min(1 << n), c.haar_c, cfg.seed, c.threshold)?))
        .collect::<Result<Vec<_>>>()?;
    let mut haar_csv = String::from("n,cluster_size,mean_tree_size,samples\n");
    for (n, r) in c.haar_n.iter().zip(&haar) {
        let _ = writeln!(haar_csv, "{n},{},{},{}", r.len(), r.mean_tree_size, r.trees_analyzed);
    }
    Ok(Output {
        files: vec![("cluster_sweep.csv".into(), sweep_csv), ("cluster_haar.csv".into(), haar_csv)],
        summary: json!({
            "sweep_clusters": c.g_values.iter().zip(&sweep).map(|(g, r)| json!({"g": g, "masks": r.masks})).collect::<Vec<_>>(),
            "haar_clusters": c.haar_n.iter().zip(&haar).map(|(n, r)| json!({"n": n, "masks": r.masks})).collect::<Vec<_>>(),
        }),
    })
}

fn estimate_row(csv: &mut String, r: &ResourceEstimate, p: Option<f64>) {
    let method = match r.method {
        Method::Ata => "ata",
        Method::Hhl => "hhl",
    };
    let p = p.map(|p| p.to_string()).unwrap_or_default();
    let _ = writeln!(
        csv,
        "{method},{},{},{},{p},{},{},{},{}",
        r.n, r.n_steps, r.depth_d, r.ancilla_m, r.two_qubit_gates, r.success_probability, r.expected_runs
    );
}

pub fn resources(cfg: &ExperimentConfig) -> Result<Output> {
    let r = &cfg.resources;
    let mut csv =
        String::from("method,n,n_steps,depth_d,p,ancilla_m,two_qubit_gates,success_probability,expected_runs\n");
    let mut rows = 0;
    for &n in &r.n {
        for &steps in &r.n_steps {
            for &d in &r.depth {
                estimate_row(&mut csv, &ata_estimate(n, steps, d)?, None);
                rows += 1;
            }
            for &p in &r.p {
                estimate_row(&mut csv, &hhl_estimate(n, steps, p, r.rev)?, Some(p));
                rows += 1;
            }
        }
    }
    Ok(Output { files: vec![("resources.csv".into(), csv)], summary: json!({ "rows": rows }) })
}
