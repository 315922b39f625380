//! Closed-form cost and success-probability models for ATA and HHL.
//!
//! Everything here is arithmetic on the inputs. The HHL constants are model
//! parameters, not measurements.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};

/// Prefactor of the `n³` HHL two-qubit gate model.
pub const HHL_GATE_CONSTANT: f64 = 1.0;
/// Two-qubit gates of one QFT, `n(n−1)/2`, times this gives a forward and
/// inverse pair.
pub const QFT_PAIR_FACTOR: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ata,
    Hhl,
}

/// Cost model for the eigenvalue-inversion block of HHL on this spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevScenario {
    /// `c_h·n³` gates.
    #[default]
    Polylog,
    /// `c_h·n³ + 2^n` gates.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub method: Method,
    pub n: u32,
    pub n_steps: u64,
    pub depth_d: usize,
    pub ancilla_m: u32,
    pub two_qubit_gates: f64,
    pub success_probability: f64,
    /// Expected circuit runs over the whole evolution.
    pub expected_runs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainProbability {
    /// `(1−p)^{N_τ}`.
    pub power: f64,
    /// `exp(−p·N_τ)`.
    pub exponential: f64,
}

pub fn hhl_chain_probability(p: f64, n_steps: u64) -> Result<ChainProbability> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AtaError::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let power = match i32::try_from(n_steps) {
        Ok(k) => (1.0 - p).powi(k),
        Err(_) => (1.0 - p).powf(n_steps as f64),
    };
    Ok(ChainProbability { power, exponential: (-p * n_steps as f64).exp() })
}

/// Ancillas needed to index `d` tree nodes.
pub fn ancillas(d: usize) -> u32 {
    d.max(1).next_power_of_two().trailing_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOverhead {
    /// `N_τ·2^m`.
    pub exact: u64,
    /// `N_τ·d`.
    pub smooth: u64,
}

pub fn ata_run_overhead(n_steps: u64, d: usize) -> Result<RunOverhead> {
    if n_steps == 0 || d == 0 {
        return Err(AtaError::InvalidParameter("n_steps and d must be positive".into()));
    }
    Ok(RunOverhead { exact: n_steps * (1u64 << ancillas(d)), smooth: n_steps * d as u64 })
}

/// Two-qubit gates: the QFT pair `n(n−1)` for ATA, `c_h·n³` for HHL.
pub fn gate_counts(n: u32, method: Method) -> Result<f64> {
    if n == 0 {
        return Err(AtaError::InvalidParameter("n must be at least 1".into()));
    }
    let n = n as f64;
    Ok(match method {
        Method::Ata => QFT_PAIR_FACTOR as f64 * n * (n - 1.0) / 2.0,
        Method::Hhl => HHL_GATE_CONSTANT * n * n * n,
    })
}

/// Per-run gates include the `2^m` node-preparation circuit.
pub fn ata_estimate(n: u32, n_steps: u64, d: usize) -> Result<ResourceEstimate> {
    let overhead = ata_run_overhead(n_steps, d)?;
    let m = ancillas(d);
    Ok(ResourceEstimate {
        method: Method::Ata,
        n,
        n_steps,
        depth_d: d,
        ancilla_m: m,
        two_qubit_gates: gate_counts(n, Method::Ata)? + (1u64 << m) as f64,
        success_probability: 1.0 / (1u64 << m) as f64,
        expected_runs: overhead.exact as f64,
    })
}

/// The chain must succeed at every step, so all `N_τ` steps count as one
/// preparation.
pub fn hhl_estimate(n: u32, n_steps: u64, p: f64, rev: RevScenario) -> Result<ResourceEstimate> {
    let mut gates = gate_counts(n, Method::Hhl)?;
    if rev == RevScenario::Exponential {
        gates += 2f64.powi(n as i32);
    }
    let prob = hhl_chain_probability(p, n_steps)?.power;
    Ok(ResourceEstimate {
        method: Method::Hhl,
        n,
        n_steps,
        depth_d: 0,
        ancilla_m: 1,
        two_qubit_gates: gates,
        success_probability: prob,
        expected_runs: (1.0 / prob).ceil(),
    })
}

pub const ESTIMATE_CSV_HEADER: &str =
    "method,n,n_steps,depth_d,ancilla_m,two_qubit_gates,success_probability,expected_runs\n";

pub fn estimates_to_csv(rows: &[ResourceEstimate]) -> String {
    let mut out = String::from(ESTIMATE_CSV_HEADER);
    for r in rows {
        let method = match r.method {
            Method::Ata => "ata",
            Method::Hhl => "hhl",
        };
        let _ = writeln!(
            out,
            "{method},{},{},{},{},{},{},{}",
            r.n, r.n_steps, r.depth_d, r.ancilla_m, r.two_qubit_gates, r.success_probability, r.expected_runs
        );
    }
    out
}
