//! Stationarity audit: launch many independent chains from exact stationary
//! draws, run each for a while, and check that the final states still match
//! the target's first and second moments. A correct kernel preserves the
//! distribution exactly, so z-scores stay small for *any* step size; a
//! broken acceptance ratio or missing correction shows up as a clear drift
//! in the second moment.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{step, ChainState, KernelConfig};
use crate::rng::chain_rng;
use crate::targets::Target;
use crate::KernelKind;

/// One audited moment: the across-chain average of a per-chain statistic,
/// compared to its stationary expectation. The standard error comes from the
/// spread across independent chains, so no distributional assumptions about
/// the statistic itself are needed.
#[derive(Debug, Clone)]
pub struct MomentCheck {
    pub name: &'static str,
    pub observed: f64,
    pub expected: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub checks: Vec<MomentCheck>,
    pub chains: usize,
    pub pass: bool,
}

const AUDIT_Z_LIMIT: f64 = 4.0;

/// Compare final chain states against the target's stationary moments:
/// coordinate mean vs 0, mean square vs the marginal variance, and (for
/// d ≥ 2) the average cross-moment vs ρ times the marginal variance.
pub fn audit_moments(target: &Target, finals: &[Vec<f64>]) -> Result<AuditReport> {
    let n = finals.len();
    if n < 2 {
        return Err(Error::invalid("chains", format!("need at least 2 chains, got {n}")));
    }
    let d = target.dim();
    let df = d as f64;

    // per-chain statistics
    let mut means = Vec::with_capacity(n);
    let mut squares = Vec::with_capacity(n);
    let mut crosses = Vec::with_capacity(n);
    for x in finals {
        assert_eq!(x.len(), d, "chain state dimension mismatch");
        let s1: f64 = x.iter().sum();
        let s2: f64 = x.iter().map(|v| v * v).sum();
        means.push(s1 / df);
        squares.push(s2 / df);
        if d >= 2 {
            crosses.push((s1 * s1 - s2) / (df * (df - 1.0)));
        }
    }

    let var = target.marginal_var();
    let mut checks = vec![
        moment_check("coordinate_mean", &means, 0.0),
        moment_check("coordinate_square", &squares, var),
    ];
    if d >= 2 {
        checks.push(moment_check("cross_moment", &crosses, target.rho() * var));
    }
    let pass = checks.iter().all(|c| c.z.abs() <= AUDIT_Z_LIMIT);
    Ok(AuditReport { checks, chains: n, pass })
}

fn moment_check(name: &'static str, stats: &[f64], expected: f64) -> MomentCheck {
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let z = if std_error > 0.0 { (mean - expected) / std_error } else { 0.0 };
    MomentCheck { name, observed: mean, expected, std_error, z }
}

/// Run `chains` independent chains for `steps` kernel iterations each, all
/// from exact stationary starts, and audit the final states.
pub fn stationarity_audit(
    target: &Target,
    kind: KernelKind,
    c: f64,
    sigma2: f64,
    chains: usize,
    steps: u64,
    seed: u64,
) -> Result<AuditReport> {
    if chains < 50 {
        return Err(Error::invalid("chains", format!("need at least 50 chains, got {chains}")));
    }
    let config = KernelConfig::new(kind, c, sigma2, seed)?;
    let finals: Vec<Vec<f64>> = (0..chains as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i);
            let mut state = ChainState::stationary_draw(target, &mut rng);
            for _ in 0..steps {
                step(&mut state, &config, target, &mut rng);
            }
            state.x
        })
        .collect();
    audit_moments(target, &finals)
}

/// A step-size heuristic for audits: the theory-optimal scale when the
/// target has analytic constants, otherwise the normal-target scale adjusted
/// for the marginal variance. Any positive value is valid for an audit; this
/// just keeps the chains moving briskly.
pub fn heuristic_sigma2(target: &Target, kind: KernelKind, c: f64) -> f64 {
    super::theory_sigma2_star(target, kind, c).unwrap_or_else(|_| {
        let v = target.marginal_var();
        let d = target.dim() as f64;
        match kind {
            KernelKind::Rwm => 2.38f64.powi(2) * v / d,
            KernelKind::Mala => 1.65f64.powi(2) * v / d.cbrt(),
        }
    })
}
