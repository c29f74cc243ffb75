//! The simulation harness: variance sweeps measuring acceptance against
//! first-order efficiency, acceptance-rate tuning by stochastic
//! approximation, mixing-time scaling over dimension, and stationarity
//! audits.
//!
//! Chains start from exact stationary draws (no burn-in) and every run is a
//! deterministic function of (config, seed): each unit of concurrent work
//! owns rng stream derived from the base seed, and results are gathered in
//! grid order.

pub mod audit;
pub mod iat;
pub mod mixing;
pub mod selftest;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{step, ChainState, KernelConfig};
use crate::rng::chain_rng;
use crate::targets::{Roughness, Target};
use crate::theory;
use crate::KernelKind;

/// A variance sweep over one (target, kernel, c) cell.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub target: Target,
    pub kind: KernelKind,
    pub c: f64,
    /// Kernel steps per grid point (per replicate).
    pub n_steps: u64,
    /// Strictly increasing, strictly positive σ² grid.
    pub grid: Vec<f64>,
    pub replicates: u32,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        KernelConfig::new(self.kind, self.c, 1.0, self.seed)?;
        if self.n_steps < 1000 {
            return Err(Error::invalid("n", format!("need at least 1000 steps, got {}", self.n_steps)));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("grid", "must not be empty"));
        }
        for pair in self.grid.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::invalid("grid", "must be strictly increasing"));
            }
        }
        if !(self.grid[0] > 0.0 && self.grid.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("grid", "must be strictly positive and finite"));
        }
        Ok(())
    }
}

/// One measured grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sigma2: f64,
    /// The scale l with σ² = l²·d^(−s) at this target's dimension.
    pub l_equivalent: f64,
    pub accept_hat: f64,
    /// Binomial-style standard error of `accept_hat`.
    pub accept_se: f64,
    /// Mean per-coordinate squared jump per iteration.
    pub fose_raw: f64,
    pub fose_norm: f64,
}

/// The sweep's estimate of where efficiency peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptimum {
    pub accept_star: f64,
    pub fose_star: f64,
    /// σ² of the grid point with the largest normalized efficiency.
    pub sigma2_at_max: f64,
    /// Whether the quadratic smoothing fit was used (falls back to the raw
    /// argmax on degenerate data).
    pub smoothed: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub optimum: SweepOptimum,
}

/// Geometric σ² grid, inclusive of both endpoints.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && lo > 0.0 && hi.is_finite() && hi > lo) {
        return Err(Error::invalid("sigma2_min", format!("need 0 < min < max, got [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2 grid points"));
    }
    let ratio = hi / lo;
    Ok((0..points).map(|i| lo * ratio.powf(i as f64 / (points - 1) as f64)).collect())
}

/// The theory-optimal σ² for this cell, from the target's analytic
/// constants. Errors when no closed-form constant exists (Monte Carlo
/// roughness, or MALA without a third-derivative constant) — supply explicit
/// grid bounds in that case.
pub fn theory_sigma2_star(target: &Target, kind: KernelKind, c: f64) -> Result<f64> {
    let konst = match kind {
        KernelKind::Rwm => match target.roughness_i() {
            Roughness::Exact(i) => i,
            Roughness::MonteCarlo { .. } => {
                return Err(Error::invalid(
                    "sigma2_min",
                    "no analytic roughness for this target; supply explicit grid bounds",
                ))
            }
        },
        KernelKind::Mala => match target.mala_k2() {
            Some(k2) => k2.sqrt(),
            None => {
                return Err(Error::invalid(
                    "sigma2_min",
                    "no analytic MALA constant for this target; supply explicit grid bounds",
                ))
            }
        },
    };
    let opt = theory::optimal_l(kind, c, konst)?;
    Ok(theory::sigma2_from_l(kind, opt.l_hat, target.dim()))
}

/// Default sweep bounds: a 256-fold geometric range centered at the
/// theory-optimal σ².
pub fn default_sigma2_bounds(target: &Target, kind: KernelKind, c: f64) -> Result<(f64, f64)> {
    let star = theory_sigma2_star(target, kind, c)?;
    Ok((star / 16.0, star * 16.0))
}

/// Run one chain of `spec.n_steps` from an exact stationary start and return
/// (acceptance rate, mean per-coordinate squared jump).
pub fn run_chain_stats(spec: &SweepSpec, sigma2: f64, stream: u64) -> Result<(f64, f64)> {
    let config = KernelConfig::new(spec.kind, spec.c, sigma2, spec.seed)?;
    let mut rng = chain_rng(spec.seed, stream);
    let mut state = ChainState::stationary_draw(&spec.target, &mut rng);
    for _ in 0..spec.n_steps {
        step(&mut state, &config, &spec.target, &mut rng);
    }
    Ok((state.accept_rate(), state.sq_jump / spec.n_steps as f64))
}

/// Efficiency normalization that the limit theory predicts collapses cells
/// onto one curve: RWM d·I·fose, MALA c^(−2/3)·I·d^(1/3)·fose, with I the
/// target's roughness at its own dimension (for correlated normals this is
/// the precision diagonal, the finite-d form of 1/(1−ρ)).
pub fn normalize_fose(fose_raw: f64, kind: KernelKind, target: &Target, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0 && c <= 1.0) {
        return Err(Error::invalid("c", format!("must be in (0, 1], got {c}")));
    }
    let df = target.dim() as f64;
    let i = target.roughness_i().value();
    Ok(match kind {
        KernelKind::Rwm => df * i * fose_raw,
        KernelKind::Mala => df.cbrt() * i / (c * c).cbrt() * fose_raw,
    })
}

/// Sweep the grid (grid points in parallel, replicates averaged per point)
/// and locate the efficiency peak.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let d = spec.target.dim();
    let reps = spec.replicates as u64;
    let records: Vec<SweepRecord> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(g, &sigma2)| -> Result<SweepRecord> {
            let (mut acc, mut fose) = (0.0, 0.0);
            for r in 0..reps {
                let (a, f) = run_chain_stats(spec, sigma2, g as u64 * reps + r)?;
                acc += a;
                fose += f;
            }
            let accept_hat = acc / reps as f64;
            let fose_raw = fose / reps as f64;
            let n_total = (spec.n_steps * reps) as f64;
            Ok(SweepRecord {
                sigma2,
                l_equivalent: theory::l_from_sigma2(spec.kind, sigma2, d),
                accept_hat,
                accept_se: (accept_hat * (1.0 - accept_hat) / n_total).sqrt(),
                fose_raw,
                fose_norm: normalize_fose(fose_raw, spec.kind, &spec.target, spec.c)?,
            })
        })
        .collect::<Result<_>>()?;
    let optimum = smoothed_optimum(&records);
    Ok(SweepOutcome { records, optimum })
}

/// Peak estimate: raw argmax of fose_norm, refined by a quadratic fit of
/// fose_norm against accept_hat over the 7 best records when the fit is
/// concave with an interior vertex.
fn smoothed_optimum(records: &[SweepRecord]) -> SweepOptimum {
    let arg = records
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.fose_norm.total_cmp(&b.1.fose_norm))
        .map(|(i, _)| i)
        .expect("validated non-empty grid");
    let argmax = records[arg];
    let fallback = SweepOptimum {
        accept_star: argmax.accept_hat,
        fose_star: argmax.fose_norm,
        sigma2_at_max: argmax.sigma2,
        smoothed: false,
    };

    let mut by_fose: Vec<&SweepRecord> = records.iter().collect();
    by_fose.sort_by(|a, b| b.fose_norm.total_cmp(&a.fose_norm));
    let top = &by_fose[..by_fose.len().min(7)];
    if top.len() < 3 {
        return fallback;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in top {
        lo = lo.min(r.accept_hat);
        hi = hi.max(r.accept_hat);
    }
    let pts: Vec<(f64, f64)> = top.iter().map(|r| (r.accept_hat, r.fose_norm)).collect();
    let Some([b0, b1, b2]) = quad_fit(&pts) else { return fallback };
    if b2 >= 0.0 {
        return fallback;
    }
    let a_star = -b1 / (2.0 * b2);
    if !(a_star >= lo && a_star <= hi) {
        return fallback;
    }
    SweepOptimum {
        accept_star: a_star,
        fose_star: b0 + b1 * a_star + b2 * a_star * a_star,
        sigma2_at_max: argmax.sigma2,
        smoothed: true,
    }
}

/// Least-squares parabola through (x, y) points via the normal equations;
/// None when the system is numerically singular (e.g. all x equal).
fn quad_fit(pts: &[(f64, f64)]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for &(x, y) in pts {
        let p = [1.0, x, x * x];
        for i in 0..3 {
            for (j, pj) in p.iter().enumerate() {
                m[i][j] += p[i] * pj;
            }
            m[i][3] += p[i] * y;
        }
    }
    solve3(&mut m)
}

fn solve3(m: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flat_map(|r| r[..3].iter()).fold(0.0f64, |a, &v| a.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        m.swap(col, piv);
        if m[col][col].abs() <= 1e-12 * scale {
            return None;
        }
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Outcome of acceptance-rate tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOutcome {
    pub l_tuned: f64,
    pub sigma2: f64,
    /// Acceptance measured on a fresh evaluation run at the tuned scale.
    pub accept_final: f64,
    /// False when the budget was below 10⁴ steps or the evaluation missed
    /// the target by more than 0.03.
    pub converged: bool,
}

const TUNE_BATCH: u64 = 200;
const TUNE_TOL: f64 = 0.03;
const TUNE_MIN_BUDGET: u64 = 10_000;

/// Tune σ to hit `target_accept` by stochastic approximation on log σ
/// (batches of 200 steps, gains n^(−0.6)), then measure the result on a
/// fresh run carved out of the same budget. A too-small budget is reported
/// as `converged: false`, not an error.
pub fn tune_scale(
    target: &Target,
    kind: KernelKind,
    c: f64,
    target_accept: f64,
    budget: u64,
    seed: u64,
) -> Result<TuneOutcome> {
    if !(target_accept > 0.0 && target_accept < 1.0) {
        return Err(Error::invalid("target_accept", format!("must be in (0, 1), got {target_accept}")));
    }
    if budget < 2 * TUNE_BATCH {
        return Err(Error::invalid("budget", format!("need at least {} steps, got {budget}", 2 * TUNE_BATCH)));
    }
    let d = target.dim();
    let eval_n = (budget / 10).clamp(1000, 20_000).min(budget - TUNE_BATCH);
    let batches = (budget - eval_n) / TUNE_BATCH;

    let mut log_sigma = 0.5 * theory::sigma2_from_l(kind, target.marginal_var().sqrt(), d).ln();
    let mut rng = chain_rng(seed, 0);
    let mut state = ChainState::stationary_draw(target, &mut rng);
    for n in 1..=batches {
        let config = KernelConfig::new(kind, c, (2.0 * log_sigma).exp(), seed)?;
        let before = state.n_accepts;
        for _ in 0..TUNE_BATCH {
            step(&mut state, &config, target, &mut rng);
        }
        let batch_accept = (state.n_accepts - before) as f64 / TUNE_BATCH as f64;
        log_sigma += (batch_accept - target_accept) / (n as f64).powf(0.6);
        log_sigma = log_sigma.clamp(-23.0, 23.0);
    }

    let sigma2 = (2.0 * log_sigma).exp();
    let config = KernelConfig::new(kind, c, sigma2, seed)?;
    let mut eval_rng = chain_rng(seed, 1);
    let mut eval = ChainState::stationary_draw(target, &mut eval_rng);
    for _ in 0..eval_n {
        step(&mut eval, &config, target, &mut eval_rng);
    }
    let accept_final = eval.accept_rate();
    Ok(TuneOutcome {
        l_tuned: theory::l_from_sigma2(kind, sigma2, d),
        sigma2,
        accept_final,
        converged: budget >= TUNE_MIN_BUDGET && (accept_final - target_accept).abs() <= TUNE_TOL,
    })
}
