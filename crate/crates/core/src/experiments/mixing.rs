//! Mixing of the coordinate average under partial updates on the
//! exchangeable normal target: run each dimension at its theory-optimal
//! scale, estimate the integrated autocorrelation time of the mean, and fit
//! the scaling exponent of that time against dimension.

use rayon::prelude::*;

use super::iat::initial_positive_sequence_iat;
use crate::error::{Error, Result};
use crate::kernels::{step, ChainState, KernelConfig};
use crate::rng::chain_rng;
use crate::targets::Target;
use crate::theory;
use crate::KernelKind;

/// Target thinned series length: the recording stride is the expected
/// relaxation time divided by this, so the thinned correlation length stays
/// moderate regardless of dimension.
const POINTS_PER_RELAXATION: f64 = 150.0;
/// Default chain length in units of the expected relaxation time.
const RELAXATIONS_PER_RUN: f64 = 2000.0;

/// Mixing measurement at one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingPoint {
    pub d: usize,
    /// Integrated autocorrelation time of the coordinate average, in
    /// kernel iterations.
    pub iat: f64,
    pub stderr: f64,
    /// Sample variance of the recorded mean series.
    pub mean_var: f64,
    pub mean_var_se: f64,
    /// Lag window hit its cap; `stderr` is already doubled.
    pub truncated: bool,
    pub chain_steps: u64,
    /// Recording stride in iterations.
    pub thin: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingResult {
    pub points: Vec<MixingPoint>,
    /// Fitted exponent of iat ~ d^slope.
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

fn kernel_constant(kind: KernelKind, rho: f64) -> Result<f64> {
    match kind {
        KernelKind::Rwm => theory::exchangeable_roughness(rho),
        KernelKind::Mala => theory::exchangeable_mala_k(rho),
    }
}

/// Expected relaxation time of the mean process at dimension d when the
/// chain runs at peak speed: 4ρ·d^m / h*, with m the kind's time-scale
/// exponent.
fn relaxation_time(kind: KernelKind, c: f64, rho: f64, d: usize) -> Result<f64> {
    let opt = theory::optimal_l(kind, c, kernel_constant(kind, rho)?)?;
    let m = match kind {
        KernelKind::Rwm => 2.0,
        KernelKind::Mala => 4.0 / 3.0,
    };
    Ok(4.0 * rho * (d as f64).powf(m) / opt.speed)
}

fn measure_dimension(
    kind: KernelKind,
    rho: f64,
    c: f64,
    d: usize,
    steps_per_d: Option<u64>,
    seed: u64,
    stream: u64,
) -> Result<MixingPoint> {
    let target = Target::exchangeable_normal(d, rho)?;
    let opt = theory::optimal_l(kind, c, kernel_constant(kind, rho)?)?;
    let sigma2 = theory::sigma2_from_l(kind, opt.l_hat, d);
    let config = KernelConfig::new(kind, c, sigma2, seed)?;

    let tau_exp = relaxation_time(kind, c, rho, d)?;
    let n_steps = steps_per_d.unwrap_or((RELAXATIONS_PER_RUN * tau_exp).ceil() as u64);
    let thin = ((tau_exp / POINTS_PER_RELAXATION).round() as u64).max(1);
    if n_steps / thin < 100 {
        return Err(Error::invalid(
            "steps_per_d",
            format!("only {} thinned observations at d = {d}; need at least 100", n_steps / thin),
        ));
    }

    let mut rng = chain_rng(seed, stream);
    let mut state = ChainState::stationary_draw(&target, &mut rng);
    let mut series = Vec::with_capacity((n_steps / thin) as usize);
    for t in 1..=n_steps {
        step(&mut state, &config, &target, &mut rng);
        if t % thin == 0 {
            series.push(state.sum_x / d as f64);
        }
    }

    let n = series.len() as f64;
    let est = initial_positive_sequence_iat(&series);
    let width = (4 * est.pairs_used + 2) as f64;
    let mut stderr = thin as f64 * est.tau * (width / n).sqrt();
    if est.truncated {
        stderr *= 2.0;
    }

    let mean = series.iter().sum::<f64>() / n;
    let mean_var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sq_sum: f64 = est.autocov.iter().skip(1).map(|g| g * g).sum();
    let mean_var_se = ((2.0 / n) * (est.autocov[0].powi(2) + 2.0 * sq_sum)).sqrt();

    Ok(MixingPoint {
        d,
        iat: thin as f64 * est.tau,
        stderr,
        mean_var,
        mean_var_se,
        truncated: est.truncated,
        chain_steps: n_steps,
        thin,
    })
}

/// Run the mixing study across `ds` (in parallel) and fit
/// ln(iat) = intercept + slope·ln(d) by least squares, with the slope's
/// standard error propagated from the per-point iat errors.
pub fn mean_mixing_experiment(
    kind: KernelKind,
    rho: f64,
    c: f64,
    ds: &[usize],
    steps_per_d: Option<u64>,
    seed: u64,
) -> Result<MixingResult> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("mean process needs rho in (0, 1), got {rho}")));
    }
    if ds.len() < 2 {
        return Err(Error::invalid("ds", "need at least two dimensions to fit a slope"));
    }
    if ds.iter().any(|&d| d < 2) {
        return Err(Error::invalid("ds", "dimensions must be at least 2"));
    }
    for w in ds.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::invalid("ds", "dimensions must be strictly increasing"));
        }
    }

    let points: Vec<MixingPoint> = ds
        .par_iter()
        .enumerate()
        .map(|(i, &d)| measure_dimension(kind, rho, c, d, steps_per_d, seed, i as u64))
        .collect::<Result<_>>()?;

    let xs: Vec<f64> = points.iter().map(|p| (p.d as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.iat.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let slope_se = xs
        .iter()
        .zip(&points)
        .map(|(x, p)| {
            let w = (x - xbar) / sxx;
            let se_ln = p.stderr / p.iat;
            (w * se_ln).powi(2)
        })
        .sum::<f64>()
        .sqrt();

    Ok(MixingResult { points, slope, intercept, slope_se })
}
