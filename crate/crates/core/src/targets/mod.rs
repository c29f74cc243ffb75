//! Target distributions: log-densities up to additive constants, gradients,
//! exact stationary samplers, and the scalar constants the theory layer
//! consumes.
//!
//! All evaluation paths are O(d), and the incremental hooks
//! ([`Target::log_density_delta`], [`Target::grad_subset`]) are O(|subset|)
//! given the running sums Σxᵢ and Σxᵢ² that the kernel maintains — the
//! correlated targets never form or invert their covariance matrix.

mod exchangeable;
mod iid;
mod student_t;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::ChainRng;

/// How a roughness constant was obtained: closed form, or Monte Carlo with
/// its standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roughness {
    Exact(f64),
    MonteCarlo { value: f64, std_error: f64, samples: u64 },
}

impl Roughness {
    pub fn value(&self) -> f64 {
        match *self {
            Roughness::Exact(v) => v,
            Roughness::MonteCarlo { value, .. } => value,
        }
    }
}

/// Constants feeding the scaling formulas, evaluated at the target's own
/// dimension: roughness I, the Langevin constant K² where it exists, and the
/// effective correlation (0 for IID targets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConstants {
    pub i: Roughness,
    pub k2: Option<f64>,
    pub rho: f64,
}

/// A target distribution on R^d.
///
/// Construct through [`Target::normal_iid`], [`Target::laplace_iid`],
/// [`Target::exchangeable_normal`], or [`Target::student_t`]; the
/// constructors validate parameters and derive the cached precision
/// coefficient `theta` for the correlated targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// d independent N(0, 1) coordinates.
    NormalIid { d: usize },
    /// d independent unit double-exponential coordinates, density ∝ e^(−|x|).
    LaplaceIid { d: usize },
    /// N(0, Σ_ρ) with unit variances and constant correlation ρ.
    ExchangeableNormal { d: usize, rho: f64, theta: f64 },
    /// Multivariate t_ν(0, Σ_ρ); coordinate variance ν/(ν−2).
    StudentT { d: usize, rho: f64, nu: f64, theta: f64 },
}

fn check_dim(name: &'static str, d: usize, min: usize) -> Result<()> {
    if d >= min {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be at least {min}, got {d}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must be in [0, 1), got {rho}")))
    }
}

impl Target {
    pub fn normal_iid(d: usize) -> Result<Self> {
        check_dim("d", d, 1)?;
        Ok(Target::NormalIid { d })
    }

    pub fn laplace_iid(d: usize) -> Result<Self> {
        check_dim("d", d, 1)?;
        Ok(Target::LaplaceIid { d })
    }

    pub fn exchangeable_normal(d: usize, rho: f64) -> Result<Self> {
        check_dim("d", d, 2)?;
        check_rho(rho)?;
        Ok(Target::ExchangeableNormal { d, rho, theta: exchangeable::theta(d, rho) })
    }

    pub fn student_t(d: usize, rho: f64, nu: f64) -> Result<Self> {
        check_dim("d", d, 2)?;
        check_rho(rho)?;
        if !(nu.is_finite() && nu > 2.0) {
            return Err(Error::invalid("nu", format!("must be > 2 for a finite variance, got {nu}")));
        }
        Ok(Target::StudentT { d, rho, nu, theta: exchangeable::theta(d, rho) })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Target::NormalIid { d }
            | Target::LaplaceIid { d }
            | Target::ExchangeableNormal { d, .. }
            | Target::StudentT { d, .. } => d,
        }
    }

    /// Constant pairwise correlation (0 for the IID targets).
    pub fn rho(&self) -> f64 {
        match *self {
            Target::NormalIid { .. } | Target::LaplaceIid { .. } => 0.0,
            Target::ExchangeableNormal { rho, .. } | Target::StudentT { rho, .. } => rho,
        }
    }

    /// Variance of a single coordinate under the target.
    pub fn marginal_var(&self) -> f64 {
        match *self {
            Target::NormalIid { .. } | Target::ExchangeableNormal { .. } => 1.0,
            Target::LaplaceIid { .. } => 2.0,
            Target::StudentT { nu, .. } => nu / (nu - 2.0),
        }
    }

    /// Log-density up to a constant independent of `x`.
    ///
    /// Panics if `x.len() != d` (contract violation).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "log_density: dimension mismatch");
        let (s1, s2) = sums(x);
        match *self {
            Target::NormalIid { .. } => -0.5 * s2,
            Target::LaplaceIid { .. } => -x.iter().map(|v| v.abs()).sum::<f64>(),
            Target::ExchangeableNormal { rho, theta, .. } => {
                -0.5 * exchangeable::quad_form(rho, theta, s1, s2)
            }
            Target::StudentT { d, rho, nu, theta } => {
                student_t::log_density(d, nu, exchangeable::quad_form(rho, theta, s1, s2))
            }
        }
    }

    /// Gradient of the log-density.
    ///
    /// Panics if `x.len() != d` (contract violation).
    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "grad_log_density: dimension mismatch");
        let (s1, s2) = sums(x);
        let mut out = vec![0.0; x.len()];
        self.grad_subset(x, s1, s2, &mut out);
        out
    }

    /// log π(y) − log π(x) for a move touching only a subset of coordinates.
    ///
    /// `old_vals`/`new_vals` are the touched coordinates of x and y in the
    /// same order; `sum_x`/`sum_sq` are Σxᵢ and Σxᵢ² over all `d` coordinates
    /// of the current state, and `d_sum`/`d_sum_sq` the changes to those sums
    /// under the move. O(|subset|); consistent with [`Target::log_density`]
    /// differences to floating-point accuracy.
    pub fn log_density_delta(
        &self,
        old_vals: &[f64],
        new_vals: &[f64],
        sum_x: f64,
        sum_sq: f64,
        d_sum: f64,
        d_sum_sq: f64,
    ) -> f64 {
        debug_assert_eq!(old_vals.len(), new_vals.len());
        match *self {
            Target::NormalIid { .. } => -0.5 * d_sum_sq,
            Target::LaplaceIid { .. } => old_vals
                .iter()
                .zip(new_vals)
                .map(|(&x, &y)| x.abs() - y.abs())
                .sum(),
            Target::ExchangeableNormal { rho, theta, .. } => {
                let inv = 1.0 / (1.0 - rho);
                -0.5 * (inv * d_sum_sq + theta * d_sum * (2.0 * sum_x + d_sum))
            }
            Target::StudentT { d, rho, nu, theta } => {
                let j_old = exchangeable::quad_form(rho, theta, sum_x, sum_sq);
                let j_new = exchangeable::quad_form(rho, theta, sum_x + d_sum, sum_sq + d_sum_sq);
                student_t::log_density(d, nu, j_new) - student_t::log_density(d, nu, j_old)
            }
        }
    }

    /// Gradient restricted to a subset: `out[i]` gets ∂ log π / ∂x at the
    /// coordinate whose value is `vals[i]`, for the state with running sums
    /// `sum_x`/`sum_sq`. O(|subset|).
    pub fn grad_subset(&self, vals: &[f64], sum_x: f64, sum_sq: f64, out: &mut [f64]) {
        debug_assert_eq!(vals.len(), out.len());
        match *self {
            Target::NormalIid { .. } => {
                for (o, &v) in out.iter_mut().zip(vals) {
                    *o = -v;
                }
            }
            Target::LaplaceIid { .. } => {
                for (o, &v) in out.iter_mut().zip(vals) {
                    *o = iid::laplace_score(v);
                }
            }
            Target::ExchangeableNormal { rho, theta, .. } => {
                let inv = 1.0 / (1.0 - rho);
                for (o, &v) in out.iter_mut().zip(vals) {
                    *o = -(inv * v + theta * sum_x);
                }
            }
            Target::StudentT { d, rho, nu, theta } => {
                let inv = 1.0 / (1.0 - rho);
                let j = exchangeable::quad_form(rho, theta, sum_x, sum_sq);
                let coef = (nu + d as f64) / (nu + j);
                for (o, &v) in out.iter_mut().zip(vals) {
                    *o = -coef * (inv * v + theta * sum_x);
                }
            }
        }
    }

    /// One exact draw from the target.
    pub fn exact_sample(&self, rng: &mut ChainRng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    pub(crate) fn sample_into(&self, rng: &mut ChainRng, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim(), "sample_into: dimension mismatch");
        match *self {
            Target::NormalIid { .. } => {
                for o in out.iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
            }
            Target::LaplaceIid { .. } => iid::sample_laplace_into(rng, out),
            Target::ExchangeableNormal { rho, .. } => exchangeable::sample_into(rng, rho, out),
            Target::StudentT { rho, nu, .. } => student_t::sample_into(rng, rho, nu, out),
        }
    }

    /// Roughness I = E[(∂₁ log π)²] under the target, at the target's own
    /// dimension: closed form where one exists, Monte Carlo (10⁶ draws, fixed
    /// internal stream) for the t. For the exchangeable normal this is the
    /// precision-matrix diagonal, which tends to 1/(1−ρ) as d grows.
    pub fn roughness_i(&self) -> Roughness {
        match *self {
            Target::NormalIid { .. } | Target::LaplaceIid { .. } => Roughness::Exact(1.0),
            Target::ExchangeableNormal { d, rho, .. } => {
                Roughness::Exact(exchangeable::precision_diag(d, rho))
            }
            Target::StudentT { d, rho, nu, theta } => student_t::mc_roughness(d, rho, nu, theta),
        }
    }

    /// Langevin constant K² where the log-density is three times
    /// differentiable; `None` for the double-exponential (kink) and the t
    /// (no closed form). Gaussian targets take K² = p³/16 with p the
    /// per-coordinate precision, so the iid normal gives 1/16 and the
    /// exchangeable value tends to 1/(16(1−ρ)³) as d grows.
    pub fn mala_k2(&self) -> Option<f64> {
        match *self {
            Target::NormalIid { .. } => Some(1.0 / 16.0),
            Target::LaplaceIid { .. } => None,
            Target::ExchangeableNormal { d, rho, .. } => {
                let p = exchangeable::precision_diag(d, rho);
                Some(p * p * p / 16.0)
            }
            Target::StudentT { .. } => None,
        }
    }

    pub fn scaling_constants(&self) -> ScalingConstants {
        ScalingConstants { i: self.roughness_i(), k2: self.mala_k2(), rho: self.rho() }
    }
}

fn sums(x: &[f64]) -> (f64, f64) {
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &v in x {
        s1 += v;
        s2 += v * v;
    }
    (s1, s2)
}
