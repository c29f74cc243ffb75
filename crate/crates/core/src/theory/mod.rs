//! Closed-form asymptotic theory for partially-updating Metropolis kernels.
//!
//! Everything here is a pure function of scalar inputs: limiting acceptance
//! rates and diffusion speeds for RWM- and MALA-within-Gibbs, the optimal
//! scale `l̂` and its invariant acceptance rates (0.234 / 0.574), the
//! cost-aware optimal update fraction, the exchangeable-target overlay, and
//! the Gaussian expected-acceptance oracle used to cross-check the rest.
//!
//! Scale convention: a kernel proposal variance σ² corresponds to the
//! dimension-free scale `l` through σ² = l²·d^(−s) with s = 1 for RWM and
//! s = 1/3 for MALA (see [`sigma2_from_l`] / [`l_from_sigma2`]).

mod phi;

pub use phi::{ln_phi, phi};

use crate::error::{Error, Result};
use crate::KernelKind;

/// Result of maximizing the speed curve over `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalScale {
    pub l_hat: f64,
    pub speed: f64,
    pub accept: f64,
}

/// Limiting OU parameters of the coordinate-mean process for an exchangeable
/// target: d(mean) = `drift_coeff`·mean·dt + (speed)^(1/2)·dB on the
/// d^`time_scale_exponent` iteration time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanProcessParams {
    pub drift_coeff: f64,
    pub stationary_var: f64,
    pub time_scale_exponent: f64,
}

fn check(name: &'static str, ok: bool, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(name, reason))
    }
}

fn check_c(c: f64) -> Result<()> {
    check("c", c.is_finite() && c > 0.0 && c <= 1.0, "must be in (0, 1]")
}

fn check_l(l: f64) -> Result<()> {
    check("l", l.is_finite() && l >= 0.0, "must be finite and >= 0")
}

fn check_rho(rho: f64) -> Result<()> {
    check("rho", rho.is_finite() && (0.0..1.0).contains(&rho), "must be in [0, 1)")
}

/// Limiting acceptance rate of RWM-within-Gibbs: 2Φ(−l√(cI)/2).
pub fn rwm_accept(c: f64, l: f64, i: f64) -> Result<f64> {
    check_c(c)?;
    check_l(l)?;
    check("I", i.is_finite() && i > 0.0, "roughness must be > 0")?;
    Ok(2.0 * phi(-0.5 * l * (c * i).sqrt()))
}

/// Limiting diffusion speed of RWM-within-Gibbs: 2cl²Φ(−l√(cI)/2).
pub fn rwm_speed(c: f64, l: f64, i: f64) -> Result<f64> {
    check_c(c)?;
    check_l(l)?;
    check("I", i.is_finite() && i > 0.0, "roughness must be > 0")?;
    Ok(2.0 * c * l * l * phi(-0.5 * l * (c * i).sqrt()))
}

/// Limiting acceptance rate of MALA-within-Gibbs: 2Φ(−√c·K·l³/2).
pub fn mala_accept(c: f64, l: f64, k: f64) -> Result<f64> {
    check_c(c)?;
    check_l(l)?;
    check("K", k.is_finite() && k >= 0.0, "must be finite and >= 0")?;
    Ok(2.0 * phi(-0.5 * c.sqrt() * k * l * l * l))
}

/// Limiting diffusion speed of MALA-within-Gibbs: 2cl²Φ(−√c·K·l³/2).
pub fn mala_speed(c: f64, l: f64, k: f64) -> Result<f64> {
    check_c(c)?;
    check_l(l)?;
    check("K", k.is_finite() && k >= 0.0, "must be finite and >= 0")?;
    Ok(2.0 * c * l * l * phi(-0.5 * c.sqrt() * k * l * l * l))
}

/// Scale exponent s in σ² = l²·d^(−s).
pub fn scale_exponent(kind: KernelKind) -> f64 {
    match kind {
        KernelKind::Rwm => 1.0,
        KernelKind::Mala => 1.0 / 3.0,
    }
}

/// Proposal variance for scale `l` at dimension `d`: σ² = l²·d^(−s).
pub fn sigma2_from_l(kind: KernelKind, l: f64, d: usize) -> f64 {
    l * l * (d as f64).powf(-scale_exponent(kind))
}

/// Dimension-free scale for proposal variance σ²: l = √(σ²·d^s).
pub fn l_from_sigma2(kind: KernelKind, sigma2: f64, d: usize) -> f64 {
    (sigma2 * (d as f64).powf(scale_exponent(kind))).sqrt()
}

// Golden-section search for the maximum of a unimodal function on [a, b].
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx)
}

/// Maximize the speed curve over `l` for the given kind and constant
/// (roughness I for RWM, K for MALA; both must be strictly positive or the
/// speed curve has no maximizer).
///
/// Brackets the unimodal curve by doubling, then golden-section to an
/// absolute tolerance of 1e-6 in `l`.
pub fn optimal_l(kind: KernelKind, c: f64, i_or_k: f64) -> Result<OptimalScale> {
    check_c(c)?;
    match kind {
        KernelKind::Rwm => check("I", i_or_k.is_finite() && i_or_k > 0.0, "roughness must be > 0")?,
        KernelKind::Mala => check("K", i_or_k.is_finite() && i_or_k > 0.0, "must be > 0 to maximize")?,
    }
    let f = |l: f64| match kind {
        KernelKind::Rwm => 2.0 * c * l * l * phi(-0.5 * l * (c * i_or_k).sqrt()),
        KernelKind::Mala => 2.0 * c * l * l * phi(-0.5 * c.sqrt() * i_or_k * l * l * l),
    };
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::invalid("l", "speed curve has no interior maximum"));
        }
    }
    let (l_hat, speed) = golden_max(f, 0.0, 2.0 * hi, 1e-7);
    let accept = match kind {
        KernelKind::Rwm => rwm_accept(c, l_hat, i_or_k)?,
        KernelKind::Mala => mala_accept(c, l_hat, i_or_k)?,
    };
    Ok(OptimalScale { l_hat, speed, accept })
}

/// Update fraction maximizing c^(2/3)/(a + bc): min(1, 2a/b).
///
/// `a` is the per-dimension fixed cost, `b` the per-dimension per-update
/// cost; `b = 0` makes every fraction free, so the full update wins.
pub fn cost_optimal_c(a: f64, b: f64) -> Result<f64> {
    check("a", a.is_finite() && a >= 0.0, "must be finite and >= 0")?;
    check("b", b.is_finite() && b >= 0.0, "must be finite and >= 0")?;
    check("a", a > 0.0 || b > 0.0, "a and b must not both be 0")?;
    if b == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * a / b).min(1.0))
}

/// E[1 ∧ e^A] for A ~ N(μ, s²): Φ(μ/s) + e^(μ+s²/2)·Φ(−s−μ/s), with the
/// second term evaluated in the log domain so extreme (μ, s) neither
/// overflow nor lose the tail. For s = 0 this is 1 ∧ e^μ.
pub fn expected_accept_gaussian(mu: f64, s: f64) -> f64 {
    debug_assert!(s >= 0.0, "s is a standard deviation");
    if s == 0.0 {
        return if mu >= 0.0 { 1.0 } else { mu.exp() };
    }
    let t1 = phi(mu / s);
    let t2 = (mu + 0.5 * s * s + ln_phi(-s - mu / s)).exp();
    t1 + t2
}

/// Roughness of the exchangeable normal target: I = 1/(1−ρ).
pub fn exchangeable_roughness(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(1.0 / (1.0 - rho))
}

/// MALA constant of the exchangeable normal target: K = √(K²),
/// K² = (1/16)(1/(1−ρ))³.
pub fn exchangeable_mala_k(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok((1.0 / (16.0 * (1.0 - rho).powi(3))).sqrt())
}

/// (accept, speed) for the exchangeable normal target with correlation ρ,
/// obtained from the generic formulas with I = 1/(1−ρ) and
/// K² = (1/16)(1/(1−ρ))³ — by construction exactly equal to them.
pub fn exchangeable_overlay(kind: KernelKind, c: f64, rho: f64, l: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    match kind {
        KernelKind::Rwm => {
            let i = exchangeable_roughness(rho)?;
            Ok((rwm_accept(c, l, i)?, rwm_speed(c, l, i)?))
        }
        KernelKind::Mala => {
            let k = exchangeable_mala_k(rho)?;
            Ok((mala_accept(c, l, k)?, mala_speed(c, l, k)?))
        }
    }
}

/// Limiting OU parameters of the coordinate-mean process at scale `l`:
/// drift −h_{c,ρ}(l)/(2ρ), stationary variance ρ, on the O(d²) (RWM) or
/// O(d^(4/3)) (MALA) iteration time scale. Degenerate at ρ = 0.
pub fn mean_process_params(kind: KernelKind, c: f64, rho: f64, l: f64) -> Result<MeanProcessParams> {
    check("rho", rho.is_finite() && rho > 0.0 && rho < 1.0, "must be in (0, 1)")?;
    let (_, speed) = exchangeable_overlay(kind, c, rho, l)?;
    Ok(MeanProcessParams {
        drift_coeff: -speed / (2.0 * rho),
        stationary_var: rho,
        time_scale_exponent: match kind {
            KernelKind::Rwm => 2.0,
            KernelKind::Mala => 4.0 / 3.0,
        },
    })
}
