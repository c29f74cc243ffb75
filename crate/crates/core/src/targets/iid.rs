//! Double-exponential component internals.

use rand::Rng;
use rand_distr::Exp1;

use crate::rng::ChainRng;

/// d/dx log f for the unit double-exponential: −sign(x), with the kink at 0
/// mapped to 0 (`f64::signum` would call it ±1).
pub(super) fn laplace_score(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -x.signum()
    }
}

/// One unit double-exponential draw per coordinate: an Exp(1) magnitude, then
/// a sign bit.
pub(super) fn sample_laplace_into(rng: &mut ChainRng, out: &mut [f64]) {
    for o in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        *o = if rng.random::<bool>() { e } else { -e };
    }
}
