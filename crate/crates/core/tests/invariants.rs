//! Library-level invariants beyond the unit tests: stationarity preservation
//! at scale, the tuner's accuracy guarantee, the measured acceptance curve
//! against its closed form, a negative control with the accept step disabled,
//! and property-based checks of the small pure functions.

use mwg::experiments::{self, audit};
use mwg::kernels::{propose, select_subset, subset_size, ChainState, KernelConfig};
use mwg::rng::chain_rng;
use mwg::targets::Target;
use mwg::theory;
use mwg::KernelKind;
use proptest::prelude::*;

/// Both kernels leave the target invariant: 200 chains started from exact
/// stationarity still have the stationary moments after 10⁴ steps each.
#[test]
fn kernels_preserve_stationarity_at_scale() {
    let target = Target::normal_iid(10).unwrap();
    let mut seed = 0x1000u64;
    for kind in [KernelKind::Rwm, KernelKind::Mala] {
        for c in [0.3, 1.0] {
            let sigma2 = audit::heuristic_sigma2(&target, kind, c);
            let report =
                audit::stationarity_audit(&target, kind, c, sigma2, 200, 10_000, seed).unwrap();
            seed += 1;
            let worst = report.checks.iter().map(|ch| ch.z.abs()).fold(0.0f64, f64::max);
            println!("{kind} c={c}: worst |z| = {worst:.2} over {} chains", report.chains);
            assert!(report.pass, "{kind} c={c}: stationarity audit failed");
        }
    }
}

/// Tuning to the optimal acceptance rate lands within 15% of the optimal
/// scale parameter on a 2×10⁵-step budget.
#[test]
fn tuning_recovers_the_optimal_scale() {
    let target = Target::normal_iid(20).unwrap();
    for (kind, accept, l_hat) in [
        (KernelKind::Rwm, 0.234, 2.3812024966855406),
        (KernelKind::Mala, 0.574, 1.6503024308252875),
    ] {
        let out = experiments::tune_scale(&target, kind, 1.0, accept, 200_000, 0x2000).unwrap();
        println!(
            "{kind}: tuned l = {:.3} (optimum {l_hat:.3}), acceptance {:.3}, converged {}",
            out.l_tuned, out.accept_final, out.converged
        );
        assert!(out.converged, "{kind}: tuner did not converge");
        assert!(
            (out.l_tuned - l_hat).abs() / l_hat <= 0.15,
            "{kind}: tuned l {:.3} not within 15% of {l_hat:.3}",
            out.l_tuned
        );
    }
}

/// The measured acceptance rate tracks the closed-form curve pointwise
/// across the whole default grid (iid normal, d=50).
#[test]
fn measured_acceptance_matches_the_closed_form() {
    let target = Target::normal_iid(50).unwrap();
    let c = 0.5;
    let (lo, hi) = experiments::default_sigma2_bounds(&target, KernelKind::Rwm, c).unwrap();
    let spec = experiments::SweepSpec {
        target,
        kind: KernelKind::Rwm,
        c,
        n_steps: 20_000,
        grid: experiments::geometric_grid(lo, hi, 12).unwrap(),
        replicates: 1,
        seed: 0x3000,
    };
    let out = experiments::run_sweep(&spec).unwrap();
    let mut worst = 0.0f64;
    for rec in &out.records {
        let want = theory::rwm_accept(c, rec.l_equivalent, 1.0).unwrap();
        worst = worst.max((rec.accept_hat - want).abs());
    }
    println!("worst |accept_hat − theory| = {worst:.4} over {} grid points", out.records.len());
    assert!(worst <= 0.04, "acceptance curve off by {worst:.3} somewhere on the grid");
}

/// Negative control: applying every Langevin proposal without the accept
/// step (an unadjusted discretization) visibly breaks stationarity, while
/// the corrected kernel at the same step size does not. This is what the
/// moment audit exists to catch.
#[test]
fn uncorrected_proposals_fail_the_audit() {
    let target = Target::normal_iid(10).unwrap();
    let sigma2 = 1.2;
    let chains = 200usize;
    let steps = 2000u64;
    let config = KernelConfig::new(KernelKind::Mala, 1.0, sigma2, 0x4000).unwrap();

    let finals: Vec<Vec<f64>> = (0..chains as u64)
        .map(|i| {
            let mut rng = chain_rng(0x4000, i);
            let mut state = ChainState::stationary_draw(&target, &mut rng);
            for _ in 0..steps {
                let mask = select_subset(&mut rng, state.dim(), 1.0);
                let (new_vals, _q_diff) = propose(&state, &mask, &config, &target, &mut rng);
                let mut x = state.x.clone();
                for (&idx, &v) in mask.indices.iter().zip(&new_vals) {
                    x[idx] = v;
                }
                state = ChainState::from_vec(x);
            }
            state.x
        })
        .collect();
    let report = audit::audit_moments(&target, &finals).unwrap();
    let worst = report.checks.iter().map(|ch| ch.z.abs()).fold(0.0f64, f64::max);
    println!("uncorrected: worst |z| = {worst:.1}");
    assert!(!report.pass, "audit failed to flag the unadjusted chain (worst |z| = {worst:.1})");

    // Same step size with the accept step in place stays exact.
    let corrected =
        audit::stationarity_audit(&target, KernelKind::Mala, 1.0, sigma2, chains, steps, 0x4001)
            .unwrap();
    let worst = corrected.checks.iter().map(|ch| ch.z.abs()).fold(0.0f64, f64::max);
    println!("corrected: worst |z| = {worst:.2}");
    assert!(corrected.pass, "corrected kernel failed the same audit");
}

proptest! {
    /// The subset size is always in [1, d] and exactly round(c·d) away from
    /// the boundaries.
    #[test]
    fn subset_size_stays_in_range(d in 1usize..200, c in 0.01f64..=1.0) {
        let k = subset_size(d, c);
        prop_assert!(k >= 1 && k <= d);
        let rounded = (c * d as f64).round() as usize;
        prop_assert_eq!(k, rounded.clamp(1, d));
    }

    /// Selected subsets are sorted, duplicate-free, in range, and of the
    /// advertised size.
    #[test]
    fn selected_subsets_are_valid(seed in any::<u64>(), d in 1usize..60, c in 0.01f64..=1.0) {
        let mut rng = chain_rng(seed, 0);
        let mask = select_subset(&mut rng, d, c);
        prop_assert_eq!(mask.len(), subset_size(d, c));
        prop_assert!(mask.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(mask.indices.iter().all(|&i| i < d));
    }

    /// Geometric grids hit both endpoints, grow strictly, and have the
    /// requested length.
    #[test]
    fn geometric_grids_are_monotone(lo in 1e-6f64..1.0, ratio in 1.5f64..500.0, points in 2usize..40) {
        let hi = lo * ratio;
        let grid = experiments::geometric_grid(lo, hi, points).unwrap();
        prop_assert_eq!(grid.len(), points);
        prop_assert!((grid[0] - lo).abs() <= 1e-12 * lo);
        prop_assert!((grid[points - 1] - hi).abs() <= 1e-12 * hi);
        prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    /// σ² ↔ l translations invert each other for both kernels.
    #[test]
    fn scale_translations_round_trip(l in 0.01f64..20.0, d in 1usize..500) {
        for kind in [KernelKind::Rwm, KernelKind::Mala] {
            let sigma2 = theory::sigma2_from_l(kind, l, d);
            let back = theory::l_from_sigma2(kind, sigma2, d);
            prop_assert!((back - l).abs() <= 1e-12 * l);
        }
    }

    /// The closed-form acceptance rate is always a probability (exactly 0 is
    /// reachable: the normal CDF underflows at extreme scale × roughness).
    #[test]
    fn acceptance_rates_are_probabilities(c in 0.01f64..=1.0, l in 0.01f64..30.0, i in 0.01f64..20.0) {
        let a = theory::rwm_accept(c, l, i).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let a = theory::mala_accept(c, l, i).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
