//! Fast invariant suite behind the `selftest` subcommand: every check is a
//! self-contained property of the library (closed forms, kernel behavior at
//! extremes, sampler moments, determinism) that runs in well under a minute
//! in total.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{audit, run_sweep, SweepSpec};
use crate::kernels::{self, step, ChainState, KernelConfig, SubsetMask};
use crate::rng::chain_rng;
use crate::targets::Target;
use crate::theory;
use crate::KernelKind;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

/// Run every check and return the results in a fixed order.
pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        scaling_identities(),
        optimal_acceptance_constants(),
        normal_cdf_reference(),
        expected_accept_monte_carlo(),
        subset_uniformity(),
        gradient_finite_difference(),
        precision_form(),
        sampler_moments(),
        kernel_acceptance_limits(),
        drift_reversibility(),
        uncorrelated_reduction(),
        stationarity_spot_check(),
        sweep_determinism(),
    ]
}

/// Acceptance and speed curves at update fraction c collapse onto the c = 1
/// curves under the kind's scale substitution, and speed = c·l²·accept.
fn scaling_identities() -> CheckResult {
    let mut rng = chain_rng(0x5e1f, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = 0.05 + 0.95 * rng.random::<f64>();
        let l = 0.1 + 4.0 * rng.random::<f64>();
        let a1 = theory::rwm_accept(c, c.powf(-0.5) * l, 1.0).unwrap();
        let a2 = theory::rwm_accept(1.0, l, 1.0).unwrap();
        worst = worst.max((a1 - a2).abs());
        let s1 = theory::rwm_speed(c, c.powf(-0.5) * l, 1.0).unwrap();
        worst = worst.max((s1 - theory::rwm_speed(1.0, l, 1.0).unwrap()).abs());
        let m1 = theory::mala_speed(c, c.powf(-1.0 / 6.0) * l, 0.25).unwrap();
        let m2 = c.powf(2.0 / 3.0) * theory::mala_speed(1.0, l, 0.25).unwrap();
        worst = worst.max((m1 - m2).abs() / m2.max(1e-300));
        let spd = theory::rwm_speed(c, l, 1.0).unwrap();
        let prod = c * l * l * theory::rwm_accept(c, l, 1.0).unwrap();
        worst = worst.max((spd - prod).abs() / prod.max(1e-300));
    }
    check("scaling-identities", worst < 1e-12, format!("max deviation {worst:.3e}"))
}

/// The optimal acceptance rate is 0.234 (random walk) / 0.574 (drift) to
/// three decimals, independent of c and the target's roughness constants.
fn optimal_acceptance_constants() -> CheckResult {
    let mut worst = 0.0f64;
    for &c in &[0.1, 0.4, 1.0] {
        for &konst in &[0.3, 1.0, 4.0] {
            let r = theory::optimal_l(KernelKind::Rwm, c, konst).unwrap();
            worst = worst.max((r.accept - 0.2338).abs());
            let m = theory::optimal_l(KernelKind::Mala, c, konst).unwrap();
            worst = worst.max((m.accept - 0.5742).abs());
        }
    }
    check("optimal-acceptance-constants", worst < 5e-4, format!("max deviation {worst:.2e}"))
}

fn normal_cdf_reference() -> CheckResult {
    let cases = [
        ((-8.0f64), 6.2209605742717841235e-16),
        (0.0, 0.5),
        (1.5, 0.93319279873114193400),
    ];
    let mut worst = 0.0f64;
    for (z, want) in cases {
        worst = worst.max((theory::phi(z) - want).abs() / want);
    }
    let lp = theory::ln_phi(-40.0);
    let lp_want = -804.60844201375378817;
    worst = worst.max((lp - lp_want).abs() / lp_want.abs());
    check("normal-cdf-reference", worst < 1e-12, format!("max rel err {worst:.3e}"))
}

/// Closed-form E[min(1, e^A)] for Gaussian A against a large Monte Carlo.
fn expected_accept_monte_carlo() -> CheckResult {
    let (mu, s) = (-2.0, 1.5);
    let exact = theory::expected_accept_gaussian(mu, s);
    let mut rng = chain_rng(0xacce, 0);
    let n = 1_000_000usize;
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..n {
        let a: f64 = mu + s * rng.sample::<f64, _>(StandardNormal);
        let v = a.exp().min(1.0);
        sum += v;
        sumsq += v * v;
    }
    let mc = sum / n as f64;
    let se = ((sumsq / n as f64 - mc * mc) / n as f64).sqrt();
    let z = (mc - exact) / se;
    check("expected-accept-monte-carlo", z.abs() < 3.0, format!("z = {z:.2}"))
}

/// Coordinate subsets of size k are uniform over all C(d, k) combinations.
fn subset_uniformity() -> CheckResult {
    let (d, c) = (10usize, 0.3);
    let mut rng = chain_rng(0x5b5e, 0);
    let mut counts: HashMap<[usize; 3], u64> = HashMap::new();
    let n = 1_000_000u64;
    for _ in 0..n {
        let mask = kernels::select_subset(&mut rng, d, c);
        let idx = &mask.indices;
        *counts.entry([idx[0], idx[1], idx[2]]).or_insert(0) += 1;
    }
    let bins = 120.0; // C(10, 3)
    let expected = n as f64 / bins;
    let mut chi2 = (bins - counts.len() as f64) * expected;
    for &count in counts.values() {
        chi2 += (count as f64 - expected).powi(2) / expected;
    }
    // chi-square(119) quantile at 1 - 1e-6
    let limit = 172.41768160217916;
    check("subset-uniformity", chi2 < limit, format!("chi2 = {chi2:.1} (limit {limit:.1})"))
}

fn fd_gradient(target: &Target, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (target.log_density(&plus) - target.log_density(&minus)) / (2.0 * h)
        })
        .collect()
}

fn gradient_finite_difference() -> CheckResult {
    let targets = [
        Target::normal_iid(6).unwrap(),
        Target::laplace_iid(6).unwrap(),
        Target::exchangeable_normal(6, 0.5).unwrap(),
        Target::student_t(6, 0.3, 8.0).unwrap(),
    ];
    let mut rng = chain_rng(0xfd, 0);
    let mut worst = 0.0f64;
    for target in &targets {
        for _ in 0..10 {
            let x: Vec<f64> = (0..6)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    // keep clear of the Laplace kink
                    z.signum() * (0.2 + z.abs())
                })
                .collect();
            let grad = target.grad_log_density(&x);
            let fd = fd_gradient(target, &x);
            for (g, f) in grad.iter().zip(&fd) {
                worst = worst.max((g - f).abs() / (1.0 + g.abs()));
            }
        }
    }
    check("gradient-finite-difference", worst < 1e-6, format!("max rel err {worst:.3e}"))
}

/// The O(d) quadratic-form evaluation agrees with the dense inverse of the
/// equicorrelation matrix.
fn precision_form() -> CheckResult {
    let mut worst = 0.0f64;
    let mut rng = chain_rng(0x9c, 0);
    for &rho in &[0.3, 0.7] {
        let d = 4usize;
        let target = Target::exchangeable_normal(d, rho).unwrap();
        let mut sigma: Vec<Vec<f64>> =
            (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect()).collect();
        let inv = invert(&mut sigma);
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut dense = 0.0;
            for i in 0..d {
                for j in 0..d {
                    dense += x[i] * inv[i][j] * x[j];
                }
            }
            let fast = -2.0 * target.log_density(&x);
            worst = worst.max((fast - dense).abs());
        }
    }
    check("precision-form", worst < 1e-10, format!("max abs err {worst:.3e}"))
}

/// Gauss–Jordan inverse for the tiny matrices used in checks.
fn invert(m: &mut [Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut inv: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for j in 0..n {
                    m[row][j] -= f * m[col][j];
                    inv[row][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// Exact samplers reproduce coordinate variance and pairwise covariance.
fn sampler_moments() -> CheckResult {
    let mut worst = 0.0f64;
    let mut rng = chain_rng(0x3a3, 0);
    {
        let target = Target::exchangeable_normal(10, 0.5).unwrap();
        let n = 20_000;
        let (mut var, mut cov) = (0.0, 0.0);
        for _ in 0..n {
            let x = target.exact_sample(&mut rng);
            var += x.iter().map(|v| v * v).sum::<f64>() / 10.0;
            cov += x[0] * x[1];
        }
        worst = worst.max((var / n as f64 - 1.0).abs());
        worst = worst.max((cov / n as f64 - 0.5).abs() / 2.0);
    }
    {
        let target = Target::student_t(3, 0.0, 8.0).unwrap();
        let n = 20_000;
        let mut var = 0.0;
        for _ in 0..n {
            let x = target.exact_sample(&mut rng);
            var += x.iter().map(|v| v * v).sum::<f64>() / 3.0;
        }
        worst = worst.max((var / n as f64 - target.marginal_var()).abs() / 2.0);
    }
    check("sampler-moments", worst < 0.06, format!("max deviation {worst:.3} (limit 0.06)"))
}

/// Vanishing step size accepts everything; an absurdly large step accepts
/// nothing.
fn kernel_acceptance_limits() -> CheckResult {
    let target = Target::normal_iid(20).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for kind in [KernelKind::Rwm, KernelKind::Mala] {
        let mut rng = chain_rng(0x11, 0);
        let mut state = ChainState::stationary_draw(&target, &mut rng);
        let config = KernelConfig::new(kind, 1.0, 1e-12, 0).unwrap();
        for _ in 0..2000 {
            step(&mut state, &config, &target, &mut rng);
        }
        pass &= state.accept_rate() > 0.99;
        detail.push(format!("{} tiny {:.3}", kind.as_str(), state.accept_rate()));

        let mut rng = chain_rng(0x12, 0);
        let mut state = ChainState::stationary_draw(&target, &mut rng);
        let config = KernelConfig::new(kind, 1.0, 1e6, 0).unwrap();
        for _ in 0..10_000 {
            step(&mut state, &config, &target, &mut rng);
        }
        pass &= state.accept_rate() < 0.02;
        detail.push(format!("huge {:.4}", state.accept_rate()));
    }
    check("kernel-acceptance-limits", pass, detail.join(", "))
}

/// The drift proposal's correction term is antisymmetric under swapping
/// current and proposed states.
fn drift_reversibility() -> CheckResult {
    let target = Target::exchangeable_normal(8, 0.4).unwrap();
    let mut rng = chain_rng(0x77, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = target.exact_sample(&mut rng);
        let y = target.exact_sample(&mut rng);
        let mask = SubsetMask { indices: vec![0, 2, 5] };
        let fwd = kernels::mala_log_q_diff(&target, 0.4, &x, &y, &mask);
        let rev = kernels::mala_log_q_diff(&target, 0.4, &y, &x, &mask);
        worst = worst.max((fwd + rev).abs());
    }
    check("drift-reversibility", worst < 1e-12, format!("max |q(x,y)+q(y,x)| = {worst:.3e}"))
}

/// At zero correlation the exchangeable target runs the identical trajectory
/// to the independent normal, bit for bit.
fn uncorrelated_reduction() -> CheckResult {
    let iid = Target::normal_iid(7).unwrap();
    let exch = Target::exchangeable_normal(7, 0.0).unwrap();
    let mut pass = true;
    for kind in [KernelKind::Rwm, KernelKind::Mala] {
        let config = KernelConfig::new(kind, 0.5, 0.3, 0).unwrap();
        let mut rng_a = chain_rng(0x88, 3);
        let mut rng_b = chain_rng(0x88, 3);
        let mut sa = ChainState::stationary_draw(&iid, &mut rng_a);
        let mut sb = ChainState::stationary_draw(&exch, &mut rng_b);
        for _ in 0..5000 {
            step(&mut sa, &config, &iid, &mut rng_a);
            step(&mut sb, &config, &exch, &mut rng_b);
        }
        pass &= sa.x == sb.x && sa.n_accepts == sb.n_accepts;
    }
    check("uncorrelated-reduction", pass, "trajectories compared bitwise".into())
}

fn stationarity_spot_check() -> CheckResult {
    let target = Target::normal_iid(10).unwrap();
    let sigma2 = audit::heuristic_sigma2(&target, KernelKind::Rwm, 0.3);
    let report =
        audit::stationarity_audit(&target, KernelKind::Rwm, 0.3, sigma2, 100, 2000, 0x5a).unwrap();
    let zs: Vec<String> = report.checks.iter().map(|c| format!("{} z={:.2}", c.name, c.z)).collect();
    check("stationarity-spot-check", report.pass, zs.join(", "))
}

fn sweep_determinism() -> CheckResult {
    let spec = SweepSpec {
        target: Target::exchangeable_normal(5, 0.5).unwrap(),
        kind: KernelKind::Rwm,
        c: 0.5,
        n_steps: 2000,
        grid: vec![0.1, 0.3, 0.9, 2.7],
        replicates: 2,
        seed: 0xd5,
    };
    let a = run_sweep(&spec).unwrap();
    let b = run_sweep(&spec).unwrap();
    let pass = a.records == b.records;
    check("sweep-determinism", pass, format!("{} grid points compared bitwise", a.records.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for result in run_selftest() {
            assert!(result.pass, "{}: {}", result.name, result.detail);
        }
    }

    #[test]
    fn check_order_is_stable() {
        let names: Vec<_> = run_selftest().iter().map(|c| c.name).collect();
        assert_eq!(names[0], "scaling-identities");
        assert_eq!(names.len(), 13);
    }
}
