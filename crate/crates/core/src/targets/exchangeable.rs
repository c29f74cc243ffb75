//! Exchangeable normal internals: the precision-form quadratic, and the O(d)
//! iterative conditional sampler.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::ChainRng;

/// Cross-term coefficient of the precision form:
/// θ_d = −ρ / ((1−ρ)(1+(d−1)ρ)). The factored denominator avoids the
/// cancellation its expanded form 1 + (d−2)ρ − (d−1)ρ² suffers at large ρ.
pub(super) fn theta(d: usize, rho: f64) -> f64 {
    let dm = d as f64;
    -rho / ((1.0 - rho) * (1.0 + (dm - 1.0) * rho))
}

/// xᵀΣ_ρ⁻¹x expressed through the running sums: (1/(1−ρ))·Σxᵢ² + θ_d·(Σxᵢ)².
pub(super) fn quad_form(rho: f64, theta: f64, s1: f64, s2: f64) -> f64 {
    s2 / (1.0 - rho) + theta * s1 * s1
}

/// Diagonal of the precision matrix, (Σ_ρ⁻¹)ᵢᵢ = 1/(1−ρ) + θ_d. Equals
/// E[(∂ᵢ log π)²] at dimension d and climbs to 1/(1−ρ) as d grows.
pub(super) fn precision_diag(d: usize, rho: f64) -> f64 {
    1.0 / (1.0 - rho) + theta(d, rho)
}

/// Draw N(0, Σ_ρ) coordinate by coordinate: given the m previous coordinates
/// with sum s, the next one is N(ρs/(1+(m−1)ρ), (1−ρ)(1+mρ)/(1+(m−1)ρ)).
/// Consumes exactly one standard-normal variate per coordinate, in order; at
/// ρ = 0 the draw is bit-identical to d independent N(0, 1) variates.
pub(super) fn sample_into(rng: &mut ChainRng, rho: f64, out: &mut [f64]) {
    let mut s = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        let m = j as f64;
        let denom = 1.0 + (m - 1.0) * rho;
        let mean = rho * s / denom;
        let sd = ((denom - m * rho * rho) / denom).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        let x = mean + sd * z;
        *o = x;
        s += x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::Target;
    use rand::Rng;

    #[test]
    fn theta_point_values() {
        assert!((theta(2, 0.5) + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(theta(5, 0.0), -0.0);
        // agrees with the expanded denominator 1 + (d−2)ρ − (d−1)ρ² up to
        // that form's own cancellation error
        for d in 2..40 {
            for &rho in &[0.1, 0.5, 0.9, 0.99] {
                let dm = d as f64;
                let alt = -rho / (1.0 + (dm - 2.0) * rho - (dm - 1.0) * rho * rho);
                assert!((theta(d, rho) - alt).abs() < 1e-12 * alt.abs());
            }
        }
    }

    // Dense Gauss-Jordan inverse, test-only oracle.
    fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
            m.swap(col, piv);
            let p = m[col][col];
            for v in &mut m[col] {
                *v /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = m[row][col];
                    for k in 0..2 * n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    fn corr_matrix(d: usize, rho: f64) -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect()
    }

    #[test]
    fn quad_form_matches_matrix_inverse() {
        let mut rng = chain_rng(31, 0);
        for &d in &[2usize, 3, 5] {
            for &rho in &[0.0, 0.3, 0.5, 0.9] {
                let prec = invert(&corr_matrix(d, rho));
                let th = theta(d, rho);
                for _ in 0..50 {
                    let x: Vec<f64> = (0..d).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect();
                    let s1: f64 = x.iter().sum();
                    let s2: f64 = x.iter().map(|v| v * v).sum();
                    let fast = quad_form(rho, th, s1, s2);
                    let mut dense = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            dense += x[i] * prec[i][j] * x[j];
                        }
                    }
                    assert!(
                        (fast - dense).abs() < 1e-10 * dense.abs().max(1.0),
                        "d={d} rho={rho}: {fast} vs {dense}"
                    );
                }
            }
        }
    }

    // Lower Cholesky factor, test-only oracle.
    fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    l[i][j] = (a[i][i] - s).sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        l
    }

    // The iterative sampler is a lower-triangular map of its normal variates
    // with positive diagonal, so by uniqueness it must be the Cholesky map.
    #[test]
    fn sampler_is_the_cholesky_map()  {
        for &d in &[5usize, 20, 50] {
            for &rho in &[0.2, 0.5, 0.9] {
                let l = cholesky(&corr_matrix(d, rho));
                let mut z_rng = chain_rng(32, 7);
                let z: Vec<f64> = (0..d).map(|_| z_rng.sample(StandardNormal)).collect();
                let mut s_rng = chain_rng(32, 7);
                let mut x = vec![0.0; d];
                sample_into(&mut s_rng, rho, &mut x);
                for i in 0..d {
                    let want: f64 = (0..=i).map(|k| l[i][k] * z[k]).sum();
                    assert!(
                        (x[i] - want).abs() < 1e-10,
                        "d={d} rho={rho} coord {i}: {} vs {want}",
                        x[i]
                    );
                }
            }
        }
    }

    #[test]
    fn sampler_moments_match_the_law() {
        let target = Target::exchangeable_normal(10, 0.5).unwrap();
        let mut rng = chain_rng(33, 0);
        let n = 100_000usize;
        let (mut s1, mut sq1, mut s2, mut s12) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = target.exact_sample(&mut rng);
            s1 += x[0];
            sq1 += x[0] * x[0];
            s2 += x[1];
            s12 += x[0] * x[1];
        }
        let nf = n as f64;
        let var = sq1 / nf - (s1 / nf).powi(2);
        let cov = s12 / nf - (s1 / nf) * (s2 / nf);
        // SE(var) ~ 1·sqrt(2/n), SE(cov) ~ sqrt((1+rho^2)/n)
        assert!((var - 1.0).abs() < 3.0 * (2.0 / nf).sqrt(), "var {var}");
        assert!((cov - 0.5).abs() < 3.0 * (1.25f64 / nf).sqrt(), "cov {cov}");
    }

    #[test]
    fn coordinate_mean_variance_is_rho_plus_rest() {
        let (d, rho) = (50usize, 0.9);
        let target = Target::exchangeable_normal(d, rho).unwrap();
        let mut rng = chain_rng(34, 0);
        let n = 100_000usize;
        let (mut s, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = target.exact_sample(&mut rng);
            let m = x.iter().sum::<f64>() / d as f64;
            s += m;
            sq += m * m;
        }
        let nf = n as f64;
        let var = sq / nf - (s / nf).powi(2);
        let want = rho + (1.0 - rho) / d as f64;
        let se = want * (2.0 / nf).sqrt();
        assert!((var - want).abs() < 3.0 * se, "var {var} want {want}");
    }
}
