//! Independent check of the closed-form posterior by brute-force quadrature.
//!
//! The unnormalised log posterior is evaluated directly (likelihood plus
//! prior, no normal equations), its mode found by Newton steps on a
//! finite-difference gradient and Hessian, and the first two moments
//! integrated on a trapezoid grid laid out in the whitened coordinates of
//! that Hessian. Nothing here shares code with [`crate::estimator`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::estimator::{posterior_update, GaussianBelief, MeasurementBatch};

/// Grid half-width in posterior standard deviations.
const HALF_WIDTH: f64 = 9.0;
const SPACING: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub prior_mean: [f64; 2],
    pub prior_cov: [[f64; 2]; 2],
    pub noise_var: f64,
    pub spacings: Vec<f64>,
    pub speeds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

fn inverse(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

impl OracleCase {
    fn log_post(&self, prec: &[[f64; 2]; 2], g: [f64; 2]) -> f64 {
        let mut lp = 0.0;
        for (s, v) in self.spacings.iter().zip(&self.speeds) {
            let r = s - g[0] - g[1] * v;
            lp -= r * r / (2.0 * self.noise_var);
        }
        let d = [g[0] - self.prior_mean[0], g[1] - self.prior_mean[1]];
        lp - 0.5
            * (d[0] * (prec[0][0] * d[0] + prec[0][1] * d[1])
                + d[1] * (prec[1][0] * d[0] + prec[1][1] * d[1]))
    }

    /// Posterior moments by quadrature.
    pub fn moments(&self) -> Moments {
        let prec = inverse(self.prior_cov);
        let lp = |g: [f64; 2]| self.log_post(&prec, g);
        let h = [
            self.prior_cov[0][0].sqrt() * 1e-2,
            self.prior_cov[1][1].sqrt() * 1e-2,
        ];

        let mut mode = self.prior_mean;
        let mut hess = [[0.0; 2]; 2];
        for _ in 0..4 {
            let at = |i: usize, di: f64, j: usize, dj: f64| {
                let mut g = mode;
                g[i] += di;
                g[j] += dj;
                lp(g)
            };
            let f0 = lp(mode);
            let mut grad = [0.0; 2];
            for i in 0..2 {
                grad[i] = (at(i, h[i], i, 0.0) - at(i, -h[i], i, 0.0)) / (2.0 * h[i]);
                hess[i][i] =
                    (at(i, h[i], i, 0.0) - 2.0 * f0 + at(i, -h[i], i, 0.0)) / (h[i] * h[i]);
            }
            let cross = (at(0, h[0], 1, h[1]) - at(0, h[0], 1, -h[1]) - at(0, -h[0], 1, h[1])
                + at(0, -h[0], 1, -h[1]))
                / (4.0 * h[0] * h[1]);
            hess[0][1] = cross;
            hess[1][0] = cross;
            let step = inverse(hess);
            mode[0] -= step[0][0] * grad[0] + step[0][1] * grad[1];
            mode[1] -= step[1][0] * grad[0] + step[1][1] * grad[1];
        }

        // Cholesky factor of the approximate covariance, −H⁻¹.
        let c = inverse(hess);
        let c = [[-c[0][0], -c[0][1]], [-c[1][0], -c[1][1]]];
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).sqrt();

        let lp_mode = lp(mode);
        let n = (HALF_WIDTH / SPACING).round() as i32;
        let (mut w_sum, mut m1, mut m2) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
        for i in -n..=n {
            let z0 = i as f64 * SPACING;
            for j in -n..=n {
                let z1 = j as f64 * SPACING;
                // Offsets from the mode keep the second moment well conditioned.
                let d = [l00 * z0, l10 * z0 + l11 * z1];
                let w = (lp([mode[0] + d[0], mode[1] + d[1]]) - lp_mode).exp();
                w_sum += w;
                for a in 0..2 {
                    m1[a] += w * d[a];
                    for b in 0..2 {
                        m2[a][b] += w * d[a] * d[b];
                    }
                }
            }
        }
        let off = [m1[0] / w_sum, m1[1] / w_sum];
        let mut cov = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] = m2[a][b] / w_sum - off[a] * off[b];
            }
        }
        Moments {
            mean: [mode[0] + off[0], mode[1] + off[1]],
            cov,
        }
    }
}

/// Draws a random but well-posed case.
pub fn random_case<R: Rng>(rng: &mut R) -> OracleCase {
    let prior_mean = [rng.random_range(1.0..6.0), rng.random_range(0.8..2.0)];
    let sd = [rng.random_range(0.01..1.0), rng.random_range(0.05..0.5)];
    let rho: f64 = rng.random_range(-0.9..0.9);
    let prior_cov = [
        [sd[0] * sd[0], rho * sd[0] * sd[1]],
        [rho * sd[0] * sd[1], sd[1] * sd[1]],
    ];
    let noise_var = rng.random_range(0.005..1.0);
    let n = rng.random_range(0..=5);
    let noise = Normal::new(0.0, f64::sqrt(noise_var)).expect("positive sd");
    let (s0, tau) = (rng.random_range(1.0..6.0), rng.random_range(0.8..2.0));
    let speeds: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..35.0)).collect();
    let spacings = speeds
        .iter()
        .map(|v| s0 + tau * v + noise.sample(rng))
        .collect();
    OracleCase {
        prior_mean,
        prior_cov,
        noise_var,
        spacings,
        speeds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub cases: usize,
    /// Largest `|Δμ_i| / max(|μ_i|, sd_i)`.
    pub max_mean_rel_err: f64,
    /// Largest `|ΔΣ_ij| / sqrt(Σ_ii Σ_jj)`.
    pub max_cov_rel_err: f64,
}

/// Compares the closed-form update against quadrature on `n` random cases.
pub fn run_oracle_suite(n: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        cases: n,
        max_mean_rel_err: 0.0,
        max_cov_rel_err: 0.0,
    };
    for _ in 0..n {
        let case = random_case(&mut rng);
        let want = case.moments();
        let prior = GaussianBelief {
            mean: case.prior_mean,
            cov: case.prior_cov,
        };
        let batch =
            MeasurementBatch::new(case.spacings.clone(), case.speeds.clone(), case.noise_var)
                .expect("generated batch is valid");
        let got = posterior_update(&prior, &batch).expect("generated prior is SPD");
        for i in 0..2 {
            let scale = want.mean[i].abs().max(want.cov[i][i].sqrt());
            report.max_mean_rel_err = report
                .max_mean_rel_err
                .max((got.mean[i] - want.mean[i]).abs() / scale);
            for j in 0..2 {
                let scale = (want.cov[i][i] * want.cov[j][j]).sqrt();
                report.max_cov_rel_err = report
                    .max_cov_rel_err
                    .max((got.cov[i][j] - want.cov[i][j]).abs() / scale);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_only_recovers_prior() {
        let case = OracleCase {
            prior_mean: [5.0, 1.6],
            prior_cov: [[1e-4, -1e-5], [-1e-5, 0.125]],
            noise_var: 0.01,
            spacings: vec![],
            speeds: vec![],
        };
        let m = case.moments();
        assert!((m.mean[0] - 5.0).abs() < 1e-9 && (m.mean[1] - 1.6).abs() < 1e-9);
        assert!((m.cov[1][1] - 0.125).abs() < 1e-9);
        assert!((m.cov[0][1] + 1e-5).abs() < 1e-10);
    }

    #[test]
    fn small_suite_agrees() {
        let r = run_oracle_suite(20, 3);
        assert!(r.max_mean_rel_err < 1e-6, "{r:?}");
        assert!(r.max_cov_rel_err < 1e-6, "{r:?}");
    }
}
