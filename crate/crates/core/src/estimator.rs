//! Conjugate Bayesian update of the random spacing coefficients.
//!
//! Spacing is modelled as `S = s₀ + τ·V + ε` with `ε ~ N(0, σ²)` and a
//! bivariate normal belief over `Γ = [s₀, τ]`. Given `n` measurements with
//! design rows `[1, V_j]`, the posterior is again normal with
//!
//! ```text
//! Σ* = (Σ⁻¹ + ZᵀZ / σ²)⁻¹
//! μ* = Σ* (ZᵀS / σ² + Σ⁻¹ μ)
//! ```

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{inv2, is_spd2, mat2_add, mat2_vec, symmetrize, Mat2, Vec2};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("prior covariance is singular to working precision")]
    SingularPrior,
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("invalid measurement batch: {0}")]
    InvalidBatch(String),
    #[error("batches do not share a noise variance ({0} vs {1})")]
    NoiseMismatch(f64, f64),
}

/// Symmetry tolerance for belief covariances.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Normal belief over `[s₀, τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief<S> {
    pub mean: Vec2<S>,
    pub cov: Mat2<S>,
}

impl<S: Scalar> GaussianBelief<S> {
    pub fn new(mean: Vec2<S>, cov: Mat2<S>) -> Result<Self, EstimatorError> {
        let b = Self { mean, cov };
        b.validate()?;
        Ok(b)
    }

    /// Prior used by the monitoring experiment: `μ = [s0_mean, tau_mean]`,
    /// `Σ = [[1e-4, −1e-5], [−1e-5, 0.125]]`.
    pub fn default_prior(s0_mean: S, tau_mean: S) -> Self {
        Self {
            mean: [s0_mean, tau_mean],
            cov: [
                [S::lit(1e-4), S::lit(-1e-5)],
                [S::lit(-1e-5), S::lit(0.125)],
            ],
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !self.mean.iter().all(|m| m.is_finite()) {
            return Err(EstimatorError::InvalidBelief("mean must be finite".into()));
        }
        if !is_spd2(&self.cov, S::lit(SYMMETRY_TOL)) {
            return Err(EstimatorError::InvalidBelief(format!(
                "covariance must be symmetric positive definite, got {:?}",
                self.cov
            )));
        }
        Ok(())
    }

    pub fn tau_mean(&self) -> S {
        self.mean[1]
    }

    pub fn tau_var(&self) -> S {
        self.cov[1][1]
    }

    /// Log density of `N(mean, cov)` at `gamma`.
    pub fn log_density(&self, gamma: &Vec2<S>) -> Result<S, EstimatorError> {
        let prec = inv2(&self.cov).ok_or(EstimatorError::SingularPrior)?;
        let d = [gamma[0] - self.mean[0], gamma[1] - self.mean[1]];
        let q = mat2_vec(&prec, &d);
        let quad = d[0] * q[0] + d[1] * q[1];
        let det = crate::linalg::det2(&self.cov);
        Ok(-(S::two() * S::PI()).ln() - S::half() * det.ln() - S::half() * quad)
    }
}

/// Paired spacing/speed measurements with their noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch<S> {
    spacings: Vec<S>,
    speeds: Vec<S>,
    noise_var: S,
}

impl<S: Scalar> MeasurementBatch<S> {
    pub fn new(spacings: Vec<S>, speeds: Vec<S>, noise_var: S) -> Result<Self, EstimatorError> {
        if spacings.len() != speeds.len() {
            return Err(EstimatorError::InvalidBatch(format!(
                "{} spacings vs {} speeds",
                spacings.len(),
                speeds.len()
            )));
        }
        if !(noise_var > S::zero()) || !noise_var.is_finite() {
            return Err(EstimatorError::InvalidBatch(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if !spacings.iter().chain(speeds.iter()).all(|x| x.is_finite()) {
            return Err(EstimatorError::InvalidBatch(
                "measurements must be finite".into(),
            ));
        }
        Ok(Self {
            spacings,
            speeds,
            noise_var,
        })
    }

    pub fn empty(noise_var: S) -> Result<Self, EstimatorError> {
        Self::new(Vec::new(), Vec::new(), noise_var)
    }

    pub fn len(&self) -> usize {
        self.spacings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacings.is_empty()
    }

    pub fn noise_var(&self) -> S {
        self.noise_var
    }

    pub fn spacings(&self) -> &[S] {
        &self.spacings
    }

    pub fn speeds(&self) -> &[S] {
        &self.speeds
    }

    pub fn iter(&self) -> impl Iterator<Item = (S, S)> + '_ {
        self.spacings
            .iter()
            .copied()
            .zip(self.speeds.iter().copied())
    }

    /// Concatenation of batches sharing one noise variance.
    pub fn concat<'a>(
        batches: impl IntoIterator<Item = &'a Self>,
        noise_var: S,
    ) -> Result<Self, EstimatorError>
    where
        S: 'a,
    {
        let mut spacings = Vec::new();
        let mut speeds = Vec::new();
        for b in batches {
            check_noise(b.noise_var, noise_var)?;
            spacings.extend_from_slice(&b.spacings);
            speeds.extend_from_slice(&b.speeds);
        }
        Self::new(spacings, speeds, noise_var)
    }

    /// `(ZᵀZ, ZᵀS)` for design rows `[1, V_j]`.
    fn normal_equations(&self) -> (Mat2<S>, Vec2<S>) {
        let (mut n, mut sv, mut svv, mut ss, mut svs) =
            (S::zero(), S::zero(), S::zero(), S::zero(), S::zero());
        for (s, v) in self.iter() {
            n = n + S::one();
            sv = sv + v;
            svv = svv + v * v;
            ss = ss + s;
            svs = svs + v * s;
        }
        ([[n, sv], [sv, svv]], [ss, svs])
    }
}

fn check_noise<S: Scalar>(a: S, b: S) -> Result<(), EstimatorError> {
    if a != b {
        return Err(EstimatorError::NoiseMismatch(a.as_f64(), b.as_f64()));
    }
    Ok(())
}

/// Closed-form posterior. An empty batch returns the prior unchanged.
pub fn posterior_update<S: Scalar>(
    prior: &GaussianBelief<S>,
    batch: &MeasurementBatch<S>,
) -> Result<GaussianBelief<S>, EstimatorError> {
    let prior_prec = inv2(&prior.cov).ok_or(EstimatorError::SingularPrior)?;
    if batch.is_empty() {
        return Ok(*prior);
    }
    let (ztz, zts) = batch.normal_equations();
    let inv_var = S::one() / batch.noise_var;
    let data_prec = [
        [ztz[0][0] * inv_var, ztz[0][1] * inv_var],
        [ztz[1][0] * inv_var, ztz[1][1] * inv_var],
    ];
    let post_prec = symmetrize(&mat2_add(&prior_prec, &data_prec));
    let cov = symmetrize(&inv2(&post_prec).ok_or(EstimatorError::SingularPrior)?);
    let pm = mat2_vec(&prior_prec, &prior.mean);
    let rhs = [zts[0] * inv_var + pm[0], zts[1] * inv_var + pm[1]];
    Ok(GaussianBelief {
        mean: mat2_vec(&cov, &rhs),
        cov,
    })
}

/// Folds [`posterior_update`] over `batches`.
pub fn sequential_update<'a, S: Scalar>(
    prior: &GaussianBelief<S>,
    batches: impl IntoIterator<Item = &'a MeasurementBatch<S>>,
) -> Result<GaussianBelief<S>, EstimatorError> {
    let mut belief = *prior;
    let mut noise: Option<S> = None;
    for batch in batches {
        match noise {
            Some(n) => check_noise(batch.noise_var, n)?,
            None => noise = Some(batch.noise_var),
        }
        belief = posterior_update(&belief, batch)?;
    }
    Ok(belief)
}

/// Posterior from the trailing window against the fixed `prior`, never the
/// previous posterior.
pub fn windowed_estimate<S: Scalar>(
    prior: &GaussianBelief<S>,
    window: &MeasurementBatch<S>,
) -> Result<GaussianBelief<S>, EstimatorError> {
    posterior_update(prior, window)
}

/// `Σ_j [−½·ln(2πσ²) − (S_j − s₀ − τ·V_j)² / (2σ²)]`
pub fn log_likelihood<S: Scalar>(batch: &MeasurementBatch<S>, gamma: &Vec2<S>) -> S {
    let var = batch.noise_var;
    let norm = -S::half() * (S::two() * S::PI() * var).ln();
    batch.iter().fold(S::zero(), |acc, (s, v)| {
        let r = s - gamma[0] - gamma[1] * v;
        acc + norm - r * r / (S::two() * var)
    })
}

/// Trailing measurement window of at most `capacity` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow<S> {
    capacity: usize,
    samples: VecDeque<(S, S)>,
}

impl<S: Scalar> MeasurementWindow<S> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            samples: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, spacing: S, speed: S) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((spacing, speed));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn to_batch(&self, noise_var: S) -> Result<MeasurementBatch<S>, EstimatorError> {
        let (spacings, speeds) = self.samples.iter().copied().unzip();
        MeasurementBatch::new(spacings, speeds, noise_var)
    }
}
