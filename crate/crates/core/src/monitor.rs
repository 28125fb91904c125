//! Shewhart chart over the estimated time gap.
//!
//! Limits are `μ ± L·σ` around the desired setting. Consecutive
//! out-of-control samples form one excursion; a setting change is recommended
//! once `k` excursions start within a trailing time window.

use serde::Serialize;

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartSpec<S> {
    pub mu_desired: S,
    pub sigma_desired: S,
    /// Limit multiplier `L`.
    pub l: S,
}

impl<S: Scalar> ChartSpec<S> {
    pub fn new(mu_desired: S, sigma_desired: S, l: S) -> Result<Self, String> {
        let spec = Self {
            mu_desired,
            sigma_desired,
            l,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.mu_desired.is_finite() {
            return Err("chart centre must be finite".into());
        }
        if !(self.sigma_desired > S::zero()) || !self.sigma_desired.is_finite() {
            return Err(format!(
                "sigma_desired must be > 0, got {}",
                self.sigma_desired
            ));
        }
        if !(self.l > S::zero()) || !self.l.is_finite() {
            return Err(format!("L must be > 0, got {}", self.l));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartLimits<S> {
    pub lcl: S,
    pub cl: S,
    pub ucl: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationEvent<S> {
    pub t: S,
    pub vehicle_id: usize,
    pub value: S,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerRule<S> {
    pub k_violations: usize,
    /// Trailing window length (s).
    pub window: S,
}

impl<S: Scalar> Default for TriggerRule<S> {
    fn default() -> Self {
        Self {
            k_violations: 3,
            window: S::lit(35.0),
        }
    }
}

impl<S: Scalar> TriggerRule<S> {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_violations < 1 {
            return Err("trigger.k_violations must be >= 1".into());
        }
        if !(self.window > S::zero()) {
            return Err(format!("trigger.window must be > 0, got {}", self.window));
        }
        Ok(())
    }
}

pub fn compute_limits<S: Scalar>(spec: &ChartSpec<S>) -> ChartLimits<S> {
    let half_width = spec.l * spec.sigma_desired;
    ChartLimits {
        lcl: spec.mu_desired - half_width,
        cl: spec.mu_desired,
        ucl: spec.mu_desired + half_width,
    }
}

/// Out-of-control test on the closed in-control band `[lcl, ucl]`.
pub fn check_point<S: Scalar>(
    value: S,
    limits: &ChartLimits<S>,
    t: S,
    vehicle_id: usize,
) -> Option<ViolationEvent<S>> {
    let side = if value > limits.ucl {
        Side::Above
    } else if value < limits.lcl {
        Side::Below
    } else {
        return None;
    };
    Some(ViolationEvent {
        t,
        vehicle_id,
        value,
        side,
    })
}

/// True iff at least `k_violations` events fall in `(now − window, now]`.
pub fn should_trigger<S: Scalar>(
    history: &[ViolationEvent<S>],
    rule: &TriggerRule<S>,
    now: S,
) -> bool {
    let start = now - rule.window;
    let recent = history
        .iter()
        .rev()
        .take_while(|e| e.t > start)
        .filter(|e| e.t <= now)
        .count();
    recent >= rule.k_violations
}

pub fn retune<S: Scalar>(current: &ChartSpec<S>, new_tau: S) -> ChartSpec<S> {
    ChartSpec {
        mu_desired: new_tau,
        ..*current
    }
}

/// Result of charting one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartObservation<S> {
    /// Set whenever the sample is out of control.
    pub violation: Option<ViolationEvent<S>>,
    /// True only on the first sample of an excursion.
    pub new_excursion: bool,
}

/// Per-vehicle chart: current spec, excursion flag and counted excursions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartState<S> {
    spec: ChartSpec<S>,
    limits: ChartLimits<S>,
    in_excursion: bool,
    history: Vec<ViolationEvent<S>>,
}

impl<S: Scalar> ChartState<S> {
    pub fn new(spec: ChartSpec<S>) -> Self {
        Self {
            limits: compute_limits(&spec),
            spec,
            in_excursion: false,
            history: Vec::new(),
        }
    }

    pub fn spec(&self) -> &ChartSpec<S> {
        &self.spec
    }

    pub fn limits(&self) -> &ChartLimits<S> {
        &self.limits
    }

    /// Excursion-entry events since the last retune.
    pub fn history(&self) -> &[ViolationEvent<S>] {
        &self.history
    }

    pub fn observe(&mut self, value: S, t: S, vehicle_id: usize) -> ChartObservation<S> {
        let violation = check_point(value, &self.limits, t, vehicle_id);
        let new_excursion = violation.is_some() && !self.in_excursion;
        if let Some(ev) = violation.filter(|_| new_excursion) {
            self.history.push(ev);
        }
        self.in_excursion = violation.is_some();
        ChartObservation {
            violation,
            new_excursion,
        }
    }

    /// Marks a gap in charting (e.g. warm-up) so the next out-of-control
    /// sample opens a new excursion.
    pub fn interrupt(&mut self) {
        self.in_excursion = false;
    }

    pub fn should_trigger(&self, rule: &TriggerRule<S>, now: S) -> bool {
        should_trigger(&self.history, rule, now)
    }

    /// Re-centres the chart on `new_tau` and forgets excursions counted
    /// against the old limits.
    pub fn retune(&mut self, new_tau: S) {
        self.spec = retune(&self.spec, new_tau);
        self.limits = compute_limits(&self.spec);
        self.in_excursion = false;
        self.history.clear();
    }
}
