use std::path::PathBuf;

use crate::controller::{ControllerParams, VehicleState};
use crate::estimator::GaussianBelief;
use crate::monitor::{ChartSpec, TriggerRule};
use crate::trajectory::AccelProfile;
use crate::Scalar;

use super::SimError;

/// Which followers change setting when one vehicle's trigger fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetuneScope {
    #[default]
    Vehicle,
    Platoon,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeadSource<S> {
    /// Square-wave oscillation between `v_low` and `v_high`.
    Synth {
        v_low: S,
        v_high: S,
        a_mag: S,
        n_cycles: usize,
    },
    /// `t,a` CSV, resampled onto the simulation step.
    Csv { path: PathBuf },
    /// Profile supplied in memory; must already use the simulation step.
    Profile(AccelProfile<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadSpec<S> {
    pub source: LeadSource<S>,
    pub v0: S,
    pub x0: S,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialCondition<S> {
    /// Every follower at the desired spacing for the lead's initial speed.
    #[default]
    Equilibrium,
    /// Follower states front to back; the lead starts from `LeadSpec`.
    Explicit(Vec<VehicleState<S>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<S> {
    pub dt: S,
    pub duration: S,
    pub n_followers: usize,
    /// Shared by every follower; each follower tracks its own active `tau_star`.
    pub controller: ControllerParams<S>,
    /// Coefficient prior. Its τ mean is re-anchored to the new setting on retune.
    pub prior: GaussianBelief<S>,
    /// Spacing noise variance σ², used both to corrupt and to weigh measurements.
    pub noise_var: S,
    /// When false, measured spacing equals true spacing.
    pub noise_enabled: bool,
    /// `mu_desired` tracks `controller.tau_star`.
    pub chart: ChartSpec<S>,
    pub trigger: TriggerRule<S>,
    pub trigger_enabled: bool,
    pub retune_target: S,
    /// Setting changes allowed per follower.
    pub max_retunes: usize,
    pub retune_scope: RetuneScope,
    /// Estimation window W (samples).
    pub window_len: usize,
    pub rng_seed: u64,
    pub lead: LeadSpec<S>,
    pub initial_condition: InitialCondition<S>,
}

impl<S: Scalar> Default for SimConfig<S> {
    fn default() -> Self {
        let controller = ControllerParams::default();
        let v_low = S::lit(8.94);
        Self {
            dt: S::lit(0.1),
            duration: S::lit(250.0),
            n_followers: 5,
            prior: GaussianBelief::default_prior(controller.s0, controller.tau_star),
            noise_var: S::lit(0.01),
            noise_enabled: true,
            chart: ChartSpec {
                mu_desired: controller.tau_star,
                sigma_desired: S::lit(0.125),
                l: S::two(),
            },
            trigger: TriggerRule::default(),
            trigger_enabled: true,
            retune_target: S::one(),
            max_retunes: 1,
            retune_scope: RetuneScope::Vehicle,
            window_len: 50,
            rng_seed: 1,
            lead: LeadSpec {
                source: LeadSource::Synth {
                    v_low,
                    v_high: S::lit(35.76),
                    a_mag: S::lit(2.75),
                    n_cycles: 13,
                },
                v0: v_low,
                x0: S::zero(),
            },
            initial_condition: InitialCondition::Equilibrium,
            controller,
        }
    }
}

impl<S: Scalar> SimConfig<S> {
    /// Number of simulated steps, `round(duration / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Constant-speed lead with noise off and no setting changes.
    pub fn constant_speed(v0: S) -> Self {
        let mut cfg = Self::default();
        cfg.lead.source = LeadSource::Profile(AccelProfile::zeros(cfg.dt, 1).expect("positive dt"));
        cfg.lead.v0 = v0;
        cfg.noise_enabled = false;
        cfg
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return bad(format!("sim.dt must be > 0, got {}", self.dt));
        }
        if !(self.duration >= self.dt) || !self.duration.is_finite() {
            return bad(format!("sim.duration must be >= dt, got {}", self.duration));
        }
        if self.n_followers < 1 {
            return bad("sim.n_followers must be >= 1".into());
        }
        if self.window_len < 1 {
            return bad("sim.window_len must be >= 1".into());
        }
        if !(self.noise_var > S::zero()) || !self.noise_var.is_finite() {
            return bad(format!("noise.var must be > 0, got {}", self.noise_var));
        }
        self.controller
            .validate_stable()
            .map_err(|e| SimError::InvalidConfig(e.0))?;
        self.prior
            .validate()
            .map_err(|e| SimError::InvalidConfig(format!("prior: {e}")))?;
        self.chart.validate().map_err(SimError::InvalidConfig)?;
        if self.chart.mu_desired != self.controller.tau_star {
            return bad(format!(
                "chart centre {} must equal controller.tau_star {}",
                self.chart.mu_desired, self.controller.tau_star
            ));
        }
        self.trigger.validate().map_err(SimError::InvalidConfig)?;
        if !(self.retune_target > S::zero()) {
            return bad(format!(
                "trigger.retune_target must be > 0, got {}",
                self.retune_target
            ));
        }
        if !(self.lead.v0 >= S::zero()) || !self.lead.v0.is_finite() || !self.lead.x0.is_finite() {
            return bad(format!(
                "lead.v0 must be finite and >= 0, got {}",
                self.lead.v0
            ));
        }
        if let LeadSource::Profile(p) = &self.lead.source {
            if (p.dt() - self.dt).abs() > S::lit(1e-12) * self.dt {
                return bad(format!(
                    "lead profile step {} differs from sim.dt {}",
                    p.dt(),
                    self.dt
                ));
            }
        }
        if let InitialCondition::Explicit(states) = &self.initial_condition {
            if states.len() != self.n_followers {
                return bad(format!(
                    "init.states has {} entries, expected {}",
                    states.len(),
                    self.n_followers
                ));
            }
            if states
                .iter()
                .any(|s| !(s.v >= S::zero()) || !s.x.is_finite() || !s.a.is_finite())
            {
                return bad("init.states must be finite with v >= 0".into());
            }
        }
        Ok(())
    }
}
