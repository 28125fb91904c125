//! Platoon simulation with per-follower time-gap monitoring.
//!
//! Each step, for every follower front to back:
//!
//! 1. measure spacing to the predecessor (true spacing plus Gaussian noise) and speed;
//! 2. re-estimate the coefficient belief over the trailing window against the fixed prior;
//! 3. once the window has filled, chart the posterior mean of τ;
//! 4. compute the command from the step's state snapshot and advance the actuation dynamics.
//!
//! A trigger evaluated in step `k` changes the follower's setting from step
//! `k + 1` on, so every record is internally consistent with one setting.

mod config;
mod summary;

pub use config::{InitialCondition, LeadSource, LeadSpec, RetuneScope, SimConfig};
pub use summary::{summarize, RegimeSummary, Summary, SummaryError, VehicleSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::controller::{
    command_accel, delay_steps, derive_error_state, step_glvd, CollisionDetected, ControllerParams,
    DelayLine, VehicleState,
};
use crate::estimator::{windowed_estimate, EstimatorError, GaussianBelief, MeasurementWindow};
use crate::monitor::{ChartLimits, ChartState, Side};
use crate::trajectory::{
    integrate_lead, load_accel_profile, synth_oscillation_profile, LeadTrajectory, TrajectoryError,
};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("lead trajectory: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("vehicle {vehicle_id} at t={t}: {source}")]
    Collision {
        t: f64,
        vehicle_id: usize,
        #[source]
        source: CollisionDetected,
    },
}

/// One output row per (step, follower).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord<S> {
    pub t: S,
    pub vehicle_id: usize,
    pub x: S,
    pub v: S,
    pub a: S,
    pub u: S,
    pub spacing_true: S,
    pub spacing_measured: S,
    /// Posterior mean of τ.
    pub tau_hat: S,
    /// Posterior variance of τ.
    pub tau_var: S,
    pub lcl: S,
    pub ucl: S,
    /// Sample was charted and out of control.
    pub violation: bool,
    pub active_tau_star: S,
    /// False during window warm-up; not part of the CSV output.
    pub charted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ViolationAbove,
    ViolationBelow,
    Trigger,
}

/// Entry of the JSON-lines event log. Violations are logged once per
/// excursion; a trigger carries the new setting and its limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEvent<S> {
    pub t: S,
    pub vehicle_id: usize,
    pub kind: EventKind,
    pub value: S,
    pub limits: ChartLimits<S>,
}

#[derive(Debug, Clone)]
pub struct SimOutput<S> {
    pub records: Vec<SimRecord<S>>,
    pub events: Vec<SimEvent<S>>,
    pub summary: Summary,
    pub lead: LeadTrajectory<S>,
    /// Set when a collision cut the run short; `records` holds the partial run.
    pub aborted: Option<String>,
}

/// Builds the lead trajectory on the simulation grid, `n_steps + 1` samples.
/// Profiles shorter than the run are extended with zero acceleration.
pub fn build_lead<S: Scalar>(config: &SimConfig<S>) -> Result<LeadTrajectory<S>, SimError> {
    let profile = match &config.lead.source {
        LeadSource::Synth {
            v_low,
            v_high,
            a_mag,
            n_cycles,
        } => synth_oscillation_profile(*v_low, *v_high, *a_mag, *n_cycles, config.dt)?,
        LeadSource::Csv { path } => load_accel_profile(path, config.dt)?,
        LeadSource::Profile(p) => p.clone(),
    };
    let profile = profile.fit_to_len(config.n_steps() + 1);
    Ok(integrate_lead(&profile, config.lead.v0, config.lead.x0)?)
}

/// Initial states, lead first.
pub fn init_platoon<S: Scalar>(config: &SimConfig<S>) -> Result<Vec<VehicleState<S>>, SimError> {
    if config.n_followers == 0 {
        return Err(SimError::InvalidConfig(
            "sim.n_followers must be >= 1".into(),
        ));
    }
    let lead = VehicleState {
        x: config.lead.x0,
        v: config.lead.v0,
        a: S::zero(),
        u: S::zero(),
    };
    let mut out = Vec::with_capacity(config.n_followers + 1);
    out.push(lead);
    match &config.initial_condition {
        InitialCondition::Equilibrium => {
            let gap = crate::controller::desired_spacing(config.lead.v0, &config.controller);
            for i in 0..config.n_followers {
                out.push(VehicleState {
                    x: out[i].x - gap,
                    v: config.lead.v0,
                    a: S::zero(),
                    u: S::zero(),
                });
            }
        }
        InitialCondition::Explicit(states) => {
            if states.len() != config.n_followers {
                return Err(SimError::InvalidConfig(format!(
                    "init.states has {} entries, expected {}",
                    states.len(),
                    config.n_followers
                )));
            }
            out.extend(states.iter().copied());
        }
    }
    Ok(out)
}

/// Per-follower monitoring and control state.
#[derive(Debug, Clone)]
struct Follower<S> {
    params: ControllerParams<S>,
    prior: GaussianBelief<S>,
    window: MeasurementWindow<S>,
    chart: ChartState<S>,
    delay: DelayLine<S>,
    retunes: usize,
    rng: ChaCha8Rng,
}

/// Stepwise simulation; [`run`] drives it to completion.
#[derive(Debug, Clone)]
pub struct Simulation<S> {
    config: SimConfig<S>,
    lead: LeadTrajectory<S>,
    noise: Option<Normal<f64>>,
    states: Vec<VehicleState<S>>,
    followers: Vec<Follower<S>>,
    step: usize,
    n_steps: usize,
    events: Vec<SimEvent<S>>,
}

impl<S: Scalar> Simulation<S> {
    pub fn new(config: SimConfig<S>) -> Result<Self, SimError> {
        config.validate()?;
        let lead = build_lead(&config)?;
        let mut states = init_platoon(&config)?;
        states[0].a = lead.a[0];
        let noise = if config.noise_enabled {
            Some(
                Normal::new(0.0, config.noise_var.as_f64().sqrt())
                    .map_err(|e| SimError::InvalidConfig(format!("noise.var: {e}")))?,
            )
        } else {
            None
        };
        let delay = delay_steps(config.controller.theta, config.dt);
        let followers = (1..=config.n_followers)
            .map(|id| {
                // One ChaCha stream per vehicle id: adding vehicles leaves
                // the noise seen by existing ones untouched.
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(id as u64);
                Follower {
                    params: config.controller,
                    prior: config.prior,
                    window: MeasurementWindow::new(config.window_len),
                    chart: ChartState::new(config.chart),
                    delay: DelayLine::new(delay),
                    retunes: 0,
                    rng,
                }
            })
            .collect();
        Ok(Self {
            n_steps: config.n_steps(),
            config,
            lead,
            noise,
            states,
            followers,
            step: 0,
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig<S> {
        &self.config
    }

    pub fn lead(&self) -> &LeadTrajectory<S> {
        &self.lead
    }

    /// Current states, lead first.
    pub fn states(&self) -> &[VehicleState<S>] {
        &self.states
    }

    /// Active setting of follower `id` (1-based).
    pub fn tau_star(&self, id: usize) -> S {
        self.followers[id - 1].params.tau_star
    }

    pub fn events(&self) -> &[SimEvent<S>] {
        &self.events
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn time(&self) -> S {
        S::from_usize(self.step).unwrap() * self.config.dt
    }

    /// Advances one step and returns its records, one per follower.
    pub fn step(&mut self) -> Result<Vec<SimRecord<S>>, SimError> {
        let t = self.time();
        let dt = self.config.dt;
        let noise_var = self.config.noise_var;
        let snapshot = self.states.clone();
        let mut records = Vec::with_capacity(self.followers.len());
        let mut fired = Vec::new();

        for (idx, f) in self.followers.iter_mut().enumerate() {
            let id = idx + 1;
            let (leader, me) = (&snapshot[idx], &snapshot[id]);
            let err = derive_error_state(leader, me, &f.params).map_err(|source| {
                SimError::Collision {
                    t: t.as_f64(),
                    vehicle_id: id,
                    source,
                }
            })?;
            let spacing_true = leader.x - me.x;
            let spacing_measured = match &self.noise {
                Some(n) => spacing_true + S::lit(n.sample(&mut f.rng)),
                None => spacing_true,
            };

            f.window.push(spacing_measured, me.v);
            let belief = windowed_estimate(&f.prior, &f.window.to_batch(noise_var)?)?;
            let tau_hat = belief.tau_mean();
            let limits = *f.chart.limits();

            let charted = f.window.is_full();
            let mut violation = false;
            if charted {
                let obs = f.chart.observe(tau_hat, t, id);
                violation = obs.violation.is_some();
                if let Some(ev) = obs.violation.filter(|_| obs.new_excursion) {
                    let kind = match ev.side {
                        Side::Above => EventKind::ViolationAbove,
                        Side::Below => EventKind::ViolationBelow,
                    };
                    self.events.push(SimEvent {
                        t,
                        vehicle_id: id,
                        kind,
                        value: tau_hat,
                        limits,
                    });
                }
                if self.config.trigger_enabled
                    && f.retunes < self.config.max_retunes
                    && f.chart.should_trigger(&self.config.trigger, t)
                {
                    fired.push(id);
                }
            } else {
                f.chart.interrupt();
            }

            let lead_accel_delayed = f.delay.push(leader.a);
            let u = command_accel(&err, lead_accel_delayed, &f.params);
            self.states[id] = step_glvd(me, u, dt, &f.params);
            debug_assert!(self.states[id].x == me.x + dt * me.v);

            records.push(SimRecord {
                t,
                vehicle_id: id,
                x: me.x,
                v: me.v,
                a: me.a,
                u,
                spacing_true,
                spacing_measured,
                tau_hat,
                tau_var: belief.tau_var(),
                lcl: limits.lcl,
                ucl: limits.ucl,
                violation,
                active_tau_star: f.params.tau_star,
                charted,
            });
        }

        let next = self.step + 1;
        self.states[0] = VehicleState {
            x: self.lead.x[next],
            v: self.lead.v[next],
            a: self.lead.a[next],
            u: self.lead.a[next],
        };

        for id in fired {
            let targets: Vec<usize> = match self.config.retune_scope {
                RetuneScope::Vehicle => vec![id],
                RetuneScope::Platoon => (1..=self.followers.len()).collect(),
            };
            for target in targets {
                self.retune(target, t);
            }
        }

        self.step = next;
        Ok(records)
    }

    fn retune(&mut self, id: usize, t: S) {
        let new_tau = self.config.retune_target;
        let f = &mut self.followers[id - 1];
        if f.retunes >= self.config.max_retunes {
            return;
        }
        f.retunes += 1;
        f.params.tau_star = new_tau;
        f.prior.mean[1] = new_tau;
        f.chart.retune(new_tau);
        f.window.clear();
        self.events.push(SimEvent {
            t,
            vehicle_id: id,
            kind: EventKind::Trigger,
            value: new_tau,
            limits: *f.chart.limits(),
        });
    }
}

/// Runs the configured scenario to completion. A collision ends the run
/// early and is reported through [`SimOutput::aborted`].
pub fn run<S: Scalar>(config: &SimConfig<S>) -> Result<SimOutput<S>, SimError> {
    let mut sim = Simulation::new(config.clone())?;
    let mut records = Vec::with_capacity(sim.n_steps * config.n_followers);
    let mut aborted = None;
    while !sim.is_done() {
        match sim.step() {
            Ok(rows) => records.extend(rows),
            Err(e @ SimError::Collision { .. }) => {
                aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut summary = summarize(&records).unwrap_or_else(|_| Summary::default());
    summary.aborted = aborted.clone();
    Ok(SimOutput {
        records,
        events: sim.events,
        summary,
        lead: sim.lead,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_gaps() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.lead.v0 = 20.0;
        let states = init_platoon(&cfg).unwrap();
        assert_eq!(states.len(), 6);
        for w in states.windows(2) {
            assert!((w[0].x - w[1].x - 37.0).abs() < 1e-12);
            assert_eq!(w[1].v, 20.0);
        }
    }

    #[test]
    fn explicit_states_echo() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.n_followers = 2;
        let given = vec![
            VehicleState {
                x: -30.0,
                v: 9.0,
                a: 0.1,
                u: 0.0,
            },
            VehicleState {
                x: -70.0,
                v: 8.0,
                a: 0.0,
                u: 0.0,
            },
        ];
        cfg.initial_condition = InitialCondition::Explicit(given.clone());
        assert_eq!(&init_platoon(&cfg).unwrap()[1..], &given[..]);
    }

    #[test]
    fn zero_followers_rejected() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.n_followers = 0;
        assert!(matches!(
            init_platoon(&cfg),
            Err(SimError::InvalidConfig(_))
        ));
        assert!(matches!(run(&cfg), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn noise_off_measures_truth() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.duration = 20.0;
        cfg.noise_enabled = false;
        let out = run(&cfg).unwrap();
        assert!(out
            .records
            .iter()
            .all(|r| r.spacing_measured == r.spacing_true));
    }

    #[test]
    fn collision_aborts_with_partial_output() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.n_followers = 1;
        cfg.initial_condition = InitialCondition::Explicit(vec![VehicleState {
            x: 0.0,
            v: 8.94,
            a: 0.0,
            u: 0.0,
        }]);
        let out = run(&cfg).unwrap();
        assert!(out.records.is_empty());
        assert!(out.aborted.unwrap().contains("collision"));
    }

    #[test]
    fn adding_followers_keeps_earlier_noise() {
        let mut cfg = SimConfig::<f64>::default();
        cfg.duration = 5.0;
        cfg.n_followers = 2;
        let a = run(&cfg).unwrap();
        cfg.n_followers = 3;
        let b = run(&cfg).unwrap();
        let noise = |o: &SimOutput<f64>, id| -> Vec<f64> {
            o.records
                .iter()
                .filter(|r| r.vehicle_id == id)
                .map(|r| r.spacing_measured - r.spacing_true)
                .collect()
        };
        assert_eq!(noise(&a, 1), noise(&b, 1));
        assert_eq!(noise(&a, 2), noise(&b, 2));
    }

    #[test]
    fn runs_in_f32() {
        let mut cfg = SimConfig::<f32>::default();
        cfg.duration = 30.0;
        let out = run(&cfg).unwrap();
        assert_eq!(out.records.len(), 300 * 5);
        assert!(out.aborted.is_none());
    }
}
