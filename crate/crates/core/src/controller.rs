//! Two-level car-following controller.
//!
//! The upper level applies the constant time headway policy: desired spacing
//! grows linearly with the follower's speed. The lower level is a linear
//! state-feedback plus delayed feedforward law acting on first-order
//! actuation dynamics (commanded → realized acceleration with lag `T`).

use std::collections::VecDeque;

use num_complex::Complex;
use thiserror::Error;

use crate::linalg::{char_poly3, cubic_roots, Mat3, Vec3};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
#[error(
    "collision detected: leader at x={leader_x} m is not ahead of follower at x={follower_x} m"
)]
pub struct CollisionDetected {
    pub leader_x: f64,
    pub follower_x: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid controller parameters: {0}")]
pub struct InvalidParams(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams<S> {
    /// Desired time gap τ* (s).
    pub tau_star: S,
    /// Standstill spacing (m).
    pub s0: S,
    /// Actuation lag T (s).
    pub lag: S,
    /// Ratio K of realized to commanded acceleration.
    pub accel_gain: S,
    /// Feedback gains on `[Δd, Δv, a]`.
    pub k: [S; 3],
    /// Feedforward gain on the delayed leader acceleration.
    pub kf: S,
    /// Feedforward delay θ (s).
    pub theta: S,
    pub u_min: S,
    pub u_max: S,
}

impl<S: Scalar> Default for ControllerParams<S> {
    fn default() -> Self {
        Self {
            tau_star: S::lit(1.6),
            s0: S::lit(5.0),
            lag: S::lit(0.45),
            accel_gain: S::one(),
            k: [S::lit(0.45), S::lit(1.5), S::lit(-0.3)],
            kf: S::lit(0.6),
            theta: S::lit(0.2),
            u_min: S::lit(-5.0),
            u_max: S::lit(3.0),
        }
    }
}

impl<S: Scalar> ControllerParams<S> {
    pub fn with_tau_star(mut self, tau_star: S) -> Self {
        self.tau_star = tau_star;
        self
    }

    /// Range checks only; closed-loop stability is checked separately by
    /// [`check_stability`] / [`ControllerParams::validate_stable`].
    pub fn validate(&self) -> Result<(), InvalidParams> {
        let finite = [
            self.tau_star,
            self.s0,
            self.lag,
            self.accel_gain,
            self.kf,
            self.theta,
            self.u_min,
            self.u_max,
        ]
        .iter()
        .chain(self.k.iter())
        .all(|x| x.is_finite());
        if !finite {
            return Err(InvalidParams("all parameters must be finite".into()));
        }
        if !(self.lag > S::zero()) {
            return Err(InvalidParams(format!(
                "actuation lag T must be > 0, got {}",
                self.lag
            )));
        }
        if !(self.tau_star > S::zero()) {
            return Err(InvalidParams(format!(
                "tau_star must be > 0, got {}",
                self.tau_star
            )));
        }
        if self.s0 < S::zero() {
            return Err(InvalidParams(format!("s0 must be >= 0, got {}", self.s0)));
        }
        if self.theta < S::zero() {
            return Err(InvalidParams(format!(
                "theta must be >= 0, got {}",
                self.theta
            )));
        }
        if !(self.u_min < self.u_max) {
            return Err(InvalidParams(format!(
                "need u_min < u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    pub fn validate_stable(&self) -> Result<(), InvalidParams> {
        self.validate()?;
        let eig = check_stability(self);
        if let Some(bad) = eig.iter().find(|z| !(z.re < S::zero())) {
            return Err(InvalidParams(format!(
                "closed loop A + B·k is not stable: eigenvalue {}{:+}i has non-negative real part",
                bad.re, bad.im
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState<S> {
    pub x: S,
    pub v: S,
    /// Realized acceleration.
    pub a: S,
    /// Last commanded acceleration.
    pub u: S,
}

/// `[Δd, Δv, a]` for one follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState<S> {
    pub dd: S,
    pub dv: S,
    pub a: S,
}

impl<S: Scalar> ErrorState<S> {
    pub fn as_array(&self) -> Vec3<S> {
        [self.dd, self.dv, self.a]
    }
}

#[inline]
pub fn desired_spacing<S: Scalar>(v: S, params: &ControllerParams<S>) -> S {
    v * params.tau_star + params.s0
}

pub fn derive_error_state<S: Scalar>(
    leader: &VehicleState<S>,
    follower: &VehicleState<S>,
    params: &ControllerParams<S>,
) -> Result<ErrorState<S>, CollisionDetected> {
    let spacing = leader.x - follower.x;
    if !(spacing > S::zero()) {
        return Err(CollisionDetected {
            leader_x: leader.x.as_f64(),
            follower_x: follower.x.as_f64(),
        });
    }
    Ok(ErrorState {
        dd: spacing - desired_spacing(follower.v, params),
        dv: leader.v - follower.v,
        a: follower.a,
    })
}

/// `u = k·[Δd, Δv, a] + kf·a_lead(t − θ)`, saturated to `[u_min, u_max]`.
pub fn command_accel<S: Scalar>(
    err: &ErrorState<S>,
    lead_accel_delayed: S,
    params: &ControllerParams<S>,
) -> S {
    let [k1, k2, k3] = params.k;
    let raw = k1 * err.dd + k2 * err.dv + k3 * err.a + params.kf * lead_accel_delayed;
    raw.max(params.u_min).min(params.u_max)
}

/// One forward-Euler step of the actuation lag and kinematics.
pub fn step_glvd<S: Scalar>(
    state: &VehicleState<S>,
    u: S,
    dt: S,
    params: &ControllerParams<S>,
) -> VehicleState<S> {
    let jerk = (params.accel_gain * u - state.a) / params.lag;
    VehicleState {
        x: state.x + dt * state.v,
        v: (state.v + dt * state.a).max(S::zero()),
        a: state.a + dt * jerk,
        u,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMatrices<S> {
    pub a: Mat3<S>,
    pub b: Vec3<S>,
    pub d: Vec3<S>,
}

impl<S: Scalar> StateMatrices<S> {
    /// `ẋ = A·x + B·u + D·a_lead`
    pub fn derivative(&self, x: &Vec3<S>, u: S, lead_accel: S) -> Vec3<S> {
        let mut out = [S::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.a[i][0] * x[0]
                + self.a[i][1] * x[1]
                + self.a[i][2] * x[2]
                + self.b[i] * u
                + self.d[i] * lead_accel;
        }
        out
    }

    /// `A + B·kᵀ`
    pub fn closed_loop(&self, k: &[S; 3]) -> Mat3<S> {
        let mut m = self.a;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = *cell + self.b[i] * k[j];
            }
        }
        m
    }
}

/// Error-state dynamics over `x = [Δd, Δv, a]`. The `(0, 2)` entry is `−τ*`
/// because `d(Δd)/dt = Δv − τ*·a`.
pub fn build_state_matrices<S: Scalar>(params: &ControllerParams<S>) -> StateMatrices<S> {
    let z = S::zero();
    let inv_lag = S::one() / params.lag;
    StateMatrices {
        a: [
            [z, S::one(), -params.tau_star],
            [z, z, -S::one()],
            [z, z, -inv_lag],
        ],
        b: [z, z, params.accel_gain * inv_lag],
        d: [z, S::one(), z],
    }
}

/// Eigenvalues of the closed loop `A + B·kᵀ`.
pub fn check_stability<S: Scalar>(params: &ControllerParams<S>) -> [Complex<S>; 3] {
    let m = build_state_matrices(params).closed_loop(&params.k);
    cubic_roots(char_poly3(&m))
}

/// Number of grid steps realizing a delay of `theta` seconds.
pub fn delay_steps<S: Scalar>(theta: S, dt: S) -> usize {
    // 0.2 / 0.1 evaluates to 2.0000000000000004; shave the rounding noise
    // before taking the ceiling.
    let ratio = theta / dt;
    (ratio - S::lit(1e-9) * ratio.max(S::one()))
        .ceil()
        .max(S::zero())
        .to_usize()
        .unwrap_or(0)
}

/// Fixed-length FIFO of past values, zero-filled at start.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine<S> {
    buf: VecDeque<S>,
}

impl<S: Scalar> DelayLine<S> {
    pub fn new(steps: usize) -> Self {
        Self {
            buf: std::iter::repeat_n(S::zero(), steps).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.buf.len()
    }

    /// Pushes the current value and returns the one from `steps` pushes ago.
    pub fn push(&mut self, value: S) -> S {
        if self.buf.is_empty() {
            return value;
        }
        let out = self.buf.pop_front().unwrap_or_else(S::zero);
        self.buf.push_back(value);
        out
    }
}
