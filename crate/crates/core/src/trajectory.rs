//! Lead-vehicle trajectory: acceleration profiles (CSV or synthetic) and
//! their forward-Euler integration into position/speed/acceleration series.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("time column is not strictly increasing at row {line}")]
    NonMonotonicTime { line: usize },
    #[error("acceleration profile is empty")]
    EmptyProfile,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Acceleration samples on a uniform time grid starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelProfile<S> {
    t0: S,
    dt: S,
    accel: Vec<S>,
}

impl<S: Scalar> AccelProfile<S> {
    pub fn new(t0: S, dt: S, accel: Vec<S>) -> Result<Self, TrajectoryError> {
        if !(dt > S::zero()) || !dt.is_finite() || !t0.is_finite() {
            return Err(TrajectoryError::InvalidRange(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if let Some(k) = accel.iter().position(|a| !a.is_finite()) {
            return Err(TrajectoryError::MalformedRow {
                line: k + 1,
                reason: "non-finite acceleration".into(),
            });
        }
        Ok(Self { t0, dt, accel })
    }

    /// All-zero profile of `len` samples.
    pub fn zeros(dt: S, len: usize) -> Result<Self, TrajectoryError> {
        Self::new(S::zero(), dt, vec![S::zero(); len])
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn t0(&self) -> S {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }

    pub fn accel(&self) -> &[S] {
        &self.accel
    }

    pub fn time(&self, k: usize) -> S {
        self.t0 + S::from_usize(k).unwrap() * self.dt
    }

    /// `(t, a)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (S, S)> + '_ {
        self.accel
            .iter()
            .enumerate()
            .map(|(k, &a)| (self.time(k), a))
    }

    /// Truncate, or pad with zero acceleration (cruise), to exactly `len` samples.
    pub fn fit_to_len(mut self, len: usize) -> Self {
        self.accel.resize(len, S::zero());
        self
    }

    /// `t,a` CSV with header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,a")?;
        for (t, a) in self.samples() {
            writeln!(
                out,
                "{},{}",
                crate::output::fmt_sig(t.as_f64(), 9),
                crate::output::fmt_sig(a.as_f64(), 9)
            )?;
        }
        Ok(())
    }
}

/// Time-aligned lead vehicle series.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadTrajectory<S> {
    pub t: Vec<S>,
    pub x: Vec<S>,
    pub v: Vec<S>,
    pub a: Vec<S>,
}

impl<S: Scalar> LeadTrajectory<S> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a two-column `t,a` CSV. An optional header row is recognised by a
/// non-numeric first cell. Samples are resampled onto `expected_dt` by linear
/// interpolation unless the input already sits on that grid.
pub fn load_accel_profile<S: Scalar>(
    path: impl AsRef<Path>,
    expected_dt: S,
) -> Result<AccelProfile<S>, TrajectoryError> {
    let file = std::fs::File::open(path)?;
    read_accel_profile(file, expected_dt)
}

pub fn read_accel_profile<S: Scalar, R: Read>(
    reader: R,
    expected_dt: S,
) -> Result<AccelProfile<S>, TrajectoryError> {
    if !(expected_dt > S::zero()) {
        return Err(TrajectoryError::InvalidRange(format!(
            "expected_dt must be positive, got {expected_dt}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| TrajectoryError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if idx == 0 && rec.get(0).and_then(parse_cell).is_none() {
            continue; // header
        }
        if rec.len() != 2 {
            return Err(TrajectoryError::MalformedRow {
                line,
                reason: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let t = parse_cell(&rec[0]);
        let a = parse_cell(&rec[1]);
        let (t, a) = match (t, a) {
            (Some(t), Some(a)) if t.is_finite() && a.is_finite() => (t, a),
            _ => {
                return Err(TrajectoryError::MalformedRow {
                    line,
                    reason: format!(
                        "non-numeric or non-finite cell in {:?}",
                        rec.iter().collect::<Vec<_>>()
                    ),
                })
            }
        };
        if let Some(&(prev, _)) = pts.last() {
            if t <= prev {
                return Err(TrajectoryError::NonMonotonicTime { line });
            }
        }
        pts.push((t, a));
    }
    if pts.is_empty() {
        return Err(TrajectoryError::EmptyProfile);
    }
    resample(&pts, expected_dt.as_f64()).map(|(t0, accel)| AccelProfile {
        t0: S::lit(t0),
        dt: expected_dt,
        accel: accel.into_iter().map(S::lit).collect(),
    })
}

/// Linear interpolation of strictly increasing `(t, a)` points onto a grid
/// `t0 + k·dt`. Points already on that grid pass through unchanged.
fn resample(pts: &[(f64, f64)], dt: f64) -> Result<(f64, Vec<f64>), TrajectoryError> {
    let t0 = pts[0].0;
    let tol = 1e-9 * dt.max(1.0);
    let on_grid = pts
        .iter()
        .enumerate()
        .all(|(k, &(t, _))| (t - (t0 + k as f64 * dt)).abs() <= tol);
    if on_grid {
        return Ok((t0, pts.iter().map(|p| p.1).collect()));
    }
    let t_end = pts[pts.len() - 1].0;
    let n = ((t_end - t0) / dt + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        while seg + 1 < pts.len() - 1 && pts[seg + 1].0 <= t {
            seg += 1;
        }
        if pts.len() == 1 {
            out.push(pts[0].1);
            continue;
        }
        let (ta, aa) = pts[seg];
        let (tb, ab) = pts[seg + 1];
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push(aa + w * (ab - aa));
    }
    Ok((t0, out))
}

/// Square-wave acceleration: `+a_mag` for `(v_high − v_low)/a_mag` seconds,
/// then `−a_mag` for the same duration, repeated `n_cycles` times. Integrated
/// from `v_low` the speed oscillates between `v_low` and `v_high`.
pub fn synth_oscillation_profile<S: Scalar>(
    v_low: S,
    v_high: S,
    a_mag: S,
    n_cycles: usize,
    dt: S,
) -> Result<AccelProfile<S>, TrajectoryError> {
    if !(v_low >= S::zero()) || !(v_low < v_high) || !v_high.is_finite() {
        return Err(TrajectoryError::InvalidRange(format!(
            "need 0 <= v_low < v_high, got {v_low}..{v_high}"
        )));
    }
    if !(a_mag > S::zero()) || !a_mag.is_finite() {
        return Err(TrajectoryError::InvalidRange(format!(
            "a_mag must be positive, got {a_mag}"
        )));
    }
    if n_cycles == 0 {
        return Err(TrajectoryError::InvalidRange(
            "n_cycles must be at least 1".into(),
        ));
    }
    if !(dt > S::zero()) {
        return Err(TrajectoryError::InvalidRange(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let phase = ((v_high - v_low) / a_mag / dt)
        .round()
        .to_usize()
        .unwrap_or(0)
        .max(1);
    let mut accel = Vec::with_capacity(2 * phase * n_cycles);
    for _ in 0..n_cycles {
        accel.extend(std::iter::repeat_n(a_mag, phase));
        accel.extend(std::iter::repeat_n(-a_mag, phase));
    }
    AccelProfile::new(S::zero(), dt, accel)
}

/// Forward Euler on the profile grid:
/// `v[k+1] = max(0, v[k] + a[k]·dt)`, `x[k+1] = x[k] + v[k]·dt`.
///
/// The stored acceleration is the realized one: where the standstill clamp
/// bites, `a[k] = (v[k+1] − v[k]) / dt`.
pub fn integrate_lead<S: Scalar>(
    profile: &AccelProfile<S>,
    v0: S,
    x0: S,
) -> Result<LeadTrajectory<S>, TrajectoryError> {
    if !(v0 >= S::zero()) || !v0.is_finite() || !x0.is_finite() {
        return Err(TrajectoryError::InvalidRange(format!(
            "initial speed must be finite and >= 0, got {v0}"
        )));
    }
    let n = profile.len();
    let dt = profile.dt();
    let mut traj = LeadTrajectory {
        t: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
    };
    let (mut x, mut v) = (x0, v0);
    for (t, a_cmd) in profile.samples() {
        let v_next = (v + a_cmd * dt).max(S::zero());
        let a = if v + a_cmd * dt < S::zero() {
            (v_next - v) / dt
        } else {
            a_cmd
        };
        traj.t.push(t);
        traj.x.push(x);
        traj.v.push(v);
        traj.a.push(a);
        x = x + v * dt;
        v = v_next;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn read(s: &str, dt: f64) -> Result<AccelProfile<f64>, TrajectoryError> {
        read_accel_profile(s.as_bytes(), dt)
    }

    #[test]
    fn zero_profile_identity() {
        let p = read("0,0\n0.1,0\n0.2,0", 0.1).unwrap();
        assert_eq!(p.accel(), &[0.0, 0.0, 0.0]);
        assert_eq!(p.dt(), 0.1);
    }

    #[test]
    fn header_is_skipped() {
        let p = read("t,a\n0,1\n0.1,2\n", 0.1).unwrap();
        assert_eq!(p.accel(), &[1.0, 2.0]);
    }

    #[test]
    fn coarse_profile_is_interpolated() {
        // hand interpolation: 0 → 1 → -1 at 0.2 s spacing onto 0.1 s
        let p = read("0,0\n0.2,1\n0.4,-1", 0.1).unwrap();
        let expect = [0.0, 0.5, 1.0, 0.0, -1.0];
        assert_eq!(p.len(), 5);
        for (got, want) in p.accel().iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn malformed_cell() {
        assert!(matches!(
            read("0,0\n0.1,abc", 0.1),
            Err(TrajectoryError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            read("0,0\n0.1,1,2", 0.1),
            Err(TrajectoryError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn non_monotonic_and_empty() {
        assert!(matches!(
            read("0,0\n0.2,0\n0.1,0", 0.1),
            Err(TrajectoryError::NonMonotonicTime { line: 3 })
        ));
        assert!(matches!(
            read("0,0\n0,0", 0.1),
            Err(TrajectoryError::NonMonotonicTime { line: 2 })
        ));
        assert!(matches!(read("", 0.1), Err(TrajectoryError::EmptyProfile)));
        assert!(matches!(
            read("t,a\n", 0.1),
            Err(TrajectoryError::EmptyProfile)
        ));
    }

    #[test]
    fn synth_one_cycle_phases() {
        let p = synth_oscillation_profile(8.94, 35.76, 2.0, 1, 0.1).unwrap();
        // (35.76 − 8.94) / 2.0 = 13.41 s → 134 samples per phase
        assert_eq!(p.len(), 268);
        assert!(p.accel()[..134].iter().all(|&a| a == 2.0));
        assert!(p.accel()[134..].iter().all(|&a| a == -2.0));
    }

    #[test]
    fn synth_rejects_bad_ranges() {
        assert!(synth_oscillation_profile(10.0, 10.0, 1.0, 1, 0.1).is_err());
        assert!(synth_oscillation_profile(12.0, 10.0, 1.0, 1, 0.1).is_err());
        assert!(synth_oscillation_profile(1.0, 10.0, 0.0, 1, 0.1).is_err());
        assert!(synth_oscillation_profile(1.0, 10.0, 1.0, 0, 0.1).is_err());
    }

    #[test]
    fn constant_speed() {
        let p = AccelProfile::zeros(0.1, 50).unwrap();
        let tr = integrate_lead(&p, 10.0, 0.0).unwrap();
        for k in 0..50 {
            assert_eq!(tr.v[k], 10.0);
            assert_relative_eq!(tr.x[k], 10.0 * tr.t[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn standstill_clamp() {
        let p = AccelProfile::new(0.0, 0.1, vec![-5.0; 10]).unwrap();
        let tr = integrate_lead(&p, 1.0, 0.0).unwrap();
        assert_relative_eq!(tr.v[1], 0.5, epsilon = 1e-12);
        assert_eq!(tr.v[2], 0.0);
        assert!(tr.v[2..].iter().all(|&v| v == 0.0));
        assert!(tr.x.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn euler_hand_sum() {
        // a ≡ 2 for 1 s from rest: v(1.0) = 2.0, x(1.0) = 0.1·Σ_{k<10} 0.2k = 0.9
        let p = AccelProfile::new(0.0, 0.1, vec![2.0; 11]).unwrap();
        let tr = integrate_lead(&p, 0.0, 0.0).unwrap();
        assert_relative_eq!(tr.v[10], 2.0, epsilon = 1e-12);
        assert_relative_eq!(tr.x[10], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn fit_to_len_pads_and_truncates() {
        let p = AccelProfile::new(0.0, 0.1, vec![1.0; 3]).unwrap();
        assert_eq!(p.clone().fit_to_len(5).accel(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.fit_to_len(2).accel(), &[1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn finite_difference_recovers_accel(acc in proptest::collection::vec(-3.0f64..3.0, 1..200), v0 in 0.0f64..30.0) {
            let p = AccelProfile::new(0.0, 0.1, acc.clone()).unwrap();
            let tr = integrate_lead(&p, v0, 0.0).unwrap();
            for k in 0..tr.len() - 1 {
                if tr.v[k] + acc[k] * 0.1 >= 0.0 {
                    prop_assert!(((tr.v[k + 1] - tr.v[k]) / 0.1 - acc[k]).abs() < 1e-9);
                }
                prop_assert!(tr.v[k] >= 0.0);
                prop_assert!(tr.x[k + 1] >= tr.x[k]);
            }
        }

        #[test]
        fn on_grid_resample_is_identity(acc in proptest::collection::vec(-5.0f64..5.0, 1..100)) {
            let csv: String = acc.iter().enumerate().map(|(k, a)| format!("{},{}\n", k as f64 * 0.1, a)).collect();
            let p = read(&csv, 0.1).unwrap();
            prop_assert_eq!(p.accel(), &acc[..]);
        }

        #[test]
        fn synth_speed_stays_in_band(v_low in 0.0f64..20.0, span in 0.5f64..30.0, a_mag in 0.3f64..5.0, cycles in 1usize..4) {
            let v_high = v_low + span;
            let p = synth_oscillation_profile(v_low, v_high, a_mag, cycles, 0.1).unwrap();
            let tr = integrate_lead(&p, v_low, 0.0).unwrap();
            let slack = a_mag * 0.1 + 1e-9;
            let mut v = v_low;
            for (k, a) in p.accel().iter().enumerate() {
                prop_assert!(tr.v[k] >= v_low - slack && tr.v[k] <= v_high + slack);
                v = (v + a * 0.1).max(0.0);
            }
            prop_assert!(v >= v_low - slack && v <= v_high + slack);
        }
    }
}
