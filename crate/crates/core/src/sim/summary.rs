use serde::Serialize;
use thiserror::Error;

use crate::Scalar;

use super::SimRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SummaryError {
    #[error("record stream is empty")]
    EmptyStream,
}

/// Statistics for one setting regime of one vehicle, over charted samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub tau_star: f64,
    pub start_t: f64,
    pub charted_samples: usize,
    /// `max |tau_hat − tau_star|`; `None` when nothing was charted.
    pub max_abs_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub vehicle_id: usize,
    pub samples: usize,
    pub charted_samples: usize,
    pub max_tau_hat: Option<f64>,
    pub min_tau_hat: Option<f64>,
    pub mean_tau_hat: Option<f64>,
    /// Population standard deviation of the charted `tau_hat`.
    pub std_tau_hat: Option<f64>,
    /// Number of excursions (maximal runs of out-of-control samples).
    pub violations: usize,
    /// Times of the last record under each superseded setting.
    pub trigger_times: Vec<f64>,
    pub regimes: Vec<RegimeSummary>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Summary {
    pub vehicles: Vec<VehicleSummary>,
    pub total_violations: usize,
    pub aborted: Option<String>,
}

impl Summary {
    pub fn vehicle(&self, id: usize) -> Option<&VehicleSummary> {
        self.vehicles.iter().find(|v| v.vehicle_id == id)
    }
}

#[derive(Default)]
struct Acc {
    samples: usize,
    charted: Vec<f64>,
    violations: usize,
    in_violation: bool,
    trigger_times: Vec<f64>,
    regimes: Vec<RegimeSummary>,
    last_t: f64,
}

/// Per-vehicle aggregates. Records are grouped by `vehicle_id` and assumed
/// time-ordered within each vehicle.
pub fn summarize<S: Scalar>(records: &[SimRecord<S>]) -> Result<Summary, SummaryError> {
    if records.is_empty() {
        return Err(SummaryError::EmptyStream);
    }
    let mut by_vehicle: std::collections::BTreeMap<usize, Acc> = Default::default();
    for r in records {
        let acc = by_vehicle.entry(r.vehicle_id).or_default();
        let t = r.t.as_f64();
        let tau_star = r.active_tau_star.as_f64();
        let tau_hat = r.tau_hat.as_f64();

        match acc.regimes.last() {
            Some(reg) if reg.tau_star == tau_star => {}
            prev => {
                if prev.is_some() {
                    acc.trigger_times.push(acc.last_t);
                }
                acc.regimes.push(RegimeSummary {
                    tau_star,
                    start_t: t,
                    charted_samples: 0,
                    max_abs_deviation: None,
                });
            }
        }
        acc.samples += 1;
        acc.last_t = t;

        if r.violation && !acc.in_violation {
            acc.violations += 1;
        }
        acc.in_violation = r.violation;

        if r.charted {
            acc.charted.push(tau_hat);
            let reg = acc.regimes.last_mut().expect("regime pushed above");
            reg.charted_samples += 1;
            let dev = (tau_hat - tau_star).abs();
            reg.max_abs_deviation = Some(reg.max_abs_deviation.map_or(dev, |m| m.max(dev)));
        }
    }

    let vehicles: Vec<VehicleSummary> = by_vehicle
        .into_iter()
        .map(|(vehicle_id, acc)| {
            let n = acc.charted.len();
            let (max, min, mean, std) = if n == 0 {
                (None, None, None, None)
            } else {
                let max = acc.charted.iter().copied().fold(f64::MIN, f64::max);
                let min = acc.charted.iter().copied().fold(f64::MAX, f64::min);
                let mean = acc.charted.iter().sum::<f64>() / n as f64;
                let var = acc.charted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                (Some(max), Some(min), Some(mean), Some(var.sqrt()))
            };
            VehicleSummary {
                vehicle_id,
                samples: acc.samples,
                charted_samples: n,
                max_tau_hat: max,
                min_tau_hat: min,
                mean_tau_hat: mean,
                std_tau_hat: std,
                violations: acc.violations,
                trigger_times: acc.trigger_times,
                regimes: acc.regimes,
            }
        })
        .collect();
    let total_violations = vehicles.iter().map(|v| v.violations).sum();
    Ok(Summary {
        vehicles,
        total_violations,
        aborted: None,
    })
}
