//! Flat `section.key = value` configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! section.key = value        # trailing comment
//! lead.path = "profiles/a b.csv"
//! ```
//!
//! Values are numbers, `true`/`false`, bare or double-quoted strings, and
//! comma-separated number lists. `init.states` lists follower states front to
//! back as `x,v,a` triples separated by `;`. Later entries for a key are
//! rejected; command-line overrides replace file values. See [`KEYS`] for
//! every recognised key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::controller::VehicleState;
use crate::estimator::GaussianBelief;
use crate::sim::{InitialCondition, LeadSource, RetuneScope, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` expects {expected}, got `{got}`")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("{0}")]
    InvariantViolation(String),
}

impl ConfigError {
    /// Stable identifier used in `ERROR <code>: ...` diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "Io",
            ConfigError::Syntax { .. } => "Syntax",
            ConfigError::UnknownKey(_) => "UnknownKey",
            ConfigError::TypeMismatch { .. } => "TypeMismatch",
            ConfigError::InvariantViolation(_) => "InvariantViolation",
        }
    }
}

/// Every recognised key, in canonical (sorted) order.
pub const KEYS: &[&str] = &[
    "chart.l",
    "chart.sigma_desired",
    "controller.accel_gain",
    "controller.k",
    "controller.kf",
    "controller.lag",
    "controller.s0",
    "controller.tau_star",
    "controller.theta",
    "controller.u_max",
    "controller.u_min",
    "init.mode",
    "init.states",
    "lead.a_mag",
    "lead.n_cycles",
    "lead.path",
    "lead.source",
    "lead.v0",
    "lead.v_high",
    "lead.v_low",
    "lead.x0",
    "noise.enabled",
    "noise.var",
    "prior.cov",
    "prior.mean_s0",
    "prior.mean_tau",
    "sim.dt",
    "sim.duration",
    "sim.n_followers",
    "sim.rng_seed",
    "sim.window_len",
    "trigger.enabled",
    "trigger.k_violations",
    "trigger.max_retunes",
    "trigger.retune_target",
    "trigger.scope",
    "trigger.window",
];

/// Parses `key = value` lines into a map. Values keep their raw text with
/// surrounding quotes removed.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            reason: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        let key = key.trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("invalid key `{key}`"),
            });
        }
        let value = unquote(value.trim(), line)?;
        if out.insert(key.to_string(), value).is_some() {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

fn unquote(value: &str, line: usize) -> Result<String, ConfigError> {
    if let Some(rest) = value.strip_prefix('"') {
        let end = rest.find('"').ok_or_else(|| ConfigError::Syntax {
            line,
            reason: "unterminated string".into(),
        })?;
        let tail = rest[end + 1..].trim();
        if !(tail.is_empty() || tail.starts_with('#')) {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("unexpected text after string: `{tail}`"),
            });
        }
        return Ok(rest[..end].to_string());
    }
    let value = match value.find(" #").or_else(|| value.find("\t#")) {
        Some(pos) => value[..pos].trim_end(),
        None => value,
    };
    Ok(value.to_string())
}

/// Splits a `KEY=VALUE` override.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        reason: format!("override `{s}` is not KEY=VALUE"),
    })?;
    Ok((k.trim().to_string(), unquote(v.trim(), 0)?))
}

fn mismatch(key: &str, expected: &'static str, got: &str) -> ConfigError {
    ConfigError::TypeMismatch {
        key: key.to_string(),
        expected,
        got: got.to_string(),
    }
}

fn float(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| mismatch(key, "a finite number", v))
}

fn uint<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .map_err(|_| mismatch(key, "a non-negative integer", v))
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(mismatch(key, "true or false", v)),
    }
}

fn floats<const N: usize>(
    key: &str,
    v: &str,
    expected: &'static str,
) -> Result<[f64; N], ConfigError> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| mismatch(key, expected, v))?;
    parts.try_into().map_err(|_| mismatch(key, expected, v))
}

fn states(key: &str, v: &str) -> Result<Vec<VehicleState<f64>>, ConfigError> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|triple| {
            let [x, v, a] = floats::<3>(key, triple, "`x,v,a` triples separated by `;`")?;
            Ok(VehicleState { x, v, a, u: 0.0 })
        })
        .collect()
}

/// Settings before cross-key defaults are resolved.
#[derive(Debug, Clone)]
struct Draft {
    cfg: SimConfig<f64>,
    lead_source: String,
    lead_path: Option<PathBuf>,
    v_low: f64,
    v_high: f64,
    a_mag: f64,
    n_cycles: usize,
    v0: Option<f64>,
    x0: Option<f64>,
    mean_s0: Option<f64>,
    mean_tau: Option<f64>,
    prior_cov: [f64; 4],
    init_mode: String,
    init_states: Option<Vec<VehicleState<f64>>>,
}

impl Default for Draft {
    fn default() -> Self {
        let cfg = SimConfig::<f64>::default();
        let (v_low, v_high, a_mag, n_cycles) = match cfg.lead.source {
            LeadSource::Synth {
                v_low,
                v_high,
                a_mag,
                n_cycles,
            } => (v_low, v_high, a_mag, n_cycles),
            _ => unreachable!("default lead is synthetic"),
        };
        let c = cfg.prior.cov;
        Self {
            lead_source: "synth".into(),
            lead_path: None,
            v_low,
            v_high,
            a_mag,
            n_cycles,
            v0: None,
            x0: None,
            mean_s0: None,
            mean_tau: None,
            prior_cov: [c[0][0], c[0][1], c[1][0], c[1][1]],
            init_mode: "equilibrium".into(),
            init_states: None,
            cfg,
        }
    }
}

impl Draft {
    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let c = &mut self.cfg;
        match key {
            "sim.dt" => c.dt = float(key, v)?,
            "sim.duration" => c.duration = float(key, v)?,
            "sim.n_followers" => c.n_followers = uint(key, v)?,
            "sim.rng_seed" => c.rng_seed = uint(key, v)?,
            "sim.window_len" => c.window_len = uint(key, v)?,
            "controller.tau_star" => c.controller.tau_star = float(key, v)?,
            "controller.s0" => c.controller.s0 = float(key, v)?,
            "controller.lag" => c.controller.lag = float(key, v)?,
            "controller.accel_gain" => c.controller.accel_gain = float(key, v)?,
            "controller.k" => {
                c.controller.k = floats::<3>(key, v, "three comma-separated numbers")?
            }
            "controller.kf" => c.controller.kf = float(key, v)?,
            "controller.theta" => c.controller.theta = float(key, v)?,
            "controller.u_min" => c.controller.u_min = float(key, v)?,
            "controller.u_max" => c.controller.u_max = float(key, v)?,
            "prior.mean_s0" => self.mean_s0 = Some(float(key, v)?),
            "prior.mean_tau" => self.mean_tau = Some(float(key, v)?),
            "prior.cov" => {
                self.prior_cov =
                    floats::<4>(key, v, "four comma-separated numbers (row-major 2x2)")?
            }
            "noise.var" => c.noise_var = float(key, v)?,
            "noise.enabled" => c.noise_enabled = boolean(key, v)?,
            "chart.sigma_desired" => c.chart.sigma_desired = float(key, v)?,
            "chart.l" => c.chart.l = float(key, v)?,
            "trigger.enabled" => c.trigger_enabled = boolean(key, v)?,
            "trigger.k_violations" => c.trigger.k_violations = uint(key, v)?,
            "trigger.window" => c.trigger.window = float(key, v)?,
            "trigger.retune_target" => c.retune_target = float(key, v)?,
            "trigger.max_retunes" => c.max_retunes = uint(key, v)?,
            "trigger.scope" => {
                c.retune_scope = match v {
                    "vehicle" => RetuneScope::Vehicle,
                    "platoon" => RetuneScope::Platoon,
                    _ => return Err(mismatch(key, "`vehicle` or `platoon`", v)),
                }
            }
            "lead.source" => match v {
                "synth" | "csv" => self.lead_source = v.to_string(),
                _ => return Err(mismatch(key, "`synth` or `csv`", v)),
            },
            "lead.path" => self.lead_path = Some(PathBuf::from(v)),
            "lead.v0" => self.v0 = Some(float(key, v)?),
            "lead.x0" => self.x0 = Some(float(key, v)?),
            "lead.v_low" => self.v_low = float(key, v)?,
            "lead.v_high" => self.v_high = float(key, v)?,
            "lead.a_mag" => self.a_mag = float(key, v)?,
            "lead.n_cycles" => self.n_cycles = uint(key, v)?,
            "init.mode" => match v {
                "equilibrium" | "explicit" => self.init_mode = v.to_string(),
                _ => return Err(mismatch(key, "`equilibrium` or `explicit`", v)),
            },
            "init.states" => self.init_states = Some(states(key, v)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn resolve(self) -> Result<SimConfig<f64>, ConfigError> {
        let mut cfg = self.cfg;
        let inv = |m: String| ConfigError::InvariantViolation(m);
        cfg.chart.mu_desired = cfg.controller.tau_star;
        let [c00, c01, c10, c11] = self.prior_cov;
        cfg.prior = GaussianBelief {
            mean: [
                self.mean_s0.unwrap_or(cfg.controller.s0),
                self.mean_tau.unwrap_or(cfg.controller.tau_star),
            ],
            cov: [[c00, c01], [c10, c11]],
        };
        cfg.lead.source = match self.lead_source.as_str() {
            "synth" => {
                if self.n_cycles == 0
                    || !(self.v_low < self.v_high)
                    || !(self.a_mag > 0.0)
                    || self.v_low < 0.0
                {
                    return Err(inv(format!(
                        "lead: need 0 <= v_low < v_high, a_mag > 0 and n_cycles >= 1 (got {}..{}, {}, {})",
                        self.v_low, self.v_high, self.a_mag, self.n_cycles
                    )));
                }
                cfg.lead.v0 = self.v0.unwrap_or(self.v_low);
                cfg.lead.x0 = self.x0.unwrap_or(0.0);
                LeadSource::Synth {
                    v_low: self.v_low,
                    v_high: self.v_high,
                    a_mag: self.a_mag,
                    n_cycles: self.n_cycles,
                }
            }
            _ => {
                let path = self
                    .lead_path
                    .ok_or_else(|| inv("lead.path is required when lead.source = csv".into()))?;
                match (self.v0, self.x0) {
                    (Some(v0), Some(x0)) => {
                        cfg.lead.v0 = v0;
                        cfg.lead.x0 = x0;
                    }
                    _ => {
                        return Err(inv(
                            "lead.v0 and lead.x0 are required when lead.source = csv".into(),
                        ))
                    }
                }
                LeadSource::Csv { path }
            }
        };
        cfg.initial_condition =
            match self.init_mode.as_str() {
                "equilibrium" => InitialCondition::Equilibrium,
                _ => InitialCondition::Explicit(self.init_states.ok_or_else(|| {
                    inv("init.states is required when init.mode = explicit".into())
                })?),
            };
        cfg.validate().map_err(|e| match e {
            crate::sim::SimError::InvalidConfig(m) => inv(m),
            other => inv(other.to_string()),
        })?;
        Ok(cfg)
    }
}

/// Builds a configuration from file text plus overrides (`KEY=VALUE`):
/// overrides beat file values, file values beat defaults.
pub fn config_from_str(
    text: &str,
    overrides: &[(String, String)],
) -> Result<SimConfig<f64>, ConfigError> {
    let mut entries = parse_entries(text)?;
    for (k, v) in overrides {
        entries.insert(k.clone(), v.clone());
    }
    let mut draft = Draft::default();
    for (k, v) in &entries {
        draft.set(k, v)?;
    }
    draft.resolve()
}

/// Reads `path` (if any) and applies `overrides`.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<SimConfig<f64>, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    config_from_str(&text, overrides)
}

fn list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical form: every key in [`KEYS`] order with resolved values.
/// Numbers use shortest round-trip formatting, so `load(dump(c)) == c`.
pub fn dump_config(cfg: &SimConfig<f64>) -> Result<String, ConfigError> {
    let mut m: BTreeMap<&str, String> = BTreeMap::new();
    let c = &cfg.controller;
    m.insert("chart.l", cfg.chart.l.to_string());
    m.insert("chart.sigma_desired", cfg.chart.sigma_desired.to_string());
    m.insert("controller.accel_gain", c.accel_gain.to_string());
    m.insert("controller.k", list(&c.k));
    m.insert("controller.kf", c.kf.to_string());
    m.insert("controller.lag", c.lag.to_string());
    m.insert("controller.s0", c.s0.to_string());
    m.insert("controller.tau_star", c.tau_star.to_string());
    m.insert("controller.theta", c.theta.to_string());
    m.insert("controller.u_max", c.u_max.to_string());
    m.insert("controller.u_min", c.u_min.to_string());
    match &cfg.initial_condition {
        InitialCondition::Equilibrium => {
            m.insert("init.mode", "equilibrium".into());
        }
        InitialCondition::Explicit(states) => {
            m.insert("init.mode", "explicit".into());
            let s = states
                .iter()
                .map(|s| list(&[s.x, s.v, s.a]))
                .collect::<Vec<_>>()
                .join("; ");
            m.insert("init.states", s);
        }
    }
    match &cfg.lead.source {
        LeadSource::Synth {
            v_low,
            v_high,
            a_mag,
            n_cycles,
        } => {
            m.insert("lead.source", "synth".into());
            m.insert("lead.v_low", v_low.to_string());
            m.insert("lead.v_high", v_high.to_string());
            m.insert("lead.a_mag", a_mag.to_string());
            m.insert("lead.n_cycles", n_cycles.to_string());
        }
        LeadSource::Csv { path } => {
            m.insert("lead.source", "csv".into());
            m.insert("lead.path", format!("\"{}\"", path.display()));
        }
        LeadSource::Profile(_) => {
            return Err(ConfigError::InvariantViolation(
                "an in-memory lead profile has no file representation".into(),
            ))
        }
    }
    m.insert("lead.v0", cfg.lead.v0.to_string());
    m.insert("lead.x0", cfg.lead.x0.to_string());
    m.insert("noise.enabled", cfg.noise_enabled.to_string());
    m.insert("noise.var", cfg.noise_var.to_string());
    let p = &cfg.prior;
    m.insert(
        "prior.cov",
        list(&[p.cov[0][0], p.cov[0][1], p.cov[1][0], p.cov[1][1]]),
    );
    m.insert("prior.mean_s0", p.mean[0].to_string());
    m.insert("prior.mean_tau", p.mean[1].to_string());
    m.insert("sim.dt", cfg.dt.to_string());
    m.insert("sim.duration", cfg.duration.to_string());
    m.insert("sim.n_followers", cfg.n_followers.to_string());
    m.insert("sim.rng_seed", cfg.rng_seed.to_string());
    m.insert("sim.window_len", cfg.window_len.to_string());
    m.insert("trigger.enabled", cfg.trigger_enabled.to_string());
    m.insert("trigger.k_violations", cfg.trigger.k_violations.to_string());
    m.insert("trigger.max_retunes", cfg.max_retunes.to_string());
    m.insert("trigger.retune_target", cfg.retune_target.to_string());
    m.insert(
        "trigger.scope",
        match cfg.retune_scope {
            RetuneScope::Vehicle => "vehicle",
            RetuneScope::Platoon => "platoon",
        }
        .into(),
    );
    m.insert("trigger.window", cfg.trigger.window.to_string());

    let mut out = String::new();
    for (k, v) in m {
        debug_assert!(KEYS.contains(&k), "{k} missing from KEYS");
        writeln!(out, "{k} = {v}").expect("string write");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::compute_limits;

    fn ov(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = config_from_str("", &[]).unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.controller.lag, 0.45);
        assert_eq!(cfg.controller.accel_gain, 1.0);
        assert_eq!(cfg.duration, 250.0);
        assert_eq!(cfg.dt, 0.1);
        assert_eq!(cfg.controller.tau_star, 1.6);
        assert_eq!(cfg.controller.s0, 5.0);
        assert_eq!(cfg.prior.cov, [[1e-4, -1e-5], [-1e-5, 0.125]]);
        assert_eq!(cfg.noise_var, 0.01);
    }

    #[test]
    fn tau_override_moves_limits() {
        let cfg = config_from_str("", &[ov("controller.tau_star", "1.0")]).unwrap();
        let l = compute_limits(&cfg.chart);
        assert_eq!((l.lcl, l.cl, l.ucl), (0.75, 1.0, 1.25));
        assert_eq!(cfg.prior.mean[1], 1.0);
    }

    #[test]
    fn zero_dt_is_invariant_violation() {
        assert!(matches!(
            config_from_str("sim.dt = 0", &[]),
            Err(ConfigError::InvariantViolation(_))
        ));
    }

    #[test]
    fn errors_are_typed() {
        assert!(matches!(
            config_from_str("sim.bogus = 1", &[]),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            config_from_str("sim.dt = fast", &[]),
            Err(ConfigError::TypeMismatch { .. })
        ));
        assert!(matches!(
            config_from_str("controller.k = 1, 2", &[]),
            Err(ConfigError::TypeMismatch { .. })
        ));
        assert!(matches!(
            config_from_str("just words", &[]),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            config_from_str("sim.dt = 0.1\nsim.dt = 0.2", &[]),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            config_from_str("lead.source = csv\nlead.path = a.csv", &[]),
            Err(ConfigError::InvariantViolation(_))
        ));
    }

    #[test]
    fn unstable_gains_rejected() {
        let err = config_from_str("controller.k = 0, 0, 0", &[]).unwrap_err();
        assert!(err.to_string().contains("not stable"), "{err}");
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let text = "sim.duration = 100\nsim.rng_seed = 7 # comment\n";
        let cfg = config_from_str(text, &[ov("sim.rng_seed", "9")]).unwrap();
        assert_eq!(cfg.duration, 100.0);
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.window_len, 50);
    }

    #[test]
    fn quoted_path_and_explicit_states() {
        let text = "lead.source = csv\nlead.path = \"dir with space/p#1.csv\"\nlead.v0 = 20\nlead.x0 = 0\n\
                    sim.n_followers = 2\ninit.mode = explicit\ninit.states = -37,20,0; -74, 20, 0.5\n";
        let cfg = config_from_str(text, &[]).unwrap();
        assert_eq!(
            cfg.lead.source,
            LeadSource::Csv {
                path: "dir with space/p#1.csv".into()
            }
        );
        match &cfg.initial_condition {
            InitialCondition::Explicit(s) => assert_eq!(
                s[1],
                VehicleState {
                    x: -74.0,
                    v: 20.0,
                    a: 0.5,
                    u: 0.0
                }
            ),
            _ => panic!("expected explicit states"),
        }
    }

    #[test]
    fn dump_is_canonical_and_round_trips() {
        let canonical = dump_config(&SimConfig::default()).unwrap();
        let keys: Vec<&str> = canonical
            .lines()
            .map(|l| l.split(" = ").next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        // reorder the lines: loading and dumping restores the canonical form
        let shuffled: String = canonical.lines().rev().map(|l| format!("{l}\n")).collect();
        assert_eq!(
            dump_config(&config_from_str(&shuffled, &[]).unwrap()).unwrap(),
            canonical
        );

        let text = "controller.tau_star = 1.2\nsim.dt = 0.05\ntrigger.scope = platoon\n";
        let once = config_from_str(text, &[]).unwrap();
        let twice = config_from_str(&dump_config(&once).unwrap(), &[]).unwrap();
        assert_eq!(once, twice);
    }
}
