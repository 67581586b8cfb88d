//! Run configuration: flat `section.key = value` pairs with defaults,
//! validation and a canonical echo used to make every run self-describing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OperatorKind {
    Classic,
    New,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::Classic => "classic",
            OperatorKind::New => "new",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InitialKind {
    Tent,
    Zero,
    RandomLipschitz,
}

impl InitialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitialKind::Tent => "tent",
            InitialKind::Zero => "zero",
            InitialKind::RandomLipschitz => "random_lipschitz",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub system_name: String,
    pub params: BTreeMap<String, f64>,
    pub grid_n: usize,
    pub steps_per_period: usize,
    pub substeps: usize,
    pub v_max: f64,
    pub winding: i64,
    pub operator: OperatorKind,
    pub n_max: usize,
    /// Number of equally spaced τ offsets evaluated; 0 means all S.
    pub tau_slices: usize,
    /// Tail-window start for barriers and the iteration limit; 0 = auto
    /// (the node count M).
    pub barrier_n_min: usize,
    /// Tail-window end; 0 = auto (n_min + 64).
    pub barrier_n_max: usize,
    pub tol_discretization: f64,
    pub tol_fixed_point: f64,
    pub aubry_tol: f64,
    pub seed: u64,
    pub initial: InitialKind,
    pub initial_center: f64,
    pub initial_height: f64,
    /// Probe point; when set, errors are measured at the node nearest this
    /// point (at τ = 0) instead of in the sup norm over slices.
    pub probe: Option<Vec<f64>>,
    /// Restrict the fitted error series to even horizons.
    pub even_only: bool,
    pub checks_samples: usize,
    pub checks_negative_control: bool,
    pub checks_aubry_radius: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system_name: "forced_pendulum_1d".into(),
            params: BTreeMap::new(),
            grid_n: 64,
            steps_per_period: 16,
            substeps: 8,
            v_max: 3.0,
            winding: 1,
            operator: OperatorKind::Classic,
            n_max: 48,
            tau_slices: 0,
            barrier_n_min: 0,
            barrier_n_max: 0,
            tol_discretization: 5e-3,
            tol_fixed_point: 1e-12,
            aubry_tol: 1e-6,
            seed: 42,
            initial: InitialKind::Tent,
            initial_center: 0.5,
            initial_height: 0.3,
            probe: None,
            even_only: false,
            checks_samples: 10_000,
            checks_negative_control: false,
            checks_aubry_radius: 0.1,
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{raw}'")))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key '{key}': expected a non-negative integer, got '{raw}'")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "key '{key}': expected true/false, got '{raw}'"
        ))),
    }
}

impl RunConfig {
    /// Apply one flat `section.key = value` assignment. Unknown keys are
    /// rejected so configs stay archivable.
    pub fn set_key(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        match key {
            "system.name" => self.system_name = raw.to_string(),
            "system.a" | "system.eps" | "system.c" | "system.shift" => {
                let short = key.trim_start_matches("system.");
                self.params.insert(short.to_string(), parse_f64(key, raw)?);
            }
            "grid.n_per_axis" => self.grid_n = parse_usize(key, raw)?,
            "time.steps_per_period" => self.steps_per_period = parse_usize(key, raw)?,
            "time.substeps" => self.substeps = parse_usize(key, raw)?,
            "window.v_max" => self.v_max = parse_f64(key, raw)?,
            "window.winding" => {
                self.winding = raw.parse().map_err(|_| {
                    Error::Config(format!("key '{key}': expected an integer, got '{raw}'"))
                })?
            }
            "operator.kind" => {
                self.operator = match raw {
                    "classic" => OperatorKind::Classic,
                    "new" => OperatorKind::New,
                    _ => {
                        return Err(Error::Config(format!(
                            "key '{key}': expected classic|new, got '{raw}'"
                        )))
                    }
                }
            }
            "operator.n_max" => self.n_max = parse_usize(key, raw)?,
            "operator.tau_slices" => self.tau_slices = parse_usize(key, raw)?,
            "barrier.n_min" => self.barrier_n_min = parse_usize(key, raw)?,
            "barrier.n_max" => self.barrier_n_max = parse_usize(key, raw)?,
            "tolerances.discretization" => self.tol_discretization = parse_f64(key, raw)?,
            "tolerances.fixed_point" => self.tol_fixed_point = parse_f64(key, raw)?,
            "tolerances.aubry" => self.aubry_tol = parse_f64(key, raw)?,
            "seed" => {
                self.seed = raw.parse().map_err(|_| {
                    Error::Config(format!("key '{key}': expected an integer, got '{raw}'"))
                })?
            }
            "initial.kind" => {
                self.initial = match raw {
                    "tent" => InitialKind::Tent,
                    "zero" => InitialKind::Zero,
                    "random_lipschitz" => InitialKind::RandomLipschitz,
                    _ => {
                        return Err(Error::Config(format!(
                            "key '{key}': expected tent|zero|random_lipschitz, got '{raw}'"
                        )))
                    }
                }
            }
            "initial.center" => self.initial_center = parse_f64(key, raw)?,
            "initial.height" => self.initial_height = parse_f64(key, raw)?,
            "rates.probe" => {
                let coords: Result<Vec<f64>> = raw
                    .split(',')
                    .map(|c| parse_f64(key, c.trim()))
                    .collect();
                self.probe = Some(coords?);
            }
            "rates.even_only" => self.even_only = parse_bool(key, raw)?,
            "checks.samples" => self.checks_samples = parse_usize(key, raw)?,
            "checks.negative_control" => self.checks_negative_control = parse_bool(key, raw)?,
            "checks.aubry_radius" => self.checks_aubry_radius = parse_f64(key, raw)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 8 {
            return Err(Error::Config(format!(
                "grid.n_per_axis must be >= 8, got {}",
                self.grid_n
            )));
        }
        if self.steps_per_period < 4 {
            return Err(Error::Config(format!(
                "time.steps_per_period must be >= 4, got {}",
                self.steps_per_period
            )));
        }
        if self.substeps == 0 {
            return Err(Error::Config("time.substeps must be >= 1".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Config("window.v_max must be > 0".into()));
        }
        if self.winding < 0 {
            return Err(Error::Config("window.winding must be >= 0".into()));
        }
        if !(self.initial_height > 0.0 && self.initial_height < 0.5) {
            return Err(Error::Config(format!(
                "initial.height must lie in (0, 1/2), got {}",
                self.initial_height
            )));
        }
        if !(self.tol_discretization > 0.0) || !(self.tol_fixed_point > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.aubry_tol < 0.0 {
            return Err(Error::Config("tolerances.aubry must be >= 0".into()));
        }
        if self.tau_slices > self.steps_per_period {
            return Err(Error::Config(format!(
                "operator.tau_slices must not exceed steps_per_period ({})",
                self.steps_per_period
            )));
        }
        if self.barrier_n_max != 0 && self.barrier_n_max < self.barrier_n_min {
            return Err(Error::Config(
                "barrier.n_max must be >= barrier.n_min".into(),
            ));
        }
        Ok(())
    }

    /// Tail window [n_min, n_max] for barriers / limits, with the documented
    /// defaults (burn-in = node count, probe length 64) filled in.
    pub fn barrier_window(&self, node_count: usize) -> (usize, usize) {
        let n_min = if self.barrier_n_min == 0 {
            node_count
        } else {
            self.barrier_n_min
        };
        let n_max = if self.barrier_n_max == 0 {
            n_min + 64
        } else {
            self.barrier_n_max
        };
        (n_min, n_max)
    }

    /// τ offsets the operators are evaluated at. A probe measurement pins
    /// the single slice τ = 0.
    pub fn tau_indices(&self) -> Vec<usize> {
        let s = self.steps_per_period;
        if self.probe.is_some() {
            return vec![0];
        }
        let count = if self.tau_slices == 0 {
            s
        } else {
            self.tau_slices
        };
        (0..count).map(|i| i * s / count).collect()
    }

    /// Canonical flat listing (sorted by key) used for `resolved.cfg`.
    pub fn flat_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![
            ("system.name".into(), self.system_name.clone()),
            ("grid.n_per_axis".into(), self.grid_n.to_string()),
            (
                "time.steps_per_period".into(),
                self.steps_per_period.to_string(),
            ),
            ("time.substeps".into(), self.substeps.to_string()),
            ("window.v_max".into(), format!("{}", self.v_max)),
            ("window.winding".into(), self.winding.to_string()),
            ("operator.kind".into(), self.operator.as_str().into()),
            ("operator.n_max".into(), self.n_max.to_string()),
            ("operator.tau_slices".into(), self.tau_slices.to_string()),
            ("barrier.n_min".into(), self.barrier_n_min.to_string()),
            ("barrier.n_max".into(), self.barrier_n_max.to_string()),
            (
                "tolerances.discretization".into(),
                format!("{}", self.tol_discretization),
            ),
            (
                "tolerances.fixed_point".into(),
                format!("{}", self.tol_fixed_point),
            ),
            ("tolerances.aubry".into(), format!("{}", self.aubry_tol)),
            ("seed".into(), self.seed.to_string()),
            ("initial.kind".into(), self.initial.as_str().into()),
            ("initial.center".into(), format!("{}", self.initial_center)),
            ("initial.height".into(), format!("{}", self.initial_height)),
            ("rates.even_only".into(), self.even_only.to_string()),
            ("checks.samples".into(), self.checks_samples.to_string()),
            (
                "checks.negative_control".into(),
                self.checks_negative_control.to_string(),
            ),
            (
                "checks.aubry_radius".into(),
                format!("{}", self.checks_aubry_radius),
            ),
        ];
        for (k, v) in &self.params {
            out.push((format!("system.{k}"), format!("{v}")));
        }
        if let Some(p) = &self.probe {
            let coords: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
            out.push(("rates.probe".into(), coords.join(",")));
        }
        out.sort();
        out
    }
}

/// Parse a flat config text: `section.key = value` lines, `#` comments.
pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    apply_config_text(&mut cfg, text)?;
    Ok(cfg)
}

pub fn apply_config_text(cfg: &mut RunConfig, text: &str) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        cfg.set_key(key.trim(), value.trim())?;
    }
    Ok(())
}

pub fn render_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    for (k, v) in cfg.flat_pairs() {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.set_key("system.name", "example_4_1").unwrap();
        cfg.set_key("system.c", "0.5").unwrap();
        cfg.set_key("grid.n_per_axis", "48").unwrap();
        cfg.set_key("operator.kind", "new").unwrap();
        cfg.set_key("rates.probe", "0, 0.5").unwrap();
        cfg.set_key("rates.even_only", "true").unwrap();
        let echoed = render_config(&cfg);
        let back = parse_config_text(&echoed).unwrap();
        assert_eq!(render_config(&back), echoed);
        assert_eq!(back.probe, Some(vec![0.0, 0.5]));
        assert_eq!(back.operator, OperatorKind::New);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.set_key("grid.m_per_axis", "48").unwrap_err();
        assert!(err.to_string().contains("m_per_axis"));
        assert!(parse_config_text("nonsense line").is_err());
    }

    #[test]
    fn validation_ranges() {
        let mut cfg = RunConfig::default();
        cfg.grid_n = 4;
        assert!(cfg.validate().is_err());
        cfg.grid_n = 64;
        cfg.initial_height = 0.5;
        assert!(cfg.validate().is_err());
        cfg.initial_height = 0.3;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn tau_indices_spread() {
        let mut cfg = RunConfig::default();
        cfg.steps_per_period = 16;
        assert_eq!(cfg.tau_indices().len(), 16);
        cfg.tau_slices = 4;
        assert_eq!(cfg.tau_indices(), vec![0, 4, 8, 12]);
        cfg.probe = Some(vec![0.0]);
        assert_eq!(cfg.tau_indices(), vec![0]);
    }
}
