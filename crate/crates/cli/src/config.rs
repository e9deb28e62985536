//! Run configuration: a flat `key = value` file (TOML syntax, no tables).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mixtop::model::Direction;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Qwz,
    Atomic,
    Tabulated,
}

/// Every recognized key. Temperatures are in hopping units (`k_B = 1`)
/// unless the key ends in `_gap`, in which case they are multiples of the
/// single-particle gap around `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub alpha: f64,
    pub gamma: f64,
    pub mass: f64,
    /// Constant `d` vector of the atomic-limit model.
    pub atomic_d: [f64; 3],
    /// Bloch Hamiltonian grid for `model = "tabulated"`.
    pub h_file: Option<PathBuf>,
    /// Fictitious Hamiltonian grid describing the state directly.
    pub hfict_file: Option<PathBuf>,
    pub gap_margin: Option<f64>,

    pub mu: f64,
    #[serde(with = "mixtop::io::extended_float::option")]
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
    pub temperature_gap: Option<f64>,
    pub t_gap_list: Option<Vec<f64>>,
    pub t_gap_min: Option<f64>,
    pub t_gap_max: Option<f64>,
    pub t_gap_count: Option<usize>,

    pub nx: usize,
    pub ny: usize,
    pub n_cells: usize,
    pub n_list: Option<Vec<usize>>,
    pub n_transverse: usize,
    pub max_transverse: usize,
    pub directions: Vec<Direction>,
    pub transverse_k: Option<f64>,

    pub m_path: usize,
    pub m_path_max: usize,
    pub path_tolerance: f64,

    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Qwz,
            alpha: 1.0,
            gamma: 3.0,
            mass: 1.0,
            atomic_d: [0.0, 0.0, 1.0],
            h_file: None,
            hfict_file: None,
            gap_margin: None,
            mu: 0.0,
            beta: None,
            temperature: None,
            temperature_gap: None,
            t_gap_list: None,
            t_gap_min: None,
            t_gap_max: None,
            t_gap_count: None,
            nx: 32,
            ny: 32,
            n_cells: 10,
            n_list: None,
            n_transverse: 64,
            max_transverse: mixtop::egp::MAX_TRANSVERSE,
            directions: vec![Direction::X, Direction::Y],
            transverse_k: None,
            m_path: 512,
            m_path_max: 8192,
            path_tolerance: 1e-4,
            out: None,
            format: None,
            jobs: None,
        }
    }
}

/// A temperature request before the gap is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureSpec {
    Beta(f64),
    Absolute(f64),
    GapUnits(f64),
}

impl TemperatureSpec {
    /// `beta`, given the gap.
    pub fn beta(self, gap: f64) -> f64 {
        match self {
            TemperatureSpec::Beta(b) => b,
            TemperatureSpec::Absolute(t) => 1.0 / t,
            TemperatureSpec::GapUnits(t) => 1.0 / (t * gap),
        }
    }

    pub fn needs_gap(self) -> bool {
        matches!(self, TemperatureSpec::GapUnits(_))
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        err(format!("key `{key}`: expected a finite positive number, got {v}"))
    }
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        err(format!("key `{key}`: expected a finite number, got {v}"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative data paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.h_file, &mut cfg.hfict_file, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        finite("alpha", self.alpha)?;
        finite("gamma", self.gamma)?;
        finite("mass", self.mass)?;
        for v in self.atomic_d {
            finite("atomic_d", v)?;
        }
        finite("mu", self.mu)?;
        if let Some(m) = self.gap_margin {
            if !(m.is_finite() && (0.0..0.5).contains(&m)) {
                return err(format!("key `gap_margin`: expected a number in [0, 0.5), got {m}"));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || b.is_nan() {
                return err(format!("key `beta`: expected a positive number or inf, got {b}"));
            }
        }
        if let Some(t) = self.temperature {
            positive("temperature", t)?;
        }
        if let Some(t) = self.temperature_gap {
            positive("temperature_gap", t)?;
        }
        if let Some(list) = &self.t_gap_list {
            if list.is_empty() {
                return err("key `t_gap_list`: must not be empty");
            }
            for &t in list {
                positive("t_gap_list", t)?;
            }
        }
        let range = [self.t_gap_min.is_some(), self.t_gap_max.is_some(), self.t_gap_count.is_some()];
        if range.iter().any(|&x| x) && !range.iter().all(|&x| x) {
            return err("keys `t_gap_min`, `t_gap_max`, `t_gap_count` must be given together");
        }
        if let (Some(lo), Some(hi), Some(n)) = (self.t_gap_min, self.t_gap_max, self.t_gap_count) {
            positive("t_gap_min", lo)?;
            positive("t_gap_max", hi)?;
            if hi < lo {
                return err("key `t_gap_max`: must not be below `t_gap_min`");
            }
            if n < 1 {
                return err("key `t_gap_count`: must be at least 1");
            }
        }
        let given = [
            self.beta.is_some(),
            self.temperature.is_some(),
            self.temperature_gap.is_some(),
            self.t_gap_list.is_some(),
            self.t_gap_min.is_some(),
        ]
        .iter()
        .filter(|&&x| x)
        .count();
        if given > 1 {
            return err("give only one of `beta`, `temperature`, `temperature_gap`, `t_gap_list`, `t_gap_min/max/count`");
        }
        if self.hfict_file.is_some() && given > 0 {
            return err("key `hfict_file` fixes the state; temperature keys cannot be combined with it");
        }
        if self.model == ModelKind::Tabulated && self.h_file.is_none() {
            return err("key `h_file` is required for model = \"tabulated\"");
        }
        for (key, v) in [("nx", self.nx), ("ny", self.ny), ("n_cells", self.n_cells), ("n_transverse", self.n_transverse)] {
            if v < 2 {
                return err(format!("key `{key}`: must be at least 2, got {v}"));
            }
        }
        if let Some(list) = &self.n_list {
            if list.is_empty() || list.iter().any(|&n| n < 2) {
                return err("key `n_list`: needs chain lengths of at least 2");
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return err("key `n_list`: must be strictly ascending");
            }
        }
        if self.max_transverse < self.n_transverse {
            return err("key `max_transverse`: must be at least `n_transverse`");
        }
        if self.directions.is_empty() {
            return err("key `directions`: must not be empty");
        }
        if let Some(k) = self.transverse_k {
            finite("transverse_k", k)?;
        }
        if self.m_path < 2 || self.m_path_max < self.m_path {
            return err("keys `m_path`, `m_path_max`: need 2 <= m_path <= m_path_max");
        }
        positive("path_tolerance", self.path_tolerance)?;
        if let Some(j) = self.jobs {
            if j == 0 {
                return err("key `jobs`: must be at least 1");
            }
        }
        Ok(())
    }

    /// Chain lengths to run: `n_list` if given, else `n_cells`.
    pub fn chain_lengths(&self) -> Vec<usize> {
        self.n_list.clone().unwrap_or_else(|| vec![self.n_cells])
    }

    /// Requested temperatures, or `default` if none were configured.
    pub fn temperatures(&self, default: &[TemperatureSpec]) -> Vec<TemperatureSpec> {
        if let Some(b) = self.beta {
            vec![TemperatureSpec::Beta(b)]
        } else if let Some(t) = self.temperature {
            vec![TemperatureSpec::Absolute(t)]
        } else if let Some(t) = self.temperature_gap {
            vec![TemperatureSpec::GapUnits(t)]
        } else if let Some(list) = &self.t_gap_list {
            list.iter().map(|&t| TemperatureSpec::GapUnits(t)).collect()
        } else if let (Some(lo), Some(hi), Some(n)) = (self.t_gap_min, self.t_gap_max, self.t_gap_count) {
            log_grid(lo, hi, n).into_iter().map(TemperatureSpec::GapUnits).collect()
        } else {
            default.to_vec()
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse("alpha = 1.0\nbogus_key = 3\n").unwrap_err();
        assert!(e.0.contains("bogus_key"), "{e}");
    }

    #[test]
    fn nested_tables_are_rejected() {
        assert!(RunConfig::parse("[model]\nalpha = 1\n").is_err());
    }

    #[test]
    fn infinite_beta_is_accepted() {
        let c = RunConfig::parse("beta = inf\n").unwrap();
        assert_eq!(c.temperatures(&[]), vec![TemperatureSpec::Beta(f64::INFINITY)]);
    }

    #[test]
    fn validation_names_the_key() {
        for (text, key) in [
            ("temperature = -1.0", "temperature"),
            ("n_cells = 1", "n_cells"),
            ("n_list = [50, 10]", "n_list"),
            ("t_gap_min = 0.1", "t_gap_min"),
            ("beta = 1.0\ntemperature = 2.0", "beta"),
            ("model = \"tabulated\"", "h_file"),
        ] {
            let e = RunConfig::parse(text).unwrap_err();
            assert!(e.0.contains(key), "{text}: {e}");
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 100.0, 41);
        assert_eq!(g.len(), 41);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[40] - 100.0).abs() < 1e-10);
        assert!((g[20] - 1.0).abs() < 1e-12);
    }
}
