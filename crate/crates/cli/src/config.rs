//! Run configuration: a flat TOML file whose keys mirror the command-line
//! flags. Flags override file values; everything is validated up front and
//! reported in one error.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mfiv::io::{CsvSchema, MissingPolicy};
use mfiv::solver::log_spaced;
use mfiv::{DgpConfig, InstrumentKind, InstrumentSpec, McConfig, SlopeFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SlopeArg {
    NegTenExp,
    TenLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum InstrumentArg {
    Logistic,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MissingArg {
    Reject,
    DropRow,
}

/// Every key is optional; unset keys fall back to per-subcommand defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory for output files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    /// Input CSV for fit, select-alpha and diagnose.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Number of low-frequency observations T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,

    /// Simulation grid resolution on [0, 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_sim: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeArg>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,

    /// Drop the Brownian noise and the structural error from the design.
    #[arg(long, action = clap::ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noiseless: Option<bool>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_grid_points: Option<usize>,

    /// Single regularization parameter.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// Comma-separated regularization parameters for mc.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,

    /// Alpha for the band output of mc.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands_alpha: Option<f64>,

    /// Lower end of the log-spaced selection grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_count: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentArg>,

    /// Standardize the instrument before evaluating Ψ.
    #[arg(long, action = clap::ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize_w: Option<bool>,

    /// Comma-separated coarse resolutions for infill.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<usize>>,

    /// Reference resolution for infill (default 2·max(m_values)).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_m: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date_col: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_col: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_col: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_prefix: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_start: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_end: Option<f64>,

    #[arg(long, action = clap::ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_y: Option<bool>,

    #[arg(long, action = clap::ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_z: Option<bool>,

    #[arg(long, action = clap::ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_w: Option<bool>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing: Option<MissingArg>,

    /// Largest autocovariance lag (default ⌊T^{1/3}⌋).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,

    /// Number of singular values to report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,

    /// Also write the estimated kernel as (u, s, kernel) rows to this path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_kernel: Option<PathBuf>,
}

/// Aggregated validation failure; every entry is one problem.
#[derive(Debug, thiserror::Error)]
#[error("{}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

pub const DEFAULT_REPLICATIONS: usize = 500;
pub const DEFAULT_INFILL_ALPHA: f64 = 1e-5;

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        toml::from_str(&text).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))
    }

    /// `self` with every key set in `flags` replaced.
    pub fn overlay(self, flags: &RunConfig) -> Result<Self, ConfigError> {
        let to_table = |c: &RunConfig| toml::Table::try_from(c).map_err(|e| ConfigError(vec![e.to_string()]));
        let mut base = to_table(&self)?;
        base.extend(to_table(flags)?);
        base.try_into().map_err(|e: toml::de::Error| ConfigError(vec![e.to_string()]))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn instrument(&self, standardize_default: bool) -> InstrumentSpec {
        InstrumentSpec {
            kind: match self.instrument {
                Some(InstrumentArg::Indicator) => InstrumentKind::Indicator,
                _ => InstrumentKind::LogisticCdf,
            },
            standardize_w: self.standardize_w.unwrap_or(standardize_default),
        }
    }

    pub fn dgp(&self) -> DgpConfig {
        let d = DgpConfig::default();
        DgpConfig {
            sample_size: self.sample_size.unwrap_or(d.sample_size),
            m_sim: self.m_sim.unwrap_or(d.m_sim),
            sigma: self.sigma.unwrap_or(d.sigma),
            slope: match self.slope {
                Some(SlopeArg::TenLinear) => SlopeFunction::TenLinear,
                _ => SlopeFunction::NegTenExp,
            },
            seed: self.seed.unwrap_or(d.seed),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            noiseless: self.noiseless.unwrap_or(false),
            ..d
        }
    }

    pub fn mc(&self, alphas: Vec<f64>) -> McConfig {
        let d = McConfig::default();
        McConfig {
            dgp: self.dgp(),
            alphas,
            replications: self.replications.unwrap_or(DEFAULT_REPLICATIONS),
            metric_grid_points: self.metric_grid_points.unwrap_or(d.metric_grid_points),
            master_seed: self.seed.unwrap_or(d.master_seed),
            instrument: self.instrument(false),
        }
    }

    pub fn mc_alphas(&self) -> Vec<f64> {
        self.alphas
            .clone()
            .or_else(|| self.alpha.map(|a| vec![a]))
            .unwrap_or_else(|| McConfig::default().alphas)
    }

    pub fn schema(&self) -> CsvSchema {
        let d = CsvSchema::default();
        CsvSchema {
            date_col: self.date_col.clone().unwrap_or(d.date_col),
            y_col: self.y_col.clone().unwrap_or(d.y_col),
            w_col: self.w_col.clone().unwrap_or(d.w_col),
            z_prefix: self.z_prefix.clone().unwrap_or(d.z_prefix),
            grid_start: self.grid_start.unwrap_or(d.grid_start),
            grid_end: self.grid_end.unwrap_or(d.grid_end),
            log_y: self.log_y.unwrap_or(d.log_y),
            log_z: self.log_z.unwrap_or(d.log_z),
            log_w: self.log_w.unwrap_or(d.log_w),
            missing: match self.missing {
                Some(MissingArg::DropRow) => MissingPolicy::DropRow,
                _ => MissingPolicy::Reject,
            },
        }
    }

    /// The explicit selection grid, or the default 50 points on [1e-8, 1e-1].
    pub fn alpha_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let lo = self.alpha_min.unwrap_or(1e-8);
        let hi = self.alpha_max.unwrap_or(1e-1);
        let n = self.alpha_count.unwrap_or(50);
        log_spaced(lo, hi, n).map_err(|e| ConfigError(vec![e.to_string()]))
    }

    /// Checks value ranges that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut p = Vec::new();
        let positive = |name: &str, v: Option<f64>, p: &mut Vec<String>| {
            if let Some(v) = v {
                if v.is_nan() || v <= 0.0 || v.is_infinite() {
                    p.push(format!("{name} must be positive and finite, got {v}"));
                }
            }
        };
        positive("sigma", self.sigma, &mut p);
        positive("alpha", self.alpha, &mut p);
        positive("bands_alpha", self.bands_alpha, &mut p);
        positive("alpha_min", self.alpha_min, &mut p);
        positive("alpha_max", self.alpha_max, &mut p);
        for a in self.alphas.iter().flatten() {
            positive("alphas entry", Some(*a), &mut p);
        }
        if let (Some(lo), Some(hi)) = (self.alpha_min, self.alpha_max) {
            if lo >= hi {
                p.push(format!("alpha_min ({lo}) must be below alpha_max ({hi})"));
            }
        }
        if matches!(self.alpha_count, Some(n) if n < 2) {
            p.push("alpha_count must be >= 2".into());
        }
        if matches!(self.sample_size, Some(0)) {
            p.push("sample_size must be >= 1".into());
        }
        if matches!(self.m_sim, Some(0)) {
            p.push("m_sim must be >= 1".into());
        }
        if matches!(self.replications, Some(r) if r < 2) {
            p.push("replications must be >= 2".into());
        }
        if matches!(self.metric_grid_points, Some(0)) {
            p.push("metric_grid_points must be >= 1".into());
        }
        if matches!(self.top_k, Some(0)) {
            p.push("top_k must be >= 1".into());
        }
        if let (Some(a), Some(b)) = (self.grid_start, self.grid_end) {
            if a >= b {
                p.push(format!("grid_start ({a}) must be below grid_end ({b})"));
            }
        }
        if let Some(ms) = &self.m_values {
            if ms.is_empty() || ms.contains(&0) {
                p.push("m_values must be nonempty and positive".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_parse_and_flags_win() {
        let file: RunConfig =
            toml::from_str("sample_size = 100\nsigma = 0.25\nalphas = [1e-5, 1e-6]\nslope = \"ten_linear\"\nmissing = \"drop_row\"").unwrap();
        let flags = RunConfig {
            sigma: Some(0.5),
            ..RunConfig::default()
        };
        let merged = file.overlay(&flags).unwrap();
        assert_eq!(merged.sample_size, Some(100));
        assert_eq!(merged.sigma, Some(0.5));
        assert_eq!(merged.alphas, Some(vec![1e-5, 1e-6]));
        assert_eq!(merged.slope, Some(SlopeArg::TenLinear));
        assert_eq!(merged.schema().missing, MissingPolicy::DropRow);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<RunConfig>("sample_sise = 100").is_err());
    }

    #[test]
    fn validation_aggregates() {
        let c = RunConfig {
            sigma: Some(-1.0),
            replications: Some(1),
            alpha_min: Some(1.0),
            alpha_max: Some(0.1),
            ..RunConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().0.len(), 3);
    }

    #[test]
    fn default_selection_grid() {
        let g = RunConfig::default().alpha_grid().unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 1e-8);
        assert_eq!(g[49], 1e-1);
    }
}
