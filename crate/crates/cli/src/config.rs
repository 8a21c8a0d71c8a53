//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nonlocal_lwr::boundary::{StrategyKind, VariableShape};
use nonlocal_lwr::ngsim::{Aggregation, ColumnMap, ColumnRef, LoadOptions};
use nonlocal_lwr::{make_grid, Error, FundamentalDiagram, Grid, Kernel, KernelFamily, Model, Result};

fn default_model() -> String {
    "spacetime".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_model")]
    pub model: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub fd: FdConfig,
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub delay: DelayConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub io: IoConfig,
    pub sweep: Option<SweepConfig>,
    pub ngsim: Option<NgsimConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub family: String,
    pub v_f: f64,
    pub rho_c: Option<f64>,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            family: "greenshields".into(),
            v_f: 60.0,
            rho_c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    pub d_ft: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub strategy: String,
    pub variable_shape: String,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            strategy: "continuous".into(),
            variable_shape: "rescale".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Columns `x,rho`, one row per cell.
    pub initial_csv: Option<PathBuf>,
    /// Columns `t,rho`, one row per time step, at `x = b`.
    pub boundary_csv: Option<PathBuf>,
    /// Columns `t,rho` at `x = a`.
    pub left_csv: Option<PathBuf>,
    /// A density field CSV with its metadata sidecar.
    pub truth_csv: Option<PathBuf>,
    /// Output field name inside the output directory.
    pub out_csv: Option<PathBuf>,
    /// Jam density of the CSV values; inputs are divided by it.
    pub rho_m: f64,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            initial_csv: None,
            boundary_csv: None,
            left_csv: None,
            truth_csv: None,
            out_csv: None,
            rho_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default)]
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub strategies: Vec<String>,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
}

fn default_models() -> Vec<String> {
    vec!["spacetime".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NgsimConfig {
    pub path: Option<PathBuf>,
    pub lanes: Vec<i64>,
    /// veh/ft per lane.
    pub rho_m_physical: f64,
    pub frame_period: f64,
    pub t_start: f64,
    pub aggregation: Aggregation,
    pub smoothing: usize,
    pub columns: Option<ColumnMap>,
    /// Whitespace text release without a header.
    pub text_release: bool,
    pub filter_column: Option<String>,
    pub filter_value: Option<String>,
    /// Generate trajectories instead of reading `path`.
    pub synthetic: bool,
    pub seed: u64,
}

impl Default for NgsimConfig {
    fn default() -> Self {
        NgsimConfig {
            path: None,
            lanes: vec![1, 2, 3, 4, 5],
            rho_m_physical: 0.2,
            frame_period: 0.1,
            t_start: 0.0,
            aggregation: Aggregation::Count,
            smoothing: 0,
            columns: None,
            text_release: false,
            filter_column: None,
            filter_value: None,
            synthetic: false,
            seed: 0,
        }
    }
}

impl NgsimConfig {
    pub fn load_options(&self) -> LoadOptions {
        let columns = match (&self.columns, self.text_release) {
            (Some(c), _) => c.clone(),
            (None, true) => ColumnMap::us101_text(),
            (None, false) => ColumnMap::default(),
        };
        let filter = match (&self.filter_column, &self.filter_value) {
            (Some(c), Some(v)) => Some((ColumnRef::from(c.as_str()), v.clone())),
            _ => None,
        };
        LoadOptions {
            columns,
            frame_period: self.frame_period,
            filter,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))
    }

    /// Reads a config; relative paths inside it are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.io.initial_csv);
        fix(&mut cfg.io.boundary_csv);
        fix(&mut cfg.io.left_csv);
        fix(&mut cfg.io.truth_csv);
        if let Some(ng) = &mut cfg.ngsim {
            fix(&mut ng.path);
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        make_grid(g.a, g.b, g.duration, g.n, g.dt, 0, 0).map_err(config_class)
    }

    pub fn fd(&self) -> Result<FundamentalDiagram> {
        match self.fd.family.to_ascii_lowercase().as_str() {
            "greenshields" => FundamentalDiagram::greenshields(self.fd.v_f),
            "underwood" => {
                let rho_c = self
                    .fd
                    .rho_c
                    .ok_or_else(|| Error::Config("the underwood law needs fd.rho_c".into()))?;
                FundamentalDiagram::underwood(self.fd.v_f, rho_c)
            }
            other => Err(Error::Config(format!("unknown fundamental diagram `{other}`"))),
        }
        .map_err(config_class)
    }

    pub fn model(&self) -> Result<Model> {
        self.model.parse()
    }

    /// Kernel of the configured model, `None` for the classical model.
    pub fn kernel(&self) -> Result<Option<Kernel>> {
        if self.model()? == Model::Classical {
            return Ok(None);
        }
        let k = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::Config(format!("the {} model needs a [kernel] section", self.model)))?;
        let family: KernelFamily = k.family.parse().map_err(config_class)?;
        Kernel::new(family, k.d_ft).map(Some).map_err(config_class)
    }

    pub fn strategy(&self) -> Result<StrategyKind> {
        self.boundary.strategy.parse()
    }

    pub fn variable_shape(&self) -> Result<VariableShape> {
        self.boundary.variable_shape.parse()
    }
}

/// Invalid values in a config file are configuration errors.
pub fn config_class(e: Error) -> Error {
    match e {
        Error::Domain(m) | Error::Resolution(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
model = "spacetime"
[grid]
b = 2000.0
T = 60.0
n = 200
dt = 0.1
[kernel]
family = "shifted"
d_ft = 40.0
[delay]
gamma = 0.01
[boundary]
strategy = "known_thick"
"#;

    #[test]
    fn parses_sections() {
        let cfg = Config::from_toml(BASE).unwrap();
        assert_eq!(cfg.grid().unwrap().dx(), 10.0);
        assert_eq!(cfg.model().unwrap(), Model::SpaceTimeNonlocal);
        assert_eq!(cfg.strategy().unwrap(), StrategyKind::KnownThick);
        assert_eq!(cfg.kernel().unwrap().unwrap().family(), KernelFamily::ShiftedExponential);
        assert_eq!(cfg.fd().unwrap().v_f(), 60.0);
        assert_eq!(cfg.io.rho_m, 1.0);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = Config::from_toml(&format!("{BASE}\n[io]\nbogus = 1\n")).unwrap_err();
        assert_eq!(err.class(), "ConfigError");
    }

    #[test]
    fn bad_values_are_config_errors() {
        let cfg = Config::from_toml(&BASE.replace("n = 200", "n = 1")).unwrap();
        assert_eq!(cfg.grid().unwrap_err().class(), "ConfigError");
        let cfg = Config::from_toml(&BASE.replace("\"shifted\"", "\"gaussian\"")).unwrap();
        assert_eq!(cfg.kernel().unwrap_err().class(), "ConfigError");
    }

    #[test]
    fn classical_ignores_kernel() {
        let cfg = Config::from_toml(&BASE.replace("\"spacetime\"", "\"classical\"")).unwrap();
        assert!(cfg.kernel().unwrap().is_none());
    }
}
