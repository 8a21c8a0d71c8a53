//! Subcommand implementations.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use nonlocal_lwr::kernel::gamma_max;
use nonlocal_lwr::ngsim::{self, extract_scenario_data, RasterConfig};
use nonlocal_lwr::{
    relative_l2, run, BoundaryData, BoundaryStrategy, DensityField, Error, FundamentalDiagram,
    Grid, Kernel, KernelFamily, Model, Result, RunOutput, Scenario, StrategyKind, VariableShape,
};

use crate::config::{config_class, Config, NgsimConfig};
use crate::synthetic::synthetic_truth;

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// Reads the `rho` column of a `x,rho` or `t,rho` CSV, divided by `rho_m`.
pub fn read_series(path: &Path, rho_m: f64) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|c| c.trim() == "rho")
        .ok_or_else(|| Error::Format(format!("{}: no `rho` column", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("{}: bad record {rec:?}", path.display())))?;
        out.push(v / rho_m);
    }
    Ok(out)
}

fn load_truth(cfg: &Config, grid: &Grid) -> Result<Option<DensityField>> {
    let Some(path) = &cfg.io.truth_csv else {
        return Ok(None);
    };
    let (field, _) = DensityField::read_csv(path)?;
    let field = field.without_collars();
    if !field.grid().same_discretization(grid) {
        return Err(Error::Shape(format!(
            "{} is on a different grid than [grid]",
            path.display()
        )));
    }
    Ok(Some(field))
}

/// Ground truth from recorded or generated trajectories.
fn ingest(ng: &NgsimConfig, grid: &Grid, fd: &FundamentalDiagram, seed: Option<u64>) -> Result<DensityField> {
    let raster = RasterConfig {
        grid: *grid,
        lanes: ng.lanes.clone(),
        rho_m_physical: ng.rho_m_physical,
        frame_period: ng.frame_period,
        t_start: ng.t_start,
        aggregation: ng.aggregation,
        smoothing: ng.smoothing,
    };
    match (&ng.path, ng.synthetic || seed.is_some()) {
        (Some(path), false) => {
            let traj = ngsim::load_trajectories(path, &ng.load_options())?;
            info!(
                "loaded {} records ({} malformed) from {}",
                traj.records.len(),
                traj.malformed,
                path.display()
            );
            ngsim::rasterize(&traj.records, &raster)
        }
        (None, false) => Err(Error::Config(
            "[ngsim] needs `path` or `synthetic = true`".into(),
        )),
        (_, true) => synthetic_truth(&raster, fd, seed.unwrap_or(ng.seed)),
    }
}

/// One point of a sweep, or the single configured run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combo {
    pub model: Model,
    pub strategy: Option<StrategyKind>,
    pub kernel: Option<(KernelFamily, f64)>,
    pub gamma: f64,
}

impl Combo {
    fn key(&self) -> (Model, Option<StrategyKind>, Option<KernelFamily>, u64) {
        (
            self.model,
            self.strategy,
            self.kernel.map(|k| k.0),
            self.kernel.map_or(0, |k| k.1.to_bits()),
        )
    }
}

struct Inputs {
    grid: Grid,
    fd: FundamentalDiagram,
    shape: VariableShape,
    thin: Option<(Vec<f64>, Vec<f64>)>,
    left: Option<Vec<f64>>,
    truth: Option<DensityField>,
}

impl Inputs {
    fn new(cfg: &Config, truth: Option<DensityField>) -> Result<Self> {
        let grid = cfg.grid()?;
        let rho_m = cfg.io.rho_m;
        if !(rho_m > 0.0) {
            return Err(Error::Config(format!("io.rho_m = {rho_m} must be positive")));
        }
        let thin = match (&cfg.io.initial_csv, &cfg.io.boundary_csv) {
            (Some(i), Some(b)) => Some((read_series(i, rho_m)?, read_series(b, rho_m)?)),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "io.initial_csv and io.boundary_csv must be given together".into(),
                ))
            }
        };
        let left = cfg.io.left_csv.as_deref().map(|p| read_series(p, rho_m)).transpose()?;
        Ok(Inputs {
            grid,
            fd: cfg.fd()?,
            shape: cfg.variable_shape()?,
            thin,
            left,
            truth,
        })
    }

    fn scenario(&self, combo: &Combo) -> Result<Scenario> {
        let kernel = match combo.kernel {
            Some((family, d)) => Some(Kernel::new(family, d).map_err(config_class)?),
            None => None,
        };
        let strategy = combo.strategy.unwrap_or(StrategyKind::ContinuousExtension);
        let data = match (strategy, &self.thin, &self.truth) {
            (StrategyKind::KnownThick, _, Some(truth)) if kernel.is_some() => {
                let d = kernel.as_ref().map_or(0.0, |k| k.d());
                extract_scenario_data(truth, &BoundaryStrategy::new(strategy, d, combo.gamma)?)?
            }
            (StrategyKind::KnownThick, _, None) if kernel.is_some() => {
                return Err(Error::Coverage(
                    "the known-thick strategy reads its band from io.truth_csv".into(),
                ))
            }
            (_, Some((initial, boundary)), _) => BoundaryData::Thin {
                initial: initial.clone(),
                boundary: boundary.clone(),
            },
            (_, None, Some(truth)) => BoundaryData::Thin {
                initial: truth.interior_row(0).to_vec(),
                boundary: truth.column(truth.grid().n() - 1),
            },
            (_, None, None) => {
                return Err(Error::Config(
                    "no initial/boundary data: set io.initial_csv and io.boundary_csv, or io.truth_csv".into(),
                ))
            }
        };
        Ok(Scenario {
            grid: self.grid,
            fd: self.fd,
            kernel,
            gamma: combo.gamma,
            strategy,
            variable_shape: self.shape,
            model: combo.model,
            data,
            left: self.left.clone(),
        })
    }

    fn evaluate(&self, combo: &Combo) -> Result<(RunOutput, Option<f64>)> {
        let out = run(&self.scenario(combo)?)?;
        let er = match &self.truth {
            Some(truth) => Some(relative_l2(&out.field, truth, &out.info.interior)?.er),
            None => None,
        };
        Ok((out, er))
    }
}

fn configured_combo(cfg: &Config) -> Result<Combo> {
    let model = cfg.model()?;
    let kernel = cfg.kernel()?.map(|k| (k.family(), k.d()));
    Ok(Combo {
        model,
        strategy: kernel.is_some().then(|| cfg.strategy()).transpose()?,
        kernel,
        gamma: if model == Model::Classical { 0.0 } else { cfg.delay.gamma },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: String,
    pub strategy: String,
    pub family: String,
    pub d: Option<f64>,
    pub gamma: f64,
    pub er: Option<f64>,
    pub clamp_count: Option<u64>,
    pub error_class: String,
    pub error_message: String,
}

impl ResultRow {
    fn new(combo: &Combo, outcome: &Result<(RunOutput, Option<f64>)>) -> Self {
        let (er, clamp_count, error_class, error_message) = match outcome {
            Ok((out, er)) => (*er, Some(out.info.clamp_count), String::new(), String::new()),
            Err(e) => (None, None, e.class().to_string(), e.to_string()),
        };
        ResultRow {
            model: combo.model.to_string(),
            strategy: combo.strategy.map_or("none".into(), |s| s.to_string()),
            family: combo.kernel.map_or("none".into(), |k| k.0.to_string()),
            d: combo.kernel.map(|k| k.1),
            gamma: combo.gamma,
            er,
            clamp_count,
            error_class,
            error_message,
        }
    }
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn kernel_json(kernel: Option<&Kernel>) -> serde_json::Value {
    match kernel {
        None => serde_json::Value::Null,
        Some(k) => json!({
            "family": k.family().name(),
            "d_ft": k.d(),
            "K": k.k(),
            "eta0": k.eta0(),
            "beta": k.beta_bound().ok(),
        }),
    }
}

fn prepare_out_dir(globals: &Globals) -> Result<()> {
    std::fs::create_dir_all(&globals.out_dir)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub field_csv: PathBuf,
    pub errors_csv: Option<PathBuf>,
    pub manifest: PathBuf,
    pub row: ResultRow,
}

fn simulate_with(cfg: &Config, globals: &Globals, truth: Option<DensityField>, command: &str) -> Result<SimulateOutcome> {
    prepare_out_dir(globals)?;
    let inputs = Inputs::new(cfg, truth)?;
    let combo = configured_combo(cfg)?;
    let scenario = inputs.scenario(&combo)?;
    let out = run(&scenario)?;
    for w in &out.info.warnings {
        eprintln!("warning: {w}");
    }
    let field_name = cfg.io.out_csv.clone().unwrap_or_else(|| PathBuf::from("density.csv"));
    let field_csv = globals.out_dir.join(field_name);
    out.field.write_csv(&field_csv, cfg.io.rho_m)?;

    let report = match &inputs.truth {
        Some(truth) => Some(relative_l2(&out.field, truth, &out.info.interior)?),
        None => None,
    };
    let row = ResultRow::new(&combo, &Ok((out.clone(), report.as_ref().map(|r| r.er))));
    let errors_csv = match &report {
        Some(_) => {
            let p = globals.out_dir.join("errors.csv");
            write_rows(&p, std::slice::from_ref(&row))?;
            Some(p)
        }
        None => None,
    };

    let grid = inputs.grid;
    let manifest = json!({
        "command": command,
        "config": cfg,
        "resolved": {
            "model": combo.model.name(),
            "strategy": combo.strategy.map(|s| s.name()),
            "variable_shape": inputs.shape,
            "grid": {
                "a": grid.a(), "b": grid.b(), "T": grid.duration(), "n": grid.n(),
                "dt": grid.dt(), "dx": grid.dx(), "n_t": grid.n_t(),
            },
            "fd": inputs.fd,
            "kernel": kernel_json(scenario.kernel.as_ref()),
            "gamma": combo.gamma,
            "left_boundary": inputs.left.is_some(),
            "rho_m": cfg.io.rho_m,
        },
        "cfl": out.info.cfl,
        "gamma_max": out.info.gamma_max,
        "n_d": out.info.n_d,
        "nt_s": out.info.nt_s,
        "collar_space": out.field.grid().collar_space(),
        "collar_time": out.field.grid().collar_time(),
        "interior": out.info.interior,
        "clamp_count": out.info.clamp_count,
        "warnings": out.info.warnings,
        "error_report": report,
        "outputs": {
            "field_csv": field_csv,
            "errors_csv": errors_csv,
        },
    });
    let manifest_path = globals.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    match report {
        Some(r) => println!(
            "model={} strategy={} cfl={:.4} er={:.6} clamp_count={}",
            row.model, row.strategy, out.info.cfl, r.er, r.clamp_count
        ),
        None => println!(
            "model={} strategy={} cfl={:.4} clamp_count={}",
            row.model, row.strategy, out.info.cfl, out.info.clamp_count
        ),
    }
    Ok(SimulateOutcome {
        field_csv,
        errors_csv,
        manifest: manifest_path,
        row,
    })
}

pub fn simulate(cfg: &Config, globals: &Globals) -> Result<SimulateOutcome> {
    let truth = load_truth(cfg, &cfg.grid()?)?;
    simulate_with(cfg, globals, truth, "simulate")
}

/// Ingest trajectories, simulate from the extracted data, compare.
pub fn reconstruct(cfg: &Config, globals: &Globals) -> Result<SimulateOutcome> {
    let ng = cfg
        .ngsim
        .as_ref()
        .ok_or_else(|| Error::Config("reconstruct needs an [ngsim] section".into()))?;
    prepare_out_dir(globals)?;
    let truth = ingest(ng, &cfg.grid()?, &cfg.fd()?, globals.seed)?;
    truth.write_csv(&globals.out_dir.join("truth.csv"), cfg.io.rho_m)?;
    simulate_with(cfg, globals, Some(truth), "reconstruct")
}

fn sweep_combos(cfg: &Config) -> Result<Vec<Combo>> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    if spec.models.is_empty() {
        return Err(Error::Config("sweep.models is empty".into()));
    }
    let mut combos = Vec::new();
    for m in &spec.models {
        let model: Model = m.parse()?;
        if model == Model::Classical {
            combos.push(Combo { model, strategy: None, kernel: None, gamma: 0.0 });
            continue;
        }
        if spec.families.is_empty() {
            return Err(Error::Config("sweep.families is empty".into()));
        }
        if spec.lengths.is_empty() {
            return Err(Error::Config("sweep.lengths is empty".into()));
        }
        let strategies: Vec<StrategyKind> = if spec.strategies.is_empty() {
            vec![cfg.strategy()?]
        } else {
            spec.strategies.iter().map(|s| s.parse()).collect::<Result<_>>()?
        };
        let gamma = if model == Model::SpatialNonlocal { 0.0 } else { cfg.delay.gamma };
        for &strategy in &strategies {
            for f in &spec.families {
                let family: KernelFamily = f.parse()?;
                for &d in &spec.lengths {
                    combos.push(Combo {
                        model,
                        strategy: Some(strategy),
                        kernel: Some((family, d)),
                        gamma,
                    });
                }
            }
        }
    }
    combos.sort_by(|a, b| {
        let (ka, kb) = (a.key(), b.key());
        ka.0.cmp(&kb.0)
            .then(ka.1.cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(f64::from_bits(ka.3).total_cmp(&f64::from_bits(kb.3)))
    });
    combos.dedup_by_key(|c| c.key());
    Ok(combos)
}

/// Runs every combination and writes one row each, failures included.
pub fn sweep(cfg: &Config, globals: &Globals) -> Result<Vec<ResultRow>> {
    let combos = sweep_combos(cfg)?;
    prepare_out_dir(globals)?;
    let grid = cfg.grid()?;
    let truth = match (load_truth(cfg, &grid)?, &cfg.ngsim) {
        (Some(t), _) => Some(t),
        (None, Some(ng)) => Some(ingest(ng, &grid, &cfg.fd()?, globals.seed)?),
        (None, None) => None,
    };
    let inputs = Inputs::new(cfg, truth)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = globals.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<ResultRow> = pool.install(|| {
        combos
            .par_iter()
            .map(|c| ResultRow::new(c, &inputs.evaluate(c)))
            .collect()
    });
    write_rows(&globals.out_dir.join("sweep.csv"), &rows)?;

    println!("{:<10} {:<12} {:<12} {:>7} {:>8} {:>10}", "model", "strategy", "family", "d", "gamma", "er");
    for r in &rows {
        let d = r.d.map_or("-".into(), |d| format!("{d}"));
        let er = match (&r.er, r.error_class.is_empty()) {
            (Some(er), _) => format!("{er:.4}"),
            (None, false) => r.error_class.clone(),
            (None, true) => "-".into(),
        };
        println!(
            "{:<10} {:<12} {:<12} {:>7} {:>8} {:>10}",
            r.model, r.strategy, r.family, d, r.gamma, er
        );
    }
    let failed = rows.iter().filter(|r| !r.error_class.is_empty()).count();
    if failed > 0 {
        warn!("{failed} of {} combinations failed", rows.len());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default)]
pub struct KernelQuery {
    pub family: Option<String>,
    pub d: Option<f64>,
    pub dx: Option<f64>,
    pub gamma: Option<f64>,
    pub fd: Option<String>,
    pub v_f: Option<f64>,
    pub rho_c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelReport {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Kernel constants, the advisory delay bound and the discrete weights.
///
/// Flags win over the config; `dx` defaults to the config grid or `d / 10`.
pub fn kernel_info(query: &KernelQuery, cfg: Option<&Config>) -> Result<KernelReport> {
    let family: KernelFamily = match (&query.family, cfg.and_then(|c| c.kernel.as_ref())) {
        (Some(f), _) => f.parse()?,
        (None, Some(k)) => k.family.parse()?,
        (None, None) => return Err(Error::Config("kernel-info needs --family".into())),
    };
    let d = query
        .d
        .or_else(|| cfg.and_then(|c| c.kernel.as_ref()).map(|k| k.d_ft))
        .ok_or_else(|| Error::Config("kernel-info needs --d".into()))?;
    let dx = match (query.dx, cfg) {
        (Some(dx), _) => dx,
        (None, Some(c)) => c.grid()?.dx(),
        (None, None) => d / 10.0,
    };
    let gamma = query.gamma.or(cfg.map(|c| c.delay.gamma)).unwrap_or(0.0);
    let mut fd_cfg = cfg.map(|c| c.fd.clone()).unwrap_or_default();
    if let Some(f) = &query.fd {
        fd_cfg.family = f.clone();
    }
    if let Some(v) = query.v_f {
        fd_cfg.v_f = v;
    }
    if let Some(r) = query.rho_c {
        fd_cfg.rho_c = Some(r);
    }
    let probe = Config {
        fd: fd_cfg,
        ..Config::from_toml("[grid]\nb = 1.0\nT = 1.0\nn = 3\ndt = 0.1\n")?
    };
    let fd = probe.fd()?;
    let kernel = Kernel::new(family, d).map_err(config_class)?;
    let dk = kernel.sample(dx).map_err(config_class)?;

    let mut warnings = Vec::new();
    let mut text = String::new();
    let mut line = |k: &str, v: String| text.push_str(&format!("{k}: {v}\n"));
    line("family", family.to_string());
    line("d_ft", d.to_string());
    line("dx_ft", dx.to_string());
    line("K", kernel.k().to_string());
    line("eta0", kernel.eta0().to_string());
    match kernel.beta_bound() {
        Ok(beta) => {
            let gmax = gamma_max(fd.v_f(), fd.vprime_sup(), beta, kernel.eta0());
            line("beta", beta.to_string());
            line("gamma_max", gmax.to_string());
            if gamma > gmax {
                warnings.push(format!("gamma = {gamma} exceeds gamma_max = {gmax}"));
            }
        }
        Err(e) => {
            line("beta", "NA".into());
            line("gamma_max", "NA".into());
            warnings.push(format!("class={} message={:?}", e.class(), e.to_string()));
        }
    }
    line("gamma", gamma.to_string());
    line("fd", format!("{} v_f={}", fd.name(), fd.v_f()));
    line("n_d", dk.n_d().to_string());
    text.push_str("i,s_ft,weight,mass\n");
    for (i, (w, m)) in dk.weights().iter().zip(dk.mass()).enumerate() {
        text.push_str(&format!("{i},{},{w},{m}\n", i as f64 * dx));
    }
    Ok(KernelReport { text, warnings })
}

/// Writes `text` to stdout in one go.
pub fn emit(text: &str) -> Result<()> {
    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
