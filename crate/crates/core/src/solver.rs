//! Lax-Friedrichs time stepping for the classical and nonlocal models.
//!
//! One step reads
//! `rho[n+1, j] = (rho[n, j+1] + rho[n, j-1]) / 2 - dt / (2 dx) (F[j+1] - F[j-1])`
//! with `F[j] = rho[n, j] v(rho_d[n, j])`. The classical model uses
//! `rho_d = rho`. Results are clamped to `[0, 1]` and every clamp is counted.
//! The left ghost is `rho[n, -1] = rho[n, 0]` unless a left boundary series is
//! given, in which case column 0 is imposed. Column `n - 1` (the cell at
//! `x = b`) always holds boundary data.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::boundary::{
    check_thin, extend_continuous, install_known_thick, BoundaryStrategy, StrategyKind,
    ThickData, VariableKernels, VariableShape,
};
use crate::error::{Error, Result};
use crate::fd::FundamentalDiagram;
use crate::grid::{DensityField, Grid, Region};
use crate::kernel::{gamma_max, DiscreteKernel, Kernel};
use crate::nonlocal::{nonlocal_density_row, nonlocal_density_spacetime, DelaySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "spatial")]
    SpatialNonlocal,
    #[serde(rename = "spacetime")]
    SpaceTimeNonlocal,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Classical => "classical",
            Model::SpatialNonlocal => "spatial",
            Model::SpaceTimeNonlocal => "spacetime",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" | "local" => Ok(Model::Classical),
            "spatial" | "spatial_nonlocal" => Ok(Model::SpatialNonlocal),
            "spacetime" | "space_time" | "spacetime_nonlocal" => Ok(Model::SpaceTimeNonlocal),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// Data a run consumes at the domain edges.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// `rho(0, x)` on `n` cells and `rho(t, b)` on `n_t + 1` steps.
    Thin { initial: Vec<f64>, boundary: Vec<f64> },
    /// The L-shaped band of the known-thick strategy.
    Thick(ThickData),
}

impl BoundaryData {
    fn thin(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            BoundaryData::Thin { initial, boundary } => (initial.clone(), boundary.clone()),
            BoundaryData::Thick(t) => (t.initial_row().to_vec(), t.boundary_column()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    /// Physical grid; collars are added by the run as the strategy requires.
    pub grid: Grid,
    pub fd: FundamentalDiagram,
    /// Absent for the classical model.
    pub kernel: Option<Kernel>,
    pub gamma: f64,
    pub strategy: StrategyKind,
    pub variable_shape: VariableShape,
    pub model: Model,
    pub data: BoundaryData,
    /// Optional `rho(t, a)` on `n_t + 1` steps.
    pub left: Option<Vec<f64>>,
}

/// Numbers a run reports next to its field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub model: Model,
    pub strategy: Option<StrategyKind>,
    pub cfl: f64,
    pub n_d: usize,
    pub nt_s: usize,
    pub gamma_max: Option<f64>,
    /// Cells the run computed; the error metric is evaluated here.
    pub interior: Region,
    pub clamp_count: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub field: DensityField,
    pub info: RunInfo,
}

/// `lambda = max|f'| dt / dx`. Both laws have `max|f'| = v_f`, which also
/// bounds `d/drho [rho v(rho_d)] = v(rho_d)` in the nonlocal models.
pub fn cfl_check(fd: &FundamentalDiagram, grid: &Grid) -> Result<f64> {
    let cfl = fd.max_wave_speed() * grid.dt() / grid.dx();
    // 60 * 0.1 / 6 evaluates to 1.0000000000000002.
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl { cfl });
    }
    Ok(cfl)
}

/// One Lax-Friedrichs point update from the two neighbours.
#[inline]
pub fn lf_point(rho_l: f64, rho_r: f64, flux_l: f64, flux_r: f64, half_ratio: f64) -> f64 {
    0.5 * (rho_r + rho_l) - half_ratio * (flux_r - flux_l)
}

fn clamp_counted(v: f64, clamps: &mut u64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite(v));
    }
    if !(0.0..=1.0).contains(&v) {
        *clamps += 1;
        return Ok(v.clamp(0.0, 1.0));
    }
    Ok(v)
}

/// Classical step on a row whose first and last entries are ghosts; returns
/// the `len - 2` inner cells and the number of clamps.
pub fn lf_step_classical(
    row: &[f64],
    fd: &FundamentalDiagram,
    grid: &Grid,
) -> Result<(Vec<f64>, u64)> {
    if row.len() < 3 {
        return Err(Error::Shape(format!("row of {} cells has no inner cell", row.len())));
    }
    let half_ratio = grid.dt() / (2.0 * grid.dx());
    let flux: Vec<f64> = row.iter().map(|&r| fd.flux_unchecked(r)).collect();
    let mut clamps = 0;
    let mut out = Vec::with_capacity(row.len() - 2);
    for j in 1..row.len() - 1 {
        let v = lf_point(row[j - 1], row[j + 1], flux[j - 1], flux[j + 1], half_ratio);
        out.push(clamp_counted(v, &mut clamps)?);
    }
    Ok((out, clamps))
}

/// Nonlocal step of row `step` for the cells `1..n-1` that have both
/// neighbours inside the row; the field must supply the collar the kernel
/// reaches.
pub fn lf_step_nonlocal(
    field: &DensityField,
    step: isize,
    dk: &DiscreteKernel,
    delay: &DelaySpec,
    fd: &FundamentalDiagram,
) -> Result<(Vec<f64>, u64)> {
    let grid = field.grid();
    let n = grid.n();
    if n < 3 {
        return Err(Error::Shape(format!("row of {n} cells has no inner cell")));
    }
    let rho_d = nonlocal_density_row(field, step, dk, delay, 0..n)?;
    let rho = field.interior_row(step);
    let flux: Vec<f64> = rho
        .iter()
        .zip(&rho_d)
        .map(|(r, rd)| r * fd.velocity_unchecked(*rd))
        .collect();
    let half_ratio = grid.dt() / (2.0 * grid.dx());
    let mut clamps = 0;
    let mut out = Vec::with_capacity(n - 2);
    for j in 1..n - 1 {
        let v = lf_point(rho[j - 1], rho[j + 1], flux[j - 1], flux[j + 1], half_ratio);
        out.push(clamp_counted(v, &mut clamps)?);
    }
    Ok((out, clamps))
}

enum Lookahead {
    Local,
    Fixed(DiscreteKernel),
    Variable(VariableKernels),
}

/// Marches rows `k_start + 1 ..= n_t`, updating columns `lo..hi` from
/// neighbours `lo - 1 ..= hi` (the ghost at `-1` copies column 0).
fn march(
    field: &mut DensityField,
    fd: &FundamentalDiagram,
    look: &Lookahead,
    delay: &DelaySpec,
    k_start: isize,
    lo: usize,
    hi: usize,
) -> Result<()> {
    let grid = *field.grid();
    let half_ratio = grid.dt() / (2.0 * grid.dx());
    let mut clamps = 0;
    let mut next = vec![0.0; hi - lo];
    for k in k_start..grid.n_t() as isize {
        let rho_d: Vec<f64> = match look {
            Lookahead::Local => field.interior_row(k)[..=hi].to_vec(),
            Lookahead::Fixed(dk) => nonlocal_density_row(field, k, dk, delay, 0..hi + 1)?,
            Lookahead::Variable(vk) => (0..=hi)
                .map(|j| nonlocal_density_spacetime(field, k, j, vk.kernel_at(k, j), delay))
                .collect::<Result<_>>()?,
        };
        let rho = field.interior_row(k);
        let flux: Vec<f64> = rho[..=hi]
            .iter()
            .zip(&rho_d)
            .map(|(r, rd)| r * fd.velocity_unchecked(*rd))
            .collect();
        for (out, j) in next.iter_mut().zip(lo..hi) {
            let l = j.saturating_sub(1);
            let v = lf_point(rho[l], rho[j + 1], flux[l], flux[j + 1], half_ratio);
            *out = clamp_counted(v, &mut clamps)?;
        }
        field.row_mut(k + 1)[lo..hi].copy_from_slice(&next);
    }
    field.add_clamps(clamps);
    Ok(())
}

fn install_left(field: &mut DensityField, left: &[f64], from: isize) -> Result<()> {
    let n_t = field.grid().n_t();
    if left.len() != n_t + 1 {
        return Err(Error::Shape(format!(
            "left boundary has {} steps, grid needs {}",
            left.len(),
            n_t + 1
        )));
    }
    if let Some(bad) = left.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("left boundary density {bad} outside [0, 1]")));
    }
    for k in from..=n_t as isize {
        field.row_mut(k)[0] = left[k as usize];
    }
    Ok(())
}

/// Thin data on a collar-free field: row 0 and column `n - 1`.
fn thin_field(grid: Grid, initial: &[f64], boundary: &[f64]) -> Result<DensityField> {
    check_thin(initial, boundary, &grid)?;
    let n = grid.n();
    let mut field = DensityField::filled(grid, 0.0)?;
    field.row_mut(0)[..n].copy_from_slice(initial);
    for (k, &rho_b) in boundary.iter().enumerate() {
        field.row_mut(k as isize)[n - 1] = rho_b;
    }
    Ok(field)
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        match self.model {
            Model::Classical if self.kernel.is_some() => Err(Error::Config(
                "the classical model takes no kernel".into(),
            )),
            Model::SpatialNonlocal if self.gamma != 0.0 => Err(Error::Config(format!(
                "the spatial nonlocal model has no delay, got gamma = {}",
                self.gamma
            ))),
            Model::SpatialNonlocal | Model::SpaceTimeNonlocal if self.kernel.is_none() => {
                Err(Error::Config(format!("the {} model needs a kernel", self.model)))
            }
            _ => Ok(()),
        }
    }

    fn advisories(&self, kernel: &Kernel, delay: &DelaySpec) -> (Option<f64>, Vec<String>) {
        let mut warnings = Vec::new();
        let gmax = match kernel.beta_bound() {
            Ok(beta) => {
                let g = gamma_max(self.fd.v_f(), self.fd.vprime_sup(), beta, kernel.eta0());
                if self.gamma > g {
                    warnings.push(format!(
                        "gamma = {} exceeds the advisory bound gamma_max = {g}",
                        self.gamma
                    ));
                }
                Some(g)
            }
            Err(_) => {
                if self.gamma > 0.0 {
                    warnings.push(format!(
                        "the {} kernel has no decay bound, gamma_max is undefined",
                        kernel.family()
                    ));
                }
                None
            }
        };
        if delay.is_under_resolved() {
            warnings.push(format!(
                "gamma dx / dt < 1 so the delay rounds to zero steps; resolving it needs dt <= {}",
                self.gamma * self.grid.dx()
            ));
        }
        (gmax, warnings)
    }
}

/// Runs a scenario and returns the field together with its collars.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let base = scenario.grid.with_collars(0, 0);
    let n = base.n();
    if n < 2 {
        return Err(Error::Shape(format!("a run needs at least 2 cells, got {n}")));
    }
    let cfl = cfl_check(&scenario.fd, &base)?;
    let delay = DelaySpec::new(scenario.gamma, base.dx(), base.dt())?;
    let lo = usize::from(scenario.left.is_some());

    let kernel = match &scenario.kernel {
        None => {
            let (initial, boundary) = scenario.data.thin();
            let mut field = thin_field(base, &initial, &boundary)?;
            if let Some(left) = &scenario.left {
                install_left(&mut field, left, 0)?;
            }
            march(&mut field, &scenario.fd, &Lookahead::Local, &DelaySpec::none(), 0, lo, n - 1)?;
            let info = RunInfo {
                model: scenario.model,
                strategy: None,
                cfl,
                n_d: 1,
                nt_s: 0,
                gamma_max: None,
                interior: Region::full(&base),
                clamp_count: field.clamp_count(),
                warnings: Vec::new(),
            };
            return Ok(RunOutput { field, info });
        }
        Some(k) => k,
    };

    let (gmax, warnings) = scenario.advisories(kernel, &delay);
    for w in &warnings {
        warn!("{w}");
    }
    let strategy = BoundaryStrategy::new(scenario.strategy, kernel.d(), scenario.gamma)?;
    let geo = strategy.geometry(&base)?;

    let (field, interior) = match scenario.strategy {
        StrategyKind::ContinuousExtension => {
            let (initial, boundary) = scenario.data.thin();
            let grid = base.with_collars(geo.collar_space, geo.collar_time);
            let mut field = extend_continuous(&initial, &boundary, &grid)?;
            if let Some(left) = &scenario.left {
                install_left(&mut field, left, 1)?;
            }
            let look = Lookahead::Fixed(kernel.sample(base.dx())?);
            march(&mut field, &scenario.fd, &look, &delay, 0, lo, n - 1)?;
            (field, Region::full(&base))
        }
        StrategyKind::VariableLength => {
            let (initial, boundary) = scenario.data.thin();
            let mut field = thin_field(base, &initial, &boundary)?;
            if let Some(left) = &scenario.left {
                install_left(&mut field, left, 1)?;
            }
            let vk = VariableKernels::new(kernel, scenario.gamma, &base, scenario.variable_shape)?;
            march(&mut field, &scenario.fd, &Lookahead::Variable(vk), &delay, 0, lo, n - 1)?;
            (field, Region::full(&base))
        }
        StrategyKind::KnownThick => {
            let thick = match &scenario.data {
                BoundaryData::Thick(t) => t,
                BoundaryData::Thin { .. } => {
                    return Err(Error::Coverage(
                        "the known-thick strategy needs data on the thick band".into(),
                    ))
                }
            };
            if thick.band_rows() != geo.band_rows || thick.band_cols() != geo.band_cols {
                return Err(Error::Coverage(format!(
                    "thick data band is {} rows x {} columns, the kernel needs {} x {}",
                    thick.band_rows(),
                    thick.band_cols(),
                    geo.band_rows,
                    geo.band_cols
                )));
            }
            let mut field = DensityField::filled(base, 0.0)?;
            let interior = install_known_thick(&mut field, thick)?;
            if let Some(left) = &scenario.left {
                install_left(&mut field, left, interior.k0)?;
            }
            let look = Lookahead::Fixed(kernel.sample(base.dx())?);
            march(&mut field, &scenario.fd, &look, &delay, interior.k0 - 1, lo, interior.j1)?;
            (field, interior)
        }
    };

    let info = RunInfo {
        model: scenario.model,
        strategy: Some(scenario.strategy),
        cfl,
        n_d: geo.n_d,
        nt_s: geo.nt_s,
        gamma_max: gmax,
        interior,
        clamp_count: field.clamp_count(),
        warnings,
    };
    Ok(RunOutput { field, info })
}

/// Periodic test mode: the stencil and the convolution both wrap around,
/// and rows before `t = 0` equal the initial row. Not a boundary strategy;
/// it exists to check conservation and convergence.
pub fn run_periodic(
    fd: &FundamentalDiagram,
    kernel: Option<&DiscreteKernel>,
    delay: &DelaySpec,
    grid: &Grid,
    initial: &[f64],
) -> Result<DensityField> {
    let grid = grid.with_collars(0, 0);
    let n = grid.n();
    if initial.len() != n {
        return Err(Error::Shape(format!(
            "initial row has {} cells, grid has {n}",
            initial.len()
        )));
    }
    cfl_check(fd, &grid)?;
    let mut field = DensityField::filled(grid, 0.0)?;
    field.row_mut(0).copy_from_slice(initial);
    let half_ratio = grid.dt() / (2.0 * grid.dx());
    let nt_s = delay.nt_s();
    let mut clamps = 0;
    let mut rho_d = vec![0.0; n];
    let mut next = vec![0.0; n];
    for k in 0..grid.n_t() as isize {
        match kernel {
            None => rho_d.copy_from_slice(field.row(k)),
            Some(dk) => {
                rho_d.fill(0.0);
                for (i, m) in dk.mass().iter().enumerate() {
                    let row = field.row((k - (i * nt_s) as isize).max(0));
                    for (j, acc) in rho_d.iter_mut().enumerate() {
                        *acc += row[(j + i) % n] * m;
                    }
                }
                for acc in &mut rho_d {
                    *acc = acc.clamp(0.0, 1.0);
                }
            }
        }
        let rho = field.row(k);
        let flux: Vec<f64> = rho
            .iter()
            .zip(&rho_d)
            .map(|(r, rd)| r * fd.velocity_unchecked(*rd))
            .collect();
        for (j, out) in next.iter_mut().enumerate() {
            let l = (j + n - 1) % n;
            let r = (j + 1) % n;
            *out = clamp_counted(lf_point(rho[l], rho[r], flux[l], flux[r], half_ratio), &mut clamps)?;
        }
        field.row_mut(k + 1).copy_from_slice(&next);
    }
    field.add_clamps(clamps);
    Ok(field)
}
