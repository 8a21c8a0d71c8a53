//! Boundary data for the nonlocal operator.
//!
//! The look-ahead kernel reaches `d` downstream and, with delay, `gamma d`
//! into the past, so evaluating it near `x = b` or `t = 0` needs data outside
//! the thin initial/boundary data of the local problem. Three strategies:
//!
//! * `ContinuousExtension`: build a collar from thin data. Rows before
//!   `t = 0` copy the initial row, columns beyond `b` copy `rho(t, b)`, and
//!   the corner block is the constant `rho(0, b)`.
//! * `KnownThick`: data are prescribed on `[0, gamma d] x [a, b]` and on
//!   `[gamma d, T] x [b - d, b]`; only the rectangle `(gamma d, T) x (a, b - d)`
//!   is computed.
//! * `VariableLength`: no collar; the kernel length at `(t, x)` shrinks to
//!   `min{d, d_x, d_t / gamma}` so that it only reads available data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid, Region};
use crate::kernel::{DiscreteKernel, Kernel, KernelFamily};
use crate::nonlocal::DelaySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "continuous")]
    ContinuousExtension,
    #[serde(rename = "known_thick")]
    KnownThick,
    #[serde(rename = "variable")]
    VariableLength,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::ContinuousExtension,
        StrategyKind::KnownThick,
        StrategyKind::VariableLength,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::ContinuousExtension => "continuous",
            StrategyKind::KnownThick => "known_thick",
            StrategyKind::VariableLength => "variable",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" | "continuous_extension" => Ok(StrategyKind::ContinuousExtension),
            "known_thick" | "thick" => Ok(StrategyKind::KnownThick),
            "variable" | "variable_length" => Ok(StrategyKind::VariableLength),
            other => Err(Error::Config(format!("unknown boundary strategy `{other}`"))),
        }
    }
}

/// How a variable-length kernel is built on a shortened support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableShape {
    /// Rescale the family shape onto `[0, d_eff]`.
    #[default]
    Rescale,
    /// Keep the first samples of the full-length kernel and renormalize.
    Truncate,
}

impl FromStr for VariableShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rescale" => Ok(VariableShape::Rescale),
            "truncate" => Ok(VariableShape::Truncate),
            other => Err(Error::Config(format!("unknown variable kernel shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryStrategy {
    pub kind: StrategyKind,
    /// Kernel length (ft).
    pub d: f64,
    /// Propagation delay (s/ft).
    pub gamma: f64,
}

/// Index extents implied by a strategy on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CollarGeometry {
    /// Kernel samples at full length.
    pub n_d: usize,
    pub nt_s: usize,
    /// Rows reached behind the current one by a full stencil.
    pub reach: usize,
    /// `round(gamma d / dt)`.
    pub delay_rows: usize,
    /// Rows before `t = 0` (continuous extension).
    pub collar_time: usize,
    /// Columns beyond `b` (continuous extension).
    pub collar_space: usize,
    /// Known rows from `t = 0` (known thick data).
    pub band_rows: usize,
    /// Known columns ending at `b` (known thick data).
    pub band_cols: usize,
}

impl BoundaryStrategy {
    pub fn new(kind: StrategyKind, d: f64, gamma: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("kernel length d = {d} must be positive")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("delay gamma = {gamma} must be >= 0")));
        }
        Ok(BoundaryStrategy { kind, d, gamma })
    }

    pub fn geometry(&self, grid: &Grid) -> Result<CollarGeometry> {
        let dx = grid.dx();
        if dx > self.d * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "kernel length d = {} is shorter than one cell dx = {dx}",
                self.d
            )));
        }
        let n_d = (self.d / dx).round().max(1.0) as usize;
        let delay = DelaySpec::new(self.gamma, dx, grid.dt())?;
        let reach = delay.reach(n_d);
        let delay_rows = (self.gamma * self.d / grid.dt()).round() as usize;
        let band_rows = delay_rows.max(reach + 1);
        let geometry = CollarGeometry {
            n_d,
            nt_s: delay.nt_s(),
            reach,
            delay_rows,
            collar_time: delay_rows.max(reach),
            collar_space: n_d,
            band_rows,
            band_cols: n_d,
        };
        if self.kind == StrategyKind::KnownThick {
            if n_d >= grid.n() {
                return Err(Error::Coverage(format!(
                    "spatial band of {n_d} cells leaves no interior in {} cells",
                    grid.n()
                )));
            }
            if band_rows > grid.n_t() {
                return Err(Error::Coverage(format!(
                    "temporal band of {band_rows} rows covers the whole horizon ({} steps)",
                    grid.n_t()
                )));
            }
        }
        Ok(geometry)
    }

    /// Cells whose values the solver computes and the error metric scores.
    pub fn interior_region(&self, grid: &Grid) -> Result<Region> {
        match self.kind {
            StrategyKind::KnownThick => {
                let g = self.geometry(grid)?;
                Ok(Region {
                    k0: g.band_rows as isize,
                    k1: grid.n_t() as isize,
                    j0: 0,
                    j1: grid.n() - g.band_cols,
                })
            }
            _ => Ok(Region::full(grid)),
        }
    }
}

pub(crate) fn check_thin(initial: &[f64], boundary: &[f64], grid: &Grid) -> Result<()> {
    if initial.len() != grid.n() {
        return Err(Error::Shape(format!(
            "initial row has {} cells, grid has {}",
            initial.len(),
            grid.n()
        )));
    }
    if boundary.len() != grid.n_t() + 1 {
        return Err(Error::Shape(format!(
            "boundary column has {} steps, grid needs {}",
            boundary.len(),
            grid.n_t() + 1
        )));
    }
    if let Some(bad) = initial.iter().chain(boundary).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("boundary density {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Field holding thin data plus the continuous-extension collar.
///
/// `grid` supplies the collar counts. Row 0 holds the initial data, column
/// `n - 1` holds `rho(t, b)` for every step; unknown interior cells are zero.
pub fn extend_continuous(initial: &[f64], boundary: &[f64], grid: &Grid) -> Result<DensityField> {
    check_thin(initial, boundary, grid)?;
    let n = grid.n();
    let mut field = DensityField::filled(*grid, 0.0)?;
    field.row_mut(0)[..n].copy_from_slice(initial);
    for (k, &rho_b) in boundary.iter().enumerate() {
        field.row_mut(k as isize)[n - 1] = rho_b;
    }
    extend_continuous_in_place(&mut field);
    Ok(field)
}

/// Rewrites every collar cell from row 0 and column `n - 1` of the field.
pub fn extend_continuous_in_place(field: &mut DensityField) {
    let n = field.grid().n();
    let corner = field.get(0, n - 1);
    let initial = field.interior_row(0).to_vec();
    for k in field.k_min()..0 {
        let row = field.row_mut(k);
        row[..n].copy_from_slice(&initial);
        row[n..].fill(corner);
    }
    for k in 0..=field.k_max() {
        let row = field.row_mut(k);
        let rho_b = row[n - 1];
        row[n..].fill(rho_b);
    }
}

/// Prescribed values on the L-shaped known region.
#[derive(Debug, Clone, PartialEq)]
pub struct ThickData {
    band_rows: usize,
    band_cols: usize,
    n: usize,
    n_t: usize,
    /// Rows `0..band_rows`, all `n` columns, row-major.
    time_band: Vec<f64>,
    /// Rows `band_rows..=n_t`, the last `band_cols` columns, row-major.
    space_band: Vec<f64>,
}

impl ThickData {
    /// Assembles thick data from raw bands, checking full coverage.
    ///
    /// Missing cells may be passed as `NaN`; any non-finite or short band is a
    /// coverage error.
    pub fn new(
        geometry: &CollarGeometry,
        grid: &Grid,
        time_band: Vec<f64>,
        space_band: Vec<f64>,
    ) -> Result<Self> {
        let (rows, cols) = (geometry.band_rows, geometry.band_cols);
        let n = grid.n();
        let n_t = grid.n_t();
        let want_time = rows * n;
        let want_space = (n_t + 1 - rows) * cols;
        if time_band.len() != want_time || space_band.len() != want_space {
            return Err(Error::Coverage(format!(
                "thick data has {} + {} cells, region needs {want_time} + {want_space}",
                time_band.len(),
                space_band.len()
            )));
        }
        if let Some(pos) = time_band.iter().chain(&space_band).position(|v| !v.is_finite()) {
            return Err(Error::Coverage(format!("thick data cell #{pos} is missing")));
        }
        if let Some(bad) = time_band.iter().chain(&space_band).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("thick density {bad} outside [0, 1]")));
        }
        Ok(ThickData {
            band_rows: rows,
            band_cols: cols,
            n,
            n_t,
            time_band,
            space_band,
        })
    }

    /// Slices the L-region out of a ground-truth field.
    pub fn from_truth(truth: &DensityField, geometry: &CollarGeometry) -> Result<Self> {
        let grid = truth.grid();
        let (rows, cols) = (geometry.band_rows, geometry.band_cols);
        let n = grid.n();
        if rows > grid.n_t() || cols >= n {
            return Err(Error::Coverage("ground truth smaller than the thick region".into()));
        }
        let mut time_band = Vec::with_capacity(rows * n);
        for k in 0..rows as isize {
            time_band.extend_from_slice(truth.interior_row(k));
        }
        let mut space_band = Vec::new();
        for k in rows as isize..=truth.k_max() {
            space_band.extend_from_slice(&truth.interior_row(k)[n - cols..]);
        }
        ThickData::new(geometry, grid, time_band, space_band)
    }

    pub fn band_rows(&self) -> usize {
        self.band_rows
    }

    pub fn band_cols(&self) -> usize {
        self.band_cols
    }

    pub fn cell_count(&self) -> usize {
        self.time_band.len() + self.space_band.len()
    }

    pub fn contains(&self, k: isize, j: usize) -> bool {
        k >= 0
            && (k as usize) <= self.n_t
            && j < self.n
            && ((k as usize) < self.band_rows || j >= self.n - self.band_cols)
    }

    pub fn initial_row(&self) -> &[f64] {
        &self.time_band[..self.n]
    }

    /// `rho(t, b)` for every step.
    pub fn boundary_column(&self) -> Vec<f64> {
        let mut col: Vec<f64> = (0..self.band_rows)
            .map(|k| self.time_band[k * self.n + self.n - 1])
            .collect();
        col.extend(
            self.space_band
                .chunks(self.band_cols)
                .map(|c| c[self.band_cols - 1]),
        );
        col
    }
}

/// Writes thick data into the field and returns the interior left to compute.
pub fn install_known_thick(field: &mut DensityField, thick: &ThickData) -> Result<Region> {
    let grid = *field.grid();
    if grid.n() != thick.n || grid.n_t() != thick.n_t {
        return Err(Error::Coverage(format!(
            "thick data is for {} cells x {} steps, field has {} x {}",
            thick.n,
            thick.n_t,
            grid.n(),
            grid.n_t()
        )));
    }
    let n = grid.n();
    for (k, chunk) in thick.time_band.chunks(n).enumerate() {
        field.row_mut(k as isize)[..n].copy_from_slice(chunk);
    }
    for (i, chunk) in thick.space_band.chunks(thick.band_cols).enumerate() {
        let k = (thick.band_rows + i) as isize;
        field.row_mut(k)[n - thick.band_cols..n].copy_from_slice(chunk);
    }
    Ok(Region {
        k0: thick.band_rows as isize,
        k1: grid.n_t() as isize,
        j0: 0,
        j1: n - thick.band_cols,
    })
}

/// `max(min{d, d_x, d_t / gamma}, dx)`; the temporal term is infinite for
/// `gamma = 0`. At the one-cell floor the operator is local.
pub fn effective_length(d: f64, d_x: f64, d_t: f64, gamma: f64, dx: f64) -> f64 {
    let temporal = if gamma > 0.0 { d_t / gamma } else { f64::INFINITY };
    d.min(d_x).min(temporal).max(dx)
}

/// The family shape rescaled onto `[0, d_eff]`, sampled at `dx`.
pub fn variable_kernel_at(family: KernelFamily, d_eff: f64, dx: f64) -> Result<DiscreteKernel> {
    if !(d_eff >= dx * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "effective length {d_eff} is shorter than one cell dx = {dx}"
        )));
    }
    if (d_eff / dx).round() <= 1.0 {
        return Ok(DiscreteKernel::local(dx));
    }
    Kernel::new(family, d_eff)?.sample(dx)
}

/// The first `n_eff` samples of the full kernel, renormalized.
pub fn truncated_kernel(full: &DiscreteKernel, n_eff: usize) -> Result<DiscreteKernel> {
    if n_eff == 0 || n_eff > full.n_d() {
        return Err(Error::Domain(format!(
            "cannot truncate {} samples to {n_eff}",
            full.n_d()
        )));
    }
    if n_eff == 1 {
        return Ok(DiscreteKernel::local(full.dx()));
    }
    DiscreteKernel::from_samples(&full.weights()[..n_eff], full.dx())
}

/// Per-cell kernels of the variable-length strategy.
///
/// Effective lengths are quantized to whole cells; one kernel per cell count
/// is built up front.
#[derive(Debug, Clone)]
pub struct VariableKernels {
    kernels: Vec<DiscreteKernel>,
    d: f64,
    gamma: f64,
    dx: f64,
    dt: f64,
    n: usize,
}

impl VariableKernels {
    pub fn new(kernel: &Kernel, gamma: f64, grid: &Grid, shape: VariableShape) -> Result<Self> {
        let dx = grid.dx();
        let full = kernel.sample(dx)?;
        let n_full = full.n_d();
        let mut kernels = Vec::with_capacity(n_full);
        for n_eff in 1..n_full {
            kernels.push(match shape {
                VariableShape::Rescale => {
                    variable_kernel_at(kernel.family(), n_eff as f64 * dx, dx)?
                }
                VariableShape::Truncate => truncated_kernel(&full, n_eff)?,
            });
        }
        kernels.push(full);
        Ok(VariableKernels {
            kernels,
            d: kernel.d(),
            gamma,
            dx,
            dt: grid.dt(),
            n: grid.n(),
        })
    }

    /// Effective length at physical row `k`, column `j` before quantization.
    pub fn length_at(&self, k: isize, j: usize) -> f64 {
        let d_x = (self.n - j) as f64 * self.dx;
        let d_t = k.max(0) as f64 * self.dt;
        effective_length(self.d, d_x, d_t, self.gamma, self.dx)
    }

    /// Kernel samples used at `(k, j)`.
    pub fn cells_at(&self, k: isize, j: usize) -> usize {
        let cells = (self.length_at(k, j) / self.dx).round() as usize;
        cells.clamp(1, self.kernels.len())
    }

    pub fn kernel_at(&self, k: isize, j: usize) -> &DiscreteKernel {
        &self.kernels[self.cells_at(k, j) - 1]
    }

    pub fn full(&self) -> &DiscreteKernel {
        self.kernels.last().expect("at least one kernel")
    }
}
