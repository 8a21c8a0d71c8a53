//! Uniform space-time discretization and the density-field container.
//!
//! A [`Grid`] covers `(0, T) x (a, b)` with `n` cells of width `dx = (b - a) / n`
//! and `n_t = round(T / dt)` time steps. Column `j` is the cell
//! `[a + j dx, a + (j + 1) dx)`; the look-ahead window of a nonlocal stencil
//! starts at the upstream face of that cell. Row `k` is the time level `k dt`.
//!
//! A grid may carry collars: `collar_time` rows before `t = 0` and
//! `collar_space` columns beyond `x = b`. Collar rows use negative step
//! indices, so the physical row `k` is valid for `-collar_time <= k <= n_t`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    duration: f64,
    n: usize,
    dt: f64,
    n_t: usize,
    collar_space: usize,
    collar_time: usize,
}

/// Builds a grid, validating the discretization.
pub fn make_grid(
    a: f64,
    b: f64,
    duration: f64,
    n: usize,
    dt: f64,
    collar_space: usize,
    collar_time: usize,
) -> Result<Grid> {
    if !(a.is_finite() && b.is_finite() && duration.is_finite() && dt.is_finite()) {
        return Err(Error::Domain("grid parameters must be finite".into()));
    }
    if b <= a {
        return Err(Error::Domain(format!("b = {b} must exceed a = {a}")));
    }
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 cells, got {n}")));
    }
    if dt <= 0.0 {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    if duration <= 0.0 {
        return Err(Error::Domain(format!("T = {duration} must be positive")));
    }
    let n_t = (duration / dt).round();
    if n_t < 1.0 {
        return Err(Error::Resolution(format!(
            "T = {duration} is shorter than one step of dt = {dt}"
        )));
    }
    Ok(Grid {
        a,
        b,
        duration,
        n,
        dt,
        n_t: n_t as usize,
        collar_space,
        collar_time,
    })
}

impl Grid {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Requested horizon `T`. The simulated horizon is [`Grid::horizon`].
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Effective horizon `n_t * dt`.
    pub fn horizon(&self) -> f64 {
        self.n_t as f64 * self.dt
    }

    pub fn collar_space(&self) -> usize {
        self.collar_space
    }

    pub fn collar_time(&self) -> usize {
        self.collar_time
    }

    /// Number of stored rows, collar included.
    pub fn rows(&self) -> usize {
        self.n_t + 1 + self.collar_time
    }

    /// Number of stored columns, collar included.
    pub fn cols(&self) -> usize {
        self.n + self.collar_space
    }

    pub fn with_collars(&self, collar_space: usize, collar_time: usize) -> Grid {
        Grid {
            collar_space,
            collar_time,
            ..*self
        }
    }

    /// True when both grids discretize the same rectangle identically,
    /// ignoring collars.
    pub fn same_discretization(&self, other: &Grid) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.n == other.n
            && self.dt == other.dt
            && self.n_t == other.n_t
    }

    /// Cell-center coordinate of column `j` (collar columns lie beyond `b`).
    pub fn x_of(&self, j: usize) -> f64 {
        self.a + (j as f64 + 0.5) * self.dx()
    }

    /// Time of physical row `k` (negative inside the temporal collar).
    pub fn t_of(&self, k: isize) -> f64 {
        k as f64 * self.dt
    }

    /// Nearest stored `(row, column)` for a physical point, if covered.
    pub fn index_of(&self, t: f64, x: f64) -> Option<(isize, usize)> {
        let k = (t / self.dt).round();
        let j = ((x - self.a) / self.dx() - 0.5).round();
        if !k.is_finite() || !j.is_finite() {
            return None;
        }
        let (k, j) = (k as isize, j as isize);
        let k_ok = k >= -(self.collar_time as isize) && k <= self.n_t as isize;
        let j_ok = j >= 0 && (j as usize) < self.cols();
        (k_ok && j_ok).then_some((k, j as usize))
    }
}

/// Clamps a finite value into the normalized density range `[0, 1]`.
pub fn clamp_density(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Space-time array of normalized densities, row = time, column = space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    clamp_count: u64,
}

/// Sidecar metadata written next to an exported field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMetadata {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub n: usize,
    pub dt: f64,
    pub n_t: usize,
    pub collar_space: usize,
    pub collar_time: usize,
    pub rho_m: f64,
}

impl DensityField {
    /// A field filled with one value.
    pub fn filled(grid: Grid, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("density {value} outside [0, 1]")));
        }
        Ok(DensityField {
            grid,
            values: vec![value; grid.rows() * grid.cols()],
            clamp_count: 0,
        })
    }

    /// Wraps row-major values (first row is the earliest collar row).
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.rows() * grid.cols() {
            return Err(Error::Shape(format!(
                "expected {} x {} values, got {}",
                grid.rows(),
                grid.cols(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("density {bad} outside [0, 1]")));
        }
        Ok(DensityField {
            grid,
            values,
            clamp_count: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Clamp events recorded while this field was computed.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    pub(crate) fn add_clamps(&mut self, count: u64) {
        self.clamp_count += count;
    }

    pub fn k_min(&self) -> isize {
        -(self.grid.collar_time as isize)
    }

    pub fn k_max(&self) -> isize {
        self.grid.n_t as isize
    }

    pub fn has_row(&self, k: isize) -> bool {
        k >= self.k_min() && k <= self.k_max()
    }

    fn offset(&self, k: isize) -> usize {
        debug_assert!(self.has_row(k), "row {k} outside field");
        (k - self.k_min()) as usize * self.grid.cols()
    }

    /// Full stored row `k`, spatial collar included.
    pub fn row(&self, k: isize) -> &[f64] {
        let o = self.offset(k);
        &self.values[o..o + self.grid.cols()]
    }

    pub(crate) fn row_mut(&mut self, k: isize) -> &mut [f64] {
        let o = self.offset(k);
        let cols = self.grid.cols();
        &mut self.values[o..o + cols]
    }

    /// The `n` interior cells of row `k`.
    pub fn interior_row(&self, k: isize) -> &[f64] {
        &self.row(k)[..self.grid.n]
    }

    pub fn get(&self, k: isize, j: usize) -> f64 {
        self.row(k)[j]
    }

    pub fn try_get(&self, k: isize, j: usize) -> Option<f64> {
        (self.has_row(k) && j < self.grid.cols()).then(|| self.get(k, j))
    }

    pub fn set(&mut self, k: isize, j: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("density {value} outside [0, 1]")));
        }
        if !self.has_row(k) || j >= self.grid.cols() {
            return Err(Error::Shape(format!("cell ({k}, {j}) outside field")));
        }
        self.row_mut(k)[j] = value;
        Ok(())
    }

    /// Column `j` over the physical rows `0..=n_t`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..=self.k_max()).map(|k| self.get(k, j)).collect()
    }

    /// Full scan for values outside `[0, 1]`.
    pub fn all_in_unit_interval(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Copy restricted to the physical rectangle (no collars).
    pub fn without_collars(&self) -> DensityField {
        let grid = self.grid.with_collars(0, 0);
        let mut values = Vec::with_capacity(grid.rows() * grid.cols());
        for k in 0..=self.k_max() {
            values.extend_from_slice(self.interior_row(k));
        }
        DensityField {
            grid,
            values,
            clamp_count: self.clamp_count,
        }
    }

    pub fn metadata(&self, rho_m: f64) -> FieldMetadata {
        let g = &self.grid;
        FieldMetadata {
            a: g.a,
            b: g.b,
            duration: g.duration,
            n: g.n,
            dt: g.dt,
            n_t: g.n_t,
            collar_space: g.collar_space,
            collar_time: g.collar_time,
            rho_m,
        }
    }

    /// Writes `t,x,rho` records in time-major order plus a JSON sidecar.
    ///
    /// Densities stay normalized; `rho_m` is recorded in the sidecar only.
    pub fn write_csv(&self, path: &Path, rho_m: f64) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t,x,rho")?;
        for k in self.k_min()..=self.k_max() {
            let t = self.grid.t_of(k);
            for (j, rho) in self.row(k).iter().enumerate() {
                writeln!(w, "{},{},{}", t, self.grid.x_of(j), rho)?;
            }
        }
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.metadata(rho_m))?;
        std::fs::write(sidecar_path(path), meta + "\n")?;
        Ok(())
    }

    /// Reads a field written by [`DensityField::write_csv`].
    pub fn read_csv(path: &Path) -> Result<(DensityField, FieldMetadata)> {
        let meta_path = sidecar_path(path);
        let meta: FieldMetadata = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
        let grid = make_grid(
            meta.a,
            meta.b,
            meta.duration,
            meta.n,
            meta.dt,
            meta.collar_space,
            meta.collar_time,
        )?;
        if grid.n_t != meta.n_t {
            return Err(Error::Format(format!(
                "sidecar n_t = {} disagrees with round(T/dt) = {}",
                meta.n_t, grid.n_t
            )));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "rho"] {
            return Err(Error::Format(format!(
                "{}: expected header t,x,rho",
                path.display()
            )));
        }
        let mut values = Vec::with_capacity(grid.rows() * grid.cols());
        for record in reader.records() {
            let record = record?;
            let rho: f64 = record
                .get(2)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("bad density record {record:?}")))?;
            values.push(rho);
        }
        let field = DensityField::from_values(grid, values)?;
        Ok((field, meta))
    }
}

/// Rectangle of physical cells: rows `k0..=k1`, columns `j0..j1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub k0: isize,
    pub k1: isize,
    pub j0: usize,
    pub j1: usize,
}

impl Region {
    /// Rows `1..=n_t`, all `n` columns: everything after the initial row.
    pub fn full(grid: &Grid) -> Region {
        Region {
            k0: 1,
            k1: grid.n_t() as isize,
            j0: 0,
            j1: grid.n(),
        }
    }

    pub fn contains(&self, k: isize, j: usize) -> bool {
        k >= self.k0 && k <= self.k1 && j >= self.j0 && j < self.j1
    }

    pub fn is_empty(&self) -> bool {
        self.k1 < self.k0 || self.j1 <= self.j0
    }

    pub fn cell_count(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.k1 - self.k0 + 1) as usize * (self.j1 - self.j0)
        }
    }

    pub fn rows(&self) -> std::ops::RangeInclusive<isize> {
        self.k0..=self.k1
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.j0..self.j1
    }
}

/// `foo.csv` -> `foo.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}
