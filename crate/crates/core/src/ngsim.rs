//! Vehicle trajectories to gridded density.
//!
//! Input files are either comma separated with a header row (the public CSV
//! export) or whitespace separated without one (the original text release).
//! Columns are located through a [`ColumnMap`]; the defaults follow the public
//! US-101 schema. Frames are 0.1 s apart unless configured otherwise.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryStrategy, StrategyKind, ThickData};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::solver::BoundaryData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub vehicle_id: u64,
    pub frame: i64,
    /// `frame * frame_period` (s).
    pub time: f64,
    /// Longitudinal position along the segment (ft).
    pub position: f64,
    pub lane: i64,
}

/// A column given by header name or by zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub vehicle_id: ColumnRef,
    pub frame: ColumnRef,
    pub position: ColumnRef,
    pub lane: ColumnRef,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            vehicle_id: ColumnRef::Name("Vehicle_ID".into()),
            frame: ColumnRef::Name("Frame_ID".into()),
            position: ColumnRef::Name("Local_Y".into()),
            lane: ColumnRef::Name("Lane_ID".into()),
        }
    }
}

impl ColumnMap {
    /// Column positions in the original headerless text release.
    pub fn us101_text() -> Self {
        ColumnMap {
            vehicle_id: ColumnRef::Index(0),
            frame: ColumnRef::Index(1),
            position: ColumnRef::Index(5),
            lane: ColumnRef::Index(13),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    pub frame_period: f64,
    /// Keep only rows whose given column equals the value, e.g. `Location = us-101`.
    pub filter: Option<(ColumnRef, String)>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            columns: ColumnMap::default(),
            frame_period: 0.1,
            filter: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectories {
    /// Sorted by time, then vehicle.
    pub records: Vec<TrajectoryRecord>,
    pub malformed: usize,
    pub warnings: Vec<String>,
}

fn resolve(col: &ColumnRef, header: Option<&[String]>) -> Result<usize> {
    match (col, header) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(name), Some(h)) => h
            .iter()
            .position(|c| c.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("required column `{name}` not found"))),
        (ColumnRef::Name(name), None) => Err(Error::Format(format!(
            "column `{name}` given by name but the file has no header"
        ))),
    }
}

struct Parser {
    idx: [usize; 4],
    filter: Option<(usize, String)>,
    frame_period: f64,
}

impl Parser {
    fn parse<'a>(&self, fields: &[&'a str]) -> Option<TrajectoryRecord> {
        let get = |i: usize| fields.get(i).map(|s| s.trim());
        if let Some((i, want)) = &self.filter {
            if get(*i)? != want {
                return None;
            }
        }
        let vehicle_id = get(self.idx[0])?.parse::<f64>().ok()?;
        let frame = get(self.idx[1])?.parse::<f64>().ok()?;
        let position = get(self.idx[2])?.parse::<f64>().ok()?;
        let lane = get(self.idx[3])?.parse::<f64>().ok()?;
        if !(vehicle_id.is_finite() && frame.is_finite() && position.is_finite() && lane.is_finite()) {
            return None;
        }
        if vehicle_id < 0.0 || vehicle_id.fract() != 0.0 || frame.fract() != 0.0 || lane.fract() != 0.0 {
            return None;
        }
        let frame = frame as i64;
        Some(TrajectoryRecord {
            vehicle_id: vehicle_id as u64,
            frame,
            time: frame as f64 * self.frame_period,
            position,
            lane: lane as i64,
        })
    }
}

fn looks_like_header(line: &str) -> bool {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .any(|s| f64::from_str(s.trim()).is_err())
}

/// Reads trajectory records, skipping and counting rows that do not parse.
pub fn load_trajectories(path: &Path, opts: &LoadOptions) -> Result<Trajectories> {
    if !(opts.frame_period > 0.0) {
        return Err(Error::Config(format!(
            "frame period {} must be positive",
            opts.frame_period
        )));
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    while first.trim().is_empty() {
        first.clear();
        if reader.read_line(&mut first)? == 0 {
            let msg = format!("{} is empty; no trajectories loaded", path.display());
            warn!("{msg}");
            return Ok(Trajectories {
                warnings: vec![msg],
                ..Trajectories::default()
            });
        }
    }
    let comma = first.contains(',');
    let header: Option<Vec<String>> = looks_like_header(&first).then(|| {
        if comma {
            first.trim_end().split(',').map(|s| s.trim().to_string()).collect()
        } else {
            first.split_whitespace().map(str::to_string).collect()
        }
    });
    let c = &opts.columns;
    let h = header.as_deref();
    let parser = Parser {
        idx: [
            resolve(&c.vehicle_id, h)?,
            resolve(&c.frame, h)?,
            resolve(&c.position, h)?,
            resolve(&c.lane, h)?,
        ],
        filter: match &opts.filter {
            Some((col, v)) => Some((resolve(col, h)?, v.clone())),
            None => None,
        },
        frame_period: opts.frame_period,
    };

    let mut out = Trajectories::default();
    let mut filtered = 0usize;
    let mut take = |fields: &[&str], out: &mut Trajectories| match parser.parse(fields) {
        Some(r) => out.records.push(r),
        None if parser.filter.as_ref().is_some_and(|(i, v)| {
            fields.get(*i).is_some_and(|s| s.trim() != v)
        }) => filtered += 1,
        None => out.malformed += 1,
    };

    if comma {
        let rest: Box<dyn Read> = if header.is_some() {
            Box::new(reader)
        } else {
            Box::new(std::io::Cursor::new(first.clone().into_bytes()).chain(reader))
        };
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(rest);
        for rec in csv.records() {
            match rec {
                Ok(r) => {
                    let fields: Vec<&str> = r.iter().collect();
                    if fields.iter().all(|f| f.trim().is_empty()) {
                        continue;
                    }
                    take(&fields, &mut out);
                }
                Err(_) => out.malformed += 1,
            }
        }
    } else {
        if header.is_none() {
            let fields: Vec<&str> = first.split_whitespace().collect();
            take(&fields, &mut out);
        }
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            take(&fields, &mut out);
        }
    }
    if out.malformed > 0 {
        let msg = format!("skipped {} malformed rows in {}", out.malformed, path.display());
        warn!("{msg}");
        out.warnings.push(msg);
    }
    if filtered > 0 {
        log::info!("filter dropped {filtered} rows");
    }
    out.records
        .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.vehicle_id.cmp(&b.vehicle_id)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Distinct vehicles per cell at the frame nearest each time step.
    #[default]
    Count,
    /// Time spent per cell over the frames within half a step of each time
    /// step, divided by the window area.
    Edie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterConfig {
    pub grid: Grid,
    pub lanes: Vec<i64>,
    /// Jam density (veh/ft per lane) used to normalize.
    pub rho_m_physical: f64,
    pub frame_period: f64,
    /// Time (s) of row 0.
    pub t_start: f64,
    pub aggregation: Aggregation,
    /// Box filter width in cells along x; 0 or 1 disables smoothing.
    pub smoothing: usize,
}

impl RasterConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho_m_physical > 0.0 && self.rho_m_physical.is_finite()) {
            return Err(Error::Config(format!(
                "rho_m_physical = {} must be positive",
                self.rho_m_physical
            )));
        }
        if self.lanes.is_empty() {
            return Err(Error::Config("lane set is empty".into()));
        }
        if !(self.frame_period > 0.0) {
            return Err(Error::Config(format!(
                "frame period {} must be positive",
                self.frame_period
            )));
        }
        Ok(())
    }

    fn frame_at(&self, t: f64) -> i64 {
        (t / self.frame_period).round() as i64
    }
}

fn box_filter(row: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = row.len();
    (0..n)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + width - half).min(n);
            row[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Normalized density field from trajectories.
pub fn rasterize(records: &[TrajectoryRecord], cfg: &RasterConfig) -> Result<DensityField> {
    cfg.validate()?;
    let grid = cfg.grid.with_collars(0, 0);
    let (n, dx, a, b) = (grid.n(), grid.dx(), grid.a(), grid.b());

    let mut by_frame: BTreeMap<i64, Vec<(usize, u64)>> = BTreeMap::new();
    for r in records {
        if cfg.lanes.contains(&r.lane) && r.position >= a && r.position < b {
            let j = (((r.position - a) / dx) as usize).min(n - 1);
            by_frame.entry(r.frame).or_default().push((j, r.vehicle_id));
        }
    }
    for cells in by_frame.values_mut() {
        cells.sort_unstable();
        cells.dedup();
    }

    let scale = 1.0 / (dx * cfg.lanes.len() as f64 * cfg.rho_m_physical);
    let mut values = Vec::with_capacity(grid.rows() * n);
    let mut seen = 0usize;
    let mut clamped = 0usize;
    for k in 0..=grid.n_t() {
        let t = cfg.t_start + k as f64 * grid.dt();
        let mut counts = vec![0.0; n];
        let frames: Vec<i64> = match cfg.aggregation {
            Aggregation::Count => vec![cfg.frame_at(t)],
            Aggregation::Edie => {
                let f0 = ((t - 0.5 * grid.dt()) / cfg.frame_period - 1e-9).ceil() as i64;
                let f1 = ((t + 0.5 * grid.dt()) / cfg.frame_period - 1e-9).ceil() as i64;
                (f0..f1.max(f0 + 1)).collect()
            }
        };
        for f in &frames {
            if let Some(cells) = by_frame.get(f) {
                seen += cells.len();
                for (j, _) in cells {
                    counts[*j] += 1.0;
                }
            }
        }
        let mut row: Vec<f64> = counts
            .iter()
            .map(|c| c / frames.len() as f64 * scale)
            .collect();
        if cfg.smoothing > 1 {
            row = box_filter(&row, cfg.smoothing);
        }
        for v in row {
            if v > 1.0 {
                clamped += 1;
            }
            values.push(v.min(1.0));
        }
    }
    if seen == 0 {
        return Err(Error::EmptyWindow(format!(
            "no records in lanes {:?}, x in [{a}, {b}), t in [{}, {}]",
            cfg.lanes,
            cfg.t_start,
            cfg.t_start + grid.horizon()
        )));
    }
    if clamped > 0 {
        warn!("{clamped} cells exceeded the jam density and were clamped to 1");
    }
    DensityField::from_values(grid, values)
}

/// Slices exactly the data the strategy consumes out of a ground-truth field.
pub fn extract_scenario_data(field: &DensityField, strategy: &BoundaryStrategy) -> Result<BoundaryData> {
    let grid = field.grid();
    match strategy.kind {
        StrategyKind::ContinuousExtension | StrategyKind::VariableLength => Ok(BoundaryData::Thin {
            initial: field.interior_row(0).to_vec(),
            boundary: field.column(grid.n() - 1),
        }),
        StrategyKind::KnownThick => {
            let geo = strategy.geometry(grid)?;
            Ok(BoundaryData::Thick(ThickData::from_truth(field, &geo)?))
        }
    }
}

/// Vehicle snapshots whose per-frame positions follow a density field.
///
/// At each time step the expected vehicle count is `sum rho dx lanes
/// rho_m_physical`; that many vehicles (rounded) are placed by inverse-CDF
/// sampling of the piecewise-constant density and spread uniformly over the
/// lanes. Vehicles are not linked across frames.
pub fn synthesize_trajectories<R: Rng>(
    field: &DensityField,
    cfg: &RasterConfig,
    rng: &mut R,
) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate()?;
    let grid = field.grid();
    let (n, dx, a) = (grid.n(), grid.dx(), grid.a());
    let per_density = dx * cfg.lanes.len() as f64 * cfg.rho_m_physical;
    let mut records = Vec::new();
    let mut next_id: u64 = 1;
    let mut last_frame = None;
    for k in 0..=grid.n_t() as isize {
        let t = cfg.t_start + k as f64 * grid.dt();
        let frame = cfg.frame_at(t);
        // Steps shorter than a frame share it; place vehicles once.
        if last_frame == Some(frame) {
            continue;
        }
        last_frame = Some(frame);
        let row = field.interior_row(k);
        let mut cdf = Vec::with_capacity(n);
        let mut total = 0.0;
        for &rho in row {
            total += rho * per_density;
            cdf.push(total);
        }
        let count = total.round() as usize;
        if count == 0 {
            continue;
        }
        for _ in 0..count {
            let u = rng.gen::<f64>() * total;
            let j = cdf.partition_point(|&c| c <= u).min(n - 1);
            let position = a + (j as f64 + rng.gen::<f64>()) * dx;
            let lane = cfg.lanes[rng.gen_range(0..cfg.lanes.len())];
            records.push(TrajectoryRecord {
                vehicle_id: next_id,
                frame,
                time: frame as f64 * cfg.frame_period,
                position: position.min(grid.b() - 1e-9 * dx),
                lane,
            });
            next_id += 1;
        }
    }
    Ok(records)
}

/// Distinct vehicles at one frame inside the grid window and lane set.
pub fn count_in_window(records: &[TrajectoryRecord], cfg: &RasterConfig, frame: i64) -> usize {
    let mut ids = HashSet::new();
    for r in records {
        if r.frame == frame
            && cfg.lanes.contains(&r.lane)
            && r.position >= cfg.grid.a()
            && r.position < cfg.grid.b()
        {
            ids.insert(r.vehicle_id);
        }
    }
    ids.len()
}
