//! Seeded synthetic ground truth for runs without a trajectory file.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonlocal_lwr::ngsim::{rasterize, synthesize_trajectories, RasterConfig};
use nonlocal_lwr::{
    run, BoundaryData, DensityField, FundamentalDiagram, Kernel, KernelFamily, Model, Result,
    Scenario, StrategyKind, VariableShape,
};

/// Evolves a random smooth profile with a downstream congestion ramp under a
/// spatial nonlocal model, then samples vehicles from it and rasterizes them.
pub fn synthetic_truth(raster: &RasterConfig, fd: &FundamentalDiagram, seed: u64) -> Result<DensityField> {
    let grid = raster.grid.with_collars(0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.b() - grid.a();
    let modes: Vec<(f64, f64)> = (1..=3)
        .map(|_| (rng.gen_range(0.02..0.08), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let x0 = grid.a() + rng.gen_range(0.4..0.8) * len;
    let initial: Vec<f64> = (0..grid.n())
        .map(|j| {
            let x = grid.x_of(j);
            let wave: f64 = modes
                .iter()
                .enumerate()
                .map(|(m, (amp, ph))| amp * (2.0 * PI * (m + 1) as f64 * (x - grid.a()) / len + ph).sin())
                .sum();
            let jam = 0.35 * (-((x - x0) / (0.1 * len)).powi(2)).exp();
            (0.2 + wave + jam).clamp(0.02, 0.95)
        })
        .collect();
    let horizon = grid.horizon();
    let t0 = rng.gen_range(0.2..0.6) * horizon;
    let tau = horizon / 20.0;
    let boundary: Vec<f64> = (0..=grid.n_t())
        .map(|k| 0.25 + 0.35 / (1.0 + (-(grid.t_of(k as isize) - t0) / tau).exp()))
        .collect();
    let scenario = Scenario {
        grid,
        fd: *fd,
        kernel: Some(Kernel::new(KernelFamily::Exponential, 4.0 * grid.dx())?),
        gamma: 0.0,
        strategy: StrategyKind::ContinuousExtension,
        variable_shape: VariableShape::Rescale,
        model: Model::SpatialNonlocal,
        data: BoundaryData::Thin { initial, boundary },
        left: None,
    };
    let field = run(&scenario)?.field.without_collars();
    let records = synthesize_trajectories(&field, raster, &mut rng)?;
    rasterize(&records, raster)
}
