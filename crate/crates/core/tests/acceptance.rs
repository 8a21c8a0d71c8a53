//! Acceptance suite. One line per criterion; exits nonzero on any FAIL.
//!
//! Criteria 9-11 need the public US-101 trajectories; point
//! `NGSIM_US101_PATH` at the CSV (or whitespace text) release to run them.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonlocal_lwr::boundary::{BoundaryStrategy, StrategyKind, VariableKernels, VariableShape};
use nonlocal_lwr::ngsim::{
    extract_scenario_data, load_trajectories, rasterize, Aggregation, ColumnMap, LoadOptions, RasterConfig,
};
use nonlocal_lwr::nonlocal::{nonlocal_density_spacetime, nonlocal_density_spatial};
use nonlocal_lwr::solver::run_periodic;
use nonlocal_lwr::{
    make_grid, relative_l2, run, BoundaryData, DelaySpec, DensityField, FundamentalDiagram, Kernel, KernelFamily,
    Model, Scenario, ThickData,
};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
    /// Reported miss that does not fail the suite.
    Miss,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        status: Status::Fail,
        detail: detail.into(),
    }
}

// Adaptive Simpson, kept apart from the library's Gauss-Kronrod rule so the
// two integrations are independent.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

fn greenshields() -> FundamentalDiagram {
    FundamentalDiagram::greenshields(60.0).unwrap()
}

fn kernel_normalization() -> Outcome {
    let start = Instant::now();
    let mut worst_q: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for family in KernelFamily::ALL {
        for d in [40.0, 100.0] {
            let k = Kernel::new(family, d).unwrap();
            let q = simpson(&|s: f64| k.eval(s).unwrap(), 0.0, d, 1e-12);
            worst_q = worst_q.max((q - 1.0).abs());
            for dx in [1.0, 2.0, 4.0, 10.0] {
                let dk = k.sample(dx).unwrap();
                let sum: f64 = dk.weights().iter().map(|w| w * dx).sum();
                worst_w = worst_w.max((sum - 1.0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    // a few ulps of summation error is machine precision here
    let eps_tol = 8.0 * f64::EPSILON;
    Outcome::check(
        worst_q <= 1e-8 && worst_w <= eps_tol && secs < 1.0,
        format!("max |int-1| = {worst_q:.2e}, max |sum w dx - 1| = {worst_w:.2e}, {secs:.3} s"),
    )
}

fn beta_decay() -> Outcome {
    let mut worst_beta: f64 = 0.0;
    let mut worst_rate: f64 = 0.0;
    let mut below = 0usize;
    for family in KernelFamily::ALL.into_iter().filter(|f| *f != KernelFamily::Constant) {
        for d in [40.0, 100.0] {
            let k = Kernel::new(family, d).unwrap();
            let beta = k.beta_bound().unwrap();
            let ln = |s: f64| k.eval(s).unwrap().ln();
            let mut oracle_min = f64::INFINITY;
            let mut rates = Vec::new();
            for i in 0..10_000 {
                let s = d * i as f64 / 10_000.0;
                let h = 1e-4 * (d - s).min(d);
                let (f0, f1, f2) = (ln(s), ln(s + h), ln(s + 2.0 * h));
                if !(f0.is_finite() && f1.is_finite() && f2.is_finite()) {
                    // eta underflows close to d for the smooth family
                    continue;
                }
                let rate = -(-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
                oracle_min = oracle_min.min(rate);
                worst_rate = worst_rate.max(((rate - k.decay_rate(s)) / k.decay_rate(s)).abs());
                rates.push(rate);
            }
            below += rates.iter().filter(|r| **r < beta * (1.0 - 1e-6)).count();
            worst_beta = worst_beta.max(((oracle_min - beta) / beta).abs());
        }
    }
    Outcome::check(
        worst_beta <= 1e-6 && worst_rate <= 1e-6 && below == 0,
        format!("max rel |min rate - beta| = {worst_beta:.2e}, max rel rate error = {worst_rate:.2e}, points below beta = {below}"),
    )
}

fn random_thin(rng: &mut ChaCha8Rng, n: usize, n_t: usize) -> BoundaryData {
    BoundaryData::Thin {
        initial: (0..n).map(|_| rng.gen_range(0.05..0.95)).collect(),
        boundary: (0..=n_t).map(|_| rng.gen_range(0.05..0.95)).collect(),
    }
}

fn same_bits(a: &DensityField, b: &DensityField) -> bool {
    let (a, b) = (a.without_collars(), b.without_collars());
    a.values().len() == b.values().len() && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn reduction_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = make_grid(0.0, 500.0, 5.0, 50, 0.1, 0, 0).unwrap();
    let data = random_thin(&mut rng, 50, 50);
    let scenario = |model, kernel: Option<Kernel>, gamma| Scenario {
        grid,
        fd: greenshields(),
        kernel,
        gamma,
        strategy: StrategyKind::ContinuousExtension,
        variable_shape: VariableShape::Rescale,
        model,
        data: data.clone(),
        left: None,
    };

    let mut mismatches = Vec::new();
    for family in KernelFamily::ALL {
        let k = Kernel::new(family, 40.0).unwrap();
        let st = run(&scenario(Model::SpaceTimeNonlocal, Some(k), 0.0)).unwrap();
        let sp = run(&scenario(Model::SpatialNonlocal, Some(k), 0.0)).unwrap();
        if !same_bits(&st.field, &sp.field) {
            mismatches.push(format!("{family} gamma=0"));
        }
        let k1 = Kernel::new(family, 10.0).unwrap();
        let classical = run(&scenario(Model::Classical, None, 0.0)).unwrap();
        for model in [Model::SpatialNonlocal, Model::SpaceTimeNonlocal] {
            let gamma = if model == Model::SpatialNonlocal { 0.0 } else { 0.01 };
            let nl = run(&scenario(model, Some(k1), gamma)).unwrap();
            if !same_bits(&nl.field, &classical.field) {
                mismatches.push(format!("{family} n_d=1 {model}"));
            }
        }
    }

    // the operators themselves on a 50x50 random field
    let g = make_grid(0.0, 500.0, 4.9, 50, 0.1, 0, 0).unwrap();
    let values: Vec<f64> = (0..50 * 50).map(|_| rng.gen_range(0.0..1.0)).collect();
    let field = DensityField::from_values(g, values).unwrap();
    let dk = Kernel::new(KernelFamily::ShiftedExponential, 40.0).unwrap().sample(10.0).unwrap();
    let delay = DelaySpec::new(0.0, 10.0, 0.1).unwrap();
    for k in 0..50isize {
        for j in 0..50 - dk.n_d() {
            let a = nonlocal_density_spacetime(&field, k, j, &dk, &delay).unwrap();
            let b = nonlocal_density_spatial(&field, k, j, &dk).unwrap();
            if a.to_bits() != b.to_bits() {
                mismatches.push(format!("operator at ({k},{j})"));
            }
        }
    }
    Outcome::check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "spacetime(gamma=0) == spatial and n_d=1 == classical, bit for bit".into()
        } else {
            format!("mismatches: {}", mismatches.join(", "))
        },
    )
}

fn constant_fixed_point() -> Outcome {
    // 500 steps on 100 cells
    let grid = make_grid(0.0, 1000.0, 50.0, 100, 0.1, 0, 0).unwrap();
    let tol = 64.0 * f64::EPSILON;
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let mut errors = Vec::new();
    for c in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let truth = DensityField::filled(grid, c).unwrap();
        let mut cases: Vec<(Model, Option<Kernel>, f64, StrategyKind)> =
            vec![(Model::Classical, None, 0.0, StrategyKind::ContinuousExtension)];
        for family in KernelFamily::ALL {
            let k = Kernel::new(family, 40.0).unwrap();
            for strategy in StrategyKind::ALL {
                cases.push((Model::SpatialNonlocal, Some(k), 0.0, strategy));
                cases.push((Model::SpaceTimeNonlocal, Some(k), 0.01, strategy));
            }
        }
        for (model, kernel, gamma, strategy) in cases {
            let data = match strategy {
                StrategyKind::KnownThick => {
                    let geo = BoundaryStrategy::new(strategy, 40.0, gamma).unwrap().geometry(&grid).unwrap();
                    BoundaryData::Thick(ThickData::from_truth(&truth, &geo).unwrap())
                }
                _ => BoundaryData::Thin {
                    initial: vec![c; 100],
                    boundary: vec![c; grid.n_t() + 1],
                },
            };
            let s = Scenario {
                grid,
                fd: greenshields(),
                kernel,
                gamma,
                strategy,
                variable_shape: VariableShape::Rescale,
                model,
                data,
                left: None,
            };
            match run(&s) {
                Ok(out) => {
                    runs += 1;
                    for v in out.field.without_collars().values() {
                        worst = worst.max((v - c).abs());
                    }
                }
                Err(e) => errors.push(format!("{model}/{strategy}: {e}")),
            }
        }
    }
    Outcome::check(
        errors.is_empty() && worst <= tol,
        format!("{runs} runs, max |rho - c| = {worst:.2e} (tol {tol:.1e}){}", errors.join("; ")),
    )
}

fn conservation() -> Outcome {
    let grid = make_grid(0.0, 1000.0, 100.0, 100, 0.1, 0, 0).unwrap();
    let initial: Vec<f64> = (0..100)
        .map(|j| {
            let x = grid.x_of(j) / 1000.0;
            0.45 + 0.3 * (std::f64::consts::TAU * x).sin() + 0.1 * (3.0 * std::f64::consts::TAU * x).cos()
        })
        .collect();
    let mass = |row: &[f64]| row.iter().sum::<f64>() * grid.dx();
    let m0 = mass(&initial);
    let mut worst: f64 = 0.0;
    let mut clamps = 0;
    for family in KernelFamily::ALL {
        let dk = Kernel::new(family, 40.0).unwrap().sample(grid.dx()).unwrap();
        for gamma in [0.0, 0.01] {
            let delay = DelaySpec::new(gamma, grid.dx(), grid.dt()).unwrap();
            let field = match run_periodic(&greenshields(), Some(&dk), &delay, &grid, &initial) {
                Ok(f) => f,
                Err(e) => return fail(format!("{family}: {e}")),
            };
            clamps += field.clamp_count();
            for k in 0..=grid.n_t() as isize {
                worst = worst.max((mass(field.row(k)) - m0).abs());
            }
        }
    }
    Outcome::check(
        worst <= 1e-8 && clamps == 0,
        format!("1000 steps, max |mass drift| = {worst:.2e} (mass {m0:.1}), clamps = {clamps}"),
    )
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let length = 400.0;
    let duration = 2.0;
    let d = 40.0;
    let fd = greenshields();
    let solve = |family: KernelFamily, dx: f64| -> nonlocal_lwr::Result<Vec<f64>> {
        let n = (length / dx).round() as usize;
        let dt = dx / 120.0;
        let grid = make_grid(0.0, length, duration, n, dt, 0, 0)?;
        let w = std::f64::consts::TAU / length;
        // exact cell averages of 0.5 + 0.3 sin(w x)
        let initial: Vec<f64> = (0..n)
            .map(|j| {
                let (xl, xr) = (j as f64 * dx, (j + 1) as f64 * dx);
                0.5 + 0.3 * ((w * xl).cos() - (w * xr).cos()) / (w * dx)
            })
            .collect();
        let dk = Kernel::new(family, d)?.sample(dx)?;
        let field = run_periodic(&fd, Some(&dk), &DelaySpec::none(), &grid, &initial)?;
        Ok(field.row(grid.n_t() as isize).to_vec())
    };
    let coarsen = |fine: &[f64], factor: usize| -> Vec<f64> {
        fine.chunks(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect()
    };
    let dxs = [4.0, 2.0, 1.0];
    let reference_dx = 0.25;
    let mut lines = Vec::new();
    let mut ok = true;
    for family in KernelFamily::ALL {
        let reference = match solve(family, reference_dx) {
            Ok(r) => r,
            Err(e) => return fail(format!("{family} reference: {e}")),
        };
        let mut errs = Vec::new();
        for dx in dxs {
            let coarse = match solve(family, dx) {
                Ok(r) => r,
                Err(e) => return fail(format!("{family} dx={dx}: {e}")),
            };
            let r = coarsen(&reference, (dx / reference_dx).round() as usize);
            let e2: f64 = coarse.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * dx;
            errs.push(e2.sqrt());
        }
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        ok &= monotone && orders.iter().all(|p| *p >= 0.7);
        lines.push(format!(
            "{family}: orders {}",
            orders.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join("/")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    Outcome::check(ok, format!("{}; {secs:.1} s", lines.join(", ")))
}

fn variable_monotonicity() -> Outcome {
    let grid = make_grid(0.0, 2000.0, 60.0, 200, 0.1, 0, 0).unwrap();
    let mut violations = 0usize;
    let mut cells = 0usize;
    for family in KernelFamily::ALL {
        for d in [40.0, 100.0] {
            let k = Kernel::new(family, d).unwrap();
            let vk = match VariableKernels::new(&k, 0.01, &grid, VariableShape::Rescale) {
                Ok(v) => v,
                Err(e) => return fail(format!("{family} d={d}: {e}")),
            };
            for k in 0..=grid.n_t() as isize {
                for j in 0..grid.n() {
                    cells += 1;
                    let here = vk.length_at(k, j);
                    if k > 0 && vk.length_at(k - 1, j) > here {
                        violations += 1;
                    }
                    if j + 1 < grid.n() && vk.length_at(k, j + 1) > here {
                        violations += 1;
                    }
                    if vk.cells_at(k, j) != vk.kernel_at(k, j).n_d() {
                        violations += 1;
                    }
                }
            }
        }
    }
    Outcome::check(violations == 0, format!("{cells} cells scanned, {violations} violations"))
}

fn smooth_constant() -> Outcome {
    let mass = simpson(
        &|x: f64| {
            let u = 1.0 - x;
            if u <= 0.0 {
                0.0
            } else {
                (-1.0 / (u * u)).exp()
            }
        },
        0.0,
        1.0,
        1e-14,
    );
    let lib = 1.0 / Kernel::new(KernelFamily::SmoothExponential, 1.0).unwrap().k();
    Outcome::check(
        (mass - 0.0891).abs() <= 0.0005 && (lib - 0.0891).abs() <= 0.0005 && (mass - lib).abs() < 1e-10,
        format!("integral = {mass:.6}, 1/K(1) = {lib:.6}"),
    )
}

struct Trial {
    strategy: Option<StrategyKind>,
    family: Option<KernelFamily>,
    d: f64,
    er: f64,
}

/// Reconstruction errors on the reference US-101 configuration.
fn ngsim_trials(path: &Path) -> nonlocal_lwr::Result<Vec<Trial>> {
    let mut opts = LoadOptions::default();
    let traj = match load_trajectories(path, &opts) {
        Ok(t) if !t.records.is_empty() => t,
        _ => {
            opts.columns = ColumnMap::us101_text();
            load_trajectories(path, &opts)?
        }
    };
    let env_f64 = |name: &str, default: f64| {
        std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
    };
    let t0 = traj.records.iter().map(|r| r.time).fold(f64::INFINITY, f64::min);
    let grid = make_grid(200.0, 1800.0, 300.0, 160, 0.1, 0, 0)?;
    let cfg = RasterConfig {
        grid,
        lanes: vec![1, 2, 3, 4, 5],
        rho_m_physical: env_f64("NGSIM_RHO_M", 0.05),
        frame_period: opts.frame_period,
        // skip the first two minutes while the section fills
        t_start: t0 + env_f64("NGSIM_WARMUP", 120.0),
        aggregation: Aggregation::Count,
        smoothing: 3,
    };
    let truth = rasterize(&traj.records, &cfg)?;
    let fd = greenshields();
    let gamma = 0.01;
    let evaluate = |model, kernel: Option<Kernel>, strategy: StrategyKind| -> nonlocal_lwr::Result<f64> {
        let d = kernel.map_or(0.0, |k| k.d());
        let data = match kernel {
            Some(_) => extract_scenario_data(&truth, &BoundaryStrategy::new(strategy, d, gamma)?)?,
            None => BoundaryData::Thin {
                initial: truth.interior_row(0).to_vec(),
                boundary: truth.column(grid.n() - 1),
            },
        };
        let out = run(&Scenario {
            grid,
            fd,
            kernel,
            gamma: if kernel.is_some() { gamma } else { 0.0 },
            strategy,
            variable_shape: VariableShape::Rescale,
            model,
            data,
            left: None,
        })?;
        Ok(relative_l2(&out.field, &truth, &out.info.interior)?.er)
    };
    let mut trials = vec![Trial {
        strategy: None,
        family: None,
        d: 0.0,
        er: evaluate(Model::Classical, None, StrategyKind::ContinuousExtension)?,
    }];
    for strategy in StrategyKind::ALL {
        for family in KernelFamily::ALL.into_iter().filter(|f| *f != KernelFamily::Constant) {
            for d in [40.0, 100.0] {
                let k = Kernel::new(family, d)?;
                trials.push(Trial {
                    strategy: Some(strategy),
                    family: Some(family),
                    d,
                    er: evaluate(Model::SpaceTimeNonlocal, Some(k), strategy)?,
                });
            }
        }
    }
    Ok(trials)
}

fn find(trials: &[Trial], strategy: StrategyKind, family: KernelFamily, d: f64) -> f64 {
    trials
        .iter()
        .find(|t| t.strategy == Some(strategy) && t.family == Some(family) && t.d == d)
        .map(|t| t.er)
        .unwrap()
}

fn ngsim_criteria() -> [Outcome; 3] {
    let skip = |why: &str| Outcome {
        status: Status::Skip,
        detail: why.to_string(),
    };
    let Ok(path) = std::env::var("NGSIM_US101_PATH") else {
        return [
            skip("NGSIM_US101_PATH not set"),
            skip("NGSIM_US101_PATH not set"),
            skip("NGSIM_US101_PATH not set"),
        ];
    };
    let trials = match ngsim_trials(Path::new(&path)) {
        Ok(t) => t,
        Err(e) => {
            let msg = format!("{}: {e}", e.class());
            return [fail(msg.clone()), fail(msg.clone()), fail(msg)];
        }
    };
    let classical = trials[0].er;
    let families: Vec<KernelFamily> = KernelFamily::ALL.into_iter().filter(|f| *f != KernelFamily::Constant).collect();

    let beaten = trials[1..].iter().filter(|t| t.er >= classical).count();
    let mut unordered = Vec::new();
    for &f in &families {
        let kt = find(&trials, StrategyKind::KnownThick, f, 40.0);
        let vl = find(&trials, StrategyKind::VariableLength, f, 40.0);
        let ce = find(&trials, StrategyKind::ContinuousExtension, f, 40.0);
        if !(kt <= vl && vl <= ce) {
            unordered.push(format!("{f} ({kt:.4}/{vl:.4}/{ce:.4})"));
        }
    }
    let c9 = Outcome::check(
        beaten == 0 && unordered.is_empty(),
        format!(
            "classical {classical:.4}; {beaten} nonlocal runs not below it; 40 ft order violations: {}",
            if unordered.is_empty() { "none".into() } else { unordered.join(", ") }
        ),
    );

    let mut worse = Vec::new();
    for strategy in StrategyKind::ALL {
        for &f in &families {
            let (a, b) = (find(&trials, strategy, f, 40.0), find(&trials, strategy, f, 100.0));
            if !(a < b) {
                worse.push(format!("{strategy}/{f} ({a:.4} vs {b:.4})"));
            }
        }
    }
    let c10 = Outcome::check(
        worse.is_empty(),
        if worse.is_empty() { "40 ft below 100 ft in all 12 cells".into() } else { worse.join(", ") },
    );

    let best = find(&trials, StrategyKind::KnownThick, KernelFamily::ShiftedExponential, 40.0);
    let hit = (classical - 0.2133).abs() <= 0.03 && (best - 0.1297).abs() <= 0.03;
    let c11 = Outcome {
        status: if hit { Status::Pass } else { Status::Miss },
        detail: format!("classical {classical:.4} (target 0.2133), known_thick/shifted/40 {best:.4} (target 0.1297), tol 0.03"),
    };
    [c9, c10, c11]
}

fn main() {
    let names = [
        "kernel normalization",
        "beta decay bound",
        "reduction chain",
        "constant state fixed point",
        "periodic conservation",
        "convergence order",
        "variable length monotonicity",
        "smooth kernel constant",
        "qualitative ordering on US-101",
        "40 ft beats 100 ft on US-101",
        "numeric match on US-101",
    ];
    let mut outcomes = vec![
        kernel_normalization(),
        beta_decay(),
        reduction_chain(),
        constant_fixed_point(),
        conservation(),
        convergence(),
        variable_monotonicity(),
        smooth_constant(),
    ];
    outcomes.extend(ngsim_criteria());

    let mut failed = 0;
    for (i, (name, o)) in names.iter().zip(&outcomes).enumerate() {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
            Status::Miss => "MISS",
        };
        println!("[{tag}] {:>2} {name}: {}", i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
