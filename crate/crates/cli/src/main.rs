use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonlocal_lwr::{Error, Result};
use nonlocal_lwr_cli::commands::{self, Globals, KernelQuery};
use nonlocal_lwr_cli::config::Config;
use nonlocal_lwr_cli::{error_line, exit_code};

#[derive(Parser)]
#[command(name = "nlwr", version, about = "Local and nonlocal LWR traffic simulation and reconstruction")]
struct Cli {
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic trajectory fixtures.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario.
    Simulate,
    /// Rasterize trajectories, then simulate from the extracted data and compare.
    Reconstruct,
    /// Run every combination of the [sweep] section.
    Sweep,
    /// Print kernel constants and weights.
    KernelInfo(KernelArgs),
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    family: Option<String>,
    /// Kernel length (ft).
    #[arg(long)]
    d: Option<f64>,
    /// Sample spacing (ft).
    #[arg(long)]
    dx: Option<f64>,
    /// Delay (s/ft).
    #[arg(long)]
    gamma: Option<f64>,
    /// greenshields or underwood.
    #[arg(long)]
    fd: Option<String>,
    #[arg(long)]
    v_f: Option<f64>,
    #[arg(long)]
    rho_c: Option<f64>,
}

fn config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(p) => Config::load(p),
        None => Err(Error::Config("--config is required".into())),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let globals = Globals {
        out_dir: cli.out_dir.clone(),
        threads: cli.threads,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Simulate => commands::simulate(&config(cli)?, &globals).map(|_| ()),
        Command::Reconstruct => commands::reconstruct(&config(cli)?, &globals).map(|_| ()),
        Command::Sweep => commands::sweep(&config(cli)?, &globals).map(|_| ()),
        Command::KernelInfo(a) => {
            let cfg = cli.config.as_deref().map(Config::load).transpose()?;
            let q = KernelQuery {
                family: a.family.clone(),
                d: a.d,
                dx: a.dx,
                gamma: a.gamma,
                fd: a.fd.clone(),
                v_f: a.v_f,
                rho_c: a.rho_c,
            };
            let report = commands::kernel_info(&q, cfg.as_ref())?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            commands::emit(&report.text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
