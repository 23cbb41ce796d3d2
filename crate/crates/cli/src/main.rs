use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfim_front_cli::config::{ConfigError, Experiment, LoadedConfig};
use tfim_front_cli::recipes::{figure_recipes, find};
use tfim_front_cli::run::run;

#[derive(Parser)]
#[command(name = "tfim-front", version, about = "Inhomogeneous driving of disordered transverse-field Ising chains")]
struct Cli {
    /// Worker threads for realizations and grid points.
    #[arg(long, global = true, env = "TFIM_FRONT_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gap, mixing element and threshold velocity along front sweeps.
    SpectralScan(RunArgs),
    /// Bulk gap distributions in the scaling variable.
    GapCollapse(RunArgs),
    /// Quenches with per-realization observables.
    Quench(RunArgs),
    /// Residual-energy quantiles over slope and ramp time.
    Landscape(RunArgs),
    /// Homogeneous ramps and power-law fits of the kink density.
    KzmSweep(RunArgs),
    /// Compare free-fermion results with exact diagonalization.
    OracleCheck(RunArgs),
    /// List the figure recipes.
    Recipes {
        /// Print the TOML of one recipe.
        #[arg(long)]
        show: Option<String>,
        /// Write every recipe as `<name>.toml` into this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML config file; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from a named recipe instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    recipe: Option<String>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    velocities: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    g_i: Option<f64>,
    #[arg(long)]
    g_f: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "realizations")]
    n_realizations: Option<usize>,
    #[arg(long = "seed")]
    base_seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Uniform unit couplings instead of disorder.
    #[arg(long)]
    clean: bool,
    /// Add homogeneous ramps of the same durations.
    #[arg(long)]
    homogeneous: bool,
    /// Cross-check quenches against exact diagonalization.
    #[arg(long)]
    oracle: bool,
}

fn load(experiment: Experiment, args: RunArgs) -> Result<LoadedConfig, ConfigError> {
    let mut loaded = match (&args.config, &args.recipe) {
        (Some(path), _) => LoadedConfig::from_file(path)?,
        (None, Some(name)) => match find(name) {
            Some(r) => LoadedConfig::from_config(r.config),
            None => {
                return Err(ConfigError {
                    file: None,
                    line: None,
                    message: format!("unknown recipe `{name}`; see `tfim-front recipes`"),
                })
            }
        },
        (None, None) => LoadedConfig::defaults(experiment),
    };
    if loaded.config.experiment != experiment {
        return Err(loaded.error(
            "experiment",
            format!("config is for `{}`, not `{}`", loaded.config.experiment.name(), experiment.name()),
        ));
    }
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                loaded.config.$field = v;
                loaded.mark_overridden(stringify!($field));
            }
        )*};
    }
    apply!(n_sites, alphas, times, velocities, taus, g_i, g_f, dt, n_realizations, base_seed, output);
    if args.clean {
        loaded.config.clean = true;
    }
    if args.homogeneous {
        loaded.config.include_homogeneous = true;
        loaded.mark_overridden("include_homogeneous");
    }
    if args.oracle {
        loaded.config.oracle = true;
        loaded.mark_overridden("oracle");
    }
    Ok(loaded)
}

fn recipes(show: Option<String>, write: Option<PathBuf>) -> ExitCode {
    if let Some(name) = show {
        return match find(&name) {
            Some(r) => {
                print!("{}", r.config.to_toml());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown recipe `{name}`");
                ExitCode::from(1)
            }
        };
    }
    if let Some(dir) = write {
        let result = std::fs::create_dir_all(&dir).and_then(|_| {
            for r in figure_recipes() {
                std::fs::write(dir.join(format!("{}.toml", r.name)), r.config.to_toml())?;
            }
            Ok(())
        });
        if let Err(e) = result {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    for r in figure_recipes() {
        println!("{:<22} {:<14} {}", r.name, r.config.experiment.name(), r.summary);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    // Usage errors are config errors; clap's own exit status 2 is reserved
    // for numerical failures here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot configure {w} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let (experiment, args) = match cli.command {
        Command::Recipes { show, write } => return recipes(show, write),
        Command::SpectralScan(a) => (Experiment::SpectralScan, a),
        Command::GapCollapse(a) => (Experiment::GapCollapse, a),
        Command::Quench(a) => (Experiment::Quench, a),
        Command::Landscape(a) => (Experiment::Landscape, a),
        Command::KzmSweep(a) => (Experiment::KzmSweep, a),
        Command::OracleCheck(a) => (Experiment::OracleCheck, a),
    };
    let loaded = match load(experiment, args) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&loaded) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", loaded.config.output.join(f).display());
            }
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            println!("{} finished in {:.1} s", report.experiment, report.wall_time_seconds);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
