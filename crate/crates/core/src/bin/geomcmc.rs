use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geomcmc::experiment::{
    cmd_benchmark, cmd_gen_data, cmd_sample, exit_code, format_table, ExperimentConfig, GenSpec,
};
use geomcmc::models::MixtureRecipe;
use geomcmc::{Error, Result};

#[derive(Parser)]
#[command(name = "geomcmc", version, about = "Riemannian manifold HMC and Lagrangian Monte Carlo samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write trajectory positions (sample only).
    #[arg(long)]
    trace: bool,
    /// Worker threads for the benchmark grid.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write samples, a summary and an optional trace.
    Sample {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every model × sampler cell and write a results table.
    Benchmark {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a synthetic dataset and its metadata.
    GenData {
        family: Family,
        /// Number of observations.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Number of covariates (logistic).
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Mixture recipe (gmm).
        #[arg(long)]
        recipe: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Logistic,
    Banana,
    Gmm,
}

fn load(path: &Path, o: &Overrides) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(out) = &o.out {
        config.output_dir = out.clone();
    }
    if o.trace {
        config.trace = true;
    }
    if let Some(w) = o.workers {
        config.workers = w;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { config, overrides } => {
            let (config, base) = load(&config, &overrides)?;
            let out = cmd_sample(&config, &base)?;
            let c = &out.chain;
            println!(
                "{} AP {:.3}  s {:.3e}  ESS {}  min(ESS)/s {:.2}",
                c.method.label(),
                c.acceptance_rate,
                c.seconds_per_iteration,
                c.ess,
                c.ess.min_ess_per_second
            );
            println!("wrote {} and {}", out.samples.display(), out.summary.display());
            if let Some(t) = out.trace {
                println!("wrote {}", t.display());
            }
        }
        Command::Benchmark { config, overrides } => {
            let (config, base) = load(&config, &overrides)?;
            let out = cmd_benchmark(&config, &base)?;
            print!("{}", format_table(&out.rows));
            println!("wrote {} and {}", out.csv.display(), out.table.display());
        }
        Command::GenData {
            family,
            n,
            d,
            recipe,
            seed,
            out,
        } => {
            let spec = match family {
                Family::Logistic => GenSpec::Logistic { n, d },
                Family::Banana => GenSpec::Banana { n },
                Family::Gmm => {
                    let name = recipe
                        .ok_or_else(|| Error::Config("gmm needs --recipe".into()))?;
                    GenSpec::Gmm {
                        recipe: MixtureRecipe::parse(&name)?,
                        n,
                    }
                }
            };
            let out = out.unwrap_or_else(|| {
                PathBuf::from(match family {
                    Family::Logistic => "logistic.csv",
                    Family::Banana => "banana.csv",
                    Family::Gmm => "gmm.csv",
                })
            });
            let meta = cmd_gen_data(&spec, seed, &out)?;
            println!("wrote {} and {}", out.display(), meta.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
