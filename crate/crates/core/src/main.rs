use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use molt::harness::{run_problem, run_refinement, write_stability_csv, ProblemSpec};
use molt::resolvent::{BetaPolicy, MAX_ORDER};
use molt::{MoltError, Result};

#[derive(Parser)]
#[command(
    name = "molt",
    version,
    about = "Successive-convolution parabolic solver"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write snapshots, norms and the manifest.
    Run(SpecArgs),
    /// Run a time-step refinement study and write refinement.csv.
    Refine {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated, strictly decreasing time steps.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// Sample |phi(iy)| of the time stepper.
    Stability {
        /// Orders to sample (comma-separated).
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        order: Vec<usize>,
        /// stiff_decay or maximal_order.
        #[arg(long, default_value = "stiff_decay")]
        policy: BetaPolicy,
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        /// CSV path (default: OUT/stability.csv; `-` for stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// Spec file of `key = value` lines.
    spec: Option<PathBuf>,
    /// Start from a built-in setup.
    #[arg(long)]
    preset: Option<String>,
    /// Time order P.
    #[arg(long)]
    order: Option<usize>,
    /// Polynomial degree M of the local quadrature.
    #[arg(long)]
    spatial_order: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ProblemSpec> {
        let mut spec = match (&self.spec, &self.preset) {
            (Some(path), None) => ProblemSpec::parse(&std::fs::read_to_string(path)?)?,
            (None, Some(name)) => ProblemSpec::preset(name)?,
            (Some(_), Some(_)) => {
                return Err(MoltError::InvalidArgument(
                    "give a spec file or --preset, not both".into(),
                ))
            }
            (None, None) => {
                return Err(MoltError::InvalidArgument(
                    "a spec file or --preset is required".into(),
                ))
            }
        };
        if let Some(p) = self.order {
            spec.order = p;
        }
        if let Some(m) = self.spatial_order {
            spec.spatial_order = m;
        }
        if let Some(dt) = self.dt {
            spec.dt = dt;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| MoltError::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Run(args) => {
            let spec = args.resolve()?;
            let summary = run_problem(&spec, &cli.out)?;
            println!("steps = {}", summary.steps);
            println!("t = {}", summary.final_time);
            for (k, m) in summary.max_norms.iter().enumerate() {
                println!("max_norm[{k}] = {m}");
            }
            if let Some(e) = summary.error {
                println!("error = {e}");
            }
            if let Some((t, r, ref_r)) = summary.radius.last() {
                println!("radius(t = {t}) = {r} (reference {ref_r})");
            }
        }
        Command::Refine { spec, ladder } => {
            let spec = spec.resolve()?;
            let ladder = ladder.unwrap_or_else(|| spec.ladder.clone());
            let report = run_refinement(&spec, &ladder)?;
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("manifest.txt"), spec.manifest())?;
            let mut f = BufWriter::new(File::create(cli.out.join("refinement.csv"))?);
            report.write_csv(&mut f)?;
            f.flush()?;
            report.write_csv(io::stdout().lock())?;
        }
        Command::Stability {
            order,
            policy,
            samples,
            output,
        } => {
            if let Some(&p) = order.iter().find(|&&p| p == 0 || p > MAX_ORDER) {
                return Err(MoltError::InvalidArgument(format!(
                    "order {p} outside 1..={MAX_ORDER}"
                )));
            }
            let path = output.unwrap_or_else(|| cli.out.join("stability.csv"));
            if path.as_os_str() == "-" {
                write_stability_csv(io::stdout().lock(), &order, policy, samples)?;
            } else {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                let mut f = BufWriter::new(File::create(&path)?);
                write_stability_csv(&mut f, &order, policy, samples)?;
                f.flush()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
