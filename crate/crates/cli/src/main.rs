use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xyfid::oracle::gates::GateConfig;
use xyfid_cli::commands::{cmd_hist, cmd_oracle_check, cmd_sweep, exit, render_gate_table, CliError, Report};
use xyfid_cli::config::{ConfigError, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "xyfid", version, about = "Fidelity susceptibility of the disordered XY chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress per-point progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the drive axis over all sizes and fit scaling dimensions.
    Sweep(RunArgs),
    /// Histograms of ln chi at selected points.
    Hist(RunArgs),
    /// Cross-check the fermionic kernels against exact references.
    OracleCheck,
    /// Print the resolved configuration as TOML.
    Config(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration reproducing one figure.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Reduced sizes and realization counts of a preset.
    #[arg(long, requires = "preset")]
    desk_scale: bool,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(p)) => p.config(self.desk_scale),
            (None, None) => unreachable!("clap requires one of --config and --preset"),
        };
        if let Some(seed) = self.seed {
            cfg.ensemble.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn error_line(e: &CliError) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

fn finish(report: Report) -> i32 {
    for line in &report.unreliable {
        eprintln!("{}", serde_json::json!({ "warning": "unreliable-point", "message": line }));
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    report.exit_code()
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let quiet = cli.quiet;
    let mut progress = |sigma: f64, x: f64, length: usize, stats: &xyfid::ensemble::EnsembleStats| {
        if !quiet {
            eprintln!(
                "sigma={sigma} x={x} L={length} chi_ave={:.6e} failed={}",
                stats.chi_ave, stats.n_failed
            );
        }
    };
    match &cli.command {
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let (report, _) = cmd_sweep(&cfg, &mut progress)?;
            Ok(finish(report))
        }
        Command::Hist(args) => {
            let cfg = args.resolve()?;
            let (report, _) = cmd_hist(&cfg, &mut progress)?;
            Ok(finish(report))
        }
        Command::OracleCheck => {
            let results = cmd_oracle_check(&GateConfig::default())?;
            print!("{}", render_gate_table(&results));
            Ok(if results.iter().all(|g| g.passed) {
                exit::SUCCESS
            } else {
                exit::GATE_FAILURE
            })
        }
        Command::Config(args) => {
            print!("{}", args.resolve()?.to_toml());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .expect("thread pool");
    let code = pool.install(|| match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    });
    ExitCode::from(code as u8)
}
