use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use srbench::bench::{self, BenchConfig, Precision, DEFAULT_AFFINITY_CAP, DEFAULT_TILE_ELEMS};
use srbench::cases::{BlockName, Hyper};
use srbench::costs::{self, CostArgs};
use srbench::{golden, gradcheck, EXIT_FAILURE, EXIT_OK};

#[derive(Parser)]
#[command(name = "srbench", version, about = "Squeeze Reasoning block: checks, costs, latency and golden files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference gradient check described by a JSON config.
    Gradcheck {
        config: PathBuf,
    },
    /// Analytic FLOPs, parameters and affinity memory for every block kind.
    Cost(CostCmd),
    /// Median latency of block forwards across square resolutions.
    Bench(BenchCmd),
    /// Record or verify golden (config, weights, input, output) files.
    Golden {
        #[command(subcommand)]
        action: GoldenCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct CostCmd {
    #[arg(long, default_value_t = 512)]
    c: usize,
    #[arg(long, default_value_t = 96)]
    h: usize,
    #[arg(long, default_value_t = 96)]
    w: usize,
    #[arg(long, default_value_t = srblock::sr::DEFAULT_RATIO)]
    ratio: usize,
    #[arg(long, default_value_t = srblock::sr::DEFAULT_NODES)]
    k: usize,
    #[arg(long, default_value_t = srblock::baselines::DEFAULT_SE_REDUCTION)]
    r_se: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BenchCmd {
    /// Comma-separated block names (sr_gap, sr_gap_corr, sr_ghp, sr_ghp_corr, se, nl).
    #[arg(long, value_delimiter = ',', default_value = "sr_gap,nl")]
    blocks: Vec<BlockName>,
    /// Comma-separated square side lengths, ascending.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 512)]
    c: usize,
    #[arg(long, default_value_t = srblock::sr::DEFAULT_NODES)]
    k: usize,
    #[arg(long, default_value_t = srblock::sr::DEFAULT_RATIO)]
    ratio: usize,
    #[arg(long, default_value_t = srblock::baselines::DEFAULT_SE_REDUCTION)]
    r_se: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value = "f32")]
    precision: Precision,
    /// Largest non-local affinity (elements) held at once.
    #[arg(long, default_value_t = DEFAULT_AFFINITY_CAP)]
    affinity_cap: usize,
    /// Build the non-local affinity in row tiles instead of skipping large sizes.
    #[arg(long)]
    tiled: bool,
    #[arg(long, default_value_t = DEFAULT_TILE_ELEMS)]
    tile_elems: usize,
    #[arg(long, env = "SR_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the CSV here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GoldenCmd {
    Record {
        path: PathBuf,
        #[arg(long, env = "SR_SEED")]
        seed: u64,
    },
    Verify {
        path: PathBuf,
    },
}

fn cost(cmd: &CostCmd) -> Result<i32> {
    let rows = costs::rows(&CostArgs {
        c: cmd.c,
        h: cmd.h,
        w: cmd.w,
        ratio: cmd.ratio,
        k: cmd.k,
        r_se: cmd.r_se,
    })?;
    match cmd.format {
        Format::Text => print!("{}", costs::render_text(&rows)),
        Format::Csv => costs::write_csv(&rows, io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}

fn run_bench(cmd: &BenchCmd) -> Result<i32> {
    let cfg = BenchConfig {
        blocks: cmd.blocks.clone(),
        sizes: cmd.sizes.clone(),
        hyper: Hyper {
            c_in: cmd.c,
            ratio: cmd.ratio,
            k: cmd.k,
            reduction: cmd.r_se,
        },
        repeats: cmd.repeats,
        warmup: cmd.warmup,
        precision: cmd.precision,
        affinity_cap: cmd.affinity_cap,
        tiled: cmd.tiled,
        tile_elems: cmd.tile_elems,
        seed: cmd.seed,
    };
    cfg.validate()?;
    let mut stdout = bench::csv_writer(io::stdout().lock())?;
    let mut file = match &cmd.output {
        Some(p) => Some(bench::csv_writer(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )?),
        None => None,
    };
    let mut failure = None;
    bench::run(&cfg, |row| {
        let mut write = || -> Result<()> {
            bench::write_row(&mut stdout, row)?;
            if let Some(f) = file.as_mut() {
                bench::write_row(f, row)?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            failure.get_or_insert(e);
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(EXIT_OK),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gradcheck { config } => {
            let outcome = gradcheck::run_file(&config)?;
            print!("{}", outcome.render());
            Ok(if outcome.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Cost(cmd) => cost(&cmd),
        Command::Bench(cmd) => run_bench(&cmd),
        Command::Golden { action } => match action {
            GoldenCmd::Record { path, seed } => {
                let index = golden::record(&path, seed)?;
                println!("recorded {} cases in {} (seed {seed})", index.cases.len(), path.display());
                Ok(EXIT_OK)
            }
            GoldenCmd::Verify { path } => {
                let v = golden::verify(&path)?;
                print!("{}", v.render());
                Ok(if v.passed() { EXIT_OK } else { EXIT_FAILURE })
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        srbench::exit_code(&err)
    });
    let _ = io::stdout().flush();
    ExitCode::from(code as u8)
}
