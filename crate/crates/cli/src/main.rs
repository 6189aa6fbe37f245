use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depthgate_cli::{
    bench_csv, cmd_bench, cmd_degrade, cmd_eval, cmd_gen_weights, cmd_infer, format_psnr, load_config, parse_size,
    BenchArgs, BenchDepth, CliError, CliResult, InferArgs, EXIT_USAGE, EXIT_VALIDATION,
};
use depthgate_core::{CaPool, ExecMode};

#[derive(Parser)]
#[command(name = "depthgate", version, about = "Depth-gated super-resolution inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dense,
    SparseExact,
    SparseFast,
}

impl From<Mode> for ExecMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Dense => ExecMode::Dense,
            Mode::SparseExact => ExecMode::SparseExact,
            Mode::SparseFast => ExecMode::SparseFast,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Pool {
    Full,
    Support,
}

impl From<Pool> for CaPool {
    fn from(p: Pool) -> Self {
        match p {
            Pool::Full => CaPool::Full,
            Pool::Support => CaPool::Support,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Uniform,
    Adapter,
}

#[derive(Subcommand)]
enum Command {
    /// Super-resolve one image.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Desired network depth.
        #[arg(long)]
        depth: f32,
        #[arg(long, value_enum, default_value = "sparse-exact")]
        mode: Mode,
        /// Pooling region for channel attention in sparse modes.
        #[arg(long, value_enum, default_value = "full")]
        ca_pool: Pool,
        /// Write the predicted depth map as a PGM.
        #[arg(long)]
        emit_depth: Option<PathBuf>,
        /// Write a JSON run report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep desired depths on seeded random weights and report FLOPs and time.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "32x32", value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<f32>,
        #[arg(long, value_enum, default_value = "sparse-exact")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "full")]
        ca_pool: Pool,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        depth_source: Source,
        /// Write CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Y-channel PSNR/SSIM of super-resolved images against ground truth.
    Eval {
        #[arg(long)]
        sr_dir: PathBuf,
        #[arg(long)]
        hr_dir: PathBuf,
        #[arg(long)]
        scale: usize,
        #[arg(long, value_delimiter = ',', default_value = "psnr,ssim")]
        metrics: Vec<String>,
    },
    /// Antialiased bicubic downscaling of a high-resolution image.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scale: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a seeded random weight file for a config.
    GenWeights {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Infer {
            weights,
            config,
            input,
            output,
            depth,
            mode,
            ca_pool,
            emit_depth,
            report,
        } => {
            let r = cmd_infer(&InferArgs {
                weights,
                config,
                input,
                output,
                depth,
                mode: mode.into(),
                ca_pool: ca_pool.into(),
                emit_depth,
                report,
            })?;
            eprintln!(
                "average depth {:.3}, {:.4} GFLOPs, {:.1} ms",
                r.average_depth,
                r.total_flops as f64 / 1e9,
                r.wall_ms
            );
        }
        Command::Bench {
            config,
            size,
            depths,
            mode,
            ca_pool,
            repeat,
            seed,
            depth_source,
            csv,
        } => {
            let rows = cmd_bench(&BenchArgs {
                config: load_config(&config)?,
                size,
                depths,
                mode: mode.into(),
                ca_pool: ca_pool.into(),
                repeat,
                seed,
                depth_source: match depth_source {
                    Source::Uniform => BenchDepth::Uniform,
                    Source::Adapter => BenchDepth::Adapter,
                },
            })?;
            let text = bench_csv(&rows);
            match csv {
                Some(p) => std::fs::write(&p, text)?,
                None => print!("{text}"),
            }
        }
        Command::Eval {
            sr_dir,
            hr_dir,
            scale,
            metrics,
        } => {
            let (mut want_psnr, mut want_ssim) = (false, false);
            for m in &metrics {
                match m.as_str() {
                    "psnr" => want_psnr = true,
                    "ssim" => want_ssim = true,
                    other => return Err(CliError::usage(format!("unknown metric {other:?}"))),
                }
            }
            let summary = cmd_eval(&sr_dir, &hr_dir, scale)?;
            let row = |name: &str, p: f64, s: f64| {
                let mut line = name.to_owned();
                if want_psnr {
                    line += &format!("\tPSNR {}", format_psnr(p));
                }
                if want_ssim {
                    line += &format!("\tSSIM {s:.4}");
                }
                println!("{line}");
            };
            for l in &summary.lines {
                row(&l.name, l.psnr, l.ssim);
            }
            for (name, err) in &summary.failures {
                eprintln!("{name}: {err}");
            }
            if !summary.lines.is_empty() {
                row("mean", summary.mean_psnr(), summary.mean_ssim());
            }
            if !summary.failures.is_empty() {
                return Err(CliError::validation(format!(
                    "{} image(s) could not be evaluated",
                    summary.failures.len()
                )));
            }
        }
        Command::Degrade { input, scale, output } => {
            let s = cmd_degrade(&input, scale, &output)?;
            eprintln!("wrote {}x{} image", s.h, s.w);
        }
        Command::GenWeights { config, seed, out } => {
            let n = cmd_gen_weights(&config, seed, &out)?;
            eprintln!("wrote {n} tensors");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.code == 0 { EXIT_VALIDATION } else { e.code })
        }
    }
}
