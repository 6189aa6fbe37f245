//! Command implementations behind the `depthgate` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use depthgate_core::io::{config_to_text, parse_config, read_image, write_image, write_map};
use depthgate_core::io::weights::{load_weights, save_weights};
use depthgate_core::metrics::evaluate_y;
use depthgate_core::resize::degrade;
use depthgate_core::{
    CaPool, DepthSource, EfficiencyReport, Error as CoreError, ExecMode, ForwardOptions, Model, ModelConfig, Shape,
    Tensor, WeightStore,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn validation(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError {
            code: self.code,
            error: self.error.context(ctx),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::Io(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            error: e.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

trait PathContext<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T, E: Into<CliError>> PathContext<T> for std::result::Result<T, E> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| e.into().context(path.display().to_string()))
    }
}

pub fn load_config(path: &Path) -> CliResult<ModelConfig> {
    let text = fs::read_to_string(path).at(path)?;
    parse_config(&text).at(path)
}

pub fn load_model(config: &Path, weights: &Path) -> CliResult<Model> {
    let cfg = load_config(config)?;
    let store = load_weights(weights).at(weights)?;
    Model::from_store(cfg, &store).at(weights)
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerEntry {
    pub name: String,
    pub dense_macs: u64,
    pub retained_macs: u64,
}

/// JSON summary of one inference run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub input: String,
    pub scale: usize,
    pub desired_depth: f32,
    pub mode: String,
    pub average_depth: f64,
    pub layers: Vec<LayerEntry>,
    pub total_flops: u64,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn new(input: &str, scale: usize, desired_depth: f32, mode: ExecMode, r: &EfficiencyReport) -> Self {
        RunReport {
            input: input.to_owned(),
            scale,
            desired_depth,
            mode: mode.to_string(),
            average_depth: r.average_depth,
            layers: r
                .layers
                .iter()
                .map(|l| LayerEntry {
                    name: l.name.clone(),
                    dense_macs: l.dense_macs,
                    retained_macs: l.retained_macs,
                })
                .collect(),
            total_flops: r.total_flops(),
            wall_ms: r.wall_ms,
        }
    }
}

pub struct InferArgs {
    pub weights: PathBuf,
    pub config: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub depth: f32,
    pub mode: ExecMode,
    pub ca_pool: CaPool,
    pub emit_depth: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

pub fn cmd_infer(args: &InferArgs) -> CliResult<RunReport> {
    if !(args.depth >= 0.0) {
        return Err(CliError::usage(format!("--depth must be nonnegative, got {}", args.depth)));
    }
    let model = load_model(&args.config, &args.weights)?;
    let x = read_image(&args.input).at(&args.input)?;
    let opts = ForwardOptions {
        mode: args.mode,
        ca_pool: args.ca_pool,
    };
    let out = model.forward(&x, args.depth, &opts)?;
    write_image(&args.output, &out.image).at(&args.output)?;
    if let Some(p) = &args.emit_depth {
        write_map(p, &out.depth, model.config.blocks).at(p)?;
    }
    let report = RunReport::new(
        &args.input.display().to_string(),
        model.config.scale,
        args.depth,
        args.mode,
        &out.report,
    );
    if let Some(p) = &args.report {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::validation(e))?;
        fs::write(p, json + "\n").at(p)?;
    }
    Ok(report)
}

/// Where the benchmark's depth maps come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchDepth {
    /// Every position gets the requested depth.
    Uniform,
    /// The adapter predicts the map from the requested depth.
    Adapter,
}

pub struct BenchArgs {
    pub config: ModelConfig,
    pub size: (usize, usize),
    pub depths: Vec<f32>,
    pub mode: ExecMode,
    pub ca_pool: CaPool,
    pub repeat: usize,
    pub seed: u64,
    pub depth_source: BenchDepth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub depth: f32,
    pub mode: ExecMode,
    pub total_flops: u64,
    /// FLOPs inside the gated residual blocks only.
    pub trunk_flops: u64,
    pub median_wall_ms: f64,
}

/// Median of the timings, discarding the first as warm-up when there are
/// more than two.
pub fn median_ms(times: &[f64]) -> f64 {
    let mut t: Vec<f64> = if times.len() > 2 { times[1..].to_vec() } else { times.to_vec() };
    t.sort_by(f64::total_cmp);
    match t.len() {
        0 => 0.0,
        n if n % 2 == 1 => t[n / 2],
        n => 0.5 * (t[n / 2 - 1] + t[n / 2]),
    }
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.repeat == 0 {
        return Err(CliError::usage("--repeat must be at least 1"));
    }
    let store = WeightStore::random(&args.config, args.seed)?;
    let model = Model::from_store(args.config.clone(), &store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (h, w) = args.size;
    let x = Tensor::from_fn(Shape::new(1, 3, h, w), |_, _, _, _| rng.gen_range(0.0..1.0));
    let opts = ForwardOptions {
        mode: args.mode,
        ca_pool: args.ca_pool,
    };
    let mut rows = Vec::with_capacity(args.depths.len());
    for &d in &args.depths {
        if !(d >= 0.0) {
            return Err(CliError::usage(format!("depth {d} is negative")));
        }
        let source = match args.depth_source {
            BenchDepth::Uniform => DepthSource::Uniform(d),
            BenchDepth::Adapter => DepthSource::Adapter(d),
        };
        let mut times = Vec::with_capacity(args.repeat);
        let mut flops = None;
        for _ in 0..args.repeat {
            let start = Instant::now();
            let out = model.forward_with(&x, &source, &opts)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            flops = Some((out.report.total_flops(), 2 * out.report.block_retained_macs()));
        }
        let (total_flops, trunk_flops) = flops.expect("repeat >= 1");
        rows.push(BenchRow {
            depth: d,
            mode: args.mode,
            total_flops,
            trunk_flops,
            median_wall_ms: median_ms(&times),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("depth,mode,total_flops,trunk_flops,median_wall_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            r.depth, r.mode, r.total_flops, r.trunk_flops, r.median_wall_ms
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalLine {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EvalSummary {
    pub lines: Vec<EvalLine>,
    pub failures: Vec<(String, String)>,
}

impl EvalSummary {
    pub fn mean_psnr(&self) -> f64 {
        mean(self.lines.iter().map(|l| l.psnr))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.lines.iter().map(|l| l.ssim))
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    v.sum::<f64>() / n as f64
}

/// `inf` for identical images, two decimals otherwise.
pub fn format_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.2}")
    }
}

fn image_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn find_by_stem(dir: &[PathBuf], stem: &str) -> Option<PathBuf> {
    dir.iter()
        .find(|p| p.file_stem().and_then(|s| s.to_str()) == Some(stem))
        .cloned()
}

/// Pairs images by file stem and scores each pair on the Y channel with a
/// `scale`-pixel border ignored.
pub fn cmd_eval(sr_dir: &Path, hr_dir: &Path, scale: usize) -> CliResult<EvalSummary> {
    let sr = image_files(sr_dir)?;
    let hr = image_files(hr_dir)?;
    if sr.is_empty() {
        return Err(CliError::validation(format!("no images in {}", sr_dir.display())));
    }
    let mut summary = EvalSummary::default();
    for path in &sr {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let result = (|| -> CliResult<(f64, f64)> {
            let hr_path = find_by_stem(&hr, &stem)
                .ok_or_else(|| CliError::validation(format!("no ground truth for {stem}")))?;
            let a = read_image(path).at(path)?;
            let b = read_image(&hr_path).at(&hr_path)?;
            if a.shape() != b.shape() {
                return Err(CliError::validation(format!(
                    "size mismatch: {} vs {}",
                    a.shape(),
                    b.shape()
                )));
            }
            Ok(evaluate_y(&a, &b, scale)?)
        })();
        match result {
            Ok((psnr, ssim)) => summary.lines.push(EvalLine { name: stem, psnr, ssim }),
            Err(e) => summary.failures.push((stem, e.to_string())),
        }
    }
    Ok(summary)
}

pub fn cmd_degrade(input: &Path, scale: usize, output: &Path) -> CliResult<Shape> {
    if scale == 0 {
        return Err(CliError::usage("--scale must be positive"));
    }
    let hr = read_image(input).at(input)?;
    let lr = degrade(&hr, scale)?;
    write_image(output, &lr).at(output)?;
    Ok(lr.shape())
}

pub fn cmd_gen_weights(config: &Path, seed: u64, out: &Path) -> CliResult<usize> {
    let cfg = load_config(config)?;
    let store = WeightStore::random(&cfg, seed)?;
    save_weights(&store, out).at(out)?;
    Ok(store.len())
}

/// Writes `cfg` as a config file.
pub fn write_config(path: &Path, cfg: &ModelConfig) -> CliResult<()> {
    fs::write(path, config_to_text(cfg)).at(path)
}

/// Parses `HxW`.
pub fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        return Err(format!("empty size {s:?}"));
    }
    Ok((h, w))
}
