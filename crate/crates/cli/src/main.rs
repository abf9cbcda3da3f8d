use beed_core::codec::{decode, jpeg_for_ratio, uncompressed_bytes};
use beed_core::corner::{corner_demo, CORNER_SPARSIFY};
use beed_core::eed::EedParams;
use beed_core::image::pnm::{decode_pnm, write_pgm, write_ppm};
use beed_core::image::{psnr, RgbImage};
use beed_core::jpeg::decode_to_rgb;
use beed_core::maskopt::{optimize_prepared, prepare, OptimizationReport, OptimizeConfig, RatioTarget};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Codec(#[from] beed_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use beed_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Codec(E::Unattainable { .. }) => 3,
            CliError::Codec(E::Io(_)) => 1,
            CliError::Codec(_) | CliError::Csv(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "beed", version, about = "Hybrid JPEG + edge-enhancing diffusion image codec")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a PPM/PGM image at a target compression ratio.
    Encode(EncodeArgs),
    /// Decode a container to PPM.
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR between two PPM/PGM images.
    Psnr { a: PathBuf, b: PathBuf },
    /// Rate-distortion sweep against pure JPEG, written as CSV.
    RdSweep(SweepArgs),
    /// Sparsify the synthetic corner image down to 8 blocks.
    CornerDemo(CornerArgs),
}

#[derive(Args, Clone)]
struct Tuning {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base JPEG qualities tried, comma separated.
    #[arg(long, value_delimiter = ',')]
    qualities: Option<Vec<u8>>,
    /// Chroma/luma kept-block ratios tried, comma separated.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    c_ps: Option<f64>,
    #[arg(long)]
    r_ps: Option<f64>,
    #[arg(long)]
    c_nlbe: Option<f64>,
    #[arg(long)]
    r_nlbe: Option<f64>,
    #[arg(long)]
    nlbe_max_cycles: Option<usize>,
    #[arg(long)]
    nlbe_patience: Option<usize>,
    #[arg(long)]
    no_nlbe: bool,
    #[arg(long)]
    no_param_search: bool,
    #[arg(long)]
    sigma_evals: Option<usize>,
    #[arg(long)]
    lambda_evals: Option<usize>,
    /// Residual tolerance of the search solves.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Residual tolerance while building sparsification paths.
    #[arg(long)]
    path_tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    tensor_refresh: Option<usize>,
    #[arg(long)]
    path_floor: Option<f64>,
    #[arg(long)]
    sigma_luma: Option<f64>,
    #[arg(long)]
    lambda_luma: Option<f64>,
    #[arg(long)]
    sigma_chroma: Option<f64>,
    #[arg(long)]
    lambda_chroma: Option<f64>,
    /// Accepted relative overshoot of the achieved ratio.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
}

impl Tuning {
    fn config(&self) -> CliResult<OptimizeConfig> {
        let mut cfg = OptimizeConfig::default();
        cfg.sparsify.seed = self.seed;
        cfg.nlbe.seed = self.seed;
        if let Some(q) = &self.qualities {
            cfg.qualities = q.clone();
        }
        if let Some(a) = &self.alphas {
            cfg.alphas = a.clone();
        }
        set(&mut cfg.sparsify.c_ps, self.c_ps);
        set(&mut cfg.sparsify.r_ps, self.r_ps);
        set(&mut cfg.nlbe.c_nlbe, self.c_nlbe);
        set(&mut cfg.nlbe.r_nlbe, self.r_nlbe);
        set(&mut cfg.nlbe.max_cycles, self.nlbe_max_cycles);
        set(&mut cfg.nlbe.patience, self.nlbe_patience);
        set(&mut cfg.params.sigma_evals, self.sigma_evals);
        set(&mut cfg.params.lambda_evals, self.lambda_evals);
        set(&mut cfg.path_floor, self.path_floor);
        cfg.run_nlbe = !self.no_nlbe;
        cfg.run_param_search = !self.no_param_search;
        for s in [&mut cfg.search_solver, &mut cfg.path_solver] {
            set(&mut s.max_outer, self.max_outer);
            set(&mut s.max_inner, self.max_inner);
            set(&mut s.tensor_refresh, self.tensor_refresh);
        }
        set(&mut cfg.search_solver.residual_tol, self.residual_tol);
        set(&mut cfg.path_solver.residual_tol, self.path_tol);
        cfg.fixed_luma_params = fixed_params(self.sigma_luma, self.lambda_luma)?;
        cfg.fixed_chroma_params = fixed_params(self.sigma_chroma, self.lambda_chroma)?;
        Ok(cfg)
    }

    fn target(&self, ratio: f64) -> CliResult<RatioTarget> {
        let mut t = RatioTarget::new(ratio).map_err(|e| CliError::Usage(e.to_string()))?;
        t.tolerance = self.tolerance;
        Ok(t)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn fixed_params(sigma: Option<f64>, lambda: Option<f64>) -> CliResult<Option<EedParams>> {
    if sigma.is_none() && lambda.is_none() {
        return Ok(None);
    }
    let s = sigma.unwrap_or(EedParams::STANDARD.sigma);
    let l = lambda.unwrap_or(EedParams::STANDARD.lambda);
    EedParams::new(s, l)
        .map(Some)
        .map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Args)]
struct EncodeArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target compression ratio (uncompressed bytes / container bytes).
    #[arg(long)]
    ratio: f64,
    /// Optimisation log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    ratios: Vec<f64>,
    /// CSV output; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct CornerArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the original, mask and reconstruction panels.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    c_ps: Option<f64>,
    #[arg(long)]
    r_ps: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(path: &Path) -> CliResult<RgbImage> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(decode_pnm(&bytes)?.into_rgb())
}

fn print_report(r: &OptimizationReport) {
    println!("ratio      {:.2}:1 (target {:.2}:1, {} bytes)", r.achieved_ratio, r.target_ratio, r.container_bytes);
    println!("psnr       {:.2} dB", r.final_psnr);
    println!("quality    {}", r.quality);
    println!("density    luma {:.4} chroma {:.4}", r.luma_density, r.chroma_density);
    println!(
        "params     luma sigma {:.4} lambda {:.4}, chroma sigma {:.4} lambda {:.4}",
        r.luma_params.sigma, r.luma_params.lambda, r.chroma_params.sigma, r.chroma_params.lambda
    );
    println!(
        "gains      params {:.2}% / {:.2}%, exchange {:.2}% / {:.2}% (luma / chroma)",
        100.0 * r.param_improvement.0,
        100.0 * r.param_improvement.1,
        100.0 * r.nlbe_improvement.0,
        100.0 * r.nlbe_improvement.1
    );
    println!("search tol {:e}", r.search_tolerance);
    if r.chroma_exceeds_luma {
        println!("note       chroma density exceeds luma density");
    }
    if !r.within_tolerance {
        println!("note       achieved ratio outside the requested tolerance");
    }
    if !r.decode_converged {
        println!("note       decoder solve did not reach its tolerance");
    }
}

fn write_log(path: &Path, r: &OptimizationReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(beed_core::maskopt::StageRecord::CSV_HEADER)?;
    for s in &r.stages {
        w.write_record(s.csv_fields())?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> CliResult<()> {
    let img = load(&args.input)?;
    let cfg = args.tuning.config()?;
    let target = args.tuning.target(args.ratio)?;
    let prep = prepare(&img, target.target_ratio, &cfg)?;
    let enc = optimize_prepared(&prep, &target, &cfg)?;
    std::fs::write(&args.out, &enc.bytes).map_err(io_err(&args.out))?;

    // measured on the written file, exactly as `decode` would see it
    let written = std::fs::read(&args.out).map_err(io_err(&args.out))?;
    let mut report = enc.report;
    report.final_psnr = psnr(&decode(&written)?.planes(), &img.quantized().planes())?.db();
    print_report(&report);
    if let Some(log) = &args.log {
        write_log(log, &report)?;
    }
    Ok(())
}

fn cmd_decode(input: &Path, out: &Path) -> CliResult<()> {
    let bytes = std::fs::read(input).map_err(io_err(input))?;
    let img = decode(&bytes)?;
    write_ppm(out, &img)?;
    Ok(())
}

fn cmd_psnr(a: &Path, b: &Path) -> CliResult<()> {
    let (x, y) = (load(a)?, load(b)?);
    println!("{:.4}", psnr(&x.planes(), &y.planes())?.db());
    Ok(())
}

fn cmd_rd_sweep(args: &SweepArgs) -> CliResult<()> {
    let cfg = args.tuning.config()?;
    let max_ratio = args.ratios.iter().copied().fold(f64::NAN, f64::max);
    let targets = args
        .ratios
        .iter()
        .map(|&r| args.tuning.target(r))
        .collect::<CliResult<Vec<_>>>()?;
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(io_err(p))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["image", "codec", "ratio", "psnr", "error"])?;
    for input in &args.inputs {
        let name = input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let img = load(input)?.quantized();
        let pixels = uncompressed_bytes(img.width(), img.height()) as f64;
        let prep = prepare(&img, max_ratio, &cfg);
        for t in &targets {
            let beed = prep.as_ref().map_err(Clone::clone).and_then(|p| {
                let enc = optimize_prepared(p, t, &cfg)?;
                let out = decode(&enc.bytes)?;
                Ok((pixels / enc.bytes.len() as f64, psnr(&out.planes(), &img.planes())?.db()))
            });
            let jpeg = jpeg_for_ratio(&img, t.target_ratio).and_then(|(_, bytes)| {
                let out = decode_to_rgb(&bytes)?;
                Ok((pixels / bytes.len() as f64, psnr(&out.planes(), &img.planes())?.db()))
            });
            for (codec, res) in [("beed", beed), ("jpeg", jpeg)] {
                let row = match res {
                    Ok((ratio, db)) => [name.clone(), codec.into(), format!("{ratio:.3}"), format!("{db:.4}"), String::new()],
                    Err(e) => [name.clone(), codec.into(), format!("{:.3}", t.target_ratio), String::new(), e.to_string()],
                };
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_corner_demo(args: &CornerArgs) -> CliResult<()> {
    let mut cfg = CORNER_SPARSIFY;
    set(&mut cfg.c_ps, args.c_ps);
    set(&mut cfg.r_ps, args.r_ps);
    let demo = corner_demo(args.seed, &cfg)?;
    std::fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    write_pgm(args.out_dir.join("corner_original.pgm"), &demo.original)?;
    write_pgm(args.out_dir.join("corner_mask.pgm"), &demo.mask_panel())?;
    write_pgm(args.out_dir.join("corner_reconstruction.pgm"), &demo.reconstruction)?;
    println!("block  corner");
    for (b, c) in demo.kept.iter().zip(&demo.is_corner) {
        println!("{b:>5}  {}", if *c { "yes" } else { "no" });
    }
    println!("corner blocks kept: {}/{}", demo.corner_hits(), demo.kept.len());
    println!("psnr: {:.2} dB", demo.psnr);
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode { input, out } => cmd_decode(input, out),
        Command::Psnr { a, b } => cmd_psnr(a, b),
        Command::RdSweep(a) => cmd_rd_sweep(a),
        Command::CornerDemo(a) => cmd_corner_demo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
