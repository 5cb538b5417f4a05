//! `sdrcnn`: simulate data, train, sharpen, evaluate, ablate and inspect.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sdrcnn_core::io::{
    dataset::Dataset, default_rgb, export_png, read_dataset, read_raster, write_atomic, write_dataset, write_raster,
    PngMapping, RunConfig,
};
use sdrcnn_core::metrics::{self, FullResolution, Metric, MetricReport};
use sdrcnn_core::model::{load_checkpoint, save_checkpoint, SdrcnnParams};
use sdrcnn_core::train::{self, evaluate, run_ablation, EvalMode, EvalSettings, Method, RunManifest};
use sdrcnn_core::viz::{pca_features, PCA_COMPONENTS};
use sdrcnn_core::wald::{simulate, SplitRole};
use sdrcnn_core::{Error, Raster};

#[derive(Parser, Debug)]
#[command(name = "sdrcnn", version, about = "Pansharpening toolkit with a dense-residual CNN")]
struct Cli {
    /// UTF-8 key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the training and the data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that receives every output file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic scenes and write a Wald-protocol dataset.
    Simulate,
    /// Train the network on a dataset's training split.
    Train(TrainArgs),
    /// Fuse one PAN/LRMS pair.
    Sharpen(SharpenArgs),
    /// Score a method on a dataset split, or score a single fused image.
    Eval(EvalArgs),
    /// Train and score the eleven ablation variants.
    Ablate(DatasetArg),
    /// Write PCA views of the three Addition Layer outputs.
    InspectFeatures(InspectArgs),
    /// Absolute error map between a fused image and its reference.
    Aem(AemArgs),
}

#[derive(Args, Debug)]
struct DatasetArg {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Sdrcnn,
    Gs,
    Sfim,
    Bicubic,
    Reference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Reduced,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
struct SharpenArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    pan: PathBuf,
    #[arg(long)]
    lrms: PathBuf,
    /// Required for `--method sdrcnn`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_enum, default_value = "reduced")]
    mode: ModeArg,
    /// Dataset mode: directory written by `simulate`.
    #[arg(long, conflicts_with = "fused")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sdrcnn")]
    method: MethodArg,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Pair mode: fused raster to score.
    #[arg(long)]
    fused: Option<PathBuf>,
    /// Pair mode, reduced: reference raster.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Pair mode, full: original MS raster.
    #[arg(long)]
    ms: Option<PathBuf>,
    /// Pair mode, full: PAN raster.
    #[arg(long)]
    pan: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    pan: Option<PathBuf>,
    #[arg(long)]
    lrms: Option<PathBuf>,
    /// Alternative input: a dataset directory and one sample id in it.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    sample: Option<String>,
}

#[derive(Args, Debug)]
struct AemArgs {
    #[arg(long)]
    fused: PathBuf,
    #[arg(long)]
    gt: PathBuf,
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Ctx {
    cfg: RunConfig,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self) -> CliResult<&Path> {
        let d = self.out_dir.as_deref().ok_or_else(|| usage("--out-dir is required"))?;
        std::fs::create_dir_all(d)?;
        Ok(d)
    }

    fn settings(&self) -> CliResult<EvalSettings> {
        Ok(EvalSettings {
            ratio: self.cfg.ratio(),
            q_block: self.cfg.q_block,
            sensor: self.cfg.sensor()?,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
            })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    let ctx = Ctx {
        cfg,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Train(a) => cmd_train(&ctx, &a),
        Command::Sharpen(a) => cmd_sharpen(&ctx, &a),
        Command::Eval(a) => cmd_eval(&ctx, &a),
        Command::Ablate(a) => cmd_ablate(&ctx, &a),
        Command::InspectFeatures(a) => cmd_inspect(&ctx, &a),
        Command::Aem(a) => cmd_aem(&ctx, &a),
    }
}

fn cmd_simulate(ctx: &Ctx) -> CliResult {
    let out = ctx.out_dir()?;
    let (samples, split) = simulate(&ctx.cfg.sim(), &ctx.cfg.sensor()?)?;
    if samples.is_empty() {
        return Err(CliError::Data(Error::InvalidArgument(
            "scene smaller than one patch; no samples generated".into(),
        )));
    }
    write_dataset(out, &samples, &split)?;
    write_atomic(&out.join("config.txt"), ctx.cfg.to_text().as_bytes())?;
    println!(
        "wrote {} samples ({} train / {} val / {} test) to {}",
        samples.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> CliResult {
    let out = ctx.out_dir()?;
    let ds = read_dataset(&a.dataset)?;
    let (tr, val) = (ds.subset(SplitRole::Train), ds.subset(SplitRole::Val));
    let cfg = &ctx.cfg.train;
    RunManifest::new(cfg, &ds.manifest)?.write(&out.join("run_manifest.txt"))?;
    let outcome = train::train(cfg, &tr, &val)?;
    save_checkpoint(&outcome.params, out.join("final.ckpt"))?;
    if let Some(b) = &outcome.best {
        save_checkpoint(&b.params, out.join("best.ckpt"))?;
        println!(
            "best validation L1 {:.6e} at epoch {} (iteration {})",
            b.val_loss, b.epoch, b.iteration
        );
    }
    write_atomic(&out.join("loss.csv"), outcome.log.to_csv()?.as_bytes())?;
    let mut v = String::from("epoch,iteration,val_l1\n");
    for r in &outcome.validation {
        v.push_str(&format!("{},{},{:?}\n", r.epoch, r.iteration, r.loss));
    }
    write_atomic(&out.join("validation.csv"), v.as_bytes())?;
    let s = outcome.log.smoothed();
    println!(
        "trained {} iterations; smoothed L1 {:.6e} -> {:.6e}",
        outcome.log.raw.len(),
        s.first().copied().unwrap_or(f64::NAN),
        s.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_params(ckpt: Option<&Path>) -> CliResult<SdrcnnParams> {
    let p = ckpt.ok_or_else(|| usage("--checkpoint is required for the sdrcnn method"))?;
    Ok(load_checkpoint(p)?)
}

fn method<'a>(ctx: &Ctx, m: MethodArg, params: Option<&'a SdrcnnParams>) -> Method<'a> {
    use sdrcnn_core::classical::ClassicalMethod;
    match m {
        MethodArg::Sdrcnn => Method::Sdrcnn(params.expect("parameters loaded for sdrcnn")),
        MethodArg::Gs => Method::Classical(ClassicalMethod::Gs(ctx.cfg.gs())),
        MethodArg::Sfim => Method::Classical(ClassicalMethod::Sfim(ctx.cfg.sfim())),
        MethodArg::Bicubic => Method::Bicubic,
        MethodArg::Reference => Method::Reference,
    }
}

fn maybe_params(m: MethodArg, ckpt: Option<&Path>) -> CliResult<Option<SdrcnnParams>> {
    match m {
        MethodArg::Sdrcnn => Ok(Some(load_params(ckpt)?)),
        _ => Ok(None),
    }
}

fn cmd_sharpen(ctx: &Ctx, a: &SharpenArgs) -> CliResult {
    if matches!(a.method, MethodArg::Reference) {
        return Err(usage("the reference method cannot sharpen"));
    }
    let out = ctx.out_dir()?;
    let params = maybe_params(a.method, a.checkpoint.as_deref())?;
    let m = method(ctx, a.method, params.as_ref());
    let (pan, lrms) = (read_raster(&a.pan)?, read_raster(&a.lrms)?);
    let fused = train::fuse(&m, &pan, &lrms, ctx.cfg.ratio())?;
    write_raster(&fused, out.join("hrms.msr"))?;
    export_png(&fused, default_rgb(fused.bands()), 0.0, 1.0, &out.join("hrms.png"))?;
    println!(
        "{}: wrote {}x{}x{} to {}",
        m,
        fused.bands(),
        fused.height(),
        fused.width(),
        out.join("hrms.msr").display()
    );
    Ok(())
}

fn split_samples(ds: &Dataset, s: SplitArg) -> Vec<sdrcnn_core::wald::SamplePair> {
    match s {
        SplitArg::Train => ds.subset(SplitRole::Train),
        SplitArg::Val => ds.subset(SplitRole::Val),
        SplitArg::Test => ds.subset(SplitRole::Test),
        SplitArg::All => ds.samples.clone(),
    }
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> CliResult {
    let mode = match a.mode {
        ModeArg::Reduced => EvalMode::Reduced,
        ModeArg::Full => EvalMode::Full,
    };
    let report = if let Some(dir) = &a.dataset {
        let ds = read_dataset(dir)?;
        let samples = split_samples(&ds, a.split);
        if samples.is_empty() {
            return Err(usage("the selected split is empty"));
        }
        let params = maybe_params(a.method, a.checkpoint.as_deref())?;
        let m = method(ctx, a.method, params.as_ref());
        if matches!((a.method, mode), (MethodArg::Reference, EvalMode::Full)) {
            return Err(usage("the reference method has no full-resolution score"));
        }
        evaluate(&m, &samples, mode, &ctx.settings()?)?
    } else {
        let fused = read_raster(a.fused.as_ref().ok_or_else(|| usage("give --dataset or --fused"))?)?;
        let mut r = MetricReport::new("input");
        match mode {
            EvalMode::Reduced => {
                let gt = read_raster(a.gt.as_ref().ok_or_else(|| usage("reduced pair mode needs --gt"))?)?;
                let ratio = ctx.cfg.ratio() as f64;
                r.push("pair", Metric::Sam, metrics::sam(&fused, &gt)?);
                r.push("pair", Metric::Ergas, metrics::ergas(&fused, &gt, ratio)?);
                r.push("pair", Metric::Scc, metrics::scc(&fused, &gt)?);
                let q = ctx.cfg.q_block;
                r.push("pair", Metric::Q2n, metrics::q2n(&fused, &gt, q, q)?);
            }
            EvalMode::Full => {
                let ms = read_raster(a.ms.as_ref().ok_or_else(|| usage("full pair mode needs --ms"))?)?;
                let pan = read_raster(a.pan.as_ref().ok_or_else(|| usage("full pair mode needs --pan"))?)?;
                let fr = FullResolution::compute(&fused, &ms, &pan, &ctx.cfg.sensor()?)?;
                r.push("pair", Metric::DLambda, fr.d_lambda);
                r.push("pair", Metric::Ds, fr.d_s);
                r.push("pair", Metric::Qnr, fr.qnr);
            }
        }
        r
    };
    print!(
        "{} ({} samples, {} mode)\n{}",
        report.method,
        report.sample_count(),
        mode.name(),
        report.summary_table()
    );
    if ctx.out_dir.is_some() {
        let out = ctx.out_dir()?;
        report.write_csv(&out.join(format!("report_{}_{}.csv", report.method, mode.name())))?;
    }
    Ok(())
}

fn cmd_ablate(ctx: &Ctx, a: &DatasetArg) -> CliResult {
    let out = ctx.out_dir()?;
    let ds = read_dataset(&a.dataset)?;
    let (tr, val, test) = (
        ds.subset(SplitRole::Train),
        ds.subset(SplitRole::Val),
        ds.subset(SplitRole::Test),
    );
    if test.is_empty() {
        return Err(usage("the dataset has no test samples"));
    }
    let runs = run_ablation(&ctx.cfg.train, &tr, &val, &test, &ctx.settings()?)?;
    let mut summary = String::from("variant,params,final_loss,metric,mean,std\n");
    for (i, r) in runs.iter().enumerate() {
        r.report.write_csv(&out.join(format!("ablation_{i:02}.csv")))?;
        for m in r.report.metrics() {
            let s = r.report.summary(m).expect("metric has values");
            summary.push_str(&format!(
                "\"{}\",{},{:?},{},{:?},{:?}\n",
                r.label,
                r.param_count,
                r.final_loss,
                m.name(),
                s.mean,
                s.std
            ));
        }
        println!(
            "{:<28} {:>7} params\n{}",
            r.label,
            r.param_count,
            r.report.summary_table()
        );
    }
    write_atomic(&out.join("ablation_summary.csv"), summary.as_bytes())?;
    Ok(())
}

fn cmd_inspect(ctx: &Ctx, a: &InspectArgs) -> CliResult {
    let params = load_checkpoint(&a.checkpoint)?;
    let (pan, lrms) = match (&a.pan, &a.lrms, &a.dataset) {
        (Some(p), Some(l), None) => (read_raster(p)?, read_raster(l)?),
        (None, None, Some(d)) => {
            let ds = read_dataset(d)?;
            let s = match &a.sample {
                Some(id) => ds
                    .get(id)
                    .ok_or_else(|| usage(format!("no sample {id:?} in dataset")))?
                    .clone(),
                None => ds
                    .subset(SplitRole::Test)
                    .into_iter()
                    .next()
                    .or_else(|| ds.samples.first().cloned())
                    .ok_or_else(|| usage("dataset is empty"))?,
            };
            info!("inspecting sample {}", s.id);
            (s.pan, s.lrms)
        }
        _ => return Err(usage("give --pan and --lrms, or --dataset [--sample]")),
    };
    let out = ctx.out_dir()?;
    let trace = params.forward(&pan.to_tensor(), &lrms.to_tensor())?;
    let mut written = 0;
    for (i, add) in trace.additions.iter().enumerate() {
        let f = pca_features(add)?;
        let label = (b'A' + i as u8) as char;
        write_raster(&f.raster, out.join(format!("features_{label}.msr")))?;
        for k in 0..PCA_COMPONENTS {
            let band: Raster = f.raster.extract_band(k);
            export_png(
                &band,
                PngMapping::Gray(0),
                0.0,
                1.0,
                &out.join(format!("features_{label}_pc{}.png", k + 1)),
            )?;
            written += 1;
        }
    }
    println!("wrote {written} principal-component images to {}", out.display());
    Ok(())
}

fn cmd_aem(ctx: &Ctx, a: &AemArgs) -> CliResult {
    let out = ctx.out_dir()?;
    let (fused, gt) = (read_raster(&a.fused)?, read_raster(&a.gt)?);
    let map = metrics::aem(&fused, &gt)?;
    let (_, hi) = map.min_max();
    write_raster(&map, out.join("aem.msr"))?;
    export_png(&map, PngMapping::Heatmap(0), 0.0, hi, &out.join("aem.png"))?;
    println!(
        "mean absolute error {:.6e}, max {:.6e}",
        map.data().iter().sum::<f64>() / map.pixels() as f64,
        hi
    );
    Ok(())
}
