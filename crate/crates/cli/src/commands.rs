//! Subcommand bodies. Each returns `Ok(())` or a [`CliError`] carrying its exit class.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use waveformer_core::data::TrajectoryDataset;
use waveformer_core::model::{Example, ModelKind, Network};
use waveformer_core::rollout::{compare_models, evaluate, rollout, RegionReport, Trained};
use waveformer_core::tensor::Tensor;
use waveformer_core::training::train;
use waveformer_pde::burgers::BoundaryCondition;
use waveformer_pde::{build_dataset, DatasetConfig, Scale};

use crate::config::{parse_config, RunConfig};
use crate::error::{CliError, Result};
use crate::format::{load_checkpoint, load_dataset, save_checkpoint, save_dataset, Checkpoint};

fn load(path: &Path) -> Result<TrajectoryDataset<f64>> {
    load_dataset(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug)]
pub struct GenerateArgs {
    pub pde: Example,
    pub samples: Option<usize>,
    pub seed: u64,
    pub scale: Scale,
    pub out: PathBuf,
    pub bc: Option<BoundaryCondition>,
    pub grid: Option<usize>,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut cfg = DatasetConfig::preset(args.pde, args.scale);
    if let Some(bc) = args.bc {
        if args.pde != Example::Burgers {
            return Err(CliError::usage(format!("--bc applies to burgers only, not {}", args.pde)));
        }
        cfg.bc = bc;
    }
    if let Some(n) = args.grid {
        cfg = cfg.with_output_extent(n)?;
    }
    let samples = args.samples.unwrap_or(cfg.default_samples);
    info!("generating {samples} {} trajectories ({} preset)", args.pde, args.scale);
    let ds = build_dataset(&cfg, samples, args.seed)?;
    save_dataset(&args.out, &ds).map_err(|e| CliError::from(e).context(args.out.display()))?;
    Ok(())
}

/// Rejects grids the configured transform cannot handle.
fn check_grid(run: &RunConfig, ds: &TrajectoryDataset<f64>) -> Result<()> {
    let m = &run.model;
    if ds.spatial.len() != m.dim {
        return Err(CliError::io(format!(
            "Misaligned: data has {} spatial axes, model dim is {}",
            ds.spatial.len(),
            m.dim
        )));
    }
    let block = 1usize << m.levels;
    for &n in &ds.spatial {
        if m.kind != ModelKind::Transformer && n % block != 0 {
            return Err(waveformer_core::Error::BadLength {
                extent: n,
                levels: m.levels,
            }
            .into());
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub model: Option<ModelKind>,
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let run = parse_config(&text, args.model)?;
    for w in &run.warnings {
        warn!("{w}");
    }
    let ds = load(&args.data)?;
    check_grid(&run, &ds)?;
    let net = Network::<f64>::new(run.model.clone())?;
    let init = net.init_params(run.train.seed);
    info!(
        "training {} ({} parameters) on {} trajectories of {} frames",
        run.model.kind,
        init.scalar_count(),
        ds.samples,
        ds.time
    );
    let outcome = train(&net, init, &ds, &run.train, |r| {
        info!(
            "epoch {:>4}  lr {:.3e}  train {:.6e}  val {}",
            r.epoch,
            r.lr,
            r.train_loss,
            r.val_loss.map_or("-".into(), |v| format!("{v:.6e}"))
        );
    })?;
    info!("best epoch {}", outcome.best_epoch);
    let ckpt = Checkpoint {
        config: run.to_text(),
        params: outcome.best,
    };
    save_checkpoint(&args.out, &ckpt).map_err(|e| CliError::from(e).context(args.out.display()))
}

#[derive(Clone, Debug)]
pub struct PredictArgs {
    pub model_file: PathBuf,
    pub data: PathBuf,
    pub steps: usize,
    pub out: PathBuf,
}

/// Rolls out every sample of `ds` from its first `k + 1` frames.
pub fn predict_dataset(ckpt: &Checkpoint, ds: &TrajectoryDataset<f64>, steps: usize) -> Result<TrajectoryDataset<f64>> {
    let run = parse_config(&ckpt.config, None).map_err(|e| CliError::io(format!("checkpoint config: {e}")))?;
    check_grid(&run, ds)?;
    let net = Network::<f64>::new(run.model.clone())?;
    let expected = net.init_params(0);
    for (name, t) in expected.iter() {
        let got = ckpt.params.get(name)?;
        if got.shape() != t.shape() {
            return Err(CliError::io(format!("Misaligned: parameter `{name}` has shape {:?}, expected {:?}", got.shape(), t.shape())));
        }
    }
    let k = run.model.history;
    if ds.time < k + 1 {
        return Err(waveformer_core::Error::TooShort {
            time: ds.time,
            needed: k + 1,
        }
        .into());
    }
    let model = Trained {
        network: &net,
        params: &ckpt.params,
    };
    let preds: Vec<Tensor<f64>> = (0..ds.samples)
        .into_par_iter()
        .map(|i| rollout(&model, &ds.frames(i, 0, k + 1)?, steps))
        .collect::<waveformer_core::Result<_>>()?;
    let data = preds.into_iter().flat_map(Tensor::into_data).collect();
    let mut out = TrajectoryDataset::new(ds.pde.clone(), ds.spatial.clone(), ds.samples, steps, ds.dt, data)?;
    out.params = ds.params.clone();
    out.paper_scale = ds.paper_scale;
    out.seed = ds.seed;
    out.set_param("model", run.model.kind);
    out.set_param("start_frame", k + 1);
    Ok(out)
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    if args.steps == 0 {
        return Err(CliError::usage("--steps must be at least 1"));
    }
    let ckpt = load_checkpoint(&args.model_file).map_err(|e| CliError::from(e).context(args.model_file.display()))?;
    let ds = load(&args.data)?;
    let out = predict_dataset(&ckpt, &ds, args.steps)?;
    save_dataset(&args.out, &out).map_err(|e| CliError::from(e).context(args.out.display()))
}

/// Scores predictions against the frames of `truth` they were rolled out to.
pub fn evaluate_datasets(pred: &TrajectoryDataset<f64>, truth: &TrajectoryDataset<f64>, boundary: usize) -> Result<RegionReport> {
    let start: usize = match pred.param("start_frame") {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::io(format!("prediction file has bad start_frame `{s}`")))?,
        None => 0,
    };
    if pred.spatial != truth.spatial || pred.samples != truth.samples {
        return Err(waveformer_core::Error::Misaligned(format!(
            "predictions {}x{:?} vs truth {}x{:?}",
            pred.samples, pred.spatial, truth.samples, truth.spatial
        ))
        .into());
    }
    if start + pred.time > truth.time {
        return Err(waveformer_core::Error::Misaligned(format!(
            "predictions cover frames {start}..{} but truth has {} frames",
            start + pred.time,
            truth.time
        ))
        .into());
    }
    let p: Vec<_> = (0..pred.samples).map(|i| pred.trajectory(i)).collect();
    let t = (0..truth.samples)
        .map(|i| truth.frames(i, start, pred.time))
        .collect::<waveformer_core::Result<Vec<_>>>()?;
    Ok(evaluate(&p, &t, boundary)?)
}

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub boundary: usize,
    pub csv: PathBuf,
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let pred = load(&args.pred)?;
    let truth = load(&args.truth)?;
    let report = evaluate_datasets(&pred, &truth, args.boundary)?;
    let model = pred.param("model").unwrap_or("model").to_string();
    println!(
        "{model}: trained {}  extrapolated {}",
        report.trained.map_or("-".into(), |v| format!("{v:.6e}")),
        report.extrapolated.map_or("-".into(), |v| format!("{v:.6e}"))
    );
    write_text(&args.csv, &report.to_csv(&model))
}

/// Reads a `step,model,relative_mse,region` file written by `evaluate`.
pub fn parse_report_csv(text: &str) -> Result<(String, RegionReport)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("step,model,relative_mse,region") {
        return Err(CliError::io("not an evaluate CSV (bad header)"));
    }
    let mut model = None;
    let mut series = Vec::new();
    let mut boundary = 0;
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || CliError::io(format!("bad row {}: `{line}`", i + 2));
        if cells.len() != 4 {
            return Err(bad());
        }
        let step = usize::from_str(cells[0]).map_err(|_| bad())?;
        if step != series.len() {
            return Err(bad());
        }
        match &model {
            None => model = Some(cells[1].to_string()),
            Some(m) if m != cells[1] => return Err(bad()),
            Some(_) => {}
        }
        series.push(f64::from_str(cells[2]).map_err(|_| bad())?);
        match cells[3] {
            "trained" if boundary == step => boundary += 1,
            "extrapolated" => {}
            _ => return Err(bad()),
        }
    }
    let model = model.ok_or_else(|| CliError::io("evaluate CSV has no rows"))?;
    Ok((model, RegionReport::from_series(series, boundary)))
}

#[derive(Clone, Debug)]
pub struct CompareArgs {
    pub csv: Vec<PathBuf>,
    pub out: PathBuf,
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let mut reports = Vec::new();
    for p in &args.csv {
        let text = fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
        reports.push(parse_report_csv(&text).map_err(|e| e.context(p.display()))?);
    }
    let cmp = compare_models(&reports)?;
    let csv = cmp.to_csv();
    print!("{csv}");
    write_text(&args.out, &csv)
}
