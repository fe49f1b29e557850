//! Command-line front end: `map`, `extract`, `inject`, `eval` and
//! `estimate-pitch`.
//!
//! Every command that writes a directory writes `config.json` first, holding
//! the fully resolved parameters of the run. Worker count and output path are
//! left out so that the output tree does not depend on them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutout_pool::{extract_cutouts, ClassTable, CutoutPool};
use crate::dataset_io::{
    self, load_manifest, load_pool, read_json, read_road_mask, save_pool, write_json,
    write_pfm_file, write_synthesized, DatasetManifest, FrameRecord,
};
use crate::error::{Error, Result};
use crate::geometry::{estimate_pitch, perspective_map, CameraRig, DEFAULT_HORIZON_OFFSET_PX};
use crate::injector::{render_frame, InjectionConfig, InjectionMode};
use crate::metrics::{ComponentReport, EvalAccumulator, EvalOptions, PrPoint};

#[derive(Debug, Parser)]
#[command(name = "roadscale", version, about = "Perspective-aware road obstacle synthesis and scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a perspective map (PFM) and horizon row (JSON) per frame.
    Map(MapArgs),
    /// Build a cut-out pool from instance-labeled frames.
    Extract(ExtractArgs),
    /// Inject cut-outs into road frames.
    Inject(InjectArgs),
    /// Score detector outputs against ground-truth instance maps.
    Eval(EvalArgs),
    /// Estimate camera pitch from a road mask.
    EstimatePitch(PitchArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated eligible class names.
    #[arg(long, value_delimiter = ',', default_value = "person,rider,car,truck,bus,train,motorcycle,bicycle,traffic light,traffic sign")]
    pub classes: Vec<String>,
    /// JSON class table; Cityscapes ids when omitted.
    #[arg(long)]
    pub class_table: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Perspective,
    Uniform,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `pool.json`.
    #[arg(long)]
    pub pool: PathBuf,
    /// JSON injection config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub obj_min: Option<f64>,
    #[arg(long)]
    pub obj_max: Option<f64>,
    #[arg(long)]
    pub fill_prob: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub feather: Option<u32>,
    #[arg(long)]
    pub grid_depth: Option<f64>,
    #[arg(long)]
    pub grid_lateral: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<id>_scores.pfm` or `<id>_scores.png` files.
    #[arg(long)]
    pub pred_dir: PathBuf,
    /// Directory of `<id>_labels.png` instance maps.
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Optional directory of `<id>_eval.png` masks (nonzero = scored).
    #[arg(long)]
    pub eval_mask_dir: Option<PathBuf>,
    /// JSON evaluation options; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f32>,
    /// Comma-separated τ values.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Also write the pooled precision-recall curve to `pr_curve.csv`.
    #[arg(long)]
    pub pr_csv: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PitchArgs {
    #[arg(long)]
    pub road_mask: PathBuf,
    #[arg(long)]
    pub focal: f64,
    #[arg(long)]
    pub principal_row: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON_OFFSET_PX)]
    pub offset: i64,
    /// Label value of road pixels; any nonzero value when omitted.
    #[arg(long)]
    pub road_label: Option<u32>,
}

/// Resolved parameters echoed into `config.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Map {
        manifest: PathBuf,
    },
    Extract {
        manifest: PathBuf,
        classes: BTreeSet<String>,
        class_table: ClassTable,
    },
    Inject {
        manifest: PathBuf,
        pool: PathBuf,
        injection: InjectionConfig,
    },
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        eval_mask_dir: Option<PathBuf>,
        options: EvalOptions,
    },
}

pub const CONFIG_FILE: &str = "config.json";

fn prepare_out(out: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join(CONFIG_FILE), config)
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidConfig("--workers must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn for_each_frame<T: Send>(
    manifest: &DatasetManifest,
    workers: Option<usize>,
    f: impl Fn(&FrameRecord) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    thread_pool(workers)?.install(|| manifest.frames.par_iter().map(&f).collect())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Map(a) => cmd_map(&a.manifest, &a.common.out, a.common.workers),
        Command::Extract(a) => {
            let table = match &a.class_table {
                Some(p) => read_json(p)?,
                None => ClassTable::cityscapes(),
            };
            let classes = a.classes.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            cmd_extract(&a.manifest, classes, table, &a.common.out, a.common.workers).map(|_| ())
        }
        Command::Inject(a) => {
            let cfg = resolve_injection(&a)?;
            cmd_inject(&a.manifest, &a.pool, &cfg, &a.common.out, a.common.workers)
        }
        Command::Eval(a) => {
            let mut opts: EvalOptions = match &a.config {
                Some(p) => read_json(p)?,
                None => EvalOptions::default(),
            };
            if let Some(t) = a.threshold {
                opts.binarize_threshold = t;
            }
            if let Some(taus) = a.taus.clone() {
                opts.taus = taus;
            }
            cmd_eval(
                &a.pred_dir,
                &a.gt_dir,
                a.eval_mask_dir.as_deref(),
                &opts,
                &a.common.out,
                a.pr_csv,
                a.common.workers,
            )
            .map(|_| ())
        }
        Command::EstimatePitch(a) => {
            let theta = cmd_estimate_pitch(&a.road_mask, a.focal, a.principal_row, a.offset, a.road_label)?;
            println!("{theta}");
            Ok(())
        }
    }
}

/// Config file values overridden by the flags that were given.
pub fn resolve_injection(a: &InjectArgs) -> Result<InjectionConfig> {
    let mut cfg: InjectionConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => InjectionConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.master_seed = v;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Perspective => InjectionMode::Perspective,
            ModeArg::Uniform => InjectionMode::Uniform,
        };
    }
    let overrides = [
        (a.obj_min, &mut cfg.obj_min_m),
        (a.obj_max, &mut cfg.obj_max_m),
        (a.fill_prob, &mut cfg.fill_probability),
        (a.noise, &mut cfg.noise),
        (a.grid_depth, &mut cfg.grid_depth_m),
        (a.grid_lateral, &mut cfg.grid_lateral_m),
        (a.jitter, &mut cfg.jitter_sigma_m),
    ];
    for (flag, field) in overrides {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(v) = a.feather {
        cfg.feather_px = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapInfo {
    pub frame_id: String,
    pub horizon_row: f64,
    pub rig: CameraRig,
}

/// Writes `<id>_pmap.pfm` and `<id>_pmap.json` for every frame.
pub fn cmd_map(manifest_path: &Path, out: &Path, workers: Option<usize>) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    prepare_out(
        out,
        &RunConfig::Map {
            manifest: manifest_path.to_path_buf(),
        },
    )?;
    for_each_frame(&manifest, workers, |f| {
        let rig = f.rig()?;
        let map = perspective_map(&rig)?;
        write_pfm_file(&out.join(format!("{}_pmap.pfm", f.frame_id)), &map.values)?;
        write_json(
            &out.join(format!("{}_pmap.json", f.frame_id)),
            &MapInfo {
                frame_id: f.frame_id.clone(),
                horizon_row: map.horizon_row,
                rig,
            },
        )
    })?;
    Ok(())
}

/// Extracts cut-outs from every frame with labels and saves the pool.
pub fn cmd_extract(
    manifest_path: &Path,
    classes: BTreeSet<String>,
    table: ClassTable,
    out: &Path,
    workers: Option<usize>,
) -> Result<CutoutPool> {
    let manifest = load_manifest(manifest_path)?;
    prepare_out(
        out,
        &RunConfig::Extract {
            manifest: manifest_path.to_path_buf(),
            classes: classes.clone(),
            class_table: table.clone(),
        },
    )?;
    let per_frame = for_each_frame(&manifest, workers, |f| {
        if f.labels.is_none() {
            return Ok(Vec::new());
        }
        extract_cutouts(&f.load_image()?, &f.load_labels()?, &table, &classes, &f.frame_id)
    })?;
    let pool = CutoutPool::new(per_frame.into_iter().flatten().collect());
    save_pool(out, &pool)?;
    Ok(pool)
}

/// Synthesizes every frame of the manifest into `out`.
pub fn cmd_inject(
    manifest_path: &Path,
    pool_dir: &Path,
    cfg: &InjectionConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<()> {
    cfg.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let pool = load_pool(pool_dir)?;
    prepare_out(
        out,
        &RunConfig::Inject {
            manifest: manifest_path.to_path_buf(),
            pool: pool_dir.to_path_buf(),
            injection: cfg.clone(),
        },
    )?;
    for_each_frame(&manifest, workers, |f| {
        let rig = f.rig()?;
        let frame = render_frame(&f.load_image()?, &f.load_road_mask()?, &rig, &pool, cfg, &f.frame_id)?;
        write_synthesized(out, &f.frame_id, &frame)
    })?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_id: String,
    pub report: ComponentReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: Vec<FrameReport>,
    pub aggregate: ComponentReport,
}

pub const REPORT_FILE: &str = "report.json";
pub const PR_CURVE_FILE: &str = "pr_curve.csv";

fn score_file_for(pred_dir: &Path, frame_id: &str) -> Option<PathBuf> {
    ["pfm", "png"]
        .iter()
        .map(|ext| pred_dir.join(format!("{frame_id}_scores.{ext}")))
        .find(|p| p.is_file())
}

/// Frame ids of every score map in `pred_dir`, sorted.
fn list_predictions(pred_dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(pred_dir).map_err(|e| Error::io(pred_dir, e))?;
    let mut ids = BTreeSet::new();
    for e in entries {
        let e = e.map_err(|e| Error::io(pred_dir, e))?;
        let name = e.file_name().to_string_lossy().into_owned();
        let id = name
            .strip_suffix("_scores.pfm")
            .or_else(|| name.strip_suffix("_scores.png"));
        if let Some(id) = id {
            ids.insert(id.to_string());
        }
    }
    Ok(ids.into_iter().collect())
}

/// Scores every prediction against its ground truth; writes `report.json`
/// and optionally `pr_curve.csv`.
pub fn cmd_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    eval_mask_dir: Option<&Path>,
    opts: &EvalOptions,
    out: &Path,
    pr_csv: bool,
    workers: Option<usize>,
) -> Result<EvalReport> {
    opts.validate()?;
    let ids = list_predictions(pred_dir)?;
    if ids.is_empty() {
        return Err(Error::dataset(pred_dir, "no *_scores.pfm or *_scores.png files"));
    }
    prepare_out(
        out,
        &RunConfig::Eval {
            pred_dir: pred_dir.to_path_buf(),
            gt_dir: gt_dir.to_path_buf(),
            eval_mask_dir: eval_mask_dir.map(Path::to_path_buf),
            options: opts.clone(),
        },
    )?;
    let per_frame: Vec<EvalAccumulator> = thread_pool(workers)?.install(|| {
        ids.par_iter()
            .map(|id| {
                let scores_path = score_file_for(pred_dir, id).expect("listed above");
                let mask_path = eval_mask_dir.map(|d| d.join(format!("{id}_eval.png")));
                let scores = dataset_io::load_score_map(&scores_path, mask_path.as_deref())?;
                let gt = dataset_io::read_labels(&dataset_io::labels_path(gt_dir, id))?;
                EvalAccumulator::from_frame(&scores, &gt, opts)
                    .map_err(|e| Error::dataset(&scores_path, e.to_string()))
            })
            .collect::<Result<_>>()
    })?;
    let mut total = EvalAccumulator::default();
    let mut frames = Vec::with_capacity(ids.len());
    for (id, acc) in ids.iter().zip(&per_frame) {
        total.merge(acc);
        frames.push(FrameReport {
            frame_id: id.clone(),
            report: acc.report(&opts.taus)?,
        });
    }
    let report = EvalReport {
        frames,
        aggregate: total.report(&opts.taus)?,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    if pr_csv {
        write_pr_csv(&out.join(PR_CURVE_FILE), &total.pixels.pr_curve())?;
    }
    Ok(report)
}

fn write_pr_csv(path: &Path, curve: &[PrPoint]) -> Result<()> {
    let mut s = String::from("threshold,precision,recall\n");
    for p in curve {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn cmd_estimate_pitch(
    road_mask: &Path,
    focal_px: f64,
    principal_row: f64,
    offset: i64,
    road_label: Option<u32>,
) -> Result<f64> {
    let mask = read_road_mask(road_mask, road_label)?;
    estimate_pitch(&mask, focal_px, principal_row, offset)
}

/// Machine-readable error line for stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
