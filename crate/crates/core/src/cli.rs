//! Command-line surface: `track`, `interp`, `eval`, `gmc`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gmc::{self, GmcConfig, WarpTable};
use crate::io::{self, MotRow};
use crate::metrics::{self, EvalFrame};
use crate::postprocess::{interpolate, TrackletSeries};
use crate::tracker::{Tracker, TrackerConfig};

#[derive(Debug, Parser)]
#[command(name = "botsort", version, about = "BoT-SORT multi-object tracker and evaluation tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections and write MOT-format results.
    Track(TrackArgs),
    /// Fill short gaps in a result file by linear interpolation.
    Interp(InterpArgs),
    /// Evaluate a result file against ground truth (MOTA, IDF1, cMOTA).
    Eval(EvalArgs),
    /// Estimate inter-frame camera motion from a directory of PGM frames.
    Gmc(GmcArgs),
}

/// Where camera-motion warps come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GmcSource {
    File(PathBuf),
    Compute(PathBuf),
    None,
}

impl FromStr for GmcSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            return Ok(GmcSource::None);
        }
        match s.split_once(':') {
            Some(("file", p)) if !p.is_empty() => Ok(GmcSource::File(p.into())),
            Some(("compute", p)) if !p.is_empty() => Ok(GmcSource::Compute(p.into())),
            _ => Err(format!("expected file:PATH, compute:DIR or none, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Appearance embeddings; enables the fused IoU/appearance first stage.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Fail when a high-confidence detection has no embedding.
    #[arg(long, requires = "embeddings")]
    pub require_embeddings: bool,
    /// Camera motion: `file:<warps.txt>`, `compute:<pgm dir>` or `none`.
    #[arg(long, default_value = "none")]
    pub gmc: GmcSource,
    /// Downscale factor for `--gmc compute:`.
    #[arg(long, default_value_t = 1)]
    pub gmc_downscale: usize,
    /// Only shift track means under camera motion.
    #[arg(long)]
    pub no_cmc_cov: bool,
    /// Also write extrapolated boxes for just-lost tracks.
    #[arg(long)]
    pub pred: bool,
    #[arg(long, default_value_t = 1)]
    pub pred_horizon: u32,
    #[arg(long, default_value_t = 0.6)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.7)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub low_floor: f64,
    #[arg(long, default_value_t = 0.8)]
    pub match_first: f64,
    #[arg(long, default_value_t = 0.5)]
    pub match_second: f64,
    #[arg(long, default_value_t = 0.7)]
    pub match_unconfirmed: f64,
    /// IoU-distance gate for appearance fusion.
    #[arg(long, default_value_t = 0.5)]
    pub proximity: f64,
    /// Cosine-distance gate for appearance fusion.
    #[arg(long, default_value_t = 0.2)]
    pub appearance: f64,
    #[arg(long, default_value_t = 30)]
    pub buffer: u32,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// RANSAC seed for `--gmc compute:`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub max_gap: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth; rows with conf 0 are ignored.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub cmota_csv: Option<PathBuf>,
    #[arg(long)]
    pub idf1_csv: Option<PathBuf>,
    #[arg(long, default_value_t = metrics::DEFAULT_IOU_THRESH)]
    pub iou: f64,
}

#[derive(Debug, Args)]
pub struct GmcArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub downscale: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrackArgs {
    pub fn tracker_config(&self) -> TrackerConfig {
        let mut cfg = TrackerConfig {
            tau: self.tau,
            eta: self.eta,
            low_floor: self.low_floor,
            match_thresh_first: self.match_first,
            match_thresh_second: self.match_second,
            match_thresh_unconfirmed: self.match_unconfirmed,
            track_buffer: self.buffer,
            alpha: self.alpha,
            use_reid: self.embeddings.is_some(),
            require_embeddings: self.require_embeddings,
            use_cmc: self.gmc != GmcSource::None,
            cmc_cov: !self.no_cmc_cov,
            output_pred: self.pred,
            pred_horizon: self.pred_horizon,
            ..TrackerConfig::default()
        };
        cfg.fusion.theta_iou = self.proximity;
        cfg.fusion.theta_emb = self.appearance;
        cfg
    }
}

fn gmc_config(downscale: usize, seed: u64) -> Result<GmcConfig> {
    if downscale < 1 {
        return Err(Error::InvalidParameter("downscale must be >= 1".into()));
    }
    Ok(GmcConfig { downscale, seed, ..GmcConfig::default() })
}

fn compute_warps(dir: &Path, cfg: &GmcConfig) -> Result<WarpTable> {
    let (table, warnings) = gmc::estimate_directory(dir, cfg)?;
    for (frame, w) in warnings {
        log::warn!("frame {frame}: identity warp used ({w})");
    }
    Ok(table)
}

/// Runs the tracker over every frame from 1 to the last detection frame.
pub fn run_track(args: &TrackArgs) -> Result<Vec<MotRow>> {
    let cfg = args.tracker_config();
    let mut tracker = Tracker::new(cfg)?;
    let mut dets = io::read_detections(&args.detections)?;
    if let Some(p) = &args.embeddings {
        io::read_embeddings(p, &mut dets)?;
    }
    let warps = match &args.gmc {
        GmcSource::None => WarpTable::new(),
        GmcSource::File(p) => gmc::load_warps(p)?,
        GmcSource::Compute(dir) => compute_warps(dir, &gmc_config(args.gmc_downscale, args.seed)?)?,
    };
    let mut rows = Vec::new();
    for frame in 1..=dets.max_frame().unwrap_or(0) {
        for out in tracker.step(frame, dets.frame(frame), &warps.get(frame))? {
            rows.push(MotRow::from_bbox(frame, out.track_id as i64, &out.bbox, out.score));
        }
    }
    Ok(rows)
}

/// Groups result rows into per-id series ordered by frame.
pub fn rows_to_series(rows: &[MotRow], path: &Path) -> Result<Vec<TrackletSeries>> {
    let mut by_id: BTreeMap<i64, Vec<(u32, crate::geometry::BBox, f64)>> = BTreeMap::new();
    for r in rows {
        let b = r.bbox().map_err(|e| Error::parse(path, 0, format!("frame {} id {}: {e}", r.frame, r.id)))?;
        by_id.entry(r.id).or_default().push((r.frame, b, r.conf));
    }
    by_id
        .into_iter()
        .map(|(id, mut entries)| {
            entries.sort_by_key(|e| e.0);
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateId { kind: "result", id, frame: w[0].0 });
            }
            Ok(TrackletSeries { id, entries })
        })
        .collect()
}

pub fn series_to_rows(series: &[TrackletSeries]) -> Vec<MotRow> {
    series
        .iter()
        .flat_map(|s| s.entries.iter().map(move |(f, b, c)| MotRow::from_bbox(*f, s.id, b, *c)))
        .collect()
}

pub fn run_interp(args: &InterpArgs) -> Result<Vec<MotRow>> {
    let rows = io::read_mot_rows(&args.input)?;
    let series = rows_to_series(&rows, &args.input)?;
    let filled: Vec<_> = series.iter().map(|s| interpolate(s, args.max_gap)).collect();
    Ok(series_to_rows(&filled))
}

/// Builds one evaluation frame per frame number from 1 to the last frame in
/// either file. Ground-truth rows with conf 0 are dropped.
pub fn eval_frames(gt: &[MotRow], results: &[MotRow], gt_path: &Path, res_path: &Path) -> Result<Vec<EvalFrame>> {
    let last = gt.iter().chain(results).map(|r| r.frame).max().unwrap_or(0);
    let mut frames: Vec<EvalFrame> = (1..=last).map(|frame| EvalFrame { frame, ..EvalFrame::default() }).collect();
    for r in gt.iter().filter(|r| r.conf != 0.0) {
        let b = r.bbox().map_err(|e| Error::parse(gt_path, 0, format!("frame {} id {}: {e}", r.frame, r.id)))?;
        frames[r.frame as usize - 1].gt.push((r.id, b));
    }
    for r in results {
        let b = r.bbox().map_err(|e| Error::parse(res_path, 0, format!("frame {} id {}: {e}", r.frame, r.id)))?;
        frames[r.frame as usize - 1].pred.push((r.id, b));
    }
    Ok(frames)
}

pub fn run_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let gt = io::read_mot_rows(&args.gt)?;
    let res = io::read_mot_rows(&args.results)?;
    let frames = eval_frames(&gt, &res, &args.gt, &args.results)?;
    let report = metrics::evaluate(&frames, args.iou)?;
    let t = &report.totals;
    let stdout_err = |e| Error::io(Path::new("<stdout>"), e);
    writeln!(out, "MOTA {:.6}", report.mota).map_err(stdout_err)?;
    writeln!(out, "IDF1 {:.6}", report.id.idf1).map_err(stdout_err)?;
    writeln!(out, "FP {} FN {} IDSW {} GT {} PRED {}", t.fp, t.fn_, t.idsw, t.num_gt, report.num_pred)
        .map_err(stdout_err)?;
    writeln!(out, "IDTP {} IDFP {} IDFN {}", report.id.idtp, report.id.idfp, report.id.idfn).map_err(stdout_err)?;
    writeln!(out, "HOTA not computed; use TrackEval (https://github.com/JonathonLuiten/TrackEval)").map_err(stdout_err)?;
    if let Some(p) = &args.cmota_csv {
        let series = metrics::cmota_series(&report.counts)?;
        io::write_atomic(p, io::format_series_csv("cmota", &series).as_bytes())?;
    }
    if let Some(p) = &args.idf1_csv {
        let series = metrics::idf1_series(&frames, args.iou)?;
        io::write_atomic(p, io::format_series_csv("idf1", &series).as_bytes())?;
    }
    Ok(())
}

pub fn run_gmc(args: &GmcArgs) -> Result<WarpTable> {
    compute_warps(&args.frames, &gmc_config(args.downscale, args.seed)?)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Track(a) => io::write_results(&a.output, &run_track(a)?),
        Command::Interp(a) => io::write_results(&a.output, &run_interp(a)?),
        Command::Eval(a) => run_eval(a, out),
        Command::Gmc(a) => gmc::save_warps(&a.output, &run_gmc(a)?),
    }
}

/// Parses `args` (including the program name) and runs the command. Errors
/// are reported as a single line on `err`; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let line: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            let _ = writeln!(err, "{}", line.join(" "));
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
