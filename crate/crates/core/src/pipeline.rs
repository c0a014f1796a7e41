//! End-to-end run: ingest → drive → cluster → segment → conceptors →
//! replay, writing the artifact set and a hash manifest.
//!
//! Every stage is computed in memory before the output directory is
//! touched, so a failing run leaves no artifacts behind; an I/O failure
//! while writing leaves a manifest marked incomplete.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, ArtifactWriter, ConceptorFile, Manifest};
use crate::clustering::{self, ClusterModel};
use crate::conceptor::{self, Conceptor};
use crate::config::PipelineConfig;
use crate::error::{ensure, Error, Result};
use crate::esn::{self, DrivenRun, LoadedReservoir, Readout, Reservoir, StateSeries};
use crate::ingest::{self, denormalize, GameTrace, ObjectId};
use crate::linalg::Matrix;
use crate::moves::{self, ClusterConceptors, Move, MoveReport};
use crate::plot::{self, PlotStyle};
use crate::replay::{self, ReplayRun};

/// Cluster count the reference match produced with the same presets.
pub const REFERENCE_K: usize = 64;

/// How far the pipeline runs; each stage includes the ones before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Drive,
    Cluster,
    Moves,
    Conceptors,
    Replay,
    /// Everything, plus report and plots.
    Full,
}

/// The raw trace, its normalized form and the hash of the input bytes.
#[derive(Debug, Clone)]
pub struct Input {
    pub raw: GameTrace,
    pub normalized: GameTrace,
    pub sha256: String,
}

pub fn load_input(config: &PipelineConfig) -> Result<Input> {
    let path = &config.input;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: not UTF-8: {e}", path.display()),
    })?;
    let raw = ingest::parse_csv_named(text, path)?;
    let normalized = ingest::normalize(&raw, &config.field)?;
    Ok(Input {
        raw,
        normalized,
        sha256: artifacts::sha256_hex(&bytes),
    })
}

#[derive(Serialize, Deserialize)]
struct DriveCache {
    key: String,
    reservoir: Reservoir,
    states: StateSeries,
    drive_terms: Matrix,
}

fn cache_key(input: &Input, config: &PipelineConfig) -> Result<String> {
    let desc = serde_json::to_string(&(&input.sha256, &config.field, &config.reservoir))?;
    Ok(artifacts::sha256_hex(desc.as_bytes()))
}

/// Builds the reservoir and drives it from the zero state over the whole
/// normalized trace, going through the cache when one is configured.
pub fn drive_stage(config: &PipelineConfig, input: &Input) -> Result<(Reservoir, DrivenRun)> {
    let key = cache_key(input, config)?;
    let cache_file = config
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("drive-{}.json", &key[..16])));
    if let Some(path) = cache_file.as_ref().filter(|p| p.exists()) {
        // an unreadable or stale cache entry is recomputed, never trusted
        match artifacts::read_json::<DriveCache>(path) {
            Ok(c) if c.key == key => {
                info!("using cached drive {}", path.display());
                return Ok((
                    c.reservoir,
                    DrivenRun {
                        series: c.states,
                        drive_terms: c.drive_terms,
                    },
                ));
            }
            Ok(_) => log::warn!("cache key mismatch in {}", path.display()),
            Err(e) => log::warn!("ignoring cache entry {}: {e}", path.display()),
        }
    }
    let reservoir = Reservoir::init(config.reservoir.clone())?;
    let x0 = vec![0.0; reservoir.size()];
    let run = reservoir.drive_trace(&input.normalized, &x0)?;
    if let Some(path) = cache_file {
        let entry = DriveCache {
            key,
            reservoir,
            states: run.series,
            drive_terms: run.drive_terms,
        };
        artifacts::write_file(&path, serde_json::to_string(&entry)?.as_bytes())?;
        return Ok((
            entry.reservoir,
            DrivenRun {
                series: entry.states,
                drive_terms: entry.drive_terms,
            },
        ));
    }
    Ok((reservoir, run))
}

/// Readout and loading results on the post-washout states.
#[derive(Debug, Clone)]
pub struct Trained {
    pub run: DrivenRun,
    pub readout: Readout,
    /// NRMSE of predicting each next world state by the current one.
    pub baseline_nrmse: f64,
    pub loaded: LoadedReservoir,
    pub state_nrmse: f64,
}

/// Trains the readout (state row `i` → input row `i + 1`) and loads the
/// reservoir, both on the post-washout part of the run.
pub fn train_stage(
    config: &PipelineConfig,
    input: &Input,
    reservoir: &Reservoir,
    full: &DrivenRun,
) -> Result<Trained> {
    let total = full.series.len();
    ensure!(
        config.washout + 2 < total,
        Validation,
        "washout {} leaves fewer than 3 of {total} states",
        config.washout
    );
    let run = full.trim_washout(config.washout)?;
    let l = run.series.len();
    let inputs = input.normalized.to_matrix().slice_rows(config.washout, total);
    let current = inputs.slice_rows(0, l - 1);
    let targets = inputs.slice_rows(1, l);
    let readout = esn::train_readout(&run.series.slice(0, l - 1), &targets, config.readout_lambda)?;
    let baseline_nrmse = esn::nrmse(&current, &targets)?;
    let loaded = esn::load_reservoir(&run.series, &run.drive_terms, config.loading_lambda)?;
    let state_nrmse = esn::one_step_state_nrmse(&loaded.weights, &reservoir.bias, &run.series)?;
    Ok(Trained {
        run,
        readout,
        baseline_nrmse,
        loaded,
        state_nrmse,
    })
}

pub fn cluster_stage(config: &PipelineConfig, series: &StateSeries) -> Result<ClusterModel> {
    let model = clustering::xmeans_with(series.states(), &config.xmeans_params())?;
    info!(
        "x-means found k = {} (reference match: k = {REFERENCE_K}; not expected to coincide)",
        model.k
    );
    Ok(model)
}

pub fn moves_stage(
    config: &PipelineConfig,
    series: &StateSeries,
    labels: &[usize],
    trace_start: i64,
) -> Result<Vec<Move>> {
    let moves = moves::segment_cycles(labels, series.cycles(), config.min_len)?;
    Ok(moves::attach_leadin(&moves, config.leadin, trace_start))
}

pub fn conceptor_stage(
    config: &PipelineConfig,
    series: &StateSeries,
    labels: &[usize],
) -> Result<(Conceptor, ClusterConceptors)> {
    let whole = conceptor::conceptor_of_series(series, config.aperture, "whole game")?;
    let per_cluster = moves::cluster_conceptors(series, labels, config.aperture, config.min_states)?;
    Ok((whole, per_cluster))
}

/// Whole-game replay from the first post-washout state.
pub fn replay_stage(
    config: &PipelineConfig,
    reservoir: &Reservoir,
    trained: &Trained,
    whole: &Conceptor,
) -> Result<ReplayRun> {
    replay::replay_from(
        trained.run.series.row(0),
        whole,
        &trained.loaded.weights,
        &reservoir.bias,
        &trained.readout.weights,
        config.replay_steps,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub states: usize,
    pub moves: usize,
    pub short_moves: usize,
    pub mean_move_len: f64,
    pub max_move_len: usize,
    /// Conceptor quota, when the cluster has enough states for one.
    pub quota: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub steps: usize,
    pub max_abs_state: f64,
    pub max_activation: f64,
    pub ball_x_sign_changes: usize,
    pub ball_x_min: f64,
    pub ball_x_max: f64,
    /// Steps where some readout coordinate leaves the normalized range.
    pub out_of_field_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub source: Option<String>,
    pub left_team: Option<String>,
    pub right_team: Option<String>,
    pub world_states: usize,
    pub washout: usize,
    pub labeled_states: usize,
    pub reservoir_size: usize,
    pub readout_nrmse: f64,
    pub baseline_nrmse: f64,
    pub loading_nrmse: f64,
    pub one_step_state_nrmse: f64,
    pub k: usize,
    pub reference_k: usize,
    pub bic: f64,
    pub inertia: f64,
    pub total_moves: usize,
    pub short_moves: usize,
    pub conceptors: usize,
    pub skipped_clusters: Vec<(usize, usize)>,
    pub whole_game_quota: f64,
    pub whole_game_rank: usize,
    pub clusters: Vec<ClusterSummary>,
    pub replay: Option<ReplaySummary>,
}

impl Report {
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let opt = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "source            {}", opt(&self.source));
        let _ = writeln!(s, "teams             {} vs {}", opt(&self.left_team), opt(&self.right_team));
        let _ = writeln!(s, "world states      {}", self.world_states);
        let _ = writeln!(s, "washout           {}", self.washout);
        let _ = writeln!(s, "labeled states    {}", self.labeled_states);
        let _ = writeln!(s, "reservoir size    {}", self.reservoir_size);
        let _ = writeln!(
            s,
            "readout NRMSE     {:.6} (previous-value baseline {:.6})",
            self.readout_nrmse, self.baseline_nrmse
        );
        let _ = writeln!(
            s,
            "loading NRMSE     {:.6} (input-free one-step state NRMSE {:.6})",
            self.loading_nrmse, self.one_step_state_nrmse
        );
        let _ = writeln!(
            s,
            "clusters          {} (reference match: {})",
            self.k, self.reference_k
        );
        let _ = writeln!(s, "BIC               {:.4}", self.bic);
        let _ = writeln!(s, "inertia           {:.6}", self.inertia);
        let _ = writeln!(
            s,
            "moves             {} ({} shorter than min_len)",
            self.total_moves, self.short_moves
        );
        let _ = writeln!(
            s,
            "conceptors        {} per-cluster, {} clusters skipped",
            self.conceptors,
            self.skipped_clusters.len()
        );
        let _ = writeln!(
            s,
            "whole-game        quota {:.6}, rank {}",
            self.whole_game_quota, self.whole_game_rank
        );
        if let Some(r) = &self.replay {
            let _ = writeln!(
                s,
                "replay            {} steps, max |x| {:.6}, max activation {:.6}",
                r.steps, r.max_abs_state, r.max_activation
            );
            let _ = writeln!(
                s,
                "replay ball x     {} sign changes, range [{:.4}, {:.4}], {} out-of-field steps",
                r.ball_x_sign_changes, r.ball_x_min, r.ball_x_max, r.out_of_field_steps
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "cluster  states  moves  short  mean_len  max_len  quota");
        for c in &self.clusters {
            let quota = c.quota.map_or("-".to_string(), |q| format!("{q:.6}"));
            let _ = writeln!(
                s,
                "{:>7}  {:>6}  {:>5}  {:>5}  {:>8.2}  {:>7}  {quota}",
                c.cluster, c.states, c.moves, c.short_moves, c.mean_move_len, c.max_move_len
            );
        }
        s
    }
}

pub fn summarize_replay(run: &ReplayRun) -> ReplaySummary {
    let bx = ObjectId::BALL.x_index();
    let xs: Vec<f64> = run.outputs.row_iter().map(|r| r[bx]).collect();
    ReplaySummary {
        steps: run.states.len(),
        max_abs_state: run.states.max_abs(),
        max_activation: run.max_activation,
        ball_x_sign_changes: replay::sign_changes(xs.iter().copied()),
        ball_x_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        ball_x_max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        out_of_field_steps: run
            .outputs
            .row_iter()
            .filter(|r| r.iter().any(|v| v.abs() >= 1.0))
            .count(),
    }
}

/// Everything computed by a run, up to the requested stage.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub stage: Stage,
    pub input: Input,
    pub reservoir: Option<Reservoir>,
    pub trained: Option<Trained>,
    pub model: Option<ClusterModel>,
    pub moves: Option<Vec<Move>>,
    pub move_report: Option<MoveReport>,
    pub whole_game: Option<Conceptor>,
    pub cluster_conceptors: Option<ClusterConceptors>,
    pub replay: Option<ReplayRun>,
}

impl Analysis {
    pub fn series(&self) -> Option<&StateSeries> {
        self.trained.as_ref().map(|t| &t.run.series)
    }

    pub fn report(&self) -> Option<Report> {
        let trained = self.trained.as_ref()?;
        let model = self.model.as_ref()?;
        let move_report = self.move_report.as_ref()?;
        let whole = self.whole_game.as_ref()?;
        let per_cluster = self.cluster_conceptors.as_ref()?;
        let sizes = model.cluster_sizes();
        let clusters = move_report
            .clusters
            .iter()
            .map(|c| ClusterSummary {
                cluster: c.cluster,
                states: sizes[c.cluster],
                moves: c.moves,
                short_moves: c.short_moves,
                mean_move_len: c.mean_len,
                max_move_len: c.max_len,
                quota: per_cluster.conceptors.get(&c.cluster).map(Conceptor::quota),
            })
            .collect();
        let meta = &self.input.raw.metadata;
        Some(Report {
            source: meta.source.clone(),
            left_team: meta.left_team.clone(),
            right_team: meta.right_team.clone(),
            world_states: self.input.raw.len(),
            washout: trained.run.series.washout(),
            labeled_states: trained.run.series.len(),
            reservoir_size: trained.run.series.dim(),
            readout_nrmse: trained.readout.nrmse,
            baseline_nrmse: trained.baseline_nrmse,
            loading_nrmse: trained.loaded.nrmse,
            one_step_state_nrmse: trained.state_nrmse,
            k: model.k,
            reference_k: REFERENCE_K,
            bic: model.bic,
            inertia: model.inertia,
            total_moves: move_report.total_moves,
            short_moves: self
                .moves
                .as_ref()
                .map_or(0, |m| m.iter().filter(|m| m.short).count()),
            conceptors: per_cluster.conceptors.len(),
            skipped_clusters: per_cluster.skipped.clone(),
            whole_game_quota: whole.quota(),
            whole_game_rank: whole.rank(),
            clusters,
            replay: self.replay.as_ref().map(summarize_replay),
        })
    }
}

/// Computes every stage up to `stage` without writing anything.
pub fn analyze(config: &PipelineConfig, stage: Stage) -> Result<Analysis> {
    config.validate()?;
    let started = Instant::now();
    let input = load_input(config)?;
    info!(
        "read {} world states from {}",
        input.raw.len(),
        config.input.display()
    );
    let mut a = Analysis {
        stage,
        input,
        reservoir: None,
        trained: None,
        model: None,
        moves: None,
        move_report: None,
        whole_game: None,
        cluster_conceptors: None,
        replay: None,
    };
    if stage == Stage::Ingest {
        return Ok(a);
    }

    let (reservoir, full) = drive_stage(config, &a.input)?;
    let trained = train_stage(config, &a.input, &reservoir, &full)?;
    info!(
        "drove and trained in {:.2?}: readout NRMSE {:.4}, loading NRMSE {:.4}",
        started.elapsed(),
        trained.readout.nrmse,
        trained.loaded.nrmse
    );
    a.reservoir = Some(reservoir);
    a.trained = Some(trained);
    if stage == Stage::Drive {
        return Ok(a);
    }

    let series = &a.trained.as_ref().expect("set above").run.series;
    let model = cluster_stage(config, series)?;
    info!("clustered in {:.2?}", started.elapsed());
    if stage >= Stage::Moves {
        let moves = moves_stage(config, series, &model.labels, a.input.raw.first_cycle())?;
        a.move_report = Some(moves::move_report(&moves, &model.labels)?);
        a.moves = Some(moves);
    }
    if stage >= Stage::Conceptors {
        let (whole, per_cluster) = conceptor_stage(config, series, &model.labels)?;
        info!(
            "{} cluster conceptors in {:.2?}",
            per_cluster.conceptors.len(),
            started.elapsed()
        );
        a.whole_game = Some(whole);
        a.cluster_conceptors = Some(per_cluster);
    }
    a.model = Some(model);
    if stage >= Stage::Replay {
        let run = replay_stage(
            config,
            a.reservoir.as_ref().expect("set above"),
            a.trained.as_ref().expect("set above"),
            a.whole_game.as_ref().expect("set above"),
        )?;
        info!("replayed {} steps in {:.2?}", run.states.len(), started.elapsed());
        a.replay = Some(run);
    }
    Ok(a)
}

/// SVG documents keyed by their path relative to the output directory.
pub fn render_plots(config: &PipelineConfig, a: &Analysis) -> Result<Vec<(String, String)>> {
    let mut jobs: Vec<(String, Matrix, usize, Vec<ObjectId>, String)> = Vec::new();
    let raw = a.input.raw.to_matrix();
    jobs.push((
        "overview.svg".into(),
        raw.clone(),
        0,
        plot::goalies_and_ball(),
        "Two goalies and the ball".into(),
    ));
    if let Some(run) = &a.replay {
        let rows: Vec<f64> = run
            .outputs
            .row_iter()
            .flat_map(|r| denormalize(r, &config.field))
            .collect();
        let m = Matrix::new(run.outputs.rows(), run.outputs.cols(), rows)?;
        jobs.push((
            "replay.svg".into(),
            m,
            0,
            plot::goalies_and_ball(),
            format!("Replay under the {} conceptor", run.conceptor_source),
        ));
    }
    if let (Some(moves), Some(model)) = (&a.moves, &a.model) {
        let sizes = model.cluster_sizes();
        let mut order: Vec<usize> = (0..model.k).collect();
        order.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), c));
        let cycles = a.input.raw.cycles();
        let all: Vec<ObjectId> = ObjectId::all().collect();
        for &cluster in order.iter().take(config.plot_clusters) {
            for (j, m) in moves.iter().filter(|m| m.cluster == cluster).enumerate() {
                let from = cycles.partition_point(|&c| c < m.start_cycle - m.leadin_cycles);
                let start = cycles.partition_point(|&c| c < m.start_cycle);
                let end = cycles.partition_point(|&c| c <= m.end_cycle);
                let rows: Vec<usize> = (from..end).collect();
                jobs.push((
                    format!("cluster_{cluster:03}_move_{j:03}.svg"),
                    raw.select_rows(&rows),
                    start - from,
                    all.clone(),
                    format!(
                        "Cluster {cluster}, move {j}: cycles {}..{} (lead-in {})",
                        m.start_cycle, m.end_cycle, m.leadin_cycles
                    ),
                ));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(name, positions, leadin, selection, title)| {
            let style = PlotStyle {
                title: Some(title),
                field: config.field,
                ..PlotStyle::default()
            };
            let svg = plot::plot_segment(&positions, leadin, &selection, &style)?;
            Ok((format!("{}/{name}", artifacts::PLOTS_DIR), svg))
        })
        .collect()
}

/// Artifacts of the computed stages as `(relative path, bytes)`.
pub fn render_artifacts(config: &PipelineConfig, a: &Analysis) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    if a.stage == Stage::Ingest {
        files.push((
            "trace.csv".into(),
            ingest::write_csv(&a.input.raw).into_bytes(),
        ));
    }
    if a.stage == Stage::Drive {
        let reservoir = a.reservoir.as_ref().expect("drive stage computed");
        let trained = a.trained.as_ref().expect("drive stage computed");
        files.push(("reservoir.json".into(), serde_json::to_vec(reservoir)?));
        files.push(("states.json".into(), serde_json::to_vec(&trained.run.series)?));
    }
    if let (Some(series), Some(model)) = (a.series(), &a.model) {
        files.push((
            artifacts::LABELS_FILE.into(),
            artifacts::labels_text(series.cycles(), &model.labels)?.into_bytes(),
        ));
        files.push((
            artifacts::MODEL_FILE.into(),
            serde_json::to_vec(&model.summary())?,
        ));
    }
    if let Some(moves) = &a.moves {
        files.push((
            artifacts::MOVES_FILE.into(),
            artifacts::moves_text(moves)?.into_bytes(),
        ));
    }
    if let Some(per_cluster) = &a.cluster_conceptors {
        let file = ConceptorFile::new(a.whole_game.clone(), per_cluster);
        files.push((artifacts::CONCEPTORS_FILE.into(), file.to_json()?.into_bytes()));
    }
    if let Some(run) = &a.replay {
        files.push((
            artifacts::REPLAY_FILE.into(),
            artifacts::replay_text(&run.outputs, &config.field)?.into_bytes(),
        ));
    }
    if a.stage == Stage::Full {
        if let Some(report) = a.report() {
            files.push((artifacts::REPORT_TEXT_FILE.into(), report.to_text().into_bytes()));
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            files.push((artifacts::REPORT_JSON_FILE.into(), json));
        }
        for (name, svg) in render_plots(config, a)? {
            files.push((name, svg.into_bytes()));
        }
    }
    Ok(files)
}

/// Result of a run that wrote its artifacts.
#[derive(Debug)]
pub struct PipelineOutput {
    pub analysis: Analysis,
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

/// Runs up to `stage` and writes that stage's artifacts and the manifest.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<PipelineOutput> {
    let analysis = analyze(config, stage)?;
    let files = render_artifacts(config, &analysis)?;
    let manifest = write_artifacts(config, &analysis.input.sha256, &config.out_dir, &files)?;
    Ok(PipelineOutput {
        analysis,
        manifest,
        out_dir: config.out_dir.clone(),
    })
}

/// The full pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    run_stage(config, Stage::Full)
}

fn write_artifacts(
    config: &PipelineConfig,
    input_sha256: &str,
    dir: &Path,
    files: &[(String, Vec<u8>)],
) -> Result<Manifest> {
    // plots from an earlier run with other clusters would otherwise linger
    let plots = dir.join(artifacts::PLOTS_DIR);
    if plots.exists() {
        std::fs::remove_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    }
    let manifest = Manifest::new(
        config.computation_text(),
        config.seed,
        config.reservoir.seed,
        input_sha256.to_string(),
    );
    let mut writer = ArtifactWriter::create(dir, manifest)?;
    for (name, bytes) in files {
        if let Err(e) = writer.write(name, bytes) {
            writer.fail(&e)?;
            return Err(e);
        }
    }
    writer.finish()
}

/// Max-norm difference between two driven runs after `washout` steps; the
/// echo state property makes it vanish.
pub fn echo_state_gap(reservoir: &Reservoir, inputs: &Matrix, x0: &[f64], x1: &[f64], washout: usize) -> Result<f64> {
    let a = reservoir.drive(inputs, x0)?;
    let b = reservoir.drive(inputs, x1)?;
    ensure!(washout < a.len(), Validation, "washout {washout} ≥ {} steps", a.len());
    let mut gap = 0.0f64;
    for t in washout..a.len() {
        for (u, v) in a.row(t).iter().zip(b.row(t)) {
            gap = gap.max((u - v).abs());
        }
    }
    Ok(gap)
}

