//! Pipeline configuration: a `key = value` text file plus overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{XMeansParams, DEFAULT_MAX_ITER};
use crate::conceptor::DEFAULT_APERTURE;
use crate::error::{ensure, Error, Result};
use crate::esn::ReservoirConfig;
use crate::ingest::FieldSpec;
use crate::moves::{DEFAULT_LEADIN, DEFAULT_MIN_LEN, DEFAULT_MIN_STATES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    /// Directory for cached reservoirs and driven states; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub field: FieldSpec,
    pub reservoir: ReservoirConfig,
    pub washout: usize,
    pub readout_lambda: f64,
    pub loading_lambda: f64,
    pub aperture: f64,
    pub k_max: usize,
    pub max_improve_iters: usize,
    pub kmeans_max_iter: usize,
    pub min_len: usize,
    pub leadin: usize,
    pub min_states: usize,
    pub replay_steps: usize,
    /// Clustering seed; the reservoir has its own (`reservoir.seed`).
    pub seed: u64,
    /// Number of largest clusters that get per-move plots.
    pub plot_clusters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("data/synthetic_200.csv"),
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            field: FieldSpec::default(),
            reservoir: ReservoirConfig::default(),
            washout: 100,
            readout_lambda: 1e-4,
            loading_lambda: 1e-4,
            aperture: DEFAULT_APERTURE,
            k_max: 100,
            max_improve_iters: 5,
            kmeans_max_iter: DEFAULT_MAX_ITER,
            min_len: DEFAULT_MIN_LEN,
            leadin: DEFAULT_LEADIN,
            min_states: DEFAULT_MIN_STATES,
            replay_steps: 6000,
            seed: 42,
            plot_clusters: 2,
        }
    }
}

const KEYS: &[&str] = &[
    "input",
    "out_dir",
    "cache_dir",
    "field.half_length",
    "field.half_width",
    "field.margin",
    "reservoir.n_inputs",
    "reservoir.n_reservoir",
    "reservoir.n_outputs",
    "reservoir.spectral_radius",
    "reservoir.input_scale",
    "reservoir.bias_scale",
    "reservoir.connectivity",
    "reservoir.seed",
    "washout",
    "readout_lambda",
    "loading_lambda",
    "aperture",
    "k_max",
    "max_improve_iters",
    "kmeans_max_iter",
    "min_len",
    "leadin",
    "min_states",
    "replay_steps",
    "seed",
    "plot_clusters",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Validation(format!("invalid value {value:?} for {key}")))
}

impl PipelineConfig {
    /// Every key accepted by [`PipelineConfig::set`].
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "input" => self.input = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "cache_dir" => self.cache_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "field.half_length" => self.field.half_length = parse_num(key, v)?,
            "field.half_width" => self.field.half_width = parse_num(key, v)?,
            "field.margin" => self.field.margin = parse_num(key, v)?,
            "reservoir.n_inputs" => self.reservoir.n_inputs = parse_num(key, v)?,
            "reservoir.n_reservoir" => self.reservoir.n_reservoir = parse_num(key, v)?,
            "reservoir.n_outputs" => self.reservoir.n_outputs = parse_num(key, v)?,
            "reservoir.spectral_radius" => {
                self.reservoir.spectral_radius_target = parse_num(key, v)?
            }
            "reservoir.input_scale" => self.reservoir.input_scale = parse_num(key, v)?,
            "reservoir.bias_scale" => self.reservoir.bias_scale = parse_num(key, v)?,
            "reservoir.connectivity" => self.reservoir.connectivity = parse_num(key, v)?,
            "reservoir.seed" => self.reservoir.seed = parse_num(key, v)?,
            "washout" => self.washout = parse_num(key, v)?,
            "readout_lambda" => self.readout_lambda = parse_num(key, v)?,
            "loading_lambda" => self.loading_lambda = parse_num(key, v)?,
            "aperture" => self.aperture = parse_num(key, v)?,
            "k_max" => self.k_max = parse_num(key, v)?,
            "max_improve_iters" => self.max_improve_iters = parse_num(key, v)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse_num(key, v)?,
            "min_len" => self.min_len = parse_num(key, v)?,
            "leadin" => self.leadin = parse_num(key, v)?,
            "min_states" => self.min_states = parse_num(key, v)?,
            "replay_steps" => self.replay_steps = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "plot_clusters" => self.plot_clusters = parse_num(key, v)?,
            other => return Err(Error::Validation(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| match e {
                Error::Validation(message) => Error::Parse {
                    line: i + 1,
                    message,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let r = &self.reservoir;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("input", self.input.display().to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv(
            "cache_dir",
            self.cache_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        // `{:?}` on f64 prints the shortest exact representation
        kv("field.half_length", format!("{:?}", self.field.half_length));
        kv("field.half_width", format!("{:?}", self.field.half_width));
        kv("field.margin", format!("{:?}", self.field.margin));
        kv("reservoir.n_inputs", r.n_inputs.to_string());
        kv("reservoir.n_reservoir", r.n_reservoir.to_string());
        kv("reservoir.n_outputs", r.n_outputs.to_string());
        kv(
            "reservoir.spectral_radius",
            format!("{:?}", r.spectral_radius_target),
        );
        kv("reservoir.input_scale", format!("{:?}", r.input_scale));
        kv("reservoir.bias_scale", format!("{:?}", r.bias_scale));
        kv("reservoir.connectivity", format!("{:?}", r.connectivity));
        kv("reservoir.seed", r.seed.to_string());
        kv("washout", self.washout.to_string());
        kv("readout_lambda", format!("{:?}", self.readout_lambda));
        kv("loading_lambda", format!("{:?}", self.loading_lambda));
        kv("aperture", format!("{:?}", self.aperture));
        kv("k_max", self.k_max.to_string());
        kv("max_improve_iters", self.max_improve_iters.to_string());
        kv("kmeans_max_iter", self.kmeans_max_iter.to_string());
        kv("min_len", self.min_len.to_string());
        kv("leadin", self.leadin.to_string());
        kv("min_states", self.min_states.to_string());
        kv("replay_steps", self.replay_steps.to_string());
        kv("seed", self.seed.to_string());
        kv("plot_clusters", self.plot_clusters.to_string());
        out
    }

    /// [`to_text`](Self::to_text) without the file-system locations, which
    /// do not influence any computed value.
    pub fn computation_text(&self) -> String {
        self.to_text()
            .lines()
            .filter(|l| {
                let key = l.split_once(" = ").map_or("", |(k, _)| k);
                !matches!(key, "input" | "out_dir" | "cache_dir")
            })
            .map(|l| format!("{l}\n"))
            .collect()
    }

    pub fn xmeans_params(&self) -> XMeansParams {
        XMeansParams {
            k_max: self.k_max,
            max_improve_iters: self.max_improve_iters,
            seed: self.seed,
            max_iter: self.kmeans_max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.reservoir.validate()?;
        ensure!(
            self.reservoir.n_inputs == crate::ingest::POSITION_DIM
                && self.reservoir.n_outputs == crate::ingest::POSITION_DIM,
            Validation,
            "the pipeline needs {} reservoir inputs and outputs",
            crate::ingest::POSITION_DIM
        );
        for (name, v) in [
            ("readout_lambda", self.readout_lambda),
            ("loading_lambda", self.loading_lambda),
        ] {
            ensure!(
                v >= 0.0 && v.is_finite(),
                Validation,
                "{name} must be a non-negative number, got {v}"
            );
        }
        ensure!(
            self.aperture > 0.0 && self.aperture.is_finite(),
            Validation,
            "aperture must be positive, got {}",
            self.aperture
        );
        ensure!(self.k_max >= 2, Validation, "k_max must be at least 2");
        ensure!(self.kmeans_max_iter >= 1, Validation, "kmeans_max_iter must be at least 1");
        ensure!(self.min_len >= 1, Validation, "min_len must be at least 1");
        ensure!(self.min_states >= 1, Validation, "min_states must be at least 1");
        ensure!(self.replay_steps >= 1, Validation, "replay_steps must be at least 1");
        Ok(())
    }
}
