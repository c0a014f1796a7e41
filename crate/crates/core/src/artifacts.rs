//! Byte-stable artifact formats and their readers.
//!
//! Every writer has a pure `*_text` / `*_json` form so the pipeline can hash
//! exactly the bytes it writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conceptor::Conceptor;
use crate::error::{ensure, Error, Result};
use crate::ingest::{denormalize, write_rows, FieldSpec};
use crate::linalg::Matrix;
use crate::moves::{ClusterConceptors, Move};

pub const LABELS_FILE: &str = "labels.csv";
pub const MOVES_FILE: &str = "moves.jsonl";
pub const CONCEPTORS_FILE: &str = "conceptors.json";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPLAY_FILE: &str = "replay.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOTS_DIR: &str = "plots";

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---- labels.csv ----------------------------------------------------------

pub fn labels_text(cycles: &[i64], labels: &[usize]) -> Result<String> {
    ensure!(
        cycles.len() == labels.len(),
        Dimension,
        "{} cycles for {} labels",
        cycles.len(),
        labels.len()
    );
    let mut out = String::from("cycle,cluster\n");
    for (c, l) in cycles.iter().zip(labels) {
        let _ = writeln!(out, "{c},{l}");
    }
    Ok(out)
}

pub fn parse_labels(text: &str) -> Result<(Vec<i64>, Vec<usize>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "cycle,cluster" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `cycle,cluster`".into(),
            })
        }
    }
    let mut cycles = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (c, l) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected two fields, got {line:?}")))?;
        cycles.push(c.trim().parse().map_err(|_| bad(format!("bad cycle {c:?}")))?);
        labels.push(l.trim().parse().map_err(|_| bad(format!("bad cluster {l:?}")))?);
    }
    Ok((cycles, labels))
}

pub fn read_labels(path: &Path) -> Result<(Vec<i64>, Vec<usize>)> {
    parse_labels(&read_text(path)?)
}

// ---- moves.jsonl ---------------------------------------------------------

/// One line of `moves.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub cluster: usize,
    pub start_cycle: i64,
    pub end_cycle: i64,
    pub leadin_cycles: i64,
    /// Number of labeled states in the move.
    pub len: usize,
    /// Shorter than the configured minimum length.
    pub short: bool,
}

pub fn moves_text(moves: &[Move]) -> Result<String> {
    let mut out = String::new();
    for m in moves {
        let rec = MoveRecord {
            cluster: m.cluster,
            start_cycle: m.start_cycle,
            end_cycle: m.end_cycle,
            leadin_cycles: m.leadin_cycles,
            len: m.len,
            short: m.short,
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses `moves.jsonl`; row offsets are rebuilt from the run lengths, so
/// the moves must be in file order.
pub fn parse_moves(text: &str) -> Result<Vec<Move>> {
    let mut moves = Vec::new();
    let mut row = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: MoveRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        moves.push(Move {
            cluster: rec.cluster,
            start_cycle: rec.start_cycle,
            end_cycle: rec.end_cycle,
            leadin_cycles: rec.leadin_cycles,
            first_row: row,
            len: rec.len,
            short: rec.short,
        });
        row += rec.len;
    }
    Ok(moves)
}

pub fn read_moves(path: &Path) -> Result<Vec<Move>> {
    parse_moves(&read_text(path)?)
}

// ---- conceptors.json -----------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConceptorRecord {
    pub cluster: usize,
    pub conceptor: Conceptor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptorFile {
    pub whole_game: Option<Conceptor>,
    pub clusters: Vec<ClusterConceptorRecord>,
    /// `(cluster, state count)` for clusters too small to get a conceptor.
    pub skipped: Vec<(usize, usize)>,
}

impl ConceptorFile {
    pub fn new(whole_game: Option<Conceptor>, per_cluster: &ClusterConceptors) -> Self {
        Self {
            whole_game,
            clusters: per_cluster
                .conceptors
                .iter()
                .map(|(&cluster, c)| ClusterConceptorRecord {
                    cluster,
                    conceptor: c.clone(),
                })
                .collect(),
            skipped: per_cluster.skipped.clone(),
        }
    }

    pub fn cluster(&self, cluster: usize) -> Option<&Conceptor> {
        self.clusters
            .iter()
            .find(|r| r.cluster == cluster)
            .map(|r| &r.conceptor)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Loading checks eigenvector orthonormality, so a corrupted file is
/// rejected rather than producing a wrong `C`.
pub fn read_conceptors(path: &Path) -> Result<ConceptorFile> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

// ---- replay.csv ----------------------------------------------------------

/// Denormalized readout trajectory in the 47-column trace schema; the cycle
/// column counts replay steps from 0.
pub fn replay_text(outputs: &Matrix, field: &FieldSpec) -> Result<String> {
    ensure!(
        outputs.cols() == crate::ingest::POSITION_DIM,
        Dimension,
        "replay outputs have {} columns, expected {}",
        outputs.cols(),
        crate::ingest::POSITION_DIM
    );
    let rows: Vec<Vec<f64>> = outputs.row_iter().map(|r| denormalize(r, field)).collect();
    Ok(write_rows(
        rows.iter().enumerate().map(|(t, r)| (t as i64, r.as_slice())),
    ))
}

// ---- manifest.json -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// `false` while artifacts are being written or after a failed run.
    pub complete: bool,
    pub seed: u64,
    pub reservoir_seed: u64,
    /// Canonical `key = value` configuration text.
    pub config: String,
    pub input_sha256: String,
    /// Relative path → SHA-256 of the file bytes.
    pub artifacts: BTreeMap<String, String>,
    /// Hash over the sorted `(path, hash)` list and the input hash.
    pub combined_sha256: String,
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(config: String, seed: u64, reservoir_seed: u64, input_sha256: String) -> Self {
        let mut m = Self {
            complete: false,
            seed,
            reservoir_seed,
            config,
            input_sha256,
            artifacts: BTreeMap::new(),
            combined_sha256: String::new(),
            error: None,
        };
        m.combined_sha256 = m.combined();
        m
    }

    pub fn record(&mut self, relative: &str, bytes: &[u8]) {
        self.artifacts.insert(relative.to_string(), sha256_hex(bytes));
        self.combined_sha256 = self.combined();
    }

    fn combined(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.input_sha256.as_bytes());
        h.update(b"\n");
        h.update(self.config.as_bytes());
        for (path, hash) in &self.artifacts {
            h.update(path.as_bytes());
            h.update(b"\0");
            h.update(hash.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Recomputes every hash from the files under `dir`; returns the paths
    /// whose bytes no longer match.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (path, hash) in &self.artifacts {
            let full = dir.join(path);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            if &sha256_hex(&bytes) != hash {
                bad.push(path.clone());
            }
        }
        Ok(bad)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Writes artifacts under one directory and records their hashes.
pub struct ArtifactWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl ArtifactWriter {
    /// Creates `dir` and immediately writes an incomplete manifest, so a
    /// crash leaves a marked directory behind.
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let w = Self {
            dir: dir.to_path_buf(),
            manifest,
        };
        w.write_manifest()?;
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(relative), bytes)?;
        self.manifest.record(relative, bytes);
        Ok(())
    }

    fn write_manifest(&self) -> Result<()> {
        write_file(&self.dir.join(MANIFEST_FILE), self.manifest.to_json()?.as_bytes())
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.complete = true;
        self.write_manifest()?;
        Ok(self.manifest)
    }

    /// Marks the manifest incomplete and records the error.
    pub fn fail(mut self, error: &Error) -> Result<Manifest> {
        self.manifest.complete = false;
        self.manifest.error = Some(error.to_string());
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join(MANIFEST_FILE))
}
