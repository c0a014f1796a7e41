//! Moves: maximal runs of consecutive reservoir states that share a cluster
//! label, with a lead-in window of earlier cycles kept as context.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::members_of;
use crate::conceptor::{self, Conceptor};
use crate::error::{ensure, Result};
use crate::esn::StateSeries;

pub const DEFAULT_LEADIN: usize = 10;
pub const DEFAULT_MIN_LEN: usize = 3;
pub const DEFAULT_MIN_STATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub cluster: usize,
    pub start_cycle: i64,
    pub end_cycle: i64,
    pub leadin_cycles: i64,
    /// Row of the first state in the labeled series.
    #[serde(skip)]
    pub first_row: usize,
    /// Number of labeled states in the run.
    #[serde(skip)]
    pub len: usize,
    /// Set when the run is shorter than the segmentation's `min_len`.
    #[serde(skip)]
    pub short: bool,
}

impl Move {
    /// Row range of the core run.
    pub fn rows(&self) -> std::ops::Range<usize> {
        self.first_row..self.first_row + self.len
    }
}

/// Segments labels indexed by cycles `0..L`.
pub fn segment(labels: &[usize], min_len: usize) -> Result<Vec<Move>> {
    let cycles: Vec<i64> = (0..labels.len() as i64).collect();
    segment_cycles(labels, &cycles, min_len)
}

/// Splits the label sequence into maximal constant runs. Runs shorter than
/// `min_len` are kept and flagged.
pub fn segment_cycles(labels: &[usize], cycles: &[i64], min_len: usize) -> Result<Vec<Move>> {
    ensure!(!labels.is_empty(), Validation, "no labels to segment");
    ensure!(min_len >= 1, Validation, "min_len must be at least 1");
    ensure!(
        labels.len() == cycles.len(),
        Dimension,
        "{} labels for {} cycles",
        labels.len(),
        cycles.len()
    );
    let mut moves = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            let len = i - start;
            moves.push(Move {
                cluster: labels[start],
                start_cycle: cycles[start],
                end_cycle: cycles[i - 1],
                leadin_cycles: 0,
                first_row: start,
                len,
                short: len < min_len,
            });
            start = i;
        }
    }
    Ok(moves)
}

/// Sets each move's lead-in to `leadin` cycles, clamped at `trace_start`.
pub fn attach_leadin(moves: &[Move], leadin: usize, trace_start: i64) -> Vec<Move> {
    moves
        .iter()
        .map(|m| Move {
            leadin_cycles: (leadin as i64).min(m.start_cycle - trace_start).max(0),
            ..m.clone()
        })
        .collect()
}

/// Expands moves back into the label sequence they were cut from.
pub fn labels_from_moves(moves: &[Move]) -> Vec<usize> {
    moves
        .iter()
        .flat_map(|m| std::iter::repeat_n(m.cluster, m.len))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClusterConceptors {
    pub conceptors: BTreeMap<usize, Conceptor>,
    /// `(cluster, state count)` for clusters below the state minimum.
    pub skipped: Vec<(usize, usize)>,
}

/// One conceptor per cluster from exactly that cluster's member states.
pub fn cluster_conceptors(
    series: &StateSeries,
    labels: &[usize],
    aperture: f64,
    min_states: usize,
) -> Result<ClusterConceptors> {
    ensure!(!labels.is_empty(), Validation, "no labels given");
    ensure!(
        labels.len() == series.len(),
        Dimension,
        "{} labels for {} states",
        labels.len(),
        series.len()
    );
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let members = members_of(labels, k);
    let computed: Vec<(usize, usize, Option<Result<Conceptor>>)> = members
        .par_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, m)| {
            if m.len() < min_states.max(1) {
                return (c, m.len(), None);
            }
            let subset = series.select(m);
            let res = conceptor::conceptor_of_series(&subset, aperture, format!("cluster {c}"));
            (c, m.len(), Some(res))
        })
        .collect();

    let mut out = ClusterConceptors {
        conceptors: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (c, n, res) in computed {
        match res {
            Some(r) => {
                out.conceptors.insert(c, r?);
            }
            None => out.skipped.push((c, n)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMoves {
    pub cluster: usize,
    pub moves: usize,
    pub short_moves: usize,
    pub total_cycles: usize,
    pub mean_len: f64,
    pub max_len: usize,
    /// Every labeled cycle that belongs to the cluster.
    pub cycles: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveReport {
    pub labeled_cycles: usize,
    pub total_moves: usize,
    pub clusters: Vec<ClusterMoves>,
}

/// Per-cluster move counts and durations.
pub fn move_report(moves: &[Move], labels: &[usize]) -> Result<MoveReport> {
    let covered: usize = moves.iter().map(|m| m.len).sum();
    ensure!(
        covered == labels.len(),
        Validation,
        "moves cover {covered} states but there are {} labels",
        labels.len()
    );
    let mut by_cluster: BTreeMap<usize, ClusterMoves> = BTreeMap::new();
    for m in moves {
        let entry = by_cluster.entry(m.cluster).or_insert_with(|| ClusterMoves {
            cluster: m.cluster,
            moves: 0,
            short_moves: 0,
            total_cycles: 0,
            mean_len: 0.0,
            max_len: 0,
            cycles: Vec::new(),
        });
        entry.moves += 1;
        entry.short_moves += m.short as usize;
        entry.total_cycles += m.len;
        entry.max_len = entry.max_len.max(m.len);
        if m.len > 0 && m.end_cycle - m.start_cycle + 1 == m.len as i64 {
            entry.cycles.extend(m.start_cycle..=m.end_cycle);
        } else {
            // gap in the cycle numbering; fall back to the run endpoints
            entry.cycles.push(m.start_cycle);
            if m.end_cycle != m.start_cycle {
                entry.cycles.push(m.end_cycle);
            }
        }
    }
    let clusters = by_cluster
        .into_values()
        .map(|mut c| {
            c.mean_len = c.total_cycles as f64 / c.moves as f64;
            c
        })
        .collect();
    Ok(MoveReport {
        labeled_cycles: labels.len(),
        total_moves: moves.len(),
        clusters,
    })
}
