//! Canonical CSV game traces: parsing, validation, serialization and
//! normalization of field coordinates into `(-1, 1)`.
//!
//! A world state holds the `(x, y)` positions of 23 objects in a fixed
//! order: the ball, left players 1–11, right players 1–11.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::linalg::Matrix;

pub const OBJECT_COUNT: usize = 23;
pub const POSITION_DIM: usize = 2 * OBJECT_COUNT;

/// Which group an object belongs to; drives plot colours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Ball,
    Left,
    Right,
}

/// Index of an object in the canonical order (0 = ball, 1..=11 left, 12..=22 right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub usize);

impl ObjectId {
    pub const BALL: ObjectId = ObjectId(0);
    pub const LEFT_GOALIE: ObjectId = ObjectId(1);
    pub const RIGHT_GOALIE: ObjectId = ObjectId(12);

    pub fn all() -> impl Iterator<Item = ObjectId> {
        (0..OBJECT_COUNT).map(ObjectId)
    }

    pub fn side(self) -> Side {
        match self.0 {
            0 => Side::Ball,
            1..=11 => Side::Left,
            _ => Side::Right,
        }
    }

    pub fn name(self) -> String {
        match self.side() {
            Side::Ball => "ball".to_string(),
            Side::Left => format!("l{}", self.0),
            Side::Right => format!("r{}", self.0 - 11),
        }
    }

    /// Accepts `ball`, `l1`..`l11`, `r1`..`r11`.
    pub fn parse(name: &str) -> Option<ObjectId> {
        let name = name.trim();
        if name == "ball" {
            return Some(Self::BALL);
        }
        let (side, num) = name.split_at_checked(1)?;
        let num: usize = num.parse().ok()?;
        if !(1..=11).contains(&num) {
            return None;
        }
        match side {
            "l" => Some(ObjectId(num)),
            "r" => Some(ObjectId(num + 11)),
            _ => None,
        }
    }

    pub fn x_index(self) -> usize {
        2 * self.0
    }

    pub fn y_index(self) -> usize {
        2 * self.0 + 1
    }
}

/// The 47 header names, starting with `cycle`.
pub fn header_columns() -> Vec<String> {
    let mut cols = vec!["cycle".to_string()];
    for id in ObjectId::all() {
        let n = id.name();
        cols.push(format!("{n}_x"));
        cols.push(format!("{n}_y"));
    }
    cols
}

/// Field extents used for normalization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldSpec {
    pub half_length: f64,
    pub half_width: f64,
    pub margin: f64,
}

impl Default for FieldSpec {
    /// Standard 105 m × 68 m pitch with 5% slack for players off the field.
    fn default() -> Self {
        Self {
            half_length: 52.5,
            half_width: 34.0,
            margin: 1.05,
        }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.half_length > 0.0 && self.half_length.is_finite(),
            Validation,
            "half_length must be positive, got {}",
            self.half_length
        );
        ensure!(
            self.half_width > 0.0 && self.half_width.is_finite(),
            Validation,
            "half_width must be positive, got {}",
            self.half_width
        );
        ensure!(
            self.margin >= 1.0 && self.margin.is_finite(),
            Validation,
            "margin must be at least 1, got {}",
            self.margin
        );
        Ok(())
    }

    /// Divisor applied to component `i` (even = x, odd = y).
    pub fn scale(&self, component: usize) -> f64 {
        if component % 2 == 0 {
            self.half_length * self.margin
        } else {
            self.half_width * self.margin
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub cycle: i64,
    pub positions: [f64; POSITION_DIM],
}

impl WorldState {
    pub fn position(&self, id: ObjectId) -> (f64, f64) {
        (self.positions[id.x_index()], self.positions[id.y_index()])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMetadata {
    pub left_team: Option<String>,
    pub right_team: Option<String>,
    pub source: Option<String>,
}

/// An ordered sequence of world states with strictly increasing cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    states: Vec<WorldState>,
    pub metadata: TraceMetadata,
}

impl GameTrace {
    pub fn new(states: Vec<WorldState>, metadata: TraceMetadata) -> Result<Self> {
        ensure!(!states.is_empty(), Validation, "trace has no world states");
        for w in states.windows(2) {
            ensure!(
                w[1].cycle > w[0].cycle,
                Validation,
                "cycle {} follows cycle {}; cycles must strictly increase",
                w[1].cycle,
                w[0].cycle
            );
        }
        ensure!(
            states
                .iter()
                .all(|s| s.positions.iter().all(|v| v.is_finite())),
            Validation,
            "trace contains non-finite positions"
        );
        Ok(Self { states, metadata })
    }

    pub fn states(&self) -> &[WorldState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first_cycle(&self) -> i64 {
        self.states[0].cycle
    }

    pub fn cycles(&self) -> Vec<i64> {
        self.states.iter().map(|s| s.cycle).collect()
    }

    /// Positions as an `L×46` matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * POSITION_DIM);
        for s in &self.states {
            data.extend_from_slice(&s.positions);
        }
        Matrix::new(self.len(), POSITION_DIM, data).expect("validated trace is finite")
    }

    pub fn from_matrix(cycles: &[i64], positions: &Matrix, metadata: TraceMetadata) -> Result<Self> {
        ensure!(
            positions.cols() == POSITION_DIM,
            Dimension,
            "expected {POSITION_DIM} position columns, got {}",
            positions.cols()
        );
        ensure!(
            cycles.len() == positions.rows(),
            Dimension,
            "{} cycles for {} rows",
            cycles.len(),
            positions.rows()
        );
        let states = cycles
            .iter()
            .zip(positions.row_iter())
            .map(|(&cycle, row)| WorldState {
                cycle,
                positions: row.try_into().expect("row width checked"),
            })
            .collect();
        Self::new(states, metadata)
    }
}

/// Team names from file stems like `MarliK_1-vs-Gliders2012_3`.
fn teams_from_stem(stem: &str) -> (Option<String>, Option<String>) {
    let Some((left, right)) = stem.split_once("-vs-") else {
        return (None, None);
    };
    let strip_score = |s: &str| -> String {
        match s.rsplit_once('_') {
            Some((name, score)) if score.chars().all(|c| c.is_ascii_digit()) => name.to_string(),
            _ => s.to_string(),
        }
    };
    (Some(strip_score(left)), Some(strip_score(right)))
}

/// Parses the canonical CSV format: a 47-column header then one row per cycle.
pub fn parse_csv(text: &str) -> Result<GameTrace> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let Some((hline, header)) = lines.next() else {
        return Err(Error::Validation("empty trace file".into()));
    };
    let expected = header_columns();
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got.len() != expected.len() || got.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: hline,
            message: format!(
                "header does not match the {}-column schema `cycle,ball_x,ball_y,...,r11_y`",
                expected.len()
            ),
        });
    }

    let mut states = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != POSITION_DIM + 1 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    POSITION_DIM + 1,
                    fields.len()
                ),
            });
        }
        let cycle: i64 = fields[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("cycle `{}` is not an integer", fields[0].trim()),
        })?;
        let mut positions = [0.0; POSITION_DIM];
        for (i, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} (`{}`) is not a number", expected[i + 1], f.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {} is not finite", expected[i + 1]),
                });
            }
            positions[i] = v;
        }
        if let Some(prev) = states.last().map(|s: &WorldState| s.cycle) {
            ensure!(
                cycle > prev,
                Validation,
                "line {line}: cycle {cycle} does not increase on previous cycle {prev}"
            );
        }
        states.push(WorldState { cycle, positions });
    }
    ensure!(!states.is_empty(), Validation, "trace file has a header but no data rows");
    GameTrace::new(states, TraceMetadata::default())
}

/// Reads and parses a trace file, filling metadata from the file name.
pub fn read_csv(path: &Path) -> Result<GameTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_named(&text, path)
}

/// [`parse_csv`] with metadata taken from `path`, which is not read.
pub fn parse_csv_named(text: &str, path: &Path) -> Result<GameTrace> {
    let mut trace = parse_csv(text)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let (left, right) = teams_from_stem(stem);
    trace.metadata = TraceMetadata {
        left_team: left,
        right_team: right,
        source: path.file_name().map(|s| s.to_string_lossy().into_owned()),
    };
    Ok(trace)
}

/// Plain decimal with at least six significant digits that parses back to
/// exactly the same `f64`.
pub fn format_real(v: f64) -> String {
    let mut s = format!("{v}");
    if s == "-0" {
        s = "0".into();
    }
    let significant = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|c| *c == '0')
        .count();
    let significant = if v == 0.0 { 0 } else { significant };
    if significant < 6 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', 6 - significant));
    }
    s
}

/// Serializes rows of 46 positions under the canonical header.
pub fn write_rows<'a>(rows: impl IntoIterator<Item = (i64, &'a [f64])>) -> String {
    let mut out = header_columns().join(",");
    out.push('\n');
    for (cycle, pos) in rows {
        write!(out, "{cycle}").expect("write to string");
        for v in pos {
            out.push(',');
            out.push_str(&format_real(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(trace: &GameTrace) -> String {
    write_rows(trace.states.iter().map(|s| (s.cycle, &s.positions[..])))
}

/// Scales every coordinate into `(-1, 1)` by the field extents.
///
/// Coordinates whose magnitude reaches the scaled bound are rejected, so
/// the output is strictly inside the open interval.
pub fn normalize(trace: &GameTrace, spec: &FieldSpec) -> Result<GameTrace> {
    spec.validate()?;
    let mut states = trace.states.clone();
    for s in &mut states {
        for (i, v) in s.positions.iter_mut().enumerate() {
            let scaled = *v / spec.scale(i);
            if scaled.abs() >= 1.0 {
                return Err(Error::Range {
                    cycle: s.cycle,
                    component: i,
                    value: *v,
                });
            }
            *v = scaled;
        }
    }
    GameTrace::new(states, trace.metadata.clone())
}

/// Inverse of [`normalize`]'s per-component scaling.
pub fn denormalize(positions: &[f64], spec: &FieldSpec) -> Vec<f64> {
    positions
        .iter()
        .enumerate()
        .map(|(i, v)| v * spec.scale(i))
        .collect()
}
