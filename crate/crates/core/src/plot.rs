//! Standalone SVG trajectory plots on a drawn pitch: ball red, left team
//! blue, right team green.

use std::fmt::Write as _;

use crate::error::{ensure, Error, Result};
use crate::ingest::{FieldSpec, ObjectId, Side, POSITION_DIM};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    /// Width of the SVG in pixels; the height follows from the aspect ratio.
    pub width: f64,
    /// Padding around the drawn extent, pixels.
    pub padding: f64,
    pub stroke_width: f64,
    pub title: Option<String>,
    pub field: FieldSpec,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 840.0,
            padding: 20.0,
            stroke_width: 1.5,
            title: None,
            field: FieldSpec::default(),
        }
    }
}

impl PlotStyle {
    pub fn titled(title: impl Into<String>) -> Self {
        Self {
            title: Some(title.into()),
            ..Self::default()
        }
    }
}

pub fn colour(side: Side) -> &'static str {
    match side {
        Side::Ball => "red",
        Side::Left => "blue",
        Side::Right => "green",
    }
}

/// Parses `ball,l1,r11`, or the shorthands `all`, `goalies` (both goalies
/// and the ball), `left`, `right`.
pub fn parse_selection(text: &str) -> Result<Vec<ObjectId>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "all" => out.extend(ObjectId::all()),
            "goalies" => out.extend(goalies_and_ball()),
            "left" => out.extend((1..=11).map(ObjectId)),
            "right" => out.extend((12..=22).map(ObjectId)),
            name => out.push(
                ObjectId::parse(name)
                    .ok_or_else(|| Error::Validation(format!("unknown object {name:?}")))?,
            ),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn goalies_and_ball() -> Vec<ObjectId> {
    vec![ObjectId::BALL, ObjectId::LEFT_GOALIE, ObjectId::RIGHT_GOALIE]
}

/// Maps field metres (y up) to pixels (y down) with one scale for both axes.
struct Viewport {
    x_min: f64,
    y_max: f64,
    scale: f64,
    padding: f64,
    width: f64,
    height: f64,
}

impl Viewport {
    fn new(style: &PlotStyle, extent: (f64, f64, f64, f64)) -> Self {
        let (x_min, x_max, y_min, y_max) = extent;
        let inner = style.width - 2.0 * style.padding;
        let scale = inner / (x_max - x_min);
        Self {
            x_min,
            y_max,
            scale,
            padding: style.padding,
            width: style.width,
            height: (y_max - y_min) * scale + 2.0 * style.padding,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.padding + (x - self.x_min) * self.scale,
            self.padding + (self.y_max - y) * self.scale,
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pitch extents, grown to include any data points outside the pitch.
fn extent(positions: &Matrix, selection: &[ObjectId], field: &FieldSpec) -> (f64, f64, f64, f64) {
    let (mut x0, mut x1) = (-field.half_length, field.half_length);
    let (mut y0, mut y1) = (-field.half_width, field.half_width);
    for row in positions.row_iter() {
        for id in selection {
            let (x, y) = (row[id.x_index()], row[id.y_index()]);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    (x0, x1, y0, y1)
}

fn pitch(out: &mut String, vp: &Viewport, field: &FieldSpec) {
    let (l, t) = vp.px(-field.half_length, field.half_width);
    let (r, b) = vp.px(field.half_length, -field.half_width);
    let (cx, cy) = vp.px(0.0, 0.0);
    let _ = writeln!(
        out,
        r##"<rect class="field" x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="#f4f8f4" stroke="#555555" stroke-width="1"/>"##,
        r - l,
        b - t
    );
    let _ = writeln!(
        out,
        r##"<line x1="{cx:.2}" y1="{t:.2}" x2="{cx:.2}" y2="{b:.2}" stroke="#999999" stroke-width="0.75"/>"##
    );
    let _ = writeln!(
        out,
        r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#999999" stroke-width="0.75"/>"##,
        9.15 * vp.scale
    );
    // goal mouths, 7.32 m wide
    for gx in [-field.half_length, field.half_length] {
        let (x, y_top) = vp.px(gx, 3.66);
        let (_, y_bot) = vp.px(gx, -3.66);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{y_top:.2}" x2="{x:.2}" y2="{y_bot:.2}" stroke="#333333" stroke-width="3"/>"##
        );
    }
}

fn points(vp: &Viewport, positions: &Matrix, rows: std::ops::Range<usize>, id: ObjectId) -> String {
    let mut s = String::new();
    for i in rows {
        let row = positions.row(i);
        let (x, y) = vp.px(row[id.x_index()], row[id.y_index()]);
        if !s.is_empty() {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

fn validate(positions: &Matrix, selection: &[ObjectId]) -> Result<()> {
    ensure!(!selection.is_empty(), Validation, "no objects selected for plotting");
    ensure!(positions.rows() >= 1, Validation, "nothing to plot: no positions");
    ensure!(
        positions.cols() == POSITION_DIM,
        Dimension,
        "positions have {} columns, expected {POSITION_DIM}",
        positions.cols()
    );
    ensure!(
        selection.iter().all(|id| id.0 < crate::ingest::OBJECT_COUNT),
        Validation,
        "object index out of range"
    );
    Ok(())
}

/// Plots the selected objects' trajectories (field metres, `L×46`).
pub fn plot_trajectories(
    positions: &Matrix,
    selection: &[ObjectId],
    style: &PlotStyle,
) -> Result<String> {
    plot_segment(positions, 0, selection, style)
}

/// Like [`plot_trajectories`], drawing the first `leadin_rows` rows dashed
/// as context before the move proper.
pub fn plot_segment(
    positions: &Matrix,
    leadin_rows: usize,
    selection: &[ObjectId],
    style: &PlotStyle,
) -> Result<String> {
    validate(positions, selection)?;
    ensure!(
        leadin_rows < positions.rows(),
        Validation,
        "lead-in of {leadin_rows} rows leaves nothing of the move itself"
    );
    let vp = Viewport::new(style, extent(positions, selection, &style.field));
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" baseProfile="full" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
        w = vp.width.ceil(),
        h = vp.height.ceil()
    );
    if let Some(title) = &style.title {
        let _ = writeln!(out, "<title>{}</title>", escape(title));
    }
    pitch(&mut out, &vp, &style.field);

    let n = positions.rows();
    for &id in selection {
        let stroke = colour(id.side());
        let name = id.name();
        if leadin_rows > 0 {
            // the lead-in shares its last point with the move so the line is continuous
            let _ = writeln!(
                out,
                r#"<polyline class="leadin" data-object="{name}" points="{}" fill="none" stroke="{stroke}" stroke-width="{sw:.2}" stroke-dasharray="4 3" stroke-opacity="0.6"/>"#,
                points(&vp, positions, 0..leadin_rows + 1, id),
                sw = style.stroke_width
            );
        }
        let first = positions.row(leadin_rows);
        let (fx, fy) = (first[id.x_index()], first[id.y_index()]);
        let stationary = (leadin_rows..n).all(|i| {
            let r = positions.row(i);
            r[id.x_index()] == fx && r[id.y_index()] == fy
        });
        let _ = writeln!(
            out,
            r#"<polyline class="track" data-object="{name}" points="{}" fill="none" stroke="{stroke}" stroke-width="{sw:.2}" stroke-linejoin="round"/>"#,
            points(&vp, positions, leadin_rows..n, id),
            sw = style.stroke_width
        );
        if stationary {
            let (x, y) = vp.px(fx, fy);
            let _ = writeln!(
                out,
                r#"<circle class="marker" data-object="{name}" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{stroke}"/>"#,
                2.0 * style.stroke_width
            );
        }
    }
    if let Some(title) = &style.title {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" fill="#222222">{}</text>"##,
            style.padding,
            style.padding - 6.0,
            escape(title)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
