//! Static SVG charts of a persisted campaign.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{read_summary, EpisodeResult, EPISODE_FILE};
use crate::plant::{INPUT_NAMES, OUTPUT_NAMES};

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Six significant digits, as written into value labels.
pub fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

struct Panel {
    y0: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn new(y0: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                let d = lo.abs().max(1.0) * 0.05;
                (lo - d, hi + d)
            } else {
                let d = (hi - lo) * 0.05;
                (lo - d, hi + d)
            }
        };
        let x = if x.1 > x.0 { x } else { (x.0 - 0.5, x.1 + 0.5) };
        Self { y0, x, y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let h = PANEL_H - TOP - BOTTOM;
        self.y0 + TOP + (self.y.1 - y) / (self.y.1 - self.y.0) * h
    }

    fn frame(&self, svg: &mut String, title: &str, xlabel: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (self.y0 + TOP, self.y0 + PANEL_H - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
            WIDTH / 2.0,
            self.y0 + TOP - 12.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
            WIDTH / 2.0,
            y1 + 35.0
        );
        for (v, anchor_x) in [(self.x.0, x0), (self.x.1, x1)] {
            let _ = writeln!(
                svg,
                r#"<text class="tick" x="{anchor_x}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
                y1 + 16.0,
                trim(v)
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = writeln!(
                svg,
                r#"<text class="tick" x="{}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
                x0 - 6.0,
                self.py(v) + 4.0,
                trim(v)
            );
        }
    }

    fn polyline(&self, svg: &mut String, xs: &[f64], ys: &[f64], style: &str, id: &str) {
        let mut pts = String::new();
        for (x, y) in xs.iter().zip(ys) {
            let _ = write!(pts, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline id="{id}" fill="none" {style} points="{}"/>"#,
            pts.trim_end()
        );
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn document(height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn value_labels(svg: &mut String, panel: &Panel, xs: &[f64], ys: &[f64], series: &str) {
    for (x, y) in xs.iter().zip(ys) {
        let (px, py) = (panel.px(*x), panel.py(*y));
        let _ = writeln!(svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3"/>"#);
        let _ = writeln!(
            svg,
            r#"<text class="value" data-series="{series}" data-iteration="{x}" x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="9">{}</text>"#,
            py - 7.0,
            sig6(*y)
        );
    }
}

/// Combined index against iteration.
pub fn j_chart(iterations: &[f64], j: &[f64]) -> String {
    let panel = Panel::new(
        0.0,
        range(iterations.iter().copied()),
        range(j.iter().copied()),
    );
    let mut body = String::new();
    panel.frame(&mut body, "Combined index J per iteration", "iteration");
    panel.polyline(
        &mut body,
        iterations,
        j,
        r#"stroke="steelblue" stroke-width="2""#,
        "J",
    );
    value_labels(&mut body, &panel, iterations, j, "J");
    document(PANEL_H, &body)
}

/// Per-channel feedback effort against iteration.
pub fn effort_chart(iterations: &[f64], effort: &[[f64; 2]]) -> String {
    let n: Vec<f64> = effort.iter().map(|e| e[0]).collect();
    let av: Vec<f64> = effort.iter().map(|e| e[1]).collect();
    let mut body = String::new();
    for (i, (series, color)) in [(&n, "firebrick"), (&av, "darkgreen")]
        .into_iter()
        .enumerate()
    {
        let panel = Panel::new(
            i as f64 * PANEL_H,
            range(iterations.iter().copied()),
            range(series.iter().copied()),
        );
        let title = format!("Feedback effort sum|u_C| on {}", INPUT_NAMES[i]);
        panel.frame(&mut body, &title, "iteration");
        let style = format!(r#"stroke="{color}" stroke-width="2""#);
        panel.polyline(
            &mut body,
            iterations,
            series,
            &style,
            &format!("effort_{}", INPUT_NAMES[i]),
        );
        value_labels(&mut body, &panel, iterations, series, INPUT_NAMES[i]);
    }
    document(2.0 * PANEL_H, &body)
}

/// References against outputs of the first and last trial.
pub fn tracking_chart(
    first: &EpisodeResult,
    last: &EpisodeResult,
    last_iteration: usize,
) -> String {
    let times: Vec<f64> = first.y.grid().times().collect();
    let mut body = String::new();
    for c in 0..2 {
        let (r, y1, yn) = (first.r.channel(c), first.y.channel(c), last.y.channel(c));
        let yr = range(r.iter().chain(y1).chain(yn).copied());
        let panel = Panel::new(c as f64 * PANEL_H, range(times.iter().copied()), yr);
        panel.frame(&mut body, &format!("{} (degC)", OUTPUT_NAMES[c]), "t (s)");
        panel.polyline(
            &mut body,
            &times,
            r,
            r#"stroke="black" stroke-dasharray="6 4""#,
            &format!("ref_{c}"),
        );
        panel.polyline(
            &mut body,
            &times,
            y1,
            r#"stroke="gray""#,
            &format!("first_{c}"),
        );
        panel.polyline(
            &mut body,
            &times,
            yn,
            r#"stroke="steelblue""#,
            &format!("last_{c}"),
        );
        let legend_y = c as f64 * PANEL_H + TOP + 14.0;
        let _ = writeln!(
            body,
            r#"<text x="{}" y="{legend_y}" font-size="10">dashed: reference, gray: iteration 1, blue: iteration {last_iteration}</text>"#,
            LEFT + 8.0
        );
    }
    document(2.0 * PANEL_H, &body)
}

fn output_paths(out: &Path) -> Result<[PathBuf; 3]> {
    if out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("svg"))
    {
        let parent = out.parent().unwrap_or(Path::new(""));
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("J");
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok([
            out.to_path_buf(),
            parent.join(format!("{stem}_tracking.svg")),
            parent.join(format!("{stem}_effort.svg")),
        ])
    } else {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok([
            out.join("J.svg"),
            out.join("tracking.svg"),
            out.join("effort.svg"),
        ])
    }
}

/// Writes the J, tracking and effort charts for `campaign_dir`. `out` is
/// either the J chart path (`*.svg`, siblings get `_tracking`/`_effort`
/// suffixes) or a directory.
pub fn emit_plots(campaign_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_summary(campaign_dir)?;
    let iterations: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let j: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let effort: Vec<[f64; 2]> = rows.iter().map(|r| r.2).collect();
    let first_it = rows[0].0;
    let last_it = rows[rows.len() - 1].0;
    let load = |it: usize| {
        EpisodeResult::load_csv(
            &campaign_dir
                .join(format!("iter_{it:03}"))
                .join(EPISODE_FILE),
        )
    };
    let first = load(first_it)?;
    let last = load(last_it)?;

    let paths = output_paths(out)?;
    let charts = [
        j_chart(&iterations, &j),
        tracking_chart(&first, &last, last_it),
        effort_chart(&iterations, &effort),
    ];
    for (p, svg) in paths.iter().zip(charts) {
        fs::write(p, svg).map_err(|e| Error::io(p, e))?;
    }
    Ok(paths.to_vec())
}

/// Value labels of one series, in document order.
pub fn read_value_labels(svg: &str, series: &str) -> Vec<f64> {
    let needle = format!(r#"class="value" data-series="{series}""#);
    svg.lines()
        .filter(|l| l.contains(&needle))
        .filter_map(|l| {
            let start = l.find('>')? + 1;
            let end = l[start..].find('<')? + start;
            l[start..end].parse().ok()
        })
        .collect()
}

/// Vertices of the polyline with the given id.
pub fn read_polyline(svg: &str, id: &str) -> Vec<(f64, f64)> {
    let needle = format!(r#"<polyline id="{id}""#);
    let Some(line) = svg.lines().find(|l| l.starts_with(&needle)) else {
        return Vec::new();
    };
    let Some(start) = line.find("points=\"") else {
        return Vec::new();
    };
    let rest = &line[start + 8..];
    let body = &rest[..rest.find('"').unwrap_or(rest.len())];
    body.split_whitespace()
        .filter_map(|p| {
            let (x, y) = p.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_series_draws_flat_line() {
        let svg = j_chart(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        let pts = read_polyline(&svg, "J");
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.1 == pts[0].1));
        assert_eq!(read_value_labels(&svg, "J"), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn labels_keep_six_digits() {
        let vals = [0.987654321, 0.759525, 0.12345678];
        let svg = j_chart(&[1.0, 2.0, 3.0], &vals);
        for (lab, v) in read_value_labels(&svg, "J").iter().zip(vals) {
            assert!((lab - v).abs() <= 5e-6 * v.abs());
        }
    }

    #[test]
    fn lower_values_plot_lower() {
        let svg = j_chart(&[1.0, 2.0], &[1.0, 0.5]);
        let pts = read_polyline(&svg, "J");
        assert!(pts[1].1 > pts[0].1);
    }

    #[test]
    fn empty_campaign_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plots(dir.path(), &dir.path().join("J.svg")).is_err());
    }
}
