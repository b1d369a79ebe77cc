//! Uniform sampling grids, multi-channel sampled signals and step profiles.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPAN_TOL: f64 = 1e-9;

/// Closed uniform grid `t_k = t0 + k*h`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t0: f64,
    tf: f64,
    h: f64,
    n: usize,
}

impl Grid {
    pub fn new(t0: f64, tf: f64, h: f64) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && h.is_finite()) {
            return Err(Error::InvalidGrid("bounds and step must be finite".into()));
        }
        if h <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "step must be positive, got {h}"
            )));
        }
        if tf <= t0 {
            return Err(Error::InvalidGrid(format!(
                "tf ({tf}) must exceed t0 ({t0})"
            )));
        }
        let steps = (tf - t0) / h;
        let rounded = steps.round();
        if (steps - rounded).abs() > SPAN_TOL {
            return Err(Error::InvalidGrid(format!(
                "span {} s is not an integer multiple of h = {h} s",
                tf - t0
            )));
        }
        Ok(Self {
            t0,
            tf,
            h,
            n: rounded as usize + 1,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of samples, both endpoints included.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.time(k))
    }

    /// Same sampling instants up to round-off.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.t0 - other.t0).abs() <= SPAN_TOL
            && (self.h - other.h).abs() <= SPAN_TOL
    }

    pub(crate) fn ensure_compatible(&self, other: &Grid, what: &str) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: [{}, {}] step {} vs [{}, {}] step {}",
                self.t0, self.tf, self.h, other.t0, other.tf, other.h
            )))
        }
    }
}

/// Multi-channel signal sampled on a [`Grid`], stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    channels: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: Grid, channels: usize) -> Self {
        Self {
            grid,
            channels,
            values: vec![0.0; channels * grid.len()],
        }
    }

    pub fn from_channels(grid: Grid, channels: Vec<Vec<f64>>) -> Result<Self> {
        let count = channels.len();
        let mut values = Vec::with_capacity(count * grid.len());
        for (i, ch) in channels.into_iter().enumerate() {
            if ch.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "channel {i} has {} samples, grid has {}",
                    ch.len(),
                    grid.len()
                )));
            }
            values.extend(ch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory samples"));
        }
        Ok(Self {
            grid,
            channels: count,
            values,
        })
    }

    /// Samples a function of time on every channel.
    pub fn from_fn(grid: Grid, channels: usize, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, channels);
        for ch in 0..channels {
            for k in 0..grid.len() {
                out.values[ch * grid.len() + k] = f(ch, grid.time(k));
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[ch * n..(ch + 1) * n]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[ch * n..(ch + 1) * n]
    }

    pub fn get(&self, ch: usize, k: usize) -> f64 {
        self.values[ch * self.grid.len() + k]
    }

    pub fn set(&mut self, ch: usize, k: usize, v: f64) {
        let n = self.grid.len();
        self.values[ch * n + k] = v;
    }

    /// Extracts a single channel as its own trajectory.
    pub fn select(&self, ch: usize) -> Trajectory {
        Trajectory {
            grid: self.grid,
            channels: 1,
            values: self.channel(ch).to_vec(),
        }
    }

    /// Stacks single- or multi-channel trajectories sharing one grid.
    pub fn stack(parts: &[&Trajectory]) -> Result<Trajectory> {
        let first = parts
            .first()
            .ok_or_else(|| Error::param("cannot stack zero trajectories"))?;
        let mut values = Vec::new();
        let mut channels = 0;
        for p in parts {
            first.grid.ensure_compatible(&p.grid, "stack")?;
            values.extend_from_slice(&p.values);
            channels += p.channels;
        }
        Ok(Trajectory {
            grid: first.grid,
            channels,
            values,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes `t,ch0,ch1,...` with one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.channels).map(|c| format!("ch{c}")))
            .collect();
        write_columns(out, &header, self)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| relabel(e, path))
    }

    /// Reads any `t,...` CSV; the header names after `t` are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, Trajectory)> {
        read_columns(input)
    }

    pub fn load_csv(path: &Path) -> Result<(Vec<String>, Trajectory)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        read_columns(file).map_err(|e| relabel(e, path))
    }
}

pub(crate) fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { msg, .. } => Error::format(path, msg),
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn write_columns<W: Write>(out: W, header: &[String], traj: &Trajectory) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::format("<csv>", e.to_string());
    w.write_record(header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(traj.channels + 1);
    for k in 0..traj.grid.len() {
        row.clear();
        row.push(fmt_num(traj.grid.time(k)));
        for ch in 0..traj.channels {
            row.push(fmt_num(traj.get(ch, k)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub(crate) fn read_columns<R: Read>(input: R) -> Result<(Vec<String>, Trajectory)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let csv_err = |e: csv::Error| Error::format("<csv>", e.to_string());
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(Error::format("<csv>", "expected header `t,<channels...>`"));
    }
    let channels = header.len() - 1;
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); channels];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::format("<csv>", format!("row {}: cannot parse `{s}`", line + 2))
            })
        };
        times.push(parse(&rec[0])?);
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse(&rec[c + 1])?);
        }
    }
    if times.len() < 2 {
        return Err(Error::format("<csv>", "need at least two samples"));
    }
    let h = times[1] - times[0];
    let grid = Grid::new(times[0], times[times.len() - 1], h)?;
    if grid.len() != times.len() {
        return Err(Error::format(
            "<csv>",
            "time column is not uniformly sampled",
        ));
    }
    let traj = Trajectory::from_channels(grid, cols)?;
    Ok((header.into_iter().skip(1).collect(), traj))
}

/// Piecewise-constant signal: ordered `(t_start, value)` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct StepProfile {
    segments: Vec<(f64, f64)>,
}

impl StepProfile {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if segments
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::NonFinite("step profile"));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::UnsortedProfile);
        }
        Ok(Self { segments })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            segments: vec![(0.0, value)],
        }
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    /// Value of the last segment starting at or before `t`; before the first
    /// segment the first value holds.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|(ts, _)| *ts <= t + SPAN_TOL);
        self.segments[idx.saturating_sub(1)].1
    }

    pub fn render(&self, grid: &Grid) -> Trajectory {
        Trajectory::from_fn(*grid, 1, |_, t| self.value_at(t))
    }

    /// Rebuilds a profile from the change points of a sampled channel.
    pub fn from_samples(traj: &Trajectory, ch: usize) -> Self {
        let grid = traj.grid();
        let xs = traj.channel(ch);
        let mut segments = vec![(grid.t0(), xs[0])];
        for k in 1..xs.len() {
            if xs[k] != xs[k - 1] {
                segments.push((grid.time(k), xs[k]));
            }
        }
        Self { segments }
    }
}

impl TryFrom<Vec<(f64, f64)>> for StepProfile {
    type Error = Error;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        StepProfile::new(v)
    }
}

impl From<StepProfile> for Vec<(f64, f64)> {
    fn from(p: StepProfile) -> Self {
        p.segments
    }
}

pub fn make_grid(t0: f64, tf: f64, h: f64) -> Result<Grid> {
    Grid::new(t0, tf, h)
}

pub fn render_profile(profile: &StepProfile, grid: &Grid) -> Trajectory {
    profile.render(grid)
}
