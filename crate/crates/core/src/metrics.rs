//! Benchmark scoring: IAE, event-windowed ITAE and IAVU, their ratios to a
//! reference controller, and the weighted combined index `J`.
//!
//! All integrals use left-endpoint rectangles on the sampling grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{fmt_num, Trajectory};

const WINDOW_TOL: f64 = 1e-9;

pub const INDEX_NAMES: [&str; 8] = [
    "RIAE_1", "RIAE_2", "RITAE_1", "RITAE_2", "RITAE_3", "RITAE_4", "RIAVU_1", "RIAVU_2",
];

/// Transient window `[t_c, t_c + t_s)` on output `channel` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RitaeEvent {
    pub channel: usize,
    pub t_c: f64,
    pub t_s: f64,
}

impl RitaeEvent {
    pub const fn new(channel: usize, t_c: f64, t_s: f64) -> Self {
        Self { channel, t_c, t_s }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel != 1 && self.channel != 2 {
            return Err(Error::param(format!(
                "event channel must be 1 or 2, got {}",
                self.channel
            )));
        }
        if !(self.t_s > 0.0 && self.t_c.is_finite() && self.t_s.is_finite()) {
            return Err(Error::param(format!(
                "event window length must be positive, got {}",
                self.t_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 8]", into = "[f64; 8]")]
pub struct IndexWeights([f64; 8]);

impl IndexWeights {
    pub fn new(w: [f64; 8]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param(
                "index weights must be finite and non-negative",
            ));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::param("index weights must not all be zero"));
        }
        Ok(Self(w))
    }

    pub fn equal() -> Self {
        Self([1.0; 8])
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

impl Default for IndexWeights {
    fn default() -> Self {
        Self::equal()
    }
}

impl TryFrom<[f64; 8]> for IndexWeights {
    type Error = Error;

    fn try_from(w: [f64; 8]) -> Result<Self> {
        IndexWeights::new(w)
    }
}

impl From<IndexWeights> for [f64; 8] {
    fn from(w: IndexWeights) -> Self {
        w.0
    }
}

fn single(traj: &Trajectory) -> &[f64] {
    traj.channel(0)
}

/// `sum_{k < n-1} |e_k| h`.
pub fn iae(e: &Trajectory) -> f64 {
    let xs = single(e);
    let h = e.grid().h();
    xs[..xs.len().saturating_sub(1)]
        .iter()
        .map(|v| v.abs() * h)
        .sum()
}

/// `sum (t_k - t_c) |e_k| h` over samples with `t_c <= t_k < t_c + t_s`.
pub fn itae(e: &Trajectory, ev: &RitaeEvent) -> Result<f64> {
    ev.validate()?;
    let g = e.grid();
    let end = ev.t_c + ev.t_s;
    if ev.t_c < g.t0() - WINDOW_TOL || end > g.tf() + WINDOW_TOL {
        return Err(Error::WindowOutsideGrid {
            start: ev.t_c,
            end,
            t0: g.t0(),
            tf: g.tf(),
        });
    }
    let h = g.h();
    Ok(g.times()
        .zip(single(e))
        .filter(|(t, _)| *t >= ev.t_c - WINDOW_TOL && *t < end - WINDOW_TOL)
        .map(|(t, v)| (t - ev.t_c) * v.abs() * h)
        .sum())
}

/// Total variation `sum |u_k - u_{k-1}|`.
pub fn iavu(u: &Trajectory) -> Result<f64> {
    let xs = single(u);
    if xs.len() < 2 {
        return Err(Error::param("IAVU needs at least two samples"));
    }
    Ok(xs.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

pub fn relative_index(candidate: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0 && reference.is_finite()) {
        return Err(Error::NonPositiveReference(reference));
    }
    if !candidate.is_finite() {
        return Err(Error::NonFinite("candidate index"));
    }
    Ok(candidate / reference)
}

/// `J = sum(w_i R_i) / sum(w_i)`.
pub fn combined_index(ratios: &[f64; 8], weights: &IndexWeights) -> f64 {
    let w = weights.as_array();
    let num: f64 = ratios.iter().zip(w).map(|(r, w)| r * w).sum();
    num / w.iter().sum::<f64>()
}

/// Absolute indices of one episode, in report order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeIndices {
    pub iae: [f64; 2],
    pub itae: [f64; 4],
    pub iavu: [f64; 2],
}

impl EpisodeIndices {
    /// `e` holds the two output errors, `u` the two applied inputs.
    pub fn compute(e: &Trajectory, u: &Trajectory, events: &[RitaeEvent; 4]) -> Result<Self> {
        if e.channels() != 2 || u.channels() != 2 {
            return Err(Error::param(
                "episode indices need two error and two input channels",
            ));
        }
        e.grid().ensure_compatible(u.grid(), "errors vs inputs")?;
        let mut itae_v = [0.0; 4];
        for (slot, ev) in itae_v.iter_mut().zip(events) {
            ev.validate()?;
            *slot = itae(&e.select(ev.channel - 1), ev)?;
        }
        Ok(Self {
            iae: [iae(&e.select(0)), iae(&e.select(1))],
            itae: itae_v,
            iavu: [iavu(&u.select(0))?, iavu(&u.select(1))?],
        })
    }

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.iae[0],
            self.iae[1],
            self.itae[0],
            self.itae[1],
            self.itae[2],
            self.itae[3],
            self.iavu[0],
            self.iavu[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexReport {
    pub riae: [f64; 2],
    pub ritae: [f64; 4],
    pub riavu: [f64; 2],
    pub j: f64,
}

impl IndexReport {
    pub fn from_indices(
        candidate: &EpisodeIndices,
        reference: &EpisodeIndices,
        weights: &IndexWeights,
    ) -> Result<Self> {
        let c = candidate.as_array();
        let r = reference.as_array();
        let mut ratios = [0.0; 8];
        for i in 0..8 {
            ratios[i] = relative_index(c[i], r[i])
                .map_err(|e| Error::param(format!("{}: {e}", INDEX_NAMES[i])))?;
        }
        Ok(Self {
            riae: [ratios[0], ratios[1]],
            ritae: [ratios[2], ratios[3], ratios[4], ratios[5]],
            riavu: [ratios[6], ratios[7]],
            j: combined_index(&ratios, weights),
        })
    }

    pub fn ratios(&self) -> [f64; 8] {
        [
            self.riae[0],
            self.riae[1],
            self.ritae[0],
            self.ritae[1],
            self.ritae[2],
            self.ritae[3],
            self.riavu[0],
            self.riavu[1],
        ]
    }

    pub fn csv_header() -> String {
        let mut names: Vec<&str> = INDEX_NAMES.to_vec();
        names.push("J");
        names.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cells: Vec<String> = self.ratios().iter().map(|v| fmt_num(*v)).collect();
        cells.push(fmt_num(self.j));
        cells.join(",")
    }
}

impl fmt::Display for IndexReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10}", "index", "ratio")?;
        for (name, v) in INDEX_NAMES.iter().zip(self.ratios()) {
            writeln!(f, "{name:<10} {v:>10.4}")?;
        }
        write!(f, "{:<10} {:>10.4}", "J", self.j)
    }
}

/// Scores a candidate episode against a reference episode.
pub fn build_report(
    candidate: (&Trajectory, &Trajectory),
    reference: (&Trajectory, &Trajectory),
    events: &[RitaeEvent; 4],
    weights: &IndexWeights,
) -> Result<IndexReport> {
    candidate
        .0
        .grid()
        .ensure_compatible(reference.0.grid(), "candidate vs reference")?;
    let c = EpisodeIndices::compute(candidate.0, candidate.1, events)?;
    let r = EpisodeIndices::compute(reference.0, reference.1, events)?;
    IndexReport::from_indices(&c, &r, weights)
}
