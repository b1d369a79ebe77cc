//! Iterative learning feedforward: the memory bank, the trial-to-trial
//! update `u_F^j = u_F^{j-1} + gamma * H(u_C^{j-1})` with a pluggable filter
//! `H`, and composition of the applied control.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bsn::{bsn_eval_grid, bsn_learn, BsnConfig, BsnWeights, LearnRule};
use crate::error::{Error, Result};
use crate::signals::{read_columns, relabel, write_columns, Grid, Trajectory};

pub const MEMORY_HEADER: [&str; 5] = ["t", "uF_N", "uF_Av", "uC_N", "uC_Av"];

/// The learning filter `H` applied to the stored feedback signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterKind {
    Identity,
    /// Causal first-order low-pass with time constant `tau` (s); `tau = 0`
    /// is the identity. `zero_phase` runs it forward then backward.
    LowPass {
        tau: f64,
        #[serde(default)]
        zero_phase: bool,
    },
    /// Dilated B-spline network learned afresh from each stored signal.
    Bsn {
        m: usize,
        dilation: usize,
        #[serde(default)]
        normalized: bool,
        #[serde(default)]
        rule: LearnRule,
    },
}

impl FilterKind {
    fn validate(&self) -> Result<()> {
        match *self {
            FilterKind::Identity => Ok(()),
            FilterKind::LowPass { tau, .. } => check_tau(tau),
            FilterKind::Bsn { m, dilation, .. } => {
                if m == 0 || dilation == 0 {
                    Err(Error::param("BSN filter needs m >= 1 and dilation >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterKind::Identity => write!(f, "identity"),
            FilterKind::LowPass { tau, zero_phase } => {
                write!(f, "low_pass tau={tau} zero_phase={zero_phase}")
            }
            FilterKind::Bsn {
                m,
                dilation,
                normalized,
                rule,
            } => {
                let rule = match rule {
                    LearnRule::WeightedMean => "weighted_mean",
                    LearnRule::Projection => "projection",
                };
                write!(
                    f,
                    "bsn m={m} dilation={dilation} normalized={normalized} rule={rule}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub gamma: f64,
    /// Filter for both actuator channels unless `filter_av` overrides it.
    pub filter: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_av: Option<FilterKind>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            filter: FilterKind::LowPass {
                tau: 0.0,
                zero_phase: false,
            },
            filter_av: None,
        }
    }
}

impl LearningConfig {
    pub fn new(gamma: f64, filter: FilterKind) -> Self {
        Self {
            gamma,
            filter,
            filter_av: None,
        }
    }

    pub fn filter_for(&self, channel: usize) -> &FilterKind {
        match (channel, &self.filter_av) {
            (1, Some(f)) => f,
            _ => &self.filter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("learning gain"));
        }
        self.filter.validate()?;
        if let Some(f) = &self.filter_av {
            f.validate()?;
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "filter time constant must be finite and >= 0, got {tau}"
        )))
    }
}

fn lowpass_pass(xs: &mut [f64], alpha: f64) {
    for k in 1..xs.len() {
        xs[k] = alpha * xs[k - 1] + (1.0 - alpha) * xs[k];
    }
}

fn lowpass(xs: &[f64], tau: f64, h: f64, zero_phase: bool) -> Vec<f64> {
    let mut out = xs.to_vec();
    if tau == 0.0 {
        return out;
    }
    let alpha = (-h / tau).exp();
    lowpass_pass(&mut out, alpha);
    if zero_phase {
        out.reverse();
        lowpass_pass(&mut out, alpha);
        out.reverse();
    }
    out
}

/// `y_0 = u_0`, `y_k = a y_{k-1} + (1 - a) u_k` with `a = exp(-h / tau)`;
/// `tau = 0` returns the input unchanged. Filters every channel.
pub fn lpf_apply(u: &Trajectory, tau: f64, h: f64) -> Result<Trajectory> {
    check_tau(tau)?;
    if !(h > 0.0) {
        return Err(Error::param(format!("step must be positive, got {h}")));
    }
    let chans = (0..u.channels())
        .map(|c| lowpass(u.channel(c), tau, h, false))
        .collect();
    Trajectory::from_channels(*u.grid(), chans)
}

/// Forward-backward variant of [`lpf_apply`].
pub fn lpf_apply_zero_phase(u: &Trajectory, tau: f64, h: f64) -> Result<Trajectory> {
    check_tau(tau)?;
    let chans = (0..u.channels())
        .map(|c| lowpass(u.channel(c), tau, h, true))
        .collect();
    Trajectory::from_channels(*u.grid(), chans)
}

/// Stored signals of the previous trial. Channels are `[N, A_v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    pub iteration: usize,
    pub u_f_prev: Trajectory,
    pub u_c_prev: Trajectory,
}

impl MemoryBank {
    /// Empty bank: iteration 0 with zero feedforward and feedback.
    pub fn new(grid: Grid) -> Self {
        Self {
            iteration: 0,
            u_f_prev: Trajectory::zeros(grid, 2),
            u_c_prev: Trajectory::zeros(grid, 2),
        }
    }

    pub fn from_parts(
        iteration: usize,
        u_f_prev: Trajectory,
        u_c_prev: Trajectory,
    ) -> Result<Self> {
        u_f_prev
            .grid()
            .ensure_compatible(u_c_prev.grid(), "memory bank")?;
        if u_f_prev.channels() != 2 || u_c_prev.channels() != 2 {
            return Err(Error::param("memory trajectories need two channels"));
        }
        Ok(Self {
            iteration,
            u_f_prev,
            u_c_prev,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u_f_prev.grid()
    }

    /// Writes `t,uF_N,uF_Av,uC_N,uC_Av`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let both = Trajectory::stack(&[&self.u_f_prev, &self.u_c_prev])?;
        let header: Vec<String> = MEMORY_HEADER.iter().map(|s| s.to_string()).collect();
        write_columns(std::io::BufWriter::new(file), &header, &both).map_err(|e| relabel(e, path))
    }

    pub fn load_csv(path: &Path, iteration: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (names, traj) = read_columns(file).map_err(|e| relabel(e, path))?;
        if names != MEMORY_HEADER[1..] {
            return Err(Error::format(
                path,
                format!("expected header {}", MEMORY_HEADER.join(",")),
            ));
        }
        let uf = Trajectory::stack(&[&traj.select(0), &traj.select(1)])?;
        let uc = Trajectory::stack(&[&traj.select(2), &traj.select(3)])?;
        Self::from_parts(iteration, uf, uc)
    }
}

fn increment(u_c: &Trajectory, filter: &FilterKind, gamma: f64, h: f64) -> Result<Vec<f64>> {
    let grid = u_c.grid();
    let xs = u_c.channel(0);
    Ok(match *filter {
        FilterKind::Identity => xs.iter().map(|v| gamma * v).collect(),
        FilterKind::LowPass { tau, zero_phase } => lowpass(xs, tau, h, zero_phase)
            .into_iter()
            .map(|v| gamma * v)
            .collect(),
        FilterKind::Bsn {
            m,
            dilation,
            normalized,
            rule,
        } => {
            let cfg = BsnConfig::new(m, dilation, grid)?
                .with_normalized(normalized)
                .with_rule(rule);
            let w = bsn_learn(&cfg, &BsnWeights::zeros(&cfg), u_c, gamma)?;
            bsn_eval_grid(&cfg, &w, grid)?
        }
    })
}

/// Next trial's feedforward from the stored trial.
pub fn lffc_update(memory: &MemoryBank, cfg: &LearningConfig, h: f64) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = *memory.grid();
    memory
        .u_f_prev
        .grid()
        .ensure_compatible(memory.u_c_prev.grid(), "memory bank")?;
    if (grid.h() - h).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "memory sampled at {} s, update step {h} s",
            grid.h()
        )));
    }
    let mut next = memory.u_f_prev.clone();
    for ch in 0..2 {
        let inc = increment(
            &memory.u_c_prev.select(ch),
            cfg.filter_for(ch),
            cfg.gamma,
            h,
        )?;
        for (v, d) in next.channel_mut(ch).iter_mut().zip(inc) {
            *v += d;
        }
    }
    Ok(next)
}

pub fn compose_control(u_c: [f64; 2], u_f: [f64; 2]) -> [f64; 2] {
    [u_c[0] + u_f[0], u_c[1] + u_f[1]]
}
