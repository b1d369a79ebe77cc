//! Surrogate one-stage vapour-compression refrigeration process.
//!
//! A linear deviation model around an operating point: every
//! (source, output) pair is a first-order-plus-dead-time channel. The two
//! manipulated inputs are ordered `[N (Hz), A_v (%)]`, the disturbances
//! `[T_e,sec,in, T_c,sec,in]` and the outputs `[T_sec_evap_out, TSH]`.
//! Inputs are clamped to the actuator limits before they reach the dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::Grid;

pub const INPUT_NAMES: [&str; 2] = ["N", "Av"];
pub const OUTPUT_NAMES: [&str; 2] = ["T_sec_evap_out", "TSH"];

/// `K e^{-Ls} / (tau s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoptdChannel {
    pub gain: f64,
    pub tau: f64,
    #[serde(default)]
    pub dead_time: f64,
}

impl FoptdChannel {
    pub const fn new(gain: f64, tau: f64, dead_time: f64) -> Self {
        Self {
            gain,
            tau,
            dead_time,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.tau.is_finite() && self.dead_time.is_finite()) {
            return Err(Error::NonFinite("plant channel"));
        }
        if self.tau <= 0.0 {
            return Err(Error::param(format!(
                "lag time constant must be positive, got {}",
                self.tau
            )));
        }
        if self.dead_time < 0.0 {
            return Err(Error::param(format!(
                "dead time must be >= 0, got {}",
                self.dead_time
            )));
        }
        Ok(())
    }

    /// Dead time in samples.
    pub fn delay_samples(&self, h: f64) -> Result<usize> {
        let ratio = self.dead_time / h;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 {
            return Err(Error::DeadTime {
                dead_time: self.dead_time,
                h,
            });
        }
        Ok(rounded as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub lo: f64,
    pub hi: f64,
}

impl Limits {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(Error::param(format!(
                "limits need finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Nominal inputs `[N0 (Hz), A_v0 (%)]`.
    pub op_u: [f64; 2],
    /// Nominal outputs `[T_sec_evap_out (degC), TSH (degC)]`.
    pub op_y: [f64; 2],
    /// Nominal disturbances `[T_e,sec,in (degC), T_c,sec,in (degC)]`.
    pub op_d: [f64; 2],
    /// `g[output][input]`.
    pub g: [[FoptdChannel; 2]; 2],
    /// `gd[output][disturbance]`.
    pub gd: [[FoptdChannel; 2]; 2],
    pub limits: [Limits; 2],
}

impl Default for PlantConfig {
    fn default() -> Self {
        // Surrogate values, chosen for qualitative structure only.
        let evap = FoptdChannel::new(0.5, 30.0, 0.0);
        let cond = FoptdChannel::new(0.2, 60.0, 0.0);
        Self {
            op_u: [40.0, 50.0],
            op_y: [-22.0, 14.0],
            op_d: [-20.0, 30.0],
            g: [
                [
                    FoptdChannel::new(-0.3, 40.0, 10.0),
                    FoptdChannel::new(-0.05, 30.0, 5.0),
                ],
                [
                    FoptdChannel::new(0.2, 25.0, 5.0),
                    FoptdChannel::new(-0.1, 20.0, 3.0),
                ],
            ],
            gd: [[evap, cond], [evap, cond]],
            limits: [Limits::new(30.0, 50.0), Limits::new(10.0, 100.0)],
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let nominal = self.op_u.iter().chain(&self.op_y).chain(&self.op_d);
        if nominal.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant operating point"));
        }
        for ch in self.g.iter().chain(&self.gd).flatten() {
            ch.validate()?;
        }
        for lim in &self.limits {
            lim.validate()?;
        }
        Ok(())
    }

    /// Static gain matrix `K[output][input]`.
    pub fn static_gain(&self) -> [[f64; 2]; 2] {
        [
            [self.g[0][0].gain, self.g[0][1].gain],
            [self.g[1][0].gain, self.g[1][1].gain],
        ]
    }

    /// Contributing channel `j` of output `i`; `j` in 0..2 are the inputs,
    /// 2..4 the disturbances.
    fn source(&self, i: usize, j: usize) -> &FoptdChannel {
        if j < 2 {
            &self.g[i][j]
        } else {
            &self.gd[i][j - 2]
        }
    }
}

pub fn saturate(u_raw: [f64; 2], limits: &[Limits; 2]) -> [f64; 2] {
    [limits[0].clamp(u_raw[0]), limits[1].clamp(u_raw[1])]
}

/// Fixed-length FIFO; zero length passes values straight through.
#[derive(Debug, Clone, PartialEq)]
struct DelayLine {
    buf: Vec<f64>,
    head: usize,
}

impl DelayLine {
    fn new(len: usize) -> Self {
        Self {
            buf: vec![0.0; len],
            head: 0,
        }
    }

    fn push(&mut self, v: f64) -> f64 {
        if self.buf.is_empty() {
            return v;
        }
        let out = std::mem::replace(&mut self.buf[self.head], v);
        self.head = (self.head + 1) % self.buf.len();
        out
    }
}

/// Lag states and dead-time buffers for all eight channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    h: f64,
    lag: [[f64; 4]; 2],
    decay: [[f64; 4]; 2],
    delays: Vec<DelayLine>,
}

impl PlantState {
    /// Plant resting at its operating point.
    pub fn reset(config: &PlantConfig, grid: &Grid) -> Result<Self> {
        config.validate()?;
        let h = grid.h();
        let mut decay = [[0.0; 4]; 2];
        let mut delays = Vec::with_capacity(8);
        for (i, row) in decay.iter_mut().enumerate() {
            for (j, a) in row.iter_mut().enumerate() {
                let ch = config.source(i, j);
                *a = (-h / ch.tau).exp();
                delays.push(DelayLine::new(ch.delay_samples(h)?));
            }
        }
        Ok(Self {
            h,
            lag: [[0.0; 4]; 2],
            decay,
            delays,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Dead-time buffer length of channel `(output, source)`.
    pub fn delay_len(&self, output: usize, source: usize) -> usize {
        self.delays[output * 4 + source].buf.len()
    }

    pub fn lag_states(&self) -> &[[f64; 4]; 2] {
        &self.lag
    }

    /// Current measured outputs.
    pub fn output(&self, config: &PlantConfig) -> [f64; 2] {
        [
            config.op_y[0] + self.lag[0].iter().sum::<f64>(),
            config.op_y[1] + self.lag[1].iter().sum::<f64>(),
        ]
    }

    /// Holds `u_raw` (after saturation) and `d` over one sample period and
    /// returns the outputs at the end of it.
    pub fn step(&mut self, config: &PlantConfig, u_raw: [f64; 2], d: [f64; 2]) -> Result<[f64; 2]> {
        if u_raw.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant inputs"));
        }
        let u = saturate(u_raw, &config.limits);
        let dev = [
            u[0] - config.op_u[0],
            u[1] - config.op_u[1],
            d[0] - config.op_d[0],
            d[1] - config.op_d[1],
        ];
        for i in 0..2 {
            for j in 0..4 {
                let v = self.delays[i * 4 + j].push(dev[j]);
                let a = self.decay[i][j];
                let gain = config.source(i, j).gain;
                self.lag[i][j] = a * self.lag[i][j] + (1.0 - a) * gain * v;
            }
        }
        Ok(self.output(config))
    }
}

pub fn plant_reset(config: &PlantConfig, grid: &Grid) -> Result<PlantState> {
    PlantState::reset(config, grid)
}

pub fn plant_step(
    state: &mut PlantState,
    config: &PlantConfig,
    u_raw: [f64; 2],
    d: [f64; 2],
) -> Result<[f64; 2]> {
    state.step(config, u_raw, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::make_grid;

    fn grid(h: f64) -> Grid {
        make_grid(0.0, 300.0, h).unwrap()
    }

    /// Plant with every channel silenced except `g[out][inp]`.
    fn single_channel(out: usize, inp: usize, ch: FoptdChannel) -> PlantConfig {
        let mut cfg = PlantConfig::default();
        let quiet = FoptdChannel::new(0.0, 1.0, 0.0);
        cfg.g = [[quiet; 2]; 2];
        cfg.gd = [[quiet; 2]; 2];
        cfg.g[out][inp] = ch;
        cfg
    }

    #[test]
    fn saturation_limits() {
        let lim = PlantConfig::default().limits;
        assert_eq!(saturate([40.0, 120.0], &lim), [40.0, 100.0]);
        assert_eq!(saturate([25.0, 50.0], &lim), [30.0, 50.0]);
        assert_eq!(saturate([40.0, 50.0], &lim), [40.0, 50.0]);
    }

    #[test]
    fn reset_buffers() {
        let cfg = PlantConfig::default();
        let st = plant_reset(&cfg, &grid(1.0)).unwrap();
        assert_eq!(st.lag_states(), &[[0.0; 4]; 2]);
        assert_eq!(st.delay_len(0, 0), 10);
        assert_eq!(st.delay_len(1, 1), 3);
        assert_eq!(st.delay_len(0, 2), 0);
        assert!(matches!(
            plant_reset(&cfg, &grid(3.0)),
            Err(Error::DeadTime { .. })
        ));
    }

    #[test]
    fn operating_point_is_fixed() {
        let cfg = PlantConfig::default();
        let mut st = plant_reset(&cfg, &grid(1.0)).unwrap();
        for _ in 0..200 {
            assert_eq!(st.step(&cfg, cfg.op_u, cfg.op_d).unwrap(), cfg.op_y);
        }
    }

    #[test]
    fn foptd_step_value_at_fifty_seconds() {
        let cfg = single_channel(0, 0, FoptdChannel::new(-0.3, 40.0, 10.0));
        let mut st = plant_reset(&cfg, &grid(1.0)).unwrap();
        let u = [cfg.op_u[0] + 1.0, cfg.op_u[1]];
        let mut y = cfg.op_y;
        for _ in 0..50 {
            y = st.step(&cfg, u, cfg.op_d).unwrap();
        }
        let expected = -0.3 * (1.0 - (-1.0f64).exp());
        assert!((y[0] - cfg.op_y[0] - expected).abs() < 1e-12);
        assert!((expected + 0.18964).abs() < 1e-5);
    }

    #[test]
    fn saturation_precedes_dynamics() {
        let cfg = PlantConfig::default();
        let mut a = plant_reset(&cfg, &grid(1.0)).unwrap();
        let mut b = a.clone();
        for _ in 0..100 {
            let ya = a.step(&cfg, [40.0, 120.0], cfg.op_d).unwrap();
            let yb = b.step(&cfg, [40.0, 100.0], cfg.op_d).unwrap();
            assert_eq!(ya, yb);
        }
    }

    #[test]
    fn dead_time_is_exact() {
        let cfg = PlantConfig::default();
        let mut st = plant_reset(&cfg, &grid(1.0)).unwrap();
        // the fastest input channel into TSH has a 3 s dead time
        let u = [cfg.op_u[0], cfg.op_u[1] + 5.0];
        for k in 0..3 {
            let y = st.step(&cfg, u, cfg.op_d).unwrap();
            assert_eq!(y, cfg.op_y, "step {k}");
        }
        assert_ne!(st.step(&cfg, u, cfg.op_d).unwrap()[1], cfg.op_y[1]);
    }

    #[test]
    fn rejects_non_finite_input() {
        let cfg = PlantConfig::default();
        let mut st = plant_reset(&cfg, &grid(1.0)).unwrap();
        assert!(st.step(&cfg, [f64::NAN, 50.0], cfg.op_d).is_err());
    }

    #[test]
    fn convergence_to_static_gain() {
        let ch = FoptdChannel::new(0.2, 25.0, 5.0);
        let cfg = single_channel(1, 0, ch);
        let mut st = plant_reset(&cfg, &grid(1.0)).unwrap();
        let u = [cfg.op_u[0] + 2.0, cfg.op_u[1]];
        let steps = (ch.dead_time + 5.0 * ch.tau) as usize;
        let mut y = cfg.op_y;
        for _ in 0..steps {
            y = st.step(&cfg, u, cfg.op_d).unwrap();
        }
        let target = 0.2 * 2.0;
        assert!(((y[1] - cfg.op_y[1]) - target).abs() <= 0.01 * target);
    }
}
