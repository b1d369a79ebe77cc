//! Discrete PID feedback with conditional-integration anti-windup, in
//! decentralized and decoupler-based multivariable arrangements.
//!
//! Gains may be reverse-acting (all negative) to match plant channels with
//! negative static gain. The integrator freeze is keyed to the direction in
//! which the integrator increment moves the output, so it applies to both
//! signs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::Limits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntiWindup {
    /// Freeze the integrator while saturated and the error would push further.
    #[default]
    ConditionalIntegration,
    /// Integrate unconditionally (reference behaviour for comparisons).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Derivative filter ratio; the filter time constant is `kd / (kp * nf)`.
    pub nf: f64,
    pub u_bias: f64,
    pub limits: Limits,
    pub anti_windup: AntiWindup,
}

impl PidGains {
    pub fn pi(kp: f64, ki: f64, u_bias: f64, limits: Limits) -> Self {
        Self {
            kp,
            ki,
            kd: 0.0,
            nf: 10.0,
            u_bias,
            limits,
            anti_windup: AntiWindup::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.kp, self.ki, self.kd, self.nf, self.u_bias];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PID gains"));
        }
        if self.nf <= 0.0 {
            return Err(Error::param(format!(
                "derivative filter ratio must be positive, got {}",
                self.nf
            )));
        }
        self.limits.validate()?;
        let has_pos = [self.kp, self.ki, self.kd].iter().any(|&g| g > 0.0);
        let has_neg = [self.kp, self.ki, self.kd].iter().any(|&g| g < 0.0);
        if has_pos && has_neg {
            return Err(Error::param(format!(
                "kp, ki and kd must share one sign, got ({}, {}, {})",
                self.kp, self.ki, self.kd
            )));
        }
        Ok(())
    }

    fn filter_time(&self) -> f64 {
        if self.kp == 0.0 {
            0.0
        } else {
            self.kd / (self.kp * self.nf)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integ: f64,
    pub deriv_f: f64,
    pub e_prev: f64,
    /// False until the first error has been seen; suppresses derivative kick.
    pub primed: bool,
    pub saturated_hi: bool,
    pub saturated_lo: bool,
}

impl PidState {
    /// Advances the derivative memory and returns the unsaturated output.
    fn unsaturated(&mut self, g: &PidGains, e: f64, h: f64) -> f64 {
        if g.kd != 0.0 {
            let de = if self.primed { e - self.e_prev } else { 0.0 };
            let tf = g.filter_time();
            self.deriv_f = (tf * self.deriv_f + g.kd * de) / (tf + h);
        }
        self.e_prev = e;
        self.primed = true;
        g.u_bias + g.kp * e + self.integ + self.deriv_f
    }

    /// Integrator update; `deepens` reports a saturation that the increment
    /// would push further.
    fn integrate(&mut self, g: &PidGains, e: f64, h: f64, deepens: bool) {
        let freeze = g.anti_windup == AntiWindup::ConditionalIntegration && deepens;
        if !freeze {
            self.integ += g.ki * e * h;
        }
    }
}

fn check_step(r: f64, y: f64, h: f64) -> Result<()> {
    if !(r.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite("PID setpoint or measurement"));
    }
    if !(h > 0.0) {
        return Err(Error::param(format!("step must be positive, got {h}")));
    }
    Ok(())
}

/// One PID update. Returns the clamped actuator command.
pub fn pid_step(gains: &PidGains, state: &mut PidState, r: f64, y: f64, h: f64) -> Result<f64> {
    check_step(r, y, h)?;
    let e = r - y;
    let u_unsat = state.unsaturated(gains, e, h);
    let lim = gains.limits;
    state.saturated_hi = u_unsat > lim.hi;
    state.saturated_lo = u_unsat < lim.lo;
    let push = gains.ki * e;
    let deepens = (state.saturated_hi && push > 0.0) || (state.saturated_lo && push < 0.0);
    state.integrate(gains, e, h, deepens);
    Ok(lim.clamp(u_unsat))
}

/// Which output each actuator loop regulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// N regulates T_sec_evap_out, A_v regulates TSH.
    #[default]
    Standard,
    /// N regulates TSH, A_v regulates T_sec_evap_out.
    Swapped,
}

impl Pairing {
    /// Output index read by the loop driving input `input`.
    pub fn output_for(self, input: usize) -> usize {
        match self {
            Pairing::Standard => input,
            Pairing::Swapped => 1 - input,
        }
    }
}

/// Static 2x2 matrix applied to the PID outputs before the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoupler {
    d: [[f64; 2]; 2],
}

impl Decoupler {
    pub fn new(d: [[f64; 2]; 2]) -> Result<Self> {
        if d.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoupler"));
        }
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        if det.abs() <= 1e-12 {
            return Err(Error::SingularDecoupler(det));
        }
        Ok(Self { d })
    }

    pub fn identity() -> Self {
        Self {
            d: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `D = K^-1 diag(K)`, so that `K D = diag(K)`: each loop keeps the
    /// static gain of its own diagonal channel.
    pub fn static_inverse(k: [[f64; 2]; 2]) -> Result<Self> {
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        if det.abs() <= 1e-12 {
            return Err(Error::SingularDecoupler(det));
        }
        let inv = [
            [k[1][1] / det, -k[0][1] / det],
            [-k[1][0] / det, k[0][0] / det],
        ];
        Self::new([
            [inv[0][0] * k[0][0], inv[0][1] * k[1][1]],
            [inv[1][0] * k[0][0], inv[1][1] * k[1][1]],
        ])
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.d
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.d[0][0] * v[0] + self.d[0][1] * v[1],
            self.d[1][0] * v[0] + self.d[1][1] * v[1],
        ]
    }

    pub fn solve(&self, u: [f64; 2]) -> [f64; 2] {
        let d = self.d;
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        [
            (d[1][1] * u[0] - d[0][1] * u[1]) / det,
            (-d[1][0] * u[0] + d[0][0] * u[1]) / det,
        ]
    }
}

/// Two independent loops: `pid_n` drives N, `pid_av` drives A_v.
#[allow(clippy::too_many_arguments)]
pub fn decentralized_step(
    pid_n: &PidGains,
    pid_av: &PidGains,
    state_n: &mut PidState,
    state_av: &mut PidState,
    r: [f64; 2],
    y: [f64; 2],
    h: f64,
) -> Result<[f64; 2]> {
    Ok([
        pid_step(pid_n, state_n, r[0], y[0], h)?,
        pid_step(pid_av, state_av, r[1], y[1], h)?,
    ])
}

/// PID outputs `v` pass through the decoupler, then the plant limits. A loop's
/// integrator freezes when its increment, mapped through `D`, would deepen the
/// saturation of any actuator.
pub fn multivariable_step(
    decoupler: &Decoupler,
    pids: &[PidGains; 2],
    states: &mut [PidState; 2],
    r: [f64; 2],
    y: [f64; 2],
    h: f64,
    limits: &[Limits; 2],
) -> Result<[f64; 2]> {
    for i in 0..2 {
        check_step(r[i], y[i], h)?;
    }
    let e = [r[0] - y[0], r[1] - y[1]];
    let v = [
        states[0].unsaturated(&pids[0], e[0], h),
        states[1].unsaturated(&pids[1], e[1], h),
    ];
    let u_unsat = decoupler.apply(v);
    let sat_hi = [u_unsat[0] > limits[0].hi, u_unsat[1] > limits[1].hi];
    let sat_lo = [u_unsat[0] < limits[0].lo, u_unsat[1] < limits[1].lo];
    let d = decoupler.matrix();
    for j in 0..2 {
        let push = pids[j].ki * e[j];
        let mut deepens = false;
        for i in 0..2 {
            let effect = d[i][j] * push;
            deepens |= (sat_hi[i] && effect > 0.0) || (sat_lo[i] && effect < 0.0);
        }
        // loop-side view: raising (lowering) v_j deepens some saturation
        let up = (0..2).any(|i| (sat_hi[i] && d[i][j] > 0.0) || (sat_lo[i] && d[i][j] < 0.0));
        let down = (0..2).any(|i| (sat_lo[i] && d[i][j] > 0.0) || (sat_hi[i] && d[i][j] < 0.0));
        states[j].saturated_hi = up && !down;
        states[j].saturated_lo = down && !up;
        states[j].integrate(&pids[j], e[j], h, deepens);
    }
    Ok([limits[0].clamp(u_unsat[0]), limits[1].clamp(u_unsat[1])])
}

/// Feedback arrangement used by an episode. Loops are indexed by the actuator
/// they drive: `[N, A_v]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackController {
    Decentralized {
        loops: [PidGains; 2],
        pairing: Pairing,
    },
    Multivariable {
        loops: [PidGains; 2],
        pairing: Pairing,
        decoupler: Decoupler,
        limits: [Limits; 2],
    },
}

impl FeedbackController {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeedbackController::Decentralized { loops, .. } => {
                loops.iter().try_for_each(PidGains::validate)
            }
            FeedbackController::Multivariable { loops, limits, .. } => {
                loops.iter().try_for_each(PidGains::validate)?;
                limits.iter().try_for_each(Limits::validate)
            }
        }
    }

    fn pairing(&self) -> Pairing {
        match self {
            FeedbackController::Decentralized { pairing, .. }
            | FeedbackController::Multivariable { pairing, .. } => *pairing,
        }
    }

    /// Actuator command at zero error and zero controller state.
    pub fn nominal(&self) -> [f64; 2] {
        match self {
            FeedbackController::Decentralized { loops, .. } => [
                loops[0].limits.clamp(loops[0].u_bias),
                loops[1].limits.clamp(loops[1].u_bias),
            ],
            FeedbackController::Multivariable {
                loops,
                decoupler,
                limits,
                ..
            } => {
                let u = decoupler.apply([loops[0].u_bias, loops[1].u_bias]);
                [limits[0].clamp(u[0]), limits[1].clamp(u[1])]
            }
        }
    }

    /// `r` and `y` are in output order; the result is in actuator order.
    pub fn step(
        &self,
        states: &mut [PidState; 2],
        r: [f64; 2],
        y: [f64; 2],
        h: f64,
    ) -> Result<[f64; 2]> {
        let p = self.pairing();
        let rp = [r[p.output_for(0)], r[p.output_for(1)]];
        let yp = [y[p.output_for(0)], y[p.output_for(1)]];
        match self {
            FeedbackController::Decentralized { loops, .. } => {
                let [s0, s1] = states;
                decentralized_step(&loops[0], &loops[1], s0, s1, rp, yp, h)
            }
            FeedbackController::Multivariable {
                loops,
                decoupler,
                limits,
                ..
            } => multivariable_step(decoupler, loops, states, rp, yp, h, limits),
        }
    }
}
