//! Dilated second-order (triangular) B-spline network over the time axis.
//!
//! Basis `i` is a triangle of apex 1 centred at `c_i` with support width
//! `d = 2 m h`. Centres are spaced `d / (2 * dilation)`, so every interior
//! time is covered by `2 * dilation` supports and the memberships sum to
//! `dilation`. One extra support of centres pads each end of the domain.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{fmt_num, Grid, Trajectory};

const DOMAIN_TOL: f64 = 1e-9;

/// How a stored signal is turned into weight increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnRule {
    /// Membership-weighted mean of the signal over each support.
    #[default]
    WeightedMean,
    /// Least-squares fit of the signal in the span of the basis.
    Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsnConfig {
    m: usize,
    dilation: usize,
    h: f64,
    t0: f64,
    tf: f64,
    /// Divide the network output by the summed memberships.
    pub normalized: bool,
    pub rule: LearnRule,
    n_centers: usize,
}

impl BsnConfig {
    /// Network covering `grid` with supports of `2 m` samples.
    pub fn new(m: usize, dilation: usize, grid: &Grid) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        if dilation == 0 {
            return Err(Error::param("dilation must be at least 1"));
        }
        let d = 2.0 * m as f64 * grid.h();
        let spacing = d / (2.0 * dilation as f64);
        let span = grid.tf() - grid.t0() + 2.0 * d;
        let n_centers = ((span / spacing) - DOMAIN_TOL).ceil() as usize + 1;
        Ok(Self {
            m,
            dilation,
            h: grid.h(),
            t0: grid.t0(),
            tf: grid.tf(),
            normalized: false,
            rule: LearnRule::default(),
            n_centers,
        })
    }

    pub fn with_rule(mut self, rule: LearnRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    /// Support width `d = 2 m h`.
    pub fn support(&self) -> f64 {
        2.0 * self.m as f64 * self.h
    }

    pub fn spacing(&self) -> f64 {
        self.support() / (2.0 * self.dilation as f64)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t0, self.tf)
    }

    pub fn padded_domain(&self) -> (f64, f64) {
        (self.t0 - self.support(), self.center(self.n_centers - 1))
    }

    pub fn n_centers(&self) -> usize {
        self.n_centers
    }

    pub fn center(&self, i: usize) -> f64 {
        self.t0 - self.support() + i as f64 * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_centers).map(|i| self.center(i)).collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.padded_domain();
        if t.is_finite() && t >= lo - DOMAIN_TOL && t <= hi + DOMAIN_TOL {
            Ok(())
        } else {
            Err(Error::OutsideDomain { t, lo, hi })
        }
    }

    /// Nonzero memberships at `t` as `(index, mu)`.
    fn active(&self, t: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let half = self.support() / 2.0;
        let x = (t - self.center(0)) / self.spacing();
        let reach = self.dilation as f64;
        let first = (x - reach).ceil().max(0.0) as usize;
        let last = ((x + reach).floor().max(0.0) as usize).min(self.n_centers - 1);
        (first..=last).filter_map(move |i| {
            let mu = 1.0 - (t - self.center(i)).abs() / half;
            (mu > 0.0).then_some((i, mu))
        })
    }

    fn check_signal(&self, u: &Trajectory) -> Result<()> {
        let g = u.grid();
        if u.channels() != 1 {
            return Err(Error::param(format!(
                "expected one channel, got {}",
                u.channels()
            )));
        }
        let ok = (g.h() - self.h).abs() <= DOMAIN_TOL
            && (g.t0() - self.t0).abs() <= DOMAIN_TOL
            && (g.tf() - self.tf).abs() <= DOMAIN_TOL;
        if !ok {
            return Err(Error::GridMismatch(format!(
                "signal on [{}, {}] step {} vs network domain [{}, {}] step {}",
                g.t0(),
                g.tf(),
                g.h(),
                self.t0,
                self.tf,
                self.h
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsnWeights {
    pub w: Vec<f64>,
}

impl BsnWeights {
    pub fn zeros(config: &BsnConfig) -> Self {
        Self {
            w: vec![0.0; config.n_centers()],
        }
    }

    /// `center,weight` rows.
    pub fn write_csv<W: Write>(&self, config: &BsnConfig, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::format("<csv>", e.to_string());
        w.write_record(["center", "weight"]).map_err(csv_err)?;
        for (i, wi) in self.w.iter().enumerate() {
            w.write_record([fmt_num(config.center(i)), fmt_num(*wi)])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, config: &BsnConfig, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(config, std::io::BufWriter::new(file))
    }
}

pub fn bsn_memberships(config: &BsnConfig, t: f64) -> Result<Vec<f64>> {
    config.check_time(t)?;
    let mut mu = vec![0.0; config.n_centers()];
    for (i, m) in config.active(t) {
        mu[i] = m;
    }
    Ok(mu)
}

pub fn bsn_eval(config: &BsnConfig, weights: &BsnWeights, t: f64) -> Result<f64> {
    config.check_time(t)?;
    let (mut acc, mut mass) = (0.0, 0.0);
    for (i, mu) in config.active(t) {
        acc += weights.w[i] * mu;
        mass += mu;
    }
    if config.normalized && mass > 0.0 {
        acc /= mass;
    }
    Ok(acc)
}

/// Network output at every sample of `grid`.
pub fn bsn_eval_grid(config: &BsnConfig, weights: &BsnWeights, grid: &Grid) -> Result<Vec<f64>> {
    grid.times().map(|t| bsn_eval(config, weights, t)).collect()
}

/// Adds `gamma` times the network's reading of `u` to the weights. Splines
/// without samples under their support keep their weight.
pub fn bsn_learn(
    config: &BsnConfig,
    weights: &BsnWeights,
    u: &Trajectory,
    gamma: f64,
) -> Result<BsnWeights> {
    config.check_signal(u)?;
    if !gamma.is_finite() {
        return Err(Error::NonFinite("learning gain"));
    }
    if weights.w.len() != config.n_centers() {
        return Err(Error::param(format!(
            "expected {} weights, got {}",
            config.n_centers(),
            weights.w.len()
        )));
    }
    let delta = match config.rule {
        LearnRule::WeightedMean => weighted_mean(config, u),
        LearnRule::Projection => projection(config, u)?,
    };
    Ok(BsnWeights {
        w: weights
            .w
            .iter()
            .zip(&delta)
            .map(|(w, d)| w + gamma * d)
            .collect(),
    })
}

fn weighted_mean(config: &BsnConfig, u: &Trajectory) -> Vec<f64> {
    let n = config.n_centers();
    let (mut num, mut den) = (vec![0.0; n], vec![0.0; n]);
    for (t, &v) in u.grid().times().zip(u.channel(0)) {
        for (i, mu) in config.active(t) {
            num[i] += mu * v;
            den[i] += mu;
        }
    }
    num.iter()
        .zip(&den)
        .map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 })
        .collect()
}

fn projection(config: &BsnConfig, u: &Trajectory) -> Result<Vec<f64>> {
    let n = config.n_centers();
    let mut mass = vec![0.0; n];
    for t in u.grid().times() {
        for (i, mu) in config.active(t) {
            mass[i] += mu;
        }
    }
    let live: Vec<usize> = (0..n).filter(|&i| mass[i] > 0.0).collect();
    let mut slot = vec![usize::MAX; n];
    for (s, &i) in live.iter().enumerate() {
        slot[i] = s;
    }
    let mut gram = DMatrix::<f64>::zeros(live.len(), live.len());
    let mut rhs = DVector::<f64>::zeros(live.len());
    for (t, &v) in u.grid().times().zip(u.channel(0)) {
        let act: Vec<(usize, f64)> = config.active(t).collect();
        for &(i, mi) in &act {
            rhs[slot[i]] += mi * v;
            for &(j, mj) in &act {
                gram[(slot[i], slot[j])] += mi * mj;
            }
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::param("basis is not identifiable on this grid; use the weighted-mean rule")
    })?;
    let coef = chol.solve(&rhs);
    let mut out = vec![0.0; n];
    for (s, &i) in live.iter().enumerate() {
        out[i] = coef[s];
    }
    Ok(out)
}

/// Sinc-squared envelope `(sin(w d/4) / (w d/4))^2` of the learning filter,
/// with the interpolation factor taken as one. Equals 1 at `omega = 0`.
pub fn bsn_filter_magnitude(d: f64, omega: f64) -> f64 {
    let x = omega * d / 4.0;
    if x.abs() < 1e-12 {
        1.0
    } else {
        (x.sin() / x).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::make_grid;
    use proptest::prelude::*;

    fn grid() -> Grid {
        make_grid(0.0, 1200.0, 1.0).unwrap()
    }

    #[test]
    fn geometry() {
        let c = BsnConfig::new(9, 2, &grid()).unwrap();
        assert_eq!(c.support(), 18.0);
        assert_eq!(c.spacing(), 4.5);
        assert_eq!(c.center(0), -18.0);
        assert!(c.center(c.n_centers() - 1) >= 1218.0);
        assert!(c.center(c.n_centers() - 2) < 1218.0);
        assert!(BsnConfig::new(0, 1, &grid()).is_err());
        assert!(BsnConfig::new(3, 0, &grid()).is_err());
    }

    #[test]
    fn apex_and_midpoint() {
        let c = BsnConfig::new(9, 1, &grid()).unwrap();
        let i = 10;
        let mu = bsn_memberships(&c, c.center(i)).unwrap();
        assert_eq!(mu[i], 1.0);
        assert_eq!(mu.iter().filter(|&&m| m > 0.0).count(), 1);
        let mid = 0.5 * (c.center(i) + c.center(i + 1));
        let mu = bsn_memberships(&c, mid).unwrap();
        assert_eq!(mu[i], 0.5);
        assert_eq!(mu[i + 1], 0.5);
    }

    #[test]
    fn dilated_memberships_sum_to_two() {
        let c = BsnConfig::new(9, 2, &grid()).unwrap();
        for t in [0.0, 0.3, 4.5, 17.0, 333.3, 600.0, 1199.9, 1200.0] {
            let s: f64 = bsn_memberships(&c, t).unwrap().iter().sum();
            assert!((s - 2.0).abs() < 1e-12, "t = {t}: {s}");
        }
    }

    #[test]
    fn outside_padded_domain() {
        let c = BsnConfig::new(9, 1, &grid()).unwrap();
        assert!(matches!(
            bsn_memberships(&c, -19.0),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(bsn_eval(&c, &BsnWeights::zeros(&c), 1300.0).is_err());
    }

    #[test]
    fn eval_examples() {
        let c = BsnConfig::new(9, 2, &grid()).unwrap();
        assert_eq!(bsn_eval(&c, &BsnWeights::zeros(&c), 77.0).unwrap(), 0.0);
        let w = BsnWeights {
            w: vec![1.5; c.n_centers()],
        };
        for t in [0.0, 77.0, 1000.25] {
            assert!((bsn_eval(&c, &w, t).unwrap() - 3.0).abs() < 1e-12);
        }
        let normalized = c.clone().with_normalized(true);
        assert!((bsn_eval(&normalized, &w, 77.0).unwrap() - 1.5).abs() < 1e-12);

        let c1 = BsnConfig::new(9, 1, &grid()).unwrap();
        let mut w = BsnWeights::zeros(&c1);
        w.w[20] = 2.5;
        assert_eq!(bsn_eval(&c1, &w, c1.center(20)).unwrap(), 2.5);
    }

    #[test]
    fn learn_zero_and_constant() {
        let g = grid();
        let c = BsnConfig::new(9, 2, &g).unwrap();
        let w0 = BsnWeights {
            w: (0..c.n_centers()).map(|i| i as f64 * 0.01).collect(),
        };
        let zero = Trajectory::zeros(g, 1);
        assert_eq!(bsn_learn(&c, &w0, &zero, 0.1).unwrap(), w0);

        let konst = Trajectory::from_fn(g, 1, |_, _| 3.0);
        let w1 = bsn_learn(&c, &w0, &konst, 0.1).unwrap();
        for i in 0..c.n_centers() {
            let ci = c.center(i);
            let half = c.support() / 2.0;
            if ci - half >= 0.0 && ci + half <= 1200.0 {
                assert!((w1.w[i] - w0.w[i] - 0.3).abs() < 1e-12);
            }
        }
        // no samples under the outermost padding supports
        assert_eq!(w1.w[0], w0.w[0]);
    }

    #[test]
    fn learn_ramp_recovers_centres() {
        let g = grid();
        let c = BsnConfig::new(9, 1, &g).unwrap();
        let ramp = Trajectory::from_fn(g, 1, |_, t| t);
        let w = bsn_learn(&c, &BsnWeights::zeros(&c), &ramp, 0.1).unwrap();
        let half = c.support() / 2.0;
        for i in 0..c.n_centers() {
            let ci = c.center(i);
            if ci - half >= 0.0 && ci + half <= 1200.0 {
                assert!((w.w[i] - 0.1 * ci).abs() < 1e-9, "centre {ci}");
            }
        }
    }

    #[test]
    fn learn_rejects_mismatched_grid() {
        let c = BsnConfig::new(9, 1, &grid()).unwrap();
        let other = Trajectory::zeros(make_grid(0.0, 600.0, 1.0).unwrap(), 1);
        assert!(matches!(
            bsn_learn(&c, &BsnWeights::zeros(&c), &other, 0.1),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn weighted_mean_smooths_kinks() {
        // a kink at a centre is averaged away; only the projection rule
        // reproduces piecewise-linear signals
        let g = make_grid(0.0, 180.0, 1.0).unwrap();
        let c = BsnConfig::new(9, 1, &g).unwrap();
        let kink = c.center(10);
        let u = Trajectory::from_fn(g, 1, |_, t| (t - kink).abs());
        let w = bsn_learn(&c, &BsnWeights::zeros(&c), &u, 1.0).unwrap();
        assert!(bsn_eval(&c, &w, kink).unwrap() > 1.0);
        let p = c.with_rule(LearnRule::Projection);
        let w = bsn_learn(&p, &BsnWeights::zeros(&p), &u, 1.0).unwrap();
        assert!(bsn_eval(&p, &w, kink).unwrap().abs() < 1e-9);
    }

    #[test]
    fn magnitude_examples() {
        let d = 18.0;
        assert_eq!(bsn_filter_magnitude(d, 0.0), 1.0);
        let w_pi = std::f64::consts::PI * 4.0 / d;
        assert!(bsn_filter_magnitude(d, w_pi) < 1e-30);
        let w_half = w_pi / 2.0;
        let expect = (2.0 / std::f64::consts::PI).powi(2);
        assert!((bsn_filter_magnitude(d, w_half) - expect).abs() < 1e-12);
        assert!((expect - 0.405285).abs() < 1e-6);
    }

    #[test]
    fn weights_csv() {
        let g = make_grid(0.0, 4.0, 1.0).unwrap();
        let c = BsnConfig::new(1, 1, &g).unwrap();
        let mut w = BsnWeights::zeros(&c);
        w.w[2] = 0.25;
        let mut buf = Vec::new();
        w.write_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("center,weight\n-2,0\n-1,0\n0,0.25\n"));
    }

    proptest! {
        #[test]
        fn partition_of_unity(t in 0.0f64..1200.0, dilation in 1usize..5, m in 1usize..12) {
            let c = BsnConfig::new(m, dilation, &grid()).unwrap();
            let s: f64 = bsn_memberships(&c, t).unwrap().iter().sum();
            prop_assert!((s - dilation as f64).abs() < 1e-12);
        }

        #[test]
        fn magnitude_non_increasing(a in 0.0f64..std::f64::consts::PI, b in 0.0f64..std::f64::consts::PI) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let d = 18.0;
            prop_assert!(bsn_filter_magnitude(d, 4.0 * hi / d) <= bsn_filter_magnitude(d, 4.0 * lo / d) + 1e-15);
        }
    }
}
