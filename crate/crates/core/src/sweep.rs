//! Independent learning campaigns over a grid of learning settings.
//!
//! Campaigns share nothing but the immutable base scenario, so they run on
//! the rayon pool when the `parallel` feature is enabled. Results come back
//! in input order either way.

use std::path::PathBuf;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;
use crate::harness::{run_learning_in, LearningRecord};
use crate::lffc::{FilterKind, LearningConfig};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub learning: LearningConfig,
    /// Campaign directory; `None` keeps the campaign in memory.
    pub out: Option<PathBuf>,
}

/// Low-pass points over every `(gamma, tau)` pair.
pub fn lowpass_points(gammas: &[f64], taus: &[f64]) -> Vec<SweepPoint> {
    gammas
        .iter()
        .flat_map(|&gamma| {
            taus.iter().map(move |&tau| SweepPoint {
                learning: LearningConfig::new(
                    gamma,
                    FilterKind::LowPass {
                        tau,
                        zero_phase: false,
                    },
                ),
                out: None,
            })
        })
        .collect()
}

/// Gives every point its own subdirectory `point_NNN` under `root`.
pub fn with_output_dirs(points: Vec<SweepPoint>, root: &std::path::Path) -> Vec<SweepPoint> {
    points
        .into_iter()
        .enumerate()
        .map(|(i, p)| SweepPoint {
            out: Some(root.join(format!("point_{i:03}"))),
            ..p
        })
        .collect()
}

fn run_point(base: &ScenarioConfig, point: &SweepPoint, n_iter: usize) -> Result<LearningRecord> {
    let mut scenario = base.clone();
    scenario.learning = point.learning.clone();
    scenario.validate()?;
    run_learning_in(&scenario, n_iter, point.out.as_deref())
}

pub fn run_sweep(
    base: &ScenarioConfig,
    points: &[SweepPoint],
    n_iter: usize,
    exec: Execution,
) -> Vec<Result<LearningRecord>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => points
            .par_iter()
            .map(|p| run_point(base, p, n_iter))
            .collect(),
        _ => points.iter().map(|p| run_point(base, p, n_iter)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let base = ScenarioConfig::default();
        let points = lowpass_points(&[0.0, 0.05, 0.1], &[0.0, 5.0]);
        assert_eq!(points.len(), 6);
        let seq = run_sweep(&base, &points, 3, Execution::Sequential);
        let par = run_sweep(&base, &points, 3, Execution::Parallel);
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
        assert!(seq[0]
            .as_ref()
            .unwrap()
            .j_values()
            .iter()
            .all(|&j| j == 1.0));
    }

    #[test]
    fn invalid_point_fails_alone() {
        let base = ScenarioConfig::default();
        let mut points = lowpass_points(&[0.1], &[0.0, 2.0]);
        points[1].learning.filter = FilterKind::LowPass {
            tau: -1.0,
            zero_phase: false,
        };
        let out = run_sweep(&base, &points, 2, Execution::Parallel);
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
    }

    #[test]
    fn disjoint_directories() {
        let dir = tempfile::tempdir().unwrap();
        let points = with_output_dirs(lowpass_points(&[0.05, 0.1], &[0.0]), dir.path());
        let out = run_sweep(&ScenarioConfig::default(), &points, 2, Execution::Parallel);
        assert!(out.iter().all(|r| r.is_ok()));
        assert!(dir.path().join("point_000/summary.csv").exists());
        assert!(dir.path().join("point_001/iter_002/memory.csv").exists());
    }
}
