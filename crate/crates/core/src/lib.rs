//! Learning feedforward control (LFFC) layered on saturating PID feedback,
//! simulated against a surrogate two-input/two-output refrigeration-cycle
//! process and scored with relative benchmark indices.
//!
//! The pieces, bottom-up:
//!
//! - [`signals`]: sampling grids, trajectories and step profiles.
//! - [`plant`]: the surrogate process (FOPTD channels, dead time, saturation).
//! - [`feedback`]: PID loops with conditional integration.
//! - [`bsn`]: the dilated B-spline network filter.
//! - [`lffc`]: the memory bank and the trial-to-trial update.
//! - [`metrics`]: IAE/ITAE/IAVU, relative indices and the combined index.
//! - [`harness`]: episodes and learning campaigns; [`sweep`] runs many.
//! - [`plot`]: static SVG charts of a campaign.

pub mod bsn;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod lffc;
pub mod metrics;
pub mod plant;
pub mod plot;
pub mod scenario;
pub mod signals;
pub mod sweep;

pub use error::{Error, Result};
pub use harness::{
    compare, resume_learning, run_learning, run_learning_in, simulate_episode,
    simulate_feedback_only, EpisodeResult, LearningRecord,
};
pub use lffc::{FilterKind, LearningConfig, MemoryBank};
pub use metrics::{IndexReport, IndexWeights, RitaeEvent};
pub use scenario::{ScenarioConfig, ScenarioSpec};
pub use signals::{Grid, StepProfile, Trajectory};
