//! Scenario configuration: a TOML document with one section per subsystem.
//! Every key has a default, so an empty file describes the default scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{AntiWindup, Decoupler, FeedbackController, Pairing, PidGains};
use crate::lffc::LearningConfig;
use crate::metrics::{IndexWeights, RitaeEvent};
use crate::plant::{Limits, PlantConfig};
use crate::signals::{Grid, StepProfile, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub tf: f64,
    pub h: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 1200.0,
            h: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub t_sec_evap_out: StepProfile,
    pub tsh: StepProfile,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            t_sec_evap_out: StepProfile::new(vec![(0.0, -22.0), (100.0, -24.0), (600.0, -23.0)])
                .expect("static profile"),
            tsh: StepProfile::new(vec![(0.0, 14.0), (400.0, 16.0)]).expect("static profile"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub t_e_sec_in: StepProfile,
    pub t_c_sec_in: StepProfile,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            t_e_sec_in: StepProfile::new(vec![(0.0, -20.0), (800.0, -17.0)])
                .expect("static profile"),
            t_c_sec_in: StepProfile::new(vec![(0.0, 30.0), (1000.0, 25.0)])
                .expect("static profile"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Decentralized,
    Multivariable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub kp: f64,
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    #[serde(default = "default_nf")]
    pub nf: f64,
    /// Defaults to the operating point input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bias: Option<f64>,
    /// Defaults to the plant limits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
    #[serde(default)]
    pub anti_windup: AntiWindup,
}

fn default_nf() -> f64 {
    10.0
}

impl LoopSpec {
    pub fn pi(kp: f64, ki: f64) -> Self {
        Self {
            kp,
            ki,
            kd: 0.0,
            nf: default_nf(),
            u_bias: None,
            limits: None,
            anti_windup: AntiWindup::default(),
        }
    }

    fn resolve(&self, bias: f64, limits: Limits) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            nf: self.nf,
            u_bias: self.u_bias.unwrap_or(bias),
            limits: self.limits.unwrap_or(limits),
            anti_windup: self.anti_windup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecouplerName {
    /// Inverse of the static plant gain, rescaled to keep the diagonal gains.
    Static,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecouplerSpec {
    Named(DecouplerName),
    Matrix([[f64; 2]; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub pairing: Pairing,
    /// Loop driving the compressor speed N.
    pub loop_n: LoopSpec,
    /// Loop driving the valve opening A_v.
    pub loop_av: LoopSpec,
    /// Used by the multivariable arrangement only.
    pub decoupler: DecouplerSpec,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Decentralized,
            pairing: Pairing::Standard,
            loop_n: LoopSpec::pi(-1.0, -0.02),
            loop_av: LoopSpec::pi(-20.0, -0.5),
            decoupler: DecouplerSpec::Named(DecouplerName::Static),
        }
    }
}

impl ControllerSpec {
    pub fn resolve(&self, plant: &PlantConfig) -> Result<FeedbackController> {
        let specs = [&self.loop_n, &self.loop_av];
        let controller = match self.kind {
            ControllerKind::Decentralized => FeedbackController::Decentralized {
                loops: [0, 1].map(|i| specs[i].resolve(plant.op_u[i], plant.limits[i])),
                pairing: self.pairing,
            },
            ControllerKind::Multivariable => {
                let decoupler = match &self.decoupler {
                    DecouplerSpec::Named(DecouplerName::Static) => {
                        Decoupler::static_inverse(plant.static_gain())?
                    }
                    DecouplerSpec::Named(DecouplerName::Identity) => Decoupler::identity(),
                    DecouplerSpec::Matrix(m) => Decoupler::new(*m)?,
                };
                // biases chosen so that D * bias lands on the operating point
                let bias = decoupler.solve(plant.op_u);
                let wide = Limits::new(f64::MIN, f64::MAX);
                FeedbackController::Multivariable {
                    loops: [0, 1].map(|i| specs[i].resolve(bias[i], wide)),
                    pairing: self.pairing,
                    decoupler,
                    limits: plant.limits,
                }
            }
        };
        controller.validate()?;
        Ok(controller)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSpec {
    pub events: [RitaeEvent; 4],
    pub weights: IndexWeights,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        // one window per major event, 5 % of the episode each
        Self {
            events: [
                RitaeEvent::new(1, 100.0, 60.0),
                RitaeEvent::new(2, 400.0, 60.0),
                RitaeEvent::new(1, 800.0, 60.0),
                RitaeEvent::new(2, 1000.0, 60.0),
            ],
            weights: IndexWeights::equal(),
        }
    }
}

/// On-disk form of a scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub grid: GridSpec,
    pub references: ReferenceSpec,
    pub disturbances: DisturbanceSpec,
    pub plant: PlantConfig,
    pub controller: ControllerSpec,
    pub learning: LearningConfig,
    pub metrics: MetricsSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("<scenario>", e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Validated scenario ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: Grid,
    /// `[T_sec_evap_out, TSH]` setpoints.
    pub ref_profiles: [StepProfile; 2],
    /// `[T_e,sec,in, T_c,sec,in]`.
    pub dist_profiles: [StepProfile; 2],
    pub plant: PlantConfig,
    pub controller: FeedbackController,
    pub learning: LearningConfig,
    pub events: [RitaeEvent; 4],
    pub weights: IndexWeights,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_spec(&ScenarioSpec::default()).expect("default scenario is valid")
    }
}

impl ScenarioConfig {
    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        let g = &spec.grid;
        let grid = Grid::new(g.t0, g.tf, g.h)?;
        spec.plant.validate()?;
        spec.learning.validate()?;
        let controller = spec.controller.resolve(&spec.plant)?;
        let cfg = Self {
            grid,
            ref_profiles: [
                spec.references.t_sec_evap_out.clone(),
                spec.references.tsh.clone(),
            ],
            dist_profiles: [
                spec.disturbances.t_e_sec_in.clone(),
                spec.disturbances.t_c_sec_in.clone(),
            ],
            plant: spec.plant.clone(),
            controller,
            learning: spec.learning.clone(),
            events: spec.metrics.events,
            weights: spec.metrics.weights,
            output_dir: spec.output_dir.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_spec(&ScenarioSpec::from_toml_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec =
            ScenarioSpec::from_toml_str(&text).map_err(|e| crate::signals::relabel(e, path))?;
        Self::from_spec(&spec)
    }

    /// Checks the cross-section invariants (events inside the grid, dead
    /// times compatible with the step).
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate()?;
        self.learning.validate()?;
        crate::plant::PlantState::reset(&self.plant, &self.grid)?;
        for ev in &self.events {
            ev.validate()?;
            if ev.t_c < self.grid.t0() - 1e-9 || ev.t_c + ev.t_s > self.grid.tf() + 1e-9 {
                return Err(Error::WindowOutsideGrid {
                    start: ev.t_c,
                    end: ev.t_c + ev.t_s,
                    t0: self.grid.t0(),
                    tf: self.grid.tf(),
                });
            }
        }
        Ok(())
    }

    pub fn references(&self) -> Trajectory {
        Trajectory::from_fn(self.grid, 2, |c, t| self.ref_profiles[c].value_at(t))
    }

    pub fn disturbances(&self) -> Trajectory {
        Trajectory::from_fn(self.grid, 2, |c, t| self.dist_profiles[c].value_at(t))
    }
}
