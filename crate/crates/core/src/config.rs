//! Experiment configuration. One JSON document with unit-suffixed field
//! names. Every section has defaults reproducing the loiter experiment.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::attitude::AttitudeRefModel;
use crate::control::{Architecture, GainSet};
use crate::error::{Error, Result};
use crate::errsys::ErrorSystemSpec;
use crate::flatness::DragModel;
use crate::plant::{Fidelity, Injection, PlantParams, RigidBodySpec, WindModel, WindSpec};
use crate::reference::{Loiter, LoiterSpec, Trajectory};
use crate::sim::ClosedLoop;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub architecture: Architecture,
    /// Table gains of the architecture when absent.
    #[serde(default)]
    pub gains: Option<GainSet>,
}

impl ControllerConfig {
    pub fn preset(architecture: Architecture) -> Self {
        Self {
            architecture,
            gains: None,
        }
    }

    pub fn gains(&self) -> GainSet {
        self.gains.unwrap_or_else(|| GainSet::preset(self.architecture))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub delta_max_rad: f64,
    pub f_max_mps2: f64,
    pub w_max_mps2: f64,
    pub psid_max_rad_s: f64,
    pub psidd_max_rad_s2: f64,
    pub planar: bool,
    pub dbar_override_mps2: Option<f64>,
    pub two_vertex_cgh: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let s = ErrorSystemSpec::new(Architecture::Cg);
        Self {
            delta_max_rad: s.delta_max_rad,
            f_max_mps2: s.f_max_mps2,
            w_max_mps2: s.w_max_mps2,
            psid_max_rad_s: s.psid_max_rad_s,
            psidd_max_rad_s2: s.psidd_max_rad_s2,
            planar: false,
            dbar_override_mps2: None,
            two_vertex_cgh: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub fidelity: Fidelity,
    /// Cone half-angle of the fidelity-A tilt injection; `delta_max_rad`
    /// of the bounds when absent.
    pub injection_amplitude_rad: Option<f64>,
    pub injection_frequency_hz: f64,
    pub rigid_body: RigidBodySpec,
    pub initial_offset_m: [f64; 3],
    /// Spacing of recorded samples (rounded to a multiple of `dt_s`).
    pub output_interval_s: f64,
    /// Integrate the shadow error-system state alongside the plant.
    pub shadow: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 0.002,
            duration_s: 60.0,
            fidelity: Fidelity::A,
            injection_amplitude_rad: None,
            injection_frequency_hz: 0.3,
            rigid_body: RigidBodySpec::default(),
            initial_offset_m: [0.0; 3],
            output_interval_s: 0.01,
            shadow: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Any of `json`, `csv`, `svg`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec!["json".into(), "csv".into(), "svg".into()],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trajectory: LoiterSpec,
    pub wind: WindSpec,
    pub drag: DragModel,
    pub controllers: Vec<ControllerConfig>,
    pub attitude_model: AttitudeRefModel,
    pub bounds: BoundsConfig,
    pub sim: SimConfig,
    pub outputs: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trajectory: LoiterSpec::default(),
            wind: WindSpec::default(),
            drag: DragModel::default(),
            controllers: Architecture::ALL.iter().map(|&a| ControllerConfig::preset(a)).collect(),
            attitude_model: AttitudeRefModel::default(),
            bounds: BoundsConfig::default(),
            sim: SimConfig::default(),
            outputs: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Hard errors for inconsistent values; soft cross-field issues are
    /// returned as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.trajectory.validate()?;
        self.attitude_model.validate()?;
        self.sim.rigid_body.validate()?;
        WindModel::new(&self.wind)?;
        if !(self.sim.dt_s > 0.0) || !(self.sim.duration_s > 0.0) || !(self.sim.output_interval_s > 0.0) {
            return Err(Error::InvalidParameter(
                "dt, duration and output interval must be positive".into(),
            ));
        }
        if self.sim.duration_s > self.trajectory.total_duration_s {
            return Err(Error::InvalidParameter("simulation longer than the trajectory".into()));
        }
        if self.controllers.is_empty() {
            return Err(Error::InvalidParameter("no controllers configured".into()));
        }
        let mut warnings = Vec::new();
        for c in &self.controllers {
            c.gains().validate(c.architecture)?;
            self.error_spec(c).validate()?;
        }
        let turn = self.trajectory.turn_rate();
        if self.controllers.iter().any(|c| c.architecture == Architecture::Ch)
            && self.bounds.psid_max_rad_s < turn * (1.0 - 1e-12)
        {
            warnings.push(format!(
                "psid_max_rad_s = {} is below the loiter turn rate {turn}; the C-H certificate does not cover this trajectory",
                self.bounds.psid_max_rad_s
            ));
        }
        if self.wind.gust_max_mps2 > self.bounds.w_max_mps2 {
            warnings.push(format!(
                "gust bound {} exceeds the certified w_max {}",
                self.wind.gust_max_mps2, self.bounds.w_max_mps2
            ));
        }
        if self.sim.fidelity == Fidelity::A && self.injection().amplitude_rad > self.bounds.delta_max_rad {
            warnings.push("tilt injection exceeds delta_max; the attitude assumption will be violated".into());
        }
        Ok(warnings)
    }

    pub fn controller(&self, arch: Architecture) -> Option<&ControllerConfig> {
        self.controllers.iter().find(|c| c.architecture == arch)
    }

    /// Configured controllers, optionally restricted to one architecture.
    pub fn selected(&self, only: Option<Architecture>) -> Result<Vec<ControllerConfig>> {
        match only {
            None => Ok(self.controllers.clone()),
            Some(a) => Ok(vec![self
                .controller(a)
                .cloned()
                .unwrap_or_else(|| ControllerConfig::preset(a))]),
        }
    }

    pub fn error_spec(&self, c: &ControllerConfig) -> ErrorSystemSpec {
        let b = &self.bounds;
        ErrorSystemSpec {
            architecture: c.architecture,
            gains: c.gains(),
            drag: self.drag,
            delta_max_rad: b.delta_max_rad,
            f_max_mps2: b.f_max_mps2,
            w_max_mps2: b.w_max_mps2,
            psid_max_rad_s: b.psid_max_rad_s,
            psidd_max_rad_s2: b.psidd_max_rad_s2,
            planar: b.planar,
            dbar_override_mps2: b.dbar_override_mps2,
            two_vertex_cgh: b.two_vertex_cgh,
        }
    }

    pub fn injection(&self) -> Injection {
        Injection {
            amplitude_rad: self.sim.injection_amplitude_rad.unwrap_or(self.bounds.delta_max_rad),
            frequency_hz: self.sim.injection_frequency_hz,
        }
    }

    pub fn trajectory(&self) -> Result<Loiter> {
        Loiter::new(self.trajectory)
    }

    pub fn plant(&self) -> Result<PlantParams> {
        let mut p = PlantParams::new(self.sim.fidelity, self.drag, WindModel::new(&self.wind)?);
        p.attitude_model = self.attitude_model;
        p.injection = if self.sim.fidelity == Fidelity::A {
            self.injection()
        } else {
            Injection::none()
        };
        p.rigid_body = self.sim.rigid_body;
        Ok(p)
    }

    pub fn closed_loop<'a>(&self, trajectory: &'a dyn Trajectory, c: &ControllerConfig) -> Result<ClosedLoop<'a>> {
        Ok(ClosedLoop {
            trajectory,
            architecture: c.architecture,
            gains: c.gains(),
            model_drag: self.drag,
            plant: self.plant()?,
            spec: self.error_spec(c),
            dt: self.sim.dt_s,
            duration: self.sim.duration_s,
            initial_offset: Vector3::from(self.sim.initial_offset_m),
            shadow: self.sim.shadow,
            record_every: ((self.sim.output_interval_s / self.sim.dt_s).round() as usize).max(1),
        })
    }
}
