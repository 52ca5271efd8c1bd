use serde::{Deserialize, Serialize};

use super::trajectory::{build_trajectory, polyline_length, TrajectoryKind, TrajectoryParams};
use super::HarnessError;
use crate::gnc::{ControlParams, GuidanceParams, Waypoint};
use crate::nav::{FilterKind, FilterOptions, NoiseConfig, TuningVector};
use crate::plant::{ActuatorParams, HydroParams, MismatchBounds, WaterCurrentParams};
use crate::sensors::{DepthParams, ImuParams, MagParams, OutageWindow, UsblParams};

/// Which state the guidance and control loop is fed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Ground truth; the filter runs passively.
    Ol,
    /// Filter estimate.
    Cl,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Ol => "ol",
            Mode::Cl => "cl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub sensor: u64,
    pub current: u64,
    pub mismatch: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { sensor: 1, current: 2, mismatch: 3 }
    }
}

impl Seeds {
    /// Three independent seeds derived from one.
    pub fn from_base(seed: u64) -> Self {
        use crate::rng::derive;
        Self {
            sensor: derive(seed, 0x73656e),
            current: derive(seed, 0x637572),
            mismatch: derive(seed, 0x6d6973),
        }
    }
}

/// USBL outage placed relative to the nominal path time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutageSpec {
    pub duration: f64,
    /// Start as a fraction of the nominal path time; ignored when `start` is set.
    pub start_fraction: f64,
    pub start: Option<f64>,
}

impl Default for OutageSpec {
    fn default() -> Self {
        Self {
            duration: 30.0,
            start_fraction: 0.4,
            start: None,
        }
    }
}

impl OutageSpec {
    pub fn with_duration(duration: f64) -> Self {
        Self { duration, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub trajectory: TrajectoryKind,
    pub trajectory_params: TrajectoryParams,
    pub start: [f64; 3],
    pub start_heading: f64,
    pub seeds: Seeds,
    pub outages: Vec<OutageSpec>,
    pub filter: FilterKind,
    pub mode: Mode,
    pub tuning: TuningVector,
    /// Simulated time limit, s; defaults to twice the nominal path time.
    pub duration_cap: Option<f64>,
    pub goal_radius: f64,
    /// Base simulation rate, Hz.
    pub base_rate_hz: f64,
    pub depth_rate_hz: f64,
    pub model_mismatch: bool,
    pub mismatch: MismatchBounds,
    pub plant: HydroParams,
    pub actuators: ActuatorParams,
    pub current: WaterCurrentParams,
    pub imu: ImuParams,
    pub mag: MagParams,
    pub depth: DepthParams,
    pub usbl: UsblParams,
    pub noise: NoiseConfig,
    pub filter_options: FilterOptions,
    pub guidance: GuidanceParams,
    pub control: ControlParams,
    /// Keep the 10 Hz time series in the episode output.
    pub record: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trajectory: TrajectoryKind::Zigzag,
            trajectory_params: TrajectoryParams::default(),
            start: [0.0, 0.0, 10.0],
            start_heading: 0.0,
            seeds: Seeds::default(),
            outages: Vec::new(),
            filter: FilterKind::Sins,
            mode: Mode::Cl,
            tuning: TuningVector::nominal(),
            duration_cap: None,
            goal_radius: 10.0,
            base_rate_hz: 100.0,
            depth_rate_hz: 2.0,
            model_mismatch: true,
            mismatch: MismatchBounds::default(),
            plant: HydroParams::nominal(),
            actuators: ActuatorParams::default(),
            current: WaterCurrentParams::default(),
            imu: ImuParams::default(),
            mag: MagParams::default(),
            depth: DepthParams::default(),
            usbl: UsblParams::default(),
            noise: NoiseConfig::default(),
            filter_options: FilterOptions::default(),
            guidance: GuidanceParams::default(),
            control: ControlParams::default(),
            record: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Zero sensor noise, still water and no model mismatch.
    pub fn noise_free(mut self) -> Self {
        self.imu = ImuParams::noiseless();
        self.mag = MagParams::noiseless();
        self.depth = DepthParams { noise_std: 0.0, quantization_step: 0.0 };
        self.usbl = UsblParams::noiseless();
        self.current = WaterCurrentParams::still();
        self.model_mismatch = false;
        self
    }

    /// Waypoints including the start position.
    pub fn waypoints(&self) -> Vec<Waypoint> {
        build_trajectory(self.trajectory, &self.trajectory_params, self.start, self.control.surge)
    }

    pub fn nominal_time(&self) -> f64 {
        polyline_length(&self.waypoints()) / self.control.surge
    }

    pub fn duration(&self) -> f64 {
        self.duration_cap.unwrap_or(2.0 * self.nominal_time())
    }

    pub fn outage_windows(&self) -> Vec<OutageWindow> {
        let t_nom = self.nominal_time();
        self.outages
            .iter()
            .map(|o| OutageWindow {
                start: o.start.unwrap_or(o.start_fraction * t_nom),
                duration: o.duration,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.base_rate_hz > 0.0) || !(self.control.rate_hz > 0.0) || !(self.control.surge > 0.0) {
            return bad("rates and surge must be positive");
        }
        for (name, r) in [("control", self.control.rate_hz), ("depth", self.depth_rate_hz), ("usbl", self.usbl.rate_hz)] {
            let div = self.base_rate_hz / r;
            if !(r > 0.0) || (div - div.round()).abs() > 1e-9 {
                return Err(HarnessError::Config(format!("{name} rate must divide the base rate")));
            }
        }
        if self.waypoints().len() < 2 {
            return bad("trajectory needs at least one waypoint after the start");
        }
        let total = self.duration();
        if !(total > 0.0) {
            return bad("duration must be positive");
        }
        for w in self.outage_windows() {
            if w.start < 0.0 || w.duration < 0.0 || w.start + w.duration > total {
                return bad("outage window outside the episode");
            }
        }
        self.noise.validate().map_err(HarnessError::Config)?;
        if self.tuning.a.iter().any(|a| !(TuningVector::LOWER..=TuningVector::UPPER).contains(a)) {
            return bad("tuning exponents outside [-3, 3]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = ScenarioConfig::default();
        c.outages.push(OutageSpec::with_duration(10.0));
        c.tuning.a[2] = 1.5;
        let text = c.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = ScenarioConfig::from_toml("trajectory = \"spiral\"\nfilter = \"hmm\"\nmode = \"ol\"\n").unwrap();
        assert_eq!(c.trajectory, TrajectoryKind::Spiral);
        assert_eq!(c.filter, FilterKind::Hmm);
        assert_eq!(c.start, [0.0, 0.0, 10.0]);
    }

    #[test]
    fn outage_must_fit() {
        let mut c = ScenarioConfig { duration_cap: Some(100.0), ..Default::default() };
        c.outages.push(OutageSpec { duration: 30.0, start: Some(80.0), ..Default::default() });
        assert!(c.validate().is_err());
        c.outages[0].start = Some(50.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn default_outage_placement() {
        let mut c = ScenarioConfig::default();
        c.outages.push(OutageSpec::with_duration(30.0));
        let w = c.outage_windows()[0];
        assert!((w.start - 0.4 * 480.0).abs() < 1e-9);
        assert_eq!(c.duration(), 960.0);
    }
}
