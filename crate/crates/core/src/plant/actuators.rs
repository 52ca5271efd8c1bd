use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use super::GeneralizedForce;
use crate::GRAVITY;

/// Normalized actuator commands.
///
/// `thruster[0]` drives the main aft thruster, `thruster[1]` the
/// differential side pair (port `+c`, starboard `-c`) and `thruster[2]` the
/// vertical bow thruster. The movable mass and buoyancy engine are
/// feed-forward channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub thruster: [f64; 3],
    /// Movable mass position along body x, m.
    pub movable_mass_pos: f64,
    /// Extra buoyancy, N (positive lifts the vehicle).
    pub buoyancy_delta: f64,
}

impl ActuatorCommand {
    pub fn saturated(mut self, params: &ActuatorParams) -> Self {
        for c in &mut self.thruster {
            *c = c.clamp(-1.0, 1.0);
        }
        self.movable_mass_pos = self
            .movable_mass_pos
            .clamp(-params.movable_mass_travel, params.movable_mass_travel);
        self.buoyancy_delta = self
            .buoyancy_delta
            .clamp(-params.buoyancy_range, params.buoyancy_range);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorParams {
    /// Main thruster force at full command, N.
    pub main_max_thrust: f64,
    /// Force of one side thruster at full command, N.
    pub pair_max_thrust: f64,
    /// Lateral offset of each side thruster from the centerline, m.
    pub pair_half_spacing: f64,
    /// Vertical thruster force at full command, N (positive pushes down).
    pub vertical_max_thrust: f64,
    /// Longitudinal position of the vertical thruster, m.
    pub vertical_lever: f64,
    pub movable_mass: f64,
    pub movable_mass_travel: f64,
    pub buoyancy_range: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self {
            main_max_thrust: 10.0,
            pair_max_thrust: 10.0,
            pair_half_spacing: 0.1,
            vertical_max_thrust: 8.0,
            vertical_lever: 0.3,
            movable_mass: 2.0,
            movable_mass_travel: 0.05,
            buoyancy_range: 5.0,
        }
    }
}

impl ActuatorParams {
    /// Forces of the (port, starboard) side thrusters for a differential
    /// command.
    pub fn pair_forces(&self, differential: f64) -> (f64, f64) {
        let c = differential.clamp(-1.0, 1.0);
        (c * self.pair_max_thrust, -c * self.pair_max_thrust)
    }

    /// Pitch moment from the movable mass at position `x`.
    pub fn movable_mass_moment(&self, x: f64) -> f64 {
        -self.movable_mass * GRAVITY * x
    }

    /// Movable mass position producing pitch moment `m`, clamped to travel.
    pub fn movable_mass_for_moment(&self, m: f64) -> f64 {
        (-m / (self.movable_mass * GRAVITY)).clamp(-self.movable_mass_travel, self.movable_mass_travel)
    }
}

/// Maps commands to the body-frame generalized force. Sway force is always
/// zero.
pub fn actuator_map(cmd: &ActuatorCommand, params: &ActuatorParams) -> GeneralizedForce {
    let cmd = cmd.saturated(params);
    let x_main = cmd.thruster[0] * params.main_max_thrust;
    let (port, stbd) = params.pair_forces(cmd.thruster[1]);
    let s = params.pair_half_spacing;
    // N = x F_y - y F_x with port at y = -s, starboard at y = +s.
    let n = s * port - s * stbd;
    let z_vert = cmd.thruster[2] * params.vertical_max_thrust;
    let m_vert = -params.vertical_lever * z_vert;
    let z = z_vert - cmd.buoyancy_delta;
    let m = m_vert + params.movable_mass_moment(cmd.movable_mass_pos);
    GeneralizedForce {
        tau: Vector6::new(x_main + port + stbd, 0.0, z, 0.0, m, n),
    }
}
