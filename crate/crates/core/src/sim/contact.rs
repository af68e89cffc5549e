//! Penalty contact against a vertical wall x = x_w.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::platform::RigidBodyState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallContact {
    /// Wall plane x coordinate [m].
    pub x_w: f64,
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// Tool tip offset along body x [m].
    pub tool_offset: f64,
}

impl Default for WallContact {
    fn default() -> Self {
        Self {
            x_w: 6.0,
            stiffness: 1e6,
            damping: 1e3,
            tool_offset: 0.5,
        }
    }
}

/// World-frame reaction on the tool tip. Zero without penetration; never
/// pulls the tool towards the wall.
pub fn wall_force(
    tip_pos: &Vector3<f64>,
    tip_vel: &Vector3<f64>,
    wall: &WallContact,
) -> Vector3<f64> {
    let depth = tip_pos.x - wall.x_w;
    if depth <= 0.0 {
        return Vector3::zeros();
    }
    let push = wall.stiffness * depth + wall.damping * tip_vel.x;
    Vector3::new(-push.max(0.0), 0.0, 0.0)
}

impl WallContact {
    /// Tip position and velocity in the world frame.
    pub fn tip_kinematics(&self, state: &RigidBodyState) -> (Vector3<f64>, Vector3<f64>) {
        let arm = Vector3::new(self.tool_offset, 0.0, 0.0);
        let pos = state.position + state.rotation * arm;
        let vel = state.velocity + state.rotation * state.angular_velocity.cross(&arm);
        (pos, vel)
    }

    /// Reaction expressed in the body frame, applied at the CoM.
    pub fn body_force(&self, state: &RigidBodyState) -> Vector3<f64> {
        let (pos, vel) = self.tip_kinematics(state);
        state.rotation.transpose() * wall_force(&pos, &vel, self)
    }
}
