//! Geometric full-pose controller on SE(3).
//!
//! The plant is feedback-linearised: the drift (gravity, drag, gyroscopic
//! and measured interaction terms) is cancelled and the remaining double
//! integrators are driven by PID virtual inputs.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::vee;
use crate::platform::{aero_wrench, BodyWrench, PlatformParams, RigidBodyState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerRefs {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub angular_acceleration: Vector3<f64>,
}

impl ControllerRefs {
    /// Stationary pose with identity attitude.
    pub fn hover_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            rotation: Matrix3::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            angular_acceleration: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseErrors {
    pub position: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

/// Diagonals of the six gain matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    pub k_pp: Vector3<f64>,
    pub k_pd: Vector3<f64>,
    pub k_pi: Vector3<f64>,
    pub k_op: Vector3<f64>,
    pub k_od: Vector3<f64>,
    pub k_oi: Vector3<f64>,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_pp: Vector3::new(30.0, 30.0, 70.0),
            k_pd: Vector3::new(10.0, 10.0, 10.0),
            k_pi: Vector3::new(30.0, 30.0, 40.0),
            k_op: Vector3::new(20.0, 20.0, 5.0),
            k_od: Vector3::new(10.0, 10.0, 10.0),
            k_oi: Vector3::new(0.1, 0.1, 1.0),
        }
    }
}

impl Gains {
    /// Gains tuned for the heavier wall-contact airframe.
    pub fn contact_task() -> Self {
        Self {
            k_pp: Vector3::new(6.0, 6.0, 15.0),
            k_pd: Vector3::new(10.0, 10.0, 20.0),
            k_pi: Vector3::new(1.0, 1.0, 1.0),
            k_op: Vector3::new(10.0, 10.0, 10.0),
            k_od: Vector3::new(1.0, 2.0, 2.0),
            k_oi: Vector3::new(0.1, 0.01, 0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_pp, self.k_pd, self.k_pi, self.k_op, self.k_od, self.k_oi,
        ];
        if all
            .iter()
            .flat_map(|g| g.iter())
            .all(|&k| k > 0.0 && k.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Config(
                "gains: every diagonal entry must be positive".into(),
            ))
        }
    }
}

/// Anti-windup bounds on the error integrals, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegralClamp {
    /// m·s
    pub position: f64,
    /// rad·s
    pub attitude: f64,
}

impl Default for IntegralClamp {
    fn default() -> Self {
        Self {
            position: 2.0,
            attitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub int_position: Vector3<f64>,
    pub int_attitude: Vector3<f64>,
    last_position_error: Option<Vector3<f64>>,
    last_attitude_error: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerDiagnostics {
    /// Translational drift f_e [m/s²].
    pub drift_force: Vector3<f64>,
    /// Rotational drift τ_e [rad/s²].
    pub drift_torque: Vector3<f64>,
    pub w_p: Vector3<f64>,
    pub w_o: Vector3<f64>,
}

pub fn pose_errors(est: &RigidBodyState, refs: &ControllerRefs) -> PoseErrors {
    let r = &est.rotation;
    let rr = &refs.rotation;
    let e_r = 0.5 * vee(&(rr.transpose() * r - r.transpose() * rr));
    PoseErrors {
        position: est.position - refs.position,
        attitude: e_r,
        velocity: est.velocity - refs.velocity,
        angular_velocity: est.angular_velocity - r.transpose() * rr * refs.angular_velocity,
    }
}

fn clamp3(v: Vector3<f64>, bound: f64) -> Vector3<f64> {
    v.map(|x| x.clamp(-bound, bound))
}

/// PID virtual accelerations. The integral terms use the integral accumulated
/// up to the previous sample; the integrals are then advanced with the
/// trapezoidal rule and clamped.
pub fn virtual_inputs(
    errors: &PoseErrors,
    state: &mut ControllerState,
    gains: &Gains,
    refs: &ControllerRefs,
    dt: f64,
    clamp: &IntegralClamp,
) -> (Vector3<f64>, Vector3<f64>) {
    let w_p = refs.acceleration
        - gains.k_pd.component_mul(&errors.velocity)
        - gains.k_pp.component_mul(&errors.position)
        - gains.k_pi.component_mul(&state.int_position);
    let w_o = refs.angular_acceleration
        - gains.k_od.component_mul(&errors.angular_velocity)
        - gains.k_op.component_mul(&errors.attitude)
        - gains.k_oi.component_mul(&state.int_attitude);

    let prev_p = state.last_position_error.unwrap_or(errors.position);
    let prev_r = state.last_attitude_error.unwrap_or(errors.attitude);
    state.int_position = clamp3(
        state.int_position + 0.5 * dt * (prev_p + errors.position),
        clamp.position,
    );
    state.int_attitude = clamp3(
        state.int_attitude + 0.5 * dt * (prev_r + errors.attitude),
        clamp.attitude,
    );
    state.last_position_error = Some(errors.position);
    state.last_attitude_error = Some(errors.attitude);
    (w_p, w_o)
}

/// Control wrench that turns the plant into p̈ = w_p, ω̇ = w_o.
pub fn desired_wrench(
    w_p: &Vector3<f64>,
    w_o: &Vector3<f64>,
    est: &RigidBodyState,
    alpha: f64,
    f_i_meas: &Vector3<f64>,
    params: &PlatformParams,
) -> BodyWrench {
    desired_wrench_with_diagnostics(w_p, w_o, est, alpha, f_i_meas, params).0
}

fn desired_wrench_with_diagnostics(
    w_p: &Vector3<f64>,
    w_o: &Vector3<f64>,
    est: &RigidBodyState,
    alpha: f64,
    f_i_meas: &Vector3<f64>,
    params: &PlatformParams,
) -> (BodyWrench, ControllerDiagnostics) {
    let (f_a, tau_a) = aero_wrench(est, alpha, params);
    let r = &est.rotation;
    let w = est.angular_velocity;
    let jw = params.inertia * w;

    let drift_force = -params.gravity * Vector3::z() + r * (f_a + f_i_meas) / params.mass;
    let drift_torque = params
        .inertia
        .try_inverse()
        .map(|j_inv| j_inv * (tau_a - w.cross(&jw)))
        .unwrap_or_else(Vector3::zeros);

    let force = params.mass * r.transpose() * (w_p - drift_force);
    let torque = params.inertia * w_o + w.cross(&jw) - tau_a;
    let diag = ControllerDiagnostics {
        drift_force,
        drift_torque,
        w_p: *w_p,
        w_o: *w_o,
    };
    (BodyWrench { force, torque }, diag)
}

/// Full-pose controller with its integrator state.
#[derive(Debug, Clone)]
pub struct PoseController {
    pub gains: Gains,
    pub clamp: IntegralClamp,
    pub state: ControllerState,
}

impl PoseController {
    pub fn new(gains: Gains, clamp: IntegralClamp) -> Self {
        Self {
            gains,
            clamp,
            state: ControllerState::default(),
        }
    }

    /// Errors, virtual inputs and the desired wrench for one control period.
    pub fn step(
        &mut self,
        est: &RigidBodyState,
        refs: &ControllerRefs,
        alpha: f64,
        f_i_meas: &Vector3<f64>,
        params: &PlatformParams,
        dt: f64,
    ) -> Result<(BodyWrench, PoseErrors, ControllerDiagnostics)> {
        if !(dt > 0.0) {
            return Err(Error::Contract(format!(
                "control period must be positive, got {dt}"
            )));
        }
        let errors = pose_errors(est, refs);
        let (w_p, w_o) =
            virtual_inputs(&errors, &mut self.state, &self.gains, refs, dt, &self.clamp);
        let (wrench, diag) =
            desired_wrench_with_diagnostics(&w_p, &w_o, est, alpha, f_i_meas, params);
        if !wrench.is_finite() {
            return Err(Error::Contract(
                "controller produced a non-finite wrench".into(),
            ));
        }
        Ok((wrench, errors, diag))
    }
}

/// Functional form of [`PoseController::step`].
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    est: &RigidBodyState,
    refs: &ControllerRefs,
    state: &ControllerState,
    gains: &Gains,
    clamp: &IntegralClamp,
    alpha: f64,
    f_i_meas: &Vector3<f64>,
    params: &PlatformParams,
    dt: f64,
) -> Result<(BodyWrench, ControllerState, ControllerDiagnostics)> {
    let mut ctrl = PoseController {
        gains: *gains,
        clamp: *clamp,
        state: *state,
    };
    let (wrench, _, diag) = ctrl.step(est, refs, alpha, f_i_meas, params, dt)?;
    Ok((wrench, ctrl.state, diag))
}
