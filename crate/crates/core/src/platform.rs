//! Rigid-body model of the cant-tilting hexarotor.
//!
//! Six rotors sit on a star of radius `arm_length` in the body xy-plane at
//! azimuths 30°, 90°, …, 330°. Every propeller axis is tilted about its own
//! arm by `(-1)^i · alpha`, so adjacent rotors lean in opposite directions
//! and one collective servo angle reshapes the whole wrench space.
//!
//! World frame is z-up; gravity acts along −z with magnitude `gravity`.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp_so3, orthonormalize, rot_x, rot_z};

pub const ROTOR_COUNT: usize = 6;

/// Lower end of the admissible cant-angle interval (closed).
pub const ALPHA_MIN: f64 = -FRAC_PI_3;
/// Upper end of the admissible cant-angle interval (open).
pub const ALPHA_MAX: f64 = FRAC_PI_3;
/// Gap kept below [`ALPHA_MAX`] when clamping commands.
pub const ALPHA_UPPER_EPS: f64 = 1e-9;

/// Clamps an angle into `[-π/3, π/3 - ε]`.
pub fn clamp_alpha(alpha: f64) -> f64 {
    alpha.clamp(ALPHA_MIN, ALPHA_MAX - ALPHA_UPPER_EPS)
}

pub fn alpha_in_range(alpha: f64) -> bool {
    (ALPHA_MIN..ALPHA_MAX).contains(&alpha)
}

/// Physical constants of the platform. Defaults are the 3.5 kg reference
/// vehicle; [`PlatformParams::contact_vehicle`] gives the heavier airframe
/// used for the wall-inspection task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformParams {
    /// kg
    pub mass: f64,
    /// kg·m², body frame
    pub inertia: Matrix3<f64>,
    /// m
    pub arm_length: f64,
    /// N/Hz²
    pub thrust_coeff: f64,
    /// N·m/Hz²
    pub drag_coeff: f64,
    /// Hz
    pub omega_max: f64,
    /// s
    pub servo_time_constant: f64,
    /// m/s², magnitude
    pub gravity: f64,
    /// N·s/m, body axes
    pub aero_drag_lin: Vector3<f64>,
    /// N·m·s/rad, body axes
    pub aero_drag_ang: Vector3<f64>,
}

impl Default for PlatformParams {
    fn default() -> Self {
        Self {
            mass: 3.5,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.147, 0.155, 0.251)),
            arm_length: 0.385,
            thrust_coeff: 1.5e-3,
            drag_coeff: 4.59e-5,
            omega_max: 108.0,
            servo_time_constant: 5e-3,
            gravity: 9.81,
            aero_drag_lin: Vector3::zeros(),
            aero_drag_ang: Vector3::zeros(),
        }
    }
}

impl PlatformParams {
    pub fn contact_vehicle() -> Self {
        Self {
            mass: 3.8,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.107, 0.103, 0.205)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("platform: {what}")));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.arm_length > 0.0) {
            return bad("arm_length must be positive");
        }
        if !(self.thrust_coeff >= 0.0 && self.drag_coeff >= 0.0) {
            return bad("thrust/drag coefficients must be nonnegative");
        }
        if !(self.omega_max > 0.0) {
            return bad("omega_max must be positive");
        }
        if !(self.servo_time_constant > 0.0) {
            return bad("servo_time_constant must be positive");
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return bad("gravity magnitude must be finite and nonnegative");
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() {
            return bad("inertia must be symmetric");
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        if self
            .aero_drag_lin
            .iter()
            .chain(self.aero_drag_ang.iter())
            .any(|c| !c.is_finite())
        {
            return bad("aerodynamic drag coefficients must be finite");
        }
        Ok(())
    }

    /// Squared spin-rate bound ω̄² [Hz²].
    pub fn u_max(&self) -> f64 {
        self.omega_max * self.omega_max
    }

    /// Thrust of all six rotors perfectly aligned at full speed, 6 c_f ω̄².
    pub fn max_aligned_thrust(&self) -> f64 {
        6.0 * self.thrust_coeff * self.u_max()
    }

    /// Spin-direction signs κ_i = (−1)^i for i = 1..6.
    pub fn kappa(&self) -> [f64; ROTOR_COUNT] {
        std::array::from_fn(|k| spin_sign(k + 1))
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// (−1)^i for a 1-based rotor index.
pub fn spin_sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Arm azimuth of rotor `i` (1-based).
pub fn arm_azimuth(i: usize) -> f64 {
    FRAC_PI_6 + (i as f64 - 1.0) * FRAC_PI_3
}

fn check_rotor(i: usize) -> Result<()> {
    if (1..=ROTOR_COUNT).contains(&i) {
        Ok(())
    } else {
        Err(Error::Contract(format!("rotor index {i} outside 1..=6")))
    }
}

/// Position and orientation of propeller frame `i` in the body frame.
pub fn rotor_geometry(
    i: usize,
    alpha: f64,
    params: &PlatformParams,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    check_rotor(i)?;
    let rz = rot_z(arm_azimuth(i));
    let position = params.arm_length * rz.column(0).into_owned();
    let orientation = rz * rot_x(spin_sign(i) * alpha);
    Ok((position, orientation))
}

/// Spinning axis of rotor `i` in the body frame (third column of its frame).
pub fn rotor_axis(i: usize, alpha: f64) -> Vector3<f64> {
    let theta = arm_azimuth(i);
    let tilt = spin_sign(i) * alpha;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = tilt.sin_cos();
    Vector3::new(st * sa, -ct * sa, ca)
}

/// Thrust and drag torque of a single propeller, expressed in the body frame.
pub fn propeller_wrench(
    i: usize,
    omega: f64,
    alpha: f64,
    params: &PlatformParams,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    check_rotor(i)?;
    if !(0.0..=params.omega_max).contains(&omega) {
        return Err(Error::Saturation {
            rotor: i,
            omega,
            omega_max: params.omega_max,
        });
    }
    let (_, r) = rotor_geometry(i, alpha, params)?;
    let axis = r.column(2).into_owned();
    let w2 = omega * omega;
    Ok((
        params.thrust_coeff * w2 * axis,
        spin_sign(i) * params.drag_coeff * w2 * axis,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyWrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl BodyWrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn from_vector(w: &Vector6<f64>) -> Self {
        Self {
            force: w.fixed_rows::<3>(0).into_owned(),
            torque: w.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|c| c.is_finite())
    }
}

/// Control wrench produced by squared spin rates `u` at cant angle `alpha`.
///
/// Sums each rotor's contribution directly from its frame, independently of
/// the allocation matrices.
pub fn body_wrench(u: &Vector6<f64>, alpha: f64, params: &PlatformParams) -> BodyWrench {
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for i in 1..=ROTOR_COUNT {
        let (p, r) = rotor_geometry(i, alpha, params).expect("rotor index in range");
        let axis = r * Vector3::z();
        let thrust = params.thrust_coeff * u[i - 1] * axis;
        let drag = spin_sign(i) * params.drag_coeff * u[i - 1] * axis;
        force += thrust;
        torque += p.cross(&thrust) + drag;
    }
    BodyWrench { force, torque }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// World position [m].
    pub position: Vector3<f64>,
    /// Body-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// World-frame velocity [m/s].
    pub velocity: Vector3<f64>,
    /// Body-frame angular velocity [rad/s].
    pub angular_velocity: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl RigidBodyState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            rotation: Matrix3::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.rotation.iter())
            .chain(self.velocity.iter())
            .chain(self.angular_velocity.iter())
            .all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Collective cant angle reached by the servos [rad].
    pub alpha: f64,
    /// Last commanded cant angle [rad].
    pub alpha_cmd: f64,
    /// Squared spin rates [Hz²].
    pub u: Vector6<f64>,
}

impl ActuatorState {
    /// Tilt of rotor `i` about its arm, (−1)^i · alpha.
    pub fn rotor_tilt(&self, i: usize) -> f64 {
        spin_sign(i) * self.alpha
    }

    /// Stores `u` clamped to `[0, ω̄²]`.
    pub fn set_inputs(&mut self, u: &Vector6<f64>, params: &PlatformParams) {
        let top = params.u_max();
        self.u = u.map(|x| x.clamp(0.0, top));
    }
}

/// Body-frame disturbances acting next to the control wrench. The
/// interaction torque is neglected by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceWrench {
    pub aero_force: Vector3<f64>,
    pub aero_torque: Vector3<f64>,
    pub interaction_force: Vector3<f64>,
}

/// Linear drag surrogate for the aerodynamic wrench. `alpha` is accepted for
/// interface symmetry; the surrogate does not depend on it.
pub fn aero_wrench(
    state: &RigidBodyState,
    _alpha: f64,
    params: &PlatformParams,
) -> (Vector3<f64>, Vector3<f64>) {
    let body_velocity = state.rotation.transpose() * state.velocity;
    (
        -params.aero_drag_lin.component_mul(&body_velocity),
        -params.aero_drag_ang.component_mul(&state.angular_velocity),
    )
}

/// Exact discretisation of the first-order servo lag, clamped to the
/// admissible interval.
pub fn servo_step(alpha: f64, alpha_cmd: f64, dt: f64, params: &PlatformParams) -> f64 {
    let decay = (-dt / params.servo_time_constant).exp();
    clamp_alpha(alpha_cmd + (alpha - alpha_cmd) * decay)
}

#[derive(Clone, Copy)]
struct Rates {
    velocity: Vector3<f64>,
    acceleration: Vector3<f64>,
    angular_velocity: Vector3<f64>,
    angular_acceleration: Vector3<f64>,
}

fn rates(
    state: &RigidBodyState,
    control: &BodyWrench,
    disturbance: &DisturbanceWrench,
    params: &PlatformParams,
    inertia_inv: &Matrix3<f64>,
) -> Rates {
    let body_force = control.force + disturbance.aero_force + disturbance.interaction_force;
    let acceleration = state.rotation * body_force / params.mass - params.gravity * Vector3::z();
    let w = state.angular_velocity;
    let gyro = w.cross(&(params.inertia * w));
    let angular_acceleration = inertia_inv * (control.torque + disturbance.aero_torque - gyro);
    Rates {
        velocity: state.velocity,
        acceleration,
        angular_velocity: w,
        angular_acceleration,
    }
}

fn advance(state: &RigidBodyState, k: &Rates, h: f64) -> RigidBodyState {
    RigidBodyState {
        position: state.position + h * k.velocity,
        rotation: state.rotation * exp_so3(&(h * k.angular_velocity)),
        velocity: state.velocity + h * k.acceleration,
        angular_velocity: state.angular_velocity + h * k.angular_acceleration,
    }
}

/// One RK4 step with disturbances held constant over the step.
pub fn dynamics_step(
    state: &RigidBodyState,
    actuators: &ActuatorState,
    disturbances: &DisturbanceWrench,
    dt: f64,
    params: &PlatformParams,
) -> Result<RigidBodyState> {
    let control = body_wrench(&actuators.u, actuators.alpha, params);
    integrate(state, &control, dt, params, |_| *disturbances)
}

/// One RK4 step where the disturbance is re-evaluated at every stage, for
/// state-dependent terms such as stiff contact or drag.
pub fn dynamics_step_with<F>(
    state: &RigidBodyState,
    actuators: &ActuatorState,
    dt: f64,
    params: &PlatformParams,
    disturbance: F,
) -> Result<RigidBodyState>
where
    F: FnMut(&RigidBodyState) -> DisturbanceWrench,
{
    let control = body_wrench(&actuators.u, actuators.alpha, params);
    integrate(state, &control, dt, params, disturbance)
}

/// RK4 on (p, v, ω) with the attitude advanced through the exponential map
/// of the stage-averaged body rate, then re-projected onto SO(3).
pub fn integrate<F>(
    state: &RigidBodyState,
    control: &BodyWrench,
    dt: f64,
    params: &PlatformParams,
    mut disturbance: F,
) -> Result<RigidBodyState>
where
    F: FnMut(&RigidBodyState) -> DisturbanceWrench,
{
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }
    let inertia_inv = params
        .inertia
        .try_inverse()
        .ok_or_else(|| Error::Config("inertia is not invertible".into()))?;
    let mut eval = |s: &RigidBodyState| {
        let d = disturbance(s);
        rates(s, control, &d, params, &inertia_inv)
    };

    let k1 = eval(state);
    let k2 = eval(&advance(state, &k1, 0.5 * dt));
    let k3 = eval(&advance(state, &k2, 0.5 * dt));
    let k4 = eval(&advance(state, &k3, dt));

    let blend =
        |f: fn(&Rates) -> Vector3<f64>| (f(&k1) + 2.0 * f(&k2) + 2.0 * f(&k3) + f(&k4)) / 6.0;
    let next = RigidBodyState {
        position: state.position + dt * blend(|k| k.velocity),
        rotation: orthonormalize(
            &(state.rotation * exp_so3(&(dt * blend(|k| k.angular_velocity)))),
        ),
        velocity: state.velocity + dt * blend(|k| k.acceleration),
        angular_velocity: state.angular_velocity + dt * blend(|k| k.angular_acceleration),
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::IntegrationFault { t: f64::NAN })
    }
}
