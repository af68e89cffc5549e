//! Closed-loop simulation: 1 kHz physics, control/selection/allocation at
//! the control rate with zero-order hold on the rotor inputs.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::contact::{wall_force, WallContact};
use super::kpi::{actuation_indices, compute_kpis, KpiReport};
use super::profile::ForceProfile;
use super::reference::Trajectory;
use super::scenario::{AllocationAlpha, AllocatorKind, ScenarioConfig, Task};
use super::sensors::{ForceSensor, Mocap};
use super::trace::{Trace, TraceRow};
use super::wall::{ContactWindow, WallScript};
use crate::allocation::{allocate_or_fallback, build_matrices};
use crate::baseline::BaselineAllocator;
use crate::controller::{pose_errors, ControllerRefs, PoseController};
use crate::error::{Error, Result};
use crate::math::to_quaternion;
use crate::platform::{
    aero_wrench, clamp_alpha, dynamics_step_with, servo_step, ActuatorState, BodyWrench,
    DisturbanceWrench, RigidBodyState,
};
use crate::polytope::PolytopeLut;
use crate::selector::{CantSelector, SelectionStatus};

/// Per-run random stream: the master seed picks the key, the run index the
/// stream, so runs never share draws.
pub fn run_rng(master_seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Trace,
    /// Contact windows of a wall task; empty otherwise.
    pub windows: Vec<ContactWindow>,
    pub kpi_start: f64,
}

impl SimOutput {
    /// KPIs over the rows at or after `kpi_start`.
    pub fn kpis(&self) -> Result<KpiReport> {
        compute_kpis(self.trace.since(self.kpi_start))
    }
}

enum Interaction<'a> {
    Free,
    Profile(ForceProfile),
    Wall(&'a WallContact),
}

impl Interaction<'_> {
    fn world_force(&self, t: f64, s: &RigidBodyState) -> Vector3<f64> {
        match self {
            Self::Free => Vector3::zeros(),
            Self::Profile(p) => p.eval(t),
            Self::Wall(w) => {
                let (pos, vel) = w.tip_kinematics(s);
                wall_force(&pos, &vel, w)
            }
        }
    }
}

enum Reference {
    Fixed(Trajectory),
    Wall(Box<WallScript>),
}

impl Reference {
    fn eval(&self, t: f64) -> ControllerRefs {
        match self {
            Self::Fixed(tr) => tr.eval(t),
            Self::Wall(s) => s.eval(t),
        }
    }
}

enum Scheme {
    Proposed(CantSelector),
    Baseline(BaselineAllocator),
}

struct Allocation {
    alpha_cmd: f64,
    u: Vector6<f64>,
    saturated: bool,
    status: Option<SelectionStatus>,
}

impl Scheme {
    fn allocate(
        &self,
        wrench: &BodyWrench,
        alpha_prev: f64,
        alpha_actual: f64,
        mode: AllocationAlpha,
        cfg: &ScenarioConfig,
    ) -> Result<Allocation> {
        let p = &cfg.platform;
        match self {
            Self::Proposed(sel) => {
                let out = sel.select(&wrench.force, alpha_prev);
                let alpha_alloc = match mode {
                    AllocationAlpha::Commanded => out.alpha_star,
                    AllocationAlpha::Actual => alpha_actual,
                };
                let input = allocate_or_fallback(&build_matrices(alpha_alloc, p), wrench, p)?;
                Ok(Allocation {
                    alpha_cmd: out.alpha_star,
                    u: input.u,
                    saturated: input.saturated,
                    status: Some(out.status),
                })
            }
            Self::Baseline(b) => {
                let out = b.allocate(wrench, alpha_prev)?;
                let top = p.u_max();
                let saturated = out.u.iter().any(|&x| x <= 0.0 || x >= top);
                Ok(Allocation {
                    alpha_cmd: out.alpha_star,
                    u: out.u,
                    saturated,
                    status: None,
                })
            }
        }
    }
}

/// Runs a scenario with its own seed, building the LUT from the config.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimOutput> {
    let lut = Arc::new(PolytopeLut::build(
        cfg.lut_step_deg.to_radians(),
        &cfg.platform,
    )?);
    simulate_with_lut(cfg, lut)
}

pub fn simulate_with_lut(cfg: &ScenarioConfig, lut: Arc<PolytopeLut>) -> Result<SimOutput> {
    let mut rng = run_rng(cfg.seed, 0);
    run_scenario(cfg, lut, None, &mut rng)
}

/// Core loop. `profile` overrides the task's force profile; `rng` feeds all
/// sensor noise.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    lut: Arc<PolytopeLut>,
    profile: Option<ForceProfile>,
    rng: &mut ChaCha8Rng,
) -> Result<SimOutput> {
    cfg.validate()?;
    let params = &cfg.platform;
    let physics_dt = cfg.physics_dt();
    let control_dt = cfg.control_dt();
    let decimation = cfg.decimation();
    let steps = cfg.physics_steps();
    if steps == 0 {
        return Err(Error::EmptyTrace);
    }

    let takeoff = || Trajectory::takeoff(cfg.start_position, cfg.hover_position, cfg.takeoff_time);
    let (mut reference, interaction) = match &cfg.task {
        Task::Hover => (
            Reference::Fixed(takeoff()),
            profile.map_or(Interaction::Free, Interaction::Profile),
        ),
        Task::ForceProfile(spec) => (
            Reference::Fixed(takeoff()),
            Interaction::Profile(match profile {
                Some(p) => p,
                None => spec.build()?,
            }),
        ),
        Task::Wall(task) => (
            Reference::Wall(Box::new(WallScript::new(task, cfg.start_position))),
            Interaction::Wall(&task.wall),
        ),
    };

    let scheme = match cfg.allocator {
        AllocatorKind::Proposed => Scheme::Proposed(CantSelector::new(cfg.selector, lut)?),
        AllocatorKind::Baseline => Scheme::Baseline(BaselineAllocator::new(cfg.baseline, params)?),
    };
    let mut controller = PoseController::new(cfg.gains, cfg.integral_clamp);
    let mut mocap = Mocap::new(cfg.sensors, physics_dt);
    let mut force_sensor = ForceSensor::new(cfg.sensors, physics_dt);

    let mut state = RigidBodyState::at_rest(cfg.start_position);
    let mut act = ActuatorState::default();
    let mut alpha_prev = 0.0;
    let mut infeasible = 0usize;
    let mut rows = Vec::with_capacity(steps / decimation + 1);

    for n in 0..steps {
        let t = n as f64 * physics_dt;
        let f_world = interaction.world_force(t, &state);
        let f_body = state.rotation.transpose() * f_world;
        let est = mocap.update(&state, rng);
        let f_meas = force_sensor.update(&f_body, rng);

        if n % decimation == 0 {
            if let Reference::Wall(script) = &mut reference {
                if script.finished(t) {
                    break;
                }
                script.observe(t, f_meas.x);
            }
            let refs = reference.eval(t);
            let (wrench, _, _) =
                controller.step(&est, &refs, act.alpha, &f_meas, params, control_dt)?;
            let clock = Instant::now();
            let alloc =
                scheme.allocate(&wrench, alpha_prev, act.alpha, cfg.allocation_alpha, cfg)?;
            let t_alloc_ms = clock.elapsed().as_secs_f64() * 1e3;
            alpha_prev = alloc.alpha_cmd;
            act.alpha_cmd = clamp_alpha(alloc.alpha_cmd);
            act.set_inputs(&alloc.u, params);

            let truth = pose_errors(&state, &refs);
            let (mei, fei) = actuation_indices(&act.u, act.alpha, params);
            rows.push(TraceRow {
                t,
                position: state.position,
                quaternion: to_quaternion(&state.rotation),
                e_p: truth.position,
                e_r: truth.attitude,
                alpha: act.alpha,
                alpha_cmd: act.alpha_cmd,
                u: act.u,
                f_i: f_world,
                f_i_meas: f_meas,
                wrench_force: wrench.force,
                wrench_torque: wrench.torque,
                saturated: alloc.saturated,
                status: alloc.status,
                mei,
                fei,
                t_alloc_ms,
            });

            if alloc.status == Some(SelectionStatus::Infeasible) {
                infeasible += 1;
                if let Some(limit) = cfg.max_infeasible {
                    if infeasible > limit {
                        return Err(Error::InfeasibleAbort {
                            count: infeasible,
                            limit,
                        });
                    }
                }
            }
            if let Some(limit) = cfg.abort_error {
                let e = truth.position.norm();
                if e > limit {
                    return Err(Error::StabilityLost { t, error_norm: e });
                }
            }
        }

        act.alpha = servo_step(act.alpha, act.alpha_cmd, physics_dt, params);
        state = dynamics_step_with(&state, &act, physics_dt, params, |s| {
            let (aero_force, aero_torque) = aero_wrench(s, act.alpha, params);
            DisturbanceWrench {
                aero_force,
                aero_torque,
                interaction_force: s.rotation.transpose() * interaction.world_force(t, s),
            }
        })
        .map_err(|e| match e {
            Error::IntegrationFault { .. } => Error::IntegrationFault { t },
            other => other,
        })?;
    }

    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let windows = match &reference {
        Reference::Wall(script) => script.windows().to_vec(),
        Reference::Fixed(_) => Vec::new(),
    };
    Ok(SimOutput {
        trace: Trace { rows },
        windows,
        kpi_start: cfg.kpi_start,
    })
}

/// Per-window contact summary of a wall task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSummary {
    pub window: ContactWindow,
    pub steps: usize,
    /// Control steps in the window with a strictly negative world-x force.
    pub pushing_steps: usize,
    /// Most negative and least negative world-x force [N].
    pub min_force_x: f64,
    pub max_force_x: f64,
}

impl ContactSummary {
    /// Confirmed, fully simulated and pushing on every control step.
    pub fn sustained(&self) -> bool {
        self.window.confirmed && self.steps > 0 && self.pushing_steps == self.steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallOutcome {
    pub output: SimOutput,
    pub contacts: Vec<ContactSummary>,
    pub kpis: KpiReport,
}

impl WallOutcome {
    /// Every scripted contact held with a sustained push.
    pub fn all_contacts_sustained(&self, expected: usize) -> bool {
        self.contacts.len() == expected && self.contacts.iter().all(ContactSummary::sustained)
    }
}

/// Runs a wall scenario and summarises each pressing window.
pub fn wall_task(cfg: &ScenarioConfig, lut: Arc<PolytopeLut>) -> Result<WallOutcome> {
    if !matches!(cfg.task, Task::Wall(_)) {
        return Err(Error::Config("wall_task needs a wall scenario".into()));
    }
    let output = simulate_with_lut(cfg, lut)?;
    let contacts = output
        .windows
        .iter()
        .map(|w| {
            let rows: Vec<_> = output
                .trace
                .rows
                .iter()
                .filter(|r| r.t >= w.start && r.t < w.end)
                .collect();
            ContactSummary {
                window: *w,
                steps: rows.len(),
                pushing_steps: rows.iter().filter(|r| r.f_i.x < 0.0).count(),
                min_force_x: rows.iter().map(|r| r.f_i.x).fold(f64::INFINITY, f64::min),
                max_force_x: rows
                    .iter()
                    .map(|r| r.f_i.x)
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let kpis = output.kpis()?;
    Ok(WallOutcome {
        output,
        contacts,
        kpis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::PlatformParams;
    use crate::sim::sensors::SensorModels;

    fn lut(params: &PlatformParams) -> Arc<PolytopeLut> {
        Arc::new(PolytopeLut::build(1f64.to_radians(), params).unwrap())
    }

    #[test]
    fn noise_free_hover_settles_within_a_centimetre() {
        let cfg = ScenarioConfig::hover();
        let out = simulate_with_lut(&cfg, lut(&cfg.platform)).unwrap();
        let late = out.trace.since(20.0);
        assert!(!late.is_empty());
        assert!(late.iter().all(|r| r.e_p.norm() <= 0.01));
        assert_eq!(out.trace.rows[0].e_p.norm(), 1.0);
    }

    #[test]
    fn zero_duration_is_an_empty_trace() {
        let cfg = ScenarioConfig {
            duration: 0.0,
            ..ScenarioConfig::hover()
        };
        assert!(matches!(
            simulate_with_lut(&cfg, lut(&cfg.platform)),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn reference_profile_never_infeasible() {
        let cfg = ScenarioConfig::default();
        let out = simulate_with_lut(&cfg, lut(&cfg.platform)).unwrap();
        assert_eq!(out.trace.infeasible_count(), 0);
        assert_eq!(out.trace.len(), 9000);
        let k = out.kpis().unwrap();
        assert!(k.is_finite() && k.e_p_rms < 0.01);
        // the trace carries the profile value at t = 38 s
        let r = out
            .trace
            .rows
            .iter()
            .find(|r| (r.t - 38.0).abs() < 1e-9)
            .unwrap();
        assert!((r.f_i - Vector3::new(0.0, -8.0, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn seeded_runs_give_identical_csv() {
        let cfg = ScenarioConfig {
            duration: 5.0,
            seed: 17,
            ..ScenarioConfig::default()
        };
        let l = lut(&cfg.platform);
        let csv = || {
            let mut buf = Vec::new();
            simulate_with_lut(&cfg, Arc::clone(&l))
                .unwrap()
                .trace
                .write_csv(&mut buf, false)
                .unwrap();
            buf
        };
        let a = csv();
        assert_eq!(a, csv());
        let other = ScenarioConfig {
            seed: 18,
            ..cfg.clone()
        };
        let mut b = Vec::new();
        simulate_with_lut(&other, Arc::clone(&l))
            .unwrap()
            .trace
            .write_csv(&mut b, false)
            .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn baseline_allocator_flies_the_same_scenario() {
        let cfg = ScenarioConfig {
            duration: 3.0,
            allocator: AllocatorKind::Baseline,
            ..ScenarioConfig::default()
        };
        let out = simulate_with_lut(&cfg, lut(&cfg.platform)).unwrap();
        assert!(out.trace.rows.iter().all(|r| r.status.is_none()));
        assert!(out.kpis().unwrap().is_finite());
    }

    #[test]
    fn stability_abort_reports_the_error() {
        let cfg = ScenarioConfig {
            abort_error: Some(0.5),
            ..ScenarioConfig::hover()
        };
        match simulate_with_lut(&cfg, lut(&cfg.platform)) {
            Err(Error::StabilityLost { t, error_norm }) => {
                assert_eq!(t, 0.0);
                assert_eq!(error_norm, 1.0);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_threshold_aborts() {
        // the first control step asks for more than zero thrust at rest on
        // the ground and the margin is unreachable
        let mut cfg = ScenarioConfig::hover();
        cfg.selector.r_star = 500.0;
        cfg.max_infeasible = Some(3);
        assert!(matches!(
            simulate_with_lut(&cfg, lut(&cfg.platform)),
            Err(Error::InfeasibleAbort { count: 4, limit: 3 })
        ));
    }

    #[test]
    fn wall_task_holds_every_contact() {
        let cfg = ScenarioConfig::wall();
        let out = wall_task(&cfg, lut(&cfg.platform)).unwrap();
        assert!(out.all_contacts_sustained(3), "{:?}", out.contacts);
        assert!(out.kpis.is_finite());
        // free flight before the first contact sees no wall force
        let first = out.contacts[0].window.start;
        let approach_end = first - 3.0;
        assert!(out
            .output
            .trace
            .rows
            .iter()
            .filter(|r| r.t < approach_end)
            .all(|r| r.f_i == Vector3::zeros()));
        for c in &out.contacts {
            assert!(c.max_force_x < 0.0);
        }
    }

    #[test]
    fn wall_task_needs_a_wall() {
        let cfg = ScenarioConfig::hover();
        assert!(wall_task(&cfg, lut(&cfg.platform)).is_err());
    }

    #[test]
    fn sensor_noise_reaches_the_controller() {
        let quiet = ScenarioConfig {
            duration: 2.0,
            sensors: SensorModels::ideal(),
            ..ScenarioConfig::default()
        };
        let noisy = ScenarioConfig {
            sensors: SensorModels::default(),
            ..quiet.clone()
        };
        let l = lut(&quiet.platform);
        let a = simulate_with_lut(&quiet, Arc::clone(&l)).unwrap();
        let b = simulate_with_lut(&noisy, l).unwrap();
        assert_ne!(a.trace.rows[50].u, b.trace.rows[50].u);
        assert!((a.trace.rows[50].f_i_meas - a.trace.rows[50].f_i).norm() < 1e-12);
    }
}
