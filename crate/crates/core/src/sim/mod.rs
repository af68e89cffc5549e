//! Scenario orchestration: sensors, force profiles, wall contact, the
//! closed-loop simulation, KPIs and Monte-Carlo campaigns.

pub mod contact;
pub mod engine;
pub mod kpi;
pub mod montecarlo;
pub mod profile;
pub mod reference;
pub mod scenario;
pub mod sensors;
pub mod trace;
pub mod wall;

pub use contact::{wall_force, WallContact};
pub use engine::{
    run_rng, run_scenario, simulate, simulate_with_lut, wall_task, SimOutput, WallOutcome,
};
pub use kpi::{compute_kpis, KpiReport};
pub use montecarlo::{run_monte_carlo, McConfig, McRow, Variant};
pub use profile::{profile_eval, ForceProfile, ProfileSpec};
pub use scenario::{AllocationAlpha, AllocatorKind, ScenarioConfig, Task};
pub use sensors::{force_measure, mocap_measure, SensorModels};
pub use trace::{Trace, TraceRow};
pub use wall::{ContactWindow, WallScript, WallTask};
