//! Online cant-angle selection over the polytope LUT.
//!
//! A grid angle is admissible when a ball of radius r around the desired
//! control force fits inside its zero-moment polytope. The scan runs with
//! r = r* first and, only if nothing qualifies, once more with r = c_r·r*.
//! Among the admissible angles the one minimising
//! c1·|α⁺| + c2·|α⁺ − α| wins.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::PolytopeLut;

/// Costs closer than this are treated as equal for tie-breaking.
const COST_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    /// Nominal robustness margin [N].
    pub r_star: f64,
    /// Relaxation factor for the second scan, in (0, 1].
    pub c_r: f64,
    /// Weight on |α⁺| [1/rad].
    pub c1: f64,
    /// Weight on |α⁺ − α| [1/rad].
    pub c2: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            r_star: 1.0,
            c_r: 1.0 / 3.0,
            c1: 0.5,
            c2: 0.5,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_star >= 0.0 && self.r_star.is_finite()) {
            return Err(Error::Config(format!(
                "selector: r_star must be >= 0, got {}",
                self.r_star
            )));
        }
        if !(self.c_r > 0.0 && self.c_r <= 1.0) {
            return Err(Error::Config(format!(
                "selector: c_r must lie in (0, 1], got {}",
                self.c_r
            )));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::Config(
                "selector: cost weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStatus {
    Nominal,
    Relaxed,
    Infeasible,
}

impl SelectionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Relaxed => "relaxed",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorOutcome {
    pub alpha_star: f64,
    pub status: SelectionStatus,
    pub candidate_count: usize,
}

/// Switching cost between the current and the next cant angle.
pub fn cost(alpha_next: f64, alpha_cur: f64, c1: f64, c2: f64) -> f64 {
    c1 * alpha_next.abs() + c2 * (alpha_next - alpha_cur).abs()
}

/// Grid angles whose polytope contains the ball B(f_star, r).
pub fn candidate_set(f_star: &Vector3<f64>, r: f64, lut: &PolytopeLut) -> Vec<f64> {
    lut.entries
        .iter()
        .filter(|e| e.contains_ball(f_star, r))
        .map(|e| e.alpha)
        .collect()
}

/// Strict ordering used for the argmin: cost, then |α|, then α ≥ 0 first.
fn better(a: f64, cost_a: f64, b: f64, cost_b: f64) -> bool {
    if (cost_a - cost_b).abs() > COST_TIE_TOL * (1.0 + cost_a.abs().max(cost_b.abs())) {
        return cost_a < cost_b;
    }
    if a.abs() != b.abs() {
        return a.abs() < b.abs();
    }
    a >= 0.0 && b < 0.0
}

fn argmin(candidates: &[f64], alpha_prev: f64, config: &SelectorConfig) -> f64 {
    let mut best = candidates[0];
    let mut best_cost = cost(best, alpha_prev, config.c1, config.c2);
    for &a in &candidates[1..] {
        let c = cost(a, alpha_prev, config.c1, config.c2);
        if better(a, c, best, best_cost) {
            best = a;
            best_cost = c;
        }
    }
    best
}

/// Two-phase selection. An infeasible demand keeps the previous angle.
pub fn select(
    f_star: &Vector3<f64>,
    alpha_prev: f64,
    config: &SelectorConfig,
    lut: &PolytopeLut,
) -> SelectorOutcome {
    let phases = [
        (config.r_star, SelectionStatus::Nominal),
        (config.c_r * config.r_star, SelectionStatus::Relaxed),
    ];
    for (r, status) in phases {
        let candidates = candidate_set(f_star, r, lut);
        if !candidates.is_empty() {
            return SelectorOutcome {
                alpha_star: argmin(&candidates, alpha_prev, config),
                status,
                candidate_count: candidates.len(),
            };
        }
    }
    SelectorOutcome {
        alpha_star: alpha_prev,
        status: SelectionStatus::Infeasible,
        candidate_count: 0,
    }
}

/// Selector bound to a shared LUT.
#[derive(Debug, Clone)]
pub struct CantSelector {
    pub config: SelectorConfig,
    pub lut: Arc<PolytopeLut>,
}

impl CantSelector {
    pub fn new(config: SelectorConfig, lut: Arc<PolytopeLut>) -> Result<Self> {
        config.validate()?;
        if lut.is_empty() {
            return Err(Error::Config("selector: LUT has no entries".into()));
        }
        Ok(Self { config, lut })
    }

    pub fn select(&self, f_star: &Vector3<f64>, alpha_prev: f64) -> SelectorOutcome {
        select(f_star, alpha_prev, &self.config, &self.lut)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::PlatformParams;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn lut() -> PolytopeLut {
        PolytopeLut::build(deg(1.0), &PlatformParams::default()).unwrap()
    }

    const HOVER: Vector3<f64> = Vector3::new(0.0, 0.0, 34.335);

    #[test]
    fn cost_examples() {
        assert!((cost(deg(5.0), 0.0, 0.5, 0.5) - 0.0873).abs() < 1e-4);
        assert_eq!(cost(0.0, 0.0, 0.7, 0.2), 0.0);
        assert!((cost(deg(-10.0), deg(20.0), 1.0, 2.0) - 1.2217).abs() < 1e-4);
    }

    #[test]
    fn hover_candidates_with_unit_margin() {
        let lut = lut();
        let set = candidate_set(&HOVER, 1.0, &lut);
        assert!(set.iter().all(|a| a.abs() > deg(3.5)));
        assert!(set.contains(&deg(4.0)));
        assert!(set.contains(&-deg(4.0)));
    }

    #[test]
    fn out_of_reach_force_has_no_candidates() {
        let lut = lut();
        for r in [0.0, 0.5, 3.0] {
            assert!(candidate_set(&Vector3::new(0.0, 0.0, 150.0), r, &lut).is_empty());
        }
    }

    #[test]
    fn zero_margin_includes_the_degenerate_entry_on_its_segment() {
        let lut = lut();
        let set = candidate_set(&HOVER, 0.0, &lut);
        assert!(set.contains(&0.0));
        assert_eq!(set.len(), lut.len());
    }

    #[test]
    fn hover_selection_breaks_tie_towards_positive() {
        let lut = lut();
        let cfg = SelectorConfig {
            r_star: 1.0,
            c_r: 1.0 / 3.0,
            c1: 0.5,
            c2: 0.5,
        };
        let out = select(&HOVER, 0.0, &cfg, &lut);
        assert_eq!(out.status, SelectionStatus::Nominal);
        assert_eq!(out.alpha_star, deg(4.0));
    }

    #[test]
    fn infeasible_keeps_previous_angle() {
        let lut = lut();
        let out = select(
            &Vector3::new(0.0, 0.0, 150.0),
            deg(25.0),
            &SelectorConfig::default(),
            &lut,
        );
        assert_eq!(out.status, SelectionStatus::Infeasible);
        assert_eq!(out.alpha_star, deg(25.0));
        assert_eq!(out.candidate_count, 0);
    }

    #[test]
    fn pure_smoothness_stays_close_to_previous() {
        let lut = lut();
        let cfg = SelectorConfig {
            c1: 0.0,
            c2: 1.0,
            ..Default::default()
        };
        let out = select(&HOVER, deg(30.0), &cfg, &lut);
        assert!((out.alpha_star - deg(30.0)).abs() < 1e-12);
    }

    #[test]
    fn relaxed_phase_engages_near_the_boundary() {
        let lut = lut();
        let cfg = SelectorConfig {
            r_star: 5.0,
            c_r: 0.2,
            c1: 0.5,
            c2: 0.5,
        };
        // lateral push close to the maximum lateral reach at hover thrust
        let f = Vector3::new(0.0, 17.0, 34.335);
        let out = select(&f, 0.0, &cfg, &lut);
        assert_eq!(out.status, SelectionStatus::Relaxed);
        let poly = lut.nearest(out.alpha_star);
        assert!(poly.contains_ball(&f, 1.0));
        assert!(candidate_set(&f, 5.0, &lut).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(SelectorConfig::default().validate().is_ok());
        assert!(SelectorConfig {
            c_r: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SelectorConfig {
            r_star: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SelectorConfig {
            c2: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
