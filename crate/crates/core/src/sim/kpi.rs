//! Tracking and actuation KPIs over a trace.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::trace::TraceRow;
use crate::error::{Error, Result};
use crate::platform::{rotor_axis, PlatformParams, ROTOR_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    /// ms; None when the trace carries no timing.
    pub t_c_mean: Option<f64>,
    /// m
    pub e_p_mean_norm: f64,
    /// m
    pub e_p_rms: f64,
    /// rad
    pub e_r_mean_norm: f64,
    /// rad
    pub e_r_rms: f64,
    pub fei_mean: f64,
    pub mei_mean: f64,
    /// Hz²
    pub u_rms: f64,
    pub steps: usize,
}

/// Per-step motor-effort and force-efficiency indices.
pub fn actuation_indices(u: &Vector6<f64>, alpha: f64, params: &PlatformParams) -> (f64, f64) {
    let top = u.iter().fold(0.0f64, |m, &x| m.max(x.max(0.0)));
    let mei = top.sqrt() / params.omega_max;
    let total: Vector3<f64> = (1..=ROTOR_COUNT)
        .map(|i| params.thrust_coeff * u[i - 1] * rotor_axis(i, alpha))
        .sum();
    (mei, total.norm() / params.max_aligned_thrust())
}

pub fn compute_kpis(rows: &[TraceRow]) -> Result<KpiReport> {
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = rows.len() as f64;
    let mut sum_ep = Vector3::zeros();
    let mut sum_er = Vector3::zeros();
    let (mut sq_ep, mut sq_er, mut sq_u) = (0.0, 0.0, 0.0);
    let (mut mei, mut fei, mut tc) = (0.0, 0.0, 0.0);
    let mut timed = true;
    for r in rows {
        sum_ep += r.e_p;
        sum_er += r.e_r;
        sq_ep += r.e_p.norm_squared();
        sq_er += r.e_r.norm_squared();
        sq_u += r.u.norm_squared();
        mei += r.mei;
        fei += r.fei;
        timed &= r.t_alloc_ms.is_finite();
        tc += r.t_alloc_ms;
    }
    Ok(KpiReport {
        t_c_mean: timed.then(|| tc / n),
        e_p_mean_norm: (sum_ep / n).norm(),
        e_p_rms: (sq_ep / n).sqrt(),
        e_r_mean_norm: (sum_er / n).norm(),
        e_r_rms: (sq_er / n).sqrt(),
        fei_mean: fei / n,
        mei_mean: mei / n,
        u_rms: (sq_u / n).sqrt(),
        steps: rows.len(),
    })
}

impl KpiReport {
    pub fn is_finite(&self) -> bool {
        [
            self.e_p_mean_norm,
            self.e_p_rms,
            self.e_r_mean_norm,
            self.e_r_rms,
            self.fei_mean,
            self.mei_mean,
            self.u_rms,
            self.t_c_mean.unwrap_or(0.0),
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    /// Field-wise mean; the step count is summed.
    pub fn average(reports: &[KpiReport]) -> Option<KpiReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let mean = |f: fn(&KpiReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let t_c_mean = reports
            .iter()
            .map(|r| r.t_c_mean)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Some(KpiReport {
            t_c_mean,
            e_p_mean_norm: mean(|r| r.e_p_mean_norm),
            e_p_rms: mean(|r| r.e_p_rms),
            e_r_mean_norm: mean(|r| r.e_r_mean_norm),
            e_r_rms: mean(|r| r.e_r_rms),
            fei_mean: mean(|r| r.fei_mean),
            mei_mean: mean(|r| r.mei_mean),
            u_rms: mean(|r| r.u_rms),
            steps: reports.iter().map(|r| r.steps).sum(),
        })
    }
}
