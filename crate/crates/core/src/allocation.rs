//! Cant-angle dependent allocation matrices and the pseudo-inverse mapping
//! from a desired body wrench to squared spin rates.

use nalgebra::{Matrix3x6, Matrix6, Matrix6x3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{rotor_geometry, spin_sign, BodyWrench, PlatformParams, ROTOR_COUNT};

/// Smallest singular value of C below which the allocation counts as singular.
pub const RANK_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrices {
    pub alpha: f64,
    /// Maps u to the body control force.
    pub force: Matrix3x6<f64>,
    /// Maps u to the body control moment.
    pub moment: Matrix3x6<f64>,
    /// Force rows stacked on moment rows.
    pub stacked: Matrix6<f64>,
    /// Picks the first rotor of every opposite pair: [I₃; 0₃].
    pub pair_selection: Matrix6x3<f64>,
}

impl AllocationMatrices {
    pub fn singular_values(&self) -> Vector6<f64> {
        self.stacked.singular_values()
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values().min()
    }

    pub fn is_full_rank(&self) -> bool {
        self.sigma_min() > RANK_THRESHOLD
    }

    pub fn apply(&self, u: &Vector6<f64>) -> BodyWrench {
        BodyWrench::from_vector(&(self.stacked * u))
    }
}

pub fn build_matrices(alpha: f64, params: &PlatformParams) -> AllocationMatrices {
    let mut force = Matrix3x6::zeros();
    let mut moment = Matrix3x6::zeros();
    for i in 1..=ROTOR_COUNT {
        let (p, r) = rotor_geometry(i, alpha, params).expect("rotor index in range");
        let axis: Vector3<f64> = r.column(2).into_owned();
        let f = params.thrust_coeff * axis;
        let m = p.cross(&f) + spin_sign(i) * params.drag_coeff * axis;
        force.set_column(i - 1, &f);
        moment.set_column(i - 1, &m);
    }
    let mut stacked = Matrix6::zeros();
    stacked.fixed_view_mut::<3, 6>(0, 0).copy_from(&force);
    stacked.fixed_view_mut::<3, 6>(3, 0).copy_from(&moment);
    let mut pair_selection = Matrix6x3::zeros();
    pair_selection
        .fixed_view_mut::<3, 3>(0, 0)
        .fill_with_identity();
    AllocationMatrices {
        alpha,
        force,
        moment,
        stacked,
        pair_selection,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Squared spin rates [Hz²].
    pub u: Vector6<f64>,
    /// True when any component was clamped to its bounds.
    pub saturated: bool,
}

fn clamp_inputs(raw: Vector6<f64>, params: &PlatformParams) -> ControlInput {
    let top = params.u_max();
    let u = raw.map(|x| x.clamp(0.0, top));
    let saturated = raw.iter().any(|&x| !(0.0..=top).contains(&x));
    ControlInput { u, saturated }
}

/// Exact inverse allocation at a full-rank cant angle, clamped per component.
pub fn allocate(wrench: &BodyWrench, alpha: f64, params: &PlatformParams) -> Result<ControlInput> {
    allocate_with(&build_matrices(alpha, params), wrench, params)
}

/// Same as [`allocate`] with prebuilt matrices.
pub fn allocate_with(
    matrices: &AllocationMatrices,
    wrench: &BodyWrench,
    params: &PlatformParams,
) -> Result<ControlInput> {
    if !wrench.is_finite() {
        return Err(Error::Contract("desired wrench is not finite".into()));
    }
    let sigma_min = matrices.sigma_min();
    if sigma_min <= RANK_THRESHOLD {
        return Err(Error::SingularAllocation {
            alpha: matrices.alpha,
            sigma_min,
        });
    }
    let raw =
        matrices
            .stacked
            .lu()
            .solve(&wrench.to_vector())
            .ok_or(Error::SingularAllocation {
                alpha: matrices.alpha,
                sigma_min,
            })?;
    Ok(clamp_inputs(raw, params))
}

/// Moore–Penrose allocation through an SVD; defined at every angle,
/// including the rank-deficient zero tilt.
pub fn allocate_least_squares(
    matrices: &AllocationMatrices,
    wrench: &BodyWrench,
    params: &PlatformParams,
) -> ControlInput {
    let svd = matrices.stacked.svd(true, true);
    let raw = svd
        .solve(&wrench.to_vector(), RANK_THRESHOLD)
        .expect("SVD computed with both factors");
    clamp_inputs(raw, params)
}

/// Inverse allocation when the matrices are full rank, otherwise the
/// least-squares fallback.
pub fn allocate_or_fallback(
    matrices: &AllocationMatrices,
    wrench: &BodyWrench,
    params: &PlatformParams,
) -> Result<ControlInput> {
    match allocate_with(matrices, wrench, params) {
        Err(Error::SingularAllocation { .. }) => {
            Ok(allocate_least_squares(matrices, wrench, params))
        }
        other => other,
    }
}

/// ω_i = √u_i.
pub fn spin_rates(u: &Vector6<f64>) -> Result<Vector6<f64>> {
    if let Some(bad) = u.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::Contract(format!(
            "squared spin rate {bad} is negative"
        )));
    }
    Ok(u.map(f64::sqrt))
}
