//! Waypoint force profiles interpolated per axis by natural cubic splines.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForceProfile {
    times: Vec<f64>,
    forces: Vec<Vector3<f64>>,
    /// Second derivatives at the knots, per axis.
    curvature: Vec<Vector3<f64>>,
}

/// Serialized form: waypoint times [s] and forces [N].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub times: Vec<f64>,
    pub forces: Vec<[f64; 3]>,
}

impl ProfileSpec {
    /// Waypoints of the weight-study profile.
    pub fn reference() -> Self {
        Self {
            times: vec![0.0, 20.0, 38.0, 60.0, 80.0],
            forces: vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0],
                [0.0, -8.0, 10.0],
                [-10.0, 7.0, 2.0],
                [-6.0, -8.0, 0.0],
            ],
        }
    }

    pub fn build(&self) -> Result<ForceProfile> {
        if self.times.len() != self.forces.len() {
            return Err(Error::Config(format!(
                "profile: {} times but {} forces",
                self.times.len(),
                self.forces.len()
            )));
        }
        ForceProfile::new(
            self.times.clone(),
            self.forces.iter().map(|f| Vector3::from(*f)).collect(),
        )
    }
}

impl ForceProfile {
    pub fn new(times: Vec<f64>, forces: Vec<Vector3<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != forces.len() {
            return Err(Error::Config(
                "profile needs at least two matching waypoints".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config(
                "profile times must be finite and strictly increasing".into(),
            ));
        }
        let curvature = natural_curvature(&times, &forces);
        Ok(Self {
            times,
            forces,
            curvature,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn forces(&self) -> &[Vector3<f64>] {
        &self.forces
    }

    /// Force at time `t`; holds the end values outside the waypoint span.
    pub fn eval(&self, t: f64) -> Vector3<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.forces[0];
        }
        if t >= self.times[n - 1] {
            return self.forces[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        let (y0, y1) = (self.forces[i], self.forces[i + 1]);
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * (h * h / 6.0)
    }
}

pub fn profile_eval(profile: &ForceProfile, t: f64) -> Vector3<f64> {
    profile.eval(t)
}

/// Solves the tridiagonal system for knot second derivatives with zero
/// curvature at both ends (Thomas algorithm).
fn natural_curvature(t: &[f64], y: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = t.len();
    let mut m = vec![Vector3::zeros(); n];
    if n < 3 {
        return m;
    }
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![Vector3::zeros(); inner];
    for k in 0..inner {
        let i = k + 1;
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for k in 1..inner {
        let lower = t[k + 1] - t[k];
        let w = lower / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        let prev = rhs[k - 1];
        rhs[k] -= w * prev;
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for k in (0..inner - 1).rev() {
        m[k + 1] = (rhs[k] - upper[k] * m[k + 2]) / diag[k];
    }
    m
}
