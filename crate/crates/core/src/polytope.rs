//! Zero-moment control force polytopes and their offline look-up table.
//!
//! Zero net moment forces opposite rotors (k, k+3) to spin at the same rate,
//! and both members of a pair then push along the same axis. The zero-moment
//! force set is therefore the image of the cube [0, ω̄²]³ under three pair
//! generators, a parallelepiped whose six faces come straight from
//! generator cross products.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{PlatformParams, ALPHA_MAX, ALPHA_MIN};

pub const LUT_VERSION: u32 = 1;

/// Relative singular-value threshold below which the generators span less
/// than three dimensions.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// Tolerance for "point on the degenerate segment".
const SEGMENT_TOL: f64 = 1e-9;

/// Feasible side is `normal · f <= offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl HalfSpace {
    /// Signed distance from `point` to the boundary, positive inside.
    pub fn margin(&self, point: &Vector3<f64>) -> f64 {
        self.offset - self.normal.dot(point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcePolytope {
    pub alpha: f64,
    /// Pair generators 2 c_f · axis_k [N/Hz²]; force = Σ g_k ũ_k.
    pub generators: [Vector3<f64>; 3],
    /// Force-space vertices [N].
    pub vertices: Vec<Vector3<f64>>,
    pub halfspaces: Vec<HalfSpace>,
    pub degenerate: bool,
}

/// Pair generators for the zero-moment force space.
///
/// Pair k (rotors k and k+3) sits at azimuth θ_k = π/6 + (k−1)π/3 and tilts by
/// s_k α with s_k = (−1)^k.
pub fn zero_moment_generators(alpha: f64, params: &PlatformParams) -> [Vector3<f64>; 3] {
    let scale = 2.0 * params.thrust_coeff;
    std::array::from_fn(|idx| {
        let k = idx + 1;
        let theta = FRAC_PI_6 + idx as f64 * FRAC_PI_3;
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        let lateral = (s * alpha).sin();
        scale * Vector3::new(lateral * theta.sin(), -lateral * theta.cos(), alpha.cos())
    })
}

impl ForcePolytope {
    pub fn build(alpha: f64, params: &PlatformParams) -> Self {
        let generators = zero_moment_generators(alpha, params);
        let top = params.u_max();
        let edges: [Vector3<f64>; 3] = generators.map(|g| g * top);

        let edge_matrix = Matrix3::from_columns(&edges);
        let scale = 2.0 * params.thrust_coeff * top;
        let degenerate = edge_matrix.singular_values().min() < DEGENERACY_RTOL * scale;

        let corners: Vec<Vector3<f64>> = (0..8u8)
            .map(|mask| {
                (0..3)
                    .filter(|b| mask & (1 << b) != 0)
                    .fold(Vector3::zeros(), |acc, b| acc + edges[b])
            })
            .collect();

        if degenerate {
            let axis = edges.iter().fold(Vector3::zeros(), |a, e| a + e);
            let dir = if axis.norm() > 0.0 {
                axis.normalize()
            } else {
                Vector3::z()
            };
            let key = |v: &&Vector3<f64>| v.dot(&dir);
            let lo = *corners
                .iter()
                .min_by(|a, b| key(a).total_cmp(&key(b)))
                .unwrap();
            let hi = *corners
                .iter()
                .max_by(|a, b| key(a).total_cmp(&key(b)))
                .unwrap();
            return Self {
                alpha,
                generators,
                vertices: vec![lo, hi],
                halfspaces: Vec::new(),
                degenerate,
            };
        }

        let mut halfspaces = Vec::with_capacity(6);
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let n = edges[i].cross(&edges[j]).normalize();
            let far = n.dot(&edges[k]);
            let (lo, hi) = if far >= 0.0 { (0.0, far) } else { (far, 0.0) };
            halfspaces.push(HalfSpace {
                normal: n,
                offset: hi,
            });
            halfspaces.push(HalfSpace {
                normal: -n,
                offset: -lo,
            });
        }
        Self {
            alpha,
            generators,
            vertices: corners,
            halfspaces,
            degenerate,
        }
    }

    /// Whether the closed ball of radius `r` around `center` lies inside.
    pub fn contains_ball(&self, center: &Vector3<f64>, r: f64) -> bool {
        if self.degenerate {
            return r == 0.0 && self.distance_to_segment(center) <= SEGMENT_TOL;
        }
        self.halfspaces.iter().all(|h| h.margin(center) >= r)
    }

    /// Smallest half-space margin, i.e. the radius of the largest ball around
    /// `center` that fits (negative when outside).
    pub fn inscribed_radius(&self, center: &Vector3<f64>) -> f64 {
        if self.degenerate {
            return if self.distance_to_segment(center) <= SEGMENT_TOL {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        self.halfspaces
            .iter()
            .map(|h| h.margin(center))
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertex with the largest z component.
    pub fn apex(&self) -> Vector3<f64> {
        *self
            .vertices
            .iter()
            .max_by(|a, b| a.z.total_cmp(&b.z))
            .expect("polytope has vertices")
    }

    fn distance_to_segment(&self, point: &Vector3<f64>) -> f64 {
        let (a, b) = (self.vertices[0], self.vertices[self.vertices.len() - 1]);
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((point - a).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (a + t * ab - point).norm()
    }
}

pub fn build_polytope(alpha: f64, params: &PlatformParams) -> ForcePolytope {
    ForcePolytope::build(alpha, params)
}

pub fn contains_ball(poly: &ForcePolytope, center: &Vector3<f64>, r: f64) -> bool {
    poly.contains_ball(center, r)
}

/// Number of LUT entries for a grid step.
pub fn grid_len(delta_alpha: f64) -> usize {
    ((ALPHA_MAX - ALPHA_MIN) / delta_alpha).round() as usize
}

/// Grid over [−π/3, π/3). When the step divides π/3 the grid is built as
/// integer multiples of the step so that ±α are exact negatives.
pub fn alpha_grid(delta_alpha: f64) -> Vec<f64> {
    let n = grid_len(delta_alpha);
    let half = FRAC_PI_3 / delta_alpha;
    let half_n = half.round();
    if (half - half_n).abs() < 1e-9 && n == 2 * half_n as usize {
        let h = half_n as i64;
        (-h..h).map(|i| i as f64 * delta_alpha).collect()
    } else {
        (0..n)
            .map(|k| ALPHA_MIN + k as f64 * delta_alpha)
            .filter(|&a| a < ALPHA_MAX)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeLut {
    pub version: u32,
    pub delta_alpha: f64,
    pub entries: Vec<ForcePolytope>,
}

impl PolytopeLut {
    pub fn build(delta_alpha: f64, params: &PlatformParams) -> Result<Self> {
        if !(delta_alpha > 0.0 && delta_alpha <= 10f64.to_radians() + 1e-12) {
            return Err(Error::Contract(format!(
                "LUT step must lie in (0, 10°], got {:.6}°",
                delta_alpha.to_degrees()
            )));
        }
        Ok(Self::build_unchecked(delta_alpha, params))
    }

    /// Builds without the 10° upper limit on the step.
    pub fn build_unchecked(delta_alpha: f64, params: &PlatformParams) -> Self {
        let entries = alpha_grid(delta_alpha)
            .into_par_iter()
            .map(|a| ForcePolytope::build(a, params))
            .collect();
        Self {
            version: LUT_VERSION,
            delta_alpha,
            entries,
        }
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.alpha)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry whose grid angle is closest to `alpha`.
    pub fn nearest(&self, alpha: f64) -> &ForcePolytope {
        self.entries
            .iter()
            .min_by(|a, b| (a.alpha - alpha).abs().total_cmp(&(b.alpha - alpha).abs()))
            .expect("LUT is not empty")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = LutFile::from(self);
        fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let malformed = |reason: String| Error::LutMalformed {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path)?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        let found = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| malformed("missing version".into()))?;
        if found != u64::from(LUT_VERSION) {
            return Err(Error::LutVersion {
                expected: LUT_VERSION,
                found: found as u32,
            });
        }
        let file: LutFile = serde_json::from_value(raw).map_err(|e| malformed(e.to_string()))?;
        let lut = file.into_lut();
        lut.check().map_err(malformed)?;
        Ok(lut)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.delta_alpha > 0.0) {
            return Err("delta_alpha_rad must be positive".into());
        }
        if self.entries.len() != grid_len(self.delta_alpha) {
            return Err(format!(
                "expected {} entries for the stated step, found {}",
                grid_len(self.delta_alpha),
                self.entries.len()
            ));
        }
        if self.entries.windows(2).any(|w| !(w[0].alpha < w[1].alpha)) {
            return Err("entries are not sorted by angle".into());
        }
        for e in &self.entries {
            if e.vertices.is_empty() || e.vertices.len() > 8 {
                return Err(format!(
                    "entry at {} rad has {} vertices",
                    e.alpha,
                    e.vertices.len()
                ));
            }
            if !e.degenerate && e.halfspaces.len() != 6 {
                return Err(format!(
                    "entry at {} rad has {} half-spaces",
                    e.alpha,
                    e.halfspaces.len()
                ));
            }
        }
        Ok(())
    }
}

pub fn build_lut(delta_alpha: f64, params: &PlatformParams) -> Result<PolytopeLut> {
    PolytopeLut::build(delta_alpha, params)
}

pub fn lut_save(lut: &PolytopeLut, path: impl AsRef<Path>) -> Result<()> {
    lut.save(path)
}

pub fn lut_load(path: impl AsRef<Path>) -> Result<PolytopeLut> {
    PolytopeLut::load(path)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LutFile {
    version: u32,
    delta_alpha_rad: f64,
    entries: Vec<LutEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LutEntry {
    alpha_rad: f64,
    generators: [[f64; 3]; 3],
    vertices: Vec<[f64; 3]>,
    halfspaces: Vec<LutHalfSpace>,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LutHalfSpace {
    n: [f64; 3],
    d: f64,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl From<&PolytopeLut> for LutFile {
    fn from(lut: &PolytopeLut) -> Self {
        Self {
            version: lut.version,
            delta_alpha_rad: lut.delta_alpha,
            entries: lut
                .entries
                .iter()
                .map(|e| LutEntry {
                    alpha_rad: e.alpha,
                    generators: e.generators.each_ref().map(arr),
                    vertices: e.vertices.iter().map(arr).collect(),
                    halfspaces: e
                        .halfspaces
                        .iter()
                        .map(|h| LutHalfSpace {
                            n: arr(&h.normal),
                            d: h.offset,
                        })
                        .collect(),
                    degenerate: e.degenerate,
                })
                .collect(),
        }
    }
}

impl LutFile {
    fn into_lut(self) -> PolytopeLut {
        let v = |a: [f64; 3]| Vector3::from(a);
        PolytopeLut {
            version: self.version,
            delta_alpha: self.delta_alpha_rad,
            entries: self
                .entries
                .into_iter()
                .map(|e| ForcePolytope {
                    alpha: e.alpha_rad,
                    generators: e.generators.map(v),
                    vertices: e.vertices.into_iter().map(v).collect(),
                    halfspaces: e
                        .halfspaces
                        .into_iter()
                        .map(|h| HalfSpace {
                            normal: v(h.n),
                            offset: h.d,
                        })
                        .collect(),
                    degenerate: e.degenerate,
                })
                .collect(),
        }
    }
}

/// Brute-force membership test: scans an `n_grid`³ lattice of pair inputs
/// over [0, ω̄²]³ and accepts `f` when some lattice force lies within the
/// covering radius of the lattice image.
pub fn membership_oracle(
    alpha: f64,
    f: &Vector3<f64>,
    params: &PlatformParams,
    n_grid: usize,
) -> Result<bool> {
    if n_grid < 10 {
        return Err(Error::Contract(format!(
            "n_grid must be at least 10, got {n_grid}"
        )));
    }
    let g = zero_moment_generators(alpha, params);
    let step = params.u_max() / (n_grid - 1) as f64;
    let cells: [Vector3<f64>; 3] = g.map(|gk| gk * step);
    let tolerance = 0.5 * cells.iter().map(|c| c.norm()).sum::<f64>();
    let tol2 = tolerance * tolerance;
    for a in 0..n_grid {
        let pa = cells[0] * a as f64 - f;
        for b in 0..n_grid {
            let pb = pa + cells[1] * b as f64;
            for c in 0..n_grid {
                if (pb + cells[2] * c as f64).norm_squared() <= tol2 {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::build_matrices;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn generators_at_zero_tilt() {
        let p = PlatformParams::default();
        for g in zero_moment_generators(0.0, &p) {
            assert!((g - Vector3::new(0.0, 0.0, 3e-3)).norm() < 1e-18);
        }
    }

    #[test]
    fn generator_two_at_25_deg() {
        let p = PlatformParams::default();
        let g2 = zero_moment_generators(deg(25.0), &p)[1] / (2.0 * p.thrust_coeff);
        assert!((g2 - Vector3::new(0.42262, 0.0, 0.90631)).norm() < 1e-5);
    }

    #[test]
    fn generators_equal_paired_allocation_columns() {
        let p = PlatformParams::default();
        for a in [-0.9, -0.2, 0.1, 0.44, 1.0] {
            let m = build_matrices(a, &p);
            let fs = 2.0 * m.force * m.pair_selection;
            let g = zero_moment_generators(a, &p);
            for k in 0..3 {
                assert!((fs.column(k) - g[k]).norm() < 1e-17);
                let mut u = nalgebra::Vector6::zeros();
                u[k] = 1.0;
                u[k + 3] = 1.0;
                assert!((m.moment * u).norm() < 1e-17);
            }
        }
    }

    #[test]
    fn horizontal_parts_are_120_deg_apart() {
        let p = PlatformParams::default();
        for a in [deg(-50.0), deg(3.0), deg(33.0)] {
            let h: Vec<Vector3<f64>> = zero_moment_generators(a, &p)
                .iter()
                .map(|g| Vector3::new(g.x, g.y, 0.0).normalize())
                .collect();
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                assert!((h[i].dot(&h[j]) + 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_tilt_polytope_is_a_segment() {
        let p = PlatformParams::default();
        let poly = build_polytope(0.0, &p);
        assert!(poly.degenerate);
        assert!(poly.halfspaces.is_empty());
        assert!(poly.vertices[0].norm() < 1e-12);
        assert!((poly.vertices[1] - Vector3::new(0.0, 0.0, 104.976)).norm() < 1e-9);
        assert!(poly.contains_ball(&Vector3::new(0.0, 0.0, 34.335), 0.0));
        assert!(!poly.contains_ball(&Vector3::new(0.0, 0.0, 34.335), 1e-6));
        assert!(!poly.contains_ball(&Vector3::new(0.1, 0.0, 34.335), 0.0));
    }

    #[test]
    fn vertices_at_25_deg() {
        let p = PlatformParams::default();
        let poly = build_polytope(deg(25.0), &p);
        assert!(!poly.degenerate);
        assert_eq!((poly.vertices.len(), poly.halfspaces.len()), (8, 6));
        let apex_z = p.max_aligned_thrust() * deg(25.0).cos();
        assert!((apex_z - 95.1406).abs() < 1e-4);
        assert!((poly.apex() - Vector3::new(0.0, 0.0, apex_z)).norm() < 1e-9);
        let single = poly.vertices[0b010];
        assert!((single - Vector3::new(14.788, 0.0, 31.713)).norm() < 1e-3);
        for v in &poly.vertices {
            assert!(v.z >= 0.0);
            for h in &poly.halfspaces {
                assert!(h.margin(v) >= -1e-9);
            }
        }
    }

    #[test]
    fn containment_examples() {
        let p = PlatformParams::default();
        let hover = Vector3::new(0.0, 0.0, 34.335);
        assert!(contains_ball(&build_polytope(deg(25.0), &p), &hover, 1.0));
        assert!(!contains_ball(&build_polytope(deg(2.0), &p), &hover, 1.0));
        for a in [-55.0, -3.0, 7.0, 25.0] {
            assert!(!contains_ball(
                &build_polytope(deg(a), &p),
                &Vector3::zeros(),
                0.5
            ));
        }
    }

    #[test]
    fn lut_grid_shape() {
        let p = PlatformParams::default();
        let lut = build_lut(deg(1.0), &p).unwrap();
        assert_eq!(lut.len(), 120);
        assert_eq!(lut.entries[0].alpha, deg(1.0) * -60.0);
        assert!((lut.entries[119].alpha - deg(59.0)).abs() < 1e-15);
        for e in &lut.entries {
            assert_eq!(e.degenerate, e.alpha == 0.0, "alpha {}", e.alpha);
        }
        assert_eq!(build_lut_unchecked_len(deg(60.0)), 2);
        assert!(build_lut(deg(11.0), &p).is_err());
        assert!(build_lut(0.0, &p).is_err());
    }

    fn build_lut_unchecked_len(step: f64) -> usize {
        PolytopeLut::build_unchecked(step, &PlatformParams::default()).len()
    }

    #[test]
    fn grid_is_sign_symmetric() {
        let grid = alpha_grid(deg(1.0));
        for k in 1..60 {
            assert_eq!(grid[60 + k], -grid[60 - k]);
        }
    }

    #[test]
    fn oracle_examples() {
        let p = PlatformParams::default();
        assert!(membership_oracle(deg(25.0), &Vector3::new(0.0, 0.0, 34.335), &p, 40).unwrap());
        for a in [-40.0, 0.0, 12.0] {
            assert!(!membership_oracle(deg(a), &Vector3::new(0.0, 0.0, 150.0), &p, 20).unwrap());
            assert!(!membership_oracle(deg(a), &Vector3::new(0.0, 0.0, -5.0), &p, 20).unwrap());
        }
        assert!(membership_oracle(0.3, &Vector3::zeros(), &p, 5).is_err());
    }
}
