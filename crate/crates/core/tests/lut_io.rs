use std::fs;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cantsel_core::platform::PlatformParams;
use cantsel_core::polytope::{
    build_lut, build_polytope, lut_load, lut_save, membership_oracle, zero_moment_generators,
    PolytopeLut,
};
use cantsel_core::Error;

fn deg(x: f64) -> f64 {
    x.to_radians()
}

#[test]
fn save_load_is_bit_exact() {
    let lut = build_lut(deg(1.0), &PlatformParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lut.json");
    lut_save(&lut, &path).unwrap();
    let back = lut_load(&path).unwrap();
    assert_eq!(back, lut);
    for (a, b) in lut.entries.iter().zip(&back.entries) {
        for (v, w) in a.vertices.iter().zip(&b.vertices) {
            for k in 0..3 {
                assert_eq!(v[k].to_bits(), w[k].to_bits());
            }
        }
    }
}

#[test]
fn coarse_table_round_trips() {
    let lut = PolytopeLut::build_unchecked(deg(60.0), &PlatformParams::default());
    assert_eq!(lut.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coarse.json");
    lut.save(&path).unwrap();
    assert_eq!(PolytopeLut::load(&path).unwrap(), lut);
}

#[test]
fn wrong_version_is_rejected() {
    let lut = build_lut(deg(5.0), &PlatformParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lut.json");
    lut.save(&path).unwrap();
    let text = fs::read_to_string(&path)
        .unwrap()
        .replacen("\"version\": 1", "\"version\": 7", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(
        lut_load(&path),
        Err(Error::LutVersion {
            expected: 1,
            found: 7
        })
    ));
}

#[test]
fn truncated_file_is_malformed() {
    let lut = build_lut(deg(5.0), &PlatformParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lut.json");
    lut.save(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(lut_load(&path), Err(Error::LutMalformed { .. })));
}

#[test]
fn missing_entries_are_malformed() {
    let mut lut = build_lut(deg(5.0), &PlatformParams::default()).unwrap();
    lut.entries.pop();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lut.json");
    lut.save(&path).unwrap();
    assert!(matches!(lut_load(&path), Err(Error::LutMalformed { .. })));
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        lut_load(dir.path().join("none.json")),
        Err(Error::Io(_))
    ));
}

// Zero-radius containment against the lattice oracle. Points closer to the
// boundary than the lattice covering radius are skipped.
#[test]
fn containment_agrees_with_membership_oracle() {
    let p = PlatformParams::default();
    let n_grid = 40;
    let cell = 2.0 * p.thrust_coeff * p.u_max() / (n_grid - 1) as f64;
    let band = 1.5 * cell * 1.01;
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut checked, mut inside) = (0, 0);
    for _ in 0..200 {
        let a =
            rng.random_range(deg(10.0)..deg(60.0)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        // image of a slightly enlarged input box, so both outcomes occur
        let g = zero_moment_generators(a, &p);
        let f: Vector3<f64> = g
            .iter()
            .map(|gk| gk * p.u_max() * rng.random_range(-0.25..1.25))
            .sum();
        let poly = build_polytope(a, &p);
        if poly.inscribed_radius(&f).abs() < band {
            continue;
        }
        let exact = poly.contains_ball(&f, 0.0);
        assert_eq!(
            exact,
            membership_oracle(a, &f, &p, n_grid).unwrap(),
            "alpha {a}, f {f:?}"
        );
        checked += 1;
        inside += usize::from(exact);
    }
    assert!(
        checked > 120 && inside > 25 && checked - inside > 25,
        "checked {checked}, inside {inside}"
    );
}
