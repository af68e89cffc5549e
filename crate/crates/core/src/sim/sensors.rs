//! Motion-capture and force-sensor models: pure delay, zero-order hold and
//! additive Gaussian noise.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::exp_so3;
use crate::platform::RigidBodyState;

/// Diagonal covariances, bias, delay and rates. Angular covariances are in
/// degrees and converted to radians on use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModels {
    /// m²
    pub sigma_p: Vector3<f64>,
    /// deg²
    pub sigma_r_deg2: Vector3<f64>,
    /// m²/s²
    pub sigma_v: Vector3<f64>,
    /// deg²/s²
    pub sigma_omega_deg2: Vector3<f64>,
    /// s
    pub mocap_delay: f64,
    /// Hz
    pub mocap_rate: f64,
    /// N²
    pub sigma_f: Vector3<f64>,
    /// N
    pub force_bias: Vector3<f64>,
    /// Hz
    pub force_rate: f64,
}

impl Default for SensorModels {
    fn default() -> Self {
        Self {
            sigma_p: 1e-7 * Vector3::new(4.099, 2.838, 0.211),
            sigma_r_deg2: Vector3::new(0.0012, 0.0011, 0.0011),
            sigma_v: 1e-6 * Vector3::new(2.050, 1.419, 0.105),
            sigma_omega_deg2: Vector3::new(0.0024, 0.0022, 0.0022),
            mocap_delay: 0.012,
            mocap_rate: 100.0,
            sigma_f: Vector3::repeat(2.5e-3),
            force_bias: Vector3::repeat(0.1),
            force_rate: 100.0,
        }
    }
}

impl SensorModels {
    /// Ideal sensors: no noise, bias or delay.
    pub fn ideal() -> Self {
        Self {
            sigma_p: Vector3::zeros(),
            sigma_r_deg2: Vector3::zeros(),
            sigma_v: Vector3::zeros(),
            sigma_omega_deg2: Vector3::zeros(),
            mocap_delay: 0.0,
            sigma_f: Vector3::zeros(),
            force_bias: Vector3::zeros(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let covs = [
            self.sigma_p,
            self.sigma_r_deg2,
            self.sigma_v,
            self.sigma_omega_deg2,
            self.sigma_f,
        ];
        if covs
            .iter()
            .flat_map(|c| c.iter())
            .any(|&x| !(x >= 0.0 && x.is_finite()))
        {
            return Err(Error::Config(
                "sensors: covariances must be finite and nonnegative".into(),
            ));
        }
        if !(self.mocap_delay >= 0.0 && self.mocap_delay.is_finite()) {
            return Err(Error::Config("sensors: delay must be nonnegative".into()));
        }
        if !(self.mocap_rate > 0.0 && self.force_rate > 0.0) {
            return Err(Error::Config("sensors: rates must be positive".into()));
        }
        if !self.force_bias.iter().all(|x| x.is_finite()) {
            return Err(Error::Config("sensors: bias must be finite".into()));
        }
        Ok(())
    }

    pub fn sigma_r_rad2(&self) -> Vector3<f64> {
        self.sigma_r_deg2 * deg2_to_rad2()
    }

    pub fn sigma_omega_rad2(&self) -> Vector3<f64> {
        self.sigma_omega_deg2 * deg2_to_rad2()
    }
}

fn deg2_to_rad2() -> f64 {
    1f64.to_radians().powi(2)
}

/// Zero-mean Gaussian with diagonal covariance `var`.
pub fn gaussian<R: Rng + ?Sized>(var: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let z: f64 = rng.sample(StandardNormal);
        var[i].sqrt() * z
    })
}

/// Delayed, noisy copy of a true state. The noise is drawn even when a
/// covariance is zero so the stream layout does not depend on the models.
pub fn corrupt_state<R: Rng + ?Sized>(
    state: &RigidBodyState,
    models: &SensorModels,
    rng: &mut R,
) -> RigidBodyState {
    let dp = gaussian(&models.sigma_p, rng);
    let dr = gaussian(&models.sigma_r_rad2(), rng);
    let dv = gaussian(&models.sigma_v, rng);
    let dw = gaussian(&models.sigma_omega_rad2(), rng);
    RigidBodyState {
        position: state.position + dp,
        rotation: state.rotation * exp_so3(&dr),
        velocity: state.velocity + dv,
        angular_velocity: state.angular_velocity + dw,
    }
}

/// f̃ = f + m_f + n_f.
pub fn force_measure<R: Rng + ?Sized>(
    f_i_true: &Vector3<f64>,
    models: &SensorModels,
    rng: &mut R,
) -> Vector3<f64> {
    f_i_true + models.force_bias + gaussian(&models.sigma_f, rng)
}

/// Rounds a duration to a whole number of periods of length `dt`.
fn periods(duration: f64, dt: f64) -> usize {
    (duration / dt).round().max(0.0) as usize
}

/// Motion-capture model fed with every physics sample.
#[derive(Debug, Clone)]
pub struct Mocap {
    models: SensorModels,
    lag: usize,
    sample_every: usize,
    history: VecDeque<RigidBodyState>,
    ticks: usize,
    held: Option<RigidBodyState>,
}

impl Mocap {
    pub fn new(models: SensorModels, physics_dt: f64) -> Self {
        let lag = periods(models.mocap_delay, physics_dt);
        let sample_every = periods(1.0 / models.mocap_rate, physics_dt).max(1);
        Self {
            models,
            lag,
            sample_every,
            history: VecDeque::with_capacity(lag + 1),
            ticks: 0,
            held: None,
        }
    }

    /// Delay in physics samples.
    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Pushes the true state of the current physics tick and returns the
    /// held measurement, refreshed on sampling instants. Before enough
    /// history exists the oldest sample stands in for the delayed one.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        state: &RigidBodyState,
        rng: &mut R,
    ) -> RigidBodyState {
        self.history.push_front(*state);
        self.history.truncate(self.lag + 1);
        if self.ticks.is_multiple_of(self.sample_every) || self.held.is_none() {
            let delayed = self.history.back().expect("history is nonempty");
            self.held = Some(corrupt_state(delayed, &self.models, rng));
        }
        self.ticks += 1;
        self.held.expect("sample taken")
    }
}

/// Force sensor with zero-order hold at its own rate.
#[derive(Debug, Clone)]
pub struct ForceSensor {
    models: SensorModels,
    sample_every: usize,
    ticks: usize,
    held: Vector3<f64>,
}

impl ForceSensor {
    pub fn new(models: SensorModels, physics_dt: f64) -> Self {
        Self {
            models,
            sample_every: periods(1.0 / models.force_rate, physics_dt).max(1),
            ticks: 0,
            held: Vector3::zeros(),
        }
    }

    pub fn update<R: Rng + ?Sized>(
        &mut self,
        f_i_true: &Vector3<f64>,
        rng: &mut R,
    ) -> Vector3<f64> {
        if self.ticks.is_multiple_of(self.sample_every) {
            self.held = force_measure(f_i_true, &self.models, rng);
        }
        self.ticks += 1;
        self.held
    }
}

/// Stateless single measurement from a history slice ordered oldest first,
/// sampled every `physics_dt`.
pub fn mocap_measure<R: Rng + ?Sized>(
    history: &[RigidBodyState],
    physics_dt: f64,
    models: &SensorModels,
    rng: &mut R,
) -> Result<RigidBodyState> {
    let lag = periods(models.mocap_delay, physics_dt);
    if history.len() < lag + 1 {
        return Err(Error::Contract(format!(
            "mocap needs {} samples of history, got {}",
            lag + 1,
            history.len()
        )));
    }
    Ok(corrupt_state(
        &history[history.len() - 1 - lag],
        models,
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(t: f64) -> RigidBodyState {
        RigidBodyState::at_rest(Vector3::new(t, 0.0, 0.0))
    }

    #[test]
    fn ideal_sensors_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = SensorModels::ideal();
        let mut mocap = Mocap::new(m, 1e-3);
        let s = RigidBodyState {
            position: Vector3::new(1.0, 2.0, 3.0),
            rotation: exp_so3(&Vector3::new(0.1, -0.2, 0.3)),
            velocity: Vector3::new(0.1, 0.2, 0.3),
            angular_velocity: Vector3::new(-1.0, 0.5, 0.25),
        };
        assert_eq!(mocap.update(&s, &mut rng), s);
        let f = Vector3::new(1.0, -2.0, 3.0);
        assert_eq!(force_measure(&f, &m, &mut rng), f);
    }

    #[test]
    fn noise_free_delay_lags_a_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = SensorModels {
            mocap_delay: 0.012,
            mocap_rate: 1000.0,
            ..SensorModels::ideal()
        };
        let dt = 1e-3;
        let mut mocap = Mocap::new(m, dt);
        assert_eq!(mocap.lag(), 12);
        for k in 0..100 {
            let t = k as f64 * dt;
            let out = mocap.update(&ramp(t), &mut rng);
            let expected = (t - 0.012).max(0.0);
            assert!((out.position.x - expected).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn zero_order_hold_between_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = SensorModels {
            mocap_delay: 0.0,
            ..SensorModels::ideal()
        };
        let dt = 1e-3;
        let mut mocap = Mocap::new(m, dt);
        for k in 0..30 {
            let out = mocap.update(&ramp(k as f64 * dt), &mut rng);
            let held = (k / 10) as f64 * 0.01;
            assert!((out.position.x - held).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_correlation_peak_sits_at_the_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dt = 1e-3;
        let m = SensorModels {
            mocap_rate: 1000.0,
            ..SensorModels::default()
        };
        let mut mocap = Mocap::new(m, dt);
        let n = 4000;
        // white signal well above the noise floor gives a sharp peak
        let mut truth = Vec::with_capacity(n);
        let mut meas = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            truth.push(x);
            meas.push(mocap.update(&ramp(x), &mut rng).position.x);
        }
        let best = (0..40)
            .max_by(|&a, &b| {
                let c = |lag: usize| -> f64 {
                    (lag..n).map(|k| truth[k - lag] * meas[k]).sum::<f64>() / (n - lag) as f64
                };
                c(a).partial_cmp(&c(b)).unwrap()
            })
            .unwrap();
        assert!((best as i64 - 12).abs() <= 1, "peak at {best}");
    }

    #[test]
    fn force_bias_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = SensorModels {
            sigma_f: Vector3::zeros(),
            ..SensorModels::default()
        };
        let out = force_measure(&Vector3::new(0.0, 0.0, 10.0), &m, &mut rng);
        assert!((out - Vector3::new(0.1, 0.1, 10.1)).norm() < 1e-12);
    }

    #[test]
    fn force_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = SensorModels {
            force_bias: Vector3::zeros(),
            ..SensorModels::default()
        };
        let n = 100_000;
        let mut sum = Vector3::zeros();
        let mut sq = Vector3::zeros();
        for _ in 0..n {
            let x = force_measure(&Vector3::zeros(), &m, &mut rng);
            sum += x;
            sq += x.component_mul(&x);
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean.component_mul(&mean);
        for i in 0..3 {
            assert!((var[i] / 2.5e-3 - 1.0).abs() < 0.05, "axis {i}: {}", var[i]);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut mocap = Mocap::new(SensorModels::default(), 1e-3);
            (0..50)
                .map(|k| mocap.update(&ramp(k as f64), &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stateless_measure_needs_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = SensorModels {
            mocap_delay: 0.012,
            ..SensorModels::ideal()
        };
        let hist: Vec<_> = (0..13).map(|k| ramp(k as f64)).collect();
        let out = mocap_measure(&hist, 1e-3, &m, &mut rng).unwrap();
        assert_eq!(out.position.x, 0.0);
        assert!(mocap_measure(&hist[..5], 1e-3, &m, &mut rng).is_err());
    }

    #[test]
    fn validation() {
        assert!(SensorModels::default().validate().is_ok());
        let bad = SensorModels {
            mocap_delay: -1.0,
            ..SensorModels::default()
        };
        assert!(bad.validate().is_err());
        let bad = SensorModels {
            sigma_f: Vector3::new(-1.0, 0.0, 0.0),
            ..SensorModels::default()
        };
        assert!(bad.validate().is_err());
    }
}
