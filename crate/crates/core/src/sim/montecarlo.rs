//! Seeded Monte-Carlo campaigns over random interaction-force profiles.

use std::io::Write;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{run_rng, run_scenario};
use super::kpi::KpiReport;
use super::profile::ForceProfile;
use super::scenario::{AllocatorKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::polytope::PolytopeLut;

/// Waypoint force distribution: x, y ~ U(−xy, xy), z ~ U(0, z_max) at every
/// waypoint time, except those at or before `quiet_until` which are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointSampling {
    pub times: Vec<f64>,
    pub xy: f64,
    pub z_max: f64,
    pub quiet_until: Option<f64>,
}

impl Default for WaypointSampling {
    fn default() -> Self {
        Self {
            times: vec![0.0, 20.0, 38.0, 60.0, 80.0],
            xy: 15.0,
            z_max: 15.0,
            quiet_until: None,
        }
    }
}

impl WaypointSampling {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
        self.times
            .iter()
            .map(|&t| {
                let x = rng.random_range(-self.xy..=self.xy);
                let y = rng.random_range(-self.xy..=self.xy);
                let z = rng.random_range(0.0..=self.z_max);
                if self.quiet_until.is_none_or(|q| t > q) {
                    Vector3::new(x, y, z)
                } else {
                    Vector3::zeros()
                }
            })
            .collect()
    }

    pub fn profile(&self, rng: &mut ChaCha8Rng) -> Result<ForceProfile> {
        ForceProfile::new(self.times.clone(), self.sample(rng))
    }
}

/// One configuration of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub allocator: AllocatorKind,
    /// Overrides the selector margin; ignored by the baseline.
    pub r_star: Option<f64>,
}

impl Variant {
    pub fn proposed(r_star: f64) -> Self {
        Self {
            allocator: AllocatorKind::Proposed,
            r_star: Some(r_star),
        }
    }

    pub fn baseline() -> Self {
        Self {
            allocator: AllocatorKind::Baseline,
            r_star: None,
        }
    }

    fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.allocator = self.allocator;
        if let Some(r) = self.r_star {
            cfg.selector.r_star = r;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub scenario: ScenarioConfig,
    pub runs: usize,
    pub master_seed: u64,
    pub variants: Vec<Variant>,
    pub sampling: WaypointSampling,
}

impl McConfig {
    pub fn new(
        scenario: ScenarioConfig,
        runs: usize,
        master_seed: u64,
        variants: Vec<Variant>,
    ) -> Self {
        Self {
            scenario,
            runs,
            master_seed,
            variants,
            sampling: WaypointSampling::default(),
        }
    }
}

/// Aggregate for one variant. Failed runs are excluded from `kpis`.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub variant: Variant,
    pub kpis: Option<KpiReport>,
    /// Indexed by run; None for failed runs.
    pub per_run: Vec<Option<KpiReport>>,
    pub failures: Vec<(usize, String)>,
}

impl McRow {
    pub fn runs_ok(&self) -> usize {
        self.per_run.iter().filter(|r| r.is_some()).count()
    }

    pub fn runs_failed(&self) -> usize {
        self.failures.len()
    }
}

fn one_run(
    cfg: &McConfig,
    variant: &Variant,
    run: usize,
    lut: &Arc<PolytopeLut>,
) -> Result<KpiReport> {
    let mut rng = run_rng(cfg.master_seed, run as u64);
    let profile = cfg.sampling.profile(&mut rng)?;
    let scenario = variant.apply(&cfg.scenario);
    let out = run_scenario(&scenario, Arc::clone(lut), Some(profile), &mut rng)?;
    let kpis = out.kpis()?;
    if !kpis.is_finite() {
        return Err(Error::Contract("non-finite KPIs".into()));
    }
    Ok(kpis)
}

/// Every (variant, run) pair runs in parallel. Run `k` of every variant sees
/// the same waypoints and noise stream, so variants are paired by run index.
pub fn run_monte_carlo(cfg: &McConfig, lut: Arc<PolytopeLut>) -> Result<Vec<McRow>> {
    if cfg.runs == 0 {
        return Err(Error::Config("Monte-Carlo needs at least one run".into()));
    }
    if cfg.variants.is_empty() {
        return Err(Error::Config(
            "Monte-Carlo needs at least one configuration".into(),
        ));
    }
    cfg.scenario.validate()?;
    for v in &cfg.variants {
        v.apply(&cfg.scenario).validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.variants.len())
        .flat_map(|v| (0..cfg.runs).map(move |r| (v, r)))
        .collect();
    let mut results: Vec<((usize, usize), Result<KpiReport>)> = jobs
        .par_iter()
        .map(|&(v, r)| ((v, r), one_run(cfg, &cfg.variants[v], r, &lut)))
        .collect();
    results.sort_by_key(|(key, _)| *key);

    let mut rows: Vec<McRow> = cfg
        .variants
        .iter()
        .map(|v| McRow {
            variant: v.clone(),
            kpis: None,
            per_run: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for ((v, r), res) in results {
        match res {
            Ok(k) => rows[v].per_run.push(Some(k)),
            Err(e) => {
                rows[v].per_run.push(None);
                rows[v].failures.push((r, e.to_string()));
            }
        }
    }
    for row in &mut rows {
        let ok: Vec<KpiReport> = row.per_run.iter().flatten().copied().collect();
        row.kpis = KpiReport::average(&ok);
    }
    Ok(rows)
}

pub const KPI_COLUMNS: &[&str] = &[
    "allocator",
    "r_star",
    "runs_ok",
    "runs_failed",
    "e_p_mean_norm",
    "e_p_rms",
    "e_R_mean_norm",
    "e_R_rms",
    "fei_mean",
    "mei_mean",
    "u_rms",
    "steps",
];

/// One line per configuration. The timing column is opt-in because it is
/// the only field that differs between reruns of the same seed.
pub fn write_kpi_csv<W: Write>(rows: &[McRow], mut out: W, with_timing: bool) -> Result<()> {
    let mut header = KPI_COLUMNS.join(",");
    if with_timing {
        header.push_str(",t_c_mean_ms");
    }
    writeln!(out, "{header}")?;
    for row in rows {
        let r_star = row
            .variant
            .r_star
            .map(|r| r.to_string())
            .unwrap_or_default();
        write!(
            out,
            "{},{},{},{}",
            row.variant.allocator.as_str(),
            r_star,
            row.runs_ok(),
            row.runs_failed()
        )?;
        match &row.kpis {
            Some(k) => write!(
                out,
                ",{},{},{},{},{},{},{},{}",
                k.e_p_mean_norm,
                k.e_p_rms,
                k.e_r_mean_norm,
                k.e_r_rms,
                k.fei_mean,
                k.mei_mean,
                k.u_rms,
                k.steps
            )?,
            None => write!(out, ",,,,,,,,")?,
        }
        if with_timing {
            let t = row
                .kpis
                .and_then(|k| k.t_c_mean)
                .map(|t| t.to_string())
                .unwrap_or_default();
            write!(out, ",{t}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Task;
    use crate::sim::sensors::SensorModels;

    /// Kolmogorov–Smirnov statistic of samples against U(lo, hi).
    fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x - lo) / (hi - lo);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn waypoint_marginals_are_uniform() {
        let s = WaypointSampling {
            times: vec![30.0],
            ..Default::default()
        };
        let mut rng = run_rng(3, 0);
        let draws: Vec<Vector3<f64>> = (0..10_000).map(|_| s.sample(&mut rng)[0]).collect();
        // 1 % critical value of the one-sample KS statistic
        let crit = 1.628 / (draws.len() as f64).sqrt();
        for (axis, lo, hi) in [(0, -15.0, 15.0), (1, -15.0, 15.0), (2, 0.0, 15.0)] {
            let d = ks_uniform(draws.iter().map(|f| f[axis]).collect(), lo, hi);
            assert!(d < crit, "axis {axis}: D = {d}");
        }
    }

    #[test]
    fn quiet_waypoints_are_zero() {
        let s = WaypointSampling {
            quiet_until: Some(20.0),
            ..Default::default()
        };
        let w = s.sample(&mut run_rng(1, 2));
        assert_eq!(w[0], Vector3::zeros());
        assert_eq!(w[1], Vector3::zeros());
        assert!(w[2..].iter().all(|f| f.z >= 0.0 && f.x.abs() <= 15.0));
    }

    #[test]
    fn streams_differ_per_run_and_repeat_per_seed() {
        let s = WaypointSampling::default();
        assert_eq!(s.sample(&mut run_rng(5, 1)), s.sample(&mut run_rng(5, 1)));
        assert_ne!(s.sample(&mut run_rng(5, 1)), s.sample(&mut run_rng(5, 2)));
        assert_ne!(s.sample(&mut run_rng(5, 1)), s.sample(&mut run_rng(6, 1)));
    }

    fn short_campaign(runs: usize) -> McConfig {
        let scenario = ScenarioConfig {
            duration: 3.0,
            kpi_start: 1.0,
            takeoff_time: 1.0,
            sensors: SensorModels::default(),
            task: Task::ForceProfile(crate::sim::ProfileSpec::reference()),
            ..ScenarioConfig::default()
        };
        let mut cfg = McConfig::new(
            scenario,
            runs,
            11,
            vec![Variant::proposed(1.0), Variant::proposed(3.0)],
        );
        cfg.sampling.times = vec![0.0, 1.0, 2.0, 3.0];
        cfg.sampling.quiet_until = Some(0.5);
        cfg
    }

    fn lut() -> Arc<PolytopeLut> {
        Arc::new(PolytopeLut::build(1f64.to_radians(), &Default::default()).unwrap())
    }

    #[test]
    fn campaign_is_reproducible() {
        let cfg = short_campaign(3);
        let lut = lut();
        let csv = |rows: &[McRow]| {
            let mut buf = Vec::new();
            write_kpi_csv(rows, &mut buf, false).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = run_monte_carlo(&cfg, Arc::clone(&lut)).unwrap();
        let b = run_monte_carlo(&cfg, lut).unwrap();
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|r| r.runs_ok() == 3 && r.runs_failed() == 0));
        assert_eq!(csv(&a).lines().count(), 3);
    }

    #[test]
    fn single_run_aggregate_equals_the_run() {
        let cfg = short_campaign(1);
        let rows = run_monte_carlo(&cfg, lut()).unwrap();
        for row in rows {
            let single = row.per_run[0].unwrap();
            let agg = row.kpis.unwrap();
            assert_eq!(agg.e_p_rms, single.e_p_rms);
            assert_eq!(agg.u_rms, single.u_rms);
            assert_eq!(agg.steps, single.steps);
        }
    }

    #[test]
    fn failed_runs_are_counted_and_excluded() {
        let mut cfg = short_campaign(2);
        cfg.scenario.abort_error = Some(1e-9);
        let rows = run_monte_carlo(&cfg, lut()).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.runs_failed() == 2 && r.kpis.is_none()));
        let mut buf = Vec::new();
        write_kpi_csv(&rows, &mut buf, true).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("proposed,1,0,2,"));
    }

    #[test]
    fn rejects_empty_campaigns() {
        let mut cfg = short_campaign(0);
        assert!(run_monte_carlo(&cfg, lut()).is_err());
        cfg.runs = 1;
        cfg.variants.clear();
        assert!(run_monte_carlo(&cfg, lut()).is_err());
    }
}
