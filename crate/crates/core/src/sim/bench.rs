use super::{integrate, IntegrationSettings, MotionScript, TrajectoryRecord};
use crate::strategy::Scene;
use crate::{Error, Result, Vector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

/// Runs every start independently; output order matches `starts`.
pub fn batch_run(
    scene: &Scene,
    scripts: &[MotionScript],
    starts: &[Vector],
    settings: &IntegrationSettings,
) -> Vec<Result<TrajectoryRecord>> {
    #[cfg(feature = "parallel")]
    let iter = starts.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = starts.iter();
    iter.map(|s| integrate(scene, scripts, s, settings)).collect()
}

/// The scene with every obstacle's stiffness set to `k`; auto pairs are rediscovered.
fn with_stiffness(scene: &Scene, k: f64) -> Result<Scene> {
    let mut obstacles = scene.obstacles.clone();
    for o in &mut obstacles {
        o.set_stiffness(k)?;
    }
    Scene::new(scene.ds.clone(), obstacles, scene.strategy.clone())
}

fn require_target(settings: &IntegrationSettings) -> Result<()> {
    if settings.target.is_none() {
        return Err(Error::scenario(
            "integration.target",
            "a target ball is required to measure navigation time",
        ));
    }
    Ok(())
}

fn check_k(k: f64) -> Result<()> {
    if k >= 1.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("stiffness must be >= 1, got {k}")))
    }
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSweepRow {
    pub k: f64,
    pub runs: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    /// Runs that entered the target ball.
    pub reached_target: usize,
    pub median_navigation_time: Option<f64>,
    pub mean_navigation_time: Option<f64>,
    /// Per-start navigation times in input order (absent when the target was never reached).
    pub navigation_times: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<KSweepRow>,
}

fn sweep_row(k: f64, records: &[Result<TrajectoryRecord>]) -> KSweepRow {
    let navigation_times: Vec<Option<f64>> = records
        .iter()
        .map(|r| r.as_ref().ok().and_then(|r| r.navigation_time))
        .collect();
    let converged = records.iter().filter(|r| r.as_ref().is_ok_and(|r| r.converged)).count();
    let mut times: Vec<f64> = navigation_times.iter().flatten().copied().collect();
    times.sort_by(f64::total_cmp);
    let runs = records.len();
    KSweepRow {
        k,
        runs,
        converged,
        convergence_rate: if runs == 0 { 0.0 } else { converged as f64 / runs as f64 },
        reached_target: times.len(),
        median_navigation_time: median(&times),
        mean_navigation_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        navigation_times,
    }
}

/// Navigation-time statistics per stiffness value. Requires a target ball.
pub fn k_sweep(
    scene: &Scene,
    scripts: &[MotionScript],
    k_values: &[f64],
    starts: &[Vector],
    settings: &IntegrationSettings,
) -> Result<SweepReport> {
    require_target(settings)?;
    settings.validate()?;
    k_values.iter().try_for_each(|&k| check_k(k))?;
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let posed = with_stiffness(scene, k)?;
        let records = batch_run(&posed, scripts, starts, settings);
        rows.push(sweep_row(k, &records));
    }
    Ok(SweepReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionRow {
    pub start: Vec<f64>,
    pub baseline_time: Option<f64>,
    pub soft_time: Option<f64>,
    /// `(t_baseline - t_soft) / t_baseline`; absent unless both runs converged and reached the target.
    pub reduction: Option<f64>,
    /// Closest approach (hard-core `Γ`) of the rigid baseline path.
    pub baseline_min_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub k: f64,
    pub rows: Vec<ReductionRow>,
}

/// Per-start time reduction of stiffness `k` against the rigid `k = 1` baseline.
pub fn time_reduction_map(
    scene: &Scene,
    scripts: &[MotionScript],
    k: f64,
    starts: &[Vector],
    settings: &IntegrationSettings,
) -> Result<ReductionReport> {
    require_target(settings)?;
    settings.validate()?;
    check_k(k)?;
    let baseline = batch_run(&with_stiffness(scene, 1.0)?, scripts, starts, settings);
    let soft = batch_run(&with_stiffness(scene, k)?, scripts, starts, settings);
    let usable = |r: &Result<TrajectoryRecord>| {
        r.as_ref()
            .ok()
            .filter(|r| r.converged)
            .and_then(|r| r.navigation_time)
    };
    let rows = starts
        .iter()
        .zip(baseline.iter().zip(&soft))
        .map(|(start, (b, s))| {
            let (tb, ts) = (usable(b), usable(s));
            let reduction = match (tb, ts) {
                (Some(tb), Some(ts)) if tb > 0.0 => Some((tb - ts) / tb),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            ReductionRow {
                start: start.iter().copied().collect(),
                baseline_time: tb,
                soft_time: ts,
                reduction,
                baseline_min_gamma: b.as_ref().ok().map(|r| r.min_gamma).filter(|g| g.is_finite()),
            }
        })
        .collect();
    Ok(ReductionReport { k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynamicalSystem, LinearDs};
    use crate::geometry::Obstacle;
    use crate::sim::Target;
    use crate::strategy::StrategyConfig;
    use crate::{vector, Matrix};

    fn head_on() -> (Scene, IntegrationSettings, Vec<Vector>) {
        let ds = DynamicalSystem::Linear(LinearDs::new(-Matrix::identity(2, 2), vector(&[0.0, 0.0])).unwrap());
        let obs = Obstacle::sphere(vector(&[2.0, 0.0]), 0.5, 1.5)
            .unwrap()
            .with_orientation(std::f64::consts::PI);
        let scene = Scene::new(ds, vec![obs], StrategyConfig::with_c(0.1)).unwrap();
        let settings = IntegrationSettings {
            target: Some(Target {
                center: vector(&[0.0, 0.0]),
                radius: 0.5,
            }),
            ..Default::default()
        };
        let starts = vec![vector(&[3.5, 0.1]), vector(&[3.5, 0.3]), vector(&[3.0, 3.0])];
        (scene, settings, starts)
    }

    #[test]
    fn empty_batch() {
        let (scene, settings, _) = head_on();
        assert!(batch_run(&scene, &[], &[], &settings).is_empty());
    }

    #[test]
    fn batch_preserves_order() {
        let (scene, settings, starts) = head_on();
        let out = batch_run(&scene, &[], &starts, &settings);
        for (s, r) in starts.iter().zip(&out) {
            assert_eq!(&r.as_ref().unwrap().steps[0].position, s);
        }
    }

    #[test]
    fn baseline_sweep_matches_rigid_batch() {
        let (scene, settings, starts) = head_on();
        let report = k_sweep(&scene, &[], &[1.0, 1.0], &starts, &settings).unwrap();
        assert_eq!(report.rows[0], report.rows[1]);
        let rigid = with_stiffness(&scene, 1.0).unwrap();
        let direct = batch_run(&rigid, &[], &starts, &settings);
        assert_eq!(report.rows[0], sweep_row(1.0, &direct));
    }

    #[test]
    fn sweep_requires_target_and_valid_k() {
        let (scene, mut settings, starts) = head_on();
        assert!(matches!(
            k_sweep(&scene, &[], &[0.5], &starts, &settings),
            Err(Error::Domain(_))
        ));
        settings.target = None;
        assert!(k_sweep(&scene, &[], &[1.0], &starts, &settings).is_err());
    }

    #[test]
    fn unit_stiffness_reduces_nothing() {
        let (scene, settings, starts) = head_on();
        let map = time_reduction_map(&scene, &[], 1.0, &starts, &settings).unwrap();
        for row in &map.rows {
            assert_eq!(row.reduction, Some(0.0));
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[1.0, 3.0, 7.0]), Some(3.0));
        assert_eq!(median(&[1.0, 3.0]), Some(2.0));
    }
}
