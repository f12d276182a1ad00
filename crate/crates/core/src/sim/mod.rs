//! Fixed-step trajectory integration and the benchmark drivers built on it.

mod bench;
mod metrics;
mod motion;

pub use bench::{batch_run, k_sweep, time_reduction_map, KSweepRow, ReductionReport, ReductionRow, SweepReport};
pub use metrics::{regional_speed_stats, RegionalStats, SpeedStats};
pub use motion::{MotionScript, Pose, Waypoint};

use crate::geometry::{in_intersection, label_from_gammas, RegionLabel, REGION_TOL};
use crate::strategy::Scene;
use crate::{Error, Result, Vector};
use log::debug;

/// Ball whose first entry defines the navigation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub center: Vector,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSettings {
    pub dt: f64,
    pub max_steps: usize,
    pub eps_conv: f64,
    pub target: Option<Target>,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        IntegrationSettings {
            dt: 0.01,
            max_steps: 50_000,
            eps_conv: 1e-3,
            target: None,
        }
    }
}

impl IntegrationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::scenario("integration.dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.max_steps < 1 {
            return Err(Error::scenario("integration.max_steps", "must be >= 1"));
        }
        if !(self.eps_conv > 0.0) || !self.eps_conv.is_finite() {
            return Err(Error::scenario(
                "integration.eps_conv",
                format!("must be > 0, got {}", self.eps_conv),
            ));
        }
        if let Some(t) = &self.target {
            if !(t.radius > 0.0) || !t.radius.is_finite() {
                return Err(Error::scenario(
                    "integration.target.radius",
                    format!("must be > 0, got {}", t.radius),
                ));
            }
        }
        Ok(())
    }
}

/// One classical RK4 step. Stage failures carry the 1-based stage index.
pub fn rk4_step<F>(field: F, x: &Vector, dt: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let k1 = field(x).map_err(|e| stage(1, e))?;
    rk4_from_k1(&field, x, &k1, dt)
}

fn stage(stage: usize, e: Error) -> Error {
    Error::Stage {
        stage,
        source: Box::new(e),
    }
}

fn rk4_from_k1<F>(field: &F, x: &Vector, k1: &Vector, dt: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let h = 0.5 * dt;
    let k2 = field(&(x + k1 * h)).map_err(|e| stage(2, e))?;
    let k3 = field(&(x + &k2 * h)).map_err(|e| stage(3, e))?;
    let k4 = field(&(x + &k3 * dt)).map_err(|e| stage(4, e))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// State at one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub position: Vector,
    pub velocity: Vector,
    pub gammas: Vec<f64>,
    pub gammas_soft: Vec<f64>,
    pub regions: Vec<RegionLabel>,
    /// Inside the soft intersection of at least one configured pair.
    pub intersection: bool,
}

impl StepRecord {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn in_soft_region(&self) -> bool {
        self.regions.contains(&RegionLabel::SoftRegion)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    /// Index of the last recorded step.
    pub step_count: usize,
    pub navigation_time: Option<f64>,
    /// Smallest hard-core `Γ` seen over all steps and obstacles (`+∞` without obstacles).
    pub min_gamma: f64,
    /// Set when the run stopped on an evaluation error.
    pub failure: Option<String>,
}

impl TrajectoryRecord {
    pub fn final_position(&self) -> Option<&Vector> {
        self.steps.last().map(|s| &s.position)
    }
}

/// Scene with obstacle poses taken from the scripts at time `t`.
pub(crate) fn posed_scene(base: &Scene, scripts: &[MotionScript], t: f64) -> Scene {
    let mut scene = base.clone();
    for script in scripts {
        let obs = &mut scene.obstacles[script.obstacle];
        script.pose_at(t).apply(obs);
    }
    scene
}

fn record_step(scene: &Scene, t: f64, x: &Vector, velocity: Vector) -> Result<StepRecord> {
    let n = scene.obstacles.len();
    let mut gammas = Vec::with_capacity(n);
    let mut gammas_soft = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    for o in &scene.obstacles {
        let g = o.gamma(x)?;
        let gk = o.gamma_soft(x)?;
        gammas.push(g);
        gammas_soft.push(gk);
        regions.push(label_from_gammas(g, gk, REGION_TOL));
    }
    let mut intersection = false;
    for &(a, b) in &scene.pairs {
        if in_intersection(&scene.obstacles[a], &scene.obstacles[b], x)? {
            intersection = true;
            break;
        }
    }
    Ok(StepRecord {
        t,
        position: x.clone(),
        velocity,
        gammas,
        gammas_soft,
        regions,
        intersection,
    })
}

/// Integrates from `start` until convergence, the step budget, or an evaluation error.
///
/// Obstacle poses follow `scripts`, frozen over each step. A start inside a
/// hard core is an error; a later interior hit truncates the record instead.
pub fn integrate(
    scene: &Scene,
    scripts: &[MotionScript],
    start: &Vector,
    settings: &IntegrationSettings,
) -> Result<TrajectoryRecord> {
    settings.validate()?;
    crate::check_dim(scene.ds.dim(), start)?;
    for s in scripts {
        s.check_index(scene.obstacles.len())?;
    }

    let initial = posed_scene(scene, scripts, 0.0);
    for (i, o) in initial.obstacles.iter().enumerate() {
        let g = o.gamma(start)?;
        if g < 1.0 {
            return Err(Error::Interior { obstacle: i, gamma: g });
        }
    }

    let attractor = scene.ds.attractor().clone();
    let moving = !scripts.is_empty();
    let mut scene_t = initial;
    let mut x = start.clone();
    let mut record = TrajectoryRecord {
        steps: Vec::new(),
        converged: false,
        step_count: 0,
        navigation_time: None,
        min_gamma: f64::INFINITY,
        failure: None,
    };

    for i in 0..=settings.max_steps {
        let t = i as f64 * settings.dt;
        if moving && i > 0 {
            scene_t = posed_scene(scene, scripts, t);
        }
        let step = scene_t
            .total_velocity(&x)
            .and_then(|v| record_step(&scene_t, t, &x, v));
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                debug!("run stopped at step {i}: {e}");
                record.failure = Some(e.to_string());
                break;
            }
        };
        for &g in &step.gammas {
            record.min_gamma = record.min_gamma.min(g);
        }
        if record.navigation_time.is_none() {
            if let Some(target) = &settings.target {
                if (&x - &target.center).norm() < target.radius {
                    record.navigation_time = Some(t);
                }
            }
        }
        record.step_count = i;
        let done = (&x - &attractor).norm() < settings.eps_conv;
        let k1 = step.velocity.clone();
        record.steps.push(step);
        if done {
            record.converged = true;
            break;
        }
        if i == settings.max_steps {
            break;
        }
        match rk4_from_k1(&|p: &Vector| scene_t.total_velocity(p), &x, &k1, settings.dt) {
            Ok(next) => x = next,
            Err(e) => {
                debug!("run stopped during step {i}: {e}");
                record.failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(record)
}
