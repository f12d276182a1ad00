//! Adaptive motion strategy on top of the modulated field.
//!
//! Two additive corrections, both of magnitude `c` times a decaying function of
//! the soft-shell distance `Γ_k`:
//!
//! * soft-region term, one per deformable obstacle:
//!   `S(θ2, θ1) · R(θ2 - φ_r) r̂ · c / Γ_k²`
//! * intersection term, one per overlapping pair, subtracted:
//!   `S(θ2, θ1) · |r̂ · e_1| · R(θ2 - φ_e) e_1 · c · (2 / (Γ_k^n + Γ_k^p))²`
//!
//! `θ2` is the desired heading and `φ_r`, `φ_e` the angles of `r̂` and `e_1`.
//! Each rotation turns its vector by the deviation from the heading, so both
//! corrections act along the heading. `θ1` is the obstacle's frame angle.

use crate::dynamics::DynamicalSystem;
use crate::geometry::{in_intersection, soft_shells_overlap, tangent_basis, Obstacle};
use crate::modulation::{combine_multi_detailed, BlendRule};
use crate::{Error, Result, Vector};
use log::trace;
use serde::{Deserialize, Serialize};

/// How the heading angle `θ2` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta2Policy {
    /// Angle of the modulated velocity at the query point.
    #[default]
    FollowVelocity,
    Fixed(f64),
}

/// Which obstacle pairs are tested for intersection slow-down.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    #[default]
    #[serde(with = "auto_tag")]
    Auto,
    Explicit(Vec<(usize, usize)>),
}

mod auto_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"auto\" or a pair list, got {s:?}")))
        }
    }
}

/// Ball around the attractor inside which the soft-region term is switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorGate {
    pub center: Vector,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    /// Modulation factor (velocity units).
    pub c: f64,
    pub theta2_policy: Theta2Policy,
    /// Value of `sgn` at zero; `+1` or `-1`.
    pub sgn_zero_value: f64,
    pub intersection_pairs: PairSelection,
    pub blend: BlendRule,
    pub soft_speedup: bool,
    pub intersection_slowdown: bool,
    pub attractor_gate: Option<AttractorGate>,
    /// Largest net correction as a fraction of the modulated speed; `None` disables the cap.
    pub speed_change_cap: Option<f64>,
}

/// Default for [`StrategyConfig::speed_change_cap`].
pub const DEFAULT_SPEED_CHANGE_CAP: f64 = 0.5;

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            c: 0.0,
            theta2_policy: Theta2Policy::FollowVelocity,
            sgn_zero_value: 1.0,
            intersection_pairs: PairSelection::Auto,
            blend: BlendRule::ProductOfOthers,
            soft_speedup: true,
            intersection_slowdown: true,
            attractor_gate: None,
            speed_change_cap: Some(DEFAULT_SPEED_CHANGE_CAP),
        }
    }
}

impl StrategyConfig {
    pub fn with_c(c: f64) -> Self {
        StrategyConfig {
            c,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::scenario("strategy.c", format!("must be >= 0, got {}", self.c)));
        }
        if let Theta2Policy::Fixed(a) = self.theta2_policy {
            let pi = std::f64::consts::PI;
            if !(a > -pi && a <= pi) {
                return Err(Error::scenario(
                    "strategy.theta2_policy",
                    format!("fixed angle must lie in (-pi, pi], got {a}"),
                ));
            }
        }
        if self.sgn_zero_value != 1.0 && self.sgn_zero_value != -1.0 {
            return Err(Error::scenario("strategy.sgn_zero_value", "must be 1 or -1"));
        }
        if let Some(k) = self.speed_change_cap {
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::scenario(
                    "strategy.speed_change_cap",
                    format!("must lie in (0, 1), got {k}"),
                ));
            }
        }
        Ok(())
    }
}

/// `sgn(cos(θ2 - θ1))`, with `zero_value` where the cosine vanishes.
pub fn sign_factor(theta2: f64, theta1: f64, zero_value: f64) -> f64 {
    let c = (theta2 - theta1).cos();
    if c > 0.0 {
        1.0
    } else if c < 0.0 {
        -1.0
    } else {
        zero_value
    }
}

/// Heading angle and whether the zero-velocity fallback (`θ2 = 0`) was used.
pub fn resolve_theta2(policy: Theta2Policy, velocity: &Vector) -> (f64, bool) {
    match policy {
        Theta2Policy::Fixed(a) => (a, false),
        Theta2Policy::FollowVelocity => {
            if velocity.norm() > 1e-12 {
                (velocity[1].atan2(velocity[0]), false)
            } else {
                (0.0, true)
            }
        }
    }
}

/// `R(θ2 - φ) u` for a unit vector `u` at angle `φ`: `u` turned by its deviation from the heading.
pub fn aligned_direction(theta2: f64, u: &Vector) -> Vector {
    let deviation = theta2 - u[1].atan2(u[0]);
    let (s, c) = deviation.sin_cos();
    crate::vector(&[c * u[0] - s * u[1], s * u[0] + c * u[1]])
}

fn require_planar(x: &Vector) -> Result<()> {
    if x.len() == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "the motion strategy is planar; got a {}-dimensional state",
            x.len()
        )))
    }
}

fn near_attractor(cfg: &StrategyConfig, x: &Vector) -> bool {
    cfg.attractor_gate
        .as_ref()
        .is_some_and(|g| (x - &g.center).norm() < g.radius)
}

/// The summed soft-region correction (without the input velocity).
pub fn soft_region_term(obstacles: &[Obstacle], x: &Vector, theta2: f64, cfg: &StrategyConfig) -> Result<Vector> {
    require_planar(x)?;
    let mut term = Vector::zeros(2);
    if cfg.c == 0.0 || !cfg.soft_speedup || obstacles.is_empty() {
        return Ok(term);
    }
    if near_attractor(cfg, x) {
        trace!("soft-region term gated: within attractor ball");
        return Ok(term);
    }
    for (i, obs) in obstacles.iter().enumerate() {
        if obs.is_rigid() {
            trace!("soft-region term gated: obstacle {i} is rigid");
            continue;
        }
        let gk = obs.gamma_soft(x)?;
        let r_hat = obs.reference_direction(x)?;
        let s = sign_factor(theta2, obs.orientation, cfg.sgn_zero_value);
        term += aligned_direction(theta2, &r_hat) * (s * cfg.c / (gk * gk));
    }
    Ok(term)
}

/// `ẋ + Σ_n S · R r̂ · c / Γ_k²`.
pub fn soft_region_adjustment(
    obstacles: &[Obstacle],
    x: &Vector,
    velocity: &Vector,
    theta2: f64,
    cfg: &StrategyConfig,
) -> Result<Vector> {
    Ok(velocity + soft_region_term(obstacles, x, theta2, cfg)?)
}

/// Reference/tangent alignment `r̂ · e_1` and the tangent `e_1` for one obstacle.
fn alignment_and_tangent(obs: &Obstacle, x: &Vector) -> Result<(f64, Vector)> {
    let r_hat = obs.reference_direction(x)?;
    let e1 = tangent_basis(&obs.gamma_gradient(x)?)?.swap_remove(0);
    Ok((r_hat.dot(&e1), e1))
}

/// Reference/tangent alignment `r̂ · e_1` for one obstacle.
pub fn reference_tangent_alignment(obs: &Obstacle, x: &Vector) -> Result<f64> {
    Ok(alignment_and_tangent(obs, x)?.0)
}

/// The summed intersection correction as it is subtracted (without the input velocity).
pub fn intersection_term(
    obstacles: &[Obstacle],
    pairs: &[(usize, usize)],
    x: &Vector,
    theta2: f64,
    cfg: &StrategyConfig,
) -> Result<Vector> {
    require_planar(x)?;
    let mut term = Vector::zeros(2);
    if cfg.c == 0.0 || !cfg.intersection_slowdown {
        return Ok(term);
    }
    for &(n, p) in pairs {
        let (a, b) = (&obstacles[n], &obstacles[p]);
        if !in_intersection(a, b, x)? {
            continue;
        }
        let (alpha, e1) = alignment_and_tangent(a, x)?;
        let (gn, gp) = (a.gamma_soft(x)?, b.gamma_soft(x)?);
        let scale = 2.0 / (gn + gp);
        let s = sign_factor(theta2, a.orientation, cfg.sgn_zero_value);
        term += aligned_direction(theta2, &e1) * (s * alpha.abs() * cfg.c * scale * scale);
    }
    Ok(term)
}

/// `ẋ - Σ_pairs S · |r̂·e_1| · R e_1 · c · (2 / (Γ_k^n + Γ_k^p))²`.
pub fn intersection_adjustment(
    obstacles: &[Obstacle],
    pairs: &[(usize, usize)],
    x: &Vector,
    velocity: &Vector,
    theta2: f64,
    cfg: &StrategyConfig,
) -> Result<Vector> {
    Ok(velocity - intersection_term(obstacles, pairs, x, theta2, cfg)?)
}

/// Pairs whose soft shells overlap, each unordered pair once with `n < p`.
pub fn discover_pairs(obstacles: &[Obstacle]) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for n in 0..obstacles.len() {
        for p in n + 1..obstacles.len() {
            if soft_shells_overlap(&obstacles[n], &obstacles[p])? {
                pairs.push((n, p));
            }
        }
    }
    Ok(pairs)
}

/// Everything the velocity pipeline reads: DS, current obstacle poses, strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ds: DynamicalSystem,
    pub obstacles: Vec<Obstacle>,
    pub strategy: StrategyConfig,
    /// Resolved intersection pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl Scene {
    /// Resolves `Auto` pair selection against the current obstacle set.
    pub fn new(ds: DynamicalSystem, obstacles: Vec<Obstacle>, strategy: StrategyConfig) -> Result<Self> {
        strategy.validate()?;
        let d = ds.dim();
        for (i, o) in obstacles.iter().enumerate() {
            if o.dim() != d {
                return Err(Error::scenario(
                    format!("obstacles[{i}].center"),
                    format!("expected {d} entries, got {}", o.dim()),
                ));
            }
        }
        let pairs = match &strategy.intersection_pairs {
            PairSelection::Auto => discover_pairs(&obstacles)?,
            PairSelection::Explicit(list) => {
                let mut out = Vec::with_capacity(list.len());
                for (j, &(a, b)) in list.iter().enumerate() {
                    if a >= obstacles.len() || b >= obstacles.len() || a == b {
                        return Err(Error::scenario(
                            format!("strategy.intersection_pairs[{j}]"),
                            format!("invalid pair ({a}, {b}) for {} obstacles", obstacles.len()),
                        ));
                    }
                    let pair = (a.min(b), a.max(b));
                    if !out.contains(&pair) {
                        out.push(pair);
                    }
                }
                out
            }
        };
        Ok(Scene {
            ds,
            obstacles,
            strategy,
            pairs,
        })
    }

    pub fn total_velocity(&self, x: &Vector) -> Result<Vector> {
        Ok(total_velocity_detailed(self, x)?.velocity)
    }
}

/// Intermediate stages of the velocity pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBreakdown {
    pub nominal: Vector,
    pub modulated: Vector,
    pub soft_term: Vector,
    /// As subtracted.
    pub intersection_term: Vector,
    pub velocity: Vector,
    pub theta2: f64,
    pub theta2_fallback: bool,
    /// Upper bound on `|velocity - modulated|`.
    pub correction_bound: f64,
    /// Factor in `[0, 1]` applied to both terms by the speed-change cap.
    pub cap_scale: f64,
}

/// `f(ξ)` → blended modulation → soft-region term → intersection term.
/// `θ2` is resolved once, from the modulated velocity.
pub fn total_velocity_detailed(scene: &Scene, x: &Vector) -> Result<VelocityBreakdown> {
    let nominal = scene.ds.eval(x)?;
    let cfg = &scene.strategy;
    let combined = combine_multi_detailed(&scene.obstacles, &nominal, x, cfg.blend)?;
    let modulated = combined.velocity;

    let active = cfg.c > 0.0
        && ((cfg.soft_speedup && scene.obstacles.iter().any(|o| !o.is_rigid()))
            || (cfg.intersection_slowdown && !scene.pairs.is_empty()));
    if !active {
        return Ok(VelocityBreakdown {
            velocity: modulated.clone(),
            soft_term: Vector::zeros(x.len()),
            intersection_term: Vector::zeros(x.len()),
            nominal,
            modulated,
            theta2: 0.0,
            theta2_fallback: false,
            correction_bound: 0.0,
            cap_scale: 1.0,
        });
    }

    let (theta2, theta2_fallback) = resolve_theta2(cfg.theta2_policy, &modulated);
    if theta2_fallback {
        trace!("theta2 fallback: modulated velocity vanishes at {x:?}");
    }
    let soft_term = soft_region_term(&scene.obstacles, x, theta2, cfg)?;
    let intersection_term = intersection_term(&scene.obstacles, &scene.pairs, x, theta2, cfg)?;
    // Both terms lie along the heading, so the correction only changes speed;
    // the cap keeps it below a fraction of the modulated speed.
    let mut correction = &soft_term - &intersection_term;
    let mut cap_scale = 1.0;
    if let Some(kappa) = cfg.speed_change_cap {
        let limit = kappa * modulated.norm();
        let size = correction.norm();
        if size > limit {
            cap_scale = if size > 0.0 { limit / size } else { 0.0 };
            correction *= cap_scale;
        }
    }
    let velocity = &modulated + &correction;

    let mut bound = 0.0;
    if cfg.soft_speedup && !near_attractor(cfg, x) {
        for o in scene.obstacles.iter().filter(|o| !o.is_rigid()) {
            let gk = o.gamma_soft(x)?;
            bound += cfg.c / (gk * gk);
        }
    }
    if cfg.intersection_slowdown {
        for &(n, p) in &scene.pairs {
            let s = 2.0 / (scene.obstacles[n].gamma_soft(x)? + scene.obstacles[p].gamma_soft(x)?);
            bound += cfg.c * s * s;
        }
    }
    debug_assert!(
        (&velocity - &modulated).norm() <= bound * (1.0 + 1e-12) + 8.0 * f64::EPSILON * modulated.norm(),
        "strategy correction exceeds its bound"
    );

    Ok(VelocityBreakdown {
        nominal,
        modulated,
        soft_term,
        intersection_term,
        velocity,
        theta2,
        theta2_fallback,
        correction_bound: bound,
        cap_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LinearDs;
    use crate::modulation::combine_multi;
    use crate::{vector, Matrix};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn linear_scene(obstacles: Vec<Obstacle>, strategy: StrategyConfig) -> Scene {
        let ds = DynamicalSystem::Linear(LinearDs::new(-Matrix::identity(2, 2), vector(&[0.0, 0.0])).unwrap());
        Scene::new(ds, obstacles, strategy).unwrap()
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign_factor(0.3, 0.3, 1.0), 1.0);
        assert_eq!(sign_factor(PI + 0.2, 0.2, 1.0), -1.0);
        assert_eq!(sign_factor(FRAC_PI_2, 0.0, 1.0), 1.0);
        assert_eq!(sign_factor(-FRAC_PI_2, 0.0, 1.0), 1.0);
    }

    #[test]
    fn theta2_examples() {
        assert_eq!(resolve_theta2(Theta2Policy::FollowVelocity, &vector(&[1.0, 0.0])), (0.0, false));
        assert_eq!(
            resolve_theta2(Theta2Policy::FollowVelocity, &vector(&[0.0, -2.0])),
            (-FRAC_PI_2, false)
        );
        assert_eq!(resolve_theta2(Theta2Policy::Fixed(0.7), &vector(&[5.0, 5.0])), (0.7, false));
        assert_eq!(resolve_theta2(Theta2Policy::FollowVelocity, &vector(&[0.0, 0.0])), (0.0, true));
    }

    #[test]
    fn aligned_direction_is_the_heading() {
        let r = vector(&[0.6, -0.8]);
        let d = aligned_direction(2.1, &r);
        assert_relative_eq!(d[0], 2.1f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(d[1], 2.1f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn rigid_obstacles_add_nothing() {
        let rigid = Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.0).unwrap();
        let cfg = StrategyConfig::with_c(0.3);
        let v = vector(&[0.2, -0.4]);
        let out = soft_region_adjustment(&[rigid], &vector(&[1.3, 0.2]), &v, 0.1, &cfg).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn soft_term_magnitude_and_decay() {
        let obs = Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.5).unwrap();
        let cfg = StrategyConfig::with_c(0.1);
        let theta1 = obs.orientation;

        // On the soft boundary Γ_k = 1: magnitude c.
        let x = vector(&[1.5, 0.0]);
        let t = soft_region_term(std::slice::from_ref(&obs), &x, theta1, &cfg).unwrap();
        assert_relative_eq!(t.norm(), 0.1, max_relative = 1e-12);

        // Γ_k = 2 → c/4.
        let x = vector(&[1.5 * 2.0f64.sqrt(), 0.0]);
        assert_relative_eq!(obs.gamma_soft(&x).unwrap(), 2.0, max_relative = 1e-12);
        let t = soft_region_term(std::slice::from_ref(&obs), &x, theta1, &cfg).unwrap();
        assert_relative_eq!(t.norm(), 0.025, max_relative = 1e-12);

        // A heading against the obstacle frame flips the sign.
        let flipped = obs.clone().with_orientation(theta1 + PI);
        let t2 = soft_region_term(std::slice::from_ref(&obs), &x, 0.3, &cfg).unwrap();
        let t3 = soft_region_term(std::slice::from_ref(&flipped), &x, 0.3, &cfg).unwrap();
        assert_relative_eq!((&t2 + &t3).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(t2.norm(), 0.025, max_relative = 1e-12);
    }

    #[test]
    fn attractor_gate_suppresses_soft_term() {
        let obs = Obstacle::sphere(vector(&[0.5, 0.0]), 0.2, 3.0).unwrap();
        let mut cfg = StrategyConfig::with_c(0.1);
        cfg.attractor_gate = Some(AttractorGate {
            center: vector(&[0.0, 0.0]),
            radius: 0.01,
        });
        let t = soft_region_term(std::slice::from_ref(&obs), &vector(&[0.005, 0.0]), 0.0, &cfg).unwrap();
        assert_eq!(t, vector(&[0.0, 0.0]));
        let t = soft_region_term(std::slice::from_ref(&obs), &vector(&[0.02, 0.0]), 0.0, &cfg).unwrap();
        assert!(t.norm() > 0.0);
    }

    fn lens_pair(offset_refs: bool) -> Vec<Obstacle> {
        let k = 0.5f64.exp();
        let mut a = Obstacle::sphere(vector(&[-1.0, 0.0]), 1.0, 1.0).unwrap();
        let mut b = Obstacle::sphere(vector(&[1.0, 0.0]), 1.0, 1.0).unwrap();
        a.set_stiffness(k).unwrap();
        b.set_stiffness(k).unwrap();
        if offset_refs {
            a = a.with_reference_point(vector(&[-1.0, 0.5])).unwrap();
            b = b.with_reference_point(vector(&[1.0, -0.5])).unwrap();
        }
        vec![a, b]
    }

    #[test]
    fn intersection_gate_and_circular_alignment() {
        let obs = lens_pair(false);
        let cfg = StrategyConfig::with_c(0.2);
        let v = vector(&[0.0, 1.0]);
        // Outside the lens nothing changes.
        let out = intersection_adjustment(&obs, &[(0, 1)], &vector(&[5.0, 0.0]), &v, 0.0, &cfg).unwrap();
        assert_eq!(out, v);
        // Circles with centered references: r̂ ⟂ e_1, so nothing is subtracted.
        let x = vector(&[0.0, 0.3]);
        assert!(in_intersection(&obs[0], &obs[1], &x).unwrap());
        let alpha = reference_tangent_alignment(&obs[0], &x).unwrap();
        assert!(alpha.abs() < 1e-15);
        let out = intersection_adjustment(&obs, &[(0, 1)], &x, &v, 0.0, &cfg).unwrap();
        assert_relative_eq!((out - v).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn intersection_magnitude_on_both_soft_boundaries() {
        let obs = lens_pair(true);
        let cfg = StrategyConfig::with_c(0.2);
        // Γ_k = 1 for both: on the y-axis at distance 1.5 from both centers.
        let x = vector(&[0.0, (1.5f64 * 1.5 - 1.0).sqrt()]);
        assert_relative_eq!(obs[0].gamma_soft(&x).unwrap(), 1.0, max_relative = 1e-12);
        assert!(in_intersection(&obs[0], &obs[1], &x).unwrap());
        let alpha = reference_tangent_alignment(&obs[0], &x).unwrap();
        assert!(alpha.abs() > 0.05);
        let t = intersection_term(&obs, &[(0, 1)], &x, 0.0, &cfg).unwrap();
        assert_relative_eq!(t.norm(), 0.2 * alpha.abs(), max_relative = 1e-12);
    }

    #[test]
    fn pair_discovery() {
        let obs = lens_pair(false);
        assert_eq!(discover_pairs(&obs).unwrap(), vec![(0, 1)]);
        let apart = vec![
            Obstacle::sphere(vector(&[-5.0, 0.0]), 1.0, 1.5).unwrap(),
            Obstacle::sphere(vector(&[5.0, 0.0]), 1.0, 1.5).unwrap(),
        ];
        assert!(discover_pairs(&apart).unwrap().is_empty());
    }

    #[test]
    fn total_velocity_examples() {
        let scene = linear_scene(vec![], StrategyConfig::with_c(0.5));
        let x = vector(&[1.0, -2.0]);
        assert_eq!(scene.total_velocity(&x).unwrap(), vector(&[-1.0, 2.0]));

        let rigid = linear_scene(
            vec![Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.0).unwrap()],
            StrategyConfig::with_c(0.5),
        );
        let x = vector(&[300.0, 10.0]);
        let f = vector(&[-300.0, -10.0]);
        let v = rigid.total_velocity(&x).unwrap();
        assert!((v - &f).norm() / f.norm() < 1e-3);

        // Hand composition in a soft region.
        let obs = Obstacle::sphere(vector(&[3.0, 0.0]), 1.0, 1.5)
            .unwrap()
            .with_orientation(PI);
        let soft = linear_scene(vec![obs.clone()], StrategyConfig::with_c(0.4));
        let x = vector(&[4.2, 0.35]);
        assert_eq!(obs.classify_region(&x, 1e-9).unwrap(), crate::geometry::RegionLabel::SoftRegion);
        let f = vector(&[-4.2, -0.35]);
        let m = crate::modulation::modulate_static(&obs, &f, &x).unwrap();
        let heading = m[1].atan2(m[0]);
        let gk = obs.gamma_soft(&x).unwrap();
        let s = if (heading - PI).cos() >= 0.0 { 1.0 } else { -1.0 };
        let expect = &m + vector(&[heading.cos(), heading.sin()]) * (s * 0.4 / (gk * gk));
        let got = soft.total_velocity(&x).unwrap();
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn speed_change_cap() {
        let obs = Obstacle::sphere(vector(&[3.0, 0.0]), 1.0, 1.5)
            .unwrap()
            .with_orientation(PI);
        let x = vector(&[4.2, 0.35]);
        let capped = linear_scene(vec![obs.clone()], StrategyConfig::with_c(50.0));
        let b = total_velocity_detailed(&capped, &x).unwrap();
        assert!(b.cap_scale < 1.0);
        let change = (&b.velocity - &b.modulated).norm();
        assert_relative_eq!(change, DEFAULT_SPEED_CHANGE_CAP * b.modulated.norm(), max_relative = 1e-12);
        // Speed-up only: the direction is kept.
        assert_relative_eq!(b.velocity.normalize().dot(&b.modulated.normalize()), 1.0, epsilon = 1e-12);

        let mut cfg = StrategyConfig::with_c(50.0);
        cfg.speed_change_cap = None;
        let open = linear_scene(vec![obs], cfg);
        let b = total_velocity_detailed(&open, &x).unwrap();
        assert_eq!(b.cap_scale, 1.0);
        assert_eq!(b.velocity, &b.modulated + &b.soft_term);

        let mut bad = StrategyConfig::with_c(1.0);
        bad.speed_change_cap = Some(1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rigid_scene_equals_plain_modulation() {
        let obstacles = vec![
            Obstacle::sphere(vector(&[2.0, 0.0]), 0.5, 1.0).unwrap(),
            Obstacle::new(vector(&[0.0, 2.0]), vector(&[0.8, 0.3]), 1.0)
                .unwrap()
                .with_orientation(0.4),
        ];
        let scene = linear_scene(obstacles.clone(), StrategyConfig::with_c(1.0));
        for p in [[3.0, 1.0], [-1.0, -1.0], [1.0, 2.5], [2.6, -0.4]] {
            let x = vector(&p);
            let f = scene.ds.eval(&x).unwrap();
            let plain = combine_multi(&obstacles, &f, &x, BlendRule::ProductOfOthers).unwrap();
            assert_eq!(scene.total_velocity(&x).unwrap(), plain);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = StrategyConfig::with_c(-1.0);
        assert!(cfg.validate().is_err());
        cfg.c = 1.0;
        cfg.theta2_policy = Theta2Policy::Fixed(4.0);
        assert!(cfg.validate().is_err());
        cfg.theta2_policy = Theta2Policy::Fixed(PI);
        assert!(cfg.validate().is_ok());
        let mut cfg = StrategyConfig::with_c(1.0);
        cfg.intersection_pairs = PairSelection::Explicit(vec![(0, 3)]);
        let ds = DynamicalSystem::Linear(LinearDs::new(-Matrix::identity(2, 2), vector(&[0.0, 0.0])).unwrap());
        assert!(Scene::new(ds, vec![], cfg).is_err());
    }
}
