use crate::geometry::{rotate_plane, Obstacle};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub center: Vector,
    pub orientation: f64,
}

/// Obstacle pose plus the velocities of the segment it lies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub center: Vector,
    pub orientation: f64,
    pub linear_velocity: Vector,
    pub angular_velocity: f64,
}

impl Pose {
    /// Moves `obs` rigidly (reference point included) and sets its velocities.
    pub fn apply(&self, obs: &mut Obstacle) {
        if obs.center != self.center || obs.orientation != self.orientation {
            if let Some(r) = &obs.reference_point {
                let mut local = r - &obs.center;
                rotate_plane(&mut local, self.orientation - obs.orientation);
                obs.reference_point = Some(&self.center + local);
            }
            obs.center = self.center.clone();
            obs.orientation = self.orientation;
        }
        obs.linear_velocity = self.linear_velocity.clone();
        obs.angular_velocity = self.angular_velocity;
    }
}

/// Piecewise-linear trajectory for one obstacle.
///
/// Before the first waypoint the obstacle rests at the first pose, after the
/// last one at the last pose; velocities are zero there.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub obstacle: usize,
    pub waypoints: Vec<Waypoint>,
}

impl MotionScript {
    pub fn new(obstacle: usize, waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::scenario("waypoints", "at least one waypoint is required"));
        }
        let d = waypoints[0].center.len();
        for (i, w) in waypoints.iter().enumerate() {
            if !w.t.is_finite() {
                return Err(Error::scenario(format!("waypoints[{i}].t"), "must be finite"));
            }
            if w.center.len() != d || w.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::scenario(
                    format!("waypoints[{i}].center"),
                    format!("expected {d} finite entries"),
                ));
            }
            if !w.orientation.is_finite() {
                return Err(Error::scenario(format!("waypoints[{i}].orientation_rad"), "must be finite"));
            }
            if i > 0 && !(w.t > waypoints[i - 1].t) {
                return Err(Error::scenario(
                    format!("waypoints[{i}].t"),
                    "waypoint times must be strictly increasing",
                ));
            }
        }
        Ok(MotionScript { obstacle, waypoints })
    }

    pub(crate) fn check_index(&self, n_obstacles: usize) -> Result<()> {
        if self.obstacle < n_obstacles {
            Ok(())
        } else {
            Err(Error::scenario(
                "obstacle",
                format!("index {} out of range for {n_obstacles} obstacles", self.obstacle),
            ))
        }
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        let w = &self.waypoints;
        let rest = |p: &Waypoint| Pose {
            center: p.center.clone(),
            orientation: p.orientation,
            linear_velocity: Vector::zeros(p.center.len()),
            angular_velocity: 0.0,
        };
        if t < w[0].t {
            return rest(&w[0]);
        }
        // Last segment whose start is at or before t.
        let j = w.partition_point(|p| p.t <= t) - 1;
        if j + 1 == w.len() {
            return rest(&w[j]);
        }
        let (a, b) = (&w[j], &w[j + 1]);
        let span = b.t - a.t;
        let s = (t - a.t) / span;
        let delta = &b.center - &a.center;
        let turn = b.orientation - a.orientation;
        Pose {
            center: &a.center + &delta * s,
            orientation: a.orientation + turn * s,
            linear_velocity: delta / span,
            angular_velocity: turn / span,
        }
    }
}
