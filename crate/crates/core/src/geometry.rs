//! Obstacle geometry: level-set distances, gradients, reference directions and
//! region labels.
//!
//! Every obstacle is an axis-aligned (in its own frame) super-ellipsoid
//! `Σ (|x̃_i| / a_i)^{2p} = 1` for the hard core. The soft shell is the same
//! shape scaled uniformly by `ln k + 1`, which for `k = exp(b/a - 1)` is just
//! the ratio `b/a`. Orientation is a rotation in the first two coordinates.

use crate::{check_dim, Error, Matrix, Result, Vector};
use serde::{Deserialize, Serialize};

/// Default tolerance on `Γ` for boundary labels.
pub const REGION_TOL: f64 = 1e-9;

/// `k = exp(b/a - 1)`; `b = a` is the rigid case `k = 1`.
pub fn stiffness_coefficient(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("hard extent must be positive, got {a}")));
    }
    if !(b >= a) || !b.is_finite() {
        return Err(Error::Domain(format!(
            "soft extent {b} must be at least the hard extent {a}"
        )));
    }
    Ok((b / a - 1.0).exp())
}

/// Where a point sits relative to one obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Exterior,
    SoftRegion,
    SoftBoundary,
    HardBoundary,
    HardInterior,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Exterior => "exterior",
            RegionLabel::SoftRegion => "soft_region",
            RegionLabel::SoftBoundary => "soft_boundary",
            RegionLabel::HardBoundary => "hard_boundary",
            RegionLabel::HardInterior => "hard_interior",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A deformable obstacle.
///
/// Fields are public so that simulators can move obstacles and sweeps can
/// rewrite the stiffness; call [`Obstacle::validate`] after editing by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: Vector,
    pub hard_semi_axes: Vector,
    /// `b/a`, equal to `ln k + 1`.
    pub soft_ratio: f64,
    /// Rotation of the local frame in the x-y plane (radians).
    pub orientation: f64,
    pub exponent: u32,
    /// Interior point the reference direction emanates from; `None` means the center.
    pub reference_point: Option<Vector>,
    pub safety_factor: Vector,
    pub linear_velocity: Vector,
    /// Rate of change of `orientation` (rad / time).
    pub angular_velocity: f64,
}

impl Obstacle {
    /// A static, unrotated obstacle with `p = 1` and no safety margin.
    pub fn new(center: Vector, hard_semi_axes: Vector, soft_ratio: f64) -> Result<Self> {
        let d = center.len();
        let obs = Obstacle {
            safety_factor: Vector::from_element(d, 1.0),
            linear_velocity: Vector::zeros(d),
            center,
            hard_semi_axes,
            soft_ratio,
            orientation: 0.0,
            exponent: 1,
            reference_point: None,
            angular_velocity: 0.0,
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Circle / sphere of radius `r`.
    pub fn sphere(center: Vector, r: f64, soft_ratio: f64) -> Result<Self> {
        let d = center.len();
        Self::new(center, Vector::from_element(d, r), soft_ratio)
    }

    pub fn with_orientation(mut self, theta: f64) -> Self {
        self.orientation = theta;
        self
    }

    pub fn with_exponent(mut self, p: u32) -> Result<Self> {
        self.exponent = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_reference_point(mut self, point: Vector) -> Result<Self> {
        self.reference_point = Some(point);
        self.validate()?;
        Ok(self)
    }

    pub fn with_safety_factor(mut self, eta: Vector) -> Result<Self> {
        self.safety_factor = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_velocity(mut self, linear: Vector, angular: f64) -> Result<Self> {
        self.linear_velocity = linear;
        self.angular_velocity = angular;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Checks every numeric invariant; error messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let d = self.center.len();
        let field = |name: &str, msg: String| Err(Error::scenario(name, msg));
        if d < 2 {
            return field("center", format!("dimension must be at least 2, got {d}"));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return field("center", "must be finite".into());
        }
        if self.hard_semi_axes.len() != d {
            return field(
                "hard_semi_axes",
                format!("expected {d} entries, got {}", self.hard_semi_axes.len()),
            );
        }
        if self.hard_semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return field("hard_semi_axes", "all semi-axes must be positive".into());
        }
        if !(self.soft_ratio >= 1.0) || !self.soft_ratio.is_finite() {
            return field(
                "soft_ratio",
                format!("must be >= 1, got {}", self.soft_ratio),
            );
        }
        if !self.orientation.is_finite() {
            return field("orientation_rad", "must be finite".into());
        }
        if self.exponent < 1 {
            return field("exponent", "must be a positive integer".into());
        }
        if self.safety_factor.len() != d {
            return field(
                "safety_factor",
                format!("expected {d} entries, got {}", self.safety_factor.len()),
            );
        }
        if self.safety_factor.iter().any(|e| !(*e >= 1.0) || !e.is_finite()) {
            return field("safety_factor", "every entry must be >= 1".into());
        }
        if self.linear_velocity.len() != d || self.linear_velocity.iter().any(|v| !v.is_finite()) {
            return field(
                "linear_velocity",
                format!("expected {d} finite entries"),
            );
        }
        if !self.angular_velocity.is_finite() {
            return field("angular_velocity", "must be finite".into());
        }
        if let Some(r) = &self.reference_point {
            if r.len() != d {
                return field("reference_point", format!("expected {d} entries, got {}", r.len()));
            }
            let g = self.gamma(r)?;
            if !(g < 1.0) {
                return field(
                    "reference_point",
                    format!("must lie strictly inside the hard core (gamma = {g})"),
                );
            }
        }
        Ok(())
    }

    /// Stiffness coefficient `k = exp(b/a - 1)`.
    pub fn stiffness(&self) -> f64 {
        (self.soft_ratio - 1.0).exp()
    }

    /// Sets the soft shell from a stiffness coefficient (`b/a = ln k + 1`).
    pub fn set_stiffness(&mut self, k: f64) -> Result<()> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::Domain(format!("stiffness must be >= 1, got {k}")));
        }
        self.soft_ratio = k.ln() + 1.0;
        Ok(())
    }

    /// True for `k = 1`: no soft shell.
    pub fn is_rigid(&self) -> bool {
        self.soft_ratio == 1.0
    }

    pub fn reference(&self) -> &Vector {
        self.reference_point.as_ref().unwrap_or(&self.center)
    }

    /// Rotation taking local-frame vectors to the world frame.
    pub fn rotation(&self) -> Matrix {
        let mut r = Matrix::identity(self.dim(), self.dim());
        let (s, c) = self.orientation.sin_cos();
        r[(0, 0)] = c;
        r[(0, 1)] = -s;
        r[(1, 0)] = s;
        r[(1, 1)] = c;
        r
    }

    /// `R(-θ) (ξ - ξ^c)`.
    pub fn to_local(&self, x: &Vector) -> Vector {
        let mut v = x - &self.center;
        rotate_plane(&mut v, -self.orientation);
        v
    }

    pub fn local_dir_to_world(&self, v: &Vector) -> Vector {
        let mut w = v.clone();
        rotate_plane(&mut w, self.orientation);
        w
    }

    /// The same obstacle with every hard semi-axis multiplied by its safety factor.
    pub fn inflated(&self) -> Obstacle {
        let mut o = self.clone();
        o.hard_semi_axes = self.hard_semi_axes.component_mul(&self.safety_factor);
        o.safety_factor = Vector::from_element(self.dim(), 1.0);
        o
    }

    fn level(&self, local: &Vector, scale: f64) -> f64 {
        let two_p = 2 * self.exponent as i32;
        local
            .iter()
            .zip(self.hard_semi_axes.iter())
            .map(|(x, a)| (x.abs() / (scale * a)).powi(two_p))
            .sum()
    }

    /// Hard-core distance function `Γ`.
    pub fn gamma(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.level(&self.to_local(x), 1.0))
    }

    /// Soft-shell distance function `Γ_k = Γ / (ln k + 1)^{2p}`.
    pub fn gamma_soft(&self, x: &Vector) -> Result<f64> {
        Ok(self.gamma(x)? / self.soft_ratio.powi(2 * self.exponent as i32))
    }

    /// World-frame gradient `dΓ/dξ`.
    pub fn gamma_gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        let local = self.to_local(x);
        if local.iter().all(|v| *v == 0.0) {
            return Err(Error::DegeneratePoint("gradient is undefined at the obstacle center"));
        }
        let p = self.exponent as i32;
        let grad_local = Vector::from_iterator(
            self.dim(),
            local.iter().zip(self.hard_semi_axes.iter()).map(|(y, a)| {
                // d/dy (|y|/a)^{2p} = 2p/a · (|y|/a)^{2p-1} · sign(y)
                2.0 * p as f64 / a * (y.abs() / a).powi(2 * p - 1) * y.signum()
            }),
        );
        Ok(self.local_dir_to_world(&grad_local))
    }

    /// Unit vector from the reference point towards `x`.
    pub fn reference_direction(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        let d = x - self.reference();
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::DegeneratePoint(
                "reference direction is undefined at the reference point",
            ));
        }
        Ok(d / n)
    }

    pub fn classify_region(&self, x: &Vector, tol: f64) -> Result<RegionLabel> {
        let g = self.gamma(x)?;
        let gk = g / self.soft_ratio.powi(2 * self.exponent as i32);
        Ok(label_from_gammas(g, gk, tol))
    }

    /// Point on the hard (`soft = false`) or soft boundary in the direction
    /// `angle` measured in the obstacle frame. Planar obstacles only.
    pub fn boundary_point(&self, angle: f64, soft: bool) -> Vector {
        let mut u = Vector::zeros(self.dim());
        u[0] = angle.cos();
        u[1] = angle.sin();
        let scale = if soft { self.soft_ratio } else { 1.0 };
        let t = self.level(&u, scale).powf(-1.0 / (2.0 * self.exponent as f64));
        &self.center + self.local_dir_to_world(&(u * t))
    }
}

/// Region label from precomputed `Γ` and `Γ_k`.
pub fn label_from_gammas(gamma: f64, gamma_soft: f64, tol: f64) -> RegionLabel {
    if (gamma - 1.0).abs() <= tol {
        RegionLabel::HardBoundary
    } else if gamma < 1.0 {
        RegionLabel::HardInterior
    } else if (gamma_soft - 1.0).abs() <= tol {
        RegionLabel::SoftBoundary
    } else if gamma_soft < 1.0 {
        RegionLabel::SoftRegion
    } else {
        RegionLabel::Exterior
    }
}

/// Rotates the first two coordinates of `v` by `angle`.
pub(crate) fn rotate_plane(v: &mut Vector, angle: f64) {
    if angle == 0.0 {
        return;
    }
    let (s, c) = angle.sin_cos();
    let (x, y) = (v[0], v[1]);
    v[0] = c * x - s * y;
    v[1] = s * x + c * y;
}

/// `d - 1` orthonormal vectors spanning the hyperplane orthogonal to `normal`.
///
/// In the plane the single tangent is the normal rotated 90° counterclockwise.
/// In higher dimensions the columns of the Householder reflection that maps the
/// normal onto `±e_1` are used, skipping the first.
pub fn tangent_basis(normal: &Vector) -> Result<Vec<Vector>> {
    let d = normal.len();
    let norm = normal.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegeneratePoint("tangent basis needs a nonzero normal"));
    }
    let n = normal / norm;
    match d {
        0 | 1 => Ok(Vec::new()),
        2 => Ok(vec![crate::vector(&[-n[1], n[0]])]),
        _ => {
            let s = if n[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut u = n.clone();
            u[0] += s;
            let uu = u.dot(&u);
            let h = Matrix::identity(d, d) - (&u * u.transpose()) * (2.0 / uu);
            Ok((1..d).map(|j| h.column(j).into_owned()).collect())
        }
    }
}

/// All four soft-intersection conditions for a pair of obstacles.
pub fn in_intersection(a: &Obstacle, b: &Obstacle, x: &Vector) -> Result<bool> {
    let (ga, gb) = (a.gamma(x)?, b.gamma(x)?);
    let (gka, gkb) = (a.gamma_soft(x)?, b.gamma_soft(x)?);
    Ok(ga > 1.0 && gb > 1.0 && gka > 0.0 && gka <= 1.0 && gkb > 0.0 && gkb <= 1.0)
}

/// Whether two planar soft shells overlap (boundary sampling plus containment).
pub fn soft_shells_overlap(a: &Obstacle, b: &Obstacle) -> Result<bool> {
    const SAMPLES: usize = 720;
    if a.gamma_soft(&b.center)? <= 1.0 || b.gamma_soft(&a.center)? <= 1.0 {
        return Ok(true);
    }
    for i in 0..SAMPLES {
        let angle = std::f64::consts::TAU * i as f64 / SAMPLES as f64;
        if b.gamma_soft(&a.boundary_point(angle, true))? <= 1.0
            || a.gamma_soft(&b.boundary_point(angle, true))? <= 1.0
        {
            return Ok(true);
        }
    }
    Ok(false)
}
