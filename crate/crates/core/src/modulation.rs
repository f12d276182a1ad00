//! The modulation matrix `M(ξ) = E(ξ) D(ξ) E(ξ)⁻¹`.
//!
//! `E` has the reference direction as its first column and the tangent basis
//! of the hard-core level set as the rest; `D` compresses the reference
//! direction by `1 - 1/Γ` and stretches the tangents by `1 + 1/Γ`. At the hard
//! boundary the reference eigenvalue vanishes and inflow is cancelled.
//!
//! Safety margins are applied by evaluating everything on the obstacle with its
//! semi-axes multiplied by `η` (the same level set as dividing the local
//! coordinates by `η`). Directions come from that inflated shape, so the
//! cancellation holds on the inflated surface.

use crate::geometry::{tangent_basis, Obstacle};
use crate::{check_dim, Error, Matrix, Result, Vector};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;

/// Queries with `Γ` below `1 - INTERIOR_TOL` (after safety scaling) are rejected.
pub const INTERIOR_TOL: f64 = 1e-6;
/// Lower clamp on `Γ` fed to the eigenvalue law.
pub const GAMMA_FLOOR: f64 = 1.0 + 1e-9;
/// `|det E|` below this is treated as a singular basis.
pub const MIN_BASIS_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationResult {
    pub basis: Matrix,
    pub eigenvalues: Matrix,
    pub modulation: Matrix,
    pub lambda_r: f64,
    pub lambda_e: Vec<f64>,
    /// `Γ` after safety scaling and clamping.
    pub gamma_used: f64,
}

impl ModulationResult {
    pub fn apply(&self, f: &Vector) -> Vector {
        &self.modulation * f
    }
}

/// `(λ_r, λ_e) = (1 - 1/Γ, 1 + 1/Γ)` for `Γ ≥ 1`.
pub fn eigenvalue_pair(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!(
            "eigenvalues are only defined for gamma >= 1, got {gamma}"
        )));
    }
    let inv = 1.0 / gamma;
    Ok((1.0 - inv, 1.0 + inv))
}

/// `E = [r̂, e_1, …, e_{d-1}]` for the obstacle as given (no safety scaling).
pub fn basis_matrix(obs: &Obstacle, x: &Vector) -> Result<Matrix> {
    check_dim(obs.dim(), x)?;
    let r_hat = obs.reference_direction(x)?;
    let normal = obs.gamma_gradient(x)?;
    let tangents = tangent_basis(&normal)?;
    let d = obs.dim();
    let mut e = Matrix::zeros(d, d);
    e.set_column(0, &r_hat);
    for (j, t) in tangents.iter().enumerate() {
        e.set_column(j + 1, t);
    }
    let det = e.determinant();
    if det.abs() < MIN_BASIS_DET {
        return Err(Error::SingularBasis { det });
    }
    Ok(e)
}

fn effective(obs: &Obstacle) -> Cow<'_, Obstacle> {
    if obs.safety_factor.iter().all(|e| *e == 1.0) {
        Cow::Borrowed(obs)
    } else {
        Cow::Owned(obs.inflated())
    }
}

/// Full modulation data at `x`, honouring the obstacle's safety factor.
pub fn modulation_matrix(obs: &Obstacle, x: &Vector) -> Result<ModulationResult> {
    let shape = effective(obs);
    let gamma = shape.gamma(x)?;
    if gamma < 1.0 - INTERIOR_TOL {
        return Err(Error::Interior { obstacle: 0, gamma });
    }
    let gamma_used = gamma.max(GAMMA_FLOOR);
    let (lambda_r, lambda_e) = eigenvalue_pair(gamma_used)?;
    let basis = basis_matrix(&shape, x)?;
    let d = obs.dim();
    let mut diag = Vector::from_element(d, lambda_e);
    diag[0] = lambda_r;
    let eigenvalues = Matrix::from_diagonal(&diag);
    let inverse = basis
        .clone()
        .try_inverse()
        .ok_or(Error::SingularBasis { det: 0.0 })?;
    let modulation = &basis * &eigenvalues * inverse;
    Ok(ModulationResult {
        basis,
        eigenvalues,
        modulation,
        lambda_r,
        lambda_e: vec![lambda_e; d - 1],
        gamma_used,
    })
}

/// `M(ξ) f`.
pub fn modulate_static(obs: &Obstacle, f: &Vector, x: &Vector) -> Result<Vector> {
    check_dim(obs.dim(), f)?;
    Ok(modulation_matrix(obs, x)?.apply(f))
}

/// Velocity of the obstacle's material point at `x`: `v + ω × (x - c)`.
pub fn obstacle_point_velocity(obs: &Obstacle, x: &Vector) -> Vector {
    let mut u = obs.linear_velocity.clone();
    if obs.angular_velocity != 0.0 {
        let rel = x - &obs.center;
        u[0] -= obs.angular_velocity * rel[1];
        u[1] += obs.angular_velocity * rel[0];
    }
    u
}

pub fn is_static(obs: &Obstacle) -> bool {
    obs.angular_velocity == 0.0 && obs.linear_velocity.iter().all(|v| *v == 0.0)
}

/// `M (f - u) + u` with `u` the obstacle velocity at `x`; identical to
/// [`modulate_static`] for a static obstacle.
pub fn modulate_moving(obs: &Obstacle, f: &Vector, x: &Vector) -> Result<Vector> {
    let m = modulation_matrix(obs, x)?;
    Ok(apply_moving(obs, &m, f, x))
}

fn apply_moving(obs: &Obstacle, m: &ModulationResult, f: &Vector, x: &Vector) -> Vector {
    if is_static(obs) {
        return m.apply(f);
    }
    let u = obstacle_point_velocity(obs, x);
    m.apply(&(f - &u)) + u
}

/// How per-obstacle modulated velocities are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendRule {
    /// `w_n ∝ Π_{m≠n} (Γ_m - 1)`: the obstacle being approached dominates.
    #[default]
    ProductOfOthers,
    /// All weight on the obstacle with the smallest `Γ`.
    Nearest,
}

/// Blending weights from the clamped `Γ` of every obstacle.
pub fn blend_weights(gammas: &[f64], rule: BlendRule) -> Vec<f64> {
    let n = gammas.len();
    let nearest = || {
        let i = (0..n)
            .min_by(|&a, &b| gammas[a].total_cmp(&gammas[b]))
            .unwrap_or(0);
        let mut w = vec![0.0; n];
        if n > 0 {
            w[i] = 1.0;
        }
        w
    };
    match rule {
        BlendRule::Nearest => nearest(),
        BlendRule::ProductOfOthers => {
            if n == 1 {
                return vec![1.0];
            }
            // Π_{m≠n}(Γ_m - 1) / Σ_j Π_{m≠j}(Γ_m - 1) = (Γ_n - 1)⁻¹ / Σ_j (Γ_j - 1)⁻¹
            let inv: Vec<f64> = gammas.iter().map(|g| 1.0 / (g - 1.0)).collect();
            let sum: f64 = inv.iter().sum();
            if !sum.is_finite() || sum <= 0.0 {
                return nearest();
            }
            inv.iter().map(|v| v / sum).collect()
        }
    }
}

/// Per-obstacle modulation data plus the blended velocity.
#[derive(Debug, Clone)]
pub struct Combined {
    pub velocity: Vector,
    pub per_obstacle: Vec<ModulationResult>,
    pub weights: Vec<f64>,
}

/// Blends the moving-aware modulated velocity of every obstacle.
pub fn combine_multi_detailed(
    obstacles: &[Obstacle],
    f: &Vector,
    x: &Vector,
    rule: BlendRule,
) -> Result<Combined> {
    if obstacles.is_empty() {
        return Ok(Combined {
            velocity: f.clone(),
            per_obstacle: Vec::new(),
            weights: Vec::new(),
        });
    }
    let per_obstacle = obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            modulation_matrix(o, x).map_err(|e| match e {
                Error::Interior { gamma, .. } => Error::Interior { obstacle: i, gamma },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gammas: Vec<f64> = per_obstacle.iter().map(|m| m.gamma_used).collect();
    let weights = blend_weights(&gammas, rule);
    let velocity = if obstacles.len() == 1 {
        apply_moving(&obstacles[0], &per_obstacle[0], f, x)
    } else {
        let mut v = Vector::zeros(f.len());
        for ((o, m), w) in obstacles.iter().zip(&per_obstacle).zip(&weights) {
            if *w != 0.0 {
                v += apply_moving(o, m, f, x) * *w;
            }
        }
        v
    };
    Ok(Combined {
        velocity,
        per_obstacle,
        weights,
    })
}

pub fn combine_multi(obstacles: &[Obstacle], f: &Vector, x: &Vector, rule: BlendRule) -> Result<Vector> {
    Ok(combine_multi_detailed(obstacles, f, x, rule)?.velocity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector;
    use approx::assert_relative_eq;

    fn unit_circle() -> Obstacle {
        Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.5).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue_pair(1.0).unwrap(), (0.0, 2.0));
        assert_eq!(eigenvalue_pair(2.0).unwrap(), (0.5, 1.5));
        let (r, e) = eigenvalue_pair(1e6).unwrap();
        assert!((r - 1.0).abs() < 1e-5 && (e - 1.0).abs() < 1e-5);
        assert!(eigenvalue_pair(0.5).is_err());
    }

    #[test]
    fn basis_examples() {
        let c = unit_circle();
        assert_eq!(basis_matrix(&c, &vector(&[2.0, 0.0])).unwrap(), Matrix::identity(2, 2));
        assert_eq!(
            basis_matrix(&c, &vector(&[0.0, 2.0])).unwrap(),
            Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
        );
        assert!(basis_matrix(&c, &vector(&[0.0, 0.0])).is_err());

        let e = Obstacle::new(vector(&[0.5, -0.5]), vector(&[2.0, 0.7]), 1.0)
            .unwrap()
            .with_orientation(0.8);
        let b = basis_matrix(&e, &vector(&[3.0, 2.0])).unwrap();
        let prod = b.clone().try_inverse().unwrap() * b;
        assert!((prod - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_basis_is_reported() {
        // Reference point far off-center: r̂ ends up tangent to the level set.
        let e = Obstacle::new(vector(&[0.0, 0.0]), vector(&[4.0, 1.0]), 1.0)
            .unwrap()
            .with_reference_point(vector(&[3.9, 0.0]))
            .unwrap();
        // Point where (x - ξ^r) is orthogonal to ∇Γ: ∇Γ at (x, y) = (x/8, 2y);
        // (x - 3.9)·x/8 + y·2y = 0 with x = 2: y² = 1.9·2/(8·2).
        let y = (1.9 * 2.0 / 16.0f64).sqrt();
        match basis_matrix(&e, &vector(&[2.0, y])) {
            Err(Error::SingularBasis { det }) => assert!(det.abs() < MIN_BASIS_DET),
            other => panic!("expected singular basis, got {other:?}"),
        }
    }

    #[test]
    fn far_field_is_identity() {
        // Distance 100 from the surface; |λ - 1| = 1/Γ = 1/101².
        let m = modulation_matrix(&unit_circle(), &vector(&[101.0, 0.0])).unwrap();
        let spectral = (m.modulation - Matrix::identity(2, 2)).svd(false, false).singular_values.max();
        assert!(spectral < 1e-4, "{spectral}");
    }

    #[test]
    fn normal_flow_vanishes_at_boundary() {
        let c = unit_circle();
        let f = vector(&[-1.0, 0.0]);
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-4, 1e-6] {
            let out = modulate_static(&c, &f, &vector(&[1.0 + eps, 0.0])).unwrap();
            assert!(out[0].abs() < last);
            last = out[0].abs();
        }
        assert!(last < 1e-5);
        assert_eq!(modulate_static(&c, &vector(&[0.0, 0.0]), &vector(&[1.5, 0.3])).unwrap(), vector(&[0.0, 0.0]));
    }

    #[test]
    fn boundary_tangent_and_normal_flow() {
        let c = unit_circle();
        let x = vector(&[1.0, 0.0]);
        let out = modulate_static(&c, &vector(&[0.0, 0.7]), &x).unwrap();
        assert_relative_eq!(out[1], 1.4, max_relative = 1e-8);
        assert!(out[0].abs() < 1e-12);
        let out = modulate_static(&c, &vector(&[-3.0, 0.0]), &x).unwrap();
        assert!(out.norm() < 1e-8);
    }

    #[test]
    fn safety_factor_moves_the_zero_surface() {
        let c = unit_circle().with_safety_factor(vector(&[2.0, 2.0])).unwrap();
        let m = modulation_matrix(&c, &vector(&[0.0, 2.0])).unwrap();
        assert!(m.lambda_r < 1e-8);
        let m = modulation_matrix(&c, &vector(&[2.0f64.sqrt(), 2.0f64.sqrt()])).unwrap();
        assert!(m.lambda_r < 1e-8);
        assert!(matches!(
            modulation_matrix(&c, &vector(&[1.5, 0.0])),
            Err(Error::Interior { .. })
        ));
    }

    #[test]
    fn interior_and_clamping() {
        let c = unit_circle();
        let m = modulation_matrix(&c, &vector(&[1.0 - 1e-8, 0.0])).unwrap();
        assert_eq!(m.gamma_used, GAMMA_FLOOR);
        assert!(m.lambda_r >= 0.0);
        assert!(matches!(
            modulation_matrix(&c, &vector(&[0.9, 0.0])),
            Err(Error::Interior { .. })
        ));
    }

    #[test]
    fn moving_examples() {
        let still = unit_circle();
        let f = vector(&[-0.4, 0.9]);
        let x = vector(&[1.7, -0.6]);
        assert_eq!(
            modulate_moving(&still, &f, &x).unwrap(),
            modulate_static(&still, &f, &x).unwrap()
        );

        let moving = unit_circle().with_velocity(vector(&[0.3, -0.2]), 0.5).unwrap();
        let u = obstacle_point_velocity(&moving, &x);
        let co_moving = modulate_moving(&moving, &u, &x).unwrap();
        assert!((co_moving - &u).amax() < 1e-15);

        let spinning = unit_circle().with_velocity(vector(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(obstacle_point_velocity(&spinning, &vector(&[1.0, 0.0])), vector(&[0.0, 1.0]));
    }

    #[test]
    fn combine_examples() {
        let a = Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.5).unwrap();
        let f = vector(&[-1.0, 0.2]);
        let x = vector(&[1.4, 0.9]);
        assert_eq!(
            combine_multi(std::slice::from_ref(&a), &f, &x, BlendRule::ProductOfOthers).unwrap(),
            modulate_moving(&a, &f, &x).unwrap()
        );

        // On A's hard boundary A takes all the weight.
        let b = Obstacle::sphere(vector(&[4.0, 0.0]), 1.0, 1.5).unwrap();
        let on_a = vector(&[0.0, 1.0]);
        let c = combine_multi_detailed(&[a.clone(), b.clone()], &f, &on_a, BlendRule::ProductOfOthers).unwrap();
        assert!(c.weights[0] > 1.0 - 1e-8);
        let n = a.gamma_gradient(&on_a).unwrap().normalize();
        assert!(n.dot(&c.velocity).abs() < 1e-8);

        // Distant obstacles leave the field nearly untouched.
        let a = Obstacle::sphere(vector(&[-50.0, 0.0]), 1.0, 1.5).unwrap();
        let b = Obstacle::sphere(vector(&[50.0, 0.0]), 1.0, 1.5).unwrap();
        let f = vector(&[0.3, 1.0]);
        let out = combine_multi(&[a, b], &f, &vector(&[0.0, 0.0]), BlendRule::ProductOfOthers).unwrap();
        assert!((out - &f).norm() / f.norm() < 1e-3);
    }

    #[test]
    fn combine_reports_interior_index() {
        let a = Obstacle::sphere(vector(&[0.0, 0.0]), 1.0, 1.5).unwrap();
        let b = Obstacle::sphere(vector(&[4.0, 0.0]), 1.0, 1.5).unwrap();
        let err = combine_multi(&[a, b], &vector(&[1.0, 0.0]), &vector(&[4.2, 0.0]), BlendRule::ProductOfOthers);
        assert!(matches!(err, Err(Error::Interior { obstacle: 1, .. })));
    }

    #[test]
    fn blend_weights_rules() {
        let w = blend_weights(&[2.0, 3.0], BlendRule::ProductOfOthers);
        assert_relative_eq!(w[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(w[1], 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(blend_weights(&[2.0, 1.5, 9.0], BlendRule::Nearest), vec![0.0, 1.0, 0.0]);
    }
}
