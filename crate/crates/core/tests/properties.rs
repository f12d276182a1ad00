use proptest::prelude::*;
use softds::dynamics::{DynamicalSystem, LinearDs};
use softds::geometry::{label_from_gammas, tangent_basis, Obstacle, RegionLabel, REGION_TOL};
use softds::modulation::{blend_weights, modulation_matrix, BlendRule};
use softds::strategy::{total_velocity_detailed, Scene, StrategyConfig};
use softds::{vector, Matrix, Vector};
use std::f64::consts::PI;

fn obstacle() -> impl Strategy<Value = Obstacle> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.2..2.0f64,
        0.2..2.0f64,
        1.0..2.5f64,
        -PI..PI,
        1u32..3,
    )
        .prop_map(|(cx, cy, a, b, ratio, theta, p)| {
            Obstacle::new(vector(&[cx, cy]), vector(&[a, b]), ratio)
                .and_then(|o| o.with_exponent(p))
                .unwrap()
                .with_orientation(theta)
        })
}

/// A point outside the hard core: a boundary point pushed outward by `scale`.
fn outside(obs: &Obstacle, angle: f64, scale: f64) -> Vector {
    let b = obs.boundary_point(angle, false);
    &obs.center + (b - &obs.center) * scale
}

fn unit(angle: f64) -> Vector {
    vector(&[angle.cos(), angle.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gradient_matches_finite_differences(obs in obstacle(), angle in -PI..PI, scale in 0.3..3.0f64) {
        let x = outside(&obs, angle, scale);
        let g = obs.gamma_gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obs.gamma(&xp).unwrap() - obs.gamma(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g.norm()), "fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gamma_is_frame_invariant(obs in obstacle(), angle in -PI..PI, scale in 0.3..3.0f64,
                                shift in (-5.0..5.0f64, -5.0..5.0f64), turn in -PI..PI) {
        let x = outside(&obs, angle, scale);
        let t = vector(&[shift.0, shift.1]);
        let (s, c) = turn.sin_cos();
        let r = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let mut moved = obs.clone();
        moved.center = &r * &obs.center + &t;
        moved.orientation = obs.orientation + turn;
        let y = &r * &x + &t;
        let (g0, g1) = (obs.gamma(&x).unwrap(), moved.gamma(&y).unwrap());
        prop_assert!((g0 - g1).abs() <= 1e-9 * g0.max(1.0));
    }

    #[test]
    fn soft_gamma_scales_hard_gamma(obs in obstacle(), angle in -PI..PI, scale in 0.3..3.0f64) {
        let x = outside(&obs, angle, scale);
        let g = obs.gamma(&x).unwrap();
        let gk = obs.gamma_soft(&x).unwrap();
        let expect = g / obs.soft_ratio.powi(2 * obs.exponent as i32);
        prop_assert!((gk - expect).abs() <= 1e-12 * expect.max(1.0));
        prop_assert!(gk <= g);
        let label = label_from_gammas(g, gk, REGION_TOL);
        if g > 1.0 + REGION_TOL && gk < 1.0 - REGION_TOL {
            prop_assert_eq!(label, RegionLabel::SoftRegion);
        }
        if g < 1.0 - REGION_TOL {
            prop_assert_eq!(label, RegionLabel::HardInterior);
        }
    }

    #[test]
    fn stiffness_round_trips(obs in obstacle(), k in 1.0..20.0f64) {
        let mut o = obs;
        o.set_stiffness(k).unwrap();
        prop_assert!((o.stiffness() - k).abs() <= 1e-12 * k);
        prop_assert_eq!(o.is_rigid(), k == 1.0);
    }

    #[test]
    fn tangents_are_orthonormal(angle in -PI..PI, len in 1e-3..1e3f64) {
        let n = unit(angle) * len;
        let t = tangent_basis(&n).unwrap();
        prop_assert_eq!(t.len(), 1);
        prop_assert!((t[0].norm() - 1.0).abs() < 1e-12);
        prop_assert!(t[0].dot(&n).abs() < 1e-12 * len);
    }

    #[test]
    fn weights_form_a_partition(gammas in prop::collection::vec(1.0..50.0f64, 1..6)) {
        for rule in [BlendRule::ProductOfOthers, BlendRule::Nearest] {
            let w = blend_weights(&gammas, rule);
            prop_assert_eq!(w.len(), gammas.len());
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modulation_has_its_eigenpairs(obs in obstacle(), angle in -PI..PI, scale in 1.01..4.0f64) {
        let x = outside(&obs, angle, scale);
        let m = modulation_matrix(&obs, &x).unwrap();
        let r_hat = m.basis.column(0).into_owned();
        let e1 = m.basis.column(1).into_owned();
        let tol = 1e-9 * m.modulation.norm().max(1.0);
        prop_assert!((&m.modulation * &r_hat - &r_hat * m.lambda_r).norm() < tol);
        prop_assert!((&m.modulation * &e1 - &e1 * m.lambda_e[0]).norm() < tol);
        prop_assert!(m.lambda_r + m.lambda_e[0] - 2.0 < 1e-12);
    }

    #[test]
    fn boundary_flow_is_cancelled(obs in obstacle(), angle in -PI..PI, f in (-5.0..5.0f64, -5.0..5.0f64)) {
        let x = obs.boundary_point(angle, false);
        let n = obs.gamma_gradient(&x).unwrap().normalize();
        let m = modulation_matrix(&obs, &x).unwrap();
        let f = vector(&[f.0, f.1]);
        let v = m.apply(&f);
        // λ_r is the clamp residue; the tangent coordinate in E⁻¹ may amplify it.
        let cond = m.basis.clone().try_inverse().unwrap().norm();
        prop_assert!(n.dot(&v).abs() <= 1e-8 * f.norm() * cond.max(1.0), "{}", n.dot(&v));
    }

    #[test]
    fn far_field_is_nearly_identity(obs in obstacle(), angle in -PI..PI) {
        let x = &obs.center + unit(angle) * 200.0;
        let m = modulation_matrix(&obs, &x).unwrap();
        let err = (m.modulation - Matrix::identity(2, 2)).svd(false, false).singular_values.max();
        prop_assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn inflation_lowers_gamma(obs in obstacle(), angle in -PI..PI, scale in 1.5..4.0f64,
                              eta in (1.0..1.3f64, 1.0..1.3f64), extra in 0.0..0.3f64) {
        let x = outside(&obs, angle, scale);
        let small = obs.clone().with_safety_factor(vector(&[eta.0, eta.1])).unwrap().inflated();
        let large = obs.clone().with_safety_factor(vector(&[eta.0 + extra, eta.1 + extra])).unwrap().inflated();
        let (g0, g1, g2) = (obs.gamma(&x).unwrap(), small.gamma(&x).unwrap(), large.gamma(&x).unwrap());
        prop_assert!(g1 <= g0 + 1e-12 && g2 <= g1 + 1e-12);
    }

    #[test]
    fn soft_term_decays_outward(obs in obstacle(), angle in -PI..PI, s1 in 1.01..2.0f64, ds in 0.05..2.0f64, c in 0.01..1.0f64) {
        let obs = Obstacle::new(obs.center.clone() + vector(&[6.0, 6.0]), obs.hard_semi_axes.clone(), obs.soft_ratio)
            .unwrap()
            .with_orientation(obs.orientation);
        let ds_ = DynamicalSystem::Linear(LinearDs::new(-Matrix::identity(2, 2), vector(&[0.0, 0.0])).unwrap());
        let mut cfg = StrategyConfig::with_c(c);
        cfg.speed_change_cap = None;
        let scene = Scene::new(ds_, vec![obs.clone()], cfg).unwrap();
        let near = total_velocity_detailed(&scene, &outside(&obs, angle, s1)).unwrap();
        let far = total_velocity_detailed(&scene, &outside(&obs, angle, s1 + ds)).unwrap();
        prop_assert!(far.soft_term.norm() <= near.soft_term.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn correction_stays_bounded(a in obstacle(), b in obstacle(), p in (-6.0..6.0f64, -6.0..6.0f64),
                                c in 0.0..2.0f64, cap in prop::option::of(0.05..0.95f64)) {
        let ds = DynamicalSystem::Linear(LinearDs::new(-Matrix::identity(2, 2), vector(&[0.0, 0.0])).unwrap());
        let mut cfg = StrategyConfig::with_c(c);
        cfg.speed_change_cap = cap;
        let scene = Scene::new(ds, vec![a, b], cfg).unwrap();
        let x = vector(&[p.0, p.1]);
        if scene.obstacles.iter().any(|o| o.gamma(&x).unwrap() <= 1.0) || x.norm() < 1e-6 {
            return Ok(());
        }
        let Ok(v) = total_velocity_detailed(&scene, &x) else { return Ok(()) };
        let change = (&v.velocity - &v.modulated).norm();
        let rounding = 8.0 * f64::EPSILON * v.modulated.norm();
        prop_assert!(change <= v.correction_bound * (1.0 + 1e-12) + rounding);
        if let Some(k) = cap {
            prop_assert!(change <= k * v.modulated.norm() * (1.0 + 1e-12) + rounding);
        }
        // Speed changes only: the correction is parallel to the modulated velocity.
        let cross = v.modulated[0] * v.velocity[1] - v.modulated[1] * v.velocity[0];
        prop_assert!(cross.abs() <= 1e-9 * v.modulated.norm() * v.velocity.norm().max(1.0));
    }
}
