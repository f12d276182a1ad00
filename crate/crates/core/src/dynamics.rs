//! Nominal dynamical systems `ξ̇ = f(ξ)`.
//!
//! Two flavours: a linear attractor `A (ξ - ξ*)` and the LPV-GMM mixture
//! `Σ γ_k(ξ) (A_k ξ + b_k)` whose weights are Gaussian responsibilities.
//! Parameters are loaded, never fitted; [`validate_stability`] is the check
//! that a loaded parameter set actually has a quadratic Lyapunov function.

use crate::{check_dim, Error, Matrix, Result, Vector};
use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::Dyn;
use serde::Serialize;

/// Threshold on the largest eigenvalue of `A^T P + P A`.
pub const TOL_NEGATIVE_DEFINITE: f64 = 1e-8;
/// Allowed `|A_k ξ* + b_k|`.
pub const TOL_CONSISTENCY: f64 = 1e-6;
/// Below this log-density every component is considered underflowed.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDs {
    pub gain: Matrix,
    pub attractor: Vector,
}

impl LinearDs {
    pub fn new(gain: Matrix, attractor: Vector) -> Result<Self> {
        let d = attractor.len();
        if gain.nrows() != d || gain.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: gain.nrows().max(gain.ncols()),
            });
        }
        Ok(LinearDs { gain, attractor })
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.attractor.len(), x)?;
        Ok(&self.gain * (x - &self.attractor))
    }
}

#[derive(Debug, Clone)]
pub struct GaussianComponent {
    pub prior: f64,
    pub mean: Vector,
    pub covariance: Matrix,
    pub gain: Matrix,
    pub offset: Vector,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.prior == other.prior
            && self.mean == other.mean
            && self.covariance == other.covariance
            && self.gain == other.gain
            && self.offset == other.offset
    }
}

impl GaussianComponent {
    pub fn new(prior: f64, mean: Vector, covariance: Matrix, gain: Matrix, offset: Vector) -> Result<Self> {
        let d = mean.len();
        for (name, m) in [("covariance", &covariance), ("A", &gain)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::scenario(name, format!("expected a {d}x{d} matrix")));
            }
        }
        if offset.len() != d {
            return Err(Error::scenario("b", format!("expected {d} entries")));
        }
        if !(prior >= 0.0) || !prior.is_finite() {
            return Err(Error::scenario("prior", format!("must be >= 0, got {prior}")));
        }
        if !is_symmetric(&covariance) {
            return Err(Error::scenario("covariance", "must be symmetric"));
        }
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::scenario("covariance", "must be positive-definite"))?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_norm = -0.5 * (d as f64 * std::f64::consts::TAU.ln() + log_det);
        Ok(GaussianComponent {
            prior,
            mean,
            covariance,
            gain,
            offset,
            chol,
            log_norm,
        })
    }

    /// Squared Mahalanobis distance to the mean.
    pub fn mahalanobis_sq(&self, x: &Vector) -> f64 {
        let diff = x - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    pub fn log_density(&self, x: &Vector) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpvDs {
    pub components: Vec<GaussianComponent>,
    /// Lyapunov matrix of `V(ξ) = (ξ - ξ*)^T P (ξ - ξ*)`.
    pub lyapunov: Matrix,
    pub attractor: Vector,
}

impl LpvDs {
    /// Checks shapes and that priors sum to one (within 1e-6, then renormalised).
    /// Definiteness of `P` and the per-component stability conditions are left
    /// to [`validate_stability`].
    pub fn new(mut components: Vec<GaussianComponent>, lyapunov: Matrix, attractor: Vector) -> Result<Self> {
        let d = attractor.len();
        if components.is_empty() {
            return Err(Error::scenario("components", "at least one component is required"));
        }
        if let Some(i) = components.iter().position(|c| c.mean.len() != d) {
            return Err(Error::scenario(format!("components[{i}].mean"), format!("expected {d} entries")));
        }
        if lyapunov.nrows() != d || lyapunov.ncols() != d {
            return Err(Error::scenario("P", format!("expected a {d}x{d} matrix")));
        }
        if !is_symmetric(&lyapunov) {
            return Err(Error::scenario("P", "must be symmetric"));
        }
        let total: f64 = components.iter().map(|c| c.prior).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::scenario("components", format!("priors must sum to 1, got {total}")));
        }
        for c in &mut components {
            c.prior /= total;
        }
        Ok(LpvDs {
            components,
            lyapunov,
            attractor,
        })
    }

    /// Overwrites every `b_k` with `-A_k ξ*` so that `f(ξ*) = 0` holds exactly
    /// up to rounding.
    pub fn reproject_offsets(&mut self) {
        for c in &mut self.components {
            c.offset = -(&c.gain * &self.attractor);
        }
    }

    /// Gaussian responsibilities `γ_k(ξ)`, computed in log space.
    pub fn mixing_weights(&self, x: &Vector) -> Result<Vec<f64>> {
        check_dim(self.attractor.len(), x)?;
        let log_dens: Vec<f64> = self.components.iter().map(|c| c.log_density(x)).collect();
        let active = |i: usize| self.components[i].prior > 0.0;

        if (0..log_dens.len()).filter(|&i| active(i)).all(|i| log_dens[i] < LOG_DENSITY_FLOOR) {
            // Far from every mean: one-hot on the nearest component.
            let nearest = (0..self.components.len())
                .filter(|&i| active(i))
                .min_by(|&i, &j| {
                    let di = self.components[i].mahalanobis_sq(x);
                    let dj = self.components[j].mahalanobis_sq(x);
                    di.total_cmp(&dj)
                })
                .expect("priors sum to one");
            let mut w = vec![0.0; self.components.len()];
            w[nearest] = 1.0;
            return Ok(w);
        }

        let log_w: Vec<f64> = self
            .components
            .iter()
            .zip(&log_dens)
            .map(|(c, ld)| if c.prior > 0.0 { c.prior.ln() + ld } else { f64::NEG_INFINITY })
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        Ok(w)
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        let w = self.mixing_weights(x)?;
        let mut out = Vector::zeros(x.len());
        for (c, g) in self.components.iter().zip(w) {
            if g > 0.0 {
                out += (&c.gain * x + &c.offset) * g;
            }
        }
        Ok(out)
    }
}

/// A nominal dynamical system.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicalSystem {
    Linear(LinearDs),
    Lpv(LpvDs),
}

impl DynamicalSystem {
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        match self {
            DynamicalSystem::Linear(ds) => ds.eval(x),
            DynamicalSystem::Lpv(ds) => ds.eval(x),
        }
    }

    pub fn attractor(&self) -> &Vector {
        match self {
            DynamicalSystem::Linear(ds) => &ds.attractor,
            DynamicalSystem::Lpv(ds) => &ds.attractor,
        }
    }

    pub fn dim(&self) -> usize {
        self.attractor().len()
    }
}

/// `V(ξ) = (ξ - ξ*)^T P (ξ - ξ*)`.
pub fn lyapunov_value(p: &Matrix, x: &Vector, attractor: &Vector) -> f64 {
    let e = x - attractor;
    e.dot(&(p * &e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub index: usize,
    /// Largest eigenvalue of `A^T P + P A` (LPV) or largest real part of the
    /// spectrum of `A` (linear).
    pub max_eigenvalue: f64,
    pub negative_definite: bool,
    pub consistency_residual: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessCheck {
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<DefinitenessCheck>,
    pub components: Vec<ComponentCheck>,
    pub pass: bool,
}

impl StabilityReport {
    pub fn failing_components(&self) -> impl Iterator<Item = &ComponentCheck> {
        self.components
            .iter()
            .filter(|c| !c.negative_definite || !c.consistent)
    }
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "kind: {}", self.kind)?;
        if let Some(l) = &self.lyapunov {
            writeln!(
                f,
                "P positive-definite: {} (min eigenvalue {:e})",
                l.positive_definite, l.min_eigenvalue
            )?;
        }
        for c in &self.components {
            writeln!(
                f,
                "component {}: max eigenvalue {:e} [{}], consistency residual {:e} [{}]",
                c.index,
                c.max_eigenvalue,
                if c.negative_definite { "ok" } else { "FAIL" },
                c.consistency_residual,
                if c.consistent { "ok" } else { "FAIL" },
            )?;
        }
        write!(f, "overall: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-9 * scale
}

fn max_sym_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Per-component `A_k^T P + P A_k ≺ 0`, `P ≻ 0` and `A_k ξ* + b_k = 0`.
/// A linear system is checked for a Hurwitz gain matrix instead.
pub fn validate_stability(ds: &DynamicalSystem) -> StabilityReport {
    match ds {
        DynamicalSystem::Linear(lin) => {
            let max_re = lin
                .gain
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            let check = ComponentCheck {
                index: 0,
                max_eigenvalue: max_re,
                negative_definite: max_re < -TOL_NEGATIVE_DEFINITE,
                consistency_residual: 0.0,
                consistent: true,
            };
            let pass = check.negative_definite;
            StabilityReport {
                kind: "linear",
                lyapunov: None,
                components: vec![check],
                pass,
            }
        }
        DynamicalSystem::Lpv(lpv) => {
            let p = &lpv.lyapunov;
            let min_p = SymmetricEigen::new(p.clone()).eigenvalues.min();
            let lyap = DefinitenessCheck {
                min_eigenvalue: min_p,
                positive_definite: min_p > 0.0,
            };
            let components: Vec<ComponentCheck> = lpv
                .components
                .iter()
                .enumerate()
                .map(|(index, c)| {
                    let sym = c.gain.transpose() * p + p * &c.gain;
                    let max_eigenvalue = max_sym_eigenvalue(&sym);
                    let consistency_residual = (&c.gain * &lpv.attractor + &c.offset).norm();
                    ComponentCheck {
                        index,
                        max_eigenvalue,
                        negative_definite: max_eigenvalue < -TOL_NEGATIVE_DEFINITE,
                        consistency_residual,
                        consistent: consistency_residual <= TOL_CONSISTENCY,
                    }
                })
                .collect();
            let pass = lyap.positive_definite
                && components.iter().all(|c| c.negative_definite && c.consistent);
            StabilityReport {
                kind: "lpv",
                lyapunov: Some(lyap),
                components,
                pass,
            }
        }
    }
}
