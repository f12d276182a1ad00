//! Dynamical-system motion fields around deformable obstacles.
//!
//! An obstacle has an impassable hard core and a traversable soft shell whose
//! thickness is set by a stiffness coefficient `k`. A nominal dynamical system
//! (linear attractor or LPV mixture) is reshaped by a modulation matrix that
//! cancels inflow at the hard boundary, then corrected by two additive terms:
//! a speed-up while crossing soft material and a slow-down where the soft shells
//! of two obstacles overlap.
//!
//! Module map:
//!
//! * [`geometry`]: obstacles, level-set distances `Γ` / `Γ_k`, gradients, region labels
//! * [`dynamics`]: linear and LPV-GMM systems, Lyapunov checks
//! * [`modulation`]: `M = E D E⁻¹`, safety margins, moving obstacles, multi-obstacle blending
//! * [`strategy`]: soft-region speed-up and intersection slow-down
//! * [`sim`]: RK4 integration, trajectory records, stiffness sweeps
//! * [`scenario`], [`export`], [`cli`]: file formats and the `softds` command-line tool

#[cfg(feature = "cli")]
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod geometry;
pub mod modulation;
pub mod scenario;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

/// Builds a column vector from a slice.
pub fn vector(values: &[f64]) -> Vector {
    Vector::from_column_slice(values)
}

pub(crate) fn check_dim(expected: usize, v: &Vector) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got: v.len(),
        })
    }
}
