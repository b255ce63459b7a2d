//! Yang–Mills–Higgs–Dirac evolution on expanding-type spacetimes.
//!
//! The crate evolves the first-order symmetric hyperbolic formulation of the
//! coupled gauge, Higgs and twisted-spinor equations on a periodic lattice over
//! the flat 3-torus, in the conformally rescaled ("tilde") frame with Gaussian
//! time. Physical-frame quantities are recovered by the conformal map in
//! [`conformal`].
//!
//! Module map:
//! - [`algebra`]: Lie algebras, unitary representations, Yukawa maps.
//! - [`clifford`]: Weyl gamma matrices, chiral projections, spinor pairings.
//! - [`geometry`]: scale factors, Gaussian time, second fundamental form, curvature.
//! - [`lattice`]: grids, field storage, stencils, random data, gauge transforms.
//! - [`dynamics`]: currents, right-hand side, principal symbol, RK4 stepping.
//! - [`constraints`]: the four constraints and the Gauss-law initial-data solve.
//! - [`energy`]: covariant Sobolev norms and sector energies.
//! - [`conformal`]: physical-frame rescaling, decay fits, conformal residuals.

pub mod algebra;
pub mod clifford;
pub mod conformal;
pub mod constraints;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod numerics;
pub mod reduce;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
