//! Numerical search for Kähler–Ricci solitons and conformally Kähler
//! quasi-Einstein metrics on toric surfaces.
//!
//! A metric is described by a symplectic potential `u = u_can + F` on a
//! moment polygon, with `F` a symmetric polynomial. Curvature residuals are
//! evaluated in closed form from exact derivative jets, integrated with
//! Gauss–Legendre quadrature and minimised by Levenberg–Marquardt.

pub mod basis;
pub mod curvature;
pub mod error;
pub mod lm;
pub mod params;
pub mod polytope;
pub mod problem;
pub mod quadrature;
pub mod residual;

pub use error::{Error, Result};
