//! Numerical laboratory for total scalar curvature of geodesic spheres,
//! hemispheres, tubes and capsules in 3-dimensional Riemannian manifolds,
//! together with diagnostics that distinguish D'Atri spaces.

pub mod error;
pub mod geodesic;
pub mod jet;
pub mod lab;
pub mod metric;
pub mod ode;
pub mod quadrature;
pub mod registry;
pub mod series;
pub mod sphere;
pub mod tube;

pub use error::{GeometryError, Result};
pub use lab::{run_battery, BatteryConfig, Classification, DiagnosticsReport};
pub use registry::{Expectation, ModelSetup, Registry};
