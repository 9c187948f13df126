//! Lipschitz–Killing curvatures of Riemannian manifolds and their behaviour
//! under collapse of Riemannian submersions.

pub mod blocklin;
pub mod error;
pub mod fit;
pub mod metricfield;
pub mod quadrature;
pub mod rng;
pub mod submersion;
pub mod sum;
pub mod tensorcore;
pub mod tubeoracle;
pub mod zoo;
pub mod weylsum;

pub use error::{LkError, Result};
