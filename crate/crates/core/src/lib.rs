//! Short-time tail-probability and option-price expansions for
//! state-dependent jump-diffusions, with a Monte Carlo engine and
//! numerical validators for the small-jump reparameterization.

pub mod equivalence;
pub mod error;
pub mod expansion;
pub mod model;
pub mod models;
pub mod montecarlo;
pub mod quadrature;
pub mod roots;
pub mod sharemeasure;

pub use error::{Error, Result};
pub use model::{JumpIntensity, JumpTransform, ModelSpec, SmoothField, TruncationConfig};
