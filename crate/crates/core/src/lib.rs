//! Numerical laboratory for the entropy of Blaschke metrics on a genus-2
//! surface.
//!
//! Cubic differentials on the regular-octagon surface are synthesised by
//! Poincaré series, Wang's equation `κ = −1 + 2‖b‖²` is solved for the
//! Blaschke metric, and volume entropy is estimated by counting orbit points
//! of the deck group in a discretised universal cover. The [`analysis`]
//! module checks the chain of inequalities relating these quantities.

pub mod analysis;
pub mod cubic;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod fuchsian;
pub mod linalg;
pub mod mesh;
pub mod wang;

pub use error::{Error, Result};
