//! No-reference video quality prediction built on gaming video statistics.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`frameio`] decodes Y4M streams and PNG frame directories into sRGB planes.
//! * [`colorspace`] maps sRGB to CIELAB lightness `L*` and chroma `C*`.
//! * [`maps`] builds the 26 pre-processed maps per frame (identity, DoG,
//!   sigma-DoG, gradient magnitude and nine displaced frame differences).
//! * [`mscn`] normalizes them into MSCN coefficients plus directional
//!   spatial differences (42 coefficient maps).
//! * [`ggd`] fits a zero-mean generalized Gaussian to each map.
//! * [`features`] assembles and pools the 168-dimensional NSS vector.
//! * [`deepfeat`] ingests externally computed 1920-dimensional CNN features.
//! * [`svr`] trains epsilon-SVR regressors by SMO.
//! * [`fusion`] holds the registry of score fusion strategies.
//! * [`eval`] implements correlation metrics, logistic mapping, repeated
//!   random splits, k-fold scatter export and the rank-sum test.

pub mod colorspace;
pub mod deepfeat;
pub mod error;
pub mod eval;
pub mod features;
pub mod frameio;
pub mod fusion;
pub mod ggd;
pub mod maps;
pub mod mscn;
pub mod plane;
pub mod svr;

pub use error::{Error, Result};
pub use plane::Plane;
