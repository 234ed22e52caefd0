//! Boundary-emphasized losses, soft skeletons and airway topology metrics
//! for binary 3D segmentation.
//!
//! The crate is organised bottom-up: [`volume`] holds the dense grids,
//! [`morphology`] and [`skeleton`] provide the discrete geometry,
//! [`softskel`] the differentiable skeleton, [`losses`] the weight maps and
//! losses, [`metrics`] the evaluation panel and [`phantom`] a synthetic tree
//! generator with exact ground truth. [`nifti`] reads and writes volumes.

pub mod error;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod phantom;
pub mod skeleton;
pub mod softskel;
pub mod volume;

pub use error::{Error, ErrorKind, Result};
pub use volume::{BinaryMask, Connectivity, Dims, ProbabilityVolume, Spacing, Volume3, UNIT_SPACING};
