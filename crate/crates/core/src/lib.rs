//! Physically-based simulation of a gray-code structured-light 3D camera.
//!
//! The crate renders cluttered bin scenes with a CPU path tracer, projects
//! gray-code stripe patterns through a pinhole projector light, decodes the
//! rendered captures back into camera/projector correspondences and
//! triangulates a depth map. Because the depth comes out of the same decode
//! pipeline a real sensor runs, it carries the same artifacts: zero-valued
//! shadows where the projector cannot see, and flying pixels at depth
//! discontinuities where one camera pixel mixes two stripe codes.
//!
//! The pipeline stages map onto modules:
//!
//! 1. [`scenegen`] – voxel-grid pose sampling and drop-and-settle clutter.
//! 2. [`render`] – ground truth, RGB and pattern-capture rendering.
//! 3. [`graycode`] – reflected binary code and pattern stacks.
//! 4. [`reconstruct`] – binarization, correspondence decoding, triangulation.
//! 5. [`dataset`] – RLE masks, annotations and the on-disk dataset layout.
//!
//! [`pipeline`] ties them together behind a single versioned JSON config and
//! is what the `slsim` command-line tool drives.

pub mod dataset;
pub mod fixtures;
pub mod geometry;
pub mod graycode;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod reconstruct;
pub mod render;
pub mod scenegen;

pub use geometry::{PinholeModel, Pose, ProjectionMatrix, Ray, Rig, TriMesh};
pub use graycode::{GrayCodeConfig, PatternStack};
pub use raster::Raster;

// The guide under `book/` is compiled into doc-tests so its snippets cannot rot.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/graycode.md")]
    mod graycode {}
    #[doc = include_str!("../../../book/src/rendering.md")]
    mod rendering {}
    #[doc = include_str!("../../../book/src/triangulation.md")]
    mod triangulation {}
    #[doc = include_str!("../../../book/src/sensor-noise.md")]
    mod sensor_noise {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
