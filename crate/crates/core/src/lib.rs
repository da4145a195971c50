//! Articulated tri-plane radiance fields.
//!
//! A radiance field lives on three axis-aligned feature planes in a canonical
//! pose. Query points from a posed (target) space are warped back to the
//! canonical pose by a volume deformation driven by a template mesh pair,
//! then rendered with volumetric quadrature and fitted to posed images.

pub mod bvh;
pub mod deform;
pub mod field;
pub mod fixtures;
pub mod fit;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod render;
