//! Piecewise ℓ^p spaces, their geodesic bicombings, and numerical checks of
//! bicombing axioms, boundary metrics and Helly properties.

pub mod atlas;
pub mod boundary;
pub mod cube;
pub mod engine;
pub mod export;
pub mod families;
pub mod helly;
pub mod lp;
pub mod space_spec;
pub mod suite;
pub mod verify;

pub use atlas::{AtlasBuilder, AtlasError, Chart, ChartAtlas, ChartId, ChartKind, Face, Gluing, SpacePoint};
pub use lp::{lerp, lp_norm, CoordVec, GeometryError, PExponent, DEFAULT_TOL};
