//! Gradient blow-up of fields around two nearly-touching spheres.
//!
//! The crate builds the image-charge sequence of a sphere pair, evaluates the
//! singular fields `h₀` and `h_ω` built from it, solves the underlying
//! boundary-value problems with spherical layer potentials, and compares the
//! two against the predicted asymptotics.

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod image_charges;
pub mod incident;
pub mod layer_potentials;
pub mod numerics;
pub mod singular_fields;

pub use error::{Error, Result};
pub use geometry::{make_pair, InclusionPair, Point3, Sphere};
pub use image_charges::{build_sequence, ChargeSequence, Regime, ScalingParams};
pub use incident::{FieldSample, IncidentField};
