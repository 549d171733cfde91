//! CPU reference implementation of an online-trained neural visibility
//! cache for many-light direct illumination.

pub mod bvh;
pub mod cache;
pub mod error;
pub mod geometry;
pub mod hashgrid;
pub mod image;
pub mod math;
pub mod mlp;
pub mod presets;
pub mod real;
pub mod render;
pub mod rng;
pub mod sampling;
pub mod scene;
pub mod trainer;

pub use error::{Error, Result};
pub use math::{Aabb, Vec3};
