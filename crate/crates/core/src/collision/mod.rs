//! Proximity detection, geometric mapping and contact frames.

mod collider;
mod detect;
mod frames;
mod geometry;
mod mapping;

use thiserror::Error;

pub use collider::{Collider, ColliderMotion, ColliderShape};
pub use detect::detect;
pub use frames::{build_frames, relinearize, ContactFrame, COINCIDENCE_TOLERANCE};
pub use geometry::{closest_point_on_triangle, Aabb};
pub use mapping::{build_mapping_jacobian, Attachment, Owner, PointPair, ProximityPair, SceneView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("detection threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid attachment in pair {pair}: {reason}")]
    InvalidAttachment { pair: usize, reason: String },
    #[error("no contact normal can be determined for pair {pair}")]
    DegenerateFrame { pair: usize },
    #[error("unknown body {body}")]
    UnknownBody { body: usize },
    #[error("unknown collider {collider}")]
    UnknownCollider { collider: usize },
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}
