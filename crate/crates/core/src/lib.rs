//! Rigid-body collisions on SE(n) and rough billiards.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard;
pub mod contact;
pub mod experiments;
pub mod lie;
pub mod mechanics;

pub use lie::{AlgebraVector, EuclideanElement, LieError, SkewMatrix};
pub use mechanics::{InertiaOperator, MechanicsError, RigidBody, SystemState, TangentPair};
pub use contact::{CollisionMap, ContactConfiguration, ContactError, ContactGeometry, StrictnessReport, SubspaceBasis};
pub use billiard::{Ball, BilliardError, BilliardState, BoundaryCondition, Roughness, Table, Trajectory};
pub use experiments::ExperimentReport;
