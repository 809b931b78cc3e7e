//! Simulation and planning toolkit for snake-robot loco-manipulation.
//!
//! A 12-link floating-base chain and a free box are integrated with penalty
//! contacts against the ground, a raised platform and a ramp. Open-loop CPG
//! gaits and keyframe timelines drive the joints through PD servos, and a
//! shooting planner tunes gait parameters to move the box toward a goal.

pub mod config;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod gait;
pub mod geometry;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod scenario;
pub mod trajectory;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
