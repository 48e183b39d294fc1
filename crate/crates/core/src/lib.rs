//! Simulation, planning and learning for hybrid enveloping/sucking grasps on a
//! 2.5-D tabletop.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod gripper;
pub mod learner;
pub mod planner;
pub mod scene;
