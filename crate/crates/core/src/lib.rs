//! Muscle-work estimation from skeleton motion streams.
//!
//! The pipeline turns a stream of tracked 3D skeleton frames into per-muscle
//! and per-muscle-group "muscle work" (force-time integrals, counting
//! isometric holds), plus the companion exertion measures (burned calories,
//! RPE/heart-rate comparison) and a synthetic validation protocol with
//! repeated-measures statistics.
//!
//! Stages, in order:
//!
//! 1. [`skeleton_io`] — parse, resample, smooth motion streams; estimate
//!    subject body scale.
//! 2. [`kinematics`] — joint angles, angular velocities, segment poses,
//!    quasi-static joint torques.
//! 3. [`muscle_model`] — musculoskeletal model schema and the Hill-type
//!    force-velocity / force-length relations.
//! 4. [`solver`] — static optimization distributing joint torques to muscle
//!    forces under Hill bounds; per-frame work increments.
//! 5. [`aggregation`] — muscle-group / limb grouping, windowed display
//!    values, color mapping, session summaries.
//! 6. [`measures`] — burned calories, RPE-to-heart-rate comparison,
//!    cross-participant normalization, heart-rate-weighted muscle work.
//! 7. [`synth`] / [`validation`] — deterministic synthetic exercises and the
//!    technical-validation protocol (RM-ANOVA, pairwise tests, effect
//!    checks).
//!
//! [`pipeline`] ties stages 1-5 together for whole-session analysis. With the
//! `parallel` feature (default) the per-frame stages and validation trials
//! fan out over a rayon pool; without it everything runs sequentially on one
//! thread with identical results.

pub mod aggregation;
pub mod export;
pub mod kinematics;
pub mod measures;
pub mod muscle_model;
pub mod pipeline;
pub mod skeleton_io;
pub mod solver;
pub mod stats;
pub mod synth;
pub mod validation;

mod parallel;
