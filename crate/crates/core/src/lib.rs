//! Grounding toolkit for egocentric humanoid action prediction.
//!
//! * [`grammar`]: structured/natural action language, parser and router
//! * [`pose`]: pose tracks to thresholded action labels, discrete action merging
//! * [`dataset`]: training/eval sample construction and prompt rendering
//! * [`sim`]: desk-scale kinematic world with symbolic observations
//! * [`runner`]: closed-loop episodes against a policy over a line protocol
//! * [`eval`]: goal-distance success curves, NLA F1, view similarity, reports

pub mod dataset;
pub mod eval;
pub mod grammar;
pub mod pose;
pub mod runner;
pub mod sim;
