//! Sketch-to-action runtime for household robots.
//!
//! Strokes drawn on a scene photograph are segmented into metric primitives
//! ([`geometry`]), each primitive is classified into a discrete macro-action
//! ([`policy`]), and macro-actions are executed closed-loop in a 2D occupancy
//! world ([`executor`], [`world`]). Outcomes are scored by [`metrics`]; all
//! documents go through [`io`].

pub mod error;
pub mod executor;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod params;
pub mod policy;
pub mod service;
pub mod world;
