//! Solver for the two-echelon location-routing problem with waterborne
//! first-echelon transport, light electric vehicles, moving jacks, time
//! windows and echelon synchronization.
//!
//! The second echelon (TP selection, LEV routes, jack assignment) is searched
//! by an adaptive large neighborhood search seeded from a capacity-aware
//! clustering. The first echelon (vessel routes feeding the open TPs) is solved
//! by branch-and-price over aggregated demand copies. [`solve::solve`] ties
//! both together.

pub mod alns;
pub mod bench;
pub mod construct;
pub mod eval;
pub mod firstech;
pub mod io;
pub mod model;
pub mod oracle;
pub mod solve;
pub mod svg;

pub use model::{Instance, Solution};
