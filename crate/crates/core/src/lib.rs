//! Pedestrian tracking in urban canyons with a map-prior particle filter.
//!
//! The filter propagates particles with (drifting) inertial velocity,
//! weights them by the surface they land on (buildings, streets, freely
//! traversable area) and optionally by GNSS fixes. The crate also ships a
//! synthetic urban-canyon simulator, the sidewalk / Euclidean /
//! along-across-street error metrics, a JSONL trace format and the `canyon`
//! command-line tool.

pub mod cli;
pub mod filter;
pub mod geomap;
pub mod geometry;
pub mod metrics;
pub mod simulate;
pub mod trace_io;

pub use geometry::LocalPoint;
