//! Dispersive radial-basis-function meshless time-domain solver for Drude
//! (left-handed) media, truncated by a graded split-field PML.
//!
//! The pipeline is: [`lattice`] builds staggered electric/magnetic node sets,
//! [`rbf`] turns node neighborhoods into derivative stencils, [`media`] and
//! [`pml`] supply per-node material and absorber data, [`excitation`] drives a
//! soft point source and [`engine`] advances the fields. [`fdtd`] is an
//! independent Yee-grid reference and [`analysis`] compares and post-processes
//! results. [`scenario`] wires everything together for the command line.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod engine;
pub mod error;
pub mod excitation;
pub mod fdtd;
pub mod lattice;
pub mod linalg;
pub mod media;
pub mod pml;
pub mod rbf;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
