//! Exact analysis of self-similar measures with overlaps on [0,1]: net
//! intervals, finite type detection, separation diagnostics, certified
//! measure bounds and local / quasi-Assouad dimension estimates.

// Field elements hash and compare by coefficients only; the lock inside
// NumberField caches root isolation and never affects either.
#![allow(clippy::mutable_key_type)]

pub mod analysis;
pub mod dims;
pub mod field;
pub mod finite_type;
pub mod ifs;
pub mod measure;
pub mod net;
pub mod presets;
pub mod report;
pub mod separation;
pub mod spec;
