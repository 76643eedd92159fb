//! Computational toolkit for orbit/subvariety return sets of polynomial
//! self-maps of affine space: finite-field avoidance certificates, p-adic
//! normalization, Mahler-series interpolation of orbits, zero localization
//! and gap/density reports.

pub mod arith;
pub mod padic;
pub mod linalg;
pub mod poly;
pub mod reduction;
pub mod normalization;
pub mod interpolation;
pub mod gap;
pub mod problem;
pub mod pipeline;
pub mod report;
