// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force references: exhaustive segmentation enumeration and direct
//! quadrature of the evidence integral. Slow by construction; used to pin
//! down the fast paths in tests.

mod enumerate;
mod quadrature;

pub use enumerate::{
    enumerate_posterior, enumerate_segmentations, EnumeratedPosterior, MAX_ENUM_K, MAX_ENUM_N,
};
pub use quadrature::{integrate, integrate_real_line, quadrature_evidence, MAX_QUADRATURE_WINDOW};
