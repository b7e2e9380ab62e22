//! Normal waves of a waveguide whose rectangular cross-section contains a
//! rectangular dielectric inclusion.
//!
//! The longitudinal field components (Π, Ψ) = (E₃, H₃) of a normal wave
//! `V(x₁, x₂)·exp(iγx₃)` are kernel vectors of the quartic pencil
//!
//! ```text
//! L(γ) = γ⁴K + γ²(A₁ − (ε₁+ε₂)K) + (ε₁−ε₂)γS + ε₁ε₂(K − A₂)
//! ```
//!
//! discretized here with P1 finite elements. The crate assembles the pencil,
//! solves it by companion linearization, rebuilds the transversal fields of
//! eigenwaves and associated waves, and checks the identities that tie the
//! discrete system back to Maxwell's equations: Rayleigh quotients, scalar
//! quartic root localization, weak Maxwell residuals, biorthogonality,
//! Helmholtz splittings and completeness residuals.
//!
//! Module map: [`geometry`] → [`forms`] → [`pencil`] → [`waves`] →
//! [`spectra`] / [`modal`]; [`pipeline`] wires them into the CLI.

pub mod error;
pub mod forms;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod modal;
pub mod pencil;
pub mod pipeline;
pub mod spectra;
pub mod waves;

pub use error::{Error, Result};
pub use faer::c64;
