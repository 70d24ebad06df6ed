//! Spectral solver for a planar Dirichlet waveguide whose lower boundary
//! carries Neumann segments.
//!
//! The strip {0 < x2 < pi} with a Neumann window of length 2a on its lower
//! boundary binds a finite set of states below the closed-channel
//! threshold. When the Dirichlet barriers flanking the window are made
//! finite (ends at -l_minus and l_plus), those states turn into complex
//! resonances that leak through the evanescent barrier modes. This crate
//! computes
//!
//! * the bound states, their parities and decay amplitudes
//!   ([`bound`]),
//! * the half-line junction response constants and corner coefficient,
//!   with the Rellich identities tying them together ([`junction`]),
//! * the complex resonances of the finite-barrier geometry
//!   ([`resonance`]),
//! * the leading-order displacement formula and the study verifying that
//!   the computed resonances follow it ([`asymptotics`]),
//! * an independent finite-difference spectrum oracle ([`fdoracle`]).
//!
//! Everything rests on interface mode matching over slab decompositions
//! ([`slab`]) with overflow-safe scaled determinants, and on truncation
//! ladders ([`extrapolate`]) that compensate the algebraic convergence
//! caused by the r^(1/2) behavior at boundary-condition switch points.

pub mod asymptotics;
pub mod bound;
pub mod cli;
pub mod error;
pub mod extrapolate;
pub mod fdoracle;
pub mod junction;
pub mod report;
pub mod resonance;
pub mod slab;
pub mod spectral;

pub use error::{Result, SolverError};
pub use spectral::{sqrt_branch, ModeFamily, ModeIndex, ModeSystem, SpectralPoint};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
