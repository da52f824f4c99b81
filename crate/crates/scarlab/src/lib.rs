//! Numerical laboratory for classical Birkhoff normal forms on `T^d × D`,
//! lattice quasimodes of semiclassical torus operators, and the
//! separation / energy-window / overlap machinery behind scarring
//! diagnostics.
//!
//! The crate is organised around one carrier type,
//! [`series::FourierTaylorSeries`] — a truncated Fourier–Taylor table for
//! real functions on the torus times an action box — and builds upward:
//!
//! * [`nonres`] — Bruno–Rüssmann / Diophantine approximation functions,
//!   frequency membership tests, and non-resonant action sampling.
//! * [`homological`] — the small-divisor equation `ω·∂_θ ψ = f` solved by
//!   Fourier division, with decay diagnostics.
//! * [`normal_form`] — the iterative normal form `K(I;t)` with remainder
//!   orders doubling per step.
//! * [`quantize`] — Hermitian lattice quantization on the torus Fourier
//!   basis, band eigensolves, Weyl counting.
//! * [`quasimode`] — quasi-eigenvalue lattices and one-step phase
//!   quasimode vectors.
//! * [`scar`] — quasi-eigenvalue separation, energy windows, overlaps and
//!   torus masses of band eigenfunctions.
//! * [`models`], [`config`], [`pipeline`] — experiment orchestration.
//!
//! Grid scans, matrix assembly and per-mode constructions run data-parallel
//! through [`par`] when the `parallel` feature (default) is enabled; the
//! same entry points fall back to sequential loops without it. Outputs are
//! deterministic either way.

pub mod config;
pub mod error;
pub mod homological;
pub mod io;
pub mod models;
pub mod nonres;
pub mod normal_form;
pub mod par;
pub mod pipeline;
pub mod quantize;
pub mod quasimode;
pub mod scar;
pub mod series;
pub mod timepoly;

pub use error::{Result, ScarError};
pub use series::FourierTaylorSeries;
pub use timepoly::TimePolynomialHamiltonian;
