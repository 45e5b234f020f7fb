//! Pseudospectral simulation and verification laboratory for the derivative
//! nonlinear Schrödinger family
//!
//! ```text
//! i u_t + u_xx + c1(a) u^2 conj(u)_x + c2(a) |u|^2 u_x + c3(a) |u|^4 u = 0
//! ```
//!
//! on the full line (periodic pseudospectral box) and on the half line
//! (boundary-integral linear propagator plus Picard iteration for the gauged
//! nonlinear flow, and an outer phase fixed point for the ungauged equation).
//!
//! The crate is organized around the objects the checks need:
//!
//! * [`grid`] - grids, fields, spectra, time traces, solution histories;
//! * [`spectral`] - transforms, Sobolev norms, smooth cutoffs, the half-line
//!   extension, and the half-line time Fourier transform;
//! * [`gauge`] - the gauge group `G_a` and its algebraic checks;
//! * [`linear`] - the free propagator and the half-line linear solver built
//!   from boundary integrals;
//! * [`evolution`] - full-line RK4 stepping, the Duhamel fixed point on the
//!   half line, and the outer boundary-phase iteration;
//! * [`normal_form`] - differentiation-by-parts operators and the associated
//!   residual identity;
//! * [`diagnostics`] - smoothing-exponent fits, conservation and boundary-flux
//!   identities, space-time norms, and multilinear estimate probes.
//!
//! All randomized constructions take explicit seeds and every parallel kernel
//! assigns one output element per task, so results are reproducible bit for
//! bit regardless of worker count.

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod gauge;
pub mod grid;
pub mod linear;
pub mod normal_form;
pub mod quadrature;
pub mod spectral;

pub use error::CoreError;
pub use evolution::{EquationForm, PicardTrace};
pub use grid::{Field, GridSpec, Side, SobolevParams, SolutionHistory, TimeTrace, TraceRole};

/// Identifier of the half-line extension operator baked into this crate.
/// Recorded in reports so that archived numbers can be tied to the extension
/// that produced them.
pub const EXTENSION_ID: &str = "whitney3-outward-c2";

/// Crate version, for embedding in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
