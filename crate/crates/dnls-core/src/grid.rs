//! Grids, fields, spectra, boundary traces, and solution histories.
//!
//! Space is the symmetric box [-L, L) sampled at N equispaced points
//! x_j = -L + j*dx, dx = 2L/N, with the dual lattice xi_k = pi k / L for
//! k = -N/2 .. N/2 - 1. Spectra are stored in monotone-frequency order,
//! slot j holding wavenumber index k = j - N/2. Time grids are uniform with
//! step dt; histories carry one frame per step, frame 0 at t = 0.

use crate::error::{CoreError, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Spatial and temporal discretization parameters. `half_length` is L,
/// `n_points` is N (a power of two so transforms and dealiasing bands nest),
/// `dt` and `n_steps` fix the solve horizon T = n_steps * dt.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(half_length: f64, n_points: usize, dt: f64, n_steps: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(CoreError::InvalidParameter(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(CoreError::InvalidParameter(
                "n_steps must be at least 1".into(),
            ));
        }
        Ok(Self {
            half_length,
            n_points,
            dt,
            n_steps,
        })
    }

    /// Grid spacing dx = 2L/N.
    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    /// Frequency spacing pi/L of the dual lattice.
    pub fn dxi(&self) -> f64 {
        PI / self.half_length
    }

    /// Solve horizon T = n_steps * dt.
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Index of x = 0 (exact grid point).
    pub fn origin_index(&self) -> usize {
        self.n_points / 2
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    /// Wavenumber held in monotone spectrum slot j: xi = pi (j - N/2) / L.
    pub fn xi(&self, slot: usize) -> f64 {
        (slot as i64 - (self.n_points / 2) as i64) as f64 * self.dxi()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.xi(j)).collect()
    }

    /// Largest wavenumber magnitude on the lattice, pi (N/2) / L.
    pub fn xi_max(&self) -> f64 {
        PI * (self.n_points / 2) as f64 / self.half_length
    }

    /// Same spatial grid, refined or re-horizoned time axis.
    pub fn with_time(&self, dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(self.half_length, self.n_points, dt, n_steps)
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.half_length == other.half_length && self.n_points == other.n_points
    }
}

/// Whether a field's contractual content is the whole line or x >= 0 only.
/// Half-line fields still carry N samples; the x < 0 slots hold an extension
/// and no consumer may attach meaning to them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    FullLine,
    HalfLine,
}

/// A complex-valued grid function.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: GridSpec,
    pub side: Side,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn zero(grid: &GridSpec, side: Side) -> Self {
        Self {
            grid: grid.clone(),
            side,
            values: vec![Complex64::new(0.0, 0.0); grid.n_points],
        }
    }

    pub fn from_fn(grid: &GridSpec, side: Side, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n_points).map(|j| f(grid.x(j))).collect();
        Self {
            grid: grid.clone(),
            side,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete L^2(R) norm, (sum |f|^2 dx)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        let dx = self.grid.dx();
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * dx).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Value at x = 0.
    pub fn at_origin(&self) -> Complex64 {
        self.values[self.grid.origin_index()]
    }
}

/// Roles a boundary/time series can play. `GammaPhase` traces are real by
/// construction (imaginary parts below 1e-12).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRole {
    BoundaryH,
    BoundaryCapitalH,
    TraceD0,
    GammaPhase,
    DuhamelTrace,
}

/// Uniform samples of a function of time, t_j = t0 + j*dt.
#[derive(Debug, Clone)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    pub role: TraceRole,
    pub values: Vec<Complex64>,
}

impl TimeTrace {
    pub fn sample(
        t0: f64,
        dt: f64,
        len: usize,
        role: TraceRole,
        f: impl Fn(f64) -> Complex64,
    ) -> Self {
        let values = (0..len).map(|j| f(t0 + j as f64 * dt)).collect();
        Self {
            t0,
            dt,
            role,
            values,
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Enforced invariant for `GammaPhase` traces.
    pub fn assert_real(&self) {
        if self.role == TraceRole::GammaPhase {
            let worst = self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12, "gamma phase trace grew an imaginary part: {worst:e}");
        }
    }
}

/// Frames of a time-dependent solve. Frame j corresponds to t = j * grid.dt;
/// there are grid.n_steps + 1 frames.
#[derive(Debug, Clone)]
pub struct SolutionHistory {
    pub grid: GridSpec,
    pub frames: Vec<Field>,
}

impl SolutionHistory {
    pub fn new(grid: GridSpec, frames: Vec<Field>) -> Self {
        debug_assert_eq!(frames.len(), grid.n_steps + 1);
        Self { grid, frames }
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.grid.dt
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Boundary trace at x = 0 as a TimeTrace.
    pub fn origin_trace(&self, role: TraceRole) -> TimeTrace {
        let o = self.grid.origin_index();
        TimeTrace {
            t0: 0.0,
            dt: self.grid.dt,
            role,
            values: self.frames.iter().map(|f| f.values[o]).collect(),
        }
    }
}

/// Regularity / smoothing-gain / modulation parameters carried by the
/// estimate probes, with the validity windows of the underlying bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevParams {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl SobolevParams {
    /// Largest smoothing gain claimed on the full line: a < min(1/2, 2s - 1).
    pub fn predicted_gain_fullline(s: f64) -> f64 {
        (0.5f64).min(2.0 * s - 1.0)
    }

    /// Largest smoothing gain claimed on the half line:
    /// a < min(5/2 - s, 1/4, 2s - 1).
    pub fn predicted_gain_halfline(s: f64) -> f64 {
        (2.5 - s).min(0.25).min(2.0 * s - 1.0)
    }
}
