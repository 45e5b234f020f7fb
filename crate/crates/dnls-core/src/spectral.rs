//! Transforms, Sobolev norms, cutoffs, and the half-line extension.
//!
//! Continuum conventions the discrete operators approximate:
//!
//! ```text
//! g_hat(xi) = int e^{-i x xi} g(x) dx
//! g(x)      = (1/2pi) int e^{+i x xi} g_hat(xi) dxi
//! ||g||_{H^s}^2 = (1/2pi) int <xi>^{2s} |g_hat|^2 dxi,   <xi> = sqrt(1 + xi^2)
//! ```
//!
//! On the grid the forward transform is the DFT scaled by dx, the inverse
//! carries dxi/(2pi), and the pair inverts exactly (dx * N * dxi = 2pi).
//! Plancherel therefore holds at machine precision, which the norm code
//! relies on.

use crate::error::{CoreError, Result};
use crate::grid::{Field, GridSpec, Side, TimeTrace};
use crate::quadrature::{integrate_uniform, pairwise_sum_f64};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Frequency-space counterpart of a `Field`. Slot j holds wavenumber
/// xi = pi (j - N/2) / L, so values are in monotone frequency order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_forward(n)
}

fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_inverse(n)
}

/// Discrete realization of g_hat(xi_k) on the monotone lattice.
pub fn forward_transform(f: &Field) -> Spectrum {
    let n = f.grid.n_points;
    let dx = f.grid.dx();
    let mut buf = f.values.clone();
    plan_forward(n).process(&mut buf);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (slot, v) in values.iter_mut().enumerate() {
        let k = slot as i64 - (n / 2) as i64;
        let m = k.rem_euclid(n as i64) as usize;
        let sign = if k & 1 == 0 { 1.0 } else { -1.0 };
        *v = buf[m] * (sign * dx);
    }
    Spectrum {
        grid: f.grid.clone(),
        values,
    }
}

/// Exact inverse of `forward_transform`.
pub fn inverse_transform(s: &Spectrum) -> Field {
    let n = s.grid.n_points;
    let dx = s.grid.dx();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (slot, v) in s.values.iter().enumerate() {
        let k = slot as i64 - (n / 2) as i64;
        let m = k.rem_euclid(n as i64) as usize;
        let sign = if k & 1 == 0 { 1.0 } else { -1.0 };
        buf[m] = *v * (sign / dx);
    }
    plan_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Field {
        grid: s.grid.clone(),
        side: Side::FullLine,
        values: buf,
    }
}

impl Spectrum {
    /// Multiplies by the free Schrödinger symbol e^{-i t xi^2}.
    pub fn free_evolve(&self, t: f64) -> Spectrum {
        let mut out = self.clone();
        for (slot, v) in out.values.iter_mut().enumerate() {
            let xi = self.grid.xi(slot);
            *v *= Complex64::new(0.0, -t * xi * xi).exp();
        }
        out
    }

    /// Spectral derivative: multiplication by i xi.
    pub fn derivative(&self) -> Spectrum {
        let mut out = self.clone();
        for (slot, v) in out.values.iter_mut().enumerate() {
            let xi = self.grid.xi(slot);
            *v *= Complex64::new(0.0, xi);
        }
        out
    }

    /// H^s norm, (sum <xi>^{2s} |g_hat|^2 dxi / 2pi)^{1/2}.
    pub fn hs_norm(&self, s: f64) -> f64 {
        let dxi = self.grid.dxi();
        let terms: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(slot, v)| {
                let xi = self.grid.xi(slot);
                (1.0 + xi * xi).powf(s) * v.norm_sqr()
            })
            .collect();
        (pairwise_sum_f64(&terms) * dxi / (2.0 * PI)).sqrt()
    }

    /// Zeroes all content with |k| > kmax (lattice index units).
    pub fn project_band(&mut self, kmax: usize) {
        let n = self.grid.n_points;
        for (slot, v) in self.values.iter_mut().enumerate() {
            let k = slot as i64 - (n / 2) as i64;
            if k.unsigned_abs() as usize > kmax {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Largest amplitude found outside |k| <= kmax, with its wavenumber.
    pub fn band_violation(&self, kmax: usize) -> (f64, f64) {
        let n = self.grid.n_points;
        let mut worst = (0.0f64, 0.0f64);
        for (slot, v) in self.values.iter().enumerate() {
            let k = slot as i64 - (n / 2) as i64;
            if k.unsigned_abs() as usize > kmax && v.norm() > worst.1 {
                worst = (self.grid.xi(slot), v.norm());
            }
        }
        (worst.0, worst.1)
    }

    /// Pointwise evaluation of the band-limited interpolant at arbitrary x.
    pub fn evaluate_at(&self, x: f64) -> Complex64 {
        let dxi = self.grid.dxi();
        let terms: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(slot, v)| *v * Complex64::new(0.0, x * self.grid.xi(slot)).exp())
            .collect();
        crate::quadrature::pairwise_sum(&terms) * (dxi / (2.0 * PI))
    }
}

/// H^s norm of a field (transforms internally). For half-line fields this
/// norms the stored samples as they are; use `halfline_sobolev_norm` for the
/// extension-based upper bound.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    forward_transform(f).hs_norm(s)
}

/// Upper-bound H^s(R+) norm: the H^s(R) norm of the canonical extension.
/// Monotone in s because the extension does not depend on s.
pub fn halfline_sobolev_norm(g: &Field, s: f64) -> f64 {
    let ge = extend(g, 2.5);
    sobolev_norm(&ge, s)
}

// Reflection coefficients for g_e(-x) = c1 g(x) + c2 g(x/2) + c3 g(x/3),
// matching value and two derivatives at x = 0 (sum c_j j^{-k} = (-1)^k for
// k = 0, 1, 2). This keeps extensions of H^k data admissible up to k = 5/2.
const REFLECT: [f64; 3] = [6.0, -32.0, 27.0];

/// Extension of half-line data to the full grid: exact copy on x >= 0,
/// three-point Whitney reflection with a smooth window on x < 0. The window
/// is identically 1 on [-L/8, 0] and 0 by -L/2, so the extension decays well
/// before the left box edge. Linear in g; restriction returns g exactly.
///
/// `target_smoothness` documents the regularity the caller relies on; the
/// C^2-matched reflection covers every admissible value (k <= 5/2).
pub fn extend(g: &Field, target_smoothness: f64) -> Field {
    debug_assert!(
        target_smoothness <= 2.5 + 1e-12,
        "reflection matches two derivatives; k = {target_smoothness} is beyond its range"
    );
    let grid = &g.grid;
    let n = grid.n_points;
    let origin = grid.origin_index();
    let dx = grid.dx();
    let l = grid.half_length;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    values[origin..n].copy_from_slice(&g.values[origin..n]);
    for j in 0..origin {
        let x = grid.x(j);
        let w = extension_window(x, l);
        if w == 0.0 {
            continue;
        }
        let y = -x;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in REFLECT.iter().enumerate() {
            let arg = y / (i as f64 + 1.0);
            acc += interp_halfline(&g.values, origin, n, origin as f64 + arg / dx) * *c;
        }
        values[j] = acc * w;
    }
    Field {
        grid: grid.clone(),
        side: Side::FullLine,
        values,
    }
}

fn extension_window(x: f64, l: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x >= -l / 8.0 {
        1.0
    } else if x <= -l / 2.0 {
        0.0
    } else {
        bump_profile((-x - l / 8.0) / (3.0 * l / 8.0))
    }
}

// Cubic Lagrange interpolation of the half-line samples at fractional slot
// `pos` (same indexing as the value array). Points beyond the right edge are
// treated as zero; admissible data has decayed there.
fn interp_halfline(values: &[Complex64], origin: usize, n: usize, pos: f64) -> Complex64 {
    if pos > (n - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let base = (pos.floor() as usize)
        .saturating_sub(1)
        .clamp(origin, n - 4);
    let t = pos - base as f64;
    let w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    values[base] * w0 + values[base + 1] * w1 + values[base + 2] * w2 + values[base + 3] * w3
}

/// Restriction to the half line: keeps x >= 0, zeroes the rest.
pub fn restrict(f: &Field) -> Field {
    let origin = f.grid.origin_index();
    let mut out = Field::zero(&f.grid, Side::HalfLine);
    out.values[origin..].copy_from_slice(&f.values[origin..]);
    out
}

/// Smooth transition profile: 1 at r <= 0, 0 at r >= 1, exp(1 - 1/(1 - r^2))
/// in between. Monotone on (0, 1) with slope bounded by 2.1.
pub fn bump_profile(r: f64) -> f64 {
    if r <= 0.0 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Time cutoff: 1 on |t| <= t_support, 0 beyond 2 t_support. Divided
/// differences are bounded by 3 / t_support.
pub fn cutoff_eta(t: f64, t_support: f64) -> f64 {
    debug_assert!(t_support > 0.0);
    bump_profile((t.abs() - t_support) / t_support)
}

/// Spatial cutoff used in the slow-decay boundary term: 1 for x >= 0,
/// 0 for x <= -2, smooth and monotone in between.
pub fn cutoff_rho(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        bump_profile(-x / 2.0)
    }
}

/// Half-line time Fourier transform h_hat(xi) = int_0^infty e^{-i xi t} h(t) dt,
/// by composite Simpson over the sampled window, zero beyond. Callers are
/// expected to hand in traces that have decayed by the last sample; if not,
/// the transform is truncation-suspect and a warning is logged.
pub fn halfline_time_fourier(h: &TimeTrace, xi: f64) -> Complex64 {
    debug_assert!(h.t0 == 0.0, "half-line transform expects traces starting at t = 0");
    if trace_truncation_suspect(h) {
        log::warn!(
            "half-line time transform: |h(T)| = {:.3e} has not decayed below 1e-8 of max; result is truncation-suspect",
            h.values.last().map(|v| v.norm()).unwrap_or(0.0)
        );
    }
    let integrand: Vec<Complex64> = h
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| *v * Complex64::new(0.0, -xi * h.t(j)).exp())
        .collect();
    integrate_uniform(&integrand, h.dt)
}

/// True when the final sample has not decayed below 1e-8 of the peak.
pub fn trace_truncation_suspect(h: &TimeTrace) -> bool {
    match h.values.last() {
        Some(last) => last.norm() > 1e-8 * h.max_abs(),
        None => false,
    }
}

/// H^r norm in time of a sampled trace, via the DFT on its own window
/// (period n*dt, lattice tau_m = 2 pi m / (n dt)). The trace is expected to
/// vanish smoothly at the window ends; then periodization is harmless.
pub fn time_sobolev_norm(h: &TimeTrace, r: f64) -> f64 {
    let n = h.values.len();
    assert!(n >= 2);
    let t_box = n as f64 * h.dt;
    let mut buf = h.values.clone();
    plan_forward(n).process(&mut buf);
    let dtau = 2.0 * PI / t_box;
    let terms: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let m_signed = if m <= (n - 1) / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            let tau = dtau * m_signed;
            let hat = *v * h.dt;
            (1.0 + tau * tau).powf(r) * hat.norm_sqr()
        })
        .collect();
    (pairwise_sum_f64(&terms) * dtau / (2.0 * PI)).sqrt()
}

/// Trapezoid integral over x >= 0 of an arbitrary per-sample expression.
pub fn halfline_integral(values: &[Complex64], origin: usize, dx: f64) -> Complex64 {
    let half = &values[origin..];
    let mut acc = half[0] * 0.5;
    for v in &half[1..] {
        acc += v;
    }
    acc * dx
}

/// ||f||^2_{L^2(R+)} by the trapezoid rule from x = 0.
pub fn halfline_mass(f: &Field) -> f64 {
    let origin = f.grid.origin_index();
    let dx = f.grid.dx();
    let half = &f.values[origin..];
    let mut acc = 0.5 * half[0].norm_sqr();
    for v in &half[1..] {
        acc += v.norm_sqr();
    }
    acc * dx
}

/// Validates that two fields share a spatial grid.
pub fn check_same_space(a: &GridSpec, b: &GridSpec, what: &str) -> Result<()> {
    if !a.same_space(b) {
        return Err(CoreError::GridMismatch(what.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridSpec, Side, TraceRole};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(20.0, n, 1e-3, 10).unwrap()
    }

    fn gaussian(grid: &GridSpec) -> Field {
        Field::from_fn(grid, Side::FullLine, |x| Complex64::new((-x * x).exp(), 0.0))
    }

    // Independent oracle: composite Simpson for int e^{-x^2} e^{-i x xi} dx.
    fn gaussian_hat_quadrature(xi: f64) -> Complex64 {
        let n = 4001;
        let dx = 40.0 / (n as f64 - 1.0);
        let vals: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = -20.0 + j as f64 * dx;
                Complex64::new((-x * x).exp(), 0.0) * Complex64::new(0.0, -x * xi).exp()
            })
            .collect();
        integrate_uniform(&vals, dx)
    }

    #[test]
    fn gaussian_transform_matches_closed_form_and_quadrature() {
        let g = grid(512);
        let spec = forward_transform(&gaussian(&g));
        let pi = std::f64::consts::PI;
        let mut worst = 0.0f64;
        for slot in 0..g.n_points {
            let xi = g.xi(slot);
            let exact = pi.sqrt() * (-xi * xi / 4.0).exp();
            worst = worst.max((spec.values[slot] - Complex64::new(exact, 0.0)).norm());
        }
        assert!(worst < 1e-12, "worst deviation from closed form: {worst:e}");
        for &xi in &[0.0, 0.5, 1.0, 3.0] {
            let slot = (xi / g.dxi()).round() as usize + g.n_points / 2;
            let oracle = gaussian_hat_quadrature(g.xi(slot));
            assert!((spec.values[slot] - oracle).norm() < 1e-10);
        }
    }

    #[test]
    fn transform_round_trips() {
        let g = grid(256);
        let f = Field::from_fn(&g, Side::FullLine, |x| {
            Complex64::new((-0.3 * x * x).exp() * (1.3 * x).cos(), (0.7 * x).sin() * (-0.2 * x * x).exp())
        });
        let back = inverse_transform(&forward_transform(&f));
        let worst = f
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-13);
    }

    #[test]
    fn plancherel_holds_discretely() {
        let g = grid(128);
        let f = Field::from_fn(&g, Side::FullLine, |x| {
            Complex64::new((-x * x / 3.0).exp(), 0.5 * (-x * x / 5.0).exp())
        });
        let phys = f.l2_norm();
        let freq = forward_transform(&f).hs_norm(0.0);
        assert_relative_eq!(phys, freq, max_relative = 1e-13);
    }

    #[test]
    fn sobolev_norm_of_gaussian() {
        let g = grid(512);
        // ||e^{-x^2}||_{L^2} = (pi/2)^{1/4}
        let l2 = sobolev_norm(&gaussian(&g), 0.0);
        assert_relative_eq!(l2, (std::f64::consts::PI / 2.0).powf(0.25), max_relative = 1e-12);
        // H^s is monotone in s
        let f = gaussian(&g);
        assert!(sobolev_norm(&f, 1.5) >= sobolev_norm(&f, 1.0));
        assert!(sobolev_norm(&f, 1.0) >= sobolev_norm(&f, 0.0));
    }

    #[test]
    fn extension_restricts_exactly_and_decays() {
        let g = grid(256);
        let half = Field::from_fn(&g, Side::HalfLine, |x| {
            if x >= 0.0 {
                Complex64::new((-x).exp() * (2.0 * x).cos(), 0.3 * (-x * x).exp())
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let ext = extend(&half, 2.5);
        let origin = g.origin_index();
        for j in origin..g.n_points {
            assert_eq!(ext.values[j], half.values[j]);
        }
        // decayed to zero by -L/2
        for j in 0..g.n_points / 4 {
            assert_eq!(ext.values[j], Complex64::new(0.0, 0.0));
        }
        // linearity: extension of a difference is the difference of extensions
        let half2 = Field::from_fn(&g, Side::HalfLine, |x| {
            if x >= 0.0 {
                Complex64::new((-0.5 * x * x).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let mut diff = half.clone();
        for (d, v) in diff.values.iter_mut().zip(&half2.values) {
            *d -= v;
        }
        let e1 = extend(&diff, 2.5);
        let e2 = extend(&half, 2.5);
        let e3 = extend(&half2, 2.5);
        let worst = e1
            .values
            .iter()
            .zip(e2.values.iter().zip(&e3.values))
            .map(|(d, (a, b))| (d - (a - b)).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn extension_derivative_matching_at_origin() {
        // For smooth data the reflected side reproduces value and first two
        // derivatives at 0; check with divided differences on e^{-x}.
        let g = GridSpec::new(20.0, 2048, 1e-3, 10).unwrap();
        let half = Field::from_fn(&g, Side::HalfLine, |x| {
            if x >= 0.0 {
                Complex64::new((-x).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let ext = extend(&half, 2.5);
        let o = g.origin_index();
        let dx = g.dx();
        let v = |j: i64| ext.values[(o as i64 + j) as usize].re;
        // centered first and second differences straddling the seam
        let d1 = (v(1) - v(-1)) / (2.0 * dx);
        let d2 = (v(1) - 2.0 * v(0) + v(-1)) / (dx * dx);
        assert_relative_eq!(d1, -1.0, epsilon = 2e-3);
        assert_relative_eq!(d2, 1.0, epsilon = 2e-2);
    }

    #[test]
    fn halfline_norm_dominates_halfline_mass() {
        let g = grid(512);
        let half = Field::from_fn(&g, Side::HalfLine, |x| {
            if x >= 0.0 {
                Complex64::new((-x * x).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        // || e^{-x^2} ||_{L^2(R+)} = (pi/8)^{1/4}
        let lower = (std::f64::consts::PI / 8.0).powf(0.25);
        let norm = halfline_sobolev_norm(&half, 0.0);
        assert!(norm >= lower - 1e-10, "norm {norm} below restriction norm {lower}");
        // monotone in s
        assert!(halfline_sobolev_norm(&half, 2.0) >= halfline_sobolev_norm(&half, 1.0));
    }

    #[test]
    fn cutoffs_have_plateau_support_and_bounded_slopes() {
        assert_eq!(cutoff_eta(0.5, 1.0), 1.0);
        assert_eq!(cutoff_eta(-1.0, 1.0), 1.0);
        assert_eq!(cutoff_eta(2.0, 1.0), 0.0);
        assert_eq!(cutoff_eta(-2.5, 1.0), 0.0);
        assert_eq!(cutoff_rho(1.0), 1.0);
        assert_eq!(cutoff_rho(0.0), 1.0);
        assert_eq!(cutoff_rho(-2.0), 0.0);
        assert_eq!(cutoff_rho(-3.0), 0.0);
        let dt = 1e-3;
        let mut prev_eta = cutoff_eta(-3.0, 1.0);
        let mut t = -3.0 + dt;
        while t < 3.0 {
            let e = cutoff_eta(t, 1.0);
            assert!((e - prev_eta).abs() / dt <= 3.0, "eta divided difference too large at t = {t}");
            prev_eta = e;
            t += dt;
        }
        let mut prev_rho = cutoff_rho(-2.5);
        let mut x = -2.5 + dt;
        while x < 0.5 {
            let r = cutoff_rho(x);
            assert!(r >= prev_rho - 1e-14, "rho must be monotone");
            assert!((r - prev_rho).abs() / dt <= 3.0);
            prev_rho = r;
            x += dt;
        }
    }

    #[test]
    fn halfline_time_fourier_matches_exponential() {
        let dt = 1e-3;
        let len = 30_001; // reaches t = 30, e^{-30} ~ 1e-13
        let h = TimeTrace::sample(0.0, dt, len, TraceRole::BoundaryH, |t| {
            Complex64::new((-t).exp(), 0.0)
        });
        let at0 = halfline_time_fourier(&h, 0.0);
        assert_relative_eq!(at0.re, 1.0, max_relative = 1e-9);
        assert!(at0.im.abs() < 1e-9);
        let at1 = halfline_time_fourier(&h, 1.0);
        assert!((at1 - Complex64::new(0.5, -0.5)).norm() < 1e-9);
        // linearity
        let h2 = TimeTrace::sample(0.0, dt, len, TraceRole::BoundaryH, |t| {
            Complex64::new((-t).exp() * 2.0, (-2.0 * t).exp())
        });
        let hsum = TimeTrace::sample(0.0, dt, len, TraceRole::BoundaryH, |t| {
            Complex64::new((-t).exp() * 3.0, (-2.0 * t).exp())
        });
        let lhs = halfline_time_fourier(&hsum, 0.7);
        let rhs = halfline_time_fourier(&h, 0.7) + halfline_time_fourier(&h2, 0.7);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn time_norm_agrees_with_plancherel_at_r_zero() {
        let dt = 1.0 / 256.0;
        let len = 1024;
        let h = TimeTrace::sample(0.0, dt, len, TraceRole::TraceD0, |t| {
            Complex64::new(cutoff_eta(t - 2.0, 0.8), 0.4 * cutoff_eta(t - 2.0, 0.6))
        });
        let viaseries: f64 = h.values.iter().map(|v| v.norm_sqr() * dt).sum::<f64>().sqrt();
        let vianorm = time_sobolev_norm(&h, 0.0);
        assert_relative_eq!(viaseries, vianorm, max_relative = 1e-12);
    }
}
