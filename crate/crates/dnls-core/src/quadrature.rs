//! Deterministic quadrature and summation kernels shared by the solvers.
//!
//! Everything here is a pure function of its inputs with a fixed evaluation
//! order, which is what makes the bit-for-bit reproducibility guarantees of
//! the higher layers possible.

use num_complex::Complex64;

/// Pairwise (cascade) summation. O(log n) error growth instead of O(n), and
/// the reduction tree depends only on the slice length, never on threading.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 32 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Real-valued pairwise summation.
pub fn pairwise_sum_f64(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_f64(&values[..mid]) + pairwise_sum_f64(&values[mid..])
}

/// Composite Simpson rule on a uniform grid. An odd interval count is closed
/// with the 3/8 rule on the last three panels, so the rule stays fourth order
/// for any length >= 4. Lengths 2 and 3 fall back to trapezoid/Simpson.
pub fn integrate_uniform(values: &[Complex64], dx: f64) -> Complex64 {
    let n = values.len();
    match n {
        0 | 1 => Complex64::new(0.0, 0.0),
        2 => (values[0] + values[1]) * (0.5 * dx),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, Complex64::new(0.0, 0.0))
            } else {
                // 3/8 rule on the final three intervals.
                let t = (values[n - 4]
                    + values[n - 3] * 3.0
                    + values[n - 2] * 3.0
                    + values[n - 1])
                    * (3.0 * dx / 8.0);
                (n - 4, t)
            };
            let mut acc = values[0] + values[simpson_end];
            let mut j = 1;
            while j < simpson_end {
                acc += values[j] * 4.0;
                if j + 1 < simpson_end {
                    acc += values[j + 1] * 2.0;
                }
                j += 2;
            }
            acc * (dx / 3.0) + tail
        }
    }
}

/// Real-valued composite Simpson.
pub fn integrate_uniform_f64(values: &[f64], dx: f64) -> f64 {
    let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    integrate_uniform(&buf, dx).re
}

// Fourth-order Gregory end weights: trapezoid plus the first two difference
// corrections, expanded into per-sample weights 3/8, 7/6, 23/24 at each end.
const GREGORY_END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

/// Per-sample weight of the fourth-order Gregory rule on an n-point grid
/// (unit spacing). All interior weights are 1, so unlike composite Simpson
/// there is no alternating weight pattern; applied to e^{-i xi t} integrands
/// the rule aliases cleanly by Poisson summation even at the lattice Nyquist
/// frequency, where Simpson's 4/2 pattern responds with an O(integral of
/// |f|) artifact. Requires n >= 7 for the ends not to overlap.
pub fn gregory_weight(j: usize, n: usize) -> f64 {
    debug_assert!(n >= 7);
    let from_end = (n - 1 - j).min(j);
    if from_end < 3 {
        GREGORY_END[from_end]
    } else {
        1.0
    }
}

/// Fourth-order Gregory quadrature over a uniform grid. Matches composite
/// Simpson's order for smooth integrands; preferred when the integrand
/// oscillates near the grid Nyquist rate (see `gregory_weight`). Falls back
/// to `integrate_uniform` below 7 samples.
pub fn gregory_integrate(values: &[Complex64], dx: f64) -> Complex64 {
    let n = values.len();
    if n < 7 {
        return integrate_uniform(values, dx);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in values.iter().enumerate() {
        acc += *v * gregory_weight(j, n);
    }
    acc * dx
}

// Weights of the cubic interpolatory rule for one panel [x_j, x_{j+1}] with
// stencil {j-1, j, j+1, j+2}; one-sided variants at the ends. All are exact
// on cubics, so the cumulative integral below is globally fourth order.
const PANEL_INTERIOR: [f64; 4] = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];
const PANEL_LEFT: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];
const PANEL_RIGHT: [f64; 4] = [1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0];

fn panel_integral_c(values: &[Complex64], j: usize, dx: f64) -> Complex64 {
    let n = values.len();
    debug_assert!(j + 1 < n);
    let (w, base) = if j == 0 {
        (&PANEL_LEFT, 0)
    } else if j + 2 >= n {
        (&PANEL_RIGHT, n - 4)
    } else {
        (&PANEL_INTERIOR, j - 1)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        acc += values[base + i] * *wi;
    }
    acc * dx
}

fn panel_integral_f64(values: &[f64], j: usize, dx: f64) -> f64 {
    let n = values.len();
    debug_assert!(j + 1 < n);
    let (w, base) = if j == 0 {
        (&PANEL_LEFT, 0)
    } else if j + 2 >= n {
        (&PANEL_RIGHT, n - 4)
    } else {
        (&PANEL_INTERIOR, j - 1)
    };
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        acc += values[base + i] * *wi;
    }
    acc * dx
}

/// Cumulative prefix integral I[j] = int_{x_0}^{x_j} f, fourth order on
/// uniform grids (cubic panel rule). Requires at least 4 samples.
pub fn cumulative_integral_c(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = values.len();
    assert!(n >= 4, "cumulative integral needs at least 4 samples");
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n - 1 {
        out[j + 1] = out[j] + panel_integral_c(values, j, dx);
    }
    out
}

/// Real-valued cumulative prefix integral, fourth order.
pub fn cumulative_integral_f64(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "cumulative integral needs at least 4 samples");
    let mut out = vec![0.0; n];
    for j in 0..n - 1 {
        out[j + 1] = out[j] + panel_integral_f64(values, j, dx);
    }
    out
}

/// Tail integrals T[j] = int_{x_j}^{x_{n-1}} f, with f taken as zero beyond
/// the last sample. Built right to left: offsets of even parity follow the
/// composite Simpson recurrence T[j] = T[j+2] + (dx/3)(f_j + 4 f_{j+1} +
/// f_{j+2}); odd-parity offsets add one cubic panel to the neighbouring even
/// chain, keeping the whole table fourth order.
pub fn tail_integrals_f64(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "tail integrals need at least 4 samples");
    let mut out = vec![0.0; n];
    // Even-offset Simpson chain from the right edge.
    let mut j = n - 1;
    while j >= 2 {
        out[j - 2] = out[j] + (dx / 3.0) * (values[j - 2] + 4.0 * values[j - 1] + values[j]);
        if j < 4 {
            break;
        }
        j -= 2;
    }
    // Odd offsets: one cubic panel down to the even chain.
    let mut j = n - 2;
    loop {
        out[j] = out[j + 1] + panel_integral_f64(values, j, dx);
        if j < 2 {
            break;
        }
        j -= 2;
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Deterministic and accurate to machine precision for
/// the small orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_exponential() {
        let n = 2001;
        let dx = 10.0 / (n as f64 - 1.0);
        let vals: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((-(j as f64) * dx).exp(), 0.0))
            .collect();
        let got = integrate_uniform(&vals, dx);
        // int_0^10 e^{-t} dt = 1 - e^{-10}
        assert_relative_eq!(got.re, 1.0 - (-10.0f64).exp(), max_relative = 1e-10);
        assert!(got.im.abs() < 1e-15);
    }

    #[test]
    fn simpson_handles_odd_interval_count() {
        let n = 2000; // 1999 intervals, exercises the 3/8 closure
        let dx = 1.0 / (n as f64 - 1.0);
        let vals: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = j as f64 * dx;
                Complex64::new(x * x * x, 0.0)
            })
            .collect();
        let got = integrate_uniform(&vals, dx);
        assert_relative_eq!(got.re, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let n = 512;
        let dx = 8.0 / (n as f64 - 1.0);
        let vals: Vec<f64> = (0..n).map(|j| (-(j as f64 * dx)).exp()).collect();
        let cum = cumulative_integral_f64(&vals, dx);
        for (j, c) in cum.iter().enumerate().step_by(37) {
            let x = j as f64 * dx;
            assert_relative_eq!(*c, 1.0 - (-x).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn tail_integrals_match_complement() {
        let n = 600;
        let dx = 12.0 / (n as f64 - 1.0);
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let x = j as f64 * dx;
                (-x * x / 4.0).exp()
            })
            .collect();
        let tails = tail_integrals_f64(&vals, dx);
        let total = integrate_uniform_f64(&vals, dx);
        let cum = cumulative_integral_f64(&vals, dx);
        for j in (0..n).step_by(53) {
            assert_relative_eq!(tails[j], total - cum[j], epsilon = 1e-7);
        }
        assert_eq!(tails[n - 1], 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(10);
        // Exact for degree <= 19: try x^18 on [-1,1] = 2/19.
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(18)).sum();
        assert_relative_eq!(got, 2.0 / 19.0, max_relative = 1e-13);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let vals: Vec<Complex64> = (0..1000)
            .map(|j| Complex64::new(1.0 / (j as f64 + 1.0), -0.5 / (j as f64 + 2.0)))
            .collect();
        let naive: Complex64 = vals.iter().sum();
        let pw = pairwise_sum(&vals);
        assert!((naive - pw).norm() < 1e-12);
    }

    #[test]
    fn gregory_is_fourth_order_on_smooth_integrands() {
        // int_0^2 e^{-t} dt, refine twice and confirm ~16x error reduction.
        let err = |n: usize| {
            let dx = 2.0 / (n - 1) as f64;
            let vals: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new((-(j as f64) * dx).exp(), 0.0))
                .collect();
            (gregory_integrate(&vals, dx).re - (1.0 - (-2.0f64).exp())).abs()
        };
        let e1 = err(101);
        let e2 = err(201);
        assert!(e1 < 1e-8);
        let ratio = e1 / e2;
        assert!((10.0..24.0).contains(&ratio), "ratio {ratio} not ~16");
    }

    #[test]
    fn gregory_has_no_nyquist_artifact() {
        // Integrand oscillating exactly at the lattice Nyquist rate against a
        // slowly varying envelope. The true integral is ~0 (the envelope's
        // transform at the highest frequency). Gregory keeps the quadrature
        // tiny; composite Simpson responds with ~(1/3) int env dt.
        let n = 2001;
        let dx = 1e-3;
        let env = |t: f64| (-(t - 1.0) * (t - 1.0) / 0.02).exp();
        let vals: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = j as f64 * dx;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * env(t), 0.0)
            })
            .collect();
        let greg = gregory_integrate(&vals, dx).norm();
        let simp = integrate_uniform(&vals, dx).norm();
        let env_mass: f64 = (0..n).map(|j| env(j as f64 * dx) * dx).sum();
        assert!(greg < 1e-6 * env_mass, "gregory artifact: {greg:e}");
        assert!(simp > 0.2 * env_mass, "expected Simpson artifact is the point of this test");
    }
}
