//! Linear half-line solver: free propagation of extended data plus explicit
//! boundary correctors that reproduce a prescribed trace at x = 0.
//!
//! The solution of i u_t + u_xx = 0 on x > 0 with u(x, 0) = g and
//! u(0, t) = h is assembled as
//!
//! ```text
//! u = W_R(t) g_e  +  (W1 + W2)(h - p),    p(t) = (W_R(t) g_e)(0)
//! ```
//!
//! where g_e extends g to the line and the correctors, acting on a trace q,
//! are oscillatory integrals over beta in (0, beta_max]:
//!
//! ```text
//! (W1 q)(x, t) = (1/pi) int e^{-i beta^2 t + i beta x}          beta q_hat(-beta^2) d beta
//! (W2 q)(x, t) = (1/pi) int e^{+i beta^2 t - beta x} rho(beta x) beta q_hat(+beta^2) d beta
//! ```
//!
//! with q_hat the half-line time transform. Both families solve the free
//! equation for x > 0, vanish at t = 0 there, and their traces at x = 0 sum
//! to the band-limited reconstruction of q, so the assembled field has the
//! required Cauchy and boundary data.
//!
//! Truncating the trace at the horizon T would put a kink into q_hat and a
//! Gibbs tail into the trace reconstruction, so traces are carried on the
//! doubled window [0, 2T] and multiplied by a smooth cutoff that is 1 on
//! [0, T] and 0 at 2T. Changing a trace beyond T cannot change the half-line
//! solution before T: two correctors whose traces agree on [0, T] both solve
//! the Dirichlet problem there, and uniqueness (odd reflection) makes them
//! equal on x >= 0, t <= T. The continuation is therefore free to be chosen
//! for quadrature quality.
//!
//! beta_max = sqrt(pi / dt) admits every temporal frequency the time lattice
//! carries. The beta integrals use composite 10-point Gauss-Legendre with
//! one panel per full cycle of the worst-case phase (error ~1e-14 per panel
//! for e^{i theta s}) and geometrically refined end panels.

use crate::error::{CoreError, Result};
use crate::grid::{Field, GridSpec, Side, SolutionHistory, TimeTrace, TraceRole};
use crate::quadrature::{gauss_legendre, gregory_weight, pairwise_sum};
use crate::spectral::{
    bump_profile, cutoff_eta, cutoff_rho, extend, forward_transform, inverse_transform, Spectrum,
};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const NODES_PER_PANEL: usize = 10;

/// Free full-line evolution: inverse transform of e^{-i t xi^2} g_hat.
/// Unitary on the grid (exact Plancherel).
pub fn free_propagate(g: &Field, t: f64) -> Field {
    inverse_transform(&forward_transform(g).free_evolve(t))
}

/// Half-line time transform of a sampled trace at one frequency,
/// q_hat(xi) = int_0^infty e^{-i xi t} q(t) dt, fourth-order Gregory rule.
/// xi runs up to +-pi/dt here, so the rule must alias cleanly at the lattice
/// Nyquist rate; see `gregory_weight` for why Simpson would not.
fn trace_hat(values: &[Complex64], dt: f64, xi: f64) -> Complex64 {
    let n = values.len();
    debug_assert!(n >= 7, "trace too short for a stable transform");
    let step = Complex64::new(0.0, -xi * dt).exp();
    let mut ph = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in values.iter().enumerate() {
        acc += *v * ph * gregory_weight(j, n);
        ph *= step;
    }
    acc * dt
}

/// Gauss-Legendre node ladder for the beta integrals: one 10-node panel per
/// 2 pi of worst-case phase sweep (at least 100 panels), first and last
/// panel geometrically subdivided. `oversample` multiplies the panel count
/// (used by refinement oracles in tests).
fn beta_nodes(grid: &GridSpec, oversample: usize) -> Vec<(f64, f64)> {
    let beta_max = (PI / grid.dt).sqrt();
    let phase = beta_max * beta_max * grid.horizon() + beta_max * grid.half_length;
    let n_panels = ((phase / (2.0 * PI)).ceil() as usize).max(100) * oversample.max(1);
    let width = beta_max / n_panels as f64;
    let mut edges = vec![0.0, width / 8.0, width / 4.0, width / 2.0];
    for p in 1..n_panels {
        edges.push(width * p as f64);
    }
    edges.push(beta_max - width / 2.0);
    edges.push(beta_max - width / 4.0);
    edges.push(beta_max - width / 8.0);
    edges.push(beta_max);

    let (gx, gw) = gauss_legendre(NODES_PER_PANEL);
    let mut nodes = Vec::with_capacity(NODES_PER_PANEL * (edges.len() - 1));
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let rad = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push((mid + rad * x, rad * w));
        }
    }
    nodes
}

/// Per-node corrector amplitudes (w/pi) beta q_hat(-+beta^2). Warns when the
/// integrand has not decayed at beta_max (the trace carries content beyond
/// the resolvable temporal bandwidth).
fn corrector_amplitudes(
    nodes: &[(f64, f64)],
    q: &TimeTrace,
) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(q.t0, 0.0, "corrector traces start at t = 0");
    let pairs: Vec<(Complex64, Complex64)> = nodes
        .par_iter()
        .map(|&(beta, w)| {
            let c = beta * w / PI;
            (
                trace_hat(&q.values, q.dt, -beta * beta) * c,
                trace_hat(&q.values, q.dt, beta * beta) * c,
            )
        })
        .collect();
    let (a1, a2): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    for (name, amps) in [("decaying", &a2), ("oscillatory", &a1)] {
        let peak = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let last = amps.last().map(|a| a.norm()).unwrap_or(0.0);
        if last > 1e-8 * peak && peak > 0.0 {
            log::warn!(
                "bandwidth_warning: {name} corrector integrand at beta_max is {:.2e} of its peak; \
                 the trace carries frequencies the time grid cannot resolve",
                last / peak
            );
        }
    }
    (a1, a2)
}

/// Sums per-node contributions panel by panel (fixed order inside a panel)
/// and reduces the panel sums pairwise. `scratch` must hold one slot per
/// panel; the summation tree depends only on the node count.
fn panel_reduce(
    terms: impl Iterator<Item = Complex64>,
    scratch: &mut Vec<Complex64>,
) -> Complex64 {
    scratch.clear();
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, term) in terms.enumerate() {
        acc += term;
        if (m + 1) % NODES_PER_PANEL == 0 {
            scratch.push(acc);
            acc = Complex64::new(0.0, 0.0);
        }
    }
    if acc != Complex64::new(0.0, 0.0) {
        scratch.push(acc);
    }
    pairwise_sum(scratch)
}

/// The oscillatory boundary family at one time:
/// (1/pi) int_0^{beta_max} e^{-i beta^2 t + i beta x} beta h_hat(-beta^2) d beta.
pub fn boundary_w1(h: &TimeTrace, grid: &GridSpec, t: f64) -> Field {
    boundary_w_single(h, grid, t, 1, 1)
}

/// The decaying boundary family at one time:
/// (1/pi) int_0^{beta_max} e^{+i beta^2 t - beta x} rho(beta x) beta h_hat(beta^2) d beta.
pub fn boundary_w2(h: &TimeTrace, grid: &GridSpec, t: f64) -> Field {
    boundary_w_single(h, grid, t, 2, 1)
}

/// Oversampled variants for refinement oracles.
pub fn boundary_w1_refined(h: &TimeTrace, grid: &GridSpec, t: f64, oversample: usize) -> Field {
    boundary_w_single(h, grid, t, 1, oversample)
}

pub fn boundary_w2_refined(h: &TimeTrace, grid: &GridSpec, t: f64, oversample: usize) -> Field {
    boundary_w_single(h, grid, t, 2, oversample)
}

fn boundary_w_single(h: &TimeTrace, grid: &GridSpec, t: f64, which: u8, oversample: usize) -> Field {
    let nodes = beta_nodes(grid, oversample);
    let (a1, a2) = corrector_amplitudes(&nodes, h);
    let values: Vec<Complex64> = (0..grid.n_points)
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            let mut scratch = Vec::with_capacity(nodes.len() / NODES_PER_PANEL + 1);
            if which == 1 {
                panel_reduce(
                    nodes.iter().zip(&a1).map(|(&(beta, _), a)| {
                        *a * Complex64::new(0.0, beta * x - beta * beta * t).exp()
                    }),
                    &mut scratch,
                )
            } else {
                panel_reduce(
                    nodes.iter().zip(&a2).map(|(&(beta, _), a)| {
                        let bx = beta * x;
                        let damp = if bx <= -2.0 {
                            0.0
                        } else {
                            (-bx).exp() * cutoff_rho(bx)
                        };
                        *a * Complex64::new(0.0, beta * beta * t).exp() * damp
                    }),
                    &mut scratch,
                )
            }
        })
        .collect();
    Field {
        grid: grid.clone(),
        side: Side::FullLine,
        values,
    }
}

/// Boundary trace of the free evolution, p(t) = eta(t) (W_R(t) g_e)(0), on
/// the grid's time lattice. eta is 1 throughout [0, T]; it matters only when
/// callers evaluate continuations beyond the horizon.
pub fn corrector_p(g_e: &Field) -> TimeTrace {
    let spec = forward_transform(g_e);
    let mut p = free_origin_trace(&spec, g_e.grid.n_steps + 1);
    let horizon = g_e.grid.horizon();
    for (i, v) in p.values.iter_mut().enumerate() {
        *v *= cutoff_eta(i as f64 * g_e.grid.dt, horizon);
    }
    p
}

/// Trace of the free evolution at x = 0 on an arbitrary-length lattice
/// t_i = i dt (no cutoff; used on the padded window).
pub fn free_origin_trace(spec: &Spectrum, len: usize) -> TimeTrace {
    let dxi = spec.grid.dxi();
    let dt = spec.grid.dt;
    let values: Vec<Complex64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * dt;
            let mut acc = Complex64::new(0.0, 0.0);
            for (slot, v) in spec.values.iter().enumerate() {
                let xi = spec.grid.xi(slot);
                acc += *v * Complex64::new(0.0, -t * xi * xi).exp();
            }
            acc * (dxi / (2.0 * PI))
        })
        .collect();
    TimeTrace {
        t0: 0.0,
        dt,
        role: TraceRole::TraceD0,
        values,
    }
}

/// Free full-line evolution frames of a spectrum at t_i = i dt.
pub fn free_frames(spec: &Spectrum, n_out: usize) -> Vec<Field> {
    (0..n_out)
        .into_par_iter()
        .map(|i| inverse_transform(&spec.free_evolve(i as f64 * spec.grid.dt)))
        .collect()
}

/// Precomputed quadrature nodes and phase tables for applying both boundary
/// correctors on a fixed grid and output time lattice t_i = i dt,
/// i = 0..n_steps. Building the kernel is the expensive part; applying it to
/// many traces (as the nonlinear iterations do) reuses every table.
pub struct BoundaryKernel {
    pub grid: GridSpec,
    /// (beta, weight) pairs, panel by panel in ascending beta.
    nodes: Vec<(f64, f64)>,
    n_out: usize,
    /// e^{i beta_m x_j}, laid out [j * m_count + m].
    ex_osc: Vec<Complex64>,
    /// e^{-beta_m x_j} rho(beta_m x_j), same layout.
    ex_dec: Vec<f64>,
    /// e^{-i beta_m^2 t_i}, laid out [i * m_count + m].
    ph_neg: Vec<Complex64>,
    /// e^{+i beta_m^2 t_i}, same layout.
    ph_pos: Vec<Complex64>,
}

impl BoundaryKernel {
    pub fn new(grid: &GridSpec) -> Self {
        let nodes = beta_nodes(grid, 1);
        let m_count = nodes.len();
        let n = grid.n_points;
        let n_out = grid.n_steps + 1;
        let mut ex_osc = vec![Complex64::new(0.0, 0.0); n * m_count];
        let mut ex_dec = vec![0.0f64; n * m_count];
        ex_osc
            .par_chunks_mut(m_count)
            .zip(ex_dec.par_chunks_mut(m_count))
            .enumerate()
            .for_each(|(j, (osc, dec))| {
                let x = grid.x(j);
                for (m, &(beta, _)) in nodes.iter().enumerate() {
                    osc[m] = Complex64::new(0.0, beta * x).exp();
                    let bx = beta * x;
                    dec[m] = if bx <= -2.0 {
                        0.0
                    } else {
                        (-bx).exp() * cutoff_rho(bx)
                    };
                }
            });
        let mut ph_neg = vec![Complex64::new(0.0, 0.0); n_out * m_count];
        let mut ph_pos = vec![Complex64::new(0.0, 0.0); n_out * m_count];
        ph_neg
            .par_chunks_mut(m_count)
            .zip(ph_pos.par_chunks_mut(m_count))
            .enumerate()
            .for_each(|(i, (neg, pos))| {
                let t = i as f64 * grid.dt;
                for (m, &(beta, _)) in nodes.iter().enumerate() {
                    let e = Complex64::new(0.0, -beta * beta * t).exp();
                    neg[m] = e;
                    pos[m] = e.conj();
                }
            });
        Self {
            grid: grid.clone(),
            nodes,
            n_out,
            ex_osc,
            ex_dec,
            ph_neg,
            ph_pos,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Applies W1 + W2 to a (padded, tapered) trace; one field per output
    /// time. Panel sums in fixed order, panels reduced pairwise, grid points
    /// independent: bit-identical output for any worker count.
    pub fn apply(&self, q: &TimeTrace) -> Vec<Field> {
        assert!(
            (q.dt - self.grid.dt).abs() <= 1e-12 * self.grid.dt,
            "trace sample spacing must match the grid"
        );
        let (a1, a2) = corrector_amplitudes(&self.nodes, q);
        let m_count = self.nodes.len();
        let n = self.grid.n_points;
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let osc = &self.ex_osc[j * m_count..(j + 1) * m_count];
                let dec = &self.ex_dec[j * m_count..(j + 1) * m_count];
                let mut ro = vec![Complex64::new(0.0, 0.0); m_count];
                let mut rd = vec![Complex64::new(0.0, 0.0); m_count];
                for m in 0..m_count {
                    ro[m] = a1[m] * osc[m];
                    rd[m] = a2[m] * dec[m];
                }
                let mut scratch = Vec::with_capacity(m_count / NODES_PER_PANEL + 1);
                let mut vals = vec![Complex64::new(0.0, 0.0); self.n_out];
                for (i, slot) in vals.iter_mut().enumerate() {
                    let pn = &self.ph_neg[i * m_count..(i + 1) * m_count];
                    let pp = &self.ph_pos[i * m_count..(i + 1) * m_count];
                    *slot = panel_reduce(
                        (0..m_count).map(|m| ro[m] * pn[m] + rd[m] * pp[m]),
                        &mut scratch,
                    );
                }
                vals
            })
            .collect();
        (0..self.n_out)
            .map(|i| {
                let mut f = Field::zero(&self.grid, Side::FullLine);
                for (j, row) in rows.iter().enumerate() {
                    f.values[j] = row[i];
                }
                f
            })
            .collect()
    }

    /// Trace of W1 + W2 at x = 0 on the output lattice; analytically this
    /// reconstructs the trace it was built from (band-limited to the
    /// frequencies beta_max^2 admits).
    pub fn trace_at_origin(&self, q: &TimeTrace) -> TimeTrace {
        let (a1, a2) = corrector_amplitudes(&self.nodes, q);
        let m_count = self.nodes.len();
        let mut scratch = Vec::with_capacity(m_count / NODES_PER_PANEL + 1);
        let values: Vec<Complex64> = (0..self.n_out)
            .map(|i| {
                let pn = &self.ph_neg[i * m_count..(i + 1) * m_count];
                let pp = &self.ph_pos[i * m_count..(i + 1) * m_count];
                panel_reduce(
                    (0..m_count).map(|m| a1[m] * pn[m] + a2[m] * pp[m]),
                    &mut scratch,
                )
            })
            .collect();
        TimeTrace {
            t0: 0.0,
            dt: self.grid.dt,
            role: TraceRole::TraceD0,
            values,
        }
    }
}

/// Continues a boundary trace to the doubled window [0, 2T] (2 n_steps + 1
/// samples). A caller that knows the trace analytically may supply the long
/// form directly; otherwise the short form is continued by h(T) times a
/// smooth bump that dies at 2T.
pub fn pad_trace(grid: &GridSpec, h: &TimeTrace) -> Result<Vec<Complex64>> {
    let n_t = grid.n_steps;
    let want = 2 * n_t + 1;
    if h.values.len() == want {
        return Ok(h.values.clone());
    }
    if h.values.len() != n_t + 1 {
        return Err(CoreError::InvalidParameter(format!(
            "boundary trace must have n_steps+1 or 2*n_steps+1 samples, got {}",
            h.values.len()
        )));
    }
    let horizon = grid.horizon();
    let last = h.values[n_t];
    let mut out = h.values.clone();
    for i in 1..=n_t {
        let s = i as f64 * grid.dt;
        out.push(last * bump_profile(s / horizon));
    }
    Ok(out)
}

/// Everything a linear solve produces beyond the frames themselves.
pub struct LinearSolveOutput {
    pub history: SolutionHistory,
    /// Free-evolution trace p on the padded window (no cutoff applied).
    pub free_trace: TimeTrace,
    /// The corrector argument eta (h_pad - p) actually fed to W1 + W2.
    pub corrector_arg: TimeTrace,
}

/// Solves the linear IBVP with a prebuilt kernel. `h` starts at t = 0 with
/// the grid's dt and has n_steps+1 or 2 n_steps+1 samples. Compatibility
/// |h(0) - g(0)| is enforced against `compat_tol`.
pub fn linear_ibvp_solve_with(
    kernel: &BoundaryKernel,
    g: &Field,
    h: &TimeTrace,
    compat_tol: f64,
) -> Result<LinearSolveOutput> {
    if g.side != Side::HalfLine {
        return Err(CoreError::InvalidParameter(
            "initial data for the half-line solver must be half-line data".into(),
        ));
    }
    crate::spectral::check_same_space(&kernel.grid, &g.grid, "linear solve data vs kernel")?;
    if h.t0 != 0.0 {
        return Err(CoreError::InvalidParameter(
            "boundary trace must start at t = 0".into(),
        ));
    }
    if (h.dt - kernel.grid.dt).abs() > 1e-12 * kernel.grid.dt {
        return Err(CoreError::InvalidParameter(
            "boundary trace sample spacing must match the grid dt".into(),
        ));
    }
    let mismatch = (h.values[0] - g.at_origin()).norm();
    if mismatch > compat_tol {
        return Err(CoreError::CompatibilityViolation {
            mismatch,
            tol: compat_tol,
        });
    }

    let grid = &kernel.grid;
    let ge = extend(g, 2.5);
    let spec = forward_transform(&ge);
    let n_pad = 2 * grid.n_steps + 1;
    let h_pad = pad_trace(grid, h)?;
    let p = free_origin_trace(&spec, n_pad);
    let horizon = grid.horizon();
    let q_values: Vec<Complex64> = h_pad
        .iter()
        .zip(&p.values)
        .enumerate()
        .map(|(i, (hv, pv))| (hv - pv) * cutoff_eta(i as f64 * grid.dt, horizon))
        .collect();
    let q = TimeTrace {
        t0: 0.0,
        dt: grid.dt,
        role: TraceRole::BoundaryH,
        values: q_values,
    };

    let n_out = grid.n_steps + 1;
    let corr = kernel.apply(&q);
    let free = free_frames(&spec, n_out);
    let mut frames = Vec::with_capacity(n_out);
    for (f, c) in free.into_iter().zip(corr) {
        let mut u = f;
        for (uv, cv) in u.values.iter_mut().zip(&c.values) {
            *uv += cv;
        }
        frames.push(u);
    }
    Ok(LinearSolveOutput {
        history: SolutionHistory::new(grid.clone(), frames),
        free_trace: p,
        corrector_arg: q,
    })
}

/// One-shot linear IBVP solve (builds the kernel internally).
pub fn linear_ibvp_solve(
    grid: &GridSpec,
    g: &Field,
    h: &TimeTrace,
    compat_tol: f64,
) -> Result<SolutionHistory> {
    let kernel = BoundaryKernel::new(grid);
    Ok(linear_ibvp_solve_with(&kernel, g, h, compat_tol)?.history)
}

/// Max over interior times of || i u_t + u_xx ||_{L^2(x in [1, L-5])},
/// with u_t by centered differences and u_xx spectral. The corner and
/// extension regions are excluded: classical regularity is not promised at
/// the corner, and the left half is bookkeeping, not solution.
pub fn pde_residual_linear(history: &SolutionHistory) -> f64 {
    let grid = &history.grid;
    let dt = grid.dt;
    let dx = grid.dx();
    let n_frames = history.frames.len();
    if n_frames < 3 {
        return 0.0;
    }
    let cols: Vec<usize> = (0..grid.n_points)
        .filter(|&j| {
            let x = grid.x(j);
            (1.0..=grid.half_length - 5.0).contains(&x)
        })
        .collect();
    let per_time: Vec<f64> = (1..n_frames - 1)
        .into_par_iter()
        .map(|i| {
            let xx = inverse_transform(
                &forward_transform(&history.frames[i]).derivative().derivative(),
            );
            let up = &history.frames[i + 1].values;
            let um = &history.frames[i - 1].values;
            let mut acc = 0.0f64;
            for &j in &cols {
                let ut = (up[j] - um[j]) / (2.0 * dt);
                let r = Complex64::new(0.0, 1.0) * ut + xx.values[j];
                acc += r.norm_sqr();
            }
            (acc * dx).sqrt()
        })
        .collect();
    per_time.into_iter().fold(0.0, f64::max)
}

/// Outcome of the boundary smoothing check on free evolutions: the windowed
/// time regularity of x-traces against the spatial regularity of the data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KatoReport {
    /// Sobolev index of the data norm in the denominator.
    pub data_regularity: f64,
    /// Time regularity (2s+1)/4 measured on each trace.
    pub time_regularity: f64,
    /// H^s norm of the (extended) data.
    pub data_norm: f64,
    /// (x, windowed trace norm / data norm) per sampled position.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

/// Measures || eta(t) (W_R(t) g_e)(x, .) ||_{H^{(2s+1)/4}_t} / ||g_e||_{H^s}
/// at 32 grid positions, t in [-2, 2) with a unit-support window. Bounded
/// ratios across data families are the smoothing effect this check targets.
pub fn kato_trace_check(g: &Field, s: f64) -> Result<KatoReport> {
    let spec = match g.side {
        Side::HalfLine => forward_transform(&extend(g, 2.5)),
        Side::FullLine => forward_transform(g),
    };
    let denom = spec.hs_norm(s);
    if denom == 0.0 {
        return Err(CoreError::InvalidParameter(
            "smoothing trace check needs nonzero data".into(),
        ));
    }
    let grid = &g.grid;
    let n = grid.n_points;
    let len = 1024usize;
    let t0 = -2.0;
    let dt_t = 4.0 / len as f64;
    let r = (2.0 * s + 1.0) / 4.0;
    let stride = (n / 32).max(1);
    let dxi = grid.dxi();
    let ratios: Vec<(f64, f64)> = (0..n)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            let values: Vec<Complex64> = (0..len)
                .map(|m| {
                    let t = t0 + m as f64 * dt_t;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (slot, v) in spec.values.iter().enumerate() {
                        let xi = grid.xi(slot);
                        acc += *v * Complex64::new(0.0, x * xi - t * xi * xi).exp();
                    }
                    acc * (dxi / (2.0 * PI)) * cutoff_eta(t, 1.0)
                })
                .collect();
            let trace = TimeTrace {
                t0,
                dt: dt_t,
                role: TraceRole::TraceD0,
                values,
            };
            (x, crate::spectral::time_sobolev_norm(&trace, r) / denom)
        })
        .collect();
    let max_ratio = ratios.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    Ok(KatoReport {
        data_regularity: s,
        time_regularity: r,
        data_norm: denom,
        ratios,
        max_ratio,
    })
}
