//! Differentiation by parts in frequency space for the alpha = -1 form.
//!
//! The cubic term i u^2 conj(u)_x transforms to the trilinear sum
//!
//! ```text
//! T_hat(xi) = sum_{xi = xi1 - xi2 + xi3} xi2 u_hat(xi1) conj(u_hat(xi2)) u_hat(xi3) mu^2
//! ```
//!
//! (mu = dxi/2pi is the convolution measure). On the nonresonant region
//! |xi - xi1| >= theta, |xi - xi3| >= theta the phase factor
//! e^{it(xi^2 - xi1^2 + xi2^2 - xi3^2)} oscillates with rate
//! r = 2(xi - xi1)(xi - xi3), |r| >= 2 theta^2, and integrating by parts in
//! time trades the derivative nonlinearity for the boundary transform
//!
//! ```text
//! B_hat(xi) = sum_region  xi2 u_hat1 conj(u_hat2) u_hat3 / r  mu^2
//! ```
//!
//! plus milder corrections: the resonant remainder R (the complementary
//! region, no denominator) and the two terms where d/dt lands on one factor,
//! expressed through w = i e^{it Delta} d/dt(e^{-it Delta} u), whose closed
//! form along the flow is -i u^2 conj(u)_x - |u|^4 u / 2. Symmetry in the
//! (xi1, xi3) slots merges the outer derivatives into NR1 (prefactor 2, w in
//! slot 3); the conjugate slot gives NR2 (prefactor -1, w in slot 2). The
//! assembled identity,
//!
//! ```text
//! i d/dt [e^{-it Delta}(u - B(u))] = -e^{-it Delta}(R + |u|^4 u / 2 + NR1 + NR2)
//! ```
//!
//! is what `normal_form_residual` measures along computed trajectories.

use crate::error::{CoreError, Result};
use crate::evolution::{dealias_band, dealiased_product, nonlinearity_hat, EquationForm};
use crate::grid::{Field, GridSpec, SolutionHistory};
use crate::quadrature::pairwise_sum;
use crate::spectral::{forward_transform, inverse_transform, Spectrum};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sharp nonresonance threshold on |xi - xi1| and |xi - xi3|.
pub const DEFAULT_RESONANCE_THRESHOLD: f64 = 1.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest data wavenumber index the trilinear sums accept: three copies of
/// the band must fit on the lattice without wraparound.
pub fn nonresonant_band(grid: &GridSpec) -> usize {
    (grid.n_points / 2 - 1) / 3
}

/// One lattice point of the constraint set xi0 - xi1 + xi2 - xi3 = 0.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyQuadruple {
    /// Signed mode numbers (k0, k1, k2, k3); k2 = k1 + k3 - k0.
    pub indices: [i64; 4],
    pub dxi: f64,
}

impl FrequencyQuadruple {
    pub fn new(k0: i64, k1: i64, k3: i64, dxi: f64) -> Self {
        Self {
            indices: [k0, k1, k1 + k3 - k0, k3],
            dxi,
        }
    }

    pub fn xi(&self, slot: usize) -> f64 {
        self.indices[slot] as f64 * self.dxi
    }

    /// xi0 - xi1 + xi2 - xi3; zero exactly because k2 closes the constraint.
    pub fn constraint_defect(&self) -> f64 {
        (self.indices[0] - self.indices[1] + self.indices[2] - self.indices[3]) as f64 * self.dxi
    }

    /// xi0^2 - xi1^2 + xi2^2 - xi3^2 summed directly.
    pub fn resonance_direct(&self) -> f64 {
        self.xi(0).powi(2) - self.xi(1).powi(2) + self.xi(2).powi(2) - self.xi(3).powi(2)
    }

    pub fn resonance_factored(&self) -> f64 {
        resonance_factor(self.xi(0), self.xi(1), self.xi(3))
    }
}

/// 2(xi0 - xi1)(xi0 - xi3), the resonance value xi0^2 - xi1^2 + xi2^2 - xi3^2
/// on the constraint set (xi2 = xi1 + xi3 - xi0).
pub fn resonance_factor(xi0: f64, xi1: f64, xi3: f64) -> f64 {
    2.0 * (xi0 - xi1) * (xi0 - xi3)
}

fn support(values: &[Complex64]) -> Vec<(usize, Complex64)> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() != 0.0)
        .map(|(i, v)| (i, *v))
        .collect()
}

/// The workhorse: per output frequency xi0, sums
/// xi2 a1(xi1) conj(a2(xi2)) a3(xi3) [/ r] mu^2 over lattice (k1, k3) with
/// k2 = k1 + k3 - k0, restricted to the nonresonant region or its
/// complement. k1 ascends in the outer loop, k3 in the inner loop, and each
/// output slot reduces its terms pairwise, so results do not depend on the
/// worker count.
fn trilinear_sum(
    grid: &GridSpec,
    a1: &[Complex64],
    a2: &[Complex64],
    a3: &[Complex64],
    theta: f64,
    nonresonant: bool,
    divide: bool,
) -> Vec<Complex64> {
    let n = grid.n_points;
    let mu2 = (grid.dxi() / (2.0 * PI)).powi(2);
    let s1 = support(a1);
    let s3 = support(a3);
    (0..n)
        .into_par_iter()
        .map_init(Vec::new, |terms: &mut Vec<Complex64>, k0| {
            terms.clear();
            let xi0 = grid.xi(k0);
            for &(k1, v1) in &s1 {
                let d1 = xi0 - grid.xi(k1);
                if nonresonant && d1.abs() < theta {
                    continue;
                }
                for &(k3, v3) in &s3 {
                    let k2 = k1 as i64 + k3 as i64 - k0 as i64;
                    if k2 < 0 || k2 >= n as i64 {
                        continue;
                    }
                    let xi3 = grid.xi(k3);
                    let d3 = xi0 - xi3;
                    let in_region = d1.abs() >= theta && d3.abs() >= theta;
                    if in_region != nonresonant {
                        continue;
                    }
                    let xi2 = grid.xi(k1) + xi3 - xi0;
                    let mut term = v1 * a2[k2 as usize].conj() * v3 * (xi2 * mu2);
                    if divide {
                        let r = 2.0 * d1 * d3;
                        debug_assert!(r.abs() >= 2.0 * theta * theta * (1.0 - 1e-12));
                        term /= r;
                    }
                    terms.push(term);
                }
            }
            pairwise_sum(terms)
        })
        .collect()
}

/// Rejects data whose spectrum leaks past the admissible band by more than
/// 1e-9 of its peak.
fn ensure_band(hat: &Spectrum) -> Result<()> {
    let kb = nonresonant_band(&hat.grid);
    let peak = hat.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (xi, amplitude) = hat.band_violation(kb);
    if amplitude > 1e-9 * peak {
        return Err(CoreError::BandlimitViolation { xi, amplitude });
    }
    Ok(())
}

/// The boundary transform B(u): nonresonant trilinear sum with the
/// resonance denominator.
pub fn compute_b(u: &Field) -> Result<Field> {
    compute_b_with(u, DEFAULT_RESONANCE_THRESHOLD)
}

pub fn compute_b_with(u: &Field, theta: f64) -> Result<Field> {
    let hat = forward_transform(u);
    ensure_band(&hat)?;
    let values = trilinear_sum(&u.grid, &hat.values, &hat.values, &hat.values, theta, true, true);
    Ok(inverse_transform(&Spectrum {
        grid: u.grid.clone(),
        values,
    }))
}

/// The resonant remainder R(u): complementary-region numerator sum, no
/// denominator.
pub fn compute_r(u: &Field) -> Result<Field> {
    compute_r_with(u, DEFAULT_RESONANCE_THRESHOLD)
}

pub fn compute_r_with(u: &Field, theta: f64) -> Result<Field> {
    let hat = forward_transform(u);
    ensure_band(&hat)?;
    let values = trilinear_sum(&u.grid, &hat.values, &hat.values, &hat.values, theta, false, false);
    Ok(inverse_transform(&Spectrum {
        grid: u.grid.clone(),
        values,
    }))
}

/// Numerator sum over B's own region (no denominator); together with R it
/// partitions the unrestricted trilinear sum.
pub fn nonresonant_numerator_sum(u: &Field, theta: f64) -> Result<Field> {
    let hat = forward_transform(u);
    ensure_band(&hat)?;
    let values = trilinear_sum(&u.grid, &hat.values, &hat.values, &hat.values, theta, true, false);
    Ok(inverse_transform(&Spectrum {
        grid: u.grid.clone(),
        values,
    }))
}

/// The unrestricted trilinear sum, computed as the product i u^2 conj(u)_x
/// with a spectral derivative (exact for band-limited data: no lattice
/// wraparound below three times the admissible band).
pub fn trilinear_unrestricted(u: &Field) -> Field {
    let hat = forward_transform(u);
    let ux = inverse_transform(&hat.derivative());
    let mut out = u.clone();
    for (o, (uv, xv)) in out.values.iter_mut().zip(u.values.iter().zip(&ux.values)) {
        *o = I * uv * uv * xv.conj();
    }
    out
}

/// The time-derivative field w = i e^{it Delta} d/dt(e^{-it Delta} u); along
/// the alpha = -1 flow this is -i u^2 conj(u)_x - |u|^4 u / 2, evaluated
/// with the same dealiased product chains the stepper uses.
pub fn compute_w(u: &Field) -> Field {
    let mut w = crate::evolution::nonlinearity_field(u, &EquationForm::new(-1.0));
    for v in w.values.iter_mut() {
        *v = -*v;
    }
    w
}

/// First outer-derivative correction: prefactor 2, w in the third slot.
pub fn compute_nr1(u: &Field, w: &Field) -> Result<Field> {
    compute_nr_with(u, w, DEFAULT_RESONANCE_THRESHOLD, true)
}

/// Second outer-derivative correction: prefactor -1, w in the conjugate slot.
pub fn compute_nr2(u: &Field, w: &Field) -> Result<Field> {
    compute_nr_with(u, w, DEFAULT_RESONANCE_THRESHOLD, false)
}

fn compute_nr_with(u: &Field, w: &Field, theta: f64, first: bool) -> Result<Field> {
    let uh = forward_transform(u);
    ensure_band(&uh)?;
    let wh = forward_transform(w);
    let (values, scale) = if first {
        (
            trilinear_sum(&u.grid, &uh.values, &uh.values, &wh.values, theta, true, true),
            Complex64::new(2.0, 0.0),
        )
    } else {
        (
            trilinear_sum(&u.grid, &uh.values, &wh.values, &uh.values, theta, true, true),
            Complex64::new(-1.0, 0.0),
        )
    };
    let scaled: Vec<Complex64> = values.into_iter().map(|v| v * scale).collect();
    Ok(inverse_transform(&Spectrum {
        grid: u.grid.clone(),
        values: scaled,
    }))
}

/// Dealiased |u|^4 u / 2, with the stepper's product chain.
fn quintic_half_hat(u_hat: &Spectrum, kmax: usize) -> Vec<Complex64> {
    let mut uh = u_hat.clone();
    uh.project_band(kmax);
    let u = inverse_transform(&uh);
    let mut cu = u.clone();
    for v in cu.values.iter_mut() {
        *v = v.conj();
    }
    let m = dealiased_product(&u, &cu, kmax);
    let msq = dealiased_product(&m, &m, kmax);
    let mut t = msq;
    for (tv, uv) in t.values.iter_mut().zip(&u.values) {
        *tv = *tv * uv * 0.5;
    }
    let mut hat = forward_transform(&t);
    hat.project_band(kmax);
    hat.values
}

/// Max interior-time L^2 residual of the transformed evolution identity
/// along a computed alpha = -1 trajectory: the time derivative of
/// e^{-it Delta}(u - B(u)) by centered differences against the assembled
/// right-hand side -e^{-it Delta}(R + |u|^4 u / 2 + NR1 + NR2).
///
/// Frames after the first are not band-checked: the flow legitimately grows
/// a nonlinear halo beyond the data band, and the identity operators must be
/// applied to the trajectory as computed.
pub fn normal_form_residual(hist: &SolutionHistory) -> Result<f64> {
    normal_form_residual_with(hist, DEFAULT_RESONANCE_THRESHOLD)
}

pub fn normal_form_residual_with(hist: &SolutionHistory, theta: f64) -> Result<f64> {
    let grid = &hist.grid;
    let n_frames = hist.frames.len();
    if n_frames < 3 {
        return Ok(0.0);
    }
    let dt = grid.dt;
    let n = grid.n_points;
    let dxi = grid.dxi();
    let kmax = dealias_band(grid);

    let hats: Vec<Spectrum> = hist.frames.par_iter().map(forward_transform).collect();
    ensure_band(&hats[0])?;
    let b_hats: Vec<Vec<Complex64>> = hats
        .par_iter()
        .map(|h| trilinear_sum(grid, &h.values, &h.values, &h.values, theta, true, true))
        .collect();

    let phase = |t: f64| -> Vec<Complex64> {
        (0..n)
            .map(|slot| Complex64::new(0.0, t * grid.xi(slot).powi(2)).exp())
            .collect()
    };

    let mut worst = 0.0f64;
    for i in 1..n_frames - 1 {
        let em = phase((i - 1) as f64 * dt);
        let ei = phase(i as f64 * dt);
        let ep = phase((i + 1) as f64 * dt);

        let uh = &hats[i];
        let wh: Vec<Complex64> = nonlinearity_hat(uh, &EquationForm::new(-1.0), kmax)
            .values
            .into_iter()
            .map(|v| -v)
            .collect();
        let r_hat = trilinear_sum(grid, &uh.values, &uh.values, &uh.values, theta, false, false);
        let nr1 = trilinear_sum(grid, &uh.values, &uh.values, &wh, theta, true, true);
        let nr2 = trilinear_sum(grid, &uh.values, &wh, &uh.values, theta, true, true);
        let q_hat = quintic_half_hat(uh, kmax);

        let mut disc = 0.0f64;
        for s in 0..n {
            let lhs = I
                * (ep[s] * (hats[i + 1].values[s] - b_hats[i + 1][s])
                    - em[s] * (hats[i - 1].values[s] - b_hats[i - 1][s]))
                / (2.0 * dt);
            let rhs = -ei[s] * (r_hat[s] + q_hat[s] + 2.0 * nr1[s] - nr2[s]);
            disc += (lhs - rhs).norm_sqr();
        }
        worst = worst.max((disc * dxi / (2.0 * PI)).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::random_smooth_field;
    use crate::evolution::solve_fullline;
    use crate::grid::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band_limited_field(grid: &GridSpec, seed: u64, amp: f64) -> Field {
        let f = random_smooth_field(grid, Side::FullLine, seed, amp);
        let mut hat = forward_transform(&f);
        hat.project_band(nonresonant_band(grid));
        inverse_transform(&hat)
    }

    fn lattice_mode(grid: &GridSpec, k: i64) -> Field {
        Field::from_fn(grid, Side::FullLine, |x| {
            Complex64::new(0.0, k as f64 * grid.dxi() * x).exp()
        })
    }

    fn l2(f: &Field) -> f64 {
        f.l2_norm()
    }

    #[test]
    fn resonance_factorization_is_exact() {
        assert_eq!(resonance_factor(2.0, 1.0, 0.0), 4.0);
        // direct sum with xi2 = 1 + 0 - 2 = -1
        assert_eq!(4.0 - 1.0 + 1.0 - 0.0, 4.0);
        assert_eq!(resonance_factor(1.5, 1.5, 0.3), 0.0);

        let grid = GridSpec::new(10.0, 256, 1e-3, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let half = grid.n_points as i64 / 2;
        for _ in 0..100_000 {
            let k0 = rng.gen_range(-half..half);
            let k1 = rng.gen_range(-half..half);
            let k3 = rng.gen_range(-half..half);
            let q = FrequencyQuadruple::new(k0, k1, k3, grid.dxi());
            assert_eq!(q.constraint_defect(), 0.0);
            let direct = q.resonance_direct();
            let fact = q.resonance_factored();
            assert!(
                (direct - fact).abs() <= 1e-9 * (1.0 + direct.abs()),
                "factorization broke at {:?}: {direct} vs {fact}",
                q.indices
            );
        }
    }

    #[test]
    fn b_vanishes_on_zero_and_single_modes() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let z = Field::zero(&grid, Side::FullLine);
        assert_eq!(compute_b(&z).unwrap().max_abs(), 0.0);
        // a single mode forces xi1 = xi3 = xi0, inside the resonant region
        for k in [0i64, 3, -5] {
            let u = lattice_mode(&grid, k);
            let b = compute_b(&u).unwrap();
            assert!(
                b.max_abs() <= 1e-12,
                "B of a single mode must vanish, got {:e} at k={k}",
                b.max_abs()
            );
        }
    }

    #[test]
    fn b_and_r_are_cubically_homogeneous() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let u = band_limited_field(&grid, 42, 0.3);
        let mut u2 = u.clone();
        for v in u2.values.iter_mut() {
            *v *= 2.0;
        }
        for (f, name) in [(compute_b as fn(&Field) -> Result<Field>, "B"), (compute_r, "R")] {
            let one = f(&u).unwrap();
            let two = f(&u2).unwrap();
            let mut worst = 0.0f64;
            for (a, b) in two.values.iter().zip(&one.values) {
                worst = worst.max((a - 8.0 * b).norm());
            }
            assert!(
                worst <= 1e-12 * one.max_abs().max(1e-30) * 8.0,
                "{name} is not degree-3 homogeneous: {worst:e}"
            );
        }
    }

    #[test]
    fn single_mode_concentrates_in_the_resonant_region() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let k = 4i64;
        let kappa = k as f64 * grid.dxi();
        let u = lattice_mode(&grid, k);
        let t = trilinear_unrestricted(&u);
        let r = compute_r(&u).unwrap();
        let mut worst_t = 0.0f64;
        let mut worst_r = 0.0f64;
        for j in 0..grid.n_points {
            let x = grid.x(j);
            let expect = Complex64::new(0.0, kappa * x).exp() * kappa;
            worst_t = worst_t.max((t.values[j] - expect).norm());
            worst_r = worst_r.max((r.values[j] - expect).norm());
        }
        assert!(worst_t <= 1e-10, "unrestricted sum off closed form: {worst_t:e}");
        assert!(worst_r <= 1e-10, "R must carry the whole resonant mass: {worst_r:e}");
    }

    #[test]
    fn region_sums_partition_the_trilinear_form() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        for seed in [5u64, 23] {
            let u = band_limited_field(&grid, seed, 0.4);
            let t = trilinear_unrestricted(&u);
            let r = compute_r(&u).unwrap();
            let bnum = nonresonant_numerator_sum(&u, DEFAULT_RESONANCE_THRESHOLD).unwrap();
            let mut diff = 0.0f64;
            for j in 0..grid.n_points {
                diff = diff
                    .max((t.values[j] - r.values[j] - bnum.values[j]).norm());
            }
            let scale = l2(&t).max(1e-30);
            assert!(
                diff <= 1e-10 * scale,
                "partition defect {diff:e} against scale {scale:e} (seed {seed})"
            );
        }
    }

    #[test]
    fn w_matches_the_closed_form_on_a_single_mode() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let k = 3i64;
        let kappa = k as f64 * grid.dxi();
        let u = lattice_mode(&grid, k);
        let w = compute_w(&u);
        let mut worst = 0.0f64;
        for j in 0..grid.n_points {
            let x = grid.x(j);
            let expect = Complex64::new(0.0, kappa * x).exp() * (-kappa - 0.5);
            worst = worst.max((w.values[j] - expect).norm());
        }
        assert!(worst <= 1e-11, "w off its closed form: {worst:e}");
    }

    #[test]
    fn w_tracks_the_flow_derivative_to_second_order() {
        let grid = GridSpec::new(10.0, 128, 2e-3, 20).unwrap();
        let g = band_limited_field(&grid, 9, 0.3);
        let eq = EquationForm::new(-1.0);
        let err_at = |dt: f64| -> f64 {
            let hist = solve_fullline(&g, 0.04, dt, &eq).unwrap();
            let i = hist.frames.len() / 2;
            let t = i as f64 * dt;
            let hats: Vec<Spectrum> = hist.frames.iter().map(forward_transform).collect();
            let w = compute_w(&hist.frames[i]);
            // i e^{it Delta} d/dt (e^{-it Delta} u) by centered differences
            let n = grid.n_points;
            let mut fd = vec![Complex64::new(0.0, 0.0); n];
            for s in 0..n {
                let xi2 = grid.xi(s).powi(2);
                let ep = Complex64::new(0.0, (t + dt) * xi2).exp();
                let em = Complex64::new(0.0, (t - dt) * xi2).exp();
                let dv = (ep * hats[i + 1].values[s] - em * hats[i - 1].values[s]) / (2.0 * dt);
                fd[s] = I * Complex64::new(0.0, -t * xi2).exp() * dv;
            }
            let w_fd = inverse_transform(&Spectrum {
                grid: grid.clone(),
                values: fd,
            });
            let mut acc = 0.0;
            for (a, b) in w_fd.values.iter().zip(&w.values) {
                acc += (a - b).norm_sqr();
            }
            (acc * grid.dx()).sqrt()
        };
        let e1 = err_at(2e-3);
        let e2 = err_at(1e-3);
        let ratio = e1 / e2;
        assert!(
            (2.5..=6.0).contains(&ratio),
            "flow-derivative match should be second order, ratio {ratio} (e1={e1:e})"
        );
    }

    #[test]
    fn corrections_vanish_with_their_inputs() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let u = band_limited_field(&grid, 3, 0.2);
        let z = Field::zero(&grid, Side::FullLine);
        assert_eq!(compute_nr1(&u, &z).unwrap().max_abs(), 0.0);
        assert_eq!(compute_nr2(&u, &z).unwrap().max_abs(), 0.0);
        let w = compute_w(&u);
        assert_eq!(compute_nr1(&z, &w).unwrap().max_abs(), 0.0);
        assert_eq!(compute_nr2(&z, &w).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn corrections_are_bilinear_in_scale() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        let u = band_limited_field(&grid, 11, 0.2);
        let w = compute_w(&u);
        let mut u2 = u.clone();
        let mut w3 = w.clone();
        for v in u2.values.iter_mut() {
            *v *= 2.0;
        }
        for v in w3.values.iter_mut() {
            *v *= 3.0;
        }
        // degree (2, 1) in (u, w): scaling u by 2 and w by 3 scales by 12
        for (f, name) in [
            (compute_nr1 as fn(&Field, &Field) -> Result<Field>, "NR1"),
            (compute_nr2, "NR2"),
        ] {
            let base = f(&u, &w).unwrap();
            let scaled = f(&u2, &w3).unwrap();
            let mut worst = 0.0f64;
            for (a, b) in scaled.values.iter().zip(&base.values) {
                worst = worst.max((a - 12.0 * b).norm());
            }
            assert!(
                worst <= 1e-12 * base.max_abs().max(1e-30) * 12.0,
                "{name} is not degree-(2,1) homogeneous: {worst:e}"
            );
        }
    }

    #[test]
    fn band_violations_are_rejected() {
        let grid = GridSpec::new(10.0, 128, 1e-3, 10).unwrap();
        // content at half the lattice maximum, far beyond the N/6 band
        let u = lattice_mode(&grid, 32);
        match compute_b(&u) {
            Err(CoreError::BandlimitViolation { .. }) => {}
            other => panic!("expected a band-limit rejection, got {other:?}"),
        }
    }

    #[test]
    fn identity_residual_is_small_and_second_order() {
        let grid = GridSpec::new(10.0, 128, 2e-3, 25).unwrap();
        let zero_hist = SolutionHistory::new(
            grid.clone(),
            (0..=25).map(|_| Field::zero(&grid, Side::FullLine)).collect(),
        );
        assert_eq!(normal_form_residual(&zero_hist).unwrap(), 0.0);

        let g = band_limited_field(&grid, 21, 0.1);
        let eq = EquationForm::new(-1.0);
        let resid = |dt: f64| -> f64 {
            let hist = solve_fullline(&g, 0.05, dt, &eq).unwrap();
            normal_form_residual(&hist).unwrap()
        };
        let r1 = resid(2e-3);
        let r2 = resid(1e-3);
        assert!(r1 <= 1e-4, "identity residual too large: {r1:e}");
        let ratio = r1 / r2;
        assert!(
            (2.0..=8.0).contains(&ratio),
            "identity residual should drop ~4x under dt halving, got {ratio}"
        );
    }
}
