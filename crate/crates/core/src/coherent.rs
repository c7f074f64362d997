//! Coherent-state overlap algebra for constant-magnitude phase fields.
//!
//! An unnormalized coherent state `‖α⟩` with `α(x) = r·e^{iφ(x)}` overlaps
//! another as `⟨α‖α'⟩ = exp(G[α, α'])`, `G = ∫ α*·α' dx`, and its
//! `N`-particle projection as `G^N / N!`. Integrals are plain sums over a
//! periodic grid.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{config, Error, Result};
use crate::lattice::SpatialGrid;

/// Largest real part of `G` for which `exp(G)` is finite.
const EXP_LIMIT: f64 = 709.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentField {
    grid: SpatialGrid,
    r: f64,
    phi: Vec<f64>,
}

impl CoherentField {
    /// Field from real phase samples `φ(x_j)` in grid order.
    pub fn from_samples(grid: SpatialGrid, r: f64, phi: Vec<f64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return config(format!("coherent magnitude must be positive and finite, got {r}"));
        }
        if phi.len() != grid.n_points() {
            return config(format!(
                "phase field has {} samples, grid has {}",
                phi.len(),
                grid.n_points()
            ));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return config("phase field contains non-finite samples");
        }
        Ok(Self { grid, r, phi })
    }

    pub fn constant(grid: SpatialGrid, r: f64, phase: f64) -> Result<Self> {
        Self::from_samples(grid, r, vec![phase; grid.n_points()])
    }

    /// The `r -> 0` limit: overlaps with anything have `G = 0`.
    pub fn vacuum(grid: SpatialGrid) -> Self {
        Self { grid, r: 0.0, phi: vec![0.0; grid.n_points()] }
    }

    /// Field from Fourier coefficients `φ_k` in FFT order, with
    /// `φ(x) = Σ_k φ_k e^{ik·x}`. The coefficients must satisfy
    /// `φ_{-k} = φ_k*` to 1e-12 (relative to the largest coefficient).
    pub fn from_modes(grid: SpatialGrid, r: f64, modes: &[Complex64]) -> Result<Self> {
        if modes.len() != grid.n_points() {
            return config(format!(
                "{} Fourier coefficients for a grid of {} points",
                modes.len(),
                grid.n_points()
            ));
        }
        let scale = modes.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for (j, c) in modes.iter().enumerate() {
            let partner = modes[negated_fft_index(&grid, j)];
            if (c - partner.conj()).norm() > 1e-12 * scale {
                return config(format!("Fourier coefficient {j} breaks conjugate symmetry"));
            }
        }
        let mut data = modes.to_vec();
        fft_nd(&mut data, &grid, true);
        let phi = data.into_iter().map(|c| c.re).collect();
        Self::from_samples(grid, r, phi)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phase_samples(&self) -> &[f64] {
        &self.phi
    }

    /// Fourier coefficients `φ_k` in FFT order.
    pub fn modes(&self) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = self.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        fft_nd(&mut data, &self.grid, false);
        let norm = 1.0 / self.grid.n_points() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        data
    }

    /// `α(x_j) = r e^{iφ(x_j)}`.
    pub fn amplitude(&self) -> Vec<Complex64> {
        self.phi.iter().map(|&p| Complex64::from_polar(self.r, p)).collect()
    }
}

/// Unnormalized DFT along every axis; `inverse` uses `e^{+ikx}`.
fn fft_nd(data: &mut [Complex64], grid: &SpatialGrid, inverse: bool) {
    let m = grid.points_per_dim;
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..grid.d {
        let stride = m.pow((grid.d - 1 - axis) as u32);
        let n = data.len();
        for start in 0..n {
            // visit each line once, from its first element
            if (start / stride) % m != 0 {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

fn negated_fft_index(grid: &SpatialGrid, j: usize) -> usize {
    let m = grid.points_per_dim;
    let mut rem = j;
    let mut out = 0;
    let mut place = 1;
    for _ in 0..grid.d {
        let digit = rem % m;
        rem /= m;
        out += ((m - digit) % m) * place;
        place *= m;
    }
    out
}

/// Exponent and value of an overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapResult {
    pub g: Complex64,
    pub value: Complex64,
}

fn check_grids(a: &CoherentField, b: &CoherentField) -> Result<()> {
    if a.grid != b.grid {
        return config(format!("fields live on different grids: {:?} vs {:?}", a.grid, b.grid));
    }
    Ok(())
}

/// `G[a, b] = (V/M) Σ_j a*(x_j) b(x_j)`.
pub fn exponent_g(a: &CoherentField, b: &CoherentField) -> Result<Complex64> {
    check_grids(a, b)?;
    let rr = a.r * b.r;
    let mut sum = Complex64::new(0.0, 0.0);
    for (pa, pb) in a.phi.iter().zip(&b.phi) {
        let (s, c) = (pb - pa).sin_cos();
        sum += Complex64::new(c, s);
    }
    Ok(sum * (rr * a.grid.cell_volume()))
}

/// `⟨a‖b⟩ = exp(G[a, b])`; the kernel `K[φ_a, φ_b]` for constant magnitudes.
pub fn overlap(a: &CoherentField, b: &CoherentField) -> Result<OverlapResult> {
    let g = exponent_g(a, b)?;
    Ok(OverlapResult { g, value: exp_checked(g)? })
}

fn exp_checked(g: Complex64) -> Result<Complex64> {
    if g.re > EXP_LIMIT {
        return Err(Error::Range { exponent: g });
    }
    Ok(g.exp())
}

/// `G^n / n!`, evaluated as a running product so that neither factor overflows.
pub fn projected_overlap_from_exponent(g: Complex64, n: u32) -> Complex64 {
    (1..=n).fold(Complex64::new(1.0, 0.0), |acc, m| acc * g / m as f64)
}

/// `⟨a‖b⟩_N = G^N / N!`.
pub fn number_overlap_closed(a: &CoherentField, b: &CoherentField, n: u32) -> Result<Complex64> {
    Ok(projected_overlap_from_exponent(exponent_g(a, b)?, n))
}

/// `mq`-point trapezoid rule for `∫ dφ/2π e^{-iφN} exp(G e^{iφ})`.
pub fn phase_integral(g: Complex64, n: u32, mq: usize) -> Result<Complex64> {
    if mq < 2 {
        return config(format!("phase quadrature needs at least 2 points, got {mq}"));
    }
    if g.norm() > EXP_LIMIT {
        return Err(Error::Range { exponent: g });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..mq {
        let theta = 2.0 * PI * j as f64 / mq as f64;
        let rot = Complex64::from_polar(1.0, theta);
        let weight = Complex64::from_polar(1.0, -theta * n as f64);
        sum += weight * (g * rot).exp();
    }
    Ok(sum / mq as f64)
}

/// Number-projected overlap by phase quadrature. By discrete aliasing this is
/// exactly `Σ_{m ≡ N (mod mq)} G^m / m!`.
pub fn number_overlap_quadrature(
    a: &CoherentField,
    b: &CoherentField,
    n: u32,
    mq: usize,
) -> Result<Complex64> {
    phase_integral(exponent_g(a, b)?, n, mq)
}

/// `Σ_{m ≡ N (mod mq), m ≠ N} G^m / m!`: the exact difference between the
/// phase quadrature and `G^N / N!`. Both the lower aliases `N - j·mq ≥ 0`
/// and the upper ones `N + j·mq` contribute.
pub fn aliasing_tail(g: Complex64, n: u32, mq: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let mut m = n as usize;
    while m >= mq {
        m -= mq;
        total += projected_overlap_from_exponent(g, m as u32);
    }
    let mut term = projected_overlap_from_exponent(g, n);
    let mut m = n as usize;
    for _ in 0..100_000 {
        for step in 1..=mq {
            term *= g / (m + step) as f64;
        }
        m += mq;
        total += term;
        // terms decrease monotonically once m > |G|
        let negligible = m as f64 > g.norm() && term.norm() <= f64::EPSILON * total.norm();
        if term.norm() == 0.0 || negligible {
            break;
        }
    }
    total
}

/// Phase quadrature with weight `e^{-iφN}` applied to a state already
/// projected onto `N'` particles; vanishes unless `N ≡ N' (mod mq)`.
pub fn cross_sector_quadrature(g: Complex64, n: u32, n_prime: u32, mq: usize) -> Result<Complex64> {
    if mq < 2 {
        return config(format!("phase quadrature needs at least 2 points, got {mq}"));
    }
    let base = projected_overlap_from_exponent(g, n_prime);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..mq {
        let theta = 2.0 * PI * j as f64 / mq as f64;
        sum += Complex64::from_polar(1.0, theta * (n_prime as f64 - n as f64));
    }
    Ok(base * sum / mq as f64)
}

/// Gram matrix of coherent overlaps (`K`), or of `N`-projected overlaps
/// (`K_N`) when `n` is given.
pub fn kernel_gram(states: &[CoherentField], n: Option<u32>) -> Result<Mat<Complex64>> {
    if states.is_empty() {
        return config("Gram matrix needs at least one state");
    }
    let len = states.len();
    let mut gram = Mat::<Complex64>::zeros(len, len);
    for i in 0..len {
        for j in 0..len {
            let g = exponent_g(&states[i], &states[j])?;
            gram[(i, j)] = match n {
                Some(n) => projected_overlap_from_exponent(g, n),
                None => exp_checked(g)?,
            };
        }
    }
    Ok(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(points: usize, len: f64) -> SpatialGrid {
        SpatialGrid::new(1, len, points).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identical_constant_fields() {
        let g = grid(8, 2.0);
        let a = CoherentField::constant(g, 1.0, 0.3).unwrap();
        let e = exponent_g(&a, &a).unwrap();
        assert_relative_eq!(e.re, 2.0, epsilon = 1e-15);
        assert_eq!(e.im, 0.0);
        let o = overlap(&a, &a).unwrap();
        assert_relative_eq!(o.value.re, 2f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn phase_offset_pi() {
        let g = grid(8, 2.0);
        let a = CoherentField::constant(g, 1.0, 0.0).unwrap();
        let b = CoherentField::constant(g, 1.0, PI).unwrap();
        let e = exponent_g(&a, &b).unwrap();
        assert!((e - c(-2.0, 0.0)).norm() < 1e-14);
        let o = overlap(&a, &b).unwrap();
        assert!((o.value - c((-2f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_overlap_is_one() {
        let g = grid(8, 2.0);
        let a = CoherentField::constant(g, 1.3, 0.2).unwrap();
        let o = overlap(&a, &CoherentField::vacuum(g)).unwrap();
        assert_eq!(o.g, c(0.0, 0.0));
        assert_eq!(o.value, c(1.0, 0.0));
    }

    #[test]
    fn single_mode_phase_matches_series() {
        // ∫ e^{ic cos kx} dx / V = J0(c) = Σ (-1)^m (c/2)^{2m} / (m!)²
        let len = 2.0 * PI;
        let g = grid(32, len);
        let cc = 0.05;
        let phi: Vec<f64> = (0..32).map(|j| cc * (g.position(j)[0]).cos()).collect();
        let a = CoherentField::constant(g, 1.0, 0.0).unwrap();
        let b = CoherentField::from_samples(g, 1.0, phi).unwrap();
        let e = exponent_g(&a, &b).unwrap();
        let mut series = 0.0;
        let mut term = 1.0;
        for m in 0..10 {
            if m > 0 {
                term *= -(cc / 2.0).powi(2) / (m * m) as f64;
            }
            series += term;
        }
        assert!((e.re - len * series).abs() < 1e-14 * len);
        assert!(e.im.abs() < 1e-15);
        // leading terms of the expansion
        assert!((e.re - len * (1.0 - cc * cc / 4.0)).abs() < len * cc.powi(4));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = CoherentField::constant(grid(8, 2.0), 1.0, 0.0).unwrap();
        let b = CoherentField::constant(grid(8, 3.0), 1.0, 0.0).unwrap();
        assert!(matches!(exponent_g(&a, &b), Err(Error::Config(_))));
    }

    #[test]
    fn overflow_reports_exponent() {
        let g = grid(4, 1000.0);
        let a = CoherentField::constant(g, 1.0, 0.0).unwrap();
        match overlap(&a, &a) {
            Err(Error::Range { exponent }) => assert_relative_eq!(exponent.re, 1000.0),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn closed_projection_values() {
        assert_eq!(projected_overlap_from_exponent(c(0.7, -0.2), 0), c(1.0, 0.0));
        assert!((projected_overlap_from_exponent(c(2.0, 0.0), 2) - c(2.0, 0.0)).norm() < 1e-15);
        let g = grid(4, 1.0);
        let a = CoherentField::constant(g, 1.0, 0.0).unwrap();
        let v = number_overlap_closed(&a, &a, 3).unwrap();
        assert!((v - c(1.0 / 6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quadrature_converges() {
        let v = phase_integral(c(1.0, 0.0), 3, 64).unwrap();
        assert!((v - c(1.0 / 6.0, 0.0)).norm() < 1e-12);
        for mq in [2, 3, 7, 64] {
            assert_eq!(phase_integral(c(0.0, 0.0), 0, mq).unwrap(), c(1.0, 0.0));
        }
        assert!(phase_integral(c(1.0, 0.0), 0, 1).is_err());
    }

    #[test]
    fn aliasing_identity_small_mq() {
        // direct sum of G^m/m! over m ≡ 2 (mod 4)
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for m in 0..60u32 {
            if m > 0 {
                fact *= m as f64;
            }
            if m % 4 == 2 {
                oracle += 2f64.powi(m as i32) / fact;
            }
        }
        let q = phase_integral(c(2.0, 0.0), 2, 4).unwrap();
        assert!((q.re - oracle).abs() < 1e-14);
        assert!(q.im.abs() < 1e-14);
        let tail = aliasing_tail(c(2.0, 0.0), 2, 4);
        assert!((2.0 + tail.re - oracle).abs() < 1e-14);
    }

    #[test]
    fn cross_sector_vanishes() {
        for (n, np) in [(0, 1), (2, 3), (5, 1)] {
            let v = cross_sector_quadrature(c(1.5, 0.4), n, np, 16).unwrap();
            assert!(v.norm() < 1e-15);
        }
        let same = cross_sector_quadrature(c(1.5, 0.4), 3, 3, 16).unwrap();
        assert!((same - projected_overlap_from_exponent(c(1.5, 0.4), 3)).norm() < 1e-15);
    }

    #[test]
    fn gram_of_single_and_duplicate_states() {
        let g = grid(8, 2.0);
        let a = CoherentField::constant(g, 1.0, 0.0).unwrap();
        let one = kernel_gram(std::slice::from_ref(&a), None).unwrap();
        assert_relative_eq!(one[(0, 0)].re, 2f64.exp(), max_relative = 1e-15);
        let two = kernel_gram(&[a.clone(), a], None).unwrap();
        let ev = two.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let norm = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(ev[0].abs() < 1e-10 * norm);
        assert!(kernel_gram(&[], None).is_err());
    }

    #[test]
    fn modes_round_trip_and_symmetry() {
        let g = SpatialGrid::new(2, 1.5, 6).unwrap();
        let phi: Vec<f64> = (0..36).map(|j| ((j * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let a = CoherentField::from_samples(g, 1.0, phi.clone()).unwrap();
        let modes = a.modes();
        for j in 0..modes.len() {
            let partner = modes[negated_fft_index(&g, j)];
            assert!((modes[j] - partner.conj()).norm() < 1e-15);
        }
        let back = CoherentField::from_modes(g, 1.0, &modes).unwrap();
        for (x, y) in back.phase_samples().iter().zip(&phi) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-3));
        }
        let mut broken = modes;
        broken[1] += c(0.0, 0.5);
        assert!(CoherentField::from_modes(g, 1.0, &broken).is_err());
    }
}
