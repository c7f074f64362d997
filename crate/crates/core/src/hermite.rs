//! Tensor-product basis of Hermite functions over the real phase coordinates.
//!
//! Coordinate `c` carries `f_n(x) = He_n(x/σ_c)·exp(-x²/2σ_c²)`. With
//! `σ_c² = γ/(2k_c²)` the degree-0 function is the per-coordinate factor
//! `exp(-k²x²/γ)` of the Gaussian ground functional, and the `f_n` are the
//! right eigenfunctions of the Ornstein–Uhlenbeck operator
//! `k²∂_x x + (γ/2)∂_x²` with eigenvalue `-n·k²`.
//!
//! Ladder rules used throughout (exact, from `ξHe_n = He_{n+1} + nHe_{n-1}`
//! and `d/dξ[He_n e^{-ξ²/2}] = -He_{n+1} e^{-ξ²/2}`):
//!
//! ```text
//! x  f_n = σ (f_{n+1} + n f_{n-1})
//! ∂x f_n = -f_{n+1} / σ
//! ```

use crate::error::{config, Error, Result};
use crate::lattice::{ModeLattice, RealCoordinateMap};

/// Largest tensor basis we are willing to enumerate.
pub const MAX_BASIS_DIM: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct HermiteBasis {
    lattice: ModeLattice,
    coords: RealCoordinateMap,
    n_max: usize,
    sigma: Vec<f64>,
    /// The diffusion constant the widths were matched to, if they were.
    matched_gamma: Option<f64>,
    dim: usize,
}

/// `sqrt(γ / 2k²)`: the width that makes degree 0 the OU stationary state.
pub fn matched_width(gamma: f64, k2: f64) -> f64 {
    (gamma / (2.0 * k2)).sqrt()
}

impl HermiteBasis {
    /// Variance-matched basis: `σ_c = sqrt(γ/2k_c²)`.
    pub fn new(lattice: &ModeLattice, gamma: f64, n_max: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return config(format!("basis width needs gamma > 0, got {gamma}"));
        }
        let coords = lattice.coordinate_map();
        let sigma = coords.coord_k2s().iter().map(|&k2| matched_width(gamma, k2)).collect();
        Self::build(lattice, coords, n_max, sigma, Some(gamma))
    }

    /// Basis with the matched widths multiplied by `factor`.
    pub fn with_width_factor(
        lattice: &ModeLattice,
        gamma: f64,
        n_max: usize,
        factor: f64,
    ) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return config(format!("width factor must be positive, got {factor}"));
        }
        if factor == 1.0 {
            return Self::new(lattice, gamma, n_max);
        }
        let coords = lattice.coordinate_map();
        let sigma =
            coords.coord_k2s().iter().map(|&k2| factor * matched_width(gamma, k2)).collect();
        Self::build(lattice, coords, n_max, sigma, None)
    }

    fn build(
        lattice: &ModeLattice,
        coords: RealCoordinateMap,
        n_max: usize,
        sigma: Vec<f64>,
        matched_gamma: Option<f64>,
    ) -> Result<Self> {
        let side = n_max + 1;
        let mut dim: usize = 1;
        for _ in 0..coords.n_coords() {
            dim = dim
                .checked_mul(side)
                .filter(|&d| d <= MAX_BASIS_DIM)
                .ok_or(Error::Dimension { dim: usize::MAX, limit: MAX_BASIS_DIM })?;
        }
        Ok(Self { lattice: lattice.clone(), coords, n_max, sigma, matched_gamma, dim })
    }

    pub fn lattice(&self) -> &ModeLattice {
        &self.lattice
    }

    pub fn coords(&self) -> &RealCoordinateMap {
        &self.coords
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_coords(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self, c: usize) -> f64 {
        self.sigma[c]
    }

    pub fn matched_gamma(&self) -> Option<f64> {
        self.matched_gamma
    }

    pub fn is_matched_to(&self, gamma: f64) -> bool {
        self.matched_gamma == Some(gamma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.n_max + 1; self.n_coords()]
    }

    /// Degrees per coordinate of flat index `i`; coordinate 0 varies slowest.
    pub fn degrees(&self, i: usize) -> Vec<usize> {
        let side = self.n_max + 1;
        let mut out = vec![0; self.n_coords()];
        let mut rem = i;
        for c in (0..self.n_coords()).rev() {
            out[c] = rem % side;
            rem /= side;
        }
        out
    }

    /// Flat index of a multi-index, or `None` if any degree exceeds `n_max`.
    pub fn index(&self, degrees: &[usize]) -> Option<usize> {
        let side = self.n_max + 1;
        let mut i = 0;
        for &n in degrees {
            if n > self.n_max {
                return None;
            }
            i = i * side + n;
        }
        Some(i)
    }
}

/// Expansion coefficients of `exp(-x²/2s²)` in `He_n(x/σ)exp(-x²/2σ²)` for
/// `τ = s/σ`: `c_{2m} = τ(τ²-1)^m / (2^m m!)`, odd coefficients zero.
pub fn gaussian_coefficients(tau: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let ratio = tau * tau - 1.0;
    let mut term = tau;
    for m in 0..=n_max / 2 {
        if m > 0 {
            term *= ratio / (2.0 * m as f64);
        }
        out[2 * m] = term;
    }
    out
}
