//! The number-conserving phase-functional Fokker–Planck operator
//!
//! ```text
//! L = Σ_{k≠0} [ -∂_k A_k + γ_k ∂_k ∂_{-k} ] - ē_N,
//! A_k = -k² φ_k + i (u_k - ε Σ_q q·(k-q) φ_q φ_{k-q}),   ē_N = N (u_0 + γ_0 N)
//! ```
//!
//! assembled as a sparse matrix over [`HermiteBasis`].
//!
//! Each `(k, -k)` pair becomes two real coordinates via `φ_k = x + iy`,
//! `∂_k = (∂_x - i∂_y)/2`. In these coordinates the operator splits as
//!
//! * per coordinate, `k²∂_x x + (γ_k/2)∂_x²` (real; diagonal with entries
//!   `-n k²` when the basis width is matched to `γ_k`),
//! * the potential drift `-i Σ_pairs (Re u_k ∂_x + Im u_k ∂_y)` (imaginary),
//! * the cubic drift `+iε C`, where `C = Σ_{k,q} q·(k-q) ∂_k φ_q φ_{k-q}` is a
//!   real operator; its word coefficients are accumulated in exact integer
//!   arithmetic so that the imaginary parts of the `(k,q)` and `(-k,-q)`
//!   contributions cancel exactly.
//!
//! The matrix therefore has real part independent of ε and imaginary part
//! linear in ε, so for a constant potential `L(-ε)` is the entry-wise complex
//! conjugate of `L(ε)` with no rounding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Result};
use crate::hermite::{gaussian_coefficients, matched_width, HermiteBasis};
use crate::lattice::ModeLattice;
use crate::sparse::SparseMatrix;

/// Relative threshold below which assembled entries are dropped.
pub const PRUNE_REL: f64 = 1e-15;

/// Physical and scaling parameters in units with `ħ²/2m = 1`.
///
/// `u_k` and `gamma_k` are indexed like [`ModeLattice::modes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub gamma_k: Option<Vec<f64>>,
    pub u_k: Vec<Complex64>,
    pub n_particles: u64,
    pub epsilon: f64,
    pub kappa: f64,
    pub p_exp: f64,
    pub q_exp: f64,
}

impl ModelParams {
    /// Constant contact coupling, zero potential, `ε = 0`, `κ = 1`, `p = q = 1/2`.
    pub fn new(lattice: &ModeLattice, gamma: f64, n_particles: u64) -> Self {
        Self {
            gamma,
            gamma_k: None,
            u_k: vec![Complex64::new(0.0, 0.0); lattice.len()],
            n_particles,
            epsilon: 0.0,
            kappa: 1.0,
            p_exp: 0.5,
            q_exp: 0.5,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Sets the uniform part `u_0` of the scaled potential.
    pub fn with_u0(mut self, u0: f64) -> Self {
        let zero = self.u_k.len() / 2;
        self.u_k[zero] = Complex64::new(u0, 0.0);
        self
    }

    pub fn with_u_k(mut self, u_k: Vec<Complex64>) -> Self {
        self.u_k = u_k;
        self
    }

    pub fn with_gamma_k(mut self, gamma_k: Vec<f64>) -> Self {
        self.gamma_k = Some(gamma_k);
        self
    }

    pub fn with_scaling(mut self, kappa: f64, p_exp: f64, q_exp: f64) -> Self {
        self.kappa = kappa;
        self.p_exp = p_exp;
        self.q_exp = q_exp;
        self
    }

    pub fn u0(&self) -> f64 {
        self.u_k[self.u_k.len() / 2].re
    }

    /// Diffusion constant of mode `i`.
    pub fn gamma_of(&self, i: usize) -> f64 {
        self.gamma_k.as_ref().map_or(self.gamma, |g| g[i])
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma_of(self.u_k.len() / 2)
    }

    /// `ē_N = N (u_0 + γ_0 N)`.
    pub fn ebar_n(&self) -> f64 {
        let n = self.n_particles as f64;
        n * (self.u0() + self.gamma0() * n)
    }

    pub fn rho(&self, lattice: &ModeLattice) -> f64 {
        self.n_particles as f64 / lattice.volume()
    }

    /// True when every `u_k` with `k ≠ 0` vanishes.
    pub fn has_constant_potential(&self) -> bool {
        let zero = self.u_k.len() / 2;
        self.u_k.iter().enumerate().all(|(i, u)| i == zero || u.norm() == 0.0)
    }

    pub fn validate(&self, lattice: &ModeLattice) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return config(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.u_k.len() != lattice.len() {
            return config(format!(
                "u_k has {} entries, lattice has {} modes",
                self.u_k.len(),
                lattice.len()
            ));
        }
        for (i, u) in self.u_k.iter().enumerate() {
            let partner = self.u_k[lattice.negate(i)];
            if !(u.re.is_finite() && u.im.is_finite()) {
                return config(format!("u_k[{i}] is not finite"));
            }
            if (u - partner.conj()).norm() > 1e-12 * u.norm().max(1.0) {
                return config(format!("u_k breaks conjugate symmetry at mode {i}"));
            }
        }
        if let Some(g) = &self.gamma_k {
            if g.len() != lattice.len() {
                return config(format!("gamma_k has {} entries, lattice has {}", g.len(), lattice.len()));
            }
            for (i, v) in g.iter().enumerate() {
                if !v.is_finite() || *v != g[lattice.negate(i)] {
                    return config(format!("gamma_k must be finite and even in k (mode {i})"));
                }
            }
        }
        if !(self.epsilon.is_finite()) {
            return config("epsilon must be finite");
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return config(format!("kappa must be positive, got {}", self.kappa));
        }
        Ok(())
    }
}

/// Drift coefficients `A_k` for a conjugate-symmetric mode vector, with the
/// cubic term weighted by `params.epsilon`. Convolution terms with `q` or
/// `k-q` off the lattice are dropped.
pub fn drift_term(
    lattice: &ModeLattice,
    phi_modes: &[Complex64],
    params: &ModelParams,
) -> Result<Vec<Complex64>> {
    if phi_modes.len() != lattice.len() {
        return config(format!("{} mode amplitudes for {} modes", phi_modes.len(), lattice.len()));
    }
    let unit2 = lattice.k_unit().powi(2);
    let i = Complex64::new(0.0, 1.0);
    Ok((0..lattice.len())
        .map(|k| {
            let mut conv = Complex64::new(0.0, 0.0);
            for q in 0..lattice.len() {
                if let Some(kq) = lattice.difference(k, q) {
                    let dot = lattice.label_dot(q, kq);
                    if dot != 0 {
                        conv += phi_modes[q] * phi_modes[kq] * (unit2 * dot as f64);
                    }
                }
            }
            let k2 = lattice.modes()[k].k_squared();
            -phi_modes[k] * k2 + i * (params.u_k[k] - conv * params.epsilon)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Weak,
    Full,
    Scaled,
}

/// A differential operator in matrix form; the operator is
/// `matrix + offset·1`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: SparseMatrix,
    pub offset: f64,
    pub basis_dims: Vec<usize>,
    pub variant: Variant,
    pub params: ModelParams,
    pub warnings: Vec<String>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.matrix.matvec(v);
        for (o, x) in out.iter_mut().zip(v) {
            *o += x * self.offset;
        }
        out
    }

    /// Dense matrix including the offset on the diagonal.
    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let mut m = self.matrix.to_dense();
        for i in 0..m.nrows() {
            m[(i, i)] += Complex64::new(self.offset, 0.0);
        }
        m
    }

    pub fn write_triplets<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.matrix.write_triplets(w, Complex64::new(self.offset, 0.0))
    }
}

/// κ-dependent coefficients of the three non-OU pieces.
#[derive(Debug, Clone, Copy)]
struct Weights {
    cubic: f64,
    potential: f64,
    diffusion: f64,
}

/// A real operator word `w · ∂_d x_a x_b`.
#[derive(Debug, Clone, Copy)]
struct CubicWord {
    deriv: usize,
    a: usize,
    b: usize,
    weight: f64,
}

/// Expands `Σ_{k≠0} Σ_q q·(k-q) ∂_k φ_q φ_{k-q}` into real-coordinate words.
fn cubic_words(lattice: &ModeLattice) -> Vec<CubicWord> {
    let coords = lattice.coordinate_map();
    // (coordinate, gaussian-integer factor) for φ and 2∂
    let phi = |m: usize| {
        let s = coords.slot(m).expect("nonzero mode");
        [(2 * s.pair, (1i64, 0i64)), (2 * s.pair + 1, (0, s.sign))]
    };
    let deriv = |m: usize| {
        let s = coords.slot(m).expect("nonzero mode");
        [(2 * s.pair, (1i64, 0i64)), (2 * s.pair + 1, (0, -s.sign))]
    };
    let mul = |(a, b): (i64, i64), (c, d): (i64, i64)| (a * c - b * d, a * d + b * c);

    let mut acc: BTreeMap<(usize, usize, usize), (i64, i64)> = BTreeMap::new();
    let zero = lattice.zero_mode();
    for k in (0..lattice.len()).filter(|&k| k != zero) {
        for q in 0..lattice.len() {
            let Some(kq) = lattice.difference(k, q) else { continue };
            let dot = lattice.label_dot(q, kq);
            if dot == 0 {
                continue;
            }
            for (d, fd) in deriv(k) {
                for (a, fa) in phi(q) {
                    for (b, fb) in phi(kq) {
                        let f = mul(mul(fd, fa), fb);
                        let e = acc.entry((d, a.min(b), a.max(b))).or_insert((0, 0));
                        e.0 += dot * f.0;
                        e.1 += dot * f.1;
                    }
                }
            }
        }
    }
    let scale = lattice.k_unit().powi(2) / 2.0;
    acc.into_iter()
        .filter(|(_, (re, _))| *re != 0)
        .map(|((deriv, a, b), (re, im))| {
            assert_eq!(im, 0, "cubic drift word ({deriv},{a},{b}) has imaginary weight");
            CubicWord { deriv, a, b, weight: scale * re as f64 }
        })
        .collect()
}

/// `(degree shift, factor)` terms of `x f_n`.
fn mul_x(n: usize, sigma: f64) -> impl Iterator<Item = (usize, f64)> {
    let up = Some((n + 1, sigma));
    let down = (n > 0).then(|| (n - 1, sigma * n as f64));
    up.into_iter().chain(down)
}

/// Image of one basis column, split into real and imaginary accumulators.
fn column(
    basis: &HermiteBasis,
    params: &ModelParams,
    words: &[CubicWord],
    w: Weights,
    col: usize,
) -> Vec<(usize, Complex64)> {
    let coords = basis.coords();
    let deg = basis.degrees(col);
    let mut re: BTreeMap<usize, f64> = BTreeMap::new();
    let mut im: BTreeMap<usize, f64> = BTreeMap::new();
    let shifted = |c: usize, n: usize| {
        let mut d = deg.clone();
        d[c] = n;
        basis.index(&d)
    };

    // OU part: k²∂x x f_n = -k²(f_{n+2} + n f_n), (γ/2)∂² f_n = γ/(2σ²) f_{n+2}
    let diag: f64 = deg.iter().enumerate().map(|(c, &n)| -(n as f64) * coords.coord_k2(c)).sum();
    if diag != 0.0 {
        *re.entry(col).or_default() += diag;
    }
    for (p, &(pos, _)) in coords.pairs().iter().enumerate() {
        let gamma = w.diffusion * params.gamma_of(pos);
        for c in [2 * p, 2 * p + 1] {
            let k2 = coords.coord_k2(c);
            let raise2 = match basis.matched_gamma() {
                Some(gb) => k2 * (gamma - gb) / gb,
                None => gamma / (2.0 * basis.sigma(c).powi(2)) - k2,
            };
            if raise2 != 0.0 {
                if let Some(row) = shifted(c, deg[c] + 2) {
                    *re.entry(row).or_default() += raise2;
                }
            }
        }
    }

    // potential drift: -i Σ (Re u ∂x + Im u ∂y), ∂ f_n = -f_{n+1}/σ
    for (p, &(pos, _)) in coords.pairs().iter().enumerate() {
        let u = params.u_k[pos] * w.potential;
        for (c, coef) in [(2 * p, u.re), (2 * p + 1, u.im)] {
            if coef != 0.0 {
                if let Some(row) = shifted(c, deg[c] + 1) {
                    *im.entry(row).or_default() += coef / basis.sigma(c);
                }
            }
        }
    }

    // cubic drift: +iε C
    if w.cubic != 0.0 {
        let mut d = deg.clone();
        for word in words {
            for (nb, fb) in mul_x(deg[word.b], basis.sigma(word.b)) {
                d[word.b] = nb;
                for (na, fa) in mul_x(d[word.a], basis.sigma(word.a)) {
                    let saved = d[word.a];
                    d[word.a] = na;
                    let nd = d[word.deriv] + 1;
                    let saved_d = d[word.deriv];
                    d[word.deriv] = nd;
                    if let Some(row) = basis.index(&d) {
                        let v = w.cubic * word.weight * fb * fa * (-1.0 / basis.sigma(word.deriv));
                        *im.entry(row).or_default() += v;
                    }
                    d[word.deriv] = saved_d;
                    d[word.a] = saved;
                }
                d[word.b] = deg[word.b];
            }
        }
    }

    let mut out: BTreeMap<usize, Complex64> = BTreeMap::new();
    for (r, v) in re {
        out.entry(r).or_default().re += v;
    }
    for (r, v) in im {
        out.entry(r).or_default().im += v;
    }
    out.into_iter().filter(|(_, v)| v.norm() != 0.0).collect()
}

fn assemble(basis: &HermiteBasis, params: &ModelParams, w: Weights) -> SparseMatrix {
    let words = if w.cubic != 0.0 { cubic_words(basis.lattice()) } else { Vec::new() };
    // columns are independent; each is accumulated serially in a fixed order
    let cols: Vec<Vec<(usize, Complex64)>> =
        (0..basis.dim()).into_par_iter().map(|c| column(basis, params, &words, w, c)).collect();
    let triplets = cols
        .into_iter()
        .enumerate()
        .flat_map(|(c, entries)| entries.into_iter().map(move |(r, v)| (r, c, v)))
        .collect();
    SparseMatrix::from_triplets(basis.dim(), basis.dim(), triplets).pruned(PRUNE_REL)
}

fn check_basis(params: &ModelParams, lattice: &ModeLattice, basis: &HermiteBasis) -> Result<()> {
    params.validate(lattice)?;
    if basis.lattice() != lattice {
        return config("basis was built on a different lattice");
    }
    Ok(())
}

/// `L_N^W = Σ_{k≠0} ∂_k {k² φ_k + γ ∂_{-k}} - ē_N`: diagonal in the
/// variance-matched basis with entries `-Σ_c n_c k_c²`.
pub fn assemble_weak(
    params: &ModelParams,
    lattice: &ModeLattice,
    basis: &HermiteBasis,
) -> Result<OperatorMatrix> {
    check_basis(params, lattice, basis)?;
    if !basis.is_matched_to(params.gamma) {
        return config(format!(
            "weak operator needs a basis matched to gamma = {} (basis: {:?})",
            params.gamma,
            basis.matched_gamma()
        ));
    }
    let weak = ModelParams { gamma_k: None, ..params.clone() };
    let zero = lattice.zero_mode();
    let mut flat = weak.clone();
    for (i, u) in flat.u_k.iter_mut().enumerate() {
        if i != zero {
            *u = Complex64::new(0.0, 0.0);
        }
    }
    let w = Weights { cubic: 0.0, potential: 0.0, diffusion: 1.0 };
    Ok(OperatorMatrix {
        matrix: assemble(basis, &flat, w),
        offset: -weak.ebar_n(),
        basis_dims: basis.dims(),
        variant: Variant::Weak,
        params: weak,
        warnings: Vec::new(),
    })
}

/// Full number-conserving operator including the potential drift and the
/// ε-weighted cubic drift.
pub fn assemble_full(
    params: &ModelParams,
    lattice: &ModeLattice,
    basis: &HermiteBasis,
) -> Result<OperatorMatrix> {
    check_basis(params, lattice, basis)?;
    let w = Weights { cubic: params.epsilon, potential: 1.0, diffusion: 1.0 };
    Ok(OperatorMatrix {
        matrix: assemble(basis, params, w),
        offset: -params.ebar_n(),
        basis_dims: basis.dims(),
        variant: Variant::Full,
        params: params.clone(),
        warnings: truncation_warnings(params.epsilon, basis),
    })
}

/// `L'` with coefficients `κ^p` on the cubic drift, `κ^{q-p}` on the
/// potential and `κ^{1-2p}` on the diffusion; `params.epsilon` is ignored.
pub fn scaled_operator(params: &ModelParams, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    let lattice = basis.lattice();
    check_basis(params, lattice, basis)?;
    let kappa = params.kappa;
    let w = Weights {
        cubic: kappa.powf(params.p_exp),
        potential: kappa.powf(params.q_exp - params.p_exp),
        diffusion: kappa.powf(1.0 - 2.0 * params.p_exp),
    };
    let n = params.n_particles as f64;
    let offset = -n * (w.potential * params.u0() + w.diffusion * params.gamma0() * n);
    Ok(OperatorMatrix {
        matrix: assemble(basis, params, w),
        offset,
        basis_dims: basis.dims(),
        variant: Variant::Scaled,
        params: params.clone(),
        warnings: truncation_warnings(w.cubic, basis),
    })
}

fn truncation_warnings(cubic: f64, basis: &HermiteBasis) -> Vec<String> {
    if cubic != 0.0 && basis.n_max() < 2 {
        vec![format!(
            "n_max = {} leaves no degree headroom for the cubic drift; results are truncation dominated",
            basis.n_max()
        )]
    } else {
        Vec::new()
    }
}

/// Coefficients of `ψ_g = exp(-Σ_k k²|φ_k|²/2γ)` in `basis`: the all-zero
/// multi-index unit vector when the basis is matched to `params.gamma`,
/// otherwise the product of per-coordinate wrong-width expansions.
pub fn gaussian_ground_coeffs(params: &ModelParams, basis: &HermiteBasis) -> Vec<Complex64> {
    let per_coord: Vec<Vec<f64>> = (0..basis.n_coords())
        .map(|c| {
            let tau = if basis.is_matched_to(params.gamma) {
                1.0
            } else {
                matched_width(params.gamma, basis.coords().coord_k2(c)) / basis.sigma(c)
            };
            gaussian_coefficients(tau, basis.n_max())
        })
        .collect();
    (0..basis.dim())
        .map(|i| {
            let v = basis.degrees(i).iter().enumerate().map(|(c, &n)| per_coord[c][n]).product();
            Complex64::new(v, 0.0)
        })
        .collect()
}

/// Parity selection rules of the constant-potential operator.
///
/// Translation by `L/2` along an axis flips the sign of every pair whose
/// label is odd on that axis, and `k -> -k` flips every `y` coordinate; both
/// commute with the operator, so basis states of different parity are never
/// coupled. The cubic drift is odd under `φ -> -φ` while everything else is
/// even, so total-degree parity is conserved by the real part and flipped
/// by the ε part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityLabel {
    pub translation: [bool; 3],
    pub reflection: bool,
    pub total: bool,
}

pub fn parity_label(basis: &HermiteBasis, index: usize) -> ParityLabel {
    let deg = basis.degrees(index);
    let lattice = basis.lattice();
    let mut label = ParityLabel { translation: [false; 3], reflection: false, total: false };
    for (p, &(pos, _)) in basis.coords().pairs().iter().enumerate() {
        let n = deg[2 * p] + deg[2 * p + 1];
        for (axis, &l) in lattice.modes()[pos].label.iter().enumerate() {
            if l.rem_euclid(2) == 1 && n % 2 == 1 {
                label.translation[axis] ^= true;
            }
        }
        label.reflection ^= deg[2 * p + 1] % 2 == 1;
        label.total ^= n % 2 == 1;
    }
    label
}
