//! Eigen-analysis of the (non-Hermitian) operator matrices.
//!
//! Right eigenvectors come from a dense complex eigendecomposition of the
//! operator; left eigenvectors from the decomposition of its adjoint. Within
//! each cluster of (numerically) equal eigenvalues the left vectors are
//! re-mixed so that `L†R = 1` holds blockwise, which makes the ladder
//! degeneracies of the weak operator harmless.

use std::cmp::Ordering;
use std::io::Write;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::hermite::HermiteBasis;
use crate::lattice::ModeLattice;
use crate::operator::{assemble_full, assemble_weak, OperatorMatrix, Variant};
use crate::operator::ModelParams;

/// Largest matrix handed to the dense solver.
pub const DENSE_LIMIT: usize = 4000;
/// Residual bound for accepted eigenpairs.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Minimum gap between the reference level and the rest of the spectrum.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eigenvalue: Complex64,
    pub right_vector: Vec<Complex64>,
    pub left_vector: Option<Vec<Complex64>>,
    /// `‖(L - λ)v‖ / ‖v‖` for the right vector.
    pub residual: f64,
}

/// Full bi-orthogonal eigendecomposition, sorted by [`spectral_order`].
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub values: Vec<Complex64>,
    /// Columns are right eigenvectors (unit 2-norm).
    pub right: Mat<Complex64>,
    /// Columns are left eigenvectors with `left[:,i]† right[:,j] = δ_ij`.
    pub left: Mat<Complex64>,
}

/// Descending real part, then ascending `|Im|`, then ascending `Im`.
pub fn spectral_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.re.total_cmp(&a.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(a.im.total_cmp(&b.im))
}

fn dense_eigen(m: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let evd = m.eigen().map_err(|e| Error::Solver {
        message: format!("dense eigendecomposition failed: {e:?}"),
        residual: f64::NAN,
    })?;
    let values: Vec<Complex64> = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

fn check_size(op: &OperatorMatrix) -> Result<()> {
    if op.dim() > DENSE_LIMIT {
        return Err(Error::Dimension { dim: op.dim(), limit: DENSE_LIMIT });
    }
    Ok(())
}

fn column(m: &Mat<Complex64>, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(op: &OperatorMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let av = op.apply(v);
    let r: Vec<Complex64> = av.iter().zip(v).map(|(a, x)| a - lambda * x).collect();
    norm(&r) / norm(v)
}

fn sorted_right(op: &OperatorMatrix) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    check_size(op)?;
    let (values, vecs) = dense_eigen(&op.to_dense())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| spectral_order(&values[a], &values[b]).then(a.cmp(&b)));
    let n = values.len();
    let sorted_vals = order.iter().map(|&i| values[i]).collect();
    let mut right = Mat::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let scale = 1.0 / norm(&column(&vecs, src));
        for i in 0..n {
            right[(i, dst)] = vecs[(i, src)] * scale;
        }
    }
    Ok((sorted_vals, right))
}

/// Bi-orthogonal decomposition of `op` (offset included).
pub fn decompose(op: &OperatorMatrix) -> Result<Decomposition> {
    let (values, right) = sorted_right(op)?;
    let n = values.len();
    let (adj_values, adj_vecs) = dense_eigen(&op.to_dense().adjoint().to_owned())?;
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = 1e-8 * scale;

    // clusters of consecutive (sorted) eigenvalues closer than tol
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match clusters.last_mut() {
            Some(c) if c.iter().any(|&j| (values[j] - values[i]).norm() < tol) => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mut used = vec![false; n];
    let mut left = Mat::<Complex64>::zeros(n, n);
    for cluster in &clusters {
        let center = cluster.iter().map(|&i| values[i]).sum::<Complex64>() / cluster.len() as f64;
        let mut cand: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
        cand.sort_by(|&a, &b| {
            let da = (adj_values[a].conj() - center).norm();
            let db = (adj_values[b].conj() - center).norm();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let picked = &cand[..cluster.len()];
        for &j in picked {
            used[j] = true;
            if (adj_values[j].conj() - center).norm() > tol.max(1e-6 * scale) {
                return Err(Error::Solver {
                    message: format!("left/right spectra disagree near {center}"),
                    residual: (adj_values[j].conj() - center).norm(),
                });
            }
        }
        // S = L_c† R_c; L_c <- L_c S^{-†}
        let s = cluster.len();
        let mut overlap = Mat::<Complex64>::zeros(s, s);
        for (a, &lj) in picked.iter().enumerate() {
            for (b, &ri) in cluster.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += adj_vecs[(k, lj)].conj() * right[(k, ri)];
                }
                overlap[(a, b)] = acc;
            }
        }
        let inv_adj = overlap.partial_piv_lu().inverse().adjoint().to_owned();
        if (0..s).any(|a| (0..s).any(|b| !inv_adj[(a, b)].re.is_finite() || !inv_adj[(a, b)].im.is_finite())) {
            return Err(Error::Solver {
                message: "defective eigenvalue cluster: left and right vectors are orthogonal".into(),
                residual: f64::NAN,
            });
        }
        for k in 0..n {
            for (b, &ri) in cluster.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, &lj) in picked.iter().enumerate() {
                    acc += adj_vecs[(k, lj)] * inv_adj[(a, b)];
                }
                left[(k, ri)] = acc;
            }
        }
    }
    Ok(Decomposition { values, right, left })
}

/// The `count` eigenpairs with largest real part, each checked by residual.
pub fn eigen_spectrum(op: &OperatorMatrix, count: usize) -> Result<Vec<EigenPair>> {
    let (values, right) = sorted_right(op)?;
    values
        .iter()
        .take(count)
        .enumerate()
        .map(|(i, &lambda)| {
            let v = column(&right, i);
            let res = residual(op, lambda, &v);
            if res > RESIDUAL_TOL {
                return Err(Error::Solver { message: format!("eigenpair {i} rejected"), residual: res });
            }
            Ok(EigenPair { eigenvalue: lambda, right_vector: v, left_vector: None, residual: res })
        })
        .collect()
}

/// Eigenpair with the largest real part, with its bi-orthogonal left vector.
pub fn ground_state(op: &OperatorMatrix) -> Result<EigenPair> {
    let d = decompose(op)?;
    let v = column(&d.right, 0);
    let res = residual(op, d.values[0], &v);
    if res > RESIDUAL_TOL {
        return Err(Error::Solver { message: "ground state rejected".into(), residual: res });
    }
    Ok(EigenPair { eigenvalue: d.values[0], right_vector: v, left_vector: Some(column(&d.left, 0)), residual: res })
}

/// Physical energy `E = (ħ²/2m)·e` with `e = -λ`.
pub fn energy_from_eigenvalue(lambda: Complex64, hbar2_over_2m: f64) -> Complex64 {
    -lambda * hbar2_over_2m
}

/// Uniform potential `u_0` that puts the ground eigenvalue at zero.
///
/// For the weak operator this is `u_0 = -γN`. For the full operator `u_0` is
/// found by a bracketed root search on the computed ground eigenvalue.
pub fn calibrate_mu(
    params: &ModelParams,
    lattice: &ModeLattice,
    basis: &HermiteBasis,
    variant: Variant,
) -> Result<f64> {
    let n = params.n_particles as f64;
    if variant == Variant::Weak {
        assemble_weak(params, lattice, basis)?;
        return Ok(-params.gamma0() * n);
    }
    if params.n_particles == 0 {
        return config("chemical potential is undetermined for N = 0");
    }
    let f = |u0: f64| -> Result<f64> {
        let op = assemble_full(&params.clone().with_u0(u0), lattice, basis)?;
        Ok(ground_state(&op)?.eigenvalue.re)
    };
    let guess = -params.gamma0() * n;
    let mut step = params.gamma0().abs().max(1.0);
    let (mut a, mut b) = (guess - step, guess + step);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    let mut tries = 0;
    while fa.signum() == fb.signum() {
        tries += 1;
        if tries > 40 {
            return Err(Error::Solver {
                message: format!("no sign change of the ground eigenvalue in [{a}, {b}]"),
                residual: fa.abs().min(fb.abs()),
            });
        }
        step *= 2.0;
        a = guess - step;
        b = guess + step;
        fa = f(a)?;
        fb = f(b)?;
    }
    // Illinois false position
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() < 1e-10 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::Solver { message: "chemical potential search did not converge".into(), residual: fa.abs().min(fb.abs()) })
}

/// Rayleigh–Schrödinger coefficients `e^(0), e^(1), …` of the reference
/// eigenvalue of `L_0 + εV`.
#[derive(Debug, Clone)]
pub struct PerturbationSeries {
    pub orders: Vec<Complex64>,
}

impl PerturbationSeries {
    /// `Σ_{j ≤ up_to} ε^j e^(j)`.
    pub fn evaluate(&self, epsilon: f64, up_to: usize) -> Complex64 {
        self.orders
            .iter()
            .take(up_to + 1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &e| acc * epsilon + e)
    }
}

/// Non-Hermitian Rayleigh–Schrödinger series for the largest-real-part
/// eigenvalue of `op0` under the perturbation `op1`.
///
/// With intermediate normalization `⟨L|R^(n)⟩ = 0`:
/// `e^(n) = ⟨L|V|R^(n-1)⟩`,
/// `R^(n) = S (V R^(n-1) - Σ_{j=1}^{n} e^(j) R^(n-j))`, where
/// `S = Σ_{j≠g} |R_j⟩⟨L_j| / (λ_g - λ_j)` is the reduced resolvent.
pub fn perturbation_series(
    op0: &OperatorMatrix,
    op1: &OperatorMatrix,
    max_order: usize,
) -> Result<PerturbationSeries> {
    if op0.dim() != op1.dim() {
        return config("perturbation and reference operators differ in size");
    }
    let d = decompose(op0)?;
    let n = d.values.len();
    let lg = d.values[0];
    for j in 1..n {
        let gap = (lg - d.values[j]).norm();
        if gap < DEGENERACY_TOL {
            return Err(Error::Degenerate { index: j, gap });
        }
    }
    let perturb = |x: &[Complex64]| op1.apply(x);
    let resolvent = |x: &[Complex64]| -> Vec<Complex64> {
        let mut coef = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in coef.iter_mut().enumerate().skip(1) {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += d.left[(k, j)].conj() * x[k];
            }
            *c = acc / (lg - d.values[j]);
        }
        (0..n)
            .map(|k| (1..n).fold(Complex64::new(0.0, 0.0), |acc, j| acc + d.right[(k, j)] * coef[j]))
            .collect()
    };
    let left = column(&d.left, 0);
    let dot = |x: &[Complex64]| left.iter().zip(x).fold(Complex64::new(0.0, 0.0), |acc, (l, v)| acc + l.conj() * v);

    let mut orders = vec![lg];
    let mut vectors = vec![column(&d.right, 0)];
    for order in 1..=max_order {
        let v_prev = perturb(&vectors[order - 1]);
        let e = dot(&v_prev);
        orders.push(e);
        if order == max_order {
            break;
        }
        let mut rhs = v_prev;
        for j in 1..=order {
            for (r, x) in rhs.iter_mut().zip(&vectors[order - j]) {
                *r -= orders[j] * x;
            }
        }
        vectors.push(resolvent(&rhs));
    }
    Ok(PerturbationSeries { orders })
}

pub fn write_spectrum_csv<W: Write>(mut w: W, pairs: &[EigenPair]) -> Result<()> {
    writeln!(w, "index,re,im,residual")?;
    for (i, p) in pairs.iter().enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", p.eigenvalue.re, p.eigenvalue.im, p.residual)?;
    }
    Ok(())
}

pub fn write_series_csv<W: Write>(mut w: W, series: &PerturbationSeries) -> Result<()> {
    writeln!(w, "order,re,im")?;
    for (i, e) in series.orders.iter().enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e}", e.re, e.im)?;
    }
    Ok(())
}

/// Greedy pairing of two multisets; returns the largest pairing distance.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}
