use std::f64::consts::PI;

use cfe_core::hermite::HermiteBasis;
use cfe_core::operator::{assemble_full, assemble_weak, ModelParams, OperatorMatrix, Variant};
use cfe_core::sparse::SparseMatrix;
use cfe_core::spectral::{
    calibrate_mu, decompose, ground_state, multiset_distance, perturbation_series,
};
use cfe_core::{Complex64, ModeLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn line(pairs: usize) -> ModeLattice {
    ModeLattice::one_dim(2.0 * PI, pairs).unwrap()
}

fn wrap(matrix: SparseMatrix) -> OperatorMatrix {
    let lat = line(1);
    OperatorMatrix {
        basis_dims: vec![matrix.nrows()],
        matrix,
        offset: 0.0,
        variant: Variant::Full,
        params: ModelParams::new(&lat, 1.0, 1),
        warnings: Vec::new(),
    }
}

/// Non-normal reference with an isolated top eigenvalue plus a dense perturbation.
fn generic_pair(n: usize, seed: u64) -> (OperatorMatrix, OperatorMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t0 = Vec::new();
    let mut t1 = Vec::new();
    for i in 0..n {
        let diag = if i == 0 { c(0.0, 0.0) } else { c(-1.0 - 0.7 * i as f64, rng.gen_range(-1.0..1.0)) };
        t0.push((i, i, diag));
        for j in 0..n {
            if i != j {
                t0.push((i, j, c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))));
            }
            t1.push((i, j, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        }
    }
    (wrap(SparseMatrix::from_triplets(n, n, t0)), wrap(SparseMatrix::from_triplets(n, n, t1)))
}

fn combined(op0: &OperatorMatrix, op1: &OperatorMatrix, eps: f64) -> OperatorMatrix {
    let t = op0
        .matrix
        .triplets()
        .chain(op1.matrix.triplets().map(|(r, col, v)| (r, col, v * eps)))
        .collect();
    wrap(SparseMatrix::from_triplets(op0.dim(), op0.dim(), t))
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[test]
fn series_truncation_error_has_the_next_order_slope() {
    let (op0, op1) = generic_pair(8, 11);
    let series = perturbation_series(&op0, &op1, 5).unwrap();
    let eps = [0.01, 0.015, 0.02, 0.03, 0.04];
    let direct: Vec<Complex64> =
        eps.iter().map(|&e| ground_state(&combined(&op0, &op1, e)).unwrap().eigenvalue).collect();
    for order in 1..=3 {
        let err: Vec<f64> =
            eps.iter().zip(&direct).map(|(&e, d)| (d - series.evaluate(e, order)).norm()).collect();
        let slope = log_slope(&eps, &err);
        assert!((slope - (order + 1) as f64).abs() < 0.3, "order {order}: slope {slope}");
    }
}

#[test]
fn low_orders_match_finite_differences() {
    let (op0, op1) = generic_pair(6, 5);
    let series = perturbation_series(&op0, &op1, 3).unwrap();
    let h = 1e-3;
    let e = |x: f64| ground_state(&combined(&op0, &op1, x)).unwrap().eigenvalue;
    let (ep, e0, em) = (e(h), e(0.0), e(-h));
    let d1 = (ep - em) / (2.0 * h);
    let d2 = (ep + em - e0 * 2.0) / (2.0 * h * h);
    assert!((series.orders[0] - e0).norm() < 1e-12);
    assert!((series.orders[1] - d1).norm() < 1e-5 * d1.norm().max(1.0));
    assert!((series.orders[2] - d2).norm() < 1e-4 * d2.norm().max(1.0));
}

// The operator is a total divergence, so the row of the all-zero multi-index
// vanishes identically: that unit row is a left eigenvector with eigenvalue
// -ē_N for every ε, potential and truncation.
#[test]
fn constant_functional_is_an_exact_left_eigenvector() {
    let lat = ModeLattice::new(2, 2.0 * PI, 3).unwrap();
    let basis = HermiteBasis::new(&lat, 0.6, 1).unwrap();
    let mut u = vec![c(0.0, 0.0); lat.len()];
    for (i, m) in lat.modes().iter().enumerate() {
        u[i] = c(0.1 * m.k_squared(), 0.05 * m.label[0] as f64);
    }
    let g: Vec<f64> = lat.modes().iter().map(|m| 0.6 + 0.1 * m.k_squared()).collect();
    let params = ModelParams::new(&lat, 0.6, 3).with_u_k(u).with_gamma_k(g).with_epsilon(0.9);
    let op = assemble_full(&params, &lat, &basis).unwrap();
    assert_eq!(op.matrix.row(0).count(), 0);
}

#[test]
fn ground_eigenvalue_is_epsilon_independent() {
    let lat = ModeLattice::new(2, 2.0 * PI, 3).unwrap();
    let basis = HermiteBasis::new(&lat, 0.5, 1).unwrap();
    let params = ModelParams::new(&lat, 0.5, 3);
    for eps in [0.05, 0.1, 0.2] {
        let op = assemble_full(&params.clone().with_epsilon(eps), &lat, &basis).unwrap();
        let g = ground_state(&op).unwrap();
        assert!((g.eigenvalue - c(-params.ebar_n(), 0.0)).norm() < 1e-10, "eps {eps}: {}", g.eigenvalue);
    }
    let op0 = assemble_full(&params, &lat, &basis).unwrap();
    let op1 = assemble_full(&params.clone().with_epsilon(1.0), &lat, &basis).unwrap();
    let v = OperatorMatrix { matrix: op1.matrix.sub(&op0.matrix), offset: 0.0, ..op1 };
    let series = perturbation_series(&op0, &v, 4).unwrap();
    for (j, e) in series.orders.iter().enumerate().skip(1) {
        assert!(e.norm() < 1e-12, "order {j}: {e}");
    }
}

#[test]
fn opposite_epsilon_gives_conjugate_spectrum() {
    let lat = line(2);
    let basis = HermiteBasis::new(&lat, 0.5, 3).unwrap();
    let params = ModelParams::new(&lat, 0.5, 2).with_u0(0.3);
    for eps in [0.1, 0.5, 1.0] {
        let plus = decompose(&assemble_full(&params.clone().with_epsilon(eps), &lat, &basis).unwrap()).unwrap();
        let minus = decompose(&assemble_full(&params.clone().with_epsilon(-eps), &lat, &basis).unwrap()).unwrap();
        let conj: Vec<Complex64> = minus.values.iter().map(|v| v.conj()).collect();
        let d = multiset_distance(&plus.values, &conj);
        assert!(d < 1e-9, "eps {eps}: distance {d:e}");
    }
}

#[test]
fn weak_spectrum_is_the_ou_ladder() {
    let lat = line(2);
    let basis = HermiteBasis::new(&lat, 0.5, 3).unwrap();
    let params = ModelParams::new(&lat, 0.5, 2).with_u0(0.3);
    let op = assemble_weak(&params, &lat, &basis).unwrap();
    let d = decompose(&op).unwrap();
    let k2 = basis.coords().coord_k2s().to_vec();
    let expect: Vec<Complex64> = (0..basis.dim())
        .map(|i| {
            let s: f64 = basis.degrees(i).iter().zip(&k2).map(|(&n, k)| n as f64 * k).sum();
            c(-s - params.ebar_n(), 0.0)
        })
        .collect();
    assert!(multiset_distance(&d.values, &expect) < 1e-12);
}

#[test]
fn raising_truncation_leaves_small_epsilon_ground_unchanged() {
    let lat = line(2);
    let params = ModelParams::new(&lat, 0.5, 2).with_epsilon(0.05);
    let e = |n_max| {
        let basis = HermiteBasis::new(&lat, 0.5, n_max).unwrap();
        ground_state(&assemble_full(&params, &lat, &basis).unwrap()).unwrap().eigenvalue
    };
    assert!((e(2) - e(4)).norm() < 1e-8);
}

#[test]
fn calibrated_chemical_potential_zeroes_the_ground_level() {
    let lat = line(1);
    let basis = HermiteBasis::new(&lat, 0.5, 4).unwrap();
    let params = ModelParams::new(&lat, 0.5, 3).with_epsilon(0.1);
    let weak = calibrate_mu(&params, &lat, &basis, Variant::Weak).unwrap();
    assert_eq!(weak, -1.5);
    let full = calibrate_mu(&params, &lat, &basis, Variant::Full).unwrap();
    assert!((full - weak).abs() < 1e-9);
    let op = assemble_full(&params.clone().with_u0(full), &lat, &basis).unwrap();
    assert!(ground_state(&op).unwrap().eigenvalue.norm() < 1e-9);
}
