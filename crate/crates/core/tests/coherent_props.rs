use std::f64::consts::PI;

use cfe_core::coherent::{
    aliasing_tail, exponent_g, kernel_gram, number_overlap_closed, number_overlap_quadrature, overlap,
    phase_integral, CoherentField,
};
use cfe_core::{Complex64, SpatialGrid};
use faer::Side;
use proptest::prelude::*;

fn field(len: f64, r: f64, phases: Vec<f64>) -> CoherentField {
    let grid = SpatialGrid::new(1, len, phases.len()).unwrap();
    CoherentField::from_samples(grid, r, phases).unwrap()
}

/// `Σ_{m ≡ n (mod mq), 0 ≤ m ≤ 400} G^m / m!` by direct term recursion.
fn residue_class_series(g: Complex64, n: u32, mq: usize) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..=400usize {
        if m > 0 {
            term *= g / m as f64;
        }
        if m % mq == n as usize % mq {
            total += term;
        }
    }
    total
}

fn phases(points: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-PI..PI, points)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlaps_are_hermitian(a in phases(8), b in phases(8), r in 0.2f64..1.2, len in 1.0f64..4.0, n in 0u32..8) {
        let (fa, fb) = (field(len, r, a), field(len, r, b));
        let ab = overlap(&fa, &fb).unwrap().value;
        let ba = overlap(&fb, &fa).unwrap().value;
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * ab.norm());
        let pab = number_overlap_closed(&fa, &fb, n).unwrap();
        let pba = number_overlap_closed(&fb, &fa, n).unwrap();
        prop_assert!((pab - pba.conj()).norm() <= 1e-12 * pab.norm().max(1e-300));
    }

    #[test]
    fn quadrature_is_the_residue_class_sum(a in phases(8), b in phases(8), r in 0.2f64..1.5, n in 0u32..10, mq in 2usize..16) {
        let (fa, fb) = (field(2.0 * PI, r, a), field(2.0 * PI, r, b));
        let g = exponent_g(&fa, &fb).unwrap();
        let quad = number_overlap_quadrature(&fa, &fb, n, mq).unwrap();
        let series = residue_class_series(g, n, mq);
        let scale = g.norm().exp();
        prop_assert!((quad - series).norm() <= 1e-12 * scale, "{quad} vs {series}");

        // the aliasing error is bounded by the modulus of the class tail
        let closed = number_overlap_closed(&fa, &fb, n).unwrap();
        let abs_g = Complex64::new(g.norm(), 0.0);
        let bound = residue_class_series(abs_g, n, mq).re - residue_class_series(abs_g, n, 10_000).re;
        prop_assert!((quad - closed - aliasing_tail(g, n, mq)).norm() <= 1e-12 * scale);
        prop_assert!((quad - closed).norm() <= bound + 1e-12 * scale);
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        states in proptest::collection::vec(phases(6), 2..6),
        r in 0.2f64..0.8,
        n in proptest::option::of(0u32..6),
    ) {
        let fields: Vec<_> = states.into_iter().map(|p| field(PI, r, p)).collect();
        let k = kernel_gram(&fields, n).unwrap();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                prop_assert!((k[(i, j)] - k[(j, i)].conj()).norm() <= 1e-12 * k[(i, j)].norm().max(1e-300));
            }
        }
        let evd = k.self_adjoint_eigen(Side::Lower).unwrap();
        let s = evd.S().column_vector();
        let top = (0..s.nrows()).map(|i| s[i].re).fold(0.0, f64::max);
        let bottom = (0..s.nrows()).map(|i| s[i].re).fold(f64::INFINITY, f64::min);
        prop_assert!(bottom >= -1e-10 * top.max(1.0), "min eigenvalue {bottom} (max {top})");
    }
}

#[test]
fn wide_quadrature_reproduces_projection() {
    let g = Complex64::new(1.3, -0.4);
    for n in [0, 1, 5] {
        let exact = residue_class_series(g, n, 100_000);
        let quad = phase_integral(g, n, 64).unwrap();
        assert!((quad - exact).norm() < 1e-14 * g.norm().exp());
    }
}
