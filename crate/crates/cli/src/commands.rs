//! The five subcommands. Each builds a [`Report`] from a validated config.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use cfe_core::coherent::{
    aliasing_tail, cross_sector_quadrature, exponent_g, kernel_gram, overlap, phase_integral,
    projected_overlap_from_exponent, CoherentField,
};
use cfe_core::fock::{build_hamiltonian, mean_field_comparison, FockBasis, InteractionForm};
use cfe_core::hermite::HermiteBasis;
use cfe_core::operator::{
    assemble_full, assemble_weak, parity_label, scaled_operator, ModelParams, OperatorMatrix,
};
use cfe_core::spectral::{
    decompose, eigen_spectrum, ground_state, multiset_distance, perturbation_series, spectral_order,
};
use cfe_core::{Complex64, ModeLattice, SpatialGrid};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, VariantChoice};
use crate::report::{Cell, Check, Report, Table};
use crate::CliError;

/// Rounding allowance for sums of `mq` terms of size up to `e^|G|`.
fn rounding_scale(g: Complex64) -> f64 {
    64.0 * f64::EPSILON * g.norm().exp()
}

/// `max(0, -λ_min / λ_max)` of a Hermitian Gram matrix.
fn negativity(k: &Mat<Complex64>) -> Result<f64, CliError> {
    let evd = k
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| CliError::Solver(format!("Gram eigen-solve failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let bottom = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((-bottom / top.max(f64::MIN_POSITIVE)).max(0.0))
}

/// Random phase fields (the first one constant) on the configured grid.
fn coherent_fields(cfg: &RunConfig) -> Result<Vec<CoherentField>, CliError> {
    let o = &cfg.overlaps;
    let grid = SpatialGrid::new(cfg.lattice.d, cfg.lattice.box_len, o.grid_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut fields = vec![CoherentField::constant(grid, cfg.params.r, 0.0)?];
    while fields.len() < o.n_fields {
        let phi = (0..grid.n_points()).map(|_| rng.gen_range(-PI..PI)).collect();
        fields.push(CoherentField::from_samples(grid, cfg.params.r, phi)?);
    }
    Ok(fields)
}

pub fn overlaps(cfg: &RunConfig) -> Result<Report, CliError> {
    let tol = cfg.solver.tolerance;
    let (mq, max_n) = (cfg.overlaps.mq, cfg.overlaps.max_n);
    let fields = coherent_fields(cfg)?;
    let nf = fields.len();
    let mut rep = Report::new("overlaps");

    let mut pairs = Table::new("pairs", &["i", "j", "g_re", "g_im", "overlap_re", "overlap_im"]);
    let mut proj = Table::new(
        "projection",
        &["i", "j", "n", "closed_re", "closed_im", "quadrature_re", "quadrature_im", "abs_error", "alias_tail_abs"],
    );
    let mut herm: f64 = 0.0;
    let mut self_overlap: f64 = 0.0;
    let mut sector0: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut bound_excess = f64::NEG_INFINITY;
    let mut leakage: f64 = 0.0;
    let norm_sq = cfg.params.r * cfg.params.r * fields[0].grid().volume();

    for i in 0..nf {
        for j in 0..nf {
            let ab = overlap(&fields[i], &fields[j])?;
            let ba = overlap(&fields[j], &fields[i])?;
            herm = herm.max((ab.value - ba.value.conj()).norm() / ab.value.norm());
            pairs.push(vec![
                Cell::I(i as i64),
                Cell::I(j as i64),
                Cell::F(ab.g.re),
                Cell::F(ab.g.im),
                Cell::F(ab.value.re),
                Cell::F(ab.value.im),
            ]);
            if i == j {
                self_overlap = self_overlap.max((ab.g - norm_sq).norm() / norm_sq);
            }
            if j < i {
                continue;
            }
            let g = exponent_g(&fields[i], &fields[j])?;
            let scale = rounding_scale(g);
            for n in 0..=max_n {
                let closed = projected_overlap_from_exponent(g, n);
                let quad = phase_integral(g, n, mq)?;
                let tail = aliasing_tail(g, n, mq);
                let err = (quad - closed).norm();
                if n == 0 {
                    sector0 = sector0.max((closed - 1.0).norm());
                }
                identity = identity.max((quad - closed - tail).norm() / g.norm().exp());
                bound_excess = bound_excess.max(err - tail.norm() - scale);
                for n_prime in 0..=max_n {
                    if (n as i64 - n_prime as i64).rem_euclid(mq as i64) != 0 {
                        let c = cross_sector_quadrature(g, n, n_prime, mq)?;
                        let base = projected_overlap_from_exponent(g, n_prime).norm();
                        leakage = leakage.max(c.norm() / base.max(1.0));
                    }
                }
                proj.push(vec![
                    Cell::I(i as i64),
                    Cell::I(j as i64),
                    Cell::I(n as i64),
                    Cell::F(closed.re),
                    Cell::F(closed.im),
                    Cell::F(quad.re),
                    Cell::F(quad.im),
                    Cell::F(err),
                    Cell::F(tail.norm()),
                ]);
            }
        }
    }
    let mut psd: f64 = negativity(&kernel_gram(&fields, None)?)?;
    for n in 0..=max_n {
        psd = psd.max(negativity(&kernel_gram(&fields, Some(n))?)?);
    }

    rep.checks.push(Check::at_most("hermitian_symmetry", herm, tol));
    rep.checks.push(Check::at_most("self_exponent_is_norm", self_overlap, tol));
    rep.checks.push(Check::at_most("zero_sector_is_one", sector0, tol));
    rep.checks.push(Check::at_most("quadrature_alias_identity", identity, tol));
    rep.checks.push(Check::at_most("quadrature_error_within_alias_bound", bound_excess, 0.0));
    rep.checks.push(Check::at_most("cross_sector_leakage", leakage, tol));
    rep.checks.push(Check::at_most("gram_negativity", psd, tol));
    rep.tables.push(pairs);
    rep.tables.push(proj);
    Ok(rep)
}

fn build_operator(
    params: &ModelParams,
    lattice: &ModeLattice,
    basis: &HermiteBasis,
    variant: VariantChoice,
) -> Result<OperatorMatrix, CliError> {
    Ok(match variant {
        VariantChoice::Weak => assemble_weak(params, lattice, basis)?,
        VariantChoice::Full => assemble_full(params, lattice, basis)?,
        VariantChoice::Scaled => scaled_operator(params, basis)?,
    })
}

pub fn spectrum(cfg: &RunConfig, variant: VariantChoice) -> Result<Report, CliError> {
    let lattice = cfg.lattice()?;
    let basis = cfg.hermite_basis(&lattice)?;
    let params = cfg.model_params(&lattice);
    let op = build_operator(&params, &lattice, &basis, variant)?;
    let mut rep = Report::new("spectrum");
    rep.notes.extend(op.warnings.iter().cloned());
    rep.notes.push(format!("variant {variant:?}, basis dimension {}", op.dim()));

    let pairs = eigen_spectrum(&op, cfg.solver.eigen_count)?;
    let mut t = Table::new("eigenvalues", &["index", "re", "im", "residual"]);
    for (i, p) in pairs.iter().enumerate() {
        t.push(vec![Cell::I(i as i64), Cell::F(p.eigenvalue.re), Cell::F(p.eigenvalue.im), Cell::F(p.residual)]);
    }
    rep.tables.push(t);
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    rep.checks.push(Check::at_most("max_residual", worst, cfe_core::spectral::RESIDUAL_TOL));

    let ground = ground_state(&op)?;
    let mut t = Table::new(
        "ground_vector",
        &["index", "degrees", "parity", "right_re", "right_im", "left_re", "left_im"],
    );
    for i in 0..op.dim() {
        let r = ground.right_vector[i];
        let l = ground.left_vector.as_ref().map_or(Complex64::new(f64::NAN, f64::NAN), |v| v[i]);
        let deg = basis.degrees(i).iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        t.push(vec![
            Cell::I(i as i64),
            Cell::S(deg),
            Cell::S(format!("{:?}", parity_label(&basis, i))),
            Cell::F(r.re),
            Cell::F(r.im),
            Cell::F(l.re),
            Cell::F(l.im),
        ]);
    }
    rep.tables.push(t);

    if variant == VariantChoice::Weak {
        // the weak operator is a sum of independent Ornstein-Uhlenbeck ladders
        let k2 = basis.coords().coord_k2s().to_vec();
        let mut ladder: Vec<Complex64> = (0..basis.dim())
            .map(|i| {
                let s: f64 = basis.degrees(i).iter().zip(&k2).map(|(&n, k)| n as f64 * k).sum();
                Complex64::new(-s - params.ebar_n(), 0.0)
            })
            .collect();
        ladder.sort_by(spectral_order);
        let found: Vec<Complex64> = pairs.iter().map(|p| p.eigenvalue).collect();
        let d = multiset_distance(&found, &ladder[..found.len()]);
        rep.checks.push(Check::at_most("ornstein_uhlenbeck_ladder", d, cfg.solver.tolerance));
    }

    if cfg.output.write_matrix {
        let dir = &cfg.output.dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("spectrum_operator.txt");
        let f = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        op.write_triplets(BufWriter::new(f))?;
        rep.notes.push(format!("operator written to {}", path.display()));
    }
    Ok(rep)
}

pub fn compare(cfg: &RunConfig) -> Result<Report, CliError> {
    let lattice = cfg.lattice()?;
    let n = cfg.params.n_particles;
    let h2m = cfg.params.hbar2_over_2m;
    let rows = mean_field_comparison(&lattice, n, &cfg.compare.couplings, h2m)?;
    let mut rep = Report::new("compare");
    let mut t = Table::new(
        "comparison",
        &[
            "coupling",
            "oracle_e_per_n",
            "prediction",
            "relative_deviation",
            "functional_e_per_n",
            "textbook_e_per_n",
            "textbook_prediction",
        ],
    );
    let mut functional: f64 = 0.0;
    for r in &rows {
        functional = functional.max((r.functional_e_per_n - r.prediction).abs() / r.prediction.abs());
        t.push(vec![
            Cell::F(r.coupling),
            Cell::F(r.oracle_e_per_n),
            Cell::F(r.prediction),
            Cell::F(r.relative_deviation),
            Cell::F(r.functional_e_per_n),
            Cell::F(r.textbook_e_per_n),
            Cell::F(r.textbook_prediction),
        ]);
    }
    rep.tables.push(t);
    rep.checks.push(Check::at_most("functional_matches_mean_field", functional, cfg.solver.tolerance));

    let basis = FockBasis::for_lattice(&lattice, n)?;
    let u = vec![cfg.compare.couplings[0]; lattice.len()];
    let mut defect: f64 = 0.0;
    for form in [InteractionForm::DensityDensity, InteractionForm::NormalOrdered] {
        let h = build_hamiltonian(&lattice, &u, 0.0, 0.0, h2m, &basis, form)?;
        defect = defect.max(h.hermiticity_defect());
    }
    rep.checks.push(Check::at_most("hamiltonian_hermiticity", defect, cfg.solver.tolerance));
    rep.notes.push(format!("Fock sector with {} states", basis.len()));
    Ok(rep)
}

/// Least-squares slope of `ln y` against `ln x`; NaN if any `y` is zero.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || y.iter().any(|&v| !(v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub fn perturb(cfg: &RunConfig) -> Result<Report, CliError> {
    let lattice = cfg.lattice()?;
    let basis = cfg.hermite_basis(&lattice)?;
    let params = cfg.model_params(&lattice);
    let order = cfg.perturb.max_order;
    let op0 = assemble_full(&params.clone().with_epsilon(0.0), &lattice, &basis)?;
    let op1 = assemble_full(&params.clone().with_epsilon(1.0), &lattice, &basis)?;
    let v = OperatorMatrix { matrix: op1.matrix.sub(&op0.matrix), offset: 0.0, ..op1 };
    let series = perturbation_series(&op0, &v, order)?;
    let mut rep = Report::new("perturb");

    let mut t = Table::new("series", &["order", "re", "im"]);
    for (j, e) in series.orders.iter().enumerate() {
        t.push(vec![Cell::I(j as i64), Cell::F(e.re), Cell::F(e.im)]);
    }
    rep.tables.push(t);

    let mut t = Table::new(
        "truncation",
        &["epsilon", "direct_re", "direct_im", "series_re", "series_im", "residual"],
    );
    let mut residuals = Vec::new();
    let mut rel: f64 = 0.0;
    for &eps in &cfg.perturb.epsilons {
        let direct = ground_state(&assemble_full(&params.clone().with_epsilon(eps), &lattice, &basis)?)?.eigenvalue;
        let approx = series.evaluate(eps, order);
        let res = (direct - approx).norm();
        rel = rel.max(res / direct.norm().max(1.0));
        residuals.push(res);
        t.push(vec![
            Cell::F(eps),
            Cell::F(direct.re),
            Cell::F(direct.im),
            Cell::F(approx.re),
            Cell::F(approx.im),
            Cell::F(res),
        ]);
    }
    rep.tables.push(t);

    let slope = log_slope(&cfg.perturb.epsilons, &residuals);
    let mut t = Table::new("fit", &["truncation_order", "log_log_slope", "expected_slope"]);
    t.push(vec![Cell::I(order as i64), Cell::F(slope), Cell::F((order + 1) as f64)]);
    rep.tables.push(t);
    if slope.is_nan() {
        rep.notes.push("log-log slope undefined: some truncation residuals are exactly zero".into());
    }

    let higher = series.orders.iter().skip(1).map(|e| e.norm()).fold(0.0, f64::max);
    rep.notes.push(format!("largest |e_j| for j >= 1: {higher:.3e}"));
    rep.checks.push(Check::at_most("series_matches_direct", rel, cfg.solver.tolerance.max(1e-8)));
    Ok(rep)
}

pub fn scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let lattice = cfg.lattice()?;
    let basis = cfg.hermite_basis(&lattice)?;
    let params = cfg.model_params(&lattice);
    let constant = params.has_constant_potential();
    let mut rep = Report::new("scan");
    let mut t = Table::new(
        "scan",
        &["epsilon", "ground_re", "ground_im", "mirror_ground_re", "mirror_ground_im", "conjugate_distance", "entrywise_conjugate"],
    );
    let mut worst: f64 = 0.0;
    let mut entrywise: f64 = 0.0;
    for &eps in &cfg.scan.epsilons {
        let plus = assemble_full(&params.clone().with_epsilon(eps), &lattice, &basis)?;
        let minus = assemble_full(&params.clone().with_epsilon(-eps), &lattice, &basis)?;
        let diff = plus.matrix.max_abs_diff(&minus.matrix.conj());
        let dp = decompose(&plus)?;
        let dm = decompose(&minus)?;
        let conj: Vec<Complex64> = dm.values.iter().map(|v| v.conj()).collect();
        let d = multiset_distance(&dp.values, &conj);
        worst = worst.max(d);
        entrywise = entrywise.max(diff);
        t.push(vec![
            Cell::F(eps),
            Cell::F(dp.values[0].re),
            Cell::F(dp.values[0].im),
            Cell::F(dm.values[0].re),
            Cell::F(dm.values[0].im),
            Cell::F(d),
            Cell::F(diff),
        ]);
    }
    rep.tables.push(t);
    if constant {
        rep.checks.push(Check::at_most("conjugate_spectra", worst, 1e-9));
        rep.checks.push(Check::at_most("entrywise_conjugate_matrix", entrywise, 0.0));
    } else {
        rep.notes.push("non-constant potential: the ε → -ε conjugation symmetry is not expected".into());
    }
    Ok(rep)
}
