//! Exact diagonalization of the momentum-space Bose gas in a fixed-N sector.
//!
//! ```text
//! H = Σ_k (ħ²k²/2m) a_k†a_k + (U_0 - μ) N + (1/V) Σ_k U_k ñ_k ñ_{-k},
//! ñ_k = Σ_q a_q† a_{q+k}
//! ```
//!
//! The interaction is the density-density form without normal ordering, so
//! single-particle self-interaction terms are kept. Terms whose momentum
//! leaves the lattice are dropped.

use std::collections::{BTreeMap, HashMap};

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::hermite::HermiteBasis;
use crate::lattice::ModeLattice;
use crate::operator::{assemble_weak, ModelParams};
use crate::sparse::SparseMatrix;
use crate::spectral::{energy_from_eigenvalue, ground_state};

pub const MAX_FOCK_DIM: usize = 2_000_000;
/// Dense Hermitian solve below this many states, Lanczos above.
pub const DENSE_FOCK_LIMIT: usize = 3000;

pub type Occupation = Vec<u32>;

#[derive(Debug, Clone)]
pub struct FockBasis {
    /// Lattice mode index carried by each occupation slot.
    modes: Vec<usize>,
    n_particles: u32,
    states: Vec<Occupation>,
    lookup: HashMap<Occupation, usize>,
}

/// `C(n, k)` or `None` on overflow.
fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k.min(n));
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All occupations of `m_modes` summing to `n_particles`, first slot
/// descending: `(N,0,…), (N-1,1,…), …`.
pub fn enumerate_basis(m_modes: usize, n_particles: u32) -> Result<FockBasis> {
    FockBasis::with_modes((0..m_modes).collect(), n_particles)
}

impl FockBasis {
    pub fn with_modes(modes: Vec<usize>, n_particles: u32) -> Result<Self> {
        let m = modes.len();
        if m == 0 {
            return config("Fock basis needs at least one mode");
        }
        let count = binomial(n_particles as u64 + m as u64 - 1, m as u64 - 1)
            .filter(|&c| c <= MAX_FOCK_DIM as u64)
            .ok_or(Error::Dimension { dim: usize::MAX, limit: MAX_FOCK_DIM })? as usize;
        let mut states = Vec::with_capacity(count);
        let mut current = vec![0u32; m];
        fill(&mut states, &mut current, 0, n_particles);
        debug_assert_eq!(states.len(), count);
        let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { modes, n_particles, states, lookup })
    }

    /// One slot per lattice mode, in lattice order.
    pub fn for_lattice(lattice: &ModeLattice, n_particles: u32) -> Result<Self> {
        Self::with_modes((0..lattice.len()).collect(), n_particles)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn n_particles(&self) -> u32 {
        self.n_particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Occupation {
        &self.states[i]
    }

    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        self.lookup.get(s).copied()
    }

    /// Total momentum label `Σ n_k · label(k)`.
    pub fn total_momentum(&self, lattice: &ModeLattice, i: usize) -> Vec<i64> {
        let mut p = vec![0i64; lattice.dim()];
        for (slot, &n) in self.states[i].iter().enumerate() {
            for (axis, l) in lattice.modes()[self.modes[slot]].label.iter().enumerate() {
                p[axis] += n as i64 * l;
            }
        }
        p
    }
}

fn fill(out: &mut Vec<Occupation>, current: &mut Occupation, slot: usize, left: u32) {
    if slot + 1 == current.len() {
        current[slot] = left;
        out.push(current.clone());
        return;
    }
    for n in (0..=left).rev() {
        current[slot] = n;
        fill(out, current, slot + 1, left - n);
    }
    current[slot] = 0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionForm {
    /// `(1/V) Σ_k U_k ñ_k ñ_{-k}`, self-interaction included.
    DensityDensity,
    /// `(1/2V) Σ_k U_k :ñ_k ñ_{-k}:`, the textbook contact form.
    NormalOrdered,
}

#[derive(Debug, Clone)]
pub struct FockHamiltonian {
    pub matrix: SparseMatrix,
    pub u_int_k: Vec<f64>,
    pub u0_ext: f64,
    pub mu: f64,
    pub hbar2_over_2m: f64,
    pub form: InteractionForm,
}

type SparseState = BTreeMap<usize, f64>;

/// `a_to† a_from` on a basis state, in slot indices.
fn hop(state: &[u32], to: usize, from: usize) -> Option<(Occupation, f64)> {
    if state[from] == 0 {
        return None;
    }
    let mut s = state.to_vec();
    let mut amp = (s[from] as f64).sqrt();
    s[from] -= 1;
    amp *= (s[to] as f64 + 1.0).sqrt();
    s[to] += 1;
    Some((s, amp))
}

struct Slots<'a> {
    lattice: &'a ModeLattice,
    basis: &'a FockBasis,
    slot_of_mode: Vec<Option<usize>>,
}

impl Slots<'_> {
    /// Slot of `k_mode + shift_mode`, if retained.
    fn shifted(&self, slot: usize, shift_mode: usize) -> Option<usize> {
        let mode = self.basis.modes[slot];
        self.lattice.sum(mode, shift_mode).and_then(|m| self.slot_of_mode[m])
    }

    /// `ñ_k` applied to a sparse state.
    fn density(&self, k_mode: usize, v: &SparseState) -> SparseState {
        let mut out = SparseState::new();
        for (&i, &c) in v {
            let s = self.basis.state(i);
            for q in 0..s.len() {
                let Some(from) = self.shifted(q, k_mode) else { continue };
                if let Some((t, amp)) = hop(s, q, from) {
                    let j = self.basis.index_of(&t).expect("number-conserving hop");
                    *out.entry(j).or_default() += c * amp;
                }
            }
        }
        out
    }

    /// `:ñ_k ñ_{-k}: = Σ_{q,q'} a_q† a_{q'}† a_{q'-k} a_{q+k}` on a basis state.
    fn normal_pair(&self, k_mode: usize, i: usize) -> SparseState {
        let neg = self.lattice.negate(k_mode);
        let s = self.basis.state(i);
        let mut out = SparseState::new();
        let m = s.len();
        for q in 0..m {
            let Some(qk) = self.shifted(q, k_mode) else { continue };
            for qp in 0..m {
                let Some(qpk) = self.shifted(qp, neg) else { continue };
                let mut t = s.clone();
                let mut amp = 1.0;
                for (slot, create) in [(qk, false), (qpk, false), (qp, true), (q, true)] {
                    if create {
                        amp *= (t[slot] as f64 + 1.0).sqrt();
                        t[slot] += 1;
                    } else {
                        if t[slot] == 0 {
                            amp = 0.0;
                            break;
                        }
                        amp *= (t[slot] as f64).sqrt();
                        t[slot] -= 1;
                    }
                }
                if amp != 0.0 {
                    let j = self.basis.index_of(&t).expect("number-conserving term");
                    *out.entry(j).or_default() += amp;
                }
            }
        }
        out
    }
}

/// Second-quantized Hamiltonian over `basis`. `u_int_k` is indexed like the
/// lattice modes and must be even in `k`.
pub fn build_hamiltonian(
    lattice: &ModeLattice,
    u_int_k: &[f64],
    u0_ext: f64,
    mu: f64,
    hbar2_over_2m: f64,
    basis: &FockBasis,
    form: InteractionForm,
) -> Result<FockHamiltonian> {
    if u_int_k.len() != lattice.len() {
        return config(format!("{} interaction components for {} modes", u_int_k.len(), lattice.len()));
    }
    for (i, u) in u_int_k.iter().enumerate() {
        if !u.is_finite() || *u != u_int_k[lattice.negate(i)] {
            return config(format!("interaction must be finite and even in k (mode {i})"));
        }
    }
    let mut slot_of_mode = vec![None; lattice.len()];
    for (slot, &mode) in basis.modes.iter().enumerate() {
        if mode >= lattice.len() || slot_of_mode[mode].is_some() {
            return config(format!("basis slot {slot} refers to invalid or repeated mode {mode}"));
        }
        slot_of_mode[mode] = Some(slot);
    }
    let slots = Slots { lattice, basis, slot_of_mode };
    let inv_v = 1.0 / lattice.volume();
    let n = basis.n_particles as f64;

    let columns: Vec<Vec<(usize, f64)>> = (0..basis.len())
        .into_par_iter()
        .map(|col| {
            let s = basis.state(col);
            let mut out = SparseState::new();
            let mut diag = (u0_ext - mu) * n;
            for (slot, &occ) in s.iter().enumerate() {
                diag += occ as f64 * hbar2_over_2m * lattice.modes()[basis.modes[slot]].k_squared();
            }
            *out.entry(col).or_default() += diag;
            for k in 0..lattice.len() {
                let u = u_int_k[k];
                if u == 0.0 {
                    continue;
                }
                let term = match form {
                    InteractionForm::DensityDensity => {
                        let start = SparseState::from([(col, 1.0)]);
                        let half = slots.density(lattice.negate(k), &start);
                        slots.density(k, &half)
                    }
                    InteractionForm::NormalOrdered => slots.normal_pair(k, col),
                };
                let pref = match form {
                    InteractionForm::DensityDensity => u * inv_v,
                    InteractionForm::NormalOrdered => 0.5 * u * inv_v,
                };
                for (row, v) in term {
                    *out.entry(row).or_default() += pref * v;
                }
            }
            out.into_iter().filter(|(_, v)| *v != 0.0).collect()
        })
        .collect();
    let triplets = columns
        .into_iter()
        .enumerate()
        .flat_map(|(c, e)| e.into_iter().map(move |(r, v)| (r, c, Complex64::new(v, 0.0))))
        .collect();
    Ok(FockHamiltonian {
        matrix: SparseMatrix::from_triplets(basis.len(), basis.len(), triplets),
        u_int_k: u_int_k.to_vec(),
        u0_ext,
        mu,
        hbar2_over_2m,
        form,
    })
}

impl FockHamiltonian {
    /// `max |H - H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }
}

/// Smallest eigenvalue, checked by residual against `1e-10·max|H|`.
pub fn ground_energy(h: &FockHamiltonian) -> Result<f64> {
    let dim = h.matrix.nrows();
    let (e, v) = if dim < DENSE_FOCK_LIMIT {
        let evd = h.matrix.to_dense().self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver {
            message: format!("Hermitian eigensolver failed: {e:?}"),
            residual: f64::NAN,
        })?;
        let e = evd.S().column_vector()[0].re;
        let v: Vec<Complex64> = (0..dim).map(|i| evd.U()[(i, 0)]).collect();
        (e, v)
    } else {
        lanczos_lowest(&h.matrix, 1e-11 * h.matrix.max_abs().max(1.0))?
    };
    let hv = h.matrix.matvec(&v);
    let res = hv.iter().zip(&v).map(|(a, x)| (a - x * e).norm_sqr()).sum::<f64>().sqrt()
        / v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let scale = h.matrix.max_abs().max(f64::MIN_POSITIVE);
    if res > 1e-10 * scale.max(1.0) {
        return Err(Error::Solver { message: "Fock ground state rejected".into(), residual: res });
    }
    Ok(e)
}

/// Lanczos with full reorthogonalization for the lowest eigenpair; stops once
/// the Ritz residual estimate drops below the absolute bound `tol`.
fn lanczos_lowest(h: &SparseMatrix, tol: f64) -> Result<(f64, Vec<Complex64>)> {
    let n = h.nrows();
    let max_iter = n.min(400);
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    // deterministic pseudo-random start vector so that no symmetry sector is missed
    let mut seed: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut q: Vec<Complex64> = (0..n)
        .map(|_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            Complex64::new(0.5 + (seed >> 11) as f64 / (1u64 << 53) as f64, 0.0)
        })
        .collect();
    let nrm = q.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= nrm);
    let mut basis: Vec<Vec<Complex64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last_res = f64::INFINITY;
    for it in 0..max_iter {
        let mut w = h.matvec(&basis[it]);
        let a: Complex64 = basis[it].iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
        alpha.push(a.re);
        // two Gram-Schmidt passes keep the Krylov basis orthogonal to roundoff
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(b).for_each(|(y, x)| *y -= x * proj);
            }
        }
        let bnorm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        // Ritz pair of the current tridiagonal matrix
        let m = alpha.len();
        let t = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver {
            message: format!("tridiagonal solve failed: {e:?}"),
            residual: f64::NAN,
        })?;
        let theta = evd.S().column_vector()[0];
        let s_last = evd.U()[(m - 1, 0)];
        last_res = (bnorm * s_last).abs();
        if last_res < tol || bnorm < 1e-14 * scale || m == n {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (j, b) in basis.iter().enumerate() {
                let c = evd.U()[(j, 0)];
                v.iter_mut().zip(b).for_each(|(y, x)| *y += x * c);
            }
            return Ok((theta, v));
        }
        beta.push(bnorm);
        basis.push(w.into_iter().map(|x| x / bnorm).collect());
    }
    Err(Error::Solver { message: "Lanczos did not converge".into(), residual: last_res })
}

/// One row of the mean-field comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub coupling: f64,
    /// Oracle `E/N` with the density-density interaction.
    pub oracle_e_per_n: f64,
    /// `U_0 ρ`.
    pub prediction: f64,
    pub relative_deviation: f64,
    /// `E/N` from the weak functional operator via `E = -(ħ²/2m) λ_ground`.
    pub functional_e_per_n: f64,
    /// Oracle `E/N` with the normal-ordered interaction.
    pub textbook_e_per_n: f64,
    /// `U_0 (N-1) / 2V`, the textbook mean-field value.
    pub textbook_prediction: f64,
}

/// Contact interaction `U_k = U_0` on every retained mode, `U = μ = 0`.
pub fn mean_field_comparison(
    lattice: &ModeLattice,
    n_particles: u32,
    couplings: &[f64],
    hbar2_over_2m: f64,
) -> Result<Vec<ComparisonRow>> {
    if n_particles == 0 {
        return config("mean-field comparison needs N > 0");
    }
    let basis = FockBasis::for_lattice(lattice, n_particles)?;
    let n = n_particles as f64;
    let v = lattice.volume();
    couplings
        .iter()
        .map(|&u| {
            let u_k = vec![u; lattice.len()];
            let density = build_hamiltonian(lattice, &u_k, 0.0, 0.0, hbar2_over_2m, &basis, InteractionForm::DensityDensity)?;
            let textbook = build_hamiltonian(lattice, &u_k, 0.0, 0.0, hbar2_over_2m, &basis, InteractionForm::NormalOrdered)?;
            let oracle = ground_energy(&density)? / n;
            let prediction = u * n / v;
            let gamma = u / (hbar2_over_2m * v);
            let params = ModelParams::new(lattice, gamma, n_particles as u64);
            let hb = HermiteBasis::new(lattice, gamma, 0)?;
            let weak = assemble_weak(&params, lattice, &hb)?;
            let lambda = ground_state(&weak)?.eigenvalue;
            Ok(ComparisonRow {
                coupling: u,
                oracle_e_per_n: oracle,
                prediction,
                relative_deviation: (oracle - prediction) / prediction,
                functional_e_per_n: energy_from_eigenvalue(lambda, hbar2_over_2m).re / n,
                textbook_e_per_n: ground_energy(&textbook)? / n,
                textbook_prediction: u * (n - 1.0) / (2.0 * v),
            })
        })
        .collect()
}

pub fn write_comparison_csv<W: std::io::Write>(mut w: W, rows: &[ComparisonRow]) -> Result<()> {
    writeln!(
        w,
        "coupling,oracle_e_per_n,prediction,relative_deviation,functional_e_per_n,textbook_e_per_n,textbook_prediction"
    )?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.coupling,
            r.oracle_e_per_n,
            r.prediction,
            r.relative_deviation,
            r.functional_e_per_n,
            r.textbook_e_per_n,
            r.textbook_prediction
        )?;
    }
    Ok(())
}
