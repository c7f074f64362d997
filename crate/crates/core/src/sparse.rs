//! Compressed-row complex matrices and the sparse triplet text format.
//!
//! Triplet files look like
//!
//! ```text
//! # cfe sparse triplet v1
//! dims 3 3
//! offset -4.5000000000000000e0 0.0000000000000000e0
//! nnz 2
//! 0 0 -1.0000000000000000e0 0.0000000000000000e0
//! 2 1 0.0000000000000000e0 2.5000000000000000e-1
//! ```
//!
//! with entries in row-major order and every float written with 17
//! significant digits so that a read-back is bit-exact.

use std::io::{BufRead, Write};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{config, Result};

pub const TRIPLET_HEADER: &str = "# cfe sparse triplet v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], cols: Vec::new(), vals: Vec::new() }
    }

    /// Builds from unordered triplets. Duplicates are summed in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        // stable: duplicates keep their input order
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &Mat<Complex64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Drops entries with `|v| < rel · max|v|` (and exact zeros).
    pub fn pruned(&self, rel: f64) -> Self {
        let cut = rel * self.max_abs();
        let kept = self.triplets().filter(|(_, _, v)| v.norm() >= cut && v.norm() > 0.0).collect();
        Self::from_triplets(self.nrows, self.ncols, kept)
    }

    pub fn conj(&self) -> Self {
        Self { vals: self.vals.iter().map(|v| v.conj()).collect(), ..self.clone() }
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    /// `self - other`, keeping structural zeros out.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(other.triplets().map(|(r, c, v)| (r, c, -v)));
        let m = Self::from_triplets(self.nrows, self.ncols, t);
        let kept = m.triplets().filter(|(_, _, v)| v.norm() > 0.0).collect();
        Self::from_triplets(self.nrows, self.ncols, kept)
    }

    /// Largest `|a_ij - b_ij|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).fold(Complex64::new(0.0, 0.0), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let mut m = Mat::<Complex64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn write_triplets<W: Write>(&self, mut w: W, offset: Complex64) -> Result<()> {
        writeln!(w, "{TRIPLET_HEADER}")?;
        writeln!(w, "dims {} {}", self.nrows, self.ncols)?;
        writeln!(w, "offset {:.16e} {:.16e}", offset.re, offset.im)?;
        writeln!(w, "nnz {}", self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:.16e} {:.16e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads a triplet file, returning the matrix and its scalar offset.
    pub fn read_triplets<R: BufRead>(r: R) -> Result<(Self, Complex64)> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => config(format!("triplet file ended before {what}")),
            }
        };
        let (_, head) = next("header")?;
        if head.trim() != TRIPLET_HEADER {
            return config(format!("line 1: expected '{TRIPLET_HEADER}', got '{head}'"));
        }
        let dims = keyed::<usize>(next("dims")?, "dims", 2)?;
        let off = keyed::<f64>(next("offset")?, "offset", 2)?;
        let nnz = keyed::<usize>(next("nnz")?, "nnz", 1)?[0];
        let mut t = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (line_no, line) = next("all entries")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return config(format!("line {line_no}: expected 'row col re im'"));
            }
            let bad = |_| crate::error::Error::Config(format!("line {line_no}: bad number"));
            let (r, c) = (f[0].parse::<usize>().map_err(|_| bad(()))?, f[1].parse::<usize>().map_err(|_| bad(()))?);
            let re = f[2].parse::<f64>().map_err(|_| bad(()))?;
            let im = f[3].parse::<f64>().map_err(|_| bad(()))?;
            if r >= dims[0] || c >= dims[1] {
                return config(format!("line {line_no}: entry ({r}, {c}) outside matrix"));
            }
            t.push((r, c, Complex64::new(re, im)));
        }
        Ok((Self::from_triplets(dims[0], dims[1], t), Complex64::new(off[0], off[1])))
    }
}

fn keyed<T: std::str::FromStr>((line_no, line): (usize, String), key: &str, n: usize) -> Result<Vec<T>> {
    let mut f = line.split_whitespace();
    if f.next() != Some(key) {
        return config(format!("line {line_no}: expected '{key}'"));
    }
    let vals: Vec<T> = f.filter_map(|s| s.parse().ok()).collect();
    if vals.len() != n {
        return config(format!("line {line_no}: '{key}' needs {n} values"));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(1, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(0.5, 1.0))]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), c(1.5, 1.0));
        assert_eq!(m.get(1, 1), c(0.0, 0.0));
        assert_eq!(m.matvec(&[c(1.0, 0.0), c(0.0, 1.0)]), vec![c(0.0, 2.0), c(1.5, 1.0)]);
    }

    #[test]
    fn pruning_drops_tiny_entries() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0)), (1, 1, c(1e-16, 0.0))]);
        assert_eq!(m.pruned(1e-15).nnz(), 1);
    }

    #[test]
    fn malformed_file_is_a_config_error() {
        let text = "# cfe sparse triplet v1\ndims 2 2\noffset 0 0\nnnz 1\n5 0 1 0\n";
        assert!(SparseMatrix::read_triplets(text.as_bytes()).is_err());
        assert!(SparseMatrix::read_triplets("nope\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn triplet_text_round_trip_is_bit_exact(
            entries in proptest::collection::vec((0usize..6, 0usize..5, -1e3f64..1e3, -1e3f64..1e3), 0..20),
            off in -10.0f64..10.0,
        ) {
            let t = entries.into_iter().map(|(r, c, re, im)| (r, c, Complex64::new(re, im))).collect();
            let m = SparseMatrix::from_triplets(6, 5, t);
            let mut buf = Vec::new();
            m.write_triplets(&mut buf, Complex64::new(off, 0.0)).unwrap();
            let (back, o) = SparseMatrix::read_triplets(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
            prop_assert_eq!(o, Complex64::new(off, 0.0));
        }
    }
}
