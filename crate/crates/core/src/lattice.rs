//! Periodic box geometry: the retained momentum lattice and the real-space
//! sampling grid used for coherent amplitude fields.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{config, Result};

/// A retained momentum `k = (2π/L)·n` with integer label `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub label: Vec<i64>,
    pub k: Vec<f64>,
}

impl Mode {
    pub fn k_squared(&self) -> f64 {
        self.k.iter().map(|c| c * c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.label.iter().all(|&n| n == 0)
    }
}

/// Cubic momentum cutoff in a periodic box of side `box_len`.
///
/// Modes are stored in lexicographic order of their integer labels, so the
/// lattice is symmetric under `k -> -k` and the zero mode sits in the middle.
#[derive(Debug, Clone)]
pub struct ModeLattice {
    d: usize,
    box_len: f64,
    m_per_dim: usize,
    modes: Vec<Mode>,
    lookup: HashMap<Vec<i64>, usize>,
}

impl PartialEq for ModeLattice {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.box_len == other.box_len && self.m_per_dim == other.m_per_dim
    }
}

impl ModeLattice {
    pub fn new(d: usize, box_len: f64, m_per_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return config(format!("dimension must be 1, 2 or 3, got {d}"));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return config(format!("box length must be positive and finite, got {box_len}"));
        }
        if m_per_dim % 2 == 0 {
            return config(format!("m_per_dim must be odd, got {m_per_dim}"));
        }
        let half = (m_per_dim / 2) as i64;
        let unit = 2.0 * PI / box_len;
        let total = m_per_dim.pow(d as u32);
        let mut modes = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut label = vec![0i64; d];
            for axis in (0..d).rev() {
                label[axis] = (rem % m_per_dim) as i64 - half;
                rem /= m_per_dim;
            }
            let k = label.iter().map(|&n| unit * n as f64).collect();
            modes.push(Mode { label, k });
        }
        let lookup = modes.iter().enumerate().map(|(i, m)| (m.label.clone(), i)).collect();
        Ok(Self { d, box_len, m_per_dim, modes, lookup })
    }

    /// One-dimensional lattice with momenta `±1, …, ±pairs` in units of `2π/L`.
    pub fn one_dim(box_len: f64, pairs: usize) -> Result<Self> {
        Self::new(1, box_len, 2 * pairs + 1)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn m_per_dim(&self) -> usize {
        self.m_per_dim
    }

    pub fn volume(&self) -> f64 {
        self.box_len.powi(self.d as i32)
    }

    /// `2π/L`, the lattice spacing in momentum.
    pub fn k_unit(&self) -> f64 {
        2.0 * PI / self.box_len
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn find(&self, label: &[i64]) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    pub fn zero_mode(&self) -> usize {
        self.modes.len() / 2
    }

    /// Index of `-k`.
    pub fn negate(&self, i: usize) -> usize {
        self.modes.len() - 1 - i
    }

    /// Index of `k_a - k_b`, if retained.
    pub fn difference(&self, a: usize, b: usize) -> Option<usize> {
        let label: Vec<i64> =
            self.modes[a].label.iter().zip(&self.modes[b].label).map(|(x, y)| x - y).collect();
        self.find(&label)
    }

    /// Index of `k_a + k_b`, if retained.
    pub fn sum(&self, a: usize, b: usize) -> Option<usize> {
        let label: Vec<i64> =
            self.modes[a].label.iter().zip(&self.modes[b].label).map(|(x, y)| x + y).collect();
        self.find(&label)
    }

    /// Integer dot product of labels; `k_a·k_b = k_unit²·label_dot`.
    pub fn label_dot(&self, a: usize, b: usize) -> i64 {
        self.modes[a].label.iter().zip(&self.modes[b].label).map(|(x, y)| x * y).sum()
    }

    pub fn coordinate_map(&self) -> RealCoordinateMap {
        RealCoordinateMap::new(self)
    }

    pub fn spatial_grid(&self, points_per_dim: usize) -> Result<SpatialGrid> {
        SpatialGrid::new(self.d, self.box_len, points_per_dim)
    }
}

/// Which half of a `(k, -k)` pair a mode is: `φ_k = x + i·sign·y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSlot {
    pub pair: usize,
    pub sign: i64,
}

/// Maps each nonzero `(k, -k)` pair onto two real coordinates.
///
/// Pair `p` owns coordinates `2p` (real part) and `2p + 1` (imaginary part of
/// the representative with the lexicographically positive label).
#[derive(Debug, Clone)]
pub struct RealCoordinateMap {
    pairs: Vec<(usize, usize)>,
    slots: Vec<Option<PairSlot>>,
    coord_k2: Vec<f64>,
}

impl RealCoordinateMap {
    fn new(lattice: &ModeLattice) -> Self {
        let n = lattice.len();
        let zero = lattice.zero_mode();
        let mut pairs = Vec::new();
        let mut slots = vec![None; n];
        let mut coord_k2 = Vec::new();
        // modes above the zero index are the lexicographically positive ones
        for pos in zero + 1..n {
            let neg = lattice.negate(pos);
            let p = pairs.len();
            pairs.push((pos, neg));
            slots[pos] = Some(PairSlot { pair: p, sign: 1 });
            slots[neg] = Some(PairSlot { pair: p, sign: -1 });
            let k2 = lattice.modes()[pos].k_squared();
            coord_k2.push(k2);
            coord_k2.push(k2);
        }
        Self { pairs, slots, coord_k2 }
    }

    /// `(positive, negative)` mode indices per pair.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n_coords(&self) -> usize {
        2 * self.pairs.len()
    }

    /// `None` for the zero mode.
    pub fn slot(&self, mode: usize) -> Option<PairSlot> {
        self.slots[mode]
    }

    /// `|k|²` of the pair owning coordinate `c`.
    pub fn coord_k2(&self, c: usize) -> f64 {
        self.coord_k2[c]
    }

    pub fn coord_k2s(&self) -> &[f64] {
        &self.coord_k2
    }
}

/// Uniform periodic sampling grid with `points_per_dim` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub d: usize,
    pub box_len: f64,
    pub points_per_dim: usize,
}

impl SpatialGrid {
    pub fn new(d: usize, box_len: f64, points_per_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return config(format!("dimension must be 1, 2 or 3, got {d}"));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return config(format!("box length must be positive and finite, got {box_len}"));
        }
        if points_per_dim == 0 {
            return config("grid needs at least one point per dimension");
        }
        Ok(Self { d, box_len, points_per_dim })
    }

    pub fn n_points(&self) -> usize {
        self.points_per_dim.pow(self.d as u32)
    }

    pub fn volume(&self) -> f64 {
        self.box_len.powi(self.d as i32)
    }

    /// Measure `dx` carried by one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.n_points() as f64
    }

    /// Position of flat point `j` (row-major, last axis fastest).
    pub fn position(&self, j: usize) -> Vec<f64> {
        let h = self.box_len / self.points_per_dim as f64;
        let mut rem = j;
        let mut x = vec![0.0; self.d];
        for axis in (0..self.d).rev() {
            x[axis] = h * (rem % self.points_per_dim) as f64;
            rem /= self.points_per_dim;
        }
        x
    }
}
