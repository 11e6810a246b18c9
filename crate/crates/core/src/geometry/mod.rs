//! Polytope primitives shared by region enumeration, the verifier and the
//! optimizer: axis-aligned boxes, halfspace systems `Ax <= b`, Chebyshev
//! centers and vertex enumeration.

mod bits;
mod lp;
mod polytope;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::dot;

pub use bits::BitSet;
pub use lp::{chebyshev_center, linear_extent, ChebyshevBall};
pub use polytope::{vertex_enumeration, VertexSet};

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config(format!("invalid box: lo has {} entries, hi has {}", lo.len(), hi.len())));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::Config(format!("invalid box: lo[{j}] = {l} >= hi[{j}] = {h}")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^p`.
    pub fn cube(lo: f64, hi: f64, p: usize) -> Result<Self> {
        Self::new(vec![lo; p], vec![hi; p])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// The `2p` facets as halfspaces: `x_j <= hi_j` then `-x_j <= -lo_j` per axis.
    pub fn halfspaces(&self) -> Halfspaces {
        let p = self.dim();
        let mut hs = Halfspaces::new(p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            hs.push(e.clone(), self.hi[j]);
            e[j] = -1.0;
            hs.push(e, -self.lo[j]);
        }
        hs
    }

    /// Componentwise bounding box of a nonempty point set.
    pub fn bounding(points: &[Vec<f64>]) -> Option<Self> {
        let first = points.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for pt in &points[1..] {
            for j in 0..lo.len() {
                lo[j] = lo[j].min(pt[j]);
                hi[j] = hi[j].max(pt[j]);
            }
        }
        Some(Self { lo, hi })
    }
}

/// Halfspace system `{x : rows[i] . x <= rhs[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspaces {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl Halfspaces {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: &Halfspaces) {
        self.rows.extend(other.rows.iter().cloned());
        self.rhs.extend(other.rhs.iter().copied());
    }

    /// Signed distance-like slack `rhs[i] - rows[i] . x`, scaled by the row norm.
    pub fn normalized_slack(&self, i: usize, x: &[f64]) -> f64 {
        let n = dot(&self.rows[i], &self.rows[i]).sqrt();
        if n == 0.0 {
            return self.rhs[i];
        }
        (self.rhs[i] - dot(&self.rows[i], x)) / n
    }

    pub fn min_slack(&self, x: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.normalized_slack(i, x)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.len()).all(|i| self.normalized_slack(i, x) >= -tol)
    }
}

/// Scale-aware tolerances for the geometric routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Vertices closer than this are merged.
    pub vertex_dedup: f64,
    /// Chebyshev radii at or below this mark a region as degenerate.
    pub degenerate_radius: f64,
    /// Relative on-plane test: `|w . v + b| <= on_plane * (1 + |v|)`.
    pub on_plane: f64,
}

impl Tolerances {
    pub fn for_diameter(diam: f64) -> Self {
        Self { vertex_dedup: 1e-7 * diam, degenerate_radius: 1e-9 * diam, on_plane: 1e-7 }
    }
}
