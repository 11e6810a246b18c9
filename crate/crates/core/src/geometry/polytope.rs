//! Vertex enumeration by incremental halfspace cutting (double description).
//!
//! A bounded polytope is represented by its vertices, each tagged with the set
//! of constraints active at it. Cutting with a new halfspace keeps the
//! vertices that satisfy it and creates one new vertex on every edge that
//! crosses it. Two vertices span an edge iff their common active set has at
//! least `p - 1` constraints and no third vertex is active on all of them.

use super::bits::BitSet;
use super::lp::linear_extent;
use super::{AxisBox, Halfspaces, Tolerances};
use crate::error::{Error, Result};
use crate::network::dot;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Vertices of a bounded polytope with their active constraint sets.
#[derive(Debug, Clone)]
pub struct VertexSet {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    points: Vec<Vec<f64>>,
    active: Vec<BitSet>,
    zero_tol: f64,
    dedup_tol: f64,
}

impl VertexSet {
    /// The `2^p` corners of a box. Constraint ids follow [`AxisBox::halfspaces`].
    pub fn from_box(bx: &AxisBox, tol: &Tolerances) -> Self {
        let p = bx.dim();
        let hs = bx.halfspaces();
        let mut points = Vec::with_capacity(1 << p);
        let mut active = Vec::with_capacity(1 << p);
        for mask in 0usize..(1 << p) {
            let mut pt = vec![0.0; p];
            let mut act = BitSet::with_capacity(2 * p);
            for j in 0..p {
                if mask & (1 << j) != 0 {
                    pt[j] = bx.hi[j];
                    act.insert(2 * j);
                } else {
                    pt[j] = bx.lo[j];
                    act.insert(2 * j + 1);
                }
            }
            points.push(pt);
            active.push(act);
        }
        Self {
            dim: p,
            normals: hs.rows,
            offsets: hs.rhs,
            points,
            active,
            zero_tol: tol.degenerate_radius.max(1e-12),
            dedup_tol: tol.vertex_dedup,
        }
    }

    /// Wraps known vertices of `{x : hs}`; active sets are recomputed geometrically.
    pub fn from_vertices(hs: &Halfspaces, points: Vec<Vec<f64>>, tol: &Tolerances) -> Self {
        let mut set = Self {
            dim: hs.dim,
            normals: Vec::new(),
            offsets: Vec::new(),
            active: vec![BitSet::with_capacity(hs.len()); points.len()],
            points,
            zero_tol: tol.degenerate_radius.max(1e-12),
            dedup_tol: tol.vertex_dedup,
        };
        for (row, &rhs) in hs.rows.iter().zip(&hs.rhs) {
            let (n, o) = set.normalize(row, rhs);
            let id = set.normals.len();
            for (pt, act) in set.points.iter().zip(set.active.iter_mut()) {
                if (dot(&n, pt) - o).abs() <= set.zero_tol {
                    act.insert(id);
                }
            }
            set.normals.push(n);
            set.offsets.push(o);
        }
        set
    }

    fn normalize(&self, row: &[f64], rhs: f64) -> (Vec<f64>, f64) {
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            (row.to_vec(), rhs)
        } else {
            (row.iter().map(|a| a / norm).collect(), rhs / norm)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ids of constraints active at vertex `v`.
    pub fn active_constraints(&self, v: usize) -> Vec<usize> {
        self.active[v].iter().collect()
    }

    pub fn constraint_count(&self) -> usize {
        self.normals.len()
    }

    /// Intersects with `row . x <= rhs`; returns the id of the new constraint.
    pub fn cut(&mut self, row: &[f64], rhs: f64) -> usize {
        let (n, o) = self.normalize(row, rhs);
        let id = self.normals.len();
        self.normals.push(n.clone());
        self.offsets.push(o);
        if self.points.is_empty() {
            return id;
        }
        if n.iter().all(|&a| a == 0.0) {
            if o < 0.0 {
                self.points.clear();
                self.active.clear();
            }
            return id;
        }

        let slack: Vec<f64> = self.points.iter().map(|pt| dot(&n, pt) - o).collect();
        let pos: Vec<usize> = (0..slack.len()).filter(|&i| slack[i] > self.zero_tol).collect();
        if pos.is_empty() {
            for (act, s) in self.active.iter_mut().zip(&slack) {
                if s.abs() <= self.zero_tol {
                    act.insert(id);
                }
            }
            return id;
        }
        let neg: Vec<usize> = (0..slack.len()).filter(|&i| slack[i] < -self.zero_tol).collect();

        let mut new_points = Vec::new();
        let mut new_active = Vec::new();
        let need = self.dim.saturating_sub(1);
        for &u in &pos {
            for &w in &neg {
                let common = self.active[u].intersection(&self.active[w]);
                if common.count() < need {
                    continue;
                }
                let adjacent = (0..self.points.len()).all(|z| z == u || z == w || !common.is_subset(&self.active[z]));
                if !adjacent {
                    continue;
                }
                let t = slack[u] / (slack[u] - slack[w]);
                let pt: Vec<f64> = self.points[u].iter().zip(&self.points[w]).map(|(a, b)| a + t * (b - a)).collect();
                let mut act = common;
                act.insert(id);
                new_points.push(pt);
                new_active.push(act);
            }
        }

        let mut points = Vec::with_capacity(self.points.len());
        let mut active = Vec::with_capacity(self.points.len());
        for (i, s) in slack.iter().enumerate() {
            if *s <= self.zero_tol {
                let mut act = std::mem::take(&mut self.active[i]);
                if s.abs() <= self.zero_tol {
                    act.insert(id);
                }
                points.push(std::mem::take(&mut self.points[i]));
                active.push(act);
            }
        }
        let dedup2 = self.dedup_tol * self.dedup_tol;
        for (pt, act) in new_points.into_iter().zip(new_active) {
            match points.iter().position(|q| dist2(q, &pt) <= dedup2) {
                Some(k) => active[k].union_with(&act),
                None => {
                    points.push(pt);
                    active.push(act);
                }
            }
        }
        self.points = points;
        self.active = active;
        id
    }
}

/// All vertices of the bounded polytope `{x : hs}` given a strictly interior
/// point. A bounding box is found by linear programming and then cut down
/// by every constraint; vertices are deduplicated at `tol.vertex_dedup`.
pub fn vertex_enumeration(hs: &Halfspaces, interior: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    if interior.len() != hs.dim {
        return Err(Error::Dimension(format!(
            "interior point has dimension {}, polytope has {}",
            interior.len(),
            hs.dim
        )));
    }
    if hs.min_slack(interior) <= 0.0 {
        return Err(Error::Numerical("interior point is not strictly feasible".into()));
    }
    let p = hs.dim;
    let mut lo = vec![0.0; p];
    let mut hi = vec![0.0; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let (a, b) = linear_extent(hs, &e)?;
        let pad = 1e-2 * (b - a) + 1.0;
        lo[j] = a - pad;
        hi[j] = b + pad;
    }
    let bx = AxisBox::new(lo, hi)?;
    let mut set = VertexSet::from_box(&bx, tol);
    for (row, &rhs) in hs.rows.iter().zip(&hs.rhs) {
        set.cut(row, rhs);
    }
    let points = set.into_points();
    if points.len() <= p {
        return Err(Error::Numerical(format!(
            "polytope with a strictly interior point produced only {} vertices",
            points.len()
        )));
    }
    Ok(points)
}
