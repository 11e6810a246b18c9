//! Intersection poset of an affine hyperplane arrangement, its Möbius
//! function and characteristic polynomial, and Zaslavsky's region count.
//!
//! Flats are the nonempty intersections of subsets of the hyperplanes, with
//! the whole space as the bottom element. A flat is identified by the set of
//! hyperplanes containing it, so the reverse-inclusion order is subset order
//! on those sets.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arrangement::{hyperplanes_from_network, Hyperplane};
use crate::error::{Error, Result};
use crate::network::{dot, ShallowReluNet};

/// Default cap on the number of distinct hyperplanes.
pub const DEFAULT_PLANE_LIMIT: usize = 16;

const FLAT_TOL: f64 = 1e-9;

/// An affine subspace `point + span(basis)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flat {
    /// Bit `k` set iff hyperplane `k` contains the flat.
    pub containing: u64,
    pub dim: usize,
    pub point: Vec<f64>,
    /// Orthonormal directions.
    pub basis: Vec<Vec<f64>>,
}

impl Flat {
    fn whole_space(p: usize) -> Self {
        let basis = (0..p)
            .map(|j| {
                let mut e = vec![0.0; p];
                e[j] = 1.0;
                e
            })
            .collect();
        Self { containing: 0, dim: p, point: vec![0.0; p], basis }
    }

    fn contained_in(&self, normal: &[f64], offset: f64) -> bool {
        let scale = 1.0 + dot(&self.point, &self.point).sqrt();
        (dot(normal, &self.point) + offset).abs() <= FLAT_TOL * scale
            && self.basis.iter().all(|b| dot(normal, b).abs() <= FLAT_TOL)
    }

    /// Intersection with the unit-normal hyperplane `normal . x + offset = 0`,
    /// or `None` when they are parallel and disjoint. `containing` is not set.
    fn meet(&self, normal: &[f64], offset: f64) -> Option<Flat> {
        let proj: Vec<f64> = self.basis.iter().map(|b| dot(normal, b)).collect();
        let pn2 = dot(&proj, &proj);
        let resid = dot(normal, &self.point) + offset;
        if pn2.sqrt() <= FLAT_TOL {
            return (resid.abs() <= FLAT_TOL * (1.0 + dot(&self.point, &self.point).sqrt())).then(|| self.clone());
        }
        let p = self.point.len();
        // in-flat direction along which the plane's residual changes fastest
        let mut u = vec![0.0; p];
        for (b, &c) in self.basis.iter().zip(&proj) {
            for j in 0..p {
                u[j] += c * b[j];
            }
        }
        let point: Vec<f64> = self.point.iter().zip(&u).map(|(x, d)| x - resid / pn2 * d).collect();
        let un = pn2.sqrt();
        u.iter_mut().for_each(|v| *v /= un);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.dim - 1);
        for b in &self.basis {
            let mut v = b.clone();
            let c = dot(&v, &u);
            v.iter_mut().zip(&u).for_each(|(a, d)| *a -= c * d);
            for q in &basis {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, d)| *a -= c * d);
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-6 && basis.len() < self.dim - 1 {
                v.iter_mut().for_each(|a| *a /= n);
                basis.push(v);
            }
        }
        Some(Flat { containing: 0, dim: self.dim - 1, point, basis })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatPoset {
    pub dim: usize,
    pub plane_count: usize,
    /// Sorted by decreasing dimension; index 0 is the whole space.
    pub flats: Vec<Flat>,
    /// `below[y]` lists every `x` with `x < y`.
    pub below: Vec<Vec<usize>>,
    /// `mobius[y] = mu(whole space, y)`.
    pub mobius: Vec<i64>,
}

impl FlatPoset {
    pub fn len(&self) -> usize {
        self.flats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flats.is_empty()
    }

    /// Reverse inclusion: `x <= y` iff flat `y` lies inside flat `x`.
    pub fn leq(&self, x: usize, y: usize) -> bool {
        let (a, b) = (self.flats[x].containing, self.flats[y].containing);
        a & b == a
    }
}

/// Drops duplicate planes (same set, either orientation) and rescales to unit normals.
pub fn distinct_planes(planes: &[Hyperplane]) -> Vec<Hyperplane> {
    let mut out: Vec<Hyperplane> = Vec::new();
    for h in planes {
        let n = dot(&h.normal, &h.normal).sqrt();
        if n == 0.0 {
            continue;
        }
        let normal: Vec<f64> = h.normal.iter().map(|v| v / n).collect();
        let offset = h.offset / n;
        let dup = out.iter().any(|g| {
            let s = dot(&normal, &g.normal).signum();
            normal.iter().zip(&g.normal).all(|(a, b)| (a - s * b).abs() <= FLAT_TOL)
                && (offset - s * g.offset).abs() <= FLAT_TOL * (1.0 + g.offset.abs())
        });
        if !dup {
            out.push(Hyperplane { unit: h.unit, normal, offset });
        }
    }
    out
}

/// Builds the intersection poset of the distinct planes among `planes`.
pub fn build_flat_poset(planes: &[Hyperplane], dim: usize, limit: usize) -> Result<FlatPoset> {
    if planes.iter().any(|h| h.normal.len() != dim) {
        return Err(Error::Dimension(format!("hyperplane normals must have length {dim}")));
    }
    let planes = distinct_planes(planes);
    let limit = limit.min(64);
    if planes.len() > limit {
        return Err(Error::LimitExceeded { count: planes.len(), limit });
    }

    let mut flats = vec![Flat::whole_space(dim)];
    let mut index: HashMap<u64, usize> = HashMap::from([(0, 0)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for (k, h) in planes.iter().enumerate() {
            if flats[i].containing & (1 << k) != 0 {
                continue;
            }
            let Some(mut flat) = flats[i].meet(&h.normal, h.offset) else {
                continue;
            };
            flat.containing = planes
                .iter()
                .enumerate()
                .filter(|(_, g)| flat.contained_in(&g.normal, g.offset))
                .fold(0u64, |acc, (j, _)| acc | (1 << j));
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(flat.containing) {
                e.insert(flats.len());
                queue.push_back(flats.len());
                flats.push(flat);
            }
        }
    }

    flats.sort_by(|a, b| b.dim.cmp(&a.dim).then(a.containing.cmp(&b.containing)));
    let n = flats.len();
    let mut below = vec![Vec::new(); n];
    let mut mobius = vec![0i64; n];
    for y in 0..n {
        let cy = flats[y].containing;
        for x in 0..y {
            let cx = flats[x].containing;
            if cx != cy && cx & cy == cx {
                below[y].push(x);
            }
        }
        mobius[y] = if y == 0 { 1 } else { -below[y].iter().map(|&x| mobius[x]).sum::<i64>() };
    }
    Ok(FlatPoset { dim, plane_count: planes.len(), flats, below, mobius })
}

/// `chi(t) = sum_k coeffs[k] t^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharPoly {
    pub coeffs: Vec<i64>,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: i64) -> i64 {
        self.coeffs.iter().rev().fold(0, |acc, &c| acc * t + c)
    }
}

impl fmt::Display for CharPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c < 0 { " - " } else { " + " })?;
            }
            first = false;
            if mag != 1 || k == 0 {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => f.write_str("t")?,
                _ => write!(f, "t^{k}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// `chi(t) = sum over flats X of mu(X) t^dim(X)`.
pub fn characteristic_polynomial(poset: &FlatPoset) -> CharPoly {
    let mut coeffs = vec![0i64; poset.dim + 1];
    for (flat, &mu) in poset.flats.iter().zip(&poset.mobius) {
        coeffs[flat.dim] += mu;
    }
    CharPoly { coeffs }
}

/// Number of regions of the arrangement in `R^p`: `(-1)^p chi(-1)`.
pub fn zaslavsky_count(chi: &CharPoly) -> u64 {
    let p = chi.degree();
    let v = chi.eval(-1);
    (if p.is_multiple_of(2) { v } else { -v }) as u64
}

/// Number of bounded regions in `R^p`: `|chi(1)|`.
pub fn bounded_count(chi: &CharPoly) -> u64 {
    chi.eval(1).unsigned_abs()
}

/// Poset, polynomial and region bound for the hidden layer of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBound {
    pub plane_count: usize,
    pub flat_count: usize,
    pub polynomial: CharPoly,
    pub regions: u64,
}

/// Upper bound on the number of linear regions of `V` anywhere in `R^p`.
pub fn region_upper_bound(net: &ShallowReluNet, limit: usize) -> Result<RegionBound> {
    let arr = hyperplanes_from_network(net);
    let poset = build_flat_poset(&arr.distinct_planes(), net.input_dim(), limit)?;
    let polynomial = characteristic_polynomial(&poset);
    Ok(RegionBound {
        plane_count: poset.plane_count,
        flat_count: poset.len(),
        regions: zaslavsky_count(&polynomial),
        polynomial,
    })
}
