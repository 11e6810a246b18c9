//! The hyperplane arrangement induced by the hidden layer, restricted to a box.
//!
//! Every hidden unit with a nonzero weight row contributes the hyperplane
//! `W1[l] . x + b1[l] = 0`. Units whose rows are proportional (including the
//! bias, with either sign) describe the same geometric plane and form one
//! coincidence group; crossing that plane toggles every bit of the group at
//! once, since each member's pre-activation is a fixed nonzero multiple of the
//! group's representative.
//!
//! Regions are found by breadth-first search over group sign vectors. Each
//! dequeued sign vector is solved as a polytope (Chebyshev center, then vertex
//! enumeration); full-dimensional ones are kept and their facet-supporting
//! groups are flipped to reach the neighbors.

use std::collections::HashSet;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sobol_burley::NUM_DIMENSIONS;

use crate::error::{Error, Result};
use crate::geometry::{chebyshev_center, AxisBox, Halfspaces, Tolerances, VertexSet};
use crate::network::{dot, ActivationPattern, ShallowReluNet};

/// Default cap on the number of enumerated regions.
pub const DEFAULT_REGION_CAP: usize = 5_000_000;

/// Relative tolerance for treating two weight rows as the same plane.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// `normal . x + offset = 0` for one hidden unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub unit: usize,
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Geometrically identical hyperplanes. The representative has unit normal;
/// member `k` satisfies `(w, b) = scales[k] * (normal, offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceGroup {
    pub normal: Vec<f64>,
    pub offset: f64,
    /// Indices into [`Arrangement::hyperplanes`].
    pub members: Vec<usize>,
    pub scales: Vec<f64>,
}

impl CoincidenceGroup {
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrangement {
    pub dim: usize,
    pub hidden_dim: usize,
    pub hyperplanes: Vec<Hyperplane>,
    pub groups: Vec<CoincidenceGroup>,
    /// Units with a zero weight row; their bit never changes.
    pub constant_units: Vec<(usize, bool)>,
}

impl Arrangement {
    /// Activation pattern of the region lying on the given side of every
    /// group (`true` = positive side of the representative).
    pub fn pattern_for_sides(&self, sides: &[bool]) -> ActivationPattern {
        let mut bits = vec![false; self.hidden_dim];
        for &(unit, on) in &self.constant_units {
            bits[unit] = on;
        }
        for (group, &side) in self.groups.iter().zip(sides) {
            for (&h, &scale) in group.members.iter().zip(&group.scales) {
                bits[self.hyperplanes[h].unit] = if scale > 0.0 { side } else { !side };
            }
        }
        ActivationPattern::new(bits)
    }

    pub fn sides_of(&self, x: &[f64]) -> Vec<bool> {
        self.groups.iter().map(|g| g.signed_distance(x) > 0.0).collect()
    }

    /// The deduplicated arrangement: one plane per coincidence group.
    pub fn distinct_planes(&self) -> Vec<Hyperplane> {
        self.groups
            .iter()
            .map(|g| Hyperplane {
                unit: self.hyperplanes[g.members[0]].unit,
                normal: g.normal.clone(),
                offset: g.offset,
            })
            .collect()
    }

    /// Halfspace system of the cell with the given group sides, followed by
    /// the `2p` box facets.
    pub fn cell_halfspaces(&self, sides: &[bool], bx: &AxisBox) -> Halfspaces {
        let mut hs = Halfspaces::new(self.dim);
        for (g, &side) in self.groups.iter().zip(sides) {
            if side {
                hs.push(g.normal.iter().map(|v| -v).collect(), g.offset);
            } else {
                hs.push(g.normal.clone(), -g.offset);
            }
        }
        hs.extend(&bx.halfspaces());
        hs
    }
}

/// Builds the arrangement of the net's hidden units, grouping coincident planes.
pub fn hyperplanes_from_network(net: &ShallowReluNet) -> Arrangement {
    let max_norm = net.w1().iter().map(|r| dot(r, r).sqrt()).fold(0.0, f64::max);
    let zero_tol = 1e-12 * max_norm.max(1.0);
    let mut hyperplanes = Vec::new();
    let mut groups: Vec<CoincidenceGroup> = Vec::new();
    let mut constant_units = Vec::new();
    for (unit, row) in net.w1().iter().enumerate() {
        let bias = net.b1()[unit];
        let norm = dot(row, row).sqrt();
        if norm <= zero_tol {
            let on = bias > 0.0;
            warn!(
                "hidden unit {unit} has a zero weight row; excluded from the arrangement (always {})",
                if on { "active" } else { "inactive" }
            );
            constant_units.push((unit, on));
            continue;
        }
        let unit_normal: Vec<f64> = row.iter().map(|v| v / norm).collect();
        let unit_offset = bias / norm;
        let h = hyperplanes.len();
        hyperplanes.push(Hyperplane { unit, normal: row.clone(), offset: bias });
        let found = groups.iter_mut().find_map(|g| {
            let s = if dot(&unit_normal, &g.normal) >= 0.0 { 1.0 } else { -1.0 };
            let normal_dev = unit_normal.iter().zip(&g.normal).map(|(a, b)| (a - s * b).abs()).fold(0.0, f64::max);
            let offset_dev = (unit_offset - s * g.offset).abs();
            (normal_dev <= COINCIDENCE_TOL && offset_dev <= COINCIDENCE_TOL * (1.0 + g.offset.abs())).then_some((g, s))
        });
        match found {
            Some((g, s)) => {
                g.members.push(h);
                g.scales.push(s * norm);
            }
            None => groups.push(CoincidenceGroup {
                normal: unit_normal,
                offset: unit_offset,
                members: vec![h],
                scales: vec![norm],
            }),
        }
    }
    Arrangement { dim: net.input_dim(), hidden_dim: net.hidden_dim(), hyperplanes, groups, constant_units }
}

/// One full-dimensional cell of the arrangement inside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub pattern: ActivationPattern,
    /// Side of every coincidence group (`true` = positive side).
    pub sides: Vec<bool>,
    /// Group constraints in group order, then the box facets.
    pub halfspaces: Halfspaces,
    pub vertices: Vec<Vec<f64>>,
    pub interior_point: Vec<f64>,
    pub chebyshev_radius: f64,
    pub bbox: AxisBox,
    /// Groups whose plane supports a facet of this region.
    pub facet_groups: Vec<usize>,
}

impl Region {
    /// Vertices sorted counterclockwise around their centroid (planar regions).
    pub fn ordered_polygon(&self) -> Vec<Vec<f64>> {
        let mut verts = self.vertices.clone();
        if verts.first().is_some_and(|v| v.len() == 2) {
            let n = verts.len() as f64;
            let cx = verts.iter().map(|v| v[0]).sum::<f64>() / n;
            let cy = verts.iter().map(|v| v[1]).sum::<f64>() / n;
            verts.sort_by(|a, b| {
                let ta = (a[1] - cy).atan2(a[0] - cx);
                let tb = (b[1] - cy).atan2(b[0] - cx);
                ta.total_cmp(&tb)
            });
        }
        verts
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumerationStats {
    /// Distinct sign vectors dequeued and solved.
    pub visited: usize,
    /// Visited sign vectors whose cell was empty or lower-dimensional.
    pub degenerate: usize,
    pub bfs_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    pub arrangement: Arrangement,
    pub bounds: AxisBox,
    pub tolerances: Tolerances,
    pub stats: EnumerationStats,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Regions whose closed polytope contains `x`.
    pub fn locate(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.regions.iter().filter(|r| r.halfspaces.contains(x, tol)).map(|r| r.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationConfig {
    pub region_cap: usize,
    /// Defaults to [`Tolerances::for_diameter`] of the box.
    pub tolerances: Option<Tolerances>,
    /// Used only to size the deterministic seed nudge.
    pub hole_frac: f64,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { region_cap: DEFAULT_REGION_CAP, tolerances: None, hole_frac: 1e-3 }
    }
}

/// Solves one cell; `None` when it has no interior.
fn solve_cell(arrangement: &Arrangement, sides: &[bool], bx: &AxisBox, tol: &Tolerances) -> Result<Option<Region>> {
    let hs = arrangement.cell_halfspaces(sides, bx);
    let ball = chebyshev_center(&hs)?;
    if ball.radius <= tol.degenerate_radius {
        return Ok(None);
    }
    let mut set = VertexSet::from_box(bx, tol);
    for (row, &rhs) in hs.rows.iter().zip(&hs.rhs).take(arrangement.groups.len()) {
        set.cut(row, rhs);
    }
    let vertices = set.into_points();
    let p = arrangement.dim;
    if vertices.len() <= p {
        return Err(Error::Numerical(format!(
            "cell with inscribed radius {:.3e} has only {} vertices",
            ball.radius,
            vertices.len()
        )));
    }
    let facet_groups = arrangement
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            vertices.iter().filter(|v| g.signed_distance(v).abs() <= tol.on_plane * (1.0 + dot(v, v).sqrt())).count()
                >= p.max(1)
        })
        .map(|(k, _)| k)
        .collect();
    let bbox = AxisBox::bounding(&vertices).expect("nonempty vertex list");
    Ok(Some(Region {
        id: 0,
        pattern: arrangement.pattern_for_sides(sides),
        sides: sides.to_vec(),
        halfspaces: hs,
        vertices,
        interior_point: ball.center,
        chebyshev_radius: ball.radius,
        bbox,
        facet_groups,
    }))
}

/// Deterministic seed inside the box and off every plane: the box center,
/// nudged along the diagonal by `0.37 * hole width`, then scrambled Sobol
/// points of the box if the nudges stay on some plane.
fn seed_point(arrangement: &Arrangement, bx: &AxisBox, hole_frac: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    let p = bx.dim();
    let center = bx.center();
    let scale = hole_frac.clamp(1e-12, 1.0).powf(1.0 / p as f64);
    let clear = |x: &[f64]| {
        arrangement.groups.iter().all(|g| g.signed_distance(x).abs() > tol.on_plane * (1.0 + dot(x, x).sqrt()))
    };
    let nudges = (0..4)
        .map(|k| (0..p).map(|j| center[j] + 0.37 * k as f64 * scale * (bx.hi[j] - bx.lo[j])).collect::<Vec<f64>>());
    let sobol = (0..4096u32).map(|i| {
        (0..p)
            .map(|j| {
                bx.lo[j]
                    + sobol_burley::sample(i, j as u32 % NUM_DIMENSIONS, 0x0a11_ce55 + j as u32 / NUM_DIMENSIONS) as f64
                        * (bx.hi[j] - bx.lo[j])
            })
            .collect::<Vec<f64>>()
    });
    nudges
        .chain(sobol)
        .find(|x| bx.contains(x, 0.0) && clear(x))
        .ok_or_else(|| Error::Numerical("could not find a seed point off all hyperplanes".into()))
}

/// Enumerates every full-dimensional region of the arrangement inside `bx`.
pub fn enumerate_regions(net: &ShallowReluNet, bx: &AxisBox, config: &EnumerationConfig) -> Result<RegionSet> {
    if bx.dim() != net.input_dim() {
        return Err(Error::Dimension(format!("box has dimension {}, network input is {}", bx.dim(), net.input_dim())));
    }
    let tol = config.tolerances.unwrap_or_else(|| Tolerances::for_diameter(bx.diameter()));
    let arrangement = hyperplanes_from_network(net);
    let seed = seed_point(&arrangement, bx, config.hole_frac, &tol)?;
    let seed_sides = arrangement.sides_of(&seed);

    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    visited.insert(seed_sides.clone());
    let mut frontier = vec![seed_sides];
    let mut regions: Vec<Region> = Vec::new();
    let mut stats = EnumerationStats::default();
    while !frontier.is_empty() {
        stats.bfs_levels += 1;
        stats.visited += frontier.len();
        let solved =
            frontier.par_iter().map(|sides| solve_cell(&arrangement, sides, bx, &tol)).collect::<Result<Vec<_>>>()?;
        let mut next = Vec::new();
        for cell in solved {
            let Some(region) = cell else {
                stats.degenerate += 1;
                continue;
            };
            for &g in &region.facet_groups {
                let mut flipped = region.sides.clone();
                flipped[g] = !flipped[g];
                if visited.insert(flipped.clone()) {
                    next.push(flipped);
                }
            }
            regions.push(region);
            if regions.len() > config.region_cap {
                return Err(Error::BudgetExceeded { cap: config.region_cap });
            }
        }
        frontier = next;
    }
    regions.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    for (id, r) in regions.iter_mut().enumerate() {
        r.id = id;
    }
    debug!(
        "enumerated {} regions ({} visited, {} degenerate, {} levels)",
        regions.len(),
        stats.visited,
        stats.degenerate,
        stats.bfs_levels
    );
    Ok(RegionSet { regions, arrangement, bounds: bx.clone(), tolerances: tol, stats })
}

/// Counts distinct activation patterns at the cell centers of a
/// `grid_n^p` grid. A lower bound on the region count, meant for small `p`.
pub fn region_count_oracle(net: &ShallowReluNet, bx: &AxisBox, grid_n: usize) -> usize {
    let p = bx.dim();
    let mut seen = HashSet::new();
    let mut idx = vec![0usize; p];
    let mut x = vec![0.0; p];
    loop {
        for j in 0..p {
            x[j] = bx.lo[j] + (idx[j] as f64 + 0.5) * (bx.hi[j] - bx.lo[j]) / grid_n as f64;
        }
        seen.insert(net.activation_pattern(&x).expect("box matches network"));
        let mut j = 0;
        loop {
            if j == p {
                return seen.len();
            }
            idx[j] += 1;
            if idx[j] < grid_n {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_groups() {
        let arr = hyperplanes_from_network(&ShallowReluNet::l1_norm(2));
        assert_eq!(arr.hyperplanes.len(), 4);
        assert_eq!(arr.groups.len(), 2);
        assert_eq!(arr.groups[0].members, vec![0, 1]);
        assert_eq!(arr.groups[0].scales, vec![1.0, -1.0]);
        assert_eq!(arr.pattern_for_sides(&[true, false]).to_string(), "1001");
    }

    #[test]
    fn zero_row_is_constant_unit() {
        let net = ShallowReluNet::new(
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![0.0, 3.0, -1.0],
            vec![1.0, 1.0, 1.0],
            0.0,
        )
        .unwrap();
        let arr = hyperplanes_from_network(&net);
        assert_eq!(arr.hyperplanes.len(), 1);
        assert_eq!(arr.constant_units, vec![(1, true), (2, false)]);
        assert_eq!(arr.pattern_for_sides(&[true]).to_string(), "110");
    }

    #[test]
    fn scaled_rows_coincide() {
        let net = ShallowReluNet::new(
            vec![vec![1.0, 2.0], vec![-2.0, -4.0], vec![3.0, 6.0]],
            vec![1.0, -2.0, 3.0 + 1e-3],
            vec![1.0; 3],
            0.0,
        )
        .unwrap();
        let arr = hyperplanes_from_network(&net);
        assert_eq!(arr.groups.len(), 2);
        assert_eq!(arr.groups[0].members, vec![0, 1]);
    }

    #[test]
    fn l1_quadrants() {
        let bx = AxisBox::cube(-10.0, 10.0, 2).unwrap();
        let set = enumerate_regions(&ShallowReluNet::l1_norm(2), &bx, &EnumerationConfig::default()).unwrap();
        assert_eq!(set.len(), 4);
        let pos = set.regions.iter().find(|r| r.pattern.to_string() == "1010").unwrap();
        let mut verts = pos.ordered_polygon();
        for v in &mut verts {
            for c in v.iter_mut() {
                *c = c.round();
            }
        }
        verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(verts, vec![vec![0.0, 0.0], vec![0.0, 10.0], vec![10.0, 0.0], vec![10.0, 10.0]]);
        assert_eq!(pos.facet_groups, vec![0, 1]);
    }

    #[test]
    fn planes_missing_the_box() {
        let net =
            ShallowReluNet::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]], vec![50.0, -80.0], vec![1.0, 1.0], 0.0).unwrap();
        let bx = AxisBox::cube(-10.0, 10.0, 2).unwrap();
        let set = enumerate_regions(&net, &bx, &EnumerationConfig::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.regions[0].vertices.len(), 4);
    }

    #[test]
    fn region_cap() {
        let bx = AxisBox::cube(-10.0, 10.0, 3).unwrap();
        let cfg = EnumerationConfig { region_cap: 5, ..Default::default() };
        assert!(matches!(
            enumerate_regions(&ShallowReluNet::l1_norm(3), &bx, &cfg),
            Err(Error::BudgetExceeded { cap: 5 })
        ));
    }

    #[test]
    fn grid_oracle_single_line() {
        let net = ShallowReluNet::new(vec![vec![1.0, 2.0]], vec![0.3], vec![1.0], 0.0).unwrap();
        let bx = AxisBox::cube(-1.0, 1.0, 2).unwrap();
        assert_eq!(region_count_oracle(&net, &bx, 50), 2);
        assert_eq!(region_count_oracle(&ShallowReluNet::l1_norm(2), &AxisBox::cube(-10.0, 10.0, 2).unwrap(), 400), 4);
    }
}
