//! The three verification tests over the enumerated regions.
//!
//! 1. `V(0) = 0`.
//! 2. `V > 0` away from the origin: `V` is affine on every region, so on each
//!    region (minus the origin hole) its minimum is attained at a vertex.
//! 3. `V̇ < 0` away from the origin: on a region with gradient `g`, rotate so
//!    that `T g = |g| e1`. Then `V̇ = g . f = |g| (T f)_1`, and the sign of
//!    `V̇` is the sign of `v1(x) = t . f(x)` with `t` the first row of `T`.
//!    Maximizing `v1` over the region decides the condition.
//!
//! The origin is excluded by a small hypercube hole whose complement in the
//! box is covered by `2p` slabs `x_j >= h_j` and `x_j <= -h_j`. Every region
//! is intersected with every slab, giving convex pieces for Tests 2 and 3.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrangement::{enumerate_regions, EnumerationConfig, Region, RegionSet, DEFAULT_REGION_CAP};
use crate::combinatorics::{region_upper_bound, DEFAULT_PLANE_LIMIT};
use crate::dynamics::{DynamicsFile, DynamicsModel};
use crate::error::{Error, Result};
use crate::geometry::{chebyshev_center, AxisBox, Halfspaces, Tolerances, VertexSet};
use crate::gopt::{global_max, local_max, Budget, Objective, PolytopeDomain};
use crate::network::{dot, ShallowReluNet};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `|V(0)|` above this fails Test 1.
pub const ORIGIN_TOL: f64 = 1e-9;

pub const DEFAULT_HOLE_FRAC: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CounterexampleKind {
    OriginValue,
    NonPositive,
    NonDecreasing,
}

/// A point violating one of the Lyapunov conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub point: Vec<f64>,
    pub kind: CounterexampleKind,
    pub region_id: Option<usize>,
    /// `V(0)`, `V(point)`, or `v1(point) = V̇(point) / |g|` depending on the kind.
    pub measured: f64,
}

fn sort_key(a: &Counterexample, b: &Counterexample) -> std::cmp::Ordering {
    a.region_id.cmp(&b.region_id).then(a.kind.cmp(&b.kind)).then_with(|| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Orthogonal `T` with `T g = scale * e1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub matrix: Vec<Vec<f64>>,
    pub scale: f64,
}

impl Rotation {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| dot(row, v)).collect()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.matrix[0]
    }
}

/// Householder reflection taking `g` to `|g| e1`; the identity when `g` is
/// already a positive multiple of `e1`.
pub fn householder_to_e1(g: &[f64]) -> Result<Rotation> {
    let p = g.len();
    let a = dot(g, g).sqrt();
    if a == 0.0 || !a.is_finite() {
        return Err(Error::ZeroGradient);
    }
    let tail2: f64 = g[1..].iter().map(|v| v * v).sum();
    let mut matrix: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut row = vec![0.0; p];
            row[i] = 1.0;
            row
        })
        .collect();
    if tail2 == 0.0 && g[0] > 0.0 {
        return Ok(Rotation { matrix, scale: a });
    }
    // u = g - |g| e1, with the first entry rewritten to avoid cancellation
    let mut u = g.to_vec();
    u[0] = if g[0] > 0.0 { -tail2 / (g[0] + a) } else { g[0] - a };
    let uu = dot(&u, &u);
    for i in 0..p {
        for j in 0..p {
            matrix[i][j] -= 2.0 * u[i] * u[j] / uu;
        }
    }
    Ok(Rotation { matrix, scale: a })
}

/// Test 1.
pub fn test_origin(net: &ShallowReluNet) -> Option<Counterexample> {
    let origin = vec![0.0; net.input_dim()];
    let v0 = net.eval_v(&origin).expect("origin has the network's dimension");
    (v0.abs() > ORIGIN_TOL).then_some(Counterexample {
        point: origin,
        kind: CounterexampleKind::OriginValue,
        region_id: None,
        measured: v0,
    })
}

/// The origin hole and the slabs covering its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleSlabs {
    /// Half-width `h_j` of the hole along each axis.
    pub half_width: Vec<f64>,
    /// `row . x <= rhs`: `-x_j <= -h_j` then `x_j <= -h_j` per axis.
    pub slabs: Halfspaces,
}

impl HoleSlabs {
    /// Strictly inside the open hole.
    pub fn in_hole(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.half_width).all(|(v, h)| v.abs() < *h)
    }
}

/// Hole of volume `hole_frac * vol(box)`: `h_j = 0.5 * hole_frac^(1/p) * (hi_j - lo_j)`.
pub fn hole_slabs(bx: &AxisBox, hole_frac: f64) -> Result<HoleSlabs> {
    if !(hole_frac > 0.0 && hole_frac < 1.0) {
        return Err(Error::Config(format!("hole fraction {hole_frac} must lie in (0, 1)")));
    }
    let p = bx.dim();
    let side = hole_frac.powf(1.0 / p as f64);
    let half_width: Vec<f64> = bx.lo.iter().zip(&bx.hi).map(|(l, h)| 0.5 * side * (h - l)).collect();
    let mut slabs = Halfspaces::new(p);
    for (j, &h) in half_width.iter().enumerate() {
        let mut e = vec![0.0; p];
        e[j] = -1.0;
        slabs.push(e.clone(), -h);
        e[j] = 1.0;
        slabs.push(e, -h);
    }
    Ok(HoleSlabs { half_width, slabs })
}

/// A full-dimensional region ∩ slab polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub region_id: usize,
    pub slab: usize,
    pub halfspaces: Halfspaces,
    pub vertices: Vec<Vec<f64>>,
    pub interior_point: Vec<f64>,
}

fn region_slab_piece(region: &Region, slabs: &HoleSlabs, k: usize, tol: &Tolerances) -> Result<Option<Piece>> {
    let row = &slabs.slabs.rows[k];
    let rhs = slabs.slabs.rhs[k];
    // skip slabs that miss the region's bounding box
    let axis = k / 2;
    let reach = if row[axis] < 0.0 { region.bbox.hi[axis] } else { -region.bbox.lo[axis] };
    if reach <= -rhs {
        return Ok(None);
    }
    let mut hs = region.halfspaces.clone();
    hs.push(row.clone(), rhs);
    let ball = chebyshev_center(&hs)?;
    if ball.radius <= tol.degenerate_radius {
        return Ok(None);
    }
    let mut set = VertexSet::from_vertices(&region.halfspaces, region.vertices.clone(), tol);
    set.cut(row, rhs);
    let vertices = set.into_points();
    if vertices.len() <= region.vertices[0].len() {
        return Err(Error::Numerical(format!(
            "region {} slab {k}: inscribed radius {:.3e} but {} vertices",
            region.id,
            ball.radius,
            vertices.len()
        )));
    }
    Ok(Some(Piece { region_id: region.id, slab: k, halfspaces: hs, vertices, interior_point: ball.center }))
}

/// All nonempty region ∩ slab pieces, ordered by region then slab.
pub fn region_pieces(regions: &RegionSet, slabs: &HoleSlabs) -> Result<Vec<Piece>> {
    let tol = regions.tolerances;
    let nested = regions
        .regions
        .par_iter()
        .map(|r| {
            (0..slabs.slabs.len())
                .filter_map(|k| region_slab_piece(r, slabs, k, &tol).transpose())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Test 2: every piece vertex with `V <= 0`, deduplicated across pieces.
pub fn test_positivity(net: &ShallowReluNet, regions: &RegionSet, pieces: &[Piece]) -> Result<Vec<Counterexample>> {
    let mut found: Vec<Counterexample> = Vec::new();
    for piece in pieces {
        for v in &piece.vertices {
            let value = net.eval_v(v)?;
            if value <= 0.0 {
                found.push(Counterexample {
                    point: v.clone(),
                    kind: CounterexampleKind::NonPositive,
                    region_id: Some(piece.region_id),
                    measured: value,
                });
            }
        }
    }
    found.sort_by(sort_key);
    let tol2 = regions.tolerances.vertex_dedup.powi(2);
    let mut kept: Vec<Counterexample> = Vec::with_capacity(found.len());
    for c in found {
        let dup =
            kept.iter().any(|k| k.point.iter().zip(&c.point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= tol2);
        if !dup {
            kept.push(c);
        }
    }
    Ok(kept)
}

/// `v1(x) = t . f(x)` with gradient `J(x)^T t`.
pub struct RotatedDynamics<'a> {
    pub model: &'a DynamicsModel,
    pub t: Vec<f64>,
}

impl Objective for RotatedDynamics<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.t, &self.model.eval_f(x)?))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.jacobian_transpose_times(x, &self.t)
    }
}

fn zero_gradient_tol(net: &ShallowReluNet) -> f64 {
    1e-12 * net.lipschitz_bound().max(1.0)
}

/// Test 3: one counterexample per piece whose maximum of `v1` is at least
/// `-margin`. Pieces of regions with zero gradient report their interior point.
pub fn test_decrease(
    net: &ShallowReluNet,
    regions: &RegionSet,
    model: &DynamicsModel,
    pieces: &[Piece],
    budget: &Budget,
    margin: f64,
) -> Result<Vec<Counterexample>> {
    if model.dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "dynamics has dimension {}, network input is {}",
            model.dim(),
            net.input_dim()
        )));
    }
    let zero_tol = zero_gradient_tol(net);
    let rotations = regions
        .regions
        .iter()
        .map(|r| {
            let g = net.region_gradient(&r.pattern)?;
            Ok(if dot(&g, &g).sqrt() <= zero_tol { None } else { Some((g.clone(), householder_to_e1(&g)?)) })
        })
        .collect::<Result<Vec<_>>>()?;

    let results = pieces
        .par_iter()
        .map(|piece| -> Result<Option<Counterexample>> {
            let Some((g, rot)) = &rotations[piece.region_id] else {
                return Ok(Some(Counterexample {
                    point: piece.interior_point.clone(),
                    kind: CounterexampleKind::NonDecreasing,
                    region_id: Some(piece.region_id),
                    measured: 0.0,
                }));
            };
            let objective = RotatedDynamics { model, t: rot.first_row().to_vec() };
            let domain = PolytopeDomain::from_parts(
                piece.halfspaces.clone(),
                piece.vertices.clone(),
                piece.interior_point.clone(),
            );
            let best = match global_max(&objective, &domain, budget) {
                Ok(r) => r,
                Err(Error::NoFeasibleSample) => local_max(&objective, &domain, &piece.interior_point, budget)?,
                Err(e) => return Err(e),
            };
            // decide on the directly recomputed V̇ / |g| at the argmax
            let measured = dot(g, &model.eval_f(&best.argmax)?) / rot.scale;
            Ok((measured >= -margin).then_some(Counterexample {
                point: best.argmax,
                kind: CounterexampleKind::NonDecreasing,
                region_id: Some(piece.region_id),
                measured,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut found: Vec<Counterexample> = results.into_iter().flatten().collect();
    found.sort_by(sort_key);
    Ok(found)
}

/// Re-evaluates the violated condition directly. Region-tagged points are
/// checked against their region's gradient, so points on a region boundary
/// are judged by the region that reported them.
pub fn validate_counterexample(
    net: &ShallowReluNet,
    model: &DynamicsModel,
    regions: &RegionSet,
    slabs: &HoleSlabs,
    margin: f64,
    c: &Counterexample,
) -> Result<bool> {
    let tol = regions.tolerances.vertex_dedup;
    match c.kind {
        CounterexampleKind::OriginValue => {
            Ok(c.point.iter().all(|v| *v == 0.0) && net.eval_v(&c.point)?.abs() > ORIGIN_TOL)
        }
        kind => {
            if !regions.bounds.contains(&c.point, tol) {
                return Ok(false);
            }
            let inside_hole = c.point.iter().zip(&slabs.half_width).all(|(v, h)| v.abs() < h - tol);
            if inside_hole {
                return Ok(false);
            }
            let Some(region) = c.region_id.and_then(|id| regions.regions.get(id)) else {
                return Ok(false);
            };
            if !region.halfspaces.contains(&c.point, tol) {
                return Ok(false);
            }
            if kind == CounterexampleKind::NonPositive {
                return Ok(net.eval_v(&c.point)? <= 0.0);
            }
            let g = net.region_gradient(&region.pattern)?;
            let gn = dot(&g, &g).sqrt();
            if gn <= zero_gradient_tol(net) {
                return Ok(true);
            }
            Ok(net.eval_v_dot(&region.pattern, &model.eval_f(&c.point)?)? / gn >= -margin)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub hole_frac: f64,
    pub budget: Budget,
    /// Test 3 reports `v1 >= -margin`.
    pub margin: f64,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    pub region_cap: usize,
    pub compute_bound: bool,
    pub plane_limit: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            hole_frac: DEFAULT_HOLE_FRAC,
            budget: Budget::default(),
            margin: 0.0,
            workers: None,
            region_cap: DEFAULT_REGION_CAP,
            compute_bound: true,
            plane_limit: DEFAULT_PLANE_LIMIT,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hole_frac > 0.0 && self.hole_frac < 1.0) {
            return Err(Error::Config(format!("hole fraction {} must lie in (0, 1)", self.hole_frac)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin {} must be a finite non-negative number", self.margin)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    Falsified,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub origin: f64,
    pub enumeration: f64,
    pub positivity: f64,
    pub decrease: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub verdict: Verdict,
    pub counterexamples: Vec<Counterexample>,
    pub region_count: usize,
    pub piece_count: usize,
    pub zaslavsky_bound: Option<u64>,
    pub bounds: AxisBox,
    pub hole_half_width: Vec<f64>,
    pub dynamics: DynamicsFile,
    pub config: VerifyConfig,
    pub timings: Timings,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { timings: Timings::default(), ..self.clone() }
    }
}

/// Everything a caller may want to inspect after a run.
pub struct VerifyOutcome {
    pub report: VerificationReport,
    pub regions: RegionSet,
    pub slabs: HoleSlabs,
}

/// Runs Tests 1-3 and assembles the report.
pub fn verify(
    net: &ShallowReluNet,
    model: &DynamicsModel,
    bx: &AxisBox,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    verify_detailed(net, model, bx, config).map(|o| o.report)
}

pub fn verify_detailed(
    net: &ShallowReluNet,
    model: &DynamicsModel,
    bx: &AxisBox,
    config: &VerifyConfig,
) -> Result<VerifyOutcome> {
    config.validate()?;
    if model.dim() != net.input_dim() || bx.dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "network input {}, dynamics {}, box {}",
            net.input_dim(),
            model.dim(),
            bx.dim()
        )));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(net, model, bx, config))
}

fn run(net: &ShallowReluNet, model: &DynamicsModel, bx: &AxisBox, config: &VerifyConfig) -> Result<VerifyOutcome> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let slabs = hole_slabs(bx, config.hole_frac)?;

    let t = Instant::now();
    let mut counterexamples: Vec<Counterexample> = test_origin(net).into_iter().collect();
    timings.origin = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let enum_cfg = EnumerationConfig { region_cap: config.region_cap, tolerances: None, hole_frac: config.hole_frac };
    let regions = enumerate_regions(net, bx, &enum_cfg)?;
    let pieces = region_pieces(&regions, &slabs)?;
    timings.enumeration = t.elapsed().as_secs_f64();

    let t = Instant::now();
    counterexamples.extend(test_positivity(net, &regions, &pieces)?);
    timings.positivity = t.elapsed().as_secs_f64();

    let t = Instant::now();
    counterexamples.extend(test_decrease(net, &regions, model, &pieces, &config.budget, config.margin)?);
    timings.decrease = t.elapsed().as_secs_f64();
    counterexamples.sort_by(sort_key);

    let zaslavsky_bound = if config.compute_bound {
        match region_upper_bound(net, config.plane_limit) {
            Ok(b) => Some(b.regions),
            Err(Error::LimitExceeded { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    timings.total = start.elapsed().as_secs_f64();

    let report = VerificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        verdict: if counterexamples.is_empty() { Verdict::Verified } else { Verdict::Falsified },
        counterexamples,
        region_count: regions.len(),
        piece_count: pieces.len(),
        zaslavsky_bound,
        bounds: bx.clone(),
        hole_half_width: slabs.half_width.clone(),
        dynamics: model.to_file(),
        config: config.clone(),
        timings,
    };
    Ok(VerifyOutcome { report, regions, slabs })
}
