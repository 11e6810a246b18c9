//! Global maximization of a smooth objective over a bounded polytope.
//!
//! The global phase evaluates the objective on a scrambled Sobol sequence
//! over the polytope's bounding box (plus the polytope's vertices when
//! known), keeps the feasible points and connects each to its nearest
//! neighbors. Samples that beat all of their neighbors seed local ascents.
//!
//! The local phase is an active-set quasi-Newton method for
//! `max phi(x) s.t. Ax <= b`: steps are taken in the null space of the active
//! constraints with a BFGS model, blocked by a ratio test against the
//! inactive ones, and constraints are released when their Lagrange
//! multiplier has the wrong sign.
//!
//! Sampling-based global optimization gives no certificate for general
//! nonconvex objectives; the sample budget and [`Budget::paranoid`] control
//! how hard it looks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vertex_enumeration, AxisBox, Halfspaces, Tolerances};
use crate::network::dot;

const SOBOL_SEED: u32 = 0x5eed_1e55;
const MAX_SAMPLES: usize = 1 << 16;
const ARMIJO: f64 = 1e-4;

/// A scalar objective with analytic gradient.
pub trait Objective {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Adapts a pair of infallible closures.
pub struct FnObjective<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.grad)(x))
    }
}

/// Bounded polytope `{x : Ax <= b}` with a strictly interior point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeDomain {
    pub halfspaces: Halfspaces,
    pub bbox: AxisBox,
    pub interior_point: Vec<f64>,
    /// Known vertices; used as extra samples and paranoid-mode starts.
    pub vertices: Vec<Vec<f64>>,
}

impl PolytopeDomain {
    /// Enumerates the vertices of `hs` to obtain the bounding box.
    pub fn new(halfspaces: Halfspaces, interior_point: Vec<f64>) -> Result<Self> {
        // distance of the farthest supporting plane from the origin sets the scale
        let reach = (0..halfspaces.len())
            .map(|i| halfspaces.normalized_slack(i, &vec![0.0; halfspaces.dim]).abs())
            .fold(0.0, f64::max);
        let tol = Tolerances::for_diameter(2.0 * reach.max(1e-3));
        let vertices = vertex_enumeration(&halfspaces, &interior_point, &tol)?;
        Ok(Self::from_parts(halfspaces, vertices, interior_point))
    }

    /// Builds the domain from already known vertices.
    pub fn from_parts(halfspaces: Halfspaces, vertices: Vec<Vec<f64>>, interior_point: Vec<f64>) -> Self {
        let bbox = AxisBox::bounding(&vertices)
            .unwrap_or_else(|| AxisBox { lo: interior_point.clone(), hi: interior_point.clone() });
        Self { halfspaces, bbox, interior_point, vertices }
    }

    pub fn from_box(bx: &AxisBox) -> Self {
        let mut vertices = Vec::with_capacity(1 << bx.dim());
        for mask in 0usize..(1 << bx.dim()) {
            vertices.push((0..bx.dim()).map(|j| if mask & (1 << j) != 0 { bx.hi[j] } else { bx.lo[j] }).collect());
        }
        Self { halfspaces: bx.halfspaces(), bbox: bx.clone(), interior_point: bx.center(), vertices }
    }

    pub fn dim(&self) -> usize {
        self.halfspaces.dim
    }

    /// Largest violation of `Ax <= b` in absolute (unnormalized) terms.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.halfspaces.rows.iter().zip(&self.halfspaces.rhs).map(|(a, b)| dot(a, x) - b).fold(0.0, f64::max)
    }
}

/// Sampling and local-search knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Sobol points; `None` means `64 * 2^min(p, 4)`.
    pub samples: Option<usize>,
    /// Iteration cap per local ascent.
    pub max_iters: usize,
    pub max_local_starts: usize,
    /// Eight times the samples and an extra local ascent from every vertex.
    pub paranoid: bool,
    /// First-order tolerance, relative to `max(1, |phi|)`.
    pub tol: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { samples: None, max_iters: 200, max_local_starts: 16, paranoid: false, tol: 1e-8 }
    }
}

impl Budget {
    pub fn default_samples(p: usize) -> usize {
        64 << p.min(4)
    }

    pub fn sample_count(&self, p: usize) -> usize {
        let base = self.samples.unwrap_or_else(|| Self::default_samples(p));
        if self.paranoid {
            8 * base
        } else {
            base
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let n = self.sample_count(p);
        if n < 2 * (p + 1) {
            return Err(Error::Budget(format!("{n} samples is below the minimum 2(p+1) = {}", 2 * (p + 1))));
        }
        if n > MAX_SAMPLES {
            return Err(Error::Budget(format!("{n} samples exceeds the maximum {MAX_SAMPLES}")));
        }
        if p as u32 >= sobol_burley::NUM_DIMENSIONS {
            return Err(Error::Budget(format!("dimension {p} exceeds the sampler's limit")));
        }
        if self.max_iters == 0 {
            return Err(Error::Budget("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub n_evals: usize,
    pub n_local_starts: usize,
    pub status: OptStatus,
}

struct Counter<'a, O: ?Sized> {
    objective: &'a O,
    evals: usize,
}

impl<O: Objective + ?Sized> Counter<'_, O> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = self.objective.value(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("objective is not finite at {x:?}")))
        }
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.objective.gradient(x)?;
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::Numerical(format!("objective gradient is not finite at {x:?}")))
        }
    }
}

/// Best of the sampled values and of the local ascents launched from the
/// locally maximal samples.
pub fn global_max<O: Objective + ?Sized>(objective: &O, domain: &PolytopeDomain, budget: &Budget) -> Result<OptResult> {
    let p = domain.dim();
    budget.validate(p)?;
    let mut counter = Counter { objective, evals: 0 };

    let n = budget.sample_count(p);
    let width: Vec<f64> = domain.bbox.lo.iter().zip(&domain.bbox.hi).map(|(l, h)| h - l).collect();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + domain.vertices.len());
    for i in 0..n {
        let x: Vec<f64> = (0..p)
            .map(|j| domain.bbox.lo[j] + sobol_burley::sample(i as u32, j as u32, SOBOL_SEED) as f64 * width[j])
            .collect();
        if domain.halfspaces.contains(&x, 0.0) {
            points.push(x);
        }
    }
    points.extend(domain.vertices.iter().cloned());
    if points.is_empty() {
        return Err(Error::NoFeasibleSample);
    }
    let values = points.iter().map(|x| counter.value(x)).collect::<Result<Vec<_>>>()?;

    let mut starts = local_maxima(&points, &values, &width, 2 * p + 2);
    starts.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    starts.truncate(budget.max_local_starts);
    let mut start_points: Vec<Vec<f64>> = starts.iter().map(|&i| points[i].clone()).collect();
    if budget.paranoid {
        start_points.extend(domain.vertices.iter().cloned());
    }

    let best_sample = (0..points.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let mut best = (points[best_sample].clone(), values[best_sample]);
    let mut all_converged = true;
    for start in &start_points {
        let (x, v, converged) = ascend(&mut counter, domain, start, budget)?;
        all_converged &= converged;
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(OptResult {
        argmax: best.0,
        value: best.1,
        n_evals: counter.evals,
        n_local_starts: start_points.len(),
        status: if all_converged { OptStatus::Converged } else { OptStatus::BudgetExhausted },
    })
}

/// One constrained local ascent from a feasible `start`.
pub fn local_max<O: Objective + ?Sized>(
    objective: &O,
    domain: &PolytopeDomain,
    start: &[f64],
    budget: &Budget,
) -> Result<OptResult> {
    let mut counter = Counter { objective, evals: 0 };
    let (argmax, value, converged) = ascend(&mut counter, domain, start, budget)?;
    Ok(OptResult {
        argmax,
        value,
        n_evals: counter.evals,
        n_local_starts: 1,
        status: if converged { OptStatus::Converged } else { OptStatus::BudgetExhausted },
    })
}

/// Indices of samples that are maximal among their symmetric k-nearest
/// neighbors (distances measured in bbox-normalized coordinates). Ties go to
/// the lower index.
fn local_maxima(points: &[Vec<f64>], values: &[f64], width: &[f64], k: usize) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n.saturating_sub(1));
    let scaled: Vec<Vec<f64>> =
        points.iter().map(|x| x.iter().zip(width).map(|(v, w)| if *w > 0.0 { v / w } else { 0.0 }).collect()).collect();
    let mut beaten = vec![false; n];
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dists.clear();
        for j in 0..n {
            if j != i {
                let d: f64 = scaled[i].iter().zip(&scaled[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                dists.push((d, j));
            }
        }
        if k > 0 && k < dists.len() {
            dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        // edge i-j in either direction: the loser of the pair is not a maximum
        for &(_, j) in dists.iter().take(k) {
            let i_wins = values[i] > values[j] || (values[i] == values[j] && i < j);
            if i_wins {
                beaten[j] = true;
            } else {
                beaten[i] = true;
            }
        }
    }
    (0..n).filter(|&i| !beaten[i]).collect()
}

/// Orthonormal rows spanning the given normals, skipping dependent ones.
/// Returns the basis and, per input, whether it was kept.
fn orthonormalize(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = dot(&v, &v).sqrt();
        let rn = dot(r, r).sqrt();
        if n > 1e-10 * rn.max(1e-300) {
            v.iter_mut().for_each(|a| *a /= n);
            basis.push(v);
            kept.push(true);
        } else {
            kept.push(false);
        }
    }
    (basis, kept)
}

/// Orthonormal basis of the complement of `span(q)` in `R^p`.
fn null_space(q: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    let mut all = q.to_vec();
    let mut z = Vec::new();
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let (b, kept) = orthonormalize(&{
            let mut rows = all.clone();
            rows.push(e);
            rows
        });
        if kept[kept.len() - 1] {
            let v = b[b.len() - 1].clone();
            all = b;
            z.push(v);
        }
        if all.len() == p {
            break;
        }
    }
    z
}

struct ActiveSet {
    ids: Vec<usize>,
    normals: Vec<Vec<f64>>,
}

impl ActiveSet {
    fn try_add(&mut self, id: usize, normal: &[f64]) -> bool {
        if self.ids.contains(&id) {
            return false;
        }
        let mut rows = self.normals.clone();
        rows.push(normal.to_vec());
        let (_, kept) = orthonormalize(&rows);
        if kept[kept.len() - 1] {
            self.ids.push(id);
            self.normals.push(normal.to_vec());
            true
        } else {
            false
        }
    }

    fn remove(&mut self, k: usize) {
        self.ids.remove(k);
        self.normals.remove(k);
    }
}

/// Active-set BFGS ascent. Returns `(x, phi(x), converged)`.
fn ascend<O: Objective + ?Sized>(
    counter: &mut Counter<'_, O>,
    domain: &PolytopeDomain,
    start: &[f64],
    budget: &Budget,
) -> Result<(Vec<f64>, f64, bool)> {
    let p = domain.dim();
    let hs = &domain.halfspaces;
    let unit: Vec<(Vec<f64>, f64)> = hs
        .rows
        .iter()
        .zip(&hs.rhs)
        .map(|(a, &b)| {
            let n = dot(a, a).sqrt();
            if n == 0.0 {
                (a.clone(), b)
            } else {
                (a.iter().map(|v| v / n).collect(), b / n)
            }
        })
        .collect();
    let scale = 1.0 + domain.bbox.lo.iter().chain(&domain.bbox.hi).fold(0.0f64, |m, v| m.max(v.abs()));
    let act_tol = 1e-10 * scale;

    let mut x = start.to_vec();
    // minimize psi = -phi
    let mut psi = -counter.value(&x)?;
    let mut g: Vec<f64> = counter.gradient(&x)?.iter().map(|v| -v).collect();
    let mut active = ActiveSet { ids: Vec::new(), normals: Vec::new() };
    for (i, (a, b)) in unit.iter().enumerate() {
        if a.iter().any(|v| *v != 0.0) && b - dot(a, &x) <= act_tol {
            active.try_add(i, a);
        }
    }
    let mut hess = DMatrix::<f64>::identity(p, p);
    let mut fresh_hess = true;

    for _ in 0..budget.max_iters {
        let (q, _) = orthonormalize(&active.normals);
        let z = null_space(&q, p);
        let reduced: Vec<f64> = z.iter().map(|zi| dot(zi, &g)).collect();
        let rnorm = dot(&reduced, &reduced).sqrt();
        if rnorm <= budget.tol * psi.abs().max(1.0) {
            // KKT: g + N^T lambda = 0 with lambda >= 0
            if active.ids.is_empty() {
                return Ok((x, -psi, true));
            }
            let k = active.ids.len();
            let nmat = DMatrix::from_fn(k, p, |r, c| active.normals[r][c]);
            let rhs = -(&nmat * DVector::from_column_slice(&g));
            let lambda = (&nmat * nmat.transpose())
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular active-set multiplier system".into()))?;
            let (worst, lmin) =
                lambda.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
            let gnorm = dot(&g, &g).sqrt();
            if lmin >= -budget.tol * gnorm.max(1.0) {
                return Ok((x, -psi, true));
            }
            active.remove(worst);
            continue;
        }

        // reduced quasi-Newton step d = -Z (Z^T B Z)^{-1} Z^T g
        let m = z.len();
        let zmat = DMatrix::from_fn(p, m, |r, c| z[c][r]);
        let reduced_h = zmat.transpose() * &hess * &zmat;
        let u = match reduced_h.cholesky() {
            Some(ch) => ch.solve(&DVector::from_column_slice(&reduced)),
            None => DVector::from_column_slice(&reduced),
        };
        let d: Vec<f64> = (&zmat * (-u)).iter().copied().collect();
        let slope = dot(&g, &d);
        if slope >= 0.0 {
            if fresh_hess {
                break;
            }
            hess = DMatrix::identity(p, p);
            fresh_hess = true;
            continue;
        }

        // ratio test against inactive constraints
        let mut alpha_max = f64::INFINITY;
        let mut blocking = None;
        for (i, (a, b)) in unit.iter().enumerate() {
            if active.ids.contains(&i) {
                continue;
            }
            let ad = dot(a, &d);
            if ad > 1e-14 * dot(&d, &d).sqrt() {
                let step = ((b - dot(a, &x)) / ad).max(0.0);
                if step < alpha_max {
                    alpha_max = step;
                    blocking = Some(i);
                }
            }
        }
        if alpha_max <= 1e-14 {
            match blocking {
                Some(i) if active.try_add(i, &unit[i].0) => continue,
                _ => break,
            }
        }

        let mut alpha = alpha_max.min(1.0);
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let pt = -counter.value(&xt)?;
            if pt <= psi + ARMIJO * alpha * slope {
                accepted = Some((xt, pt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((mut xt, mut pt)) = accepted else {
            if fresh_hess {
                break;
            }
            hess = DMatrix::identity(p, p);
            fresh_hess = true;
            continue;
        };
        // expand while the full step keeps improving and stays feasible
        if alpha == 1.0 && alpha_max > 1.0 {
            let mut a2 = 1.0f64;
            while a2 < alpha_max {
                let next = (2.0 * a2).min(alpha_max);
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + next * b).collect();
                let pn = -counter.value(&xn)?;
                if pn < pt {
                    xt = xn;
                    pt = pn;
                    a2 = next;
                    alpha = next;
                } else {
                    break;
                }
            }
        }
        let hit = alpha >= alpha_max;

        let gt: Vec<f64> = counter.gradient(&xt)?.iter().map(|v| -v).collect();
        let s = DVector::from_iterator(p, xt.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(p, gt.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh_hess {
                hess *= y.dot(&y) / sy;
            }
            let bs = &hess * &s;
            let sbs = s.dot(&bs);
            hess += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
            fresh_hess = false;
        }
        x = xt;
        psi = pt;
        g = gt;
        if hit {
            if let Some(i) = blocking {
                active.try_add(i, &unit[i].0);
            }
        }
    }
    Ok((x, -psi, false))
}
