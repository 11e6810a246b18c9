use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::Halfspaces;
use crate::error::{Error, Result};
use crate::network::dot;

/// Largest inscribed ball of `{x : Ax <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: Vec<f64>,
    /// Non-positive when the polytope is empty or has no interior.
    pub radius: f64,
}

fn lp_error(e: microlp::Error) -> Error {
    match e {
        microlp::Error::Unbounded => Error::Unbounded,
        other => Error::Lp(other.to_string()),
    }
}

/// Solves `max r  s.t.  A_i x + r |A_i| <= b_i` with `x` free.
///
/// The reported radius is recomputed from the returned center as the minimum
/// normalized slack, so it never overstates the true inscribed radius.
pub fn chebyshev_center(hs: &Halfspaces) -> Result<ChebyshevBall> {
    let p = hs.dim;
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..p).map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let r = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for (row, &rhs) in hs.rows.iter().zip(&hs.rhs) {
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            if rhs < 0.0 {
                return Ok(ChebyshevBall { center: vec![0.0; p], radius: rhs });
            }
            continue;
        }
        let mut terms: Vec<_> = xs.iter().zip(row).map(|(&v, &a)| (v, a / norm)).collect();
        terms.push((r, 1.0));
        problem.add_constraint(terms.as_slice(), ComparisonOp::Le, rhs / norm);
    }
    let outcome = problem.solve().map_err(lp_error)?;
    let solution = outcome.into_solution().map_err(|_| Error::Lp("chebyshev LP interrupted".into()))?;
    let center: Vec<f64> = xs.iter().map(|&v| solution.var_value(v)).collect();
    let radius = hs.min_slack(&center);
    Ok(ChebyshevBall { center, radius })
}

/// `(min, max)` of `dir . x` over the polytope.
pub fn linear_extent(hs: &Halfspaces, dir: &[f64]) -> Result<(f64, f64)> {
    let solve = |direction| -> Result<f64> {
        let mut problem = Problem::new(direction);
        let xs: Vec<_> = dir.iter().map(|&c| problem.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        for (row, &rhs) in hs.rows.iter().zip(&hs.rhs) {
            let terms: Vec<_> = xs.iter().zip(row).map(|(&v, &a)| (v, a)).collect();
            problem.add_constraint(terms.as_slice(), ComparisonOp::Le, rhs);
        }
        let sol = problem
            .solve()
            .map_err(lp_error)?
            .into_solution()
            .map_err(|_| Error::Lp("extent LP interrupted".into()))?;
        Ok(sol.objective())
    };
    Ok((solve(OptimizationDirection::Minimize)?, solve(OptimizationDirection::Maximize)?))
}
