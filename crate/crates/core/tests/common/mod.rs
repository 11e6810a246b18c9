#![allow(dead_code)]

use lyapunov_verify::geometry::{AxisBox, Halfspaces};
use lyapunov_verify::gopt::{FnObjective, PolytopeDomain};

pub type ScalarFn = fn(&[f64]) -> f64;
pub type GradFn = fn(&[f64]) -> Vec<f64>;

/// A planar objective/polytope pair for optimizer checks.
pub struct Case {
    pub name: &'static str,
    pub domain: PolytopeDomain,
    pub f: ScalarFn,
    pub grad: GradFn,
}

impl Case {
    pub fn objective(&self) -> FnObjective<ScalarFn, GradFn> {
        FnObjective { f: self.f, grad: self.grad }
    }
}

fn polygon(rows: &[([f64; 2], f64)], interior: [f64; 2]) -> PolytopeDomain {
    let mut hs = Halfspaces::new(2);
    for (a, b) in rows {
        hs.push(a.to_vec(), *b);
    }
    PolytopeDomain::new(hs, interior.to_vec()).unwrap()
}

fn square(lo: f64, hi: f64) -> PolytopeDomain {
    PolytopeDomain::from_box(&AxisBox::cube(lo, hi, 2).unwrap())
}

/// `{x1 >= 0, x2 >= 0, x1 + x2 <= 2}`
pub fn triangle() -> PolytopeDomain {
    polygon(&[([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0), ([1.0, 1.0], 2.0)], [0.5, 0.5])
}

fn hexagon() -> PolytopeDomain {
    let rows: Vec<([f64; 2], f64)> = (0..6)
        .map(|k| {
            let t = std::f64::consts::PI / 3.0 * k as f64 + 0.2;
            ([t.cos(), t.sin()], 1.5)
        })
        .collect();
    polygon(&rows, [0.1, -0.2])
}

/// Ten objective/polytope pairs: linear, concave quadratic, cubic and
/// multimodal trigonometric.
pub fn battery() -> Vec<Case> {
    vec![
        Case {
            name: "linear on unit square",
            domain: square(0.0, 1.0),
            f: |x| x[0] + 2.0 * x[1],
            grad: |_| vec![1.0, 2.0],
        },
        Case {
            name: "linear on hexagon",
            domain: hexagon(),
            f: |x| -0.7 * x[0] + 0.4 * x[1] + 1.0,
            grad: |_| vec![-0.7, 0.4],
        },
        Case {
            name: "concave quadratic, interior peak",
            domain: square(0.0, 1.0),
            f: |x| -((x[0] - 0.3).powi(2) + (x[1] - 0.3).powi(2)),
            grad: |x| vec![-2.0 * (x[0] - 0.3), -2.0 * (x[1] - 0.3)],
        },
        Case {
            name: "concave quadratic, peak outside triangle",
            domain: triangle(),
            f: |x| -(x[0] - 2.0).powi(2) - 2.0 * (x[1] - 1.5).powi(2),
            grad: |x| vec![-2.0 * (x[0] - 2.0), -4.0 * (x[1] - 1.5)],
        },
        Case {
            name: "cubic on triangle",
            domain: triangle(),
            f: |x| x[0] * x[1] - x[0].powi(3),
            grad: |x| vec![x[1] - 3.0 * x[0] * x[0], x[0]],
        },
        Case {
            name: "cubic with two bumps",
            domain: polygon(
                &[([-1.0, 0.0], 2.0), ([1.0, 0.0], 2.0), ([0.0, -1.0], 1.0), ([1.0, 2.0], 3.0)],
                [0.0, 0.0],
            ),
            f: |x| -x[0].powi(3) + 3.0 * x[0] - x[1] * x[1] + 0.2 * x[0] * x[1],
            grad: |x| vec![-3.0 * x[0] * x[0] + 3.0 + 0.2 * x[1], -2.0 * x[1] + 0.2 * x[0]],
        },
        Case {
            name: "sin sum on [0,2]^2",
            domain: square(0.0, 2.0),
            f: |x| (5.0 * x[0]).sin() + (5.0 * x[1]).sin(),
            grad: |x| vec![5.0 * (5.0 * x[0]).cos(), 5.0 * (5.0 * x[1]).cos()],
        },
        Case {
            name: "trig product on hexagon",
            domain: hexagon(),
            f: |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + 0.1 * x[0],
            grad: |x| {
                vec![
                    3.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos() + 0.1,
                    -2.0 * (3.0 * x[0]).sin() * (2.0 * x[1]).sin(),
                ]
            },
        },
        Case {
            name: "rastrigin-like bowl",
            domain: square(-1.0, 1.0),
            f: |x| {
                let tau = 2.0 * std::f64::consts::PI;
                -(x[0] - 0.37).powi(2) - (x[1] + 0.21).powi(2) + 0.3 * ((tau * x[0]).cos() + (tau * x[1]).cos())
            },
            grad: |x| {
                let tau = 2.0 * std::f64::consts::PI;
                vec![
                    -2.0 * (x[0] - 0.37) - 0.3 * tau * (tau * x[0]).sin(),
                    -2.0 * (x[1] + 0.21) - 0.3 * tau * (tau * x[1]).sin(),
                ]
            },
        },
        Case {
            name: "trig on thin rotated strip",
            domain: polygon(
                &[([1.0, -1.0], 0.15), ([-1.0, 1.0], 0.15), ([1.0, 1.0], 3.0), ([-1.0, -1.0], 3.0)],
                [0.0, 0.0],
            ),
            f: |x| (4.0 * x[0]).sin() + 0.5 * (3.0 * x[1]).cos(),
            grad: |x| vec![4.0 * (4.0 * x[0]).cos(), -1.5 * (3.0 * x[1]).sin()],
        },
    ]
}

/// Maximum of `f` over a planar polytope: a dense grid over the bounding box
/// (feasible points only) plus dense sampling of every edge.
pub fn grid_oracle_2d(domain: &PolytopeDomain, f: ScalarFn, n: usize) -> f64 {
    let (lo, hi) = (&domain.bbox.lo, &domain.bbox.hi);
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = [lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64, lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64];
            if domain.halfspaces.contains(&x, 1e-12) {
                best = best.max(f(&x));
            }
        }
    }
    let verts = ccw(&domain.vertices);
    let m = 20 * n;
    for k in 0..verts.len() {
        let (a, b) = (&verts[k], &verts[(k + 1) % verts.len()]);
        for s in 0..=m {
            let t = s as f64 / m as f64;
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            best = best.max(f(&x));
        }
    }
    best
}

pub fn ccw(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = points.iter().map(|v| v[1]).sum::<f64>() / n;
    let mut out = points.to_vec();
    out.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).total_cmp(&(b[1] - cy).atan2(b[0] - cx)));
    out
}

/// Area of a convex polygon given its vertices in any order.
pub fn polygon_area(points: &[Vec<f64>]) -> f64 {
    let v = ccw(points);
    let mut a = 0.0;
    for k in 0..v.len() {
        let (p, q) = (&v[k], &v[(k + 1) % v.len()]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a.abs()
}
