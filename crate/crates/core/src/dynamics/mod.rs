//! Vector fields `x' = f(x)` with symbolic Jacobians.

mod expr;
mod parser;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use expr::{Expr, Func};
pub use parser::parse_expr;

use crate::error::{Error, Result};

/// Coupling strength of the coupled bilinear oscillator pair.
pub const COUPLING_EPS: f64 = 0.1;

pub const BUILTIN_NAMES: [&str; 3] = ["neg_cubic", "bilinear_osc", "coupled_bilinear"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Builtin(String),
    File(PathBuf),
    Inline,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Builtin(name) => write!(f, "builtin:{name}"),
            Source::File(path) => write!(f, "file:{}", path.display()),
            Source::Inline => f.write_str("inline"),
        }
    }
}

/// On-disk dynamics description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsFile {
    pub dim: usize,
    pub equations: Vec<String>,
}

/// An immutable vector field with one expression per state component and
/// the precomputed symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    dim: usize,
    components: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    source: Source,
}

impl DynamicsModel {
    fn from_components(components: Vec<Expr>, source: Source) -> Self {
        let dim = components.len();
        let jacobian = components.iter().map(|c| (0..dim).map(|k| c.derivative(k)).collect()).collect();
        Self { dim, components, jacobian, source }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Symbolic partial `d f_i / d x_j`.
    pub fn jacobian_expr(&self, i: usize, j: usize) -> &Expr {
        &self.jacobian[i][j]
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!("point has dimension {}, dynamics expects {}", x.len(), self.dim)));
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Analytic Jacobian, row `i` holding the partials of `f_i`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x)?;
        self.jacobian.iter().map(|row| row.iter().map(|e| e.eval(x)).collect()).collect()
    }

    /// `J(x)^T t`, the gradient of `t . f(x)`.
    pub fn jacobian_transpose_times(&self, x: &[f64], t: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.dim];
        for (row, ti) in self.jacobian.iter().zip(t) {
            if *ti == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(row) {
                *o += ti * e.eval(x)?;
            }
        }
        Ok(out)
    }

    pub fn to_file(&self) -> DynamicsFile {
        DynamicsFile { dim: self.dim, equations: self.components.iter().map(|c| c.to_string()).collect() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DynamicsFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let eqs: Vec<&str> = file.equations.iter().map(String::as_str).collect();
        parse_dynamics(&eqs, file.dim)
    }
}

/// Parses `p` component expressions into a model.
pub fn parse_dynamics(equations: &[&str], p: usize) -> Result<DynamicsModel> {
    if p == 0 {
        return Err(Error::Dimension("dynamics dimension must be positive".into()));
    }
    if equations.len() != p {
        return Err(Error::Arity { expected: p, found: equations.len() });
    }
    let components = equations.iter().map(|src| parse_expr(src, p)).collect::<Result<Vec<_>>>()?;
    Ok(DynamicsModel::from_components(components, Source::Inline))
}

pub fn load_dynamics(path: impl AsRef<Path>) -> Result<DynamicsModel> {
    let path = path.as_ref();
    let mut model = DynamicsModel::from_json(&std::fs::read_to_string(path)?)?;
    model.source = Source::File(path.to_path_buf());
    Ok(model)
}

/// Benchmark systems:
///
/// * `neg_cubic` (any `p`): `x_i' = -x_i^3`
/// * `bilinear_osc` (`p = 2`): `x1' = -x1 + x1 x2`, `x2' = -x2 - x1^2`
/// * `coupled_bilinear` (`p = 4`): two bilinear oscillators coupled through
///   `eps * x3` and `eps * x1` with `eps = 0.1`
pub fn builtin(name: &str, p: usize) -> Result<DynamicsModel> {
    let need = |want: usize| {
        if p == want {
            Ok(())
        } else {
            Err(Error::Dimension(format!("builtin `{name}` requires p = {want}, got {p}")))
        }
    };
    let equations: Vec<String> = match name {
        "neg_cubic" => {
            if p == 0 {
                return Err(Error::Dimension("neg_cubic requires p >= 1".into()));
            }
            (1..=p).map(|i| format!("-x{i}^3")).collect()
        }
        "bilinear_osc" => {
            need(2)?;
            vec!["-x1 + x1*x2".into(), "-x2 - x1^2".into()]
        }
        "coupled_bilinear" => {
            need(4)?;
            vec![
                "-x1 + x1*x2".into(),
                format!("-x2 - x1^2 + {COUPLING_EPS}*x3"),
                "-x3 + x3*x4".into(),
                format!("-x4 - x3^2 + {COUPLING_EPS}*x1"),
            ]
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    let eqs: Vec<&str> = equations.iter().map(String::as_str).collect();
    let mut model = parse_dynamics(&eqs, p)?;
    model.source = Source::Builtin(name.to_string());
    Ok(model)
}
