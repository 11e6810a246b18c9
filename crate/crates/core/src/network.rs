//! Single-hidden-layer ReLU networks used as Lyapunov candidates.
//!
//! The network computes
//!
//! ```text
//! V(x) = sum_l w2[l] * max(0, W1[l] . x + b1[l]) + b2
//! ```
//!
//! On the interior of every region of the arrangement cut out by the hidden
//! neurons, the activation pattern is constant and `V` is affine, so its
//! gradient is a function of the pattern alone (see [`ShallowReluNet::region_gradient`]).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk layout of a weight file. `W1` is stored one hidden neuron per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub input_dim: usize,
    pub hidden_dim: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// A validated shallow ReLU network `R^p -> R` with `n` hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowReluNet {
    input_dim: usize,
    hidden_dim: usize,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Binary on/off state of every hidden unit. Bit `l` is set iff the
/// pre-activation of unit `l` is strictly positive.
/// Serialized as its bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ActivationPattern(Vec<bool>);

impl ActivationPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, l: usize) -> bool {
        self.0[l]
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid pattern character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl From<ActivationPattern> for String {
    fn from(p: ActivationPattern) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for ActivationPattern {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::from_bitstring(&s)
    }
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Parse(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ShallowReluNet {
    pub fn new(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        let hidden_dim = w1.len();
        if hidden_dim == 0 {
            return Err(Error::Dimension("network needs at least one hidden unit".into()));
        }
        let input_dim = w1[0].len();
        if input_dim == 0 {
            return Err(Error::Dimension("network needs at least one input".into()));
        }
        Self::from_file(NetworkFile { input_dim, hidden_dim, w1, b1, w2, b2 })
    }

    /// Validates a deserialized weight file.
    pub fn from_file(file: NetworkFile) -> Result<Self> {
        let NetworkFile { input_dim: p, hidden_dim: n, w1, b1, w2, b2 } = file;
        if p == 0 || n == 0 {
            return Err(Error::Dimension("input_dim and hidden_dim must be positive".into()));
        }
        if w1.len() != n {
            return Err(Error::Dimension(format!("W1 has {} rows, hidden_dim is {n}", w1.len())));
        }
        for (l, row) in w1.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("W1 row {l} has {} entries, input_dim is {p}", row.len())));
            }
            check_finite(&format!("W1[{l}]"), row)?;
        }
        if b1.len() != n {
            return Err(Error::Dimension(format!("b1 has {} entries, hidden_dim is {n}", b1.len())));
        }
        if w2.len() != n {
            return Err(Error::Dimension(format!("w2 has {} entries, hidden_dim is {n}", w2.len())));
        }
        check_finite("b1", &b1)?;
        check_finite("w2", &w2)?;
        check_finite("b2", &[b2])?;
        Ok(Self { input_dim: p, hidden_dim: n, w1, b1, w2, b2 })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serializes")
    }

    /// The `p`-dimensional L1-norm network: rows `e1, -e1, e2, -e2, ...`,
    /// unit output weights and zero biases, so that `V(x) = |x|_1`.
    pub fn l1_norm(p: usize) -> Self {
        let mut w1 = Vec::with_capacity(2 * p);
        for j in 0..p {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; p];
                row[j] = sign;
                w1.push(row);
            }
        }
        Self::new(w1, vec![0.0; 2 * p], vec![1.0; 2 * p], 0.0).expect("l1 network is valid")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn w1(&self) -> &[Vec<f64>] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "point has dimension {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Pre-activation `W1[l] . x + b1[l]` of hidden unit `l`.
    pub fn preactivation(&self, l: usize, x: &[f64]) -> f64 {
        dot(&self.w1[l], x) + self.b1[l]
    }

    pub fn eval_v(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok((0..self.hidden_dim).map(|l| self.w2[l] * self.preactivation(l, x).max(0.0)).sum::<f64>() + self.b2)
    }

    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        self.check_point(x)?;
        Ok(ActivationPattern((0..self.hidden_dim).map(|l| self.preactivation(l, x) > 0.0).collect()))
    }

    /// Gradient of `V` on the region with the given pattern:
    /// `g_j = sum_l bits[l] * w2[l] * W1[l][j]`.
    pub fn region_gradient(&self, pattern: &ActivationPattern) -> Result<Vec<f64>> {
        if pattern.len() != self.hidden_dim {
            return Err(Error::Dimension(format!(
                "pattern has {} bits, network has {} hidden units",
                pattern.len(),
                self.hidden_dim
            )));
        }
        let mut g = vec![0.0; self.input_dim];
        for (l, row) in self.w1.iter().enumerate() {
            if pattern.get(l) {
                for (gj, wj) in g.iter_mut().zip(row) {
                    *gj += self.w2[l] * wj;
                }
            }
        }
        Ok(g)
    }

    /// Lie derivative `grad V . f` on the region with the given pattern.
    pub fn eval_v_dot(&self, pattern: &ActivationPattern, f_val: &[f64]) -> Result<f64> {
        self.check_point(f_val)?;
        let g = self.region_gradient(pattern)?;
        Ok(dot(&g, f_val))
    }

    /// Lipschitz constant `sum_l |w2[l]| * |W1[l]|_2` of `V`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.w1.iter().zip(&self.w2).map(|(row, w)| w.abs() * dot(row, row).sqrt()).sum()
    }
}

/// Reads and validates a JSON weight file.
pub fn load_network(path: impl AsRef<Path>) -> Result<ShallowReluNet> {
    let text = std::fs::read_to_string(path)?;
    ShallowReluNet::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const L1_P2: &str = r#"{
        "input_dim": 2, "hidden_dim": 4,
        "W1": [[1, 0], [-1, 0], [0, 1], [0, -1]],
        "b1": [0, 0, 0, 0], "w2": [1, 1, 1, 1], "b2": 0
    }"#;

    #[test]
    fn parses_l1_file() {
        let net = ShallowReluNet::from_json(L1_P2).unwrap();
        assert_eq!(net, ShallowReluNet::l1_norm(2));
        assert_eq!(net.eval_v(&[3.0, -4.0]).unwrap(), 7.0);
    }

    #[test]
    fn row_count_mismatch_is_dimension_error() {
        let text = r#"{"input_dim": 2, "hidden_dim": 3, "W1": [[1, 0], [0, 1]],
            "b1": [0, 0, 0], "w2": [1, 1, 1], "b2": 0}"#;
        assert!(matches!(ShallowReluNet::from_json(text), Err(Error::Dimension(_))));
    }

    #[test]
    fn nan_is_parse_error() {
        let text = L1_P2.replace("\"b2\": 0", "\"b2\": NaN");
        assert!(matches!(ShallowReluNet::from_json(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn scientific_notation_accepted() {
        let text = L1_P2.replace("\"b2\": 0", "\"b2\": 2.5e-1");
        assert_eq!(ShallowReluNet::from_json(&text).unwrap().b2(), 0.25);
    }

    #[test]
    fn dead_hidden_layer_is_constant() {
        let net = ShallowReluNet::new(vec![vec![1.0, 2.0]; 3], vec![0.5; 3], vec![0.0; 3], 1.5).unwrap();
        for x in [[0.0, 0.0], [3.0, -7.0], [-1e3, 2e3]] {
            assert_eq!(net.eval_v(&x).unwrap(), 1.5);
        }
    }

    #[test]
    fn pattern_convention() {
        let net = ShallowReluNet::l1_norm(2);
        let pat = net.activation_pattern(&[1.0, 1.0]).unwrap();
        assert_eq!(pat.to_string(), "1010");
        // on x1 = 0 both units of the first pair are off
        let pat = net.activation_pattern(&[0.0, 1.0]).unwrap();
        assert_eq!(pat.to_string(), "0010");

        let net = ShallowReluNet::new(vec![vec![0.0; 3]; 4], vec![5.0; 4], vec![1.0; 4], 0.0).unwrap();
        assert_eq!(net.activation_pattern(&[1.0, -2.0, 3.0]).unwrap(), ActivationPattern::ones(4));
    }

    #[test]
    fn region_gradient_and_lie_derivative() {
        let net = ShallowReluNet::l1_norm(2);
        let pos = ActivationPattern::from_bitstring("1010").unwrap();
        assert_eq!(net.region_gradient(&pos).unwrap(), vec![1.0, 1.0]);
        assert_eq!(net.region_gradient(&ActivationPattern::zeros(4)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.eval_v_dot(&pos, &[-1.0, -1.0]).unwrap(), -2.0);
        assert_eq!(net.eval_v_dot(&ActivationPattern::zeros(4), &[5.0, -3.0]).unwrap(), 0.0);
        // bilinear oscillator at (1, 1): f = (-1 + 1, -1 - 1)
        assert_eq!(net.eval_v_dot(&pos, &[0.0, -2.0]).unwrap(), -2.0);
    }

    #[test]
    fn dimension_errors() {
        let net = ShallowReluNet::l1_norm(2);
        assert!(matches!(net.eval_v(&[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(net.activation_pattern(&[1.0, 2.0, 3.0]), Err(Error::Dimension(_))));
        assert!(matches!(net.region_gradient(&ActivationPattern::zeros(3)), Err(Error::Dimension(_))));
    }
}
