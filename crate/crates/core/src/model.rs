//! Labeled state-space models.
//!
//! Every row and column of a model is bound to a physical boundary variable,
//! written `p[j].r`, `q[j].l`, ... with the pipe index `j` and the pipe side
//! (`l` at x = 0, `r` at x = L). A star junction additionally has a node
//! pressure, written `p[node]`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Pressure,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// Inlet, x = 0.
    Left,
    /// Outlet, x = L.
    Right,
}

/// A physical variable of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Boundary {
        quantity: Quantity,
        pipe: usize,
        side: Side,
    },
    NodePressure,
}

impl Variable {
    pub const fn p_left(pipe: usize) -> Self {
        Variable::Boundary {
            quantity: Quantity::Pressure,
            pipe,
            side: Side::Left,
        }
    }

    pub const fn p_right(pipe: usize) -> Self {
        Variable::Boundary {
            quantity: Quantity::Pressure,
            pipe,
            side: Side::Right,
        }
    }

    pub const fn q_left(pipe: usize) -> Self {
        Variable::Boundary {
            quantity: Quantity::Flow,
            pipe,
            side: Side::Left,
        }
    }

    pub const fn q_right(pipe: usize) -> Self {
        Variable::Boundary {
            quantity: Quantity::Flow,
            pipe,
            side: Side::Right,
        }
    }

    pub fn quantity(&self) -> Quantity {
        match self {
            Variable::Boundary { quantity, .. } => *quantity,
            Variable::NodePressure => Quantity::Pressure,
        }
    }

    pub fn pipe(&self) -> Option<usize> {
        match self {
            Variable::Boundary { pipe, .. } => Some(*pipe),
            Variable::NodePressure => None,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Boundary {
                quantity,
                pipe,
                side,
            } => {
                let q = match quantity {
                    Quantity::Pressure => 'p',
                    Quantity::Flow => 'q',
                };
                let s = match side {
                    Side::Left => 'l',
                    Side::Right => 'r',
                };
                write!(f, "{q}[{pipe}].{s}")
            }
            Variable::NodePressure => f.write_str("p[node]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseVariableError(pub String);

impl fmt::Display for ParseVariableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "`{}` is not a variable label (expected e.g. p[2].r)",
            self.0
        )
    }
}

impl std::error::Error for ParseVariableError {}

impl FromStr for Variable {
    type Err = ParseVariableError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let err = || ParseVariableError(s.to_string());
        if s == "p[node]" {
            return Ok(Variable::NodePressure);
        }
        let quantity = match s.chars().next() {
            Some('p') => Quantity::Pressure,
            Some('q') => Quantity::Flow,
            _ => return Err(err()),
        };
        let rest = s[1..].strip_prefix('[').ok_or_else(err)?;
        let (index, tail) = rest.split_once(']').ok_or_else(err)?;
        if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let pipe = index.parse().map_err(|_| err())?;
        let side = match tail {
            ".l" => Side::Left,
            ".r" => Side::Right,
            _ => return Err(err()),
        };
        Ok(Variable::Boundary {
            quantity,
            pipe,
            side,
        })
    }
}

/// `ẋ = A x + B u`, `y = C x` with every index bound to a [`Variable`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    states: Vec<Variable>,
    inputs: Vec<Variable>,
    outputs: Vec<Variable>,
}

impl LabeledStateSpaceModel {
    /// Validates dimensions, label uniqueness, and that every output is a
    /// state picked out by a unit row of `C`.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        states: Vec<Variable>,
        inputs: Vec<Variable>,
        outputs: Vec<Variable>,
    ) -> Result<Self> {
        let n = states.len();
        check_dim("A rows", n, a.nrows())?;
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("B columns", inputs.len(), b.ncols())?;
        check_dim("C rows", outputs.len(), c.nrows())?;
        check_dim("C columns", n, c.ncols())?;
        for labels in [&states, &inputs, &outputs] {
            let mut seen = HashSet::new();
            for v in labels.iter() {
                if !seen.insert(*v) {
                    return Err(Error::DuplicateLabel(v.to_string()));
                }
            }
        }
        for (row, out) in outputs.iter().enumerate() {
            let col = states
                .iter()
                .position(|s| s == out)
                .ok_or_else(|| Error::LabelMismatch(format!("output {out} is not a state")))?;
            let selector = (0..n).all(|j| c[(row, j)] == if j == col { 1.0 } else { 0.0 });
            if !selector {
                return Err(Error::LabelMismatch(format!(
                    "row {row} of C does not select state {out}"
                )));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            states,
            inputs,
            outputs,
        })
    }

    /// Builds `C` from the output labels.
    pub fn with_selected_outputs(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        states: Vec<Variable>,
        inputs: Vec<Variable>,
        outputs: Vec<Variable>,
    ) -> Result<Self> {
        let c = selector(&states, &outputs)?;
        Self::new(a, b, c, states, inputs, outputs)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn states(&self) -> &[Variable] {
        &self.states
    }

    pub fn inputs(&self) -> &[Variable] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Variable] {
        &self.outputs
    }

    pub fn state_dim(&self) -> usize {
        self.states.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn state_index(&self, v: Variable) -> Option<usize> {
        self.states.iter().position(|s| *s == v)
    }

    pub fn input_index(&self, v: Variable) -> Option<usize> {
        self.inputs.iter().position(|s| *s == v)
    }

    pub fn output_index(&self, v: Variable) -> Option<usize> {
        self.outputs.iter().position(|s| *s == v)
    }

    /// Reorders states by `order` (a permutation of state labels), keeping
    /// inputs and outputs. Equivalent to the similarity transform `P A Pᵀ`.
    pub fn permute_states(&self, order: &[Variable]) -> Result<Self> {
        check_dim("state permutation", self.state_dim(), order.len())?;
        let idx = order
            .iter()
            .map(|v| {
                self.state_index(*v)
                    .ok_or_else(|| Error::LabelMismatch(format!("{v} is not a state")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = idx.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.a[(idx[i], idx[j])]);
        let b = DMatrix::from_fn(n, self.input_dim(), |i, j| self.b[(idx[i], j)]);
        let c = DMatrix::from_fn(self.output_dim(), n, |i, j| self.c[(i, idx[j])]);
        Self::new(
            a,
            b,
            c,
            order.to_vec(),
            self.inputs.clone(),
            self.outputs.clone(),
        )
    }
}

fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Unit-row selector picking `outputs` out of `states`.
pub fn selector(states: &[Variable], outputs: &[Variable]) -> Result<DMatrix<f64>> {
    let mut c = DMatrix::zeros(outputs.len(), states.len());
    for (row, out) in outputs.iter().enumerate() {
        let col = states
            .iter()
            .position(|s| s == out)
            .ok_or_else(|| Error::LabelMismatch(format!("output {out} is not a state")))?;
        c[(row, col)] = 1.0;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for v in [
            Variable::p_left(0),
            Variable::p_right(12),
            Variable::q_left(3),
            Variable::q_right(7),
            Variable::NodePressure,
        ] {
            assert_eq!(v.to_string().parse::<Variable>().unwrap(), v);
        }
        assert_eq!(Variable::p_right(2).to_string(), "p[2].r");
        assert_eq!(Variable::q_left(0).to_string(), "q[0].l");
    }

    #[test]
    fn rejects_malformed_labels() {
        for s in ["", "x[0].l", "p0.l", "p[].l", "p[1].x", "p[-1].l", "q[1]"] {
            assert!(s.parse::<Variable>().is_err(), "{s}");
        }
    }

    #[test]
    fn rejects_duplicate_states() {
        let s = vec![Variable::p_right(0), Variable::p_right(0)];
        let err = LabeledStateSpaceModel::with_selected_outputs(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 0),
            s,
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateLabel(_)));
    }

    #[test]
    fn rejects_non_selector_output_rows() {
        let s = vec![Variable::p_right(0), Variable::q_left(0)];
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        let err = LabeledStateSpaceModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 0),
            c,
            s,
            vec![],
            vec![Variable::p_right(0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::LabelMismatch(_)));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let err = LabeledStateSpaceModel::with_selected_outputs(
            DMatrix::zeros(2, 3),
            DMatrix::zeros(2, 0),
            vec![Variable::p_right(0), Variable::q_left(0)],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
