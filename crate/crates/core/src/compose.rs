//! Composite models for series chains, n-pipe joints and n-to-m star
//! junctions.
//!
//! Every builder assembles its matrices from the per-pipe ODEs after
//! substituting the internal variables (boundary values fixed by neighbours)
//! by expressions in states and total inputs. The joint and star builders
//! then check the result entry-wise against the closed-form block
//! realizations before returning it.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{LabeledStateSpaceModel, Variable};
use crate::pipe::{compute_coefficients, LinearCoefficients, OperatingPoint, PipeParameters};

/// Relative tolerance of the assembled-vs-closed-form check in the builders.
const REALIZATION_TOLERANCE: f64 = 1e-12;

/// Relative threshold below which a cofactor total counts as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Pipes `P_0 .. P_{n-1}` connected outlet to inlet.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    pipes: Vec<LinearCoefficients>,
}

impl SeriesSpec {
    pub fn new(pipes: Vec<LinearCoefficients>) -> Result<Self> {
        if pipes.is_empty() {
            return Err(Error::EmptyNetwork("series needs at least one pipe"));
        }
        for c in &pipes {
            c.validate()?;
        }
        Ok(Self { pipes })
    }

    /// One pipe cut into `n` equal sections sharing the operating point.
    pub fn uniform_split(params: &PipeParameters, op: &OperatingPoint, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNetwork("series needs at least one pipe"));
        }
        let section = PipeParameters {
            length: params.length / n as f64,
            elevation_change: params.elevation_change / n as f64,
            ..*params
        };
        let c = compute_coefficients(&section, op)?;
        Self::new(vec![c; n])
    }

    pub fn pipes(&self) -> &[LinearCoefficients] {
        &self.pipes
    }

    pub fn len(&self) -> usize {
        self.pipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipes.is_empty()
    }
}

/// Pipes `P_1 .. P_n` merging into the downstream pipe `P_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    downstream: LinearCoefficients,
    joining: Vec<LinearCoefficients>,
}

impl JointSpec {
    pub fn new(downstream: LinearCoefficients, joining: Vec<LinearCoefficients>) -> Result<Self> {
        if joining.is_empty() {
            return Err(Error::EmptyNetwork("joint needs at least one joining pipe"));
        }
        downstream.validate()?;
        for (k, c) in joining.iter().enumerate() {
            c.validate()?;
            nonzero_pressure_rate(k + 1, c)?;
        }
        nonzero_pressure_rate(0, &downstream)?;
        Ok(Self {
            downstream,
            joining,
        })
    }

    /// Number of joining pipes `n`.
    pub fn joining_count(&self) -> usize {
        self.joining.len()
    }

    pub fn downstream(&self) -> &LinearCoefficients {
        &self.downstream
    }

    pub fn joining(&self) -> &[LinearCoefficients] {
        &self.joining
    }

    /// Coefficients of pipe `P_j`, `j = 0` being the downstream pipe.
    pub fn pipe(&self, j: usize) -> &LinearCoefficients {
        if j == 0 {
            &self.downstream
        } else {
            &self.joining[j - 1]
        }
    }

    pub fn joining_pressure_rates(&self) -> Vec<f64> {
        self.joining.iter().map(|c| c.pressure_rate).collect()
    }
}

/// Joining pipes `P_1 .. P_n` meeting branching pipes `P_{n+1} .. P_{n+m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSpec {
    joining: Vec<LinearCoefficients>,
    branching: Vec<LinearCoefficients>,
}

impl StarSpec {
    pub fn new(
        joining: Vec<LinearCoefficients>,
        branching: Vec<LinearCoefficients>,
    ) -> Result<Self> {
        if joining.is_empty() {
            return Err(Error::EmptyNetwork("star needs at least one joining pipe"));
        }
        if branching.is_empty() {
            return Err(Error::EmptyNetwork(
                "star needs at least one branching pipe",
            ));
        }
        for (k, c) in joining.iter().enumerate() {
            c.validate()?;
            nonzero_pressure_rate(k + 1, c)?;
        }
        for c in &branching {
            c.validate()?;
        }
        Ok(Self { joining, branching })
    }

    pub fn joining_count(&self) -> usize {
        self.joining.len()
    }

    pub fn branching_count(&self) -> usize {
        self.branching.len()
    }

    pub fn joining(&self) -> &[LinearCoefficients] {
        &self.joining
    }

    pub fn branching(&self) -> &[LinearCoefficients] {
        &self.branching
    }

    /// Coefficients of pipe `P_j`, `j ∈ 1..=n+m`.
    pub fn pipe(&self, j: usize) -> &LinearCoefficients {
        let n = self.joining.len();
        if j <= n {
            &self.joining[j - 1]
        } else {
            &self.branching[j - n - 1]
        }
    }

    pub fn joining_pressure_rates(&self) -> Vec<f64> {
        self.joining.iter().map(|c| c.pressure_rate).collect()
    }
}

fn nonzero_pressure_rate(pipe: usize, c: &LinearCoefficients) -> Result<()> {
    if c.pressure_rate == 0.0 {
        return Err(Error::InvalidParameter {
            field: format!("pipes[{pipe}].pressure_rate"),
            value: 0.0,
            reason: "junction pipes need a nonzero pressure-rate coefficient",
        });
    }
    Ok(())
}

/// Products `Π_{i≠k} c_i` of a list of pressure-rate coefficients and their
/// sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Cofactors {
    pub per_pipe: Vec<f64>,
    pub total: f64,
}

impl Cofactors {
    /// A total that is negligible against the largest product.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.scale();
        self.total.abs() <= DEGENERACY_TOLERANCE * scale || !self.total.is_finite()
    }

    pub fn scale(&self) -> f64 {
        self.per_pipe.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            return Err(Error::DegenerateJunction {
                total: self.total,
                scale: self.scale(),
            });
        }
        Ok(())
    }
}

/// Prefix/suffix products, so a zero coefficient never ends up in a divisor.
/// For a single coefficient the product is empty and equals one.
pub fn cofactor_products(coefficients: &[f64]) -> Cofactors {
    let n = coefficients.len();
    let mut suffix = vec![1.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * coefficients[k];
    }
    let mut prefix = 1.0;
    let mut per_pipe = Vec::with_capacity(n);
    for k in 0..n {
        per_pipe.push(prefix * suffix[k + 1]);
        prefix *= coefficients[k];
    }
    let total = per_pipe.iter().sum();
    Cofactors { per_pipe, total }
}

/// Outlet flows `q_{k,r}` of joining pipes sharing one outlet pressure, from
/// the downstream inlet flow and the joining pipes' inlet flows.
pub fn eliminate_joint_flows(
    pressure_rates: &[f64],
    downstream_flow: f64,
    inlet_flows: &[f64],
) -> Result<Vec<f64>> {
    if pressure_rates.is_empty() {
        return Err(Error::EmptyNetwork(
            "junction needs at least one joining pipe",
        ));
    }
    if pressure_rates.len() != inlet_flows.len() {
        return Err(Error::DimensionMismatch {
            what: "joining inlet flows".into(),
            expected: pressure_rates.len(),
            found: inlet_flows.len(),
        });
    }
    let cof = cofactor_products(pressure_rates);
    cof.require_nondegenerate()?;
    Ok(outlet_flows(&cof, downstream_flow, inlet_flows))
}

fn outlet_flows(cof: &Cofactors, downstream_flow: f64, inlet_flows: &[f64]) -> Vec<f64> {
    let n = inlet_flows.len();
    (0..n)
        .map(|k| {
            let others: f64 = (0..n).filter(|&i| i != k).map(|i| inlet_flows[i]).sum();
            let pk = cof.per_pipe[k];
            (pk * (downstream_flow - others) + (cof.total - pk) * inlet_flows[k]) / cof.total
        })
        .collect()
}

/// Linear combination of variables.
type Terms = Vec<(f64, Variable)>;

/// Turns per-pipe ODE right-hand sides into rows of `A` and `B`, expanding
/// internal variables through their substitutions.
struct Assembler {
    states: Vec<Variable>,
    inputs: Vec<Variable>,
    substitutions: HashMap<Variable, Terms>,
}

impl Assembler {
    fn new(states: Vec<Variable>, inputs: Vec<Variable>) -> Self {
        Self {
            states,
            inputs,
            substitutions: HashMap::new(),
        }
    }

    fn substitute(&mut self, internal: Variable, terms: Terms) {
        self.substitutions.insert(internal, terms);
    }

    fn accumulate(&self, coef: f64, v: Variable, a_row: &mut [f64], b_row: &mut [f64]) {
        if let Some(i) = self.states.iter().position(|s| *s == v) {
            a_row[i] += coef;
        } else if let Some(i) = self.inputs.iter().position(|s| *s == v) {
            b_row[i] += coef;
        } else if let Some(terms) = self.substitutions.get(&v) {
            for (c, w) in terms {
                self.accumulate(coef * c, *w, a_row, b_row);
            }
        } else {
            // Builders define every variable their ODEs mention.
            unreachable!("variable {v} has no state, input or substitution");
        }
    }

    /// Right-hand side of the ODE governing state `v` of pipe `pipe`.
    fn ode(v: Variable, c: &LinearCoefficients) -> Terms {
        let j = v.pipe().expect("states are pipe boundary variables");
        if v == Variable::p_right(j) {
            vec![
                (c.pressure_rate, Variable::q_right(j)),
                (-c.pressure_rate, Variable::q_left(j)),
            ]
        } else if v == Variable::q_left(j) {
            vec![
                (c.outlet_pressure_gain, Variable::p_right(j)),
                (c.inlet_pressure_gain, Variable::p_left(j)),
                (c.flow_damping, Variable::q_left(j)),
            ]
        } else {
            unreachable!("{v} is not a pipe state")
        }
    }

    fn finish(
        self,
        coefficients: impl Fn(usize) -> LinearCoefficients,
        outputs: Vec<Variable>,
    ) -> Result<LabeledStateSpaceModel> {
        let n = self.states.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, self.inputs.len());
        for (row, v) in self.states.iter().enumerate() {
            let c = coefficients(v.pipe().expect("pipe state"));
            let mut a_row = vec![0.0; n];
            let mut b_row = vec![0.0; self.inputs.len()];
            for (coef, w) in Self::ode(*v, &c) {
                self.accumulate(coef, w, &mut a_row, &mut b_row);
            }
            for (j, val) in a_row.into_iter().enumerate() {
                a[(row, j)] = val;
            }
            for (j, val) in b_row.into_iter().enumerate() {
                b[(row, j)] = val;
            }
        }
        LabeledStateSpaceModel::with_selected_outputs(a, b, self.states, self.inputs, outputs)
    }
}

/// Series chain with state `[p_{0,r} … p_{n−1,r}, q_{0,ℓ} … q_{n−1,ℓ}]`,
/// input `[p_{0,ℓ}, q_{n−1,r}]` and output `[p_{n−1,r}, q_{0,ℓ}]`.
pub fn build_series(spec: &SeriesSpec) -> Result<LabeledStateSpaceModel> {
    let n = spec.len();
    let states: Vec<Variable> = (0..n)
        .map(Variable::p_right)
        .chain((0..n).map(Variable::q_left))
        .collect();
    let inputs = vec![Variable::p_left(0), Variable::q_right(n - 1)];
    let outputs = vec![Variable::p_right(n - 1), Variable::q_left(0)];
    let mut asm = Assembler::new(states, inputs);
    for j in 1..n {
        asm.substitute(Variable::p_left(j), vec![(1.0, Variable::p_right(j - 1))]);
        asm.substitute(Variable::q_right(j - 1), vec![(1.0, Variable::q_left(j))]);
    }
    asm.finish(|j| spec.pipes[j], outputs)
}

/// Cofactor substitution for every joining outlet flow: coefficients of
/// `q_{k,r}` on `(downstream flow, q_{1,ℓ} … q_{n,ℓ})`, obtained by
/// evaluating [`eliminate_joint_flows`] on unit vectors.
fn outlet_flow_terms(
    rates: &[f64],
    downstream: &[Variable],
    first_pipe: usize,
) -> Result<Vec<Terms>> {
    let n = rates.len();
    let cof = cofactor_products(rates);
    cof.require_nondegenerate()?;
    let mut terms = vec![Terms::new(); n];
    let mut unit = vec![0.0; n];
    // downstream inflow (q_{0,ℓ}, or the sum of branching inflows)
    for (k, q) in outlet_flows(&cof, 1.0, &unit).into_iter().enumerate() {
        for v in downstream {
            terms[k].push((q, *v));
        }
    }
    for i in 0..n {
        unit[i] = 1.0;
        for (k, q) in outlet_flows(&cof, 0.0, &unit).into_iter().enumerate() {
            terms[k].push((q, Variable::q_left(first_pipe + i)));
        }
        unit[i] = 0.0;
    }
    Ok(terms)
}

fn joint_labels(n: usize) -> (Vec<Variable>, Vec<Variable>, Vec<Variable>) {
    let states = [Variable::p_right(0), Variable::p_right(1)]
        .into_iter()
        .chain((0..=n).map(Variable::q_left))
        .collect();
    let inputs = (1..=n)
        .map(Variable::p_left)
        .chain([Variable::q_right(0)])
        .collect();
    let outputs = [Variable::p_right(0)]
        .into_iter()
        .chain((1..=n).map(Variable::q_left))
        .collect();
    (states, inputs, outputs)
}

/// Joint realization assembled from the per-pipe ODEs, pressure continuity at
/// the junction and the cofactor-eliminated outlet flows.
pub fn assemble_joint(spec: &JointSpec) -> Result<LabeledStateSpaceModel> {
    let n = spec.joining_count();
    let (states, inputs, outputs) = joint_labels(n);
    let mut asm = Assembler::new(states, inputs);
    asm.substitute(Variable::p_left(0), vec![(1.0, Variable::p_right(1))]);
    for k in 2..=n {
        asm.substitute(Variable::p_right(k), vec![(1.0, Variable::p_right(1))]);
    }
    let terms = outlet_flow_terms(&spec.joining_pressure_rates(), &[Variable::q_left(0)], 1)?;
    for (k, t) in terms.into_iter().enumerate() {
        asm.substitute(Variable::q_right(k + 1), t);
    }
    asm.finish(|j| *spec.pipe(j), outputs)
}

/// `a = c_p⁽¹⁾ · (Σ_j Π_{i≠j} c_p⁽ⁱ⁾)⁻¹ · Π_{i≥2} c_p⁽ⁱ⁾`.
fn junction_gain(rates: &[f64]) -> Result<f64> {
    let cof = cofactor_products(rates);
    cof.require_nondegenerate()?;
    let tail: f64 = rates[1..].iter().product();
    Ok(rates[0] * cof.total.recip() * tail)
}

/// Joint realization written directly from the block formulas
/// (`A₁₂`, `A₂₁`, `A₂₂`, `B₁`, `B₂`, `C`).
pub fn joint_block_formula(spec: &JointSpec) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = spec.joining_count();
    let a_gain = junction_gain(&spec.joining_pressure_rates())?;
    let c0 = spec.downstream();

    let mut a12 = DMatrix::zeros(2, n + 1);
    a12[(0, 0)] = -c0.pressure_rate;
    a12[(1, 0)] = a_gain;
    for k in 1..=n {
        a12[(1, k)] = -a_gain;
    }
    let mut a21t = DMatrix::zeros(2, n + 1);
    a21t[(0, 0)] = c0.outlet_pressure_gain;
    a21t[(1, 0)] = c0.inlet_pressure_gain;
    for k in 1..=n {
        a21t[(1, k)] = spec.pipe(k).outlet_pressure_gain;
    }
    let a22 = DMatrix::from_diagonal(&DVector::from_iterator(
        n + 1,
        (0..=n).map(|j| spec.pipe(j).flow_damping),
    ));
    let mut b1 = DMatrix::zeros(2, n + 1);
    b1[(0, n)] = c0.pressure_rate;
    let mut b2 = DMatrix::zeros(n + 1, n + 1);
    for k in 1..=n {
        b2[(k, k - 1)] = spec.pipe(k).inlet_pressure_gain;
    }

    let dim = n + 3;
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 2), (2, n + 1)).copy_from(&a12);
    a.view_mut((2, 0), (n + 1, 2)).copy_from(&a21t.transpose());
    a.view_mut((2, 2), (n + 1, n + 1)).copy_from(&a22);
    let mut b = DMatrix::zeros(dim, n + 1);
    b.view_mut((0, 0), (2, n + 1)).copy_from(&b1);
    b.view_mut((2, 0), (n + 1, n + 1)).copy_from(&b2);
    let mut c = DMatrix::zeros(n + 1, dim);
    c[(0, 0)] = 1.0;
    c[(1, 3)] = 1.0;
    for k in 2..=n {
        c[(k, k + 2)] = 1.0;
    }
    Ok((a, b, c))
}

/// Joint of `n` pipes into `P_0`: state `[p_{0,r}, p_{1,r}, q_{0,ℓ} … q_{n,ℓ}]`,
/// input `[p_{1,ℓ} … p_{n,ℓ}, q_{0,r}]`, output `[p_{0,r}, q_{1,ℓ} … q_{n,ℓ}]`.
pub fn build_joint(spec: &JointSpec) -> Result<LabeledStateSpaceModel> {
    let model = assemble_joint(spec)?;
    let (a, b, c) = joint_block_formula(spec)?;
    let scale = coefficient_scale(spec.joining().iter().chain([spec.downstream()]));
    check_blocks("A", model.a(), &a, scale)?;
    check_blocks("B", model.b(), &b, scale)?;
    check_blocks("C", model.c(), &c, 1.0)?;
    Ok(model)
}

fn coefficient_scale<'a>(coefs: impl Iterator<Item = &'a LinearCoefficients>) -> f64 {
    coefs.fold(0.0_f64, |m, c| {
        m.max(c.pressure_rate.abs())
            .max(c.outlet_pressure_gain.abs())
            .max(c.inlet_pressure_gain.abs())
            .max(c.flow_damping.abs())
    })
}

fn check_blocks(
    block: &'static str,
    assembled: &DMatrix<f64>,
    printed: &DMatrix<f64>,
    scale: f64,
) -> Result<()> {
    let scale = printed.amax().max(scale);
    for i in 0..printed.nrows() {
        for j in 0..printed.ncols() {
            let (x, y) = (assembled[(i, j)], printed[(i, j)]);
            if (x - y).abs() > REALIZATION_TOLERANCE * scale {
                return Err(Error::RealizationMismatch {
                    block,
                    row: i,
                    col: j,
                    assembled: x,
                    printed: y,
                });
            }
        }
    }
    Ok(())
}

fn star_labels(n: usize, m: usize) -> (Vec<Variable>, Vec<Variable>, Vec<Variable>) {
    let states = [Variable::p_right(1)]
        .into_iter()
        .chain((n + 1..=n + m).map(Variable::p_right))
        .chain((1..=n + m).map(Variable::q_left))
        .collect();
    let inputs = (1..=n)
        .map(Variable::p_left)
        .chain((n + 1..=n + m).map(Variable::q_right))
        .collect();
    let outputs = (n + 1..=n + m)
        .map(Variable::p_right)
        .chain((1..=n).map(Variable::q_left))
        .collect();
    (states, inputs, outputs)
}

/// Star realization assembled from the per-pipe ODEs: joining outlet flows
/// eliminated as for a joint, with the downstream inflow replaced by the sum of branching
/// inflows, and every pressure at the node equal to `p_{1,r}`.
pub fn assemble_star(spec: &StarSpec) -> Result<LabeledStateSpaceModel> {
    let (n, m) = (spec.joining_count(), spec.branching_count());
    let (states, inputs, outputs) = star_labels(n, m);
    let mut asm = Assembler::new(states, inputs);
    for k in 2..=n {
        asm.substitute(Variable::p_right(k), vec![(1.0, Variable::p_right(1))]);
    }
    for j in n + 1..=n + m {
        asm.substitute(Variable::p_left(j), vec![(1.0, Variable::p_right(1))]);
    }
    let branching_inflows: Vec<Variable> = (n + 1..=n + m).map(Variable::q_left).collect();
    let terms = outlet_flow_terms(&spec.joining_pressure_rates(), &branching_inflows, 1)?;
    for (k, t) in terms.into_iter().enumerate() {
        asm.substitute(Variable::q_right(k + 1), t);
    }
    asm.finish(|j| *spec.pipe(j), outputs)
}

/// The four additive parts of the star realization and its output selector.
#[derive(Debug, Clone, PartialEq)]
pub struct StarBlocks {
    pub a: [DMatrix<f64>; 4],
    pub b: [DMatrix<f64>; 4],
    pub c: DMatrix<f64>,
    joining: usize,
    branching: usize,
}

impl StarBlocks {
    /// `ẋ = (A₁+A₂+A₃+A₄) x + (B₁+B₂+B₃+B₄) u`, `y = C x`.
    pub fn summed(&self) -> Result<LabeledStateSpaceModel> {
        let a = self.a.iter().fold(
            DMatrix::zeros(self.a[0].nrows(), self.a[0].ncols()),
            |s, m| s + m,
        );
        self.model(a)
    }

    /// The reading in which every part evolves under `A₁` alone. It drops
    /// the branching and joining pipe dynamics; kept only so the oracle can
    /// demonstrate that it is wrong.
    pub fn first_block_only(&self) -> Result<LabeledStateSpaceModel> {
        self.model(self.a[0].clone())
    }

    fn model(&self, a: DMatrix<f64>) -> Result<LabeledStateSpaceModel> {
        let b = self.b.iter().fold(
            DMatrix::zeros(self.b[0].nrows(), self.b[0].ncols()),
            |s, m| s + m,
        );
        let (states, inputs, outputs) = star_labels(self.joining, self.branching);
        LabeledStateSpaceModel::new(a, b, self.c.clone(), states, inputs, outputs)
    }
}

/// Star realization written directly from the block formulas.
pub fn star_block_formula(spec: &StarSpec) -> Result<StarBlocks> {
    let (n, m) = (spec.joining_count(), spec.branching_count());
    let a_gain = junction_gain(&spec.joining_pressure_rates())?;
    let dim = n + 2 * m + 1;
    let inputs = n + m;
    // column offsets within the state: p_{1,r} | branching p_r | joining q_l | branching q_l
    let (col_pb, col_qj, col_qb) = (1, m + 1, n + m + 1);

    let mut a1 = DMatrix::zeros(dim, dim);
    for k in 0..n {
        a1[(0, col_qj + k)] = -a_gain;
    }
    for j in 0..m {
        a1[(0, col_qb + j)] = a_gain;
    }

    let mut a2 = DMatrix::zeros(dim, dim);
    let mut b2 = DMatrix::zeros(dim, inputs);
    for j in 0..m {
        let c = spec.pipe(n + 1 + j);
        a2[(1 + j, col_qb + j)] = -c.pressure_rate;
        b2[(1 + j, n + j)] = c.pressure_rate;
    }

    let mut a3 = DMatrix::zeros(dim, dim);
    let mut b3 = DMatrix::zeros(dim, inputs);
    for k in 0..n {
        let c = spec.pipe(1 + k);
        let row = m + 1 + k;
        a3[(row, 0)] = c.outlet_pressure_gain;
        a3[(row, col_qj + k)] = c.flow_damping;
        b3[(row, k)] = c.inlet_pressure_gain;
    }

    let mut a4 = DMatrix::zeros(dim, dim);
    for j in 0..m {
        let c = spec.pipe(n + 1 + j);
        let row = n + m + 1 + j;
        a4[(row, 0)] = c.inlet_pressure_gain;
        a4[(row, col_pb + j)] = c.outlet_pressure_gain;
        a4[(row, col_qb + j)] = c.flow_damping;
    }

    let mut c = DMatrix::zeros(n + m, dim);
    for i in 0..n + m {
        c[(i, 1 + i)] = 1.0;
    }

    Ok(StarBlocks {
        a: [a1, a2, a3, a4],
        b: [
            DMatrix::zeros(dim, inputs),
            b2,
            b3,
            DMatrix::zeros(dim, inputs),
        ],
        c,
        joining: n,
        branching: m,
    })
}

/// Star of `n` joining and `m` branching pipes: state
/// `[p_{1,r}, p_{n+1,r} … p_{n+m,r}, q_{1,ℓ} … q_{n+m,ℓ}]`, input
/// `[p_{1,ℓ} … p_{n,ℓ}, q_{n+1,r} … q_{n+m,r}]`, output
/// `[p_{n+1,r} … p_{n+m,r}, q_{1,ℓ} … q_{n,ℓ}]`.
pub fn build_star(spec: &StarSpec) -> Result<LabeledStateSpaceModel> {
    let model = assemble_star(spec)?;
    let blocks = star_block_formula(spec)?;
    let summed = blocks.summed()?;
    let scale = coefficient_scale(spec.joining().iter().chain(spec.branching()));
    check_blocks("A", model.a(), summed.a(), scale)?;
    check_blocks("B", model.b(), summed.b(), scale)?;
    check_blocks("C", model.c(), summed.c(), 1.0)?;
    Ok(model)
}

/// Any of the supported topologies.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Series(SeriesSpec),
    Joint(JointSpec),
    Star(StarSpec),
}

impl Network {
    pub fn build(&self) -> Result<LabeledStateSpaceModel> {
        match self {
            Network::Series(s) => build_series(s),
            Network::Joint(s) => build_joint(s),
            Network::Star(s) => build_star(s),
        }
    }

    /// Variables returned by [`Network::reconstruct_internals`], in order.
    pub fn internal_variables(&self) -> Vec<Variable> {
        match self {
            Network::Series(s) => {
                let n = s.len();
                (1..n)
                    .map(Variable::p_left)
                    .chain((0..n.saturating_sub(1)).map(Variable::q_right))
                    .collect()
            }
            Network::Joint(s) => {
                let n = s.joining_count();
                (1..=n)
                    .map(Variable::q_right)
                    .chain([Variable::p_left(0)])
                    .chain((2..=n).map(Variable::p_right))
                    .collect()
            }
            Network::Star(s) => {
                let (n, m) = (s.joining_count(), s.branching_count());
                (1..=n)
                    .map(Variable::q_right)
                    .chain((n + 1..=n + m).map(Variable::p_left))
                    .chain((2..=n).map(Variable::p_right))
                    .chain([Variable::NodePressure])
                    .collect()
            }
        }
    }

    /// Boundary values eliminated from the composite model, evaluated at
    /// state `x` and input `u` of the model returned by [`Network::build`].
    pub fn reconstruct_internals(&self, x: &[f64], u: &[f64]) -> Result<Vec<(Variable, f64)>> {
        let (states, inputs, _) = self.labels();
        check_len("state vector", states.len(), x.len())?;
        check_len("input vector", inputs.len(), u.len())?;
        let get = |v: Variable| -> f64 {
            let i = states.iter().position(|s| *s == v).expect("state label");
            x[i]
        };
        let mut out = Vec::new();
        match self {
            Network::Series(s) => {
                let n = s.len();
                for j in 1..n {
                    out.push((Variable::p_left(j), get(Variable::p_right(j - 1))));
                }
                for j in 0..n - 1 {
                    out.push((Variable::q_right(j), get(Variable::q_left(j + 1))));
                }
            }
            Network::Joint(s) => {
                let n = s.joining_count();
                let inflows: Vec<f64> = (1..=n).map(|k| get(Variable::q_left(k))).collect();
                let q_r = eliminate_joint_flows(
                    &s.joining_pressure_rates(),
                    get(Variable::q_left(0)),
                    &inflows,
                )?;
                for (k, q) in q_r.into_iter().enumerate() {
                    out.push((Variable::q_right(k + 1), q));
                }
                let node = get(Variable::p_right(1));
                out.push((Variable::p_left(0), node));
                for k in 2..=n {
                    out.push((Variable::p_right(k), node));
                }
            }
            Network::Star(s) => {
                let (n, m) = (s.joining_count(), s.branching_count());
                let inflows: Vec<f64> = (1..=n).map(|k| get(Variable::q_left(k))).collect();
                let branching: f64 = (n + 1..=n + m).map(|j| get(Variable::q_left(j))).sum();
                let q_r = eliminate_joint_flows(&s.joining_pressure_rates(), branching, &inflows)?;
                for (k, q) in q_r.into_iter().enumerate() {
                    out.push((Variable::q_right(k + 1), q));
                }
                let node = get(Variable::p_right(1));
                for j in n + 1..=n + m {
                    out.push((Variable::p_left(j), node));
                }
                for k in 2..=n {
                    out.push((Variable::p_right(k), node));
                }
                out.push((Variable::NodePressure, node));
            }
        }
        Ok(out)
    }

    /// State, input and output labels of the composite model.
    pub fn labels(&self) -> (Vec<Variable>, Vec<Variable>, Vec<Variable>) {
        match self {
            Network::Series(s) => {
                let n = s.len();
                let states = (0..n)
                    .map(Variable::p_right)
                    .chain((0..n).map(Variable::q_left))
                    .collect();
                (
                    states,
                    vec![Variable::p_left(0), Variable::q_right(n - 1)],
                    vec![Variable::p_right(n - 1), Variable::q_left(0)],
                )
            }
            Network::Joint(s) => joint_labels(s.joining_count()),
            Network::Star(s) => star_labels(s.joining_count(), s.branching_count()),
        }
    }
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}
