//! Reference differential-algebraic simulation of pipe networks.
//!
//! The oracle keeps every pipe's own two ODEs and states the junction and
//! interconnection conditions as explicit algebraic constraints. It solves
//! them numerically at every step and never uses the closed-form elimination
//! of [`crate::compose`], so agreement between the two certifies the
//! composite models.
//!
//! Pressure continuity between two outlet pressures that are both
//! differential variables (all joining pipes of a junction) would make the
//! algebraic block singular. Such a condition is imposed in differentiated
//! form, equal pressure rates, and the undifferentiated equality is monitored
//! as an invariant along the trajectory.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::compose::Network;
use crate::error::{Error, Result};
use crate::lti::{self, InputSignal, Integrator, SimulationOptions};
use crate::model::{LabeledStateSpaceModel, Quantity, Variable};
use crate::pipe::LinearCoefficients;

/// Constraint residual allowed at every accepted step, relative to the
/// magnitude of the variables.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;

/// Default pass threshold of [`certify`] on the relative error.
pub const CERTIFY_TOLERANCE: f64 = 1e-5;

/// Default implicit-Euler substeps per grid interval.
pub const DEFAULT_OVERSAMPLE: usize = 100;

type Terms = Vec<(f64, Variable)>;

/// `ẋ = Fx x + Fz z + Fu u`, `0 = Gx x + Gz z + Gu u` with labeled
/// differential variables `x`, algebraic variables `z` and inputs `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeSystem {
    pub differential: Vec<Variable>,
    pub algebraic: Vec<Variable>,
    pub inputs: Vec<Variable>,
    pub fx: DMatrix<f64>,
    pub fz: DMatrix<f64>,
    pub fu: DMatrix<f64>,
    pub gx: DMatrix<f64>,
    pub gz: DMatrix<f64>,
    pub gu: DMatrix<f64>,
    /// Human-readable name of each algebraic constraint row.
    pub constraints: Vec<String>,
    /// Differential variables that must stay equal along a trajectory.
    pub invariants: Vec<(Variable, Variable)>,
}

struct DaeBuilder {
    differential: Vec<Variable>,
    algebraic: Vec<Variable>,
    inputs: Vec<Variable>,
    odes: HashMap<Variable, Terms>,
    constraints: Vec<(String, Terms)>,
    invariants: Vec<(Variable, Variable)>,
}

impl DaeBuilder {
    fn new(inputs: Vec<Variable>) -> Self {
        Self {
            differential: Vec::new(),
            algebraic: Vec::new(),
            inputs,
            odes: HashMap::new(),
            constraints: Vec::new(),
            invariants: Vec::new(),
        }
    }

    /// The two linearized ODEs of pipe `j`, transcribed as written.
    fn pipe(&mut self, j: usize, c: &LinearCoefficients) {
        let (pr, ql) = (Variable::p_right(j), Variable::q_left(j));
        self.differential.push(pr);
        self.differential.push(ql);
        // ṗ_r = c_p (q_r − q_l)
        self.odes.insert(
            pr,
            vec![
                (c.pressure_rate, Variable::q_right(j)),
                (-c.pressure_rate, ql),
            ],
        );
        // q̇_l = c_pr p_r + c_pl p_l + c_ql q_l
        self.odes.insert(
            ql,
            vec![
                (c.outlet_pressure_gain, pr),
                (c.inlet_pressure_gain, Variable::p_left(j)),
                (c.flow_damping, ql),
            ],
        );
    }

    fn algebraic(&mut self, v: Variable) {
        self.algebraic.push(v);
    }

    fn constraint(&mut self, name: String, terms: Terms) {
        self.constraints.push((name, terms));
    }

    /// `a = b`; in rate form when both sides are differential variables.
    fn equal(&mut self, a: Variable, b: Variable) {
        let name = format!("{a} = {b}");
        match (self.odes.get(&a), self.odes.get(&b)) {
            (Some(fa), Some(fb)) => {
                let mut terms = fa.clone();
                terms.extend(fb.iter().map(|(c, v)| (-c, *v)));
                self.constraints.push((format!("d/dt ({name})"), terms));
                self.invariants.push((a, b));
            }
            _ => self.constraints.push((name, vec![(1.0, a), (-1.0, b)])),
        }
    }

    fn finish(self) -> Result<DaeSystem> {
        let (nx, nz, nu) = (
            self.differential.len(),
            self.algebraic.len(),
            self.inputs.len(),
        );
        if self.constraints.len() != nz {
            return Err(Error::DimensionMismatch {
                what: "algebraic constraints".into(),
                expected: nz,
                found: self.constraints.len(),
            });
        }
        let index = |v: &Variable| -> (usize, usize) {
            if let Some(i) = self.differential.iter().position(|w| w == v) {
                (0, i)
            } else if let Some(i) = self.algebraic.iter().position(|w| w == v) {
                (1, i)
            } else if let Some(i) = self.inputs.iter().position(|w| w == v) {
                (2, i)
            } else {
                unreachable!("variable {v} is not declared")
            }
        };
        let fill = |rows: &[&Terms]| {
            let n = rows.len();
            let (mut x, mut z, mut u) = (
                DMatrix::zeros(n, nx),
                DMatrix::zeros(n, nz),
                DMatrix::zeros(n, nu),
            );
            for (r, terms) in rows.iter().enumerate() {
                for (c, v) in terms.iter() {
                    match index(v) {
                        (0, i) => x[(r, i)] += c,
                        (1, i) => z[(r, i)] += c,
                        (_, i) => u[(r, i)] += c,
                    }
                }
            }
            (x, z, u)
        };
        let ode_rows: Vec<&Terms> = self.differential.iter().map(|v| &self.odes[v]).collect();
        let (fx, fz, fu) = fill(&ode_rows);
        let con_rows: Vec<&Terms> = self.constraints.iter().map(|(_, t)| t).collect();
        let (gx, gz, gu) = fill(&con_rows);

        if nz > 0 {
            let rank = lti::numerical_rank(&gz);
            if rank < nz {
                return Err(Error::Singular {
                    what: "algebraic constraint block",
                    rank,
                    dim: nz,
                });
            }
        }
        Ok(DaeSystem {
            differential: self.differential,
            algebraic: self.algebraic,
            inputs: self.inputs,
            fx,
            fz,
            fu,
            gx,
            gz,
            gu,
            constraints: self.constraints.into_iter().map(|(n, _)| n).collect(),
            invariants: self.invariants,
        })
    }
}

pub fn assemble_dae(network: &Network) -> Result<DaeSystem> {
    match network {
        Network::Series(spec) => {
            let n = spec.len();
            let mut b = DaeBuilder::new(vec![Variable::p_left(0), Variable::q_right(n - 1)]);
            for (j, c) in spec.pipes().iter().enumerate() {
                b.pipe(j, c);
            }
            for j in 1..n {
                b.algebraic(Variable::p_left(j));
                b.equal(Variable::p_left(j), Variable::p_right(j - 1));
            }
            for j in 0..n - 1 {
                b.algebraic(Variable::q_right(j));
                b.equal(Variable::q_right(j), Variable::q_left(j + 1));
            }
            b.finish()
        }
        Network::Joint(spec) => {
            let n = spec.joining_count();
            let inputs = (1..=n)
                .map(Variable::p_left)
                .chain([Variable::q_right(0)])
                .collect();
            let mut b = DaeBuilder::new(inputs);
            for j in 0..=n {
                b.pipe(j, spec.pipe(j));
            }
            for k in 1..=n {
                b.algebraic(Variable::q_right(k));
            }
            b.algebraic(Variable::p_left(0));
            b.equal(Variable::p_left(0), Variable::p_right(1));
            for k in 2..=n {
                b.equal(Variable::p_right(k), Variable::p_right(1));
            }
            let mut mass: Terms = (1..=n).map(|k| (1.0, Variable::q_right(k))).collect();
            mass.push((-1.0, Variable::q_left(0)));
            b.constraint("mass balance at the joint".into(), mass);
            b.finish()
        }
        Network::Star(spec) => {
            let (n, m) = (spec.joining_count(), spec.branching_count());
            let inputs = (1..=n)
                .map(Variable::p_left)
                .chain((n + 1..=n + m).map(Variable::q_right))
                .collect();
            let mut b = DaeBuilder::new(inputs);
            for j in 1..=n + m {
                b.pipe(j, spec.pipe(j));
            }
            for k in 1..=n {
                b.algebraic(Variable::q_right(k));
            }
            for j in n + 1..=n + m {
                b.algebraic(Variable::p_left(j));
            }
            b.algebraic(Variable::NodePressure);
            b.equal(Variable::NodePressure, Variable::p_right(1));
            for k in 2..=n {
                b.equal(Variable::p_right(k), Variable::p_right(1));
            }
            for j in n + 1..=n + m {
                b.equal(Variable::p_left(j), Variable::NodePressure);
            }
            let mut mass: Terms = (1..=n).map(|k| (1.0, Variable::q_right(k))).collect();
            mass.extend((n + 1..=n + m).map(|j| (-1.0, Variable::q_left(j))));
            b.constraint("mass balance at the node".into(), mass);
            b.finish()
        }
    }
}

/// Differential and algebraic trajectories on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeTrajectory {
    pub times: Vec<f64>,
    pub differential_labels: Vec<Variable>,
    pub algebraic_labels: Vec<Variable>,
    pub differential: Vec<DVector<f64>>,
    pub algebraic: Vec<DVector<f64>>,
    /// Largest constraint residual over all steps, relative to variable scale.
    pub max_constraint_residual: f64,
    /// Largest deviation between invariant pairs, relative to variable scale.
    pub max_invariant_drift: f64,
}

impl DaeTrajectory {
    pub fn series(&self, v: Variable) -> Option<Vec<f64>> {
        if let Some(i) = self.differential_labels.iter().position(|w| *w == v) {
            return Some(self.differential.iter().map(|x| x[i]).collect());
        }
        let i = self.algebraic_labels.iter().position(|w| *w == v)?;
        Some(self.algebraic.iter().map(|z| z[i]).collect())
    }
}

impl DaeSystem {
    fn residual(&self, x: &DVector<f64>, z: &DVector<f64>, u: &DVector<f64>) -> f64 {
        if self.algebraic.is_empty() {
            return 0.0;
        }
        let r = &self.gx * x + &self.gz * z + &self.gu * u;
        let scale = x.amax().max(z.amax()).max(u.amax()).max(f64::MIN_POSITIVE);
        r.amax() / scale
    }

    fn invariant_indices(&self) -> Vec<(usize, usize)> {
        let index = |v: &Variable| {
            self.differential
                .iter()
                .position(|w| w == v)
                .expect("invariant label")
        };
        self.invariants
            .iter()
            .map(|(a, b)| (index(a), index(b)))
            .collect()
    }

    fn drift(&self, x: &DVector<f64>) -> f64 {
        let scale = x.amax().max(f64::MIN_POSITIVE);
        self.invariant_indices()
            .into_iter()
            .map(|(i, j)| (x[i] - x[j]).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Algebraic values consistent with `x` and `u`.
    pub fn consistent_algebraic(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if self.algebraic.is_empty() {
            return Ok(DVector::zeros(0));
        }
        let rhs = -(&self.gx * x + &self.gu * u);
        self.gz
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::AlgebraicSolve {
                step: 0,
                reason: "algebraic block is singular".into(),
            })
    }
}

struct StepFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    held: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl StepFactor {
    /// `(Φ, Γ)` with `x ↦ Φ x + Γ u` equal to `count` substeps under a
    /// constant input, by repeated squaring of the single-substep map.
    fn held_map(
        &mut self,
        sys: &DaeSystem,
        h: f64,
        count: usize,
    ) -> (&DMatrix<f64>, &DMatrix<f64>) {
        let lu = &self.lu;
        let held = self.held.get_or_insert_with(|| {
            let (nx, nz, nu) = (
                sys.differential.len(),
                sys.algebraic.len(),
                sys.inputs.len(),
            );
            let mut lift = DMatrix::zeros(nx + nz, nx);
            lift.view_mut((0, 0), (nx, nx)).fill_with_identity();
            let mut drive = DMatrix::zeros(nx + nz, nu);
            drive.view_mut((0, 0), (nx, nu)).copy_from(&(&sys.fu * h));
            drive.view_mut((nx, 0), (nz, nu)).copy_from(&(-&sys.gu));
            let p = lu
                .solve(&lift)
                .expect("step matrix is nonsingular")
                .rows(0, nx)
                .into_owned();
            let q = lu
                .solve(&drive)
                .expect("step matrix is nonsingular")
                .rows(0, nx)
                .into_owned();
            let compose = |a: &(DMatrix<f64>, DMatrix<f64>), b: &(DMatrix<f64>, DMatrix<f64>)| {
                (&a.0 * &b.0, &a.0 * &b.1 + &a.1)
            };
            let mut result = (DMatrix::identity(nx, nx), DMatrix::zeros(nx, nu));
            let mut base = (p, q);
            let mut k = count;
            while k > 0 {
                if k & 1 == 1 {
                    result = compose(&base, &result);
                }
                base = compose(&base, &base);
                k >>= 1;
            }
            result
        });
        (&held.0, &held.1)
    }
}

/// Implicit Euler with `oversample` equal substeps per grid interval. Each
/// substep solves the affine system for the new differential and algebraic
/// values jointly. While a piecewise-constant input is held, the substeps
/// before the last are applied as their exact composition; the last one is
/// always solved, and the constraint residual is checked there.
pub fn simulate_dae(
    sys: &DaeSystem,
    signal: &InputSignal,
    x0: &DVector<f64>,
    t_grid: &[f64],
    oversample: usize,
) -> Result<DaeTrajectory> {
    lti::validate_time_grid(t_grid)?;
    let (nx, nz) = (sys.differential.len(), sys.algebraic.len());
    if x0.len() != nx {
        return Err(Error::DimensionMismatch {
            what: "initial differential state".into(),
            expected: nx,
            found: x0.len(),
        });
    }
    if signal.len() != sys.inputs.len() {
        return Err(Error::DimensionMismatch {
            what: "input signal channels".into(),
            expected: sys.inputs.len(),
            found: signal.len(),
        });
    }
    if oversample == 0 {
        return Err(Error::InvalidGrid(
            "oversampling factor must be positive".into(),
        ));
    }
    let scale = x0.amax();
    if let Some((a, b)) = sys
        .invariants
        .iter()
        .zip(sys.invariant_indices())
        .find(|(_, (i, j))| (x0[*i] - x0[*j]).abs() > CONSTRAINT_TOLERANCE * scale)
        .map(|(pair, _)| *pair)
    {
        return Err(Error::InconsistentInitialState(format!("{a} = {b}")));
    }

    let u0 = signal.value_at(t_grid[0]);
    let z0 = sys.consistent_algebraic(x0, &u0)?;
    let mut max_residual = sys.residual(x0, &z0, &u0);
    let mut max_drift = sys.drift(x0);
    let mut differential = vec![x0.clone()];
    let mut algebraic = vec![z0.clone()];

    let dim = nx + nz;
    let mut g = DMatrix::zeros(nz, dim);
    g.view_mut((0, 0), (nz, nx)).copy_from(&sys.gx);
    g.view_mut((0, nx), (nz, nz)).copy_from(&sys.gz);
    let pairs = sys.invariant_indices();
    let mut xz = DVector::zeros(dim);
    xz.rows_mut(0, nx).copy_from(x0);
    xz.rows_mut(nx, nz).copy_from(&z0);
    let mut rhs = DVector::zeros(dim);
    let mut r = DVector::zeros(nz);

    let mut factors: HashMap<u64, StepFactor> = HashMap::new();
    let piecewise_constant = signal.is_piecewise_constant();
    let mut step = 0usize;
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / oversample as f64;
        let factor = factors.entry(h.to_bits()).or_insert_with(|| {
            let mut m = DMatrix::zeros(dim, dim);
            m.view_mut((0, 0), (nx, nx))
                .copy_from(&(DMatrix::identity(nx, nx) - &sys.fx * h));
            m.view_mut((0, nx), (nx, nz)).copy_from(&(-&sys.fz * h));
            m.view_mut((nx, 0), (nz, dim)).copy_from(&g);
            StepFactor {
                lu: m.lu(),
                held: None,
            }
        });
        let mut first = 1;
        if piecewise_constant
            && oversample > 1
            && signal.value_at(w[0] + h) == signal.value_at(w[1])
        {
            // all but the last substep see the same input: apply them as one map
            let (phi, gamma) = factor.held_map(sys, h, oversample - 1);
            let x = phi * xz.rows(0, nx) + gamma * signal.value_at(w[1]);
            xz.rows_mut(0, nx).copy_from(&x);
            step += oversample - 1;
            first = oversample;
        }
        let lu = &factor.lu;
        for s in first..=oversample {
            step += 1;
            let t = if s == oversample {
                w[1]
            } else {
                w[0] + s as f64 * h
            };
            let u = signal.value_at(t);
            rhs.rows_mut(0, nx).copy_from(&xz.rows(0, nx));
            rhs.rows_mut(0, nx).gemv(h, &sys.fu, &u, 1.0);
            rhs.rows_mut(nx, nz).gemv(-1.0, &sys.gu, &u, 0.0);
            if !lu.solve_mut(&mut rhs) {
                return Err(Error::AlgebraicSolve {
                    step,
                    reason: "step matrix is singular".into(),
                });
            }
            std::mem::swap(&mut xz, &mut rhs);
            if !xz.iter().all(|v| v.is_finite()) {
                return Err(Error::AlgebraicSolve {
                    step,
                    reason: "non-finite values".into(),
                });
            }
            let scale = xz.amax().max(u.amax()).max(f64::MIN_POSITIVE);
            if nz > 0 {
                r.gemv(1.0, &g, &xz, 0.0);
                r.gemv(1.0, &sys.gu, &u, 1.0);
                let residual = r.amax() / scale;
                if residual > CONSTRAINT_TOLERANCE {
                    return Err(Error::AlgebraicSolve {
                        step,
                        reason: format!(
                            "constraint residual {residual:e} exceeds {CONSTRAINT_TOLERANCE:e}"
                        ),
                    });
                }
                max_residual = max_residual.max(residual);
            }
            let x_scale = xz.rows(0, nx).amax().max(f64::MIN_POSITIVE);
            for &(i, j) in &pairs {
                max_drift = max_drift.max((xz[i] - xz[j]).abs() / x_scale);
            }
        }
        differential.push(xz.rows(0, nx).into_owned());
        algebraic.push(xz.rows(nx, nz).into_owned());
    }
    Ok(DaeTrajectory {
        times: t_grid.to_vec(),
        differential_labels: sys.differential.clone(),
        algebraic_labels: sys.algebraic.clone(),
        differential,
        algebraic,
        max_constraint_residual: max_residual,
        max_invariant_drift: max_drift,
    })
}

/// Input, initial state and time grid shared by the model and the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Channels in the composite model's input order.
    pub signal: InputSignal,
    /// Initial state in the composite model's state order.
    pub x0: DVector<f64>,
    pub t_grid: Vec<f64>,
    /// Implicit-Euler substeps per grid interval.
    pub oversample: usize,
    pub tolerance: f64,
}

impl Scenario {
    /// Grid intervals per unit of `horizon × spectral radius`.
    const RESOLUTION: f64 = 1.0 / 2.5e-4;
    const MIN_INTERVALS: usize = 200;
    const MAX_INTERVALS: usize = 250_000;

    /// Step of the given levels at t = 0 from rest, over ten dominant time
    /// constants, on a grid fine enough for the fastest mode.
    pub fn step_response(model: &LabeledStateSpaceModel, levels: &[f64]) -> Result<Self> {
        if levels.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "step levels".into(),
                expected: model.input_dim(),
                found: levels.len(),
            });
        }
        let rate = lti::slowest_decay_rate(model).ok_or_else(|| {
            Error::InvalidGrid("model has no decaying mode to set a horizon".into())
        })?;
        let horizon = 10.0 / rate;
        let rho = lti::spectral_radius(model.a());
        let intervals = ((horizon * rho * Self::RESOLUTION).ceil() as usize)
            .clamp(Self::MIN_INTERVALS, Self::MAX_INTERVALS);
        Ok(Self {
            signal: InputSignal::step(0.0, levels),
            x0: DVector::zeros(model.state_dim()),
            t_grid: lti::uniform_time_grid(horizon, intervals)?,
            oversample: DEFAULT_OVERSAMPLE,
            tolerance: CERTIFY_TOLERANCE,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.t_grid.last().copied().unwrap_or(0.0) - self.t_grid.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalComparison {
    pub label: String,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub time_of_max: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub tolerance: f64,
    pub signals: Vec<SignalComparison>,
    pub passed: bool,
    pub max_constraint_residual: f64,
    pub max_invariant_drift: f64,
}

impl ComparisonReport {
    pub fn max_rel_error(&self) -> f64 {
        self.signals
            .iter()
            .map(|s| s.max_rel_error)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>12} {:>12} {:>12}  result",
            "signal", "max abs", "max rel", "at t [s]"
        )?;
        for s in &self.signals {
            writeln!(
                f,
                "{:<14} {:>12.3e} {:>12.3e} {:>12.4e}  {}",
                s.label,
                s.max_abs_error,
                s.max_rel_error,
                s.time_of_max,
                if s.passed { "ok" } else { "FAIL" }
            )?;
        }
        writeln!(
            f,
            "constraint residual {:.2e}, invariant drift {:.2e}",
            self.max_constraint_residual, self.max_invariant_drift
        )?;
        write!(
            f,
            "{}: max relative error {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.max_rel_error(),
            self.tolerance
        )
    }
}

/// Maps a composite-model state onto the oracle's differential variables.
/// Differential variables absent from the model must be tied to a model
/// state through an invariant (joining outlet pressures).
fn lift_state(
    model: &LabeledStateSpaceModel,
    sys: &DaeSystem,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let lookup = |v: Variable| -> Option<f64> { model.state_index(v).map(|i| x0[i]) };
    let mut out = DVector::zeros(sys.differential.len());
    for (i, v) in sys.differential.iter().enumerate() {
        let value = lookup(*v).or_else(|| {
            sys.invariants.iter().find_map(|(a, b)| {
                if a == v {
                    lookup(*b)
                } else if b == v {
                    lookup(*a)
                } else {
                    None
                }
            })
        });
        out[i] = value.ok_or_else(|| {
            Error::LabelMismatch(format!(
                "oracle variable {v} has no counterpart in the model"
            ))
        })?;
    }
    Ok(out)
}

/// Simulates the composite model and the oracle on the same scenario and
/// compares every model state and output by label.
///
/// Relative errors divide by the signal's peak magnitude, floored at
/// `1e-9 ×` the largest peak among signals of the same physical quantity.
pub fn certify(
    model: &LabeledStateSpaceModel,
    sys: &DaeSystem,
    scenario: &Scenario,
) -> Result<ComparisonReport> {
    if scenario.signal.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "scenario input channels".into(),
            expected: model.input_dim(),
            found: scenario.signal.len(),
        });
    }
    // oracle inputs in the oracle's order
    let mut channels = Vec::with_capacity(sys.inputs.len());
    for v in &sys.inputs {
        let i = model.input_index(*v).ok_or_else(|| {
            Error::LabelMismatch(format!("oracle input {v} is not a model input"))
        })?;
        channels.push(scenario.signal.channels()[i]);
    }
    if sys.inputs.len() != model.input_dim() {
        return Err(Error::LabelMismatch(
            "model and oracle inputs differ".into(),
        ));
    }
    for v in model.states() {
        if !sys.differential.contains(v) {
            return Err(Error::LabelMismatch(format!(
                "model state {v} is not an oracle variable"
            )));
        }
    }
    let oracle_signal = InputSignal::new(channels);
    let dae_x0 = lift_state(model, sys, &scenario.x0)?;

    let integrator = if scenario.signal.is_piecewise_constant() {
        Integrator::ExactHold
    } else {
        Integrator::Rk4
    };
    let model_traj = lti::simulate(
        model,
        &scenario.signal,
        &scenario.x0,
        &scenario.t_grid,
        &SimulationOptions {
            integrator,
            oversample: scenario.oversample,
        },
    )?;
    let dae = simulate_dae(
        sys,
        &oracle_signal,
        &dae_x0,
        &scenario.t_grid,
        scenario.oversample,
    )?;

    let mut compared: Vec<(String, Quantity, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, v) in model.states().iter().enumerate() {
        let ours: Vec<f64> = model_traj.states.iter().map(|x| x[i]).collect();
        compared.push((
            v.to_string(),
            v.quantity(),
            ours,
            dae.series(*v).expect("checked above"),
        ));
    }
    for (i, v) in model.outputs().iter().enumerate() {
        let ours: Vec<f64> = model_traj.outputs.iter().map(|y| y[i]).collect();
        compared.push((
            format!("y:{v}"),
            v.quantity(),
            ours,
            dae.series(*v).expect("outputs are states"),
        ));
    }

    let peak = |s: &[f64]| s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let quantity_scale = |q: Quantity| {
        compared
            .iter()
            .filter(|c| c.1 == q)
            .map(|c| peak(&c.3))
            .fold(0.0, f64::max)
    };
    let signals: Vec<SignalComparison> = compared
        .iter()
        .map(|(label, q, ours, theirs)| {
            let scale = quantity_scale(*q);
            let floor = if scale > 0.0 { 1e-9 * scale } else { 1.0 };
            let denom = peak(theirs).max(floor);
            let (k, err) = ours
                .iter()
                .zip(theirs)
                .map(|(a, b)| (a - b).abs())
                .enumerate()
                .fold(
                    (0, 0.0),
                    |best, (k, e)| if e > best.1 { (k, e) } else { best },
                );
            let rel = err / denom;
            SignalComparison {
                label: label.clone(),
                max_abs_error: err,
                max_rel_error: rel,
                time_of_max: scenario.t_grid[k],
                passed: rel <= scenario.tolerance,
            }
        })
        .collect();
    let passed = signals.iter().all(|s| s.passed);
    Ok(ComparisonReport {
        tolerance: scenario.tolerance,
        signals,
        passed,
        max_constraint_residual: dae.max_constraint_residual,
        max_invariant_drift: dae.max_invariant_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{JointSpec, SeriesSpec, StarSpec};

    fn coef(i: usize) -> LinearCoefficients {
        let f = 1.0 + 0.29 * i as f64;
        LinearCoefficients::new(-1.1 * f, -0.8 / f, 0.9 / f, -0.6 * f)
    }

    #[test]
    fn series_two_has_one_pressure_and_one_flow_constraint() {
        let sys = assemble_dae(&Network::Series(
            SeriesSpec::new(vec![coef(0), coef(1)]).unwrap(),
        ))
        .unwrap();
        assert_eq!(
            sys.algebraic,
            vec![Variable::p_left(1), Variable::q_right(0)]
        );
        assert_eq!(sys.constraints, vec!["p[1].l = p[0].r", "q[0].r = q[1].l"]);
        assert!(sys.invariants.is_empty());
    }

    #[test]
    fn single_pipe_has_no_algebraic_part() {
        let sys = assemble_dae(&Network::Series(SeriesSpec::new(vec![coef(0)]).unwrap())).unwrap();
        assert!(sys.algebraic.is_empty());
        assert_eq!(sys.differential.len(), 2);
    }

    #[test]
    fn joint_has_n_pressure_constraints_and_mass_balance() {
        let n = 4;
        let spec = JointSpec::new(coef(0), (1..=n).map(coef).collect()).unwrap();
        let sys = assemble_dae(&Network::Joint(spec)).unwrap();
        assert_eq!(sys.algebraic.len(), n + 1);
        let pressure = sys.constraints.iter().filter(|c| c.contains("p[")).count();
        let mass = sys
            .constraints
            .iter()
            .filter(|c| c.contains("mass"))
            .count();
        assert_eq!((pressure, mass), (n, 1));
        assert_eq!(sys.invariants.len(), n - 1);
    }

    #[test]
    fn star_two_by_two_algebraic_block() {
        let spec = StarSpec::new(vec![coef(1), coef(2)], vec![coef(3), coef(4)]).unwrap();
        let sys = assemble_dae(&Network::Star(spec)).unwrap();
        assert_eq!(
            sys.algebraic,
            vec![
                Variable::q_right(1),
                Variable::q_right(2),
                Variable::p_left(3),
                Variable::p_left(4),
                Variable::NodePressure
            ]
        );
        assert_eq!((sys.gz.nrows(), sys.gz.ncols()), (5, 5));
        assert_eq!(lti::numerical_rank(&sys.gz), 5);
    }

    #[test]
    fn zero_input_from_rest_stays_at_rest() {
        let spec = JointSpec::new(coef(0), vec![coef(1), coef(2)]).unwrap();
        let sys = assemble_dae(&Network::Joint(spec)).unwrap();
        let grid = lti::uniform_time_grid(5.0, 50).unwrap();
        let traj =
            simulate_dae(&sys, &InputSignal::zero(3), &DVector::zeros(6), &grid, 10).unwrap();
        assert!(traj.differential.iter().all(|x| x.amax() == 0.0));
        assert!(traj.algebraic.iter().all(|z| z.amax() == 0.0));
    }

    #[test]
    fn inconsistent_joining_pressures_are_rejected() {
        let spec = JointSpec::new(coef(0), vec![coef(1), coef(2)]).unwrap();
        let sys = assemble_dae(&Network::Joint(spec)).unwrap();
        let mut x0 = DVector::zeros(sys.differential.len());
        let i = sys
            .differential
            .iter()
            .position(|v| *v == Variable::p_right(2))
            .unwrap();
        x0[i] = 1.0;
        let err = simulate_dae(&sys, &InputSignal::zero(3), &x0, &[0.0, 1.0], 10).unwrap_err();
        assert!(matches!(err, Error::InconsistentInitialState(_)));
    }

    #[test]
    fn constraints_hold_along_a_step_response() {
        let spec = StarSpec::new(vec![coef(1), coef(2), coef(3)], vec![coef(4), coef(5)]).unwrap();
        let sys = assemble_dae(&Network::Star(spec)).unwrap();
        let grid = lti::uniform_time_grid(10.0, 100).unwrap();
        let u = InputSignal::step(0.0, &[1.0, -0.5, 0.3, 0.7, -0.2]);
        let traj =
            simulate_dae(&sys, &u, &DVector::zeros(sys.differential.len()), &grid, 20).unwrap();
        assert!(traj.max_constraint_residual <= CONSTRAINT_TOLERANCE);
        assert!(traj.max_invariant_drift <= CONSTRAINT_TOLERANCE);
        // mass balance at the node at every step
        let n = 3;
        for (k, _) in traj.times.iter().enumerate() {
            let inflow: f64 = (1..=n)
                .map(|j| traj.series(Variable::q_right(j)).unwrap()[k])
                .sum();
            let outflow: f64 = (4..=5)
                .map(|j| traj.series(Variable::q_left(j)).unwrap()[k])
                .sum();
            assert!((inflow - outflow).abs() <= 1e-12 * inflow.abs().max(outflow.abs()).max(1.0));
        }
    }

    #[test]
    fn single_pipe_certifies() {
        let net = Network::Series(SeriesSpec::new(vec![coef(0)]).unwrap());
        let model = net.build().unwrap();
        let sys = assemble_dae(&net).unwrap();
        let scenario = Scenario::step_response(&model, &[1.0, 0.5]).unwrap();
        let report = certify(&model, &sys, &scenario).unwrap();
        assert!(report.passed, "{report}");
    }

    #[test]
    fn certify_rejects_mismatched_labels() {
        let model = Network::Series(SeriesSpec::new(vec![coef(0), coef(1)]).unwrap())
            .build()
            .unwrap();
        let sys = assemble_dae(&Network::Series(SeriesSpec::new(vec![coef(0)]).unwrap())).unwrap();
        let scenario = Scenario::step_response(&model, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            certify(&model, &sys, &scenario),
            Err(Error::LabelMismatch(_))
        ));
    }
}
