//! Time-domain simulation of `ẋ = A x + B u(t)`, `y = C x`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::signal::InputSignal;
use crate::model::{LabeledStateSpaceModel, Variable};

/// Growth factor over the initial scale treated as numerical blow-up.
const BLOW_UP_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Classical fixed-step Runge–Kutta 4 with `min grid spacing / oversample`
    /// as the largest step.
    Rk4,
    /// Exact discretization over each grid interval with the input held at
    /// its value at the interval start. Exact for piecewise-constant inputs
    /// that switch on grid points.
    ExactHold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub integrator: Integrator,
    pub oversample: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4,
            oversample: 10,
        }
    }
}

/// States and outputs sampled on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    pub state_labels: Vec<Variable>,
    pub output_labels: Vec<Variable>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

impl TrajectoryReport {
    pub fn state_series(&self, v: Variable) -> Option<Vec<f64>> {
        let i = self.state_labels.iter().position(|s| *s == v)?;
        Some(self.states.iter().map(|x| x[i]).collect())
    }
}

pub fn validate_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidGrid(
            "time grid needs at least two points".into(),
        ));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Uniform grid of `steps + 1` points over `[0, horizon]`.
pub fn uniform_time_grid(horizon: f64, steps: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
        return Err(Error::InvalidGrid(format!(
            "need a positive horizon and step count, got {horizon} and {steps}"
        )));
    }
    Ok((0..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect())
}

/// Number of equal substeps of at most `h` covering `dt`.
pub(crate) fn substeps(dt: f64, h: f64) -> usize {
    ((dt / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0, |m, z| m.max(z.norm()))
}

pub fn simulate(
    model: &LabeledStateSpaceModel,
    signal: &InputSignal,
    x0: &DVector<f64>,
    t_grid: &[f64],
    options: &SimulationOptions,
) -> Result<TrajectoryReport> {
    validate_time_grid(t_grid)?;
    if signal.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input signal channels".into(),
            expected: model.input_dim(),
            found: signal.len(),
        });
    }
    if x0.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state".into(),
            expected: model.state_dim(),
            found: x0.len(),
        });
    }
    if options.oversample == 0 {
        return Err(Error::InvalidGrid(
            "oversampling factor must be positive".into(),
        ));
    }

    let scale = t_grid
        .iter()
        .map(|&t| signal.value_at(t).amax())
        .fold(x0.amax().max(1.0), f64::max);
    let limit = BLOW_UP_FACTOR * scale;

    let mut states = Vec::with_capacity(t_grid.len());
    states.push(x0.clone());
    let mut x = x0.clone();
    match options.integrator {
        Integrator::Rk4 => {
            let min_dt = t_grid
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let h_max = min_dt / options.oversample as f64;
            for w in t_grid.windows(2) {
                let k = substeps(w[1] - w[0], h_max);
                let h = (w[1] - w[0]) / k as f64;
                for s in 0..k {
                    let t = w[0] + s as f64 * h;
                    x = rk4_step(model, signal, &x, t, h);
                    if !(x.iter().all(|v| v.is_finite()) && x.amax() <= limit) {
                        return Err(Error::Unstable {
                            time: t + h,
                            step: h,
                            suggested_step: suggested_step(model.a(), h),
                        });
                    }
                }
                states.push(x.clone());
            }
        }
        Integrator::ExactHold => {
            let mut cache: HashMap<u64, (DMatrix<f64>, DMatrix<f64>)> = HashMap::new();
            for w in t_grid.windows(2) {
                let dt = w[1] - w[0];
                let (phi, gamma) = cache
                    .entry(dt.to_bits())
                    .or_insert_with(|| hold_discretization(model.a(), model.b(), dt));
                x = &*phi * &x + &*gamma * signal.value_at(w[0]);
                states.push(x.clone());
            }
        }
    }
    let outputs = states.iter().map(|x| model.c() * x).collect();
    Ok(TrajectoryReport {
        times: t_grid.to_vec(),
        state_labels: model.states().to_vec(),
        output_labels: model.outputs().to_vec(),
        states,
        outputs,
    })
}

fn rk4_step(
    model: &LabeledStateSpaceModel,
    signal: &InputSignal,
    x: &DVector<f64>,
    t: f64,
    h: f64,
) -> DVector<f64> {
    let f = |x: &DVector<f64>, t: f64| model.a() * x + model.b() * signal.value_at(t);
    let k1 = f(x, t);
    let k2 = f(&(x + &k1 * (h / 2.0)), t + h / 2.0);
    let k3 = f(&(x + &k2 * (h / 2.0)), t + h / 2.0);
    let k4 = f(&(x + &k3 * h), t + h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// RK4 is stable on the negative real axis up to |hλ| ≈ 2.78.
fn suggested_step(a: &DMatrix<f64>, h: f64) -> f64 {
    let rho = spectral_radius(a);
    if rho > 0.0 {
        (2.5 / rho).min(h / 2.0)
    } else {
        h / 2.0
    }
}

/// `(e^{A dt}, ∫₀^dt e^{A s} ds B)` from one exponential of the block matrix
/// `[[A, B], [0, 0]] dt`.
pub fn hold_discretization(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    block.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = block.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}
