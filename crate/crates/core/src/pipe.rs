//! Single-pipe linearization.
//!
//! Each pipe contributes two states, the outlet pressure deviation `p.r` and
//! the inlet mass-flow deviation `q.l`, driven by the inlet pressure `p.l` and
//! the outlet flow `q.r`:
//!
//! ```text
//! ṗ_r = c_p (q_r − q_l)
//! q̇_l = c_pr p_r + c_pl p_l + c_ql q_l
//! ```
//!
//! All quantities are deviations from the operating point, in SI units.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LabeledStateSpaceModel, Variable};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Physical constants of one pipe (SI units throughout).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeParameters {
    /// Cross-sectional area, m².
    pub area: f64,
    /// Inside diameter, m.
    pub diameter: f64,
    /// Length, m.
    pub length: f64,
    /// Net rise from inlet to outlet, m. May be negative.
    pub elevation_change: f64,
    /// Darcy friction factor.
    pub friction: f64,
    /// Specific gas constant, m²/(s²·K).
    pub gas_constant: f64,
    /// Gas temperature, K.
    pub temperature: f64,
    /// Compressibility factor.
    pub compressibility: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl PipeParameters {
    /// Circular pipe with area derived from the diameter and standard gravity.
    pub fn circular(
        diameter: f64,
        length: f64,
        friction: f64,
        gas_constant: f64,
        temperature: f64,
        compressibility: f64,
    ) -> Self {
        Self {
            area: std::f64::consts::PI * diameter * diameter / 4.0,
            diameter,
            length,
            elevation_change: 0.0,
            friction,
            gas_constant,
            temperature,
            compressibility,
            gravity: STANDARD_GRAVITY,
        }
    }

    /// `R_s · T_0 · z_0`, the squared isothermal speed of sound.
    pub fn rtz(&self) -> f64 {
        self.gas_constant * self.temperature * self.compressibility
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("area", self.area, Bound::Positive),
            ("diameter", self.diameter, Bound::Positive),
            ("length", self.length, Bound::Positive),
            ("elevation_change", self.elevation_change, Bound::Any),
            ("friction", self.friction, Bound::NonNegative),
            ("gas_constant", self.gas_constant, Bound::Positive),
            ("temperature", self.temperature, Bound::Positive),
            ("compressibility", self.compressibility, Bound::Positive),
            ("gravity", self.gravity, Bound::NonNegative),
        ];
        for (field, value, bound) in fields {
            bound.check(field, value)?;
        }
        Ok(())
    }
}

/// Nominal state the pipe is linearized around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Nominal mass flow, kg/s. Must be non-negative: the flow direction is
    /// fixed to the pipe's positive x axis.
    pub flow: f64,
    /// Nominal inlet pressure, Pa.
    pub inlet_pressure: f64,
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        Bound::NonNegative.check("nominal_flow", self.flow)?;
        Bound::Positive.check("nominal_inlet_pressure", self.inlet_pressure)
    }
}

#[derive(Clone, Copy)]
enum Bound {
    Any,
    Positive,
    NonNegative,
}

impl Bound {
    fn check(self, field: &str, value: f64) -> Result<()> {
        let reason = if !value.is_finite() {
            Some("must be finite")
        } else {
            match self {
                Bound::Any => None,
                Bound::Positive if value <= 0.0 => Some("must be positive"),
                Bound::NonNegative if value < 0.0 => Some("must be non-negative"),
                _ => None,
            }
        };
        match reason {
            Some(reason) => Err(Error::InvalidParameter {
                field: field.to_string(),
                value,
                reason,
            }),
            None => Ok(()),
        }
    }
}

/// The four scalars of the linearized pipe ODEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoefficients {
    /// `c_p`: rate of outlet pressure per unit flow imbalance.
    pub pressure_rate: f64,
    /// `c_pr`: flow acceleration per unit outlet pressure.
    pub outlet_pressure_gain: f64,
    /// `c_pl`: flow acceleration per unit inlet pressure.
    pub inlet_pressure_gain: f64,
    /// `c_ql`: flow self-feedback from friction, 1/s.
    pub flow_damping: f64,
}

impl LinearCoefficients {
    pub const fn new(
        pressure_rate: f64,
        outlet_pressure_gain: f64,
        inlet_pressure_gain: f64,
        flow_damping: f64,
    ) -> Self {
        Self {
            pressure_rate,
            outlet_pressure_gain,
            inlet_pressure_gain,
            flow_damping,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.pressure_rate * factor,
            self.outlet_pressure_gain * factor,
            self.inlet_pressure_gain * factor,
            self.flow_damping * factor,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("pressure_rate", self.pressure_rate),
            ("outlet_pressure_gain", self.outlet_pressure_gain),
            ("inlet_pressure_gain", self.inlet_pressure_gain),
            ("flow_damping", self.flow_damping),
        ] {
            Bound::Any.check(field, value)?;
        }
        Ok(())
    }
}

pub fn compute_coefficients(
    params: &PipeParameters,
    op: &OperatingPoint,
) -> Result<LinearCoefficients> {
    params.validate()?;
    op.validate()?;
    let PipeParameters {
        area,
        diameter,
        length,
        elevation_change,
        friction,
        gravity,
        ..
    } = *params;
    let rtz = params.rtz();
    let (q, p) = (op.flow, op.inlet_pressure);

    let pressure_rate = -rtz / (area * length);
    let outlet_pressure_gain = -area / length;
    let inlet_pressure_gain = area / length
        + friction * rtz / (2.0 * diameter * area) * (q * q.abs()) / (p * p)
        - area * gravity * elevation_change / (rtz * length);
    let flow_damping = -friction * rtz / (diameter * area) * q.abs() / p;

    let c = LinearCoefficients::new(
        pressure_rate,
        outlet_pressure_gain,
        inlet_pressure_gain,
        flow_damping,
    );
    // Overflow on extreme inputs is still a validation failure.
    c.validate()?;
    Ok(c)
}

/// The 2-state model with state `[p.r, q.l]` and input `[p.l, q.r]`, using
/// pipe index 0 in the labels.
pub fn single_pipe_model(c: &LinearCoefficients) -> Result<LabeledStateSpaceModel> {
    single_pipe_model_indexed(c, 0)
}

pub fn single_pipe_model_indexed(
    c: &LinearCoefficients,
    pipe: usize,
) -> Result<LabeledStateSpaceModel> {
    c.validate()?;
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            0.0,
            -c.pressure_rate,
            c.outlet_pressure_gain,
            c.flow_damping,
        ],
    );
    let b = DMatrix::from_row_slice(2, 2, &[0.0, c.pressure_rate, c.inlet_pressure_gain, 0.0]);
    let states = vec![Variable::p_right(pipe), Variable::q_left(pipe)];
    LabeledStateSpaceModel::new(
        a,
        b,
        DMatrix::identity(2, 2),
        states.clone(),
        vec![Variable::p_left(pipe), Variable::q_right(pipe)],
        states,
    )
}

/// Convenience for series chains: carries one inlet pressure and flow down
/// the chain using the steady momentum balance of each pipe (friction and
/// gravity), producing a per-pipe operating point. This is a helper for
/// describing a chain, not part of the linearization itself.
pub fn propagate_series_operating_points(
    pipes: &[PipeParameters],
    inlet_pressure: f64,
    flow: f64,
) -> Result<Vec<OperatingPoint>> {
    let mut p = inlet_pressure;
    let mut points = Vec::with_capacity(pipes.len());
    for (k, pipe) in pipes.iter().enumerate() {
        pipe.validate()?;
        let op = OperatingPoint {
            flow,
            inlet_pressure: p,
        };
        op.validate().map_err(|e| match e {
            Error::InvalidParameter { value, reason, .. } => Error::InvalidParameter {
                field: format!("pipes[{k}].nominal_inlet_pressure (propagated)"),
                value,
                reason,
            },
            other => other,
        })?;
        let rtz = pipe.rtz();
        p = p * (1.0 - pipe.gravity * pipe.elevation_change / rtz)
            - pipe.length * pipe.friction * rtz * flow * flow.abs()
                / (2.0 * pipe.diameter * pipe.area * pipe.area * p);
        points.push(op);
    }
    Ok(points)
}
