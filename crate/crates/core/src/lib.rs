//! Control-oriented linear models of isothermal gas flow in pipe networks.
//!
//! - [`pipe`]: per-pipe linearization around an operating point.
//! - [`compose`]: series chains, n-pipe joints and n-to-m star junctions with
//!   the boundary constraints eliminated.
//! - [`lti`]: transfer matrices, Bode data, steady states and simulation.
//! - [`oracle`]: an independent differential-algebraic reference used to
//!   certify the composite models.

pub mod compose;
pub mod error;
pub mod lti;
pub mod model;
pub mod oracle;
pub mod pipe;

pub use compose::{
    build_joint, build_series, build_star, cofactor_products, eliminate_joint_flows, Cofactors,
    JointSpec, Network, SeriesSpec, StarSpec,
};
pub use error::{Error, Result};
pub use model::{LabeledStateSpaceModel, Quantity, Side, Variable};
pub use pipe::{
    compute_coefficients, single_pipe_model, LinearCoefficients, OperatingPoint, PipeParameters,
};
