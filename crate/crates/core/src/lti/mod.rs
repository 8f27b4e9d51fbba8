//! Frequency- and time-domain analysis of labeled state-space models.

mod freq;
mod signal;
mod sim;

pub(crate) use freq::numerical_rank;
pub use freq::{
    bode, dc_gain, frequency_response, steady_state, unwrap_phase, Bode, BodeChannel,
    FrequencyGrid, FrequencyResponse, PointResponse,
};
pub use signal::{InputSignal, Waveform};
pub use sim::{
    hold_discretization, simulate, spectral_radius, uniform_time_grid, validate_time_grid,
    Integrator, SimulationOptions, TrajectoryReport,
};

use crate::model::LabeledStateSpaceModel;

/// Smallest `|Re λ|` over the eigenvalues of `A` with a nonzero real part,
/// i.e. the inverse of the dominant (slowest) time constant.
pub fn slowest_decay_rate(model: &LabeledStateSpaceModel) -> Option<f64> {
    let eig = model.a().complex_eigenvalues();
    let scale = eig.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    eig.iter()
        .map(|z| z.re.abs())
        .filter(|r| *r > 1e-12 * scale)
        .min_by(|a, b| a.total_cmp(b))
}
