//! The subcommands, as functions from parsed options to output text.

use std::str::FromStr;

use gasnet_core::lti::{
    self, bode, FrequencyGrid, InputSignal, Integrator, SimulationOptions, Waveform,
};
use gasnet_core::oracle::{assemble_dae, certify, Scenario, CERTIFY_TOLERANCE, DEFAULT_OVERSAMPLE};
use gasnet_core::{LabeledStateSpaceModel, Network, Quantity, SeriesSpec, Side, Variable};
use nalgebra::DVector;

use crate::description::{NetworkDescription, Role, Topology};
use crate::output::{matrices_csv, write_matrix_file, Csv};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Matrix,
}

/// Text for the main output plus an optional note for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub note: Option<String>,
    pub passed: bool,
}

impl Report {
    fn ok(body: String) -> Self {
        Self {
            body,
            note: None,
            passed: true,
        }
    }
}

fn core(e: gasnet_core::Error) -> CliError {
    CliError::Input(e.to_string())
}

fn model_of(desc: &NetworkDescription) -> Result<(Network, LabeledStateSpaceModel), CliError> {
    let network = desc.network().map_err(|e| CliError::Input(e.to_string()))?;
    let model = network.build().map_err(core)?;
    Ok((network, model))
}

pub fn build(desc: &NetworkDescription, format: Format) -> Result<Report, CliError> {
    let (_, model) = model_of(desc)?;
    Ok(Report::ok(match format {
        Format::Matrix => write_matrix_file(&model),
        Format::Csv => matrices_csv(&model),
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridOptions {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points_per_decade: Option<usize>,
}

impl GridOptions {
    /// Command-line values over description defaults over built-in defaults.
    pub fn resolve(&self, desc: &NetworkDescription) -> Result<FrequencyGrid, CliError> {
        let default = FrequencyGrid::default();
        let min = self
            .omega_min
            .or(desc.analysis.omega_min)
            .unwrap_or(default.omegas()[0]);
        let max = self
            .omega_max
            .or(desc.analysis.omega_max)
            .unwrap_or(*default.omegas().last().expect("default grid is non-empty"));
        let ppd = self
            .points_per_decade
            .or(desc.analysis.points_per_decade)
            .unwrap_or(60);
        FrequencyGrid::log_spaced(min, max, ppd).map_err(core)
    }
}

/// Magnitude curves in dB, per model and channel.
type Magnitudes = Vec<Vec<Vec<f64>>>;

fn bode_table(
    models: &[(String, &LabeledStateSpaceModel)],
    grid: &FrequencyGrid,
) -> Result<(Csv, Magnitudes), CliError> {
    let mut header = vec!["omega_rad_s".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut magnitudes = Vec::new();
    for (prefix, model) in models {
        let b = bode(model, grid).map_err(core)?;
        let mut mags = Vec::new();
        for ch in &b.channels {
            header.push(format!("{prefix}{}:mag_db", ch.name()));
            header.push(format!("{prefix}{}:phase_deg", ch.name()));
            columns.push(ch.magnitude_db.clone());
            columns.push(ch.phase_deg.clone());
            mags.push(ch.magnitude_db.clone());
        }
        magnitudes.push(mags);
    }
    let mut table = Csv::new(header);
    for (i, w) in grid.omegas().iter().enumerate() {
        let row: Vec<f64> = std::iter::once(*w)
            .chain(columns.iter().map(|c| c[i]))
            .collect();
        table.push(&row);
    }
    Ok((table, magnitudes))
}

pub fn freqresp(desc: &NetworkDescription, grid: &GridOptions) -> Result<Report, CliError> {
    let (_, model) = model_of(desc)?;
    let grid = grid.resolve(desc)?;
    let (table, _) = bode_table(&[(String::new(), &model)], &grid)?;
    Ok(Report::ok(table.render()))
}

/// `LABEL=WAVEFORM` with `WAVEFORM` one of `LEVEL`, `const:LEVEL`,
/// `step:TIME:LEVEL` or `sin:AMPLITUDE:OMEGA[:PHASE]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputAssignment {
    pub variable: Variable,
    pub waveform: Waveform,
}

impl FromStr for InputAssignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (label, wave) = s
            .split_once('=')
            .ok_or_else(|| format!("expected LABEL=WAVEFORM, found {s:?}"))?;
        let variable: Variable = label.trim().parse().map_err(|e| format!("{e}"))?;
        let fields: Vec<&str> = wave.trim().split(':').collect();
        let num = |t: &str| -> Result<f64, String> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("expected a number in {s:?}, found {t:?}"))
        };
        let waveform = match fields.as_slice() {
            [level] => Waveform::Constant(num(level)?),
            ["const", level] => Waveform::Constant(num(level)?),
            ["step", time, level] => Waveform::Step {
                time: num(time)?,
                level: num(level)?,
            },
            ["sin", amplitude, omega] => Waveform::Sinusoid {
                amplitude: num(amplitude)?,
                omega: num(omega)?,
                phase: 0.0,
            },
            ["sin", amplitude, omega, phase] => Waveform::Sinusoid {
                amplitude: num(amplitude)?,
                omega: num(omega)?,
                phase: num(phase)?,
            },
            _ => return Err(format!("unrecognized waveform {wave:?}; use LEVEL, const:LEVEL, step:TIME:LEVEL or sin:AMP:OMEGA[:PHASE]")),
        };
        Ok(Self { variable, waveform })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeOptions {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub oversample: Option<usize>,
}

fn time_grid(
    model: &LabeledStateSpaceModel,
    desc: &NetworkDescription,
    opts: &TimeOptions,
    default_steps: usize,
) -> Result<Vec<f64>, CliError> {
    let horizon = match opts.horizon.or(desc.analysis.horizon) {
        Some(h) => h,
        None => {
            10.0 / lti::slowest_decay_rate(model).ok_or_else(|| {
                CliError::Input("model has no decaying mode; pass --horizon".into())
            })?
        }
    };
    let steps = match opts.step {
        Some(dt) if dt > 0.0 && dt.is_finite() => (horizon / dt).round().max(1.0) as usize,
        Some(dt) => {
            return Err(CliError::Input(format!(
                "--step must be positive, got {dt}"
            )))
        }
        None => default_steps,
    };
    lti::uniform_time_grid(horizon, steps).map_err(core)
}

pub fn simulate(
    desc: &NetworkDescription,
    inputs: &[InputAssignment],
    opts: &TimeOptions,
) -> Result<Report, CliError> {
    let (network, model) = model_of(desc)?;
    let mut channels = vec![Waveform::Constant(0.0); model.input_dim()];
    for a in inputs {
        let i = model.input_index(a.variable).ok_or_else(|| {
            let names: Vec<String> = model.inputs().iter().map(|v| v.to_string()).collect();
            CliError::Input(format!(
                "{} is not an input; inputs are {}",
                a.variable,
                names.join(", ")
            ))
        })?;
        channels[i] = a.waveform;
    }
    let signal = InputSignal::new(channels);
    let grid = time_grid(&model, desc, opts, 1000)?;
    let integrator = if signal.is_piecewise_constant() {
        Integrator::ExactHold
    } else {
        Integrator::Rk4
    };
    let traj = lti::simulate(
        &model,
        &signal,
        &DVector::zeros(model.state_dim()),
        &grid,
        &SimulationOptions {
            integrator,
            oversample: opts
                .oversample
                .unwrap_or(SimulationOptions::default().oversample),
        },
    )
    .map_err(core)?;

    let internal = network.internal_variables();
    let header: Vec<String> = std::iter::once("t_s".to_string())
        .chain(model.states().iter().map(|v| v.to_string()))
        .chain(model.outputs().iter().map(|v| format!("y:{v}")))
        .chain(internal.iter().map(|v| v.to_string()))
        .collect();
    let mut table = Csv::new(header);
    for (k, t) in traj.times.iter().enumerate() {
        let x = &traj.states[k];
        let u = signal.value_at(*t);
        let values = network
            .reconstruct_internals(x.as_slice(), u.as_slice())
            .map_err(core)?;
        let row: Vec<f64> = std::iter::once(*t)
            .chain(x.iter().copied())
            .chain(traj.outputs[k].iter().copied())
            .chain(values.iter().map(|(_, v)| *v))
            .collect();
        table.push(&row);
    }
    Ok(Report::ok(table.render()))
}

/// Nominal value of a boundary input: the pipe's nominal inlet pressure or
/// nominal flow.
fn nominal(desc: &NetworkDescription, v: Variable) -> f64 {
    let pipe = v.pipe().and_then(|j| desc.pipe(j));
    match (pipe, v.quantity()) {
        (Some(p), Quantity::Pressure) => p.operating_point.inlet_pressure,
        (Some(p), Quantity::Flow) => p.operating_point.flow,
        (None, _) => 0.0,
    }
}

/// Default verification input: a step of 1 % of each input's nominal value
/// (1 unit where the nominal value is zero).
pub fn default_step_levels(desc: &NetworkDescription, model: &LabeledStateSpaceModel) -> Vec<f64> {
    model
        .inputs()
        .iter()
        .map(|v| {
            let n = nominal(desc, *v);
            if n == 0.0 {
                1.0
            } else {
                0.01 * n
            }
        })
        .collect()
}

pub fn verify(desc: &NetworkDescription, opts: &TimeOptions) -> Result<Report, CliError> {
    let (network, model) = model_of(desc)?;
    let levels = default_step_levels(desc, &model);
    let mut scenario = Scenario::step_response(&model, &levels).map_err(core)?;
    if opts.horizon.is_some() || opts.step.is_some() || desc.analysis.horizon.is_some() {
        let default_steps = scenario.t_grid.len() - 1;
        scenario.t_grid = time_grid(&model, desc, opts, default_steps)?;
    }
    scenario.oversample = opts.oversample.unwrap_or(DEFAULT_OVERSAMPLE);
    scenario.tolerance = CERTIFY_TOLERANCE;
    let sys = assemble_dae(&network).map_err(core)?;
    let report = certify(&model, &sys, &scenario).map_err(core)?;
    let header = format!(
        "{} network, {} states; step inputs {}; horizon {:.4e} s, {} grid intervals, {} substeps each\n",
        desc.topology,
        model.state_dim(),
        model
            .inputs()
            .iter()
            .zip(&levels)
            .map(|(v, l)| format!("{v}={l:e}"))
            .collect::<Vec<_>>()
            .join(" "),
        scenario.horizon(),
        scenario.t_grid.len() - 1,
        scenario.oversample
    );
    Ok(Report {
        body: format!("{header}{report}\n"),
        note: None,
        passed: report.passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub splits: Vec<usize>,
    pub total_length: Option<f64>,
    pub grid: GridOptions,
}

/// The same pipe cut into `n` equal sections for each `n` in `splits`, side by
/// side, with the largest pairwise magnitude deviation over the lowest decade
/// of the grid reported as a note.
pub fn compare_series(
    desc: &NetworkDescription,
    opts: &CompareOptions,
) -> Result<Report, CliError> {
    if desc.topology != Topology::Series
        || desc.pipes.len() != 1
        || desc.pipes[0].role != Role::Series
    {
        return Err(CliError::Input(
            "compare-series needs a description of a single series pipe".into(),
        ));
    }
    if opts.splits.is_empty() || opts.splits.contains(&0) {
        return Err(CliError::Input(
            "--splits needs positive section counts".into(),
        ));
    }
    let pipe = &desc.pipes[0];
    let mut params = pipe.params;
    if let Some(length) = opts.total_length {
        if !(length > 0.0 && length.is_finite()) {
            return Err(CliError::Input(format!(
                "--total-length must be positive, got {length}"
            )));
        }
        params.length = length;
    }
    let grid = opts.grid.resolve(desc)?;
    let models = opts
        .splits
        .iter()
        .map(|&n| {
            SeriesSpec::uniform_split(&params, &pipe.operating_point, n)
                .and_then(|s| Network::Series(s).build())
                .map_err(core)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let named: Vec<(String, &LabeledStateSpaceModel)> = opts
        .splits
        .iter()
        .zip(&models)
        .map(|(n, m)| (format!("n{n}:"), m))
        .collect();
    let (table, mags) = bode_table(&named, &grid)?;

    let first = grid.omegas()[0];
    let decade = grid
        .omegas()
        .iter()
        .take_while(|w| **w <= 10.0 * first * (1.0 + 1e-12))
        .count();
    let mut spread = 0.0_f64;
    for a in 0..mags.len() {
        for b in a + 1..mags.len() {
            for (ca, cb) in mags[a].iter().zip(&mags[b]) {
                for i in 0..decade {
                    spread = spread.max((ca[i] - cb[i]).abs());
                }
            }
        }
    }
    // flow-to-flow channel: output q[0].l, input q[n-1].r
    let flow_db = models
        .iter()
        .zip(&mags)
        .map(|(m, per_channel)| {
            let o = m.output_index(Variable::q_left(0)).expect("series output");
            let i = m
                .inputs()
                .iter()
                .position(|v| {
                    matches!(
                        v,
                        Variable::Boundary {
                            quantity: Quantity::Flow,
                            side: Side::Right,
                            ..
                        }
                    )
                })
                .expect("series flow input");
            per_channel[o * m.input_dim() + i][..decade]
                .iter()
                .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        })
        .fold(0.0_f64, f64::max);
    let note = format!(
        "lowest decade [{:e}, {:e}] rad/s: largest pairwise magnitude deviation {spread:.3e} dB; flow-to-flow gain within {flow_db:.3e} dB of 0 dB",
        first,
        grid.omegas()[decade - 1]
    );
    Ok(Report {
        body: table.render(),
        note: Some(note),
        passed: true,
    })
}
