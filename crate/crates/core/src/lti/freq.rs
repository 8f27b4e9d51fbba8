//! Transfer matrices `G(jω) = C (jωI − A)⁻¹ B` evaluated point by point.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{LabeledStateSpaceModel, Variable};

/// Condition number above which `jωI − A` is treated as singular.
const MAX_CONDITION: f64 = 1e14;

/// Strictly increasing positive angular frequencies, rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidGrid("frequency grid is empty".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "frequency {w} is not a positive finite number"
            )));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { omegas })
    }

    /// Log-spaced grid from `min` to `max` inclusive.
    pub fn log_spaced(min: f64, max: f64, points_per_decade: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < omega_min < omega_max, got [{min}, {max}]"
            )));
        }
        if points_per_decade == 0 {
            return Err(Error::InvalidGrid(
                "points per decade must be positive".into(),
            ));
        }
        let (lo, hi) = (min.log10(), max.log10());
        let intervals = ((hi - lo) * points_per_decade as f64).round().max(1.0) as usize;
        let omegas = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    max
                } else {
                    10f64.powf(lo + (hi - lo) * i as f64 / intervals as f64)
                }
            })
            .collect();
        Self::new(omegas)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

impl Default for FrequencyGrid {
    /// 60 points per decade over `[1e-5, 1e1]` rad/s.
    fn default() -> Self {
        Self::log_spaced(1e-5, 1e1, 60).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointResponse {
    Solved {
        gain: DMatrix<Complex64>,
        /// `max |(jωI − A) Z − B|` for the solved `Z = (jωI − A)⁻¹ B`.
        residual: f64,
        condition: f64,
    },
    NearSingular {
        condition: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub inputs: Vec<Variable>,
    pub outputs: Vec<Variable>,
    pub omegas: Vec<f64>,
    pub points: Vec<PointResponse>,
}

impl FrequencyResponse {
    /// The gain at grid point `i`, or the near-singularity error there.
    pub fn gain(&self, i: usize) -> Result<&DMatrix<Complex64>> {
        match &self.points[i] {
            PointResponse::Solved { gain, .. } => Ok(gain),
            PointResponse::NearSingular { condition } => Err(Error::NearSingularFrequency {
                omega: self.omegas[i],
                condition: *condition,
            }),
        }
    }

    /// Complex response of one channel over the grid.
    pub fn channel(&self, output: usize, input: usize) -> Result<Vec<Complex64>> {
        (0..self.omegas.len())
            .map(|i| self.gain(i).map(|g| g[(output, input)]))
            .collect()
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frequency_response(
    model: &LabeledStateSpaceModel,
    grid: &FrequencyGrid,
) -> FrequencyResponse {
    let n = model.state_dim();
    let a = complexify(model.a());
    let b = complexify(model.b());
    let c = complexify(model.c());
    let points = grid
        .omegas()
        .iter()
        .map(|&omega| {
            let mut m = -a.clone();
            for i in 0..n {
                m[(i, i)] += Complex64::new(0.0, omega);
            }
            let lu = m.clone().lu();
            let inverse = match lu.try_inverse() {
                Some(inv) => inv,
                None => {
                    return PointResponse::NearSingular {
                        condition: f64::INFINITY,
                    }
                }
            };
            let condition = one_norm(&m) * one_norm(&inverse);
            if !(condition.is_finite() && condition <= MAX_CONDITION) {
                return PointResponse::NearSingular { condition };
            }
            let mut z = lu.solve(&b).expect("nonsingular after inverse");
            // one refinement step
            let r = &b - &m * &z;
            if let Some(dz) = lu.solve(&r) {
                z += dz;
            }
            let residual = (&m * &z - &b)
                .iter()
                .fold(0.0_f64, |acc, v| acc.max(v.norm()));
            PointResponse::Solved {
                gain: &c * z,
                residual,
                condition,
            }
        })
        .collect();
    FrequencyResponse {
        inputs: model.inputs().to_vec(),
        outputs: model.outputs().to_vec(),
        omegas: grid.omegas().to_vec(),
        points,
    }
}

/// Magnitude and unwrapped phase of one input→output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeChannel {
    pub input: Variable,
    pub output: Variable,
    pub magnitude_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
}

impl BodeChannel {
    pub fn name(&self) -> String {
        format!("{}->{}", self.input, self.output)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bode {
    pub omegas: Vec<f64>,
    /// Output-major: all inputs for output 0, then output 1, ...
    pub channels: Vec<BodeChannel>,
}

impl Bode {
    pub fn channel(&self, input: Variable, output: Variable) -> Option<&BodeChannel> {
        self.channels
            .iter()
            .find(|c| c.input == input && c.output == output)
    }
}

/// The first phase is placed in `[−225°, 135°)`, so channels with a negative
/// real low-frequency gain read −180°; later points are unwrapped by ±360°
/// steps between neighbours.
pub fn unwrap_phase(values: &[Complex64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for z in values {
        let raw = z.arg().to_degrees();
        let phase = match out.last() {
            None => {
                let mut p = raw;
                while p >= 135.0 {
                    p -= 360.0;
                }
                while p < -225.0 {
                    p += 360.0;
                }
                p
            }
            Some(&prev) => raw + 360.0 * ((prev - raw) / 360.0).round(),
        };
        out.push(phase);
    }
    out
}

pub fn bode(model: &LabeledStateSpaceModel, grid: &FrequencyGrid) -> Result<Bode> {
    let resp = frequency_response(model, grid);
    let mut channels = Vec::with_capacity(model.output_dim() * model.input_dim());
    for (o, output) in model.outputs().iter().enumerate() {
        for (i, input) in model.inputs().iter().enumerate() {
            let values = resp.channel(o, i)?;
            channels.push(BodeChannel {
                input: *input,
                output: *output,
                magnitude_db: values.iter().map(|z| 20.0 * z.norm().log10()).collect(),
                phase_deg: unwrap_phase(&values),
            });
        }
    }
    Ok(Bode {
        omegas: resp.omegas,
        channels,
    })
}

/// Rank of a square real matrix with relative singular-value threshold.
pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, v| a.max(*v));
    let tol = 1e-13 * max * m.nrows().max(1) as f64;
    sv.iter().filter(|v| **v > tol).count()
}

fn solve_nonsingular(
    a: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let rank = numerical_rank(a);
    if rank < n {
        return Err(Error::Singular { what, rank, dim: n });
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs).ok_or(Error::Singular {
        what,
        rank: n - 1,
        dim: n,
    })?;
    let r = rhs - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Equilibrium `x` of `0 = A x + B u` for constant `u`.
pub fn steady_state(model: &LabeledStateSpaceModel, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input vector".into(),
            expected: model.input_dim(),
            found: u.len(),
        });
    }
    let rhs = -(model.b() * u);
    let x = solve_nonsingular(
        model.a(),
        &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()),
        "state matrix A",
    )?;
    Ok(x.column(0).into_owned())
}

/// `−C A⁻¹ B`.
pub fn dc_gain(model: &LabeledStateSpaceModel) -> Result<DMatrix<f64>> {
    let z = solve_nonsingular(model.a(), model.b(), "state matrix A")?;
    Ok(-(model.c() * z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(n: usize) -> LabeledStateSpaceModel {
        let states: Vec<_> = (0..n).map(Variable::p_right).collect();
        let inputs: Vec<_> = (0..n).map(Variable::p_left).collect();
        LabeledStateSpaceModel::with_selected_outputs(
            -DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            states.clone(),
            inputs,
            states,
        )
        .unwrap()
    }

    #[test]
    fn first_order_lag_at_unit_frequency() {
        let grid = FrequencyGrid::new(vec![1.0]).unwrap();
        let r = frequency_response(&lag(2), &grid);
        let g = r.gain(0).unwrap();
        let expected = Complex64::new(1.0, 0.0) / Complex64::new(1.0, 1.0);
        assert!((g[(0, 0)] - expected).norm() < 1e-15);
        assert!((g[(1, 1)] - expected).norm() < 1e-15);
        assert_eq!(g[(0, 1)], Complex64::new(0.0, 0.0));
        assert!((g[(0, 0)].norm() - 0.5f64.sqrt()).abs() < 1e-15);

        let b = bode(&lag(1), &grid).unwrap();
        assert!((b.channels[0].magnitude_db[0] + 3.010299956639812).abs() < 1e-12);
        assert!((b.channels[0].phase_deg[0] + 45.0).abs() < 1e-12);
    }

    #[test]
    fn unit_gain_is_zero_db() {
        let m = LabeledStateSpaceModel::with_selected_outputs(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![Variable::p_right(0)],
            vec![Variable::p_left(0)],
            vec![Variable::p_right(0)],
        )
        .unwrap();
        let b = bode(&m, &FrequencyGrid::new(vec![1e-12]).unwrap()).unwrap();
        assert!(b.channels[0].magnitude_db[0].abs() < 1e-10);
    }

    #[test]
    fn singular_point_is_reported_per_frequency() {
        // eigenvalues ±j
        let m = LabeledStateSpaceModel::with_selected_outputs(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            vec![Variable::p_right(0), Variable::q_left(0)],
            vec![Variable::p_left(0)],
            vec![Variable::p_right(0)],
        )
        .unwrap();
        let grid = FrequencyGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
        let r = frequency_response(&m, &grid);
        assert!(r.gain(0).is_ok());
        assert!(matches!(
            r.gain(1),
            Err(Error::NearSingularFrequency { .. })
        ));
        assert!(r.gain(2).is_ok());
        assert!(bode(&m, &grid).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::log_spaced(1.0, 0.5, 10).is_err());
        let g = FrequencyGrid::default();
        assert_eq!(g.len(), 6 * 60 + 1);
        assert_eq!(g.omegas()[0], 1e-5);
        assert_eq!(*g.omegas().last().unwrap(), 10.0);
        // 60 points per decade: the 61st point is 1e-4
        assert!((g.omegas()[60] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn phase_unwrap_follows_continuous_rotation() {
        let values: Vec<Complex64> = (0..40)
            .map(|k| Complex64::from_polar(1.0, -(k as f64) * 0.2))
            .collect();
        let p = unwrap_phase(&values);
        for (k, v) in p.iter().enumerate() {
            assert!((v + (k as f64) * 0.2f64.to_degrees()).abs() < 1e-9);
        }
        // negative real axis starts at −180°
        let p = unwrap_phase(&[Complex64::new(-1.0, 1e-6), Complex64::new(-1.0, -1e-6)]);
        assert!((p[0] + 180.0).abs() < 1e-3 && (p[1] + 180.0).abs() < 1e-3);
    }

    #[test]
    fn steady_state_zero_input_and_singular_matrix() {
        let x = steady_state(&lag(3), &DVector::zeros(3)).unwrap();
        assert_eq!(x, DVector::zeros(3));
        let singular = LabeledStateSpaceModel::with_selected_outputs(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            DMatrix::zeros(2, 1),
            vec![Variable::p_right(0), Variable::q_left(0)],
            vec![Variable::p_left(0)],
            vec![],
        )
        .unwrap();
        match steady_state(&singular, &DVector::zeros(1)) {
            Err(Error::Singular { rank, dim, .. }) => assert_eq!((rank, dim), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert!(dc_gain(&singular).is_err());
    }

    #[test]
    fn lag_dc_gain_is_one() {
        let g = dc_gain(&lag(1)).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
    }
}
