#![allow(dead_code)]

use gasnet_core::{JointSpec, LinearCoefficients, Network, SeriesSpec, StarSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Coefficients with the physical sign pattern and well-damped pipe modes:
/// c_p < 0, c_pr < 0, c_pl ≥ |c_pr|, c_ql < 0.
pub fn coefficients(rng: &mut StdRng) -> LinearCoefficients {
    let outlet = -rng.gen_range(0.5..2.0);
    LinearCoefficients::new(
        -rng.gen_range(0.5..2.0),
        outlet,
        -outlet * (1.0 + rng.gen_range(0.0..0.3)),
        -rng.gen_range(0.5..2.0),
    )
}

/// Sign pattern only, over a wider spread of magnitudes.
pub fn wide_coefficients(rng: &mut StdRng) -> LinearCoefficients {
    LinearCoefficients::new(
        -rng.gen_range(0.2..5.0),
        -rng.gen_range(0.1..5.0),
        rng.gen_range(0.1..5.0),
        -rng.gen_range(0.01..5.0),
    )
}

pub fn draw(rng: &mut StdRng, n: usize, wide: bool) -> Vec<LinearCoefficients> {
    (0..n)
        .map(|_| {
            if wide {
                wide_coefficients(rng)
            } else {
                coefficients(rng)
            }
        })
        .collect()
}

pub fn series(rng: &mut StdRng, n: usize) -> Network {
    Network::Series(SeriesSpec::new(draw(rng, n, false)).unwrap())
}

pub fn joint(rng: &mut StdRng, n: usize) -> Network {
    let down = coefficients(rng);
    Network::Joint(JointSpec::new(down, draw(rng, n, false)).unwrap())
}

pub fn star(rng: &mut StdRng, n: usize, m: usize) -> Network {
    Network::Star(StarSpec::new(draw(rng, n, false), draw(rng, m, false)).unwrap())
}

pub fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.amax()
}
