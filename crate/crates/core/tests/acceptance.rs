//! One PASS/FAIL line per acceptance criterion, with its runtime budget.

mod common;

use std::time::{Duration, Instant};

use gasnet_core::compose::{
    assemble_joint, assemble_star, joint_block_formula, star_block_formula,
};
use gasnet_core::lti::{self, bode, dc_gain, frequency_response, FrequencyGrid, PointResponse};
use gasnet_core::oracle::{assemble_dae, certify, Scenario};
use gasnet_core::{
    eliminate_joint_flows, JointSpec, LabeledStateSpaceModel, Network, OperatingPoint,
    PipeParameters, Quantity, SeriesSpec, Side, StarSpec, Variable,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn run(id: u32, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    let passed = out.passed && in_time;
    println!(
        "criterion {id} [{}] {title}: {} ({:.2?} of {:.0?}{})",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed,
        budget,
        if in_time { "" } else { ", over budget" }
    );
    passed
}

fn figure_two() -> Outcome {
    let params = PipeParameters::circular(0.5, 10_000.0, 0.01, 518.3, 288.15, 0.9);
    let op = OperatingPoint {
        flow: 20.0,
        inlet_pressure: 5e6,
    };
    let default = FrequencyGrid::default();
    let lowest: Vec<f64> = default
        .omegas()
        .iter()
        .copied()
        .filter(|w| *w <= 10.0 * default.omegas()[0] * (1.0 + 1e-12))
        .collect();
    let grid = FrequencyGrid::new(lowest).unwrap();

    let mut flow_db_err = 0.0_f64;
    let mut phase_err = 0.0_f64;
    let mut curves: Vec<Vec<Vec<f64>>> = Vec::new();
    for n in 1..=3 {
        let model = Network::Series(SeriesSpec::uniform_split(&params, &op, n).unwrap())
            .build()
            .unwrap();
        let b = bode(&model, &grid).unwrap();
        let flow = b
            .channel(Variable::q_right(n - 1), Variable::q_left(0))
            .unwrap();
        let pressure = b
            .channel(Variable::q_right(n - 1), Variable::p_right(n - 1))
            .unwrap();
        flow_db_err = flow
            .magnitude_db
            .iter()
            .fold(flow_db_err, |m, v| m.max(v.abs()));
        phase_err = pressure
            .phase_deg
            .iter()
            .fold(phase_err, |m, v| m.max((v + 180.0).abs()));
        curves.push(b.channels.iter().map(|c| c.magnitude_db.clone()).collect());
    }
    let mut spread = 0.0_f64;
    for i in 0..3 {
        for j in i + 1..3 {
            for (ci, cj) in curves[i].iter().zip(&curves[j]) {
                spread = ci
                    .iter()
                    .zip(cj)
                    .fold(spread, |m, (a, b)| m.max((a - b).abs()));
            }
        }
    }
    outcome(
        flow_db_err <= 0.05 && phase_err <= 2.0 && spread < 0.1,
        format!("flow gain off 0 dB by {flow_db_err:.2e} dB, phase off -180° by {phase_err:.2e}°, spread {spread:.2e} dB"),
    )
}

fn explicit_two(c: &[f64], q0: f64, ql: &[f64]) -> Vec<f64> {
    let t = c[0] + c[1];
    vec![
        (c[0] * ql[0] + c[1] * (q0 - ql[1])) / t,
        (c[1] * ql[1] + c[0] * (q0 - ql[0])) / t,
    ]
}

fn explicit_three(c: &[f64], q0: f64, ql: &[f64]) -> Vec<f64> {
    let t = c[0] * c[1] + c[0] * c[2] + c[1] * c[2];
    vec![
        (c[1] * c[2] * (q0 - ql[1] - ql[2]) + (c[0] * c[1] + c[0] * c[2]) * ql[0]) / t,
        (c[0] * c[2] * (q0 - ql[0] - ql[2]) + (c[0] * c[1] + c[1] * c[2]) * ql[1]) / t,
        (c[0] * c[1] * (q0 - ql[0] - ql[1]) + (c[0] * c[2] + c[1] * c[2]) * ql[2]) / t,
    ]
}

fn elimination_identities() -> Outcome {
    let mut rng = common::rng(100);
    let (mut identity, mut explicit) = (0.0_f64, 0.0_f64);
    for n in 2..=6 {
        for _ in 0..1000 {
            let c: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.2..5.0)).collect();
            let q0 = rng.gen_range(-50.0..50.0);
            let ql: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let qr = eliminate_joint_flows(&c, q0, &ql).unwrap();
            let scale = qr
                .iter()
                .chain(&ql)
                .chain([&q0])
                .fold(1e-300_f64, |m, v| m.max(v.abs()));
            let sum: f64 = qr.iter().sum();
            identity = identity.max((sum - q0).abs() / scale);
            let rates: Vec<f64> = (0..n).map(|k| c[k] * (qr[k] - ql[k])).collect();
            let rate_scale = (0..n).fold(1e-300_f64, |m, k| {
                m.max((c[k] * qr[k]).abs()).max((c[k] * ql[k]).abs())
            });
            for r in &rates {
                identity = identity.max((r - rates[0]).abs() / rate_scale);
            }
            let printed = match n {
                2 => explicit_two(&c, q0, &ql),
                3 => explicit_three(&c, q0, &ql),
                _ => continue,
            };
            for (a, b) in qr.iter().zip(&printed) {
                explicit = explicit.max((a - b).abs() / scale);
            }
        }
    }
    outcome(
        identity <= 1e-12 && explicit <= 1e-14,
        format!("identity error {identity:.2e}, explicit-formula error {explicit:.2e}"),
    )
}

fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(f64::MIN_POSITIVE)
}

fn realizations() -> Outcome {
    let mut rng = common::rng(200);
    let mut worst = 0.0_f64;
    let mut c_exact = true;
    for n in 1..=5 {
        let coefs = common::draw(&mut rng, n + 1, true);
        let spec = JointSpec::new(coefs[0], coefs[1..].to_vec()).unwrap();
        let m = assemble_joint(&spec).unwrap();
        let (a, b, c) = joint_block_formula(&spec).unwrap();
        worst = worst
            .max(relative_gap(m.a(), &a))
            .max(relative_gap(m.b(), &b));
        c_exact &= *m.c() == c;
        for k in 1..=5 {
            let spec = StarSpec::new(
                common::draw(&mut rng, n, true),
                common::draw(&mut rng, k, true),
            )
            .unwrap();
            let m = assemble_star(&spec).unwrap();
            let s = star_block_formula(&spec).unwrap().summed().unwrap();
            worst = worst
                .max(relative_gap(m.a(), s.a()))
                .max(relative_gap(m.b(), s.b()));
            c_exact &= m.c() == s.c();
        }
    }
    outcome(
        worst <= 1e-14 && c_exact,
        format!("largest relative entry gap {worst:.2e}, output selectors identical: {c_exact}"),
    )
}

fn conservation() -> Outcome {
    let mut rng = common::rng(300);
    let mut worst = 0.0_f64;
    for trial in 0..100 {
        let net = if trial % 2 == 0 {
            let n = rng.gen_range(1..=5);
            common::joint(&mut rng, n)
        } else {
            let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            common::star(&mut rng, n, m)
        };
        let model = net.build().unwrap();
        let u = DVector::from_fn(model.input_dim(), |_, _| rng.gen_range(-10.0..10.0));
        let x = lti::steady_state(&model, &u).unwrap();
        let internals = net
            .reconstruct_internals(x.as_slice(), u.as_slice())
            .unwrap();
        let joined: f64 = internals
            .iter()
            .filter(|(v, _)| {
                matches!(
                    v,
                    Variable::Boundary {
                        quantity: Quantity::Flow,
                        side: Side::Right,
                        ..
                    }
                )
            })
            .map(|(_, q)| q)
            .sum();
        let state = |v: Variable| x[model.state_index(v).unwrap()];
        let leaving = match &net {
            Network::Joint(_) => state(Variable::q_left(0)),
            Network::Star(s) => {
                let n = s.joining_count();
                (n + 1..=n + s.branching_count())
                    .map(|j| state(Variable::q_left(j)))
                    .sum()
            }
            Network::Series(_) => unreachable!(),
        };
        worst = worst
            .max((joined - leaving).abs() / joined.abs().max(leaving.abs()).max(f64::MIN_POSITIVE));
    }
    outcome(
        worst <= 1e-9,
        format!("largest relative imbalance {worst:.2e} over 100 scenarios"),
    )
}

fn oracle() -> Outcome {
    let mut rng = common::rng(400);
    let mut nets = Vec::new();
    for n in 1..=5 {
        nets.push(common::series(&mut rng, n));
        nets.push(common::joint(&mut rng, n));
    }
    for n in 1..=4 {
        for m in 1..=4 {
            nets.push(common::star(&mut rng, n, m));
        }
    }
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for net in &nets {
        let model = net.build().unwrap();
        let levels: Vec<f64> = (0..model.input_dim())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let scenario = Scenario::step_response(&model, &levels).unwrap();
        let report = certify(&model, &assemble_dae(net).unwrap(), &scenario).unwrap();
        worst = worst.max(report.max_rel_error());
        failures += usize::from(!report.passed);
    }

    // the literal reading in which every part evolves under A₁
    let mut literal_fails = 0;
    let mut literal_error = f64::INFINITY;
    for _ in 0..3 {
        let net = common::star(&mut rng, 2, 2);
        let Network::Star(spec) = &net else {
            unreachable!()
        };
        let literal = star_block_formula(spec)
            .unwrap()
            .first_block_only()
            .unwrap();
        let scenario =
            Scenario::step_response(&net.build().unwrap(), &[1.0, 0.5, -0.5, 0.25]).unwrap();
        let report = certify(&literal, &assemble_dae(&net).unwrap(), &scenario).unwrap();
        literal_fails += usize::from(!report.passed);
        literal_error = literal_error.min(report.max_rel_error());
    }
    outcome(
        failures == 0 && literal_fails > 0,
        format!(
            "{} networks, {failures} failed, worst relative error {worst:.2e}; literal star reading failed {literal_fails}/3 (smallest error {literal_error:.2e})",
            nets.len()
        ),
    )
}

fn rk4_order() -> f64 {
    let model = LabeledStateSpaceModel::with_selected_outputs(
        DMatrix::from_element(1, 1, -2.0),
        DMatrix::from_element(1, 1, 1.0),
        vec![Variable::p_right(0)],
        vec![Variable::p_left(0)],
        vec![Variable::p_right(0)],
    )
    .unwrap();
    let grid = lti::uniform_time_grid(4.0, 40).unwrap();
    let zero = lti::InputSignal::zero(1);
    let x0 = DVector::from_element(1, 1.0);
    let err = |oversample| {
        let run = |integrator| {
            lti::simulate(
                &model,
                &zero,
                &x0,
                &grid,
                &lti::SimulationOptions {
                    integrator,
                    oversample,
                },
            )
            .unwrap()
        };
        let (rk, exact) = (run(lti::Integrator::Rk4), run(lti::Integrator::ExactHold));
        rk.states
            .iter()
            .zip(&exact.states)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).amax()))
    };
    (err(1) / err(2)).log2()
}

fn numerics() -> Outcome {
    let order = rk4_order();

    let mut rng = common::rng(500);
    let mut reductions = Vec::new();
    let (c0, c1, c2) = (
        common::coefficients(&mut rng),
        common::coefficients(&mut rng),
        common::coefficients(&mut rng),
    );
    reductions.push(Network::Series(SeriesSpec::new(vec![c0]).unwrap()));
    reductions.push(Network::Series(SeriesSpec::new(vec![c1, c0]).unwrap()));
    reductions.push(Network::Joint(JointSpec::new(c0, vec![c1]).unwrap()));
    reductions.push(Network::Star(StarSpec::new(vec![c1], vec![c2]).unwrap()));

    let mut residual_ratio = 0.0_f64;
    let mut dc_error = 0.0_f64;
    let grid = FrequencyGrid::default();
    let near_zero = FrequencyGrid::new(vec![1e-9]).unwrap();
    for net in reductions.iter().chain([
        &common::series(&mut rng, 5),
        &common::joint(&mut rng, 4),
        &common::star(&mut rng, 3, 4),
    ]) {
        let model = net.build().unwrap();
        let b_norm = model.b().amax();
        for p in frequency_response(&model, &grid).points {
            residual_ratio = match p {
                PointResponse::Solved { residual, .. } => residual_ratio.max(residual / b_norm),
                PointResponse::NearSingular { .. } => f64::INFINITY,
            };
        }
    }
    for net in &reductions {
        let model = net.build().unwrap();
        let dc = dc_gain(&model).unwrap().map(|v| Complex64::new(v, 0.0));
        let low = frequency_response(&model, &near_zero);
        let g = low.gain(0).unwrap();
        let err = (g - &dc).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        dc_error = dc_error.max(err / dc.iter().fold(0.0_f64, |m, z| m.max(z.norm())));
    }
    outcome(
        (3.7..=4.3).contains(&order) && residual_ratio <= 1e-10 && dc_error <= 1e-6,
        format!("RK4 order {order:.3}, residual/|B| {residual_ratio:.2e}, dc-gain vs G(j1e-9) {dc_error:.2e}"),
    )
}

fn main() {
    let results = [
        run(
            1,
            "low-frequency coincidence of 1, 2 and 3 sections",
            Duration::from_secs(1),
            figure_two,
        ),
        run(
            2,
            "junction flow elimination identities",
            Duration::from_secs(1),
            elimination_identities,
        ),
        run(
            3,
            "joint and star realizations",
            Duration::from_secs(1),
            realizations,
        ),
        run(
            4,
            "steady-state conservation of mass",
            Duration::from_secs(1),
            conservation,
        ),
        run(5, "oracle certification", Duration::from_secs(30), oracle),
        run(6, "numerics", Duration::from_secs(5), numerics),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
