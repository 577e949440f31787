use grading_core::calibration::procedures::{
    calibrate_ls_plant, calibrate_nfc, ls_sweep, record, stall_probes, start_pose, LEAD_IN,
};
use grading_core::calibration::*;
use grading_core::config::load_plant;
use grading_core::hydraulics::{orifice_flow, Direction, HydraulicCircuit, OrificeModel, PumpPressureMap};
use grading_core::kinematics::{Joint, PerJoint};
use grading_core::log::{GradingLog, LogRow};
use grading_core::par::Execution;
use grading_core::sim::{measure, SensorNoise};
use grading_core::Error;
use proptest::prelude::*;

fn pump() -> PumpPressureMap {
    PumpPressureMap::new(
        vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
        [30.0, 80.0, 140.0, 230.0, 300.0, 350.0]
            .iter()
            .map(|b| b * 1e5)
            .collect(),
    )
    .unwrap()
}

fn orifice(a: f64, b: f64, c: f64) -> OrificeModel {
    OrificeModel {
        a,
        b,
        c,
        x_min: (-c).max(0.0),
        x_max: 1.0,
    }
}

/// Noise-free (Q, P_f) samples on the given orifice, a few load levels per
/// command, all with positive pressure drop.
fn synthetic_samples(model: &OrificeModel, pump: &PumpPressureMap, commands: &[f64]) -> Vec<OrificeSample> {
    let mut out = Vec::new();
    for &x in commands {
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let p_f = frac * pump.pressure(x);
            let q = orifice_flow(model.resistance(x), pump.pressure(x) - p_f);
            out.push(OrificeSample {
                command: x,
                flow: q,
                load_pressure: p_f,
            });
        }
    }
    out
}

fn commands(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn max_log_error(fit: &OrificeModel, truth: &OrificeModel, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| (fit.resistance(x).ln() - truth.resistance(x).ln()).abs())
        .fold(0.0, f64::max)
}

// ---- LS ----

#[test]
fn ls_table_matches_plant_velocity_at_breakpoints() {
    let plant = load_plant("m445").unwrap();
    let ds = ls_sweep(
        &plant,
        &procedures::ls_sweep_commands(),
        &SensorNoise::NONE,
        Execution::Parallel,
    )
    .unwrap();
    let ff = calibrate_ls(&ds).unwrap();
    let FeedForwardTables::Ls(tables) = &ff.tables else {
        panic!("LS table expected")
    };
    for j in Joint::ALL {
        let HydraulicCircuit::Ls(truth) = &plant.params.circuits[j] else {
            panic!()
        };
        for run in ds.runs_for(j, Maneuver::Step) {
            // Ground truth against the load the run actually saw.
            let lo = run.onset + STEADY_WINDOW.0;
            let hi = run.onset + STEADY_WINDOW.1;
            let loads: Vec<f64> = run
                .log
                .rows
                .iter()
                .filter(|r| r.time >= lo && r.time <= hi)
                .map(|r| r.fn_pressure()[j])
                .collect();
            let p_f = loads.iter().sum::<f64>() / loads.len() as f64;
            let expected = truth.velocity(run.command, p_f);
            let got = tables[j].velocity(run.command);
            assert!(
                (got - expected).abs() <= 0.02 * expected.abs() + 1e-9,
                "{j} x={} got {got} expected {expected}",
                run.command
            );
        }
    }
}

#[test]
fn ls_zero_command_gives_zero_breakpoint() {
    let plant = load_plant("m445").unwrap();
    let ds = ls_sweep(&plant, &[0.0], &SensorNoise::NONE, Execution::Sequential).unwrap();
    for j in Joint::ALL {
        let t = calibrate_ls_joint(&ds, j).unwrap();
        assert_eq!(t.commands, vec![0.0]);
        assert_eq!(t.velocities, vec![0.0]);
    }
}

#[test]
fn ls_table_inverts_sampled_velocities_exactly() {
    let plant = load_plant("m445").unwrap();
    let ds = ls_sweep(
        &plant,
        &[-0.65, -0.35, 0.35, 0.65],
        &SensorNoise::NONE,
        Execution::Parallel,
    )
    .unwrap();
    let t = calibrate_ls_joint(&ds, Joint::Stick).unwrap();
    for (x, v) in t.commands.iter().zip(&t.velocities) {
        let (back, saturated) = t.command(*v);
        assert_eq!(back, *x);
        assert!(!saturated);
    }
}

#[test]
fn ls_rejects_short_runs_and_non_monotone_samples() {
    let plant = load_plant("m445").unwrap();
    let mut ds = ls_sweep(&plant, &[0.3, 0.6], &SensorNoise::NONE, Execution::Parallel).unwrap();

    let mut short = ds.clone();
    for run in &mut short.runs {
        run.log.rows.retain(|r| r.time <= run.onset + 2.5);
    }
    assert!(matches!(
        calibrate_ls_joint(&short, Joint::Boom),
        Err(Error::RunTooShort { .. })
    ));

    // Swapping the command tags makes velocity fall with command.
    for run in ds.runs.iter_mut().filter(|r| r.joint == Joint::Boom) {
        run.command = if run.command == 0.3 { 0.6 } else { 0.3 };
    }
    match calibrate_ls_joint(&ds, Joint::Boom) {
        Err(Error::NonMonotone { lo, hi }) => assert_eq!((lo, hi), (0.3, 0.6)),
        other => panic!("expected NonMonotone, got {other:?}"),
    }
}

// ---- pump map ----

#[test]
fn pump_map_recovered_from_stall_probes() {
    let plant = load_plant("case250").unwrap();
    let commands = procedures::pump_probe_commands();
    let HydraulicCircuit::Nfc(truth) = &plant.params.circuits[Joint::Bucket] else {
        panic!()
    };
    for d in [Direction::Extend, Direction::Retract] {
        let ds = stall_probes(
            &plant,
            Joint::Bucket,
            d,
            &commands,
            &SensorNoise::NONE,
            Execution::Parallel,
        )
        .unwrap();
        let map = probe_pump_map(&ds, Joint::Bucket, d).unwrap();
        let t = &truth.direction(d).pump_map;
        assert_eq!(map.commands, t.commands);
        for (got, want) in map.pressures.iter().zip(&t.pressures) {
            assert!((got - want).abs() <= 1e-6 * want, "{d:?}: {got} vs {want}");
        }
        // Full command stalls at the relief setting.
        let relief = truth.relief_pressure.pa();
        assert!((map.pressure(1.0) - relief).abs() <= 1e-6 * relief);
    }
}

#[test]
fn pump_map_averages_duplicate_probes() {
    let plant = load_plant("case250").unwrap();
    let mut ds = stall_probes(
        &plant,
        Joint::Bucket,
        Direction::Extend,
        &[0.3, 0.7],
        &SensorNoise::NONE,
        Execution::Sequential,
    )
    .unwrap();
    let mut copy = ds.runs[0].clone();
    for row in &mut copy.log.rows {
        let mut p = row.p_a();
        p[Joint::Bucket] += 4e5;
        row.set_p_a(p);
    }
    let first = stall_pressure(&ds.runs[0], &ds.machine).unwrap().unwrap();
    let second = stall_pressure(&copy, &ds.machine).unwrap().unwrap();
    assert!(second > first);
    ds.runs.push(copy);
    let map = probe_pump_map(&ds, Joint::Bucket, Direction::Extend).unwrap();
    assert_eq!(map.commands.len(), 2);
    assert!((map.pressure(0.3) - 0.5 * (first + second)).abs() < 1e-6);
}

#[test]
fn pump_probe_without_stall_is_missing() {
    let plant = load_plant("case250").unwrap();
    let mut ds = ls_sweep(&plant, &[0.5], &SensorNoise::NONE, Execution::Sequential).unwrap();
    for run in &mut ds.runs {
        run.maneuver = Maneuver::Stall;
    }
    match probe_pump_map(&ds, Joint::Stick, Direction::Extend) {
        Err(Error::MissingProbe { command }) => assert_eq!(command, 0.5),
        other => panic!("expected MissingProbe, got {other:?}"),
    }
}

// ---- orifice ----

#[test]
fn orifice_fit_recovers_generating_model() {
    let truth = orifice(2.0, 1.0, 0.1);
    let xs = commands(0.1, 1.0, 10);
    let est = resistance_estimates(&synthetic_samples(&truth, &pump(), &xs), &pump()).unwrap();
    let fit = fit_orifice_to_estimates(&est, Execution::Parallel).unwrap();
    assert!(
        max_log_error(&fit.model, &truth, &commands(0.1, 1.0, 91)) < 1e-3,
        "{:?}",
        fit.model
    );
}

#[test]
fn orifice_fit_follows_shifted_opening() {
    let xs = commands(0.1, 1.0, 10);
    let base = fit_orifice_to_estimates(
        &resistance_estimates(&synthetic_samples(&orifice(2.0, 1.0, 0.1), &pump(), &xs), &pump()).unwrap(),
        Execution::Parallel,
    )
    .unwrap();
    let shifted_truth = orifice(2.0, 1.0, 0.3);
    let shifted = fit_orifice_to_estimates(
        &resistance_estimates(&synthetic_samples(&shifted_truth, &pump(), &xs), &pump()).unwrap(),
        Execution::Parallel,
    )
    .unwrap();
    assert!(((shifted.model.c - base.model.c) - 0.2).abs() < 1e-3);
    assert!(shifted.cost < 1e-3);
    assert!(max_log_error(&shifted.model, &shifted_truth, &xs) < 1e-3);
}

#[test]
fn orifice_fit_over_three_decades_keeps_large_command_flow() {
    let truth = orifice(2.312e12, 1.0, -0.05);
    let xs = commands(0.08, 1.0, 12);
    let est = resistance_estimates(&synthetic_samples(&truth, &pump(), &xs), &pump()).unwrap();
    let span = est[0].resistance / est[est.len() - 1].resistance;
    assert!(span > 1e3, "span {span}");
    let fit = fit_orifice_to_estimates(&est, Execution::Parallel).unwrap();
    let q = |m: &OrificeModel| orifice_flow(m.resistance(1.0), pump().pressure(1.0) - 100e5);
    assert!((q(&fit.model) / q(&truth) - 1.0).abs() < 0.05);
}

#[test]
fn orifice_fit_error_cases() {
    let truth = orifice(2.0, 1.0, 0.1);
    let two = synthetic_samples(&truth, &pump(), &[0.4, 0.8]);
    assert!(matches!(
        resistance_estimates(&two, &pump()),
        Err(Error::Underdetermined { found: 2 })
    ));

    let mut bad = synthetic_samples(&truth, &pump(), &[0.3, 0.5, 0.8]);
    for s in bad.iter_mut().filter(|s| s.command == 0.5) {
        s.load_pressure = pump().pressure(0.5) + 20e5;
    }
    assert!(matches!(
        resistance_estimates(&bad, &pump()),
        Err(Error::DataQuality(_))
    ));
}

#[test]
fn orifice_objective_never_increases() {
    let truth = orifice(3.0, 1.0, -0.02);
    let est = resistance_estimates(&synthetic_samples(&truth, &pump(), &commands(0.1, 1.0, 7)), &pump()).unwrap();
    let fit = fit_orifice_to_estimates(&est, Execution::Sequential).unwrap();
    assert!(fit.history.len() > 1);
    assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*fit.history.last().unwrap(), fit.cost);
}

#[test]
fn orifice_fit_same_sequential_and_parallel() {
    let truth = orifice(2.0, 1.0, 0.1);
    let est = resistance_estimates(&synthetic_samples(&truth, &pump(), &commands(0.1, 1.0, 6)), &pump()).unwrap();
    let a = fit_orifice_to_estimates(&est, Execution::Sequential).unwrap();
    let b = fit_orifice_to_estimates(&est, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

/// End-to-end on the simulator: probes, progressive stalls, fit. Flow
/// predictions of every fitted direction against the plant's own law.
#[test]
fn nfc_pipeline_predicts_plant_flow() {
    let plant = load_plant("case250").unwrap();
    let cal = calibrate_nfc(&plant, &SensorNoise::NONE, Execution::Parallel).unwrap();
    cal.feedforward.validate().unwrap();
    for j in Joint::ALL {
        let HydraulicCircuit::Nfc(truth) = &plant.params.circuits[j] else {
            panic!()
        };
        for (d, c) in [Direction::Extend, Direction::Retract].into_iter().zip(&cal.joints[j]) {
            let t = truth.direction(d);
            for x in commands(0.2, 1.0, 9) {
                for p_f in [0.0, 50e5, 100e5] {
                    let want = t.flow(x, p_f);
                    let got = orifice_flow(c.orifice.model.resistance(x), c.pump.pressure(x) - p_f);
                    if want == 0.0 {
                        assert_eq!(got, 0.0, "{j} {d:?} x={x} p={p_f}");
                        continue;
                    }
                    assert!(
                        (got / want - 1.0).abs() < 0.05,
                        "{j} {d:?} x={x} p={p_f}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

// ---- 2D table ----

fn truth_table() -> (OrificeModel, PumpPressureMap, NfcTable) {
    let o = orifice(2.312e12, 1.0, -0.05);
    let p = pump();
    let grid = LutGrid::standard(&o, &p, 350e5);
    let t = build_nfc_lut(&o, &p, &grid);
    (o, p, t)
}

#[test]
fn nfc_table_round_trips_through_forward_law() {
    let (o, p, t) = truth_table();
    assert_eq!(t.flow.len(), FLOW_NODES);
    assert_eq!(t.load_pressure.len(), PRESSURE_NODES);
    let mut checked = 0;
    for (i, &q) in t.flow.iter().enumerate().skip(1) {
        for (j, &p_f) in t.load_pressure.iter().enumerate() {
            if t.saturated[i][j] {
                continue;
            }
            let back = orifice_flow(o.resistance(t.command[i][j]), p.pressure(t.command[i][j]) - p_f);
            assert!((back / q - 1.0).abs() < 0.005, "cell ({i},{j}): {back} vs {q}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn nfc_table_zero_flow_stores_onset() {
    let (o, p, t) = truth_table();
    for (j, &p_f) in t.load_pressure.iter().enumerate() {
        if t.saturated[0][j] {
            continue;
        }
        // Oracle: first command on a fine scan that passes any flow.
        let onset = (0..=100_000)
            .map(|k| k as f64 * 1e-5)
            .find(|&x| orifice_flow(o.resistance(x), p.pressure(x) - p_f) > 0.0)
            .unwrap();
        assert!(
            (t.command[0][j] - onset).abs() < 1e-4,
            "P_f {p_f}: {} vs {onset}",
            t.command[0][j]
        );
    }
}

#[test]
fn nfc_table_at_relief_is_saturated() {
    let (_, _, t) = truth_table();
    let last = t.load_pressure.len() - 1;
    assert_eq!(t.load_pressure[last], 350e5);
    assert!((0..t.flow.len()).all(|i| t.saturated[i][last] && t.command[i][last] == 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nfc_table_monotone_for_any_orifice(
        ln_a in 25.0f64..32.0,
        c in -0.08f64..0.2,
        p0 in 10.0f64..60.0,
    ) {
        let o = orifice(ln_a.exp(), 1.0, c);
        let p = PumpPressureMap::new(vec![0.1, 0.5, 1.0], vec![p0 * 1e5, 200e5, 350e5]).unwrap();
        let t = build_nfc_lut(&o, &p, &LutGrid::standard(&o, &p, 350e5));
        prop_assert!(t.validate().is_ok());
    }

    #[test]
    fn orifice_fit_within_tolerance_for_any_model(
        ln_a in 20.0f64..30.0,
        c in -0.05f64..0.3,
    ) {
        let truth = orifice(ln_a.exp(), 1.0, c);
        let xs = commands(0.1, 1.0, 8);
        let est = resistance_estimates(&synthetic_samples(&truth, &pump(), &xs), &pump()).unwrap();
        let fit = fit_orifice_to_estimates(&est, Execution::Sequential).unwrap();
        prop_assert!(max_log_error(&fit.model, &truth, &xs) < 1e-3);
    }
}

// ---- step response ----

/// Independent oracle: RK4 on the second-order model at 1 ms, sampled every
/// `dt`, with the input switched on at `tau`.
fn rk4_response(k: f64, zeta: f64, omega: f64, tau: f64, u: f64, dt: f64, end: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 1e-3;
    let f = |v: f64, a: f64, input: f64| {
        (
            a,
            -2.0 * zeta * omega * a - omega * omega * v + k * omega * omega * input,
        )
    };
    let (mut v, mut a) = (0.0, 0.0);
    let steps_per_sample = (dt / h).round() as usize;
    let n = (end / dt).round() as usize;
    let mut t = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut time = 0.0;
    for i in 0..=n {
        t.push(i as f64 * dt);
        y.push(v);
        for _ in 0..steps_per_sample {
            let input = if time + 0.5 * h >= tau { u } else { 0.0 };
            let (k1v, k1a) = f(v, a, input);
            let (k2v, k2a) = f(v + 0.5 * h * k1v, a + 0.5 * h * k1a, input);
            let (k3v, k3a) = f(v + 0.5 * h * k2v, a + 0.5 * h * k2a, input);
            let (k4v, k4a) = f(v + h * k3v, a + h * k3a, input);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            time += h;
        }
    }
    (t, y)
}

#[test]
fn step_fit_recovers_synthetic_parameters() {
    let dt = 0.01;
    let (t, y) = rk4_response(1.0, 0.9, 8.0, 0.2, 0.05, dt, 5.0);
    let fit = fit_step_samples(&t, &y, 0.05).unwrap();
    assert!((fit.k - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.zeta - 0.9).abs() < 0.05 * 0.9, "{fit:?}");
    assert!((fit.omega_n - 8.0).abs() < 0.05 * 8.0, "{fit:?}");
    assert!((fit.tau - 0.2).abs() <= dt, "{fit:?}");
    // Steady state of the fitted model.
    let far = step_response(&fit, 0.05, &[60.0]);
    assert!((far[0] - fit.k * 0.05).abs() < 1e-9);
}

#[test]
fn step_fit_of_overdamped_response_has_no_delay() {
    let dt = 0.01;
    let (t, y) = rk4_response(0.8, 5.0, 8.0, 0.0, 0.1, dt, 8.0);
    let fit = fit_step_samples(&t, &y, 0.1).unwrap();
    assert!(fit.tau < dt, "{fit:?}");
    assert!((fit.k - 0.8).abs() < 0.01 * 0.8);
}

#[test]
fn step_fit_rejects_non_settling_response() {
    let t: Vec<f64> = (0..500).map(|i| i as f64 * 0.01).collect();
    let y: Vec<f64> = t.iter().map(|t| 0.02 * t).collect();
    assert!(matches!(fit_step_samples(&t, &y, 0.05), Err(Error::FitDivergence(_))));
}

#[test]
fn step_fit_from_log_reads_onset_from_target_rate() {
    let dt = 0.01;
    let (t, y) = rk4_response(0.9, 0.7, 6.0, 0.15, 0.05, dt, 5.0);
    let mut log = GradingLog::new();
    let onset = 1.0;
    for i in 0..100 {
        let mut row = LogRow {
            time: i as f64 * dt,
            ..LogRow::default()
        };
        row.set_theta(PerJoint::splat(0.3));
        log.push(row);
    }
    for (tk, yk) in t.iter().zip(&y) {
        let mut row = LogRow {
            time: onset + tk,
            ..LogRow::default()
        };
        row.set_theta(PerJoint::splat(0.3));
        row.set_theta_dot(PerJoint::new(0.0, *yk, 0.0));
        row.set_target_rate(PerJoint::new(0.0, 0.05, 0.0));
        log.push(row);
    }
    let fit = fit_step_response(&log, Joint::Stick).unwrap();
    assert!((fit.k - 0.9).abs() < 0.05 * 0.9, "{fit:?}");
    assert!((fit.tau - 0.15).abs() <= dt, "{fit:?}");
}

// ---- inertia compensation ----

fn synthetic_log(rate: impl Fn(f64) -> f64) -> GradingLog {
    let plant = load_plant("case250").unwrap();
    let mut log = GradingLog::new();
    for i in 0..300 {
        let t = i as f64 * 0.01;
        let mut row = LogRow {
            time: t,
            ..LogRow::default()
        };
        row.set_theta(PerJoint::from_array(start_pose(
            &plant,
            Joint::Boom,
            Direction::Extend,
            0.3,
            false,
        )));
        row.set_theta_dot(PerJoint::new(rate(t), 0.0, 0.0));
        row.set_p_a(PerJoint::splat(120e5));
        row.set_p_b(PerJoint::splat(10e5));
        log.push(row);
    }
    log
}

#[test]
fn inertia_compensation_is_identity_at_constant_velocity() {
    let plant = load_plant("case250").unwrap();
    let log = synthetic_log(|_| 0.05);
    let comp = compensate_inertia(&log, &plant.machine).unwrap();
    let raw = cylinder_samples(&log, &plant.machine, Joint::Boom).unwrap();
    for (c, r) in comp[Joint::Boom].iter().zip(&raw) {
        assert!((c - r.force).abs() <= 1e-9 * r.force.abs());
    }
}

#[test]
fn inertia_force_is_positive_when_boom_accelerates_upward() {
    let plant = load_plant("case250").unwrap();
    let log = synthetic_log(|t| 0.04 * t);
    let comp = compensate_inertia(&log, &plant.machine).unwrap();
    let raw = cylinder_samples(&log, &plant.machine, Joint::Boom).unwrap();
    for (c, r) in comp[Joint::Boom].iter().zip(&raw).skip(10).take(250) {
        assert!(r.force - c > 0.0);
    }
}

#[test]
fn inertia_compensation_recovers_quasi_static_force_in_transient() {
    let plant = load_plant("case250").unwrap();
    let theta = start_pose(&plant, Joint::Boom, Direction::Extend, 0.3, false);
    let mut state = plant.initial_state(theta).unwrap();
    let mut log = GradingLog::new();
    let mut quasi_static = Vec::new();
    let steps = ((LEAD_IN + 2.0) / plant.dt()).round() as usize;
    for _ in 0..steps {
        let cmd = if state.clock >= LEAD_IN - 1e-9 {
            [0.8, 0.0, 0.0]
        } else {
            [0.0; 3]
        };
        plant.step_in_place(&mut state, cmd).unwrap();
        log.push(LogRow::from_frame(
            &measure(&state, &SensorNoise::NONE),
            &plant.machine,
            cmd,
        ));
        quasi_static.push(state.diagnostics[Joint::Boom].quasi_static_force);
    }
    let comp = compensate_inertia(&log, &plant.machine).unwrap();
    let raw = cylinder_samples(&log, &plant.machine, Joint::Boom).unwrap();
    let mut worst_raw: f64 = 0.0;
    for (k, row) in log.rows.iter().enumerate() {
        // Transient: from the first motion until the rate settles, away from
        // the ends of the smoothing window.
        if row.time < LEAD_IN + 0.2 || row.time > LEAD_IN + 1.2 {
            continue;
        }
        let qs = quasi_static[k];
        assert!(
            (comp[Joint::Boom][k] - qs).abs() <= 0.05 * qs.abs(),
            "t={:.2}: compensated {} vs quasi-static {qs}",
            row.time,
            comp[Joint::Boom][k]
        );
        worst_raw = worst_raw.max((raw[k].force - qs).abs() / qs.abs());
    }
    // The check is not vacuous: the raw force departs from the quasi-static one.
    assert!(worst_raw > 0.0);
}

#[test]
fn causal_slope_matches_linear_ramp() {
    let mut s = CausalSlope::new(SAVGOL_WINDOW);
    let mut last = 0.0;
    for i in 0..50 {
        let t = i as f64 * 0.01;
        last = s.push(t, 3.0 * t - 1.0);
    }
    assert!((last - 3.0).abs() < 1e-9);
}

// ---- serialization ----

#[test]
fn feedforward_and_dynamics_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plant = load_plant("m445").unwrap();
    let ff = calibrate_ls_plant(&plant, &SensorNoise::NONE, Execution::Parallel).unwrap();
    let path = dir.path().join("ff.toml");
    ff.save(&path).unwrap();
    assert_eq!(HydraulicFeedForward::load(&path).unwrap(), ff);

    let (o, p, t) = truth_table();
    let nfc = HydraulicFeedForward::new(
        "case250",
        grading_core::kinematics::Architecture::Nfc,
        FeedForwardTables::Nfc(PerJoint::splat(()).map(|_, _| NfcJointTables {
            extend: t.clone(),
            retract: build_nfc_lut(&o, &p, &LutGrid::standard(&o, &p, 350e5)),
        })),
        "00".into(),
    )
    .unwrap();
    let path = dir.path().join("nfc.toml");
    nfc.save(&path).unwrap();
    assert_eq!(HydraulicFeedForward::load(&path).unwrap(), nfc);

    let fit = JointDynamicsFit {
        k: 0.97,
        zeta: 0.85,
        omega_n: 7.5,
        tau: 0.12,
        fit_residual: 1e-4,
    };
    let dynamics = DynamicsFile::new("case250", PerJoint::splat(fit), "ab".into());
    let path = dir.path().join("dyn.toml");
    dynamics.save(&path).unwrap();
    assert_eq!(DynamicsFile::load(&path).unwrap(), dynamics);
}

#[test]
fn dataset_hash_is_stable_and_content_sensitive() {
    let plant = load_plant("m445").unwrap();
    let ds = ls_sweep(&plant, &[0.4], &SensorNoise::NONE, Execution::Sequential).unwrap();
    let again = ls_sweep(&plant, &[0.4], &SensorNoise::NONE, Execution::Parallel).unwrap();
    assert_eq!(ds.hash().unwrap(), again.hash().unwrap());
    let mut other = ds.clone();
    other.runs[0].command = 0.41;
    assert_ne!(ds.hash().unwrap(), other.hash().unwrap());
}

#[test]
fn recorded_log_has_one_row_per_step() {
    let plant = load_plant("m445").unwrap();
    let state = plant
        .initial_state(start_pose(&plant, Joint::Boom, Direction::Extend, 0.3, false))
        .unwrap();
    let log = record(&plant, state, 1.0, &SensorNoise::NONE, |_| [0.2, 0.0, 0.0]).unwrap();
    assert_eq!(log.len(), 101);
    assert!(log.timestamps_increasing());
}
