use grading_core::config::load_plant;
use grading_core::hydraulics::{Direction, HydraulicCircuit};
use grading_core::kinematics::{cylinder_force, Joint};
use grading_core::sim::{
    measure, scan_surface, FlowDisturbance, HardPatch, Plant, PlantState, SensorNoise, SoilModel, GRAVITY,
    MAX_SOIL_FORCE,
};
use proptest::prelude::*;

fn case250() -> Plant {
    load_plant("case250").unwrap()
}

fn pose(plant: &Plant, p: [f64; 2], phi: f64) -> [f64; 3] {
    plant.chain().inverse(plant.cabin_pitch, p, phi).unwrap()
}

fn run(plant: &Plant, s: &mut PlantState, u: [f64; 3], seconds: f64) {
    let n = (seconds / plant.dt()).round() as usize;
    for _ in 0..n {
        plant.step_in_place(s, u).unwrap();
    }
}

/// Potential energy of the links and payload, from the chain points only.
fn potential(plant: &Plant, theta: &[f64; 3]) -> f64 {
    let pts = plant.chain().points(plant.cabin_pitch, theta);
    let m = plant.machine.mass.link_mass.to_array();
    let c = plant.machine.mass.com_fraction.to_array();
    let mut u = 0.0;
    for k in 0..3 {
        let z = pts[k][1] + c[k] * (pts[k + 1][1] - pts[k][1]);
        u += m[k] * GRAVITY * z;
    }
    u + plant.payload * GRAVITY * pts[3][1]
}

#[test]
fn gravity_torque_matches_energy_gradient() {
    let plant = case250().with_payload(800.0);
    let theta = pose(&plant, [8.0, 1.0], -0.6);
    let tau = plant.gravity_torque(&theta);
    for i in 0..3 {
        let h = 1e-6;
        let mut a = theta;
        let mut b = theta;
        a[i] += h;
        b[i] -= h;
        let fd = (potential(&plant, &a) - potential(&plant, &b)) / (2.0 * h);
        assert!(
            (tau[i] - fd).abs() < 1e-4 * fd.abs().max(1.0),
            "joint {i}: {} vs {fd}",
            tau[i]
        );
    }
}

#[test]
fn zero_command_in_air_only_advances_clock() {
    let plant = case250();
    let s0 = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    let mut s = s0.clone();
    run(&plant, &mut s, [0.0; 3], 1.0);
    assert!((s.clock - 1.0).abs() < 1e-12);
    let mut expect = s0.clone();
    expect.clock = s.clock;
    expect.steps = s.steps;
    assert_eq!(s, expect);
}

#[test]
fn steady_stick_velocity_follows_flow_law() {
    let plant = case250();
    let mut s = plant.initial_state(pose(&plant, [8.5, 2.0], -0.6)).unwrap();
    let x = 0.6;
    run(&plant, &mut s, [0.0, x, 0.0], 3.0);

    let theta = s.joints.theta;
    let j = Joint::Stick;
    let spec = plant.machine.joints[j];
    let gamma = spec.linkage.sensitivity(j, theta[1]).unwrap();
    // Load from the energy gradient plus viscous friction at the held rate.
    let h = 1e-6;
    let mut a = theta;
    let mut b = theta;
    a[1] += h;
    b[1] -= h;
    let tau = (potential(&plant, &a) - potential(&plant, &b)) / (2.0 * h) + spec.friction * s.joints.theta_dot[1];
    let p_f = Direction::Extend.load_pressure(gamma * tau, &spec.areas);
    let HydraulicCircuit::Nfc(c) = &plant.params.circuits[j] else {
        panic!()
    };
    let expected = c.flow(x, p_f) / spec.areas.a_a;
    let v = s.cylinders[j].velocity;
    assert!(v > 0.0);
    assert!((v - expected).abs() < 0.01 * expected, "{v} vs {expected}");
}

fn hard_soil(level: f64) -> SoilModel {
    SoilModel {
        hard_patches: vec![HardPatch {
            x_min: 0.0,
            x_max: 20.0,
            multiplier: f64::INFINITY,
        }],
        ..SoilModel::flat(level, [2.0, 12.0], 2.0e5)
    }
}

#[test]
fn hard_patch_stalls_at_relief() {
    let plant = case250();
    let theta = pose(&plant, [8.0, 0.0], -0.6);
    let plant = plant.with_soil(hard_soil(0.10)).unwrap();
    let mut s = plant.initial_state(theta).unwrap();
    run(&plant, &mut s, [0.0, 1.0, 0.0], 2.0);
    let d = s.diagnostics[Joint::Stick];
    assert!(d.stalled);
    assert_eq!(s.joints.theta_dot[1], 0.0);
    let relief = plant.params.circuits[Joint::Stick].relief_pressure();
    assert!(
        (d.function_pressure - relief).abs() < 1e-4 * relief,
        "{}",
        d.function_pressure
    );
    let f = s.cylinders[Joint::Stick].force(&plant.machine.joints[Joint::Stick].areas);
    assert!((f / plant.machine.joints[Joint::Stick].areas.a_a - relief).abs() < 1e-3 * relief);
    assert!(s.soil_force[0].abs() <= MAX_SOIL_FORCE);
}

#[test]
fn non_finite_command_is_rejected() {
    let plant = case250();
    let s = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    assert!(plant.step(&s, [0.0, f64::NAN, 0.0]).is_err());
}

#[test]
fn noiseless_measurement_is_ground_truth() {
    let plant = case250();
    let mut s = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    run(&plant, &mut s, [0.3, 0.5, -0.4], 1.0);
    let f = measure(&s, &SensorNoise::NONE);
    assert_eq!(f.theta, s.joints.theta);
    assert_eq!(f.theta_dot, s.joints.theta_dot);
    assert_eq!(f.timestamp, s.clock);
    for j in Joint::ALL {
        assert_eq!(f.p_a[j.index()], s.cylinders[j].p_a);
        assert_eq!(f.p_b[j.index()], s.cylinders[j].p_b);
    }
}

#[test]
fn noisy_measurement_is_reproducible() {
    let plant = case250();
    let s = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    let noise = SensorNoise {
        theta: 1e-3,
        theta_dot: 1e-3,
        pressure: 1e5,
        cabin_pitch: 1e-3,
        seed: 11,
    };
    let a = measure(&s, &noise);
    assert_eq!(a, measure(&s, &noise));
    assert_ne!(a, measure(&s, &SensorNoise { seed: 12, ..noise }));
    assert_ne!(a.theta, s.joints.theta);
}

#[test]
fn pressures_reproduce_reported_force() {
    let plant = case250();
    let mut s = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    for k in 0..200 {
        let u = [0.5 * (k as f64 * 0.05).sin(), 0.7, -0.3];
        plant.step_in_place(&mut s, u).unwrap();
        let f = measure(&s, &SensorNoise::NONE);
        for j in Joint::ALL {
            let areas = plant.machine.joints[j].areas;
            let fm = cylinder_force(f.p_a[j.index()], f.p_b[j.index()], &areas);
            let d = Direction::of(s.diagnostics[j].spool);
            let expect = d.sign() * s.diagnostics[j].function_pressure * d.area(&areas);
            assert!((fm - expect).abs() < 1e-6 * expect.abs().max(1.0));
        }
    }
}

#[test]
fn scan_untouched_soil_equals_profile_and_resolution_scales_count() {
    let soil = SoilModel {
        surface: vec![[2.0, 0.0], [6.0, 0.2], [12.0, -0.1]],
        ..SoilModel::flat(0.0, [2.0, 12.0], 1e5)
    };
    let plant = case250().with_soil(soil.clone()).unwrap();
    let s = plant.initial_state(pose(&plant, [8.0, 2.0], -0.6)).unwrap();
    let a = scan_surface(&s, 0.1);
    for [x, h] in &a {
        assert!((h - soil.initial_height(*x)).abs() < 1e-12);
    }
    assert_eq!(scan_surface(&s, 0.05).len(), 2 * a.len());
}

#[test]
fn perfect_pass_leaves_target_plane() {
    // Blade held 5 cm under the surface and dragged in by kinematic steps.
    let plant = case250().with_soil(SoilModel::flat(0.0, [2.0, 12.0], 1e5)).unwrap();
    let mut s = plant.initial_state(pose(&plant, [9.0, -0.05], -0.6)).unwrap();
    let mut prev = s.blade_position(&plant);
    let mut x = 9.0;
    while x > 6.0 {
        x -= 0.005;
        s.joints.theta = pose(&plant, [x, -0.05], -0.6);
        let p = s.blade_position(&plant);
        s.soil.as_mut().unwrap().cut(prev, p);
        prev = p;
    }
    for [sx, h] in scan_surface(&s, 0.01) {
        if (6.05..8.95).contains(&sx) {
            assert!((h + 0.05).abs() < 1e-9, "{sx}: {h}");
        }
    }
}

fn pseudo_random(seed: u64, k: usize) -> f64 {
    let mut z = seed.wrapping_add(k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z as f64 / u64::MAX as f64) * 2.0 - 1.0
}

#[test]
fn dead_time_shows_in_cross_correlation() {
    for name in ["case250", "m445"] {
        let plant = load_plant(name).unwrap();
        let (p, phi) = if name == "case250" {
            ([8.0, 2.0], -0.6)
        } else {
            ([4.5, 1.0], -0.6)
        };
        let mut s = plant.initial_state(pose(&plant, p, phi)).unwrap();
        let n = 400;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            let cmd = 0.6 + 0.3 * pseudo_random(3, k);
            plant.step_in_place(&mut s, [0.0, cmd, 0.0]).unwrap();
            u.push(cmd);
            v.push(s.cylinders[Joint::Stick].velocity);
        }
        let mu = u.iter().sum::<f64>() / n as f64;
        let mv = v.iter().sum::<f64>() / n as f64;
        let xcorr = |lag: usize| -> f64 { (0..n - lag).map(|k| (u[k] - mu) * (v[k + lag] - mv)).sum() };
        let best = (0..60).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        let expected = plant.dead_time_steps(Joint::Stick) as i64;
        assert!(
            (best as i64 - expected).abs() <= 1,
            "{name}: lag {best}, expected {expected}"
        );
    }
}

#[test]
fn seeded_runs_are_bit_identical() {
    let make = || {
        let mut plant = case250()
            .with_soil(SoilModel {
                roughness: 0.01,
                noise_seed: 5,
                ..SoilModel::flat(0.05, [2.0, 12.0], 2e5)
            })
            .unwrap();
        plant.disturbance = Some(FlowDisturbance {
            amplitude: 2e-5,
            hold: 0.3,
            seed: 9,
        });
        plant
    };
    let go = |plant: &Plant| {
        let mut s = plant.initial_state(pose(plant, [9.0, 0.2], -0.6)).unwrap();
        let mut out = Vec::new();
        for k in 0..300 {
            let u = [-0.3 + 0.1 * pseudo_random(1, k), 0.8, 0.1 * pseudo_random(2, k)];
            plant.step_in_place(&mut s, u).unwrap();
            out.push(measure(
                &s,
                &SensorNoise {
                    theta: 1e-4,
                    seed: 4,
                    ..SensorNoise::NONE
                },
            ));
        }
        (out, s)
    };
    let (a, sa) = go(&make());
    let (b, sb) = go(&make());
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn soil_never_rises_and_power_is_bounded(
        seed in 0u64..1000,
        depth in 0.0f64..0.3,
        gain in 1e4f64..5e5,
    ) {
        let plant = case250();
        let theta = pose(&plant, [9.0, 0.0], -0.6);
        let mut plant = plant.with_soil(SoilModel::flat(depth, [2.0, 12.0], gain)).unwrap();
        plant.disturbance = Some(FlowDisturbance { amplitude: 1e-5, hold: 0.2, seed });
        let mut s = plant.initial_state(theta).unwrap();
        let mut heights = s.soil.as_ref().unwrap().heights.clone();
        for k in 0..250 {
            let u = [
                0.6 * pseudo_random(seed, 3 * k),
                0.2 + 0.8 * pseudo_random(seed, 3 * k + 1).abs(),
                0.6 * pseudo_random(seed, 3 * k + 2),
            ];
            plant.step_in_place(&mut s, u).unwrap();
            let now = &s.soil.as_ref().unwrap().heights;
            prop_assert!(now.iter().zip(&heights).all(|(a, b)| a <= b));
            heights = now.clone();
            for j in Joint::ALL {
                let c = s.cylinders[j];
                let areas = plant.machine.joints[j].areas;
                let d = s.diagnostics[j];
                let power = c.force(&areas) * c.velocity;
                let hydraulic = d.supply_pressure * d.flow;
                prop_assert!(power <= hydraulic + 1e-9 * hydraulic.abs().max(1.0),
                    "{j}: {power} > {hydraulic}");
            }
        }
    }
}
