use std::f64::consts::PI;

use tribody::casimir::{CasimirTable, TableGrid};
use tribody::dynamics::*;
use tribody::physics::constants::{hz, BOLTZMANN};
use tribody::reduced::{resonant_modulation, transduction_ratio};
use tribody::system::{DriveSettings, SystemConfig, TablePair};
use tribody::Error;

const MASS: f64 = 1.45e-10;

fn ideal_tables(cfg: &SystemConfig) -> TablePair {
    let grid = TableGrid {
        min: 50e-9,
        max: 1e-6,
        points: 120,
    };
    TablePair::from_table(CasimirTable::ideal(cfg.geometry.r1, grid).unwrap(), cfg.geometry.r2).unwrap()
}

fn base(d1: f64, d2: f64) -> SystemConfig {
    SystemConfig::with_masses([MASS; 3], d1, d2).unwrap()
}

#[test]
fn relaxes_onto_static_equilibrium() {
    let cfg = base(120e-9, 130e-9);
    let tables = ideal_tables(&cfg);
    let sim = Simulator::new(&cfg, &tables).unwrap();
    let xs = sim.equilibrium();
    let mut state = sim.unloaded_state(0);
    sim.advance(&mut state, 3.0).unwrap();
    let k: Vec<f64> = cfg.cantilevers.iter().map(|c| c.k_spring).collect();

    // independent oracle: fixed-point solve of k·X = F(X) from the unloaded gaps
    let gap0 = (cfg.geometry.d1 - xs[0] + xs[1], cfg.geometry.d2 - xs[1] + xs[2]);
    let f = |x: [f64; 3]| {
        let a = tables.first.force(gap0.0 + x[0] - x[1]).unwrap();
        let b = tables.second.force(gap0.1 + x[1] - x[2]).unwrap();
        [-a, a - b, b]
    };
    let mut x = [0.0; 3];
    for _ in 0..200 {
        let fx = f(x);
        x = std::array::from_fn(|i| fx[i] / k[i]);
    }
    for i in 0..3 {
        let absolute = state.x[i] + xs[i];
        assert!((absolute - x[i]).abs() <= 1e-6 * x[i].abs(), "cantilever {i}: {absolute:e} vs {:e}", x[i]);
        let fnet = f(x)[i];
        assert!((fnet.abs() - (k[i] * absolute).abs()).abs() <= 1e-6 * fnet.abs());
    }
}

#[test]
fn free_cantilever_rings_at_natural_frequency() {
    let mut cfg = base(200e-9, 200e-9);
    cfg.integrator.stride = 1;
    let sim = Simulator::without_casimir(&cfg).unwrap().clamp(2).clamp(3);
    let mut state = SimulationState::new([1e-9, 0.0, 0.0], [0.0; 3], 0);
    let trace = sim.record(&mut state, 0.4, 1, "ring").unwrap();
    let x = trace.trace(1);
    assert!(trace.trace(2).iter().chain(trace.trace(3)).all(|&v| v == 0.0));
    // parabolic peak interpolation of each maximum
    let mut peaks = Vec::new();
    for k in 1..x.len() - 1 {
        if x[k] > x[k - 1] && x[k] >= x[k + 1] && x[k] > 0.0 {
            let (a, b, c) = (x[k - 1], x[k], x[k + 1]);
            let p = 0.5 * (a - c) / (a - 2.0 * b + c);
            peaks.push((trace.time(k) + p / trace.sample_rate, b - 0.25 * (a - c) * p));
        }
    }
    let n = peaks.len() - 1;
    let period = (peaks[n].0 - peaks[0].0) / n as f64;
    let c = &cfg.cantilevers[0];
    let expected = (c.omega * c.omega - c.gamma * c.gamma / 4.0).sqrt();
    assert!(((2.0 * PI / period) / expected - 1.0).abs() < 0.005);
    let decay = (peaks[0].1 / peaks[n].1).ln() / (peaks[n].0 - peaks[0].0);
    assert!((decay / (c.gamma / 2.0) - 1.0).abs() < 0.005, "{decay} vs {}", c.gamma / 2.0);
}

fn oscillator_energy_drift(steps_per_period: f64, cycles: f64) -> (f64, f64) {
    let mut cfg = base(200e-9, 200e-9);
    for c in cfg.cantilevers.iter_mut() {
        c.gamma = 0.0;
    }
    cfg.integrator.steps_per_period = steps_per_period;
    let sim = Simulator::without_casimir(&cfg).unwrap().clamp(1).clamp(3);
    let c = cfg.cantilevers[1];
    let energy = |s: &SimulationState| 0.5 * c.mass * s.v[1] * s.v[1] + 0.5 * c.k_spring * s.x[1] * s.x[1];
    let mut state = SimulationState::new([0.0, 1e-9, 0.0], [0.0; 3], 0);
    let e0 = energy(&state);
    let steps = (cycles * steps_per_period).round() as u64;
    for _ in 0..steps {
        sim.step(&mut state).unwrap();
    }
    let h = c.omega * sim.dt();
    // |R(ih)|² for classical RK4 on a harmonic oscillator
    let r2 = 1.0 - h.powi(6) / 72.0 + h.powi(8) / 576.0;
    (energy(&state) / e0 - 1.0, r2.powf(steps as f64) - 1.0)
}

#[test]
fn energy_is_conserved_over_ten_thousand_cycles() {
    let (drift, _) = oscillator_energy_drift(1000.0, 1e4);
    assert!(drift.abs() < 1e-8, "relative drift {drift:e}");
}

#[test]
fn energy_loss_at_default_step_matches_rk4_amplification() {
    let (drift, predicted) = oscillator_energy_drift(200.0, 1e4);
    assert!(drift < 0.0);
    assert!((drift / predicted - 1.0).abs() < 1e-3, "{drift:e} vs {predicted:e}");
}

#[test]
fn silent_without_noise_or_drive() {
    let mut cfg = base(150e-9, 160e-9);
    cfg.modulation.delta_d1 = 3e-9;
    cfg.modulation.omega_mod1 = hz(500.0);
    let tables = ideal_tables(&cfg);
    let sim = Simulator::new(&cfg, &tables).unwrap();
    let mut state = sim.initial_state(1);
    cfg.noise.enabled = false;
    let t = sim.record(&mut state, 0.01, 5, "null").unwrap();
    // modulation alone pushes the cantilevers, so compare against the unmodulated system
    assert!(t.traces.iter().any(|x| x.iter().any(|&v| v != 0.0)));
    let mut quiet = cfg.clone();
    quiet.modulation.delta_d1 = 0.0;
    let sim = Simulator::new(&quiet, &tables).unwrap();
    let mut state = sim.initial_state(1);
    let t = sim.record(&mut state, 0.01, 5, "null").unwrap();
    assert!(t.traces.iter().all(|x| x.iter().all(|&v| v == 0.0)));
}

#[test]
fn equipartition_over_seeds() {
    let mut cfg = base(200e-9, 200e-9);
    cfg.noise = tribody::system::NoiseSettings {
        enabled: true,
        temperature: 300.0,
    };
    cfg.integrator.stride = 20;
    let c = cfg.cantilevers[0];
    let expected = BOLTZMANN * 300.0 / (c.mass * c.omega * c.omega);
    let mut total = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        cfg.seed = seed;
        let t = run_thermal_psd(&cfg, None, 12.0, 1.0).unwrap();
        let x = t.trace(1);
        total += x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    }
    let var = total / seeds as f64;
    assert!((var / expected - 1.0).abs() < 0.05, "{var:e} vs {expected:e}");
}

fn driven_preset(tables: &TablePair, d1: f64, d2: f64, delta: (f64, f64)) -> SystemConfig {
    let mut cfg = base(d1, d2);
    cfg.modulation.delta_d1 = delta.0;
    cfg.modulation.delta_d2 = delta.1;
    let w = cfg.mode_frequencies(tables).unwrap();
    let (a, b) = resonant_modulation(w);
    cfg.modulation.omega_mod1 = a;
    cfg.modulation.omega_mod2 = b;
    cfg.drive = Some(DriveSettings {
        target: 1,
        amplitude: 1e-13,
        frequency: w[0],
        phase: 0.0,
    });
    cfg
}

#[test]
fn resonant_transfer_matches_closed_form() {
    let cfg0 = base(100e-9, 105e-9);
    let tables = TablePair::build(&cfg0).unwrap();
    let cfg = driven_preset(&tables, 100e-9, 105e-9, (4e-9, 5.7e-9));
    let out = run_switch_experiment(&cfg, &tables, &ExperimentOptions::default()).unwrap();
    let closed = transduction_ratio(&out.model, &cfg.cantilevers).unwrap();
    assert!((out.ratio / closed - 1.0).abs() < 0.1, "{} vs {closed}", out.ratio);

    let mut off = cfg.clone();
    off.modulation.delta_d1 = 0.0;
    off.modulation.delta_d2 = 0.0;
    let out_off = run_switch_experiment(&off, &tables, &ExperimentOptions::default()).unwrap();
    assert!(out_off.ratio < 0.02, "{}", out_off.ratio);

    let mut doubled = cfg.clone();
    doubled.drive.as_mut().unwrap().amplitude *= 2.0;
    let out2 = run_switch_experiment(&doubled, &tables, &ExperimentOptions::default()).unwrap();
    for i in [0, 2] {
        assert!((out2.lines[i].amplitude / out.lines[i].amplitude - 2.0).abs() < 0.02);
    }
    assert!((out2.ratio / out.ratio - 1.0).abs() < 0.01);
}

#[test]
fn zero_gain_matches_switch_run_exactly() {
    let cfg0 = base(100e-9, 105e-9);
    let tables = ideal_tables(&cfg0);
    let cfg = driven_preset(&tables, 100e-9, 105e-9, (3e-9, 4.2e-9));
    let opts = ExperimentOptions::default();
    let a = run_switch_experiment(&cfg, &tables, &opts).unwrap();
    let b = run_gain_experiment(&cfg, &tables, &opts).unwrap();
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
}

#[test]
fn identical_seed_gives_identical_traces() {
    let mut cfg = base(120e-9, 125e-9);
    cfg.noise.enabled = true;
    cfg.noise.temperature = 300.0;
    cfg.modulation.delta_d1 = 3e-9;
    cfg.modulation.omega_mod1 = hz(500.0);
    cfg.seed = 42;
    let tables = ideal_tables(&cfg);
    let a = run_thermal_psd(&cfg, Some(&tables), 0.05, 0.01).unwrap();
    let b = run_thermal_psd(&cfg, Some(&tables), 0.05, 0.01).unwrap();
    assert_eq!(a, b);
    cfg.seed = 43;
    let c = run_thermal_psd(&cfg, Some(&tables), 0.05, 0.01).unwrap();
    assert_ne!(a.traces, c.traces);
}

#[test]
fn runaway_gain_is_reported_unstable() {
    let cfg0 = base(100e-9, 105e-9);
    let tables = ideal_tables(&cfg0);
    let mut cfg = driven_preset(&tables, 100e-9, 105e-9, (3e-9, 4.2e-9));
    cfg.gain = hz(20.0);
    let err = run_gain_experiment(&cfg, &tables, &ExperimentOptions::default()).unwrap_err();
    assert!(err.is_instability(), "{err}");
    let opts = ExperimentOptions {
        allow_unstable: true,
        settle: Some(5.0),
        ..Default::default()
    };
    let err = run_switch_experiment(&cfg, &tables, &opts).unwrap_err();
    assert!(matches!(err, Error::Unstable { .. }), "{err}");
}

#[test]
fn modulation_past_the_gap_is_contact() {
    let mut cfg = base(60e-9, 300e-9);
    let tables = ideal_tables(&cfg);
    cfg.drive = Some(DriveSettings {
        target: 2,
        amplitude: 5e-9 * cfg.cantilevers[1].k_spring,
        frequency: cfg.cantilevers[1].omega,
        phase: 0.0,
    });
    let sim = Simulator::new(&cfg, &tables).unwrap();
    let mut state = sim.initial_state(0);
    let err = sim.advance(&mut state, 1.0).unwrap_err();
    assert!(matches!(err, Error::Contact { .. } | Error::Numerical { .. }), "{err}");
}

#[test]
fn trace_files_round_trip() {
    let mut cfg = base(150e-9, 160e-9);
    cfg.noise.enabled = true;
    cfg.noise.temperature = 300.0;
    cfg.seed = 9;
    let t = run_thermal_psd(&cfg, None, 0.01, 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    t.save(&path).unwrap();
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("t_s,x1_m,x2_m,x3_m"));
    let back = TraceSet::load(&path).unwrap();
    assert_eq!(back, t);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 9);
}
