//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Shared traces are integrated once and cached across criteria.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crn_clockwork::computation::{
    compose_loop, compose_terminating_loop, counter_closed_form, ModuleKind, ModuleSpec,
};
use crn_clockwork::dynamics::{detect_crossings, high_phases, integrate, Direction, SolverConfig};
use crn_clockwork::oscillator::{
    classify_initial, first_clock_signal, transition_windows, validate_clock, BasinRegion,
    ClockSignal, ClockThresholds, CubicGeometry, OscillatorConfig,
};
use crn_clockwork::period::{adaptive_gk15, measure_periods, phase_thresholds, predict_periods};
use crn_clockwork::{OdeSystem, Trace};

fn reference_config() -> OscillatorConfig {
    OscillatorConfig::default()
}

fn solver() -> SolverConfig {
    SolverConfig::default()
}

/// Reference run: 4-species oscillator from (5, 5, 0, 0) over [0, 100].
fn example_trace() -> &'static Trace {
    static TRACE: OnceLock<Trace> = OnceLock::new();
    TRACE.get_or_init(|| {
        let sys = reference_config().build_oscillator();
        integrate(&sys, &[5.0, 5.0, 0.0, 0.0], (0.0, 100.0), &solver()).unwrap()
    })
}

fn loop_trace() -> &'static Trace {
    static TRACE: OnceLock<Trace> = OnceLock::new();
    TRACE.get_or_init(|| {
        let composed = compose_loop(&reference_config(), (0.0, 0.0, 1.0)).unwrap();
        integrate(
            &composed.system,
            &composed.initial_state,
            (0.0, 120.0),
            &solver(),
        )
        .unwrap()
    })
}

fn terminating_trace(eta3: f64) -> Trace {
    let composed =
        compose_terminating_loop(&reference_config(), (0.0, 0.0, 1.0), 4.0, 4.0, eta3).unwrap();
    integrate(
        &composed.system,
        &composed.initial_state,
        (0.0, 100.0),
        &solver(),
    )
    .unwrap()
}

#[test]
fn criterion_01_period_prediction_reproduces_reference_values() {
    let start = Instant::now();
    let pred = predict_periods(3.0, 0.1, 1e-10).unwrap();
    let elapsed = start.elapsed();
    let err_low = (pred.t_low - 10.470).abs() / 10.470;
    let err_high = (pred.t_high - 9.193).abs() / 9.193;
    let ok = err_low < 5e-3 && err_high < 5e-3 && elapsed.as_secs_f64() < 1.0;
    println!(
        "criterion 1 {}: T_l = {:.4} (rel {:.2e}), T_h = {:.4} (rel {:.2e}), {:.3} ms",
        if ok { "PASS" } else { "FAIL" },
        pred.t_low,
        err_low,
        pred.t_high,
        err_high,
        elapsed.as_secs_f64() * 1e3
    );
    assert!(err_low < 5e-3, "T_l = {} vs 10.470", pred.t_low);
    assert!(err_high < 5e-3, "T_h = {} vs 9.193", pred.t_high);
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
}

#[test]
fn criterion_02_measured_periods_match_predictions() {
    let start = Instant::now();
    let sys = reference_config().build_oscillator();
    let trace = integrate(&sys, &[5.0, 5.0, 0.0, 0.0], (0.0, 100.0), &solver()).unwrap();
    let (t1, t2) = measure_periods(&trace, 3.0).unwrap();
    let elapsed = start.elapsed();
    let pred = predict_periods(3.0, 0.1, 1e-10).unwrap();
    let rel1 = (t1 - pred.t_low).abs() / pred.t_low;
    let rel2 = (t2 - pred.t_high).abs() / pred.t_high;
    let ok = rel1 <= 0.10 && rel2 <= 0.10 && elapsed.as_secs_f64() < 30.0;
    println!(
        "criterion 2 {}: T1 = {:.4} vs {:.4} (rel {:.3}%), T2 = {:.4} vs {:.4} (rel {:.3}%), {:.2} s",
        if ok { "PASS" } else { "FAIL" },
        t1,
        pred.t_low,
        rel1 * 100.0,
        t2,
        pred.t_high,
        rel2 * 100.0,
        elapsed.as_secs_f64()
    );
    assert!(rel1 <= 0.10, "T1 off by {rel1}");
    assert!(rel2 <= 0.10, "T2 off by {rel2}");
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
}

#[test]
fn criterion_03_clock_validity() {
    let cfg = reference_config();
    let report = validate_clock(example_trace(), &cfg, &ClockThresholds::default()).unwrap();
    let bound = (10.0 * cfg.eps1).max(1e-3);
    let ok = report.passes
        && report.low_phase_max_u <= bound * report.high_amplitude_u
        && report.low_phase_max_v <= bound * report.high_amplitude_v
        && report.max_transition_fraction <= 0.02;
    println!(
        "criterion 3 {}: abrupt {:.3}% of period (<= 2%), low-phase u {:.2e} / v {:.2e} (bound {:.2e}), complementarity {:.2e} (raw {:.2e})",
        if ok { "PASS" } else { "FAIL" },
        report.max_transition_fraction * 100.0,
        report.low_phase_max_u,
        report.low_phase_max_v,
        bound * report.high_amplitude_u.max(report.high_amplitude_v),
        report.complementarity_max,
        report.complementarity_max_raw
    );
    assert!(report.abruptness_pass, "{report:?}");
    assert!(report.levels_pass, "{report:?}");
    assert!(report.complementarity_pass, "{report:?}");
    assert!(report.passes);
    assert!(report.max_transition_fraction <= 0.02);
    assert!(report.low_phase_max_u <= bound * report.high_amplitude_u);
    assert!(report.low_phase_max_v <= bound * report.high_amplitude_v);
}

#[test]
fn criterion_04_manifold_residuals() {
    let cfg = reference_config();
    let trace = example_trace();
    let ix = trace.index_of("x").unwrap();
    let iu = trace.index_of("u").unwrap();
    let iv = trace.index_of("v").unwrap();

    let max_x = trace.min_max("x").unwrap().1;
    let bound = 10.0 * cfg.eps1 * cfg.p.max(max_x);

    // Residuals of the fast-block equilibrium hold at every sample.
    let mut max_res: f64 = 0.0;
    for (t, row) in trace.times().iter().zip(trace.states()) {
        if *t < 1.0 {
            continue;
        }
        let (x, u, v) = (row[ix], row[iu], row[iv]);
        let r1 = (cfg.eps1 * (cfg.p - u) - u * v).abs();
        let r2 = (cfg.eps1 * (x - v) - u * v).abs();
        max_res = max_res.max(r1).max(r2);
    }

    // The linear identity u - v = p - x holds on the slow segments; during
    // the jumps of x it lags by design (relaxation rate eta1/eps2 against
    // jump speeds of order eta1/eps1), so it is checked outside the
    // transition windows. The raw maximum is printed for reference.
    let windows = transition_windows(trace, &cfg).unwrap();
    let excluded = |t: f64| windows.iter().any(|&(a, b)| t >= a && t <= b);
    let mut max_lin: f64 = 0.0;
    let mut max_lin_raw: f64 = 0.0;
    for (t, row) in trace.times().iter().zip(trace.states()) {
        if *t < 1.0 {
            continue;
        }
        let lin = (row[iu] - row[iv] - (cfg.p - row[ix])).abs();
        max_lin_raw = max_lin_raw.max(lin);
        if !excluded(*t) {
            max_lin = max_lin.max(lin);
        }
    }

    let ok = max_res <= bound && max_lin <= 0.05;
    println!(
        "criterion 4 {}: max residual {:.3e} (bound {:.3e}); |u-v-(p-x)| plateau {:.3e} (<= 0.05), raw across jumps {:.3e}",
        if ok { "PASS" } else { "FAIL" },
        max_res,
        bound,
        max_lin,
        max_lin_raw
    );
    assert!(max_res <= bound, "residual {max_res} > {bound}");
    assert!(max_lin <= 0.05, "linear identity off by {max_lin}");
}

#[test]
fn criterion_05_basin_controls_first_signal() {
    let cfg = reference_config();
    let geom = CubicGeometry::default();
    let sys = cfg.build_oscillator();
    let quick = SolverConfig::default();

    let first = |x0: f64, y0: f64| -> ClockSignal {
        let trace = integrate(&sys, &[x0, y0, 0.0, 0.0], (0.0, 40.0), &quick).unwrap();
        first_clock_signal(&trace, &cfg)
            .unwrap()
            .unwrap_or_else(|| panic!("no clean signal from ({x0}, {y0})"))
    };

    // Reference points.
    for (x0, y0, want) in [
        (6.0, 6.0, ClockSignal::U),
        (2.0, 2.0, ClockSignal::U),
        (0.5, 0.5, ClockSignal::V),
        (4.0, 4.0, ClockSignal::V),
    ] {
        let got = first(x0, y0);
        assert_eq!(got, want, "({x0}, {y0})");
    }

    // 20 random points per region, sampled away from the equilibrium.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut counts = [0usize; 2];
    let mut checked = 0;
    while counts[0] < 20 || counts[1] < 20 {
        let x0: f64 = rng.random_range(0.05..6.5);
        let y0: f64 = rng.random_range(0.05..6.5);
        if ((x0 - 3.0).powi(2) + (y0 - 3.0).powi(2)).sqrt() < 0.3 {
            continue;
        }
        let region = classify_initial(x0, y0, &geom, 1e-6).unwrap();
        let slot = match region {
            BasinRegion::A1 => 0,
            BasinRegion::A2 => 1,
            BasinRegion::Equilibrium => continue,
        };
        if counts[slot] >= 20 {
            continue;
        }
        counts[slot] += 1;
        checked += 1;
        let want = if slot == 0 { ClockSignal::U } else { ClockSignal::V };
        let got = first(x0, y0);
        assert_eq!(got, want, "({x0:.4}, {y0:.4}) classified {region}");
    }
    println!(
        "criterion 5 PASS: 4 reference points and {checked} random points ({} A1, {} A2) all match",
        counts[0], counts[1]
    );
}

#[test]
fn criterion_06_loop_iteration_staircase() {
    let trace = loop_trace();
    let (tau_u, _) = phase_thresholds(3.0);
    let phases = high_phases(trace, "u", tau_u, 0.5 * tau_u).unwrap();
    assert!(phases.len() >= 6, "need 5 complete cycles, got {}", phases.len());
    let s1 = trace.series("s1").unwrap();
    let times = trace.times();

    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for (k, (rise, _)) in phases.iter().skip(1).take(5).enumerate() {
        let i = times.partition_point(|t| t < rise);
        let v = s1[i.min(s1.len() - 1)];
        let k1 = (k + 1) as f64;
        values.push(v);
        worst = worst.max((v - k1).abs() / k1);
    }
    let ok = worst <= 0.01;
    println!(
        "criterion 6 {}: s1 after cycles 1..5 = {:?}, worst relative error {:.2}% (bound 1%)",
        if ok { "PASS" } else { "FAIL" },
        values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        worst * 100.0
    );
    // The staircase increments run systematically ~2.3% high at these
    // parameters: during each module's off phase the gating clock species
    // is not exactly zero but ~eps1 * p / |x - p|, and its integral over a
    // period (~0.02) leaks into s2 and is then loaded into s1. The effect
    // is proportional to eps1 and independent of the solver; the 1% bound
    // is not attainable for eps1 = 1e-3 with unit module rates.
    assert!(
        worst <= 0.01,
        "staircase off by {:.3}% (clock-gate leakage of order eps1*p integrated \
         over the off phases; see note above)",
        worst * 100.0
    );
}

#[test]
fn criterion_07_termination_window_and_overshoot() {
    let t50 = terminating_trace(50.0);
    let s1_50 = *t50.series("s1").unwrap().last().unwrap();
    let t1 = terminating_trace(1.0);
    let s1_1 = *t1.series("s1").unwrap().last().unwrap();
    let ok = (3.96..=4.10).contains(&s1_50) && s1_1 > 4.0;
    println!(
        "criterion 7 {}: eta3 = 50 final s1 = {:.5} (in [3.96, 4.10]); eta3 = 1 final s1 = {:.5} (> 4)",
        if ok { "PASS" } else { "FAIL" },
        s1_50,
        s1_1
    );
    assert!(
        (3.96..=4.10).contains(&s1_50),
        "eta3 = 50 ended at {s1_50}"
    );
    assert!(s1_1 > 4.0, "eta3 = 1 ended at {s1_1}, expected overshoot");
}

#[test]
fn criterion_08_realization_round_trip() {
    let cfg = reference_config();
    let ode = cfg.xy_polynomials();
    let net = ode.realize_network().unwrap();

    let a = cfg.eta1 / cfg.eps1;
    let expected: Vec<(Vec<(&str, u32)>, Vec<(&str, u32)>, f64)> = vec![
        (vec![("x", 4)], vec![("x", 3)], a),
        (vec![("x", 3)], vec![("x", 4)], 9.0 * a),
        (vec![("x", 2)], vec![("x", 1)], 24.0 * a),
        (vec![("x", 1)], vec![("x", 2)], 21.0 * a),
        (vec![("x", 1), ("y", 1)], vec![("y", 1)], a),
        (vec![("x", 1), ("y", 1)], vec![("x", 1), ("y", 2)], cfg.eta1),
        (vec![("y", 1)], vec![], 3.0 * cfg.eta1),
    ];
    assert_eq!(net.n_reactions(), 7, "expected the 7-reaction realization");
    for (reactants, products, rate) in &expected {
        let found = net.reactions().iter().any(|r| {
            r.rate == *rate
                && r.reactants.len() == reactants.len()
                && r.products.len() == products.len()
                && reactants
                    .iter()
                    .all(|(n, c)| r.reactants.get(*n) == Some(c))
                && products.iter().all(|(n, c)| r.products.get(*n) == Some(c))
        });
        assert!(
            found,
            "missing reaction {reactants:?} -> {products:?} at rate {rate}"
        );
    }

    let back = net.to_polynomials();
    assert_eq!(back, ode, "round trip must be coefficient-exact");
    println!("criterion 8 PASS: 7-reaction realization with exact rates; round trip is the identity");
}

#[test]
fn criterion_09_regime_map() {
    // ell = 1.5: stable equilibrium at (1.5, phi(1.5)).
    let geom = CubicGeometry::default();
    let stable = OscillatorConfig {
        ell: 1.5,
        ..reference_config()
    };
    let sys = stable.build_subsystem_xy();
    let trace = integrate(&sys, &[5.0, 5.0], (0.0, 250.0), &solver()).unwrap();
    let last = trace.states().last().unwrap();
    let target = (1.5, geom.phi(1.5));
    let err = ((last[0] - target.0).powi(2) + (last[1] - target.1).powi(2)).sqrt();

    // ell = 3: at least 5 sustained oscillation periods.
    let osc = reference_config().build_subsystem_xy();
    let trace3 = integrate(&osc, &[5.0, 5.0], (0.0, 130.0), &solver()).unwrap();
    let rises = detect_crossings(&trace3, "x", 3.0, 0.4)
        .unwrap()
        .into_iter()
        .filter(|e| e.direction == Direction::Rising)
        .count();

    let ok = err <= 1e-3 && rises >= 6;
    println!(
        "criterion 9 {}: ell = 1.5 settles to ({:.6}, {:.6}) within {:.2e}; ell = 3 completes {} periods",
        if ok { "PASS" } else { "FAIL" },
        last[0],
        last[1],
        err,
        rises.saturating_sub(1)
    );
    assert!(err <= 1e-3, "distance to equilibrium {err}");
    assert!(rises >= 6, "only {rises} rising edges");
}

#[test]
fn criterion_10_property_suites() {
    // Mass-action nonnegativity at the boundary, on the realized networks.
    let cfg = reference_config();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let composed = compose_loop(&cfg, (0.0, 0.0, 1.0)).unwrap();
    for net in [&cfg.oscillator_polynomials().realize_network().unwrap(), &composed.network] {
        let n = net.n_species();
        for _ in 0..50 {
            let mut s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
            let zeroed = rng.random_range(0..n);
            s[zeroed] = 0.0;
            let rhs = net.ode_rhs(&s).unwrap();
            assert!(
                rhs[zeroed] >= 0.0,
                "species {} drains below zero at the boundary",
                net.species()[zeroed].id
            );
        }
    }

    // Catalyst conservation along the terminating trace.
    let term = terminating_trace(50.0);
    let s3 = term.series("s3").unwrap();
    let l = term.series("l").unwrap();
    let ds3 = s3.iter().map(|v| (v - 1.0).abs()).fold(0.0f64, f64::max);
    let dl = l.iter().map(|v| (v - 4.0).abs()).fold(0.0f64, f64::max);
    assert!(ds3 <= 1e-10, "s3 drifted by {ds3}");
    assert!(dl <= 1e-10, "l drifted by {dl}");

    // Counter simulation against the closed form.
    let counter = build_counter_system();
    let tight = SolverConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        ..Default::default()
    };
    let trace = integrate(&counter.0, &counter.1, (0.0, 20.0), &tight).unwrap();
    let iw = trace.index_of("w").unwrap();
    let mut worst = 0.0f64;
    for (t, row) in trace.times().iter().zip(trace.states()) {
        let want = counter_closed_form(4.0, 2.0, 1.0, 1.0, *t);
        worst = worst.max((row[iw] - want).abs());
    }
    assert!(worst <= 1e-6, "counter deviates from closed form by {worst}");

    // Quadrature against an independent composite-Simpson oracle.
    let geom = CubicGeometry::default();
    let ell = 2.5;
    let integrand = |x: f64| geom.phi_prime(x) / (0.1 * (x - ell) * geom.phi(x));
    let simpson_low = simpson(&integrand, 1.0, 2.0, 1_000_000);
    let simpson_high = -simpson(&integrand, 4.0, 5.0, 1_000_000);
    let pred = predict_periods(ell, 0.1, 1e-10).unwrap();
    let rel_low = (pred.t_low - simpson_low).abs() / simpson_low.abs();
    let rel_high = (pred.t_high - simpson_high).abs() / simpson_high.abs();
    assert!(rel_low <= 1e-6, "T_l vs Simpson oracle: rel {rel_low}");
    assert!(rel_high <= 1e-6, "T_h vs Simpson oracle: rel {rel_high}");

    println!(
        "criterion 10 PASS: boundary nonnegativity, catalyst drift ({ds3:.1e}, {dl:.1e}), counter vs closed form ({worst:.1e}), quadrature vs Simpson ({rel_low:.1e}, {rel_high:.1e})"
    );
}

fn build_counter_system() -> (OdeSystem, Vec<f64>) {
    let net =
        crn_clockwork::computation::build_module(&ModuleSpec::new(ModuleKind::Counter)).unwrap();
    let sys = OdeSystem::from_polynomials(&net.to_polynomials());
    let mut s0 = vec![0.0; 3];
    s0[net.index_of("l").unwrap()] = 4.0;
    s0[net.index_of("s1").unwrap()] = 2.0;
    s0[net.index_of("w").unwrap()] = 1.0;
    // OdeSystem::from_polynomials preserves the network's species order.
    (sys, s0)
}

/// Composite Simpson rule on a uniform grid with `n` panels (n even).
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
