//! End-to-end acceptance suite. Each test prints one pass/fail line with the
//! measured values (visible with `cargo test --test acceptance -- --nocapture`)
//! and asserts the corresponding thresholds.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::PathBuf;

use stirap_sim::chain::{make_decay_model, DecayModel, LevelChain};
use stirap_sim::logic::{siso_shift, tff_step, verify_truth_tables, ShiftDirection, SimContext, SisoMode};
use stirap_sim::propagator::{
    basis_state, max_abs, observables, propagate, propagate_expm_oracle, StateVector, Trajectory,
};
use stirap_sim::pulses::{build_fstirap, build_stirap_pair, compose_program, PulseProgram};
use stirap_sim::scenario::{
    build_chain, build_decay, build_program, initial_state, parse_config, ScenarioConfig,
};

const DT: f64 = 1e-3;

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let mut cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
    // acceptance runs never write the bundled output files
    cfg.outputs = Default::default();
    cfg
}

/// Runs a plain (non-logic) scenario config with the standard step size.
fn run_config(cfg: &ScenarioConfig) -> (LevelChain, PulseProgram, Trajectory) {
    let chain = build_chain(cfg).unwrap();
    let decay = build_decay(cfg, &chain).unwrap();
    let program = build_program(cfg).unwrap();
    let initial = initial_state(cfg, chain.n_levels()).unwrap();
    let traj = propagate(&initial, &chain, &program, &decay, DT).unwrap();
    (chain, program, traj)
}

fn paper_decay(chain: &LevelChain) -> DecayModel {
    make_decay_model(16.4, 1e7, chain).unwrap()
}

fn pop(traj: &Trajectory, level: usize) -> f64 {
    traj.final_state()[level].norm_sqr()
}

fn peak_pop(traj: &Trajectory, level: usize) -> f64 {
    traj.states()
        .iter()
        .map(|s| s[level].norm_sqr())
        .fold(0.0, f64::max)
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

/// Criterion-1 scenario: resonant 3-level STIRAP at the default parameters.
fn three_level_stirap() -> (LevelChain, PulseProgram) {
    let chain = LevelChain::resonant(3).unwrap();
    let frag = build_stirap_pair(0, 1, 0.0, 1.2, 1.0, 30.0).unwrap();
    let program = compose_program(vec![frag], 6.0).unwrap();
    (chain, program)
}

/// Criterion-4 scenario: 3-level fractional STIRAP, equal-superposition target.
fn three_level_fstirap(from_upper: bool) -> (LevelChain, PulseProgram, StateVector) {
    let chain = LevelChain::resonant(3).unwrap();
    let frag = if from_upper {
        build_fstirap(1, 0, 0.0, 1.2, 1.0, 30.0, FRAC_PI_4).unwrap()
    } else {
        build_fstirap(0, 1, 0.0, 1.2, 1.0, 30.0, FRAC_PI_4).unwrap()
    };
    let program = compose_program(vec![frag], 6.0).unwrap();
    let initial = basis_state(3, if from_upper { 2 } else { 0 });
    (chain, program, initial)
}

/// Coherence-cascade context on the 7-level chain (criterion-5 scenario).
fn cascade_context(n_levels: usize) -> SimContext {
    let chain = LevelChain::resonant(n_levels).unwrap();
    let decay = paper_decay(&chain);
    let mut ctx = SimContext::new(chain, decay);
    ctx.dt = Some(DT);
    ctx
}

#[test]
fn criterion_1_three_level_transfer() {
    let (chain, program) = three_level_stirap();
    let decay = paper_decay(&chain);
    let traj = propagate(&basis_state(3, 0), &chain, &program, &decay, DT).unwrap();
    let final_22 = pop(&traj, 2);
    let peak_11 = peak_pop(&traj, 1);
    report(
        "1",
        final_22 >= 0.99 && peak_11 <= 0.05,
        &format!("final rho22 = {final_22:.4}, peak rho11 = {peak_11:.4}"),
    );
}

#[test]
fn criterion_2_five_level_two_step() {
    let cfg = config("fig3a.cfg");
    let (_, program, traj) = run_config(&cfg);
    let marker = program.step_markers()[0].time;
    let plateau = traj.state_at(marker)[2].norm_sqr();
    let final_44 = pop(&traj, 4);
    report(
        "2",
        final_44 >= 0.98 && plateau >= 0.98,
        &format!("final rho44 = {final_44:.4}, plateau rho22 = {plateau:.4}"),
    );
}

#[test]
fn criterion_3_seven_level_forward_and_reverse() {
    let (_, _, fwd) = run_config(&config("fig3b.cfg"));
    let (_, _, rev) = run_config(&config("fig3c.cfg"));
    let final_66 = pop(&fwd, 6);
    let final_00 = pop(&rev, 0);
    report(
        "3",
        final_66 >= 0.97 && final_00 >= 0.97,
        &format!("forward rho66 = {final_66:.4}, reverse rho00 = {final_00:.4}"),
    );
}

#[test]
fn criterion_4_fstirap_equal_superposition() {
    let mut ok = true;
    let mut details = Vec::new();
    for from_upper in [false, true] {
        let (chain, program, initial) = three_level_fstirap(from_upper);
        let decay = paper_decay(&chain);
        let traj = propagate(&initial, &chain, &program, &decay, DT).unwrap();
        let p0 = pop(&traj, 0);
        let p2 = pop(&traj, 2);
        let final_state = traj.final_state();
        let re02 = (final_state[0] * final_state[2].conj()).re;
        ok &= (p0 - 0.5).abs() <= 0.03 && (p2 - 0.5).abs() <= 0.03 && re02.abs() >= 0.45;
        let start = if from_upper { "|2>" } else { "|0>" };
        details.push(format!(
            "from {start}: rho00 = {p0:.4}, rho22 = {p2:.4}, Re rho02 = {re02:.4}"
        ));
    }
    report("4", ok, &details.join("; "));
}

#[test]
fn criterion_5_coherence_cascade() {
    let ctx = cascade_context(7);
    let (_, traj) = siso_shift(
        &"1000".parse().unwrap(),
        ShiftDirection::Right,
        SisoMode::Coherence,
        &ctx,
    )
    .unwrap();
    let pairs = [(0, 2), (0, 4), (0, 6)];
    let obs = observables(&traj, &pairs).unwrap();
    let markers: Vec<f64> = traj
        .program()
        .step_markers()
        .iter()
        .map(|m| m.time)
        .collect();
    // active coherence per marker, previous one suppressed at later markers
    let active: Vec<f64> = (0..3)
        .map(|i| obs.coherence_at(pairs[i], markers[i]).unwrap().re.abs())
        .collect();
    let stale: Vec<f64> = (0..2)
        .map(|i| obs.coherence_at(pairs[i], markers[i + 1]).unwrap().norm())
        .collect();
    let mut im_ok = true;
    for series in &obs.coherences {
        let max_re = series.re.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let max_im = series.im.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        im_ok &= max_im <= 0.1 * max_re;
    }
    let ok = active.iter().all(|&v| v >= 0.45) && stale.iter().all(|&v| v <= 0.05) && im_ok;
    report(
        "5",
        ok,
        &format!(
            "|Re rho02,04,06| at markers = {:.3}/{:.3}/{:.3}, stale = {:.3}/{:.3}, Im bounded = {im_ok}",
            active[0], active[1], active[2], stale[0], stale[1]
        ),
    );
}

#[test]
fn criterion_6_truth_tables_and_involution() {
    let ctx = cascade_context(3);
    let table = verify_truth_tables(&ctx).unwrap();
    let mut involution = true;
    for bit in [0u8, 1u8] {
        let (first, _) = tff_step(bit, 1, &ctx).unwrap();
        let (second, _) = tff_step(first.next, 1, &ctx).unwrap();
        involution &= second.next == bit;
    }
    report(
        "6",
        table.all_pass() && involution,
        &format!(
            "{}/8 table rows passed, double-pulse involution = {involution}",
            table.passed()
        ),
    );
}

#[test]
fn criterion_7_shift_registers() {
    let ctx5 = cascade_context(5);
    let words = |out: &stirap_sim::logic::SisoOutcome| -> Vec<String> {
        out.words.iter().map(|w| w.to_string()).collect()
    };

    let (right, _) = siso_shift(
        &"100".parse().unwrap(),
        ShiftDirection::Right,
        SisoMode::Population,
        &ctx5,
    )
    .unwrap();
    let (left, _) = siso_shift(
        &"001".parse().unwrap(),
        ShiftDirection::Left,
        SisoMode::Population,
        &ctx5,
    )
    .unwrap();
    let right_ok = words(&right) == ["100", "010", "001"];
    let left_ok = words(&left) == ["001", "010", "100"];

    let ctx7 = cascade_context(7);
    let (coh7, _) = siso_shift(
        &"1000".parse().unwrap(),
        ShiftDirection::Right,
        SisoMode::Coherence,
        &ctx7,
    )
    .unwrap();
    let coh7_ok = coh7.words.last().unwrap().to_string() == "0001";

    // 5-level pair variant: rho24 -> rho04 -> rho02
    let (pair, _) = siso_shift(
        &"011".parse().unwrap(),
        ShiftDirection::Right,
        SisoMode::Coherence,
        &ctx5,
    )
    .unwrap();
    let find = |stage: usize, p: (usize, usize)| {
        pair.stage_coherences[stage]
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
            .unwrap()
    };
    let pair_ok = find(0, (2, 4)) >= 0.45
        && find(1, (0, 4)) >= 0.45
        && find(1, (2, 4)) <= 0.05
        && find(2, (0, 2)) >= 0.45
        && find(2, (0, 4)) <= 0.05;

    report(
        "7",
        right_ok && left_ok && coh7_ok && pair_ok,
        &format!(
            "population right {:?}, left {:?}, coherence word {}, pair cascade ok = {pair_ok}",
            words(&right),
            words(&left),
            coh7.words.last().unwrap()
        ),
    );
}

#[test]
fn criterion_8_backend_agreement_and_order() {
    // agreement on the criterion-1 and criterion-4 scenarios at dt = 1e-3
    let (chain, program) = three_level_stirap();
    let decay = paper_decay(&chain);
    let initial = basis_state(3, 0);
    let a = propagate(&initial, &chain, &program, &decay, DT).unwrap();
    let b = propagate_expm_oracle(&initial, &chain, &program, &decay, DT).unwrap();
    let diff_stirap = max_abs(&(a.final_state() - b.final_state()));

    let (chain_f, program_f, initial_f) = three_level_fstirap(false);
    let decay_f = paper_decay(&chain_f);
    let af = propagate(&initial_f, &chain_f, &program_f, &decay_f, DT).unwrap();
    let bf = propagate_expm_oracle(&initial_f, &chain_f, &program_f, &decay_f, DT).unwrap();
    let diff_fstirap = max_abs(&(af.final_state() - bf.final_state()));

    // fourth-order convergence against a fine-step oracle reference
    let reference = propagate_expm_oracle(&initial, &chain, &program, &decay, 1e-4).unwrap();
    let err = |dt: f64| {
        let run = propagate(&initial, &chain, &program, &decay, dt).unwrap();
        max_abs(&(run.final_state() - reference.final_state()))
    };
    let coarse = err(4e-3);
    let fine = err(2e-3);
    let ratio = coarse / fine;

    report(
        "8",
        diff_stirap < 1e-6 && diff_fstirap < 1e-6 && ratio >= 12.0,
        &format!(
            "backend diff stirap = {diff_stirap:.2e}, fstirap = {diff_fstirap:.2e}, halving ratio = {ratio:.1}"
        ),
    );
}

#[test]
fn criterion_9_weak_drive_breaks_adiabaticity() {
    let chain = LevelChain::resonant(3).unwrap();
    let frag = build_stirap_pair(0, 1, 0.0, 1.2, 1.0, 1.0).unwrap();
    let program = compose_program(vec![frag], 6.0).unwrap();
    let decay = paper_decay(&chain);
    let traj = propagate(&basis_state(3, 0), &chain, &program, &decay, DT).unwrap();
    let final_22 = pop(&traj, 2);
    report(
        "9",
        final_22 < 0.9,
        &format!("weak-drive transfer rho22 = {final_22:.4} (must stay below 0.9)"),
    );
}

#[test]
fn criterion_10_norm_conservation_and_decay_budget() {
    // every criterion-1..5 scenario as (chain, program, initial)
    let mut scenarios: Vec<(String, LevelChain, PulseProgram, StateVector)> = Vec::new();

    let (chain, program) = three_level_stirap();
    scenarios.push(("c1 stirap".into(), chain, program, basis_state(3, 0)));

    for (name, cfg_name) in [
        ("c2 five-level", "fig3a.cfg"),
        ("c3 forward", "fig3b.cfg"),
        ("c3 reverse", "fig3c.cfg"),
    ] {
        let cfg = config(cfg_name);
        let chain = build_chain(&cfg).unwrap();
        let program = build_program(&cfg).unwrap();
        let initial = initial_state(&cfg, chain.n_levels()).unwrap();
        scenarios.push((name.into(), chain, program, initial));
    }

    for from_upper in [false, true] {
        let (chain, program, initial) = three_level_fstirap(from_upper);
        let name = format!("c4 fstirap from |{}>", if from_upper { 2 } else { 0 });
        scenarios.push((name, chain, program, initial));
    }

    // c5 cascade program comes from the logic machinery
    let ctx = cascade_context(7);
    let (_, cascade_traj) = siso_shift(
        &"1000".parse().unwrap(),
        ShiftDirection::Right,
        SisoMode::Coherence,
        &ctx,
    )
    .unwrap();
    scenarios.push((
        "c5 cascade".into(),
        LevelChain::resonant(7).unwrap(),
        cascade_traj.program().clone(),
        basis_state(7, 0),
    ));

    let mut worst_drift = 0.0f64;
    let mut worst_loss = 0.0f64;
    for (name, chain, program, initial) in &scenarios {
        let closed = propagate(initial, chain, program, &DecayModel::none(chain.n_levels()), DT)
            .unwrap();
        let drift = closed
            .states()
            .iter()
            .map(|s| (s.norm_squared() - 1.0).abs())
            .fold(0.0, f64::max);
        worst_drift = worst_drift.max(drift);
        assert!(drift < 1e-8, "{name}: norm drift {drift:.2e} with Gamma = 0");

        let open = propagate(initial, chain, program, &paper_decay(chain), DT).unwrap();
        let loss = 1.0 - open.final_state().norm_squared();
        worst_loss = worst_loss.max(loss);
        assert!(loss < 0.02, "{name}: norm loss {loss:.3} with paper decay");
    }
    report(
        "10",
        true,
        &format!("worst closed-system drift = {worst_drift:.2e}, worst decay loss = {worst_loss:.4}"),
    );
}
