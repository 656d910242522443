//! Acceptance gate: one test per acceptance criterion, each printing a
//! single `criterion N: PASS/FAIL — detail` line before asserting on it.
//!
//! The forward runs (penetrable ball at both contrast signs plus a
//! no-obstacle control on the identical grid) are shared across criteria
//! through a lazily built bundle. Run with `--nocapture` to see the
//! per-criterion lines for passing tests as well.

use enclosure::config::Scenario;
use enclosure::fdtd::{build_source, Simulation};
use enclosure::geometry::Point3;
use enclosure::indicator::{tau_sweep, threshold_scan, IndicatorCurve};
use enclosure::oracle::{
    gradient_norm_bracket, kernel_degeneration_check, kernel_remainder_order_check,
    phi_remainder_order_check, snell_random_suite,
};
use enclosure::pipeline::{reference_scenario, run_scenario, write_artifacts, RunOutput};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

fn scenario_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/ball_vertical.toml")
}

struct Bundle {
    scenario: Scenario,
    /// run with negative contrast (gamma drops inside the obstacle)
    a1: RunOutput,
    /// run with positive contrast on the same geometry
    a2: RunOutput,
    /// indicator of a second background run differenced against the first:
    /// the no-obstacle control
    control: IndicatorCurve,
    /// largest |sample| of the control difference record
    control_diff_max: f64,
}

fn bundle() -> &'static Bundle {
    static CELL: OnceLock<Bundle> = OnceLock::new();
    CELL.get_or_init(|| {
        let scenario = Scenario::from_path(&scenario_path()).expect("reference scenario");
        let a1 = run_scenario(&scenario).expect("negative-contrast run");

        let raw = std::fs::read(scenario_path()).expect("scenario file");
        let text = String::from_utf8(raw)
            .expect("utf-8 scenario")
            .replace("contrast = -0.8", "contrast = 1.0");
        assert!(text.contains("contrast = 1.0"), "contrast line not found");
        let scenario_pos =
            Scenario::from_toml_bytes(text.as_bytes()).expect("positive-contrast scenario");
        let a2 = run_scenario(&scenario_pos).expect("positive-contrast run");

        // control: rerun the background medium on the identical grid and
        // difference against the recorded background
        let (f_cells, weights) = build_source(&a1.spec, &scenario.source);
        let sim = Simulation::new(a1.spec.clone(), &scenario.medium, None, a1.dt)
            .expect("control simulation");
        let rec = sim
            .run(&f_cells, &weights, &a1.probes.cells, a1.n_steps)
            .expect("control run");
        let diff = rec.difference(&a1.background).expect("control difference");
        let control_diff_max = diff.weighted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let control = tau_sweep(
            &diff.weighted,
            &a1.background.weighted,
            a1.dt,
            scenario.t_window,
            &scenario.taus,
        )
        .expect("control sweep");

        Bundle {
            scenario,
            a1,
            a2,
            control,
            control_diff_max,
        }
    })
}

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

#[test]
fn criterion_1_snell_geometry_suite() {
    let t0 = Instant::now();
    let rep = snell_random_suite(100, 0xACC1).expect("snell suite");
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        1,
        rep.pass && elapsed < 10.0,
        format!(
            "100 random instances in {elapsed:.2} s; measured {}",
            rep.measured
        ),
    );
}

#[test]
fn criterion_2_kernel_asymptotics() {
    let t0 = Instant::now();
    let taus = [20.0, 40.0, 80.0];
    let kernel = kernel_remainder_order_check(20, 0xACC2, &taus, 0.3).expect("kernel order");
    let field = phi_remainder_order_check(20, 0xACC2, &taus, 0.3).expect("field order");
    let degen = kernel_degeneration_check(50.0, 1e-5).expect("degeneration");
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        2,
        kernel.pass && field.pass && degen.pass && elapsed < 300.0,
        format!(
            "kernel order {} ({}), field/gradient order {} ({}), equal-speed degeneration {} ({}); {elapsed:.0} s",
            kernel.pass, kernel.measured, field.pass, field.measured, degen.pass, degen.measured
        ),
    );
}

#[test]
fn criterion_3_gradient_energy_rate() {
    let scenario = Scenario::from_path(&scenario_path()).expect("reference scenario");
    let t0 = Instant::now();
    let rep = gradient_norm_bracket(
        &scenario.obstacle,
        &scenario.source,
        &scenario.medium,
        scenario.distances.l_db,
        &[20.0, 28.0, 40.0, 56.0, 80.0],
        0.07,
    )
    .expect("gradient rate");
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        3,
        rep.pass && elapsed < 600.0,
        format!("measured {} vs {}; {elapsed:.0} s", rep.measured, rep.reference),
    );
}

#[test]
fn criterion_4_indicator_slope_and_signs() {
    let b = bundle();
    let rel = b.a1.summary.relative_error;
    let slope_ok = rel <= 0.05;
    let a1_sign_ok = b.a1.summary.sign_class == "A1";
    let a2_sign_ok = b.a2.summary.sign_class == "A2";

    // the control difference must vanish bitwise, and even when rescaled
    // at the detection threshold its indicator must keep shrinking with tau
    let mut floor_ok = b.control_diff_max == 0.0;
    let two_l = 2.0 * b.scenario.distances.l_db;
    let scaled: Vec<f64> = b
        .control
        .rows
        .iter()
        .map(|r| r.value.log_abs + r.tau * two_l)
        .collect();
    for w in scaled.windows(2) {
        floor_ok &= w[1] < w[0];
    }
    report(
        4,
        slope_ok && a1_sign_ok && a2_sign_ok && floor_ok,
        format!(
            "l(D,B) est {:.4} vs {:.4} (rel err {:.3}, tol 0.05); signs {}/{} (want A1/A2); control diff max {:.1e}, threshold-scaled control monotone down: {}",
            b.a1.summary.l_db_est,
            b.a1.summary.l_db_true,
            rel,
            b.a1.summary.sign_class,
            b.a2.summary.sign_class,
            b.control_diff_max,
            floor_ok
        ),
    );
}

#[test]
fn criterion_5_threshold_behavior() {
    let b = bundle();
    let two_l = 2.0 * b.scenario.distances.l_db;
    let rows = threshold_scan(
        &b.a1.diff.weighted,
        &b.a1.background.weighted,
        b.a1.dt,
        &[two_l - 0.5, two_l + 0.5],
        &[20.0, 40.0],
    )
    .expect("threshold scan");
    // rows are ordered (T, tau): below-threshold pair first
    let below = (rows[0].scaled.log_abs, rows[1].scaled.log_abs);
    let above = (rows[2].scaled.log_abs, rows[3].scaled.log_abs);
    let decreasing = below.1 < below.0;
    let increasing = above.1 > above.0;
    report(
        5,
        decreasing && increasing,
        format!(
            "log|e^(tau T) I_f| at T = 2l-0.5: {:.2} -> {:.2} (want down); at T = 2l+0.5: {:.2} -> {:.2} (want up)",
            below.0, below.1, above.0, above.1
        ),
    );
}

#[test]
fn criterion_6_energy_bracket() {
    let b = bundle();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut count = 0;
    for (label, run) in [("c=-0.8", &b.a1), ("c=+1.0", &b.a2)] {
        for rep in run
            .reports
            .iter()
            .filter(|r| r.check == "indicator_energy_bracket")
        {
            count += 1;
            pass &= rep.pass;
            lines.push(format!("{label} tau={}: {}", rep.params["tau"], rep.pass));
        }
    }
    // both contrast signs at both bracket rates
    pass &= count == 4;
    report(6, pass, lines.join("; "));
}

#[test]
fn criterion_7_enclosure_soundness() {
    let b = bundle();
    let mask = &b.a1.mask;
    let n = mask.grid.n;
    let step = |lo: f64, hi: f64, n: usize| (hi - lo) / n as f64;
    let locate = |v: f64, lo: f64, hi: f64, n: usize| -> usize {
        let i = ((v - lo) / step(lo, hi, n)).floor();
        (i.max(0.0) as usize).min(n - 1)
    };
    let samples: Vec<Point3> = b.scenario.obstacle.sample_volume(16);
    let mut inside = 0usize;
    for x in &samples {
        let i = locate(x.x1, mask.grid.lo.x1, mask.grid.hi.x1, n[0]);
        let j = locate(x.x2, mask.grid.lo.x2, mask.grid.hi.x2, n[1]);
        let k = locate(x.x3, mask.grid.lo.x3, mask.grid.hi.x3, n[2]);
        if mask.marked[(k * n[1] + j) * n[0] + i] {
            inside += 1;
        }
    }
    let frac = inside as f64 / samples.len() as f64;
    report(
        7,
        frac >= 0.99,
        format!(
            "{inside}/{} obstacle samples inside the {}^3 region built from l(D,B) est {:.4} ({:.1}%)",
            samples.len(),
            n[0],
            mask.l_db_est,
            100.0 * frac
        ),
    );
}

#[test]
fn criterion_8_deterministic_artifacts() {
    // the criterion fixes the command, not the mesh: a coarser grid keeps
    // the check cheap while exercising the identical write path
    let mut outputs = Vec::new();
    for rerun in 0..2 {
        let mut scenario = reference_scenario(0.12, -0.8, 40.0).expect("scenario");
        scenario.output_dir = std::env::temp_dir().join(format!("acceptance-determinism-{rerun}"));
        let out = run_scenario(&scenario).expect("run");
        write_artifacts(&scenario, &out).expect("artifacts");
        outputs.push(scenario.output_dir);
    }
    let mut pass = true;
    let mut details = Vec::new();
    for name in [
        "record.bin",
        "record.csv",
        "indicator.csv",
        "enclosure_mask.bin",
        "oracles.jsonl",
        "summary.json",
    ] {
        let a = std::fs::read(outputs[0].join(name)).expect(name);
        let b = std::fs::read(outputs[1].join(name)).expect(name);
        let same = a == b;
        pass &= same;
        details.push(format!("{name}: {}", if same { "identical" } else { "DIFFERS" }));
    }
    report(8, pass, details.join(", "));
}
