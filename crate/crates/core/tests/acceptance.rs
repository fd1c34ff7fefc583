//! Exit criteria. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each and exits nonzero if any fails.

use std::f64::consts::TAU;
use std::process::{Command, ExitCode};
use std::time::Instant;

use geospread::cli::{audit_csv, sweep_csv};
use geospread::experiments::{
    audit_grid, collapse_deviation, fig3_fractions, fig4_omegas, run_audit, run_eisenhart_control,
    run_fig2, run_fig3, run_fig4, run_sweep, spearman, GridPoint, SweepSpec,
};
use geospread::oscillator::{sigma, sigma_numeric, OscillatorConfig};
use geospread::propagation::{
    auto_dt_periods, estimate_lambda, step_rk4, EisenhartRhs, IntegrationParams, Metric, Xi0Policy,
};
use geospread::SpreadState;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 1..=50 {
        for i in 0..20 {
            let f = (i as f64 + 0.5) / 20.0;
            let config = OscillatorConfig::new(n, TAU, f).unwrap();
            let exact = sigma(n, f).unwrap();
            let sampled = sigma_numeric(&config, 10_000).unwrap().sigma;
            worst = worst.max((exact - sampled).abs() / exact.max(1e-12));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && secs < 10.0,
        format!("50x20 grid: max relative error {worst:.3e} (<= 1e-6), {secs:.2} s (< 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [2, 3, 10, 100, 10_000] {
        let s = sigma(n, 0.5).unwrap();
        if s != 0.0 {
            ok = false;
            notes.push(format!("σ({n}, 0.5) = {s:e}"));
        }
    }
    let mut worst_small: f64 = 0.0;
    for n in [1, 2, 3, 10, 198, 10_000] {
        worst_small = worst_small.max((sigma(n, 0.0).unwrap() - 0.5).abs());
        worst_small = worst_small.max((sigma(n, 1e-9).unwrap() - 0.5).abs());
    }
    ok &= worst_small <= 1e-12;
    let mut worst_mean: f64 = 0.0;
    for (n, omega, c, f) in [(2, TAU, 1.0, 0.05), (10, 3.0, 0.7, 0.3), (57, 12.5, 2.0, 0.81)] {
        let config = OscillatorConfig::with_amplitude(n, omega, c, f).unwrap();
        let formula = n as f64 * (omega * c / 2.0).powi(2);
        let sampled = sigma_numeric(&config, 4096).unwrap().mean_kinetic;
        worst_mean = worst_mean.max((sampled - formula).abs() / formula);
        worst_mean = worst_mean.max((config.mean_kinetic() - formula).abs() / formula);
    }
    ok &= worst_mean <= 1e-12;
    notes.push(format!(
        "σ(f=0.5) exact zero; |σ(f→0) − 1/2| {worst_small:.1e}; ⟨T⟩ relative error {worst_mean:.1e} (<= 1e-12)"
    ));
    check(ok, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let res = run_eisenhart_control(&IntegrationParams::default(), None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let lambdas: Vec<f64> = res.rows.iter().filter_map(|r| r.finite_lambda()).collect();
    let max_abs = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut spread: f64 = 0.0;
    for n in geospread::experiments::fig2_sizes() {
        let at_n: Vec<f64> = res
            .rows
            .iter()
            .filter(|r| r.n_osc == n)
            .filter_map(|r| r.finite_lambda())
            .collect();
        let (lo, hi) = at_n
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(*l), hi.max(*l)));
        spread = spread.max(hi - lo);
    }
    let complete = lambdas.len() == res.rows.len() && res.rows.len() == 126;
    check(
        complete && res.diverged_count() == 0 && max_abs <= 1e-2 && spread <= 1e-2 && secs < 300.0,
        format!(
            "{} points, {} diverged, max |λ| {max_abs:.3e} (<= 1e-2), spread across f {spread:.3e} (<= 1e-2), {secs:.1} s (< 300 s)",
            res.rows.len(),
            res.diverged_count()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let res = run_fig2(&IntegrationParams::default(), None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let positive = res
        .rows
        .iter()
        .filter(|r| r.finite_lambda().is_some_and(|l| l > 0.0))
        .count();
    let share = positive as f64 / res.rows.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = res
        .rows
        .iter()
        .filter_map(|r| r.finite_lambda().map(|l| (r.sqrt_sigma, l)))
        .unzip();
    let rho = spearman(&x, &y);
    let (collapse, comparisons) = collapse_deviation(&res.rows);
    check(
        share >= 0.95 && rho >= 0.95 && collapse <= 0.20 && secs < 1800.0,
        format!(
            "λ > 0 on {positive}/{} ({:.1}%, >= 95%), Spearman(λ, √σ) {rho:.4} (>= 0.95), collapse {:.1}% over {comparisons} pairs (<= 20%), {secs:.0} s (< 1800 s)",
            res.rows.len(),
            100.0 * share,
            100.0 * collapse
        ),
    )
}

fn criterion_5() -> Outcome {
    let res = run_fig3(&fig3_fractions(), &IntegrationParams::default(), None).unwrap();
    let (l, v): (Vec<f64>, Vec<f64>) = res
        .rows
        .iter()
        .filter_map(|r| r.finite_lambda().map(|l| (l, r.abs_variance)))
        .unzip();
    let complete = l.len() == res.rows.len();
    let rho = spearman(&l, &v);
    check(
        complete && rho >= 0.9,
        format!("{} f values, Spearman(λ, ⟨T²⟩ − ⟨T⟩²) {rho:.4} (>= 0.9)", res.rows.len()),
    )
}

fn criterion_6() -> Outcome {
    let res = run_fig4(&fig4_omegas(), &IntegrationParams::default(), None).unwrap();
    let (w, l): (Vec<f64>, Vec<f64>) = res
        .rows
        .iter()
        .filter_map(|r| r.finite_lambda().map(|l| (r.omega, l)))
        .unzip();
    let all_positive = l.len() == res.rows.len() && l.iter().all(|l| *l > 0.0);
    let rho = spearman(&l, &w);
    let sigma_zero = res.rows.iter().all(|r| r.sigma == 0.0);
    check(
        all_positive && rho >= 0.9 && sigma_zero,
        format!(
            "{} ω values, all λ > 0: {all_positive}, Spearman(λ, ω) {rho:.4} (>= 0.9), σ = 0 on every row: {sigma_zero}",
            res.rows.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let report = run_audit(&audit_grid(), 10, 10, 7).unwrap();
    let samples: usize = report.rows.iter().map(|r| r.comparison.samples).sum();
    let (i, j, k) = (report.max_i_block(), report.max_j_block(), report.max_k_block());
    let csv = audit_csv(&report);
    let reported = csv.lines().next().is_some_and(|h| h.contains("k_block_dev"))
        && csv.lines().count() == report.rows.len() + 1;
    check(
        samples >= 100 && i <= 1e-12 && j <= 1e-12 && reported,
        format!("{samples} samples, I {i:.2e} (<= 1e-12), J {j:.2e} (<= 1e-12), K {k:.3e} reported in audit CSV"),
    )
}

fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= 0.01 * a.abs().max(b.abs()) || (a - b).abs() <= 1e-3
}

fn rk4_error(steps_per_period: usize) -> f64 {
    let config = OscillatorConfig::new(1, TAU, 0.0).unwrap();
    let dt = config.period() / steps_per_period as f64;
    let mut rhs = EisenhartRhs::new(&config);
    let mut state = SpreadState::new(0.0, vec![1.0], vec![0.0]).unwrap();
    for _ in 0..steps_per_period {
        state = step_rk4(&mut rhs, &state, dt).unwrap();
    }
    let t = state.t;
    ((state.xi[0] - (TAU * t).cos()).powi(2) + ((state.xi_dot[0] + TAU * (TAU * t).sin()) / TAU).powi(2)).sqrt()
}

fn criterion_8() -> Outcome {
    let points = [(3, 0.05), (3, 0.25), (3, 0.45), (18, 0.15), (51, 0.35), (198, 0.05), (198, 0.45), (10, 1.0)];
    let mut worst_dt: f64 = 0.0;
    let mut worst_renorm: f64 = 0.0;
    let mut ok = true;
    for (n, f) in points {
        let config = OscillatorConfig::new(n, TAU, f).unwrap();
        let base = IntegrationParams::default();
        let halved = IntegrationParams {
            dt_periods: Some(auto_dt_periods(&config, base.metric) / 2.0),
            ..base
        };
        let coarse_renorm = IntegrationParams { renorm_periods: 5.0, ..base };
        let l0 = estimate_lambda(&config, &base).unwrap().lambda;
        let l1 = estimate_lambda(&config, &halved).unwrap().lambda;
        let l5 = estimate_lambda(&config, &coarse_renorm).unwrap().lambda;
        ok &= agrees(l0, l1) && agrees(l0, l5);
        worst_dt = worst_dt.max((l0 - l1).abs() / l0.abs().max(l1.abs()));
        worst_renorm = worst_renorm.max((l0 - l5).abs() / l0.abs().max(l5.abs()));
    }
    let ratio = rk4_error(50) / rk4_error(100);
    ok &= (15.0..=17.0).contains(&ratio);
    check(
        ok,
        format!(
            "{} points: dt halving worst {:.3}%, renorm 1 vs 5 periods worst {:.2e}% (<= 1% or 1e-3); RK4 error ratio {ratio:.3} (≈ 16)",
            points.len(),
            100.0 * worst_dt,
            100.0 * worst_renorm
        ),
    )
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_geospread"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let out = args.iter().position(|a| *a == "--out").map(|i| args[i + 1]).unwrap();
    std::fs::read(out).unwrap()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (a, b, c) = (path("a.csv"), path("b.csv"), path("c.csv"));
    let common = ["--xi0", "seeded-random-unit", "--seed", "11", "--t-max-periods", "50", "--out"];
    let run = |workers: &str, out: &str| {
        let mut args = vec!["fig4", "--workers", workers];
        args.extend(common);
        args.push(out);
        run_cli(&args)
    };
    let first = run("1", &a);
    let second = run("1", &b);
    let parallel = run("4", &c);
    let cli_same = !first.is_empty() && first == second && first == parallel;

    let grid: Vec<GridPoint> = [(3, 0.05), (6, 0.2), (11, 0.35), (3, 0.45), (18, 0.1), (6, 0.3)]
        .into_iter()
        .map(|(n, f)| GridPoint::new(n, f, TAU))
        .collect();
    let params = IntegrationParams {
        t_max_periods: 40.0,
        xi0_policy: Xi0Policy::SeededRandomUnit,
        seed: 3,
        metric: Metric::JacobiGeneric,
        ..Default::default()
    };
    let spec = SweepSpec::new("determinism", grid, params).unwrap();
    let serial = sweep_csv(&run_sweep(&spec, Some(1)).unwrap(), false);
    let threaded = sweep_csv(&run_sweep(&spec, Some(3)).unwrap(), false);
    let again = sweep_csv(&run_sweep(&spec, Some(3)).unwrap(), false);
    let lib_same = serial == threaded && serial == again;
    check(
        cli_same && lib_same,
        format!("CLI fig4 reruns (1, 1, 4 workers) identical: {cli_same}; library sweep (1, 3, 3 workers) identical: {lib_same}"),
    )
}

fn main() -> ExitCode {
    // the libtest harness passes flags like --nocapture; none apply here
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: &[Criterion] = &[
        ("1 sigma closed form vs time average", criterion_1),
        ("2 sigma boundary values and mean kinetic energy", criterion_2),
        ("3 eisenhart control", criterion_3),
        ("4 jacobi instability over the size/fraction grid", criterion_4),
        ("5 two-oscillator λ tracks kinetic variance", criterion_5),
        ("6 λ grows with ω at constant kinetic energy", criterion_6),
        ("7 generic vs closed-form right-hand side", criterion_7),
        ("8 numerical robustness", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = 0;
    for &(name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("criterion {name}: {verdict} | {} [{:.1} s]", outcome.detail, start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
