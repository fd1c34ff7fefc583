//! Parameter sweeps over the oscillator ensemble: fluctuation tables,
//! Lyapunov sweeps for both metrics, and the Jacobi right-hand-side audit.
//!
//! Points run on a rayon pool and are merged by sorted `(N, f, ω)` key, so
//! results do not depend on the number of workers.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::oscillator::{sigma_numeric, OscillatorConfig};
use crate::propagation::{estimate_lambda, IntegrationParams, Metric};
use crate::spread::{compare_rhs, RhsComparison};

/// Samples per fluctuation period used for the absolute variance column.
pub const VARIANCE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub n_osc: usize,
    pub phase_fraction: f64,
    pub omega: f64,
}

impl GridPoint {
    pub fn new(n_osc: usize, phase_fraction: f64, omega: f64) -> Self {
        Self {
            n_osc,
            phase_fraction,
            omega,
        }
    }

    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.n_osc
            .cmp(&other.n_osc)
            .then(self.phase_fraction.total_cmp(&other.phase_fraction))
            .then(self.omega.total_cmp(&other.omega))
    }

    fn key_bits(&self) -> (usize, u64, u64) {
        (self.n_osc, self.phase_fraction.to_bits(), self.omega.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub label: String,
    pub grid: Vec<GridPoint>,
    pub params: IntegrationParams,
}

impl SweepSpec {
    pub fn new(label: impl Into<String>, grid: Vec<GridPoint>, params: IntegrationParams) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("grid", "must not be empty"));
        }
        let mut seen = HashSet::new();
        for p in &grid {
            if !seen.insert(p.key_bits()) {
                return Err(invalid("grid", format!("duplicate point {p:?}")));
            }
        }
        params.validate()?;
        Ok(Self {
            label: label.into(),
            grid,
            params,
        })
    }
}

/// One evaluated grid point. Integration columns are `None` for
/// tabulation-only sweeps; `lambda` is NaN when the run diverged or failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_osc: usize,
    pub f: f64,
    pub omega: f64,
    pub sigma: f64,
    pub sqrt_sigma: f64,
    pub abs_variance: f64,
    pub lambda: Option<f64>,
    pub renorm_count: Option<u64>,
    pub min_kinetic: Option<f64>,
    pub diverged: Option<bool>,
    /// Wall time of the point in seconds.
    pub runtime: Option<f64>,
    /// Failure message when the integration aborted.
    pub error: Option<String>,
}

impl SweepRow {
    /// λ when the point produced a finite estimate.
    pub fn finite_lambda(&self) -> Option<f64> {
        self.lambda.filter(|l| l.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub label: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn diverged_count(&self) -> usize {
        self.rows.iter().filter(|r| r.diverged == Some(true)).count()
    }

    pub fn failed_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn tabulate(point: &GridPoint) -> Result<(OscillatorConfig, SweepRow)> {
    let config = OscillatorConfig::new(point.n_osc, point.omega, point.phase_fraction)?;
    let stats = config.fluctuation_stats();
    let sampled = sigma_numeric(&config, VARIANCE_SAMPLES)?;
    let row = SweepRow {
        n_osc: point.n_osc,
        f: point.phase_fraction,
        omega: point.omega,
        sigma: stats.sigma,
        sqrt_sigma: stats.sigma_sqrt,
        abs_variance: sampled.abs_variance,
        lambda: None,
        renorm_count: None,
        min_kinetic: None,
        diverged: None,
        runtime: None,
        error: None,
    };
    Ok((config, row))
}

fn run_point(point: &GridPoint, params: &IntegrationParams) -> Result<SweepRow> {
    let start = Instant::now();
    let (config, mut row) = tabulate(point)?;
    match estimate_lambda(&config, params) {
        Ok(est) => {
            row.lambda = Some(est.lambda);
            row.renorm_count = Some(est.renorm_count);
            row.min_kinetic = Some(est.min_kinetic);
            row.diverged = Some(est.diverged);
        }
        Err(crate::Error::SingularKineticEnergy { min_kinetic, .. }) => {
            row.lambda = Some(f64::NAN);
            row.min_kinetic = Some(min_kinetic);
            row.diverged = Some(false);
            row.error = Some("singular kinetic energy".into());
        }
        Err(e) => {
            row.lambda = Some(f64::NAN);
            row.diverged = Some(false);
            row.error = Some(e.to_string());
        }
    }
    row.runtime = Some(start.elapsed().as_secs_f64());
    Ok(row)
}

fn sort_rows(rows: &mut [(GridPoint, SweepRow)]) {
    rows.sort_by(|a, b| a.0.key_cmp(&b.0));
}

/// Runs every grid point through [`estimate_lambda`] on `workers` threads
/// (`None` uses the rayon default). Per-point failures are recorded in the
/// row and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult> {
    use rayon::prelude::*;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| crate::Error::Io(format!("thread pool: {e}")))?;
    let evaluated: Vec<Result<(GridPoint, SweepRow)>> = pool.install(|| {
        spec.grid
            .par_iter()
            .map(|p| run_point(p, &spec.params).map(|row| (*p, row)))
            .collect()
    });
    let mut rows = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(SweepResult {
        label: spec.label.clone(),
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

/// `N = 2 + j²` for `j = 1..=14`.
pub fn fig2_sizes() -> Vec<usize> {
    (1..=14).map(|j| 2 + j * j).collect()
}

/// `f = 0.05, 0.10, …, 0.45`.
pub fn fig2_fractions() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 20.0).collect()
}

/// Full fluctuation-versus-size grid at `ω = 2π`.
pub fn fig2_grid() -> Vec<GridPoint> {
    let fractions = fig2_fractions();
    fig2_sizes()
        .into_iter()
        .flat_map(|n| fractions.iter().map(move |&f| GridPoint::new(n, f, TAU)))
        .collect()
}

/// `f = 0.01, 0.03, …, 0.49`.
pub fn fig3_fractions() -> Vec<f64> {
    (0..25).map(|i| (1 + 2 * i) as f64 / 100.0).collect()
}

/// `ω = π, 2π, …, 10π`.
pub fn fig4_omegas() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * PI).collect()
}

/// σ(N, f) over `f ∈ [0, 1]` in steps of 1/720. No integration.
pub fn run_fig1(n_osc: usize, omega: f64) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(721);
    for i in 0..=720 {
        let point = GridPoint::new(n_osc, i as f64 / 720.0, omega);
        rows.push(tabulate(&point)?.1);
    }
    Ok(SweepResult {
        label: "fig1".into(),
        rows,
    })
}

/// Jacobi λ against kinetic-energy fluctuation over the `(N, f)` grid.
pub fn run_fig2(params: &IntegrationParams, workers: Option<usize>) -> Result<SweepResult> {
    let spec = SweepSpec::new("fig2", fig2_grid(), *params)?;
    run_sweep(&spec, workers)
}

/// Two oscillators: λ and the absolute kinetic-energy variance per `f`.
pub fn run_fig3(
    f_grid: &[f64],
    params: &IntegrationParams,
    workers: Option<usize>,
) -> Result<SweepResult> {
    let grid = f_grid.iter().map(|&f| GridPoint::new(2, f, TAU)).collect();
    run_sweep(&SweepSpec::new("fig3", grid, *params)?, workers)
}

/// Ten oscillators over the full phase circle (σ = 0) at each `ω`.
pub fn run_fig4(
    omega_grid: &[f64],
    params: &IntegrationParams,
    workers: Option<usize>,
) -> Result<SweepResult> {
    let grid = omega_grid.iter().map(|&w| GridPoint::new(10, 1.0, w)).collect();
    run_sweep(&SweepSpec::new("fig4", grid, *params)?, workers)
}

/// The fluctuation sweep grid integrated with the Eisenhart metric.
pub fn run_eisenhart_control(
    params: &IntegrationParams,
    workers: Option<usize>,
) -> Result<SweepResult> {
    let spec = SweepSpec::new(
        "eisenhart-control",
        fig2_grid(),
        params.with_metric(Metric::Eisenhart),
    )?;
    run_sweep(&spec, workers)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub point: GridPoint,
    pub comparison: RhsComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn max_i_block(&self) -> f64 {
        self.rows.iter().map(|r| r.comparison.i_block).fold(0.0, f64::max)
    }

    pub fn max_j_block(&self) -> f64 {
        self.rows.iter().map(|r| r.comparison.j_block).fold(0.0, f64::max)
    }

    pub fn max_k_block(&self) -> f64 {
        self.rows.iter().map(|r| r.comparison.k_block).fold(0.0, f64::max)
    }
}

/// Default audit configurations: `N ∈ {2, 3, 5, 10}`, `f ∈ {0.1, 0.3, 0.45, 0.8}`, `ω = 2π`.
pub fn audit_grid() -> Vec<GridPoint> {
    [2, 3, 5, 10]
        .into_iter()
        .flat_map(|n| [0.1, 0.3, 0.45, 0.8].map(|f| GridPoint::new(n, f, TAU)))
        .collect()
}

/// Compares the generic and closed-form Jacobi evaluators on each
/// configuration at `times` seeded random instants within one period,
/// `trials` random states per instant.
pub fn run_audit(grid: &[GridPoint], times: usize, trials: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let config = OscillatorConfig::new(point.n_osc, point.omega, point.phase_fraction)?;
        let sample_times: Vec<f64> = (0..times)
            .map(|_| rng.gen::<f64>() * config.period())
            .collect();
        let comparison = compare_rhs(&config, &sample_times, trials, rng.gen());
        rows.push(AuditRow {
            point: *point,
            comparison,
        });
    }
    Ok(AuditReport { rows })
}

/// Average ranks (1-based, ties share their mean rank).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation. NaN for fewer than two pairs or a constant
/// input.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    if x.len() < 2 {
        return f64::NAN;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Worst relative disagreement between λ curves of different `N` plotted
/// against √σ.
///
/// Every point is compared with the curve of every other `N` whose √σ range
/// contains it, interpolating that curve linearly in `(√σ, ln λ)`. Only
/// rows with finite positive λ take part. Returns `(worst, comparisons)`.
pub fn collapse_deviation(rows: &[SweepRow]) -> (f64, usize) {
    let mut curves: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let Some(l) = r.finite_lambda().filter(|l| *l > 0.0) else {
            continue;
        };
        match curves.iter_mut().find(|(n, _)| *n == r.n_osc) {
            Some((_, c)) => c.push((r.sqrt_sigma, l)),
            None => curves.push((r.n_osc, vec![(r.sqrt_sigma, l)])),
        }
    }
    for (_, c) in &mut curves {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (na, a) in &curves {
        for (nb, b) in &curves {
            if na == nb || b.len() < 2 {
                continue;
            }
            for &(s, l) in a {
                let Some(k) = b.windows(2).position(|w| w[0].0 <= s && s <= w[1].0) else {
                    continue;
                };
                let (lo, hi) = (b[k], b[k + 1]);
                let w = if hi.0 > lo.0 { (s - lo.0) / (hi.0 - lo.0) } else { 0.0 };
                let interp = (lo.1.ln() * (1.0 - w) + hi.1.ln() * w).exp();
                worst = worst.max((l - interp).abs() / l.max(interp));
                count += 1;
            }
        }
    }
    (worst, count)
}
