//! Fixed-step RK4 integration of the spread equations with periodic
//! renormalization, and the geometric Lyapunov estimate built on it.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::oscillator::{OscillatorConfig, PhasePoint};
use crate::spread::{self, SpreadState};

/// Any component above this between renormalizations marks a run diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Eisenhart,
    JacobiGeneric,
    JacobiClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Xi0Policy {
    /// `ξ = e₁`, `ξ̇ = 0`, normalized.
    DeterministicBasis,
    /// Gaussian direction in `(ξ, ξ̇)` drawn from the run seed.
    SeededRandomUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaUnits {
    PerTime,
    /// Per unit Jacobi arc length `s = ∫ 2T dt`.
    PerArcLength,
}

macro_rules! kebab_enum {
    ($ty:ty, $($variant:ident => $name:literal),+ $(,)?) => {
        impl $ty {
            pub const NAMES: &'static [&'static str] = &[$($name),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Self::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    _ => Err(format!(
                        "unknown value `{s}`, expected one of: {}",
                        Self::NAMES.join(", ")
                    )),
                }
            }
        }
    };
}

kebab_enum!(Metric, Eisenhart => "eisenhart", JacobiGeneric => "jacobi-generic", JacobiClosed => "jacobi-closed");
kebab_enum!(Xi0Policy, DeterministicBasis => "deterministic-basis", SeededRandomUnit => "seeded-random-unit");
kebab_enum!(LambdaUnits, PerTime => "per-time", PerArcLength => "per-arc-length");

/// Steps per period of the automatic Eisenhart step.
pub const AUTO_BASE_STEPS_PER_PERIOD: f64 = 200.0;
/// Steps per period of the automatic Jacobi step before refinement by the
/// kinetic-energy minimum.
pub const AUTO_JACOBI_STEPS_PER_PERIOD: f64 = 400.0;
/// Upper bound on automatic steps per period.
pub const AUTO_MAX_STEPS_PER_PERIOD: f64 = 1e6;

/// Integration settings. Times are expressed in oscillation periods
/// `2π/ω` so one template serves every frequency of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationParams {
    /// Step in periods; `None` picks [`auto_dt_periods`] per configuration.
    pub dt_periods: Option<f64>,
    pub t_max_periods: f64,
    pub renorm_periods: f64,
    /// Kinetic-energy floor relative to `⟨T⟩`.
    pub epsilon_t_rel: f64,
    pub xi0_policy: Xi0Policy,
    pub seed: u64,
    pub metric: Metric,
    pub lambda_units: LambdaUnits,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            dt_periods: None,
            t_max_periods: 500.0,
            renorm_periods: 1.0,
            epsilon_t_rel: 1e-12,
            xi0_policy: Xi0Policy::DeterministicBasis,
            seed: 0,
            metric: Metric::JacobiGeneric,
            lambda_units: LambdaUnits::PerTime,
        }
    }
}

impl IntegrationParams {
    pub fn with_metric(self, metric: Metric) -> Self {
        Self { metric, ..self }
    }

    /// Checks every field that does not depend on the configuration.
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        if let Some(dt) = self.dt_periods {
            positive("dt", dt)?;
        }
        positive("t_max", self.t_max_periods)?;
        positive("renorm_interval", self.renorm_periods)?;
        positive("epsilon_t", self.epsilon_t_rel)?;
        // the automatic step never exceeds the base step
        self.check_step(self.dt_periods.unwrap_or(1.0 / AUTO_BASE_STEPS_PER_PERIOD))
    }

    fn check_step(&self, dt_periods: f64) -> Result<()> {
        if self.t_max_periods < 100.0 * dt_periods {
            return Err(invalid("t_max", "must be at least 100 time steps"));
        }
        if self.renorm_periods < dt_periods {
            return Err(invalid("renorm_interval", "must be at least one time step"));
        }
        Ok(())
    }

    /// Step in periods for this configuration.
    pub fn dt_periods(&self, config: &OscillatorConfig) -> f64 {
        self.dt_periods
            .unwrap_or_else(|| auto_dt_periods(config, self.metric))
    }

    pub fn dt(&self, config: &OscillatorConfig) -> f64 {
        self.dt_periods(config) * config.period()
    }

    pub fn t_max(&self, config: &OscillatorConfig) -> f64 {
        self.t_max_periods * config.period()
    }

    pub fn renorm_interval(&self, config: &OscillatorConfig) -> f64 {
        self.renorm_periods * config.period()
    }

    pub fn epsilon_t(&self, config: &OscillatorConfig) -> f64 {
        self.epsilon_t_rel * config.mean_kinetic()
    }

    /// Whole steps to `t_max` and between renormalizations.
    fn step_counts(&self, dt_periods: f64) -> (u64, u64) {
        let total = (self.t_max_periods / dt_periods).round() as u64;
        let every = ((self.renorm_periods / dt_periods).round() as u64).max(1);
        (total, every)
    }
}

/// Automatic step: `1/200` of a period for the Eisenhart metric. For the
/// Jacobi metrics `1/400` shrunk by the depth of the kinetic-energy minimum
/// `T_min/⟨T⟩ = 1 − √(2σ)`, rounded to a whole number of steps per period.
///
/// Near `T_min` the Jacobi couplings grow like `⟨T⟩/T` and `(⟨T⟩/T)²` and
/// the dip narrows like `√(T_min/⟨T⟩)`, so a period-fixed step stops
/// resolving it as `σ → 1/2`.
pub fn auto_dt_periods(config: &OscillatorConfig, metric: Metric) -> f64 {
    if metric == Metric::Eisenhart {
        return 1.0 / AUTO_BASE_STEPS_PER_PERIOD;
    }
    let depth = 1.0 - (2.0 * config.fluctuation_stats().sigma).sqrt();
    let steps = if depth > 0.0 {
        (AUTO_JACOBI_STEPS_PER_PERIOD / depth)
            .ceil()
            .min(AUTO_MAX_STEPS_PER_PERIOD)
    } else {
        AUTO_MAX_STEPS_PER_PERIOD
    };
    1.0 / steps
}

/// Evaluator of `d²ξ/dt²` for the first-order RK4 system `(ξ, ξ̇)`.
pub trait SpreadRhs {
    fn dim(&self) -> usize;

    fn accel(&mut self, t: f64, xi: &[f64], xi_dot: &[f64], out: &mut [f64]) -> Result<()>;

    /// Smallest kinetic energy seen by the evaluator, if it tracks one.
    fn min_kinetic(&self) -> f64 {
        f64::INFINITY
    }
}

pub struct EisenhartRhs {
    n: usize,
    omega_sq: f64,
}

impl EisenhartRhs {
    pub fn new(config: &OscillatorConfig) -> Self {
        Self {
            n: config.n_osc(),
            omega_sq: config.omega() * config.omega(),
        }
    }
}

impl SpreadRhs for EisenhartRhs {
    fn dim(&self) -> usize {
        self.n
    }

    fn accel(&mut self, _t: f64, xi: &[f64], _xi_dot: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, x) in out.iter_mut().zip(xi) {
            *o = -self.omega_sq * x;
        }
        Ok(())
    }
}

/// Generic Jacobi form with the trajectory evaluated analytically at each
/// substep.
pub struct JacobiGenericRhs<'a> {
    config: &'a OscillatorConfig,
    point: PhasePoint,
    floor: f64,
    min_kinetic: f64,
}

impl<'a> JacobiGenericRhs<'a> {
    pub fn new(config: &'a OscillatorConfig, floor: f64) -> Self {
        Self {
            config,
            point: PhasePoint::default(),
            floor,
            min_kinetic: f64::INFINITY,
        }
    }
}

impl SpreadRhs for JacobiGenericRhs<'_> {
    fn dim(&self) -> usize {
        self.config.n_osc()
    }

    fn accel(&mut self, t: f64, xi: &[f64], xi_dot: &[f64], out: &mut [f64]) -> Result<()> {
        self.config.trajectory_into(t, &mut self.point);
        self.min_kinetic = self.min_kinetic.min(self.point.kinetic);
        spread::jacobi_generic_into(self.config.omega(), &self.point, xi, xi_dot, self.floor, out)
    }

    fn min_kinetic(&self) -> f64 {
        self.min_kinetic
    }
}

/// Published closed-form Jacobi equation with dense coupling matrices.
pub struct JacobiClosedRhs<'a> {
    config: &'a OscillatorConfig,
    floor: f64,
    min_kinetic: f64,
}

impl<'a> JacobiClosedRhs<'a> {
    pub fn new(config: &'a OscillatorConfig, floor: f64) -> Self {
        Self {
            config,
            floor,
            min_kinetic: f64::INFINITY,
        }
    }
}

impl SpreadRhs for JacobiClosedRhs<'_> {
    fn dim(&self) -> usize {
        self.config.n_osc()
    }

    fn accel(&mut self, t: f64, xi: &[f64], xi_dot: &[f64], out: &mut [f64]) -> Result<()> {
        self.min_kinetic = self.min_kinetic.min(self.config.kinetic_closed_form(t));
        spread::jacobi_closed_into(self.config, t, xi, xi_dot, self.floor, out)
    }

    fn min_kinetic(&self) -> f64 {
        self.min_kinetic
    }
}

/// Scratch buffers for one RK4 step.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    a: [Vec<f64>; 4],
    v: [Vec<f64>; 3],
    x: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            a: std::array::from_fn(|_| vec![0.0; n]),
            v: std::array::from_fn(|_| vec![0.0; n]),
            x: vec![0.0; n],
        }
    }
}

/// One classical RK4 step of `(ξ, ξ̇)` in place. On error the state is
/// left untouched.
pub fn step_rk4_in_place<R: SpreadRhs + ?Sized>(
    rhs: &mut R,
    state: &mut SpreadState,
    dt: f64,
    ws: &mut Rk4Workspace,
) -> Result<()> {
    let n = state.dim();
    if rhs.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: rhs.dim(),
            got: n,
        });
    }
    let (t, h, half) = (state.t, dt, 0.5 * dt);
    let (xi, xv) = (&state.xi, &state.xi_dot);
    let [a1, a2, a3, a4] = &mut ws.a;
    let [v2, v3, v4] = &mut ws.v;
    let x = &mut ws.x;

    rhs.accel(t, xi, xv, a1)?;
    for k in 0..n {
        x[k] = xi[k] + half * xv[k];
        v2[k] = xv[k] + half * a1[k];
    }
    rhs.accel(t + half, x, v2, a2)?;
    for k in 0..n {
        x[k] = xi[k] + half * v2[k];
        v3[k] = xv[k] + half * a2[k];
    }
    rhs.accel(t + half, x, v3, a3)?;
    for k in 0..n {
        x[k] = xi[k] + h * v3[k];
        v4[k] = xv[k] + h * a3[k];
    }
    rhs.accel(t + h, x, v4, a4)?;

    let sixth = h / 6.0;
    let mut finite = true;
    for k in 0..n {
        let new_xi = xi[k] + sixth * (xv[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]);
        let new_xv = xv[k] + sixth * (a1[k] + 2.0 * a2[k] + 2.0 * a3[k] + a4[k]);
        finite &= new_xi.is_finite() && new_xv.is_finite();
        x[k] = new_xi;
        v2[k] = new_xv;
    }
    if !finite {
        return Err(Error::NonFiniteState { t: t + h });
    }
    state.xi.copy_from_slice(x);
    state.xi_dot.copy_from_slice(v2);
    state.t = t + h;
    Ok(())
}

/// One classical RK4 step; `t` advances by `dt` and `log_norm` is carried
/// over unchanged.
pub fn step_rk4<R: SpreadRhs + ?Sized>(
    rhs: &mut R,
    state: &SpreadState,
    dt: f64,
) -> Result<SpreadState> {
    let mut next = state.clone();
    let mut ws = Rk4Workspace::new(state.dim());
    step_rk4_in_place(rhs, &mut next, dt, &mut ws)?;
    Ok(next)
}

/// Composite norm `‖(ωξ, ξ̇)‖`; both blocks carry units of 1/time.
pub fn composite_norm(state: &SpreadState, omega: f64) -> f64 {
    let w2 = omega * omega;
    state
        .xi
        .iter()
        .zip(&state.xi_dot)
        .map(|(x, v)| w2 * x * x + v * v)
        .sum::<f64>()
        .sqrt()
}

fn renormalize_in_place(state: &mut SpreadState, omega: f64) -> Result<f64> {
    let norm = composite_norm(state, omega);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::ZeroNormState);
    }
    let inv = norm.recip();
    state.xi.iter_mut().for_each(|x| *x *= inv);
    state.xi_dot.iter_mut().for_each(|v| *v *= inv);
    let ln = norm.ln();
    state.log_norm += ln;
    Ok(ln)
}

/// Rescales `(ξ, ξ̇)` to unit composite norm and adds the log of the
/// removed factor to `log_norm`.
pub fn renormalize(state: &SpreadState, omega: f64) -> Result<SpreadState> {
    let mut out = state.clone();
    renormalize_in_place(&mut out, omega)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub units: LambdaUnits,
    /// `(t, running λ(t))` at every renormalization.
    pub series: Vec<(f64, f64)>,
    pub renorm_count: u64,
    pub min_kinetic: f64,
    pub arc_length_total: f64,
    pub diverged: bool,
}

fn initial_state(config: &OscillatorConfig, params: &IntegrationParams) -> SpreadState {
    let n = config.n_osc();
    let mut state = SpreadState::zeros(n);
    match params.xi0_policy {
        Xi0Policy::DeterministicBasis => state.xi[0] = 1.0,
        Xi0Policy::SeededRandomUnit => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            loop {
                for x in state.xi.iter_mut().chain(state.xi_dot.iter_mut()) {
                    *x = StandardNormal.sample(&mut rng);
                }
                if composite_norm(&state, config.omega()) > 0.0 {
                    break;
                }
            }
        }
    }
    // pre-normalization is not part of the growth
    renormalize_in_place(&mut state, config.omega()).expect("initial state has nonzero norm");
    state.log_norm = 0.0;
    state
}

/// Geometric Lyapunov indicator `λ = log(‖ξ(t)‖/‖ξ(0)‖) / D` for the
/// metric selected in `params`, with `D` the elapsed time or Jacobi arc
/// length.
pub fn estimate_lambda(
    config: &OscillatorConfig,
    params: &IntegrationParams,
) -> Result<LyapunovEstimate> {
    params.validate()?;
    let floor = params.epsilon_t(config);
    match params.metric {
        Metric::Eisenhart => estimate_lambda_with(&mut EisenhartRhs::new(config), config, params),
        Metric::JacobiGeneric => {
            estimate_lambda_with(&mut JacobiGenericRhs::new(config, floor), config, params)
        }
        Metric::JacobiClosed => {
            estimate_lambda_with(&mut JacobiClosedRhs::new(config, floor), config, params)
        }
    }
}

/// [`estimate_lambda`] with a caller-supplied right-hand side. The config
/// still sets the time scale, the composite norm and the arc length.
pub fn estimate_lambda_with<R: SpreadRhs + ?Sized>(
    rhs: &mut R,
    config: &OscillatorConfig,
    params: &IntegrationParams,
) -> Result<LyapunovEstimate> {
    params.validate()?;
    let dt_periods = params.dt_periods(config);
    params.check_step(dt_periods)?;
    let omega = config.omega();
    let dt = dt_periods * config.period();
    let floor = params.epsilon_t(config);
    let (total_steps, renorm_every) = params.step_counts(dt_periods);

    let mut state = initial_state(config, params);
    let mut ws = Rk4Workspace::new(state.dim());
    let mut series = Vec::with_capacity((total_steps / renorm_every + 1) as usize);
    let mut renorm_count = 0;
    let mut kinetic = config.kinetic_closed_form(0.0);
    let mut min_kinetic = kinetic;
    let mut arc = 0.0;
    let mut diverged = false;

    let running = |log_norm: f64, t: f64, arc: f64| match params.lambda_units {
        LambdaUnits::PerTime => log_norm / t,
        LambdaUnits::PerArcLength => log_norm / arc,
    };

    for step in 1..=total_steps {
        match step_rk4_in_place(rhs, &mut state, dt, &mut ws) {
            Ok(()) => {}
            Err(Error::NonFiniteState { .. }) => {
                diverged = true;
                break;
            }
            Err(Error::SingularKineticEnergy { t, min_kinetic: k, floor }) => {
                return Err(Error::SingularKineticEnergy {
                    t,
                    min_kinetic: k.min(min_kinetic).min(rhs.min_kinetic()),
                    floor,
                });
            }
            Err(e) => return Err(e),
        }
        // keep the time grid exact rather than accumulating dt
        state.t = step as f64 * dt;
        let next_kinetic = config.kinetic_closed_form(state.t);
        arc += dt * (kinetic + next_kinetic);
        kinetic = next_kinetic;
        min_kinetic = min_kinetic.min(kinetic);

        if state
            .xi
            .iter()
            .chain(&state.xi_dot)
            .any(|x| x.abs() > DIVERGENCE_LIMIT)
        {
            diverged = true;
            break;
        }
        if step % renorm_every == 0 || step == total_steps {
            renormalize_in_place(&mut state, omega)?;
            renorm_count += 1;
            series.push((state.t, running(state.log_norm, state.t, arc)));
        }
    }

    let min_kinetic = min_kinetic.min(rhs.min_kinetic());
    if min_kinetic <= floor {
        return Err(Error::SingularKineticEnergy {
            t: state.t,
            min_kinetic,
            floor,
        });
    }
    let lambda = if diverged {
        f64::NAN
    } else {
        series.last().map_or(f64::NAN, |&(_, l)| l)
    };
    Ok(LyapunovEstimate {
        lambda,
        units: params.lambda_units,
        series,
        renorm_count,
        min_kinetic,
        arc_length_total: arc,
        diverged,
    })
}

/// Least-squares slope of the running `λ(t)` over the last `tail_fraction`
/// of the series.
pub fn lambda_series_tail_slope(estimate: &LyapunovEstimate, tail_fraction: f64) -> Result<f64> {
    const MIN_ENTRIES: usize = 10;
    let len = estimate.series.len();
    if len < MIN_ENTRIES {
        return Err(Error::InsufficientSeries {
            len,
            min: MIN_ENTRIES,
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(invalid(
            "tail_fraction",
            format!("must lie in (0, 1], got {tail_fraction}"),
        ));
    }
    let count = ((len as f64 * tail_fraction).ceil() as usize).clamp(2, len);
    let tail = &estimate.series[len - count..];
    let m = count as f64;
    let mean_t = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_l = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, l) in tail {
        sxy += (t - mean_t) * (l - mean_l);
        sxx += (t - mean_t) * (t - mean_t);
    }
    Ok(sxy / sxx)
}
