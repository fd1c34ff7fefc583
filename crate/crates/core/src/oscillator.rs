//! Closed-form motion of an ensemble of identical, uncoupled harmonic
//! oscillators with phases spread over a fraction of the phase circle.
//!
//! Oscillator `k` (1-based) moves as `q_k(t) = C cos(ωt + θ_k)` with
//! `θ_k = 2πf·k/N`. Everything the stability analysis needs (positions,
//! velocities, kinetic energy and its fluctuation) follows analytically.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{invalid, Result};

/// Parameters of the oscillator ensemble.
///
/// Phases and their sines/cosines are derived once at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillatorConfig {
    n_osc: usize,
    omega: f64,
    amplitude: f64,
    phase_fraction: f64,
    #[serde(skip)]
    phases: Vec<f64>,
    #[serde(skip)]
    cos_phase: Vec<f64>,
    #[serde(skip)]
    sin_phase: Vec<f64>,
}

impl OscillatorConfig {
    /// Unit-amplitude ensemble.
    pub fn new(n_osc: usize, omega: f64, phase_fraction: f64) -> Result<Self> {
        Self::with_amplitude(n_osc, omega, 1.0, phase_fraction)
    }

    pub fn with_amplitude(
        n_osc: usize,
        omega: f64,
        amplitude: f64,
        phase_fraction: f64,
    ) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(invalid(
                "amplitude",
                format!("must be finite and > 0, got {amplitude}"),
            ));
        }
        let phases = phases(n_osc, phase_fraction)?;
        let cos_phase = phases.iter().map(|p| p.cos()).collect();
        let sin_phase = phases.iter().map(|p| p.sin()).collect();
        Ok(Self {
            n_osc,
            omega,
            amplitude,
            phase_fraction,
            phases,
            cos_phase,
            sin_phase,
        })
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phase_fraction(&self) -> f64 {
        self.phase_fraction
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Oscillation period `2π/ω`.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Total energy `E = N ω² C² / 2`.
    pub fn total_energy(&self) -> f64 {
        0.5 * self.n_osc as f64 * (self.omega * self.amplitude).powi(2)
    }

    /// Time-averaged kinetic energy `N (ωC/2)²`, half the total energy.
    pub fn mean_kinetic(&self) -> f64 {
        self.n_osc as f64 * (0.5 * self.omega * self.amplitude).powi(2)
    }

    /// Potential energy `½ ω² Σ q_k²` of a configuration.
    pub fn potential(&self, q: &[f64]) -> f64 {
        0.5 * self.omega * self.omega * q.iter().map(|x| x * x).sum::<f64>()
    }

    /// Evaluates the analytic trajectory into an existing point, reusing
    /// its buffers.
    pub fn trajectory_into(&self, t: f64, point: &mut PhasePoint) {
        let n = self.n_osc;
        point.q.resize(n, 0.0);
        point.q_dot.resize(n, 0.0);
        let (s, c) = (self.omega * t).sin_cos();
        let amp = self.amplitude;
        let vel = -self.amplitude * self.omega;
        let mut twice_kinetic = 0.0;
        for k in 0..n {
            // cos(ωt + θ) and sin(ωt + θ) by angle addition
            let cos_k = c * self.cos_phase[k] - s * self.sin_phase[k];
            let sin_k = s * self.cos_phase[k] + c * self.sin_phase[k];
            point.q[k] = amp * cos_k;
            let v = vel * sin_k;
            point.q_dot[k] = v;
            twice_kinetic += v * v;
        }
        point.t = t;
        point.kinetic = 0.5 * twice_kinetic;
    }

    /// Instantaneous position, velocity and kinetic energy at time `t`.
    pub fn trajectory(&self, t: f64) -> PhasePoint {
        let mut point = PhasePoint::default();
        self.trajectory_into(t, &mut point);
        point
    }

    /// Kinetic energy from the closed-form expression
    /// `N(ωC/2)² [1 − ρ cos(2ωt + Φ)]`.
    ///
    /// `ρ` is the signed [`coherence`] of the phases, whose magnitude is
    /// `√(2σ)`; the sign matters for `f > 1/2` where the phase sum points
    /// opposite to `e^{iΦ}`.
    pub fn kinetic_closed_form(&self, t: f64) -> f64 {
        let rho = coherence_unchecked(self.n_osc, self.phase_fraction);
        let phi = mean_phase_unchecked(self.n_osc, self.phase_fraction);
        self.mean_kinetic() * (1.0 - rho * (2.0 * self.omega * t + phi).cos())
    }

    pub fn fluctuation_stats(&self) -> FluctuationStats {
        let sigma = sigma_unchecked(self.n_osc, self.phase_fraction);
        FluctuationStats {
            sigma,
            sigma_sqrt: sigma.sqrt(),
            mean_kinetic: self.mean_kinetic(),
            mean_phase: mean_phase_unchecked(self.n_osc, self.phase_fraction),
        }
    }
}

/// Position, velocity and kinetic energy on the analytic trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub kinetic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationStats {
    pub sigma: f64,
    pub sigma_sqrt: f64,
    pub mean_kinetic: f64,
    /// Phase `2πf(N+1)/N` of the kinetic-energy oscillation.
    pub mean_phase: f64,
}

/// Kinetic-energy statistics measured by sampling the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledFluctuation {
    pub sigma: f64,
    /// `⟨T²⟩ − ⟨T⟩²`, in energy squared.
    pub abs_variance: f64,
    pub mean_kinetic: f64,
}

fn check_ensemble(n_osc: usize, phase_fraction: f64) -> Result<()> {
    if n_osc == 0 {
        return Err(invalid("n_osc", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&phase_fraction) {
        return Err(invalid(
            "phase_fraction",
            format!("must lie in [0, 1], got {phase_fraction}"),
        ));
    }
    Ok(())
}

/// Phases `θ_k = 2πf·k/N`, `k = 1..N`.
pub fn phases(n_osc: usize, phase_fraction: f64) -> Result<Vec<f64>> {
    check_ensemble(n_osc, phase_fraction)?;
    let n = n_osc as f64;
    Ok((1..=n_osc)
        .map(|k| TAU * phase_fraction * k as f64 / n)
        .collect())
}

/// Signed phase coherence `ρ = sin(2πf) / (N sin(2πf/N))`, i.e.
/// `|Σ_k e^{2iθ_k}| / N` carrying the sign of the Dirichlet ratio.
///
/// The ratio is a removable singularity wherever `sin(2πf/N) = 0`; within
/// `f ∈ [0, 1]` that happens at `f = 0` (limit 1) and, for `N = 2`, at
/// `f = 1` (limit −1). `N = 1` is identically 1.
pub fn coherence(n_osc: usize, phase_fraction: f64) -> Result<f64> {
    check_ensemble(n_osc, phase_fraction)?;
    Ok(coherence_unchecked(n_osc, phase_fraction))
}

fn coherence_unchecked(n_osc: usize, f: f64) -> f64 {
    if n_osc == 1 || f == 0.0 {
        return 1.0;
    }
    if n_osc == 2 && f == 1.0 {
        // 2πf/N = π: sin(Nx)/sin(x) → N cos(Nπ)/cos(π)
        return -1.0;
    }
    let n = n_osc as f64;
    sin_pi(2.0 * f) / (n * sin_pi(2.0 * f / n))
}

/// `sin(πx)` with exact zeros at integer `x`.
fn sin_pi(x: f64) -> f64 {
    let turns = x.round();
    let s = (PI * (x - turns)).sin();
    if turns.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

fn mean_phase_unchecked(n_osc: usize, f: f64) -> f64 {
    let n = n_osc as f64;
    TAU * f * (n + 1.0) / n
}

/// Normalized kinetic-energy variance `σ = (⟨T²⟩ − ⟨T⟩²)/⟨T⟩²`,
/// `(sin(2πf) / (√2 N sin(2πf/N)))²`.
pub fn sigma(n_osc: usize, phase_fraction: f64) -> Result<f64> {
    check_ensemble(n_osc, phase_fraction)?;
    Ok(sigma_unchecked(n_osc, phase_fraction))
}

fn sigma_unchecked(n_osc: usize, f: f64) -> f64 {
    let rho = coherence_unchecked(n_osc, f);
    0.5 * rho * rho
}

/// `N → ∞` value of σ: `(sin(2πf) / (√2·2πf))²`. At `f = 0` the sinc
/// limit 1/2 is returned.
pub fn sigma_limit(phase_fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&phase_fraction) {
        return Err(invalid(
            "phase_fraction",
            format!("must lie in [0, 1], got {phase_fraction}"),
        ));
    }
    if phase_fraction == 0.0 {
        return Ok(0.5);
    }
    let sinc = sin_pi(2.0 * phase_fraction) / (TAU * phase_fraction);
    Ok(0.5 * sinc * sinc)
}

/// Samples `T(t)` on `samples` equispaced points of one fluctuation period
/// `π/ω` (right endpoint excluded) and returns the sampled statistics.
///
/// `T` is a trigonometric polynomial in `2ωt` of degree one, so the sampled
/// moments are exact up to rounding once `samples ≥ 3`.
pub fn sigma_numeric(config: &OscillatorConfig, samples: usize) -> Result<SampledFluctuation> {
    if samples < 100 {
        return Err(invalid("samples", format!("must be at least 100, got {samples}")));
    }
    let window = PI / config.omega();
    let mut point = PhasePoint::default();
    let kinetic: Vec<f64> = (0..samples)
        .map(|i| {
            config.trajectory_into(window * i as f64 / samples as f64, &mut point);
            point.kinetic
        })
        .collect();
    let m = samples as f64;
    let mean = kinetic.iter().sum::<f64>() / m;
    // two passes: the spread is tiny next to the mean near σ = 0
    let abs_variance = kinetic.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / m;
    Ok(SampledFluctuation {
        sigma: abs_variance / (mean * mean),
        abs_variance,
        mean_kinetic: mean,
    })
}

/// Jacobi arc length `s(t) = ∫₀ᵗ 2T dt'` along the physical trajectory,
/// by the trapezoidal rule with step `dt` (the last step is shortened to
/// land on `t`).
pub fn arc_length(config: &OscillatorConfig, t: f64, dt: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    let steps = (t / dt).ceil() as u64;
    let mut point = PhasePoint::default();
    config.trajectory_into(0.0, &mut point);
    let mut prev_t = 0.0;
    let mut prev_kin = point.kinetic;
    let mut s = 0.0;
    for i in 1..=steps {
        let ti = (i as f64 * dt).min(t);
        config.trajectory_into(ti, &mut point);
        s += (ti - prev_t) * (prev_kin + point.kinetic);
        prev_t = ti;
        prev_kin = point.kinetic;
    }
    Ok(s)
}
