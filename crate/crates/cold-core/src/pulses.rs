//! Control-pulse waveforms.
//!
//! Three families, all vanishing at the protocol boundaries so the dressed
//! Hamiltonian matches the bare one at lambda = 0 and 1:
//!
//! * bare Fourier pulses, sin(pi k lambda) or sin(2 pi k lambda);
//! * CRAB pulses, the full-mode basis with randomized principal frequencies
//!   k -> k(1 + r_k) and a linear endpoint correction;
//! * GRAPE pulses, piecewise-constant slice amplitudes under a tanh shaping
//!   envelope, with derivatives taken from a natural cubic spline through the
//!   shaped slice midpoints.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spline::CubicSpline;

/// Default sharpness of the GRAPE/CRAB shaping envelope.
pub const DEFAULT_SHAPE_KAPPA: f64 = 30.0;

/// Boundary shaping envelope tanh(kappa*theta(lambda)) * tanh(-kappa*theta(lambda-1))
/// with theta(lambda) = sin((pi/2) lambda). Zero at both endpoints, ~1 mid-protocol.
pub fn shape(lambda: f64, kappa: f64) -> f64 {
    let theta0 = (FRAC_PI_2 * lambda).sin();
    let theta1 = (FRAC_PI_2 * (lambda - 1.0)).sin();
    (kappa * theta0).tanh() * (-kappa * theta1).tanh()
}

/// Analytic derivative of [`shape`] in lambda.
pub fn shape_derivative(lambda: f64, kappa: f64) -> f64 {
    let theta0 = (FRAC_PI_2 * lambda).sin();
    let theta1 = (FRAC_PI_2 * (lambda - 1.0)).sin();
    let t0 = (kappa * theta0).tanh();
    let t1 = (-kappa * theta1).tanh();
    let dt0 = (1.0 - t0 * t0) * kappa * FRAC_PI_2 * (FRAC_PI_2 * lambda).cos();
    let dt1 = -(1.0 - t1 * t1) * kappa * FRAC_PI_2 * (FRAC_PI_2 * (lambda - 1.0)).cos();
    dt0 * t1 + t0 * dt1
}

/// Frequency convention of the bare Fourier basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyMode {
    /// sin(pi k lambda)
    Half,
    /// sin(2 pi k lambda)
    Full,
}

impl FrequencyMode {
    fn omega(self, k: usize) -> f64 {
        match self {
            FrequencyMode::Half => PI * k as f64,
            FrequencyMode::Full => 2.0 * PI * k as f64,
        }
    }
}

/// Plain Fourier pulse sum_k c_k sin(omega_k lambda).
#[derive(Debug, Clone, PartialEq)]
pub struct BarePulse {
    pub coefficients: Vec<f64>,
    pub mode: FrequencyMode,
}

impl BarePulse {
    pub fn new(coefficients: Vec<f64>, mode: FrequencyMode) -> BarePulse {
        BarePulse { coefficients, mode }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (self.mode.omega(i + 1) * lambda).sin())
            .sum()
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = self.mode.omega(i + 1);
                c * w * (w * lambda).cos()
            })
            .sum()
    }
}

/// Chopped randomized-basis pulse: full-mode frequencies k(1 + r_k) with a
/// linear endpoint correction so the value vanishes at lambda = 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CrabPulse {
    pub coefficients: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl CrabPulse {
    pub fn new(coefficients: Vec<f64>, offsets: Vec<f64>) -> CrabPulse {
        assert_eq!(coefficients.len(), offsets.len());
        CrabPulse {
            coefficients,
            offsets,
        }
    }

    fn omega(&self, i: usize) -> f64 {
        2.0 * PI * (i + 1) as f64 * (1.0 + self.offsets[i])
    }

    /// Value of the raw randomized sum at lambda = 1; subtracted linearly.
    fn endpoint(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.omega(i).sin())
            .sum()
    }

    pub fn value(&self, lambda: f64) -> f64 {
        let raw: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (self.omega(i) * lambda).sin())
            .sum();
        raw - lambda * self.endpoint()
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        let raw: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = self.omega(i);
                c * w * (w * lambda).cos()
            })
            .sum();
        raw - self.endpoint()
    }
}

/// Draw the CRAB frequency offsets r_k, uniform in [-0.5, 0.5], deterministic
/// in the seed, and attach them to the template's coefficients.
pub fn randomize_crab(template: &BarePulse, seed: u64) -> CrabPulse {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..template.coefficients.len())
        .map(|_| rng.random_range(-0.5..=0.5))
        .collect();
    CrabPulse::new(template.coefficients.clone(), offsets)
}

/// Piecewise-constant slice amplitudes under the shaping envelope.
///
/// The waveform is the shaped staircase; derivatives come from a natural
/// cubic spline with knots at (0, 0), the shaped slice midpoints, and (1, 0).
#[derive(Debug, Clone)]
pub struct GrapePulse {
    pub amplitudes: Vec<f64>,
    pub kappa: f64,
    spline: CubicSpline,
}

impl PartialEq for GrapePulse {
    fn eq(&self, other: &Self) -> bool {
        self.amplitudes == other.amplitudes && self.kappa == other.kappa
    }
}

impl GrapePulse {
    pub fn new(amplitudes: Vec<f64>, kappa: f64) -> GrapePulse {
        assert!(
            !amplitudes.is_empty(),
            "GRAPE pulse needs at least one slice"
        );
        let n = amplitudes.len();
        let mut xs = Vec::with_capacity(n + 2);
        let mut ys = Vec::with_capacity(n + 2);
        xs.push(0.0);
        ys.push(0.0);
        for (k, c) in amplitudes.iter().enumerate() {
            let mid = (k as f64 + 0.5) / n as f64;
            xs.push(mid);
            ys.push(c * shape(mid, kappa));
        }
        xs.push(1.0);
        ys.push(0.0);
        let spline = CubicSpline::natural(xs, ys);
        GrapePulse {
            amplitudes,
            kappa,
            spline,
        }
    }

    fn slice(&self, lambda: f64) -> usize {
        let n = self.amplitudes.len();
        ((lambda * n as f64) as usize).min(n - 1)
    }

    /// Shaped staircase value.
    pub fn value(&self, lambda: f64) -> f64 {
        self.amplitudes[self.slice(lambda)] * shape(lambda, self.kappa)
    }

    /// Derivative of the smoothing spline through the shaped waveform.
    pub fn derivative(&self, lambda: f64) -> f64 {
        self.spline.derivative(lambda)
    }

    /// The smoothing spline itself (used by derivative oracles).
    pub fn splined_value(&self, lambda: f64) -> f64 {
        self.spline.value(lambda)
    }
}

/// Any control waveform with value and derivative accessors.
#[derive(Debug, Clone, PartialEq)]
pub enum Pulse {
    Bare(BarePulse),
    Crab(CrabPulse),
    Grape(GrapePulse),
}

impl Pulse {
    pub fn value(&self, lambda: f64) -> f64 {
        match self {
            Pulse::Bare(p) => p.value(lambda),
            Pulse::Crab(p) => p.value(lambda),
            Pulse::Grape(p) => p.value(lambda),
        }
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        match self {
            Pulse::Bare(p) => p.derivative(lambda),
            Pulse::Crab(p) => p.derivative(lambda),
            Pulse::Grape(p) => p.derivative(lambda),
        }
    }

    pub fn n_parameters(&self) -> usize {
        match self {
            Pulse::Bare(p) => p.coefficients.len(),
            Pulse::Crab(p) => p.coefficients.len(),
            Pulse::Grape(p) => p.amplitudes.len(),
        }
    }
}
