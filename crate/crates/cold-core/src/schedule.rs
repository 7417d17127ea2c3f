//! Scalar coefficient schedules h(lambda) with analytic derivatives.

use std::f64::consts::{FRAC_PI_2, PI};

/// The smooth double-sine ramp used by the annealing drives:
/// sin^2((pi/2) * sin^2((pi/2) * lambda)). Runs 0 -> 1 over [0, 1] with
/// vanishing derivative at both endpoints.
pub fn smooth_ramp(lambda: f64) -> f64 {
    let u = (FRAC_PI_2 * lambda).sin().powi(2);
    (FRAC_PI_2 * u).sin().powi(2)
}

/// Analytic derivative of [`smooth_ramp`].
pub fn smooth_ramp_derivative(lambda: f64) -> f64 {
    let u = (FRAC_PI_2 * lambda).sin().powi(2);
    let theta = FRAC_PI_2 * u;
    // d(ramp)/dlambda = sin(2*theta) * (pi/2) * du/dlambda,
    // du/dlambda = (pi/2) * sin(pi*lambda).
    (2.0 * theta).sin() * FRAC_PI_2 * FRAC_PI_2 * (PI * lambda).sin()
}

/// A named coefficient schedule: value and analytic derivative in lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// offset + slope * lambda
    Linear {
        offset: f64,
        slope: f64,
    },
    /// amplitude * smooth_ramp(lambda)
    SmoothRamp {
        amplitude: f64,
    },
    /// amplitude * (1 - smooth_ramp(lambda))
    InvertedSmoothRamp {
        amplitude: f64,
    },
    /// amplitude * cos(lambda)
    CosLambda {
        amplitude: f64,
    },
    /// amplitude * sin(lambda)
    SinLambda {
        amplitude: f64,
    },
}

impl Schedule {
    pub fn value(&self, lambda: f64) -> f64 {
        match *self {
            Schedule::Constant(c) => c,
            Schedule::Linear { offset, slope } => offset + slope * lambda,
            Schedule::SmoothRamp { amplitude } => amplitude * smooth_ramp(lambda),
            Schedule::InvertedSmoothRamp { amplitude } => amplitude * (1.0 - smooth_ramp(lambda)),
            Schedule::CosLambda { amplitude } => amplitude * lambda.cos(),
            Schedule::SinLambda { amplitude } => amplitude * lambda.sin(),
        }
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        match *self {
            Schedule::Constant(_) => 0.0,
            Schedule::Linear { slope, .. } => slope,
            Schedule::SmoothRamp { amplitude } => amplitude * smooth_ramp_derivative(lambda),
            Schedule::InvertedSmoothRamp { amplitude } => {
                -amplitude * smooth_ramp_derivative(lambda)
            }
            Schedule::CosLambda { amplitude } => -amplitude * lambda.sin(),
            Schedule::SinLambda { amplitude } => amplitude * lambda.cos(),
        }
    }
}
