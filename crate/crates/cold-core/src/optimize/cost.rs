//! Cost-function library.
//!
//! State-based costs (fidelity, energy, three-tangle) evolve the system and
//! measure; coefficient-based costs read the LCD drive directly, with no
//! access to the wavefunction. The constrained variant adds a step penalty
//! when any monitored drive amplitude exceeds its cap.

use crate::error::Result;

/// Default number of uniform grid points of the coefficient costs.
pub const DEFAULT_COEFF_GRID: usize = 501;

/// Default step penalty, far above max(1 - F) = 1.
pub const DEFAULT_PENALTY: f64 = 1e3;

/// Which scalar is minimized.
#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    /// 1 - |<psi(tau)|target>|^2.
    Fidelity,
    /// <psi(tau)|H_T|psi(tau)>.
    Energy,
    /// 1 - T3(psi(tau)).
    ThreeTangle,
    /// sum_j int_0^tau |alpha_j| dt over the monitored coefficient subset.
    CoeffIntegral { subset: Option<Vec<usize>> },
    /// max_t sum_j |alpha_j| over the monitored coefficient subset.
    CoeffMaxAmplitude { subset: Option<Vec<usize>> },
    /// Base cost plus a step penalty whenever a monitored amplitude exceeds
    /// its cap (infinite caps reproduce the base cost exactly).
    Constrained {
        base: Box<CostKind>,
        control_cap: f64,
        cd_cap: f64,
        penalty: f64,
    },
}

impl CostKind {
    pub fn constrained(base: CostKind, control_cap: f64, cd_cap: f64) -> CostKind {
        CostKind::Constrained {
            base: Box::new(base),
            control_cap,
            cd_cap,
            penalty: DEFAULT_PENALTY,
        }
    }
}

fn subset_sum(values: &[f64], subset: &Option<Vec<usize>>) -> f64 {
    match subset {
        None => values.iter().map(|v| v.abs()).sum(),
        Some(idx) => idx.iter().map(|&i| values[i].abs()).sum(),
    }
}

/// Trapezoid integral sum_j int_0^tau |alpha_j(lambda(t))| dt on a uniform
/// grid of `grid` points over the protocol; `coeffs_at` maps the normalized
/// protocol coordinate s in [0, 1] to the coefficient vector.
pub fn coefficient_integral<F>(
    tau: f64,
    grid: usize,
    subset: &Option<Vec<usize>>,
    mut coeffs_at: F,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let n = grid.max(2);
    let mut acc = 0.0;
    for k in 0..n {
        let s = k as f64 / (n - 1) as f64;
        let v = subset_sum(&coeffs_at(s)?, subset);
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        acc += w * v;
    }
    Ok(acc * tau / (n - 1) as f64)
}

/// Grid maximum of sum_j |alpha_j(lambda)| over the protocol.
pub fn coefficient_max_amplitude<F>(
    grid: usize,
    subset: &Option<Vec<usize>>,
    mut coeffs_at: F,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let n = grid.max(2);
    let mut worst = 0.0f64;
    for k in 0..n {
        let s = k as f64 / (n - 1) as f64;
        worst = worst.max(subset_sum(&coeffs_at(s)?, subset));
    }
    Ok(worst)
}

/// Step-penalty semantics: `penalty` iff any monitored amplitude exceeds its
/// cap, else zero.
pub fn amplitude_penalty(
    max_control_amplitude: f64,
    max_cd_amplitude: f64,
    control_cap: f64,
    cd_cap: f64,
    penalty: f64,
) -> f64 {
    if max_control_amplitude > control_cap || max_cd_amplitude > cd_cap {
        penalty
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_of_constant_coefficients() {
        let c = coefficient_integral(2.0, 501, &None, |_| Ok(vec![0.5, -1.5])).unwrap();
        assert!((c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integral_of_zero_coefficients_is_zero() {
        let c = coefficient_integral(3.0, 101, &None, |_| Ok(vec![0.0, 0.0])).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn integral_grid_refinement_converges() {
        // the real LCD coefficient profile: derivative vanishes at both ends,
        // so the default 501-point trapezoid is already deep in convergence
        let alpha = |s: f64| {
            Ok(vec![crate::lcd::cold_fo_alpha_twospin(
                s, 0.0, 0.0, 0.5, 1.0,
            )])
        };
        let coarse = coefficient_integral(1.0, 501, &None, alpha).unwrap();
        let fine = coefficient_integral(1.0, 5001, &None, alpha).unwrap();
        assert!(((coarse - fine) / fine).abs() < 1e-6);
    }

    #[test]
    fn subset_selects_coefficients() {
        let f = |_: f64| Ok(vec![1.0, 10.0, 100.0]);
        let all = coefficient_max_amplitude(11, &None, f).unwrap();
        assert!((all - 111.0).abs() < 1e-12);
        let some = coefficient_max_amplitude(11, &Some(vec![0, 2]), f).unwrap();
        assert!((some - 101.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_is_a_step() {
        assert_eq!(amplitude_penalty(0.5, 0.5, 1.0, 1.0, 1e3), 0.0);
        assert_eq!(amplitude_penalty(1.5, 0.5, 1.0, 1.0, 1e3), 1e3);
        assert_eq!(amplitude_penalty(0.5, 2.0, 1.0, 1.0, 1e3), 1e3);
        // infinite caps never fire
        assert_eq!(
            amplitude_penalty(1e30, 1e30, f64::INFINITY, f64::INFINITY, 1e3),
            0.0
        );
    }
}
