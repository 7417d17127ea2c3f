//! Nelder-Mead downhill simplex.

use crate::error::{ColdError, Result};

/// Standard Nelder-Mead parameters: reflect 1, expand 2, contract 0.5,
/// shrink 0.5; volume-preserving reflections drive most of the search.
#[derive(Debug, Clone)]
pub struct NelderMeadSpec {
    pub reflect: f64,
    pub expand: f64,
    pub contract: f64,
    pub shrink: f64,
    /// Simplex diameter threshold.
    pub x_tol: f64,
    /// Cost-spread threshold across the simplex.
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadSpec {
    fn default() -> Self {
        NelderMeadSpec {
            reflect: 1.0,
            expand: 2.0,
            contract: 0.5,
            shrink: 0.5,
            x_tol: 1e-10,
            f_tol: 1e-12,
            max_evals: 20000,
        }
    }
}

fn clip(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, (lo, hi)) in x.iter_mut().zip(b.iter()) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Minimize `f` from `x0`; candidates are clipped into `bounds` when given.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    bounds: Option<&[(f64, f64)]>,
    spec: &NelderMeadSpec,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(ColdError::InvalidExperiment("empty initial point".into()));
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        let v = f(x);
        *evals += 1;
        if !v.is_finite() {
            return Err(ColdError::NonFiniteCost {
                location: format!("nelder_mead at {x:?}"),
            });
        }
        Ok(v)
    };

    // Initial simplex: edge 0.05 * max(1, |x0_i|) along each axis.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clip(&mut start, bounds);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        v[i] += 0.05 * x0[i].abs().max(1.0);
        clip(&mut v, bounds);
        simplex.push(v);
    }
    let mut costs: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &simplex {
        costs.push(eval(v, &mut evals)?);
    }

    while evals < spec.max_evals {
        // order the simplex
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        costs = order.iter().map(|&i| costs[i]).collect();

        let spread = costs[n] - costs[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        if diameter < spec.x_tol && spread < spec.f_tol {
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let make = |coef: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clip(&mut v, bounds);
            v
        };

        let reflected = make(spec.reflect);
        let f_r = eval(&reflected, &mut evals)?;
        if f_r < costs[0] {
            let expanded = make(spec.reflect * spec.expand);
            let f_e = eval(&expanded, &mut evals)?;
            if f_e < f_r {
                simplex[n] = expanded;
                costs[n] = f_e;
            } else {
                simplex[n] = reflected;
                costs[n] = f_r;
            }
        } else if f_r < costs[n - 1] {
            simplex[n] = reflected;
            costs[n] = f_r;
        } else {
            // contract toward the better of worst/reflected
            let (coef, f_ref) = if f_r < costs[n] {
                (spec.reflect * spec.contract, f_r)
            } else {
                (-spec.contract, costs[n])
            };
            let contracted = make(coef);
            let f_c = eval(&contracted, &mut evals)?;
            if f_c < f_ref {
                simplex[n] = contracted;
                costs[n] = f_c;
            } else {
                // shrink everything toward the best vertex
                for i in 1..=n {
                    let best = simplex[0].clone();
                    for (v, b) in simplex[i].iter_mut().zip(&best) {
                        *v = b + spec.shrink * (*v - b);
                    }
                    clip(&mut simplex[i], bounds);
                    costs[i] = eval(&simplex[i], &mut evals)?;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    Ok((simplex[best].clone(), costs[best]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let (x, _) = nelder_mead(
            |x| (x[0] - 3.0).powi(2),
            &[0.0],
            None,
            &NelderMeadSpec::default(),
        )
        .unwrap();
        assert!((x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, f) = nelder_mead(rosen, &[-1.2, 1.0], None, &NelderMeadSpec::default()).unwrap();
        assert!(
            (x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4,
            "{x:?} f={f}"
        );
    }

    #[test]
    fn argmin_is_shift_invariant() {
        let base = |x: &[f64]| (x[0] + 0.7).powi(2) + (x[1] - 1.1).powi(2);
        let spec = NelderMeadSpec::default();
        let (xa, _) = nelder_mead(base, &[0.3, -0.2], None, &spec).unwrap();
        let (xb, _) = nelder_mead(|x| base(x) + 7.0, &[0.3, -0.2], None, &spec).unwrap();
        for (a, b) in xa.iter().zip(&xb) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_cost_aborts() {
        let r = nelder_mead(
            |x| if x[0] > 0.5 { f64::NAN } else { x[0] },
            &[0.4],
            None,
            &NelderMeadSpec::default(),
        );
        assert!(matches!(r, Err(ColdError::NonFiniteCost { .. })));
    }

    #[test]
    fn bounds_are_respected() {
        let bounds = [(-0.5, 0.5), (-0.5, 0.5)];
        let mut violated = false;
        let _ = nelder_mead(
            |x| {
                if x.iter().any(|v| v.abs() > 0.5 + 1e-12) {
                    violated = true;
                }
                (x[0] - 3.0).powi(2) + x[1] * x[1]
            },
            &[0.0, 0.0],
            Some(&bounds),
            &NelderMeadSpec::default(),
        )
        .unwrap();
        assert!(!violated);
    }
}
