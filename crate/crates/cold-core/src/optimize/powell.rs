//! Powell's conjugate-direction method with Brent line minimization.
//!
//! One outer iteration line-minimizes along each direction in turn, drops
//! the first direction, appends the net displacement, and line-minimizes
//! once more along it from the iteration's starting point.

use crate::error::{ColdError, Result};

#[derive(Debug, Clone)]
pub struct PowellSpec {
    /// Brent tolerance of each line minimization.
    pub line_tol: f64,
    /// Relative cost-decrease convergence threshold of the outer loop.
    pub f_tol: f64,
    pub max_iterations: usize,
    pub max_evals: usize,
}

impl Default for PowellSpec {
    fn default() -> Self {
        PowellSpec {
            line_tol: 1e-8,
            f_tol: 1e-10,
            max_iterations: 200,
            max_evals: 100_000,
        }
    }
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// Bracket a minimum of g starting from (0, step): expand downhill by the
/// golden ratio until the middle point is lowest.
fn bracket<G: FnMut(f64) -> Result<f64>>(
    g: &mut G,
    step: f64,
) -> Result<(f64, f64, f64, f64, f64, f64)> {
    let mut a = 0.0;
    let mut b = step;
    let mut fa = g(a)?;
    let mut fb = g(b)?;
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = g(c)?;
    let mut guard = 0;
    while fb >= fc {
        let next = c + GOLD * (c - b);
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = next;
        fc = g(c)?;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    Ok((a, b, c, fa, fb, fc))
}

/// Brent's method on a bracketing triple: parabolic interpolation with
/// golden-section fallback.
fn brent<G: FnMut(f64) -> Result<f64>>(
    g: &mut G,
    mut a: f64,
    bx: f64,
    mut b: f64,
    fbx: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x = bx;
    let mut w = bx;
    let mut v = bx;
    let mut fx = fbx;
    let mut fw = fx;
    let mut fv = fx;
    let mut d = 0.0f64;
    let mut e = 0.0f64;
    for _ in 0..120 {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabolic fit through x, v, w
            let r = (x - w) * (fx - fv);
            let q0 = (x - v) * (fx - fw);
            let mut p = (x - v) * q0 - (x - w) * r;
            let mut q = 2.0 * (q0 - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm > x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Minimize g over [lo, hi] (bounded Brent, golden-section based).
fn brent_bounded<G: FnMut(f64) -> Result<f64>>(
    g: &mut G,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut a = lo;
    let mut b = hi;
    let x0 = a + CGOLD * (b - a);
    let fx0 = g(x0)?;
    brent(g, a, x0, b, fx0, tol).map(|(x, fx)| {
        let _ = (&mut a, &mut b);
        (x, fx)
    })
}

/// Feasible step interval [lo, hi] keeping x + t*d inside the bounds.
fn feasible_interval(x: &[f64], d: &[f64], bounds: &[(f64, f64)]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..x.len() {
        if d[i].abs() < 1e-300 {
            continue;
        }
        let t1 = (bounds[i].0 - x[i]) / d[i];
        let t2 = (bounds[i].1 - x[i]) / d[i];
        let (t_lo, t_hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        lo = lo.max(t_lo);
        hi = hi.min(t_hi);
    }
    if !lo.is_finite() {
        lo = -1e8;
    }
    if !hi.is_finite() {
        hi = 1e8;
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Inspectable Powell state: the direction set is part of the method's
/// contract (rotate and append the displacement each outer iteration).
pub struct PowellState {
    pub x: Vec<f64>,
    pub cost: f64,
    pub directions: Vec<Vec<f64>>,
}

impl PowellState {
    pub fn new<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64]) -> Result<PowellState> {
        let cost = checked(f, x0)?;
        let n = x0.len();
        let directions = (0..n)
            .map(|i| {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d
            })
            .collect();
        Ok(PowellState {
            x: x0.to_vec(),
            cost,
            directions,
        })
    }

    /// One outer iteration; returns the cost decrease.
    pub fn iterate<F: FnMut(&[f64]) -> f64>(
        &mut self,
        f: &mut F,
        bounds: Option<&[(f64, f64)]>,
        spec: &PowellSpec,
    ) -> Result<f64> {
        let n = self.x.len();
        let start_x = self.x.clone();
        let start_cost = self.cost;
        for i in 0..n {
            let d = self.directions[i].clone();
            self.line_minimize(f, &d, bounds, spec)?;
        }
        // rotate the direction set and append the displacement
        let disp: Vec<f64> = self.x.iter().zip(&start_x).map(|(a, b)| a - b).collect();
        let norm = disp.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            self.directions.remove(0);
            self.directions.push(disp.clone());
            // extra line search along the new direction from the iteration start
            let cur = std::mem::replace(&mut self.x, start_x);
            let cur_cost = self.cost;
            self.cost = checked(f, &self.x)?;
            self.line_minimize(f, &disp, bounds, spec)?;
            if cur_cost < self.cost {
                self.x = cur;
                self.cost = cur_cost;
            }
        }
        Ok(start_cost - self.cost)
    }

    fn line_minimize<F: FnMut(&[f64]) -> f64>(
        &mut self,
        f: &mut F,
        d: &[f64],
        bounds: Option<&[(f64, f64)]>,
        spec: &PowellSpec,
    ) -> Result<()> {
        let x0 = self.x.clone();
        let mut g = |t: f64| -> Result<f64> {
            let pt: Vec<f64> = x0.iter().zip(d).map(|(x, dd)| x + t * dd).collect();
            checked(f, &pt)
        };
        let (t, ft) = match bounds {
            Some(b) => {
                let (lo, hi) = feasible_interval(&x0, d, b);
                brent_bounded(&mut g, lo, hi, spec.line_tol)?
            }
            None => {
                let (a, b, c, _fa, fb, _fc) = bracket(&mut g, 1.0)?;
                let (lo, hi) = if a <= c { (a, c) } else { (c, a) };
                brent(&mut g, lo, b, hi, fb, spec.line_tol)?
            }
        };
        if ft <= self.cost {
            for (x, dd) in self.x.iter_mut().zip(d) {
                *x += t * dd;
            }
            if let Some(b) = bounds {
                for (v, (lo, hi)) in self.x.iter_mut().zip(b.iter()) {
                    *v = v.clamp(*lo, *hi);
                }
            }
            self.cost = ft;
        }
        Ok(())
    }
}

fn checked<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if !v.is_finite() {
        return Err(ColdError::NonFiniteCost {
            location: format!("powell at {x:?}"),
        });
    }
    Ok(v)
}

/// Minimize `f` from `x0` by Powell's method.
pub fn powell<F>(
    mut f: F,
    x0: &[f64],
    bounds: Option<&[(f64, f64)]>,
    spec: &PowellSpec,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut state = PowellState::new(&mut f, x0)?;
    for _ in 0..spec.max_iterations {
        let before = state.cost;
        let decrease = state.iterate(&mut f, bounds, spec)?;
        let scale = before.abs().max(state.cost.abs()).max(1e-30);
        if decrease <= spec.f_tol * scale {
            break;
        }
    }
    Ok((state.x, state.cost))
}
