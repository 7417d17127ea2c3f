//! Gradient-free optimizers and the seeded multi-restart harness.

pub mod cost;
pub mod dual_annealing;
pub mod nelder_mead;
pub mod powell;

pub use cost::CostKind;
pub use dual_annealing::DualAnnealingSpec;
pub use nelder_mead::NelderMeadSpec;
pub use powell::PowellSpec;

use rayon::prelude::*;

use crate::error::{ColdError, Result};

/// Outcome of a single optimizer run: best parameters, best cost, and the
/// number of cost evaluations spent.
#[derive(Debug, Clone)]
pub struct OptimizerResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
}

/// Optimizer selection with per-method settings.
#[derive(Debug, Clone)]
pub enum OptimizerSpec {
    NelderMead(NelderMeadSpec),
    Powell(PowellSpec),
    DualAnnealing(DualAnnealingSpec),
}

impl OptimizerSpec {
    /// Minimize `f` from `x0`. Bounds, when given, confine every evaluated
    /// candidate. The returned point is the best candidate ever evaluated,
    /// so a run can never report worse than its starting point.
    pub fn minimize<F>(
        &self,
        f: F,
        x0: &[f64],
        bounds: Option<&[(f64, f64)]>,
        seed: u64,
    ) -> Result<OptimizerResult>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut tracker = Tracker::new(&f);
        let r = match self {
            OptimizerSpec::NelderMead(spec) => {
                nelder_mead::nelder_mead(|x| tracker.eval(x), x0, bounds, spec)
            }
            OptimizerSpec::Powell(spec) => powell::powell(|x| tracker.eval(x), x0, bounds, spec),
            OptimizerSpec::DualAnnealing(spec) => {
                let b = bounds.ok_or_else(|| {
                    ColdError::InvalidExperiment("dual annealing requires bounds".into())
                })?;
                dual_annealing::dual_annealing(|x| tracker.eval(x), x0, b, spec, seed)
            }
        }?;
        let _ = r;
        Ok(tracker.result())
    }
}

/// Wraps the cost function to keep the best candidate ever seen.
struct Tracker<'a, F> {
    f: &'a F,
    best_x: Vec<f64>,
    best_cost: f64,
    evaluations: usize,
}

impl<'a, F: Fn(&[f64]) -> f64> Tracker<'a, F> {
    fn new(f: &'a F) -> Tracker<'a, F> {
        Tracker {
            f,
            best_x: Vec::new(),
            best_cost: f64::INFINITY,
            evaluations: 0,
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        self.evaluations += 1;
        if v < self.best_cost {
            self.best_cost = v;
            self.best_x = x.to_vec();
        }
        v
    }

    fn result(self) -> OptimizerResult {
        OptimizerResult {
            x: self.best_x,
            cost: self.best_cost,
            evaluations: self.evaluations,
        }
    }
}

/// One restart's record within a multi-restart run.
#[derive(Debug, Clone)]
pub struct RestartRecord {
    pub index: usize,
    pub seed: u64,
    pub cost: f64,
    pub evaluations: usize,
    pub failed: bool,
}

/// Aggregated best-of-n restart outcome.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best_x: Vec<f64>,
    pub best_cost: f64,
    pub best_index: usize,
    pub restarts: Vec<RestartRecord>,
    pub wall_time: std::time::Duration,
}

/// SplitMix64 seed derivation: restart i of a run with master seed s uses
/// derive_seed(s, i). Counter-based, so restarts are independent of
/// scheduling and of each other.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw the initial point of a restart: restart 0 always starts from the
/// origin (the bare protocol is then a guaranteed candidate), later restarts
/// draw uniformly from the bounds, or from [-span, span]^dim without bounds.
pub fn restart_start(
    restart: usize,
    seed: u64,
    dim: usize,
    bounds: Option<&[(f64, f64)]>,
    span: f64,
) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    if restart == 0 {
        return vec![0.0; dim];
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed));
    (0..dim)
        .map(|i| match bounds {
            Some(b) => rng.random_range(b[i].0..=b[i].1),
            None => rng.random_range(-span..=span),
        })
        .collect()
}

/// Run `n_restarts` independent optimizations and keep the best, ties broken
/// by the lowest restart index. `make_cost(restart, seed)` builds the cost
/// function of one restart (CRAB randomization re-draws here). Restarts fan
/// out over the current rayon pool; the aggregate is independent of the
/// degree of parallelism.
pub fn run_restarts<F, G>(
    optimizer: &OptimizerSpec,
    n_restarts: usize,
    master_seed: u64,
    dim: usize,
    bounds: Option<&[(f64, f64)]>,
    init_span: f64,
    make_cost: F,
) -> Result<RunResult>
where
    F: Fn(usize, u64) -> G + Sync,
    G: Fn(&[f64]) -> f64,
{
    if n_restarts == 0 {
        return Err(ColdError::InvalidExperiment(
            "need at least one restart".into(),
        ));
    }
    let started = std::time::Instant::now();
    let outcomes: Vec<(RestartRecord, Option<Vec<f64>>)> = (0..n_restarts)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, i as u64);
            let cost = make_cost(i, seed);
            let x0 = restart_start(i, seed, dim, bounds, init_span);
            match optimizer.minimize(&cost, &x0, bounds, seed) {
                Ok(r) => (
                    RestartRecord {
                        index: i,
                        seed,
                        cost: r.cost,
                        evaluations: r.evaluations,
                        failed: false,
                    },
                    Some(r.x),
                ),
                Err(_) => (
                    RestartRecord {
                        index: i,
                        seed,
                        cost: f64::INFINITY,
                        evaluations: 0,
                        failed: true,
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut best_index = usize::MAX;
    let mut best_cost = f64::INFINITY;
    let mut best_x = None;
    let mut restarts = Vec::with_capacity(n_restarts);
    for (rec, x) in outcomes {
        if !rec.failed && rec.cost < best_cost {
            best_cost = rec.cost;
            best_index = rec.index;
            best_x = x.clone();
        }
        restarts.push(rec);
    }
    let best_x =
        best_x.ok_or_else(|| ColdError::InvalidExperiment("every restart failed".into()))?;
    Ok(RunResult {
        best_x,
        best_cost,
        best_index,
        restarts,
        wall_time: started.elapsed(),
    })
}
