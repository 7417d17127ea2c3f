//! JSON run configuration: schema-validated before any computation, unknown
//! keys rejected, all failures reported with their key path.

use serde::{Deserialize, Serialize};

use cold_core::experiments::{
    ExperimentName, ExperimentSpec, GraphDefinition, Method, ModelParams,
};
use cold_core::optimize::cost::CostKind;
use cold_core::optimize::{DualAnnealingSpec, NelderMeadSpec, OptimizerSpec, PowellSpec};
use cold_core::pulses::{BarePulse, FrequencyMode, GrapePulse, Pulse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub experiment: ExperimentBlock,
    pub model: ModelBlock,
    pub pulse: PulseBlock,
    pub optimizer: OptimizerBlock,
    pub out: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Explicit numeric model parameters; unset values keep the protocol
/// defaults. Couplings are an edge list (i, j, J_ij); per-site fields are
/// (offset, slope) pairs of linear schedules, used by the ising-graph
/// coefficient interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub j0: Option<f64>,
    pub h0: Option<f64>,
    pub z0: Option<f64>,
    pub x0: Option<f64>,
    pub v0: Option<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    pub x_fields: Vec<(f64, f64)>,
    pub z_fields: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub name: String,
    pub method: String,
    pub tau: Vec<f64>,
    pub n: Option<usize>,
    pub n_k: usize,
    pub restarts: usize,
    pub cost: String,
    pub n_steps: usize,
    pub coeff_grid: usize,
    pub corner_controls: bool,
    /// Caps of the constrained cost; both default to the bare drive maximum.
    pub control_cap: Option<f64>,
    pub cd_cap: Option<f64>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            name: "two-spin".into(),
            method: "lcd-fo".into(),
            tau: vec![0.01],
            n: None,
            n_k: 1,
            restarts: 20,
            cost: "fidelity".into(),
            n_steps: 1000,
            coeff_grid: 501,
            corner_controls: false,
            control_cap: None,
            cd_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseBlock {
    /// "none" | "bare" | "crab" | "grape"
    pub r#type: String,
    pub coefficients: Vec<f64>,
    /// "half" | "full"
    pub mode: String,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for PulseBlock {
    fn default() -> Self {
        PulseBlock {
            r#type: "none".into(),
            coefficients: vec![],
            mode: "full".into(),
            kappa: 30.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    /// "powell" | "nelder-mead" | "dual-annealing"
    pub method: String,
    pub line_tol: f64,
    pub max_iterations: usize,
    pub q_v: f64,
    pub initial_temp: f64,
    pub restart_temp_ratio: f64,
    pub max_iter: usize,
    /// [lo, hi] per-parameter bounds (dual annealing requires them).
    pub bounds: Option<[f64; 2]>,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        OptimizerBlock {
            method: "powell".into(),
            line_tol: 1e-8,
            max_iterations: 200,
            q_v: 2.62,
            initial_temp: 5230.0,
            restart_temp_ratio: 2e-5,
            max_iter: 1000,
            bounds: None,
        }
    }
}

/// Parse and validate; malformed syntax or any schema violation is reported
/// with its key path, and nothing runs on an invalid config.
pub fn parse_config(text: &str) -> Result<Config, Vec<String>> {
    let cfg: Config = match serde_json::from_str(text) {
        Ok(c) => c,
        Err(e) => return Err(vec![format!("syntax: {e}")]),
    };
    let errors = validate(&cfg);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

fn validate(cfg: &Config) -> Vec<String> {
    let mut errors = Vec::new();
    let e = &cfg.experiment;
    if ExperimentName::parse(&e.name).is_err()
        && e.name != "rotating-spin"
        && e.name != "ising-graph"
    {
        errors.push(format!("experiment.name: unknown experiment '{}'", e.name));
    }
    if e.name == "ising-graph" {
        let n = e.n.unwrap_or(0);
        if n < 2 || n > 12 {
            errors.push("experiment.n: ising-graph needs 2 <= n <= 12".into());
        }
        if cfg.model.x_fields.len() != n || cfg.model.z_fields.len() != n {
            errors.push(format!(
                "model.x_fields/z_fields: need one (offset, slope) pair per site ({n})"
            ));
        }
        for &(i, j, _) in &cfg.model.couplings {
            if i >= j || j >= n {
                errors.push(format!(
                    "model.couplings: edge ({i},{j}) must have i < j < {n}"
                ));
            }
        }
    }
    if Method::parse(&e.method).is_err() {
        errors.push(format!("experiment.method: unknown method '{}'", e.method));
    }
    if e.tau.is_empty() {
        errors.push("experiment.tau: need at least one value".into());
    }
    for t in &e.tau {
        if !t.is_finite() || *t <= 0.0 {
            errors.push(format!("experiment.tau: must be positive, got {t}"));
        }
    }
    if e.n_k == 0 {
        errors.push("experiment.n_k: must be >= 1".into());
    }
    if e.n_steps == 0 {
        errors.push("experiment.n_steps: must be >= 1".into());
    }
    if ![
        "fidelity",
        "energy",
        "three-tangle",
        "coeff-integral",
        "coeff-max-amplitude",
        "constrained-fidelity",
    ]
    .contains(&e.cost.as_str())
    {
        errors.push(format!("experiment.cost: unknown cost '{}'", e.cost));
    }
    if !["none", "bare", "crab", "grape"].contains(&cfg.pulse.r#type.as_str()) {
        errors.push(format!("pulse.type: unknown type '{}'", cfg.pulse.r#type));
    }
    if !["half", "full"].contains(&cfg.pulse.mode.as_str()) {
        errors.push(format!("pulse.mode: unknown mode '{}'", cfg.pulse.mode));
    }
    if !["powell", "nelder-mead", "dual-annealing"].contains(&cfg.optimizer.method.as_str()) {
        errors.push(format!(
            "optimizer.method: unknown optimizer '{}'",
            cfg.optimizer.method
        ));
    }
    if let Some([lo, hi]) = cfg.optimizer.bounds {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            errors.push("optimizer.bounds: need finite lo < hi".into());
        }
    }
    if cfg.optimizer.method == "dual-annealing" && cfg.optimizer.bounds.is_none() {
        errors.push("optimizer.bounds: dual annealing requires bounds".into());
    }
    errors
}

impl Config {
    pub fn cost_kind(&self) -> CostKind {
        let e = &self.experiment;
        match e.cost.as_str() {
            "energy" => CostKind::Energy,
            "three-tangle" => CostKind::ThreeTangle,
            "coeff-integral" => CostKind::CoeffIntegral { subset: None },
            "coeff-max-amplitude" => CostKind::CoeffMaxAmplitude { subset: None },
            "constrained-fidelity" => {
                let cap = e.control_cap.unwrap_or(10.0);
                CostKind::constrained(CostKind::Fidelity, cap, e.cd_cap.unwrap_or(cap))
            }
            _ => CostKind::Fidelity,
        }
    }

    pub fn experiment_spec(&self) -> anyhow::Result<ExperimentSpec> {
        let e = &self.experiment;
        let name = ExperimentName::parse(&e.name)
            .map_err(|err| anyhow::anyhow!("experiment.name: {err}"))?;
        let method =
            Method::parse(&e.method).map_err(|err| anyhow::anyhow!("experiment.method: {err}"))?;
        let mut spec = ExperimentSpec::new(name, method);
        spec.taus = e.tau.clone();
        if let Some(n) = e.n {
            spec.n = n;
        }
        spec.n_k = e.n_k;
        spec.restarts = e.restarts;
        spec.seed = self.seed;
        spec.cost = self.cost_kind();
        spec.n_steps = e.n_steps;
        spec.coeff_grid = e.coeff_grid;
        spec.corner_controls = e.corner_controls;
        spec.params = ModelParams {
            j0: self.model.j0,
            h0: self.model.h0,
            z0: self.model.z0,
            x0: self.model.x0,
            v0: self.model.v0,
        };
        spec.annealing = DualAnnealingSpec {
            q_v: self.optimizer.q_v,
            initial_temp: self.optimizer.initial_temp,
            restart_temp_ratio: self.optimizer.restart_temp_ratio,
            max_iter: self.optimizer.max_iter,
            local_refine: true,
        };
        if let Some([lo, hi]) = self.optimizer.bounds {
            spec.da_bound = hi.abs().max(lo.abs());
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        let o = &self.optimizer;
        match o.method.as_str() {
            "nelder-mead" => OptimizerSpec::NelderMead(NelderMeadSpec::default()),
            "dual-annealing" => OptimizerSpec::DualAnnealing(DualAnnealingSpec {
                q_v: o.q_v,
                initial_temp: o.initial_temp,
                restart_temp_ratio: o.restart_temp_ratio,
                max_iter: o.max_iter,
                local_refine: true,
            }),
            _ => OptimizerSpec::Powell(PowellSpec {
                line_tol: o.line_tol,
                max_iterations: o.max_iterations,
                ..PowellSpec::default()
            }),
        }
    }

    /// The explicit Ising-graph definition of the `coeffs` interface.
    pub fn graph_definition(&self) -> GraphDefinition {
        GraphDefinition {
            n: self.experiment.n.unwrap_or(0),
            couplings: self.model.couplings.clone(),
            x_fields: self.model.x_fields.clone(),
            z_fields: self.model.z_fields.clone(),
        }
    }

    /// The explicit pulse of the `evolve` subcommand, if any.
    pub fn explicit_pulse(&self) -> anyhow::Result<Option<Pulse>> {
        let p = &self.pulse;
        let mode = match p.mode.as_str() {
            "half" => FrequencyMode::Half,
            _ => FrequencyMode::Full,
        };
        Ok(match p.r#type.as_str() {
            "none" => None,
            "bare" => Some(Pulse::Bare(BarePulse::new(p.coefficients.clone(), mode))),
            "crab" => {
                let template = BarePulse::new(p.coefficients.clone(), FrequencyMode::Full);
                Some(Pulse::Crab(cold_core::pulses::randomize_crab(
                    &template, p.seed,
                )))
            }
            "grape" => Some(Pulse::Grape(GrapePulse::new(
                p.coefficients.clone(),
                p.kappa,
            ))),
            other => anyhow::bail!("pulse.type: unknown type '{other}'"),
        })
    }
}
