//! State-vector time evolution and final-state functionals.
//!
//! The propagator applies U = exp(-i H(lambda_mid) dt) per slice, with the
//! slice Hamiltonian exponentiated exactly through its Hermitian
//! eigendecomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ColdError, Result};
use crate::lcd::{exact_agp_dense, LcdSolution, DEFAULT_GAP_TOL};
use crate::models::{LatticeModel, SpinSystem};
use crate::pulses::Pulse;

/// Default slice count of the midpoint propagator.
pub const DEFAULT_N_STEPS: usize = 1000;

/// Cap of the self-convergence doubling monitor.
pub const MAX_N_STEPS: usize = 16000;

const NORM_DRIFT_TOL: f64 = 1e-10;

/// Lowest eigenpair of a Hermitian matrix with diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: DVector<Complex64>,
    pub energy: f64,
    /// Gap to the first level above the ground space.
    pub gap: f64,
    /// Number of states within the degeneracy tolerance of the bottom;
    /// 1 means a unique ground state.
    pub degeneracy: usize,
}

/// Make the largest-magnitude component real positive (ties broken by the
/// lowest index); the deterministic phase convention used everywhere.
pub fn fix_phase(v: &mut DVector<Complex64>) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, c) in v.iter().enumerate() {
        let n = c.norm();
        if n > best + 1e-15 {
            best = n;
            idx = i;
        }
    }
    let c = v[idx];
    if c.norm() > 0.0 {
        let phase = c.conj() / c.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// Ground state of a dense Hermitian matrix, phase-fixed. A ground space
/// degenerate within 1e-10 is reported through `degeneracy` > 1 together
/// with a deterministic representative.
pub fn ground_state(h: &DMatrix<Complex64>) -> Result<GroundState> {
    let dim = h.nrows();
    if dim == 0 {
        return Err(ColdError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let e0 = eig.eigenvalues[order[0]];
    let degeneracy = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] - e0 < 1e-10)
        .count();
    let gap = if degeneracy < dim {
        eig.eigenvalues[order[degeneracy]] - e0
    } else {
        0.0
    };
    let mut state: DVector<Complex64> = eig.eigenvectors.column(order[0]).into();
    fix_phase(&mut state);
    Ok(GroundState {
        state,
        energy: e0,
        gap,
        degeneracy,
    })
}

/// |<phi|psi>|^2, clamped into [0, 1] against rounding overshoot.
pub fn fidelity(psi: &DVector<Complex64>, phi: &DVector<Complex64>) -> f64 {
    let mut overlap = Complex64::new(0.0, 0.0);
    for (a, b) in phi.iter().zip(psi.iter()) {
        overlap += a.conj() * b;
    }
    overlap.norm_sqr().clamp(0.0, 1.0)
}

/// <psi|H|psi>, real for Hermitian H.
pub fn energy_expectation(psi: &DVector<Complex64>, h: &DMatrix<Complex64>) -> f64 {
    let hpsi = h * psi;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in psi.iter().zip(hpsi.iter()) {
        acc += a.conj() * b;
    }
    acc.re
}

/// Three-tangle T3 = 4 |d1 - 2 d2 + 4 d3| of a 3-spin state, with the
/// amplitude ordering c_ijk = psi[4 i + 2 j + k] (site 0 most significant).
pub fn three_tangle(psi: &DVector<Complex64>) -> Result<f64> {
    if psi.len() != 8 {
        return Err(ColdError::DimensionMismatch {
            expected: 8,
            got: psi.len(),
        });
    }
    let c = |i: usize, j: usize, k: usize| psi[4 * i + 2 * j + k];
    let d1 = c(0, 0, 0).powu(2) * c(1, 1, 1).powu(2)
        + c(0, 0, 1).powu(2) * c(1, 1, 0).powu(2)
        + c(0, 1, 0).powu(2) * c(1, 0, 1).powu(2)
        + c(0, 1, 1).powu(2) * c(1, 0, 0).powu(2);
    let d2 = c(0, 0, 0) * c(0, 0, 1) * c(1, 1, 0) * c(1, 1, 1)
        + c(0, 0, 0) * c(0, 1, 0) * c(1, 0, 1) * c(1, 1, 1)
        + c(0, 0, 0) * c(0, 1, 1) * c(1, 0, 0) * c(1, 1, 1)
        + c(0, 0, 1) * c(0, 1, 0) * c(1, 0, 1) * c(1, 1, 0)
        + c(0, 0, 1) * c(0, 1, 1) * c(1, 0, 0) * c(1, 1, 0)
        + c(0, 1, 0) * c(0, 1, 1) * c(1, 0, 0) * c(1, 0, 1);
    let d3 = c(0, 0, 0) * c(1, 1, 0) * c(1, 0, 1) * c(0, 1, 1)
        + c(1, 0, 0) * c(0, 1, 0) * c(0, 0, 1) * c(1, 1, 1);
    Ok(4.0 * (d1 - 2.0 * d2 + 4.0 * d3).norm())
}

/// Population on the last lattice site, |<N|psi>|^2.
pub fn lattice_transfer_fidelity(psi: &DVector<Complex64>) -> f64 {
    psi[psi.len() - 1].norm_sqr()
}

/// Apply the exact slice propagator exp(-i H dt) to `psi` in place.
///
/// Scaling-and-squaring Taylor applied to the vector: the phase angle is
/// halved until `||H|| dt <= 1/2`, each sub-step sums the series to machine
/// precision. Exact per slice (unitary to rounding) at O(n^2) per matrix
/// application instead of the O(n^3) of a full eigendecomposition.
pub fn apply_slice_propagator(h: &DMatrix<Complex64>, dt: f64, psi: &mut DVector<Complex64>) {
    // row-sum norm bounds the spectral radius of a Hermitian matrix
    let mut norm1 = 0.0f64;
    for i in 0..h.nrows() {
        let mut row = 0.0;
        for j in 0..h.ncols() {
            row += h[(i, j)].norm();
        }
        norm1 = norm1.max(row);
    }
    let theta = norm1 * dt.abs();
    let splits = if theta > 0.5 {
        (theta / 0.5).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let sub_dt = dt / (1u64 << splits) as f64;
    let factor = Complex64::new(0.0, -sub_dt);
    for _ in 0..(1u64 << splits) {
        let mut acc = psi.clone();
        let mut term = psi.clone();
        for k in 1..=40 {
            term = h * &term;
            term *= factor / Complex64::new(k as f64, 0.0);
            acc += &term;
            if term.norm() <= 1e-17 * acc.norm() {
                break;
            }
        }
        *psi = acc;
    }
}

/// Midpoint-exponential propagation over a fixed slice grid. `h_mid(k)` is
/// the slice Hamiltonian at the k-th midpoint. Returns the final state.
pub fn evolve_grid<F>(
    psi0: &DVector<Complex64>,
    n_steps: usize,
    dt: f64,
    mut h_mid: F,
) -> Result<DVector<Complex64>>
where
    F: FnMut(usize) -> Result<DMatrix<Complex64>>,
{
    if n_steps == 0 {
        return Err(ColdError::InvalidExperiment("n_steps must be >= 1".into()));
    }
    let mut psi = psi0.clone();
    for k in 0..n_steps {
        let h = h_mid(k)?;
        if h.nrows() != psi.len() {
            return Err(ColdError::DimensionMismatch {
                expected: psi.len(),
                got: h.nrows(),
            });
        }
        apply_slice_propagator(&h, dt, &mut psi);
    }
    let drift = (psi.norm() - 1.0).abs();
    if drift > NORM_DRIFT_TOL {
        return Err(ColdError::NonFiniteCost {
            location: format!("propagator norm drift {drift:e}"),
        });
    }
    Ok(psi)
}

/// Which counterdiabatic term dresses the evolution.
#[derive(Debug, Clone)]
pub enum CdMode {
    /// Bare dynamics, no CD.
    None,
    /// Variational LCD over a fixed ansatz.
    Lcd(LcdSolution),
    /// Exact adiabatic gauge potential from the instantaneous
    /// eigendecomposition.
    Exact,
}

/// Diagnostics of one evolution run.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub state: DVector<Complex64>,
    /// max over the grid of sum_j |lambda_dot alpha_j| (LCD) or of
    /// lambda_dot max|A| (exact CD); zero without CD.
    pub max_cd_amplitude: f64,
    /// max over the grid and slots of |pulse value|.
    pub max_control_amplitude: f64,
    pub n_steps: usize,
}

/// Dense evolution engine for a spin system with optional control pulses and
/// counterdiabatic dressing. Operator matrices are materialized once.
pub struct SpinPropagator {
    system: SpinSystem,
    dense_ops: Vec<DMatrix<Complex64>>,
    ansatz_dense: Vec<DMatrix<Complex64>>,
    cd: CdMode,
    dim: usize,
}

impl SpinPropagator {
    pub fn new(system: &SpinSystem, cd: CdMode) -> Result<SpinPropagator> {
        let dense_ops: Vec<DMatrix<Complex64>> = system
            .operators()
            .map(|op| op.to_dense())
            .collect::<Result<_>>()?;
        let ansatz_dense = match &cd {
            CdMode::Lcd(sol) => sol
                .ansatz()
                .groups()
                .iter()
                .map(|g| g.to_dense())
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        let dim = 1usize << system.n_sites;
        Ok(SpinPropagator {
            system: system.clone(),
            dense_ops,
            ansatz_dense,
            cd,
            dim,
        })
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bare (pulse-dressed, CD-free) Hamiltonian at lambda.
    pub fn bare_dense(&self, lambda: f64, pulses: &[Pulse]) -> Result<DMatrix<Complex64>> {
        let (vals, _) = self.system.coefficients_at(lambda, pulses)?;
        let mut h = DMatrix::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for (op, v) in self.dense_ops.iter().zip(vals.iter()) {
            if *v != 0.0 {
                h += op * Complex64::new(*v, 0.0);
            }
        }
        Ok(h)
    }

    fn d_lambda_dense(&self, lambda: f64, pulses: &[Pulse]) -> Result<DMatrix<Complex64>> {
        let (_, ders) = self.system.coefficients_at(lambda, pulses)?;
        let mut dh = DMatrix::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for (op, d) in self.dense_ops.iter().zip(ders.iter()) {
            if *d != 0.0 {
                dh += op * Complex64::new(*d, 0.0);
            }
        }
        Ok(dh)
    }

    /// Full driving Hamiltonian at lambda, including the CD term
    /// `+ lambda_dot * A(lambda)`; returns the matrix and the CD amplitude
    /// diagnostic at this point.
    pub fn dressed_dense(
        &self,
        lambda: f64,
        pulses: &[Pulse],
        tau: f64,
    ) -> Result<(DMatrix<Complex64>, f64)> {
        let mut h = self.bare_dense(lambda, pulses)?;
        let lambda_dot = self.system.lambda_dot(tau);
        let cd_amp = match &self.cd {
            CdMode::None => 0.0,
            CdMode::Lcd(sol) => {
                let alphas = sol.coefficients_at(lambda, pulses)?;
                for (a_dense, alpha) in self.ansatz_dense.iter().zip(alphas.iter()) {
                    if *alpha != 0.0 {
                        h += a_dense * Complex64::new(lambda_dot * alpha, 0.0);
                    }
                }
                alphas.iter().map(|a| (lambda_dot * a).abs()).sum()
            }
            CdMode::Exact => {
                let dh = self.d_lambda_dense(lambda, pulses)?;
                let agp = exact_agp_dense(&self.bare_dense(lambda, pulses)?, &dh, DEFAULT_GAP_TOL)?;
                h += &agp * Complex64::new(lambda_dot, 0.0);
                lambda_dot * agp.iter().map(|c| c.norm()).fold(0.0, f64::max)
            }
        };
        Ok((h, cd_amp))
    }

    /// Propagate psi0 over n_steps midpoint slices for total time tau.
    pub fn evolve(
        &self,
        psi0: &DVector<Complex64>,
        pulses: &[Pulse],
        tau: f64,
        n_steps: usize,
    ) -> Result<EvolveOutcome> {
        let (lo, hi) = self.system.lambda_span;
        let dt = tau / n_steps as f64;
        let mut max_cd = 0.0f64;
        let mut max_ctrl = 0.0f64;
        let state = evolve_grid(psi0, n_steps, dt, |k| {
            let s = (k as f64 + 0.5) / n_steps as f64;
            let lambda = lo + s * (hi - lo);
            for p in pulses {
                max_ctrl = max_ctrl.max(p.value(lambda).abs());
            }
            let (h, cd_amp) = self.dressed_dense(lambda, pulses, tau)?;
            max_cd = max_cd.max(cd_amp);
            Ok(h)
        })?;
        Ok(EvolveOutcome {
            state,
            max_cd_amplitude: max_cd,
            max_control_amplitude: max_ctrl,
            n_steps,
        })
    }

    /// Evolve with the step count doubled until the final state moves by
    /// less than `tol` in fidelity, starting from `base_steps` and capped at
    /// [`MAX_N_STEPS`].
    pub fn evolve_converged(
        &self,
        psi0: &DVector<Complex64>,
        pulses: &[Pulse],
        tau: f64,
        base_steps: usize,
        tol: f64,
    ) -> Result<EvolveOutcome> {
        let mut n = base_steps.max(1);
        let mut out = self.evolve(psi0, pulses, tau, n)?;
        while 2 * n <= MAX_N_STEPS {
            let refined = self.evolve(psi0, pulses, tau, 2 * n)?;
            let shift = (1.0 - fidelity(&refined.state, &out.state)).abs();
            out = refined;
            n *= 2;
            if shift < tol {
                break;
            }
        }
        Ok(out)
    }
}

/// Dense evolution engine for the synthetic lattice, with optional LCD
/// phase-modulated tunneling.
pub struct LatticePropagator {
    pub model: LatticeModel,
    pub with_cd: bool,
}

impl LatticePropagator {
    pub fn new(model: LatticeModel, with_cd: bool) -> LatticePropagator {
        LatticePropagator { model, with_cd }
    }

    /// LCD coefficients of the (pulse-dressed) lattice at lambda.
    pub fn alphas_at(&self, lambda: f64, pulse: Option<&Pulse>) -> Vec<f64> {
        let nb = self.model.n_sites - 1;
        let j = vec![self.model.tunneling_opt(lambda, pulse); nb];
        let dj = vec![self.model.d_tunneling_opt(lambda, pulse); nb];
        let v: Vec<f64> = (0..self.model.n_sites)
            .map(|s| self.model.tilt(lambda, s))
            .collect();
        let dv: Vec<f64> = (0..self.model.n_sites)
            .map(|s| self.model.d_tilt(s))
            .collect();
        crate::lcd::lattice_lcd_alpha(&j, &dj, &v, &dv)
    }

    pub fn evolve(
        &self,
        psi0: &DVector<Complex64>,
        pulse: Option<&Pulse>,
        tau: f64,
        n_steps: usize,
    ) -> Result<EvolveOutcome> {
        let dt = tau / n_steps as f64;
        let mut max_cd = 0.0f64;
        let mut max_ctrl = 0.0f64;
        let state = evolve_grid(psi0, n_steps, dt, |k| {
            let lambda = (k as f64 + 0.5) / n_steps as f64;
            if let Some(p) = pulse {
                max_ctrl = max_ctrl.max(p.value(lambda).abs());
            }
            if self.with_cd {
                let alphas = self.alphas_at(lambda, pulse);
                // report the modified tunneling amplitude, the experimentally
                // relevant drive strength
                let j_opt = self.model.tunneling_opt(lambda, pulse);
                for a in &alphas {
                    max_cd = max_cd.max((j_opt * j_opt + (a / tau).powi(2)).sqrt());
                }
                self.model.matrix_at(lambda, pulse, Some((&alphas, tau)))
            } else {
                self.model.matrix_at(lambda, pulse, None)
            }
        })?;
        Ok(EvolveOutcome {
            state,
            max_cd_amplitude: max_cd,
            max_control_amplitude: max_ctrl,
            n_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcd::{solve_lcd, Ansatz};
    use crate::models::SpinModel;
    use crate::pauli::{Pauli, PauliSum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis_state(dim: usize, idx: usize) -> DVector<Complex64> {
        let mut v = DVector::from_element(dim, c(0.0, 0.0));
        v[idx] = c(1.0, 0.0);
        v
    }

    #[test]
    fn ground_state_of_minus_z_is_up() {
        let h = PauliSum::term(1, -1.0, &[(0, Pauli::Z)])
            .unwrap()
            .to_dense()
            .unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.state[0].re - 1.0).abs() < 1e-12);
        assert!(gs.state[1].norm() < 1e-12);
        assert!((gs.energy + 1.0).abs() < 1e-12);
        assert!((gs.gap - 2.0).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 1);
    }

    #[test]
    fn two_spin_initial_ground_state_is_up_up() {
        let sys = SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap();
        let h = sys.hamiltonian_at(0.0, &[]).unwrap().to_dense().unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.state[0].re - 1.0).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 1);
    }

    #[test]
    fn ground_state_random_hermitian_16() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 16;
        let mut h = DMatrix::from_element(dim, dim, c(0.0, 0.0));
        for i in 0..dim {
            for j in i..dim {
                let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if i == j {
                    h[(i, j)] = c(v.re, 0.0);
                } else {
                    h[(i, j)] = v;
                    h[(j, i)] = v.conj();
                }
            }
        }
        let gs = ground_state(&h).unwrap();
        // eigen-residual oracle
        let resid = (&h * &gs.state - &gs.state * c(gs.energy, 0.0)).norm();
        assert!(resid < 1e-10, "residual {resid}");
        // no random Rayleigh quotient dips below the reported energy
        for _ in 0..200 {
            let mut v = DVector::from_fn(dim, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            v /= c(v.norm(), 0.0);
            assert!(energy_expectation(&v, &h) >= gs.energy - 1e-10);
        }
    }

    #[test]
    fn degenerate_ground_space_is_flagged() {
        let h = PauliSum::term(2, 1.0, &[(0, Pauli::Z), (1, Pauli::Z)])
            .unwrap()
            .to_dense()
            .unwrap();
        let gs = ground_state(&h).unwrap();
        assert_eq!(gs.degeneracy, 2);
    }

    #[test]
    fn static_diagonal_hamiltonian_only_dephases() {
        let h = PauliSum::term(2, 0.7, &[(0, Pauli::Z)])
            .unwrap()
            .to_dense()
            .unwrap();
        let psi0 = DVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let out = evolve_grid(&psi0, 50, 0.01, |_| Ok(h.clone())).unwrap();
        for (a, b) in out.iter().zip(psi0.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let h_diag = PauliSum::term(1, 1.3, &[(0, Pauli::Z)])
            .unwrap()
            .to_dense()
            .unwrap();
        let e0 = basis_state(2, 0);
        let out = evolve_grid(&e0, 20, 0.05, |_| Ok(h_diag.clone())).unwrap();
        assert!((fidelity(&out, &e0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_trivials() {
        let a = basis_state(4, 1);
        let b = basis_state(4, 2);
        assert!((fidelity(&a, &a) - 1.0).abs() < 1e-15);
        assert!(fidelity(&a, &b).abs() < 1e-15);
        let plus = DVector::from_vec(vec![
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ]);
        let zero = basis_state(2, 0);
        assert!((fidelity(&plus, &zero) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exact_cd_is_transitionless_at_short_times() {
        let sys = SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap();
        let ansatz = Ansatz::two_spin_full().unwrap();
        let sol = solve_lcd(&sys, &ansatz).unwrap();
        let prop = SpinPropagator::new(&sys, CdMode::Lcd(sol)).unwrap();
        let psi0 = ground_state(&prop.bare_dense(0.0, &[]).unwrap())
            .unwrap()
            .state;
        let target = ground_state(&prop.bare_dense(1.0, &[]).unwrap())
            .unwrap()
            .state;
        for tau in [1e-3, 1e-2, 1e-1] {
            let out = prop
                .evolve_converged(&psi0, &[], tau, DEFAULT_N_STEPS, 1e-8)
                .unwrap();
            let f = fidelity(&out.state, &target);
            assert!(1.0 - f < 1e-6, "tau {tau}: 1-F = {:e}", 1.0 - f);
        }
    }

    #[test]
    fn exact_dense_agp_mode_matches_full_ansatz() {
        let sys = SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap();
        let prop = SpinPropagator::new(&sys, CdMode::Exact).unwrap();
        let psi0 = ground_state(&prop.bare_dense(0.0, &[]).unwrap())
            .unwrap()
            .state;
        let target = ground_state(&prop.bare_dense(1.0, &[]).unwrap())
            .unwrap()
            .state;
        let out = prop.evolve(&psi0, &[], 1e-3, 2000).unwrap();
        let f = fidelity(&out.state, &target);
        assert!(1.0 - f < 1e-6, "1-F = {:e}", 1.0 - f);
    }

    #[test]
    fn doubling_steps_is_converged_at_defaults() {
        let sys = SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap();
        let prop = SpinPropagator::new(&sys, CdMode::None).unwrap();
        let psi0 = ground_state(&prop.bare_dense(0.0, &[]).unwrap())
            .unwrap()
            .state;
        let tau = 0.5;
        let a = prop.evolve(&psi0, &[], tau, DEFAULT_N_STEPS).unwrap();
        let b = prop.evolve(&psi0, &[], tau, 2 * DEFAULT_N_STEPS).unwrap();
        let shift = (1.0 - fidelity(&a.state, &b.state)).abs();
        assert!(shift < 1e-8, "fidelity shift {shift:e}");
    }

    #[test]
    fn evolution_is_unitary() {
        let sys = SpinModel::IsingChain {
            n: 3,
            j0: 1.0,
            z0: 0.02,
            x0: 10.0,
        }
        .build()
        .unwrap();
        let prop = SpinPropagator::new(&sys, CdMode::None).unwrap();
        let psi0 = ground_state(&prop.bare_dense(0.0, &[]).unwrap())
            .unwrap()
            .state;
        let out = prop.evolve(&psi0, &[], 0.1, 500).unwrap();
        assert!((out.state.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cd_amplitude_scales_inversely_with_tau() {
        let sys = SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap();
        let ansatz = Ansatz::global_fo(2).unwrap();
        let sol = solve_lcd(&sys, &ansatz).unwrap();
        let prop = SpinPropagator::new(&sys, CdMode::Lcd(sol)).unwrap();
        let psi0 = ground_state(&prop.bare_dense(0.0, &[]).unwrap())
            .unwrap()
            .state;
        let fast = prop.evolve(&psi0, &[], 0.01, 400).unwrap();
        let slow = prop.evolve(&psi0, &[], 0.1, 400).unwrap();
        let ratio = fast.max_cd_amplitude / slow.max_cd_amplitude;
        assert!((ratio - 10.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn three_tangle_reference_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut ghz = DVector::from_element(8, c(0.0, 0.0));
        ghz[0] = c(s, 0.0);
        ghz[7] = c(s, 0.0);
        assert!((three_tangle(&ghz).unwrap() - 1.0).abs() < 1e-12);

        let t = 1.0 / 3.0f64.sqrt();
        let mut w = DVector::from_element(8, c(0.0, 0.0));
        w[1] = c(t, 0.0);
        w[2] = c(t, 0.0);
        w[4] = c(t, 0.0);
        assert!(three_tangle(&w).unwrap().abs() < 1e-12);

        let product = basis_state(8, 0);
        assert!(three_tangle(&product).unwrap().abs() < 1e-12);

        assert!(three_tangle(&basis_state(4, 0)).is_err());
    }

    #[test]
    fn three_tangle_is_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut psi = DVector::from_fn(8, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        psi /= c(psi.norm(), 0.0);
        let t0 = three_tangle(&psi).unwrap();
        // e^{i theta sigma^z} on each single spin
        for spin in 0..3 {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let mut rotated = psi.clone();
            for idx in 0..8 {
                let bit = (idx >> (2 - spin)) & 1;
                let phase = if bit == 0 {
                    Complex64::new(0.0, theta).exp()
                } else {
                    Complex64::new(0.0, -theta).exp()
                };
                rotated[idx] *= phase;
            }
            let t1 = three_tangle(&rotated).unwrap();
            assert!((t0 - t1).abs() < 1e-10, "spin {spin}: {t0} vs {t1}");
        }
    }

    #[test]
    fn energy_expectation_checks() {
        let h = PauliSum::term(1, 1.0, &[(0, Pauli::Z)])
            .unwrap()
            .to_dense()
            .unwrap();
        let up = basis_state(2, 0);
        assert!((energy_expectation(&up, &h) - 1.0).abs() < 1e-12);
        let plus = DVector::from_vec(vec![
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ]);
        assert!(energy_expectation(&plus, &h).abs() < 1e-14);

        // dense quadratic-form oracle on a random state
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 8;
        let mut m = DMatrix::from_element(dim, dim, c(0.0, 0.0));
        for i in 0..dim {
            for j in i..dim {
                let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if i == j {
                    m[(i, j)] = c(v.re, 0.0);
                } else {
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
        }
        let mut psi = DVector::from_fn(dim, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        psi /= c(psi.norm(), 0.0);
        let mut want = c(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                want += psi[i].conj() * m[(i, j)] * psi[j];
            }
        }
        assert!((energy_expectation(&psi, &m) - want.re).abs() < 1e-12);
        assert!(want.im.abs() < 1e-12);
    }

    #[test]
    fn lattice_transfer_values() {
        let e7 = basis_state(7, 6);
        assert!((lattice_transfer_fidelity(&e7) - 1.0).abs() < 1e-15);
        let e1 = basis_state(7, 0);
        assert!(lattice_transfer_fidelity(&e1).abs() < 1e-15);
        let uniform = DVector::from_element(7, c(1.0 / 7f64.sqrt(), 0.0));
        assert!((lattice_transfer_fidelity(&uniform) - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn frustrated_triangle_starts_in_tilted_product_state() {
        // the lambda = 0 field is -h0 (sigma^z + sigma^x) per site, so the
        // ground state is the product of spins polarized along +(x+z); its
        // overlap with |down>^3 is sin^2(pi/8)^3 ~ 3e-3
        let sys = SpinModel::FrustratedTriangle {
            n: 3,
            j0: 1.0,
            h0: 10.0,
            corner_controls: false,
        }
        .build()
        .unwrap();
        let h = sys.hamiltonian_at(0.0, &[]).unwrap().to_dense().unwrap();
        let gs = ground_state(&h).unwrap();
        assert_eq!(gs.degeneracy, 1);
        let cos = (std::f64::consts::PI / 8.0).cos();
        let sin = (std::f64::consts::PI / 8.0).sin();
        let mut tilted = DVector::from_element(8, c(0.0, 0.0));
        for idx in 0..8usize {
            let mut amp = 1.0;
            for spin in 0..3 {
                amp *= if (idx >> (2 - spin)) & 1 == 0 {
                    cos
                } else {
                    sin
                };
            }
            tilted[idx] = c(amp, 0.0);
        }
        assert!(fidelity(&gs.state, &tilted) > 0.99);
        let down = basis_state(8, 7);
        assert!(fidelity(&gs.state, &down) < 1e-2);
    }

    #[test]
    fn lattice_cd_improves_fast_transfer() {
        let model = crate::models::LatticeModel::new(5, 1.0, 4.0);
        let bare = LatticePropagator::new(model, false);
        let cd = LatticePropagator::new(model, true);
        let psi0 = ground_state(&model.matrix_at(0.0, None, None).unwrap())
            .unwrap()
            .state;
        let tau = 0.1;
        let f_bare = lattice_transfer_fidelity(&bare.evolve(&psi0, None, tau, 800).unwrap().state);
        let f_cd = lattice_transfer_fidelity(&cd.evolve(&psi0, None, tau, 800).unwrap().state);
        assert!(f_cd > f_bare, "cd transfer {f_cd} not above bare {f_bare}");
    }
}
