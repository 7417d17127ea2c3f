//! Variational local counterdiabatic driving.
//!
//! The approximate adiabatic gauge potential is expanded over a fixed ansatz
//! of Hermitian operator groups, A = sum_j alpha_j(lambda) A_j, and the
//! coefficients minimize the action Tr[G^2]/2^N with
//! G = dH/dlambda + i [A, H]. Stationarity is the linear system M alpha = b
//! with M_jk = <i[A_j,H], i[A_k,H]> and b_j = -<dH, i[A_j,H]> in the
//! normalized trace inner product. Singular systems fall back to the
//! minimum-norm least-squares solution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ColdError, Result};
use crate::models::SpinSystem;
use crate::pauli::{Pauli, PauliSum};
use crate::pulses::Pulse;

const HERMITIAN_TOL: f64 = 1e-10;

/// Relative eigenvalue cutoff of the minimum-norm solver; modes below
/// max|eig| * cutoff are dropped, so cond(M) > 1e12 degrades gracefully.
const PSEUDO_INVERSE_CUTOFF: f64 = 1e-12;

/// Gap tolerance of the exact-AGP and adiabatic-criterion eigenbasis sums.
pub const DEFAULT_GAP_TOL: f64 = 1e-10;

/// Word-count guard for the nested commutator expansion.
const COMMUTATOR_WORD_CAP: usize = 100_000;

/// An ordered set of Hermitian operator groups, each sharing one scalar
/// coefficient.
#[derive(Debug, Clone)]
pub struct Ansatz {
    groups: Vec<PauliSum>,
}

impl Ansatz {
    /// Build from explicit groups. Groups must be Hermitian (real Pauli
    /// coefficients) and pairwise non-identical.
    pub fn from_groups(groups: Vec<PauliSum>) -> Result<Ansatz> {
        for g in &groups {
            if !g.is_hermitian(HERMITIAN_TOL) {
                return Err(ColdError::NotHermitian {
                    max_im: g.max_imag(),
                    tol: HERMITIAN_TOL,
                });
            }
        }
        for (i, a) in groups.iter().enumerate() {
            for b in groups.iter().skip(i + 1) {
                if a == b {
                    return Err(ColdError::InvalidModel(
                        "ansatz groups must be pairwise non-identical".into(),
                    ));
                }
            }
        }
        Ok(Ansatz { groups })
    }

    pub fn groups(&self) -> &[PauliSum] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of words across all groups with an even Y count. For a real
    /// Hamiltonian such words get zero coefficients; callers may warn.
    pub fn even_y_words(&self) -> usize {
        self.groups
            .iter()
            .flat_map(|g| g.terms())
            .filter(|(w, _)| w.y_count() % 2 == 0)
            .count()
    }

    /// Append further groups, keeping validation.
    pub fn extended(&self, extra: Vec<PauliSum>) -> Result<Ansatz> {
        let mut groups = self.groups.clone();
        groups.extend(extra);
        Ansatz::from_groups(groups)
    }

    // -- constructors for the built-in protocols --

    /// Single global sigma^y on one site (rotating spin).
    pub fn single_y() -> Result<Ansatz> {
        Ansatz::from_groups(vec![PauliSum::term(1, 1.0, &[(0, Pauli::Y)])?])
    }

    /// First order: one global group sum_j sigma^y_j.
    pub fn global_fo(n: usize) -> Result<Ansatz> {
        let mut s = PauliSum::zero(n);
        for j in 0..n {
            s = s.add(&PauliSum::term(n, 1.0, &[(j, Pauli::Y)])?)?;
        }
        Ansatz::from_groups(vec![s])
    }

    /// Two-spin second order: gamma group (x1 y2 + y1 x2) and zeta group
    /// (z1 y2 + y1 z2).
    pub fn two_spin_so() -> Result<Ansatz> {
        let g = PauliSum::term(2, 1.0, &[(0, Pauli::X), (1, Pauli::Y)])?.add(&PauliSum::term(
            2,
            1.0,
            &[(0, Pauli::Y), (1, Pauli::X)],
        )?)?;
        let z = PauliSum::term(2, 1.0, &[(0, Pauli::Z), (1, Pauli::Y)])?.add(&PauliSum::term(
            2,
            1.0,
            &[(0, Pauli::Y), (1, Pauli::Z)],
        )?)?;
        Ansatz::from_groups(vec![g, z])
    }

    /// Two-spin first plus second order; spans the exact AGP of the model.
    pub fn two_spin_full() -> Result<Ansatz> {
        Ansatz::global_fo(2)?.extended(Ansatz::two_spin_so()?.groups)
    }

    /// Nearest-neighbour chain second order: global gamma and zeta groups.
    pub fn chain_so(n: usize) -> Result<Ansatz> {
        let mut g = PauliSum::zero(n);
        let mut z = PauliSum::zero(n);
        for j in 0..n - 1 {
            g = g.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::X), (j + 1, Pauli::Y)],
            )?)?;
            g = g.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Y), (j + 1, Pauli::X)],
            )?)?;
            z = z.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Z), (j + 1, Pauli::Y)],
            )?)?;
            z = z.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Y), (j + 1, Pauli::Z)],
            )?)?;
        }
        Ansatz::from_groups(vec![g, z])
    }

    /// Second order for the frustrated-triangle geometry: nearest-neighbour
    /// x y plus next-nearest y x in the gamma group, and z y plus y z in the
    /// zeta group.
    pub fn ghz_so(n: usize) -> Result<Ansatz> {
        let mut g = PauliSum::zero(n);
        let mut z = PauliSum::zero(n);
        for j in 0..n - 1 {
            g = g.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::X), (j + 1, Pauli::Y)],
            )?)?;
            z = z.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Z), (j + 1, Pauli::Y)],
            )?)?;
        }
        for j in 0..n.saturating_sub(2) {
            g = g.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Y), (j + 2, Pauli::X)],
            )?)?;
            z = z.add(&PauliSum::term(
                n,
                1.0,
                &[(j, Pauli::Y), (j + 2, Pauli::Z)],
            )?)?;
        }
        Ansatz::from_groups(vec![g, z])
    }

    /// Per-site alpha plus all two-site imaginary pairs (gamma, gammabar,
    /// zeta, zetabar per pair), ordered [alpha_0.., then per pair (i<j) the
    /// quadruple]; the variable order of the hand-coded coupled equations.
    pub fn ising_graph_full(n: usize) -> Result<Ansatz> {
        let mut groups = Vec::new();
        for i in 0..n {
            groups.push(PauliSum::term(n, 1.0, &[(i, Pauli::Y)])?);
        }
        for i in 0..n {
            for j in i + 1..n {
                groups.push(PauliSum::term(n, 1.0, &[(i, Pauli::X), (j, Pauli::Y)])?);
                groups.push(PauliSum::term(n, 1.0, &[(i, Pauli::Y), (j, Pauli::X)])?);
                groups.push(PauliSum::term(n, 1.0, &[(i, Pauli::Z), (j, Pauli::Y)])?);
                groups.push(PauliSum::term(n, 1.0, &[(i, Pauli::Y), (j, Pauli::Z)])?);
            }
        }
        Ansatz::from_groups(groups)
    }
}

/// G = dH + i [sum_j alpha_j A_j, H].
pub fn build_g(h: &PauliSum, dh: &PauliSum, ansatz: &Ansatz, alphas: &[f64]) -> Result<PauliSum> {
    if alphas.len() != ansatz.len() {
        return Err(ColdError::DimensionMismatch {
            expected: ansatz.len(),
            got: alphas.len(),
        });
    }
    let mut a = PauliSum::zero(h.n_sites());
    for (group, &alpha) in ansatz.groups().iter().zip(alphas) {
        a = a.add(&group.scale_re(alpha))?;
    }
    let comm = a.commutator(h)?;
    dh.add(&comm.scale(Complex64::new(0.0, 1.0)))
}

/// Action of the ansatz: the normalized trace norm Tr[G^2] / 2^N.
pub fn action(g: &PauliSum) -> Result<f64> {
    if !g.is_hermitian(HERMITIAN_TOL) {
        return Err(ColdError::NotHermitian {
            max_im: g.max_imag(),
            tol: HERMITIAN_TOL,
        });
    }
    Ok(g.trace_inner(g)?.re)
}

/// The stationarity system of the action at one lambda.
#[derive(Debug, Clone)]
pub struct LcdLinearSystem {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LcdLinearSystem {
    pub fn solve(&self) -> DVector<f64> {
        solve_min_norm(&self.m, &self.b)
    }
}

/// Assemble M and b from explicit H and dH.
pub fn build_linear_system(
    h: &PauliSum,
    dh: &PauliSum,
    ansatz: &Ansatz,
) -> Result<LcdLinearSystem> {
    for op in [h, dh] {
        if !op.is_hermitian(HERMITIAN_TOL) {
            return Err(ColdError::NotHermitian {
                max_im: op.max_imag(),
                tol: HERMITIAN_TOL,
            });
        }
    }
    let n = ansatz.len();
    let i_comms: Vec<PauliSum> = ansatz
        .groups()
        .iter()
        .map(|a| a.commutator(h).map(|c| c.scale(Complex64::new(0.0, 1.0))))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = i_comms[j].trace_inner(&i_comms[k])?.re;
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    let mut b = DVector::zeros(n);
    for j in 0..n {
        b[j] = -dh.trace_inner(&i_comms[j])?.re;
    }
    Ok(LcdLinearSystem { m, b })
}

/// Minimum-norm least-squares solve of a symmetric system via its
/// eigendecomposition, dropping modes below the relative cutoff.
pub fn solve_min_norm(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let max_ev = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let cut = max_ev * PSEUDO_INVERSE_CUTOFF;
    let mut x = DVector::zeros(n);
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() <= cut || ev.abs() == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let proj = v.dot(b) / ev;
        x += v * proj;
    }
    x
}

/// Lambda-resolved LCD coefficients for a spin system and ansatz.
///
/// The commutator structure is precomputed once: with H(lambda) =
/// sum_g h_g(lambda) O_g (groups and control slots alike), both M(lambda) and
/// b(lambda) are bilinear in the instantaneous coefficient vector, so each
/// evaluation is a small tensor contraction plus a dense solve.
#[derive(Debug, Clone)]
pub struct LcdSolution {
    system: SpinSystem,
    ansatz: Ansatz,
    n_ops: usize,
    /// [G, P, G, P]: <i[A_j, O_g], i[A_k, O_g']>.
    m_tensor: Vec<f64>,
    /// [P, G, P]: <O_g', i[A_j, O_g]>.
    b_tensor: Vec<f64>,
}

impl LcdSolution {
    pub fn new(system: &SpinSystem, ansatz: &Ansatz) -> Result<LcdSolution> {
        let ops: Vec<&PauliSum> = system.operators().collect();
        let p = ops.len();
        let g_n = ansatz.len();
        let mut i_comms = Vec::with_capacity(g_n * p);
        for a in ansatz.groups() {
            for op in &ops {
                i_comms.push(a.commutator(op)?.scale(Complex64::new(0.0, 1.0)));
            }
        }
        let mut m_tensor = vec![0.0; g_n * p * g_n * p];
        for j in 0..g_n {
            for g in 0..p {
                for k in 0..g_n {
                    for g2 in 0..p {
                        m_tensor[((j * p + g) * g_n + k) * p + g2] =
                            i_comms[j * p + g].trace_inner(&i_comms[k * p + g2])?.re;
                    }
                }
            }
        }
        let mut b_tensor = vec![0.0; p * g_n * p];
        for (gd, op) in ops.iter().enumerate() {
            for j in 0..g_n {
                for g in 0..p {
                    b_tensor[(gd * g_n + j) * p + g] = op.trace_inner(&i_comms[j * p + g])?.re;
                }
            }
        }
        Ok(LcdSolution {
            system: system.clone(),
            ansatz: ansatz.clone(),
            n_ops: p,
            m_tensor,
            b_tensor,
        })
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    /// Assemble the stationarity system from instantaneous coefficient
    /// values and derivatives.
    #[allow(clippy::needless_range_loop)]
    pub fn system_from_values(&self, vals: &[f64], ders: &[f64]) -> LcdLinearSystem {
        let p = self.n_ops;
        let g_n = self.ansatz.len();
        let mut m = DMatrix::zeros(g_n, g_n);
        for j in 0..g_n {
            for k in j..g_n {
                let mut acc = 0.0;
                for g in 0..p {
                    if vals[g] == 0.0 {
                        continue;
                    }
                    for g2 in 0..p {
                        acc += vals[g] * vals[g2] * self.m_tensor[((j * p + g) * g_n + k) * p + g2];
                    }
                }
                m[(j, k)] = acc;
                m[(k, j)] = acc;
            }
        }
        let mut b = DVector::zeros(g_n);
        for j in 0..g_n {
            let mut acc = 0.0;
            for gd in 0..p {
                if ders[gd] == 0.0 {
                    continue;
                }
                for g in 0..p {
                    acc += ders[gd] * vals[g] * self.b_tensor[(gd * g_n + j) * p + g];
                }
            }
            b[j] = -acc;
        }
        LcdLinearSystem { m, b }
    }

    /// alpha(lambda) with the given pulses bound to the control slots.
    pub fn coefficients_at(&self, lambda: f64, pulses: &[Pulse]) -> Result<Vec<f64>> {
        let (vals, ders) = self.system.coefficients_at(lambda, pulses)?;
        Ok(self
            .system_from_values(&vals, &ders)
            .solve()
            .iter()
            .copied()
            .collect())
    }
}

/// Solve the LCD coefficients of a system over its ansatz.
pub fn solve_lcd(system: &SpinSystem, ansatz: &Ansatz) -> Result<LcdSolution> {
    LcdSolution::new(system, ansatz)
}

/// Closed-form first-order COLD coefficient of the two-spin model with a
/// control pulse f on (z1 + z2):
/// alpha = (1/2) [(Z + f) dX - (df) X] / [(Z + f)^2 + X^2 + J^2].
pub fn cold_fo_alpha_twospin(lambda: f64, f: f64, df: f64, j0: f64, h0: f64) -> f64 {
    let x = 2.0 * h0 * crate::schedule::smooth_ramp(lambda);
    let dx = 2.0 * h0 * crate::schedule::smooth_ramp_derivative(lambda);
    let z = -h0 + f;
    let j = -2.0 * j0;
    0.5 * (z * dx - df * x) / (z * z + x * x + j * j)
}

/// Exact adiabatic gauge potential in the original basis, parallel-transport
/// gauge (Berry diagonal set to zero):
/// A = i sum_{m != n} |m> <m|dH|n> / (E_n - E_m) <n|.
///
/// Near-degenerate level pairs are an error only when they are actually
/// coupled by dH; symmetry-protected crossings with vanishing matrix element
/// contribute zero.
pub fn exact_agp_dense(
    h: &DMatrix<Complex64>,
    dh: &DMatrix<Complex64>,
    gap_tol: f64,
) -> Result<DMatrix<Complex64>> {
    let dim = h.nrows();
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let vecs = &eig.eigenvectors;
    let dh_eig = vecs.adjoint() * dh * vecs;
    let coupling_tol = 1e-9 * (1.0 + dh.norm());
    let mut a_eig = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for m in 0..dim {
        for n in 0..dim {
            if m == n {
                continue;
            }
            let gap = eig.eigenvalues[n] - eig.eigenvalues[m];
            let coupling = dh_eig[(m, n)];
            if gap.abs() < gap_tol {
                if coupling.norm() > coupling_tol {
                    return Err(ColdError::DegenerateGap {
                        m,
                        n,
                        gap: gap.abs(),
                        tol: gap_tol,
                        coupling: coupling.norm(),
                    });
                }
                continue;
            }
            a_eig[(m, n)] = Complex64::new(0.0, 1.0) * coupling / Complex64::new(gap, 0.0);
        }
    }
    Ok(vecs * a_eig * vecs.adjoint())
}

/// Ansatz from the odd nested commutators i [H,[H,...[H, dH]]] of depth
/// 2k - 1 for k = 1..order. Stops early when the chain commutes away.
pub fn nested_commutator_ansatz(h: &PauliSum, dh: &PauliSum, order: usize) -> Result<Ansatz> {
    let mut groups = Vec::new();
    let mut current = dh.clone();
    for k in 1..=order {
        // one step from depth 2k-3 (or dH) to depth 2k-1
        let steps = if k == 1 { 1 } else { 2 };
        for _ in 0..steps {
            current = h.commutator(&current)?;
            if current.n_terms() > COMMUTATOR_WORD_CAP {
                return Err(ColdError::CommutatorBlowup {
                    order: k,
                    cap: COMMUTATOR_WORD_CAP,
                });
            }
        }
        if current.is_zero() {
            break;
        }
        groups.push(current.scale(Complex64::new(0.0, 1.0)).real_part());
    }
    Ansatz::from_groups(groups)
}

/// LCD coefficients of the tilted lattice: the stationarity conditions of
/// Tr[G^2] over the bond ansatz A_n = i(|n><n+1| - |n+1><n|) form the
/// tridiagonal system
///
/// ```text
/// -3 J_n J_{n+1} a_{n+1} + (J_{n-1}^2 + 4 J_n^2 + J_{n+1}^2 + dV_n^2) a_n
///   - 3 J_n J_{n-1} a_{n-1} = J_n dV'_n - J'_n dV_n
/// ```
///
/// with out-of-range J set to zero, dV_n = V_{n+1} - V_n and primes denoting
/// d/dlambda. `j`/`dj` run over the N-1 bonds, `v`/`dv` over the N sites.
pub fn lattice_lcd_alpha(j: &[f64], dj: &[f64], v: &[f64], dv: &[f64]) -> Vec<f64> {
    let nb = j.len();
    assert_eq!(dj.len(), nb);
    assert_eq!(v.len(), nb + 1);
    assert_eq!(dv.len(), nb + 1);
    let jat = |idx: isize| -> f64 {
        if idx < 0 || idx as usize >= nb {
            0.0
        } else {
            j[idx as usize]
        }
    };
    let mut m = DMatrix::zeros(nb, nb);
    let mut b = DVector::zeros(nb);
    for n in 0..nb {
        let dvn = v[n + 1] - v[n];
        let dvn_dot = dv[n + 1] - dv[n];
        let ni = n as isize;
        m[(n, n)] = jat(ni - 1).powi(2) + 4.0 * j[n] * j[n] + jat(ni + 1).powi(2) + dvn * dvn;
        if n + 1 < nb {
            m[(n, n + 1)] = -3.0 * j[n] * j[n + 1];
        }
        if n > 0 {
            m[(n, n - 1)] = -3.0 * j[n] * j[n - 1];
        }
        b[n] = j[n] * dvn_dot - dj[n] * dvn;
    }
    solve_min_norm(&m, &b).iter().copied().collect()
}

/// Adiabatic-criterion diagnostic: the largest
/// |lambda_dot <m|dH|n> / (E_m - E_n)^2| over level pairs and grid points.
pub fn adiabatic_criterion(
    grid: &[(DMatrix<Complex64>, DMatrix<Complex64>)],
    lambda_dot: f64,
    gap_tol: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (h, dh) in grid {
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let dh_eig = eig.eigenvectors.adjoint() * dh * &eig.eigenvectors;
        let coupling_tol = 1e-9 * (1.0 + dh.norm());
        let dim = h.nrows();
        for m in 0..dim {
            for n in 0..dim {
                if m == n {
                    continue;
                }
                let gap = eig.eigenvalues[m] - eig.eigenvalues[n];
                let coupling = dh_eig[(m, n)].norm();
                if gap.abs() < gap_tol {
                    if coupling > coupling_tol {
                        return Err(ColdError::DegenerateGap {
                            m,
                            n,
                            gap: gap.abs(),
                            tol: gap_tol,
                            coupling,
                        });
                    }
                    continue;
                }
                worst = worst.max((lambda_dot * coupling / (gap * gap)).abs());
            }
        }
    }
    Ok(worst)
}

/// Hand-coded coupled equation sets from the derivations for the two-spin
/// model and the arbitrary Ising graph. These double as regression fixtures
/// for the generic builder; they are written directly from the collected
/// stationarity conditions rather than via operator algebra.
pub mod hand_coded {
    use super::*;

    /// Instantaneous field data of an Ising graph at one lambda.
    #[derive(Debug, Clone)]
    pub struct GraphFields {
        /// Symmetric coupling matrix, zero diagonal.
        pub j: DMatrix<f64>,
        pub dj: DMatrix<f64>,
        pub x: Vec<f64>,
        pub z: Vec<f64>,
        pub dx: Vec<f64>,
        pub dz: Vec<f64>,
    }

    /// The two-spin 3x3 system in (alpha, gamma, zeta) for symmetric fields,
    /// written in collected form; the gamma row sits at half the scale of
    /// the others, so the matrix is not symmetric.
    pub fn two_spin_system(x: f64, z: f64, j: f64, dx: f64) -> (DMatrix<f64>, DVector<f64>) {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                2.0 * (x * x + z * z + j * j),
                -2.0 * j * x,
                4.0 * j * z,
                -x * j,
                x * x + 4.0 * z * z,
                -3.0 * x * z,
                4.0 * j * z,
                -6.0 * z * x,
                2.0 * j * j + 2.0 * z * z + 8.0 * x * x,
            ],
        );
        let b = DVector::from_row_slice(&[z * dx, 0.0, j * dx]);
        (m, b)
    }

    /// Solve the two-spin system for (alpha, gamma, zeta). Rescaling the
    /// gamma row by 2 restores symmetry without changing the solution set,
    /// which keeps the minimum-norm fallback consistent with the generic
    /// solver when the system turns singular.
    pub fn two_spin_solve(x: f64, z: f64, j: f64, dx: f64) -> [f64; 3] {
        let (mut m, mut b) = two_spin_system(x, z, j, dx);
        for c in 0..3 {
            m[(1, c)] *= 2.0;
        }
        b[1] *= 2.0;
        let sol = solve_min_norm(&m, &b);
        [sol[0], sol[1], sol[2]]
    }

    /// Variable order of the graph system: alpha_0..alpha_{n-1}, then per
    /// pair (i < j, lexicographic) the quadruple (gamma, gammabar, zeta,
    /// zetabar). Matches [`Ansatz::ising_graph_full`].
    pub fn graph_variable_count(n: usize) -> usize {
        n + 2 * n * (n - 1)
    }

    fn pair_index(n: usize, i: usize, j: usize) -> usize {
        // position of (i, j), i < j, in lexicographic pair order
        debug_assert!(i < j && j < n);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Assemble the coupled stationarity equations of the full first- plus
    /// second-order ansatz on an arbitrary Ising graph. Uniform row scale,
    /// so the matrix is symmetric.
    pub fn ising_graph_system(fields: &GraphFields) -> (DMatrix<f64>, DVector<f64>) {
        let n = fields.x.len();
        let nv = graph_variable_count(n);
        let jm = &fields.j;
        let djm = &fields.dj;
        let (x, z, dx, dz) = (&fields.x, &fields.z, &fields.dx, &fields.dz);
        let mut m = DMatrix::zeros(nv, nv);
        let mut b = DVector::zeros(nv);

        let va = |i: usize| i;
        let vg = |i: usize, j: usize| n + 4 * pair_index(n, i, j);
        let vgb = |i: usize, j: usize| n + 4 * pair_index(n, i, j) + 1;
        let vz = |i: usize, j: usize| n + 4 * pair_index(n, i, j) + 2;
        let vzb = |i: usize, j: usize| n + 4 * pair_index(n, i, j) + 3;

        let set = |m: &mut DMatrix<f64>, u: usize, v: usize, val: f64| {
            m[(u, v)] += val;
            if u != v {
                m[(v, u)] += val;
            }
        };

        // alpha rows
        for i in 0..n {
            let j2: f64 = (0..n).filter(|&k| k != i).map(|k| jm[(i, k)].powi(2)).sum();
            set(&mut m, va(i), va(i), 2.0 * (z[i] * z[i] + x[i] * x[i] + j2));
            for j in 0..n {
                if j == i {
                    continue;
                }
                let jij = jm[(i, j)];
                if j > i {
                    set(&mut m, va(i), vg(i, j), -2.0 * jij * x[j]);
                    set(&mut m, va(i), vzb(i, j), 4.0 * jij * z[i]);
                } else {
                    set(&mut m, va(i), vgb(j, i), -2.0 * jij * x[j]);
                    set(&mut m, va(i), vz(j, i), 4.0 * jij * z[i]);
                }
            }
            b[va(i)] = z[i] * dx[i] - x[i] * dz[i];
        }

        // per-pair blocks
        for i in 0..n {
            for j in i + 1..n {
                let jij = jm[(i, j)];
                let sum_kk: f64 = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| jm[(k, i)].powi(2) + jm[(k, j)].powi(2))
                    .sum();
                let sum_cross: f64 = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| jm[(k, i)] * jm[(k, j)])
                    .sum();
                let sum_kj: f64 = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| jm[(k, j)].powi(2))
                    .sum();
                let sum_ki: f64 = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| jm[(k, i)].powi(2))
                    .sum();

                set(
                    &mut m,
                    vg(i, j),
                    vg(i, j),
                    2.0 * (z[i] * z[i] + z[j] * z[j] + x[j] * x[j] + sum_kk),
                );
                set(
                    &mut m,
                    vgb(i, j),
                    vgb(i, j),
                    2.0 * (z[i] * z[i] + z[j] * z[j] + x[i] * x[i] + sum_kk),
                );
                set(
                    &mut m,
                    vg(i, j),
                    vgb(i, j),
                    4.0 * z[i] * z[j] + 4.0 * sum_cross,
                );
                set(&mut m, vg(i, j), vz(i, j), -2.0 * x[i] * z[i]);
                set(&mut m, vg(i, j), vzb(i, j), -4.0 * x[j] * z[i]);
                set(&mut m, vgb(i, j), vz(i, j), -4.0 * x[i] * z[j]);
                set(&mut m, vgb(i, j), vzb(i, j), -2.0 * x[j] * z[j]);

                set(
                    &mut m,
                    vz(i, j),
                    vz(i, j),
                    2.0 * (x[i] * x[i] + x[j] * x[j] + z[j] * z[j] + jij * jij + sum_kj),
                );
                set(
                    &mut m,
                    vzb(i, j),
                    vzb(i, j),
                    2.0 * (x[i] * x[i] + x[j] * x[j] + z[i] * z[i] + jij * jij + sum_ki),
                );
                set(&mut m, vz(i, j), vzb(i, j), 4.0 * x[i] * x[j]);

                b[vg(i, j)] = 0.0;
                b[vgb(i, j)] = 0.0;
                b[vz(i, j)] = jij * dx[j] - djm[(i, j)] * x[j];
                b[vzb(i, j)] = jij * dx[i] - djm[(i, j)] * x[i];
            }
        }

        // cross-pair couplings among the z-y family sharing a y site:
        // for site s, the variables {zeta_ks (k < s)} and {zetabar_sk (k > s)}
        // couple pairwise with 4 J(u) J(v).
        for s in 0..n {
            let family: Vec<(usize, f64)> = (0..n)
                .filter(|&k| k != s)
                .map(|k| {
                    let var = if k < s { vz(k, s) } else { vzb(s, k) };
                    (var, jm[(k, s)])
                })
                .collect();
            for a in 0..family.len() {
                for c in a + 1..family.len() {
                    set(
                        &mut m,
                        family[a].0,
                        family[c].0,
                        4.0 * family[a].1 * family[c].1,
                    );
                }
            }
        }

        (m, b)
    }
}
