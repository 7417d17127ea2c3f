//! Time-dependent model library: spin Hamiltonians as schedule-weighted
//! operator groups with control-pulse insertion points, and the single
//! particle synthetic lattice.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ColdError, Result};
use crate::pauli::{Pauli, PauliSum};
use crate::pulses::Pulse;
use crate::schedule::Schedule;

/// One schedule-weighted operator group of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct OperatorGroup {
    pub operator: PauliSum,
    pub schedule: Schedule,
}

/// A time-dependent spin Hamiltonian: fixed operator groups weighted by their
/// schedules, plus control operators whose weights come from pulses bound at
/// evaluation time. Immutable once built; evaluation is pure.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    pub n_sites: usize,
    pub groups: Vec<OperatorGroup>,
    pub control_ops: Vec<PauliSum>,
    /// Physical range of the schedule parameter; lambda(t) sweeps it linearly
    /// in t member of [0, tau], so lambda_dot = span / tau.
    pub lambda_span: (f64, f64),
}

impl SpinSystem {
    pub fn lambda_lo(&self) -> f64 {
        self.lambda_span.0
    }

    pub fn lambda_hi(&self) -> f64 {
        self.lambda_span.1
    }

    /// lambda_dot for a total protocol duration tau.
    pub fn lambda_dot(&self, tau: f64) -> f64 {
        (self.lambda_span.1 - self.lambda_span.0) / tau
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.lambda_span;
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if lambda < lo - slack || lambda > hi + slack {
            return Err(ColdError::LambdaOutOfRange { lambda, lo, hi });
        }
        Ok(())
    }

    fn check_pulses(&self, pulses: &[Pulse]) -> Result<()> {
        if !pulses.is_empty() && pulses.len() != self.control_ops.len() {
            return Err(ColdError::PulseCountMismatch {
                expected: self.control_ops.len(),
                got: pulses.len(),
            });
        }
        Ok(())
    }

    /// H(lambda) with the given pulses bound to the control slots. An empty
    /// pulse slice means all control amplitudes are zero.
    pub fn hamiltonian_at(&self, lambda: f64, pulses: &[Pulse]) -> Result<PauliSum> {
        self.check_lambda(lambda)?;
        self.check_pulses(pulses)?;
        let mut h = PauliSum::zero(self.n_sites);
        for g in &self.groups {
            h = h.add(&g.operator.scale_re(g.schedule.value(lambda)))?;
        }
        for (op, pulse) in self.control_ops.iter().zip(pulses.iter()) {
            h = h.add(&op.scale_re(pulse.value(lambda)))?;
        }
        Ok(h)
    }

    /// Analytic d/dlambda of [`Self::hamiltonian_at`], including pulse derivatives.
    pub fn d_lambda_hamiltonian_at(&self, lambda: f64, pulses: &[Pulse]) -> Result<PauliSum> {
        self.check_lambda(lambda)?;
        self.check_pulses(pulses)?;
        let mut dh = PauliSum::zero(self.n_sites);
        for g in &self.groups {
            dh = dh.add(&g.operator.scale_re(g.schedule.derivative(lambda)))?;
        }
        for (op, pulse) in self.control_ops.iter().zip(pulses.iter()) {
            dh = dh.add(&op.scale_re(pulse.derivative(lambda)))?;
        }
        Ok(dh)
    }

    /// Coefficient values and derivatives of every operator (groups then
    /// controls) at lambda; the fast path used by the LCD solver.
    pub fn coefficients_at(&self, lambda: f64, pulses: &[Pulse]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_lambda(lambda)?;
        self.check_pulses(pulses)?;
        let total = self.groups.len() + self.control_ops.len();
        let mut vals = Vec::with_capacity(total);
        let mut ders = Vec::with_capacity(total);
        for g in &self.groups {
            vals.push(g.schedule.value(lambda));
            ders.push(g.schedule.derivative(lambda));
        }
        for (i, _) in self.control_ops.iter().enumerate() {
            match pulses.get(i) {
                Some(p) => {
                    vals.push(p.value(lambda));
                    ders.push(p.derivative(lambda));
                }
                None => {
                    vals.push(0.0);
                    ders.push(0.0);
                }
            }
        }
        Ok((vals, ders))
    }

    /// All operators in coefficient order: groups then controls.
    pub fn operators(&self) -> impl Iterator<Item = &PauliSum> {
        self.groups
            .iter()
            .map(|g| &g.operator)
            .chain(self.control_ops.iter())
    }
}

/// Built-in spin models.
#[derive(Debug, Clone)]
pub enum SpinModel {
    /// Two-spin annealing: J*z1z2 + Z*(z1+z2) + X(lambda)*(x1+x2) with
    /// J = -2 J0, Z = -h0, X = 2 h0 * smooth_ramp. Control on (z1+z2).
    TwoSpin { j0: f64, h0: f64 },
    /// Open Ising chain: -J0 * sum zz + Z0 * sum z + X0*ramp * sum x.
    /// Control on sum z.
    IsingChain { n: usize, j0: f64, z0: f64, x0: f64 },
    /// Arbitrary symmetric couplings with per-site field schedules.
    IsingGraph {
        n: usize,
        /// (i, j, schedule) with i < j; J_ii forbidden.
        couplings: Vec<(usize, usize, Schedule)>,
        x_fields: Vec<Schedule>,
        z_fields: Vec<Schedule>,
    },
    /// Frustrated-triangle GHZ preparation model on odd N: -J0 * (sum of
    /// nearest and next-nearest zz) + h(lambda) * sum (z + x) with
    /// h = -h0 (1 - ramp). Control on sum z, or on the two corner spins plus
    /// the bulk separately.
    FrustratedTriangle {
        n: usize,
        j0: f64,
        h0: f64,
        corner_controls: bool,
    },
    /// Single spin in a rotating field: -cos(lambda) x - sin(lambda) z with
    /// lambda member of [0, pi/2].
    RotatingSpin,
}

impl SpinModel {
    pub fn build(&self) -> Result<SpinSystem> {
        match self {
            SpinModel::TwoSpin { j0, h0 } => {
                let n = 2;
                let zz = PauliSum::term(n, 1.0, &[(0, Pauli::Z), (1, Pauli::Z)])?;
                let z_sum = site_sum(n, Pauli::Z)?;
                let x_sum = site_sum(n, Pauli::X)?;
                Ok(SpinSystem {
                    n_sites: n,
                    groups: vec![
                        OperatorGroup {
                            operator: zz,
                            schedule: Schedule::Constant(-2.0 * j0),
                        },
                        OperatorGroup {
                            operator: z_sum.clone(),
                            schedule: Schedule::Constant(-h0),
                        },
                        OperatorGroup {
                            operator: x_sum,
                            schedule: Schedule::SmoothRamp {
                                amplitude: 2.0 * h0,
                            },
                        },
                    ],
                    control_ops: vec![z_sum],
                    lambda_span: (0.0, 1.0),
                })
            }
            SpinModel::IsingChain { n, j0, z0, x0 } => {
                let n = *n;
                if n < 2 {
                    return Err(ColdError::InvalidModel(
                        "Ising chain needs at least 2 spins".into(),
                    ));
                }
                let mut zz = PauliSum::zero(n);
                for j in 0..n - 1 {
                    zz = zz.add(&PauliSum::term(
                        n,
                        1.0,
                        &[(j, Pauli::Z), (j + 1, Pauli::Z)],
                    )?)?;
                }
                let z_sum = site_sum(n, Pauli::Z)?;
                let x_sum = site_sum(n, Pauli::X)?;
                Ok(SpinSystem {
                    n_sites: n,
                    groups: vec![
                        OperatorGroup {
                            operator: zz,
                            schedule: Schedule::Constant(-j0),
                        },
                        OperatorGroup {
                            operator: z_sum.clone(),
                            schedule: Schedule::Constant(*z0),
                        },
                        OperatorGroup {
                            operator: x_sum,
                            schedule: Schedule::SmoothRamp { amplitude: *x0 },
                        },
                    ],
                    control_ops: vec![z_sum],
                    lambda_span: (0.0, 1.0),
                })
            }
            SpinModel::IsingGraph {
                n,
                couplings,
                x_fields,
                z_fields,
            } => {
                let n = *n;
                if n > 12 {
                    return Err(ColdError::InvalidModel(format!(
                        "IsingGraph is dense-storage only, N <= 12 (got {n})"
                    )));
                }
                if x_fields.len() != n || z_fields.len() != n {
                    return Err(ColdError::InvalidModel(format!(
                        "field schedules must cover all {n} sites"
                    )));
                }
                let mut groups = Vec::new();
                for &(i, j, sched) in couplings {
                    if i == j {
                        return Err(ColdError::InvalidModel(format!(
                            "self-coupling J_{{{i},{i}}} is forbidden"
                        )));
                    }
                    if i >= j || j >= n {
                        return Err(ColdError::InvalidModel(format!(
                            "coupling ({i},{j}) must satisfy i < j < {n}"
                        )));
                    }
                    groups.push(OperatorGroup {
                        operator: PauliSum::term(n, 1.0, &[(i, Pauli::Z), (j, Pauli::Z)])?,
                        schedule: sched,
                    });
                }
                for (i, sched) in x_fields.iter().enumerate() {
                    groups.push(OperatorGroup {
                        operator: PauliSum::term(n, 1.0, &[(i, Pauli::X)])?,
                        schedule: *sched,
                    });
                }
                for (i, sched) in z_fields.iter().enumerate() {
                    groups.push(OperatorGroup {
                        operator: PauliSum::term(n, 1.0, &[(i, Pauli::Z)])?,
                        schedule: *sched,
                    });
                }
                Ok(SpinSystem {
                    n_sites: n,
                    groups,
                    control_ops: vec![],
                    lambda_span: (0.0, 1.0),
                })
            }
            SpinModel::FrustratedTriangle {
                n,
                j0,
                h0,
                corner_controls,
            } => {
                let n = *n;
                if n < 3 || n % 2 == 0 {
                    return Err(ColdError::InvalidModel(
                        "frustrated triangle needs odd N >= 3".into(),
                    ));
                }
                let mut zz = PauliSum::zero(n);
                for j in 0..n - 1 {
                    zz = zz.add(&PauliSum::term(
                        n,
                        1.0,
                        &[(j, Pauli::Z), (j + 1, Pauli::Z)],
                    )?)?;
                }
                for j in 0..n - 2 {
                    zz = zz.add(&PauliSum::term(
                        n,
                        1.0,
                        &[(j, Pauli::Z), (j + 2, Pauli::Z)],
                    )?)?;
                }
                let zx_sum = site_sum(n, Pauli::Z)?.add(&site_sum(n, Pauli::X)?)?;
                let control_ops = if *corner_controls {
                    let mut bulk = PauliSum::zero(n);
                    for j in 1..n - 1 {
                        bulk = bulk.add(&PauliSum::term(n, 1.0, &[(j, Pauli::Z)])?)?;
                    }
                    vec![
                        PauliSum::term(n, 1.0, &[(0, Pauli::Z)])?,
                        PauliSum::term(n, 1.0, &[(n - 1, Pauli::Z)])?,
                        bulk,
                    ]
                } else {
                    vec![site_sum(n, Pauli::Z)?]
                };
                Ok(SpinSystem {
                    n_sites: n,
                    groups: vec![
                        OperatorGroup {
                            operator: zz,
                            schedule: Schedule::Constant(-j0),
                        },
                        OperatorGroup {
                            operator: zx_sum,
                            schedule: Schedule::InvertedSmoothRamp { amplitude: -h0 },
                        },
                    ],
                    control_ops,
                    lambda_span: (0.0, 1.0),
                })
            }
            SpinModel::RotatingSpin => Ok(SpinSystem {
                n_sites: 1,
                groups: vec![
                    OperatorGroup {
                        operator: PauliSum::term(1, 1.0, &[(0, Pauli::X)])?,
                        schedule: Schedule::CosLambda { amplitude: -1.0 },
                    },
                    OperatorGroup {
                        operator: PauliSum::term(1, 1.0, &[(0, Pauli::Z)])?,
                        schedule: Schedule::SinLambda { amplitude: -1.0 },
                    },
                ],
                control_ops: vec![],
                lambda_span: (0.0, std::f64::consts::FRAC_PI_2),
            }),
        }
    }
}

fn site_sum(n: usize, p: Pauli) -> Result<PauliSum> {
    let mut s = PauliSum::zero(n);
    for site in 0..n {
        s = s.add(&PauliSum::term(n, 1.0, &[(site, p)])?)?;
    }
    Ok(s)
}

/// Single-particle synthetic lattice with linearly reversing tilt.
///
/// Tunneling J_n(lambda) = J0 (0.1 + lambda) on every bond, on-site tilt
/// V_n(lambda) = n V0 (1 - 2 lambda), n = 1..N. A control pulse adds to the
/// tunneling uniformly.
#[derive(Debug, Clone, Copy)]
pub struct LatticeModel {
    pub n_sites: usize,
    pub j0: f64,
    pub v0: f64,
}

impl LatticeModel {
    pub fn new(n_sites: usize, j0: f64, v0: f64) -> LatticeModel {
        LatticeModel { n_sites, j0, v0 }
    }

    pub fn tunneling(&self, lambda: f64) -> f64 {
        self.j0 * (0.1 + lambda)
    }

    pub fn d_tunneling(&self) -> f64 {
        self.j0
    }

    pub fn tilt(&self, lambda: f64, site: usize) -> f64 {
        (site + 1) as f64 * self.v0 * (1.0 - 2.0 * lambda)
    }

    pub fn d_tilt(&self, site: usize) -> f64 {
        -2.0 * (site + 1) as f64 * self.v0
    }

    /// Effective tunneling with the control pulse folded in.
    pub fn tunneling_opt(&self, lambda: f64, pulse: Option<&Pulse>) -> f64 {
        self.tunneling(lambda) + pulse.map_or(0.0, |p| p.value(lambda))
    }

    pub fn d_tunneling_opt(&self, lambda: f64, pulse: Option<&Pulse>) -> f64 {
        self.d_tunneling() + pulse.map_or(0.0, |p| p.derivative(lambda))
    }

    /// N x N single-particle Hamiltonian matrix.
    ///
    /// Without `cd`: real tridiagonal, hopping -J_n^opt, diagonal V_n. With
    /// `cd = (alphas, tau)` the hopping becomes -J_cd exp(-i phi_cd) with
    /// J_cd = sqrt(J_opt^2 + (alpha_n/tau)^2) and
    /// phi_cd = atan2(-J_opt tau, alpha_n), which tends to -/+ pi/2
    /// continuously as alpha_n -> 0. Always Hermitian.
    pub fn matrix_at(
        &self,
        lambda: f64,
        pulse: Option<&Pulse>,
        cd: Option<(&[f64], f64)>,
    ) -> Result<DMatrix<Complex64>> {
        if !(-1e-12..=1.0 + 1e-12).contains(&lambda) {
            return Err(ColdError::LambdaOutOfRange {
                lambda,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let n = self.n_sites;
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for site in 0..n {
            m[(site, site)] = Complex64::new(self.tilt(lambda, site), 0.0);
        }
        let j_opt = self.tunneling_opt(lambda, pulse);
        for bond in 0..n - 1 {
            let hop = match cd {
                None => Complex64::new(-j_opt, 0.0),
                Some((alphas, tau)) => {
                    let a = alphas[bond];
                    let j_cd = (j_opt * j_opt + (a / tau).powi(2)).sqrt();
                    let phi = (-j_opt * tau).atan2(a);
                    -j_cd * Complex64::new(0.0, -phi).exp()
                }
            };
            m[(bond, bond + 1)] = hop;
            m[(bond + 1, bond)] = hop.conj();
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{BarePulse, FrequencyMode};
    use proptest::prelude::*;

    fn two_spin_defaults() -> SpinSystem {
        SpinModel::TwoSpin { j0: 0.5, h0: 1.0 }.build().unwrap()
    }

    #[test]
    fn two_spin_initial_coefficients() {
        let sys = two_spin_defaults();
        let h = sys.hamiltonian_at(0.0, &[]).unwrap();
        // -h0 z1 - h0 z2 - 2 J0 z1z2, X(0) = 0.
        let zz = PauliSum::term(2, -1.0, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let z1 = PauliSum::term(2, -1.0, &[(0, Pauli::Z)]).unwrap();
        let z2 = PauliSum::term(2, -1.0, &[(1, Pauli::Z)]).unwrap();
        let want = zz.add(&z1).unwrap().add(&z2).unwrap();
        assert!(h.sub(&want).unwrap().is_zero());
    }

    #[test]
    fn ising_chain_transverse_coefficient_at_one() {
        let sys = SpinModel::IsingChain {
            n: 5,
            j0: 1.0,
            z0: 0.02,
            x0: 10.0,
        }
        .build()
        .unwrap();
        let h = sys.hamiltonian_at(1.0, &[]).unwrap();
        for site in 0..5 {
            let w = crate::pauli::PauliWord::from_sites(5, &[(site, Pauli::X)]).unwrap();
            assert!((h.coefficient(&w).re - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_free_boundaries_for_every_model() {
        let pulse = Pulse::Bare(BarePulse::new(vec![2.3], FrequencyMode::Half));
        let systems = vec![
            two_spin_defaults(),
            SpinModel::IsingChain {
                n: 4,
                j0: 1.0,
                z0: 0.02,
                x0: 10.0,
            }
            .build()
            .unwrap(),
            SpinModel::FrustratedTriangle {
                n: 3,
                j0: 1.0,
                h0: 10.0,
                corner_controls: false,
            }
            .build()
            .unwrap(),
        ];
        for sys in systems {
            let pulses: Vec<Pulse> = sys.control_ops.iter().map(|_| pulse.clone()).collect();
            for l in [0.0, 1.0] {
                let bare = sys.hamiltonian_at(l, &[]).unwrap();
                let dressed = sys.hamiltonian_at(l, &pulses).unwrap();
                assert!(bare.sub(&dressed).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn d_lambda_matches_finite_differences() {
        let sys = two_spin_defaults();
        let pulse = vec![Pulse::Bare(BarePulse::new(
            vec![1.1, -0.4],
            FrequencyMode::Half,
        ))];
        let h = 1e-5;
        for k in 1..20 {
            let l = k as f64 / 20.0;
            let hp = sys.hamiltonian_at(l + h, &pulse).unwrap();
            let hm = sys.hamiltonian_at(l - h, &pulse).unwrap();
            let fd = hp.sub(&hm).unwrap().scale_re(1.0 / (2.0 * h));
            let an = sys.d_lambda_hamiltonian_at(l, &pulse).unwrap();
            let diff = fd.sub(&an).unwrap();
            let max = diff.terms().map(|(_, c)| c.norm()).fold(0.0f64, f64::max);
            assert!(max < 1e-6, "at {l}: max deviation {max}");
        }
    }

    #[test]
    fn constant_model_has_zero_derivative() {
        let sys = SpinModel::IsingGraph {
            n: 2,
            couplings: vec![(0, 1, Schedule::Constant(0.7))],
            x_fields: vec![Schedule::Constant(0.1); 2],
            z_fields: vec![Schedule::Constant(-0.3); 2],
        }
        .build()
        .unwrap();
        assert!(sys.d_lambda_hamiltonian_at(0.4, &[]).unwrap().is_zero());
    }

    #[test]
    fn invalid_lambda_and_pulse_count_are_errors() {
        let sys = two_spin_defaults();
        assert!(matches!(
            sys.hamiltonian_at(1.4, &[]),
            Err(ColdError::LambdaOutOfRange { .. })
        ));
        let two = vec![
            Pulse::Bare(BarePulse::new(vec![1.0], FrequencyMode::Half)),
            Pulse::Bare(BarePulse::new(vec![1.0], FrequencyMode::Half)),
        ];
        assert!(matches!(
            sys.hamiltonian_at(0.5, &two),
            Err(ColdError::PulseCountMismatch { .. })
        ));
    }

    #[test]
    fn self_coupling_rejected() {
        let model = SpinModel::IsingGraph {
            n: 3,
            couplings: vec![(1, 1, Schedule::Constant(1.0))],
            x_fields: vec![Schedule::Constant(0.0); 3],
            z_fields: vec![Schedule::Constant(0.0); 3],
        };
        assert!(model.build().is_err());
    }

    #[test]
    fn corner_scheme_exposes_three_control_slots() {
        let sys = SpinModel::FrustratedTriangle {
            n: 5,
            j0: 1.0,
            h0: 10.0,
            corner_controls: true,
        }
        .build()
        .unwrap();
        assert_eq!(sys.control_ops.len(), 3);
        // corner slots act on single spins, the bulk slot on the rest
        assert_eq!(sys.control_ops[0].n_terms(), 1);
        assert_eq!(sys.control_ops[1].n_terms(), 1);
        assert_eq!(sys.control_ops[2].n_terms(), 3);
    }

    #[test]
    fn lattice_coefficients_at_zero() {
        let m = LatticeModel::new(7, 1.0, 4.0);
        let h = m.matrix_at(0.0, None, None).unwrap();
        for site in 0..7 {
            assert!((h[(site, site)].re - 4.0 * (site + 1) as f64).abs() < 1e-14);
        }
        for bond in 0..6 {
            assert!((h[(bond, bond + 1)].re + 0.1).abs() < 1e-14);
            assert!(h[(bond, bond + 1)].im.abs() < 1e-14);
        }
    }

    #[test]
    fn lattice_tilt_vanishes_at_half() {
        let m = LatticeModel::new(7, 1.0, 4.0);
        for site in 0..7 {
            assert!(m.tilt(0.5, site).abs() < 1e-14);
        }
    }

    #[test]
    fn lattice_cd_magnitude_and_zero_alpha_branch() {
        let m = LatticeModel::new(5, 1.0, 4.0);
        let alphas = [0.3, -0.7, 0.0, 1.9];
        let tau = 0.37;
        let h = m.matrix_at(0.55, None, Some((&alphas, tau))).unwrap();
        let j = m.tunneling(0.55);
        for bond in 0..4 {
            let hop = h[(bond, bond + 1)];
            let want = (j * j + (alphas[bond] / tau).powi(2)).sqrt();
            assert!((hop.norm() - want).abs() < 1e-12);
        }
        // alpha = 0: |hop| = J and phase -pi/2 continuously
        // (hop = -J e^{-i phi}, phi = atan2(-J tau, 0) = -pi/2).
        let hop = h[(2, 3)];
        assert!((hop.norm() - j).abs() < 1e-14);
        assert!((hop.im - (-j)).abs() < 1e-12 || (hop.im - j).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spin_hamiltonians_are_hermitian(
            l in 0.0..1.0f64,
            c1 in -3.0..3.0f64,
            c2 in -3.0..3.0f64,
        ) {
            let sys = two_spin_defaults();
            let pulses = vec![Pulse::Bare(BarePulse::new(vec![c1, c2], FrequencyMode::Half))];
            let h = sys.hamiltonian_at(l, &pulses).unwrap();
            prop_assert!(h.is_hermitian(1e-14));
        }

        #[test]
        fn lattice_matrix_is_hermitian(
            l in 0.0..1.0f64,
            a1 in -2.0..2.0f64,
            a2 in -2.0..2.0f64,
        ) {
            let m = LatticeModel::new(4, 1.0, 4.0);
            let alphas = [a1, a2, a1 * a2];
            let h = m.matrix_at(l, None, Some((&alphas, 0.5))).unwrap();
            let diff = (&h - h.adjoint()).norm();
            prop_assert!(diff < 1e-14);
        }
    }
}
