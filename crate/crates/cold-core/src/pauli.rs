//! Exact algebra of N-site Pauli strings.
//!
//! Operators are sparse linear combinations of Pauli words with complex
//! coefficients. Words are stored as packed 2-bit-per-site codes; the derived
//! integer order on the packed code is the canonical iteration order, so maps
//! over words are deterministic.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ColdError, Result};

/// Coefficients with magnitude below this are dropped after every operation.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Default cap on dense materialization (2^12 = 4096 dimensional).
pub const DEFAULT_DENSE_CAP: usize = 12;

const MAX_SITES: usize = 64;

/// Single-site Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    fn from_code(code: u8) -> Pauli {
        match code & 0b11 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// 2x2 matrix of this operator.
    pub fn matrix(self) -> DMatrix<Complex64> {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }
}

// PROD[a][b] = (code of a*b, k) with a*b = i^k * (a*b word).
const PROD: [[(u8, u8); 4]; 4] = [
    [(0, 0), (1, 0), (2, 0), (3, 0)],
    [(1, 0), (0, 0), (3, 1), (2, 3)],
    [(2, 0), (3, 3), (0, 0), (1, 1)],
    [(3, 0), (2, 1), (1, 3), (0, 0)],
];

const PHASES: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// A tensor product of single-site Pauli operators on a fixed number of sites.
///
/// Site 0 lives in the lowest two bits of the packed code. The derived `Ord`
/// (length, then packed code) is the canonical total order used everywhere.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord {
    n_sites: u8,
    code: u128,
}

impl PauliWord {
    /// The all-identity word on `n_sites` sites.
    pub fn identity(n_sites: usize) -> Result<PauliWord> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(ColdError::WordTooLong {
                got: n_sites,
                max: MAX_SITES,
            });
        }
        Ok(PauliWord {
            n_sites: n_sites as u8,
            code: 0,
        })
    }

    /// Word with the given single-site operators, identity elsewhere.
    pub fn from_sites(n_sites: usize, sites: &[(usize, Pauli)]) -> Result<PauliWord> {
        let mut w = PauliWord::identity(n_sites)?;
        for &(site, p) in sites {
            if site >= n_sites {
                return Err(ColdError::SizeMismatch {
                    expected: n_sites,
                    got: site + 1,
                });
            }
            w.code &= !(0b11u128 << (2 * site));
            w.code |= (p as u128) << (2 * site);
        }
        Ok(w)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn site(&self, site: usize) -> Pauli {
        Pauli::from_code(((self.code >> (2 * site)) & 0b11) as u8)
    }

    pub fn is_identity(&self) -> bool {
        self.code == 0
    }

    /// Number of Y factors, used to classify words as real or imaginary.
    pub fn y_count(&self) -> usize {
        (0..self.n_sites())
            .filter(|&s| self.site(s) == Pauli::Y)
            .count()
    }

    /// Site-wise product `self * other` as `(word, phase)` with phase in {1, i, -1, -i}.
    pub fn multiply(&self, other: &PauliWord) -> Result<(PauliWord, Complex64)> {
        if self.n_sites != other.n_sites {
            return Err(ColdError::SizeMismatch {
                expected: self.n_sites(),
                got: other.n_sites(),
            });
        }
        let mut code = 0u128;
        let mut k = 0u8;
        for s in 0..self.n_sites() {
            let a = ((self.code >> (2 * s)) & 0b11) as usize;
            let b = ((other.code >> (2 * s)) & 0b11) as usize;
            let (c, p) = PROD[a][b];
            code |= (c as u128) << (2 * s);
            k = (k + p) & 0b11;
        }
        Ok((
            PauliWord {
                n_sites: self.n_sites,
                code,
            },
            PHASES[k as usize],
        ))
    }

    /// True if the two words commute as operators.
    pub fn commutes_with(&self, other: &PauliWord) -> bool {
        let mut anti = false;
        for s in 0..self.n_sites() {
            let a = (self.code >> (2 * s)) & 0b11;
            let b = (other.code >> (2 * s)) & 0b11;
            if a != 0 && b != 0 && a != b {
                anti = !anti;
            }
        }
        !anti
    }

    /// Dense matrix of the word (Kronecker product, site 0 most significant).
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for s in 0..self.n_sites() {
            m = m.kronecker(&self.site(s).matrix());
        }
        m
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.n_sites() {
            write!(f, "{}", self.site(s).symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Sparse linear combination of Pauli words with complex coefficients.
///
/// Canonical form: each word appears at most once and no stored coefficient
/// has magnitude below the prune threshold. Values are immutable in practice:
/// all operations return new sums and are pure, so sharing across threads is
/// safe.
#[derive(Clone, PartialEq)]
pub struct PauliSum {
    n_sites: usize,
    terms: BTreeMap<PauliWord, Complex64>,
}

impl PauliSum {
    pub fn zero(n_sites: usize) -> PauliSum {
        PauliSum {
            n_sites,
            terms: BTreeMap::new(),
        }
    }

    /// Sum with a single word scaled by `coeff`.
    pub fn from_word(word: PauliWord, coeff: Complex64) -> PauliSum {
        let mut s = PauliSum::zero(word.n_sites());
        s.add_word(word, coeff);
        s
    }

    /// Convenience: real-coefficient term given as site operators.
    pub fn term(n_sites: usize, coeff: f64, sites: &[(usize, Pauli)]) -> Result<PauliSum> {
        let w = PauliWord::from_sites(n_sites, sites)?;
        Ok(PauliSum::from_word(w, Complex64::new(coeff, 0.0)))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliWord, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, word: &PauliWord) -> Complex64 {
        self.terms
            .get(word)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Add `coeff * word` in place, keeping canonical form.
    pub fn add_word(&mut self, word: PauliWord, coeff: Complex64) {
        debug_assert_eq!(word.n_sites(), self.n_sites);
        let entry = self.terms.entry(word).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() < DEFAULT_PRUNE_THRESHOLD {
            self.terms.remove(&word);
        }
    }

    /// Drop all coefficients with magnitude below `eps`.
    pub fn prune(mut self, eps: f64) -> PauliSum {
        self.terms.retain(|_, c| c.norm() >= eps);
        self
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut out = self.clone();
        for (w, c) in other.terms() {
            out.add_word(*w, *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut out = self.clone();
        for (w, c) in other.terms() {
            out.add_word(*w, -c);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        let mut out = PauliSum::zero(self.n_sites);
        for (w, c) in self.terms() {
            out.add_word(*w, c * factor);
        }
        out
    }

    pub fn scale_re(&self, factor: f64) -> PauliSum {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Full operator product `self * other` in canonical form.
    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut out = PauliSum::zero(self.n_sites);
        for (wa, ca) in self.terms() {
            for (wb, cb) in other.terms() {
                let (w, phase) = wa.multiply(wb)?;
                out.add_word(w, ca * cb * phase);
            }
        }
        Ok(out)
    }

    /// Commutator `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut out = PauliSum::zero(self.n_sites);
        for (wa, ca) in self.terms() {
            for (wb, cb) in other.terms() {
                if wa.commutes_with(wb) {
                    continue;
                }
                // Anticommuting words: ab = p*c, ba = -p*c, so [a,b] = 2p*c.
                let (w, phase) = wa.multiply(wb)?;
                out.add_word(w, ca * cb * phase * 2.0);
            }
        }
        Ok(out)
    }

    /// Normalized trace inner product `Tr[self * other] / 2^N`.
    ///
    /// By Pauli-word orthogonality this is the sum of products of matching
    /// coefficients (no conjugation).
    pub fn trace_inner(&self, other: &PauliSum) -> Result<Complex64> {
        self.check_sites(other)?;
        let (small, large) = if self.n_terms() <= other.n_terms() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, c) in small.terms() {
            if let Some(d) = large.terms.get(w) {
                acc += c * d;
            }
        }
        Ok(acc)
    }

    /// Maximum absolute imaginary part over all coefficients.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Whether all coefficients are real within `tol` (each Pauli word is
    /// Hermitian, so this is exactly Hermiticity of the sum).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// Keep only the real part of every coefficient.
    pub fn real_part(&self) -> PauliSum {
        let mut out = PauliSum::zero(self.n_sites);
        for (w, c) in self.terms() {
            out.add_word(*w, Complex64::new(c.re, 0.0));
        }
        out
    }

    /// Dense matrix with the default materialization cap.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n_sites > cap {
            return Err(ColdError::DenseCapExceeded {
                n_sites: self.n_sites,
                cap,
            });
        }
        let dim = 1usize << self.n_sites;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (w, c) in self.terms() {
            m += w.to_dense() * *c;
        }
        Ok(m)
    }

    fn check_sites(&self, other: &PauliSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(ColdError::SizeMismatch {
                expected: self.n_sites,
                got: other.n_sites,
            });
        }
        Ok(())
    }
}

/// Debug serialization, one term per line: "coeff_re coeff_im WORD".
impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (w, c) in self.terms() {
            writeln!(f, "{} {} {}", c.re, c.im, w)?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliSum(n={}):\n{}", self.n_sites, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn word(n: usize, sites: &[(usize, Pauli)]) -> PauliWord {
        PauliWord::from_sites(n, sites).unwrap()
    }

    /// Dense oracle for single-word products: multiply the Kronecker matrices.
    fn dense_product_phase(a: &PauliWord, b: &PauliWord) -> (PauliWord, Complex64) {
        let (w, _claimed) = a.multiply(b).unwrap();
        let product = a.to_dense() * b.to_dense();
        let wd = w.to_dense();
        // phase = Tr[wd^dagger * product] / 2^N
        let dim = wd.nrows();
        let mut phase = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                phase += wd[(i, j)].conj() * product[(i, j)];
            }
        }
        (w, phase / dim as f64)
    }

    #[test]
    fn single_site_table_matches_dense() {
        for a in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            for b in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
                let wa = word(1, &[(0, a)]);
                let wb = word(1, &[(0, b)]);
                let (w, p) = wa.multiply(&wb).unwrap();
                let (wo, po) = dense_product_phase(&wa, &wb);
                assert_eq!(w, wo);
                assert!((p - po).norm() < 1e-14, "{a:?}*{b:?}: {p} vs {po}");
            }
        }
    }

    #[test]
    fn x_times_y_is_iz() {
        let (w, p) = word(1, &[(0, Pauli::X)])
            .multiply(&word(1, &[(0, Pauli::Y)]))
            .unwrap();
        assert_eq!(w, word(1, &[(0, Pauli::Z)]));
        assert!((p - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn ix_squared_is_identity() {
        let ix = word(2, &[(1, Pauli::X)]);
        let (w, p) = ix.multiply(&ix).unwrap();
        assert!(w.is_identity());
        assert!((p - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn yz_times_zz_phase_from_dense_oracle() {
        // sigma^y * sigma^z = +i sigma^x on site 0, identity on site 1.
        let a = word(2, &[(0, Pauli::Y), (1, Pauli::Z)]);
        let b = word(2, &[(0, Pauli::Z), (1, Pauli::Z)]);
        let (wo, po) = dense_product_phase(&a, &b);
        assert_eq!(wo, word(2, &[(0, Pauli::X)]));
        assert!((po - c(0.0, 1.0)).norm() < 1e-13);
        let (w, p) = a.multiply(&b).unwrap();
        assert_eq!(w, wo);
        assert!((p - po).norm() < 1e-13);
    }

    #[test]
    fn commutator_of_hermitian_is_anti_hermitian() {
        let a = PauliSum::term(2, 0.7, &[(0, Pauli::X)]).unwrap();
        let b = PauliSum::term(2, -1.3, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let comm = a.commutator(&b).unwrap();
        // i*[A,B] should be Hermitian (all real coefficients).
        let i_comm = comm.scale(c(0.0, 1.0));
        assert!(i_comm.is_hermitian(1e-14));
        assert!(!comm.is_zero());
    }

    #[test]
    fn self_commutator_vanishes() {
        let mut a = PauliSum::term(3, 0.5, &[(0, Pauli::X), (1, Pauli::Y)]).unwrap();
        a = a
            .add(&PauliSum::term(3, -0.25, &[(2, Pauli::Z)]).unwrap())
            .unwrap();
        assert!(a.commutator(&a).unwrap().is_zero());
    }

    #[test]
    fn disjoint_support_commutes() {
        let a = PauliSum::term(2, 1.0, &[(0, Pauli::X)]).unwrap();
        let b = PauliSum::term(2, 1.0, &[(1, Pauli::Z)]).unwrap();
        assert!(a.commutator(&b).unwrap().is_zero());
    }

    #[test]
    fn first_order_agp_commutator_two_sites() {
        // Single-site rotation generator: i*[alpha*sigma^y_1, H] gives
        // 2*alpha*(-J*x1z2 + X*z1 - Z*x1). The z1x2 coupling term belongs to
        // the commutator of sigma^y_2, so the global generator
        // i*[alpha*(y1 + y2), H] carries both coupling words.
        let (jc, xc, zc, alpha) = (0.8, 1.7, -0.6, 0.37);
        let n = 2;
        let mut h = PauliSum::term(n, jc, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        for s in 0..n {
            h = h
                .add(&PauliSum::term(n, xc, &[(s, Pauli::X)]).unwrap())
                .unwrap();
            h = h
                .add(&PauliSum::term(n, zc, &[(s, Pauli::Z)]).unwrap())
                .unwrap();
        }

        let a1 = PauliSum::term(n, alpha, &[(0, Pauli::Y)]).unwrap();
        let got1 = a1.commutator(&h).unwrap().scale(c(0.0, 1.0));
        let mut want1 =
            PauliSum::term(n, -2.0 * alpha * jc, &[(0, Pauli::X), (1, Pauli::Z)]).unwrap();
        want1 = want1
            .add(&PauliSum::term(n, 2.0 * alpha * xc, &[(0, Pauli::Z)]).unwrap())
            .unwrap();
        want1 = want1
            .add(&PauliSum::term(n, -2.0 * alpha * zc, &[(0, Pauli::X)]).unwrap())
            .unwrap();
        let diff1 = got1.sub(&want1).unwrap();
        assert!(diff1.is_zero(), "single-site difference:\n{diff1:?}");

        let a_glob = a1
            .add(&PauliSum::term(n, alpha, &[(1, Pauli::Y)]).unwrap())
            .unwrap();
        let got = a_glob.commutator(&h).unwrap().scale(c(0.0, 1.0));
        let mut want = want1
            .add(&PauliSum::term(n, -2.0 * alpha * jc, &[(0, Pauli::Z), (1, Pauli::X)]).unwrap())
            .unwrap();
        want = want
            .add(&PauliSum::term(n, 2.0 * alpha * xc, &[(1, Pauli::Z)]).unwrap())
            .unwrap();
        want = want
            .add(&PauliSum::term(n, -2.0 * alpha * zc, &[(1, Pauli::X)]).unwrap())
            .unwrap();
        let diff = got.sub(&want).unwrap();
        assert!(diff.is_zero(), "global difference:\n{diff:?}");

        // Dense-commutator oracle for the same statement.
        let hd = h.to_dense().unwrap();
        let ad = a_glob.to_dense().unwrap();
        let dense_comm = (&ad * &hd - &hd * &ad) * c(0.0, 1.0);
        let diff_dense = (got.to_dense().unwrap() - dense_comm).norm();
        assert!(diff_dense < 1e-12);
    }

    #[test]
    fn trace_inner_orthonormality() {
        let x = PauliSum::term(1, 1.0, &[(0, Pauli::X)]).unwrap();
        let y = PauliSum::term(1, 1.0, &[(0, Pauli::Y)]).unwrap();
        assert!((x.trace_inner(&x).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(x.trace_inner(&y).unwrap().norm() < 1e-15);
    }

    #[test]
    fn dense_matrix_trivials() {
        let z = PauliSum::term(1, 1.0, &[(0, Pauli::Z)]).unwrap();
        let m = z.to_dense().unwrap();
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));
        let zz = PauliSum::term(2, 1.0, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let m = zz.to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let s = PauliSum::term(3, 1.0, &[(0, Pauli::X)]).unwrap();
        assert!(matches!(
            s.to_dense_with_cap(2),
            Err(ColdError::DenseCapExceeded { .. })
        ));
    }

    #[test]
    fn debug_serialization_format() {
        let mut s = PauliSum::zero(2);
        s.add_word(word(2, &[(0, Pauli::X), (1, Pauli::Z)]), c(0.25, -1.0));
        assert_eq!(s.to_string(), "0.25 -1 XZ\n");
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = PauliSum::term(2, 1.0, &[(0, Pauli::X)]).unwrap();
        let b = PauliSum::term(3, 1.0, &[(0, Pauli::X)]).unwrap();
        assert!(a.commutator(&b).is_err());
        assert!(a.trace_inner(&b).is_err());
        let wa = word(2, &[(0, Pauli::X)]);
        let wb = word(3, &[(0, Pauli::X)]);
        assert!(wa.multiply(&wb).is_err());
    }

    fn arb_word(n: usize) -> impl Strategy<Value = PauliWord> {
        prop::collection::vec(0u8..4, n).prop_map(move |codes| {
            let sites: Vec<(usize, Pauli)> = codes
                .iter()
                .enumerate()
                .map(|(s, &code)| (s, Pauli::from_code(code)))
                .collect();
            PauliWord::from_sites(n, &sites).unwrap()
        })
    }

    fn arb_sum(n: usize, terms: usize) -> impl Strategy<Value = PauliSum> {
        prop::collection::vec((arb_word(n), -2.0..2.0f64, -2.0..2.0f64), 1..=terms).prop_map(
            move |ts| {
                let mut s = PauliSum::zero(n);
                for (w, re, im) in ts {
                    s.add_word(w, c(re, im));
                }
                s
            },
        )
    }

    proptest! {
        #[test]
        fn multiply_is_associative_with_closed_phases(
            (a, b, d) in (2usize..=6).prop_flat_map(|n| (arb_word(n), arb_word(n), arb_word(n)))
        ) {
            let (ab, p_ab) = a.multiply(&b).unwrap();
            let (ab_d, p1) = ab.multiply(&d).unwrap();
            let (bd, p_bd) = b.multiply(&d).unwrap();
            let (a_bd, p2) = a.multiply(&bd).unwrap();
            prop_assert_eq!(ab_d, a_bd);
            let lhs = p_ab * p1;
            let rhs = p_bd * p2;
            prop_assert!((lhs - rhs).norm() < 1e-15);
            // Phase group closes in {1, i, -1, -i}.
            prop_assert!((lhs.norm() - 1.0).abs() < 1e-15);
            prop_assert!(lhs.re.abs() < 1e-15 || lhs.im.abs() < 1e-15);
        }

        #[test]
        fn commutator_antisymmetry(
            (a, b) in (2usize..=4).prop_flat_map(|n| (arb_sum(n, 4), arb_sum(n, 4)))
        ) {
            let ab = a.commutator(&b).unwrap();
            let ba = b.commutator(&a).unwrap();
            let sum = ab.add(&ba).unwrap();
            prop_assert!(sum.is_zero(), "not antisymmetric:\n{:?}", sum);
        }

        #[test]
        fn trace_inner_matches_dense(
            (a, b) in (2usize..=5).prop_flat_map(|n| (arb_sum(n, 5), arb_sum(n, 5)))
        ) {
            let ti = a.trace_inner(&b).unwrap();
            let prod = a.to_dense().unwrap() * b.to_dense().unwrap();
            let dim = prod.nrows();
            let mut tr = c(0.0, 0.0);
            for i in 0..dim {
                tr += prod[(i, i)];
            }
            tr /= dim as f64;
            prop_assert!((ti - tr).norm() < 1e-12, "{} vs {}", ti, tr);
        }

        #[test]
        fn hermitian_commutator_times_i_is_real(
            (a, b) in (2usize..=4).prop_flat_map(|n| (arb_sum(n, 4), arb_sum(n, 4)))
        ) {
            let ah = a.real_part();
            let bh = b.real_part();
            let ic = ah.commutator(&bh).unwrap().scale(c(0.0, 1.0));
            prop_assert!(ic.max_imag() < 1e-14);
        }

        #[test]
        fn random_sum_trace_identity(s in (2usize..=3).prop_flat_map(|n| arb_sum(n, 6))) {
            // trace_inner(A, A) equals Tr[dense^2]/2^N.
            let ti = s.trace_inner(&s).unwrap();
            let d = s.to_dense().unwrap();
            let sq = &d * &d;
            let mut tr = c(0.0, 0.0);
            for i in 0..sq.nrows() {
                tr += sq[(i, i)];
            }
            tr /= sq.nrows() as f64;
            prop_assert!((ti - tr).norm() < 1e-12);
        }
    }
}
