//! Univariate polynomials in the differential operator `s` and small
//! polynomial matrices over them.
//!
//! Coefficients are stored in ascending powers. Applying a polynomial to a
//! signal means contracting its coefficients against the signal's
//! time-derivative stack `(y, ẏ, ÿ, ...)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c·s^n`.
    pub fn monomial(c: f64, n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Zero every coefficient below `tol` in magnitude, then trim.
    pub fn chop(&self, tol: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|&c| if c.abs() <= tol { 0.0 } else { c })
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// Polynomial long division, `self = q·d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        let dd = d
            .degree()
            .ok_or_else(|| Error::SingularChannel("division by the zero polynomial".into()))?;
        let lead = d.leading();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return Ok((Polynomial::zero(), Polynomial::zero()));
        };
        if nd < dd {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let mut quot = vec![0.0; nd - dd + 1];
        for i in (0..=nd - dd).rev() {
            let c = rem[i + dd] / lead;
            quot[i] = c;
            for (j, &dc) in d.coeffs.iter().enumerate() {
                rem[i + j] -= c * dc;
            }
            rem[i + dd] = 0.0;
        }
        rem.truncate(dd);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// Exact division; fails when the remainder is not negligible relative to
    /// the dividend's coefficients.
    pub fn div_exact(&self, d: &Polynomial) -> Result<Polynomial> {
        let (q, r) = self.div_rem(d)?;
        let scale = self.max_abs_coeff().max(f64::MIN_POSITIVE);
        if r.max_abs_coeff() > 1e-12 * scale {
            return Err(Error::SingularChannel(format!(
                "({self}) is not divisible by ({d}) over polynomials"
            )));
        }
        Ok(q)
    }

    /// Apply the polynomial in `s` to a signal given its derivative stack:
    /// `Σ coeffs[i] · derivs[i]`.
    pub fn apply(&self, derivs: &[f64]) -> Result<f64> {
        if derivs.len() < self.coeffs.len() {
            return Err(Error::InsufficientDerivatives {
                what: format!("polynomial of degree {}", self.coeffs.len() - 1),
                required: self.coeffs.len() - 1,
                available: derivs.len().saturating_sub(1),
            });
        }
        Ok(self.coeffs.iter().zip(derivs).map(|(c, y)| c * y).sum())
    }

    /// Like [`apply`](Self::apply) but on the stack shifted by `shift`
    /// derivative orders, i.e. applies `s^shift · self`.
    pub fn apply_shifted(&self, derivs: &[f64], shift: usize) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if derivs.len() < self.coeffs.len() + shift {
            return Err(Error::InsufficientDerivatives {
                what: format!("s^{shift} times a polynomial of degree {}", self.coeffs.len() - 1),
                required: self.coeffs.len() - 1 + shift,
                available: derivs.len().saturating_sub(1),
            });
        }
        self.apply(&derivs[shift..])
    }
}

/// Free-function form of [`Polynomial::apply`].
pub fn poly_eval_derivative_chain(pol: &Polynomial, signal_derivs: &[f64]) -> Result<f64> {
    pol.apply(signal_derivs)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match i {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}·s")?,
                _ => write!(f, "{a}·s^{i}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Rectangular matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Polynomial::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if nr == 0 || nc == 0 {
            return Err(Error::invalid("polynomial matrix must be non-empty"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != nc) {
            return Err(Error::DimensionMismatch {
                what: "polynomial matrix row",
                expected: nc,
                got: bad.len(),
            });
        }
        Ok(Self {
            rows: nr,
            cols: nc,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn column(entries: Vec<Polynomial>) -> Result<Self> {
        Self::from_rows(entries.into_iter().map(|p| vec![p]).collect())
    }

    pub fn row(entries: Vec<Polynomial>) -> Result<Self> {
        Self::from_rows(vec![entries])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Polynomial {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: Polynomial) {
        self.entries[r * self.cols + c] = p;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).clone());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> Result<PolyMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                what: "polynomial matrix product",
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Polynomial::zero();
                for k in 0..self.cols {
                    acc = &acc + &(self.get(r, k) * rhs.get(k, c));
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &PolyMatrix) -> Result<PolyMatrix> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::DimensionMismatch {
                what: "polynomial matrix difference",
                expected: self.rows * self.cols,
                got: rhs.rows * rhs.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.scale(k)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Polynomial::is_zero)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |m, p| m.max(p.max_abs_coeff()))
    }

    /// Highest degree over all cells; `None` when every cell is zero.
    pub fn max_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(Polynomial::degree).max()
    }

    /// Determinant, only for 1×1 and 2×2.
    pub fn det2(&self) -> Result<Polynomial> {
        match (self.rows, self.cols) {
            (1, 1) => Ok(self.get(0, 0).clone()),
            (2, 2) => Ok(&(self.get(0, 0) * self.get(1, 1)) - &(self.get(0, 1) * self.get(1, 0))),
            (r, _) => Err(Error::UnsupportedDimension {
                what: "polynomial determinant",
                got: r,
                supported: 2,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    #[test]
    fn zero_polynomial_has_no_degree() {
        assert_eq!(Polynomial::zero().degree(), None);
        assert_eq!(p(&[0.0, 0.0]).degree(), None);
        assert_eq!(p(&[1.0, 2.0, 0.0]).degree(), Some(1));
    }

    #[test]
    fn derivative_chain_examples() {
        assert_eq!(poly_eval_derivative_chain(&p(&[1.0]), &[3.0, 7.0]).unwrap(), 3.0);
        let s2 = Polynomial::monomial(1.0, 2);
        assert_eq!(s2.apply(&[0.0, 0.0, 5.0]).unwrap(), 5.0);
        assert_eq!(Polynomial::zero().apply(&[]).unwrap(), 0.0);
    }

    #[test]
    fn derivative_chain_rejects_short_stack() {
        let s2 = Polynomial::monomial(1.0, 2);
        assert!(matches!(
            s2.apply(&[1.0, 2.0]),
            Err(Error::InsufficientDerivatives { required: 2, available: 1, .. })
        ));
    }

    #[test]
    fn shifted_application_is_multiplication_by_s() {
        let q = p(&[1.0, 2.0]);
        let stack = [1.0, 10.0, 100.0];
        let direct = (&q * &Polynomial::monomial(1.0, 1)).apply(&stack).unwrap();
        assert_eq!(q.apply_shifted(&stack, 1).unwrap(), direct);
    }

    #[test]
    fn division_recovers_factor() {
        let a = p(&[1.0, 1.0]);
        let b = p(&[-2.0, 0.0, 3.0]);
        let q = (&a * &b).div_exact(&a).unwrap();
        assert_eq!(q, b);
        assert!(p(&[1.0, 0.0, 1.0]).div_exact(&p(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(p(&[0.0, -1.0, 2.0]).to_string(), "2·s^2 - 1·s");
    }

    #[test]
    fn matrix_product_and_transpose() {
        let a = PolyMatrix::from_rows(vec![
            vec![p(&[0.0, 1.0]), p(&[1.0])],
            vec![p(&[2.0]), p(&[0.0, 0.0, 1.0])],
        ])
        .unwrap();
        let v = PolyMatrix::column(vec![p(&[1.0]), p(&[0.0, 1.0])]).unwrap();
        let av = a.mul(&v).unwrap();
        assert_eq!(av.get(0, 0), &p(&[0.0, 2.0]));
        assert_eq!(av.get(1, 0), &p(&[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(a.transpose().get(0, 1), &p(&[2.0]));
        assert!(a.mul(&a.transpose().mul(&v).unwrap().transpose()).is_err());
    }

    proptest! {
        #[test]
        fn evaluation_is_a_ring_homomorphism(
            a in prop::collection::vec(-5.0f64..5.0, 0..5),
            b in prop::collection::vec(-5.0f64..5.0, 0..5),
            s in -2.0f64..2.0,
        ) {
            let (a, b) = (Polynomial::new(a), Polynomial::new(b));
            let prod = (&a * &b).eval(s);
            prop_assert!((prod - a.eval(s) * b.eval(s)).abs() < 1e-9 * (1.0 + prod.abs()));
            let sum = (&a + &b).eval(s);
            prop_assert!((sum - a.eval(s) - b.eval(s)).abs() < 1e-9 * (1.0 + sum.abs()));
        }

        #[test]
        fn long_division_identity(
            a in prop::collection::vec(-5.0f64..5.0, 1..6),
            d in prop::collection::vec(0.5f64..5.0, 1..4),
        ) {
            let (a, d) = (Polynomial::new(a), Polynomial::new(d));
            let (q, r) = a.div_rem(&d).unwrap();
            let back = &(&q * &d) + &r;
            for i in 0..a.coeffs().len() {
                prop_assert!((back.coeff(i) - a.coeff(i)).abs() < 1e-8 * (1.0 + a.max_abs_coeff() * q.max_abs_coeff()));
            }
            prop_assert!(r.degree().map_or(true, |dr| dr < d.degree().unwrap()));
        }
    }
}
