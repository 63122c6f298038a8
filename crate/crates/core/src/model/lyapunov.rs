use nalgebra::{DMatrix, DVector};

use super::linalg;
use crate::error::{Error, Result};

/// Solution `P` of `A_clᵀ P + P A_cl = −Q` together with the spectral
/// quantities the ultimate-bound certificate needs.
#[derive(Clone, Debug)]
pub struct LyapunovCertificate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub lambda_min_q: f64,
    pub lambda_max_abs_p: f64,
}

impl LyapunovCertificate {
    /// `‖A_clᵀP + PA_cl + Q‖_max`.
    pub fn residual(&self, a_cl: &DMatrix<f64>) -> f64 {
        linalg::max_abs(&(a_cl.transpose() * &self.p + &self.p * a_cl + &self.q))
    }

    /// `V(ξ) = ξᵀ P ξ`.
    pub fn value(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&(&self.p * xi))
    }
}

fn symmetric_spectrum(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().symmetric_eigenvalues()
}

/// Solves the continuous Lyapunov equation through its vectorized
/// (Kronecker) form with a dense LU factorization.
pub fn lyapunov_solve(a_cl: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovCertificate> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "closed-loop matrix columns",
            expected: n,
            got: a_cl.ncols(),
        });
    }
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "Q dimension",
            expected: n,
            got: q.nrows(),
        });
    }
    if linalg::max_abs(&(q - q.transpose())) > 1e-12 * linalg::max_abs(q).max(1.0) {
        return Err(Error::invalid("Q must be symmetric"));
    }
    let q_eigs = symmetric_spectrum(q);
    if q_eigs.min() <= 0.0 {
        return Err(Error::invalid("Q must be positive definite"));
    }
    let max_real = linalg::max_real_part(a_cl);
    if max_real >= -1e-9 {
        return Err(Error::NotHurwitz { max_real });
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let at = a_cl.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice((-q).as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotHurwitz { max_real })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;

    let p_eigs = symmetric_spectrum(&p);
    if p_eigs.min() <= 0.0 {
        return Err(Error::invalid("Lyapunov solution is not positive definite"));
    }
    Ok(LyapunovCertificate {
        lambda_min_q: q_eigs.min(),
        lambda_max_abs_p: p_eigs.amax(),
        p,
        q: q.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn decoupled_scalar_case() {
        let cert = lyapunov_solve(&(-DMatrix::identity(2, 2)), &DMatrix::identity(2, 2)).unwrap();
        assert!((&cert.p - DMatrix::<f64>::identity(2, 2) * 0.5).amax() < 1e-14);
        assert_eq!(cert.lambda_min_q, 1.0);
        assert!((cert.lambda_max_abs_p - 0.5).abs() < 1e-14);
    }

    #[test]
    fn residual_is_small_for_companion_matrix() {
        let a = dmatrix![0.0, 1.0; -2.0, -3.0];
        let q = DMatrix::identity(2, 2);
        let cert = lyapunov_solve(&a, &q).unwrap();
        assert!(cert.residual(&a) < 1e-8 * linalg::max_abs(&q));
        assert!((&cert.p - cert.p.transpose()).amax() == 0.0);
    }

    #[test]
    fn marginal_matrix_is_rejected() {
        let a = dmatrix![0.0, 1.0; 0.0, -1.0];
        assert!(matches!(
            lyapunov_solve(&a, &DMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn indefinite_q_is_rejected() {
        let q = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(lyapunov_solve(&(-DMatrix::identity(2, 2)), &q).is_err());
    }

    /// `P = ∫₀^∞ exp(Aᵀt) Q exp(At) dt` by composite Simpson quadrature.
    fn gramian_by_quadrature(a: &DMatrix<f64>, q: &DMatrix<f64>, horizon: f64, n: usize) -> DMatrix<f64> {
        let h = horizon / n as f64;
        let step = (a * h).exp();
        let mut e = DMatrix::identity(2, 2);
        let mut acc = DMatrix::zeros(2, 2);
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += e.transpose() * q * &e * w;
            e = &e * &step;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn matches_integral_definition() {
        let cases = [
            (dmatrix![0.0, 1.0; -2.0, -3.0], dmatrix![1.0, 0.0; 0.0, 1.0]),
            (dmatrix![-1.0, 4.0; -0.5, -0.3], dmatrix![2.0, 0.5; 0.5, 1.0]),
            (dmatrix![-3.0, 0.0; 1.0, -0.7], dmatrix![1.0, -0.2; -0.2, 3.0]),
        ];
        for (a, q) in cases {
            let cert = lyapunov_solve(&a, &q).unwrap();
            let oracle = gramian_by_quadrature(&a, &q, 60.0, 60_000);
            assert!((&cert.p - &oracle).amax() < 1e-4, "P {} vs {}", cert.p, oracle);
        }
    }
}
