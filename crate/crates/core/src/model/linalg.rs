//! Dense helpers on top of nalgebra: balanced eigenvalues, rank ratio,
//! multiset matching of spectra.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

/// Diagonal similarity scaling (Parlett–Reinsch, powers of two) so that row
/// and column norms are comparable. Leaves the spectrum unchanged and makes
/// the QR iteration far more accurate on matrices like the observer's Ψ,
/// whose entries span many orders of magnitude.
pub fn balance(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
    m
}

/// QR sweeps allowed per attempt before the deflation tolerance is relaxed.
const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of the balanced matrix. Tight eigenvalue clusters can stall
/// the QR deflation test at machine precision, so the tolerance is relaxed
/// step by step; NaNs are returned if nothing converges.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let balanced = balance(a);
    for eps in [f64::EPSILON, 16.0 * f64::EPSILON, 1e-13, 1e-11] {
        if let Some(schur) = Schur::try_new(balanced.clone(), eps, SCHUR_MAX_ITER) {
            return schur.complex_eigenvalues().iter().copied().collect();
        }
    }
    vec![Complex::new(f64::NAN, f64::NAN); a.nrows()]
}

pub fn max_real_part(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ratio of smallest to largest singular value; zero for the zero matrix.
pub fn singular_value_ratio(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Worst relative distance after greedily pairing each requested value with
/// its nearest unused counterpart. Returns `f64::INFINITY` on length mismatch.
pub fn spectrum_mismatch(got: &[Complex<f64>], want: &[Complex<f64>]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; got.len()];
    let mut worst: f64 = 0.0;
    for w in want {
        let (idx, dist) = got
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, g)| (i, (g - w).norm()))
            .fold((usize::MAX, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            });
        used[idx] = true;
        worst = worst.max(dist / w.norm().max(1e-300));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustered_spectrum_terminates() {
        // Perturbed observer-like chain: stalls unbounded QR at eps.
        let (l0, l1, l2) = (1e9, 3.03e6, 3000.0);
        let mut m = DMatrix::zeros(6, 6);
        for (i, g) in [l2, l1, l0].iter().enumerate() {
            m[(2 * i, 0)] = -g;
            m[(2 * i + 1, 1)] = -g;
        }
        for r in 0..4 {
            m[(r, r + 2)] = 1.0;
        }
        let eig = eigenvalues(&m);
        assert_eq!(eig.len(), 6);
        assert!(eig.iter().all(|z| z.re.is_finite() && z.re < 0.0), "{eig:?}");
    }

    #[test]
    fn balancing_preserves_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e4, 0.0, 1e-4, 3.0]);
        let b = balance(&a);
        let ea = a.complex_eigenvalues();
        let eb: Vec<_> = b.complex_eigenvalues().iter().copied().collect();
        assert!(spectrum_mismatch(&eb, ea.as_slice()) < 1e-9);
        assert!(max_abs(&b) < max_abs(&a));
    }

    #[test]
    fn rank_ratio_detects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(singular_value_ratio(&a) < 1e-12);
        assert!((singular_value_ratio(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_pairs_repeated_values() {
        let want = [Complex::new(-1.0, 0.0), Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)];
        let got = [Complex::new(-2.0, 0.0), Complex::new(-1.0, 1e-8), Complex::new(-1.0, -1e-8)];
        assert!(spectrum_mismatch(&got, &want) < 2e-8);
        assert!(spectrum_mismatch(&got[..2], &want).is_infinite());
    }
}
