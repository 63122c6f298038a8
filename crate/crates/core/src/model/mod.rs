//! State-space and polynomial model foundation: controllability, the
//! Brunovsky (controllable companion) transform, pole placement and
//! Lyapunov certificates.

pub mod linalg;
mod lyapunov;
mod poly;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub use lyapunov::{lyapunov_solve, LyapunovCertificate};
pub use poly::{poly_eval_derivative_chain, PolyMatrix, Polynomial};

/// Singular-value ratio below which the controllability matrix is treated as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Single-input LTI model `ẋ = A x + B u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let p = a.nrows();
        if p == 0 {
            return Err(Error::invalid("state dimension must be at least 1"));
        }
        if a.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "A columns",
                expected: p,
                got: a.ncols(),
            });
        }
        if b.len() != p {
            return Err(Error::DimensionMismatch {
                what: "B length",
                expected: p,
                got: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("model entries must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `A x + B u`.
    pub fn drift(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// `A − B K` for a row gain `K`.
    pub fn closed_loop(&self, k: &DVector<f64>) -> DMatrix<f64> {
        &self.a - &self.b * k.transpose()
    }
}

/// Krylov matrix `[B, AB, …, A^{p−1}B]`.
pub fn controllability_matrix(model: &StateSpaceModel) -> DMatrix<f64> {
    let p = model.dim();
    let mut gamma = DMatrix::zeros(p, p);
    let mut col = model.b.clone();
    for j in 0..p {
        gamma.set_column(j, &col);
        col = &model.a * col;
    }
    gamma
}

/// Similarity `x̃ = T x` taking the model to controllable companion form
/// `T A T⁻¹ = [0 I; a_cᵀ]`, `T B = e_p`.
#[derive(Clone, Debug)]
pub struct BrunovskyTransform {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// Last row of the companion matrix.
    pub a_c: DVector<f64>,
}

impl BrunovskyTransform {
    pub fn dim(&self) -> usize {
        self.a_c.len()
    }

    /// Max-abs deviation of `T·T⁻¹` from identity.
    pub fn inverse_residual(&self) -> f64 {
        let p = self.dim();
        linalg::max_abs(&(&self.t * &self.t_inv - DMatrix::identity(p, p)))
    }

    /// Max-abs deviation of `T A T⁻¹` from the companion pattern, relative to
    /// the largest companion entry.
    pub fn companion_residual(&self, model: &StateSpaceModel) -> f64 {
        let p = self.dim();
        let at = &self.t * model.a() * &self.t_inv;
        let mut expected = DMatrix::zeros(p, p);
        for i in 0..p - 1 {
            expected[(i, i + 1)] = 1.0;
        }
        for j in 0..p {
            expected[(p - 1, j)] = self.a_c[j];
        }
        linalg::max_abs(&(at - &expected)) / linalg::max_abs(&expected).max(1.0)
    }

    /// Max-abs deviation of `T B` from `e_p`.
    pub fn input_residual(&self, model: &StateSpaceModel) -> f64 {
        let p = self.dim();
        let mut e = DVector::zeros(p);
        e[p - 1] = 1.0;
        (&self.t * model.b() - e).amax()
    }
}

pub fn to_brunovsky(model: &StateSpaceModel) -> Result<BrunovskyTransform> {
    let p = model.dim();
    let gamma = controllability_matrix(model);
    let ratio = linalg::singular_value_ratio(&gamma);
    if ratio <= RANK_TOLERANCE {
        return Err(Error::NotControllable { ratio });
    }
    let gamma_inv = gamma
        .try_inverse()
        .ok_or(Error::NotControllable { ratio })?;
    let mut row = gamma_inv.row(p - 1).into_owned();
    let mut t = DMatrix::zeros(p, p);
    for i in 0..p {
        t.set_row(i, &row);
        row = &row * model.a();
    }
    // q ⟂ B, AB, …, A^{p−2}B and q·A^{p−1}B = 1, so T·B = e_p up to rounding;
    // the rescale only removes that rounding.
    let tb_last = (t.row(p - 1) * model.b())[0];
    t /= tb_last;
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(Error::NotControllable { ratio })?;
    let companion = &t * model.a() * &t_inv;
    let a_c = companion.row(p - 1).transpose();
    Ok(BrunovskyTransform { t, t_inv, a_c })
}

/// Real ascending coefficients `α_0 … α_{p−1}` of the monic polynomial with
/// the given roots. Roots must be closed under conjugation.
pub fn monic_from_roots(roots: &[Complex<f64>]) -> Result<Vec<f64>> {
    let mut used = vec![false; roots.len()];
    for (i, z) in roots.iter().enumerate() {
        if used[i] || z.im.abs() <= 1e-12 * z.norm().max(1.0) {
            continue;
        }
        let partner = (0..roots.len()).find(|&j| {
            j != i && !used[j] && (roots[j] - z.conj()).norm() <= 1e-9 * z.norm().max(1.0)
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(Error::invalid(format!(
                    "pole {z} has no conjugate partner in the requested set"
                )))
            }
        }
    }
    let mut c = vec![Complex::new(1.0, 0.0)];
    for z in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * z;
        }
        c = next;
    }
    Ok(c[..roots.len()].iter().map(|z| z.re).collect())
}

/// State feedback `K` with `eig(A − B K)` equal to `desired`, via Ackermann's
/// formula in Brunovsky coordinates.
pub fn place_poles(model: &StateSpaceModel, desired: &[Complex<f64>]) -> Result<DVector<f64>> {
    let p = model.dim();
    if desired.len() != p {
        return Err(Error::DimensionMismatch {
            what: "desired pole count",
            expected: p,
            got: desired.len(),
        });
    }
    let alpha = monic_from_roots(desired)?;
    let tr = to_brunovsky(model)?;
    let k_tilde = DVector::from_iterator(p, (0..p).map(|j| tr.a_c[j] + alpha[j]));
    Ok((k_tilde.transpose() * &tr.t).transpose())
}

/// Spectrum of `A − BK` read off its companion form. Repeated poles split
/// by O(√ε) when QR runs on `A − BK` directly; the companion matrix of the
/// characteristic polynomial keeps them several digits tighter.
pub fn closed_loop_poles(model: &StateSpaceModel, k: &DVector<f64>) -> Result<Vec<Complex<f64>>> {
    let p = model.dim();
    let tr = to_brunovsky(model)?;
    let row = (tr.t.row(p - 1) * model.closed_loop(k) * &tr.t_inv).transpose();
    let mut companion = DMatrix::zeros(p, p);
    for i in 0..p - 1 {
        companion[(i, i + 1)] = 1.0;
    }
    companion.set_row(p - 1, &row.transpose());
    Ok(linalg::eigenvalues(&companion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn real(v: &[f64]) -> Vec<Complex<f64>> {
        v.iter().map(|&r| Complex::new(r, 0.0)).collect()
    }

    #[test]
    fn repeated_poles_from_companion_form() {
        let a = dmatrix![0.0, 1.0, 0.0, 0.0; -1000.0, -10.0, 1000.0, 0.0; 0.0, 0.0, 0.0, 1.0; 400.0, 0.0, -400.0, -5.0];
        let m = StateSpaceModel::new(a, dvector![0.0, 10.0, 0.0, 0.0]).unwrap();
        let want = real(&[-25.0, -25.0, -30.0, -30.0]);
        let k = place_poles(&m, &want).unwrap();
        let got = closed_loop_poles(&m, &k).unwrap();
        assert!(linalg::spectrum_mismatch(&got, &want) < 1e-6);
        let direct = linalg::eigenvalues(&m.closed_loop(&k));
        assert!(linalg::spectrum_mismatch(&direct, &want) < 1e-4);
    }

    fn double_integrator() -> StateSpaceModel {
        StateSpaceModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dvector![0.0, 1.0]).unwrap()
    }

    /// Rank by Gaussian elimination with partial pivoting.
    fn rank_by_elimination(m: &DMatrix<f64>, tol: f64) -> usize {
        let mut a = m.clone();
        let (nr, nc) = a.shape();
        let scale = linalg::max_abs(&a).max(1e-300);
        let mut rank = 0;
        for c in 0..nc {
            if rank == nr {
                break;
            }
            let piv = (rank..nr)
                .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
                .unwrap();
            if a[(piv, c)].abs() <= tol * scale {
                continue;
            }
            a.swap_rows(rank, piv);
            for r in rank + 1..nr {
                let f = a[(r, c)] / a[(rank, c)];
                for cc in c..nc {
                    a[(r, cc)] -= f * a[(rank, cc)];
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn rejects_malformed_models() {
        assert!(StateSpaceModel::new(DMatrix::zeros(2, 3), dvector![0.0, 1.0]).is_err());
        assert!(StateSpaceModel::new(DMatrix::zeros(2, 2), dvector![0.0]).is_err());
        assert!(StateSpaceModel::new(dmatrix![f64::NAN], dvector![1.0]).is_err());
        assert!(StateSpaceModel::new(DMatrix::zeros(0, 0), DVector::zeros(0)).is_err());
    }

    #[test]
    fn controllability_matrix_examples() {
        let m = StateSpaceModel::new(DMatrix::zeros(2, 2), dvector![1.0, 0.0]).unwrap();
        assert_eq!(controllability_matrix(&m), dmatrix![1.0, 0.0; 0.0, 0.0]);
        assert_eq!(controllability_matrix(&double_integrator()), dmatrix![0.0, 1.0; 1.0, 0.0]);
    }

    #[test]
    fn two_mass_controllability_has_full_rank() {
        let model = crate::plant::build_nominal_model(&crate::plant::NominalParams::uncertain(
            &crate::plant::PlantParams::benchmark(),
        ))
        .unwrap();
        let gamma = controllability_matrix(&model);
        assert_eq!(rank_by_elimination(&gamma, 1e-12), 4);
        assert!(linalg::singular_value_ratio(&gamma) > RANK_TOLERANCE);
    }

    #[test]
    fn companion_form_is_a_fixed_point() {
        let m = StateSpaceModel::new(
            dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; -6.0, -11.0, -6.0],
            dvector![0.0, 0.0, 1.0],
        )
        .unwrap();
        let tr = to_brunovsky(&m).unwrap();
        assert!((&tr.t - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
        assert_eq!(tr.a_c, dvector![-6.0, -11.0, -6.0]);
        let di = to_brunovsky(&double_integrator()).unwrap();
        assert!((&di.t - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn uncontrollable_model_is_rejected() {
        let m = StateSpaceModel::new(dmatrix![-1.0, 0.0; 0.0, -2.0], dvector![1.0, 0.0]).unwrap();
        assert!(matches!(to_brunovsky(&m), Err(Error::NotControllable { .. })));
        assert!(matches!(
            place_poles(&m, &real(&[-1.0, -2.0])),
            Err(Error::NotControllable { .. })
        ));
    }

    #[test]
    fn two_mass_transform_satisfies_invariants() {
        let model = crate::plant::build_nominal_model(&crate::plant::NominalParams::uncertain(
            &crate::plant::PlantParams::benchmark(),
        ))
        .unwrap();
        let tr = to_brunovsky(&model).unwrap();
        assert!(tr.inverse_residual() < 1e-9);
        assert!(tr.companion_residual(&model) < 1e-8);
        assert!(tr.input_residual(&model) < 1e-8);
    }

    #[test]
    fn double_integrator_gain() {
        let k = place_poles(&double_integrator(), &real(&[-1.0, -1.0])).unwrap();
        assert!((k - dvector![1.0, 2.0]).amax() < 1e-12);
    }

    #[test]
    fn complex_poles_need_conjugates() {
        let di = double_integrator();
        let ok = [Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0)];
        let k = place_poles(&di, &ok).unwrap();
        assert!(linalg::spectrum_mismatch(&linalg::eigenvalues(&di.closed_loop(&k)), &ok) < 1e-9);
        let bad = [Complex::new(-1.0, 2.0), Complex::new(-1.0, 2.0)];
        assert!(matches!(place_poles(&di, &bad), Err(Error::InvalidParameter(_))));
        assert!(place_poles(&di, &real(&[-1.0])).is_err());
    }

    fn random_model(p: usize, entries: Vec<f64>) -> StateSpaceModel {
        let a = DMatrix::from_row_slice(p, p, &entries[..p * p]);
        let b = DVector::from_row_slice(&entries[p * p..p * p + p]);
        StateSpaceModel::new(a, b).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn similarity_preserves_spectrum(
            p in 1usize..=6,
            entries in prop::collection::vec(-5.0f64..5.0, 42),
        ) {
            let m = random_model(p, entries);
            let gamma = controllability_matrix(&m);
            prop_assume!(linalg::singular_value_ratio(&gamma) > 1e-6);
            let tr = to_brunovsky(&m).unwrap();
            let orig = linalg::eigenvalues(m.a());
            let sim = linalg::eigenvalues(&(&tr.t * m.a() * &tr.t_inv));
            let scale = orig.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for z in &orig {
                let d = sim.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-6 * scale, "eigenvalue {z} moved by {d}");
            }
        }

        #[test]
        fn pole_placement_is_sound(
            p in 1usize..=5,
            entries in prop::collection::vec(-5.0f64..5.0, 30),
            poles in prop::collection::vec(-8.0f64..-0.5, 5),
        ) {
            let m = random_model(p, entries);
            prop_assume!(linalg::singular_value_ratio(&controllability_matrix(&m)) > 1e-4);
            let want = real(&poles[..p]);
            let k = place_poles(&m, &want).unwrap();
            let got = linalg::eigenvalues(&m.closed_loop(&k));
            // Distinct random poles are well conditioned; near-coincident
            // ones are only determined to sqrt(eps).
            let sep = poles[..p].iter().enumerate()
                .flat_map(|(i, a)| poles[..p].iter().skip(i + 1).map(move |b| (a - b).abs()))
                .fold(f64::INFINITY, f64::min);
            prop_assume!(sep > 0.05);
            prop_assert!(linalg::spectrum_mismatch(&got, &want) < 1e-6,
                "poles {want:?} got {got:?}");
        }
    }
}
