//! k-th order disturbance observer in state space.
//!
//! For the nominal model `ẋ = Aₙx + Bₙu − τ` the observer keeps k+1
//! auxiliary estimates `ẑ_j ≈ z_j = g_j x + τ^{(j)}` and recovers
//! `τ̂^{(j)} = ẑ_j − g_j x`.
//!
//! Gains are stored as the coefficients `L_0 … L_k` of the error
//! characteristic polynomial `λ^{k+1} + L_k λ^k + … + L_1 λ + L_0`. The
//! auxiliary variable of order j uses the chain gain `g_j = L_{k−j}`: that
//! is the assignment for which the block-companion error matrix Ψ has exactly
//! this characteristic polynomial (and it keeps units consistent, `g_0` being
//! a rate and `g_k` a rate to the power k+1).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{linalg, Polynomial, StateSpaceModel};

/// Which first term the auxiliary dynamics use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverForm {
    /// `−g_j ẑ_0`, consistent with differentiating `z_j = g_j x + τ^{(j)}`.
    #[default]
    Derived,
    /// `−g_j ẑ_j`: each stage couples to its own estimate. Not exact for
    /// k ≥ 1; kept for comparison.
    StageCoupled,
}

#[derive(Clone, Debug)]
pub struct ObserverConfig {
    gains: Vec<f64>,
    model: StateSpaceModel,
    form: ObserverForm,
}

/// `L_j = C(k+1, j) · λ^{k+1−j}`: every root of the error polynomial at −λ.
///
/// # Panics
/// If `lambda_dob` is not strictly positive and finite.
pub fn tune_gains_repeated(k: usize, lambda_dob: f64) -> Vec<f64> {
    assert!(
        lambda_dob > 0.0 && lambda_dob.is_finite(),
        "observer bandwidth must be positive, got {lambda_dob}"
    );
    let n = k + 1;
    let mut binom = 1.0f64;
    (0..n)
        .map(|j| {
            let l = binom * lambda_dob.powi((n - j) as i32);
            binom = binom * (n - j) as f64 / (j + 1) as f64;
            l
        })
        .collect()
}

impl ObserverConfig {
    pub fn new(model: StateSpaceModel, gains: Vec<f64>, form: ObserverForm) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("observer needs at least one gain"));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("observer gains must be finite"));
        }
        let cfg = Self { gains, model, form };
        let max_real = linalg::max_real_part(&cfg.companion());
        if max_real >= 0.0 {
            return Err(Error::invalid(format!(
                "observer characteristic polynomial {} is not Hurwitz (max root real part {max_real:.3e})",
                cfg.characteristic_polynomial()
            )));
        }
        Ok(cfg)
    }

    pub fn repeated(model: StateSpaceModel, k: usize, lambda_dob: f64) -> Result<Self> {
        if !(lambda_dob > 0.0 && lambda_dob.is_finite()) {
            return Err(Error::invalid(format!(
                "observer bandwidth must be positive, got {lambda_dob}"
            )));
        }
        Self::new(model, tune_gains_repeated(k, lambda_dob), ObserverForm::Derived)
    }

    pub fn with_form(mut self, form: ObserverForm) -> Self {
        self.form = form;
        self
    }

    /// Observer order k.
    pub fn order(&self) -> usize {
        self.gains.len() - 1
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn form(&self) -> ObserverForm {
        self.form
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Gain multiplying x in `z_j = g_j x + τ^{(j)}`.
    pub fn chain_gain(&self, j: usize) -> f64 {
        self.gains[self.order() - j]
    }

    /// `λ^{k+1} + L_k λ^k + … + L_0`, ascending.
    pub fn characteristic_polynomial(&self) -> Polynomial {
        let mut c = self.gains.clone();
        c.push(1.0);
        Polynomial::new(c)
    }

    /// Scalar (p = 1) version of Ψ.
    fn companion(&self) -> DMatrix<f64> {
        let n = self.gains.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, 0)] = -self.chain_gain(j);
            if j + 1 < n {
                m[(j, j + 1)] = 1.0;
            }
        }
        m
    }

    /// Flattened derivative of the stacked auxiliary state `z = [ẑ_0; …; ẑ_k]`.
    pub(crate) fn derivatives_into(&self, z: &[f64], x: &[f64], u: f64, out: &mut [f64]) {
        let p = self.dim();
        let k = self.order();
        let a = self.model.a();
        let b = self.model.b();
        let g0 = self.chain_gain(0);
        for i in 0..p {
            let mut drift = b[i] * u + g0 * x[i];
            for c in 0..p {
                drift += a[(i, c)] * x[c];
            }
            for j in 0..=k {
                let gj = self.chain_gain(j);
                let coupled = match self.form {
                    ObserverForm::Derived => z[i],
                    ObserverForm::StageCoupled => z[j * p + i],
                };
                let mut d = -gj * coupled + gj * drift;
                if j < k {
                    d += z[(j + 1) * p + i] - self.chain_gain(j + 1) * x[i];
                }
                out[j * p + i] = d;
            }
        }
    }

    /// Auxiliary state for which every estimate is zero at state `x0`.
    pub fn state_at_rest(&self, x0: &DVector<f64>) -> ObserverState {
        ObserverState {
            z_hat: (0..=self.order()).map(|j| x0 * self.chain_gain(j)).collect(),
        }
    }

    fn check_state(&self, state: &ObserverState, x: &DVector<f64>) -> Result<()> {
        let p = self.dim();
        if state.z_hat.len() != self.order() + 1 {
            return Err(Error::DimensionMismatch {
                what: "observer state order",
                expected: self.order() + 1,
                got: state.z_hat.len(),
            });
        }
        if let Some(bad) = state.z_hat.iter().find(|z| z.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "auxiliary estimate length",
                expected: p,
                got: bad.len(),
            });
        }
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                what: "state length",
                expected: p,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Auxiliary estimates `ẑ_0 … ẑ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverState {
    pub z_hat: Vec<DVector<f64>>,
}

impl ObserverState {
    pub fn zeros(config: &ObserverConfig) -> Self {
        Self {
            z_hat: vec![DVector::zeros(config.dim()); config.order() + 1],
        }
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        self.z_hat.iter().flat_map(|z| z.iter().copied()).collect()
    }

    pub(crate) fn from_flat(flat: &[f64], p: usize) -> Self {
        Self {
            z_hat: flat.chunks(p).map(DVector::from_column_slice).collect(),
        }
    }
}

/// `τ̂, τ̂^{(1)}, …, τ̂^{(k)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceEstimates {
    pub tau_hat: Vec<DVector<f64>>,
}

impl DisturbanceEstimates {
    pub fn zeros(p: usize, k: usize) -> Self {
        Self {
            tau_hat: vec![DVector::zeros(p); k + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.tau_hat.len() - 1
    }

    /// Derivative stack `(τ_i, τ̇_i, …)` of one channel.
    pub fn channel_stack(&self, channel: usize) -> Vec<f64> {
        self.tau_hat.iter().map(|v| v[channel]).collect()
    }
}

pub fn observer_derivatives(
    config: &ObserverConfig,
    state: &ObserverState,
    x: &DVector<f64>,
    u: f64,
) -> Result<Vec<DVector<f64>>> {
    config.check_state(state, x)?;
    let p = config.dim();
    let z = state.flatten();
    let mut out = vec![0.0; z.len()];
    config.derivatives_into(&z, x.as_slice(), u, &mut out);
    Ok(out.chunks(p).map(DVector::from_column_slice).collect())
}

pub fn extract_estimates(
    config: &ObserverConfig,
    state: &ObserverState,
    x: &DVector<f64>,
) -> Result<DisturbanceEstimates> {
    config.check_state(state, x)?;
    Ok(DisturbanceEstimates {
        tau_hat: state
            .z_hat
            .iter()
            .enumerate()
            .map(|(j, z)| z - x * config.chain_gain(j))
            .collect(),
    })
}

/// Error matrix Ψ of the auxiliary-estimate dynamics `ė = Ψe − Γτ^{(k+1)}`:
/// `−g_j I_p` down block column 0, identity blocks on the block superdiagonal.
pub fn assemble_psi(config: &ObserverConfig) -> DMatrix<f64> {
    let p = config.dim();
    let n = config.order() + 1;
    let mut psi = DMatrix::zeros(n * p, n * p);
    for j in 0..n {
        for i in 0..p {
            psi[(j * p + i, i)] = -config.chain_gain(j);
            if j + 1 < n {
                psi[(j * p + i, (j + 1) * p + i)] = 1.0;
            }
        }
    }
    psi
}

/// Derivative bounds `δ^0 … δ^{k+1}` and the slowest error-mode rate.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub delta: Vec<f64>,
    pub lambda_min: f64,
}

/// `exp(−λ_min t)·‖e(0)‖ + δ^{k+1}/λ_min`.
pub fn error_bound(bounds: &BoundParams, e0_norm: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let top = bounds.delta.last().copied().unwrap_or(0.0);
    (-bounds.lambda_min * t).exp() * e0_norm + top / bounds.lambda_min
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn scalar_model(a: f64, b: f64) -> StateSpaceModel {
        StateSpaceModel::new(dmatrix![a], dvector![b]).unwrap()
    }

    fn binomial(n: u64, r: u64) -> u64 {
        (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn tuned_gains_examples() {
        assert_eq!(tune_gains_repeated(0, 7.5), vec![7.5]);
        assert_eq!(tune_gains_repeated(1, 2.0), vec![4.0, 4.0]);
        assert_eq!(tune_gains_repeated(2, 1000.0), vec![1e9, 3e6, 3000.0]);
    }

    #[test]
    fn tuned_gains_expand_the_repeated_root() {
        for k in 0..6u64 {
            let lam = 3.0;
            let g = tune_gains_repeated(k as usize, lam);
            for (j, l) in g.iter().enumerate() {
                let want = binomial(k + 1, j as u64) as f64 * lam.powi((k + 1 - j as u64) as i32);
                assert!((l - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    #[should_panic]
    fn non_positive_bandwidth_panics() {
        tune_gains_repeated(1, 0.0);
    }

    #[test]
    fn psi_small_cases() {
        let cfg = ObserverConfig::new(scalar_model(0.0, 1.0), vec![5.0], ObserverForm::Derived).unwrap();
        assert_eq!(assemble_psi(&cfg), dmatrix![-5.0]);
        let cfg = ObserverConfig::new(scalar_model(0.0, 1.0), vec![4.0, 4.0], ObserverForm::Derived).unwrap();
        let psi = assemble_psi(&cfg);
        assert_eq!(psi, dmatrix![-4.0, 1.0; -4.0, 0.0]);
        assert!(linalg::spectrum_mismatch(
            &linalg::eigenvalues(&psi),
            &[nalgebra::Complex::new(-2.0, 0.0); 2]
        ) < 1e-7);
    }

    #[test]
    fn rejects_unstable_gains() {
        let m = scalar_model(0.0, 1.0);
        assert!(ObserverConfig::new(m.clone(), vec![-1.0], ObserverForm::Derived).is_err());
        assert!(ObserverConfig::new(m.clone(), vec![], ObserverForm::Derived).is_err());
        assert!(ObserverConfig::new(m.clone(), vec![1.0, f64::NAN], ObserverForm::Derived).is_err());
        assert!(ObserverConfig::repeated(m, 2, -3.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let cfg = ObserverConfig::new(scalar_model(0.0, 1.0), vec![10.0], ObserverForm::Derived).unwrap();
        let st = ObserverState::zeros(&cfg);
        let d = observer_derivatives(&cfg, &st, &dvector![0.0], 0.0).unwrap();
        assert_eq!(d, vec![dvector![0.0]]);
        let d = observer_derivatives(&cfg, &st, &dvector![0.0], 1.0).unwrap();
        assert_eq!(d, vec![dvector![10.0]]);

        let cfg = ObserverConfig::repeated(scalar_model(-1.0, 2.0), 2, 5.0).unwrap();
        let st = ObserverState::zeros(&cfg);
        let d = observer_derivatives(&cfg, &st, &dvector![0.0], 0.0).unwrap();
        assert!(d.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let cfg = ObserverConfig::repeated(scalar_model(0.0, 1.0), 1, 5.0).unwrap();
        let st = ObserverState::zeros(&cfg);
        assert!(matches!(
            observer_derivatives(&cfg, &st, &dvector![0.0, 1.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let short = ObserverState { z_hat: vec![dvector![0.0]] };
        assert!(extract_estimates(&cfg, &short, &dvector![0.0]).is_err());
    }

    #[test]
    fn extraction_examples() {
        let model = StateSpaceModel::new(DMatrix::zeros(2, 2), dvector![0.0, 1.0]).unwrap();
        let cfg = ObserverConfig::new(model, vec![2.0], ObserverForm::Derived).unwrap();
        let zero = extract_estimates(&cfg, &ObserverState::zeros(&cfg), &dvector![0.0, 0.0]).unwrap();
        assert_eq!(zero, DisturbanceEstimates::zeros(2, 0));
        let st = ObserverState { z_hat: vec![dvector![5.0, 0.0]] };
        let est = extract_estimates(&cfg, &st, &dvector![1.0, 1.0]).unwrap();
        assert_eq!(est.tau_hat[0], dvector![3.0, -2.0]);
    }

    #[test]
    fn rest_state_gives_zero_estimates() {
        let model = StateSpaceModel::new(dmatrix![0.0, 1.0; -3.0, -1.0], dvector![0.0, 1.0]).unwrap();
        let cfg = ObserverConfig::repeated(model, 2, 100.0).unwrap();
        let x = dvector![0.3, -1.2];
        let est = extract_estimates(&cfg, &cfg.state_at_rest(&x), &x).unwrap();
        assert!(est.tau_hat.iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn error_bound_examples() {
        let b = BoundParams { delta: vec![1.0, 1.0, 0.0], lambda_min: 3.0 };
        assert_eq!(error_bound(&b, 2.5, 0.0), 2.5);
        assert!(error_bound(&b, 2.5, 100.0) < 1e-100);
        let b = BoundParams { delta: vec![0.0, 0.0, 0.0, 7.0], lambda_min: 1000.0 };
        assert!((error_bound(&b, 1.0, 1.0) - 7e-3).abs() < 1e-15);
    }

    /// Exact auxiliary state `z_j = g_j x + τ^{(j)}` for a closed-form
    /// disturbance on a scalar plant with u = 0.
    fn exact_aux(cfg: &ObserverConfig, x: f64, tau: &[f64]) -> ObserverState {
        ObserverState {
            z_hat: (0..=cfg.order())
                .map(|j| dvector![cfg.chain_gain(j) * x + tau[j]])
                .collect(),
        }
    }

    #[test]
    fn extraction_inverts_the_auxiliary_definition() {
        let cfg = ObserverConfig::repeated(scalar_model(-0.5, 1.0), 3, 40.0).unwrap();
        let tau = [1.5, -2.0, 0.25, 9.0];
        let est = extract_estimates(&cfg, &exact_aux(&cfg, 0.7, &tau), &dvector![0.7]).unwrap();
        for (j, t) in tau.iter().enumerate() {
            assert!((est.tau_hat[j][0] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn derived_form_is_exact_on_true_auxiliaries() {
        // ż_j of the true auxiliaries equals the observer right-hand side plus
        // τ^{(k+1)} in the last row. Plant ẋ = a x − τ, τ = sin t.
        let a = -0.5;
        let cfg = ObserverConfig::repeated(scalar_model(a, 1.0), 2, 10.0).unwrap();
        let (x, t) = (0.3, 0.8f64);
        let tau = [t.sin(), t.cos(), -t.sin(), -t.cos()];
        let st = exact_aux(&cfg, x, &tau);
        let d = observer_derivatives(&cfg, &st, &dvector![x], 0.0).unwrap();
        let xdot = a * x - tau[0];
        for j in 0..=2 {
            let truth = cfg.chain_gain(j) * xdot + tau[j + 1];
            let rhs = d[j][0] + if j == 2 { tau[3] } else { 0.0 };
            assert!((truth - rhs).abs() < 1e-9, "order {j}: {truth} vs {rhs}");
        }
        // The stage-coupled variant is not exact for k ≥ 1.
        let staged = cfg.clone().with_form(ObserverForm::StageCoupled);
        let d = observer_derivatives(&staged, &st, &dvector![x], 0.0).unwrap();
        let truth = staged.chain_gain(1) * xdot + tau[2];
        assert!((truth - d[1][0]).abs() > 1e-3);
    }

    #[test]
    fn constant_disturbance_error_decays_at_gain_rate() {
        // k = 0 on ẋ = −τ with constant τ: e(t) = e(0)·exp(−L₀t).
        let l0 = 50.0;
        let cfg = ObserverConfig::new(scalar_model(0.0, 1.0), vec![l0], ObserverForm::Derived).unwrap();
        let tau = 2.0;
        let h = 1e-4;
        let mut x = 0.0;
        let mut z = 0.0;
        let mut t = 0.0;
        while t < 0.1 - 1e-12 {
            // exact plant, RK4 on the observer (it only sees x(t) = −τ t)
            let f = |tt: f64, zz: f64| {
                let mut out = [0.0];
                cfg.derivatives_into(&[zz], &[-tau * tt], 0.0, &mut out);
                out[0]
            };
            let k1 = f(t, z);
            let k2 = f(t + h / 2.0, z + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, z + h / 2.0 * k2);
            let k4 = f(t + h, z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
            x = -tau * t;
            let est = z - l0 * x;
            let oracle = tau - tau * (-l0 * t).exp();
            assert!((est - oracle).abs() < 1e-6, "t={t} est={est} oracle={oracle}");
        }
        assert!(x < 0.0);
    }

    proptest! {
        #[test]
        fn psi_spectrum_is_the_repeated_root(
            k in 0usize..=4,
            lam_idx in 0usize..3,
            p in 1usize..=4,
        ) {
            let lam = [1.0, 10.0, 1000.0][lam_idx];
            let model = StateSpaceModel::new(DMatrix::zeros(p, p), DVector::from_element(p, 1.0)).unwrap();
            let cfg = ObserverConfig::repeated(model, k, lam).unwrap();
            let eig = linalg::eigenvalues(&assemble_psi(&cfg));
            prop_assert_eq!(eig.len(), (k + 1) * p);
            // a (k+1)-fold root moves by about ε^{1/(k+1)} under rounding ε
            let tol = 10.0 * 1e-15f64.powf(1.0 / (k + 1) as f64);
            for z in &eig {
                prop_assert!((z - nalgebra::Complex::new(-lam, 0.0)).norm() <= tol * lam,
                    "k={} lam={} eig={}", k, lam, z);
            }
            // the cluster mean is well conditioned
            let mean: f64 = eig.iter().map(|z| z.re).sum::<f64>() / eig.len() as f64;
            prop_assert!((mean + lam).abs() <= 1e-9 * lam);
        }
    }
}
