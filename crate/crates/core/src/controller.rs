//! Closed-loop assembly: controller variants and the ultimate-bound
//! certificate.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat::{brunovsky, polymatrix, DerivativePolicy, FlatParameterization, Normalization, PolyModel};
use crate::model::{lyapunov_solve, place_poles, to_brunovsky, BrunovskyTransform, LyapunovCertificate, StateSpaceModel};
use crate::observer::{DisturbanceEstimates, ObserverForm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerVariant {
    /// Flat feedforward and feedback without disturbance compensation.
    Conventional,
    BrunovskyRobust,
    #[default]
    PolymatrixRobust,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 3] = [
        ControllerVariant::Conventional,
        ControllerVariant::BrunovskyRobust,
        ControllerVariant::PolymatrixRobust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerVariant::Conventional => "conventional",
            ControllerVariant::BrunovskyRobust => "brunovsky_robust",
            ControllerVariant::PolymatrixRobust => "polymatrix_robust",
        }
    }

    pub fn is_robust(self) -> bool {
        self != ControllerVariant::Conventional
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ControllerVariant::ALL
            .into_iter()
            .find(|v| v.name() == norm || v.name().split('_').next() == Some(norm.as_str()))
            .ok_or_else(|| Error::invalid(format!("unknown controller variant '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerSpec {
    pub variant: ControllerVariant,
    pub poles: Vec<Complex<f64>>,
    pub dob_order: usize,
    pub dob_bandwidth: f64,
    pub observer_form: ObserverForm,
    pub policy: DerivativePolicy,
    /// Constant that `p₁` is pinned to at the controlled coordinate; `None`
    /// uses the nominal stiffness.
    pub normalization: Option<f64>,
}

impl ControllerSpec {
    /// Double poles at −50 and −60, second-order observer at 1000 rad/s.
    pub fn benchmark(variant: ControllerVariant) -> Self {
        Self {
            variant,
            poles: [-50.0, -50.0, -60.0, -60.0].map(|p| Complex::new(p, 0.0)).to_vec(),
            dob_order: 2,
            dob_bandwidth: 1000.0,
            observer_form: ObserverForm::Derived,
            policy: DerivativePolicy::StructuralZeros,
            normalization: None,
        }
    }
}

/// What one evaluation of the law produces.
#[derive(Clone, Debug)]
pub struct ControlOutput {
    pub u: f64,
    pub x_ref: DVector<f64>,
    /// Flat output stack the references were generated from.
    pub y: Vec<f64>,
    /// `ξ − ξ_ref`: reconstructed state minus its disturbance-free reference.
    pub xi_err: DVector<f64>,
}

/// A configured control law for the two-coordinate mechanical plant.
#[derive(Clone, Debug)]
pub struct Controller {
    variant: ControllerVariant,
    k: DVector<f64>,
    transform: BrunovskyTransform,
    structure: Vec<bool>,
    policy: DerivativePolicy,
    poly: PolyModel,
    param: FlatParameterization,
    /// Generalized coordinate whose position is tracked.
    output_coord: usize,
}

/// Builds the law. `output_coord` indexes the generalized coordinate whose
/// position follows the reference (1 = second mass).
pub fn make_controller(
    spec: &ControllerSpec,
    model: &StateSpaceModel,
    poly: &PolyModel,
    output_coord: usize,
) -> Result<Controller> {
    let p = model.dim();
    if p != 2 * poly.p_star() {
        return Err(Error::DimensionMismatch {
            what: "state dimension vs polynomial model",
            expected: 2 * poly.p_star(),
            got: p,
        });
    }
    if spec.poles.len() != p {
        return Err(Error::DimensionMismatch {
            what: "pole set",
            expected: p,
            got: spec.poles.len(),
        });
    }
    let k = place_poles(model, &spec.poles)?;
    let transform = to_brunovsky(model)?;

    // The canonical flat output must be the tracked position alone.
    let out_state = 2 * output_coord;
    let row = transform.t.row(0);
    let scale = row.amax();
    if (0..p).any(|j| j != out_state && row[j].abs() > 1e-9 * scale) {
        return Err(Error::SingularChannel(
            "canonical flat output is not proportional to the tracked position".into(),
        ));
    }

    // Only velocity rows of the lumped disturbance can be nonzero.
    let mask: Vec<bool> = (0..p).map(|i| i % 2 == 1).collect();
    let structure = brunovsky::structural_zero_rows(&transform, &mask);
    let norm_value = spec.normalization.unwrap_or_else(|| -poly.a.get(0, 1).coeff(0));
    let param = FlatParameterization::new(
        poly,
        Normalization {
            cell: output_coord,
            value: norm_value,
        },
    )?;

    match spec.variant {
        ControllerVariant::BrunovskyRobust => {
            brunovsky::check_derivative_orders(&structure, spec.dob_order, spec.policy)?;
        }
        ControllerVariant::PolymatrixRobust => {
            let required = param.disturbance_order();
            if required > spec.dob_order && spec.policy == DerivativePolicy::StructuralZeros {
                return Err(Error::InsufficientDerivatives {
                    what: "disturbance force (observer order)".into(),
                    required,
                    available: spec.dob_order,
                });
            }
        }
        ControllerVariant::Conventional => {}
    }

    Ok(Controller {
        variant: spec.variant,
        k,
        transform,
        structure,
        policy: spec.policy,
        poly: poly.clone(),
        param,
        output_coord,
    })
}

impl Controller {
    pub fn variant(&self) -> ControllerVariant {
        self.variant
    }

    pub fn gain(&self) -> &DVector<f64> {
        &self.k
    }

    pub fn transform(&self) -> &BrunovskyTransform {
        &self.transform
    }

    pub fn parameterization(&self) -> &FlatParameterization {
        &self.param
    }

    /// Derivative order of the desired position the law consumes.
    pub fn reference_order(&self) -> usize {
        self.transform.dim().max(self.param.flat_output_order())
    }

    fn zero_forces(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.reference_order() + 1]; self.poly.p_star()]
    }

    fn padded_forces(&self, estimates: &DisturbanceEstimates) -> Result<Vec<Vec<f64>>> {
        let mut f = self.poly.force_stacks(estimates)?;
        if self.policy == DerivativePolicy::Truncate {
            let need = self.param.disturbance_order() + 1;
            for s in &mut f {
                if s.len() < need {
                    s.resize(need, 0.0);
                }
            }
        }
        Ok(f)
    }

    /// Evaluates the law for a desired-position derivative stack.
    pub fn control(&self, desired: &[f64], estimates: &DisturbanceEstimates, x: &DVector<f64>) -> Result<ControlOutput> {
        match self.variant {
            ControllerVariant::BrunovskyRobust => {
                let y: Vec<f64> = desired.iter().map(|v| v * self.transform.t[(0, 2 * self.output_coord)]).collect();
                let stack = brunovsky::transform_disturbances(&self.transform, estimates)?
                    .with_structure(self.structure.clone(), self.policy);
                let (u_ff, x_ref) = brunovsky::brunovsky_feedforward(&self.transform, &y, &stack)?;
                let u = u_ff + self.k.dot(&(&x_ref - x));
                let xi = brunovsky::reconstruct_xi(&self.transform, x, &stack)?;
                let zero = crate::flat::TransformedDisturbanceStack::zeros(self.transform.dim(), 0)
                    .with_structure(vec![true; self.transform.dim()], self.policy);
                let xi_ref = brunovsky::brunovsky_state_reference(&self.transform, &y, &zero)?;
                Ok(ControlOutput {
                    u,
                    x_ref,
                    y,
                    xi_err: xi - xi_ref,
                })
            }
            ControllerVariant::PolymatrixRobust | ControllerVariant::Conventional => {
                let y = self.param.flat_output_for(self.output_coord, desired)?;
                let zero = self.zero_forces();
                let forces = if self.variant.is_robust() {
                    self.padded_forces(estimates)?
                } else {
                    zero.clone()
                };
                let (x_ref, u_ff) = polymatrix::polymatrix_references(&self.param, &y, &forces)?;
                let u = u_ff + self.k.dot(&(&x_ref - x));
                let xi = polymatrix::reconstruct_xi(&self.param, x, &forces)?;
                let (xi_ref, _) = polymatrix::polymatrix_references(&self.param, &y, &zero)?;
                Ok(ControlOutput {
                    u,
                    x_ref,
                    y,
                    xi_err: xi - xi_ref,
                })
            }
        }
    }
}

/// Ω₁ = {ξ : ‖ξ‖² ≤ φ/ℓ}.
#[derive(Clone, Debug)]
pub struct UltimateBound {
    pub ell: f64,
    pub phi: f64,
    pub radius_sq: f64,
    pub certificate: LyapunovCertificate,
}

impl UltimateBound {
    /// `−ℓ‖ξ‖² + φ`.
    pub fn vdot_bound(&self, xi_norm_sq: f64) -> f64 {
        -self.ell * xi_norm_sq + self.phi
    }
}

const ELL_MARGIN: f64 = 1e-6;

/// `V = ξᵀPξ` with `A_clᵀP + PA_cl = −Q` gives
/// `V̇ ≤ −(λ_min(Q) − 1)‖ξ‖² + λ_max(P)²δ²` for a residual bounded by δ.
pub fn certify_ultimate_bound(
    model: &StateSpaceModel,
    k: &DVector<f64>,
    q: &DMatrix<f64>,
    delta: f64,
) -> Result<UltimateBound> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("residual bound must be finite and >= 0, got {delta}")));
    }
    if q.is_square() && q.nrows() > 0 {
        let lambda_min = q.clone().symmetric_eigenvalues().min();
        if lambda_min <= 1.0 {
            return Err(Error::QTooSmall { lambda_min });
        }
    }
    let certificate = lyapunov_solve(&model.closed_loop(k), q)?;
    let ell = certificate.lambda_min_q - 1.0 - ELL_MARGIN;
    let phi = certificate.lambda_max_abs_p.powi(2) * delta * delta;
    Ok(UltimateBound {
        ell,
        phi,
        radius_sq: phi / ell,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::ObserverConfig;
    use crate::plant::{build_nominal_model, build_poly_model, NominalParams, PlantParams};
    use nalgebra::{dmatrix, dvector};

    fn benchmark_setup(variant: ControllerVariant) -> (StateSpaceModel, Controller) {
        let nom = NominalParams::uncertain(&PlantParams::benchmark());
        let model = build_nominal_model(&nom).unwrap();
        let poly = build_poly_model(&nom).unwrap();
        let c = make_controller(&ControllerSpec::benchmark(variant), &model, &poly, 1).unwrap();
        (model, c)
    }

    #[test]
    fn scalar_certificate_closed_form() {
        let m = StateSpaceModel::new(dmatrix![0.0], dvector![1.0]).unwrap();
        let b = certify_ultimate_bound(&m, &dvector![1.0], &dmatrix![2.0], 0.3).unwrap();
        assert!((b.certificate.p[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((b.ell - (1.0 - 1e-6)).abs() < 1e-15);
        assert!((b.radius_sq - 0.09 / (1.0 - 1e-6)).abs() < 1e-14);
        let zero = certify_ultimate_bound(&m, &dvector![1.0], &dmatrix![2.0], 0.0).unwrap();
        assert_eq!(zero.radius_sq, 0.0);
    }

    #[test]
    fn certificate_preconditions() {
        let m = StateSpaceModel::new(dmatrix![0.0], dvector![1.0]).unwrap();
        assert!(matches!(
            certify_ultimate_bound(&m, &dvector![1.0], &dmatrix![1.0], 0.1),
            Err(Error::QTooSmall { .. })
        ));
        assert!(matches!(
            certify_ultimate_bound(&m, &dvector![-1.0], &dmatrix![2.0], 0.1),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn variant_names_parse() {
        for v in ControllerVariant::ALL {
            assert_eq!(v.name().parse::<ControllerVariant>().unwrap(), v);
        }
        assert_eq!("brunovsky".parse::<ControllerVariant>().unwrap(), ControllerVariant::BrunovskyRobust);
        assert_eq!("polymatrix-robust".parse::<ControllerVariant>().unwrap(), ControllerVariant::PolymatrixRobust);
        assert!("pid".parse::<ControllerVariant>().is_err());
    }

    #[test]
    fn gain_is_rederivable_from_poles() {
        let (model, c) = benchmark_setup(ControllerVariant::PolymatrixRobust);
        let again = place_poles(&model, &ControllerSpec::benchmark(ControllerVariant::Conventional).poles).unwrap();
        assert!((c.gain() - &again).amax() < 1e-6 * again.amax());
    }

    #[test]
    fn zero_estimates_make_variants_agree() {
        let desired = [0.05, 0.3, -2.0, 4.0, 30.0];
        let x = dvector![0.01, 0.2, 0.04, -0.1];
        let est = DisturbanceEstimates::zeros(4, 2);
        let outs: Vec<ControlOutput> = ControllerVariant::ALL
            .iter()
            .map(|&v| benchmark_setup(v).1.control(&desired, &est, &x).unwrap())
            .collect();
        for o in &outs[1..] {
            assert!((o.u - outs[0].u).abs() < 1e-6 * outs[0].u.abs().max(1.0), "{} vs {}", o.u, outs[0].u);
            assert!((&o.x_ref - &outs[0].x_ref).amax() < 1e-9);
            assert!((&o.xi_err - (&x - &o.x_ref)).amax() < 1e-9);
        }
        assert!((outs[0].x_ref[2] - 0.05).abs() < 1e-15 && (outs[0].x_ref[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn robust_variants_agree_with_estimates() {
        let desired = [0.05, 0.3, -2.0, 4.0, 30.0];
        let x = dvector![0.01, 0.2, 0.04, -0.1];
        let est = DisturbanceEstimates {
            tau_hat: vec![dvector![0.0, 3.0, 0.0, -7.0], dvector![0.0, 20.0, 0.0, 50.0], dvector![0.0, -100.0, 0.0, 900.0]],
        };
        let (_, b) = benchmark_setup(ControllerVariant::BrunovskyRobust);
        let (_, p) = benchmark_setup(ControllerVariant::PolymatrixRobust);
        let ob = b.control(&desired, &est, &x).unwrap();
        let op = p.control(&desired, &est, &x).unwrap();
        assert!((ob.u - op.u).abs() < 1e-6 * op.u.abs().max(1.0), "{} vs {}", ob.u, op.u);
        assert!((&ob.x_ref - &op.x_ref).amax() < 1e-9 * op.x_ref.amax().max(1.0));
        assert!((&ob.xi_err - &op.xi_err).amax() < 1e-9);
        // ξ − ξ_ref coincides with the tracking error.
        assert!((&op.xi_err - (&x - &op.x_ref)).amax() < 1e-12);
    }

    #[test]
    fn oracle_estimates_cancel_the_matched_channel() {
        // With τ̂ equal to a constant matched disturbance, u differs from the
        // undisturbed law by exactly m₁ₙ·τ.
        let (_, c) = benchmark_setup(ControllerVariant::PolymatrixRobust);
        let desired = [0.1, 0.0, 0.0, 0.0, 0.0];
        let x = dvector![26.5 * 0.1 / 26.5, 0.0, 0.1, 0.0];
        let clean = c.control(&desired, &DisturbanceEstimates::zeros(4, 2), &x).unwrap();
        let est = DisturbanceEstimates {
            tau_hat: vec![dvector![0.0, 2.0, 0.0, 0.0], DVector::zeros(4), DVector::zeros(4)],
        };
        let dist = c.control(&desired, &est, &x).unwrap();
        assert!((dist.u - clean.u - 0.065 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn low_order_observer_is_rejected_at_build_time() {
        let nom = NominalParams::uncertain(&PlantParams::benchmark());
        let model = build_nominal_model(&nom).unwrap();
        let poly = build_poly_model(&nom).unwrap();
        for v in [ControllerVariant::BrunovskyRobust, ControllerVariant::PolymatrixRobust] {
            let spec = ControllerSpec { dob_order: 1, ..ControllerSpec::benchmark(v) };
            let err = make_controller(&spec, &model, &poly, 1).unwrap_err();
            assert!(matches!(err, Error::InsufficientDerivatives { required: 2, available: 1, .. }), "{err}");
            let lax = ControllerSpec { policy: DerivativePolicy::Truncate, ..spec };
            assert!(make_controller(&lax, &model, &poly, 1).is_ok());
        }
        let conv = ControllerSpec { dob_order: 0, ..ControllerSpec::benchmark(ControllerVariant::Conventional) };
        assert!(make_controller(&conv, &model, &poly, 1).is_ok());
        let _ = ObserverConfig::repeated(model, 2, 1000.0).unwrap();
    }
}
