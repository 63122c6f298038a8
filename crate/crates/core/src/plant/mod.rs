//! Two-mass-spring-damper ground truth, its nominal models, disturbance
//! injection and the closed-loop simulation harness.

mod csv;
mod metrics;
mod sim;

use std::f64::consts::PI;

use nalgebra::{dmatrix, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat::PolyModel;
use crate::model::StateSpaceModel;

pub use csv::{write_csv, write_metrics, CSV_HEADER};
pub use metrics::{compute_metrics, true_disturbance_derivatives, Metrics};
pub use sim::{run_scenario, Scenario, SimLog, SimSettings};

/// True plant. `b12` is an inter-mass damper the nominal model cannot
/// represent; set it to zero to switch it off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    pub m1: f64,
    pub m2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b12: f64,
    pub k: f64,
}

impl PlantParams {
    pub fn benchmark() -> Self {
        Self {
            m1: 0.1,
            m2: 0.25,
            b1: 2.5,
            b2: 2.5,
            b12: 1.25,
            k: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.m1, self.m2, self.b1, self.b2, self.b12, self.k];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("plant parameters must be finite"));
        }
        if self.m1 <= 0.0 || self.m2 <= 0.0 {
            return Err(Error::invalid("plant masses must be positive"));
        }
        if self.b1 < 0.0 || self.b2 < 0.0 || self.b12 < 0.0 || self.k < 0.0 {
            return Err(Error::invalid("plant damping and stiffness must be non-negative"));
        }
        Ok(())
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::benchmark()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NominalParams {
    pub m1n: f64,
    pub m2n: f64,
    pub b1n: f64,
    pub b2n: f64,
    pub kn: f64,
}

impl NominalParams {
    /// `m₁ₙ = 0.65 m₁`, `m₂ₙ = 0.35 m₂`, no damping, `kₙ = 2.65 k`.
    pub fn uncertain(plant: &PlantParams) -> Self {
        Self {
            m1n: 0.65 * plant.m1,
            m2n: 0.35 * plant.m2,
            b1n: 0.0,
            b2n: 0.0,
            kn: 2.65 * plant.k,
        }
    }

    /// Nominal equal to the true plant (the inter-mass damper is dropped).
    pub fn exact(plant: &PlantParams) -> Self {
        Self {
            m1n: plant.m1,
            m2n: plant.m2,
            b1n: plant.b1,
            b2n: plant.b2,
            kn: plant.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.m1n, self.m2n, self.b1n, self.b2n, self.kn];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("nominal parameters must be finite"));
        }
        if self.m1n <= 0.0 || self.m2n <= 0.0 || self.kn <= 0.0 {
            return Err(Error::invalid("nominal masses and stiffness must be positive"));
        }
        if self.b1n < 0.0 || self.b2n < 0.0 {
            return Err(Error::invalid("nominal damping must be non-negative"));
        }
        Ok(())
    }
}

/// State order `(q₁, q̇₁, q₂, q̇₂)`, input force on mass 1.
pub fn build_nominal_model(nom: &NominalParams) -> Result<StateSpaceModel> {
    nom.validate()?;
    let NominalParams { m1n, m2n, b1n, b2n, kn } = *nom;
    let a = dmatrix![
        0.0, 1.0, 0.0, 0.0;
        -kn / m1n, -b1n / m1n, kn / m1n, 0.0;
        0.0, 0.0, 0.0, 1.0;
        kn / m2n, 0.0, -kn / m2n, -b2n / m2n
    ];
    StateSpaceModel::new(a, DVector::from_vec(vec![0.0, 1.0 / m1n, 0.0, 0.0]))
}

/// `A(s) = M s² + D s + K`, `B = (1, 0)ᵀ`.
pub fn build_poly_model(nom: &NominalParams) -> Result<PolyModel> {
    nom.validate()?;
    let NominalParams { m1n, m2n, b1n, b2n, kn } = *nom;
    PolyModel::mechanical(
        &[m1n, m2n],
        &DMatrix::from_diagonal(&DVector::from_vec(vec![b1n, b2n])),
        &dmatrix![kn, -kn; -kn, kn],
        &[1.0, 0.0],
    )
}

/// Force time profile in newtons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceProfile {
    #[default]
    None,
    Constant {
        value: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sin(2πt) cos(6πt)`.
    Beat {
        #[serde(default = "default_beat_amplitude")]
        amplitude: f64,
    },
    /// Ascending coefficients in t.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

fn default_beat_amplitude() -> f64 {
    25.0
}

impl ForceProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ForceProfile::None => 0.0,
            ForceProfile::Constant { value } => *value,
            ForceProfile::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => amplitude * (2.0 * PI * frequency_hz * t + phase).sin(),
            ForceProfile::Beat { amplitude } => amplitude * (2.0 * PI * t).sin() * (6.0 * PI * t).cos(),
            ForceProfile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            ForceProfile::None => 0.0,
            ForceProfile::Constant { value } => value.abs(),
            ForceProfile::Sinusoid { amplitude, .. } | ForceProfile::Beat { amplitude } => amplitude.abs(),
            ForceProfile::Polynomial { coeffs } => coeffs.first().map_or(0.0, |c| c.abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSpec {
    /// External force on mass 2, active on `[t_on, t_off]`.
    pub f_ext: ForceProfile,
    pub t_on: f64,
    pub t_off: f64,
    /// Multiplies `f_ext` where it is subtracted from mass 2's balance.
    pub f_ext_sign: f64,
    pub f_ud1: ForceProfile,
    pub f_ud2: ForceProfile,
    /// Per-state standard deviation of the measurement noise seen by the
    /// observer and the feedback (empty = no noise).
    pub measurement_noise_std: Vec<f64>,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            f_ext: ForceProfile::Beat { amplitude: 25.0 },
            t_on: 2.5,
            t_off: 10.0,
            f_ext_sign: 1.0,
            f_ud1: ForceProfile::None,
            f_ud2: ForceProfile::None,
            measurement_noise_std: Vec::new(),
        }
    }
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self {
            f_ext: ForceProfile::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_on <= self.t_off) {
            return Err(Error::invalid(format!(
                "disturbance window [{}, {}] is empty",
                self.t_on, self.t_off
            )));
        }
        if !self.f_ext_sign.is_finite() {
            return Err(Error::invalid("f_ext_sign must be finite"));
        }
        if self.measurement_noise_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid("noise standard deviations must be finite and >= 0"));
        }
        if !self.measurement_noise_std.is_empty() && self.measurement_noise_std.len() != 4 {
            return Err(Error::DimensionMismatch {
                what: "measurement noise std",
                expected: 4,
                got: self.measurement_noise_std.len(),
            });
        }
        Ok(())
    }

    /// External force at t, including the activity window (not the sign).
    pub fn f_ext_at(&self, t: f64) -> f64 {
        if t >= self.t_on && t <= self.t_off {
            self.f_ext.eval(t)
        } else {
            0.0
        }
    }

    pub fn has_noise(&self) -> bool {
        self.measurement_noise_std.iter().any(|s| *s > 0.0)
    }
}

/// `ẋ` of the true plant.
pub fn true_derivative(plant: &PlantParams, dist: &DisturbanceSpec, t: f64, x: &[f64], u: f64) -> [f64; 4] {
    let [q1, v1, q2, v2] = [x[0], x[1], x[2], x[3]];
    let spring = plant.k * (q1 - q2) + plant.b12 * (v1 - v2);
    let a1 = (u - plant.b1 * v1 - spring - dist.f_ud1.eval(t)) / plant.m1;
    let a2 = (spring - plant.b2 * v2 - dist.f_ext_sign * dist.f_ext_at(t) - dist.f_ud2.eval(t)) / plant.m2;
    [v1, a1, v2, a2]
}

/// Lumped disturbance `τ = Aₙx + Bₙu − ẋ_true` so that the nominal model
/// driven by (u, τ) reproduces the true trajectory.
pub fn true_lumped_disturbance(
    model: &StateSpaceModel,
    plant: &PlantParams,
    dist: &DisturbanceSpec,
    t: f64,
    x: &[f64],
    u: f64,
) -> [f64; 4] {
    let f = true_derivative(plant, dist, t, x, u);
    let a = model.a();
    let b = model.b();
    std::array::from_fn(|i| {
        let mut nominal = b[i] * u;
        for c in 0..4 {
            nominal += a[(i, c)] * x[c];
        }
        nominal - f[i]
    })
}

/// `½m₁q̇₁² + ½m₂q̇₂² + ½k(q₁−q₂)²`.
pub fn mechanical_energy(plant: &PlantParams, x: &[f64]) -> f64 {
    0.5 * plant.m1 * x[1] * x[1] + 0.5 * plant.m2 * x[3] * x[3] + 0.5 * plant.k * (x[0] - x[2]).powi(2)
}
