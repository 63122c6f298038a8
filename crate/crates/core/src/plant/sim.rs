use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{build_nominal_model, build_poly_model, true_derivative, true_lumped_disturbance};
use super::{DisturbanceSpec, NominalParams, PlantParams};
use crate::controller::{make_controller, ControllerSpec, ControllerVariant};
use crate::error::{Error, Result};
use crate::observer::{extract_estimates, tune_gains_repeated, ObserverConfig, ObserverState};
use crate::reference::Reference;
use crate::rk4::Rk4;

/// Plant states beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Fraction of the observer time constant allowed as step size.
pub const STEP_GUARD: f64 = 0.1 * 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Integration step (s).
    pub dt: f64,
    /// Duration (s).
    pub t_end: f64,
    pub seed: u64,
    /// Every n-th step is logged.
    pub log_stride: usize,
    /// Initial plant state `(q₁, q̇₁, q₂, q̇₂)`.
    pub x0: [f64; 4],
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            t_end: 10.0,
            seed: 0,
            log_stride: 10,
            x0: [0.0; 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub plant: PlantParams,
    pub nominal: NominalParams,
    pub disturbance: DisturbanceSpec,
    pub controller: ControllerSpec,
    pub reference: Reference,
    pub sim: SimSettings,
}

impl Scenario {
    /// Benchmark plant, uncertain nominal model, external force on 2.5–10 s.
    pub fn benchmark(variant: ControllerVariant) -> Self {
        let plant = PlantParams::benchmark();
        Self {
            nominal: NominalParams::uncertain(&plant),
            plant,
            disturbance: DisturbanceSpec::default(),
            controller: ControllerSpec::benchmark(variant),
            reference: Reference::default(),
            sim: SimSettings::default(),
        }
    }
}

/// Decimated time series of one run. Series indexed by sample.
#[derive(Clone, PartialEq)]
pub struct SimLog {
    pub variant: ControllerVariant,
    pub seed: u64,
    /// Spacing of the logged samples.
    pub dt_log: f64,
    pub ref_amplitude: f64,
    pub t: Vec<f64>,
    pub x: Vec<[f64; 4]>,
    pub u: Vec<f64>,
    pub x_ref: Vec<[f64; 4]>,
    pub q2_des: Vec<f64>,
    /// Flat output derivative stack used by the law.
    pub y_dfo: Vec<Vec<f64>>,
    /// Lumped disturbance of the nominal model.
    pub tau_true: Vec<[f64; 4]>,
    /// `tau_hat[sample][order]`.
    pub tau_hat: Vec<Vec<[f64; 4]>>,
    pub xi_err: Vec<[f64; 4]>,
    pub f_ext: Vec<f64>,
}

impl SimLog {
    fn new(variant: ControllerVariant, seed: u64, dt_log: f64, ref_amplitude: f64, capacity: usize) -> Self {
        Self {
            variant,
            seed,
            dt_log,
            ref_amplitude,
            t: Vec::with_capacity(capacity),
            x: Vec::with_capacity(capacity),
            u: Vec::with_capacity(capacity),
            x_ref: Vec::with_capacity(capacity),
            q2_des: Vec::with_capacity(capacity),
            y_dfo: Vec::with_capacity(capacity),
            tau_true: Vec::with_capacity(capacity),
            tau_hat: Vec::with_capacity(capacity),
            xi_err: Vec::with_capacity(capacity),
            f_ext: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn observer_order(&self) -> usize {
        self.tau_hat.first().map_or(0, |v| v.len().saturating_sub(1))
    }

    pub fn tracking_error(&self, i: usize) -> f64 {
        self.x[i][2] - self.q2_des[i]
    }

    pub fn xi_norm_sq(&self, i: usize) -> f64 {
        self.xi_err[i].iter().map(|v| v * v).sum()
    }
}

impl fmt::Debug for SimLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimLog")
            .field("variant", &self.variant)
            .field("samples", &self.len())
            .field("dt_log", &self.dt_log)
            .field("t_last", &self.t.last())
            .finish_non_exhaustive()
    }
}

fn to4(v: &DVector<f64>) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

/// Co-integrates plant and observer with RK4; the control input is held
/// over each step.
pub fn run_scenario(sc: &Scenario) -> Result<SimLog> {
    sc.plant.validate()?;
    sc.disturbance.validate()?;
    let SimSettings {
        dt,
        t_end,
        seed,
        log_stride,
        x0,
    } = sc.sim.clone();
    if !(dt > 0.0) || !dt.is_finite() || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid(format!("dt ({dt}) and t_end ({t_end}) must be positive")));
    }
    if log_stride == 0 {
        return Err(Error::invalid("log_stride must be at least 1"));
    }
    let spec = &sc.controller;
    if !(spec.dob_bandwidth > 0.0) || !spec.dob_bandwidth.is_finite() {
        return Err(Error::invalid(format!(
            "observer bandwidth must be positive, got {}",
            spec.dob_bandwidth
        )));
    }
    let limit = STEP_GUARD / spec.dob_bandwidth;
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }

    let model = build_nominal_model(&sc.nominal)?;
    let poly = build_poly_model(&sc.nominal)?;
    let controller = make_controller(spec, &model, &poly, 1)?;
    let observer = ObserverConfig::new(
        model.clone(),
        tune_gains_repeated(spec.dob_order, spec.dob_bandwidth),
        spec.observer_form,
    )?;
    let ref_order = controller.reference_order();

    let noise: Option<Vec<Normal<f64>>> = if sc.disturbance.has_noise() {
        Some(
            sc.disturbance
                .measurement_noise_std
                .iter()
                .map(|&s| Normal::new(0.0, s).map_err(|e| Error::invalid(e.to_string())))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let steps = (t_end / dt).round() as usize;
    let x0v = DVector::from_column_slice(&x0);
    let mut y: Vec<f64> = x0.to_vec();
    y.extend(observer.state_at_rest(&x0v).flatten());
    let zlen = y.len() - 4;
    let mut rk = Rk4::new(y.len());
    let mut log = SimLog::new(
        spec.variant,
        seed,
        dt * log_stride as f64,
        sc.reference.amplitude(),
        steps / log_stride + 1,
    );
    let mut x_meas = [0.0; 4];
    let mut offset = [0.0; 4];

    for n in 0..=steps {
        let t = n as f64 * dt;
        if let Some(dists) = &noise {
            for (o, d) in offset.iter_mut().zip(dists) {
                *o = d.sample(&mut rng);
            }
        }
        for i in 0..4 {
            x_meas[i] = y[i] + offset[i];
        }
        let xm = DVector::from_column_slice(&x_meas);
        let est = extract_estimates(&observer, &ObserverState::from_flat(&y[4..], 4), &xm)?;
        let desired = sc.reference.derivs(t, ref_order);
        let out = controller.control(&desired, &est, &xm)?;
        let u = out.u;

        if n % log_stride == 0 {
            log.t.push(t);
            log.x.push([y[0], y[1], y[2], y[3]]);
            log.u.push(u);
            log.x_ref.push(to4(&out.x_ref));
            log.q2_des.push(desired[0]);
            log.y_dfo.push(out.y.clone());
            log.tau_true
                .push(true_lumped_disturbance(&model, &sc.plant, &sc.disturbance, t, &y[..4], u));
            log.tau_hat.push(est.tau_hat.iter().map(to4).collect());
            log.xi_err.push(to4(&out.xi_err));
            log.f_ext.push(sc.disturbance.f_ext_at(t));
        }
        if n == steps {
            break;
        }

        let plant = &sc.plant;
        let dist = &sc.disturbance;
        let obs = &observer;
        rk.step(
            |ts, s, ds| {
                let f = true_derivative(plant, dist, ts, &s[..4], u);
                ds[..4].copy_from_slice(&f);
                let xo = [s[0] + offset[0], s[1] + offset[1], s[2] + offset[2], s[3] + offset[3]];
                obs.derivatives_into(&s[4..4 + zlen], &xo, u, &mut ds[4..]);
            },
            t,
            &mut y,
            dt,
        );
        let bad = y[..4].iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) || y.iter().any(|v| !v.is_finite());
        if bad {
            return Err(Error::UnstableRun {
                t: t + dt,
                partial: Box::new(log),
            });
        }
    }
    Ok(log)
}
