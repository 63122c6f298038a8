//! Robust references through the Brunovsky canonical form.
//!
//! In canonical coordinates `x̃ = T x` the nominal model is a chain of
//! integrators with transformed disturbances `d̃ = T τ`. Choosing the first
//! coordinate as the flat output y gives
//!
//! ```text
//! x̃_m = y^{(m−1)} + Σ_{j<m} d̃_j^{(m−1−j)}
//! u   = y^{(p)} + Σ_{j≤p} d̃_j^{(p−j)} − a_cᵀ x̃
//! ```

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BrunovskyTransform;
use crate::observer::DisturbanceEstimates;

/// What to do when a transformed disturbance needs a derivative order the
/// observer does not provide.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativePolicy {
    /// Only rows of `T τ` that are not structurally zero demand derivatives;
    /// a genuinely missing order is a configuration error.
    #[default]
    StructuralZeros,
    /// Missing orders are taken as zero.
    Truncate,
}

/// `d̃_j^{(i)}` for rows j (canonical channels) and derivative orders i ≤ k.
#[derive(Clone, Debug)]
pub struct TransformedDisturbanceStack {
    /// `values[j][i] = d̃_j^{(i)}`.
    pub values: Vec<Vec<f64>>,
    /// Rows known to vanish identically for any admissible disturbance.
    pub structurally_zero: Vec<bool>,
    pub policy: DerivativePolicy,
}

impl TransformedDisturbanceStack {
    pub fn zeros(p: usize, k: usize) -> Self {
        Self {
            values: vec![vec![0.0; k + 1]; p],
            structurally_zero: vec![false; p],
            policy: DerivativePolicy::StructuralZeros,
        }
    }

    pub fn order(&self) -> usize {
        self.values.first().map_or(0, |r| r.len() - 1)
    }

    pub fn with_structure(mut self, structurally_zero: Vec<bool>, policy: DerivativePolicy) -> Self {
        self.structurally_zero = structurally_zero;
        self.policy = policy;
        self
    }

    /// `d̃_j^{(order)}` with `j` zero-based.
    pub fn get(&self, j: usize, order: usize) -> Result<f64> {
        if let Some(v) = self.values[j].get(order) {
            return Ok(*v);
        }
        if self.structurally_zero[j] || self.policy == DerivativePolicy::Truncate {
            return Ok(0.0);
        }
        Err(Error::InsufficientDerivatives {
            what: format!("transformed disturbance d̃_{}", j + 1),
            required: order,
            available: self.order(),
        })
    }
}

/// `d̃^{(i)} = T τ̂^{(i)}` for every available order.
pub fn transform_disturbances(
    transform: &BrunovskyTransform,
    estimates: &DisturbanceEstimates,
) -> Result<TransformedDisturbanceStack> {
    let p = transform.dim();
    if let Some(bad) = estimates.tau_hat.iter().find(|v| v.len() != p) {
        return Err(Error::DimensionMismatch {
            what: "disturbance estimate length",
            expected: p,
            got: bad.len(),
        });
    }
    let k = estimates.order();
    let mut stack = TransformedDisturbanceStack::zeros(p, k);
    for (i, tau) in estimates.tau_hat.iter().enumerate() {
        let d = &transform.t * tau;
        for j in 0..p {
            stack.values[j][i] = d[j];
        }
    }
    Ok(stack)
}

/// Rows of `T` that have no weight on any channel where the disturbance can
/// be nonzero.
pub fn structural_zero_rows(transform: &BrunovskyTransform, channel_mask: &[bool]) -> Vec<bool> {
    let t = &transform.t;
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..t.nrows())
        .map(|j| {
            channel_mask
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .all(|(i, _)| t[(j, i)].abs() <= 1e-9 * scale)
        })
        .collect()
}

/// Checks at configuration time that an observer of order `k` supplies every
/// derivative the control law needs (`d̃_j` up to order p − j).
pub fn check_derivative_orders(structurally_zero: &[bool], k: usize, policy: DerivativePolicy) -> Result<()> {
    if policy == DerivativePolicy::Truncate {
        return Ok(());
    }
    let p = structurally_zero.len();
    for (j0, &zero) in structurally_zero.iter().enumerate() {
        let required = p - (j0 + 1);
        if !zero && required > k {
            return Err(Error::InsufficientDerivatives {
                what: format!("transformed disturbance d̃_{} (observer order)", j0 + 1),
                required,
                available: k,
            });
        }
    }
    Ok(())
}

/// Disturbance-augmented canonical reference `x̃_ref`.
pub fn canonical_reference(y: &[f64], stack: &TransformedDisturbanceStack) -> Result<DVector<f64>> {
    let p = stack.values.len();
    if y.len() < p {
        return Err(Error::InsufficientDerivatives {
            what: "flat output".into(),
            required: p - 1,
            available: y.len().saturating_sub(1),
        });
    }
    let mut xt = DVector::zeros(p);
    for m in 0..p {
        let mut v = y[m];
        for j in 0..m {
            v += stack.get(j, m - 1 - j)?;
        }
        xt[m] = v;
    }
    Ok(xt)
}

pub fn brunovsky_state_reference(
    transform: &BrunovskyTransform,
    y: &[f64],
    stack: &TransformedDisturbanceStack,
) -> Result<DVector<f64>> {
    Ok(&transform.t_inv * canonical_reference(y, stack)?)
}

/// Feedforward part of the law (everything except `K(x_ref − x)`).
pub fn brunovsky_feedforward(
    transform: &BrunovskyTransform,
    y: &[f64],
    stack: &TransformedDisturbanceStack,
) -> Result<(f64, DVector<f64>)> {
    let p = transform.dim();
    if y.len() < p + 1 {
        return Err(Error::InsufficientDerivatives {
            what: "flat output".into(),
            required: p,
            available: y.len().saturating_sub(1),
        });
    }
    let xt = canonical_reference(y, stack)?;
    let mut u = y[p] - transform.a_c.dot(&xt);
    for j in 0..p {
        u += stack.get(j, p - 1 - j)?;
    }
    Ok((u, &transform.t_inv * xt))
}

pub fn brunovsky_control(
    transform: &BrunovskyTransform,
    y: &[f64],
    stack: &TransformedDisturbanceStack,
    k: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    if k.len() != transform.dim() || x.len() != transform.dim() {
        return Err(Error::DimensionMismatch {
            what: "feedback gain / state length",
            expected: transform.dim(),
            got: if k.len() != transform.dim() { k.len() } else { x.len() },
        });
    }
    let (u_ff, x_ref) = brunovsky_feedforward(transform, y, stack)?;
    Ok(u_ff + k.dot(&(x_ref - x)))
}

/// Reconstructed state `ξ = T⁻¹ ξ̃` that sees only a matched disturbance:
/// `ξ̃_m = x̃_m − Σ_{j<m} d̃_j^{(m−1−j)}`.
pub fn reconstruct_xi(
    transform: &BrunovskyTransform,
    x: &DVector<f64>,
    stack: &TransformedDisturbanceStack,
) -> Result<DVector<f64>> {
    let p = transform.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            what: "state length",
            expected: p,
            got: x.len(),
        });
    }
    let mut xi = &transform.t * x;
    for m in 1..p {
        for j in 0..m {
            xi[m] -= stack.get(j, m - 1 - j)?;
        }
    }
    Ok(&transform.t_inv * xi)
}
