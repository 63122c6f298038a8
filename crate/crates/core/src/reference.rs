//! Desired output trajectories with closed-form derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Desired trajectory of the controlled output. Derivatives are analytic
/// because the flat feedforward consumes up to the state dimension's order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · sin(2π f t + phase)`.
    Sinusoid {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_frequency")]
        frequency_hz: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Quintic smoothstep from 0 to `amplitude` over `[t_start, t_start + rise]`.
    Step {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        t_start: f64,
        #[serde(default = "default_rise")]
        rise: f64,
    },
}

fn default_amplitude() -> f64 {
    0.1
}

fn default_frequency() -> f64 {
    0.5
}

fn default_rise() -> f64 {
    0.5
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Sinusoid {
            amplitude: default_amplitude(),
            frequency_hz: default_frequency(),
            phase: 0.0,
            offset: 0.0,
        }
    }
}

impl Reference {
    /// `(r, ṙ, …, r^{(order)})` at time `t`.
    pub fn derivs(&self, t: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        match *self {
            Reference::Constant { value } => out[0] = value,
            Reference::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
                offset,
            } => {
                let w = 2.0 * PI * frequency_hz;
                let arg = w * t + phase;
                let (s, c) = arg.sin_cos();
                let mut scale = amplitude;
                for (n, slot) in out.iter_mut().enumerate() {
                    *slot = scale
                        * match n % 4 {
                            0 => s,
                            1 => c,
                            2 => -s,
                            _ => -c,
                        };
                    scale *= w;
                }
                out[0] += offset;
            }
            Reference::Step {
                amplitude,
                t_start,
                rise,
            } => {
                if t >= t_start + rise {
                    out[0] = amplitude;
                } else if t > t_start {
                    // 10τ³ − 15τ⁴ + 6τ⁵ and its derivatives in τ = (t − t₀)/rise
                    let tau = (t - t_start) / rise;
                    let poly = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
                    let mut coeffs = poly.to_vec();
                    let mut scale = amplitude;
                    for slot in out.iter_mut() {
                        *slot = scale * coeffs.iter().rev().fold(0.0, |acc, c| acc * tau + c);
                        coeffs = coeffs
                            .iter()
                            .enumerate()
                            .skip(1)
                            .map(|(i, c)| c * i as f64)
                            .collect();
                        if coeffs.is_empty() {
                            break;
                        }
                        scale /= rise;
                    }
                }
            }
        }
        out
    }

    /// Largest excursion of the reference from zero, used to normalize
    /// tracking metrics.
    pub fn amplitude(&self) -> f64 {
        match *self {
            Reference::Constant { value } => value.abs(),
            Reference::Sinusoid {
                amplitude, offset, ..
            } => amplitude.abs() + offset.abs(),
            Reference::Step { amplitude, .. } => amplitude.abs(),
        }
    }
}
