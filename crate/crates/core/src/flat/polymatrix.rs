//! Robust references through a polynomial-matrix model
//! `A(s) q = B(s) u − d` of a second-order mechanical system.
//!
//! The flat output y parameterizes the generalized coordinates as
//! `q = p₁(s) y + P₂(s) d` and the input as
//! `u = q₁(s) y + q₂ᵀ(s) d_m + q₃ᵀ(s) d_mm`, where `d_m` are the disturbance
//! forces acting in the input channel and `d_mm` the remaining ones.
//!
//! Only the two-coordinate case is supported: there the left annihilator of
//! `B(s)` is unique up to scale.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{PolyMatrix, Polynomial};
use crate::observer::DisturbanceEstimates;

/// `A(s) q = B(s) u − d` with q the generalized coordinates. The state-space
/// counterpart orders states as `(q₀, q̇₀, q₁, q̇₁, …)` and its lumped
/// disturbance relates to the forces through `d_i = mass_i · τ[2i+1]`.
#[derive(Clone, Debug)]
pub struct PolyModel {
    pub a: PolyMatrix,
    pub b: PolyMatrix,
    pub masses: Vec<f64>,
}

impl PolyModel {
    pub fn new(a: PolyMatrix, b: PolyMatrix, masses: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch {
                what: "polynomial system matrix columns",
                expected: n,
                got: a.cols(),
            });
        }
        if b.rows() != n || b.cols() != 1 {
            return Err(Error::DimensionMismatch {
                what: "polynomial input matrix rows",
                expected: n,
                got: b.rows(),
            });
        }
        if masses.len() != n {
            return Err(Error::DimensionMismatch {
                what: "mass list",
                expected: n,
                got: masses.len(),
            });
        }
        if n == 2 && a.det2()?.is_zero() {
            return Err(Error::SingularChannel("det A(s) vanishes identically".into()));
        }
        Ok(Self { a, b, masses })
    }

    /// `M s² + D s + K` with diagonal mass matrix.
    pub fn mechanical(masses: &[f64], damping: &DMatrix<f64>, stiffness: &DMatrix<f64>, input: &[f64]) -> Result<Self> {
        let n = masses.len();
        if damping.shape() != (n, n) || stiffness.shape() != (n, n) || input.len() != n {
            return Err(Error::DimensionMismatch {
                what: "mechanical model matrices",
                expected: n,
                got: damping.nrows(),
            });
        }
        let mut a = PolyMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let m = if r == c { masses[r] } else { 0.0 };
                a.set(r, c, Polynomial::new(vec![stiffness[(r, c)], damping[(r, c)], m]));
            }
        }
        let b = PolyMatrix::column(input.iter().map(|&v| Polynomial::constant(v)).collect())?;
        Self::new(a, b, masses.to_vec())
    }

    pub fn p_star(&self) -> usize {
        self.a.rows()
    }

    /// Force-disturbance derivative stacks `d_i^{(j)}` from state-space
    /// estimates; `out[i][j]`.
    pub fn force_stacks(&self, estimates: &DisturbanceEstimates) -> Result<Vec<Vec<f64>>> {
        let n = self.p_star();
        if let Some(bad) = estimates.tau_hat.iter().find(|v| v.len() != 2 * n) {
            return Err(Error::DimensionMismatch {
                what: "disturbance estimate length",
                expected: 2 * n,
                got: bad.len(),
            });
        }
        Ok((0..n)
            .map(|i| {
                estimates
                    .tau_hat
                    .iter()
                    .map(|tau| self.masses[i] * tau[2 * i + 1])
                    .collect()
            })
            .collect())
    }
}

/// Which entry of `p₁(s)` is pinned, and to what constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub cell: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct FlatParameterization {
    /// Left annihilator of `B(s)`, 1×2.
    pub c: PolyMatrix,
    pub c_sign_flipped: bool,
    pub p1: PolyMatrix,
    pub p2: PolyMatrix,
    pub q1: Polynomial,
    pub q2: PolyMatrix,
    pub q3: PolyMatrix,
    /// Coordinates whose disturbance lies in the input channel.
    pub matched: Vec<bool>,
}

/// `c = (−B₂, B₁)`, sign-normalized so that the leading coefficient of its
/// first nonzero entry is positive. The flag reports whether that flip
/// happened.
pub fn left_annihilator_2x1(b: &PolyMatrix) -> Result<(PolyMatrix, bool)> {
    if b.rows() != 2 || b.cols() != 1 {
        return Err(Error::UnsupportedDimension {
            what: "input polynomial matrix rows",
            got: b.rows(),
            supported: 2,
        });
    }
    if b.is_zero() {
        return Err(Error::SingularChannel("B(s) is identically zero".into()));
    }
    let c = [-b.get(1, 0), b.get(0, 0).clone()];
    let first = c.iter().find(|p| !p.is_zero()).expect("B(s) nonzero");
    let flip = first.leading() < 0.0;
    let c = if flip { [-&c[0], -&c[1]] } else { c };
    Ok((PolyMatrix::row(c.to_vec())?, flip))
}

/// Solves `cᵀA p₁ = 0` under the normalization, and builds `P₂` so that
/// `cᵀA P₂ d + cᵀ d = 0` for every disturbance.
pub fn solve_parameterization(
    model: &PolyModel,
    c: &PolyMatrix,
    norm: Normalization,
) -> Result<(PolyMatrix, PolyMatrix)> {
    if model.p_star() != 2 {
        return Err(Error::UnsupportedDimension {
            what: "polynomial model",
            got: model.p_star(),
            supported: 2,
        });
    }
    if norm.cell >= 2 {
        return Err(Error::invalid(format!("normalization cell {} out of range", norm.cell)));
    }
    if norm.value == 0.0 || !norm.value.is_finite() {
        return Err(Error::invalid("normalization value must be a nonzero constant"));
    }
    let ca = c.mul(&model.a)?;
    let (a1, a2) = (ca.get(0, 0).clone(), ca.get(0, 1).clone());
    if ca.is_zero() {
        return Err(Error::SingularChannel("cᵀA(s) vanishes identically".into()));
    }

    // (a₂, −a₁) spans the kernel of the row (a₁, a₂).
    let w = [a2.clone(), -&a1];
    let pinned = &w[norm.cell];
    if pinned.degree() != Some(0) {
        return Err(Error::SingularChannel(format!(
            "p₁ entry {} would be {pinned}, which cannot be pinned to a constant",
            norm.cell
        )));
    }
    let factor = norm.value / pinned.leading();
    let p1 = PolyMatrix::column(w.iter().map(|p| p.scale(factor)).collect())?;

    // Pivot: an entry of cᵀA that is a nonzero constant.
    let pivot = [&a1, &a2]
        .iter()
        .position(|p| p.degree() == Some(0))
        .ok_or_else(|| {
            Error::SingularChannel(format!(
                "no constant pivot in cᵀA(s) = ({a1}, {a2}) for the disturbance channel"
            ))
        })?;
    let pivot_value = ca.get(0, pivot).leading();
    let mut p2 = PolyMatrix::zeros(2, 2);
    for col in 0..2 {
        let entry = c.get(0, col).scale(-1.0 / pivot_value);
        p2.set(pivot, col, entry);
    }
    Ok((p1, p2))
}

/// `q₁ = (BᵀB)⁻¹BᵀA p₁`; the disturbance row `(BᵀB)⁻¹Bᵀ(A P₂ + I)` split
/// into matched (`q₂`) and mismatched (`q₃`) coordinates.
pub fn compute_q_polynomials(
    model: &PolyModel,
    c: &PolyMatrix,
    p1: &PolyMatrix,
    p2: &PolyMatrix,
) -> Result<(Polynomial, PolyMatrix, PolyMatrix)> {
    let n = model.p_star();
    let bt = model.b.transpose();
    let btb = bt.mul(&model.b)?.get(0, 0).clone();
    if btb.is_zero() {
        return Err(Error::SingularChannel("BᵀB vanishes identically".into()));
    }
    let q1 = bt.mul(&model.a)?.mul(p1)?.get(0, 0).div_exact(&btb)?;

    let mut ap2_plus_i = model.a.mul(p2)?;
    for i in 0..n {
        let diag = ap2_plus_i.get(i, i) + &Polynomial::constant(1.0);
        ap2_plus_i.set(i, i, diag);
    }
    let row = bt.mul(&ap2_plus_i)?;
    let mut q2 = PolyMatrix::zeros(1, n);
    let mut q3 = PolyMatrix::zeros(1, n);
    for i in 0..n {
        let entry = row.get(0, i).div_exact(&btb)?;
        if c.get(0, i).is_zero() {
            q2.set(0, i, entry);
        } else {
            q3.set(0, i, entry);
        }
    }
    Ok((q1, q2, q3))
}

impl FlatParameterization {
    pub fn new(model: &PolyModel, norm: Normalization) -> Result<Self> {
        let (c, c_sign_flipped) = left_annihilator_2x1(&model.b)?;
        let (p1, p2) = solve_parameterization(model, &c, norm)?;
        let (q1, q2, q3) = compute_q_polynomials(model, &c, &p1, &p2)?;
        let matched = (0..c.cols()).map(|i| c.get(0, i).is_zero()).collect();
        Ok(Self {
            c,
            c_sign_flipped,
            p1,
            p2,
            q1,
            q2,
            q3,
            matched,
        })
    }

    /// Highest derivative order of y the law consumes.
    pub fn flat_output_order(&self) -> usize {
        let pos = self.p1.max_degree().unwrap_or(0) + 1;
        self.q1.degree().unwrap_or(0).max(pos)
    }

    /// Highest derivative order of the disturbance forces the law consumes.
    pub fn disturbance_order(&self) -> usize {
        let refs = self.p2.max_degree().map_or(0, |d| d + 1);
        let q = [&self.q2, &self.q3]
            .iter()
            .filter_map(|m| m.max_degree())
            .max()
            .unwrap_or(0);
        refs.max(q)
    }

    /// Labeled ascending coefficients, one polynomial per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |name: String, p: &Polynomial| {
            let coeffs: Vec<String> = if p.is_zero() {
                vec!["0".into()]
            } else {
                p.coeffs().iter().map(|c| format!("{c:e}")).collect()
            };
            let _ = writeln!(out, "{name}: {}", coeffs.join(" "));
        };
        for i in 0..self.c.cols() {
            line(format!("c[{i}]"), self.c.get(0, i));
        }
        for i in 0..self.p1.rows() {
            line(format!("p1[{i}]"), self.p1.get(i, 0));
        }
        for r in 0..self.p2.rows() {
            for col in 0..self.p2.cols() {
                line(format!("P2[{r}][{col}]"), self.p2.get(r, col));
            }
        }
        line("q1".into(), &self.q1);
        for i in 0..self.q2.cols() {
            line(format!("q2[{i}]"), self.q2.get(0, i));
        }
        for i in 0..self.q3.cols() {
            line(format!("q3[{i}]"), self.q3.get(0, i));
        }
        out
    }

    /// Flat output stack such that coordinate `coord` follows `desired`.
    /// Requires `p₁[coord]` to be constant and `P₂` to leave that coordinate
    /// untouched.
    pub fn flat_output_for(&self, coord: usize, desired: &[f64]) -> Result<Vec<f64>> {
        let gain = self.p1.get(coord, 0);
        if gain.degree() != Some(0) {
            return Err(Error::SingularChannel(format!(
                "coordinate {coord} is not a constant multiple of the flat output ({gain})"
            )));
        }
        if (0..self.p2.cols()).any(|c| !self.p2.get(coord, c).is_zero()) {
            return Err(Error::SingularChannel(format!(
                "coordinate {coord} depends on the disturbance through P₂"
            )));
        }
        let g = gain.leading();
        Ok(desired.iter().map(|v| v / g).collect())
    }
}

fn shifted_sum(polys: &[&Polynomial], stacks: &[&[f64]], shift: usize) -> Result<f64> {
    let mut acc = 0.0;
    for (p, s) in polys.iter().zip(stacks) {
        acc += p.apply_shifted(s, shift)?;
    }
    Ok(acc)
}

/// State reference `(q₀, q̇₀, q₁, q̇₁)` and the feedforward input.
/// `forces[i]` is the derivative stack of the disturbance force on coordinate i.
pub fn polymatrix_references(
    param: &FlatParameterization,
    y: &[f64],
    forces: &[Vec<f64>],
) -> Result<(DVector<f64>, f64)> {
    let n = param.p1.rows();
    if forces.len() != n {
        return Err(Error::DimensionMismatch {
            what: "disturbance force channels",
            expected: n,
            got: forces.len(),
        });
    }
    let mut x_ref = DVector::zeros(2 * n);
    for i in 0..n {
        for order in 0..2 {
            let mut polys = vec![param.p1.get(i, 0)];
            let mut stacks: Vec<&[f64]> = vec![y];
            for (col, f) in forces.iter().enumerate() {
                polys.push(param.p2.get(i, col));
                stacks.push(f);
            }
            x_ref[2 * i + order] = shifted_sum(&polys, &stacks, order)?;
        }
    }
    let mut u = param.q1.apply(y)?;
    for (i, f) in forces.iter().enumerate() {
        u += param.q2.get(0, i).apply_shifted(f, 0)?;
        u += param.q3.get(0, i).apply_shifted(f, 0)?;
    }
    Ok((x_ref, u))
}

/// `u = q₁(s)y + K(x_ref − x) + q₂ᵀ(s)d_m + q₃ᵀ(s)d_mm`.
pub fn polymatrix_control(
    param: &FlatParameterization,
    y: &[f64],
    forces: &[Vec<f64>],
    k: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    let (x_ref, u_ff) = polymatrix_references(param, y, forces)?;
    if k.len() != x_ref.len() || x.len() != x_ref.len() {
        return Err(Error::DimensionMismatch {
            what: "feedback gain / state length",
            expected: x_ref.len(),
            got: if k.len() != x_ref.len() { k.len() } else { x.len() },
        });
    }
    Ok(u_ff + k.dot(&(x_ref - x)))
}

/// State minus the part of the reference induced by the disturbance forces.
pub fn reconstruct_xi(param: &FlatParameterization, x: &DVector<f64>, forces: &[Vec<f64>]) -> Result<DVector<f64>> {
    let n = param.p2.rows();
    if x.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "state length",
            expected: 2 * n,
            got: x.len(),
        });
    }
    let mut xi = x.clone();
    for i in 0..n {
        for order in 0..2 {
            for (col, f) in forces.iter().enumerate() {
                xi[2 * i + order] -= param.p2.get(i, col).apply_shifted(f, order)?;
            }
        }
    }
    Ok(xi)
}
