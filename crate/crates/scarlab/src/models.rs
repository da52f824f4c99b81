//! Model Hamiltonian families.
//!
//! * [`pendulum1d`] — `½I² + t·ε·cos θ`, the one-degree workhorse for
//!   remainder-order, residual and window experiments.
//! * [`example_family`] — `½|I|² + Σ_{i=1}^{d−1} t^i f_i(φ) g_{i+2}(I)`
//!   with 2π-periodic amplitudes of nonzero mean `C_i`. The action powers
//!   default to weighted component sums `g_p(I) = Σ_j w_j I_j^p`, which
//!   keep the frequency rows `∇h₀, ∇(C₁g₃), …` linearly independent on the
//!   box when the weights are staggered; the radial form `|I|^p` is also
//!   available but is degenerate for d ≥ 2 (all rows radial) — useful only
//!   as a negative control.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScarError};
use crate::series::{Domain, FourierTaylorSeries};
use crate::timepoly::TimePolynomialHamiltonian;

/// Angle profile of one perturbation amplitude `f_i(φ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleProfile {
    /// Constant part; must be nonzero (`C_i ≠ 0`).
    pub mean: f64,
    /// Cosine terms `(γ, amplitude)`.
    pub cosines: Vec<(Vec<i32>, f64)>,
    /// Sine terms `(γ, amplitude)`.
    pub sines: Vec<(Vec<i32>, f64)>,
}

impl AngleProfile {
    /// `1 + cos(φ_axis)` — the default amplitude.
    pub fn one_plus_cos(axis: usize, dim: usize) -> Self {
        let mut gamma = vec![0i32; dim];
        gamma[axis] = 1;
        AngleProfile {
            mean: 1.0,
            cosines: vec![(gamma, 1.0)],
            sines: Vec::new(),
        }
    }

    fn build(&self, domain: &Domain, k_theta: u32, k_action: u32) -> FourierTaylorSeries {
        let mut s = FourierTaylorSeries::constant(domain.clone(), k_theta, k_action, self.mean);
        for (gamma, amp) in &self.cosines {
            s = s.add(&FourierTaylorSeries::cosine_mode(
                domain.clone(),
                k_theta,
                k_action,
                gamma,
                *amp,
            ));
        }
        for (gamma, amp) in &self.sines {
            s = s.add(&FourierTaylorSeries::sine_mode(
                domain.clone(),
                k_theta,
                k_action,
                gamma,
                *amp,
            ));
        }
        s
    }
}

/// Shape of the action factors `g_p(I)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PowerShape {
    /// `g_p(I) = Σ_j w_j I_j^p` (exact polynomial).
    Componentwise { weights: Vec<f64> },
    /// `g_p(I) = |I|^p`, Taylor-expanded around the box center. Radial
    /// gradients are parallel to `∇h₀` — degenerate frequency rows for
    /// d ≥ 2.
    Radial,
}

impl PowerShape {
    /// Staggered default weights for the `i`-th perturbation order
    /// (1-based): halving weights rotated by `i−1`.
    pub fn default_for(dim: usize, i: usize) -> Self {
        let weights = (0..dim)
            .map(|j| 0.5f64.powi(((j + i - 1) % dim) as i32))
            .collect();
        PowerShape::Componentwise { weights }
    }
}

/// `½Σ_j I_j²` as an exact polynomial series.
pub fn kinetic_energy(domain: &Domain, k_theta: u32, k_action: u32) -> FourierTaylorSeries {
    let d = domain.dim();
    let mut acc = FourierTaylorSeries::zero(domain.clone(), k_theta, k_action);
    for j in 0..d {
        let ij = FourierTaylorSeries::action_coordinate(domain.clone(), k_theta, k_action, j);
        acc = acc.add(&ij.multiply(&ij).scale(0.5));
    }
    acc
}

/// `I_j^p` as an exact polynomial series.
fn action_power(domain: &Domain, k_theta: u32, k_action: u32, j: usize, p: u32) -> FourierTaylorSeries {
    let ij = FourierTaylorSeries::action_coordinate(domain.clone(), k_theta, k_action, j);
    let mut acc = FourierTaylorSeries::constant(domain.clone(), k_theta, k_action, 1.0);
    for _ in 0..p {
        acc = acc.multiply(&ij);
    }
    acc
}

/// Taylor expansion of `|I|^p` around the box center (binomial series in
/// `(|I|² − |I₀|²)/|I₀|²`).
fn radial_power(domain: &Domain, k_theta: u32, k_action: u32, p: u32) -> Result<FourierTaylorSeries> {
    let d = domain.dim();
    let norm0_sq: f64 = domain.base_point.iter().map(|x| x * x).sum();
    if norm0_sq <= 0.0 {
        return Err(ScarError::InvalidModel(
            "radial powers need a box center away from the origin".into(),
        ));
    }
    let mut u = FourierTaylorSeries::zero(domain.clone(), k_theta, k_action);
    for j in 0..d {
        let ij = FourierTaylorSeries::action_coordinate(domain.clone(), k_theta, k_action, j);
        u = u.add(&ij.multiply(&ij));
    }
    // x = (|I|² − |I₀|²)/|I₀|²; |I|^p = |I₀|^p (1+x)^{p/2}
    let x = u
        .sub(&FourierTaylorSeries::constant(domain.clone(), k_theta, k_action, norm0_sq))
        .scale(1.0 / norm0_sq);
    let exponent = p as f64 / 2.0;
    let mut acc = FourierTaylorSeries::constant(domain.clone(), k_theta, k_action, 1.0);
    let mut xpow = FourierTaylorSeries::constant(domain.clone(), k_theta, k_action, 1.0);
    let mut binom = 1.0;
    for k in 1..=k_action {
        binom *= (exponent - (k as f64 - 1.0)) / k as f64;
        xpow = xpow.multiply(&x);
        acc = acc.add(&xpow.scale(binom));
    }
    Ok(acc.scale(norm0_sq.powf(exponent)))
}

/// `½I² + t·ε·cos θ` (d = 1).
pub fn pendulum1d(
    domain: &Domain,
    epsilon: f64,
    k_theta: u32,
    k_action: u32,
    t_order: u32,
    t_max: f64,
) -> TimePolynomialHamiltonian {
    assert_eq!(domain.dim(), 1);
    let mut tp = TimePolynomialHamiltonian::monomial(
        0,
        kinetic_energy(domain, k_theta, k_action),
        t_order,
        t_max,
    );
    tp.add_term(
        1,
        FourierTaylorSeries::cosine_mode(domain.clone(), k_theta, k_action, &[1], epsilon),
    );
    tp
}

/// The perturbed family `½|I|² + Σ_{i=1}^{d−1} t^i·ε_i·f_i(φ)·g_{i+2}(I)`.
///
/// Rejects zero-mean amplitudes: `C_i = (2π)^{-d}∫f_i ≠ 0` is what makes
/// the frequency rows usable.
pub fn example_family(
    domain: &Domain,
    amplitudes: &[(AngleProfile, PowerShape, f64)],
    k_theta: u32,
    k_action: u32,
    t_order: u32,
    t_max: f64,
) -> Result<TimePolynomialHamiltonian> {
    let d = domain.dim();
    let mut tp = TimePolynomialHamiltonian::monomial(
        0,
        kinetic_energy(domain, k_theta, k_action),
        t_order,
        t_max,
    );
    for (i, (profile, shape, scale)) in amplitudes.iter().enumerate() {
        if profile.mean == 0.0 {
            return Err(ScarError::InvalidModel(format!(
                "amplitude f_{} has zero mean; C_i must be nonzero",
                i + 1
            )));
        }
        let f = profile.build(domain, k_theta, k_action);
        let p = (i + 3) as u32; // g_{i+2} with i 1-based
        let g = match shape {
            PowerShape::Componentwise { weights } => {
                if weights.len() != d {
                    return Err(ScarError::InvalidModel(format!(
                        "power weights must have dim {d} entries"
                    )));
                }
                let mut acc = FourierTaylorSeries::zero(domain.clone(), k_theta, k_action);
                for (j, w) in weights.iter().enumerate() {
                    if *w != 0.0 {
                        acc = acc.add(&action_power(domain, k_theta, k_action, j, p).scale(*w));
                    }
                }
                acc
            }
            PowerShape::Radial => radial_power(domain, k_theta, k_action, p)?,
        };
        tp.add_term((i + 1) as u32, f.multiply(&g).scale(*scale));
    }
    Ok(tp)
}

/// Default example family: `f_i = 1 + cos φ_i` (so `C_i = 1`), staggered
/// componentwise powers, all scales `epsilon`.
pub fn example_family_default(
    domain: &Domain,
    epsilon: f64,
    k_theta: u32,
    k_action: u32,
    t_order: u32,
    t_max: f64,
) -> Result<TimePolynomialHamiltonian> {
    let d = domain.dim();
    let amplitudes: Vec<(AngleProfile, PowerShape, f64)> = (1..d)
        .map(|i| {
            (
                AngleProfile::one_plus_cos(i - 1, d),
                PowerShape::default_for(d, i),
                epsilon,
            )
        })
        .collect();
    example_family(domain, &amplitudes, k_theta, k_action, t_order, t_max)
}

/// Mean of a series over the angles at the box center — quadrature oracle
/// for `C_i` (trapezoid over a θ-grid, exact for trigonometric content).
pub fn angle_mean_quadrature(s: &FourierTaylorSeries, n: usize) -> f64 {
    let d = s.dim();
    let total = n.pow(d as u32);
    let mut sum = 0.0;
    let mut theta = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for j in (0..d).rev() {
            theta[j] = 2.0 * std::f64::consts::PI * (rem % n) as f64 / n as f64;
            rem /= n;
        }
        sum += s.eval_unchecked(&theta, &s.domain().base_point.clone());
    }
    sum / total as f64
}

/// Verify the `C_i ≠ 0` data of a built family: returns the quadrature
/// means of each `t^i` term at the box center.
pub fn family_means(tp: &TimePolynomialHamiltonian, n: usize) -> Vec<(u32, f64)> {
    tp.terms()
        .filter(|(p, _)| *p > 0)
        .map(|(p, s)| (p, angle_mean_quadrature(s, n)))
        .collect()
}

/// Convenience: complex coefficient access for tests.
pub fn coeff_of(tp: &TimePolynomialHamiltonian, power: u32, gamma: &[i32], alpha: &[u8]) -> Complex64 {
    tp.term(power)
        .map(|s| s.coeff(gamma, alpha))
        .unwrap_or(Complex64::new(0.0, 0.0))
}
