//! Hamiltonian families polynomial in the perturbation parameter `t`:
//! `H(θ, I; t) = Σ_p t^p H_p(θ, I)` with each `H_p` a Fourier–Taylor series.
//!
//! The family is the working representation of the anisotropic-in-`t`
//! Hamiltonians: `t`-dependence is an explicit polynomial family (one series
//! per power), truncated at `t_order`. Powers stay distinct; merging adds
//! coefficients of equal powers.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::series::{Domain, FourierTaylorSeries, Var};

/// `Σ_p t^p H_p(θ, I)`, truncated at `t_order`, valid for `|t| ≤ t_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimePolynomialHamiltonian {
    terms: BTreeMap<u32, FourierTaylorSeries>,
    t_order: u32,
    t_max: f64,
    dim: usize,
    domain: Domain,
    k_theta: u32,
    k_action: u32,
}

impl TimePolynomialHamiltonian {
    pub fn zero(domain: Domain, k_theta: u32, k_action: u32, t_order: u32, t_max: f64) -> Self {
        let dim = domain.dim();
        TimePolynomialHamiltonian {
            terms: BTreeMap::new(),
            t_order,
            t_max,
            dim,
            domain,
            k_theta,
            k_action,
        }
    }

    /// Family whose only term is `t^power · series`.
    pub fn monomial(power: u32, series: FourierTaylorSeries, t_order: u32, t_max: f64) -> Self {
        let mut out = Self::zero(
            series.domain().clone(),
            series.k_theta(),
            series.k_action(),
            t_order,
            t_max,
        );
        out.add_term(power, series);
        out
    }

    /// Merge `t^power · series` into the family (equal powers add).
    pub fn add_term(&mut self, power: u32, series: FourierTaylorSeries) {
        if power > self.t_order || series.is_zero() {
            return;
        }
        assert_eq!(series.dim(), self.dim);
        match self.terms.remove(&power) {
            Some(existing) => {
                let sum = existing.add(&series);
                if !sum.is_zero() {
                    self.terms.insert(power, sum);
                }
            }
            None => {
                self.terms.insert(power, series);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn k_theta(&self) -> u32 {
        self.k_theta
    }

    pub fn k_action(&self) -> u32 {
        self.k_action
    }

    pub fn t_order(&self) -> u32 {
        self.t_order
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn set_t_max(&mut self, t_max: f64) {
        self.t_max = t_max;
    }

    pub fn powers(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.keys().copied()
    }

    pub fn term(&self, power: u32) -> Option<&FourierTaylorSeries> {
        self.terms.get(&power)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &FourierTaylorSeries)> {
        self.terms.iter().map(|(p, s)| (*p, s))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest power present with a nonzero series.
    pub fn leading_power(&self) -> Option<u32> {
        self.terms.keys().next().copied()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.t_order = self.t_order.min(other.t_order);
        out.t_max = self.t_max.min(other.t_max);
        out.terms.retain(|p, _| *p <= out.t_order);
        for (p, s) in &other.terms {
            if *p <= out.t_order {
                out.add_term(*p, s.clone());
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        if factor == 0.0 {
            out.terms.clear();
            return out;
        }
        for s in out.terms.values_mut() {
            *s = s.scale(factor);
        }
        out
    }

    /// Product, truncated at `t_order` in `t` and at the series truncations
    /// in `(γ, α)`.
    pub fn multiply(&self, other: &Self) -> Self {
        let t_order = self.t_order.min(other.t_order);
        let mut out = Self::zero(
            self.domain.clone(),
            self.k_theta.max(other.k_theta),
            self.k_action.max(other.k_action),
            t_order,
            self.t_max.min(other.t_max),
        );
        for (pa, sa) in &self.terms {
            for (pb, sb) in &other.terms {
                let p = pa + pb;
                if p > t_order {
                    continue;
                }
                out.add_term(p, sa.multiply(sb));
            }
        }
        out
    }

    /// Shift all powers up by `delta` (multiplication by `t^delta`).
    pub fn shift_power(&self, delta: u32) -> Self {
        let mut out = Self::zero(
            self.domain.clone(),
            self.k_theta,
            self.k_action,
            self.t_order,
            self.t_max,
        );
        for (p, s) in &self.terms {
            if p + delta <= self.t_order {
                out.terms.insert(p + delta, s.clone());
            }
        }
        out
    }

    /// Keep only powers in `[lo, hi)`.
    pub fn power_window(&self, lo: u32, hi: u32) -> Self {
        let mut out = self.clone();
        out.terms.retain(|p, _| *p >= lo && *p < hi);
        out
    }

    /// Drop all powers below `lo`.
    pub fn drop_below(&self, lo: u32) -> Self {
        let mut out = self.clone();
        out.terms.retain(|p, _| *p >= lo);
        out
    }

    pub fn partial_derivative(&self, var: Var) -> Self {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter_map(|(p, s)| {
                let d = s.partial_derivative(var);
                if d.is_zero() {
                    None
                } else {
                    Some((*p, d))
                }
            })
            .collect();
        out
    }

    /// `∂_t^n` of the family (polynomial differentiation in `t`).
    pub fn t_derivative(&self, n: u32) -> Self {
        let mut out = Self::zero(
            self.domain.clone(),
            self.k_theta,
            self.k_action,
            self.t_order,
            self.t_max,
        );
        for (p, s) in &self.terms {
            if *p < n {
                continue;
            }
            let mut fac = 1.0;
            for q in (*p - n + 1)..=*p {
                fac *= q as f64;
            }
            out.terms.insert(p - n, s.scale(fac));
        }
        out
    }

    /// Angle average applied per power.
    pub fn angle_average(&self) -> Self {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter_map(|(p, s)| {
                let a = s.angle_average();
                if a.is_zero() {
                    None
                } else {
                    Some((*p, a))
                }
            })
            .collect();
        out
    }

    pub fn remove_angle_average(&self) -> Self {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter_map(|(p, s)| {
                let a = s.remove_angle_average();
                if a.is_zero() {
                    None
                } else {
                    Some((*p, a))
                }
            })
            .collect();
        out
    }

    /// True when no power carries angle-dependent coefficients.
    pub fn is_angle_free(&self) -> bool {
        self.terms.values().all(|s| s.remove_angle_average().is_zero())
    }

    /// Collapse to a single series at a fixed `t` (Horner in `t` over the
    /// coefficient tables).
    pub fn series_at(&self, t: f64) -> FourierTaylorSeries {
        let mut acc = FourierTaylorSeries::zero(self.domain.clone(), self.k_theta, self.k_action);
        for (p, s) in &self.terms {
            acc = acc.add(&s.scale(t.powi(*p as i32)));
        }
        acc
    }

    /// Evaluate at `(θ, I, t)` with the box guard.
    pub fn eval(&self, theta: &[f64], action: &[f64], t: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (p, s) in &self.terms {
            sum += t.powi(*p as i32) * s.eval(theta, action)?;
        }
        Ok(sum)
    }

    pub fn eval_unchecked(&self, theta: &[f64], action: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(p, s)| t.powi(*p as i32) * s.eval_unchecked(theta, action))
            .sum()
    }

    /// Largest coefficient magnitude across all powers.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|s| s.max_abs_coeff()).fold(0.0, f64::max)
    }

    /// Per-power d-vector of angle-gradient series `∂H/∂I_j`.
    pub fn action_gradient(&self) -> Vec<Self> {
        (0..self.dim)
            .map(|j| self.partial_derivative(Var::Action(j)))
            .collect()
    }

    /// Formal substitution `H(I + Ξ(θ,I;t), θ + Λ(θ,I;t); t)` with
    /// `t`-polynomial maps, truncated at total map order `KI` and power
    /// `t_order`.
    pub fn compose_near_identity(&self, xi: &[Self], lambda: &[Self]) -> Result<Self> {
        assert_eq!(xi.len(), self.dim);
        assert_eq!(lambda.len(), self.dim);
        let order = self.k_action as usize;
        let d = self.dim;

        let indices = crate::series::compose_indices(d, order);
        let one = Self::monomial(
            0,
            FourierTaylorSeries::constant(self.domain.clone(), self.k_theta, self.k_action, 1.0),
            self.t_order,
            self.t_max,
        );
        for (j, x) in xi.iter().enumerate() {
            // Worst-case |Ξ_j| over the box and |t| ≤ t_max.
            let sup: f64 = x
                .terms()
                .map(|(p, s)| self.t_max.powi(p as i32).abs() * s.sup_estimate())
                .sum();
            let margin = self.domain.radius[j] / 2.0;
            if sup > margin {
                return Err(crate::error::ScarError::MapTooLarge { sup, margin });
            }
        }

        let mut deriv: BTreeMap<Vec<u8>, Self> = BTreeMap::new();
        let mut power: BTreeMap<Vec<u8>, Self> = BTreeMap::new();
        deriv.insert(vec![0; 2 * d], self.clone());
        power.insert(vec![0; 2 * d], one);
        let mut acc = Self::zero(
            self.domain.clone(),
            self.k_theta,
            self.k_action,
            self.t_order,
            self.t_max,
        );
        for idx in &indices {
            if let Some(slot) = idx.iter().position(|x| *x > 0) {
                let mut prev = idx.clone();
                prev[slot] -= 1;
                let var = if slot < d {
                    Var::Action(slot)
                } else {
                    Var::Angle(slot - d)
                };
                let map = if slot < d { &xi[slot] } else { &lambda[slot - d] };
                let d_new = deriv[&prev].partial_derivative(var);
                let p_new = if map.is_zero() {
                    Self::zero(
                        self.domain.clone(),
                        self.k_theta,
                        self.k_action,
                        self.t_order,
                        self.t_max,
                    )
                } else {
                    power[&prev].multiply(map)
                };
                deriv.insert(idx.clone(), d_new);
                power.insert(idx.clone(), p_new);
            }
            let p = &power[idx];
            if p.is_zero() {
                continue;
            }
            let dv = &deriv[idx];
            if dv.is_zero() {
                continue;
            }
            let fact: f64 = idx.iter().map(|k| (1..=(*k as u32)).map(|q| q as f64).product::<f64>()).product();
            acc = acc.add(&dv.multiply(p).scale(1.0 / fact));
        }
        Ok(acc)
    }

    /// Sup norm over a `(θ, I)` sample grid at fixed `t`.
    pub fn sup_on_grid(&self, t: f64, n_theta: usize, n_action: usize) -> f64 {
        let collapsed = self.series_at(t);
        let d = self.dim;
        let mut worst = 0.0f64;
        let mut theta = vec![0.0; d];
        let mut action = vec![0.0; d];
        let theta_pts: Vec<f64> = (0..n_theta)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64)
            .collect();
        let action_pts: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                (0..n_action)
                    .map(|i| {
                        let r = self.domain.radius[j] * 0.8;
                        self.domain.base_point[j] - r + 2.0 * r * i as f64 / (n_action.max(2) - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; 2 * d];
        loop {
            for j in 0..d {
                theta[j] = theta_pts[idx[j]];
                action[j] = action_pts[j][idx[d + j]];
            }
            worst = worst.max(collapsed.eval_unchecked(&theta, &action).abs());
            // odometer
            let mut carry = 0;
            loop {
                if carry == 2 * d {
                    return worst;
                }
                idx[carry] += 1;
                let limit = if carry < d { n_theta } else { n_action };
                if idx[carry] < limit {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
        }
    }
}
