//! Truncated Fourier–Taylor arithmetic on `T^d × D`.
//!
//! A [`FourierTaylorSeries`] stores the table
//!
//! ```text
//!   f(θ, I) = Σ_{|γ|∞ ≤ Kθ, |α| ≤ KI}  c_{γ,α} · e^{i⟨γ,θ⟩} (I − I₀)^α
//! ```
//!
//! for a *real-valued* function: the reality constraint
//! `c_{−γ,α} = conj(c_{γ,α})` is maintained structurally — every mutating
//! operation fills the canonical half of the mode lattice and mirrors it,
//! so the identity holds bit-exactly, not merely up to rounding.
//!
//! Coefficients with `|γ|∞ > Kθ` or `|α| > KI` are identically zero; the
//! dense truncated table is the contract, the sparse map an implementation
//! detail. Composition is formal Taylor substitution; grid evaluation is
//! reserved for test oracles.

use std::collections::BTreeMap;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Result, ScarError};

/// Fourier mode index γ ∈ Z^d.
pub type Gamma = SmallVec<[i32; 4]>;
/// Taylor multi-index α ∈ N^d.
pub type Alpha = SmallVec<[u8; 4]>;

/// Key of one stored term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub gamma: Gamma,
    pub alpha: Alpha,
}

/// Action-space domain: a box `Π_j [I₀_j − r_j, I₀_j + r_j]`.
///
/// The base point is the Taylor expansion center; the radius is the
/// declared validity box for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub base_point: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Domain {
    pub fn new(base_point: Vec<f64>, radius: Vec<f64>) -> Self {
        assert_eq!(base_point.len(), radius.len());
        assert!(radius.iter().all(|r| *r > 0.0), "box radius must be positive");
        Domain { base_point, radius }
    }

    /// Box with the given corners; base point is the center.
    pub fn from_corners(lo: &[f64], hi: &[f64]) -> Self {
        let base: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let rad: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        Domain::new(base, rad)
    }

    pub fn dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        point
            .iter()
            .zip(&self.base_point)
            .zip(&self.radius)
            .all(|((x, b), r)| (x - b).abs() <= r * (1.0 + slack) + slack * 1e-12)
    }
}

/// Differentiation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// ∂/∂θ_j
    Angle(usize),
    /// ∂/∂I_j
    Action(usize),
}

/// Sign class of a mode: the first nonzero component decides.
fn gamma_sign(g: &[i32]) -> i32 {
    for &x in g {
        if x != 0 {
            return x.signum();
        }
    }
    0
}

fn neg_gamma(g: &Gamma) -> Gamma {
    g.iter().map(|x| -x).collect()
}

/// Truncated Fourier–Taylor table for a real function on `T^d × D`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylorSeries {
    dim: usize,
    domain: Domain,
    k_theta: u32,
    k_action: u32,
    coeffs: BTreeMap<TermKey, Complex64>,
}

impl FourierTaylorSeries {
    pub fn zero(domain: Domain, k_theta: u32, k_action: u32) -> Self {
        let dim = domain.dim();
        FourierTaylorSeries {
            dim,
            domain,
            k_theta,
            k_action,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(domain: Domain, k_theta: u32, k_action: u32, value: f64) -> Self {
        let mut s = Self::zero(domain, k_theta, k_action);
        if value != 0.0 {
            s.coeffs.insert(
                TermKey {
                    gamma: vec![0; s.dim].into_iter().collect(),
                    alpha: vec![0; s.dim].into_iter().collect(),
                },
                Complex64::new(value, 0.0),
            );
        }
        s
    }

    /// The coordinate function `I_j` (exact: constant + linear term).
    pub fn action_coordinate(domain: Domain, k_theta: u32, k_action: u32, j: usize) -> Self {
        let dim = domain.dim();
        assert!(j < dim);
        let base = domain.base_point[j];
        let mut s = Self::constant(domain, k_theta, k_action, base);
        let mut alpha: Alpha = vec![0; dim].into_iter().collect();
        alpha[j] = 1;
        s.coeffs.insert(
            TermKey {
                gamma: vec![0; dim].into_iter().collect(),
                alpha,
            },
            Complex64::new(1.0, 0.0),
        );
        s.purge_exact_zeros();
        s
    }

    /// `amplitude · cos(⟨γ,θ⟩)`.
    pub fn cosine_mode(domain: Domain, k_theta: u32, k_action: u32, gamma: &[i32], amplitude: f64) -> Self {
        let mut s = Self::zero(domain, k_theta, k_action);
        s.add_angle_mode(gamma, Complex64::new(0.5 * amplitude, 0.0));
        s
    }

    /// `amplitude · sin(⟨γ,θ⟩)`.
    pub fn sine_mode(domain: Domain, k_theta: u32, k_action: u32, gamma: &[i32], amplitude: f64) -> Self {
        let mut s = Self::zero(domain, k_theta, k_action);
        s.add_angle_mode(gamma, Complex64::new(0.0, -0.5 * amplitude));
        s
    }

    /// Add `c·e^{i⟨γ,θ⟩} + conj(c)·e^{−i⟨γ,θ⟩}` (α = 0). For γ = 0 the
    /// imaginary part must vanish and `2·Re c` is stored.
    pub fn add_angle_mode(&mut self, gamma: &[i32], c: Complex64) {
        assert_eq!(gamma.len(), self.dim);
        assert!(gamma.iter().all(|g| g.unsigned_abs() <= self.k_theta));
        let alpha: Alpha = vec![0; self.dim].into_iter().collect();
        self.add_term_pair(gamma.iter().copied().collect(), alpha, c);
    }

    /// Add the Hermitian pair for a general term.
    pub fn add_term_pair(&mut self, gamma: Gamma, alpha: Alpha, c: Complex64) {
        assert!((alpha.iter().map(|a| *a as u32).sum::<u32>()) <= self.k_action);
        if gamma_sign(&gamma) == 0 {
            let key = TermKey {
                gamma,
                alpha,
            };
            let entry = self.coeffs.entry(key).or_insert(Complex64::new(0.0, 0.0));
            *entry += Complex64::new(2.0 * c.re, 0.0);
        } else {
            let neg = neg_gamma(&gamma);
            *self
                .coeffs
                .entry(TermKey {
                    gamma,
                    alpha: alpha.clone(),
                })
                .or_insert(Complex64::new(0.0, 0.0)) += c;
            *self
                .coeffs
                .entry(TermKey { gamma: neg, alpha })
                .or_insert(Complex64::new(0.0, 0.0)) += c.conj();
        }
        self.purge_exact_zeros();
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

    pub fn coeff(&self, gamma: &[i32], alpha: &[u8]) -> Complex64 {
        let key = TermKey {
            gamma: gamma.iter().copied().collect(),
            alpha: alpha.iter().copied().collect(),
        };
        self.coeffs.get(&key).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn sum_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Upper bound for `sup_{T^d × D} |f|`: `Σ |c_{γ,α}| Π r_j^{α_j}`.
    pub fn sup_estimate(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let r: f64 = k
                    .alpha
                    .iter()
                    .zip(&self.domain.radius)
                    .map(|(a, r)| r.powi(*a as i32))
                    .product();
                c.norm() * r
            })
            .sum()
    }

    /// Largest deviation from the reality constraint. Zero by construction;
    /// exposed for tests.
    pub fn conjugation_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let mirror = self.coeff(&neg_gamma(&k.gamma), &k.alpha);
                (mirror - c.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    fn purge_exact_zeros(&mut self) {
        self.coeffs.retain(|_, c| c.re != 0.0 || c.im != 0.0);
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "series dimension mismatch");
        assert_eq!(
            self.domain.base_point, other.domain.base_point,
            "series base point mismatch"
        );
    }

    fn merged_geometry(&self, other: &Self) -> (Domain, u32, u32) {
        let radius: Vec<f64> = self
            .domain
            .radius
            .iter()
            .zip(&other.domain.radius)
            .map(|(a, b)| a.min(*b))
            .collect();
        (
            Domain::new(self.domain.base_point.clone(), radius),
            self.k_theta.max(other.k_theta),
            self.k_action.max(other.k_action),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let (domain, kt, ka) = self.merged_geometry(other);
        let mut out = Self::zero(domain, kt, ka);
        out.coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *out.coeffs.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out.purge_exact_zeros();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Scale by a real factor (reality-preserving exactly).
    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        if factor == 0.0 {
            out.coeffs.clear();
            return out;
        }
        for c in out.coeffs.values_mut() {
            *c *= factor;
        }
        out
    }

    /// Product with re-truncation to the merged `(Kθ, KI)`.
    ///
    /// The canonical half of the output lattice is accumulated in key order
    /// and mirrored, so reality holds exactly.
    pub fn multiply(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let (domain, kt, ka) = self.merged_geometry(other);
        let mut half: BTreeMap<TermKey, Complex64> = BTreeMap::new();
        for (ka_key, ca) in &self.coeffs {
            for (kb_key, cb) in &other.coeffs {
                let gamma: Gamma = ka_key
                    .gamma
                    .iter()
                    .zip(&kb_key.gamma)
                    .map(|(a, b)| a + b)
                    .collect();
                if gamma.iter().any(|g| g.unsigned_abs() > kt) {
                    continue;
                }
                if gamma_sign(&gamma) < 0 {
                    continue; // mirrored from the positive half
                }
                let total: u32 = ka_key
                    .alpha
                    .iter()
                    .zip(&kb_key.alpha)
                    .map(|(a, b)| (*a as u32) + (*b as u32))
                    .sum();
                if total > ka {
                    continue;
                }
                let alpha: Alpha = ka_key
                    .alpha
                    .iter()
                    .zip(&kb_key.alpha)
                    .map(|(a, b)| a + b)
                    .collect();
                *half
                    .entry(TermKey { gamma, alpha })
                    .or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
            }
        }
        let mut out = Self::zero(domain, kt, ka);
        out.coeffs = mirror_half(half);
        out.purge_exact_zeros();
        out
    }

    /// The γ = 0 slice: `(2π)^{-d} ∫ f dθ` as a series.
    pub fn angle_average(&self) -> Self {
        let mut out = Self::zero(self.domain.clone(), self.k_theta, self.k_action);
        for (k, c) in &self.coeffs {
            if gamma_sign(&k.gamma) == 0 {
                out.coeffs.insert(k.clone(), *c);
            }
        }
        out
    }

    /// Remove the angle average: `f − ⟨f⟩`.
    pub fn remove_angle_average(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|k, _| gamma_sign(&k.gamma) != 0);
        out
    }

    pub fn partial_derivative(&self, var: Var) -> Self {
        let mut half: BTreeMap<TermKey, Complex64> = BTreeMap::new();
        match var {
            Var::Angle(j) => {
                assert!(j < self.dim);
                for (k, c) in &self.coeffs {
                    if gamma_sign(&k.gamma) < 0 {
                        continue;
                    }
                    let g = k.gamma[j] as f64;
                    if g == 0.0 && gamma_sign(&k.gamma) == 0 {
                        continue; // derivative of the γ=0 slice vanishes
                    }
                    let val = Complex64::new(0.0, g) * c;
                    if val.re != 0.0 || val.im != 0.0 {
                        half.insert(k.clone(), val);
                    }
                }
            }
            Var::Action(j) => {
                assert!(j < self.dim);
                for (k, c) in &self.coeffs {
                    if gamma_sign(&k.gamma) < 0 {
                        continue;
                    }
                    if k.alpha[j] == 0 {
                        continue;
                    }
                    let mut alpha = k.alpha.clone();
                    let mult = alpha[j] as f64;
                    alpha[j] -= 1;
                    let key = TermKey {
                        gamma: k.gamma.clone(),
                        alpha,
                    };
                    *half.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c * mult;
                }
            }
        }
        let mut out = Self::zero(self.domain.clone(), self.k_theta, self.k_action);
        out.coeffs = mirror_half(half);
        out.purge_exact_zeros();
        out
    }

    /// Evaluate the truncated double sum at `(θ, I)`.
    ///
    /// Rejects `I` outside the declared validity box; extrapolation error is
    /// unbounded there. The imaginary part of the sum is a reality-invariant
    /// roundoff residue and is discarded.
    pub fn eval(&self, theta: &[f64], action: &[f64]) -> Result<f64> {
        if !self.domain.contains(action, 1e-9) {
            return Err(ScarError::OutOfActionBox {
                action: action.to_vec(),
                base: self.domain.base_point.clone(),
                radius: self.domain.radius.clone(),
            });
        }
        Ok(self.eval_unchecked(theta, action))
    }

    /// Evaluation without the box guard (grid oracles, diagnostics).
    pub fn eval_unchecked(&self, theta: &[f64], action: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim);
        assert_eq!(action.len(), self.dim);
        let delta: Vec<f64> = action
            .iter()
            .zip(&self.domain.base_point)
            .map(|(x, b)| x - b)
            .collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            let phase: f64 = k
                .gamma
                .iter()
                .zip(theta)
                .map(|(g, t)| (*g as f64) * t)
                .sum();
            let mono: f64 = k
                .alpha
                .iter()
                .zip(&delta)
                .map(|(a, d)| d.powi(*a as i32))
                .product();
            sum += c * Complex64::from_polar(1.0, phase) * mono;
        }
        debug_assert!(
            sum.im.abs() <= 1e-10 * self.sum_abs_coeff().max(1e-300),
            "imaginary residue {} exceeds reality budget",
            sum.im
        );
        sum.re
    }

    /// Evaluate the γ-slice polynomial `Σ_α c_{γ,α} (I−I₀)^α` at `I`.
    ///
    /// This is the Fourier coefficient `f_γ(I)` of the function; used by the
    /// lattice quantization.
    pub fn eval_mode_poly(&self, gamma: &[i32], action: &[f64]) -> Complex64 {
        let delta: Vec<f64> = action
            .iter()
            .zip(&self.domain.base_point)
            .map(|(x, b)| x - b)
            .collect();
        let g: Gamma = gamma.iter().copied().collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.range(
            TermKey {
                gamma: g.clone(),
                alpha: SmallVec::new(),
            }..,
        ) {
            if k.gamma != g {
                break;
            }
            let mono: f64 = k
                .alpha
                .iter()
                .zip(&delta)
                .map(|(a, d)| d.powi(*a as i32))
                .product();
            sum += c * mono;
        }
        sum
    }

    /// Distinct Fourier modes present (canonical half plus zero).
    pub fn modes(&self) -> Vec<Gamma> {
        let mut out: Vec<Gamma> = Vec::new();
        let mut last: Option<&Gamma> = None;
        for k in self.coeffs.keys() {
            if last != Some(&k.gamma) {
                out.push(k.gamma.clone());
                last = Some(&k.gamma);
            }
        }
        out
    }

    /// Max coefficient magnitude within a mode slice.
    pub fn mode_magnitude(&self, gamma: &[i32]) -> f64 {
        let g: Gamma = gamma.iter().copied().collect();
        self.coeffs
            .iter()
            .filter(|(k, _)| k.gamma == g)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Copy with a different validity box (same base point; used when the
    /// iteration shrinks the working domain).
    pub fn with_domain(&self, domain: Domain) -> Self {
        assert_eq!(domain.base_point, self.domain.base_point);
        let mut out = self.clone();
        out.domain = domain;
        out
    }

    /// Copy with enlarged truncation. Existing coefficients are unchanged.
    pub fn with_truncation(&self, k_theta: u32, k_action: u32) -> Self {
        assert!(k_theta >= self.k_theta && k_action >= self.k_action);
        let mut out = self.clone();
        out.k_theta = k_theta;
        out.k_action = k_action;
        out
    }

    /// Formal Taylor substitution `f(I + Ξ(θ,I), θ + Λ(θ,I))` truncated at
    /// total order `KI` in the maps.
    ///
    /// Exact when `f` is polynomial in `I` of degree ≤ KI and the maps enter
    /// formally; the angle shift contributes an `O(‖(Ξ,Λ)‖^{KI+1})` tail.
    pub fn compose_near_identity(&self, xi: &[Self], lambda: &[Self]) -> Result<Self> {
        assert_eq!(xi.len(), self.dim);
        assert_eq!(lambda.len(), self.dim);
        for (j, x) in xi.iter().enumerate() {
            let sup = x.sup_estimate();
            let margin = self.domain.radius[j] / 2.0;
            if sup > margin {
                return Err(ScarError::MapTooLarge { sup, margin });
            }
        }

        let order = self.k_action as usize;
        let d = self.dim;
        // Graded enumeration of (k, l) ∈ N^d × N^d with |k| + |l| ≤ order;
        // each index has a predecessor obtained by decrementing its first
        // nonzero slot, so powers and derivatives are built incrementally.
        let indices = compose_indices(d, order);
        let mut deriv: BTreeMap<Vec<u8>, FourierTaylorSeries> = BTreeMap::new();
        let mut power: BTreeMap<Vec<u8>, FourierTaylorSeries> = BTreeMap::new();
        let one = Self::constant(self.domain.clone(), self.k_theta, self.k_action, 1.0);
        deriv.insert(vec![0; 2 * d], self.clone());
        power.insert(vec![0; 2 * d], one);

        let mut acc = Self::zero(self.domain.clone(), self.k_theta, self.k_action);
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
                let d_prev = deriv.get(&prev).expect("graded order").clone();
                let p_prev = power.get(&prev).expect("graded order").clone();
                let d_new = d_prev.partial_derivative(var);
                let p_new = if map.is_zero() {
                    Self::zero(self.domain.clone(), self.k_theta, self.k_action)
                } else {
                    p_prev.multiply(map)
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
            let fact: f64 = idx.iter().map(|k| factorial(*k as u32)).product();
            acc = acc.add(&dv.multiply(p).scale(1.0 / fact));
        }
        Ok(acc)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mirror a canonical-half coefficient map into a full Hermitian table.
/// γ = 0 entries are forced real (the imaginary residue is roundoff from a
/// sum of conjugate pairs).
fn mirror_half(half: BTreeMap<TermKey, Complex64>) -> BTreeMap<TermKey, Complex64> {
    let mut full = BTreeMap::new();
    for (k, c) in half {
        match gamma_sign(&k.gamma) {
            0 => {
                full.insert(k, Complex64::new(c.re, 0.0));
            }
            _ => {
                let neg = TermKey {
                    gamma: neg_gamma(&k.gamma),
                    alpha: k.alpha.clone(),
                };
                full.insert(neg, c.conj());
                full.insert(k, c);
            }
        }
    }
    full
}

/// All (k, l) ∈ N^d × N^d with |k| + |l| ≤ order, graded lexicographic.
/// Shared by the series- and family-level composition routines.
pub(crate) fn compose_indices(d: usize, order: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; 2 * d];
    fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, slot: usize, remaining: usize) {
        if slot == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=remaining {
            cur[slot] = v as u8;
            rec(out, cur, slot + 1, remaining - v);
        }
        cur[slot] = 0;
    }
    rec(&mut out, &mut cur, 0, order);
    out.sort_by_key(|idx| (idx.iter().map(|x| *x as u32).sum::<u32>(), idx.clone()));
    out
}

/// Gevrey class parameters and the truncated-range norm estimate.
///
/// The estimate weighs each stored term by the largest derivative quotient
/// over the truncated index range,
/// `|∂^a_θ ∂^δ_I term| · L1^{-a} L2^{-|δ|} a!^{-σ} δ!^{-μ}`,
/// and takes the max over terms. It is an estimate: the true norm ranges
/// over all derivative orders.
#[derive(Clone, Debug)]
pub struct GevreyProfile {
    pub sigma: f64,
    pub mu: f64,
    pub rho: f64,
    pub l1: f64,
    pub l2: f64,
}

impl GevreyProfile {
    pub fn new(sigma: f64, mu: f64, rho: f64, l1: f64, l2: f64) -> Self {
        assert!(sigma >= 1.0 && mu >= 1.0 && rho >= 1.0);
        assert!(l1 > 0.0 && l2 > 0.0);
        GevreyProfile { sigma, mu, rho, l1, l2 }
    }

    pub fn norm_estimate(&self, s: &FourierTaylorSeries) -> f64 {
        let radius = &s.domain().radius;
        let mut best = 0.0f64;
        for (k, c) in s.terms() {
            let g1: f64 = k.gamma.iter().map(|g| g.unsigned_abs() as f64).sum();
            let mut ang = 1.0f64; // a = 0
            let mut pow = 1.0f64;
            let mut fact = 1.0f64;
            for a in 1..=s.k_theta() {
                pow *= g1 / self.l1;
                fact *= a as f64;
                ang = ang.max(pow / fact.powf(self.sigma));
            }
            let act = action_weight_max(&k.alpha, radius, self.l2, self.mu);
            best = best.max(c.norm() * ang * act);
        }
        best
    }
}

/// max over δ ≤ α of `(α!/(α−δ)!) · Π r^{α−δ} / (L2^{|δ|} δ!^μ)`.
fn action_weight_max(alpha: &Alpha, radius: &[f64], l2: f64, mu: f64) -> f64 {
    fn rec(alpha: &[u8], radius: &[f64], slot: usize, acc_quot: f64, acc_pow: f64, acc_dfact: f64, acc_l2: f64, l2: f64, best: &mut f64, mu: f64) {
        if slot == alpha.len() {
            *best = (*best).max(acc_quot * acc_pow / (acc_l2 * acc_dfact.powf(mu)));
            return;
        }
        let a = alpha[slot] as u32;
        for delta in 0..=a {
            // α_j!/(α_j−δ_j)! = falling factorial
            let mut quot = 1.0;
            for q in (a - delta + 1)..=a {
                quot *= q as f64;
            }
            let powr = radius[slot].powi((a - delta) as i32);
            let dfact = factorial(delta);
            rec(
                alpha,
                radius,
                slot + 1,
                acc_quot * quot,
                acc_pow * powr,
                acc_dfact * dfact,
                acc_l2 * l2.powi(delta as i32),
                l2,
                best,
                mu,
            );
        }
    }
    let mut best = 0.0;
    rec(alpha, radius, 0, 1.0, 1.0, 1.0, 1.0, l2, &mut best, mu);
    best
}
