//! Quasi-eigenvalue lattices and one-step phase quasimodes.
//!
//! The index set collects lattice points whose action `I_m = h(m+ϑ/4)`
//! lies within `L·h` of the sampled non-resonant set. Quasi-eigenvalues
//! are the normal form evaluated on the lattice, `μ_m = K(I_m; t)`. The
//! quasimode vector is the Fourier expansion of
//!
//! ```text
//!   a(θ) · exp(i·G(θ, I_m; t)/h) · e_m(θ),
//!   a = 1 + ½·tr ∂_θ∂_I G    (half-density amplitude, first order)
//! ```
//!
//! with `G = Σ_r t^{2^r} ψ_r` the accumulated generator; coefficients come
//! from trapezoid quadrature against the basis (spectrally accurate for
//! these band-limited phases) and are truncated to the spectral basis box.

use num_complex::Complex64;

use crate::error::{Result, ScarError};
use crate::nonres::NonResonantActions;
use crate::par;
use crate::quantize::{LatticeIndex, SpectralProblem};
use crate::series::Var;
use crate::timepoly::TimePolynomialHamiltonian;

/// Quasimode family over one `(h, t)`.
#[derive(Clone, Debug)]
pub struct QuasimodeSet {
    pub h: f64,
    pub t: f64,
    pub maslov: Vec<i64>,
    pub indices: Vec<LatticeIndex>,
    pub mu: Vec<f64>,
    /// Coefficient vectors over the spectral basis (unit norm).
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    /// max off-diagonal Gram entry of the vectors (near-orthogonality).
    pub orth_defect: f64,
}

impl QuasimodeSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Lattice action for `(m, ϑ, h)`.
pub fn lattice_action(m: &[i64], maslov: &[i64], h: f64) -> Vec<f64> {
    m.iter()
        .zip(maslov)
        .map(|(mi, v)| h * (*mi as f64 + *v as f64 / 4.0))
        .collect()
}

/// Index set against a sampled non-resonant action set:
/// `{m : dist(I_m, E_κ) ≤ L·h}`.
pub fn index_set(
    e_set: &NonResonantActions,
    h: f64,
    l: f64,
    maslov: &[i64],
) -> Vec<LatticeIndex> {
    let pts = e_set.passing_points();
    if pts.is_empty() {
        return Vec::new();
    }
    let d = e_set.dim();
    // enumeration window: bounding box of the passing sample, inflated
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in &pts {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|j| {
            let a = ((lo[j] - l * h) / h - maslov[j] as f64 / 4.0).ceil() as i64 - 1;
            let b = ((hi[j] + l * h) / h - maslov[j] as f64 / 4.0).floor() as i64 + 1;
            (a, b)
        })
        .collect();
    let mut candidates = vec![Vec::new()];
    for (a, b) in &ranges {
        let mut next = Vec::new();
        for prefix in &candidates {
            for v in *a..=*b {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        candidates = next;
    }
    let keep = par::map_slice(&candidates, |m| {
        let action = lattice_action(m, maslov, h);
        e_set.distance(&action) <= l * h * (1.0 + 1e-12) + 1e-14
    });
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(m, k)| if k { Some(m) } else { None })
        .collect()
}

/// Index set against an explicit point sample (tests, injected controls).
pub fn index_set_from_points(
    points: &[Vec<f64>],
    h: f64,
    l: f64,
    maslov: &[i64],
) -> Vec<LatticeIndex> {
    if points.is_empty() {
        return Vec::new();
    }
    let d = points[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let mut out = Vec::new();
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|j| {
            let a = ((lo[j] - l * h) / h - maslov[j] as f64 / 4.0).ceil() as i64 - 1;
            let b = ((hi[j] + l * h) / h - maslov[j] as f64 / 4.0).floor() as i64 + 1;
            (a, b)
        })
        .collect();
    let mut stack = vec![Vec::new()];
    for (a, b) in &ranges {
        let mut next = Vec::new();
        for prefix in &stack {
            for v in *a..=*b {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        stack = next;
    }
    for m in stack {
        let action = lattice_action(&m, maslov, h);
        let dist = points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&action)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if dist <= l * h * (1.0 + 1e-12) + 1e-14 {
            out.push(m);
        }
    }
    out
}

/// `μ_m = K(h(m+ϑ/4); t)` — the angle-free normal form on the lattice.
pub fn quasi_eigenvalue(
    k: &TimePolynomialHamiltonian,
    m: &[i64],
    h: f64,
    t: f64,
    maslov: &[i64],
) -> Result<f64> {
    let action = lattice_action(m, maslov, h);
    let theta = vec![0.0; k.dim()];
    k.eval(&theta, &action, t)
}

/// Quasimode vector for one lattice point: coefficients of
/// `a·exp(iG(θ,I_m;t)/h)·e_m` over the spectral basis, normalized.
///
/// `phase_bound` guards the construction's validity regime: error when
/// `sup|G(·,I_m;t)|/h` exceeds it.
pub fn quasimode_vector(
    generator: &TimePolynomialHamiltonian,
    sp: &SpectralProblem,
    m: &[i64],
    phase_bound: f64,
    n_quad: usize,
) -> Result<Vec<Complex64>> {
    let d = sp.dim;
    let action = lattice_action(m, &sp.maslov, sp.hbar);
    let g_series = generator.series_at(sp.t);
    // amplitude: 1 + ½ Σ_j ∂²G/∂θ_j∂I_j at I_m
    let mut amp_series =
        crate::series::FourierTaylorSeries::zero(g_series.domain().clone(), g_series.k_theta(), g_series.k_action());
    for j in 0..d {
        amp_series = amp_series.add(
            &g_series
                .partial_derivative(Var::Angle(j))
                .partial_derivative(Var::Action(j)),
        );
    }

    let total = n_quad.pow(d as u32);
    // phase table and validity bound
    let values: Vec<Complex64> = par::map_range(total, |flat| {
        let mut rem = flat;
        let mut theta = vec![0.0; d];
        for j in (0..d).rev() {
            theta[j] = 2.0 * std::f64::consts::PI * (rem % n_quad) as f64 / n_quad as f64;
            rem /= n_quad;
        }
        let g = g_series.eval_unchecked(&theta, &action);
        let a = 1.0 + 0.5 * amp_series.eval_unchecked(&theta, &action);
        Complex64::from_polar(a, g / sp.hbar)
    });
    let sup_phase = {
        let mut sup = 0.0f64;
        for flat in 0..total {
            let mut rem = flat;
            let mut theta = vec![0.0; d];
            for j in (0..d).rev() {
                theta[j] = 2.0 * std::f64::consts::PI * (rem % n_quad) as f64 / n_quad as f64;
                rem /= n_quad;
            }
            sup = sup.max(g_series.eval_unchecked(&theta, &action).abs());
        }
        sup / sp.hbar
    };
    if sup_phase > phase_bound {
        return Err(ScarError::PhaseTooLarge {
            value: sup_phase,
            bound: phase_bound,
        });
    }

    // c_{m′} = (1/N) Σ_grid  a·e^{iG/h} · e^{i(m−m′)·θ}
    let coeffs: Vec<Complex64> = par::map_range(sp.len(), |b| {
        let m_b = &sp.basis[b];
        let k: Vec<f64> = m.iter().zip(m_b).map(|(x, y)| (*x - *y) as f64).collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for (flat, w) in values.iter().enumerate() {
            let mut rem = flat;
            let mut phase = 0.0;
            for j in (0..d).rev() {
                let theta_j = 2.0 * std::f64::consts::PI * (rem % n_quad) as f64 / n_quad as f64;
                rem /= n_quad;
                phase += k[j] * theta_j;
            }
            sum += w * Complex64::from_polar(1.0, phase);
        }
        sum / total as f64
    });
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ScarError::InvariantViolation(
            "quasimode vector has zero norm (basis box does not cover the mode)".into(),
        ));
    }
    Ok(coeffs.into_iter().map(|c| c / norm).collect())
}

/// Assemble the full quasimode family for the index set.
pub fn build_quasimode_set(
    k: &TimePolynomialHamiltonian,
    generator: &TimePolynomialHamiltonian,
    sp: &SpectralProblem,
    indices: Vec<LatticeIndex>,
    phase_bound: f64,
    n_quad: usize,
) -> Result<QuasimodeSet> {
    let mut mu = Vec::with_capacity(indices.len());
    let mut vectors = Vec::with_capacity(indices.len());
    let mut residuals = Vec::with_capacity(indices.len());
    for m in &indices {
        let mu_m = quasi_eigenvalue(k, m, sp.hbar, sp.t, &sp.maslov)?;
        let v = quasimode_vector(generator, sp, m, phase_bound, n_quad)?;
        let r = sp.residual(&v, mu_m);
        mu.push(mu_m);
        vectors.push(v);
        residuals.push(r);
    }
    let orth_defect = gram_offdiag(&vectors);
    Ok(QuasimodeSet {
        h: sp.hbar,
        t: sp.t,
        maslov: sp.maslov.clone(),
        indices,
        mu,
        vectors,
        residuals,
        orth_defect,
    })
}

/// Largest `|⟨v_i, v_j⟩ − δ_{ij}|` over the family.
pub fn gram_offdiag(vectors: &[Vec<Complex64>]) -> f64 {
    let n = vectors.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let dot: Complex64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| a.conj() * b)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::build_matrix;
    use crate::series::{Domain, FourierTaylorSeries};
    use crate::timepoly::TimePolynomialHamiltonian as Tp;
    use approx::assert_abs_diff_eq;

    fn half_i_squared_tp(dom: &Domain, kt: u32, ka: u32) -> Tp {
        let i = FourierTaylorSeries::action_coordinate(dom.clone(), kt, ka, 0);
        Tp::monomial(0, i.multiply(&i).scale(0.5), 4, 1.0)
    }

    #[test]
    fn index_set_singleton_example() {
        // E = {0.5}, h = 0.1, L = 1 → m ∈ {4,5,6}
        let ms = index_set_from_points(&[vec![0.5]], 0.1, 1.0, &[0]);
        assert_eq!(ms, vec![vec![4], vec![5], vec![6]]);
    }

    #[test]
    fn index_set_empty_when_l_zero_off_lattice() {
        let ms = index_set_from_points(&[vec![0.512]], 0.1, 0.0, &[0]);
        assert!(ms.is_empty());
    }

    #[test]
    fn index_set_monotone_in_l() {
        let pts = vec![vec![0.43], vec![0.61]];
        let small = index_set_from_points(&pts, 0.05, 0.5, &[0]);
        let large = index_set_from_points(&pts, 0.05, 2.0, &[0]);
        for m in &small {
            assert!(large.contains(m));
        }
        assert!(large.len() >= small.len());
    }

    #[test]
    fn index_count_roughly_doubles_as_h_halves() {
        // fat sample: interval [0.4, 0.8]
        let pts: Vec<Vec<f64>> = (0..81).map(|i| vec![0.4 + 0.005 * i as f64]).collect();
        let n1 = index_set_from_points(&pts, 0.02, 1.0, &[0]).len();
        let n2 = index_set_from_points(&pts, 0.01, 1.0, &[0]).len();
        let ratio = n2 as f64 / n1 as f64;
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quasi_eigenvalue_direct() {
        let dom = Domain::new(vec![0.5], vec![0.45]);
        let k = half_i_squared_tp(&dom, 2, 2);
        let mu = quasi_eigenvalue(&k, &[5], 0.1, 0.0, &[0]).unwrap();
        assert_abs_diff_eq!(mu, 0.125, epsilon = 1e-14);
    }

    #[test]
    fn quasi_eigenvalue_out_of_box() {
        let dom = Domain::new(vec![0.5], vec![0.1]);
        let k = half_i_squared_tp(&dom, 2, 2);
        assert!(quasi_eigenvalue(&k, &[20], 0.1, 0.0, &[0]).is_err());
    }

    #[test]
    fn zero_generator_gives_basis_vector() {
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 4, 2);
        let sp = build_matrix(&tp, 0.0, 0.05, &[0], &dom, (0.4, 0.6)).unwrap();
        let gen = Tp::zero(dom, 4, 2, 4, 1.0);
        let m = vec![20i64];
        let v = quasimode_vector(&gen, &sp, &m, 10.0, 128).unwrap();
        let idx = sp.index_of(&m).unwrap();
        for (i, c) in v.iter().enumerate() {
            if i == idx {
                assert_abs_diff_eq!(c.re, 1.0, epsilon = 1e-12);
                assert!(c.im.abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12, "stray coefficient {} at {}", c.norm(), i);
            }
        }
    }

    #[test]
    fn single_mode_phase_matches_bessel() {
        // G = c·t·sin θ, I-independent: coefficients are J_k(tc/h) up to
        // sign; oracle is an independent Bessel integral (Simpson).
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 6, 2);
        let h = 0.05;
        let t = 0.1;
        let c = 0.2;
        let sp = build_matrix(&tp, t, h, &[0], &dom, (0.4, 0.6)).unwrap();
        let gen = Tp::monomial(
            1,
            FourierTaylorSeries::sine_mode(dom, 6, 2, &[1], c),
            4,
            1.0,
        );
        let m = vec![20i64];
        let v = quasimode_vector(&gen, &sp, &m, 10.0, 256).unwrap();
        let z = t * c / h;
        let idx = sp.index_of(&m).unwrap();
        for k in -4i64..=4 {
            let b = (idx as i64 + k) as usize;
            let got = v[b].norm();
            let want = bessel_j(k.unsigned_abs() as u32, z).abs();
            assert!(
                (got - want).abs() < 1e-6,
                "k = {k}: {got} vs {want}"
            );
        }
    }

    /// J_n(z) by Simpson quadrature of (1/π)∫₀^π cos(nτ − z sin τ) dτ.
    fn bessel_j(n: u32, z: f64) -> f64 {
        let steps = 2000;
        let h = std::f64::consts::PI / steps as f64;
        let f = |tau: f64| ((n as f64) * tau - z * tau.sin()).cos();
        let mut sum = f(0.0) + f(std::f64::consts::PI);
        for i in 1..steps {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        sum * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn unit_norm_always() {
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 6, 2);
        let sp = build_matrix(&tp, 0.05, 0.05, &[0], &dom, (0.4, 0.6)).unwrap();
        let gen = Tp::monomial(
            1,
            FourierTaylorSeries::sine_mode(Domain::new(vec![1.0], vec![0.4]), 6, 2, &[1], 0.3),
            4,
            1.0,
        );
        let v = quasimode_vector(&gen, &sp, &[19], 100.0, 128).unwrap();
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn phase_bound_guard() {
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 6, 2);
        let sp = build_matrix(&tp, 0.1, 0.05, &[0], &dom, (0.4, 0.6)).unwrap();
        let gen = Tp::monomial(
            1,
            FourierTaylorSeries::sine_mode(Domain::new(vec![1.0], vec![0.4]), 6, 2, &[1], 5.0),
            4,
            1.0,
        );
        let err = quasimode_vector(&gen, &sp, &[20], 1.0, 64);
        assert!(matches!(err, Err(ScarError::PhaseTooLarge { .. })));
    }

    #[test]
    fn residual_zero_for_diagonal_eigenvector() {
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 4, 2);
        let h = 0.05;
        let sp = build_matrix(&tp, 0.0, h, &[0], &dom, (0.4, 0.6)).unwrap();
        let m = vec![20i64];
        let idx = sp.index_of(&m).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); sp.len()];
        v[idx] = Complex64::new(1.0, 0.0);
        let mu = 0.5 * (h * 20.0).powi(2);
        assert!(sp.residual(&v, mu) < 1e-15);
    }

    #[test]
    fn bare_vector_residual_equals_row_coupling() {
        // bare e_m in the perturbed model at t>0: residual = off-diagonal
        // row magnitude, cross-checked by a direct row sum.
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let eps = 0.01;
        let t = 0.05;
        let mut tp = half_i_squared_tp(&dom, 4, 2);
        tp.add_term(
            1,
            FourierTaylorSeries::cosine_mode(dom.clone(), 4, 2, &[1], eps),
        );
        let h = 0.05;
        let sp = build_matrix(&tp, t, h, &[0], &dom, (0.45, 0.55)).unwrap();
        let m = vec![20i64];
        let idx = sp.index_of(&m).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); sp.len()];
        v[idx] = Complex64::new(1.0, 0.0);
        let mu = sp.matrix[(idx, idx)].re;
        let got = sp.residual(&v, mu);
        let want: f64 = (0..sp.len())
            .filter(|r| *r != idx)
            .map(|r| sp.matrix[(r, idx)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, t * eps / std::f64::consts::SQRT_2, epsilon = 1e-12);
    }
}
