//! Lattice quantization of a torus symbol and band eigensolves.
//!
//! On the Fourier basis `ẽ_m(x) = exp(i(m+ϑ/4)·x)` the operator with
//! symbol `p(θ,I) = Σ_γ p_γ(I) e^{iγθ}` acts through the matrix
//!
//! ```text
//!   ⟨e_{m′}, P e_m⟩ = p_{m′−m}( h·((m+m′)/2 + ϑ/4) )
//! ```
//!
//! — midpoint (Weyl-type) ordering, which keeps the matrix Hermitian for
//! real symbols and corresponds to a vanishing subprincipal symbol. The
//! matrix is banded with bandwidth `Kθ` per lattice direction; at desk
//! scale a dense Hermitian solve is used (exactly diagonal symbols skip
//! it). Weyl counting compares band eigenvalue counts against the
//! phase-space volume `(2πh)^{-d}·meas(p⁻¹([a,b]))` from grid quadrature.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, ScarError};
use crate::par;
use crate::series::Domain;
use crate::timepoly::TimePolynomialHamiltonian;

/// A lattice point `m ∈ Z^d`.
pub type LatticeIndex = Vec<i64>;

/// Hermitian operator on a truncated torus Fourier basis.
#[derive(Clone, Debug)]
pub struct SpectralProblem {
    pub dim: usize,
    pub hbar: f64,
    pub t: f64,
    pub maslov: Vec<i64>,
    /// Basis lattice points, lexicographically sorted.
    pub basis: Vec<LatticeIndex>,
    index_of: HashMap<LatticeIndex, usize>,
    pub matrix: DMatrix<Complex<f64>>,
    pub band: (f64, f64),
    pub k_theta: u32,
}

impl SpectralProblem {
    /// Wrap an explicit Hermitian matrix over a trivial 1-d lattice
    /// `m = 0..n` (tests, oracles, handmade operators). No isolation guard.
    pub fn from_dense(matrix: DMatrix<Complex<f64>>, hbar: f64, band: (f64, f64)) -> Self {
        let n = matrix.nrows();
        assert_eq!(n, matrix.ncols());
        let basis: Vec<LatticeIndex> = (0..n as i64).map(|m| vec![m]).collect();
        let index_of = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        SpectralProblem {
            dim: 1,
            hbar,
            t: 0.0,
            maslov: vec![0],
            basis,
            index_of,
            matrix,
            band,
            k_theta: n as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn index_of(&self, m: &[i64]) -> Option<usize> {
        self.index_of.get(m).copied()
    }

    /// Lattice action `I_m = h(m + ϑ/4)`.
    pub fn action_of(&self, m: &[i64]) -> Vec<f64> {
        m.iter()
            .zip(&self.maslov)
            .map(|(mi, v)| self.hbar * (*mi as f64 + *v as f64 / 4.0))
            .collect()
    }

    /// Apply the matrix to a coefficient vector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let x = DVector::from_iterator(v.len(), v.iter().copied());
        let y = &self.matrix * x;
        y.iter().copied().collect()
    }

    /// `‖Pv − μv‖₂`.
    pub fn residual(&self, v: &[Complex64], mu: f64) -> f64 {
        let pv = self.apply(v);
        pv.iter()
            .zip(v)
            .map(|(a, b)| (a - b * mu).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Eigenpairs inside the energy band.
#[derive(Clone, Debug)]
pub struct EigenBand {
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// max residual `‖Mu − Eu‖` over kept pairs.
    pub residual: f64,
    /// max off-diagonal Gram deviation over kept pairs.
    pub ortho_defect: f64,
}

impl EigenBand {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

fn lattice_ranges(domain: &Domain, h: f64, maslov: &[i64]) -> Vec<(i64, i64)> {
    domain
        .base_point
        .iter()
        .zip(&domain.radius)
        .zip(maslov)
        .map(|((b, r), v)| {
            let lo = ((b - r) / h - *v as f64 / 4.0).ceil() as i64;
            let hi = ((b + r) / h - *v as f64 / 4.0).floor() as i64;
            (lo, hi)
        })
        .collect()
}

fn enumerate_lattice(ranges: &[(i64, i64)]) -> Vec<LatticeIndex> {
    let mut out = vec![Vec::new()];
    for (lo, hi) in ranges {
        let mut next = Vec::with_capacity(out.len() * ((hi - lo + 1).max(0) as usize));
        for prefix in &out {
            for v in *lo..=*hi {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Build the Hermitian lattice matrix for the symbol `H(·,·;t)` on the
/// basis `{m : I_m ∈ box}`, and verify that the box isolates the band:
/// every boundary-layer Gershgorin disc must avoid `[a,b]`, otherwise
/// truncation would corrupt band eigenvalues.
pub fn build_matrix(
    hamiltonian: &TimePolynomialHamiltonian,
    t: f64,
    h: f64,
    maslov: &[i64],
    basis_box: &Domain,
    band: (f64, f64),
) -> Result<SpectralProblem> {
    let d = hamiltonian.dim();
    assert_eq!(maslov.len(), d);
    assert!(h > 0.0);
    let symbol = hamiltonian.series_at(t);
    let k_theta = symbol.k_theta();
    let ranges = lattice_ranges(basis_box, h, maslov);
    let basis = enumerate_lattice(&ranges);
    let n = basis.len();
    if n == 0 {
        return Err(ScarError::Config("empty basis box".into()));
    }
    let index_of: HashMap<LatticeIndex, usize> =
        basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();

    // Coupling structure: only modes actually present in the symbol.
    let modes: Vec<Vec<i32>> = symbol.modes().into_iter().map(|g| g.to_vec()).collect();
    let bandwidth: i64 = modes
        .iter()
        .flat_map(|g| g.iter().map(|x| x.unsigned_abs() as i64))
        .max()
        .unwrap_or(0);

    // Rows in parallel; Hermiticity is inherited from the reality of the
    // symbol table (p_{−γ} = conj p_γ exactly).
    let rows: Vec<Vec<Complex64>> = par::map_range(n, |r| {
        let m_r = &basis[r];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        let mut neighbor = vec![0i64; d];
        for gamma in &modes {
            let mut ok = true;
            for j in 0..d {
                neighbor[j] = m_r[j] - gamma[j] as i64; // m_c = m_r − γ
                let (lo, hi) = ranges[j];
                if neighbor[j] < lo || neighbor[j] > hi {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            if let Some(c) = index_of.get(&neighbor) {
                let mid: Vec<f64> = m_r
                    .iter()
                    .zip(&neighbor)
                    .zip(maslov)
                    .map(|((a, b), v)| h * (0.5 * (*a + *b) as f64 + *v as f64 / 4.0))
                    .collect();
                let val = symbol.eval_mode_poly(gamma, &mid);
                row[*c] = if *c == r { Complex64::new(val.re, 0.0) } else { val };
            }
        }
        row
    });

    let matrix = DMatrix::from_fn(n, n, |r, c| rows[r][c]);

    // Boundary-layer isolation check (layer thickness = actual coupling
    // bandwidth, not the series truncation).
    let layer: Vec<usize> = (0..n)
        .filter(|i| {
            basis[*i]
                .iter()
                .zip(&ranges)
                .any(|(m, (lo, hi))| m - lo < bandwidth || hi - m < bandwidth)
        })
        .collect();
    for i in layer {
        let center = matrix[(i, i)].re;
        let radius: f64 = (0..n)
            .filter(|c| *c != i)
            .map(|c| matrix[(i, c)].norm())
            .sum();
        if center - radius <= band.1 && center + radius >= band.0 {
            return Err(ScarError::BoxMarginInsufficient {
                lo: center - radius,
                hi: center + radius,
                a: band.0,
                b: band.1,
            });
        }
    }

    Ok(SpectralProblem {
        dim: d,
        hbar: h,
        t,
        maslov: maslov.to_vec(),
        basis,
        index_of,
        matrix,
        band,
        k_theta,
    })
}

/// All eigenpairs with energy in the band. Exactly diagonal matrices skip
/// the dense solve; otherwise a full Hermitian eigendecomposition runs and
/// the result is filtered, sorted ascending by energy.
pub fn eigs_in_band(sp: &SpectralProblem) -> EigenBand {
    let n = sp.len();
    let (a, b) = sp.band;
    let off_diag_norm: f64 = (0..n)
        .map(|r| {
            (0..n)
                .filter(|c| *c != r)
                .map(|c| sp.matrix[(r, c)].norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    let mut pairs: Vec<(f64, Vec<Complex64>)> = Vec::new();
    if off_diag_norm == 0.0 {
        for i in 0..n {
            let e = sp.matrix[(i, i)].re;
            if e >= a && e <= b {
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                v[i] = Complex64::new(1.0, 0.0);
                pairs.push((e, v));
            }
        }
    } else {
        let eig = sp.matrix.clone().symmetric_eigen();
        for k in 0..n {
            let e = eig.eigenvalues[k];
            if e >= a && e <= b {
                let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
                pairs.push((e, v));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut residual = 0.0f64;
    for (e, v) in &pairs {
        residual = residual.max(sp.residual(v, *e));
    }
    let mut ortho = 0.0f64;
    for i in 0..pairs.len() {
        for j in 0..pairs.len() {
            let dot: Complex64 = pairs[i]
                .1
                .iter()
                .zip(&pairs[j].1)
                .map(|(x, y)| x.conj() * y)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot - Complex64::new(target, 0.0)).norm());
        }
    }

    EigenBand {
        energies: pairs.iter().map(|p| p.0).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
        residual,
        ortho_defect: ortho,
    }
}

/// Phase-space volume of `{(θ,I) ∈ T^d × box : p(θ,I;t) ∈ [a,b]}` by
/// cell-centered grid quadrature.
pub fn phase_space_band_volume(
    hamiltonian: &TimePolynomialHamiltonian,
    t: f64,
    band: (f64, f64),
    domain: &Domain,
    n_theta: usize,
    n_action: usize,
) -> f64 {
    let d = hamiltonian.dim();
    let symbol = hamiltonian.series_at(t);
    let theta_total = n_theta.pow(d as u32);
    let action_total = n_action.pow(d as u32);
    let counts = par::map_range(action_total, |flat_a| {
        let mut rem = flat_a;
        let mut action = vec![0.0; d];
        for j in (0..d).rev() {
            let i = rem % n_action;
            rem /= n_action;
            let lo = domain.base_point[j] - domain.radius[j];
            let w = 2.0 * domain.radius[j] / n_action as f64;
            action[j] = lo + (i as f64 + 0.5) * w;
        }
        let mut count = 0usize;
        let mut theta = vec![0.0; d];
        for flat_t in 0..theta_total {
            let mut rem = flat_t;
            for j in (0..d).rev() {
                theta[j] = 2.0 * std::f64::consts::PI * (rem % n_theta) as f64 / n_theta as f64;
                rem /= n_theta;
            }
            let p = symbol.eval_unchecked(&theta, &action);
            if p >= band.0 && p <= band.1 {
                count += 1;
            }
        }
        count
    });
    let total_in: usize = counts.iter().sum();
    let fraction = total_in as f64 / (theta_total * action_total) as f64;
    let box_vol: f64 = domain.radius.iter().map(|r| 2.0 * r).product();
    let torus_vol = (2.0 * std::f64::consts::PI).powi(d as i32);
    fraction * box_vol * torus_vol
}

/// Weyl comparison: predicted `(2πh)^{-d}·meas(p⁻¹([a,b]))` against the
/// actual eigenvalue count in the band.
pub fn weyl_count(
    hamiltonian: &TimePolynomialHamiltonian,
    sp: &SpectralProblem,
    eigs: &EigenBand,
    quad_domain: &Domain,
    n_theta: usize,
    n_action: usize,
) -> (f64, usize) {
    let vol = phase_space_band_volume(hamiltonian, sp.t, sp.band, quad_domain, n_theta, n_action);
    let predicted = vol / (2.0 * std::f64::consts::PI * sp.hbar).powi(sp.dim as i32);
    (predicted, eigs.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::FourierTaylorSeries;
    use crate::timepoly::TimePolynomialHamiltonian as Tp;
    use approx::assert_abs_diff_eq;

    fn half_i_squared(dom: &Domain, kt: u32, ka: u32) -> FourierTaylorSeries {
        let d = dom.dim();
        let mut acc = FourierTaylorSeries::zero(dom.clone(), kt, ka);
        for j in 0..d {
            let ij = FourierTaylorSeries::action_coordinate(dom.clone(), kt, ka, j);
            acc = acc.add(&ij.multiply(&ij).scale(0.5));
        }
        acc
    }

    fn pendulum_tp(dom: &Domain, eps: f64, kt: u32, ka: u32) -> Tp {
        let mut tp = Tp::monomial(0, half_i_squared(dom, kt, ka), 4, 1.0);
        tp.add_term(
            1,
            FourierTaylorSeries::cosine_mode(dom.clone(), kt, ka, &[1], eps),
        );
        tp
    }

    #[test]
    fn multiplication_operator_is_diagonal() {
        // p = ½I² (d=1): diagonal entries ½h²(m+ϑ/4)².
        let dom = Domain::new(vec![0.0], vec![1.2]);
        let tp = Tp::monomial(0, half_i_squared(&dom, 2, 2), 2, 1.0);
        let h = 0.05;
        let theta = vec![1i64];
        let sp = build_matrix(&tp, 0.0, h, &theta, &dom, (0.05, 0.45)).unwrap();
        for (i, m) in sp.basis.iter().enumerate() {
            let want = 0.5 * (h * (m[0] as f64 + 0.25)).powi(2);
            assert_abs_diff_eq!(sp.matrix[(i, i)].re, want, epsilon = 1e-14);
            for j in 0..sp.len() {
                if j != i {
                    assert_eq!(sp.matrix[(i, j)], Complex64::new(0.0, 0.0).into());
                }
            }
        }
    }

    #[test]
    fn shift_operator_off_diagonals() {
        // p = cos θ (d=1): ½ on the two off-diagonals, 0 on the diagonal.
        let dom = Domain::new(vec![0.0], vec![1.0]);
        let cos = FourierTaylorSeries::cosine_mode(dom.clone(), 2, 1, &[1], 1.0);
        let tp = Tp::monomial(0, cos, 2, 1.0);
        // band far away so the Gershgorin guard stays quiet
        let sp = build_matrix(&tp, 0.0, 0.1, &[0], &dom, (10.0, 11.0)).unwrap();
        let n = sp.len();
        for i in 0..n {
            assert_eq!(sp.matrix[(i, i)].re, 0.0);
            if i + 1 < n {
                assert_abs_diff_eq!(sp.matrix[(i, i + 1)].re, 0.5, epsilon = 1e-15);
                assert_abs_diff_eq!(sp.matrix[(i + 1, i)].re, 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn hermitian_by_construction() {
        let dom = Domain::new(vec![1.0, 0.8], vec![0.4, 0.4]);
        let mut sym = half_i_squared(&dom, 2, 2);
        sym = sym.add(&FourierTaylorSeries::sine_mode(dom.clone(), 2, 2, &[1, -1], 0.1));
        let tp = Tp::monomial(0, sym, 2, 1.0);
        let sp = build_matrix(&tp, 0.0, 0.1, &[0, 0], &dom, (1e6, 2e6)).unwrap();
        let m = &sp.matrix;
        for r in 0..sp.len() {
            assert_eq!(m[(r, r)].im, 0.0);
            for c in 0..sp.len() {
                assert_eq!(m[(r, c)], m[(c, r)].conj());
            }
        }
    }

    #[test]
    fn diagonal_band_filter() {
        let dom = Domain::new(vec![0.0], vec![1.2]);
        let tp = Tp::monomial(0, half_i_squared(&dom, 2, 2), 2, 1.0);
        let h = 0.1;
        let sp = build_matrix(&tp, 0.0, h, &[0], &dom, (0.05, 0.45)).unwrap();
        let band = eigs_in_band(&sp);
        // oracle: direct lattice count
        let expect = sp
            .basis
            .iter()
            .filter(|m| {
                let e = 0.5 * (h * m[0] as f64).powi(2);
                (0.05..=0.45).contains(&e)
            })
            .count();
        assert_eq!(band.len(), expect);
        assert!(band.residual < 1e-12);
    }

    #[test]
    fn small_symmetric_matrix_eigenvalues() {
        // [[0,1],[1,0]] with band [−2,2] → {−1, +1}
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(0.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 0.0),
            ],
        );
        let sp = SpectralProblem::from_dense(m, 0.1, (-2.0, 2.0));
        let band = eigs_in_band(&sp);
        assert_eq!(band.len(), 2);
        assert_abs_diff_eq!(band.energies[0], -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(band.energies[1], 1.0, epsilon = 1e-13);
        assert!(band.ortho_defect < 1e-12);
    }

    #[test]
    fn gauge_covariance_maslov_shift() {
        // ϑ → ϑ + 4·(integer) relabels the basis, spectrum unchanged.
        let dom = Domain::new(vec![1.0], vec![0.35]);
        let tp = pendulum_tp(&dom, 0.2, 4, 3);
        let h = 0.05;
        let band = (0.35, 0.65);
        let sp0 = build_matrix(&tp, 0.1, h, &[0], &dom, band).unwrap();
        let sp4 = build_matrix(&tp, 0.1, h, &[4], &dom, band).unwrap();
        let e0 = eigs_in_band(&sp0);
        let e4 = eigs_in_band(&sp4);
        assert_eq!(e0.len(), e4.len());
        for (a, b) in e0.energies.iter().zip(&e4.energies) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn spectrum_invariant_under_angle_translation() {
        // translating the symbol in θ is a diagonal unitary conjugation
        let dom = Domain::new(vec![1.0], vec![0.35]);
        let h = 0.05;
        let band = (0.35, 0.65);
        let mut shifted = Tp::monomial(0, half_i_squared(&dom, 4, 3), 4, 1.0);
        // cos(θ + 0.7) = cos0.7·cosθ − sin0.7·sinθ
        shifted.add_term(
            1,
            FourierTaylorSeries::cosine_mode(dom.clone(), 4, 3, &[1], 0.2 * 0.7f64.cos()).add(
                &FourierTaylorSeries::sine_mode(dom.clone(), 4, 3, &[1], -0.2 * 0.7f64.sin()),
            ),
        );
        let plain = pendulum_tp(&dom, 0.2, 4, 3);
        let e1 = eigs_in_band(&build_matrix(&plain, 0.1, h, &[0], &dom, band).unwrap());
        let e2 = eigs_in_band(&build_matrix(&shifted, 0.1, h, &[0], &dom, band).unwrap());
        assert_eq!(e1.len(), e2.len());
        for (a, b) in e1.energies.iter().zip(&e2.energies) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn box_margin_guard_triggers() {
        // band reaching the box edge energies must be rejected
        let dom = Domain::new(vec![1.0], vec![0.3]);
        let tp = pendulum_tp(&dom, 0.2, 4, 3);
        let err = build_matrix(&tp, 0.1, 0.05, &[0], &dom, (0.0, 10.0));
        assert!(matches!(err, Err(ScarError::BoxMarginInsufficient { .. })));
    }

    #[test]
    fn weyl_count_exact_quadratic() {
        // d=1, p = ½I², band [0, ½]: volume 2π·2, predicted 2/h.
        let dom = Domain::new(vec![0.0], vec![1.2]);
        let tp = Tp::monomial(0, half_i_squared(&dom, 2, 2), 2, 1.0);
        let h = 0.01;
        let sp = build_matrix(&tp, 0.0, h, &[0], &dom, (0.0, 0.5)).unwrap();
        let eigs = eigs_in_band(&sp);
        let (predicted, actual) = weyl_count(&tp, &sp, &eigs, &dom, 1, 8192);
        assert!((predicted - 2.0 / h).abs() < 0.01 * (2.0 / h), "predicted {predicted}");
        assert!((actual as f64 - predicted).abs() <= 2.0, "{actual} vs {predicted}");
    }

    #[test]
    fn weyl_empty_band_below_minimum() {
        let dom = Domain::new(vec![0.0], vec![1.2]);
        let tp = Tp::monomial(0, half_i_squared(&dom, 2, 2), 2, 1.0);
        let sp = build_matrix(&tp, 0.0, 0.05, &[0], &dom, (-0.5, -0.1)).unwrap();
        let eigs = eigs_in_band(&sp);
        let (predicted, actual) = weyl_count(&tp, &sp, &eigs, &dom, 1, 512);
        assert_eq!(actual, 0);
        assert_eq!(predicted, 0.0);
    }

    #[test]
    fn weyl_relative_error_shrinks_with_h() {
        let dom = Domain::new(vec![0.0], vec![1.2]);
        let tp = Tp::monomial(0, half_i_squared(&dom, 2, 2), 2, 1.0);
        let mut last = f64::INFINITY;
        for h in [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0] {
            let sp = build_matrix(&tp, 0.0, h, &[0], &dom, (0.05, 0.45)).unwrap();
            let eigs = eigs_in_band(&sp);
            let (predicted, actual) = weyl_count(&tp, &sp, &eigs, &dom, 1, 8192);
            let rel = (actual as f64 / predicted - 1.0).abs();
            assert!(rel <= last + 0.02, "rel error grew: {rel} after {last}");
            last = rel;
        }
        assert!(last < 0.05);
    }
}
