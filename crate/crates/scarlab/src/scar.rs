//! Separation, energy windows, overlaps, and torus masses.
//!
//! Quasi-eigenvalue separation follows the chain
//! `μ_m − μ_{m′} ≈ h·ω·(m−m′) + O(h²|m−m′|²)`: for pairs within the action
//! hypothesis `|I_m − I_{m′}| ≤ h·Δ⁻¹(C₁h^{−1/2})` the gap is bounded below
//! by `C₂·h^{3/2}`, with `C₂` calibrated once per model at the coarsest `h`
//! of a sweep. Windows of half-width `h^γ/3` around each quasi-eigenvalue
//! are then pairwise disjoint and carry occupancy statistics; a window is
//! λ-good when its eigenvalue count stays under `λ·meas(p⁻¹([a,b]))/meas(E_κ)`,
//! and the best eigenfunction overlap in a λ-good window is tested against
//! `(1/2λ)·meas(E_κ)/meas(p⁻¹([a,b]))`. Torus mass is the action-window
//! microlocal mass of an eigenfunction — the quantization of an I-only
//! cutoff is diagonal, so the sum of `|c_{m′}|²` over `|I_{m′} − I_ω| ≤ δ`
//! is exact for that symbol class.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, ScarError};
use crate::nonres::ApproximationFunction;
use crate::par;
use crate::quantize::{EigenBand, LatticeIndex, SpectralProblem};
use crate::quasimode::{lattice_action, quasi_eigenvalue, QuasimodeSet};
use crate::series::Domain;
use crate::timepoly::TimePolynomialHamiltonian;

pub mod intervals;

#[derive(Clone, Debug, Serialize)]
pub struct SeparationViolation {
    pub m: LatticeIndex,
    pub m_prime: LatticeIndex,
    pub gap: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub pairs_checked: usize,
    pub min_separation: f64,
    /// `C₂·h^{3/2}`; zero on calibration scans.
    pub threshold: f64,
    pub violations: Vec<SeparationViolation>,
    /// Action-distance hypothesis radius `h·Δ⁻¹(C₁·h^{−1/2})`.
    pub pair_radius: f64,
}

/// Scan all pairs `(m ∈ M_h(t), m′ ∈ lattice ∩ D)` within the action
/// hypothesis. `c2 = None` runs a calibration scan (no violations, only
/// the minimal gap); `Some(c2)` checks `|μ_m − μ_{m′}| ≥ c2·h^{3/2}`.
pub fn separation_scan(
    q: &QuasimodeSet,
    k: &TimePolynomialHamiltonian,
    delta: &ApproximationFunction,
    c1: f64,
    c2: Option<f64>,
    d_box: &Domain,
) -> Result<SeparationReport> {
    let h = q.h;
    let d = d_box.dim();
    let inv = delta.delta_inverse(c1 / h.sqrt())?;
    let pair_radius = h * inv;
    let threshold = c2.map(|c| c * h.powf(1.5)).unwrap_or(0.0);
    // lattice step window covering the hypothesis ball
    let step_window = inv.ceil() as i64 + 1;

    let per_m: Vec<(usize, f64, Vec<SeparationViolation>)> = par::map_range(q.len(), |qi| {
        let m = &q.indices[qi];
        let mu_m = q.mu[qi];
        let i_m = lattice_action(m, &q.maslov, h);
        let mut checked = 0usize;
        let mut min_gap = f64::INFINITY;
        let mut violations = Vec::new();
        let mut offset = vec![-step_window; d];
        'outer: loop {
            if offset.iter().any(|o| *o != 0) {
                let m_prime: LatticeIndex = m.iter().zip(&offset).map(|(a, b)| a + b).collect();
                let i_mp = lattice_action(&m_prime, &q.maslov, h);
                let dist: f64 = i_m
                    .iter()
                    .zip(&i_mp)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist <= pair_radius && d_box.contains(&i_mp, 1e-9) {
                    if let Ok(mu_p) = quasi_eigenvalue(k, &m_prime, h, q.t, &q.maslov) {
                        let gap = (mu_m - mu_p).abs();
                        checked += 1;
                        min_gap = min_gap.min(gap);
                        if gap < threshold {
                            violations.push(SeparationViolation {
                                m: m.clone(),
                                m_prime,
                                gap,
                                threshold,
                            });
                        }
                    }
                }
            }
            let mut carry = 0;
            loop {
                if carry == d {
                    break 'outer;
                }
                offset[carry] += 1;
                if offset[carry] <= step_window {
                    break;
                }
                offset[carry] = -step_window;
                carry += 1;
            }
        }
        (checked, min_gap, violations)
    });

    let mut pairs_checked = 0;
    let mut min_separation = f64::INFINITY;
    let mut violations = Vec::new();
    for (c, g, mut v) in per_m {
        pairs_checked += c;
        min_separation = min_separation.min(g);
        violations.append(&mut v);
    }
    Ok(SeparationReport {
        pairs_checked,
        min_separation,
        threshold,
        violations,
        pair_radius,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaMapReport {
    pub min_abs_det: f64,
    /// min of |I₁−I₂| / |η(I₁)−η(I₂)| over sampled pairs.
    pub g1: f64,
    /// max of the same ratio.
    pub g2: f64,
}

/// Finite-difference check that `η: I ↦ (K, ∂_t K, …, ∂_t^{d−1} K)` is a
/// local diffeomorphism on the grid, with bi-Lipschitz ratio estimates
/// from sampled pairs.
pub fn eta_map_check(k: &TimePolynomialHamiltonian, t: f64, d_box: &Domain, grid_n: usize) -> EtaMapReport {
    let d = k.dim();
    let derivatives: Vec<TimePolynomialHamiltonian> = (0..d as u32).map(|j| k.t_derivative(j)).collect();
    let theta = vec![0.0; d];
    let eta = |action: &[f64]| -> Vec<f64> {
        derivatives
            .iter()
            .map(|dk| dk.eval_unchecked(&theta, action, t))
            .collect()
    };
    let fd_step: Vec<f64> = d_box.radius.iter().map(|r| r * 1e-5).collect();

    let total = grid_n.pow(d as u32);
    let points: Vec<Vec<f64>> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut p = vec![0.0; d];
            for j in (0..d).rev() {
                let i = rem % grid_n;
                rem /= grid_n;
                let lo = d_box.base_point[j] - d_box.radius[j];
                p[j] = lo + 2.0 * d_box.radius[j] * (i as f64 + 0.5) / grid_n as f64;
            }
            p
        })
        .collect();

    let dets = par::map_slice(&points, |p| {
        let mut jac = nalgebra::DMatrix::<f64>::zeros(d, d);
        for col in 0..d {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[col] += fd_step[col];
            minus[col] -= fd_step[col];
            let ep = eta(&plus);
            let em = eta(&minus);
            for row in 0..d {
                jac[(row, col)] = (ep[row] - em[row]) / (2.0 * fd_step[col]);
            }
        }
        jac.determinant().abs()
    });
    let min_abs_det = dets.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut g1 = f64::INFINITY;
    let mut g2 = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        let q = &points[(i * 7 + 3) % points.len()];
        let di: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if di < 1e-12 {
            continue;
        }
        let ep = eta(p);
        let eq = eta(q);
        let de: f64 = ep.iter().zip(&eq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if de > 0.0 {
            let ratio = di / de;
            g1 = g1.min(ratio);
            g2 = g2.max(ratio);
        }
    }
    EtaMapReport { min_abs_det, g1, g2 }
}

/// Fraction of the `t` grid on which some `m′ ≠ m` with `I_{m′} ∈ D` comes
/// within `h^γ` of `μ_m(t)`.
pub fn bad_t_measure(
    k: &TimePolynomialHamiltonian,
    m: &LatticeIndex,
    h: f64,
    gamma: f64,
    t_grid: &[f64],
    d_box: &Domain,
    maslov: &[i64],
) -> f64 {
    let d = d_box.dim();
    let window = h.powf(gamma);
    // lattice points of D, excluding m
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|j| {
            let lo = ((d_box.base_point[j] - d_box.radius[j]) / h - maslov[j] as f64 / 4.0).ceil() as i64;
            let hi = ((d_box.base_point[j] + d_box.radius[j]) / h - maslov[j] as f64 / 4.0).floor() as i64;
            (lo, hi)
        })
        .collect();
    let mut lattice = vec![Vec::new()];
    for (lo, hi) in &ranges {
        let mut next = Vec::new();
        for prefixy in &lattice {
            for v in *lo..=*hi {
                let mut p = prefixy.clone();
                p.push(v);
                next.push(p);
            }
        }
        lattice = next;
    }
    lattice.retain(|mm| mm != m);

    let bad_flags = par::map_slice(t_grid, |t| {
        let mu_m = match quasi_eigenvalue(k, m, h, *t, maslov) {
            Ok(v) => v,
            Err(_) => return false,
        };
        lattice.iter().any(|mp| {
            quasi_eigenvalue(k, mp, h, *t, maslov)
                .map(|mu_p| (mu_m - mu_p).abs() < window)
                .unwrap_or(false)
        })
    });
    bad_flags.iter().filter(|b| **b).count() as f64 / t_grid.len() as f64
}

/// Per-window occupancy and overlap record.
#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    pub m: LatticeIndex,
    pub mu: f64,
    pub half_width: f64,
    pub count: usize,
    pub lambda_good: bool,
    pub best_overlap: Option<f64>,
    /// Index into the eigen band of the best-overlap eigenfunction.
    pub best_index: Option<usize>,
    pub torus_mass: Option<f64>,
}

/// Build the λ-good window statistics; errors with
/// [`ScarError::WindowsOverlap`] when two windows intersect (the
/// separation hypothesis failed — a finding, not a crash).
pub fn window_statistics(
    band: &EigenBand,
    q: &QuasimodeSet,
    gamma: f64,
    lambda: f64,
    occupancy_ratio: f64,
    energy_band: (f64, f64),
) -> Result<Vec<WindowReport>> {
    let half_width = q.h.powf(gamma) / 3.0;
    // only windows contained in the energy band carry statistics
    let kept: Vec<usize> = (0..q.len())
        .filter(|i| q.mu[*i] - half_width >= energy_band.0 && q.mu[*i] + half_width <= energy_band.1)
        .collect();
    // disjointness check over the kept quasi-eigenvalues
    let mut order = kept.clone();
    order.sort_by(|a, b| q.mu[*a].partial_cmp(&q.mu[*b]).unwrap());
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if (q.mu[j] - q.mu[i]).abs() <= 2.0 * half_width {
            return Err(ScarError::WindowsOverlap {
                m: q.indices[i].clone(),
                m_prime: q.indices[j].clone(),
                mu_a: q.mu[i],
                mu_b: q.mu[j],
                half_width,
            });
        }
    }
    let threshold = lambda * occupancy_ratio;
    let reports = kept
        .into_iter()
        .map(|i| {
            let mu = q.mu[i];
            let count = band
                .energies
                .iter()
                .filter(|e| (*e - mu).abs() <= half_width)
                .count();
            WindowReport {
                m: q.indices[i].clone(),
                mu,
                half_width,
                count,
                lambda_good: (count as f64) < threshold,
                best_overlap: None,
                best_index: None,
                torus_mass: None,
            }
        })
        .collect();
    Ok(reports)
}

/// Fraction of λ-good windows.
pub fn good_fraction(reports: &[WindowReport]) -> f64 {
    if reports.is_empty() {
        return 1.0;
    }
    reports.iter().filter(|r| r.lambda_good).count() as f64 / reports.len() as f64
}

/// Fill `best_overlap`/`best_index` with
/// `max_{E_k ∈ W_m} |⟨u_k, v_m⟩|` for every window.
pub fn overlap_scan(reports: &mut [WindowReport], band: &EigenBand, q: &QuasimodeSet) {
    let overlaps: Vec<(Option<f64>, Option<usize>)> = par::map_range(reports.len(), |ri| {
        let r = &reports[ri];
        let v = &q.vectors[q.indices.iter().position(|m| *m == r.m).unwrap()];
        let mut best: Option<(f64, usize)> = None;
        for (k, e) in band.energies.iter().enumerate() {
            if (e - r.mu).abs() > r.half_width {
                continue;
            }
            let dot: Complex64 = band.vectors[k]
                .iter()
                .zip(v)
                .map(|(a, b)| a.conj() * b)
                .sum();
            let mag = dot.norm();
            if best.map(|(b, _)| mag > b).unwrap_or(true) {
                best = Some((mag, k));
            }
        }
        (best.map(|(b, _)| b), best.map(|(_, k)| k))
    });
    for (r, (overlap, idx)) in reports.iter_mut().zip(overlaps) {
        r.best_overlap = overlap;
        r.best_index = idx;
    }
}

/// Action-window microlocal mass: `Σ |c_{m′}|²` over basis points with
/// `|I_{m′} − I_ω| ≤ δ`. Exact for I-only cutoff symbols (diagonal
/// quantization).
pub fn torus_mass(u: &[Complex64], sp: &SpectralProblem, i_omega: &[f64], delta_dist: f64) -> f64 {
    assert!(delta_dist > 0.0);
    let mut mass = 0.0;
    for (i, m) in sp.basis.iter().enumerate() {
        let action = sp.action_of(m);
        let dist: f64 = action
            .iter()
            .zip(i_omega)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist <= delta_dist * (1.0 + 1e-12) {
            mass += u[i].norm_sqr();
        }
    }
    mass
}

/// Fill `torus_mass` for each window carrying a best eigenfunction, at
/// action window `δ` around the window's own lattice action.
pub fn mass_scan(reports: &mut [WindowReport], band: &EigenBand, sp: &SpectralProblem, delta_dist: f64) {
    for r in reports.iter_mut() {
        if let Some(k) = r.best_index {
            let i_m = lattice_action(&r.m, &sp.maslov, sp.hbar);
            r.torus_mass = Some(torus_mass(&band.vectors[k], sp, &i_m, delta_dist));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::build_matrix;
    use crate::quasimode::{build_quasimode_set, index_set_from_points};
    use crate::series::FourierTaylorSeries;
    use crate::timepoly::TimePolynomialHamiltonian as Tp;

    fn delta45() -> ApproximationFunction {
        ApproximationFunction::power(4.5, 0.1, 2.0).unwrap()
    }

    fn half_i_squared_tp(dom: &Domain, d: usize, kt: u32, ka: u32, t_order: u32) -> Tp {
        let mut acc = FourierTaylorSeries::zero(dom.clone(), kt, ka);
        for j in 0..d {
            let ij = FourierTaylorSeries::action_coordinate(dom.clone(), kt, ka, j);
            acc = acc.add(&ij.multiply(&ij).scale(0.5));
        }
        Tp::monomial(0, acc, t_order, 1.0)
    }

    /// Quasimode set carrying only lattice/μ data (no vectors), enough for
    /// separation scans.
    fn mu_only_set(k: &Tp, indices: Vec<LatticeIndex>, h: f64, t: f64, maslov: Vec<i64>) -> QuasimodeSet {
        let mu: Vec<f64> = indices
            .iter()
            .map(|m| quasi_eigenvalue(k, m, h, t, &maslov).unwrap())
            .collect();
        QuasimodeSet {
            h,
            t,
            maslov,
            indices,
            mu,
            vectors: Vec::new(),
            residuals: Vec::new(),
            orth_defect: 0.0,
        }
    }

    #[test]
    fn separation_zero_violations_integrable_1d() {
        // t = 0, h₀ = ½I² away from I = 0: gaps scale like h·I.
        // K's box covers the sample inflated by L·h.
        let d_box = Domain::new(vec![1.0], vec![0.35]);
        let k = half_i_squared_tp(&d_box, 1, 4, 4, 2);
        for h in [1.0 / 40.0, 1.0 / 80.0] {
            let pts: Vec<Vec<f64>> = (0..61).map(|i| vec![0.7 + 0.01 * i as f64]).collect();
            let indices = index_set_from_points(&pts, h, 1.0, &[0]);
            let q = mu_only_set(&k, indices, h, 0.0, vec![0]);
            let rep = separation_scan(&q, &k, &delta45(), 1.0, Some(0.5), &d_box).unwrap();
            assert!(rep.pairs_checked > 0);
            assert!(rep.violations.is_empty(), "violations at h = {h}: {:?}", rep.violations.len());
        }
    }

    #[test]
    fn separation_detects_injected_resonance() {
        // Symmetric d=2 normal form: swap-pairs have exactly equal μ.
        let d_box = Domain::from_corners(&[0.7, 0.7], &[1.3, 1.3]);
        let k = half_i_squared_tp(&d_box, 2, 4, 4, 2);
        let h = 1.0 / 40.0;
        // include near-diagonal actions
        let pts: Vec<Vec<f64>> = (0..13)
            .map(|i| {
                let x = 0.85 + 0.025 * i as f64;
                vec![x, x + h]
            })
            .collect();
        let indices = index_set_from_points(&pts, h, 1.0, &[0, 0]);
        assert!(!indices.is_empty());
        let q = mu_only_set(&k, indices, h, 0.0, vec![0, 0]);
        let rep = separation_scan(&q, &k, &delta45(), 1.0, Some(0.05), &d_box).unwrap();
        assert!(
            !rep.violations.is_empty(),
            "symmetric model must violate separation (min gap {:.3e})",
            rep.min_separation
        );
    }

    #[test]
    fn separation_single_index_empty() {
        let d_box = Domain::new(vec![1.0], vec![0.001]);
        let k = half_i_squared_tp(&d_box, 1, 4, 4, 2);
        let q = mu_only_set(&k, vec![vec![40]], 1.0 / 40.0, 0.0, vec![0]);
        let rep = separation_scan(&q, &k, &delta45(), 1.0, Some(0.5), &d_box).unwrap();
        assert_eq!(rep.pairs_checked, 0);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn eta_map_nondegenerate_1d() {
        let d_box = Domain::new(vec![1.0], vec![0.3]);
        let k = half_i_squared_tp(&d_box, 1, 4, 4, 2);
        let rep = eta_map_check(&k, 0.0, &d_box, 17);
        // η = ½I², Jacobian = I ≥ 0.7 on the box
        assert!(rep.min_abs_det > 0.69, "min det {}", rep.min_abs_det);
        assert!(rep.g1 > 0.0 && rep.g2 >= rep.g1);
    }

    #[test]
    fn eta_map_flags_degenerate_second_row() {
        // d=2 with a vanishing t¹ coefficient: second η-row ≈ 0.
        let d_box = Domain::from_corners(&[0.8, 0.7], &[1.2, 1.1]);
        let k = half_i_squared_tp(&d_box, 2, 4, 4, 2);
        let rep = eta_map_check(&k, 0.0, &d_box, 9);
        assert!(rep.min_abs_det < 1e-10, "det should collapse, got {}", rep.min_abs_det);

        // non-degenerate control: add t·(I₁³ + ½I₂³)
        let dom = d_box.clone();
        let i1 = FourierTaylorSeries::action_coordinate(dom.clone(), 4, 4, 0);
        let i2 = FourierTaylorSeries::action_coordinate(dom.clone(), 4, 4, 1);
        let g = i1
            .multiply(&i1)
            .multiply(&i1)
            .add(&i2.multiply(&i2).multiply(&i2).scale(0.5));
        let mut k2 = half_i_squared_tp(&d_box, 2, 4, 4, 2);
        k2.add_term(1, g);
        let rep2 = eta_map_check(&k2, 0.0, &d_box, 9);
        assert!(rep2.min_abs_det > 0.1, "expected nondegenerate, got {}", rep2.min_abs_det);
    }

    #[test]
    fn bad_t_fraction_zero_for_huge_gamma() {
        let d_box = Domain::new(vec![1.0], vec![0.3]);
        let k = half_i_squared_tp(&d_box, 1, 4, 4, 2);
        let t_grid: Vec<f64> = (1..200).map(|i| 0.3 * i as f64 / 200.0).collect();
        let frac = bad_t_measure(&k, &vec![40], 1.0 / 40.0, 50.0, &t_grid, &d_box, &[0]);
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn bad_t_fraction_non_increasing_in_inverse_h() {
        // Synthetic K with genuine gap crossings: ½I² + t·(I−1)³·c.
        let d_box = Domain::new(vec![1.0], vec![0.3]);
        let dom = d_box.clone();
        let i = FourierTaylorSeries::action_coordinate(dom.clone(), 4, 4, 0);
        let shift = i.sub(&FourierTaylorSeries::constant(dom.clone(), 4, 4, 1.0));
        let cubic = shift.multiply(&shift).multiply(&shift).scale(5.0);
        let mut k = half_i_squared_tp(&d_box, 1, 4, 4, 2);
        k.add_term(1, cubic);
        let t_grid: Vec<f64> = (1..400).map(|i| 0.3 * i as f64 / 400.0).collect();
        let mut last = f64::INFINITY;
        for h in [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0f64] {
            let m = vec![(1.05 / h).round() as i64];
            let frac = bad_t_measure(&k, &m, h, 4.0, &t_grid, &d_box, &[0]);
            assert!(frac <= last + 1e-12, "fraction grew: {frac} after {last}");
            last = frac;
        }
    }

    #[test]
    fn windows_diagonal_integrable_case() {
        // t = 0 diagonal model: every window catches exactly its own
        // eigenvalue; all λ-good for λ above the measure ratio.
        let basis_box = Domain::new(vec![1.0], vec![0.45]);
        let tp = half_i_squared_tp(&basis_box, 1, 4, 4, 2);
        let h = 1.0 / 40.0;
        let sp = build_matrix(&tp, 0.0, h, &[0], &basis_box, (0.3, 0.7)).unwrap();
        let band = crate::quantize::eigs_in_band(&sp);
        let pts: Vec<Vec<f64>> = (0..41).map(|i| vec![0.85 + 0.3 * i as f64 / 40.0]).collect();
        let indices = index_set_from_points(&pts, h, 1.0, &[0]);
        let gen = Tp::zero(basis_box.clone(), 4, 4, 2, 1.0);
        let q = build_quasimode_set(&tp.power_window(0, 1), &gen, &sp, indices, 10.0, 128).unwrap();
        let mut reports = window_statistics(&band, &q, 4.0, 4.0, 1.0, (0.3, 0.7)).unwrap();
        overlap_scan(&mut reports, &band, &q);
        mass_scan(&mut reports, &band, &sp, 3.0 * h);
        for r in &reports {
            let in_band = r.mu >= 0.3 && r.mu <= 0.7;
            if in_band {
                assert_eq!(r.count, 1, "window at mu = {} has count {}", r.mu, r.count);
                assert!(r.lambda_good);
                let overlap = r.best_overlap.unwrap();
                assert!((overlap - 1.0).abs() < 1e-10, "overlap {overlap}");
                assert!(r.torus_mass.unwrap() > 1.0 - 1e-12);
            }
        }
        assert!(good_fraction(&reports) >= 0.5);
    }

    #[test]
    fn window_overlap_error_when_separation_fails() {
        // two identical quasi-eigenvalues → overlapping windows
        let box2 = Domain::from_corners(&[0.7, 0.7], &[1.3, 1.3]);
        let k = half_i_squared_tp(&box2, 2, 4, 4, 2);
        let h = 1.0 / 40.0;
        let q = mu_only_set(
            &k,
            vec![vec![30, 41], vec![41, 30]],
            h,
            0.0,
            vec![0, 0],
        );
        let band = EigenBand {
            energies: Vec::new(),
            vectors: Vec::new(),
            residual: 0.0,
            ortho_defect: 0.0,
        };
        let err = window_statistics(&band, &q, 4.0, 4.0, 1.0, (0.0, 10.0));
        assert!(matches!(err, Err(ScarError::WindowsOverlap { .. })));
    }

    #[test]
    fn random_vector_overlap_baseline() {
        // a random unit vector overlaps like n^{-1/2}, far below a true
        // eigenfunction match
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 400;
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[17] = Complex64::new(1.0, 0.0);
        let dot: Complex64 = v.iter().zip(&e).map(|(a, b)| a.conj() * b).sum();
        assert!(dot.norm() < 10.0 / (n as f64).sqrt(), "overlap {}", dot.norm());
        assert!(dot.norm() < 0.5);
    }

    #[test]
    fn torus_mass_trivial_cases_and_monotonicity() {
        let dom = Domain::new(vec![1.0], vec![0.4]);
        let tp = half_i_squared_tp(&dom, 1, 4, 2, 2);
        let h = 0.05;
        let sp = build_matrix(&tp, 0.0, h, &[0], &dom, (0.45, 0.55)).unwrap();
        let m = vec![20i64];
        let idx = sp.index_of(&m).unwrap();
        let mut u = vec![Complex64::new(0.0, 0.0); sp.len()];
        u[idx] = Complex64::new(1.0, 0.0);
        let i_m = lattice_action(&m, &[0], h);
        assert_eq!(torus_mass(&u, &sp, &i_m, 0.01), 1.0);
        let far = vec![1.0 + 0.3];
        assert_eq!(torus_mass(&u, &sp, &far, 0.01), 0.0);
        // monotone in δ, saturating at 1
        let mut last = 0.0;
        for k in 1..=10 {
            let mass = torus_mass(&u, &sp, &vec![1.07], 0.02 * k as f64);
            assert!(mass >= last);
            last = mass;
        }
        assert_eq!(last, 1.0);
    }
}
