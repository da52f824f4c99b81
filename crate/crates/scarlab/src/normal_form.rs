//! The iterative classical normal form.
//!
//! Starting from `H = h₀(I) + f₀(θ,I;t)`, step `r` removes the lowest
//! surviving block of `t`-powers `[2^r, 2^{r+1})` from the remainder with a
//! generating function `Φ_r = ⟨I′,φ⟩ + t^{2^r}·ψ_r(φ,I′;t)` whose
//! coefficients solve the homological equation power by power (the
//! frequency `∇h_r` is itself `t`-dependent, giving a triangular system).
//! The remainder order doubles each step; after the sweep the angle-free
//! accumulated part is the normal form `K(I;t)`.
//!
//! The implicit canonical map is inverted by fixed-point iteration in the
//! truncated polynomial algebra, where it reaches exact stationarity in
//! `⌈(T+1)/2^r⌉` sweeps; the evaluation residual of the defining identity
//! at `t = t_max` is the reported certificate. The new remainder is
//! assembled from the two Taylor-remainder integrals
//!
//! ```text
//!   f^I  = ∫₀¹ (1−s) ds  ∂²h_r(I′+sΞ) · Ξ⊗Ξ
//!   f^II = ∫₀¹ ds       ∂_I f_r(I′+sΞ, φ′+Λ) · Ξ
//! ```
//!
//! with 8-point Gauss–Legendre in `s` — exact on the polynomial truncation —
//! plus the composed above-block tail of the solved equation.

use serde::Serialize;

use crate::error::{Result, ScarError};
use crate::homological::{self, Frequency};
use crate::nonres::ApproximationFunction;
use crate::series::{FourierTaylorSeries, Var};
use crate::timepoly::TimePolynomialHamiltonian;

type Tp = TimePolynomialHamiltonian;

/// 8-point Gauss–Legendre nodes/weights on [0,1] (exact to degree 15).
const GL8: [(f64, f64); 8] = [
    (0.019855071751231884, 0.05061426814518813),
    (0.10166676129318664, 0.11119051722668724),
    (0.2372337950418355, 0.15685332293894363),
    (0.40828267875217505, 0.18134189168918098),
    (0.591717321247825, 0.18134189168918098),
    (0.7627662049581645, 0.15685332293894363),
    (0.8983332387068134, 0.11119051722668724),
    (0.9801449282487682, 0.05061426814518813),
];

/// Tunables of the iteration.
#[derive(Clone, Debug)]
pub struct IterationOptions {
    /// Cap on the evaluation residual of the inverted map at `t_max`,
    /// relative to the map's own size there (the irreducible floor is the
    /// `t`-truncation tail, which scales with the map).
    pub inversion_tol: f64,
    /// Fixed-point iteration cap.
    pub max_inversion_iters: usize,
    /// Action-box shrink factor applied after each step.
    pub box_shrink: f64,
    /// Relative budget for the solved-block residue before it is dropped.
    pub block_residue_tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            inversion_tol: 1e-3,
            max_inversion_iters: 50,
            box_shrink: 0.9,
            block_residue_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub block_lo: u32,
    pub block_hi: u32,
    pub inversion_residual: f64,
    pub inversion_iterations: usize,
    /// Max coefficient left in the solved block before it was dropped
    /// (mathematically zero; roundoff in practice).
    pub solved_block_residue: f64,
    pub min_divisor: f64,
    pub amplification: f64,
}

/// Everything one step produces.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub h_next: Tp,
    pub f_next: Tp,
    /// Generator ψ_r (without the `t^{2^r}` prefactor).
    pub psi: Tp,
    /// Action map Ξ(I′,φ′;t), prefactor included.
    pub xi: Vec<Tp>,
    /// Angle map Λ(I′,φ′;t), prefactor included.
    pub lambda: Vec<Tp>,
    pub diagnostics: StepDiagnostics,
}

/// Per-step record kept by the full iteration.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub step: usize,
    pub h: Tp,
    pub f: Tp,
    pub psi: Tp,
    pub xi: Vec<Tp>,
    pub lambda: Vec<Tp>,
    pub diagnostics: StepDiagnostics,
    /// Fitted leading `t`-power of `f` after this step.
    pub measured_order: Option<OrderFit>,
}

/// Result of the iteration sweep.
#[derive(Clone, Debug)]
pub struct NormalFormResult {
    pub h0: Tp,
    pub f0: Tp,
    pub iterations: Vec<IterationRecord>,
    /// Angle-free `K(I;t)`, truncated at the requested order.
    pub k: Tp,
    pub remainder_orders: Vec<f64>,
}

/// Least-squares log–log slope fit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OrderFit {
    pub slope: f64,
    pub residual: f64,
}

/// Split `H = h + f` with `h` the angle average of the `t⁰` part.
pub fn split(h_full: &Tp) -> (Tp, Tp) {
    let mut h = Tp::zero(
        h_full.domain().clone(),
        h_full.k_theta(),
        h_full.k_action(),
        h_full.t_order(),
        h_full.t_max(),
    );
    if let Some(p0) = h_full.term(0) {
        h.add_term(0, p0.angle_average());
    }
    let f = h_full.sub(&h);
    (h, f)
}

/// One normalization step. `h` must be angle-free; `f`'s leading power
/// `P ≥ 1` determines the removed block `[P, 2P)`.
pub fn one_step(
    h: &Tp,
    f: &Tp,
    delta: &ApproximationFunction,
    opts: &IterationOptions,
) -> Result<StepOutcome> {
    let d = h.dim();
    let t_order = h.t_order();
    let zero_tp = || Tp::zero(h.domain().clone(), h.k_theta(), h.k_action(), t_order, h.t_max());

    let p = match f.leading_power() {
        None => {
            // identity step
            return Ok(StepOutcome {
                h_next: h.clone(),
                f_next: f.clone(),
                psi: zero_tp(),
                xi: vec![zero_tp(); d],
                lambda: vec![zero_tp(); d],
                diagnostics: StepDiagnostics {
                    block_lo: 0,
                    block_hi: 0,
                    inversion_residual: 0.0,
                    inversion_iterations: 0,
                    solved_block_residue: 0.0,
                    min_divisor: f64::INFINITY,
                    amplification: 0.0,
                },
            });
        }
        Some(0) => {
            return Err(ScarError::InvariantViolation(
                "remainder has a t⁰ component; split the Hamiltonian first".into(),
            ))
        }
        Some(p) => p,
    };
    let block_hi = (2 * p).min(t_order + 1);

    // Frequency slices ω^{(l)} = [∇h]_l; ω^{(0)} = ∇h₀ drives every solve.
    let grad_h: Vec<Tp> = h.action_gradient();
    let omega0: Vec<FourierTaylorSeries> = grad_h
        .iter()
        .map(|g| {
            g.term(0)
                .cloned()
                .unwrap_or_else(|| FourierTaylorSeries::zero(h.domain().clone(), h.k_theta(), h.k_action()))
        })
        .collect();
    let omega0_freq = Frequency::ActionMap(omega0);

    // Triangular solve of the block: for q = P+j,
    //   ω⁰·∂_φψ^{(j)} = −n^{(q)} − Σ_{l≥1} ω^{(l)}·∂_φψ^{(j−l)}
    let n_block = f.power_window(p, block_hi).remove_angle_average();
    let mut psi = zero_tp();
    let mut min_divisor = f64::INFINITY;
    let mut amplification: f64 = 0.0;
    for j in 0..(block_hi - p) {
        let q = p + j;
        let mut rhs = n_block
            .term(q)
            .cloned()
            .unwrap_or_else(|| FourierTaylorSeries::zero(h.domain().clone(), h.k_theta(), h.k_action()))
            .scale(-1.0);
        for l in 1..=j {
            if let Some(psi_prev) = psi.term(j - l) {
                for (m, gh) in grad_h.iter().enumerate() {
                    if let Some(omega_l) = gh.term(l) {
                        let cross = omega_l.multiply(&psi_prev.partial_derivative(Var::Angle(m)));
                        rhs = rhs.sub(&cross);
                    }
                }
            }
        }
        if rhs.is_zero() {
            continue;
        }
        let sol = homological::solve(&rhs, &omega0_freq, delta)?;
        min_divisor = min_divisor.min(sol.min_divisor);
        amplification = amplification.max(sol.amplification);
        psi.add_term(j, sol.psi);
    }

    // Generator with prefactor; gradient pieces for the maps.
    let gen = psi.shift_power(p);
    let gen_dphi: Vec<Tp> = (0..d).map(|m| gen.partial_derivative(Var::Angle(m))).collect();
    let gen_di: Vec<Tp> = (0..d).map(|m| gen.partial_derivative(Var::Action(m))).collect();

    // Fixed point Λ = −∂_I gen(I′, φ′ + Λ); gains t^P accuracy per sweep.
    let mut lambda: Vec<Tp> = vec![zero_tp(); d];
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > opts.max_inversion_iters {
            return Err(ScarError::InversionDiverged {
                residual: f64::NAN,
                iterations: iterations - 1,
                tol: opts.inversion_tol,
            });
        }
        let mut next = Vec::with_capacity(d);
        let zero_maps: Vec<Tp> = vec![zero_tp(); d];
        for g in &gen_di {
            next.push(g.compose_near_identity(&zero_maps, &lambda)?.scale(-1.0));
        }
        let change: f64 = next
            .iter()
            .zip(&lambda)
            .map(|(a, b)| a.sub(b).max_abs_coeff())
            .fold(0.0, f64::max);
        lambda = next;
        if change == 0.0 {
            break;
        }
    }
    let zero_maps: Vec<Tp> = vec![zero_tp(); d];
    let mut xi: Vec<Tp> = Vec::with_capacity(d);
    for g in &gen_dphi {
        xi.push(g.compose_near_identity(&zero_maps, &lambda)?);
    }

    // Certificate: evaluation residual of Λ + ∂_I gen(I′, φ′+Λ) at t_max,
    // measured against the map's own scale.
    let inversion_residual = inversion_defect(&gen_di, &lambda, h.t_max());
    let map_scale: f64 = lambda
        .iter()
        .map(|l| {
            l.terms()
                .map(|(p, s)| h.t_max().powi(p as i32).abs() * s.sup_estimate())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if inversion_residual > opts.inversion_tol * map_scale.max(1e-300) && map_scale > 0.0 {
        return Err(ScarError::InversionDiverged {
            residual: inversion_residual,
            iterations,
            tol: opts.inversion_tol * map_scale,
        });
    }

    // h_{r+1} = h_r + ⟨f_r⟩.
    let f_mean = f.angle_average();
    let h_next = h.add(&f_mean);

    // S = ω_r·∂_φ gen + (f_r − ⟨f_r⟩): zero in the solved block up to
    // roundoff; verified, then the block is dropped and the tail composed.
    let mut s = f.sub(&f_mean);
    for (m, gh) in grad_h.iter().enumerate() {
        s = s.add(&gh.multiply(&gen.partial_derivative(Var::Angle(m))));
    }
    let residue = s.power_window(p, block_hi).max_abs_coeff();
    let scale = f.max_abs_coeff().max(1.0);
    if residue > opts.block_residue_tol * scale {
        return Err(ScarError::InvariantViolation(format!(
            "solved block residue {residue:.3e} exceeds budget (scale {scale:.3e})"
        )));
    }
    let s_tail = s.drop_below(block_hi);
    let s_composed = if s_tail.is_zero() {
        zero_tp()
    } else {
        s_tail.compose_near_identity(&zero_maps, &lambda)?
    };

    // f^I: Taylor remainder of h_r along Ξ.
    let mut f_one = zero_tp();
    for j in 0..d {
        for k in 0..d {
            let hjk = h
                .partial_derivative(Var::Action(j))
                .partial_derivative(Var::Action(k));
            if hjk.is_zero() {
                continue;
            }
            let mut integral = zero_tp();
            for (node, weight) in GL8 {
                let sxi: Vec<Tp> = xi.iter().map(|x| x.scale(node)).collect();
                let moved = hjk.compose_near_identity(&sxi, &zero_maps)?;
                integral = integral.add(&moved.scale(weight * (1.0 - node)));
            }
            f_one = f_one.add(&integral.multiply(&xi[j]).multiply(&xi[k]));
        }
    }

    // f^II: Taylor remainder of f_r along Ξ at shifted angles.
    let mut f_two = zero_tp();
    for j in 0..d {
        let fj = f.partial_derivative(Var::Action(j));
        if fj.is_zero() {
            continue;
        }
        let mut integral = zero_tp();
        for (node, weight) in GL8 {
            let sxi: Vec<Tp> = xi.iter().map(|x| x.scale(node)).collect();
            let moved = fj.compose_near_identity(&sxi, &lambda)?;
            integral = integral.add(&moved.scale(weight));
        }
        f_two = f_two.add(&integral.multiply(&xi[j]));
    }

    let f_next = f_one.add(&f_two).add(&s_composed);

    Ok(StepOutcome {
        h_next,
        f_next,
        psi,
        xi,
        lambda,
        diagnostics: StepDiagnostics {
            block_lo: p,
            block_hi,
            inversion_residual,
            inversion_iterations: iterations,
            solved_block_residue: residue,
            min_divisor,
            amplification,
        },
    })
}

fn inversion_defect(gen_di: &[Tp], lambda: &[Tp], t_max: f64) -> f64 {
    let d = gen_di.len();
    let dom = gen_di[0].domain().clone();
    let mut worst = 0.0f64;
    let n = 7;
    let mut theta = vec![0.0; d];
    let mut action = vec![0.0; d];
    let mut idx = vec![0usize; 2 * d];
    loop {
        for j in 0..d {
            theta[j] = 2.0 * std::f64::consts::PI * idx[j] as f64 / n as f64;
            let r = dom.radius[j] * 0.7;
            action[j] = dom.base_point[j] - r + 2.0 * r * idx[d + j] as f64 / (n - 1) as f64;
        }
        let lam: Vec<f64> = lambda
            .iter()
            .map(|l| l.eval_unchecked(&theta, &action, t_max))
            .collect();
        let shifted: Vec<f64> = theta.iter().zip(&lam).map(|(t, l)| t + l).collect();
        for j in 0..d {
            let g = gen_di[j].eval_unchecked(&shifted, &action, t_max);
            worst = worst.max((lam[j] + g).abs());
        }
        let mut carry = 0;
        loop {
            if carry == 2 * d {
                return worst;
            }
            idx[carry] += 1;
            if idx[carry] < n {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
}

/// Run the sweep: split, then `r_max` steps with the box shrinking by
/// `opts.box_shrink` after each. `k_order` is the `t`-order the normal form
/// is reported to; `2^{r_max}` must exceed it.
pub fn run_iteration(
    hamiltonian: &Tp,
    r_max: usize,
    k_order: u32,
    delta: &ApproximationFunction,
    opts: &IterationOptions,
) -> Result<NormalFormResult> {
    if (1u64 << r_max) <= k_order as u64 {
        return Err(ScarError::Config(format!(
            "r_max = {r_max} too small: 2^r_max must exceed the requested t-order {k_order}"
        )));
    }
    let (h0, f0) = split(hamiltonian);
    let mut h = h0.clone();
    let mut f = f0.clone();
    let mut iterations = Vec::with_capacity(r_max);
    for step in 0..r_max {
        let out = one_step(&h, &f, delta, opts)?;
        h = shrink_tp(&out.h_next, opts.box_shrink);
        f = shrink_tp(&out.f_next, opts.box_shrink);
        iterations.push(IterationRecord {
            step,
            h: h.clone(),
            f: f.clone(),
            psi: out.psi,
            xi: out.xi,
            lambda: out.lambda,
            diagnostics: out.diagnostics,
            measured_order: None,
        });
        if f.is_zero() {
            break;
        }
    }
    let k = h.power_window(0, k_order + 1);
    Ok(NormalFormResult {
        h0,
        f0,
        iterations,
        k,
        remainder_orders: Vec::new(),
    })
}

fn shrink_tp(tp: &Tp, factor: f64) -> Tp {
    let dom = crate::series::Domain::new(
        tp.domain().base_point.clone(),
        tp.domain().radius.iter().map(|r| r * factor).collect(),
    );
    let mut out = Tp::zero(dom.clone(), tp.k_theta(), tp.k_action(), tp.t_order(), tp.t_max());
    for (p, s) in tp.terms() {
        out.add_term(p, s.with_domain(dom.clone()));
    }
    out
}

/// Measure the leading `t`-power of a remainder: log–log slope of the
/// sup-norm over a fixed `(θ,I)` grid against `t`.
pub fn measure_remainder_order(f: &Tp, t_grid: &[f64], n_theta: usize, n_action: usize) -> OrderFit {
    assert!(t_grid.len() >= 4, "need at least 4 t samples");
    let lo = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t_grid.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo >= 9.0, "t grid should span a decade");
    let xs: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = t_grid
        .iter()
        .map(|t| f.sup_on_grid(*t, n_theta, n_action).max(1e-300).ln())
        .collect();
    log_log_fit(&xs, &ys)
}

/// Plain least squares of y against x; returns slope and RMS residual.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> OrderFit {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    OrderFit { slope, residual }
}

/// Accumulated generator `Σ_r t^{2^r} ψ_r` over the first `steps` records,
/// flattened to a single family (the quasimode phase).
pub fn accumulated_generator(result: &NormalFormResult, steps: usize) -> Tp {
    let mut acc = Tp::zero(
        result.h0.domain().clone(),
        result.h0.k_theta(),
        result.h0.k_action(),
        result.h0.t_order(),
        result.h0.t_max(),
    );
    for rec in result.iterations.iter().take(steps) {
        acc = acc.add(&rec.psi.shift_power(rec.diagnostics.block_lo));
    }
    acc
}

/// Conservation defect of one step at parameter `t`: evaluate
/// `h_{r+1}+f_{r+1}` at `(φ′,I′)` against `h_r+f_r` at the mapped point.
/// Bounded by the composition truncation `O(t^{(KI+1)·2^r})`.
pub fn conservation_defect(
    h_prev: &Tp,
    f_prev: &Tp,
    rec: &IterationRecord,
    t: f64,
    sample_scale: f64,
) -> f64 {
    let d = h_prev.dim();
    let dom = rec.h.domain();
    let new_total = rec.h.add(&rec.f);
    let old_total = h_prev.add(f_prev);
    let mut worst = 0.0f64;
    let n = 6;
    let mut idx = vec![0usize; 2 * d];
    let mut theta = vec![0.0; d];
    let mut action = vec![0.0; d];
    loop {
        for j in 0..d {
            theta[j] = 2.0 * std::f64::consts::PI * idx[j] as f64 / n as f64 + 0.31;
            let r = dom.radius[j] * sample_scale;
            action[j] = dom.base_point[j] - r + 2.0 * r * idx[d + j] as f64 / (n - 1) as f64;
        }
        let lam: Vec<f64> = rec.lambda.iter().map(|l| l.eval_unchecked(&theta, &action, t)).collect();
        let xi_v: Vec<f64> = rec.xi.iter().map(|x| x.eval_unchecked(&theta, &action, t)).collect();
        let mapped_theta: Vec<f64> = theta.iter().zip(&lam).map(|(th, l)| th + l).collect();
        let mapped_action: Vec<f64> = action.iter().zip(&xi_v).map(|(a, x)| a + x).collect();
        let lhs = new_total.eval_unchecked(&theta, &action, t);
        let rhs = old_total.eval_unchecked(&mapped_theta, &mapped_action, t);
        worst = worst.max((lhs - rhs).abs());
        let mut carry = 0;
        loop {
            if carry == 2 * d {
                return worst;
            }
            idx[carry] += 1;
            if idx[carry] < n {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
}

/// Volume-preservation proxy: finite-difference Jacobian determinant of the
/// map `(φ′,I′) ↦ (φ,I)` at sample points; exact symplectic maps give 1.
pub fn symplectic_defect(rec: &IterationRecord, t: f64) -> f64 {
    let d = rec.h.dim();
    let dom = rec.h.domain();
    let step = 1e-5;
    let eval_map = |theta: &[f64], action: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * d);
        for j in 0..d {
            out.push(theta[j] + rec.lambda[j].eval_unchecked(theta, action, t));
        }
        for j in 0..d {
            out.push(action[j] + rec.xi[j].eval_unchecked(theta, action, t));
        }
        out
    };
    let mut worst = 0.0f64;
    for sample in 0..5 {
        let theta: Vec<f64> = (0..d).map(|j| 0.37 + 1.13 * (sample + j) as f64).collect();
        let action: Vec<f64> = (0..d)
            .map(|j| dom.base_point[j] + dom.radius[j] * 0.3 * ((sample as f64 * 0.41 + j as f64).sin()))
            .collect();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(2 * d, 2 * d);
        for col in 0..2 * d {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            let mut ap = action.clone();
            let mut am = action.clone();
            if col < d {
                tp[col] += step;
                tm[col] -= step;
            } else {
                ap[col - d] += step;
                am[col - d] -= step;
            }
            let plus = eval_map(&tp, &ap);
            let minus = eval_map(&tm, &am);
            for row in 0..2 * d {
                jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
            }
        }
        let det = jac.determinant();
        worst = worst.max((det - 1.0).abs());
    }
    worst
}
