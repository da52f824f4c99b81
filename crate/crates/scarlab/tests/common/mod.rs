//! Shared test oracles, independent of the library's implementation paths.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

/// Cyclic Jacobi eigensolver for complex Hermitian matrices. Slow and
/// simple; used as the independent dual of the library's dense solve.
pub fn jacobi_hermitian_eigenvalues(a: &DMatrix<C64>, tol: f64) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[(p, q)];
                if b.norm() < 1e-300 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let beta = b / b.norm(); // phase of the off-diagonal entry
                let tau = (aqq - app) / (2.0 * b.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: J = [[c, s·β],[−s·β̄, c]] acting on (p,q)
                for r in 0..n {
                    let mrp = m[(r, p)];
                    let mrq = m[(r, q)];
                    m[(r, p)] = mrp * c - mrq * s * beta.conj();
                    m[(r, q)] = mrp * s * beta + mrq * c;
                }
                for r in 0..n {
                    let mpr = m[(p, r)];
                    let mqr = m[(q, r)];
                    m[(p, r)] = mpr * c - mqr * s * beta;
                    m[(q, r)] = mpr * s * beta.conj() + mqr * c;
                }
            }
        }
    }
    let mut evs: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    evs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    evs
}

/// Energy of the rotational pendulum torus with action `j` at perturbation
/// `eps_total = t·ε`, computed from the closed-form action integral
/// `A(E) = (2π)^{-1} ∮ √(2(E − eps·cos θ)) dθ` by quadrature and Newton
/// inversion. Entirely independent of the series machinery.
pub fn pendulum_energy_of_action(j: f64, eps_total: f64) -> f64 {
    let action_of_energy = |e: f64| -> f64 {
        let n = 4096;
        let mut sum = 0.0;
        for i in 0..n {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            sum += (2.0 * (e - eps_total * theta.cos())).sqrt();
        }
        sum / n as f64
    };
    let d_action = |e: f64| -> f64 {
        let n = 4096;
        let mut sum = 0.0;
        for i in 0..n {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            sum += 1.0 / (2.0 * (e - eps_total * theta.cos())).sqrt();
        }
        sum / n as f64
    };
    let mut e = 0.5 * j * j; // unperturbed guess
    for _ in 0..60 {
        let f = action_of_energy(e) - j;
        if f.abs() < 1e-14 {
            break;
        }
        e -= f / d_action(e);
    }
    e
}

/// Extract the `t²` coefficient of `E(J; t)` by fitting an even polynomial
/// through exact evaluations (4×4 Vandermonde in `s = t²`).
pub fn pendulum_second_order_coefficient(j: f64, eps: f64, tau: f64) -> f64 {
    let svals = [0.0, tau * tau, 4.0 * tau * tau, 9.0 * tau * tau];
    let evals: Vec<f64> = [0.0, tau, 2.0 * tau, 3.0 * tau]
        .iter()
        .map(|t| pendulum_energy_of_action(j, t * eps))
        .collect();
    // solve V c = e for c = (c0, c2, c4, c6)
    let mut v = DMatrix::<f64>::zeros(4, 4);
    for (r, s) in svals.iter().enumerate() {
        for c in 0..4 {
            v[(r, c)] = s.powi(c as i32);
        }
    }
    let rhs = nalgebra::DVector::from_row_slice(&evals);
    let sol = v.lu().solve(&rhs).expect("vandermonde solvable");
    sol[1]
}

/// Dense grid discretization of `−h²/2 ∂² + V(θ)` on `n` periodic points,
/// assembled from an explicit DFT matrix (no library code involved).
pub fn grid_schroedinger_matrix(n: usize, h: f64, potential: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    // wavenumbers in [−n/2, n/2)
    let wavenumber = |k: usize| -> f64 {
        let k = k as i64;
        let half = n as i64 / 2;
        (if k < half { k } else { k - n as i64 }) as f64
    };
    let mut a = DMatrix::<C64>::zeros(n, n);
    // A = F^{-1} D F + diag(V): entry (j,l) = Σ_k e^{ikθ_j}·½h²k²·e^{−ikθ_l}/n
    for jj in 0..n {
        for l in 0..n {
            let mut sum = C64::new(0.0, 0.0);
            for k in 0..n {
                let kk = wavenumber(k);
                let phase = kk * tau * (jj as f64 - l as f64);
                sum += C64::from_polar(0.5 * h * h * kk * kk / n as f64, phase);
            }
            a[(jj, l)] = sum;
        }
    }
    for jj in 0..n {
        a[(jj, jj)] += C64::new(potential(tau * jj as f64), 0.0);
    }
    a
}

/// `J_n(z)` by Simpson quadrature of `(1/π)∫₀^π cos(nτ − z sin τ) dτ`.
pub fn bessel_j(n: u32, z: f64) -> f64 {
    let steps = 4000;
    let h = std::f64::consts::PI / steps as f64;
    let f = |tau: f64| ((n as f64) * tau - z * tau.sin()).cos();
    let mut sum = f(0.0) + f(std::f64::consts::PI);
    for i in 1..steps {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    sum * h / 3.0 / std::f64::consts::PI
}
