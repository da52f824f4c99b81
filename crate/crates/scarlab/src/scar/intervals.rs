//! Interval-set measure utilities for the bad-parameter estimates.
//!
//! For `A ⊂ (0, t₀)` with window density
//! `meas(A ∩ (x−r, x+r)) / meas((0,t₀) ∩ (x−r, x+r)) < ε` for all `x`, the
//! total measure obeys `meas(A) < 2·ε·t₀`. Both window measures are
//! piecewise linear in `x`, so their ratio is piecewise monotone and the
//! exact supremum is attained at a breakpoint: endpoints of `A` shifted by
//! `±r`, plus `{0, r, t₀−r, t₀}`.

/// Finite union of intervals in sorted, disjoint form.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet {
    items: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Normalize arbitrary (possibly overlapping, unordered) intervals.
    pub fn new(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|(a, b)| b > a);
        raw.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut items: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match items.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => items.push((a, b)),
            }
        }
        IntervalSet { items }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.items
    }

    pub fn measure(&self) -> f64 {
        self.items.iter().map(|(a, b)| b - a).sum()
    }

    /// Measure of `A ∩ (lo, hi)`.
    pub fn measure_within(&self, lo: f64, hi: f64) -> f64 {
        self.items
            .iter()
            .map(|(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
            .sum()
    }
}

/// Exact supremum over `x ∈ [0, t₀]` of the window density
/// `meas(A∩(x−r,x+r)) / meas((0,t₀)∩(x−r,x+r))`.
pub fn density_sup(a: &IntervalSet, t0: f64, r: f64) -> f64 {
    assert!(r > 0.0 && t0 > 0.0);
    let mut xs = vec![0.0, t0, r.min(t0), (t0 - r).max(0.0)];
    for (lo, hi) in a.intervals() {
        for e in [lo, hi] {
            xs.push(e - r);
            xs.push(e + r);
        }
    }
    xs.retain(|x| *x >= 0.0 && *x <= t0);
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xs.dedup();
    let mut sup = 0.0f64;
    for x in xs {
        let num = a.measure_within(x - r, x + r);
        let den = (x + r).min(t0) - (x - r).max(0.0);
        if den > 0.0 {
            sup = sup.max(num / den);
        }
    }
    sup
}

/// The measure bound: with `ε` an upper bound on the window density at
/// radius `r`, `meas(A) ≤ 2·ε·t₀`. Returns `(meas, bound)`.
pub fn measure_lemma_bound(a: &IntervalSet, t0: f64, r: f64) -> (f64, f64) {
    let eps = density_sup(a, t0, r);
    (a.measure(), 2.0 * eps * t0)
}
