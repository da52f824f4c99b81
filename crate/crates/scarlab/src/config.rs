//! Experiment configuration: JSON canonical, flat `key = value` accepted.
//!
//! Validation happens before any computation: the window exponent must
//! satisfy `γ > 7/4 + 2d`, the semiclassical sweep must be strictly
//! decreasing, the band nonempty, and all boxes dimensionally consistent.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, ScarError};
use crate::nonres::ApproximationFunction;
use crate::series::Domain;
use crate::timepoly::TimePolynomialHamiltonian;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelConfig {
    /// `½I² + t·ε·cos θ` (d = 1).
    Pendulum1d { epsilon: f64 },
    /// `½|I|² + Σ t^i·ε·f_i(φ)·g_{i+2}(I)` with default amplitudes.
    Example5 { epsilon: f64 },
    /// A `time_poly` JSON-lines file.
    CustomFile { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaConfig {
    /// "power" or "exp_power".
    pub kind: String,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig {
            kind: "power".into(),
            tau: 4.5,
            a: 1.0,
            b: 0.4,
            kappa: 0.1,
            sigma: 2.0,
        }
    }
}

impl DeltaConfig {
    pub fn build(&self) -> Result<ApproximationFunction> {
        match self.kind.as_str() {
            "power" => ApproximationFunction::power(self.tau, self.kappa, self.sigma),
            "exp_power" | "exp-power" => {
                ApproximationFunction::exp_power(self.a, self.b, self.kappa, self.sigma)
            }
            other => Err(ScarError::Config(format!("unknown delta kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub model: ModelConfig,
    /// Perturbation parameter of the run.
    pub t: f64,
    /// Upper end of the admissible `t` interval.
    pub t0: f64,
    /// Semiclassical sweep, strictly decreasing.
    pub h_list: Vec<f64>,
    pub delta: DeltaConfig,
    pub k_theta: u32,
    pub k_action: u32,
    /// Normal-form steps.
    pub r_max: usize,
    /// Working `t`-truncation of the series family.
    pub t_order: u32,
    /// `t`-order the normal form `K` is reported to.
    pub k_order: u32,
    pub band: (f64, f64),
    /// Window exponent; must exceed `7/4 + 2d`.
    pub gamma: f64,
    pub lambda: f64,
    /// Index-set width multiplier `L`.
    pub l_window: f64,
    /// Torus-mass action window as a multiple of `h`.
    pub mass_delta_h: f64,
    pub maslov: Vec<i64>,
    /// Action box `D` (corners).
    pub d_box: (Vec<f64>, Vec<f64>),
    /// Spectral basis box (corners), must contain `D` with margin.
    pub basis_box: (Vec<f64>, Vec<f64>),
    /// Non-resonance grid resolution per axis.
    pub nonres_grid: usize,
    pub k_test: u32,
    /// Separation hypothesis constant C₁ (sets the pair ball radius
    /// `h·Δ⁻¹(C₁h^{−1/2})`; keep it small enough that the quadratic term
    /// stays subordinate at the h actually swept).
    pub c1: f64,
    /// Separation constant C₂; `None` calibrates at the largest `h`.
    pub c2: Option<f64>,
    /// Phase-space quadrature resolutions.
    pub quad_theta: usize,
    pub quad_action: usize,
    /// Quasimode quadrature points per angle axis.
    pub n_quad: usize,
    pub phase_bound: f64,
    pub inversion_tol: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 1,
            model: ModelConfig::Pendulum1d { epsilon: 2e-4 },
            t: 0.05,
            t0: 0.3,
            h_list: vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0],
            delta: DeltaConfig::default(),
            k_theta: 12,
            k_action: 6,
            r_max: 2,
            t_order: 8,
            k_order: 2,
            band: (0.245, 0.845),
            gamma: 4.0,
            lambda: 4.0,
            l_window: 1.0,
            mass_delta_h: 3.0,
            maslov: vec![0],
            d_box: (vec![0.7], vec![1.3]),
            basis_box: (vec![0.55], vec![1.45]),
            nonres_grid: 401,
            k_test: 12,
            c1: 0.3,
            c2: None,
            quad_theta: 16,
            quad_action: 4096,
            n_quad: 128,
            phase_bound: 50.0,
            inversion_tol: 1e-3,
            seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(ScarError::Config("dim must be ≥ 1".into()));
        }
        if self.gamma <= 1.75 + 2.0 * d as f64 {
            return Err(ScarError::Config(format!(
                "gamma = {} must exceed 7/4 + 2d = {}",
                self.gamma,
                1.75 + 2.0 * d as f64
            )));
        }
        if self.h_list.is_empty() {
            return Err(ScarError::Config("h_list is empty".into()));
        }
        if !self.h_list.windows(2).all(|w| w[1] < w[0]) {
            return Err(ScarError::Config("h_list must be strictly decreasing".into()));
        }
        if self.band.0 >= self.band.1 {
            return Err(ScarError::Config("band must be a nonempty interval".into()));
        }
        for (name, (lo, hi)) in [("d_box", &self.d_box), ("basis_box", &self.basis_box)] {
            if lo.len() != d || hi.len() != d {
                return Err(ScarError::Config(format!("{name} must have dim {d}")));
            }
            if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                return Err(ScarError::Config(format!("{name} corners out of order")));
            }
        }
        if self.maslov.len() != d {
            return Err(ScarError::Config(format!("maslov must have dim {d}")));
        }
        // basis box must contain D
        for j in 0..d {
            if self.basis_box.0[j] > self.d_box.0[j] || self.basis_box.1[j] < self.d_box.1[j] {
                return Err(ScarError::Config("basis_box must contain d_box".into()));
            }
        }
        if (1u64 << self.r_max) <= self.k_order as u64 {
            return Err(ScarError::Config(
                "2^r_max must exceed the requested k_order".into(),
            ));
        }
        if matches!(self.model, ModelConfig::Pendulum1d { .. }) && d != 1 {
            return Err(ScarError::Config("pendulum1d model requires dim = 1".into()));
        }
        self.delta.build().map(|_| ())
    }

    pub fn d_domain(&self) -> Domain {
        Domain::from_corners(&self.d_box.0, &self.d_box.1)
    }

    pub fn basis_domain(&self) -> Domain {
        Domain::from_corners(&self.basis_box.0, &self.basis_box.1)
    }

    /// Working domain of the normal form: `D` inflated to cover the index
    /// set smear `L·h` plus a pair-scan margin at the coarsest `h`, and
    /// compensated for the 0.9-per-step box shrink of the iteration so the
    /// final `K` still covers the inflated `D`.
    pub fn nf_domain(&self) -> Domain {
        let h_max = self.h_list[0];
        let margin = (self.l_window + 2.0) * h_max;
        let shrink = 0.9f64.powi(self.r_max as i32);
        Domain::new(
            self.d_domain().base_point,
            self.d_domain()
                .radius
                .iter()
                .map(|r| (r + margin) / shrink)
                .collect(),
        )
    }

    /// Build the model on the given domain.
    pub fn build_model(&self, domain: &Domain) -> Result<TimePolynomialHamiltonian> {
        match &self.model {
            ModelConfig::Pendulum1d { epsilon } => Ok(crate::models::pendulum1d(
                domain,
                *epsilon,
                self.k_theta,
                self.k_action,
                self.t_order,
                self.t,
            )),
            ModelConfig::Example5 { epsilon } => crate::models::example_family_default(
                domain,
                *epsilon,
                self.k_theta,
                self.k_action,
                self.t_order,
                self.t,
            ),
            ModelConfig::CustomFile { path } => {
                let mut r = crate::io::open_file(std::path::Path::new(path))?;
                let tp = crate::io::read_time_poly(&mut r)?;
                if tp.dim() != self.dim {
                    return Err(ScarError::Config(format!(
                        "custom model has dim {}, config says {}",
                        tp.dim(),
                        self.dim
                    )));
                }
                Ok(tp)
            }
        }
    }

    /// Numerical check of the separation-hypothesis ratio
    /// `C₁κ·h^{−1/2} / (Δ⁻¹(C₁h^{−1/2}))²` over the sweep: a warning when
    /// it fails to grow as `h` shrinks.
    pub fn separation_hypothesis_warning(&self) -> Option<String> {
        let delta = self.delta.build().ok()?;
        let ratio = |h: f64| -> Option<f64> {
            let inv = delta.delta_inverse(self.c1 / h.sqrt()).ok()?;
            Some(self.c1 * delta.kappa / h.sqrt() / (inv * inv))
        };
        let hs = &self.h_list;
        if hs.len() < 2 {
            return None;
        }
        let first = ratio(hs[0])?;
        let last = ratio(*hs.last().unwrap())?;
        if last <= first {
            Some(format!(
                "separation hypothesis ratio not increasing over the sweep ({first:.3e} -> {last:.3e}); \
                 the configured delta may be too weak for the h^{{3/2}} separation law"
            ))
        } else {
            None
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| ScarError::Config(format!("json: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat `key = value` format; dotted keys nest (`delta.tau = 4.5`,
    /// `model.name = pendulum1d`). Values parse as JSON when possible and
    /// fall back to strings.
    pub fn from_flat_str(s: &str) -> Result<Self> {
        let mut root = serde_json::Map::new();
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ScarError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parsed: Value =
                serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
            insert_dotted(&mut root, key, parsed);
        }
        let merged = merge_defaults(Value::Object(root))?;
        let cfg: ExperimentConfig = serde_json::from_value(merged)
            .map_err(|e| ScarError::Config(format!("flat config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load by content: JSON when the first non-space byte is `{`.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            Self::from_json_str(&text)
        } else {
            Self::from_flat_str(&text)
        }
    }
}

fn insert_dotted(map: &mut serde_json::Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            map.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let entry = map
                .entry(head.to_string())
                .or_insert_with(|| Value::Object(serde_json::Map::new()));
            if let Value::Object(inner) = entry {
                insert_dotted(inner, rest, value);
            }
        }
    }
}

/// Overlay user values onto the default config (partial flat files work).
fn merge_defaults(user: Value) -> Result<Value> {
    let mut base = serde_json::to_value(ExperimentConfig::default())
        .map_err(|e| ScarError::Config(e.to_string()))?;
    merge_value(&mut base, user);
    Ok(base)
}

fn merge_value(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn gamma_bound_enforced() {
        let mut cfg = ExperimentConfig::default();
        cfg.gamma = 2.0; // ≤ 7/4 + 2
        assert!(matches!(cfg.validate(), Err(ScarError::Config(_))));
    }

    #[test]
    fn h_list_must_decrease() {
        let mut cfg = ExperimentConfig::default();
        cfg.h_list = vec![0.01, 0.02];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::default();
        let s = cfg.canonical_json();
        let back = ExperimentConfig::from_json_str(&s).unwrap();
        assert_eq!(s, back.canonical_json());
    }

    #[test]
    fn flat_format_overrides_defaults() {
        let text = "
            # comment
            t = 0.02
            delta.tau = 5.5
            model.name = pendulum1d
            model.epsilon = 0.001
            h_list = [0.05, 0.025]
        ";
        let cfg = ExperimentConfig::from_flat_str(text).unwrap();
        assert_eq!(cfg.t, 0.02);
        assert_eq!(cfg.delta.tau, 5.5);
        assert_eq!(cfg.h_list, vec![0.05, 0.025]);
        match cfg.model {
            ModelConfig::Pendulum1d { epsilon } => assert_eq!(epsilon, 0.001),
            _ => panic!("wrong model"),
        }
    }

    #[test]
    fn separation_warning_for_weak_delta() {
        let mut cfg = ExperimentConfig::default();
        cfg.delta.tau = 1.5; // ratio shrinks as h decreases
        assert!(cfg.separation_hypothesis_warning().is_some());
        cfg.delta.tau = 4.5;
        assert!(cfg.separation_hypothesis_warning().is_none());
    }
}
