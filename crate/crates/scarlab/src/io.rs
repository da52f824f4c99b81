//! Artifact persistence: JSON-lines series/spectra and CSV tables.
//!
//! Every format is line-oriented JSON with a `kind`-tagged header followed
//! by one record per line. Floats go through serde_json (shortest
//! round-trip representation), so serialize → parse restores values
//! bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Result, ScarError};
use crate::quantize::{EigenBand, SpectralProblem};
use crate::quasimode::QuasimodeSet;
use crate::series::{Domain, FourierTaylorSeries};
use crate::timepoly::TimePolynomialHamiltonian;

fn bad_format(msg: impl Into<String>) -> ScarError {
    ScarError::Config(format!("file format: {}", msg.into()))
}

fn f64_field(v: &Value, key: &str) -> Result<f64> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| bad_format(format!("missing number `{key}`")))
}

fn vec_f64(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .ok_or_else(|| bad_format(format!("missing array `{key}`")))
}

fn vec_i64(v: &Value, key: &str) -> Result<Vec<i64>> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_i64).collect())
        .ok_or_else(|| bad_format(format!("missing array `{key}`")))
}

/// Write one series: header line, then one line per stored term.
pub fn write_series<W: Write>(w: &mut W, s: &FourierTaylorSeries) -> Result<()> {
    let header = json!({
        "kind": "series",
        "dim": s.dim(),
        "base_point": s.domain().base_point,
        "radius": s.domain().radius,
        "k_theta": s.k_theta(),
        "k_action": s.k_action(),
    });
    writeln!(w, "{header}")?;
    for (key, c) in s.terms() {
        let gamma: Vec<i32> = key.gamma.iter().copied().collect();
        let alpha: Vec<u8> = key.alpha.iter().copied().collect();
        writeln!(w, "{}", json!({"gamma": gamma, "alpha": alpha, "re": c.re, "im": c.im}))?;
    }
    Ok(())
}

pub fn read_series<R: BufRead>(r: &mut R) -> Result<FourierTaylorSeries> {
    let mut lines = r.lines();
    let header: Value = serde_json::from_str(
        &lines
            .next()
            .ok_or_else(|| bad_format("empty series file"))??,
    )?;
    let mut s = series_from_header(&header)?;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        push_term(&mut s, &v)?;
    }
    Ok(s)
}

fn series_from_header(header: &Value) -> Result<FourierTaylorSeries> {
    let base = vec_f64(header, "base_point")?;
    let radius = vec_f64(header, "radius")?;
    let k_theta = f64_field(header, "k_theta")? as u32;
    let k_action = f64_field(header, "k_action")? as u32;
    Ok(FourierTaylorSeries::zero(
        Domain::new(base, radius),
        k_theta,
        k_action,
    ))
}

fn push_term(s: &mut FourierTaylorSeries, v: &Value) -> Result<()> {
    let gamma: Vec<i32> = vec_i64(v, "gamma")?.into_iter().map(|x| x as i32).collect();
    let alpha: Vec<u8> = vec_i64(v, "alpha")?.into_iter().map(|x| x as u8).collect();
    let c = Complex64::new(f64_field(v, "re")?, f64_field(v, "im")?);
    // reinsert the exact stored coefficient: terms come in mirrored pairs,
    // so only take the canonical representative and rebuild the pair
    let sign = gamma.iter().find(|g| **g != 0).map(|g| g.signum()).unwrap_or(0);
    if sign < 0 {
        return Ok(()); // mirror of an already-inserted term
    }
    if sign == 0 {
        s.add_term_pair(
            gamma.into_iter().collect(),
            alpha.into_iter().collect(),
            Complex64::new(c.re / 2.0, 0.0),
        );
    } else {
        s.add_term_pair(gamma.into_iter().collect(), alpha.into_iter().collect(), c);
    }
    Ok(())
}

/// Write a `t`-polynomial family: header, then `(power, term)` lines.
pub fn write_time_poly<W: Write>(w: &mut W, tp: &TimePolynomialHamiltonian) -> Result<()> {
    let header = json!({
        "kind": "time_poly",
        "dim": tp.dim(),
        "base_point": tp.domain().base_point,
        "radius": tp.domain().radius,
        "k_theta": tp.k_theta(),
        "k_action": tp.k_action(),
        "t_order": tp.t_order(),
        "t_max": tp.t_max(),
    });
    writeln!(w, "{header}")?;
    for (p, s) in tp.terms() {
        for (key, c) in s.terms() {
            let gamma: Vec<i32> = key.gamma.iter().copied().collect();
            let alpha: Vec<u8> = key.alpha.iter().copied().collect();
            writeln!(
                w,
                "{}",
                json!({"power": p, "gamma": gamma, "alpha": alpha, "re": c.re, "im": c.im})
            )?;
        }
    }
    Ok(())
}

pub fn read_time_poly<R: BufRead>(r: &mut R) -> Result<TimePolynomialHamiltonian> {
    let mut lines = r.lines();
    let header: Value = serde_json::from_str(
        &lines
            .next()
            .ok_or_else(|| bad_format("empty family file"))??,
    )?;
    let base = vec_f64(&header, "base_point")?;
    let radius = vec_f64(&header, "radius")?;
    let k_theta = f64_field(&header, "k_theta")? as u32;
    let k_action = f64_field(&header, "k_action")? as u32;
    let t_order = f64_field(&header, "t_order")? as u32;
    let t_max = f64_field(&header, "t_max")?;
    let domain = Domain::new(base, radius);
    let mut per_power: std::collections::BTreeMap<u32, FourierTaylorSeries> =
        std::collections::BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        let p = f64_field(&v, "power")? as u32;
        let s = per_power
            .entry(p)
            .or_insert_with(|| FourierTaylorSeries::zero(domain.clone(), k_theta, k_action));
        push_term(s, &v)?;
    }
    let mut tp = TimePolynomialHamiltonian::zero(domain, k_theta, k_action, t_order, t_max);
    for (p, s) in per_power {
        tp.add_term(p, s);
    }
    Ok(tp)
}

fn coeffs_json(v: &[Complex64]) -> Value {
    Value::Array(
        v.iter()
            .map(|c| Value::Array(vec![json!(c.re), json!(c.im)]))
            .collect(),
    )
}

fn coeffs_from_json(v: &Value) -> Result<Vec<Complex64>> {
    v.as_array()
        .ok_or_else(|| bad_format("coeffs not an array"))?
        .iter()
        .map(|pair| {
            let p = pair.as_array().ok_or_else(|| bad_format("coeff pair"))?;
            Ok(Complex64::new(
                p[0].as_f64().ok_or_else(|| bad_format("re"))?,
                p[1].as_f64().ok_or_else(|| bad_format("im"))?,
            ))
        })
        .collect()
}

/// Persist an eigen band with its basis (coefficients as re/im pairs).
pub fn write_eigen_band<W: Write>(w: &mut W, sp: &SpectralProblem, band: &EigenBand) -> Result<()> {
    let header = json!({
        "kind": "eigen_band",
        "dim": sp.dim,
        "hbar": sp.hbar,
        "t": sp.t,
        "maslov": sp.maslov,
        "band": [sp.band.0, sp.band.1],
        "residual": band.residual,
        "ortho_defect": band.ortho_defect,
    });
    writeln!(w, "{header}")?;
    for m in &sp.basis {
        writeln!(w, "{}", json!({"kind": "basis", "m": m}))?;
    }
    for (e, v) in band.energies.iter().zip(&band.vectors) {
        writeln!(
            w,
            "{}",
            json!({"kind": "eigenpair", "energy": e, "coeffs": coeffs_json(v)})
        )?;
    }
    Ok(())
}

/// Read back `(basis, energies, vectors)` of an eigen-band file.
pub fn read_eigen_band<R: BufRead>(
    r: &mut R,
) -> Result<(Vec<Vec<i64>>, Vec<f64>, Vec<Vec<Complex64>>)> {
    let mut basis = Vec::new();
    let mut energies = Vec::new();
    let mut vectors = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        if i == 0 {
            continue; // header
        }
        match v.get("kind").and_then(Value::as_str) {
            Some("basis") => basis.push(vec_i64(&v, "m")?),
            Some("eigenpair") => {
                energies.push(f64_field(&v, "energy")?);
                vectors.push(coeffs_from_json(
                    v.get("coeffs").ok_or_else(|| bad_format("coeffs"))?,
                )?);
            }
            _ => return Err(bad_format(format!("unexpected record on line {}", i + 1))),
        }
    }
    Ok((basis, energies, vectors))
}

/// Persist a quasimode family in the same shape as the eigen-band file.
pub fn write_quasimodes<W: Write>(w: &mut W, q: &QuasimodeSet) -> Result<()> {
    let header = json!({
        "kind": "quasimode_set",
        "h": q.h,
        "t": q.t,
        "maslov": q.maslov,
        "orth_defect": q.orth_defect,
    });
    writeln!(w, "{header}")?;
    for i in 0..q.len() {
        writeln!(
            w,
            "{}",
            json!({
                "kind": "quasimode",
                "m": q.indices[i],
                "mu": q.mu[i],
                "residual": q.residuals.get(i).copied().unwrap_or(f64::NAN),
                "coeffs": coeffs_json(q.vectors.get(i).map(|v| v.as_slice()).unwrap_or(&[])),
            })
        )?;
    }
    Ok(())
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open_file(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Hex SHA-256 of a file (manifest entries).
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Hex SHA-256 of a string (config hash).
pub fn sha256_str(s: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(s.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
