//! Full experiment orchestration: normal form → non-resonant sample →
//! spectra → quasimodes → windows/overlaps/masses, one pass per `h`,
//! with every artifact written deterministically (ordered iteration,
//! shortest-round-trip floats, no timestamps).
//!
//! Invariant failures on real data (overlapping windows, a λ-good window
//! under the overlap bound, a good-fraction shortfall) are findings: all
//! artifacts and the summary are still written, and the run returns the
//! violation so the CLI can exit with the dedicated code.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{Result, ScarError};
use crate::homological::Frequency;
use crate::io;
use crate::normal_form::{self, IterationOptions, NormalFormResult};
use crate::quantize;
use crate::quasimode;
use crate::scar;
use crate::series::Var;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HRunSummary {
    pub h: f64,
    pub n_basis: usize,
    pub n_eigs: usize,
    pub weyl_predicted: f64,
    pub n_windows: usize,
    pub good_fraction: f64,
    pub min_overlap_good: Option<f64>,
    pub min_mass_good: Option<f64>,
    pub max_residual: f64,
    pub median_residual: f64,
    pub orth_defect: f64,
    pub separation_min: f64,
    pub separation_threshold: f64,
    pub separation_violations: usize,
    pub eigen_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub version: String,
    pub e_kappa_fraction: f64,
    pub e_kappa_volume: f64,
    pub band_volume: f64,
    pub occupancy_ratio: f64,
    pub c2: f64,
    pub remainder_slopes: Vec<f64>,
    pub residual_slope: Option<f64>,
    pub h_runs: Vec<HRunSummary>,
    pub warnings: Vec<String>,
    pub findings: Vec<String>,
    pub artifacts: Vec<String>,
}

fn csv_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Run the full pipeline into `outdir`. Returns the summary; invariant
/// findings are returned as `Err(InvariantViolation)` *after* all
/// artifacts, including the summary and manifest, are on disk.
pub fn run_pipeline(cfg: &ExperimentConfig, outdir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir)?;
    let config_text = cfg.canonical_json();
    let config_hash = io::sha256_str(&config_text);
    std::fs::write(outdir.join("config.json"), &config_text)?;

    let mut warnings = Vec::new();
    let mut findings = Vec::new();
    if let Some(w) = cfg.separation_hypothesis_warning() {
        warnings.push(w);
    }

    let delta = cfg.delta.build()?;
    let d = cfg.dim;

    // Normal form on the inflated working box.
    let nf_domain = cfg.nf_domain();
    let model_nf = cfg.build_model(&nf_domain)?;
    let opts = IterationOptions {
        inversion_tol: cfg.inversion_tol,
        ..IterationOptions::default()
    };
    let nf = normal_form::run_iteration(&model_nf, cfg.r_max, cfg.k_order, &delta, &opts)?;
    let generator = normal_form::accumulated_generator(&nf, cfg.r_max);

    // Remainder orders over a fixed decade.
    let t_grid: Vec<f64> = (0..8)
        .map(|i| 1e-3 * (10f64).powf(i as f64 / 7.0))
        .collect();
    let remainder_slopes: Vec<f64> = nf
        .iterations
        .iter()
        .map(|rec| normal_form::measure_remainder_order(&rec.f, &t_grid, 12, 5).slope)
        .collect();
    write_orders_csv(&csv_path(outdir, "orders.csv"), &nf, &remainder_slopes)?;
    {
        let mut w = io::create_file(&outdir.join("bnf.jsonl"))?;
        io::write_time_poly(&mut w, &nf.k)?;
    }

    // Non-resonant action sample: frequency map ∇K(·;t).
    let grad_k: Vec<crate::series::FourierTaylorSeries> = (0..d)
        .map(|j| nf.k.partial_derivative(Var::Action(j)).series_at(cfg.t))
        .collect();
    let omega_map = |i: &[f64]| -> Vec<f64> {
        grad_k.iter().map(|g| g.eval_unchecked(&vec![0.0; d], i)).collect()
    };
    let d_domain = cfg.d_domain();
    let e_set = crate::nonres::resonant_zone_actions(
        omega_map,
        &d_domain,
        &delta,
        cfg.k_test,
        cfg.nonres_grid,
    );
    write_nonres_csv(&csv_path(outdir, "nonres.csv"), &e_set)?;
    let d_box_vol: f64 = d_domain.radius.iter().map(|r| 2.0 * r).product();
    let torus_vol = (2.0 * std::f64::consts::PI).powi(d as i32);
    let e_kappa_volume = e_set.fraction * d_box_vol * torus_vol;

    // Spectral model on the basis box; shared volume quadrature.
    let basis_domain = cfg.basis_domain();
    let model_sp = cfg.build_model(&basis_domain)?;
    let band_volume = quantize::phase_space_band_volume(
        &model_sp,
        cfg.t,
        cfg.band,
        &basis_domain,
        cfg.quad_theta,
        cfg.quad_action,
    );
    if e_kappa_volume <= 0.0 {
        findings.push("non-resonant sample is empty (kappa too large)".into());
    }
    let occupancy_ratio = if e_kappa_volume > 0.0 {
        band_volume / e_kappa_volume
    } else {
        f64::INFINITY
    };
    let overlap_bound = if band_volume > 0.0 {
        (e_kappa_volume / band_volume) / (2.0 * cfg.lambda)
    } else {
        0.0
    };

    let mut c2 = cfg.c2.unwrap_or(0.0);
    let mut h_runs: Vec<HRunSummary> = Vec::new();

    for (hi, &h) in cfg.h_list.iter().enumerate() {
        let sp = quantize::build_matrix(&model_sp, cfg.t, h, &cfg.maslov, &basis_domain, cfg.band)?;
        let eigs = quantize::eigs_in_band(&sp);
        let (weyl_predicted, _) = quantize::weyl_count(
            &model_sp,
            &sp,
            &eigs,
            &basis_domain,
            cfg.quad_theta,
            cfg.quad_action,
        );

        let indices = quasimode::index_set(&e_set, h, cfg.l_window, &cfg.maslov);
        let q = quasimode::build_quasimode_set(
            &nf.k,
            &generator,
            &sp,
            indices,
            cfg.phase_bound,
            cfg.n_quad,
        )?;

        // Separation: calibrate C₂ at the coarsest h when not configured.
        if hi == 0 && cfg.c2.is_none() {
            let calib = scar::separation_scan(&q, &nf.k, &delta, cfg.c1, None, &d_domain)?;
            if calib.min_separation.is_finite() {
                c2 = 0.5 * calib.min_separation / h.powf(1.5);
            }
        }
        let sep = scar::separation_scan(&q, &nf.k, &delta, cfg.c1, Some(c2), &d_domain)?;
        if !sep.violations.is_empty() {
            findings.push(format!(
                "separation: {} violations at h = {h}",
                sep.violations.len()
            ));
        }
        write_separation_csv(&csv_path(outdir, &format!("separation_{hi}.csv")), &sep)?;

        let mut reports = match scar::window_statistics(&eigs, &q, cfg.gamma, cfg.lambda, occupancy_ratio, cfg.band)
        {
            Ok(r) => r,
            Err(e @ ScarError::WindowsOverlap { .. }) => {
                findings.push(format!("h = {h}: {e}"));
                // window machinery cannot proceed for this h
                write_artifacts_for_h(outdir, hi, &sp, &eigs, &q)?;
                h_runs.push(HRunSummary {
                    h,
                    n_basis: sp.len(),
                    n_eigs: eigs.len(),
                    weyl_predicted,
                    n_windows: 0,
                    good_fraction: 0.0,
                    min_overlap_good: None,
                    min_mass_good: None,
                    max_residual: q.residuals.iter().cloned().fold(0.0, f64::max),
                    median_residual: median(&q.residuals),
                    orth_defect: q.orth_defect,
                    separation_min: sep.min_separation,
                    separation_threshold: sep.threshold,
                    separation_violations: sep.violations.len(),
                    eigen_residual: eigs.residual,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        scar::overlap_scan(&mut reports, &eigs, &q);
        scar::mass_scan(&mut reports, &eigs, &sp, cfg.mass_delta_h * h);

        let good_fraction = scar::good_fraction(&reports);
        if good_fraction < 1.0 - 2.0 / cfg.lambda {
            findings.push(format!(
                "h = {h}: lambda-good fraction {good_fraction:.4} below 1 - 2/lambda"
            ));
        }
        let mut min_overlap_good: Option<f64> = None;
        let mut min_mass_good: Option<f64> = None;
        for r in reports.iter().filter(|r| r.lambda_good) {
            match r.best_overlap {
                Some(ov) => {
                    min_overlap_good = Some(min_overlap_good.map_or(ov, |m: f64| m.min(ov)));
                    if ov <= overlap_bound {
                        findings.push(format!(
                            "h = {h}: overlap {ov:.4e} at m = {:?} under the bound {overlap_bound:.4e}",
                            r.m
                        ));
                    }
                    if let Some(mass) = r.torus_mass {
                        min_mass_good = Some(min_mass_good.map_or(mass, |m: f64| m.min(mass)));
                        if mass < ov * ov - 0.05 {
                            findings.push(format!(
                                "h = {h}: torus mass {mass:.4} below overlap² − 0.05 at m = {:?}",
                                r.m
                            ));
                        }
                    }
                }
                None => findings.push(format!(
                    "h = {h}: lambda-good window at m = {:?} contains no eigenvalue",
                    r.m
                )),
            }
        }

        write_windows_csv(&csv_path(outdir, &format!("windows_{hi}.csv")), &reports)?;
        write_artifacts_for_h(outdir, hi, &sp, &eigs, &q)?;

        h_runs.push(HRunSummary {
            h,
            n_basis: sp.len(),
            n_eigs: eigs.len(),
            weyl_predicted,
            n_windows: reports.len(),
            good_fraction,
            min_overlap_good,
            min_mass_good,
            max_residual: q.residuals.iter().cloned().fold(0.0, f64::max),
            median_residual: median(&q.residuals),
            orth_defect: q.orth_defect,
            separation_min: sep.min_separation,
            separation_threshold: sep.threshold,
            separation_violations: sep.violations.len(),
            eigen_residual: eigs.residual,
        });
    }

    // h-sweep slope of the median quasimode residual.
    let residual_slope = if h_runs.len() >= 2 && h_runs.iter().all(|r| r.median_residual > 0.0) {
        let xs: Vec<f64> = h_runs.iter().map(|r| r.h.ln()).collect();
        let ys: Vec<f64> = h_runs.iter().map(|r| r.median_residual.ln()).collect();
        Some(normal_form::log_log_fit(&xs, &ys).slope)
    } else {
        None
    };
    write_hsweep_csv(&csv_path(outdir, "hsweep.csv"), &h_runs)?;

    let mut summary = RunSummary {
        config_hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        e_kappa_fraction: e_set.fraction,
        e_kappa_volume,
        band_volume,
        occupancy_ratio,
        c2,
        remainder_slopes,
        residual_slope,
        h_runs,
        warnings,
        findings: findings.clone(),
        artifacts: Vec::new(),
    };

    // Manifest: every artifact with a content hash.
    let mut names: Vec<String> = std::fs::read_dir(outdir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json" && n != "summary.json")
        .collect();
    names.sort();
    summary.artifacts = names.clone();
    std::fs::write(
        outdir.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(ScarError::from)?,
    )?;
    let mut entries = Vec::new();
    let mut all_names = names;
    all_names.push("summary.json".to_string());
    for name in &all_names {
        entries.push(json!({"file": name, "sha256": io::sha256_file(&outdir.join(name))?}));
    }
    let manifest = json!({
        "config_sha256": summary.config_hash,
        "version": summary.version,
        "seed": cfg.seed,
        "files": entries,
        "complete": findings.is_empty(),
    });
    std::fs::write(
        outdir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(ScarError::from)?,
    )?;

    if findings.is_empty() {
        Ok(summary)
    } else {
        Err(ScarError::InvariantViolation(findings.join("; ")))
    }
}

/// Like [`run_pipeline`] but returns the summary even when findings were
/// recorded (test and report access).
pub fn run_pipeline_lenient(cfg: &ExperimentConfig, outdir: &Path) -> Result<RunSummary> {
    match run_pipeline(cfg, outdir) {
        Ok(s) => Ok(s),
        Err(ScarError::InvariantViolation(_)) => {
            let text = std::fs::read_to_string(outdir.join("summary.json"))?;
            let s: serde_json::Value = serde_json::from_str(&text)?;
            serde_json::from_value(s).map_err(ScarError::from)
        }
        Err(e) => Err(e),
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn write_nonres_csv(path: &Path, e: &crate::nonres::NonResonantActions) -> Result<()> {
    let mut w = io::create_file(path)?;
    let d = e.dim();
    let coords: Vec<String> = (0..d).map(|j| format!("i{j}")).collect();
    writeln!(w, "index,{},pass,margin,worst_mode", coords.join(","))?;
    for flat in 0..e.len() {
        let p = e.point(flat);
        let pv: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
        let wm: Vec<String> = e.worst_modes[flat].iter().map(|x| format!("{x}")).collect();
        writeln!(
            w,
            "{flat},{},{},{},{}",
            pv.join(","),
            u8::from(e.pass[flat]),
            e.margins[flat],
            wm.join(" ")
        )?;
    }
    Ok(())
}

fn write_orders_csv(path: &Path, nf: &NormalFormResult, slopes: &[f64]) -> Result<()> {
    let mut w = io::create_file(path)?;
    writeln!(
        w,
        "step,block_lo,block_hi,leading_power,measured_slope,inversion_residual,solved_block_residue,min_divisor"
    )?;
    for (rec, slope) in nf.iterations.iter().zip(slopes) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            rec.step,
            rec.diagnostics.block_lo,
            rec.diagnostics.block_hi,
            rec.f.leading_power().map(|p| p as i64).unwrap_or(-1),
            slope,
            rec.diagnostics.inversion_residual,
            rec.diagnostics.solved_block_residue,
            rec.diagnostics.min_divisor,
        )?;
    }
    Ok(())
}

fn write_separation_csv(path: &Path, sep: &scar::SeparationReport) -> Result<()> {
    let mut w = io::create_file(path)?;
    writeln!(
        w,
        "# pairs_checked={} min_separation={} threshold={} pair_radius={}",
        sep.pairs_checked, sep.min_separation, sep.threshold, sep.pair_radius
    )?;
    writeln!(w, "m,m_prime,gap,threshold")?;
    for v in &sep.violations {
        let m: Vec<String> = v.m.iter().map(|x| x.to_string()).collect();
        let mp: Vec<String> = v.m_prime.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{},{},{}", m.join(" "), mp.join(" "), v.gap, v.threshold)?;
    }
    Ok(())
}

fn write_windows_csv(path: &Path, reports: &[scar::WindowReport]) -> Result<()> {
    let mut w = io::create_file(path)?;
    writeln!(w, "m,mu,half_width,count,lambda_good,best_overlap,torus_mass")?;
    for r in reports {
        let m: Vec<String> = r.m.iter().map(|x| x.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            m.join(" "),
            r.mu,
            r.half_width,
            r.count,
            u8::from(r.lambda_good),
            r.best_overlap.map(|x| x.to_string()).unwrap_or_default(),
            r.torus_mass.map(|x| x.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

fn write_hsweep_csv(path: &Path, runs: &[HRunSummary]) -> Result<()> {
    let mut w = io::create_file(path)?;
    writeln!(
        w,
        "h,n_basis,n_eigs,weyl_predicted,n_windows,good_fraction,median_residual,max_residual,orth_defect,separation_min,separation_threshold,violations"
    )?;
    for r in runs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.h,
            r.n_basis,
            r.n_eigs,
            r.weyl_predicted,
            r.n_windows,
            r.good_fraction,
            r.median_residual,
            r.max_residual,
            r.orth_defect,
            r.separation_min,
            r.separation_threshold,
            r.separation_violations,
        )?;
    }
    Ok(())
}

fn write_artifacts_for_h(
    outdir: &Path,
    hi: usize,
    sp: &quantize::SpectralProblem,
    eigs: &quantize::EigenBand,
    q: &quasimode::QuasimodeSet,
) -> Result<()> {
    let mut w = io::create_file(&outdir.join(format!("eigenband_{hi}.jsonl")))?;
    io::write_eigen_band(&mut w, sp, eigs)?;
    let mut w = io::create_file(&outdir.join(format!("quasimodes_{hi}.jsonl")))?;
    io::write_quasimodes(&mut w, q)?;
    Ok(())
}

/// Frequency view of the normal form's integrable part (reporting).
pub fn k_frequency(nf: &NormalFormResult, t: f64) -> Frequency {
    let d = nf.k.dim();
    Frequency::ActionMap(
        (0..d)
            .map(|j| nf.k.partial_derivative(Var::Action(j)).series_at(t))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.h_list = vec![1.0 / 40.0];
        cfg.nonres_grid = 101;
        cfg.quad_action = 512;
        cfg.t_order = 6;
        cfg
    }

    #[test]
    fn smoke_run_writes_artifacts() {
        let dir = std::env::temp_dir().join("scarlab_pipe_smoke");
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = tiny_config();
        let summary = run_pipeline(&cfg, &dir).unwrap();
        assert!(summary.findings.is_empty());
        for name in [
            "config.json",
            "nonres.csv",
            "orders.csv",
            "bnf.jsonl",
            "separation_0.csv",
            "windows_0.csv",
            "eigenband_0.jsonl",
            "quasimodes_0.jsonl",
            "hsweep.csv",
            "summary.json",
            "manifest.json",
        ] {
            assert!(dir.join(name).is_file(), "missing artifact {name}");
        }
        assert!(summary.h_runs[0].good_fraction >= 0.5);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn integrable_run_all_overlaps_one() {
        // t = 0: quasimodes coincide with eigenvectors.
        let dir = std::env::temp_dir().join("scarlab_pipe_t0");
        let _ = std::fs::remove_dir_all(&dir);
        let mut cfg = tiny_config();
        cfg.t = 0.0;
        let summary = run_pipeline(&cfg, &dir).unwrap();
        let run = &summary.h_runs[0];
        assert!(run.separation_violations == 0);
        assert!(run.min_overlap_good.unwrap() > 1.0 - 1e-10);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn byte_identical_reruns() {
        let dir1 = std::env::temp_dir().join("scarlab_pipe_det1");
        let dir2 = std::env::temp_dir().join("scarlab_pipe_det2");
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
        let cfg = tiny_config();
        run_pipeline(&cfg, &dir1).unwrap();
        run_pipeline(&cfg, &dir2).unwrap();
        for entry in std::fs::read_dir(&dir1).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir1.join(&name)).unwrap();
            let b = std::fs::read(dir2.join(&name)).unwrap();
            assert_eq!(a, b, "artifact {name:?} differs between reruns");
        }
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }
}
