//! Command-line driver for the scarlab pipeline.
//!
//! Subcommands: `nonres scan`, `bnf run`, `spectrum`, `quasimodes`,
//! `scar run`, `report`. Exit codes: 0 success, 2 configuration rejected,
//! 3 numeric failure (small divisor / inversion / box margin), 4 invariant
//! violated on real data (a scientific finding, reported before exit).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scarlab::config::{ExperimentConfig, ModelConfig};
use scarlab::error::ScarError;
use scarlab::normal_form::{self, IterationOptions};
use scarlab::series::Var;

#[derive(Parser)]
#[command(name = "scarlab", version, about = "Torus quasimode and scarring diagnostics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file (JSON, or flat `key = value`); defaults apply
    /// when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed override (negative-control draws).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Non-resonance scans of the action box.
    Nonres {
        #[command(subcommand)]
        action: NonresAction,
    },
    /// Normal-form iteration.
    Bnf {
        #[command(subcommand)]
        action: BnfAction,
    },
    /// Quantize the model and solve the band eigenproblem.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        /// Energy band "a,b".
        #[arg(long)]
        band: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Build the quasimode family at one h.
    Quasimodes {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        /// Index-set width multiplier.
        #[arg(long)]
        l: Option<f64>,
    },
    /// Full scarring pipeline.
    Scar {
        #[command(subcommand)]
        action: ScarAction,
    },
    /// Summarize a finished run directory.
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum NonresAction {
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        /// "power" or "exp-power".
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        ktest: Option<u32>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Subcommand)]
enum BnfAction {
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        rmax: Option<usize>,
        #[arg(long, value_name = "ORDER")]
        t_order: Option<u32>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ScarAction {
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Nonres { action } => match action {
            NonresAction::Scan {
                common,
                delta,
                tau,
                a,
                b,
                kappa,
                ktest,
                grid,
                dim,
            } => cmd_nonres_scan(common, delta, tau, a, b, kappa, ktest, grid, dim),
        },
        Command::Bnf { action } => match action {
            BnfAction::Run {
                common,
                model,
                rmax,
                t_order,
                kappa,
                tau,
            } => cmd_bnf_run(common, model, rmax, t_order, kappa, tau),
        },
        Command::Spectrum {
            common,
            h,
            t,
            band,
            model,
        } => cmd_spectrum(common, h, t, band, model),
        Command::Quasimodes { common, h, t, l } => cmd_quasimodes(common, h, t, l),
        Command::Scar { action } => match action {
            ScarAction::Run { common } => cmd_scar_run(common),
        },
        Command::Report { common } => cmd_report(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, ScarError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_model_flag(cfg: &mut ExperimentConfig, model: Option<String>) {
    if let Some(name) = model {
        cfg.model = match name.as_str() {
            "pendulum1d" => ModelConfig::Pendulum1d { epsilon: 2e-4 },
            "example5" => {
                if cfg.dim == 1 {
                    cfg.dim = 2;
                    cfg.maslov = vec![0, 0];
                    cfg.d_box = (vec![0.7, 0.7], vec![1.3, 1.3]);
                    cfg.basis_box = (vec![0.55, 0.55], vec![1.45, 1.45]);
                    cfg.gamma = 6.0;
                    cfg.nonres_grid = 101;
                    cfg.quad_action = 128;
                }
                ModelConfig::Example5 { epsilon: 0.05 }
            }
            path => ModelConfig::CustomFile { path: path.to_string() },
        };
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_nonres_scan(
    common: CommonArgs,
    delta: Option<String>,
    tau: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    kappa: Option<f64>,
    ktest: Option<u32>,
    grid: Option<usize>,
    dim: Option<usize>,
) -> Result<(), ScarError> {
    let mut cfg = load_config(&common)?;
    if let Some(d) = dim {
        if d != cfg.dim {
            // move to a cube around |I| ~ 1 when the dimension changes
            cfg.dim = d;
            cfg.maslov = vec![0; d];
            cfg.d_box = (vec![0.7; d], vec![1.3; d]);
            cfg.basis_box = (vec![0.55; d], vec![1.45; d]);
            cfg.gamma = 2.0 + 2.0 * d as f64;
            if d > 1 {
                cfg.model = ModelConfig::Example5 { epsilon: 0.05 };
            }
        }
    }
    if let Some(kind) = delta {
        cfg.delta.kind = kind.replace('-', "_");
    }
    if let Some(v) = tau {
        cfg.delta.tau = v;
    }
    if let Some(v) = a {
        cfg.delta.a = v;
    }
    if let Some(v) = b {
        cfg.delta.b = v;
    }
    if let Some(v) = kappa {
        cfg.delta.kappa = v;
    }
    if let Some(v) = ktest {
        cfg.k_test = v;
    }
    if let Some(v) = grid {
        cfg.nonres_grid = v;
    }
    cfg.validate()?;
    let delta_fn = cfg.delta.build()?;
    let domain = cfg.d_domain();
    let model = cfg.build_model(&domain)?;
    let d = cfg.dim;
    let grad: Vec<_> = (0..d)
        .map(|j| {
            model
                .term(0)
                .expect("model has an integrable part")
                .partial_derivative(Var::Action(j))
        })
        .collect();
    let omega_map = |i: &[f64]| -> Vec<f64> {
        grad.iter().map(|g| g.eval_unchecked(&vec![0.0; d], i)).collect()
    };
    let scan = scarlab::nonres::resonant_zone_actions(
        omega_map,
        &domain,
        &delta_fn,
        cfg.k_test,
        cfg.nonres_grid,
    );
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("nonres.csv");
    write_scan_csv(&path, &scan)?;
    println!(
        "nonres scan: {} grid points, passing fraction {:.6}, csv at {}",
        scan.len(),
        scan.fraction,
        path.display()
    );
    Ok(())
}

fn write_scan_csv(path: &std::path::Path, e: &scarlab::nonres::NonResonantActions) -> Result<(), ScarError> {
    use std::io::Write;
    let mut w = scarlab::io::create_file(path)?;
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

fn cmd_bnf_run(
    common: CommonArgs,
    model: Option<String>,
    rmax: Option<usize>,
    t_order: Option<u32>,
    kappa: Option<f64>,
    tau: Option<f64>,
) -> Result<(), ScarError> {
    let mut cfg = load_config(&common)?;
    apply_model_flag(&mut cfg, model);
    if let Some(v) = rmax {
        cfg.r_max = v;
    }
    if let Some(v) = t_order {
        cfg.t_order = v;
    }
    if let Some(v) = kappa {
        cfg.delta.kappa = v;
    }
    if let Some(v) = tau {
        cfg.delta.tau = v;
    }
    cfg.validate()?;
    let delta = cfg.delta.build()?;
    let domain = cfg.nf_domain();
    let model_tp = cfg.build_model(&domain)?;
    let opts = IterationOptions {
        inversion_tol: cfg.inversion_tol,
        ..IterationOptions::default()
    };
    let nf = normal_form::run_iteration(&model_tp, cfg.r_max, cfg.k_order, &delta, &opts)?;
    let t_grid: Vec<f64> = (0..8).map(|i| 1e-3 * (10f64).powf(i as f64 / 7.0)).collect();
    std::fs::create_dir_all(&common.out)?;
    {
        let mut w = scarlab::io::create_file(&common.out.join("bnf.jsonl"))?;
        scarlab::io::write_time_poly(&mut w, &nf.k)?;
    }
    use std::io::Write;
    let mut w = scarlab::io::create_file(&common.out.join("orders.csv"))?;
    writeln!(w, "step,leading_power,measured_slope,fit_residual")?;
    for rec in &nf.iterations {
        let fit = normal_form::measure_remainder_order(&rec.f, &t_grid, 12, 5);
        writeln!(
            w,
            "{},{},{},{}",
            rec.step,
            rec.f.leading_power().map(|p| p as i64).unwrap_or(-1),
            fit.slope,
            fit.residual
        )?;
        println!(
            "step {}: remainder leading power {:?}, measured slope {:.4}",
            rec.step,
            rec.f.leading_power(),
            fit.slope
        );
    }
    println!("normal form written to {}", common.out.join("bnf.jsonl").display());
    Ok(())
}

fn parse_band(s: &str) -> Result<(f64, f64), ScarError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(ScarError::Config("band must be \"a,b\"".into()));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| ScarError::Config("band: bad number".into()))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| ScarError::Config("band: bad number".into()))?;
    Ok((a, b))
}

fn cmd_spectrum(
    common: CommonArgs,
    h: Option<f64>,
    t: Option<f64>,
    band: Option<String>,
    model: Option<String>,
) -> Result<(), ScarError> {
    let mut cfg = load_config(&common)?;
    apply_model_flag(&mut cfg, model);
    if let Some(v) = h {
        cfg.h_list = vec![v];
    }
    if let Some(v) = t {
        cfg.t = v;
    }
    if let Some(s) = band {
        cfg.band = parse_band(&s)?;
    }
    cfg.validate()?;
    let domain = cfg.basis_domain();
    let model_tp = cfg.build_model(&domain)?;
    let h = cfg.h_list[0];
    let sp = scarlab::quantize::build_matrix(&model_tp, cfg.t, h, &cfg.maslov, &domain, cfg.band)?;
    let eigs = scarlab::quantize::eigs_in_band(&sp);
    let (predicted, actual) = scarlab::quantize::weyl_count(
        &model_tp,
        &sp,
        &eigs,
        &domain,
        cfg.quad_theta,
        cfg.quad_action,
    );
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("eigenband.jsonl");
    let mut w = scarlab::io::create_file(&path)?;
    scarlab::io::write_eigen_band(&mut w, &sp, &eigs)?;
    println!(
        "spectrum: basis {}, eigenvalues in band {}, weyl predicted {:.2}, written to {}",
        sp.len(),
        actual,
        predicted,
        path.display()
    );
    Ok(())
}

fn cmd_quasimodes(
    common: CommonArgs,
    h: Option<f64>,
    t: Option<f64>,
    l: Option<f64>,
) -> Result<(), ScarError> {
    let mut cfg = load_config(&common)?;
    if let Some(v) = h {
        cfg.h_list = vec![v];
    }
    if let Some(v) = t {
        cfg.t = v;
    }
    if let Some(v) = l {
        cfg.l_window = v;
    }
    cfg.validate()?;
    let delta = cfg.delta.build()?;
    let nf_domain = cfg.nf_domain();
    let model_nf = cfg.build_model(&nf_domain)?;
    let opts = IterationOptions {
        inversion_tol: cfg.inversion_tol,
        ..IterationOptions::default()
    };
    let nf = normal_form::run_iteration(&model_nf, cfg.r_max, cfg.k_order, &delta, &opts)?;
    let generator = normal_form::accumulated_generator(&nf, cfg.r_max);
    let d = cfg.dim;
    let grad_k: Vec<_> = (0..d)
        .map(|j| nf.k.partial_derivative(Var::Action(j)).series_at(cfg.t))
        .collect();
    let omega_map = |i: &[f64]| -> Vec<f64> {
        grad_k.iter().map(|g| g.eval_unchecked(&vec![0.0; d], i)).collect()
    };
    let e_set = scarlab::nonres::resonant_zone_actions(
        omega_map,
        &cfg.d_domain(),
        &delta,
        cfg.k_test,
        cfg.nonres_grid,
    );
    let basis_domain = cfg.basis_domain();
    let model_sp = cfg.build_model(&basis_domain)?;
    let h = cfg.h_list[0];
    let sp =
        scarlab::quantize::build_matrix(&model_sp, cfg.t, h, &cfg.maslov, &basis_domain, cfg.band)?;
    let indices = scarlab::quasimode::index_set(&e_set, h, cfg.l_window, &cfg.maslov);
    let q = scarlab::quasimode::build_quasimode_set(
        &nf.k,
        &generator,
        &sp,
        indices,
        cfg.phase_bound,
        cfg.n_quad,
    )?;
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join("quasimodes.jsonl");
    let mut w = scarlab::io::create_file(&path)?;
    scarlab::io::write_quasimodes(&mut w, &q)?;
    let max_res = q.residuals.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "quasimodes: {} modes, max residual {:.3e}, orth defect {:.3e}, written to {}",
        q.len(),
        max_res,
        q.orth_defect,
        path.display()
    );
    Ok(())
}

fn cmd_scar_run(common: CommonArgs) -> Result<(), ScarError> {
    let cfg = load_config(&common)?;
    if let Some(w) = cfg.separation_hypothesis_warning() {
        eprintln!("warning: {w}");
    }
    let summary = scarlab::pipeline::run_pipeline(&cfg, &common.out)?;
    print_summary(&summary);
    Ok(())
}

fn cmd_report(common: CommonArgs) -> Result<(), ScarError> {
    let text = std::fs::read_to_string(common.out.join("summary.json"))
        .map_err(|_| ScarError::Config(format!("no summary.json in {}", common.out.display())))?;
    let summary: scarlab::pipeline::RunSummary = serde_json::from_str(&text)?;
    print_summary(&summary);
    if let Ok(m) = std::fs::read_to_string(common.out.join("manifest.json")) {
        let v: serde_json::Value = serde_json::from_str(&m)?;
        let complete = v.get("complete").and_then(|c| c.as_bool()).unwrap_or(false);
        println!(
            "manifest: {} files, complete = {complete}",
            v.get("files").and_then(|f| f.as_array()).map(|a| a.len()).unwrap_or(0)
        );
    }
    Ok(())
}

fn print_summary(s: &scarlab::pipeline::RunSummary) {
    println!("config {}", &s.config_hash[..16]);
    println!(
        "non-resonant fraction {:.4}, E volume {:.4}, band volume {:.4}, C2 = {:.4e}",
        s.e_kappa_fraction, s.e_kappa_volume, s.band_volume, s.c2
    );
    let slopes: Vec<String> = s.remainder_slopes.iter().map(|x| format!("{x:.3}")).collect();
    println!("remainder slopes: [{}]", slopes.join(", "));
    if let Some(rs) = s.residual_slope {
        println!("quasimode residual h-slope: {rs:.3}");
    }
    println!(
        "{:>10} {:>7} {:>7} {:>9} {:>8} {:>12} {:>12} {:>10}",
        "h", "basis", "eigs", "windows", "good", "min_overlap", "median_res", "sep_min"
    );
    for r in &s.h_runs {
        println!(
            "{:>10.6} {:>7} {:>7} {:>9} {:>8.4} {:>12} {:>12.3e} {:>10.3e}",
            r.h,
            r.n_basis,
            r.n_eigs,
            r.n_windows,
            r.good_fraction,
            r.min_overlap_good
                .map(|x| format!("{x:.6}"))
                .unwrap_or_else(|| "-".into()),
            r.median_residual,
            r.separation_min,
        );
    }
    for w in &s.warnings {
        println!("warning: {w}");
    }
    for f in &s.findings {
        println!("finding: {f}");
    }
}
