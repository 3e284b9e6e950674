//! Command-line front end. Exit codes: 0 success, 1 scientific verdict
//! failure, 2 usage error. Identical (config, seed) reruns produce
//! byte-identical CSV.

use crate::annealed::{solve_annealed, CorrLengthRequest, PinningParams};
use crate::config::{law_to_string, ConfigError, RunConfig};
use crate::dp::{self, brute_force, quenched_mc, DisorderMode, DisorderRealization};
use crate::experiments::{
    c32_scale, critical_bracket, curve_compare, quadratic_bound_check, transient_map_check,
    BoundConfig, BracketConfig, C32Config, CurveConfig, SizeRule, TransientConfig,
};
use crate::law::{ExcursionLaw, LawKind};
use crate::output::{fmt_f64, write_csv, write_json, write_manifest};
use crate::paths::overlap_survival_check;
use crate::rng::{SplitMix64, Xoshiro256pp};
use crate::sv::SlowlyVarying;
use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "pinlab", version, about = "Pinning on heavy-tailed renewals: exact DP, annealed duality, disorder experiments")]
pub struct Cli {
    /// Flat key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// e.g. "heavy(c=1.5, phi=const(1.0), p_inf=0.0)", "geometric(0.5)", "deterministic(1)"
    #[arg(long, global = true)]
    law: Option<String>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    u: Option<f64>,
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    #[arg(long = "n-grid", global = true, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: machine parallelism; PINLAB_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long = "delta-grid", global = true, value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    #[arg(long = "beta-grid", global = true, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long = "theta-frac", global = true)]
    theta_frac: Option<f64>,
    #[arg(long = "a-const", global = true)]
    a_const: Option<f64>,
    #[arg(long = "m-cap", global = true)]
    m_cap: Option<u64>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<u64>,
    #[arg(long = "n-pairs", global = true)]
    n_pairs: Option<usize>,
    #[arg(long = "n-table", global = true)]
    n_table: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Exact annealed thermodynamics over a Δ grid.
    Annealed,
    /// Quenched Monte Carlo at one (β, Δ): per-replica DP.
    Quenched,
    /// Quenched vs annealed free-energy/contact curves.
    Curve,
    /// Quadratic bound βf^q ≤ Δ²/2 below the crossover Δ₂ (c > 3/2).
    Bound,
    /// Bracket the operational critical Δ by contact-fraction crossing.
    Bracket,
    /// Two-replica overlap survival decay across an N grid.
    Overlap,
    /// Transient ↔ recurrentized free-energy mapping with shared disorder.
    Transient,
    /// Crossover scale Δ̂₀(β) at c = 3/2.
    C32scale,
    /// Brute-force oracle suite and core invariants.
    Selfcheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Annealed => "annealed",
            Command::Quenched => "quenched",
            Command::Curve => "curve",
            Command::Bound => "bound",
            Command::Bracket => "bracket",
            Command::Overlap => "overlap",
            Command::Transient => "transient",
            Command::C32scale => "c32scale",
            Command::Selfcheck => "selfcheck",
        }
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn merge_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        cfg.apply_file(&text)?;
    }
    if cli.delta.is_some() && cli.u.is_some() {
        return Err(ConfigError::DeltaAndU);
    }
    if let Some(s) = &cli.law {
        cfg.set("law", s)?;
    }
    if let Some(v) = cli.beta {
        cfg.beta = Some(v);
    }
    if let Some(v) = cli.delta {
        cfg.delta = Some(v);
        cfg.u = None;
    }
    if let Some(v) = cli.u {
        cfg.u = Some(v);
        cfg.delta = None;
    }
    if let Some(v) = cli.n {
        cfg.n = Some(v);
    }
    if let Some(v) = &cli.n_grid {
        cfg.n_grid = v.clone();
    }
    if let Some(v) = cli.replicas {
        cfg.n_replicas = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.out_dir {
        cfg.out_dir = Some(v.clone());
    }
    if let Some(v) = cli.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = &cli.delta_grid {
        cfg.delta_grid = v.clone();
    }
    if let Some(v) = &cli.beta_grid {
        cfg.beta_grid = v.clone();
    }
    if let Some(v) = cli.theta_frac {
        cfg.theta_frac = v;
    }
    if let Some(v) = cli.a_const {
        cfg.a_const = v;
    }
    if let Some(v) = cli.m_cap {
        cfg.m_cap = v;
    }
    if let Some(v) = cli.k_max {
        cfg.k_max = v;
    }
    if let Some(v) = cli.n_pairs {
        cfg.n_pairs = v;
    }
    if let Some(v) = cli.n_table {
        cfg.n_table = v;
    }
    Ok(cfg)
}

fn init_threads(cfg: &RunConfig) {
    let threads = cfg.threads.or_else(|| {
        std::env::var("PINLAB_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn build_law(cfg: &RunConfig) -> Result<ExcursionLaw, String> {
    let kind = cfg.require_law().map_err(|e| e.to_string())?.clone();
    ExcursionLaw::build(kind, cfg.n_table).map_err(|e| e.to_string())
}

fn require_out_dir(cfg: &RunConfig) -> Result<PathBuf, String> {
    cfg.out_dir
        .clone()
        .ok_or_else(|| "missing required field `out_dir`".to_string())
}

fn execute(cli: Cli) -> Result<i32, String> {
    let cfg = merge_config(&cli).map_err(|e| e.to_string())?;
    init_threads(&cfg);
    let start = Instant::now();
    let cmd = cli.command;
    if cmd == Command::Selfcheck {
        return Ok(run_selfcheck());
    }
    // Validate everything before touching the output directory.
    let prepared = prepare(cmd, &cfg)?;
    let out_dir = require_out_dir(&cfg)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
    let (code, warnings) = prepared.write(&out_dir)?;
    write_manifest(
        &out_dir,
        cmd.name(),
        &cfg.canonical_string(cmd.name()),
        cfg.seed,
        start.elapsed().as_millis(),
        &warnings,
    )
    .map_err(|e| e.to_string())?;
    Ok(code)
}

/// A fully computed experiment, ready to serialize.
enum Prepared {
    Annealed {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
        warnings: Vec<String>,
    },
    Quenched {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
    },
    Curve {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
        warnings: Vec<String>,
    },
    Bound {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
    },
    Bracket {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        warnings: Vec<String>,
    },
    Overlap {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
    },
    Transient {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
    },
    C32 {
        rows: Vec<Vec<String>>,
        summary: serde_json::Value,
        ok: bool,
    },
}

impl Prepared {
    fn write(self, dir: &Path) -> Result<(i32, Vec<String>), String> {
        let w = |name: &str, header: &[&str], rows: &[Vec<String>], summary: &serde_json::Value| {
            write_csv(&dir.join(format!("{name}.csv")), header, rows)
                .and_then(|_| write_json(&dir.join(format!("{name}.summary.json")), summary))
                .map_err(|e| e.to_string())
        };
        match self {
            Prepared::Annealed { rows, summary, ok, warnings } => {
                w(
                    "annealed",
                    &["beta", "delta", "beta_delta", "alpha0", "delta_star", "M", "residual_lhs", "residual_var"],
                    &rows,
                    &summary,
                )?;
                Ok((if ok { 0 } else { 1 }, warnings))
            }
            Prepared::Quenched { rows, summary } => {
                w(
                    "quenched",
                    &["replica", "seed_child", "N", "log_Z", "fN", "mean_LN", "contact"],
                    &rows,
                    &summary,
                )?;
                Ok((0, Vec::new()))
            }
            Prepared::Curve { rows, summary, ok, warnings } => {
                w(
                    "curve",
                    &[
                        "beta", "delta", "beta_delta", "N", "M", "annealed_f", "annealed_c",
                        "annealed_f_N", "annealed_c_N", "quenched_f_mean", "quenched_f_se",
                        "quenched_c_mean", "quenched_c_se", "jensen_ok",
                    ],
                    &rows,
                    &summary,
                )?;
                Ok((if ok { 0 } else { 1 }, warnings))
            }
            Prepared::Bound { rows, summary, ok } => {
                w(
                    "bound",
                    &[
                        "beta", "delta", "N", "quenched_f_mean", "quenched_f_se", "quenched_c_mean",
                        "quenched_c_se", "f_bound", "c_bound", "slack_f", "slack_c", "f_ok", "c_ok",
                    ],
                    &rows,
                    &summary,
                )?;
                Ok((if ok { 0 } else { 1 }, Vec::new()))
            }
            Prepared::Bracket { rows, summary, warnings } => {
                w(
                    "bracket",
                    &[
                        "delta", "N", "quenched_contact_mean", "quenched_contact_se",
                        "annealed_contact_N", "quenched_extrap", "annealed_extrap", "theta", "below",
                    ],
                    &rows,
                    &summary,
                )?;
                Ok((0, warnings))
            }
            Prepared::Overlap { rows, summary, ok } => {
                w("overlap", &["N", "k", "survival", "n_pairs"], &rows, &summary)?;
                Ok((if ok { 0 } else { 1 }, Vec::new()))
            }
            Prepared::Transient { rows, summary, ok } => {
                w("transient", &["replica", "N", "discrepancy"], &rows, &summary)?;
                Ok((if ok { 0 } else { 1 }, Vec::new()))
            }
            Prepared::C32 { rows, summary, ok } => {
                w("c32scale", &["beta", "inv_beta_sq", "m", "delta0_hat"], &rows, &summary)?;
                Ok((if ok { 0 } else { 1 }, Vec::new()))
            }
        }
    }
}

fn delta_grid_or_single(cfg: &RunConfig) -> Result<Vec<f64>, String> {
    if !cfg.delta_grid.is_empty() {
        return Ok(cfg.delta_grid.clone());
    }
    let (delta, _) = cfg.resolve_potential().map_err(|e| e.to_string())?;
    Ok(vec![delta])
}

fn prepare(cmd: Command, cfg: &RunConfig) -> Result<Prepared, String> {
    match cmd {
        Command::Selfcheck => unreachable!("handled earlier"),
        Command::Annealed => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let law0 = build_law(cfg)?;
            let mut warnings = Vec::new();
            let (law, was_transient) = law0.recurrentize().map_err(|e| e.to_string())?;
            if was_transient {
                warnings.push(format!(
                    "law recurrentized for the annealed solve; u_c^d(beta) = {}",
                    fmt_f64(law0.deterministic_critical_u(beta))
                ));
            }
            let grid = delta_grid_or_single(cfg)?;
            let mut rows = Vec::new();
            let mut ok = true;
            let mut max_li: f64 = 0.0;
            let mut max_lv: f64 = 0.0;
            for &delta in &grid {
                let sol = solve_annealed(
                    &law,
                    PinningParams::from_delta(beta, delta),
                    CorrLengthRequest::UpTo(cfg.m_cap),
                )
                .map_err(|e| e.to_string())?;
                if sol.alpha0 > 0.0 {
                    ok &= sol.residual_identity.abs() <= 1e-10 && sol.residual_variational.abs() <= 1e-8;
                    max_li = max_li.max(sol.residual_identity.abs());
                    max_lv = max_lv.max(sol.residual_variational.abs());
                }
                rows.push(vec![
                    fmt_f64(beta),
                    fmt_f64(delta),
                    fmt_f64(beta * delta),
                    fmt_f64(sol.alpha0),
                    fmt_f64(sol.delta_star),
                    sol.corr_length.as_csv_field(),
                    fmt_f64(sol.residual_identity),
                    fmt_f64(sol.residual_variational),
                ]);
            }
            let summary = json!({
                "law": law_to_string(law.kind()),
                "beta": beta,
                "points": grid.len(),
                "max_residual_identity": max_li,
                "max_residual_variational": max_lv,
                "identities_ok": ok,
            });
            Ok(Prepared::Annealed { rows, summary, ok, warnings })
        }
        Command::Quenched => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let (delta, u) = cfg.resolve_potential().map_err(|e| e.to_string())?;
            let n = cfg.require_n().map_err(|e| e.to_string())?;
            let law = build_law(cfg)?;
            let params = PinningParams::from_u(beta, u);
            let ens = quenched_mc(&law, params, n, cfg.n_replicas, cfg.seed, DisorderMode::Gaussian);
            let rows = ens
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.replica.to_string(),
                        r.seed_child.to_string(),
                        r.n.to_string(),
                        fmt_f64(r.log_z),
                        fmt_f64(r.f_n),
                        fmt_f64(r.mean_contacts),
                        fmt_f64(r.contact),
                    ]
                })
                .collect();
            let summary = json!({
                "beta": beta,
                "u": u,
                "delta": delta,
                "N": n,
                "n_replicas": cfg.n_replicas,
                "f_mean": ens.free_energy.mean,
                "f_se": ens.free_energy.std_error,
                "c_mean": ens.contact.mean,
                "c_se": ens.contact.std_error,
            });
            Ok(Prepared::Quenched { rows, summary })
        }
        Command::Curve => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let law = build_law(cfg)?;
            let ccfg = CurveConfig {
                beta,
                delta_grid: delta_grid_or_single(cfg)?,
                n: cfg.require_n().map_err(|e| e.to_string())?,
                n_replicas: cfg.n_replicas,
                seed: cfg.seed,
                m_cap: cfg.m_cap,
                size_rule: SizeRule::SkipUndersized,
            };
            let rep = curve_compare(&law, &ccfg).map_err(|e| e.to_string())?;
            let ok = rep.points.iter().all(|p| p.jensen_ok);
            let rows = rep
                .points
                .iter()
                .map(|p| {
                    vec![
                        fmt_f64(p.beta),
                        fmt_f64(p.delta),
                        fmt_f64(p.beta_delta),
                        p.n.to_string(),
                        p.m.as_csv_field(),
                        fmt_f64(p.annealed_f),
                        fmt_f64(p.annealed_c),
                        fmt_f64(p.annealed_f_n),
                        fmt_f64(p.annealed_c_n),
                        fmt_f64(p.quenched_f.mean),
                        fmt_f64(p.quenched_f.std_error),
                        fmt_f64(p.quenched_c.mean),
                        fmt_f64(p.quenched_c.std_error),
                        p.jensen_ok.to_string(),
                    ]
                })
                .collect();
            let summary = json!({
                "beta": beta,
                "points": rep.points.len(),
                "skipped": rep.skipped,
                "jensen_ok": ok,
            });
            let warnings = rep.skipped.clone();
            Ok(Prepared::Curve { rows, summary, ok, warnings })
        }
        Command::Bound => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let law = build_law(cfg)?;
            let bcfg = BoundConfig {
                beta,
                delta_grid: delta_grid_or_single(cfg)?,
                n: cfg.require_n().map_err(|e| e.to_string())?,
                n_replicas: cfg.n_replicas,
                seed: cfg.seed,
            };
            let rep = quadratic_bound_check(&law, &bcfg).map_err(|e| e.to_string())?;
            let rows = rep
                .points
                .iter()
                .map(|p| {
                    vec![
                        fmt_f64(p.beta),
                        fmt_f64(p.delta),
                        p.n.to_string(),
                        fmt_f64(p.quenched_f.mean),
                        fmt_f64(p.quenched_f.std_error),
                        fmt_f64(p.quenched_c.mean),
                        fmt_f64(p.quenched_c.std_error),
                        fmt_f64(p.f_bound),
                        fmt_f64(p.c_bound),
                        fmt_f64(p.slack_f),
                        fmt_f64(p.slack_c),
                        p.f_ok.to_string(),
                        p.c_ok.to_string(),
                    ]
                })
                .collect();
            let summary = json!({
                "beta": beta,
                "delta2": rep.delta2,
                "dropped_above_delta2": rep.dropped_above_delta2,
                "all_ok": rep.all_ok,
            });
            let ok = rep.all_ok;
            Ok(Prepared::Bound { rows, summary, ok })
        }
        Command::Bracket => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let law = build_law(cfg)?;
            if cfg.delta_grid.is_empty() {
                return Err("bracket requires `delta_grid`".into());
            }
            if cfg.n_grid.is_empty() {
                return Err("bracket requires `n_grid`".into());
            }
            let bcfg = BracketConfig {
                beta,
                delta_grid: cfg.delta_grid.clone(),
                n_grid: cfg.n_grid.clone(),
                n_replicas: cfg.n_replicas,
                seed: cfg.seed,
                theta_frac: cfg.theta_frac,
            };
            let rep = critical_bracket(&law, &bcfg).map_err(|e| e.to_string())?;
            let mut rows = Vec::new();
            for r in &rep.rows {
                for (n, q, a) in &r.per_n {
                    rows.push(vec![
                        fmt_f64(r.delta),
                        n.to_string(),
                        fmt_f64(q.mean),
                        fmt_f64(q.std_error),
                        fmt_f64(*a),
                        fmt_f64(r.quenched_extrap),
                        fmt_f64(r.annealed_extrap),
                        fmt_f64(r.theta),
                        r.below.to_string(),
                    ]);
                }
            }
            let summary = json!({
                "beta": beta,
                "delta_lo": rep.delta_lo,
                "delta_hi": rep.delta_hi,
                "monotone": rep.monotone,
                "warnings": rep.warnings,
            });
            let warnings = rep.warnings.clone();
            Ok(Prepared::Bracket { rows, summary, warnings })
        }
        Command::Overlap => {
            let law = build_law(cfg)?;
            let n_grid: Vec<u64> = if cfg.n_grid.is_empty() {
                vec![1_000, 10_000, 100_000]
            } else {
                cfg.n_grid.iter().map(|&n| n as u64).collect()
            };
            let rep = overlap_survival_check(&law, &n_grid, cfg.k_max, cfg.n_pairs, cfg.seed)?;
            let mut rows = Vec::new();
            for c in &rep.curves {
                for p in &c.points {
                    rows.push(vec![
                        p.n.to_string(),
                        p.k.to_string(),
                        fmt_f64(p.survival),
                        p.n_pairs.to_string(),
                    ]);
                }
            }
            let summary = json!({
                "regime": format!("{:?}", rep.regime),
                "p_hat": rep.curves.iter().map(|c| json!({"N": c.n, "p_hat": c.p_hat, "k_fit": c.k_fit, "mean_overlap": c.mean_overlap})).collect::<Vec<_>>(),
                "slope": rep.slope,
                "expected_slope": rep.expected_slope,
                "stability_ratio": rep.stability_ratio,
                "verdict": rep.verdict,
            });
            let ok = rep.verdict;
            Ok(Prepared::Overlap { rows, summary, ok })
        }
        Command::Transient => {
            let beta = cfg.require_beta().map_err(|e| e.to_string())?;
            let (_, u) = cfg.resolve_potential().map_err(|e| e.to_string())?;
            let law = build_law(cfg)?;
            if cfg.n_grid.is_empty() {
                return Err("transient requires `n_grid`".into());
            }
            let tcfg = TransientConfig {
                beta,
                u,
                n_grid: cfg.n_grid.clone(),
                n_replicas: cfg.n_replicas,
                seed: cfg.seed,
            };
            let rep = transient_map_check(&law, &tcfg).map_err(|e| e.to_string())?;
            let mut rows = Vec::new();
            for r in &rep.replicas {
                for (i, &n) in rep.n_grid.iter().enumerate() {
                    rows.push(vec![
                        r.replica.to_string(),
                        n.to_string(),
                        fmt_f64(r.discrepancy[i]),
                    ]);
                }
            }
            let last_d = *rep.mean_discrepancy.last().unwrap();
            let ok = rep.fraction_decreasing >= 0.95 && last_d <= 0.01 * rep.f_reference.abs().max(1e-12);
            let summary = json!({
                "u_c_d": rep.u_c_d,
                "n_grid": rep.n_grid,
                "mean_discrepancy": rep.mean_discrepancy,
                "fraction_decreasing": rep.fraction_decreasing,
                "fitted_log_rate": rep.fitted_log_rate,
                "f_reference": rep.f_reference,
                "verdict": ok,
            });
            Ok(Prepared::Transient { rows, summary, ok })
        }
        Command::C32scale => {
            let law = build_law(cfg)?;
            if cfg.beta_grid.is_empty() {
                return Err("c32scale requires `beta_grid`".into());
            }
            let rep = c32_scale(
                &law,
                &C32Config {
                    beta_grid: cfg.beta_grid.clone(),
                    a_const: cfg.a_const,
                },
            )
            .map_err(|e| e.to_string())?;
            let rows = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.beta),
                        fmt_f64(r.inv_beta_sq),
                        fmt_f64(r.m),
                        fmt_f64(r.delta0_hat),
                    ]
                })
                .collect();
            let slope_ok = match (rep.slope, rep.expected_slope) {
                (Some(s), Some(e)) => ((s - e) / e).abs() <= 0.05,
                _ => true,
            };
            let ok = rep.strictly_decreasing_in_beta && slope_ok;
            let summary = json!({
                "slope": rep.slope,
                "expected_slope": rep.expected_slope,
                "strictly_decreasing_in_beta": rep.strictly_decreasing_in_beta,
                "verdict": ok,
            });
            Ok(Prepared::C32 { rows, summary, ok })
        }
    }
}

// ---- selfcheck -------------------------------------------------------------

fn run_selfcheck() -> i32 {
    let mut all_ok = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("selfcheck {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // 1. DP against exhaustive enumeration
    let laws: Vec<ExcursionLaw> = vec![
        ExcursionLaw::heavy(1.25, SlowlyVarying::Constant(1.0), 0.0, 1000).unwrap(),
        ExcursionLaw::heavy(1.5, SlowlyVarying::Constant(1.0), 0.0, 1000).unwrap(),
        ExcursionLaw::heavy(1.75, SlowlyVarying::Constant(1.0), 0.0, 1000).unwrap(),
        ExcursionLaw::build(LawKind::Geometric { p: 0.5 }, 1000).unwrap(),
        ExcursionLaw::build(LawKind::Deterministic { k: 1 }, 1000).unwrap(),
    ];
    let mut sm = SplitMix64::new(20_240_501);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for case in 0..20 {
        let law = &laws[case % laws.len()];
        let beta = 0.05 + 0.95 * u01(&mut sm);
        let u = -1.0 + 2.0 * u01(&mut sm);
        let n = 6 + (u01(&mut sm) * 7.0) as usize;
        let params = PinningParams::from_u(beta, u);
        let disorder = DisorderRealization::gaussian(sm.next_u64(), 0, n);
        let dp = dp::dp_solve(law, params, &disorder);
        let bf = brute_force(law, params, &disorder);
        let rel = (dp.log_z - bf.log_z).abs() / bf.log_z.abs().max(1.0);
        let relc = (dp.mean_contacts - bf.mean_contacts).abs() / (bf.mean_contacts.abs() + 1.0);
        worst = worst.max(rel).max(relc);
        ok &= rel <= 1e-9 && relc <= 1e-9;
    }
    report("dp-vs-brute-force", ok, format!("20 cases, worst rel err {worst:.2e}"));

    // 2. annealed identities
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for law in &laws[..3] {
        for bd in [0.2, 0.05, 0.01, 0.002] {
            let sol = solve_annealed(law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip)
                .unwrap();
            worst = worst.max(sol.residual_identity.abs()).max(sol.residual_variational.abs());
            ok &= sol.residual_identity.abs() <= 1e-10 && sol.residual_variational.abs() <= 1e-8;
        }
    }
    report("annealed-identities", ok, format!("worst residual {worst:.2e}"));

    // 3. normalization
    let mut ok = true;
    for law in &laws {
        let mut mass = 0.0;
        for n in 1..=law.n_table() as u64 {
            mass += law.pmf_at(n);
        }
        let total = mass + law.tail_at(law.n_table() as u64);
        ok &= (total - 1.0).abs() < 1e-11;
    }
    report("law-normalization", ok, "sum K(n) + tail + defect = 1".into());

    // 4. determinism
    let law = &laws[1];
    let params = PinningParams::from_u(0.4, 0.05);
    let a = quenched_mc(law, params, 128, 4, 7, DisorderMode::Gaussian);
    let b = quenched_mc(law, params, 128, 4, 7, DisorderMode::Gaussian);
    let ok = a
        .rows
        .iter()
        .zip(&b.rows)
        .all(|(x, y)| x.log_z.to_bits() == y.log_z.to_bits());
    report("replica-determinism", ok, "bit-identical rerun".into());

    // 5. posterior sampler against enumeration (chi-square)
    let law = &laws[1];
    let params = PinningParams::from_u(0.6, 0.3);
    let disorder = DisorderRealization::gaussian(99, 0, 8);
    let dp_res = dp::dp_solve(law, params, &disorder);
    let bf = brute_force(law, params, &disorder);
    let mut rng = Xoshiro256pp::from_seed(5);
    let draws = 50_000;
    let mut counts = vec![0u64; 1 << 8];
    for _ in 0..draws {
        let set = dp::sample_return_set(&dp_res, law, &mut rng);
        let mut mask = 0usize;
        for s in set {
            mask |= 1 << (s - 1);
        }
        counts[mask] += 1;
    }
    let mut chi2 = 0.0;
    let mut df = 0.0;
    for m in 0..(1 << 8) {
        let e = bf.subset_probs[m] * draws as f64;
        if e >= 5.0 {
            let d = counts[m] as f64 - e;
            chi2 += d * d / e;
            df += 1.0;
        }
    }
    let p = crate::stats::chi_square_pvalue(chi2, df - 1.0);
    report("posterior-sampler", p > 1e-3, format!("chi2 p = {p:.4}"));

    if all_ok {
        0
    } else {
        1
    }
}

fn u01(sm: &mut SplitMix64) -> f64 {
    (sm.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}
