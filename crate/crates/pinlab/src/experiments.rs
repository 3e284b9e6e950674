//! Theorem-level numerical studies: quenched vs annealed curves, the
//! quadratic bound, critical-point bracketing, the transient mapping, and the
//! c = 3/2 crossover scale. Every experiment is a pure function of
//! (law, config, seed).

use crate::annealed::{
    crossover_delta2, solve_annealed, CorrLength, CorrLengthRequest, PinningParams,
};
use crate::dp::{annealed_dp, dp_solve, quenched_mc, DisorderMode, DisorderRealization, MAX_DP_N};
use crate::law::{ExcursionLaw, LawError};
use crate::stats::EstimateWithCI;
use crate::sv::TildePhi;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("{0}")]
    Config(String),
}

/// How curve_compare enforces N ≥ 20·M.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeRule {
    /// Drop grid points whose correlation length is too large for N.
    SkipUndersized,
    /// Raise N to 20·M per point (capped by the DP limit).
    RaiseN,
    /// Keep N as requested; comparisons then lean on the same-N annealed DP.
    Keep,
}

#[derive(Clone, Debug)]
pub struct CurveConfig {
    pub beta: f64,
    pub delta_grid: Vec<f64>,
    pub n: usize,
    pub n_replicas: usize,
    pub seed: u64,
    pub m_cap: u64,
    pub size_rule: SizeRule,
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub beta: f64,
    pub delta: f64,
    pub beta_delta: f64,
    pub n: usize,
    pub m: CorrLength,
    /// Exact annealed βf^a = α₀ and δ* from the solver.
    pub annealed_f: f64,
    pub annealed_c: f64,
    /// Same-N annealed DP values (1/N)·log Z and ⟨L_N⟩/N.
    pub annealed_f_n: f64,
    pub annealed_c_n: f64,
    pub quenched_f: EstimateWithCI,
    pub quenched_c: EstimateWithCI,
    /// Jensen: quenched mean ≤ same-N annealed + 3·se.
    pub jensen_ok: bool,
}

#[derive(Clone, Debug)]
pub struct CurveReport {
    pub points: Vec<CurvePoint>,
    pub skipped: Vec<String>,
}

pub fn curve_compare(law: &ExcursionLaw, cfg: &CurveConfig) -> Result<CurveReport, ExperimentError> {
    if !law.is_recurrent() {
        return Err(LawError::NotRecurrent.into());
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &delta in &cfg.delta_grid {
        let params = PinningParams::from_delta(cfg.beta, delta);
        // cap the M search: past 64·N it is informational only
        let m_search_cap = cfg.m_cap.min(64 * cfg.n as u64).max(1024);
        let sol = solve_annealed(law, params, CorrLengthRequest::UpTo(m_search_cap))?;
        let n_eff = match (cfg.size_rule, sol.corr_length) {
            (SizeRule::Keep, _) => cfg.n,
            (SizeRule::SkipUndersized, CorrLength::Value(m)) if 20 * m <= cfg.n as u64 => cfg.n,
            (SizeRule::SkipUndersized, CorrLength::Value(m)) => {
                skipped.push(format!("delta={delta}: N={} < 20·M={}", cfg.n, 20 * m));
                continue;
            }
            (SizeRule::SkipUndersized, _) => {
                skipped.push(format!("delta={delta}: correlation length above cap {m_search_cap}"));
                continue;
            }
            (SizeRule::RaiseN, CorrLength::Value(m)) => {
                let want = (20 * m) as usize;
                if want > MAX_DP_N {
                    skipped.push(format!("delta={delta}: 20·M={want} above the DP cap"));
                    continue;
                }
                cfg.n.max(want)
            }
            (SizeRule::RaiseN, _) => {
                skipped.push(format!("delta={delta}: correlation length above cap {m_search_cap}"));
                continue;
            }
        };
        let ens = quenched_mc(law, params, n_eff, cfg.n_replicas, cfg.seed, DisorderMode::Gaussian);
        let ann = annealed_dp(law, params, n_eff);
        let jensen_ok =
            ens.free_energy.mean <= ann.log_z / n_eff as f64 + 3.0 * ens.free_energy.std_error;
        points.push(CurvePoint {
            beta: cfg.beta,
            delta,
            beta_delta: params.beta_delta(),
            n: n_eff,
            m: sol.corr_length,
            annealed_f: sol.alpha0,
            annealed_c: sol.delta_star,
            annealed_f_n: ann.log_z / n_eff as f64,
            annealed_c_n: ann.mean_contacts / n_eff as f64,
            quenched_f: ens.free_energy,
            quenched_c: ens.contact,
            jensen_ok,
        });
    }
    Ok(CurveReport { points, skipped })
}

#[derive(Clone, Debug)]
pub struct BoundConfig {
    pub beta: f64,
    /// Points above Δ₂ are filtered out (the quadratic bound is vacuous there).
    pub delta_grid: Vec<f64>,
    pub n: usize,
    pub n_replicas: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BoundPoint {
    pub beta: f64,
    pub delta: f64,
    pub n: usize,
    pub quenched_f: EstimateWithCI,
    pub quenched_c: EstimateWithCI,
    pub f_bound: f64,
    pub c_bound: f64,
    pub slack_f: f64,
    pub slack_c: f64,
    pub f_ok: bool,
    pub c_ok: bool,
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub delta2: f64,
    pub points: Vec<BoundPoint>,
    pub dropped_above_delta2: Vec<f64>,
    pub all_ok: bool,
}

/// Quadratic bound βf^q ≤ Δ²/2 and contact ≤ 2Δ/β for Δ ≤ Δ₂, with the
/// finite-size slack calibrated from the control run at Δ = 0: there the
/// asymptotic bounds vanish identically, so the control's measured values are
/// the pipeline's own finite-size floor (disorder included). The check then
/// asserts the growth above that floor, which converges to the theorem's
/// statement as N → ∞.
pub fn quadratic_bound_check(law: &ExcursionLaw, cfg: &BoundConfig) -> Result<BoundReport, ExperimentError> {
    let c = law.tail_exponent().unwrap_or(0.0);
    if c <= 1.5 || !law.is_recurrent() {
        return Err(ExperimentError::Config(
            "quadratic bound check requires a recurrent heavy law with c > 3/2".into(),
        ));
    }
    let delta2 = crossover_delta2(law, cfg.beta)
        .map_err(|e| ExperimentError::Config(format!("delta2 bracket failed: {e}")))?;
    let control = quenched_mc(
        law,
        PinningParams::from_delta(cfg.beta, 0.0),
        cfg.n,
        cfg.n_replicas,
        cfg.seed,
        DisorderMode::Gaussian,
    );
    let slack_f = control.free_energy.mean.max(0.0);
    let slack_c = control.contact.mean.max(0.0);
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for &delta in &cfg.delta_grid {
        if delta > delta2 {
            dropped.push(delta);
            continue;
        }
        let params = PinningParams::from_delta(cfg.beta, delta);
        let ens = quenched_mc(law, params, cfg.n, cfg.n_replicas, cfg.seed, DisorderMode::Gaussian);
        let f_bound = delta * delta / 2.0;
        let c_bound = 2.0 * delta / cfg.beta;
        let f_ok = ens.free_energy.mean - 3.0 * ens.free_energy.std_error <= f_bound + slack_f;
        let c_ok = ens.contact.mean - 3.0 * ens.contact.std_error <= c_bound + slack_c;
        points.push(BoundPoint {
            beta: cfg.beta,
            delta,
            n: cfg.n,
            quenched_f: ens.free_energy,
            quenched_c: ens.contact,
            f_bound,
            c_bound,
            slack_f,
            slack_c,
            f_ok,
            c_ok,
        });
    }
    let all_ok = points.iter().all(|p| p.f_ok && p.c_ok);
    Ok(BoundReport {
        delta2,
        points,
        dropped_above_delta2: dropped,
        all_ok,
    })
}

#[derive(Clone, Debug)]
pub struct BracketConfig {
    pub beta: f64,
    pub delta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub n_replicas: usize,
    pub seed: u64,
    /// Threshold fraction θ_c = theta_frac · (extrapolated annealed contact).
    pub theta_frac: f64,
}

#[derive(Clone, Debug)]
pub struct BracketRow {
    pub delta: f64,
    pub per_n: Vec<(usize, EstimateWithCI, f64)>, // (N, quenched contact, annealed-N contact)
    pub quenched_extrap: f64,
    pub annealed_extrap: f64,
    pub theta: f64,
    pub below: bool,
}

#[derive(Clone, Debug)]
pub struct BracketReport {
    pub rows: Vec<BracketRow>,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub monotone: bool,
    pub warnings: Vec<String>,
}

fn extrapolate_in_inverse_n(ns: &[usize], ys: &[f64]) -> f64 {
    // least-squares line in 1/N, evaluated at 1/N = 0
    let x: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let nf = x.len() as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(ys).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    my - slope * mx
}

/// Bracket the operational critical Δ: the quenched contact, extrapolated
/// linearly in 1/N, crosses θ_c = theta_frac · (annealed contact, same
/// extrapolation protocol).
pub fn critical_bracket(law: &ExcursionLaw, cfg: &BracketConfig) -> Result<BracketReport, ExperimentError> {
    if !law.is_recurrent() {
        return Err(LawError::NotRecurrent.into());
    }
    if cfg.n_grid.len() < 2 {
        return Err(ExperimentError::Config("bracket needs at least two N values".into()));
    }
    let mut rows = Vec::new();
    for &delta in &cfg.delta_grid {
        let params = PinningParams::from_delta(cfg.beta, delta);
        let mut per_n = Vec::new();
        let mut qs = Vec::new();
        let mut ans = Vec::new();
        for &n in &cfg.n_grid {
            let ens = quenched_mc(law, params, n, cfg.n_replicas, cfg.seed, DisorderMode::Gaussian);
            let ann = annealed_dp(law, params, n).mean_contacts / n as f64;
            qs.push(ens.contact.mean);
            ans.push(ann);
            per_n.push((n, ens.contact, ann));
        }
        let quenched_extrap = extrapolate_in_inverse_n(&cfg.n_grid, &qs);
        let annealed_extrap = extrapolate_in_inverse_n(&cfg.n_grid, &ans);
        let theta = cfg.theta_frac * annealed_extrap;
        rows.push(BracketRow {
            delta,
            per_n,
            quenched_extrap,
            annealed_extrap,
            theta,
            below: quenched_extrap < theta,
        });
    }
    let mut warnings = Vec::new();
    let above: Vec<f64> = rows.iter().filter(|r| !r.below).map(|r| r.delta).collect();
    let below: Vec<f64> = rows.iter().filter(|r| r.below).map(|r| r.delta).collect();
    let delta_hi = above.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta_hi = if delta_hi.is_finite() {
        delta_hi
    } else {
        warnings.push("no grid point above threshold; delta_hi clamped to grid max".into());
        *cfg.delta_grid.last().unwrap()
    };
    let delta_lo = below
        .iter()
        .cloned()
        .filter(|&d| d < delta_hi)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta_lo = if delta_lo.is_finite() {
        delta_lo
    } else {
        warnings.push("no grid point below threshold; delta_lo clamped to grid min".into());
        *cfg.delta_grid.first().unwrap()
    };
    let monotone = below.iter().all(|&d| d <= delta_hi) && above.iter().all(|&d| d >= delta_lo);
    if !monotone {
        warnings.push("non-monotone crossing; bracket widened".into());
    }
    Ok(BracketReport {
        rows,
        delta_lo,
        delta_hi,
        monotone,
        warnings,
    })
}

#[derive(Clone, Debug)]
pub struct TransientConfig {
    pub beta: f64,
    pub u: f64,
    pub n_grid: Vec<usize>,
    pub n_replicas: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TransientReplica {
    pub replica: u64,
    /// |f_N(transient at u) − f_N(recurrentized at u − u_c^d)| per N.
    pub discrepancy: Vec<f64>,
    pub decreasing_overall: bool,
}

#[derive(Clone, Debug)]
pub struct TransientReport {
    pub u_c_d: f64,
    pub n_grid: Vec<usize>,
    pub replicas: Vec<TransientReplica>,
    pub mean_discrepancy: Vec<f64>,
    pub fraction_decreasing: f64,
    /// Fitted C in d(N) ≤ C log N / N.
    pub fitted_log_rate: f64,
    /// Reference βf: recurrent-side mean at the largest N.
    pub f_reference: f64,
}

/// Realization-wise check of the transient ↔ recurrentized mapping: shared
/// disorder on both sides, so the difference is a pure boundary effect.
pub fn transient_map_check(law: &ExcursionLaw, cfg: &TransientConfig) -> Result<TransientReport, ExperimentError> {
    if law.is_recurrent() {
        return Err(ExperimentError::Config("transient map check needs p_inf > 0".into()));
    }
    let (rec_law, _) = law.recurrentize()?;
    let u_c_d = law.deterministic_critical_u(cfg.beta);
    let params_t = PinningParams::from_u(cfg.beta, cfg.u);
    let params_r = PinningParams::from_u(cfg.beta, cfg.u - u_c_d);
    let n_max = *cfg.n_grid.iter().max().unwrap();
    let replicas: Vec<TransientReplica> = (0..cfg.n_replicas as u64)
        .into_par_iter()
        .map(|i| {
            let full = DisorderRealization::gaussian(cfg.seed, i, n_max);
            let discrepancy: Vec<f64> = cfg
                .n_grid
                .iter()
                .map(|&n| {
                    let slice = DisorderRealization {
                        values: full.values[..n].to_vec(),
                        seed: full.seed,
                        replica_index: full.replica_index,
                    };
                    let ft = dp_solve(law, params_t, &slice).log_z / n as f64;
                    let fr = dp_solve(&rec_law, params_r, &slice).log_z / n as f64;
                    (ft - fr).abs()
                })
                .collect();
            let decreasing_overall = discrepancy.last().unwrap() < discrepancy.first().unwrap();
            TransientReplica {
                replica: i,
                discrepancy,
                decreasing_overall,
            }
        })
        .collect();
    let mut mean_discrepancy = vec![0.0; cfg.n_grid.len()];
    for r in &replicas {
        for (i, &d) in r.discrepancy.iter().enumerate() {
            mean_discrepancy[i] += d;
        }
    }
    for d in &mut mean_discrepancy {
        *d /= cfg.n_replicas as f64;
    }
    let fraction_decreasing =
        replicas.iter().filter(|r| r.decreasing_overall).count() as f64 / cfg.n_replicas as f64;
    let fitted_log_rate = cfg
        .n_grid
        .iter()
        .zip(&mean_discrepancy)
        .map(|(&n, &d)| d * n as f64 / (n as f64).ln())
        .fold(f64::MIN, f64::max);
    // recurrent-side reference free energy at the largest N
    let f_reference = {
        let ens = quenched_mc(&rec_law, params_r, n_max, cfg.n_replicas, cfg.seed, DisorderMode::Gaussian);
        ens.free_energy.mean
    };
    Ok(TransientReport {
        u_c_d,
        n_grid: cfg.n_grid.clone(),
        replicas,
        mean_discrepancy,
        fraction_decreasing,
        fitted_log_rate,
        f_reference,
    })
}

#[derive(Clone, Debug)]
pub struct C32Config {
    pub beta_grid: Vec<f64>,
    /// Stand-in for the theorem's inner constant: m = φ̃⁻¹(A/β²).
    pub a_const: f64,
}

#[derive(Clone, Debug)]
pub struct C32Row {
    pub beta: f64,
    pub inv_beta_sq: f64,
    pub m: f64,
    pub delta0_hat: f64,
}

#[derive(Clone, Debug)]
pub struct C32Report {
    pub rows: Vec<C32Row>,
    /// Slope of log Δ̂₀ against 1/β² (constant φ only), with the −A/2 target.
    pub slope: Option<f64>,
    pub expected_slope: Option<f64>,
    pub strictly_decreasing_in_beta: bool,
}

/// Operational crossover scale at c = 3/2: Δ̂₀(β) = φ(m)/√m, m = φ̃⁻¹(A/β²).
pub fn c32_scale(law: &ExcursionLaw, cfg: &C32Config) -> Result<C32Report, ExperimentError> {
    let c = law.tail_exponent().unwrap_or(0.0);
    if (c - 1.5).abs() > 1e-12 || !law.is_recurrent() {
        return Err(ExperimentError::Config("c32 scale requires a recurrent law with c = 3/2".into()));
    }
    let phi = law.phi().expect("heavy law");
    if !phi.tilde_diverges() {
        return Err(ExperimentError::Config(
            "tilde-phi is bounded for this phi; the c = 3/2 scale does not apply (small-c regime instead)"
                .into(),
        ));
    }
    if cfg.beta_grid.len() < 2 {
        return Err(ExperimentError::Config("need at least two beta values".into()));
    }
    let tp = TildePhi::new(phi);
    let mut rows = Vec::new();
    for &beta in &cfg.beta_grid {
        assert!(beta > 0.0);
        let target = cfg.a_const / (beta * beta);
        let m = tp
            .inverse(target.max(1e-12))
            .map_err(ExperimentError::Config)?;
        let delta0_hat = phi.eval(m) / m.sqrt();
        rows.push(C32Row {
            beta,
            inv_beta_sq: 1.0 / (beta * beta),
            m,
            delta0_hat,
        });
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.beta.partial_cmp(&b.beta).unwrap());
    let strictly_decreasing_in_beta = sorted.windows(2).all(|w| w[0].delta0_hat < w[1].delta0_hat);
    let (slope, expected_slope) = if phi.is_constant() && rows.len() >= 4 {
        let x: Vec<f64> = rows.iter().map(|r| r.inv_beta_sq).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.delta0_hat.ln()).collect();
        let fit = crate::stats::linear_fit(&x, &y).map_err(ExperimentError::Config)?;
        (Some(fit.slope), Some(-cfg.a_const / 2.0))
    } else {
        (None, None)
    };
    Ok(C32Report {
        rows,
        slope,
        expected_slope,
        strictly_decreasing_in_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sv::SlowlyVarying::{Constant, LogPower};

    fn heavy(c: f64, n_table: usize) -> ExcursionLaw {
        ExcursionLaw::heavy(c, Constant(1.0), 0.0, n_table).unwrap()
    }

    #[test]
    fn c32_scale_exponential_smallness() {
        let law = heavy(1.5, 10_000);
        let cfg = C32Config {
            beta_grid: vec![0.5, 0.4, 0.3, 0.25, 0.2],
            a_const: 1.0,
        };
        let rep = c32_scale(&law, &cfg).unwrap();
        assert!(rep.strictly_decreasing_in_beta);
        let slope = rep.slope.unwrap();
        let want = rep.expected_slope.unwrap();
        assert!(
            ((slope - want) / want).abs() < 0.05,
            "slope {slope} vs {want}"
        );
    }

    #[test]
    fn c32_scale_rejects_bounded_tilde_phi_and_orders_laws() {
        let bounded = ExcursionLaw::heavy(1.5, LogPower(2.0), 0.0, 10_000).unwrap();
        assert!(c32_scale(&bounded, &C32Config { beta_grid: vec![0.5, 0.4], a_const: 1.0 }).is_err());
        let wrong_c = heavy(1.25, 10_000);
        assert!(c32_scale(&wrong_c, &C32Config { beta_grid: vec![0.5, 0.4], a_const: 1.0 }).is_err());
        // faster-diverging tilde-phi gives a larger scale at equal beta
        let law_const = heavy(1.5, 10_000);
        let law_lp = ExcursionLaw::heavy(1.5, LogPower(-1.0), 0.0, 10_000).unwrap();
        let cfg = C32Config { beta_grid: vec![0.3, 0.28], a_const: 1.0 };
        let a = c32_scale(&law_const, &cfg).unwrap();
        let b = c32_scale(&law_lp, &cfg).unwrap();
        assert!(b.rows[0].delta0_hat > a.rows[0].delta0_hat);
    }

    #[test]
    fn curve_compare_skips_undersized_points() {
        let law = heavy(1.5, 100_000);
        let cfg = CurveConfig {
            beta: 0.5,
            delta_grid: vec![0.2, 0.001], // second point has huge M
            n: 2048,
            n_replicas: 4,
            seed: 3,
            m_cap: 1 << 22,
            size_rule: SizeRule::SkipUndersized,
        };
        let rep = curve_compare(&law, &cfg).unwrap();
        assert_eq!(rep.points.len(), 1);
        assert_eq!(rep.skipped.len(), 1);
        assert!(rep.points[0].jensen_ok);
    }

    #[test]
    fn transient_map_small_smoke() {
        let law = ExcursionLaw::heavy(1.5, Constant(1.0), 0.3, 10_000).unwrap();
        let beta = 0.5;
        let u_c_d = law.deterministic_critical_u(beta);
        assert!((u_c_d - 2.0 * 0.35667494393873245).abs() < 1e-12);
        let cfg = TransientConfig {
            beta,
            u: u_c_d + 0.2,
            n_grid: vec![256, 1024],
            n_replicas: 8,
            seed: 11,
        };
        let rep = transient_map_check(&law, &cfg).unwrap();
        assert!(rep.fraction_decreasing >= 0.7, "{}", rep.fraction_decreasing);
        assert!(rep.mean_discrepancy[1] < rep.mean_discrepancy[0]);
        // below u_c^d both sides are essentially unpinned
        let cfg2 = TransientConfig {
            beta,
            u: u_c_d - 0.5,
            n_grid: vec![256, 1024],
            n_replicas: 4,
            seed: 12,
        };
        let rep2 = transient_map_check(&law, &cfg2).unwrap();
        assert!(rep2.mean_discrepancy.iter().all(|&d| d < 0.05));
        // recurrent law is rejected
        let rec = heavy(1.5, 10_000);
        assert!(transient_map_check(&rec, &cfg).is_err());
    }
}
