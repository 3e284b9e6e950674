//! Annealed/deterministic thermodynamics by convex duality: the tilt α₀
//! solving βΔ = −log M_E(−α₀), the contact fraction δ*, the rate function
//! I_E, the correlation length M, and the crossover scales Δ₁, Δ₂.
//!
//! Everything here consumes only βΔ: for standard Gaussian disorder the
//! annealed model at (β, u) is the deterministic model at u + β/2.

use crate::law::{ExcursionLaw, LawError};
use crate::numeric::bisect_decreasing;
use crate::renewal;
use crate::stats::{linear_fit, LinearFit};

/// (β, u) with Δ = u + β/2 (standard Gaussian disorder: log M_V(β) = β²/2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinningParams {
    pub beta: f64,
    pub u: f64,
}

impl PinningParams {
    pub fn from_u(beta: f64, u: f64) -> Self {
        assert!(beta > 0.0, "beta must be positive");
        Self { beta, u }
    }

    pub fn from_delta(beta: f64, delta: f64) -> Self {
        Self::from_u(beta, delta - beta / 2.0)
    }

    pub fn delta(&self) -> f64 {
        self.u + self.beta / 2.0
    }

    pub fn beta_delta(&self) -> f64 {
        self.beta * self.delta()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrLength {
    Value(u64),
    /// Unpinned phase: δ* = 0 and the crossing never happens.
    Infinite,
    /// Not requested.
    Skipped,
    /// Search abandoned at the configured cap.
    OverCap,
}

impl CorrLength {
    pub fn as_csv_field(&self) -> String {
        match self {
            CorrLength::Value(m) => m.to_string(),
            CorrLength::Infinite => "inf".to_string(),
            CorrLength::Skipped | CorrLength::OverCap => "na".to_string(),
        }
    }

    pub fn value(&self) -> Option<u64> {
        match self {
            CorrLength::Value(m) => Some(*m),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CorrLengthRequest {
    Skip,
    UpTo(u64),
}

#[derive(Clone, Debug)]
pub struct AnnealedSolution {
    /// α₀ = βf^a; zero in the unpinned phase.
    pub alpha0: f64,
    /// δ* = annealed contact fraction.
    pub delta_star: f64,
    pub corr_length: CorrLength,
    /// βΔ + log M_E(−α₀); bisection quality.
    pub residual_identity: f64,
    /// F(δ*) − α₀ with F evaluated through the rate function (independent route).
    pub residual_variational: f64,
}

impl AnnealedSolution {
    pub fn beta_free_energy(&self) -> f64 {
        self.alpha0
    }

    pub fn contact_fraction(&self) -> f64 {
        self.delta_star
    }

    fn unpinned() -> Self {
        Self {
            alpha0: 0.0,
            delta_star: 0.0,
            corr_length: CorrLength::Infinite,
            residual_identity: 0.0,
            residual_variational: 0.0,
        }
    }
}

/// Solve the annealed model at `params`. The law must be recurrent.
pub fn solve_annealed(
    law: &ExcursionLaw,
    params: PinningParams,
    corr: CorrLengthRequest,
) -> Result<AnnealedSolution, LawError> {
    if !law.is_recurrent() {
        return Err(LawError::NotRecurrent);
    }
    let bd = params.beta_delta();
    if bd <= 0.0 {
        return Ok(AnnealedSolution::unpinned());
    }
    let f = |alpha: f64| bd + law.log_mgf(alpha);
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        assert!(hi < 1e12, "annealed tilt bracket expansion ran away");
    }
    let lo = 1e-18;
    let alpha0 = if f(lo) <= 0.0 {
        lo
    } else {
        bisect_decreasing(&f, lo, hi, 1e-13)
    };
    let delta_star = 1.0 / law.log_mgf_deriv(alpha0, 1)?;
    let rate = rate_function(law, 1.0 / delta_star)?;
    let residual_variational = bd * delta_star - delta_star * rate.value - alpha0;
    let corr_length = match corr {
        CorrLengthRequest::Skip => CorrLength::Skipped,
        CorrLengthRequest::UpTo(cap) => match renewal::correlation_length(law, delta_star, cap) {
            Some(m) => CorrLength::Value(m),
            None => CorrLength::OverCap,
        },
    };
    Ok(AnnealedSolution {
        alpha0,
        delta_star,
        corr_length,
        residual_identity: f(alpha0),
        residual_variational,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RatePoint {
    /// I_E(t) = sup_{x≤0} (tx − log M_E(x)) ≥ 0.
    pub value: f64,
    /// The maximizer x₀ ≤ 0.
    pub x0: f64,
}

/// Large-deviation rate of the mean excursion length at level t > 1, with the
/// tilt located to relative width 1e-12.
pub fn rate_function(law: &ExcursionLaw, t: f64) -> Result<RatePoint, LawError> {
    rate_function_tol(law, t, 1e-12)
}

/// As [`rate_function`] with a caller-chosen bisection tolerance; the value is
/// second-order insensitive to the tilt (envelope), so grid scans can run loose.
pub fn rate_function_tol(law: &ExcursionLaw, t: f64, rel_tol: f64) -> Result<RatePoint, LawError> {
    let min_support = law.min_support() as f64;
    if t <= min_support {
        return Err(LawError::BadParameter(format!(
            "rate_function: t = {t} at or below the minimum excursion length {min_support}"
        )));
    }
    if let Some(mean) = law.finite_mean() {
        if t >= mean && law.is_recurrent() {
            return Ok(RatePoint { value: 0.0, x0: 0.0 });
        }
        if t >= mean {
            // transient law: the supremum sits at x = 0 with value −log M_E(0)
            return Ok(RatePoint {
                value: -law.mgf(0.0).ln(),
                x0: 0.0,
            });
        }
    }
    let g = |alpha: f64| law.log_mgf_deriv(alpha, 1).expect("mean finite for alpha > 0") - t;
    let lo = 1e-18;
    if g(lo) <= 0.0 {
        // mean already at/below t arbitrarily close to zero tilt
        return Ok(RatePoint {
            value: -law.mgf(0.0).ln(),
            x0: 0.0,
        });
    }
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(LawError::BadParameter(format!(
                "rate_function: t = {t} too close to the minimum excursion length"
            )));
        }
    }
    let alpha = bisect_decreasing(&g, lo, hi, rel_tol);
    Ok(RatePoint {
        value: -t * alpha - law.log_mgf(alpha),
        x0: -alpha,
    })
}

/// F(δ) = βΔ·δ − δ·I_E(δ⁻¹), the variational integrand maximized by δ*.
pub fn free_energy_functional(law: &ExcursionLaw, beta_delta: f64, delta: f64) -> Result<f64, LawError> {
    free_energy_functional_tol(law, beta_delta, delta, 1e-12)
}

pub fn free_energy_functional_tol(
    law: &ExcursionLaw,
    beta_delta: f64,
    delta: f64,
    rel_tol: f64,
) -> Result<f64, LawError> {
    assert!(delta > 0.0 && delta < 1.0 + 1e-12);
    let rate = rate_function_tol(law, 1.0 / delta, rel_tol)?;
    Ok(beta_delta * delta - delta * rate.value)
}

/// The positive zero δ₀ of F (beyond δ*), i.e. I_E(δ₀⁻¹) = βΔ.
pub fn pinned_zero_crossing(
    law: &ExcursionLaw,
    beta_delta: f64,
    delta_star: f64,
) -> Result<f64, LawError> {
    assert!(beta_delta > 0.0 && delta_star > 0.0);
    let hi = 0.999;
    let f = |d: f64| free_energy_functional(law, beta_delta, d).expect("F evaluation");
    if f(hi) >= 0.0 {
        return Err(LawError::BadParameter(
            "F has no zero below 1: beta*delta too large for delta_0".into(),
        ));
    }
    Ok(bisect_decreasing(&f, delta_star, hi, 1e-10))
}

#[derive(Debug, thiserror::Error)]
pub enum CrossoverError {
    #[error("no sign change in bracket [{lo}, {hi}]: g(lo) = {glo}, g(hi) = {ghi}")]
    NoSignChange { lo: f64, hi: f64, glo: f64, ghi: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Δ₁(β): the unique Δ > 0 where δ*(βΔ) = 2Δ/β.
pub fn crossover_delta1(law: &ExcursionLaw, beta: f64) -> Result<f64, CrossoverError> {
    crossover_root(law, beta, |sol, delta, beta| sol.delta_star - 2.0 * delta / beta)
}

/// Δ₂(β): the Δ where βf^a(β, −β/2 + Δ) = Δ²/2.
pub fn crossover_delta2(law: &ExcursionLaw, beta: f64) -> Result<f64, CrossoverError> {
    crossover_root(law, beta, |sol, delta, _| sol.alpha0 - delta * delta / 2.0)
}

fn crossover_root(
    law: &ExcursionLaw,
    beta: f64,
    g: impl Fn(&AnnealedSolution, f64, f64) -> f64,
) -> Result<f64, CrossoverError> {
    let (lo, hi) = (1e-8, 10.0);
    let eval = |delta: f64| -> Result<f64, LawError> {
        let sol = solve_annealed(law, PinningParams::from_delta(beta, delta), CorrLengthRequest::Skip)?;
        Ok(g(&sol, delta, beta))
    };
    let glo = eval(lo)?;
    let ghi = eval(hi)?;
    if !(glo > 0.0 && ghi < 0.0) {
        return Err(CrossoverError::NoSignChange { lo, hi, glo, ghi });
    }
    let f = |d: f64| eval(d).expect("crossover evaluation");
    Ok(bisect_decreasing(&f, lo, hi, 1e-8))
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub free_energy_slope: LinearFit,
    pub contact_slope: LinearFit,
    pub expected_free_energy_slope: f64,
    pub expected_contact_slope: f64,
    pub non_constant_phi_warning: bool,
}

/// Log-log slopes of α₀ and δ* against βΔ, for comparison with the exact
/// annealed exponents 1/(c−1) and (2−c)/(c−1).
pub fn scaling_exponents(
    law: &ExcursionLaw,
    beta_delta_grid: &[f64],
) -> Result<ScalingReport, LawError> {
    let c = match law.tail_exponent() {
        Some(c) if c > 1.0 && c < 2.0 && law.is_recurrent() => c,
        _ => {
            return Err(LawError::BadParameter(
                "scaling exponents require a recurrent heavy-tailed law with c in (1,2)".into(),
            ))
        }
    };
    let mut lx = Vec::new();
    let mut la = Vec::new();
    let mut ld = Vec::new();
    for &bd in beta_delta_grid {
        assert!(bd > 0.0);
        let sol = solve_annealed(law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip)?;
        lx.push(bd.ln());
        la.push(sol.alpha0.ln());
        ld.push(sol.delta_star.ln());
    }
    let free_energy_slope = linear_fit(&lx, &la).map_err(LawError::BadParameter)?;
    let contact_slope = linear_fit(&lx, &ld).map_err(LawError::BadParameter)?;
    Ok(ScalingReport {
        free_energy_slope,
        contact_slope,
        expected_free_energy_slope: 1.0 / (c - 1.0),
        expected_contact_slope: (2.0 - c) / (c - 1.0),
        non_constant_phi_warning: !law.phi().map(|p| p.is_constant()).unwrap_or(true),
    })
}

/// Log-spaced grid helper.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let ratio = (hi / lo).ln() / (points as f64 - 1.0);
    (0..points).map(|i| lo * (ratio * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawKind;
    use crate::sv::SlowlyVarying::Constant;

    fn heavy(c: f64) -> ExcursionLaw {
        ExcursionLaw::heavy(c, Constant(1.0), 0.0, 100_000).unwrap()
    }

    fn geometric() -> ExcursionLaw {
        ExcursionLaw::build(LawKind::Geometric { p: 0.5 }, 1000).unwrap()
    }

    #[test]
    fn geometric_closed_form_solution() {
        // βΔ = 0.1: α₀ = 0.1 + log(0.5 + 0.5 e^{−0.1}), δ* = 1 − 0.5 e^{−α₀}
        let sol = solve_annealed(
            &geometric(),
            PinningParams::from_delta(1.0, 0.1),
            CorrLengthRequest::Skip,
        )
        .unwrap();
        let want = 0.1 + (0.5 + 0.5 * (-0.1f64).exp()).ln();
        assert!((sol.alpha0 - want).abs() < 1e-11, "alpha0 {} want {want}", sol.alpha0);
        assert!((want - 0.05124947951).abs() < 1e-10);
        let want_ds = 1.0 - 0.5 * (-want).exp();
        assert!((sol.delta_star - want_ds).abs() < 1e-11);
        assert!((want_ds - 0.5249791875).abs() < 1e-9);
        assert!(sol.residual_identity.abs() < 1e-10);
        assert!(sol.residual_variational.abs() < 1e-8);
    }

    #[test]
    fn unpinned_side_returns_zero_solution() {
        let sol = solve_annealed(
            &heavy(1.5),
            PinningParams::from_u(0.5, -0.5),
            CorrLengthRequest::UpTo(1 << 20),
        )
        .unwrap();
        assert_eq!(sol.alpha0, 0.0);
        assert_eq!(sol.delta_star, 0.0);
        assert_eq!(sol.corr_length, CorrLength::Infinite);
    }

    #[test]
    fn alpha0_vanishes_continuously_at_criticality() {
        let law = heavy(1.5);
        let mut prev = f64::INFINITY;
        for bd in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let sol =
                solve_annealed(&law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip).unwrap();
            assert!(sol.alpha0 > 0.0 && sol.alpha0 < prev);
            prev = sol.alpha0;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn solver_consumes_only_beta_delta() {
        // Gaussian shift identity: (β,u) and (β',u') with equal βΔ agree.
        let law = heavy(1.5);
        let p1 = PinningParams::from_u(0.5, -0.13);
        let bd = p1.beta_delta();
        let p2 = PinningParams::from_delta(0.25, bd / 0.25);
        let s1 = solve_annealed(&law, p1, CorrLengthRequest::Skip).unwrap();
        let s2 = solve_annealed(&law, p2, CorrLengthRequest::Skip).unwrap();
        assert!((s1.alpha0 - s2.alpha0).abs() <= 1e-14 * s1.alpha0.abs());
        assert!((s1.delta_star - s2.delta_star).abs() <= 1e-14);
    }

    #[test]
    fn rate_function_boundary_and_monotonicity() {
        // Geometric(0.5) at its mean: zero rate at x0 = 0
        let r = rate_function(&geometric(), 2.0).unwrap();
        assert_eq!(r.x0, 0.0);
        assert_eq!(r.value, 0.0);
        // Deterministic(1): I → 0 as t → 1⁺
        let det = ExcursionLaw::build(LawKind::Deterministic { k: 1 }, 1000).unwrap();
        let r = rate_function(&det, 1.0 + 1e-9).unwrap();
        assert!(r.value.abs() < 1e-7);
        assert!(rate_function(&det, 0.5).is_err());
        // infinite-mean heavy law: positive, with long excursions getting
        // cheaper (I' = x0 < 0, so I decreases toward 0 as t grows)
        let law = heavy(1.5);
        let mut prev = f64::INFINITY;
        for t in [10.0, 100.0, 1000.0] {
            let r = rate_function(&law, t).unwrap();
            assert!(r.value > 0.0 && r.value < prev);
            assert!(r.x0 < 0.0);
            prev = r.value;
        }
    }

    #[test]
    fn solution_invariants_with_correlation_length() {
        let law = heavy(1.5);
        let params = PinningParams::from_delta(0.5, 0.1); // βΔ = 0.05
        let sol = solve_annealed(&law, params, CorrLengthRequest::UpTo(1 << 20)).unwrap();
        assert!(sol.residual_identity.abs() < 1e-10);
        assert!(sol.residual_variational.abs() < 1e-8);
        let m = sol.corr_length.value().expect("M computable here") as usize;
        let u = renewal::return_mass(&law, m);
        let d = renewal::prefix_contact_density(&u);
        assert!(d[m] <= sol.delta_star && sol.delta_star < d[m - 1]);
        // δ* also matches (log M_E)'(−α₀)·δ* = 1 by construction; check the
        // derivative route independently through the mgf at shifted points
        let lhs = law.log_mgf_deriv(sol.alpha0, 1).unwrap() * sol.delta_star;
        assert!((lhs - 1.0).abs() < 1e-10);
    }

    #[test]
    fn functional_concave_with_argmax_at_delta_star() {
        let law = heavy(1.5);
        let bd = 0.05;
        let sol = solve_annealed(&law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip).unwrap();
        let hi = (10.0 * sol.delta_star).min(0.999);
        let lo = sol.delta_star / 50.0;
        let n = 1000;
        let step = (hi - lo) / (n as f64 - 1.0);
        let grid: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&d| free_energy_functional(&law, bd, d).unwrap())
            .collect();
        let mut best = 0;
        for i in 0..n {
            if vals[i] > vals[best] {
                best = i;
            }
            if i >= 2 {
                let second = vals[i] - 2.0 * vals[i - 1] + vals[i - 2];
                assert!(second <= 1e-8, "F not concave at {}", grid[i - 1]);
            }
            assert!(vals[i] <= sol.alpha0 + 1e-6);
        }
        assert!((grid[best] - sol.delta_star).abs() <= step + 1e-12);
        // δ₀: the zero of F beyond δ*
        let d0 = pinned_zero_crossing(&law, bd, sol.delta_star).unwrap();
        assert!(d0 > sol.delta_star);
        assert!(free_energy_functional(&law, bd, d0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn contact_fraction_increases_with_delta() {
        let law = heavy(1.75);
        let mut prev = 0.0;
        for bd in geometric_grid(1e-4, 0.5, 12) {
            let sol = solve_annealed(&law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip).unwrap();
            assert!(sol.delta_star > prev);
            prev = sol.delta_star;
        }
    }

    #[test]
    fn crossover_brackets_and_ordering() {
        let law = heavy(1.75);
        let d1 = crossover_delta1(&law, 0.1).unwrap();
        let d2 = crossover_delta2(&law, 0.1).unwrap();
        assert!(d1 > 0.0 && d2 > d1, "d1 = {d1}, d2 = {d2}");
        // Δ₁ scales like β^{1/(2c−3)} (positive exponent), so it grows with β.
        let d1b = crossover_delta1(&law, 0.2).unwrap();
        assert!(d1b > d1, "Delta1({}) = {d1b} vs Delta1(0.1) = {d1}", 0.2);
    }

    #[test]
    fn scaling_exponents_guard() {
        let det = ExcursionLaw::build(LawKind::Deterministic { k: 1 }, 1000).unwrap();
        assert!(scaling_exponents(&det, &[0.01, 0.02, 0.05, 0.1]).is_err());
    }
}
