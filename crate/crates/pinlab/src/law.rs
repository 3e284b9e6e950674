//! Heavy-tailed excursion-length laws, their moment series, sampling, and
//! exponential tilting.
//!
//! A law stores a pmf/tail table up to `n_table`; beyond the table every
//! quantity is evaluated from the defining formula, so tables are purely an
//! optimization and a law is immutable after construction. Series that reach
//! far past the table (moment generating function at small tilt, moments of
//! the tilted law) are summed directly to a cutoff and completed with an
//! Euler–Maclaurin tail whose integral is either a generalized exponential
//! integral (constant φ) or adaptive quadrature on a log grid (log-power φ).

use crate::numeric::{adaptive_simpson, exp_integral_deficit, exp_integral_e, Kahan};
use crate::rng::Xoshiro256pp;
use crate::sv::SlowlyVarying;

#[derive(Clone, Debug, PartialEq)]
pub enum LawKind {
    Heavy { c: f64, phi: SlowlyVarying, p_inf: f64 },
    Geometric { p: f64 },
    Deterministic { k: u64 },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LawError {
    #[error("tail exponent c = {0} is not normalizable: need c > 1 (defect mass cannot fix a divergent series)")]
    NonNormalizable(f64),
    #[error("defect mass p_inf = {0} outside [0, 1)")]
    BadDefect(f64),
    #[error("invalid law parameter: {0}")]
    BadParameter(String),
    #[error("operation requires a recurrent law (p_inf = 0); call recurrentize first")]
    NotRecurrent,
    #[error("divergent series: {0}")]
    Divergent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Excursion {
    Finite(u64),
    Infinite,
}

/// An excursion-length distribution K(n) = P(E₁ = n), n ≥ 1, with optional
/// defect mass P(E₁ = ∞) = p_inf.
#[derive(Clone, Debug)]
pub struct ExcursionLaw {
    kind: LawKind,
    n_table: usize,
    /// Σ_{n≥1} n^{−c} φ(n) for heavy laws; 1 for the closed-form test laws.
    norm: f64,
    pmf: Vec<f64>,      // K(n), n = 1..=n_table at index n-1
    log_pmf: Vec<f64>,  // log K(n), finite even where pmf underflows
    tail: Vec<f64>,     // tail[m] = P(E₁ > m), m = 0..=n_table
    log_tail: Vec<f64>,
    cdf: Vec<f64>,      // P(E₁ ≤ n) over the finite part, n = 1..=n_table
}

impl ExcursionLaw {
    pub fn build(kind: LawKind, n_table: usize) -> Result<Self, LawError> {
        if n_table < 1000 {
            return Err(LawError::BadParameter(format!(
                "n_table = {n_table} below the minimum of 1000"
            )));
        }
        match kind {
            LawKind::Heavy { c, phi, p_inf } => Self::build_heavy(c, phi, p_inf, n_table),
            LawKind::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(LawError::BadParameter(format!("geometric p = {p} outside (0,1)")));
                }
                Ok(Self::build_geometric(p, n_table))
            }
            LawKind::Deterministic { k } => {
                if k == 0 {
                    return Err(LawError::BadParameter("deterministic k must be >= 1".into()));
                }
                Ok(Self::build_deterministic(k, n_table))
            }
        }
    }

    pub fn heavy(c: f64, phi: SlowlyVarying, p_inf: f64, n_table: usize) -> Result<Self, LawError> {
        Self::build(LawKind::Heavy { c, phi, p_inf }, n_table)
    }

    fn build_heavy(c: f64, phi: SlowlyVarying, p_inf: f64, n_table: usize) -> Result<Self, LawError> {
        if !(0.0..1.0).contains(&p_inf) {
            return Err(LawError::BadDefect(p_inf));
        }
        if c <= 1.0 {
            return Err(LawError::NonNormalizable(c));
        }
        if phi.eval(1.0) <= 0.0 {
            return Err(LawError::BadParameter("phi must be positive".into()));
        }
        let mut partial = Kahan::default();
        let mut raw = Vec::with_capacity(n_table);
        for n in 1..=n_table {
            let t = raw_term(c, &phi, n as f64);
            raw.push(t);
            partial.add(t);
        }
        let tail_raw = tail_sum(c, &phi, 0.0, n_table as f64, Weight::Damp);
        let norm = partial.value() + tail_raw;
        let scale = (1.0 - p_inf) / norm;

        let mut pmf = Vec::with_capacity(n_table);
        let mut log_pmf = Vec::with_capacity(n_table);
        let mut cdf = Vec::with_capacity(n_table);
        let mut acc = Kahan::default();
        let log_scale = scale.ln();
        for (i, &t) in raw.iter().enumerate() {
            let k = t * scale;
            pmf.push(k);
            let n = (i + 1) as f64;
            log_pmf.push(log_scale - c * n.ln() + phi.eval(n).ln());
            acc.add(k);
            cdf.push(acc.value());
        }
        let mut tail = vec![0.0; n_table + 1];
        tail[n_table] = p_inf + scale * tail_raw;
        let mut back = Kahan::default();
        back.add(tail[n_table]);
        for m in (0..n_table).rev() {
            back.add(pmf[m]);
            tail[m] = back.value();
        }
        debug_assert!((tail[0] - 1.0).abs() < 1e-12, "tail(0) = {}", tail[0]);
        let log_tail = tail.iter().map(|&t| t.ln()).collect();
        Ok(Self {
            kind: LawKind::Heavy { c, phi, p_inf },
            n_table,
            norm,
            pmf,
            log_pmf,
            tail,
            log_tail,
            cdf,
        })
    }

    fn build_geometric(p: f64, n_table: usize) -> Self {
        let lq = (-p).ln_1p(); // ln(1-p)
        let lp = p.ln();
        let mut pmf = Vec::with_capacity(n_table);
        let mut log_pmf = Vec::with_capacity(n_table);
        let mut cdf = Vec::with_capacity(n_table);
        let mut tail = Vec::with_capacity(n_table + 1);
        tail.push(1.0);
        let mut log_tail = Vec::with_capacity(n_table + 1);
        log_tail.push(0.0);
        for n in 1..=n_table {
            let lg = lp + (n as f64 - 1.0) * lq;
            log_pmf.push(lg);
            pmf.push(lg.exp());
            tail.push((n as f64 * lq).exp());
            log_tail.push(n as f64 * lq);
            cdf.push(1.0 - (n as f64 * lq).exp());
        }
        Self {
            kind: LawKind::Geometric { p },
            n_table,
            norm: 1.0,
            pmf,
            log_pmf,
            tail,
            log_tail,
            cdf,
        }
    }

    fn build_deterministic(k: u64, n_table: usize) -> Self {
        let mut pmf = vec![0.0; n_table];
        let mut log_pmf = vec![f64::NEG_INFINITY; n_table];
        let mut cdf = vec![0.0; n_table];
        let mut tail = vec![0.0; n_table + 1];
        let mut log_tail = vec![f64::NEG_INFINITY; n_table + 1];
        for m in 0..n_table + 1 {
            let t = if (m as u64) < k { 1.0 } else { 0.0 };
            tail[m] = t;
            log_tail[m] = if t > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if (k as usize) <= n_table {
            pmf[k as usize - 1] = 1.0;
            log_pmf[k as usize - 1] = 0.0;
        }
        for n in 1..=n_table {
            cdf[n - 1] = if n as u64 >= k { 1.0 } else { 0.0 };
        }
        Self {
            kind: LawKind::Deterministic { k },
            n_table,
            norm: 1.0,
            pmf,
            log_pmf,
            tail,
            log_tail,
            cdf,
        }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn n_table(&self) -> usize {
        self.n_table
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn p_inf(&self) -> f64 {
        match self.kind {
            LawKind::Heavy { p_inf, .. } => p_inf,
            _ => 0.0,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        self.p_inf() == 0.0
    }

    /// Tail exponent for heavy laws.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self.kind {
            LawKind::Heavy { c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn phi(&self) -> Option<SlowlyVarying> {
        match self.kind {
            LawKind::Heavy { phi, .. } => Some(phi),
            _ => None,
        }
    }

    /// Whether ⟨E₁⟩ is finite (conditioned on being finite, for transient laws).
    pub fn finite_mean(&self) -> Option<f64> {
        match self.kind {
            LawKind::Heavy { c, .. } => {
                if c > 2.0 {
                    Some(self.tilted_moment(0.0, 1).expect("c > 2 has finite mean") / (1.0 - self.p_inf()))
                } else {
                    None
                }
            }
            LawKind::Geometric { p } => Some(1.0 / p),
            LawKind::Deterministic { k } => Some(k as f64),
        }
    }

    pub fn min_support(&self) -> u64 {
        match self.kind {
            LawKind::Deterministic { k } => k,
            _ => 1,
        }
    }

    /// K(n); exact beyond the table for heavy laws.
    pub fn pmf_at(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        if n as usize <= self.n_table {
            return self.pmf[n as usize - 1];
        }
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } => {
                (1.0 - p_inf) / self.norm * raw_term(c, &phi, n as f64)
            }
            LawKind::Geometric { p } => {
                (p.ln() + (n as f64 - 1.0) * (-p).ln_1p()).exp()
            }
            LawKind::Deterministic { k } => {
                if n == k {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn log_pmf_at(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        if n as usize <= self.n_table {
            return self.log_pmf[n as usize - 1];
        }
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } => {
                ((1.0 - p_inf) / self.norm).ln() - c * (n as f64).ln() + phi.eval(n as f64).ln()
            }
            LawKind::Geometric { p } => p.ln() + (n as f64 - 1.0) * (-p).ln_1p(),
            LawKind::Deterministic { k } => {
                if n == k {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// P(E₁ > m), including the defect mass.
    pub fn tail_at(&self, m: u64) -> f64 {
        if m as usize <= self.n_table {
            return self.tail[m as usize];
        }
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } => {
                p_inf + (1.0 - p_inf) / self.norm * tail_sum(c, &phi, 0.0, m as f64, Weight::Damp)
            }
            LawKind::Geometric { p } => (m as f64 * (-p).ln_1p()).exp(),
            LawKind::Deterministic { k } => {
                if m < k {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn log_tail_at(&self, m: u64) -> f64 {
        if m as usize <= self.n_table {
            return self.log_tail[m as usize];
        }
        self.tail_at(m).ln()
    }

    /// M_E(−α) = Σ_n e^{−αn} K(n) (the defect contributes nothing for α > 0).
    pub fn mgf(&self, alpha: f64) -> f64 {
        assert!(alpha >= 0.0, "mgf requires alpha >= 0");
        match self.kind {
            LawKind::Heavy { p_inf, .. } => {
                let d = self.mgf_deficit(alpha);
                if d < 0.5 {
                    // complement route: exact absolute accuracy near alpha = 0
                    (1.0 - p_inf) - d
                } else {
                    // direct series keeps relative accuracy once M_E is small
                    self.tilted_moment(alpha, 0).expect("order 0 always converges")
                }
            }
            LawKind::Geometric { p } => {
                let w = (1.0 - p) * (-alpha).exp();
                p * (-alpha).exp() / (1.0 - w)
            }
            LawKind::Deterministic { k } => (-alpha * k as f64).exp(),
        }
    }

    /// Σ_n (1 − e^{−αn}) K(n), the cancellation-free complement of the mgf.
    pub fn mgf_deficit(&self, alpha: f64) -> f64 {
        assert!(alpha >= 0.0);
        if alpha == 0.0 {
            return 0.0;
        }
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } => {
                let n_dir = self.direct_cutoff(alpha);
                let mut acc = Kahan::default();
                for n in 1..=n_dir {
                    acc.add(-(-alpha * n as f64).exp_m1() * self.pmf_at(n));
                }
                let tail = tail_sum(c, &phi, alpha, n_dir as f64, Weight::Deficit);
                acc.value() + (1.0 - p_inf) / self.norm * tail
            }
            _ => self.mgf(0.0) - self.mgf(alpha),
        }
    }

    /// log M_E(−α), stable near α = 0 for recurrent laws.
    pub fn log_mgf(&self, alpha: f64) -> f64 {
        match self.kind {
            LawKind::Heavy { p_inf, .. } => {
                let d = self.mgf_deficit(alpha);
                if p_inf + d < 0.5 {
                    (-(p_inf + d)).ln_1p()
                } else {
                    self.tilted_moment(alpha, 0)
                        .expect("order 0 always converges")
                        .ln()
                }
            }
            LawKind::Geometric { p } => {
                let w = (1.0 - p) * (-alpha).exp();
                p.ln() - alpha - (-w).ln_1p()
            }
            LawKind::Deterministic { k } => -alpha * k as f64,
        }
    }

    /// Σ_n n^order e^{−αn} K(n) for order 0, 1, 2. Divergent combinations
    /// (α = 0 with an infinite moment) are errors.
    pub fn tilted_moment(&self, alpha: f64, order: u8) -> Result<f64, LawError> {
        Ok(self.tilted_moments(alpha, order)?[order as usize])
    }

    /// Moments of orders 0..=max_order in one pass over the series.
    pub fn tilted_moments(&self, alpha: f64, max_order: u8) -> Result<[f64; 3], LawError> {
        assert!(max_order <= 2);
        assert!(alpha >= 0.0);
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } => {
                if alpha == 0.0 && c - max_order as f64 <= 1.0 {
                    return Err(LawError::Divergent(format!(
                        "moment of order {max_order} diverges at alpha = 0 for c = {c}"
                    )));
                }
                let n_dir = self.direct_cutoff(alpha.max(1e-300));
                let mut acc = [Kahan::default(); 3];
                for n in 1..=n_dir {
                    let nf = n as f64;
                    let base = (-alpha * nf).exp() * self.pmf_at(n);
                    acc[0].add(base);
                    if max_order >= 1 {
                        acc[1].add(nf * base);
                        if max_order >= 2 {
                            acc[2].add(nf * nf * base);
                        }
                    }
                }
                let scale = (1.0 - p_inf) / self.norm;
                let mut out = [0.0; 3];
                for (k, slot) in out.iter_mut().enumerate().take(max_order as usize + 1) {
                    let tail = tail_sum(c - k as f64, &phi, alpha, n_dir as f64, Weight::Damp);
                    *slot = acc[k].value() + scale * tail;
                }
                Ok(out)
            }
            LawKind::Geometric { p } => {
                let m = self.mgf(alpha);
                let w = (1.0 - p) * (-alpha).exp();
                Ok([m, m / (1.0 - w), m * (1.0 + w) / ((1.0 - w) * (1.0 - w))])
            }
            LawKind::Deterministic { k } => {
                let e = (-alpha * k as f64).exp();
                Ok([e, k as f64 * e, (k as f64) * (k as f64) * e])
            }
        }
    }

    /// Direct-summation cutoff: either the remainder is e^{−80}-suppressed
    /// relative to the leading term (large tilt, where tilted variances are
    /// themselves exponentially small structure), or the Euler–Maclaurin tail
    /// takes over at 20k, where its corrections sit below 1e-12 relative.
    fn direct_cutoff(&self, alpha: f64) -> u64 {
        ((80.0 / alpha + 2.0).ceil().min(4e18) as u64).min(20_000)
    }

    /// (log M_E)' (order 1) or (log M_E)'' (order 2) evaluated at −α.
    /// Order 1 is the mean of the tilted law, order 2 its variance.
    pub fn log_mgf_deriv(&self, alpha: f64, order: u8) -> Result<f64, LawError> {
        assert!(order == 1 || order == 2);
        if alpha <= 0.0 {
            if self.finite_mean().is_none() {
                return Err(LawError::Divergent(
                    "log_mgf_deriv at alpha = 0 for an infinite-mean law".into(),
                ));
            }
            if self.p_inf() > 0.0 {
                return Err(LawError::NotRecurrent);
            }
        }
        let m = self.tilted_moments(alpha, order)?;
        if order == 1 {
            Ok(m[1] / m[0])
        } else {
            Ok(m[2] / m[0] - (m[1] / m[0]) * (m[1] / m[0]))
        }
    }

    /// Inversion sampling: exact against the cdf table; past the table a
    /// documented Pareto approximation n_table·w^{−1/(c−1)} (heavy laws) or
    /// the closed-form inverse (geometric).
    pub fn sample(&self, rng: &mut Xoshiro256pp) -> Excursion {
        match self.kind {
            LawKind::Deterministic { k } => Excursion::Finite(k),
            LawKind::Geometric { p } => {
                let u = rng.next_f53();
                let n = (u.ln() / (-p).ln_1p()).ceil().max(1.0);
                Excursion::Finite(n as u64)
            }
            LawKind::Heavy { c, p_inf, .. } => {
                let u = rng.next_f53();
                let cdf_last = self.cdf[self.n_table - 1];
                if u <= cdf_last {
                    let idx = self.cdf.partition_point(|&x| x < u);
                    Excursion::Finite(idx as u64 + 1)
                } else if u > 1.0 - p_inf {
                    Excursion::Infinite
                } else {
                    let w = (u - cdf_last) / ((1.0 - p_inf) - cdf_last);
                    let n = (self.n_table as f64 * w.powf(-1.0 / (c - 1.0))).ceil();
                    let n = if n.is_finite() { n as u64 } else { u64::MAX };
                    Excursion::Finite(n.max(self.n_table as u64 + 1))
                }
            }
        }
    }

    /// Condition on E₁ < ∞. Returns the recurrent law and whether the input
    /// was actually transient (false means the call was an identity).
    pub fn recurrentize(&self) -> Result<(ExcursionLaw, bool), LawError> {
        match self.kind {
            LawKind::Heavy { c, phi, p_inf } if p_inf > 0.0 => {
                let law = Self::build_heavy(c, phi, 0.0, self.n_table)?;
                Ok((law, true))
            }
            _ => Ok((self.clone(), false)),
        }
    }

    /// Deterministic-model critical potential u_c^d(β) = −β⁻¹ log P(E₁ < ∞);
    /// zero for recurrent laws.
    pub fn deterministic_critical_u(&self, beta: f64) -> f64 {
        assert!(beta > 0.0);
        -(-self.p_inf()).ln_1p() / beta
    }
}

/// Q-tilted law: pmf_Q(n) = e^{−αn} K(n) / M_E(−α).
pub struct TiltedLaw<'a> {
    base: &'a ExcursionLaw,
    alpha: f64,
    mgf_value: f64,
}

impl<'a> TiltedLaw<'a> {
    pub fn new(base: &'a ExcursionLaw, alpha: f64) -> Result<Self, LawError> {
        if !base.is_recurrent() {
            return Err(LawError::NotRecurrent);
        }
        if alpha <= 0.0 {
            return Err(LawError::BadParameter(format!("tilt alpha = {alpha} must be > 0")));
        }
        let mgf_value = base.mgf(alpha);
        Ok(Self { base, alpha, mgf_value })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pmf_at(&self, n: u64) -> f64 {
        (-self.alpha * n as f64).exp() * self.base.pmf_at(n) / self.mgf_value
    }

    pub fn mean(&self) -> f64 {
        self.base
            .log_mgf_deriv(self.alpha, 1)
            .expect("tilted mean always finite for alpha > 0")
    }

    pub fn var(&self) -> f64 {
        self.base
            .log_mgf_deriv(self.alpha, 2)
            .expect("tilted variance always finite for alpha > 0")
    }

    /// Rejection sampling against the base law with acceptance e^{−αn};
    /// exact relative to the base sampler.
    pub fn sample(&self, rng: &mut Xoshiro256pp) -> u64 {
        loop {
            if let Excursion::Finite(n) = self.base.sample(rng) {
                let accept = (-self.alpha * n as f64).exp();
                if rng.next_f53() <= accept {
                    return n;
                }
            }
        }
    }
}

fn raw_term(c: f64, phi: &SlowlyVarying, n: f64) -> f64 {
    n.powf(-c) * phi.eval(n)
}

#[derive(Clone, Copy, PartialEq)]
enum Weight {
    /// e^{−αx} (α = 0 gives the plain power-law tail)
    Damp,
    /// 1 − e^{−αx}
    Deficit,
}

/// Σ_{n > n0} w(n) n^{−ce} φ(n) by Euler–Maclaurin from the exact integral:
/// Σ = ∫_{n0}^∞ g − g(n0)/2 − g'(n0)/12 (+ g'''(n0)/720 for constant φ).
fn tail_sum(ce: f64, phi: &SlowlyVarying, alpha: f64, n0: f64, weight: Weight) -> f64 {
    debug_assert!(alpha >= 0.0);
    if weight == Weight::Damp && alpha > 0.0 && alpha * n0 > 745.0 {
        return 0.0; // e^{−αn} underflows for every remaining term
    }
    if weight == Weight::Damp && alpha == 0.0 {
        assert!(ce > 1.0, "plain power tail diverges for exponent {ce}");
    }
    let integral = tail_integral(ce, phi, alpha, n0, weight);
    let g0 = weighted_term(ce, phi, alpha, n0, weight);
    let g1 = weighted_term_deriv(ce, phi, alpha, n0, weight);
    let mut s = integral - 0.5 * g0 - g1 / 12.0;
    if phi.is_constant() {
        s += weighted_term_third_deriv_const(ce, phi, alpha, n0, weight) / 720.0;
    }
    s
}

fn weighted_term(ce: f64, phi: &SlowlyVarying, alpha: f64, x: f64, weight: Weight) -> f64 {
    let base = x.powf(-ce) * phi.eval(x);
    match weight {
        Weight::Damp => base * (-alpha * x).exp(),
        Weight::Deficit => base * -(-alpha * x).exp_m1(),
    }
}

fn weighted_term_deriv(ce: f64, phi: &SlowlyVarying, alpha: f64, x: f64, weight: Weight) -> f64 {
    let shape = -ce / x + phi.log_deriv(x);
    match weight {
        Weight::Damp => weighted_term(ce, phi, alpha, x, Weight::Damp) * (shape - alpha),
        Weight::Deficit => {
            weighted_term(ce, phi, alpha, x, Weight::Deficit) * shape
                + x.powf(-ce) * phi.eval(x) * alpha * (-alpha * x).exp()
        }
    }
}

/// Third derivative of w(x)·a·x^{−ce} for constant φ ≡ a.
fn weighted_term_third_deriv_const(ce: f64, phi: &SlowlyVarying, alpha: f64, x: f64, weight: Weight) -> f64 {
    let a = phi.eval(x);
    let p0 = x.powf(-ce);
    let p1 = -ce * x.powf(-ce - 1.0);
    let p2 = ce * (ce + 1.0) * x.powf(-ce - 2.0);
    let p3 = -ce * (ce + 1.0) * (ce + 2.0) * x.powf(-ce - 3.0);
    let e = (-alpha * x).exp();
    // (p·e^{−αx})''' = e^{−αx}(p³ − 3αp² + 3α²p¹ − α³p⁰)
    let damp3 = e * (p3 - 3.0 * alpha * p2 + 3.0 * alpha * alpha * p1 - alpha.powi(3) * p0);
    a * match weight {
        Weight::Damp => damp3,
        Weight::Deficit => p3 - damp3,
    }
}

/// ∫_{n0}^∞ w(x) x^{−ce} φ(x) dx.
fn tail_integral(ce: f64, phi: &SlowlyVarying, alpha: f64, n0: f64, weight: Weight) -> f64 {
    if let SlowlyVarying::Constant(a) = phi {
        return a * match weight {
            Weight::Damp => {
                if alpha == 0.0 {
                    n0.powf(1.0 - ce) / (ce - 1.0)
                } else {
                    // ∫_{n0}^∞ e^{−αx} x^{−ce} dx = n0^{1−ce} E_ce(α n0)
                    n0.powf(1.0 - ce) * exp_integral_e(ce, alpha * n0)
                }
            }
            Weight::Deficit => n0.powf(1.0 - ce) * exp_integral_deficit(ce, alpha * n0),
        };
    }
    // log-power φ: panels on t = ln(x/n0), adaptive Simpson per panel
    let h = |t: f64| {
        let x = n0 * t.exp();
        x * weighted_term(ce, phi, alpha, x, weight)
    };
    // e^{−αx} underflows past this point; only the damped integrand vanishes there
    let t_cap = if weight == Weight::Damp && alpha > 0.0 {
        ((750.0 / (alpha * n0)).ln() + 1.0).max(1.0)
    } else {
        f64::INFINITY
    };
    let mut acc = 0.0;
    let mut t = 0.0;
    let mut small_streak = 0;
    while t < t_cap && t < 4000.0 {
        let t_next = (t + 1.0).min(t_cap);
        let panel = adaptive_simpson(&h, t, t_next, 1e-13);
        acc += panel;
        if weight == Weight::Deficit || alpha == 0.0 {
            if panel.abs() < 1e-17 * acc.abs() {
                small_streak += 1;
                if small_streak >= 2 {
                    break;
                }
            } else {
                small_streak = 0;
            }
        }
        t = t_next;
    }
    acc
}
