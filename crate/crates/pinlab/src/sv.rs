//! Slowly varying modulations of the power-law excursion tail, and the
//! logarithmic sum φ̃(x) = Σ_{n≤x} n⁻¹ φ(n)⁻² with its large-x continuation.

use crate::numeric::{adaptive_simpson, Kahan};

/// φ(n): either a positive constant or (log(n+e))^a.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlowlyVarying {
    Constant(f64),
    LogPower(f64),
}

impl SlowlyVarying {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant(a) => a,
            SlowlyVarying::LogPower(a) => (x + std::f64::consts::E).ln().powf(a),
        }
    }

    /// φ'(x)/φ(x).
    pub fn log_deriv(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant(_) => 0.0,
            SlowlyVarying::LogPower(a) => {
                let xe = x + std::f64::consts::E;
                a / (xe * xe.ln())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SlowlyVarying::Constant(_))
    }

    /// Whether Σ n⁻¹ φ(n)⁻² diverges (φ̃ unbounded).
    pub fn tilde_diverges(&self) -> bool {
        match *self {
            SlowlyVarying::Constant(_) => true,
            SlowlyVarying::LogPower(a) => 2.0 * a <= 1.0,
        }
    }
}

/// Exact partial sum φ̃(x) = Σ_{n≤x} n⁻¹ φ(n)⁻², x ≥ 1.
pub fn tilde_phi(phi: &SlowlyVarying, x: f64) -> f64 {
    assert!(x >= 1.0, "tilde_phi requires x >= 1");
    assert!(x <= 2e8, "tilde_phi: exact partial sum capped at 2e8 terms; use TildePhi for larger x");
    let mut acc = Kahan::default();
    let mut n = 1u64;
    while (n as f64) <= x {
        let nf = n as f64;
        let p = phi.eval(nf);
        acc.add(1.0 / (nf * p * p));
        n += 1;
    }
    acc.value()
}

const EXACT_PREFIX: u64 = 1_000_000;

/// φ̃ with a smooth Euler–Maclaurin continuation beyond 10⁶, usable for the
/// astronomically large arguments that appear in the c = 3/2 scale, plus a
/// monotone inverse. Between integers below the prefix the partial sum is
/// interpolated linearly so the inverse is well defined.
pub struct TildePhi {
    phi: SlowlyVarying,
    prefix_sums_small: Vec<f64>, // exact sums for n <= 4096, cheap direct eval below
    at_prefix: f64,              // exact sum at EXACT_PREFIX
}

impl TildePhi {
    pub fn new(phi: SlowlyVarying) -> Self {
        let mut acc = Kahan::default();
        let mut small = Vec::with_capacity(4097);
        small.push(0.0);
        for n in 1..=EXACT_PREFIX {
            let nf = n as f64;
            let p = phi.eval(nf);
            acc.add(1.0 / (nf * p * p));
            if n <= 4096 {
                small.push(acc.value());
            }
        }
        Self {
            phi,
            prefix_sums_small: small,
            at_prefix: acc.value(),
        }
    }

    fn term(&self, x: f64) -> f64 {
        let p = self.phi.eval(x);
        1.0 / (x * p * p)
    }

    fn term_deriv(&self, x: f64) -> f64 {
        // g(x) = x⁻¹ φ(x)⁻²  =>  g' = −g (1/x + 2 φ'/φ)
        -self.term(x) * (1.0 / x + 2.0 * self.phi.log_deriv(x))
    }

    /// ∫_a^b x⁻¹ φ(x)⁻² dx on a log grid.
    fn integral(&self, a: f64, b: f64) -> f64 {
        match self.phi {
            SlowlyVarying::Constant(c) => (b / a).ln() / (c * c),
            SlowlyVarying::LogPower(_) => {
                let f = |w: f64| {
                    let p = self.phi.eval(w.exp());
                    1.0 / (p * p)
                };
                adaptive_simpson(&f, a.ln(), b.ln(), 1e-12)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!(x >= 1.0);
        let fl = x.floor();
        if (fl as u64) < self.prefix_sums_small.len() as u64 {
            let i = fl as usize;
            let base = self.prefix_sums_small[i];
            return base + (x - fl) * self.term(fl + 1.0);
        }
        if x <= EXACT_PREFIX as f64 {
            // exact partial sum; linear interpolation between integers
            let s = tilde_phi(&self.phi, fl);
            return s + (x - fl) * self.term(fl + 1.0);
        }
        let a = EXACT_PREFIX as f64;
        // Σ_{n=a+1}^{x} g(n) ≈ ∫_a^x g + (g(x) − g(a))/2 + (g'(x) − g'(a))/12
        self.at_prefix
            + self.integral(a, x)
            + 0.5 * (self.term(x) - self.term(a))
            + (self.term_deriv(x) - self.term_deriv(a)) / 12.0
    }

    /// Smallest x with φ̃(x) ≥ y, by geometric bisection. Errors if φ̃ is
    /// bounded and never reaches y.
    pub fn inverse(&self, y: f64) -> Result<f64, String> {
        assert!(y > 0.0);
        let mut hi = 2.0f64;
        let mut lo = 1.0f64;
        let cap = 1e290;
        while self.eval(hi) < y {
            lo = hi;
            hi *= 4.0;
            if hi > cap {
                return Err(format!(
                    "tilde_phi appears bounded below target {y} (reached {:.3e} at x = {cap:.1e})",
                    self.eval(cap)
                ));
            }
        }
        let f = |x: f64| y - self.eval(x); // decreasing in x
        Ok(crate::numeric::bisect_decreasing(&f, lo, hi, 1e-12))
    }
}
