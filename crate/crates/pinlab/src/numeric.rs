//! Shared numerical kernels: stable log-sum-exp, compensated summation,
//! the generalized exponential integral, adaptive quadrature and bisection.

/// Log-sum-exp over a slice with the usual max-shift.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Kahan compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Gamma function on the real line (reflection for negative non-integers).
pub fn gamma_real(x: f64) -> f64 {
    if x > 0.0 {
        statrs::function::gamma::gamma(x)
    } else {
        // Γ(x) = π / (sin(πx) Γ(1−x))
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * statrs::function::gamma::gamma(1.0 - x))
    }
}

/// Generalized exponential integral E_ν(z) = ∫_1^∞ e^{−zt} t^{−ν} dt for z > 0
/// and real ν < 2, ν not an integer ≤ 1.
///
/// Power series below z = 1, modified Lentz continued fraction above.
pub fn exp_integral_e(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0, "exp_integral_e: z must be positive, got {z}");
    if z <= 1.0 {
        exp_integral_series(nu, z)
    } else {
        exp_integral_cf(nu, z)
    }
}

fn exp_integral_series(nu: f64, z: f64) -> f64 {
    // E_ν(z) = Γ(1−ν) z^{ν−1} − Σ_{k≥0} (−z)^k / (k! (1−ν+k))
    let lead = gamma_real(1.0 - nu) * z.powf(nu - 1.0);
    let mut sum = Kahan::default();
    let mut term = 1.0f64; // (−z)^k / k!
    for k in 0..500 {
        let contrib = term / (1.0 - nu + k as f64);
        sum.add(contrib);
        term *= -z / (k as f64 + 1.0);
        if term.abs() < 1e-18 * (1.0 + sum.value().abs()) {
            break;
        }
    }
    lead - sum.value()
}

fn exp_integral_cf(nu: f64, z: f64) -> f64 {
    // Lentz continued fraction: E_ν(z) = e^{−z} / (z + ν − 1·ν/(z + 2 − 2(ν+1)/(z + 4 − ...)))
    const FPMIN: f64 = 1e-300;
    let mut b = z + nu;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let a = -(i as f64) * (nu - 1.0 + i as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// 1/(ν−1) − E_ν(z): the deficit form ∫_1^∞ (1 − e^{−zt}) t^{−ν} dt for ν > 1,
/// computed without cancellation for small z.
pub fn exp_integral_deficit(nu: f64, z: f64) -> f64 {
    assert!(nu > 1.0);
    assert!(z >= 0.0);
    if z == 0.0 {
        return 0.0;
    }
    if z > 1.0 {
        return 1.0 / (nu - 1.0) - exp_integral_cf(nu, z);
    }
    // 1/(ν−1) − E_ν(z) = −Γ(1−ν) z^{ν−1} + Σ_{k≥1} (−1)^k z^k / (k! (k+1−ν))
    let lead = -gamma_real(1.0 - nu) * z.powf(nu - 1.0);
    let mut sum = Kahan::default();
    let mut term = 1.0f64; // z^k / k!
    for k in 1..500 {
        term *= z / k as f64;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        sum.add(sign * term / (k as f64 + 1.0 - nu));
        if term < 1e-18 * (1.0 + sum.value().abs()) {
            break;
        }
    }
    lead + sum.value()
}

/// Adaptive Simpson quadrature of a smooth integrand on [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol * (left + right).abs().max(1e-300) {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, tol, depth - 1)
    }
}

/// Geometric bisection of a decreasing function on a positive bracket:
/// finds x with f(x) = 0 given f(lo) > 0 > f(hi), to relative width `rel_tol`.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi > lo);
    for _ in 0..300 {
        if hi / lo - 1.0 < rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}
