//! Renewal return masses u_n = P(X_n = 0) and the correlation length
//! M = min{n : δ_n ≤ δ*}.
//!
//! The defining recursion u_n = Σ_{m=1}^n K(m) u_{n−m} is quadratic if run
//! naively; beyond a few thousand steps we switch to divide-and-conquer with
//! FFT convolutions (O(n log² n)), block-limited so no single transform
//! exceeds ~2^21 points.

use crate::law::ExcursionLaw;
use rustfft::{num_complex::Complex, FftPlanner};

const NAIVE_LIMIT: usize = 3000;
const CDQ_BASE: usize = 256;
const BLOCK: usize = 1 << 19;

/// u_0..u_n for the renewal process driven by `law`.
pub fn return_mass(law: &ExcursionLaw, n: usize) -> Vec<f64> {
    let mut kernel = Vec::with_capacity(n + 1);
    kernel.push(0.0);
    for d in 1..=n {
        kernel.push(law.pmf_at(d as u64));
    }
    if n <= NAIVE_LIMIT {
        return naive_return_mass(&kernel, n);
    }
    let mut u = vec![0.0; n + 1];
    let mut acc = vec![0.0; n + 1];
    let mut ws = FftWorkspace::new();
    let total = n + 1;
    let blocks = total.div_ceil(BLOCK);
    for t in 0..blocks {
        let lo = t * BLOCK;
        let hi = ((t + 1) * BLOCK).min(total);
        for s in 0..t {
            let a0 = s * BLOCK;
            let a1 = ((s + 1) * BLOCK).min(total);
            conv_accumulate(&u[a0..a1], a0, &kernel, lo..hi, &mut acc, &mut ws);
        }
        cdq(&mut u, &mut acc, &kernel, lo, hi, &mut ws);
    }
    for (i, v) in u.iter_mut().enumerate() {
        debug_assert!(*v > -1e-9, "u[{i}] = {v} from FFT path");
        *v = v.clamp(0.0, 1.0);
    }
    u
}

fn naive_return_mass(kernel: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n + 1];
    u[0] = 1.0;
    for m in 1..=n {
        let mut s = 0.0;
        for j in 0..m {
            s += u[j] * kernel[m - j];
        }
        u[m] = s;
    }
    u
}

/// Solve u on [l, r): contributions from j < l must already be in `acc`.
fn cdq(u: &mut [f64], acc: &mut [f64], kernel: &[f64], l: usize, r: usize, ws: &mut FftWorkspace) {
    if r - l <= CDQ_BASE {
        for m in l..r {
            if m == 0 {
                u[0] = 1.0;
                continue;
            }
            let mut s = acc[m];
            for j in l..m {
                s += u[j] * kernel[m - j];
            }
            u[m] = s;
        }
        return;
    }
    let mid = (l + r) / 2;
    cdq(u, acc, kernel, l, mid, ws);
    let (left, _) = u.split_at(mid);
    conv_accumulate(&left[l..mid], l, kernel, mid..r, acc, ws);
    cdq(u, acc, kernel, mid, r, ws);
}

/// acc[m] += Σ_j src[j-src_off] · kernel[m-j] for m in targets, via FFT.
fn conv_accumulate(
    src: &[f64],
    src_off: usize,
    kernel: &[f64],
    targets: std::ops::Range<usize>,
    acc: &mut [f64],
    ws: &mut FftWorkspace,
) {
    if src.is_empty() || targets.is_empty() {
        return;
    }
    let d_min = targets.start - (src_off + src.len() - 1);
    let d_max = targets.end - 1 - src_off;
    debug_assert!(d_min >= 1);
    let kw = &kernel[d_min..=d_max.min(kernel.len() - 1)];
    let conv = ws.convolve(src, kw);
    // conv[i] corresponds to m = src_off + d_min + i
    let base = src_off + d_min;
    for m in targets {
        let i = m - base;
        if i < conv.len() {
            acc[m] += conv[i];
        }
    }
}

struct FftWorkspace {
    planner: FftPlanner<f64>,
}

impl FftWorkspace {
    fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    fn convolve(&mut self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let out_len = a.len() + b.len() - 1;
        let size = out_len.next_power_of_two();
        let fft = self.planner.plan_fft_forward(size);
        let ifft = self.planner.plan_fft_inverse(size);
        let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fa.resize(size, Complex::new(0.0, 0.0));
        let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fb.resize(size, Complex::new(0.0, 0.0));
        fft.process(&mut fa);
        fft.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= *y;
        }
        ifft.process(&mut fa);
        let scale = 1.0 / size as f64;
        fa.truncate(out_len);
        fa.iter().map(|z| z.re * scale).collect()
    }
}

/// δ_n = (1/n) Σ_{i≤n} u_i for n ≥ 1; index 0 is NaN.
pub fn prefix_contact_density(u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    out.push(f64::NAN);
    let mut s = 0.0;
    for (n, &v) in u.iter().enumerate().skip(1) {
        s += v;
        out.push(s / n as f64);
    }
    out
}

/// min{n : δ_n ≤ δ*} by doubling the renewal horizon, then an exact scan.
/// `None` when the search passes `cap` without crossing.
pub fn correlation_length(law: &ExcursionLaw, delta_star: f64, cap: u64) -> Option<u64> {
    assert!(delta_star > 0.0);
    let mut horizon = 1024usize.min(cap as usize).max(2);
    loop {
        let u = return_mass(law, horizon);
        let delta = prefix_contact_density(&u);
        if let Some(m) = delta.iter().enumerate().skip(1).find(|(_, &d)| d <= delta_star) {
            return Some(m.0 as u64);
        }
        if horizon >= cap as usize {
            return None;
        }
        horizon = (horizon * 2).min(cap as usize);
    }
}
