//! Exact finite-size partition functions for fixed disorder, by log-domain
//! renewal dynamic programming.
//!
//! The pinned partial sums obey
//!   log z(0) = 0,
//!   log z(n) = β(u+V_n) + logsumexp_{j<n}( log z(j) + log K(n−j) ),
//! and the full partition function mixes endpoints against the excursion tail:
//!   log Z = logsumexp_{j≤N}( log z(j) + log tail(N−j) ).
//! ⟨L_N⟩ rides along in shifted-ratio form r(n) = s(n)/z(n), r = 1 + Σ w_j r_j
//! with posterior gap weights w_j, so no second pass over the lattice is
//! needed. O(N²) by design; N is capped at 2^16.

use crate::annealed::PinningParams;
use crate::law::ExcursionLaw;
use crate::rng::{child_seed, GaussianSource, Xoshiro256pp};
use crate::stats::EstimateWithCI;
use rayon::prelude::*;

pub const MAX_DP_N: usize = 1 << 16;

/// One disorder realization {V_i}, regenerable bit-exactly from
/// (seed, replica_index) through the documented child-seed derivation.
#[derive(Clone, Debug)]
pub struct DisorderRealization {
    pub values: Vec<f64>,
    pub seed: u64,
    pub replica_index: u64,
}

impl DisorderRealization {
    pub fn gaussian(seed: u64, replica_index: u64, n: usize) -> Self {
        let mut g = GaussianSource::from_seed(child_seed(seed, replica_index));
        Self {
            values: (0..n).map(|_| g.next_gaussian()).collect(),
            seed,
            replica_index,
        }
    }

    /// Test hook: V ≡ 0 (the deterministic model at the same parameters).
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            seed: 0,
            replica_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct DpResult {
    pub log_z: f64,
    pub mean_contacts: f64,
    /// log z(0..=N), retained for posterior path sampling.
    pub log_z_pinned: Vec<f64>,
    pub n: usize,
}

/// Site weights β(u + V_i), i = 1..=N; index 0 unused.
fn site_weights(params: PinningParams, disorder: &DisorderRealization) -> Vec<f64> {
    let mut w = Vec::with_capacity(disorder.len() + 1);
    w.push(0.0);
    for &v in &disorder.values {
        w.push(params.beta * (params.u + v));
    }
    w
}

fn dp_core(law: &ExcursionLaw, w: &[f64]) -> DpResult {
    let n = w.len() - 1;
    assert!(n >= 1, "DP requires N >= 1");
    assert!(n <= MAX_DP_N, "N = {n} exceeds the DP cap {MAX_DP_N}");
    let mut logk = vec![f64::NEG_INFINITY; n + 1];
    for (d, lk) in logk.iter_mut().enumerate().skip(1) {
        *lk = law.log_pmf_at(d as u64);
    }
    let logtail: Vec<f64> = (0..=n).map(|m| law.log_tail_at(m as u64)).collect();

    let mut logz = vec![f64::NEG_INFINITY; n + 1];
    let mut ratio = vec![0.0; n + 1];
    logz[0] = 0.0;
    for m in 1..=n {
        let mut mx = f64::NEG_INFINITY;
        for j in 0..m {
            let t = logz[j] + logk[m - j];
            if t > mx {
                mx = t;
            }
        }
        if mx == f64::NEG_INFINITY {
            continue; // site m unreachable (e.g. off-lattice for Deterministic(k))
        }
        let mut s = 0.0;
        let mut sr = 0.0;
        for j in 0..m {
            let t = (logz[j] + logk[m - j] - mx).exp();
            s += t;
            sr += t * ratio[j];
        }
        logz[m] = w[m] + mx + s.ln();
        ratio[m] = 1.0 + sr / s;
    }

    let mut mx = f64::NEG_INFINITY;
    for j in 0..=n {
        let t = logz[j] + logtail[n - j];
        if t > mx {
            mx = t;
        }
    }
    debug_assert!(mx > f64::NEG_INFINITY, "no admissible trajectory");
    let mut s = 0.0;
    let mut sr = 0.0;
    for j in 0..=n {
        let t = (logz[j] + logtail[n - j] - mx).exp();
        s += t;
        sr += t * ratio[j];
    }
    let log_z = mx + s.ln();
    let mean_contacts = sr / s;
    debug_assert!((0.0..=n as f64 + 1e-9).contains(&mean_contacts));
    debug_assert!(log_z >= law.log_tail_at(n as u64) - 1e-12);
    DpResult {
        log_z,
        mean_contacts,
        log_z_pinned: logz,
        n,
    }
}

/// Quenched partition function and mean contact number for one realization.
pub fn dp_solve(law: &ExcursionLaw, params: PinningParams, disorder: &DisorderRealization) -> DpResult {
    dp_core(law, &site_weights(params, disorder))
}

pub fn dp_log_partition(law: &ExcursionLaw, params: PinningParams, disorder: &DisorderRealization) -> f64 {
    dp_solve(law, params, disorder).log_z
}

pub fn dp_mean_contacts(law: &ExcursionLaw, params: PinningParams, disorder: &DisorderRealization) -> f64 {
    dp_solve(law, params, disorder).mean_contacts
}

/// ⟨L_N⟩ by central finite differences of log Z in u — the independent route
/// against the in-pass accumulator.
pub fn dp_mean_contacts_fd(
    law: &ExcursionLaw,
    params: PinningParams,
    disorder: &DisorderRealization,
) -> f64 {
    let h = 1e-5f64.max(1e-3 * params.delta().abs());
    let up = PinningParams::from_u(params.beta, params.u + h);
    let dn = PinningParams::from_u(params.beta, params.u - h);
    let d = dp_log_partition(law, up, disorder) - dp_log_partition(law, dn, disorder);
    d / (2.0 * h * params.beta)
}

/// Deterministic model (V ≡ 0) at the given parameters.
pub fn deterministic_dp(law: &ExcursionLaw, params: PinningParams, n: usize) -> DpResult {
    dp_core(law, &vec![params.beta * params.u; n + 1])
}

/// Annealed model: deterministic with u shifted by β/2 (standard Gaussian).
pub fn annealed_dp(law: &ExcursionLaw, params: PinningParams, n: usize) -> DpResult {
    dp_core(law, &vec![params.beta * (params.u + params.beta / 2.0); n + 1])
}

/// log Z_{[0,m]} for every m = 0..=n of the homogeneous model with per-contact
/// weight `beta_u`. One z-pass serves all prefixes.
pub fn homogeneous_prefix_log_partitions(law: &ExcursionLaw, beta_u: f64, n: usize) -> Vec<f64> {
    let w = vec![beta_u; n + 1];
    let dp = dp_core(law, &w);
    let logz = &dp.log_z_pinned;
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let mut terms = Vec::with_capacity(m + 1);
        for j in 0..=m {
            terms.push(logz[j] + law.log_tail_at((m - j) as u64));
        }
        out.push(crate::numeric::logsumexp(&terms));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisorderMode {
    Gaussian,
    /// Test hook: V ≡ 0 for every replica.
    Zero,
}

#[derive(Clone, Debug)]
pub struct ReplicaRow {
    pub replica: u64,
    pub seed_child: u64,
    pub n: usize,
    pub log_z: f64,
    pub f_n: f64,
    pub mean_contacts: f64,
    pub contact: f64,
}

#[derive(Clone, Debug)]
pub struct QuenchedEnsemble {
    pub free_energy: EstimateWithCI,
    pub contact: EstimateWithCI,
    pub rows: Vec<ReplicaRow>,
}

/// Independent replicas with derived child seeds; the parallel map is
/// collected in replica order so aggregation is schedule-independent.
pub fn quenched_mc(
    law: &ExcursionLaw,
    params: PinningParams,
    n: usize,
    n_replicas: usize,
    seed: u64,
    mode: DisorderMode,
) -> QuenchedEnsemble {
    assert!(n_replicas >= 2, "need at least two replicas");
    let rows: Vec<ReplicaRow> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|i| {
            let disorder = match mode {
                DisorderMode::Gaussian => DisorderRealization::gaussian(seed, i, n),
                DisorderMode::Zero => DisorderRealization::zeros(n),
            };
            let dp = dp_solve(law, params, &disorder);
            ReplicaRow {
                replica: i,
                seed_child: match mode {
                    DisorderMode::Gaussian => child_seed(seed, i),
                    DisorderMode::Zero => 0,
                },
                n,
                log_z: dp.log_z,
                f_n: dp.log_z / n as f64,
                mean_contacts: dp.mean_contacts,
                contact: dp.mean_contacts / n as f64,
            }
        })
        .collect();
    let f: Vec<f64> = rows.iter().map(|r| r.f_n).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.contact).collect();
    QuenchedEnsemble {
        free_energy: EstimateWithCI::from_samples(&f, true),
        contact: EstimateWithCI::from_samples(&c, true),
        rows,
    }
}

/// Exact posterior sample of the return set, by backward decomposition over
/// the pinned partial sums.
pub fn sample_return_set(dp: &DpResult, law: &ExcursionLaw, rng: &mut Xoshiro256pp) -> Vec<u64> {
    let n = dp.n;
    let logz = &dp.log_z_pinned;
    let mut j = categorical_log(rng, &mut (0..=n).map(|j| logz[j] + law.log_tail_at((n - j) as u64)));
    let mut out = Vec::new();
    while j > 0 {
        out.push(j as u64);
        j = categorical_log(rng, &mut (0..j).map(|jp| logz[jp] + law.log_pmf_at((j - jp) as u64)));
    }
    out.reverse();
    out
}

fn categorical_log(rng: &mut Xoshiro256pp, weights: &mut dyn Iterator<Item = f64>) -> usize {
    let w: Vec<f64> = weights.collect();
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(mx > f64::NEG_INFINITY);
    let probs: Vec<f64> = w.iter().map(|&t| (t - mx).exp()).collect();
    let total: f64 = probs.iter().sum();
    let target = rng.next_f53() * total; // in (0, total]
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if acc >= target {
            return i;
        }
    }
    probs.len() - 1
}

/// Exhaustive 2^N enumeration over return subsets — the oracle the DP is
/// checked against. N ≤ 20.
#[derive(Clone, Debug)]
pub struct BruteForce {
    pub log_z: f64,
    pub mean_contacts: f64,
    /// Posterior probability of each return subset, indexed by bitmask
    /// (bit i−1 set ⟺ return at site i).
    pub subset_probs: Vec<f64>,
}

pub fn brute_force(law: &ExcursionLaw, params: PinningParams, disorder: &DisorderRealization) -> BruteForce {
    let n = disorder.len();
    assert!(n <= 20, "brute force is exponential; N = {n} too large");
    let mut weights = vec![0.0f64; 1usize << n];
    let mut z = 0.0f64;
    let mut weighted_count = 0.0f64;
    for mask in 0..(1usize << n) {
        let mut w = 1.0f64;
        let mut prev = 0usize;
        let mut count = 0usize;
        for i in 1..=n {
            if mask >> (i - 1) & 1 == 1 {
                w *= law.pmf_at((i - prev) as u64);
                w *= (params.beta * (params.u + disorder.values[i - 1])).exp();
                prev = i;
                count += 1;
            }
        }
        w *= law.tail_at((n - prev) as u64);
        weights[mask] = w;
        z += w;
        weighted_count += w * count as f64;
    }
    for w in &mut weights {
        *w /= z;
    }
    BruteForce {
        log_z: z.ln(),
        mean_contacts: weighted_count / z,
        subset_probs: weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawKind;
    use crate::sv::SlowlyVarying::Constant;

    fn heavy(c: f64) -> ExcursionLaw {
        ExcursionLaw::heavy(c, Constant(1.0), 0.0, 10_000).unwrap()
    }

    #[test]
    fn single_site_partition() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.7, 0.3);
        let disorder = DisorderRealization::gaussian(5, 0, 1);
        let dp = dp_solve(&law, params, &disorder);
        let expect = ((params.beta * (params.u + disorder.values[0])).exp() * law.pmf_at(1)
            + law.tail_at(1))
        .ln();
        assert!((dp.log_z - expect).abs() < 1e-12);
    }

    #[test]
    fn deterministic_law_is_a_single_trajectory() {
        let law = ExcursionLaw::build(LawKind::Deterministic { k: 1 }, 1000).unwrap();
        let params = PinningParams::from_u(0.5, -0.2);
        let disorder = DisorderRealization::gaussian(9, 3, 64);
        let dp = dp_solve(&law, params, &disorder);
        let expect: f64 = disorder
            .values
            .iter()
            .map(|v| params.beta * (params.u + v))
            .sum();
        assert!((dp.log_z - expect).abs() < 1e-10);
        assert!((dp.mean_contacts - 64.0).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_small_n() {
        let law = heavy(1.5);
        for seed in 0..8u64 {
            let params = PinningParams::from_u(0.4, 0.1 * (seed as f64 - 4.0) / 4.0);
            let disorder = DisorderRealization::gaussian(seed, 1, 12);
            let dp = dp_solve(&law, params, &disorder);
            let bf = brute_force(&law, params, &disorder);
            assert!(
                (dp.log_z - bf.log_z).abs() <= 1e-9 * bf.log_z.abs().max(1.0),
                "log Z mismatch at seed {seed}: {} vs {}",
                dp.log_z,
                bf.log_z
            );
            assert!(
                (dp.mean_contacts - bf.mean_contacts).abs() <= 1e-9 * (bf.mean_contacts.abs() + 1.0),
                "mean contacts mismatch at seed {seed}"
            );
        }
    }

    #[test]
    fn annealed_dp_is_shifted_deterministic() {
        let law = heavy(1.25);
        let params = PinningParams::from_u(0.6, -0.1);
        let n = 200;
        let a = annealed_dp(&law, params, n);
        let shifted = PinningParams::from_u(params.beta, params.u + params.beta / 2.0);
        let d = dp_solve(&law, shifted, &DisorderRealization::zeros(n));
        assert_eq!(a.log_z, d.log_z);
        assert_eq!(a.mean_contacts, d.mean_contacts);
    }

    #[test]
    fn log_partition_monotone_and_convex_in_u() {
        let law = heavy(1.75);
        let disorder = DisorderRealization::gaussian(3, 0, 96);
        let n = disorder.len() as f64;
        let us: Vec<f64> = (0..25).map(|i| -0.6 + 0.05 * i as f64).collect();
        let vals: Vec<f64> = us
            .iter()
            .map(|&u| dp_log_partition(&law, PinningParams::from_u(0.5, u), &disorder) / n)
            .collect();
        for i in 1..vals.len() {
            assert!(vals[i] >= vals[i - 1] - 1e-12, "not nondecreasing at {i}");
            if i >= 2 {
                assert!(
                    vals[i] - 2.0 * vals[i - 1] + vals[i - 2] >= -1e-8,
                    "not convex at {i}"
                );
            }
        }
    }

    #[test]
    fn accumulator_agrees_with_finite_difference() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.5, 0.05);
        let disorder = DisorderRealization::gaussian(17, 2, 256);
        let acc = dp_mean_contacts(&law, params, &disorder);
        let fd = dp_mean_contacts_fd(&law, params, &disorder);
        assert!(
            (acc - fd).abs() <= 1e-6 * disorder.len() as f64,
            "accumulator {acc} vs finite difference {fd}"
        );
    }

    #[test]
    fn strongly_repulsive_potential_empties_the_return_set() {
        let law = heavy(1.5);
        let disorder = DisorderRealization::gaussian(1, 0, 128);
        let m = dp_mean_contacts(&law, PinningParams::from_u(1.0, -40.0), &disorder);
        assert!(m < 1e-10, "mean contacts {m}");
    }

    #[test]
    fn zero_mode_collapses_to_deterministic() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.4, 0.1);
        let ens = quenched_mc(&law, params, 128, 8, 42, DisorderMode::Zero);
        assert_eq!(ens.free_energy.std_error, 0.0);
        let det = deterministic_dp(&law, params, 128);
        assert!((ens.free_energy.mean - det.log_z / 128.0).abs() < 1e-14);
    }

    #[test]
    fn jensen_annealing_bound() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.5, 0.02);
        let n = 512;
        let ens = quenched_mc(&law, params, n, 24, 7, DisorderMode::Gaussian);
        let ann = annealed_dp(&law, params, n).log_z / n as f64;
        assert!(
            ens.free_energy.mean <= ann + 3.0 * ens.free_energy.std_error,
            "quenched {} vs annealed {}",
            ens.free_energy.mean,
            ann
        );
    }

    #[test]
    fn replica_determinism() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.3, 0.1);
        let a = quenched_mc(&law, params, 64, 6, 99, DisorderMode::Gaussian);
        let b = quenched_mc(&law, params, 64, 6, 99, DisorderMode::Gaussian);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.log_z.to_bits(), y.log_z.to_bits());
        }
    }

    #[test]
    fn transient_tail_floor() {
        let law = ExcursionLaw::heavy(1.5, Constant(1.0), 0.3, 10_000).unwrap();
        let disorder = DisorderRealization::gaussian(2, 0, 200);
        let dp = dp_solve(&law, PinningParams::from_u(0.5, -1.0), &disorder);
        assert!(dp.log_z >= law.log_tail_at(200) - 1e-12);
        assert!(law.log_tail_at(200) >= 0.3f64.ln());
    }

    #[test]
    fn sampler_on_deterministic_law() {
        let law = ExcursionLaw::build(LawKind::Deterministic { k: 1 }, 1000).unwrap();
        let params = PinningParams::from_u(0.5, 0.0);
        let dp = deterministic_dp(&law, params, 10);
        let mut rng = Xoshiro256pp::from_seed(4);
        let set = sample_return_set(&dp, &law, &mut rng);
        assert_eq!(set, (1..=10u64).collect::<Vec<_>>());
    }

    #[test]
    fn subadditive_annealed_sequence() {
        // a_n = βΔ + log⟨e^{βΔ L_n}⟩ is subadditive: a_{n+k} ≤ a_n + a_k.
        let law = heavy(1.5);
        let bd = 0.3;
        let logz = homogeneous_prefix_log_partitions(&law, bd, 512);
        let a: Vec<f64> = logz.iter().map(|&v| bd + v).collect();
        for n in 1..=256 {
            for k in 1..=256 {
                assert!(
                    a[n + k] <= a[n] + a[k] + 1e-10,
                    "subadditivity violated at n={n}, k={k}"
                );
            }
        }
    }

    #[test]
    fn self_averaging_rate() {
        let law = heavy(1.5);
        let params = PinningParams::from_u(0.5, 0.1);
        let small = quenched_mc(&law, params, 512, 48, 21, DisorderMode::Gaussian);
        let large = quenched_mc(&law, params, 2048, 48, 22, DisorderMode::Gaussian);
        let sd_small = small.free_energy.std_error * (48f64).sqrt();
        let sd_large = large.free_energy.std_error * (48f64).sqrt();
        let shrink = sd_small / sd_large;
        assert!(
            (shrink - 2.0).abs() < 0.7,
            "std shrink from N to 4N was {shrink}, expected 2 ± 35%"
        );
    }
}
