//! Monte Carlo aggregation and least-squares fitting.

/// Mean with standard error over independent replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub per_replica: Option<Vec<f64>>,
}

impl EstimateWithCI {
    pub fn from_samples(samples: &[f64], keep: bool) -> Self {
        let n = samples.len();
        assert!(n >= 1);
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n >= 2 {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            n_replicas: n,
            per_replica: keep.then(|| samples.to_vec()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n: usize,
}

/// Ordinary least squares y = a + b x with the usual slope standard error.
/// Requires at least 4 points so the residual variance keeps df >= 2.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, String> {
    let n = x.len();
    if n != y.len() {
        return Err("linear_fit: mismatched lengths".into());
    }
    if n < 4 {
        return Err(format!("linear_fit: need >= 4 points for df >= 2, got {n}"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err("linear_fit: degenerate x".into());
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let slope_se = (ss_res / (nf - 2.0) / sxx).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        n,
    })
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_pvalue(chi2: f64, df: f64) -> f64 {
    statrs::function::gamma::gamma_ur(df / 2.0, chi2 / 2.0)
}
