//! Independent statistical oracles shared by the integration tests.
#![allow(dead_code)]

/// Hurst estimate from the aggregated-variance (variance-time) method.
///
/// Block sizes are powers of two from `min_block` while at least
/// `min_blocks` blocks remain; the slope of log variance against log block
/// size is `2H - 2`.
pub fn aggregated_variance_hurst(series: &[f64], min_block: usize, min_blocks: usize) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut m = min_block;
    while series.len() / m >= min_blocks {
        let means: Vec<f64> = series.chunks_exact(m).map(|c| c.iter().sum::<f64>() / m as f64).collect();
        let k = means.len() as f64;
        let mu = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (k - 1.0);
        xs.push((m as f64).ln());
        ys.push(var.ln());
        m *= 2;
    }
    assert!(xs.len() >= 3, "series too short for the requested block sizes");
    1.0 + slope(&xs, &ys) / 2.0
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One-sample Kolmogorov-Smirnov statistic against Exp(rate).
pub fn ks_exponential(samples: &[f64], rate: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-rate * x).exp();
            let lo = cdf - i as f64 / n;
            let hi = (i + 1) as f64 / n - cdf;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1 % level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Coefficient of variation.
pub fn cv(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / mu
}
