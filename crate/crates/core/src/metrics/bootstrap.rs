use rand::Rng;

use super::MetricError;

fn resample<R: Rng + ?Sized>(samples: &[f64], buf: &mut Vec<f64>, rng: &mut R) {
    buf.clear();
    buf.extend((0..samples.len()).map(|_| samples[rng.gen_range(0..samples.len())]));
}

fn percentile_interval(mut stats: Vec<f64>, level: f64) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    let b = stats.len();
    let alpha = 1.0 - level;
    let lo = ((alpha / 2.0) * b as f64).floor() as usize;
    let hi = (((1.0 - alpha / 2.0) * b as f64).ceil() as usize).clamp(1, b) - 1;
    (stats[lo.min(b - 1)], stats[hi])
}

/// Percentile bootstrap interval for `statistic` over `samples`.
pub fn bootstrap_ci<R, F>(
    samples: &[f64],
    statistic: F,
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64), MetricError>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() || resamples == 0 {
        return Err(MetricError::EmptySample);
    }
    let mut buf = Vec::with_capacity(samples.len());
    let stats = (0..resamples)
        .map(|_| {
            resample(samples, &mut buf, rng);
            statistic(&buf)
        })
        .collect();
    Ok(percentile_interval(stats, level))
}

/// Percentile bootstrap for a statistic of two populations, each resampled
/// independently.
pub fn bootstrap_ci_paired<R, F>(
    x: &[f64],
    y: &[f64],
    statistic: F,
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64), MetricError>
where
    R: Rng + ?Sized,
    F: Fn(&[f64], &[f64]) -> f64,
{
    if x.is_empty() || y.is_empty() || resamples == 0 {
        return Err(MetricError::EmptySample);
    }
    let mut bx = Vec::with_capacity(x.len());
    let mut by = Vec::with_capacity(y.len());
    let stats = (0..resamples)
        .map(|_| {
            resample(x, &mut bx, rng);
            resample(y, &mut by, rng);
            statistic(&bx, &by)
        })
        .collect();
    Ok(percentile_interval(stats, level))
}

pub fn mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}
