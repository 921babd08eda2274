//! Error analysis for serially correlated Monte Carlo traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLevel {
    pub block_size: usize,
    pub n_blocks: usize,
    pub mean: f64,
    pub stderr: f64,
    pub stderr_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reblocked {
    pub mean: f64,
    pub stderr: f64,
    /// Level picked by the plateau criterion, or the last level if none
    /// qualified.
    pub level: usize,
    /// Whether the criterion was met; otherwise `stderr` is a lower estimate.
    pub converged: bool,
    pub levels: Vec<BlockLevel>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn halve(xs: &[f64]) -> Vec<f64> {
    xs.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// Optimal level: the smallest `k` with `(2^k)^3 > 2 n (σ_k / σ_0)^4`.
fn pick_level(levels: &[BlockLevel], n: usize) -> (usize, bool) {
    let se0 = levels[0].stderr;
    if se0 == 0.0 {
        return (0, true);
    }
    for (k, lvl) in levels.iter().enumerate() {
        let ratio = lvl.stderr / se0;
        if (lvl.block_size as f64).powi(3) > 2.0 * n as f64 * ratio.powi(4) {
            return (k, true);
        }
    }
    (levels.len() - 1, false)
}

/// Flyvbjerg–Petersen blocking analysis of the mean of `series`.
pub fn reblock(series: &[f64]) -> Result<Reblocked> {
    if series.len() < 2 {
        return Err(Error::Config(format!("need at least 2 samples to reblock, got {}", series.len())));
    }
    let n = series.len();
    let mut levels = Vec::new();
    let mut data = series.to_vec();
    let mut block_size = 1;
    while data.len() >= 2 {
        let m = mean(&data);
        let var = data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (data.len() - 1) as f64;
        let se = (var / data.len() as f64).sqrt();
        levels.push(BlockLevel {
            block_size,
            n_blocks: data.len(),
            mean: m,
            stderr: se,
            stderr_error: se / (2.0 * (data.len() - 1) as f64).sqrt(),
        });
        data = halve(&data);
        block_size *= 2;
    }
    let (level, converged) = pick_level(&levels, n);
    Ok(Reblocked {
        mean: mean(series),
        stderr: levels[level].stderr,
        level,
        converged,
        levels,
    })
}

/// Blocking analysis of the ratio of means `Σ num / Σ den`, propagating
/// the block covariance to first order.
pub fn reblock_ratio(num: &[f64], den: &[f64]) -> Result<Reblocked> {
    if num.len() != den.len() {
        return Err(Error::Config("numerator and denominator series differ in length".into()));
    }
    if num.len() < 2 {
        return Err(Error::Config(format!("need at least 2 samples to reblock, got {}", num.len())));
    }
    let n = num.len();
    let ratio = mean(num) / mean(den);
    let mut levels = Vec::new();
    let (mut a, mut b) = (num.to_vec(), den.to_vec());
    let mut block_size = 1;
    while a.len() >= 2 {
        let (ma, mb) = (mean(&a), mean(&b));
        let k = a.len() as f64;
        let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            vaa += (x - ma).powi(2);
            vbb += (y - mb).powi(2);
            vab += (x - ma) * (y - mb);
        }
        let norm = (k - 1.0) * k;
        let r = ma / mb;
        let var = r * r * (vaa / (ma * ma) + vbb / (mb * mb) - 2.0 * vab / (ma * mb)) / norm;
        let se = var.max(0.0).sqrt();
        levels.push(BlockLevel {
            block_size,
            n_blocks: a.len(),
            mean: r,
            stderr: se,
            stderr_error: se / (2.0 * (k - 1.0)).sqrt(),
        });
        a = halve(&a);
        b = halve(&b);
        block_size *= 2;
    }
    let (level, converged) = pick_level(&levels, n);
    Ok(Reblocked {
        mean: ratio,
        stderr: levels[level].stderr,
        level,
        converged,
        levels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Fit("a line fit with an error estimate needs at least 3 points".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: (rss / (n - 2.0) / sxx).sqrt(),
    })
}

/// Exponent of `y ∝ x^p` by OLS on `(ln x, ln y)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| v <= 0.0) {
        return Err(Error::Fit("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly)
}
