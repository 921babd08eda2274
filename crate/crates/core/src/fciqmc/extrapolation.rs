//! Removal of the population-control bias by fitting `y = a + b x^c` with
//! `x = 1 / N_w` and reading off the intercept `a`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub population: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_stderr: f64,
    pub chi2: f64,
}

const C_MIN: f64 = 0.05;
const C_MAX: f64 = 3.0;
const GRID: usize = 240;

struct Prepared {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

/// Weighted least squares for `(a, b)` at fixed `c`; returns `(a, b, χ²)`.
fn linear_at(p: &Prepared, c: f64) -> (f64, f64, f64) {
    let mut m = Matrix2::zeros();
    let mut r = Vector2::zeros();
    for ((&x, &y), &w) in p.x.iter().zip(&p.y).zip(&p.w) {
        let f = x.powf(c);
        m += Matrix2::new(w, w * f, w * f, w * f * f);
        r += Vector2::new(w * y, w * f * y);
    }
    let sol = match m.try_inverse() {
        Some(inv) if m.determinant().abs() > 1e-14 * m[(0, 0)] * m[(1, 1)] => inv * r,
        _ => Vector2::new(r[0] / m[(0, 0)], 0.0),
    };
    let chi2 = p
        .x
        .iter()
        .zip(&p.y)
        .zip(&p.w)
        .map(|((&x, &y), &w)| w * (y - sol[0] - sol[1] * x.powf(c)).powi(2))
        .sum();
    (sol[0], sol[1], chi2)
}

pub fn extrapolate_population_bias(points: &[BiasPoint]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 populations, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.population > 0.0) || !p.value.is_finite() || !(p.stderr >= 0.0)) {
        return Err(Error::Fit("populations must be positive and values finite".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| 1.0 / p.population).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if xs.len() < 3 {
        return Err(Error::Fit("need at least 3 distinct populations".into()));
    }
    let weighted = points.iter().all(|p| p.stderr > 0.0);
    let prep = Prepared {
        x: points.iter().map(|p| 1.0 / p.population).collect(),
        y: points.iter().map(|p| p.value).collect(),
        w: points.iter().map(|p| if weighted { 1.0 / (p.stderr * p.stderr) } else { 1.0 }).collect(),
    };

    let (l0, l1) = (C_MIN.ln(), C_MAX.ln());
    let grid: Vec<f64> = (0..GRID).map(|k| (l0 + (l1 - l0) * k as f64 / (GRID - 1) as f64).exp()).collect();
    let mut best = 0;
    let mut best_chi = f64::INFINITY;
    for (k, &c) in grid.iter().enumerate() {
        let chi = linear_at(&prep, c).2;
        if chi < best_chi {
            best_chi = chi;
            best = k;
        }
    }
    // Golden-section refinement between the neighbouring grid points.
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(GRID - 1)].ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |lc: f64| linear_at(&prep, lc.exp()).2;
    let (mut u, mut v) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fu, mut fv) = (f(u), f(v));
    for _ in 0..60 {
        if fu < fv {
            hi = v;
            v = u;
            fv = fu;
            u = hi - g * (hi - lo);
            fu = f(u);
        } else {
            lo = u;
            u = v;
            fu = fv;
            v = lo + g * (hi - lo);
            fv = f(v);
        }
    }
    let c = if fu.min(fv) <= best_chi { (0.5 * (lo + hi)).exp() } else { grid[best] };
    let (a, b, chi2) = linear_at(&prep, c);

    // Gauss-Newton covariance at the optimum, inflated when the fit is poor.
    let dof = (points.len() - 3) as f64;
    let scale = if weighted { (chi2 / dof).max(1.0) } else { chi2 / dof };
    let mut jtj = Matrix3::zeros();
    for (&x, &w) in prep.x.iter().zip(&prep.w) {
        let f = x.powf(c);
        let j = Vector3::new(1.0, f, b * f * x.ln());
        jtj += w * j * j.transpose();
    }
    let var_a = match jtj.try_inverse() {
        Some(inv) if b.abs() > 0.0 && inv[(0, 0)].is_finite() && inv[(0, 0)] > 0.0 => inv[(0, 0)],
        _ => {
            let m = jtj.fixed_view::<2, 2>(0, 0).into_owned();
            m.try_inverse().map_or(f64::INFINITY, |inv| inv[(0, 0)])
        }
    };
    Ok(FitResult { a, b, c, a_stderr: (var_a * scale).sqrt(), chi2 })
}
