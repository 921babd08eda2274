use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Relative tolerance on the residual of the extremal Ritz pairs.
    pub tol: f64,
    pub max_iter: usize,
    /// Converge only the largest eigenvalue.
    pub only_max: bool,
}

impl LanczosOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            tol: 1e-8,
            max_iter: (20.0 * (dim as f64).sqrt()) as usize + 1000,
            only_max: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
}

impl Extremes {
    pub fn norm(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Deterministic start vector with entries in `[-1, 1)`.
pub fn pseudo_random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    (0..dim)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            2.0 * (z >> 11) as f64 / (1u64 << 53) as f64 - 1.0
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of eigenvalues of the tridiagonal matrix below `x` (Sturm count).
fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - if i == 0 { 0.0 } else { off / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalues of the tridiagonal matrix by bisection.
fn tridiagonal_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let bisect = |target: usize| {
        // Smallest x with count_below(x) >= target.
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if count_below(alpha, beta, m) >= target {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    };
    (bisect(1), bisect(k))
}

/// Magnitude of the last component of the normalized eigenvector of the
/// tridiagonal matrix for the extreme eigenvalue `lambda`, by inverse iteration
/// with a shift just outside the spectrum so the factorization is definite.
fn last_component(alpha: &[f64], beta: &[f64], lambda: f64, above: bool) -> f64 {
    let k = alpha.len();
    let scale = alpha.iter().chain(beta).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let shift = lambda + if above { 1e-10 } else { -1e-10 } * scale;
    let mut y = vec![1.0; k];
    for _ in 0..3 {
        // Thomas algorithm on T - shift I.
        let mut c = vec![0.0; k];
        let mut d = vec![0.0; k];
        let mut denom = alpha[0] - shift;
        c[0] = if k > 1 { beta[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..k {
            denom = alpha[i] - shift - beta[i - 1] * c[i - 1];
            if i + 1 < k {
                c[i] = beta[i] / denom;
            }
            d[i] = (y[i] - beta[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..k - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let n = dot(&d, &d).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return 1.0;
        }
        y = d.iter().map(|x| x / n).collect();
    }
    y[k - 1].abs()
}

/// Extremal eigenvalues of a symmetric operator by the Lanczos three-term
/// recurrence. Only the two most recent vectors are kept; the extreme Ritz
/// values converge regardless of the loss of global orthogonality, and the
/// residual `|β_k y_k|` of each extreme Ritz pair is the stopping test.
pub fn lanczos_extremes<F>(dim: usize, mut apply: F, start: Vec<f64>, opts: &LanczosOptions) -> Result<Extremes>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Ok(Extremes { min: 0.0, max: 0.0, iterations: 0 });
    }
    let norm0 = dot(&start, &start).sqrt();
    if norm0 == 0.0 {
        return Err(Error::Config("Lanczos start vector is zero".into()));
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / norm0).collect();
    let mut v_prev = vec![0.0; dim];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; dim];
    let max_iter = opts.max_iter.max(1);
    let mut best = Extremes { min: 0.0, max: 0.0, iterations: 0 };
    for k in 0..max_iter {
        apply(&v, &mut w);
        let b_prev = beta.last().copied().unwrap_or(0.0);
        w.iter_mut().zip(&v_prev).for_each(|(wi, pi)| *wi -= b_prev * pi);
        let a = dot(&v, &w);
        w.iter_mut().zip(&v).for_each(|(wi, vi)| *wi -= a * vi);
        // One more local pass keeps the recurrence accurate.
        let (c1, c0) = (dot(&v, &w), dot(&v_prev, &w));
        w.iter_mut().zip(&v).zip(&v_prev).for_each(|((wi, vi), pi)| *wi -= c1 * vi + c0 * pi);
        alpha.push(a + c1);
        let b = dot(&w, &w).sqrt();
        let (min, max) = tridiagonal_extremes(&alpha, &beta);
        best = Extremes { min, max, iterations: k + 1 };
        let scale = alpha.iter().chain(&beta).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if b <= 1e-12 * scale {
            return Ok(best);
        }
        let target = opts.tol * best.norm().max(f64::MIN_POSITIVE);
        let max_ok = b * last_component(&alpha, &beta, max, true) <= target;
        let min_ok = opts.only_max || b * last_component(&alpha, &beta, min, false) <= target;
        if max_ok && min_ok && k >= 1 {
            return Ok(best);
        }
        beta.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / b);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        estimate: if opts.only_max { best.max } else { best.norm() },
    })
}
