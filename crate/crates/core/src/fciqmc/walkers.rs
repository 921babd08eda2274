use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{KeyedRng, Purpose};
use crate::commutators::CommutatorEngine;
use crate::determinants::Determinant;

/// Which operator is propagated: `A' = -abs(A)` or `A' = -A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SignFree,
    Signed,
}

impl Mode {
    /// `A'_ij` from `A_ij`.
    #[inline]
    pub fn propagated(&self, element: f64) -> f64 {
        match self {
            Mode::SignFree => -element.abs(),
            Mode::Signed => -element,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walker {
    pub det: Determinant,
    pub coeff: f64,
    /// `A'_ii`.
    pub diag: f64,
}

/// Sparse signed coefficient vector, sorted by determinant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WalkerStore {
    walkers: Vec<Walker>,
}

impl WalkerStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single<E: CommutatorEngine>(engine: &E, mode: Mode, det: Determinant, weight: f64) -> Self {
        Self {
            walkers: vec![Walker { det, coeff: weight, diag: mode.propagated(engine.diagonal(&det)) }],
        }
    }

    /// Builds a store from arbitrary `(det, coeff)` pairs; duplicates are summed.
    pub fn from_coefficients<E: CommutatorEngine>(engine: &E, mode: Mode, mut entries: Vec<(Determinant, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut walkers: Vec<Walker> = Vec::with_capacity(entries.len());
        for (det, c) in entries {
            match walkers.last_mut() {
                Some(w) if w.det == det => w.coeff += c,
                _ => walkers.push(Walker { det, coeff: c, diag: mode.propagated(engine.diagonal(&det)) }),
            }
        }
        walkers.retain(|w| w.coeff != 0.0);
        Self { walkers }
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    /// `N_w = Σ |C_i|`.
    pub fn population(&self) -> f64 {
        self.walkers.iter().map(|w| w.coeff.abs()).sum()
    }

    pub fn walkers(&self) -> &[Walker] {
        &self.walkers
    }

    pub fn get(&self, det: &Determinant) -> Option<f64> {
        self.walkers.binary_search_by(|w| w.det.cmp(det)).ok().map(|k| self.walkers[k].coeff)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepParams {
    pub dt: f64,
    pub shift: f64,
    pub mode: Mode,
    pub seed: u64,
    pub iteration: u64,
    pub parallel: bool,
}

/// Per-iteration quantities, all measured on the coefficients entering the step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// `Σ_j A'_jj C_j`.
    pub diag_sum: f64,
    /// `Σ_j C_j`.
    pub coeff_sum: f64,
    /// Total spawned amplitude.
    pub spawned_sum: f64,
    /// Walker weight removed by opposite-sign cancellation.
    pub annihilated: f64,
    pub spawn_attempts: u64,
}

impl StepStats {
    /// Numerator of the mixed estimator with a uniform trial vector:
    /// `Σ_ij A'_ij C_j`, the off-diagonal part recovered from the spawns.
    pub fn mixed_numerator(&self, dt: f64) -> f64 {
        self.diag_sum - self.spawned_sum / dt
    }
}

fn spawn_from<E: CommutatorEngine>(engine: &E, w: &Walker, p: &StepParams) -> (Vec<(Determinant, f64)>, u64) {
    let n_spawn = w.coeff.abs().round().max(1.0);
    let mut rng = KeyedRng::for_walker(p.seed, p.iteration, &w.det, Purpose::Spawn);
    let ctx = engine.prepare(&w.det);
    let mut out = Vec::new();
    for _ in 0..n_spawn as u64 {
        if let Some(s) = engine.sample_from(&ctx, &mut rng) {
            let a = p.mode.propagated(s.element);
            out.push((s.target, -p.dt * a * w.coeff / (n_spawn * s.p_gen)));
        }
    }
    (out, n_spawn as u64)
}

/// One projector step: spawning, death, annihilation, stochastic rounding.
pub fn step<E: CommutatorEngine>(store: &mut WalkerStore, engine: &E, p: &StepParams) -> StepStats {
    let mut stats = StepStats::default();
    for w in &store.walkers {
        stats.diag_sum += w.diag * w.coeff;
        stats.coeff_sum += w.coeff;
    }

    let per_walker: Vec<(Vec<(Determinant, f64)>, u64)> = if p.parallel {
        store.walkers.par_iter().map(|w| spawn_from(engine, w, p)).collect()
    } else {
        store.walkers.iter().map(|w| spawn_from(engine, w, p)).collect()
    };
    let mut spawns: Vec<(Determinant, f64)> = Vec::with_capacity(per_walker.iter().map(|v| v.0.len()).sum());
    for (v, n) in per_walker {
        stats.spawn_attempts += n;
        spawns.extend(v);
    }
    stats.spawned_sum = spawns.iter().map(|s| s.1).sum();

    for w in &mut store.walkers {
        w.coeff *= 1.0 - p.dt * (w.diag - p.shift);
    }

    // Stable sort keeps the per-target summation order fixed.
    if p.parallel {
        spawns.par_sort_by(|a, b| a.0.cmp(&b.0));
    } else {
        spawns.sort_by(|a, b| a.0.cmp(&b.0));
    }
    let old = std::mem::take(&mut store.walkers);
    let mut merged: Vec<Walker> = Vec::with_capacity(old.len() + spawns.len() / 2);
    let mut k = 0;
    let mut annihilated = 0.0;
    let mut push = |det: Determinant, existing: Option<&Walker>, spawns: &[(Determinant, f64)]| {
        let (mut pos, mut neg) = (0.0, 0.0);
        let mut total = 0.0;
        if let Some(w) = existing {
            total = w.coeff;
            if w.coeff > 0.0 { pos += w.coeff } else { neg -= w.coeff }
        }
        for &(_, s) in spawns {
            total += s;
            if s > 0.0 { pos += s } else { neg -= s }
        }
        annihilated += 2.0 * f64::min(pos, neg);
        let diag = existing.map_or_else(|| p.mode.propagated(engine.diagonal(&det)), |w| w.diag);
        merged.push(Walker { det, coeff: total, diag });
    };
    let mut i = 0;
    while i < old.len() || k < spawns.len() {
        let next_spawn = spawns.get(k).map(|s| s.0);
        let take_old = match (old.get(i), next_spawn) {
            (Some(w), Some(d)) => w.det <= d,
            (Some(_), None) => true,
            _ => false,
        };
        let det = if take_old { old[i].det } else { next_spawn.expect("spawn present") };
        let start = k;
        while k < spawns.len() && spawns[k].0 == det {
            k += 1;
        }
        if take_old {
            push(det, Some(&old[i]), &spawns[start..k]);
            i += 1;
        } else {
            push(det, None, &spawns[start..k]);
        }
    }
    stats.annihilated = annihilated;

    for w in &mut merged {
        let a = w.coeff.abs();
        if a < 1.0 && a > 0.0 {
            let mut rng = KeyedRng::for_walker(p.seed, p.iteration, &w.det, Purpose::Round);
            w.coeff = if rng.random::<f64>() < a { w.coeff.signum() } else { 0.0 };
        }
    }
    merged.retain(|w| w.coeff != 0.0);
    store.walkers = merged;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commutators::{Engine, OperatorKind};
    use crate::determinants::enumerate_sector;
    use crate::exact_oracle::build_sector_matrix;
    use crate::hamiltonians::{build_extended_hubbard_1d, SectorSpec};

    fn params(iteration: u64, shift: f64, mode: Mode) -> StepParams {
        StepParams { dt: 0.01, shift, mode, seed: 7, iteration, parallel: false }
    }

    #[test]
    fn rounding_leaves_no_small_coefficients() {
        let h = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtt).unwrap();
        let basis = enumerate_sector(4, SectorSpec::new(2, 2)).unwrap();
        let mut store = WalkerStore::single(&e, Mode::SignFree, basis[0], 10.0);
        for it in 0..50 {
            step(&mut store, &e, &StepParams { dt: 0.001, ..params(it, 0.0, Mode::SignFree) });
            assert!(store.walkers().iter().all(|w| w.coeff.abs() >= 1.0 && w.coeff > 0.0));
            assert!(store.walkers().windows(2).all(|p| p[0].det < p[1].det));
        }
    }

    #[test]
    fn sign_free_mode_never_annihilates() {
        let h = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtv).unwrap();
        let basis = enumerate_sector(4, SectorSpec::new(2, 2)).unwrap();
        let mut store = WalkerStore::single(&e, Mode::SignFree, basis[3], 20.0);
        for it in 0..100 {
            let s = step(&mut store, &e, &StepParams { dt: 0.001, ..params(it, 0.0, Mode::SignFree) });
            assert_eq!(s.annihilated, 0.0);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let h = build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, true).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtt).unwrap();
        let basis = enumerate_sector(6, SectorSpec::new(3, 3)).unwrap();
        let mut a = WalkerStore::single(&e, Mode::Signed, basis[0], 50.0);
        let mut b = a.clone();
        for it in 0..30 {
            let sa = step(&mut a, &e, &params(it, -80.0, Mode::Signed));
            let sb = step(&mut b, &e, &StepParams { parallel: true, ..params(it, -80.0, Mode::Signed) });
            assert_eq!(sa, sb);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn death_fixed_point() {
        // A single determinant with nothing to spawn to: the death step with
        // S = A'_ii leaves the coefficient untouched.
        let h = build_extended_hubbard_1d(2, 1.0, 4.0, 2.0, false).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtt).unwrap();
        let full = crate::determinants::Determinant::from_orbitals([0, 1, 2, 3]);
        let mut store = WalkerStore::single(&e, Mode::Signed, full, 3.0);
        let diag = store.walkers()[0].diag;
        step(&mut store, &e, &params(0, diag, Mode::Signed));
        assert_eq!(store.get(&full), Some(3.0));
    }

    #[test]
    fn expected_update_is_exact() {
        // Averaging many independent steps from one fixed vector reproduces
        // (1 - Δτ (A' - S)) C before rounding; rounding is unbiased too.
        let h = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtv).unwrap();
        let sector = SectorSpec::new(2, 2);
        let m = build_sector_matrix(&e, sector, true).unwrap();
        let basis = &m.basis;
        let c0: Vec<(Determinant, f64)> = basis.iter().enumerate().map(|(i, d)| (*d, 1.0 + (i % 3) as f64)).collect();
        let store0 = WalkerStore::from_coefficients(&e, Mode::SignFree, c0.clone());
        let (dt, shift) = (0.002, -5.0);
        let n = 20_000;
        let mut sum = vec![0.0; basis.len()];
        let mut sumsq = vec![0.0; basis.len()];
        for it in 0..n {
            let mut s = store0.clone();
            step(&mut s, &e, &StepParams { dt, shift, mode: Mode::SignFree, seed: 99, iteration: it, parallel: false });
            for (k, d) in basis.iter().enumerate() {
                let c = s.get(d).unwrap_or(0.0);
                sum[k] += c;
                sumsq[k] += c * c;
            }
        }
        for k in 0..basis.len() {
            let mut expected = c0[k].1 * (1.0 + dt * shift);
            for (j, a) in m.row(k) {
                expected += dt * a * c0[j].1;
            }
            let mean = sum[k] / n as f64;
            let se = ((sumsq[k] / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
            assert!((mean - expected).abs() <= 4.0 * se + 1e-12, "{k}: {mean} vs {expected} ± {se}");
        }
    }
}
