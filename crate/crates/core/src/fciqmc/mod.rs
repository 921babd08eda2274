//! Full configuration interaction quantum Monte Carlo on a commutator
//! operator `A`. In sign-free mode the walkers sample `A' = -abs(A)`, whose
//! ground-state energy is `-λ_max(abs(A))`, an upper bound on `‖A‖`.

mod extrapolation;
mod rng;
mod shift;
mod walkers;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commutators::{CommutatorEngine, OperatorKind};
use crate::determinants::{enumerate_sector, sector_dimension, Determinant};
use crate::error::{Error, Result};
use crate::hamiltonians::SectorSpec;
use crate::stats::{reblock, reblock_ratio, Reblocked};

pub use extrapolation::{extrapolate_population_bias, BiasPoint, FitResult};
pub use rng::{KeyedRng, Purpose};
pub use shift::{update_shift, PlateauDetector, ShiftController};
pub use walkers::{step, Mode, StepParams, StepStats, Walker, WalkerStore};

/// Sectors up to this size are scanned for the lowest diagonal element.
const SCAN_LIMIT: u128 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    LowestDiagonal,
    /// Occupation string, one character per spin orbital.
    Determinant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Time step; chosen from a power-iteration estimate of `‖A‖` if absent.
    pub dt: Option<f64>,
    pub xi: f64,
    pub update_period: usize,
    /// Population at which the shift starts to vary.
    pub vary_threshold: f64,
    pub iterations: usize,
    pub seed: u64,
    pub mode: Mode,
    pub operator: OperatorKind,
    pub initial_state: InitialState,
    pub initial_weight: f64,
    pub initial_shift: f64,
    /// Averaging window; defaults to the last 80% of the varying-shift phase.
    pub window: Option<Window>,
    pub population_cap: f64,
    pub parallel: bool,
    pub plateau_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: None,
            xi: 0.05,
            update_period: 1,
            vary_threshold: 1e4,
            iterations: 20_000,
            seed: 0,
            mode: Mode::SignFree,
            operator: OperatorKind::Vtt,
            initial_state: InitialState::LowestDiagonal,
            initial_weight: 10.0,
            initial_shift: 0.0,
            window: None,
            population_cap: 1e8,
            parallel: false,
            plateau_window: 500,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return bad(format!("xi must lie in (0, 1], got {}", self.xi));
        }
        if self.update_period == 0 {
            return bad("update_period must be at least 1".into());
        }
        if self.iterations < 2 {
            return bad("at least 2 iterations are needed".into());
        }
        if !(self.initial_weight >= 1.0) {
            return bad(format!("initial_weight must be at least 1, got {}", self.initial_weight));
        }
        if !(self.vary_threshold > 0.0 && self.population_cap > self.vary_threshold) {
            return bad("need 0 < vary_threshold < population_cap".into());
        }
        if let Some(w) = self.window {
            if w.start + 2 > w.end || w.end > self.iterations {
                return bad(format!("window {}..{} is not inside 0..{}", w.start, w.end, self.iterations));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Whether the blocking analysis found a plateau.
    pub converged: bool,
}

impl From<&Reblocked> for Estimate {
    fn from(r: &Reblocked) -> Self {
        Self { mean: r.mean, stderr: r.stderr, converged: r.converged }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub shift: f64,
    pub n_walkers: f64,
    pub n_occupied: usize,
    pub mixed_num: f64,
    pub mixed_den: f64,
    pub n_annihilated: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub iteration: usize,
    pub population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub dt: f64,
    pub initial_determinant: String,
    /// Averages of the shift and of the mixed estimator; both estimate the
    /// lowest eigenvalue of `A'`.
    pub shift: Estimate,
    pub mixed: Estimate,
    /// `-mixed.mean`: the norm estimate.
    pub norm: f64,
    pub norm_stderr: f64,
    pub window: Window,
    pub vary_iteration: Option<usize>,
    pub mean_population: f64,
    pub final_population: f64,
    pub final_occupied: usize,
    pub plateau: Option<Plateau>,
    pub total_annihilated: f64,
    #[serde(skip)]
    pub series: Vec<IterationRecord>,
}

impl RunReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "iter,shift,n_walkers,n_occupied,mixed_num,mixed_den,n_annihilated")?;
        for r in &self.series {
            writeln!(
                f,
                "{},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e}",
                r.iter, r.shift, r.n_walkers, r.n_occupied, r.mixed_num, r.mixed_den, r.n_annihilated
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Lowest-orbital determinant of the sector.
fn aufbau(sector: SectorSpec) -> Determinant {
    Determinant::from_orbitals((0..sector.n_up).map(|i| 2 * i).chain((0..sector.n_down).map(|i| 2 * i + 1)))
}

fn choose_initial<E: CommutatorEngine>(engine: &E, mode: Mode, sector: SectorSpec, state: &InitialState) -> Result<Determinant> {
    let n_spatial = engine.n_spin_orbitals() / 2;
    let key = |d: &Determinant| mode.propagated(engine.diagonal(d));
    match state {
        InitialState::Determinant(s) => {
            let d = Determinant::from_bit_string(s)?;
            if s.len() != engine.n_spin_orbitals() || d.spin_counts() != (sector.n_up, sector.n_down) {
                return Err(Error::SectorMismatch(format!("initial determinant {s} is not in sector {sector:?}")));
            }
            Ok(d)
        }
        InitialState::LowestDiagonal if sector_dimension(n_spatial, sector) <= SCAN_LIMIT => {
            let basis = enumerate_sector(n_spatial, sector)?;
            let mut best = basis[0];
            let mut best_val = key(&best);
            for d in &basis[1..] {
                let v = key(d);
                if v < best_val {
                    best = *d;
                    best_val = v;
                }
            }
            Ok(best)
        }
        InitialState::LowestDiagonal => {
            // Greedy descent through connected determinants.
            let mut cur = aufbau(sector);
            let mut cur_val = key(&cur);
            for _ in 0..10_000 {
                let mut next = None;
                engine.for_each_connection(&engine.prepare(&cur), |t, _| {
                    let v = key(&t);
                    if v < next.map_or(cur_val, |(_, x)| x) {
                        next = Some((t, v));
                    }
                });
                match next {
                    Some((d, v)) => {
                        cur = d;
                        cur_val = v;
                    }
                    None => break,
                }
            }
            Ok(cur)
        }
    }
}

/// Rough `λ_max(abs(A))` from a few truncated power steps started at `start`.
fn estimate_scale<E: CommutatorEngine>(engine: &E, start: Determinant) -> f64 {
    const KEEP: usize = 2000;
    let mut v: Vec<(Determinant, f64)> = vec![(start, 1.0)];
    let mut lambda: f64 = 0.0;
    for _ in 0..20 {
        let mut w: HashMap<Determinant, f64> = HashMap::new();
        for &(d, c) in &v {
            *w.entry(d).or_insert(0.0) += engine.diagonal(&d).abs() * c;
            engine.for_each_connection(&engine.prepare(&d), |t, a| *w.entry(t).or_insert(0.0) += a.abs() * c);
        }
        let norm_in: f64 = v.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        let norm_out: f64 = w.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm_out == 0.0 {
            break;
        }
        lambda = lambda.max(norm_out / norm_in);
        let mut next: Vec<(Determinant, f64)> = w.into_iter().collect();
        next.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        next.truncate(KEEP);
        let s: f64 = next.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| x.1 /= s);
        v = next;
    }
    lambda
}

/// Default time step for an engine started at `start`.
pub fn default_time_step<E: CommutatorEngine>(engine: &E, start: Determinant) -> f64 {
    let lambda = estimate_scale(engine, start);
    if lambda > 0.0 {
        0.1 / (2.0 * lambda)
    } else {
        0.01
    }
}

/// Runs one FCIQMC calculation for the operator held by `engine` in `sector`.
pub fn run<E: CommutatorEngine>(config: &RunConfig, engine: &E, sector: SectorSpec) -> Result<RunReport> {
    config.validate()?;
    if engine.kind() != config.operator {
        return Err(Error::Config(format!(
            "engine holds {} but the configuration asks for {}",
            engine.kind().label(),
            config.operator.label()
        )));
    }
    sector.validate(engine.n_spin_orbitals() / 2)?;
    let start = choose_initial(engine, config.mode, sector, &config.initial_state)?;
    let dt = config.dt.unwrap_or_else(|| default_time_step(engine, start));
    let mut resolved = config.clone();
    resolved.dt = Some(dt);

    let mut store = WalkerStore::single(engine, config.mode, start, config.initial_weight);
    let mut control = ShiftController::new(
        config.initial_shift,
        config.xi,
        dt,
        config.update_period,
        config.vary_threshold,
        store.population(),
    );
    let mut plateau = PlateauDetector::new(config.plateau_window);
    let mut series = Vec::with_capacity(config.iterations);
    let mut total_annihilated = 0.0;

    for iter in 0..config.iterations {
        let params = StepParams {
            dt,
            shift: control.shift,
            mode: config.mode,
            seed: config.seed,
            iteration: iter as u64,
            parallel: config.parallel,
        };
        let shift_used = control.shift;
        let stats = step(&mut store, engine, &params);
        let pop = store.population();
        total_annihilated += stats.annihilated;
        series.push(IterationRecord {
            iter,
            shift: shift_used,
            n_walkers: pop,
            n_occupied: store.len(),
            mixed_num: stats.mixed_numerator(dt),
            mixed_den: stats.coeff_sum,
            n_annihilated: stats.annihilated,
        });
        if store.is_empty() {
            return Err(Error::Extinction(iter));
        }
        if !pop.is_finite() || pop > config.population_cap {
            return Err(Error::Overflow { iteration: iter, population: pop, cap: config.population_cap });
        }
        if config.mode == Mode::Signed && control.varying_since().is_none() {
            plateau.observe(iter, pop);
        }
        control.observe(iter, pop);
    }

    let vary = control.varying_since();
    let window = config.window.unwrap_or_else(|| {
        let begin = vary.map_or(config.iterations / 2, |v| v + 1);
        let begin = begin.min(config.iterations - 2);
        Window { start: begin + (config.iterations - begin) / 5, end: config.iterations }
    });
    let slice = &series[window.start..window.end];
    let shifts: Vec<f64> = slice.iter().map(|r| r.shift).collect();
    let num: Vec<f64> = slice.iter().map(|r| r.mixed_num).collect();
    let den: Vec<f64> = slice.iter().map(|r| r.mixed_den).collect();
    let shift = Estimate::from(&reblock(&shifts)?);
    let mixed = Estimate::from(&reblock_ratio(&num, &den)?);
    let mean_population = slice.iter().map(|r| r.n_walkers).sum::<f64>() / slice.len() as f64;

    Ok(RunReport {
        config: resolved,
        dt,
        initial_determinant: start.to_bit_string(engine.n_spin_orbitals()),
        shift,
        mixed,
        norm: -mixed.mean,
        norm_stderr: mixed.stderr,
        window,
        vary_iteration: vary,
        mean_population,
        final_population: store.population(),
        final_occupied: store.len(),
        plateau: plateau.found.map(|(iteration, population)| Plateau { iteration, population }),
        total_annihilated,
        series,
    })
}

/// Runs at several target populations and extrapolates the norm estimate to
/// infinite population.
pub fn population_sweep<E: CommutatorEngine>(
    base: &RunConfig,
    engine: &E,
    sector: SectorSpec,
    targets: &[f64],
) -> Result<(Vec<RunReport>, FitResult)> {
    let mut reports = Vec::with_capacity(targets.len());
    for &target in targets {
        let cfg = RunConfig {
            vary_threshold: target,
            population_cap: base.population_cap.max(100.0 * target),
            ..base.clone()
        };
        reports.push(run(&cfg, engine, sector)?);
    }
    let points: Vec<BiasPoint> = reports
        .iter()
        .map(|r| BiasPoint { population: r.mean_population, value: r.norm, stderr: r.norm_stderr })
        .collect();
    let fit = extrapolate_population_bias(&points)?;
    Ok((reports, fit))
}
