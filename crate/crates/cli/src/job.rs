//! Job specification: which system, which sector, which task.

use serde::{Deserialize, Serialize};
use trotter_bound::hamiltonians::{
    build_cuprate_square, build_extended_hubbard_1d, build_extended_hubbard_hexagonal, build_ppp, build_ueg_dual_plane_wave,
    acene_coordinates, PppParams,
};
use trotter_bound::{DiagonalCoulombHamiltonian, Error, OperatorKind, Ordering, Result, RunConfig, SectorSpec};

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    #[serde(rename = "hubbard_1d")]
    Hubbard1d {
        n_sites: usize,
        tau: f64,
        u: f64,
        v: f64,
        #[serde(default = "yes")]
        periodic: bool,
    },
    HubbardHexagonal {
        cells_x: usize,
        cells_y: usize,
        tau: f64,
        u: f64,
        v: f64,
    },
    Cuprate {
        len_x: usize,
        len_y: usize,
        tau: f64,
        tau_p: f64,
        tau_pp: f64,
        u: f64,
        #[serde(default = "yes")]
        periodic: bool,
    },
    PppAcene {
        n_rings: usize,
        #[serde(default)]
        params: Option<PppParams>,
    },
    Ueg {
        dim: usize,
        grid_side: usize,
        r_s: f64,
        /// Defaults to one electron per grid point (half filling).
        #[serde(default)]
        n_electrons: Option<usize>,
    },
    File {
        path: String,
    },
}

impl SystemSpec {
    pub fn build(&self) -> Result<DiagonalCoulombHamiltonian> {
        match self {
            SystemSpec::Hubbard1d { n_sites, tau, u, v, periodic } => build_extended_hubbard_1d(*n_sites, *tau, *u, *v, *periodic),
            SystemSpec::HubbardHexagonal { cells_x, cells_y, tau, u, v } => {
                build_extended_hubbard_hexagonal(*cells_x, *cells_y, *tau, *u, *v)
            }
            SystemSpec::Cuprate { len_x, len_y, tau, tau_p, tau_pp, u, periodic } => {
                build_cuprate_square(*len_x, *len_y, *tau, *tau_p, *tau_pp, *u, *periodic)
            }
            SystemSpec::PppAcene { n_rings, params } => {
                if *n_rings == 0 {
                    return Err(Error::InvalidLattice("an acene needs at least one ring".into()));
                }
                let p = params.unwrap_or_default();
                Ok(build_ppp(&acene_coordinates(*n_rings, p.bond_length), p))
            }
            SystemSpec::Ueg { dim, grid_side, r_s, n_electrons } => {
                let points = grid_side.checked_pow(*dim as u32).unwrap_or(usize::MAX);
                build_ueg_dual_plane_wave(*dim, *grid_side, *r_s, n_electrons.unwrap_or(points))
            }
            SystemSpec::File { path } => DiagonalCoulombHamiltonian::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

/// `"half-filling"` or explicit spin counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SectorChoice {
    Keyword(String),
    Counts { n_up: usize, n_down: usize },
}

impl Default for SectorChoice {
    fn default() -> Self {
        SectorChoice::Keyword("half-filling".into())
    }
}

impl SectorChoice {
    pub fn resolve(&self, n_spatial: usize) -> Result<SectorSpec> {
        match self {
            SectorChoice::Keyword(k) if k == "half-filling" => SectorSpec::half_filling(n_spatial),
            SectorChoice::Keyword(k) => Err(Error::Config(format!("unknown sector keyword {k:?}"))),
            SectorChoice::Counts { n_up, n_down } => {
                let s = SectorSpec::new(*n_up, *n_down);
                s.validate(n_spatial)?;
                Ok(s)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Build,
    ExactNorm,
    McNorm,
    TrotterErrorExact,
    Bounds,
    BiasSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSource {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotterSpec {
    pub times: Vec<f64>,
    pub ordering: Ordering,
}

impl Default for TrotterSpec {
    fn default() -> Self {
        Self { times: vec![0.005, 0.01, 0.02], ordering: Ordering::Vtv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub source: NormSource,
    pub l1: bool,
    pub triangle: bool,
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub ordering: Ordering,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self { source: NormSource::Exact, l1: true, triangle: true, t: None, epsilon: None, ordering: Ordering::Vtv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub populations: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { populations: vec![1e3, 2e3, 4e3, 8e3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub system: SystemSpec,
    #[serde(default)]
    pub sector: SectorChoice,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub operator: Option<OperatorKind>,
    #[serde(default)]
    pub fciqmc: RunConfig,
    /// Relative Lanczos tolerance.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub write_matrix: bool,
    #[serde(default)]
    pub trotter: TrotterSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub bias_sweep: SweepSpec,
}

fn default_tol() -> f64 {
    1e-8
}

impl JobSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks that the blocks the task needs are present and sane.
    pub fn validate(&self, task: Task) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        match task {
            Task::McNorm | Task::BiasSweep if self.operator.is_none() => {
                Err(Error::Config("this task needs an \"operator\" (vtv or vtt)".into()))
            }
            Task::TrotterErrorExact if self.trotter.times.is_empty() || self.trotter.times.iter().any(|t| !(*t > 0.0)) => {
                Err(Error::Config("trotter.times must be a non-empty list of positive times".into()))
            }
            Task::BiasSweep if self.bias_sweep.populations.len() < 4 => {
                Err(Error::Config("bias_sweep.populations needs at least 4 targets".into()))
            }
            Task::Bounds if self.bounds.t.is_some() != self.bounds.epsilon.is_some() => {
                Err(Error::Config("bounds.t and bounds.epsilon go together".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_job() {
        let job = JobSpec::from_json(r#"{"system": {"builder": "hubbard_1d", "n_sites": 6, "tau": 1, "u": 4, "v": 2}}"#).unwrap();
        assert_eq!(job.sector, SectorChoice::default());
        let h = job.system.build().unwrap();
        assert_eq!(job.sector.resolve(h.n_spatial).unwrap(), SectorSpec::new(3, 3));
        // Periodic by default: site 0 talks to site 5.
        assert_eq!(h.hopping[(0, 10)], -1.0);
    }

    #[test]
    fn sector_forms() {
        let counts: SectorChoice = serde_json::from_str(r#"{"n_up": 2, "n_down": 1}"#).unwrap();
        assert_eq!(counts.resolve(4).unwrap(), SectorSpec::new(2, 1));
        assert!(SectorChoice::default().resolve(5).is_err());
        assert!(SectorChoice::Keyword("quarter".into()).resolve(4).is_err());
    }

    #[test]
    fn task_requirements() {
        let job = JobSpec::from_json(r#"{"system": {"builder": "ppp_acene", "n_rings": 1}}"#).unwrap();
        assert!(job.validate(Task::ExactNorm).is_ok());
        assert!(job.validate(Task::McNorm).is_err());
        assert!(JobSpec::from_json(r#"{"system": {"builder": "nope"}}"#).is_err());
    }
}
