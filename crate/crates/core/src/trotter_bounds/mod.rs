//! Trotter error norms, step counts and the cheaper upper bounds on the
//! nested commutator norms.

mod local;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_oracle::Ordering;
use crate::fermion_ops::FermionOperator;

pub use local::{fock_space_norm, local_commutator, tighter_triangle_bound, MAX_LOCAL_MODES};

/// Where a commutator norm came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    McAbs { stderr: f64 },
    L1,
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub provenance: Provenance,
}

impl NormValue {
    pub fn new(value: f64, provenance: Provenance) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::Config(format!("norms are non-negative, got {value}")));
        }
        Ok(Self { value, provenance })
    }

    pub fn exact(value: f64) -> Self {
        Self { value, provenance: Provenance::Exact }
    }
}

/// `‖[[V,T],T]‖` and `‖[[V,T],V]‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormInputs {
    pub norm_vtt: NormValue,
    pub norm_vtv: NormValue,
}

/// `W` such that one second-order step of length `t` errs by at most `W t³`.
pub fn trotter_error_norm(inputs: &NormInputs, ordering: Ordering) -> f64 {
    let (vtt, vtv) = (inputs.norm_vtt.value, inputs.norm_vtv.value);
    match ordering {
        Ordering::Vtv => vtt / 12.0 + vtv / 24.0,
        Ordering::Tvt => vtt / 24.0 + vtv / 12.0,
    }
}

/// Smallest `r` with `r W (t/r)³ ≤ ε`.
pub fn trotter_steps(w: f64, t: f64, epsilon: f64) -> Result<u64> {
    if !(w > 0.0 && t > 0.0 && epsilon > 0.0) {
        return Err(Error::Config(format!("W, t and ε must be positive, got {w}, {t}, {epsilon}")));
    }
    let r = (w * t.powi(3) / epsilon).sqrt();
    // Guard against the square root landing a hair above an integer.
    let mut steps = r.ceil().max(1.0) as u64;
    while steps > 1 && w * t.powi(3) / ((steps - 1) as f64).powi(2) <= epsilon {
        steps -= 1;
    }
    Ok(steps)
}

/// Sum of absolute fermionic coefficients, each monomial having norm at most 1.
pub fn l1_bound(commutator: &FermionOperator) -> f64 {
    commutator.l1_norm()
}

/// `max_i Σ_j |m_ij|`.
pub fn induced_one_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `max_i` of the sum of the `eta` largest `|m_ij|` in row `i`.
pub fn restricted_induced_one_norm(m: &DMatrix<f64>, eta: usize) -> Result<f64> {
    if eta > m.ncols() {
        return Err(Error::Config(format!("η = {eta} exceeds the matrix dimension {}", m.ncols())));
    }
    Ok(m.row_iter()
        .map(|r| {
            let mut v: Vec<f64> = r.iter().map(|x| x.abs()).collect();
            v.sort_unstable_by(|a, b| b.total_cmp(a));
            v[..eta].iter().sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// Bounds block of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub inputs: NormInputs,
    pub w_vtv: f64,
    pub w_tvt: f64,
    pub l1: Option<L1Pair>,
    pub triangle: Option<TrianglePair>,
    pub r_steps: Option<StepCount>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Pair {
    pub vtt: f64,
    pub vtv: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrianglePair {
    pub vtt: Option<f64>,
    pub vtv: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCount {
    pub t: f64,
    pub epsilon: f64,
    pub ordering: Ordering,
    pub r: u64,
}

impl BoundsSummary {
    pub fn new(inputs: NormInputs) -> Self {
        Self {
            inputs,
            w_vtv: trotter_error_norm(&inputs, Ordering::Vtv),
            w_tvt: trotter_error_norm(&inputs, Ordering::Tvt),
            l1: None,
            triangle: None,
            r_steps: None,
        }
    }
}
