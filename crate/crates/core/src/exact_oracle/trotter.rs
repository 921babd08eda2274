use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::determinants::{basis_index, enumerate_sector, sector_dimension, Determinant};
use crate::error::{Error, Result};
use crate::hamiltonians::{DiagonalCoulombHamiltonian, SectorSpec};

/// Largest sector handled with dense eigendecompositions.
pub const DENSE_LIMIT: usize = 5000;

/// Order of the factors in the symmetric second-order product formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// `e^{-iVt/2} e^{-iTt} e^{-iVt/2}`
    Vtv,
    /// `e^{-iTt/2} e^{-iVt} e^{-iTt/2}`
    Tvt,
}

/// Dense matrix of the hopping operator `Σ T_pq a†_p a_q` on `basis`.
pub fn sector_hopping_matrix(h: &DiagonalCoulombHamiltonian, basis: &[Determinant]) -> DMatrix<f64> {
    let n = h.n_spin_orbitals();
    let mut m = DMatrix::zeros(basis.len(), basis.len());
    for (j, d) in basis.iter().enumerate() {
        for p in d.iter_occupied() {
            m[(j, j)] += h.hopping[(p, p)];
            for q in 0..n {
                let t = h.hopping[(q, p)];
                if q == p || t == 0.0 || d.is_occupied(q) {
                    continue;
                }
                let (target, sign) = d.single_excite_unchecked(p, q);
                let i = basis_index(basis, &target).expect("hopping conserves the sector");
                m[(i, j)] += sign * t;
            }
        }
    }
    m
}

/// `E_V(D) = Σ_{p<q ∈ D} V_pq` for every basis determinant.
pub fn sector_coulomb_diagonal(h: &DiagonalCoulombHamiltonian, basis: &[Determinant]) -> Vec<f64> {
    basis
        .iter()
        .map(|d| {
            let occ = d.occupied_list();
            occ.iter()
                .enumerate()
                .flat_map(|(a, &p)| occ[a + 1..].iter().map(move |&q| (p, q)))
                .map(|(p, q)| h.coulomb[(p, q)])
                .sum()
        })
        .collect()
}

/// `Q diag(e^{-i λ s}) Qᵀ`.
fn propagator(eig: &SymmetricEigen<f64, nalgebra::Dyn>, s: f64) -> DMatrix<Complex<f64>> {
    let q = eig.eigenvectors.map(|x| Complex::new(x, 0.0));
    let mut left = q.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex::from_polar(1.0, -lam * s);
        left.column_mut(k).iter_mut().for_each(|x| *x *= phase);
    }
    left * q.transpose()
}

fn scale_rows_and_cols(m: &mut DMatrix<Complex<f64>>, left: &[Complex<f64>], right: &[Complex<f64>]) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= left[i] * right[j];
        }
    }
}

/// Worst-case error `‖S₂(t) - e^{-iHt}‖` of the second-order product formula
/// restricted to `sector`.
pub fn exact_trotter_error(h: &DiagonalCoulombHamiltonian, sector: SectorSpec, t: f64, ordering: Ordering) -> Result<f64> {
    sector.validate(h.n_spatial)?;
    let dim = sector_dimension(h.n_spatial, sector);
    if dim > DENSE_LIMIT as u128 {
        return Err(Error::Capacity(format!("sector dimension {dim} exceeds the dense limit {DENSE_LIMIT}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let basis = enumerate_sector(h.n_spatial, sector)?;
    let tm = sector_hopping_matrix(h, &basis);
    let ev = sector_coulomb_diagonal(h, &basis);
    let mut hm = tm.clone();
    for (i, e) in ev.iter().enumerate() {
        hm[(i, i)] += e;
    }
    let exact = propagator(&SymmetricEigen::new(hm), t);
    let eig_t = SymmetricEigen::new(tm);
    let v_phase = |s: f64| -> Vec<Complex<f64>> { ev.iter().map(|&e| Complex::from_polar(1.0, -e * s)).collect() };
    let product = match ordering {
        Ordering::Vtv => {
            let mut m = propagator(&eig_t, t);
            let half = v_phase(t / 2.0);
            scale_rows_and_cols(&mut m, &half, &half);
            m
        }
        Ordering::Tvt => {
            let half = propagator(&eig_t, t / 2.0);
            let mut mid = half.clone();
            let ones = vec![Complex::new(1.0, 0.0); basis.len()];
            scale_rows_and_cols(&mut mid, &v_phase(t), &ones);
            &half * mid
        }
    };
    let diff = product - exact;
    Ok(diff.singular_values().iter().fold(0.0f64, |m, &s| m.max(s)))
}
