//! Deterministic reference values on a particle-number sector: sparse
//! commutator matrices, their spectral norms and the exact Trotter error.

mod lanczos;
mod trotter;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::commutators::CommutatorEngine;
use crate::determinants::{basis_index, enumerate_sector, Determinant};
use crate::error::{Error, Result};
use crate::hamiltonians::{DiagonalCoulombHamiltonian, SectorSpec};

pub use lanczos::{lanczos_extremes, pseudo_random_start, Extremes, LanczosOptions};
pub use trotter::{exact_trotter_error, sector_coulomb_diagonal, sector_hopping_matrix, Ordering, DENSE_LIMIT};

/// Largest sector the sparse builder accepts.
pub const SPARSE_LIMIT: usize = 20_000_000;

/// Symmetric sparse matrix over a sector basis in compressed-row form.
#[derive(Clone, Debug)]
pub struct SectorMatrix {
    pub basis: Vec<Determinant>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub absolute: bool,
}

impl SectorMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = M x`, parallel over rows; every row is summed in a fixed order so
    /// the result does not depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, yi)| {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| v * x[c as usize]).sum();
        });
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Element-wise absolute value.
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = v.abs());
        out.absolute = true;
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim()).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix Market coordinate format, symmetric storage (lower triangle).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let lower: Vec<(usize, usize, f64)> = (0..self.dim())
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "% absolute={}", self.absolute)?;
        writeln!(w, "{} {} {}", self.dim(), self.dim(), lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// All nonzero `A_ij` (or `|A_ij|`) between determinants of `sector`.
pub fn build_sector_matrix<E: CommutatorEngine>(engine: &E, sector: SectorSpec, absolute: bool) -> Result<SectorMatrix> {
    let n_spatial = engine.n_spin_orbitals() / 2;
    let dim = crate::determinants::sector_dimension(n_spatial, sector);
    if dim > SPARSE_LIMIT as u128 {
        return Err(Error::Capacity(format!("sector dimension {dim} exceeds the sparse limit {SPARSE_LIMIT}")));
    }
    let basis = enumerate_sector(n_spatial, sector)?;
    let rows: Vec<Vec<(u32, f64)>> = basis
        .par_iter()
        .map(|d| {
            let mut row = Vec::new();
            let diag = engine.diagonal(d);
            if diag != 0.0 {
                row.push((basis_index(&basis, d).expect("basis member") as u32, diag));
            }
            engine.for_each_connection(&engine.prepare(d), |t, e| {
                let j = basis_index(&basis, &t).expect("connection leaves the sector");
                row.push((j as u32, e));
            });
            if absolute {
                row.iter_mut().for_each(|(_, v)| *v = v.abs());
            }
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(basis.len() + 1);
    row_ptr.push(0);
    let nnz: usize = rows.iter().map(Vec::len).sum();
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for row in rows {
        for (j, v) in row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SectorMatrix { basis, row_ptr, cols, vals, absolute })
}

/// Spectral norm `max(|λ_min|, |λ_max|)` to relative tolerance `tol`.
///
/// Matrices flagged absolute are started from the all-ones vector, which
/// overlaps the non-negative Perron–Frobenius vector; only the top of the
/// spectrum is needed since it dominates in magnitude.
pub fn spectral_norm(m: &SectorMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let opts = LanczosOptions {
        tol,
        only_max: m.absolute,
        ..LanczosOptions::for_dim(m.dim())
    };
    let start = if m.absolute { vec![1.0; m.dim()] } else { pseudo_random_start(m.dim(), 0x5eed) };
    let ex = lanczos_extremes(m.dim(), |x, y| m.matvec(x, y), start, &opts)?;
    Ok(ex.norm())
}

/// Convenience: the signed and absolute norms of one engine on one sector.
pub fn sector_norms<E: CommutatorEngine>(engine: &E, sector: SectorSpec, tol: f64) -> Result<(f64, f64)> {
    let m = build_sector_matrix(engine, sector, false)?;
    let signed = spectral_norm(&m, tol)?;
    let absolute = spectral_norm(&m.abs(), tol)?;
    Ok((signed, absolute))
}

/// Dense `[[V,T],V]` and `[[V,T],T]` on a sector from the sector `T` matrix and
/// the diagonal of `V`, using `[V,X]_{ij} = (E_i - E_j) X_ij`.
pub fn dense_commutators(h: &DiagonalCoulombHamiltonian, basis: &[Determinant]) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = sector_hopping_matrix(h, basis);
    let ev = sector_coulomb_diagonal(h, basis);
    let n = basis.len();
    let vt = DMatrix::from_fn(n, n, |i, j| (ev[i] - ev[j]) * t[(i, j)]);
    let vtv = DMatrix::from_fn(n, n, |i, j| -(ev[i] - ev[j]) * vt[(i, j)]);
    let vtt = &vt * &t - &t * &vt;
    (vtv, vtt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commutators::{Engine, OperatorKind};
    use crate::hamiltonians::*;
    use nalgebra::SymmetricEigen;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dense_norm(m: &DMatrix<f64>) -> f64 {
        SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    #[test]
    fn hubbard_six_sector_shape() {
        let h = build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, true).unwrap();
        let e = Engine::build(&h, OperatorKind::Vtv).unwrap();
        let m = build_sector_matrix(&e, SectorSpec::new(3, 3), false).unwrap();
        assert_eq!(m.dim(), 400);
        assert!((0..400).all(|i| m.get(i, i) == 0.0));
        assert!(m.is_symmetric(0.0));
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
        assert_eq!(text.lines().count(), 3 + m.nnz() / 2);
    }

    #[test]
    fn engine_matrices_match_dense_commutators() {
        for h in [
            build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap(),
            build_ppp_acene(1).unwrap(),
            build_ueg_dual_plane_wave(2, 2, 10.0, 4).unwrap(),
        ] {
            let sector = SectorSpec::half_filling(h.n_spatial).unwrap();
            let basis = enumerate_sector(h.n_spatial, sector).unwrap();
            let (vtv, vtt) = dense_commutators(&h, &basis);
            for (kind, dense) in [(OperatorKind::Vtv, vtv), (OperatorKind::Vtt, vtt)] {
                let e = Engine::build(&h, kind).unwrap();
                let m = build_sector_matrix(&e, sector, false).unwrap().to_dense();
                let scale = dense.amax().max(1e-300);
                assert!((m - &dense).amax() / scale < 1e-10, "{kind:?}");
            }
        }
    }

    #[test]
    fn zero_coulomb_gives_zero_norm() {
        let h = build_extended_hubbard_1d(4, 1.0, 0.0, 0.0, true).unwrap();
        for kind in [OperatorKind::Vtv, OperatorKind::Vtt] {
            let e = Engine::build(&h, kind).unwrap();
            let m = build_sector_matrix(&e, SectorSpec::new(2, 2), false).unwrap();
            assert_eq!(m.nnz(), 0);
            assert_eq!(spectral_norm(&m, 1e-8).unwrap(), 0.0);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(9);
        for trial in 0..30 {
            let n = rng.random_range(1..120);
            let density = rng.random_range(0.02..0.3);
            let mut dense = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    if rng.random::<f64>() < density {
                        let v = rng.random_range(-1.0..1.0);
                        dense[(i, j)] = v;
                        dense[(j, i)] = v;
                    }
                }
            }
            let m = from_dense(&dense, false);
            let a = m.abs();
            let norm = spectral_norm(&m, 1e-10).unwrap();
            let norm_abs = spectral_norm(&a, 1e-10).unwrap();
            let expected = dense_norm(&dense);
            let expected_abs = dense_norm(&dense.abs());
            assert!((norm - expected).abs() <= 1e-8 * expected.max(1.0), "trial {trial}: {norm} vs {expected}");
            assert!((norm_abs - expected_abs).abs() <= 1e-8 * expected_abs.max(1.0), "trial {trial}");
            assert!(norm <= norm_abs + 1e-9);
        }
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let m = from_dense(&DMatrix::identity(3, 3), false);
        assert!(spectral_norm(&m, 0.0).is_err());
    }

    pub(crate) fn from_dense(d: &DMatrix<f64>, absolute: bool) -> SectorMatrix {
        let n = d.nrows();
        let mut row_ptr = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for i in 0..n {
            for j in 0..n {
                if d[(i, j)] != 0.0 {
                    cols.push(j as u32);
                    vals.push(d[(i, j)]);
                }
            }
            row_ptr.push(cols.len());
        }
        SectorMatrix {
            basis: (0..n as u64).map(Determinant::from_u64).collect(),
            row_ptr,
            cols,
            vals,
            absolute,
        }
    }
}
