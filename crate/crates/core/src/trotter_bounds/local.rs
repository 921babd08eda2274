//! Triangle-inequality bound for models whose interaction is purely on-site,
//! `V = Σ_i U_i n_{i↑} n_{i↓}`: each local term `[[n_{i↑} n_{i↓}, T], X]`
//! acts on a few orbitals and its norm is computed exactly on their Fock space.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::commutators::OperatorKind;
use crate::determinants::Determinant;
use crate::error::{Error, Result};
use crate::exact_oracle::{lanczos_extremes, pseudo_random_start, LanczosOptions};
use crate::fermion_ops::{FermionOperator, Ladder};
use crate::hamiltonians::DiagonalCoulombHamiltonian;

/// Largest number of modes whose Fock space is diagonalized.
pub const MAX_LOCAL_MODES: usize = 16;

const DENSE_MODES: usize = 10;

/// `[[n_{i↑} n_{i↓}, T], X]` with `X = T` or `X = V`.
pub fn local_commutator(h: &DiagonalCoulombHamiltonian, site: usize, which: OperatorKind) -> FermionOperator {
    let (t, v) = FermionOperator::from_hamiltonian(h);
    local_from_ops(&t, &v, site, which)
}

fn local_from_ops(t: &FermionOperator, v: &FermionOperator, site: usize, which: OperatorKind) -> FermionOperator {
    let pair = FermionOperator::number_pair(2 * site, 2 * site + 1, 1.0);
    let inner = FermionOperator::commutator(&pair, t);
    FermionOperator::commutator(&inner, if which == OperatorKind::Vtt { t } else { v })
}

/// Spectral norm of `op` on the full Fock space of `n_modes` modes.
pub fn fock_space_norm(op: &FermionOperator, n_modes: usize) -> Result<f64> {
    if n_modes > MAX_LOCAL_MODES {
        return Err(Error::Capacity(format!(
            "local support of {n_modes} modes exceeds the limit of {MAX_LOCAL_MODES}"
        )));
    }
    if op.is_empty() {
        return Ok(0.0);
    }
    let dim = 1usize << n_modes;
    let columns: Vec<BTreeMap<Determinant, f64>> = (0..dim as u64).map(|b| op.apply(&Determinant::from_u64(b))).collect();
    if n_modes <= DENSE_MODES {
        let mut m = DMatrix::zeros(dim, dim);
        for (j, col) in columns.iter().enumerate() {
            for (d, &c) in col {
                m[(d.words()[0] as usize, j)] = c;
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        return Ok(SymmetricEigen::new(sym).eigenvalues.iter().fold(0.0, |a: f64, x| a.max(x.abs())));
    }
    let sparse: Vec<Vec<(usize, f64)>> = columns
        .iter()
        .map(|col| col.iter().map(|(d, &c)| (d.words()[0] as usize, c)).collect())
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, col) in sparse.iter().enumerate() {
            for &(i, c) in col {
                y[i] += c * x[j];
            }
        }
    };
    let start = pseudo_random_start(dim, 0x10ca1);
    Ok(lanczos_extremes(dim, apply, start, &LanczosOptions::for_dim(dim))?.norm())
}

/// Rewrites a ≤2-body operator in an orthonormal basis of the single-particle
/// modes it touches. Returns the rotated operator and the number of modes.
fn compress_modes(op: &FermionOperator, n: usize) -> Result<(FermionOperator, usize)> {
    let t = op.to_one_two_body_tensors(n)?;
    // Antisymmetric two-body tensor: op = Σ h1 a†a + ¼ Σ A a†a†aa.
    let mut anti: BTreeMap<[usize; 4], f64> = BTreeMap::new();
    for (idx, &c) in t.h2.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let (p, q, r, s) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
        for (a, b, sab) in [(p, q, 1.0), (q, p, -1.0)] {
            for (x, y, sxy) in [(r, s, 1.0), (s, r, -1.0)] {
                *anti.entry([a, b, x, y]).or_insert(0.0) += sab * sxy * c;
            }
        }
    }
    // The range of the Gram matrix of every tensor unfolding is the mode support.
    let h1 = DMatrix::from_row_slice(n, n, &t.h1);
    let mut gram = &h1 * h1.transpose() + h1.transpose() * &h1;
    for axis in 0..4 {
        let mut groups: BTreeMap<[usize; 3], Vec<(usize, f64)>> = BTreeMap::new();
        for (o, &c) in &anti {
            let rest: Vec<usize> = (0..4).filter(|&k| k != axis).map(|k| o[k]).collect();
            groups.entry([rest[0], rest[1], rest[2]]).or_default().push((o[axis], c));
        }
        for entries in groups.values() {
            for &(p, a) in entries {
                for &(q, b) in entries {
                    gram[(p, q)] += a * b;
                }
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x));
    if top == 0.0 {
        return Ok((FermionOperator::identity(t.scalar), 0));
    }
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-20 * top).collect();
    let m = keep.len();
    if m > MAX_LOCAL_MODES {
        return Err(Error::Capacity(format!("local operator touches {m} modes, more than {MAX_LOCAL_MODES}")));
    }
    let w = DMatrix::from_fn(n, m, |p, a| eig.eigenvectors[(p, keep[a])]);
    let h1r = w.transpose() * &h1 * &w;
    // Rotate the two-body tensor one index at a time.
    let mut cur: BTreeMap<[usize; 4], f64> = anti;
    for axis in 0..4 {
        let mut next: BTreeMap<[usize; 4], f64> = BTreeMap::new();
        for (o, &c) in &cur {
            for a in 0..m {
                let mut key = *o;
                key[axis] = a;
                *next.entry(key).or_insert(0.0) += c * w[(o[axis], a)];
            }
        }
        cur = next;
    }
    let mut out = FermionOperator::identity(t.scalar);
    for a in 0..m {
        for b in 0..m {
            let c = h1r[(a, b)];
            if c.abs() > 1e-14 {
                out.add_product(&[Ladder::create(a), Ladder::annihilate(b)], c);
            }
        }
    }
    for (o, &c) in &cur {
        if c.abs() > 1e-14 {
            out.add_product(&[Ladder::create(o[0]), Ladder::create(o[1]), Ladder::annihilate(o[2]), Ladder::annihilate(o[3])], 0.25 * c);
        }
    }
    Ok((out, m))
}

/// Relabels the support of `op` onto consecutive modes.
fn relabel_support(op: &FermionOperator) -> (FermionOperator, usize) {
    let support: Vec<usize> = op.support().into_iter().collect();
    let map: BTreeMap<usize, usize> = support.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut out = FermionOperator::new();
    for (m, c) in op.terms() {
        let seq: Vec<Ladder> = m
            .iter()
            .map(|l| Ladder { orbital: map[&(l.orbital as usize)] as u16, dagger: l.dagger })
            .collect();
        out.add_product(&seq, c);
    }
    (out, support.len())
}

/// `Σ_i |U_i| ‖[[n_{i↑} n_{i↓}, T], X]‖` for a model with on-site interactions only.
///
/// `[[V,T],T]` terms are at most two-body, so their norm is evaluated after
/// rotating to the few single-particle modes they involve. `[[V,T],V]` terms
/// are three-body and use their support in the site basis.
pub fn tighter_triangle_bound(h: &DiagonalCoulombHamiltonian, which: OperatorKind) -> Result<f64> {
    if !h.is_onsite_only() {
        return Err(Error::Applicability("the interaction has off-site terms".into()));
    }
    let (t, v) = FermionOperator::from_hamiltonian(h);
    let mut total = 0.0;
    for site in 0..h.n_spatial {
        let u = h.coulomb[(2 * site, 2 * site + 1)];
        if u == 0.0 {
            continue;
        }
        let local = local_from_ops(&t, &v, site, which);
        let norm = match which {
            OperatorKind::Vtt => {
                let (rotated, m) = compress_modes(&local, h.n_spin_orbitals())?;
                fock_space_norm(&rotated, m)?
            }
            OperatorKind::Vtv => {
                let (relabelled, m) = relabel_support(&local);
                fock_space_norm(&relabelled, m)?
            }
        };
        total += u.abs() * norm;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::*;

    fn full_fock_norm(op: &FermionOperator, n: usize) -> f64 {
        let dim = 1 << n;
        let m = DMatrix::from_fn(dim, dim, |i, j| op.matrix_element(&Determinant::from_u64(i as u64), &Determinant::from_u64(j as u64)));
        SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    }

    #[test]
    fn hubbard_dimer_matches_full_diagonalization() {
        let h = build_extended_hubbard_1d(2, 1.0, 4.0, 0.0, false).unwrap();
        let (vtt, vtv) = crate::fermion_ops::nested_commutators(&h);
        for (which, full) in [(OperatorKind::Vtt, vtt), (OperatorKind::Vtv, vtv)] {
            let local = local_commutator(&h, 0, which);
            let local_norm = full_fock_norm(&local, 4);
            let bound = tighter_triangle_bound(&h, which).unwrap();
            // Both sites are equivalent under reflection.
            assert!((bound - 2.0 * 4.0 * local_norm).abs() < 1e-9 * bound, "{which:?}");
            assert!(full_fock_norm(&full, 4) <= bound + 1e-9);
        }
    }

    #[test]
    fn compression_preserves_norm() {
        let h = build_cuprate_square(2, 2, 1.0, 0.3, 0.2, 8.0, true).unwrap();
        let local = local_commutator(&h, 1, OperatorKind::Vtt);
        let (rotated, m) = compress_modes(&local, 8).unwrap();
        assert!(m <= 8);
        let direct = full_fock_norm(&local, 8);
        assert!((fock_space_norm(&rotated, m).unwrap() - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn zero_u_and_off_site_interactions() {
        let h = build_cuprate_square(2, 2, 1.0, 0.3, 0.2, 0.0, false).unwrap();
        assert_eq!(tighter_triangle_bound(&h, OperatorKind::Vtt).unwrap(), 0.0);
        let ext = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        assert!(matches!(tighter_triangle_bound(&ext, OperatorKind::Vtv), Err(Error::Applicability(_))));
    }

    #[test]
    fn sparse_path_agrees_with_dense() {
        // An edge site of a 3x3 open lattice with diagonal hopping reaches five
        // other sites, 12 modes in all.
        let h = build_cuprate_square(3, 3, 1.0, 0.4, 0.0, 8.0, false).unwrap();
        let local = local_commutator(&h, 1, OperatorKind::Vtv);
        let (relabelled, m) = relabel_support(&local);
        assert!(m > DENSE_MODES && m <= MAX_LOCAL_MODES, "{m}");
        let sparse = fock_space_norm(&relabelled, m).unwrap();
        // The operator conserves both spin populations, so diagonalize block by block.
        let mut blocks: BTreeMap<(u32, u32), Vec<u64>> = BTreeMap::new();
        for b in 0..1u64 << m {
            let even = (b & 0x5555_5555_5555_5555).count_ones();
            blocks.entry((even, b.count_ones() - even)).or_default().push(b);
        }
        let mut dense: f64 = 0.0;
        for states in blocks.values() {
            let k = states.len();
            let mut mat = DMatrix::<f64>::zeros(k, k);
            for (j, &s) in states.iter().enumerate() {
                for (d, c) in relabelled.apply(&Determinant::from_u64(s)) {
                    let i = states.binary_search(&d.words()[0]).expect("block conserved");
                    mat[(i, j)] += c;
                }
            }
            let e = SymmetricEigen::new(mat).eigenvalues;
            dense = e.iter().fold(dense, |a, x| a.max(x.abs()));
        }
        assert!((sparse - dense).abs() < 1e-7 * dense, "{sparse} vs {dense}");
    }
}
