//! The orbit-matrix oracle used by the acceptance suite, checked against the
//! full absolute-value matrix where the latter still fits.

mod common;

use common::quotient::{abs_norm, split, to_determinant, Symmetry};
use trotter_bound::hamiltonians::build_ueg_dual_plane_wave;
use trotter_bound::{build_sector_matrix, spectral_norm, Determinant, Engine, OperatorKind, SectorSpec};

#[test]
fn determinant_packing_round_trips() {
    for (u, d) in [(0b1011u16, 0b0110u16), (0xffff, 0), (0x8001, 0x7ffe)] {
        assert_eq!(split(&to_determinant(u, d)), (u, d));
    }
    assert_eq!(to_determinant(1, 1), Determinant::from_orbitals([0, 1]));
}

#[test]
fn orbit_matrix_matches_full_matrix() {
    let cases = [
        (2, SectorSpec::new(2, 2), OperatorKind::Vtv),
        (2, SectorSpec::new(2, 2), OperatorKind::Vtt),
        (4, SectorSpec::new(2, 2), OperatorKind::Vtv),
        (4, SectorSpec::new(2, 2), OperatorKind::Vtt),
        (4, SectorSpec::new(3, 2), OperatorKind::Vtv),
        (4, SectorSpec::new(3, 3), OperatorKind::Vtv),
    ];
    for (l, sector, kind) in cases {
        let h = build_ueg_dual_plane_wave(2, l, 10.0, l * l).unwrap();
        let e = Engine::build(&h, kind).unwrap();
        let sym = Symmetry::square_torus(&h, l, sector.n_up == sector.n_down);
        let q = abs_norm(&e, &sym, l * l, sector);
        let full = spectral_norm(&build_sector_matrix(&e, sector, true).unwrap(), 1e-11).unwrap();
        assert!((q.lambda - full).abs() <= 1e-8 * full, "L={l} {sector:?} {kind:?}: {} vs {full}", q.lambda);
        assert!(q.n_orbits < q.sector_dim as usize || l == 2);
    }
}
