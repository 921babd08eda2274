//! Diagonal-Coulomb Hamiltonians `H = Σ T_ij a†_i a_j + Σ_{i<j} V_ij n_i n_j`
//! and builders for the lattice, molecular and electron-gas families.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "dimensionless")]
    Dimensionless,
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "Ha")]
    Hartree,
}

impl Units {
    pub fn label(&self) -> &'static str {
        match self {
            Units::Dimensionless => "dimensionless",
            Units::ElectronVolt => "eV",
            Units::Hartree => "Ha",
        }
    }
}

/// Hopping matrix `T` and density-density matrix `V` over `2 n_spatial`
/// interleaved spin orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalCoulombHamiltonian {
    pub n_spatial: usize,
    pub hopping: DMatrix<f64>,
    pub coulomb: DMatrix<f64>,
    pub units: Units,
}

/// Electron counts per spin species.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SectorSpec {
    pub n_up: usize,
    pub n_down: usize,
}

impl SectorSpec {
    pub fn new(n_up: usize, n_down: usize) -> Self {
        Self { n_up, n_down }
    }

    /// `n_up = n_down = N/2`; odd `N` has no `s_z = 0` half-filled sector.
    pub fn half_filling(n_spatial: usize) -> Result<Self> {
        if n_spatial % 2 != 0 {
            return Err(Error::InvalidSector(format!(
                "half filling with s_z = 0 needs an even number of sites, got {n_spatial}"
            )));
        }
        Ok(Self::new(n_spatial / 2, n_spatial / 2))
    }

    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn validate(&self, n_spatial: usize) -> Result<()> {
        if self.n_up > n_spatial || self.n_down > n_spatial {
            return Err(Error::InvalidSector(format!(
                "({}, {}) electrons do not fit in {n_spatial} spatial orbitals",
                self.n_up, self.n_down
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn spin_of(orbital: usize) -> usize {
    orbital & 1
}

#[inline]
pub fn site_of(orbital: usize) -> usize {
    orbital >> 1
}

impl DiagonalCoulombHamiltonian {
    pub fn zeros(n_spatial: usize, units: Units) -> Self {
        let n = 2 * n_spatial;
        Self {
            n_spatial,
            hopping: DMatrix::zeros(n, n),
            coulomb: DMatrix::zeros(n, n),
            units,
        }
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    /// Sets `T_{iσ,jσ} = T_{jσ,iσ} = value` for both spins.
    pub fn set_hopping(&mut self, i: usize, j: usize, value: f64) {
        for s in 0..2 {
            self.hopping[(2 * i + s, 2 * j + s)] = value;
            self.hopping[(2 * j + s, 2 * i + s)] = value;
        }
    }

    /// Sets `V` symmetrically between spin orbitals `p != q`.
    pub fn set_coulomb(&mut self, p: usize, q: usize, value: f64) {
        self.coulomb[(p, q)] = value;
        self.coulomb[(q, p)] = value;
    }

    /// Density-density interaction between all four spin pairs of sites `i != j`.
    pub fn set_site_coulomb(&mut self, i: usize, j: usize, value: f64) {
        for s in 0..2 {
            for s2 in 0..2 {
                self.set_coulomb(2 * i + s, 2 * j + s2, value);
            }
        }
    }

    /// On-site `U n_{i↑} n_{i↓}`.
    pub fn set_onsite(&mut self, i: usize, u: f64) {
        self.set_coulomb(2 * i, 2 * i + 1, u);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_spin_orbitals();
        if self.hopping.shape() != (n, n) || self.coulomb.shape() != (n, n) {
            return Err(Error::InvalidHamiltonian(format!(
                "matrices must be {n}x{n} for {} spatial orbitals",
                self.n_spatial
            )));
        }
        for i in 0..n {
            if self.coulomb[(i, i)] != 0.0 {
                return Err(Error::InvalidHamiltonian(format!(
                    "coulomb diagonal entry {i} is nonzero"
                )));
            }
            for j in 0..n {
                let (t, v) = (self.hopping[(i, j)], self.coulomb[(i, j)]);
                if (t - self.hopping[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidHamiltonian(format!("hopping not symmetric at ({i}, {j})")));
                }
                if (v - self.coulomb[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidHamiltonian(format!("coulomb not symmetric at ({i}, {j})")));
                }
                if spin_of(i) != spin_of(j) && t != 0.0 {
                    return Err(Error::InvalidHamiltonian(format!(
                        "hopping ({i}, {j}) couples opposite spins"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when the only interactions are on-site `n_{i↑} n_{i↓}` terms.
    pub fn is_onsite_only(&self) -> bool {
        let n = self.n_spin_orbitals();
        (0..n).all(|p| (0..n).all(|q| self.coulomb[(p, q)] == 0.0 || site_of(p) == site_of(q)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HamiltonianDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HamiltonianDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Wire format: dense row-major matrices over spin orbitals.
#[derive(Serialize, Deserialize)]
pub struct HamiltonianDocument {
    pub n_spatial: usize,
    pub units: Units,
    pub hopping: Vec<f64>,
    pub coulomb: Vec<f64>,
}

impl From<&DiagonalCoulombHamiltonian> for HamiltonianDocument {
    fn from(h: &DiagonalCoulombHamiltonian) -> Self {
        // nalgebra is column-major; the transpose iterates row-major.
        Self {
            n_spatial: h.n_spatial,
            units: h.units,
            hopping: h.hopping.transpose().iter().copied().collect(),
            coulomb: h.coulomb.transpose().iter().copied().collect(),
        }
    }
}

impl TryFrom<HamiltonianDocument> for DiagonalCoulombHamiltonian {
    type Error = Error;

    fn try_from(doc: HamiltonianDocument) -> Result<Self> {
        let n = 2 * doc.n_spatial;
        if doc.hopping.len() != n * n || doc.coulomb.len() != n * n {
            return Err(Error::InvalidHamiltonian(format!(
                "expected {} matrix entries for {} spatial orbitals",
                n * n,
                doc.n_spatial
            )));
        }
        let h = Self {
            n_spatial: doc.n_spatial,
            hopping: DMatrix::from_row_slice(n, n, &doc.hopping),
            coulomb: DMatrix::from_row_slice(n, n, &doc.coulomb),
            units: doc.units,
        };
        h.validate()?;
        Ok(h)
    }
}

/// Extended Hubbard Hamiltonian on an explicit list of bonds.
fn extended_hubbard(n_sites: usize, bonds: &BTreeSet<(usize, usize)>, tau: f64, u: f64, v: f64) -> DiagonalCoulombHamiltonian {
    let mut h = DiagonalCoulombHamiltonian::zeros(n_sites, Units::Dimensionless);
    for &(i, j) in bonds {
        h.set_hopping(i, j, -tau);
        h.set_site_coulomb(i, j, v);
    }
    for i in 0..n_sites {
        h.set_onsite(i, u);
    }
    h
}

fn bond(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Bonds of a 1D chain; periodic chains of length 2 keep a single bond.
pub fn chain_bonds(n_sites: usize, periodic: bool) -> BTreeSet<(usize, usize)> {
    let mut bonds: BTreeSet<_> = (0..n_sites.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if periodic && n_sites > 2 {
        bonds.insert(bond(n_sites - 1, 0));
    }
    bonds
}

/// 1D extended Hubbard chain: hopping `-τ`, on-site `U`, nearest-neighbour `V`
/// between all four spin pairs of each bond.
pub fn build_extended_hubbard_1d(n_sites: usize, tau: f64, u: f64, v: f64, periodic: bool) -> Result<DiagonalCoulombHamiltonian> {
    if n_sites < 2 {
        return Err(Error::InvalidLattice(format!("a chain needs at least 2 sites, got {n_sites}")));
    }
    Ok(extended_hubbard(n_sites, &chain_bonds(n_sites, periodic), tau, u, v))
}

/// Bonds of a periodic honeycomb of `cells_x × cells_y` two-site unit cells.
///
/// Site `2 (x + cells_x y)` is the A sublattice, the next index is B. Each A
/// site bonds to B in its own cell and in the cells at `-x` and `-y`.
/// Coincident bonds on small tori are kept once.
pub fn honeycomb_bonds(cells_x: usize, cells_y: usize) -> BTreeSet<(usize, usize)> {
    let cell = |x: usize, y: usize| 2 * ((x % cells_x) + cells_x * (y % cells_y));
    let mut bonds = BTreeSet::new();
    for x in 0..cells_x {
        for y in 0..cells_y {
            let a = cell(x, y);
            for (bx, by) in [(x, y), (x + cells_x - 1, y), (x, y + cells_y - 1)] {
                bonds.insert(bond(a, cell(bx, by) + 1));
            }
        }
    }
    bonds
}

pub fn build_extended_hubbard_hexagonal(cells_x: usize, cells_y: usize, tau: f64, u: f64, v: f64) -> Result<DiagonalCoulombHamiltonian> {
    if cells_x < 1 || cells_y < 1 {
        return Err(Error::InvalidLattice("honeycomb needs at least one unit cell per direction".into()));
    }
    let n_sites = 2 * cells_x * cells_y;
    Ok(extended_hubbard(n_sites, &honeycomb_bonds(cells_x, cells_y), tau, u, v))
}

/// Square-lattice cuprate model with 1st, 2nd and 3rd neighbour hopping and
/// on-site `U`. Sites are numbered `x + len_x y`.
///
/// On small periodic lattices a pair reachable through several neighbour
/// shells takes the hopping of the nearest shell.
pub fn build_cuprate_square(
    len_x: usize,
    len_y: usize,
    tau: f64,
    tau_p: f64,
    tau_pp: f64,
    u: f64,
    periodic: bool,
) -> Result<DiagonalCoulombHamiltonian> {
    if len_x < 2 || len_y < 2 {
        return Err(Error::InvalidLattice(format!("square lattice must be at least 2x2, got {len_x}x{len_y}")));
    }
    let n_sites = len_x * len_y;
    let mut h = DiagonalCoulombHamiltonian::zeros(n_sites, Units::Dimensionless);
    let shells: [(f64, &[(i64, i64)]); 3] = [
        (tau, &[(1, 0), (-1, 0), (0, 1), (0, -1)]),
        (tau_p, &[(1, 1), (1, -1), (-1, 1), (-1, -1)]),
        (tau_pp, &[(2, 0), (-2, 0), (0, 2), (0, -2)]),
    ];
    let wrap = |c: i64, len: usize| -> Option<usize> {
        let l = len as i64;
        if periodic {
            Some(c.rem_euclid(l) as usize)
        } else if (0..l).contains(&c) {
            Some(c as usize)
        } else {
            None
        }
    };
    let mut assigned = BTreeSet::new();
    for (amplitude, shifts) in shells {
        let mut shell_pairs = BTreeSet::new();
        for y in 0..len_y {
            for x in 0..len_x {
                let i = x + len_x * y;
                for &(dx, dy) in shifts {
                    let (Some(nx), Some(ny)) = (wrap(x as i64 + dx, len_x), wrap(y as i64 + dy, len_y)) else {
                        continue;
                    };
                    let j = nx + len_x * ny;
                    if i != j && !assigned.contains(&bond(i, j)) {
                        shell_pairs.insert(bond(i, j));
                    }
                }
            }
        }
        for &(i, j) in &shell_pairs {
            h.set_hopping(i, j, -amplitude);
        }
        assigned.extend(shell_pairs);
    }
    for i in 0..n_sites {
        h.set_onsite(i, u);
    }
    Ok(h)
}

/// Parameters of the Pariser–Parr–Pople model (Ohno-type interpolation
/// `V(r) = U / sqrt(1 + α r²)`). Energies in eV, lengths in Å.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PppParams {
    pub hopping: f64,
    pub onsite: f64,
    pub alpha: f64,
    pub bond_length: f64,
}

impl Default for PppParams {
    fn default() -> Self {
        Self {
            hopping: 2.4,
            onsite: 11.13,
            alpha: 0.612,
            bond_length: 1.4,
        }
    }
}

/// Carbon positions of a linear acene made of `n_rings` fused regular
/// hexagons sharing vertical edges.
pub fn acene_coordinates(n_rings: usize, bond_length: f64) -> Vec<[f64; 2]> {
    let b = bond_length;
    let h = b * 3f64.sqrt() / 2.0;
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4 * n_rings + 2);
    for r in 0..n_rings {
        let x0 = 2.0 * h * r as f64;
        for p in [
            [x0 - h, b / 2.0],
            [x0 - h, -b / 2.0],
            [x0, b],
            [x0, -b],
            [x0 + h, b / 2.0],
            [x0 + h, -b / 2.0],
        ] {
            if !pts.iter().any(|q| (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9) {
                pts.push(p);
            }
        }
    }
    pts
}

/// PPP Hamiltonian for arbitrary carbon positions: nearest neighbours (at the
/// bond length) hop with `-t`, all distinct sites interact.
pub fn build_ppp(coords: &[[f64; 2]], params: PppParams) -> DiagonalCoulombHamiltonian {
    let n = coords.len();
    let mut h = DiagonalCoulombHamiltonian::zeros(n, Units::ElectronVolt);
    for i in 0..n {
        h.set_onsite(i, params.onsite);
        for j in i + 1..n {
            let r = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            if (r - params.bond_length).abs() < 1e-6 {
                h.set_hopping(i, j, -params.hopping);
            }
            h.set_site_coulomb(i, j, params.onsite / (1.0 + params.alpha * r * r).sqrt());
        }
    }
    h
}

pub fn build_ppp_acene(n_rings: usize) -> Result<DiagonalCoulombHamiltonian> {
    if n_rings < 1 {
        return Err(Error::InvalidLattice("an acene needs at least one ring".into()));
    }
    let params = PppParams::default();
    Ok(build_ppp(&acene_coordinates(n_rings, params.bond_length), params))
}

/// Cell volume (3D) or area (2D) for `n_electrons` at Wigner–Seitz radius `r_s`.
pub fn wigner_seitz_volume(dim: usize, r_s: f64, n_electrons: usize) -> f64 {
    let per_particle = if dim == 2 { PI * r_s * r_s } else { 4.0 / 3.0 * PI * r_s.powi(3) };
    per_particle * n_electrons as f64
}

/// Uniform electron gas on a `grid_side^dim` dual plane-wave grid (Hartree
/// units). Grid point `i` has integer coordinates `i = Σ_d c_d grid_side^d`.
pub fn build_ueg_dual_plane_wave(dim: usize, grid_side: usize, r_s: f64, n_electrons: usize) -> Result<DiagonalCoulombHamiltonian> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if grid_side < 2 || grid_side % 2 != 0 {
        return Err(Error::InvalidGrid(format!("grid side must be even and >= 2, got {grid_side}")));
    }
    if !(r_s > 0.0) {
        return Err(Error::InvalidGrid(format!("r_s must be positive, got {r_s}")));
    }
    if n_electrons < 1 {
        return Err(Error::InvalidGrid("at least one electron is needed to fix the cell size".into()));
    }
    let l = grid_side;
    let n_points = l.pow(dim as u32);
    let volume = wigner_seitz_volume(dim, r_s, n_electrons);
    let side = volume.powf(1.0 / dim as f64);
    let coords = |mut i: usize| -> Vec<i64> {
        (0..dim)
            .map(|_| {
                let c = (i % l) as i64;
                i /= l;
                c
            })
            .collect()
    };
    // Integer momenta ν_d ∈ {-L/2, …, L/2 - 1}.
    let momenta: Vec<Vec<i64>> = (0..n_points)
        .map(|i| coords(i).into_iter().map(|c| c - (l / 2) as i64).collect())
        .collect();
    let k_unit = 2.0 * PI / side;
    // cos(k_ν · (r_i - r_j)) only depends on the displacement modulo L, so
    // tabulate the matrix elements per displacement.
    let mut t_disp = vec![0.0; n_points];
    let mut v_disp = vec![0.0; n_points];
    for (m, (t_out, v_out)) in t_disp.iter_mut().zip(v_disp.iter_mut()).enumerate() {
        let disp = coords(m);
        let (mut t, mut v) = (0.0, 0.0);
        for nu in &momenta {
            let k2 = nu.iter().map(|&c| (c as f64 * k_unit).powi(2)).sum::<f64>();
            let phase: i64 = nu.iter().zip(&disp).map(|(a, b)| a * b).sum();
            let cos = (2.0 * PI * phase as f64 / l as f64).cos();
            t += k2 * cos / (2.0 * n_points as f64);
            if k2 > 0.0 {
                v += 4.0 * PI * cos / (volume * k2);
            }
        }
        *t_out = t;
        *v_out = v;
    }
    let mut h = DiagonalCoulombHamiltonian::zeros(n_points, Units::Hartree);
    let disp_index = |i: usize, j: usize| -> usize {
        let (ci, cj) = (coords(i), coords(j));
        ci.iter()
            .zip(&cj)
            .rev()
            .fold(0, |acc, (a, b)| acc * l + (a - b).rem_euclid(l as i64) as usize)
    };
    for i in 0..n_points {
        for j in 0..n_points {
            let m = disp_index(i, j);
            for s in 0..2 {
                h.hopping[(2 * i + s, 2 * j + s)] = t_disp[m];
                for s2 in 0..2 {
                    let (p, q) = (2 * i + s, 2 * j + s2);
                    if p != q {
                        h.coulomb[(p, q)] = v_disp[m];
                    }
                }
            }
        }
    }
    Ok(h)
}
