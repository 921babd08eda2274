//! Largest eigenvalue of `abs(A)` on a sector too large to store, for square
//! `L x L` lattices with at most 16 sites.
//!
//! `abs(A)` commutes with every site permutation (and spin flip) that leaves
//! `T` and `V` unchanged, because taking absolute values removes the fermionic
//! signs. Its Perron vector can therefore be taken symmetric, and the top
//! eigenvalue equals that of the orbit matrix
//! `Q_{OO'} = sqrt(|O| / |O'|) Σ_{E ∈ O'} |A_{D_O E}|`.

use trotter_bound::exact_oracle::{lanczos_extremes, LanczosOptions};
use trotter_bound::{CommutatorEngine, DiagonalCoulombHamiltonian, Determinant, SectorSpec};

pub struct Symmetry {
    perms: Vec<[u16; 16]>,
    lo: Vec<[u16; 256]>,
    hi: Vec<[u16; 256]>,
    min_image: Vec<u16>,
    args: Vec<u128>,
    spin_flip: bool,
}

fn invariant(h: &DiagonalCoulombHamiltonian, perm: &[u16; 16], n: usize, flip: bool) -> bool {
    let map = |p: usize| {
        let (site, spin) = (p / 2, p % 2);
        2 * perm[site] as usize + if flip { 1 - spin } else { spin }
    };
    let n_so = 2 * n;
    (0..n_so).all(|p| {
        (0..n_so).all(|q| {
            (h.hopping[(map(p), map(q))] - h.hopping[(p, q)]).abs() <= 1e-12 * (1.0 + h.hopping[(p, q)].abs())
                && (h.coulomb[(map(p), map(q))] - h.coulomb[(p, q)]).abs() <= 1e-12 * (1.0 + h.coulomb[(p, q)].abs())
        })
    })
}

impl Symmetry {
    /// Translations and square point-group operations of the `l x l` torus
    /// (site `x + l y`) that leave `h` invariant.
    pub fn square_torus(h: &DiagonalCoulombHamiltonian, l: usize, spin_flip: bool) -> Self {
        let n = l * l;
        assert!(n <= 16 && h.n_spatial == n);
        let mut perms: Vec<[u16; 16]> = Vec::new();
        for (sx, sy, swap) in [(1i64, 1i64, false), (-1, 1, false), (1, -1, false), (-1, -1, false), (1, 1, true), (-1, 1, true), (1, -1, true), (-1, -1, true)] {
            for tx in 0..l as i64 {
                for ty in 0..l as i64 {
                    let mut perm = [0u16; 16];
                    for site in 0..n {
                        let (x, y) = ((site % l) as i64, (site / l) as i64);
                        let (x, y) = if swap { (y, x) } else { (x, y) };
                        let nx = (sx * x + tx).rem_euclid(l as i64) as usize;
                        let ny = (sy * y + ty).rem_euclid(l as i64) as usize;
                        perm[site] = (nx + l * ny) as u16;
                    }
                    if !perms.contains(&perm) && invariant(h, &perm, n, false) {
                        perms.push(perm);
                    }
                }
            }
        }
        assert!(perms.len() <= 128);
        let identity: [u16; 16] = std::array::from_fn(|i| i as u16);
        let spin_flip = spin_flip && invariant(h, &identity, n, true);
        let image = |perm: &[u16; 16], m: u32| -> u16 {
            (0..16).filter(|&b| m >> b & 1 == 1).fold(0u16, |acc, b| acc | 1 << perm[b])
        };
        let lo: Vec<[u16; 256]> = perms.iter().map(|p| std::array::from_fn(|m| image(p, m as u32))).collect();
        let hi: Vec<[u16; 256]> = perms.iter().map(|p| std::array::from_fn(|m| image(p, (m as u32) << 8))).collect();
        let mut sym = Self { perms, lo, hi, min_image: vec![0; 1 << 16], args: vec![0; 1 << 16], spin_flip };
        for s in 0..1u32 << 16 {
            let s = s as u16;
            let mut best = u16::MAX;
            let mut args = 0u128;
            for g in 0..sym.perms.len() {
                let img = sym.apply(g, s);
                if img < best {
                    best = img;
                    args = 0;
                }
                if img == best {
                    args |= 1 << g;
                }
            }
            sym.min_image[s as usize] = best;
            sym.args[s as usize] = args;
        }
        sym
    }

    pub fn order(&self) -> usize {
        self.perms.len() * if self.spin_flip { 2 } else { 1 }
    }

    #[inline]
    fn apply(&self, g: usize, m: u16) -> u16 {
        self.lo[g][(m & 0xff) as usize] | self.hi[g][(m >> 8) as usize]
    }

    fn best_with(&self, lead: u16, lead_src: u16, other: u16) -> u32 {
        let mut args = self.args[lead_src as usize];
        let mut best = u32::MAX;
        while args != 0 {
            let g = args.trailing_zeros() as usize;
            args &= args - 1;
            best = best.min((lead as u32) << 16 | self.apply(g, other) as u32);
        }
        best
    }

    /// Smallest `(up << 16) | down` over the orbit of `(u, d)`.
    pub fn canonical(&self, u: u16, d: u16) -> u32 {
        let mu = self.min_image[u as usize];
        if !self.spin_flip {
            return self.best_with(mu, u, d);
        }
        let md = self.min_image[d as usize];
        let mut best = u32::MAX;
        if mu <= md {
            best = best.min(self.best_with(mu, u, d));
        }
        if md <= mu {
            best = best.min(self.best_with(md, d, u));
        }
        best
    }

    pub fn orbit_size(&self, u: u16, d: u16) -> usize {
        let mut stab = 0;
        for g in 0..self.perms.len() {
            let (gu, gd) = (self.apply(g, u), self.apply(g, d));
            stab += usize::from((gu, gd) == (u, d));
            if self.spin_flip {
                stab += usize::from((gd, gu) == (u, d));
            }
        }
        self.order() / stab
    }
}

pub fn to_determinant(u: u16, d: u16) -> Determinant {
    let spread = |m: u16| (0..16).filter(|&b| m >> b & 1 == 1).fold(0u64, |acc, b| acc | 1 << (2 * b));
    Determinant::from_u64(spread(u) | spread(d) << 1)
}

pub fn split(det: &Determinant) -> (u16, u16) {
    let w = det.words()[0];
    let gather = |shift: u32| (0..16).fold(0u16, |acc, b| acc | (((w >> (2 * b + shift)) & 1) as u16) << b);
    (gather(0), gather(1))
}

pub struct QuotientResult {
    pub lambda: f64,
    pub n_orbits: usize,
    pub sector_dim: u128,
}

/// `λ_max(abs(A))` on `sector` through the orbit matrix.
pub fn abs_norm<E: CommutatorEngine>(engine: &E, sym: &Symmetry, n_sites: usize, sector: SectorSpec) -> QuotientResult {
    let strings = |k: usize| -> Vec<u16> { (0..1u32 << n_sites).filter(|m| m.count_ones() as usize == k).map(|m| m as u16).collect() };
    let ups = strings(sector.n_up);
    let downs = strings(sector.n_down);
    assert!(!sym.spin_flip || sector.n_up == sector.n_down);
    let lead: Vec<u16> = ups.iter().copied().filter(|&a| sym.min_image[a as usize] == a).collect();
    let mut reps: Vec<u32> = Vec::new();
    for &a in &lead {
        for &b in &downs {
            let key = (a as u32) << 16 | b as u32;
            if sym.canonical(a, b) == key {
                reps.push(key);
            }
        }
    }
    reps.sort_unstable();
    let sizes: Vec<f64> = reps.iter().map(|&k| sym.orbit_size((k >> 16) as u16, k as u16) as f64).collect();
    let total: f64 = sizes.iter().sum();
    let sector_dim = (ups.len() * downs.len()) as u128;
    assert_eq!(total as u128, sector_dim, "orbits do not tile the sector");

    let index = |key: u32| reps.binary_search(&key).expect("canonical key is a representative");
    let mut row_ptr = vec![0usize];
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut row: Vec<(u32, f64)> = Vec::new();
    for (i, &key) in reps.iter().enumerate() {
        let det = to_determinant((key >> 16) as u16, key as u16);
        row.clear();
        let diag = engine.diagonal(&det).abs();
        if diag != 0.0 {
            row.push((i as u32, diag));
        }
        engine.for_each_connection(&engine.prepare(&det), |e, a| {
            let (u, d) = split(&e);
            row.push((index(sym.canonical(u, d)) as u32, a.abs()));
        });
        row.sort_unstable_by_key(|x| x.0);
        let mut k = 0;
        while k < row.len() {
            let j = row[k].0;
            let mut s = 0.0;
            while k < row.len() && row[k].0 == j {
                s += row[k].1;
                k += 1;
            }
            cols.push(j);
            vals.push(s * (sizes[i] / sizes[j as usize]).sqrt());
        }
        row_ptr.push(cols.len());
    }
    let dim = reps.len();
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..dim {
            y[i] = (row_ptr[i]..row_ptr[i + 1]).map(|k| vals[k] * x[cols[k] as usize]).sum();
        }
    };
    let start: Vec<f64> = sizes.iter().map(|s| s.sqrt()).collect();
    let opts = LanczosOptions { tol: 1e-9, only_max: true, ..LanczosOptions::for_dim(dim) };
    let ex = lanczos_extremes(dim, apply, start, &opts).expect("orbit Lanczos converges");
    QuotientResult { lambda: ex.max, n_orbits: dim, sector_dim }
}
