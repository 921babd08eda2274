//! Bit-encoded Slater determinants over spin orbitals.
//!
//! Spin orbitals are interleaved: orbital `2i` is site `i` spin-up and
//! `2i + 1` is site `i` spin-down. A determinant is a fixed 256-bit mask, so
//! every system up to 128 spatial orbitals shares one `Copy` type.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::hamiltonians::SectorSpec;

const WORDS: usize = 4;

/// Largest number of spin orbitals a [`Determinant`] can address.
pub const MAX_SPIN_ORBITALS: usize = 64 * WORDS;

/// Largest sector that [`enumerate_sector`] will materialise.
pub const MAX_SECTOR_DIM: u128 = u32::MAX as u128;

/// Occupation bitmask over spin orbitals (bit set = occupied).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Determinant([u64; WORDS]);

impl Ord for Determinant {
    /// Ascending bitmask value.
    fn cmp(&self, other: &Self) -> Ordering {
        for w in (0..WORDS).rev() {
            match self.0[w].cmp(&other.0[w]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Determinant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Determinant {
    pub const EMPTY: Determinant = Determinant([0; WORDS]);

    pub fn from_orbitals<I: IntoIterator<Item = usize>>(orbitals: I) -> Self {
        let mut d = Self::EMPTY;
        for o in orbitals {
            d.set(o);
        }
        d
    }

    /// Builds a determinant from the low 64 spin orbitals.
    pub fn from_u64(bits: u64) -> Self {
        let mut d = Self::EMPTY;
        d.0[0] = bits;
        d
    }

    /// Parses a 0/1 string with orbital 0 leftmost.
    pub fn from_bit_string(s: &str) -> Result<Self> {
        let mut d = Self::EMPTY;
        for (i, c) in s.trim().chars().enumerate() {
            match c {
                '1' => {
                    if i >= MAX_SPIN_ORBITALS {
                        return Err(Error::Capacity(format!(
                            "determinant string longer than {MAX_SPIN_ORBITALS}"
                        )));
                    }
                    d.set(i)
                }
                '0' => {}
                _ => {
                    return Err(Error::Config(format!(
                        "invalid character {c:?} in determinant string"
                    )))
                }
            }
        }
        Ok(d)
    }

    pub fn words(&self) -> &[u64; WORDS] {
        &self.0
    }

    #[inline]
    pub fn is_occupied(&self, orbital: usize) -> bool {
        self.0[orbital >> 6] >> (orbital & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, orbital: usize) {
        self.0[orbital >> 6] |= 1 << (orbital & 63);
    }

    #[inline]
    pub fn clear(&mut self, orbital: usize) {
        self.0[orbital >> 6] &= !(1 << (orbital & 63));
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of occupied orbitals with index strictly below `orbital`.
    #[inline]
    pub fn count_below(&self, orbital: usize) -> usize {
        let w = orbital >> 6;
        let mut n = (self.0[w] & ((1u64 << (orbital & 63)) - 1)).count_ones() as usize;
        for lower in &self.0[..w] {
            n += lower.count_ones() as usize;
        }
        n
    }

    /// Number of occupied orbitals strictly between `a` and `b`.
    #[inline]
    pub fn count_between(&self, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.count_below(hi) - self.count_below(lo + 1)
    }

    /// Electrons with spin up (even orbitals) and spin down (odd orbitals).
    pub fn spin_counts(&self) -> (usize, usize) {
        const EVEN: u64 = 0x5555_5555_5555_5555;
        let up = self.0.iter().map(|w| (w & EVEN).count_ones() as usize).sum();
        (up, self.count() - up)
    }

    pub fn xor(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a ^= b;
        }
        out
    }

    pub fn and_not(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a &= !b;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    /// Iterator over occupied orbitals in ascending order.
    pub fn iter_occupied(&self) -> OccupiedIter {
        OccupiedIter {
            words: self.0,
            word: 0,
        }
    }

    /// Ascending indices of occupied orbitals.
    pub fn occupied_list(&self) -> Vec<usize> {
        self.iter_occupied().collect()
    }

    /// Applies `a_orbital`, returning the new determinant and the fermionic sign.
    #[inline]
    pub fn annihilate(&self, orbital: usize) -> Option<(Determinant, f64)> {
        if !self.is_occupied(orbital) {
            return None;
        }
        let mut d = *self;
        d.clear(orbital);
        Some((d, parity_sign(self.count_below(orbital))))
    }

    /// Applies `a†_orbital`, returning the new determinant and the fermionic sign.
    #[inline]
    pub fn create(&self, orbital: usize) -> Option<(Determinant, f64)> {
        if self.is_occupied(orbital) {
            return None;
        }
        let mut d = *self;
        d.set(orbital);
        Some((d, parity_sign(self.count_below(orbital))))
    }

    /// Applies `a†_to a_from`: the sign is the parity of occupied orbitals
    /// strictly between `from` and `to`.
    pub fn single_excite(&self, from: usize, to: usize) -> Result<(Determinant, f64)> {
        if from == to {
            return Err(Error::Excitation(format!("from == to == {from}")));
        }
        if from >= MAX_SPIN_ORBITALS || to >= MAX_SPIN_ORBITALS {
            return Err(Error::Excitation("orbital index out of range".into()));
        }
        if !self.is_occupied(from) {
            return Err(Error::Excitation(format!("orbital {from} is not occupied")));
        }
        if self.is_occupied(to) {
            return Err(Error::Excitation(format!("orbital {to} is already occupied")));
        }
        Ok(self.single_excite_unchecked(from, to))
    }

    #[inline]
    pub(crate) fn single_excite_unchecked(&self, from: usize, to: usize) -> (Determinant, f64) {
        let mut d = *self;
        d.clear(from);
        d.set(to);
        (d, parity_sign(self.count_between(from, to)))
    }

    /// Renders as a 0/1 string of `n_spin_orbitals` characters, orbital 0 leftmost.
    pub fn to_bit_string(&self, n_spin_orbitals: usize) -> String {
        (0..n_spin_orbitals)
            .map(|i| if self.is_occupied(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.iter_occupied().last().map_or(1, |i| i + 1);
        write!(f, "|{}⟩", self.to_bit_string(last))
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[inline]
pub(crate) fn parity_sign(n: usize) -> f64 {
    if n & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub struct OccupiedIter {
    words: [u64; WORDS],
    word: usize,
}

impl Iterator for OccupiedIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.word < WORDS {
            let w = &mut self.words[self.word];
            if *w != 0 {
                let bit = w.trailing_zeros() as usize;
                *w &= *w - 1;
                return Some(self.word * 64 + bit);
            }
            self.word += 1;
        }
        None
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of determinants in a sector.
pub fn sector_dimension(n_spatial: usize, sector: SectorSpec) -> u128 {
    binomial(n_spatial, sector.n_up).saturating_mul(binomial(n_spatial, sector.n_down))
}

/// All determinants with `n_up` up and `n_down` down electrons, ascending.
pub fn enumerate_sector(n_spatial: usize, sector: SectorSpec) -> Result<Vec<Determinant>> {
    sector.validate(n_spatial)?;
    if 2 * n_spatial > MAX_SPIN_ORBITALS {
        return Err(Error::Capacity(format!(
            "{} spin orbitals exceed the {MAX_SPIN_ORBITALS}-orbital determinant width",
            2 * n_spatial
        )));
    }
    let dim = sector_dimension(n_spatial, sector);
    if dim > MAX_SECTOR_DIM {
        return Err(Error::Capacity(format!(
            "sector dimension {dim} exceeds {MAX_SECTOR_DIM}"
        )));
    }
    let ups = spin_strings(n_spatial, sector.n_up, 0);
    let downs = spin_strings(n_spatial, sector.n_down, 1);
    let mut dets = Vec::with_capacity(dim as usize);
    for u in &ups {
        for d in &downs {
            let mut det = *u;
            for (a, b) in det.0.iter_mut().zip(d.0.iter()) {
                *a |= b;
            }
            dets.push(det);
        }
    }
    dets.sort_unstable();
    Ok(dets)
}

/// Determinants with `n` electrons placed on the sites of one spin species.
fn spin_strings(n_spatial: usize, n: usize, spin: usize) -> Vec<Determinant> {
    let mut out = Vec::with_capacity(binomial(n_spatial, n) as usize);
    let mut sites: Vec<usize> = (0..n).collect();
    loop {
        out.push(Determinant::from_orbitals(sites.iter().map(|s| 2 * s + spin)));
        // next combination in lexicographic order
        let Some(i) = (0..n).rev().find(|&i| sites[i] < n_spatial - n + i) else {
            return out;
        };
        sites[i] += 1;
        for j in i + 1..n {
            sites[j] = sites[j - 1] + 1;
        }
    }
}

/// Position of `det` inside a sorted basis.
pub fn basis_index(basis: &[Determinant], det: &Determinant) -> Option<usize> {
    basis.binary_search(det).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sign of `a†_to a_from |d⟩` evaluated by walking the operator string
    /// over an explicit occupation-number vector.
    fn brute_force_sign(occ: &[bool], from: usize, to: usize) -> Option<(Vec<bool>, f64)> {
        let mut v = occ.to_vec();
        let mut sign = 1.0;
        for &(orb, dagger) in &[(from, false), (to, true)] {
            if v[orb] == dagger {
                return None;
            }
            let passes = v[..orb].iter().filter(|&&b| b).count();
            if passes % 2 == 1 {
                sign = -sign;
            }
            v[orb] = dagger;
        }
        Some((v, sign))
    }

    #[test]
    fn single_excite_examples() {
        let d = Determinant::from_bit_string("110000").unwrap();
        let (e, s) = d.single_excite(0, 2).unwrap();
        assert_eq!(e, Determinant::from_bit_string("011000").unwrap());
        assert_eq!(s, -1.0);

        let d = Determinant::from_bit_string("100000").unwrap();
        let (e, s) = d.single_excite(0, 1).unwrap();
        assert_eq!(e, Determinant::from_bit_string("010000").unwrap());
        assert_eq!(s, 1.0);
    }

    #[test]
    fn single_excite_round_trip() {
        let d = Determinant::from_orbitals([0, 3, 4, 7]);
        for from in d.iter_occupied() {
            for to in 0..8 {
                if d.is_occupied(to) {
                    continue;
                }
                let (e, s1) = d.single_excite(from, to).unwrap();
                let (back, s2) = e.single_excite(to, from).unwrap();
                assert_eq!(back, d);
                assert_eq!(s1 * s2, 1.0);
            }
        }
    }

    #[test]
    fn single_excite_errors() {
        let d = Determinant::from_orbitals([0, 1]);
        assert!(matches!(d.single_excite(2, 3), Err(Error::Excitation(_))));
        assert!(matches!(d.single_excite(0, 1), Err(Error::Excitation(_))));
        assert!(matches!(d.single_excite(0, 0), Err(Error::Excitation(_))));
    }

    #[test]
    fn single_excite_matches_brute_force_exhaustively() {
        for n in 1..=8usize {
            for mask in 0u64..(1 << n) {
                let d = Determinant::from_u64(mask);
                let occ: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                for from in 0..n {
                    for to in 0..n {
                        let expected = if from != to {
                            brute_force_sign(&occ, from, to)
                        } else {
                            None
                        };
                        match (d.single_excite(from, to), expected) {
                            (Ok((e, s)), Some((v, s_ref))) => {
                                let bits: Vec<bool> = (0..n).map(|i| e.is_occupied(i)).collect();
                                assert_eq!(bits, v);
                                assert_eq!(s, s_ref, "mask {mask:b} {from}->{to}");
                            }
                            (Err(_), None) => {}
                            (got, want) => panic!("mask {mask:b} {from}->{to}: {got:?} vs {want:?}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn occupied_list_examples() {
        assert!(Determinant::EMPTY.occupied_list().is_empty());
        assert_eq!(Determinant::from_orbitals([0, 3, 5]).occupied_list(), vec![0, 3, 5]);
        let full = Determinant::from_orbitals(0..12);
        assert_eq!(full.occupied_list(), (0..12).collect::<Vec<_>>());
        let wide = Determinant::from_orbitals([1, 63, 64, 130, 255]);
        assert_eq!(wide.occupied_list(), vec![1, 63, 64, 130, 255]);
        assert_eq!(wide.count_below(130), 3);
        assert_eq!(wide.count_between(1, 255), 3);
    }

    #[test]
    fn enumerate_sector_sizes() {
        let one = enumerate_sector(1, SectorSpec::new(1, 0)).unwrap();
        assert_eq!(one, vec![Determinant::from_orbitals([0])]);
        assert_eq!(enumerate_sector(6, SectorSpec::new(3, 3)).unwrap().len(), 400);
        let big = enumerate_sector(10, SectorSpec::new(5, 5)).unwrap();
        assert_eq!(big.len(), 63504);
        assert!(big.windows(2).all(|w| w[0] < w[1]));
        assert!(big.iter().all(|d| d.spin_counts() == (5, 5)));
    }

    #[test]
    fn enumerate_sector_rejects_bad_input() {
        assert!(matches!(
            enumerate_sector(3, SectorSpec::new(4, 0)),
            Err(Error::InvalidSector(_))
        ));
        assert!(matches!(
            enumerate_sector(100, SectorSpec::new(50, 50)),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn ordering_is_numeric_across_words() {
        let lo = Determinant::from_orbitals([63]);
        let hi = Determinant::from_orbitals([64]);
        assert!(lo < hi);
        assert!(Determinant::from_orbitals([0, 200]) > Determinant::from_orbitals([199]));
    }

    #[test]
    fn bit_string_round_trip() {
        let d = Determinant::from_bit_string("0110001").unwrap();
        assert_eq!(d.to_bit_string(7), "0110001");
        assert_eq!(d.occupied_list(), vec![1, 2, 6]);
    }
}
