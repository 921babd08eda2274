//! Second-quantized operator algebra with real coefficients.
//!
//! Monomials are stored in canonical normal order: creation operators left of
//! annihilation operators, ascending orbital index within each group.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::determinants::Determinant;
use crate::error::{Error, Result};
use crate::hamiltonians::DiagonalCoulombHamiltonian;

/// Coefficients smaller than this are dropped after every arithmetic pass.
pub const DROP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub orbital: u16,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(orbital: usize) -> Self {
        Self { orbital: orbital as u16, dagger: true }
    }

    pub fn annihilate(orbital: usize) -> Self {
        Self { orbital: orbital as u16, dagger: false }
    }

    /// Position in canonical order: all creations first, then annihilations.
    fn key(&self) -> (u8, u16) {
        (u8::from(!self.dagger), self.orbital)
    }
}

impl PartialOrd for Ladder {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ladder {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

pub type Monomial = SmallVec<[Ladder; 6]>;

/// Number of creation and annihilation operators in a canonical monomial.
pub fn monomial_shape(m: &[Ladder]) -> (usize, usize) {
    let c = m.iter().take_while(|l| l.dagger).count();
    (c, m.len() - c)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FermionOperator {
    terms: BTreeMap<Monomial, f64>,
}

/// Normal-orders `coeff · seq` and accumulates the result into `out`.
///
/// Insertion sort over the canonical key. Moving a creation operator past an
/// annihilation operator of the same orbital branches off the contraction
/// `a_p a†_p = 1 - a†_p a_p`.
fn normal_order_into(mut seq: Monomial, mut coeff: f64, out: &mut BTreeMap<Monomial, f64>) {
    for i in 1..seq.len() {
        let mut j = i;
        while j > 0 {
            let (left, right) = (seq[j - 1], seq[j]);
            if right.dagger && !left.dagger {
                if left.orbital == right.orbital {
                    let mut contracted = seq.clone();
                    contracted.remove(j);
                    contracted.remove(j - 1);
                    normal_order_into(contracted, coeff, out);
                }
            } else if left == right {
                return;
            } else if left < right {
                break;
            }
            seq.swap(j - 1, j);
            coeff = -coeff;
            j -= 1;
        }
    }
    *out.entry(seq).or_insert(0.0) += coeff;
}

fn is_canonical(m: &[Ladder]) -> bool {
    m.windows(2).all(|w| w[0] < w[1])
}

/// Whether two canonical monomials commute trivially: both of even length
/// and acting on disjoint orbitals.
fn trivially_commute(a: &[Ladder], b: &[Ladder]) -> bool {
    if a.len() % 2 != 0 || b.len() % 2 != 0 {
        return false;
    }
    !a.iter().any(|x| b.iter().any(|y| x.orbital == y.orbital))
}

impl FermionOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn identity(coeff: f64) -> Self {
        let mut op = Self::new();
        op.add_product(&[], coeff);
        op
    }

    /// `coeff` times an arbitrary (not necessarily ordered) ladder product.
    pub fn from_product(seq: &[Ladder], coeff: f64) -> Self {
        let mut op = Self::new();
        op.add_product(seq, coeff);
        op
    }

    pub fn hopping(i: usize, j: usize, coeff: f64) -> Self {
        Self::from_product(&[Ladder::create(i), Ladder::annihilate(j)], coeff)
    }

    pub fn number(i: usize) -> Self {
        Self::hopping(i, i, 1.0)
    }

    pub fn number_pair(i: usize, j: usize, coeff: f64) -> Self {
        Self::from_product(
            &[Ladder::create(i), Ladder::annihilate(i), Ladder::create(j), Ladder::annihilate(j)],
            coeff,
        )
    }

    pub fn add_product(&mut self, seq: &[Ladder], coeff: f64) {
        normal_order_into(seq.iter().copied().collect(), coeff, &mut self.terms);
        self.prune();
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= DROP_TOLERANCE);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &[Ladder]) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// `T_op = Σ T_ij a†_i a_j` and `V_op = Σ_{i<j} V_ij n_i n_j`.
    pub fn from_hamiltonian(h: &DiagonalCoulombHamiltonian) -> (Self, Self) {
        let n = h.n_spin_orbitals();
        let mut t = Self::new();
        let mut v = Self::new();
        for i in 0..n {
            for j in 0..n {
                let tij = h.hopping[(i, j)];
                if tij != 0.0 {
                    normal_order_into(
                        [Ladder::create(i), Ladder::annihilate(j)].into_iter().collect(),
                        tij,
                        &mut t.terms,
                    );
                }
                let vij = h.coulomb[(i, j)];
                if i < j && vij != 0.0 {
                    normal_order_into(
                        [Ladder::create(i), Ladder::annihilate(i), Ladder::create(j), Ladder::annihilate(j)]
                            .into_iter()
                            .collect(),
                        vij,
                        &mut v.terms,
                    );
                }
            }
        }
        t.prune();
        v.prune();
        (t, v)
    }

    fn product_into(&self, other: &Self, sign: f64, out: &mut BTreeMap<Monomial, f64>, skip_commuting: bool) {
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                if skip_commuting && trivially_commute(ma, mb) {
                    continue;
                }
                let seq: Monomial = ma.iter().chain(mb.iter()).copied().collect();
                normal_order_into(seq, sign * ca * cb, out);
            }
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::new();
        self.product_into(other, 1.0, &mut out.terms, false);
        out.prune();
        out
    }

    /// Normal-ordered `a b - b a`.
    pub fn commutator(a: &Self, b: &Self) -> Self {
        let mut out = Self::new();
        a.product_into(b, 1.0, &mut out.terms, true);
        b.product_into(a, -1.0, &mut out.terms, true);
        out.prune();
        out
    }

    pub fn hermitian_conjugate(&self) -> Self {
        let mut out = Self::new();
        for (m, &c) in &self.terms {
            let seq: Monomial = m
                .iter()
                .rev()
                .map(|l| Ladder { orbital: l.orbital, dagger: !l.dagger })
                .collect();
            normal_order_into(seq, c, &mut out.terms);
        }
        out.prune();
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = self.clone() - self.hermitian_conjugate();
        diff.terms.values().all(|c| c.abs() <= tol)
    }

    /// Re-normal-orders every stored term; a no-op on valid operators.
    pub fn normal_ordered(&self) -> Self {
        let mut out = Self::new();
        for (m, &c) in &self.terms {
            normal_order_into(m.clone(), c, &mut out.terms);
        }
        out.prune();
        out
    }

    pub fn is_normal_ordered(&self) -> bool {
        self.terms.keys().all(|m| is_canonical(m))
    }

    /// Sum of absolute coefficients in this fermionic representation.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Largest number of creation or annihilation operators in any term.
    pub fn particle_rank(&self) -> usize {
        self.terms
            .keys()
            .map(|m| {
                let (c, a) = monomial_shape(m);
                c.max(a)
            })
            .max()
            .unwrap_or(0)
    }

    /// Spin orbitals touched by any term.
    pub fn support(&self) -> BTreeSet<usize> {
        self.terms.keys().flat_map(|m| m.iter().map(|l| l.orbital as usize)).collect()
    }

    /// Applies a canonical monomial to a determinant, rightmost operator first.
    pub fn apply_monomial(m: &[Ladder], det: &Determinant) -> Option<(Determinant, f64)> {
        let mut d = *det;
        let mut sign = 1.0;
        for l in m.iter().rev() {
            let (next, s) = if l.dagger {
                d.create(l.orbital as usize)?
            } else {
                d.annihilate(l.orbital as usize)?
            };
            d = next;
            sign *= s;
        }
        Some((d, sign))
    }

    /// `op |det⟩` as a sparse list of determinants with amplitudes.
    pub fn apply(&self, det: &Determinant) -> BTreeMap<Determinant, f64> {
        let mut out = BTreeMap::new();
        for (m, &c) in &self.terms {
            if let Some((d, s)) = Self::apply_monomial(m, det) {
                *out.entry(d).or_insert(0.0) += s * c;
            }
        }
        out.retain(|_, c: &mut f64| c.abs() >= DROP_TOLERANCE);
        out
    }

    /// `⟨bra| op |ket⟩`.
    pub fn matrix_element(&self, bra: &Determinant, ket: &Determinant) -> f64 {
        self.terms
            .iter()
            .filter_map(|(m, &c)| match Self::apply_monomial(m, ket) {
                Some((d, s)) if d == *bra => Some(s * c),
                _ => None,
            })
            .sum()
    }

    /// Exact scalar / one-body / two-body tensor representation.
    ///
    /// `h2` is indexed `[p][q][r][s]` for the canonical monomial
    /// `a†_p a†_q a_r a_s` with `p < q` and `r < s`; other slots stay zero.
    pub fn to_one_two_body_tensors(&self, n_spin_orbitals: usize) -> Result<BodyTensors> {
        let mut t = BodyTensors::zeros(n_spin_orbitals);
        for (m, &c) in &self.terms {
            let (nc, na) = monomial_shape(m);
            if nc.max(na) > 2 {
                return Err(Error::Rank(nc.max(na)));
            }
            if nc != na {
                return Err(Error::InvalidHamiltonian(format!(
                    "term with {nc} creation and {na} annihilation operators does not conserve particle number"
                )));
            }
            if let Some(l) = m.iter().find(|l| l.orbital as usize >= n_spin_orbitals) {
                return Err(Error::InvalidHamiltonian(format!(
                    "orbital {} outside of {n_spin_orbitals} spin orbitals",
                    l.orbital
                )));
            }
            let o: Vec<usize> = m.iter().map(|l| l.orbital as usize).collect();
            match nc {
                0 => t.scalar += c,
                1 => t.h1[o[0] * n_spin_orbitals + o[1]] += c,
                _ => {
                    let idx = t.index2(o[0], o[1], o[2], o[3]);
                    t.h2[idx] += c;
                }
            }
        }
        Ok(t)
    }

    pub fn from_tensors(t: &BodyTensors) -> Self {
        let n = t.n;
        let mut op = Self::identity(t.scalar);
        for p in 0..n {
            for q in 0..n {
                let c = t.h1[p * n + q];
                if c != 0.0 {
                    op.terms.insert([Ladder::create(p), Ladder::annihilate(q)].into_iter().collect(), c);
                }
            }
        }
        for (idx, &c) in t.h2.iter().enumerate() {
            if c != 0.0 {
                let (p, q, r, s) = t.unpack2(idx);
                op.terms.insert(
                    [Ladder::create(p), Ladder::create(q), Ladder::annihilate(r), Ladder::annihilate(s)]
                        .into_iter()
                        .collect(),
                    c,
                );
            }
        }
        op.prune();
        op
    }

    pub fn to_json(&self) -> Result<String> {
        let doc: Vec<TermDocument> = self
            .terms
            .iter()
            .map(|(m, &coeff)| TermDocument {
                monomial: m.iter().map(|l| (l.orbital as usize, l.dagger)).collect(),
                coeff,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Vec<TermDocument> = serde_json::from_str(text)?;
        let mut op = Self::new();
        for term in doc {
            let seq: Monomial = term
                .monomial
                .iter()
                .map(|&(orbital, dagger)| Ladder { orbital: orbital as u16, dagger })
                .collect();
            normal_order_into(seq, term.coeff, &mut op.terms);
        }
        op.prune();
        Ok(op)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDocument {
    monomial: Vec<(usize, bool)>,
    coeff: f64,
}

impl Add for FermionOperator {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (m, c) in rhs.terms {
            *self.terms.entry(m).or_insert(0.0) += c;
        }
        self.prune();
        self
    }
}

impl Sub for FermionOperator {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FermionOperator {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for FermionOperator {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for c in self.terms.values_mut() {
            *c *= rhs;
        }
        self.prune();
        self
    }
}

/// Dense tensors of an operator with at most two-body terms.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyTensors {
    pub n: usize,
    pub scalar: f64,
    /// Row-major `n × n`, entry `[p][q]` multiplies `a†_p a_q`.
    pub h1: Vec<f64>,
    /// Row-major `n⁴`, see [`FermionOperator::to_one_two_body_tensors`].
    pub h2: Vec<f64>,
}

impl BodyTensors {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            scalar: 0.0,
            h1: vec![0.0; n * n],
            h2: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn index2(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.n + q]
    }

    /// Coefficient of `a†_p a†_q a_r a_s` for canonical `p < q`, `r < s`.
    #[inline]
    pub fn two_body(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.h2[self.index2(p, q, r, s)]
    }

    fn unpack2(&self, idx: usize) -> (usize, usize, usize, usize) {
        let n = self.n;
        (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n)
    }

    pub fn one_body_l1(&self) -> f64 {
        self.h1.iter().map(|c| c.abs()).sum()
    }

    pub fn two_body_l1(&self) -> f64 {
        self.h2.iter().map(|c| c.abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.scalar == 0.0 && self.h1.iter().all(|&c| c == 0.0) && self.h2.iter().all(|&c| c == 0.0)
    }
}

/// `[[V,T],T]` and `[[V,T],V]` built symbolically from a Hamiltonian.
pub fn nested_commutators(h: &DiagonalCoulombHamiltonian) -> (FermionOperator, FermionOperator) {
    let (t, v) = FermionOperator::from_hamiltonian(h);
    let vt = FermionOperator::commutator(&v, &t);
    (FermionOperator::commutator(&vt, &t), FermionOperator::commutator(&vt, &v))
}
