//! Matrix elements and excitation samplers for `A = [[V,T],V]` and
//! `A = [[V,T],T]` in the determinant basis.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::determinants::Determinant;
use crate::error::{Error, Result};
use crate::fermion_ops::{nested_commutators, BodyTensors, FermionOperator};
use crate::hamiltonians::{spin_of, DiagonalCoulombHamiltonian};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// `[[V,T],V]`
    Vtv,
    /// `[[V,T],T]`
    Vtt,
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::Vtv => "vtv",
            OperatorKind::Vtt => "vtt",
        }
    }
}

/// One draw of an excitation generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitationSample {
    pub target: Determinant,
    pub element: f64,
    pub element_abs: f64,
    /// Probability that the generator produces exactly this draw.
    pub p_gen: f64,
}

type OrbitalList = SmallVec<[u16; 64]>;

/// Occupation data of a source determinant, reused across spawning attempts.
#[derive(Clone, Debug)]
pub struct SourceContext {
    pub det: Determinant,
    pub occupied: OrbitalList,
    pub occupied_by_spin: [OrbitalList; 2],
    pub vacant_by_spin: [OrbitalList; 2],
    /// `φ(p) = Σ_{k∈D} V_pk`, filled by engines that need it.
    pub potential: Vec<f64>,
}

impl SourceContext {
    pub fn new(det: &Determinant, n_spin_orbitals: usize) -> Self {
        let mut ctx = Self {
            det: *det,
            occupied: OrbitalList::new(),
            occupied_by_spin: [OrbitalList::new(), OrbitalList::new()],
            vacant_by_spin: [OrbitalList::new(), OrbitalList::new()],
            potential: Vec::new(),
        };
        for p in 0..n_spin_orbitals {
            if det.is_occupied(p) {
                ctx.occupied.push(p as u16);
                ctx.occupied_by_spin[spin_of(p)].push(p as u16);
            } else {
                ctx.vacant_by_spin[spin_of(p)].push(p as u16);
            }
        }
        ctx
    }
}

pub trait CommutatorEngine: Send + Sync {
    fn kind(&self) -> OperatorKind;

    fn n_spin_orbitals(&self) -> usize;

    fn diagonal(&self, d: &Determinant) -> f64;

    /// `⟨dst| A |src⟩`.
    fn element(&self, src: &Determinant, dst: &Determinant) -> Result<f64>;

    fn prepare(&self, d: &Determinant) -> SourceContext {
        SourceContext::new(d, self.n_spin_orbitals())
    }

    /// Calls `f(target, element)` for every nonzero off-diagonal element in the
    /// column of `d`.
    fn for_each_connection<F: FnMut(Determinant, f64)>(&self, ctx: &SourceContext, f: F);

    /// One excitation draw; `None` for null excitations.
    fn sample_from<R: Rng + ?Sized>(&self, ctx: &SourceContext, rng: &mut R) -> Option<ExcitationSample>;

    fn sample<R: Rng + ?Sized>(&self, d: &Determinant, rng: &mut R) -> Option<ExcitationSample> {
        self.sample_from(&self.prepare(d), rng)
    }

    /// Every draw the generator can make from `d` with its probability,
    /// including draws whose element vanishes.
    fn enumerate_draws(&self, d: &Determinant) -> Vec<ExcitationSample>;
}

fn check_sector(src: &Determinant, dst: &Determinant) -> Result<()> {
    if src.spin_counts() != dst.spin_counts() {
        return Err(Error::SectorMismatch(format!(
            "{src} and {dst} have different spin-resolved electron counts"
        )));
    }
    Ok(())
}

fn make_sample(target: Determinant, element: f64, p_gen: f64) -> ExcitationSample {
    ExcitationSample { target, element, element_abs: element.abs(), p_gen }
}

/// `[[V,T],V]` via its closed form: it only connects determinants one
/// single excitation apart and has a vanishing diagonal.
#[derive(Clone, Debug)]
pub struct VtvEngine {
    n: usize,
    coulomb: Vec<f64>,
    /// Per source orbital, the orbitals it hops to with `T` (same spin).
    hops: Vec<Vec<(u16, f64)>>,
}

impl VtvEngine {
    pub fn new(h: &DiagonalCoulombHamiltonian) -> Self {
        let n = h.n_spin_orbitals();
        let mut coulomb = vec![0.0; n * n];
        let mut hops = vec![Vec::new(); n];
        for p in 0..n {
            for q in 0..n {
                coulomb[p * n + q] = h.coulomb[(p, q)];
                let t = h.hopping[(q, p)];
                if p != q && t != 0.0 {
                    hops[p].push((q as u16, t));
                }
            }
        }
        Self { n, coulomb, hops }
    }

    #[inline]
    fn v(&self, p: usize, q: usize) -> f64 {
        self.coulomb[p * self.n + q]
    }

    fn hopping(&self, from: usize, to: usize) -> f64 {
        self.hops[from]
            .iter()
            .find(|&&(q, _)| q as usize == to)
            .map_or(0.0, |&(_, t)| t)
    }

    fn potential(&self, d: &Determinant) -> Vec<f64> {
        let occ = d.occupied_list();
        (0..self.n).map(|p| occ.iter().map(|&k| self.v(p, k)).sum()).collect()
    }

    /// `-T_{to,from} · sign · (Σ_{k∈D, k≠from} (V_{from,k} - V_{to,k}))²` given
    /// `φ = potential(D)`.
    #[inline]
    fn closed_form(&self, phi: &[f64], t: f64, from: usize, to: usize, sign: f64) -> f64 {
        let delta = phi[from] - phi[to] + self.v(to, from);
        -t * sign * delta * delta
    }

    /// `⟨D_from^to| [[V,T],V] |D⟩`.
    pub fn element_single(&self, d: &Determinant, from: usize, to: usize) -> Result<f64> {
        let (_, sign) = d.single_excite(from, to)?;
        let t = self.hopping(from, to);
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(self.closed_form(&self.potential(d), t, from, to, sign))
    }

    pub fn element_single_abs(&self, d: &Determinant, from: usize, to: usize) -> Result<f64> {
        self.element_single(d, from, to).map(f64::abs)
    }
}

impl CommutatorEngine for VtvEngine {
    fn kind(&self) -> OperatorKind {
        OperatorKind::Vtv
    }

    fn n_spin_orbitals(&self) -> usize {
        self.n
    }

    fn diagonal(&self, _d: &Determinant) -> f64 {
        0.0
    }

    fn element(&self, src: &Determinant, dst: &Determinant) -> Result<f64> {
        check_sector(src, dst)?;
        let removed = src.and_not(dst);
        if removed.count() != 1 {
            return Ok(0.0);
        }
        let from = removed.iter_occupied().next().unwrap_or(0);
        let to = dst.and_not(src).iter_occupied().next().unwrap_or(0);
        self.element_single(src, from, to)
    }

    fn prepare(&self, d: &Determinant) -> SourceContext {
        let mut ctx = SourceContext::new(d, self.n);
        ctx.potential = self.potential(d);
        ctx
    }

    fn for_each_connection<F: FnMut(Determinant, f64)>(&self, ctx: &SourceContext, mut f: F) {
        for &from in &ctx.occupied {
            let from = from as usize;
            for &(to, t) in &self.hops[from] {
                let to = to as usize;
                if ctx.det.is_occupied(to) {
                    continue;
                }
                let (target, sign) = ctx.det.single_excite_unchecked(from, to);
                let element = self.closed_form(&ctx.potential, t, from, to, sign);
                if element != 0.0 {
                    f(target, element);
                }
            }
        }
    }

    fn sample_from<R: Rng + ?Sized>(&self, ctx: &SourceContext, rng: &mut R) -> Option<ExcitationSample> {
        let n_occ = ctx.occupied.len();
        if n_occ == 0 {
            return None;
        }
        let from = ctx.occupied[rng.random_range(0..n_occ)] as usize;
        let vacant = &ctx.vacant_by_spin[spin_of(from)];
        if vacant.is_empty() {
            return None;
        }
        let to = vacant[rng.random_range(0..vacant.len())] as usize;
        let t = self.hopping(from, to);
        if t == 0.0 {
            return None;
        }
        let (target, sign) = ctx.det.single_excite_unchecked(from, to);
        let element = self.closed_form(&ctx.potential, t, from, to, sign);
        if element == 0.0 {
            return None;
        }
        Some(make_sample(target, element, 1.0 / (n_occ * vacant.len()) as f64))
    }

    fn enumerate_draws(&self, d: &Determinant) -> Vec<ExcitationSample> {
        let ctx = self.prepare(d);
        let n_occ = ctx.occupied.len();
        let mut out = Vec::new();
        for &from in &ctx.occupied {
            let from = from as usize;
            let vacant = &ctx.vacant_by_spin[spin_of(from)];
            for &to in vacant {
                let to = to as usize;
                let (target, sign) = ctx.det.single_excite_unchecked(from, to);
                let element = self.closed_form(&ctx.potential, self.hopping(from, to), from, to, sign);
                out.push(make_sample(target, element, 1.0 / (n_occ * vacant.len()) as f64));
            }
        }
        out
    }
}

/// `[[V,T],T]` through its exact one- and two-body tensors, evaluated with
/// Slater–Condon rules.
#[derive(Clone, Debug)]
pub struct VttEngine {
    tensors: BodyTensors,
    p_single: f64,
    /// For each canonical annihilation pair `(r, s)`, the creation pairs
    /// `(p, q)` disjoint from it with nonzero coefficient.
    doubles: Vec<Vec<(u16, u16, f64)>>,
}

impl VttEngine {
    /// Builds `[[V,T],T]` symbolically and extracts its tensors.
    pub fn new(h: &DiagonalCoulombHamiltonian) -> Result<Self> {
        let (vtt, _) = nested_commutators(h);
        Self::from_operator(&vtt, h.n_spin_orbitals())
    }

    pub fn from_operator(op: &FermionOperator, n_spin_orbitals: usize) -> Result<Self> {
        let tensors = op.to_one_two_body_tensors(n_spin_orbitals)?;
        if FermionOperator::from_tensors(&tensors) != *op {
            return Err(Error::InvalidHamiltonian("tensor representation does not reproduce the operator".into()));
        }
        for (m, _) in op.terms() {
            let spins = |dagger: bool| {
                let mut s: SmallVec<[usize; 2]> =
                    m.iter().filter(|l| l.dagger == dagger).map(|l| spin_of(l.orbital as usize)).collect();
                s.sort_unstable();
                s
            };
            if spins(true) != spins(false) {
                return Err(Error::InvalidHamiltonian("operator does not conserve spin".into()));
            }
        }
        Ok(Self::from_tensors(tensors))
    }

    pub fn from_tensors(tensors: BodyTensors) -> Self {
        let n = tensors.n;
        let mut doubles = vec![Vec::new(); n * n];
        for p in 0..n {
            for q in p + 1..n {
                for r in 0..n {
                    for s in r + 1..n {
                        let c = tensors.two_body(p, q, r, s);
                        if c != 0.0 && p != r && p != s && q != r && q != s {
                            doubles[r * n + s].push((p as u16, q as u16, c));
                        }
                    }
                }
            }
        }
        let (l1, l2) = (tensors.one_body_l1(), tensors.two_body_l1());
        let p_single = if l1 + l2 > 0.0 { (l1 / (l1 + l2)).clamp(0.05, 0.95) } else { 0.5 };
        Self { tensors, p_single, doubles }
    }

    pub fn tensors(&self) -> &BodyTensors {
        &self.tensors
    }

    pub fn p_single(&self) -> f64 {
        self.p_single
    }

    pub fn with_p_single(mut self, p_single: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_single) {
            return Err(Error::Config(format!("p_single must lie in [0, 1], got {p_single}")));
        }
        self.p_single = p_single;
        Ok(self)
    }

    /// Single excitation `q → p` on `det`, including spectator two-body terms.
    fn single_element(&self, det: &Determinant, occupied: &[u16], q: usize, p: usize) -> f64 {
        let t = &self.tensors;
        let mut acc = t.one_body(p, q);
        for &k in occupied {
            let k = k as usize;
            if k == q {
                continue;
            }
            // a†_p a†_k a_k a_q reordered into canonical form.
            let (c1, c2, eps_c) = if p < k { (p, k, 1.0) } else { (k, p, -1.0) };
            let (a1, a2, eps_a) = if k < q { (k, q, 1.0) } else { (q, k, -1.0) };
            acc += eps_c * eps_a * t.two_body(c1, c2, a1, a2);
        }
        if acc == 0.0 {
            return 0.0;
        }
        let (_, sign) = det.single_excite_unchecked(q, p);
        sign * acc
    }

    fn double_element(det: &Determinant, c: f64, p: usize, q: usize, r: usize, s: usize) -> Option<(Determinant, f64)> {
        let mut d = *det;
        let mut sign = 1.0;
        for (orbital, create) in [(s, false), (r, false), (q, true), (p, true)] {
            let (next, sg) = if create { d.create(orbital)? } else { d.annihilate(orbital)? };
            d = next;
            sign *= sg;
        }
        Some((d, sign * c))
    }

    fn diagonal_with(&self, occupied: &[u16]) -> f64 {
        let t = &self.tensors;
        let mut acc = t.scalar;
        for (i, &p) in occupied.iter().enumerate() {
            let p = p as usize;
            acc += t.one_body(p, p);
            for &q in &occupied[i + 1..] {
                // a†_p a†_q a_p a_q = -n_p n_q
                acc -= t.two_body(p, q as usize, p, q as usize);
            }
        }
        acc
    }
}

impl CommutatorEngine for VttEngine {
    fn kind(&self) -> OperatorKind {
        OperatorKind::Vtt
    }

    fn n_spin_orbitals(&self) -> usize {
        self.tensors.n
    }

    fn diagonal(&self, d: &Determinant) -> f64 {
        let occ: OrbitalList = d.iter_occupied().map(|p| p as u16).collect();
        self.diagonal_with(&occ)
    }

    fn element(&self, src: &Determinant, dst: &Determinant) -> Result<f64> {
        check_sector(src, dst)?;
        let removed: SmallVec<[usize; 4]> = src.and_not(dst).iter_occupied().take(3).collect();
        let added: SmallVec<[usize; 4]> = dst.and_not(src).iter_occupied().take(3).collect();
        match removed.len() {
            0 => Ok(self.diagonal(src)),
            1 => {
                let occ: OrbitalList = src.iter_occupied().map(|p| p as u16).collect();
                Ok(self.single_element(src, &occ, removed[0], added[0]))
            }
            2 => {
                let c = self.tensors.two_body(added[0], added[1], removed[0], removed[1]);
                Ok(Self::double_element(src, c, added[0], added[1], removed[0], removed[1]).map_or(0.0, |(_, e)| e))
            }
            _ => Ok(0.0),
        }
    }

    fn for_each_connection<F: FnMut(Determinant, f64)>(&self, ctx: &SourceContext, mut f: F) {
        let n = self.tensors.n;
        for &q in &ctx.occupied {
            for &p in &ctx.vacant_by_spin[spin_of(q as usize)] {
                let e = self.single_element(&ctx.det, &ctx.occupied, q as usize, p as usize);
                if e != 0.0 {
                    f(ctx.det.single_excite_unchecked(q as usize, p as usize).0, e);
                }
            }
        }
        for (i, &r) in ctx.occupied.iter().enumerate() {
            for &s in &ctx.occupied[i + 1..] {
                for &(p, q, c) in &self.doubles[r as usize * n + s as usize] {
                    if ctx.det.is_occupied(p as usize) || ctx.det.is_occupied(q as usize) {
                        continue;
                    }
                    if let Some((target, e)) = Self::double_element(&ctx.det, c, p as usize, q as usize, r as usize, s as usize) {
                        f(target, e);
                    }
                }
            }
        }
    }

    fn sample_from<R: Rng + ?Sized>(&self, ctx: &SourceContext, rng: &mut R) -> Option<ExcitationSample> {
        let n_occ = ctx.occupied.len();
        if n_occ == 0 {
            return None;
        }
        if rng.random::<f64>() < self.p_single {
            let q = ctx.occupied[rng.random_range(0..n_occ)] as usize;
            let vacant = &ctx.vacant_by_spin[spin_of(q)];
            if vacant.is_empty() {
                return None;
            }
            let p = vacant[rng.random_range(0..vacant.len())] as usize;
            let e = self.single_element(&ctx.det, &ctx.occupied, q, p);
            if e == 0.0 {
                return None;
            }
            let p_gen = self.p_single / (n_occ * vacant.len()) as f64;
            return Some(make_sample(ctx.det.single_excite_unchecked(q, p).0, e, p_gen));
        }
        if n_occ < 2 {
            return None;
        }
        let i = rng.random_range(0..n_occ);
        let mut j = rng.random_range(0..n_occ - 1);
        if j >= i {
            j += 1;
        }
        let (r, s) = (ctx.occupied[i.min(j)] as usize, ctx.occupied[i.max(j)] as usize);
        let pair_prob = 2.0 / (n_occ * (n_occ - 1)) as f64;
        let (p, q, vac_prob) = draw_vacant_pair(ctx, spin_of(r), spin_of(s), rng)?;
        let c = self.tensors.two_body(p, q, r, s);
        if c == 0.0 {
            return None;
        }
        let (target, e) = Self::double_element(&ctx.det, c, p, q, r, s)?;
        Some(make_sample(target, e, (1.0 - self.p_single) * pair_prob * vac_prob))
    }

    fn enumerate_draws(&self, d: &Determinant) -> Vec<ExcitationSample> {
        let ctx = self.prepare(d);
        let n_occ = ctx.occupied.len();
        let mut out = Vec::new();
        for &q in &ctx.occupied {
            let vacant = &ctx.vacant_by_spin[spin_of(q as usize)];
            for &p in vacant {
                let e = self.single_element(d, &ctx.occupied, q as usize, p as usize);
                let target = d.single_excite_unchecked(q as usize, p as usize).0;
                out.push(make_sample(target, e, self.p_single / (n_occ * vacant.len()) as f64));
            }
        }
        if n_occ < 2 {
            return out;
        }
        let pair_prob = 2.0 / (n_occ * (n_occ - 1)) as f64;
        for (i, &r) in ctx.occupied.iter().enumerate() {
            for &s in &ctx.occupied[i + 1..] {
                let (r, s) = (r as usize, s as usize);
                for (p, q, vac_prob) in vacant_pairs(&ctx, spin_of(r), spin_of(s)) {
                    let c = self.tensors.two_body(p, q, r, s);
                    let (target, e) = Self::double_element(d, c, p, q, r, s).expect("vacant targets");
                    out.push(make_sample(target, e, (1.0 - self.p_single) * pair_prob * vac_prob));
                }
            }
        }
        out
    }
}

/// Draws the destination pair of a double excitation, preserving the spin of
/// each component. Returns the pair in ascending order with its probability.
fn draw_vacant_pair<R: Rng + ?Sized>(ctx: &SourceContext, s1: usize, s2: usize, rng: &mut R) -> Option<(usize, usize, f64)> {
    if s1 == s2 {
        let vac = &ctx.vacant_by_spin[s1];
        let m = vac.len();
        if m < 2 {
            return None;
        }
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let (p, q) = (vac[a] as usize, vac[b] as usize);
        Some((p.min(q), p.max(q), 2.0 / (m * (m - 1)) as f64))
    } else {
        let (v1, v2) = (&ctx.vacant_by_spin[s1], &ctx.vacant_by_spin[s2]);
        if v1.is_empty() || v2.is_empty() {
            return None;
        }
        let p = v1[rng.random_range(0..v1.len())] as usize;
        let q = v2[rng.random_range(0..v2.len())] as usize;
        Some((p.min(q), p.max(q), 1.0 / (v1.len() * v2.len()) as f64))
    }
}

fn vacant_pairs(ctx: &SourceContext, s1: usize, s2: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    if s1 == s2 {
        let vac = &ctx.vacant_by_spin[s1];
        let m = vac.len();
        for (a, &p) in vac.iter().enumerate() {
            for &q in &vac[a + 1..] {
                out.push((p as usize, q as usize, 2.0 / (m * (m - 1)) as f64));
            }
        }
    } else {
        let (v1, v2) = (&ctx.vacant_by_spin[s1], &ctx.vacant_by_spin[s2]);
        for &p in v1 {
            for &q in v2 {
                let (p, q) = (p as usize, q as usize);
                out.push((p.min(q), p.max(q), 1.0 / (v1.len() * v2.len()) as f64));
            }
        }
    }
    out
}

/// Either engine, selected at run time.
#[derive(Clone, Debug)]
pub enum Engine {
    Vtv(VtvEngine),
    Vtt(VttEngine),
}

impl Engine {
    pub fn build(h: &DiagonalCoulombHamiltonian, kind: OperatorKind) -> Result<Self> {
        h.validate()?;
        Ok(match kind {
            OperatorKind::Vtv => Engine::Vtv(VtvEngine::new(h)),
            OperatorKind::Vtt => Engine::Vtt(VttEngine::new(h)?),
        })
    }
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Engine::Vtv($e) => $body,
            Engine::Vtt($e) => $body,
        }
    };
}

impl CommutatorEngine for Engine {
    fn kind(&self) -> OperatorKind {
        dispatch!(self, e => e.kind())
    }

    fn n_spin_orbitals(&self) -> usize {
        dispatch!(self, e => e.n_spin_orbitals())
    }

    fn diagonal(&self, d: &Determinant) -> f64 {
        dispatch!(self, e => e.diagonal(d))
    }

    fn element(&self, src: &Determinant, dst: &Determinant) -> Result<f64> {
        dispatch!(self, e => e.element(src, dst))
    }

    fn prepare(&self, d: &Determinant) -> SourceContext {
        dispatch!(self, e => e.prepare(d))
    }

    fn for_each_connection<F: FnMut(Determinant, f64)>(&self, ctx: &SourceContext, f: F) {
        dispatch!(self, e => e.for_each_connection(ctx, f))
    }

    fn sample_from<R: Rng + ?Sized>(&self, ctx: &SourceContext, rng: &mut R) -> Option<ExcitationSample> {
        dispatch!(self, e => e.sample_from(ctx, rng))
    }

    fn enumerate_draws(&self, d: &Determinant) -> Vec<ExcitationSample> {
        dispatch!(self, e => e.enumerate_draws(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinants::enumerate_sector;
    use crate::hamiltonians::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn systems() -> Vec<(DiagonalCoulombHamiltonian, SectorSpec)> {
        vec![
            (build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap(), SectorSpec::new(2, 2)),
            (build_extended_hubbard_1d(3, 1.0, 4.0, 2.0, false).unwrap(), SectorSpec::new(2, 1)),
            (build_cuprate_square(2, 2, 1.0, 0.3, 0.2, 8.0, false).unwrap(), SectorSpec::new(2, 2)),
            (build_ueg_dual_plane_wave(2, 2, 10.0, 4).unwrap(), SectorSpec::new(2, 2)),
        ]
    }

    #[test]
    fn engines_match_symbolic_algebra() {
        for (h, sector) in systems() {
            let (vtt_op, vtv_op) = nested_commutators(&h);
            let vtv = VtvEngine::new(&h);
            let vtt = VttEngine::new(&h).unwrap();
            let basis = enumerate_sector(h.n_spatial, sector).unwrap();
            for a in &basis {
                for b in &basis {
                    let ev = vtv.element(a, b).unwrap();
                    let et = vtt.element(a, b).unwrap();
                    assert!((ev - vtv_op.matrix_element(b, a)).abs() < 1e-9, "vtv {a} {b}");
                    assert!((et - vtt_op.matrix_element(b, a)).abs() < 1e-9, "vtt {a} {b}");
                }
            }
        }
    }

    #[test]
    fn connections_match_elements() {
        for (h, sector) in systems() {
            for engine in [Engine::build(&h, OperatorKind::Vtv).unwrap(), Engine::build(&h, OperatorKind::Vtt).unwrap()] {
                let basis = enumerate_sector(h.n_spatial, sector).unwrap();
                for d in &basis {
                    let mut seen = std::collections::BTreeMap::new();
                    engine.for_each_connection(&engine.prepare(d), |t, e| {
                        assert!(seen.insert(t, e).is_none());
                    });
                    for t in &basis {
                        let e = engine.element(d, t).unwrap();
                        if t == d {
                            assert!(!seen.contains_key(t));
                        } else {
                            assert!((seen.get(t).copied().unwrap_or(0.0) - e).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn vtv_element_rules() {
        let h = build_extended_hubbard_1d(3, 1.0, 4.0, 2.0, false).unwrap();
        let e = VtvEngine::new(&h);
        let d = Determinant::from_orbitals([0, 1, 2]);
        assert!(matches!(e.element_single(&d, 3, 4), Err(Error::Excitation(_))));
        assert!(matches!(e.element_single(&d, 0, 2), Err(Error::Excitation(_))));
        // Not a hopping pair: zero.
        assert_eq!(e.element_single(&d, 0, 4).unwrap(), 0.0);
        let v = e.element_single(&d, 2, 4).unwrap();
        assert_eq!(e.element_single_abs(&d, 2, 4).unwrap(), v.abs());

        let zero_v = build_extended_hubbard_1d(3, 1.0, 0.0, 0.0, false).unwrap();
        let e = VtvEngine::new(&zero_v);
        assert_eq!(e.element_single(&d, 2, 4).unwrap(), 0.0);
        assert_eq!(e.diagonal(&d), 0.0);
    }

    #[test]
    fn vtt_diagonal_vanishes_for_diagonal_hopping() {
        let mut h = build_extended_hubbard_1d(3, 0.0, 4.0, 2.0, false).unwrap();
        for p in 0..6 {
            h.hopping[(p, p)] = 1.0 + p as f64;
        }
        let e = VttEngine::new(&h).unwrap();
        assert!(e.tensors().is_zero());
        assert_eq!(e.diagonal(&Determinant::from_orbitals([0, 3])), 0.0);
    }

    #[test]
    fn vtt_sector_mismatch() {
        let h = build_extended_hubbard_1d(3, 1.0, 4.0, 2.0, false).unwrap();
        let e = VttEngine::new(&h).unwrap();
        let a = Determinant::from_orbitals([0, 1]);
        let b = Determinant::from_orbitals([0, 2]);
        assert!(matches!(e.element(&a, &b), Err(Error::SectorMismatch(_))));
    }

    #[test]
    fn draw_probabilities_sum_to_one() {
        let h = build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, true).unwrap();
        let basis = enumerate_sector(6, SectorSpec::new(3, 3)).unwrap();
        for kind in [OperatorKind::Vtv, OperatorKind::Vtt] {
            let engine = Engine::build(&h, kind).unwrap();
            for d in basis.iter().step_by(37) {
                let total: f64 = engine.enumerate_draws(d).iter().map(|s| s.p_gen).sum();
                assert!((total - 1.0).abs() < 1e-12, "{kind:?} {d}: {total}");
            }
        }
    }

    #[test]
    fn sampled_p_gen_matches_enumeration() {
        let h = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        let d = Determinant::from_orbitals([0, 1, 4, 7]);
        for kind in [OperatorKind::Vtv, OperatorKind::Vtt] {
            let engine = Engine::build(&h, kind).unwrap();
            let draws = engine.enumerate_draws(&d);
            let mut rng = StdRng::seed_from_u64(3);
            for _ in 0..2000 {
                if let Some(s) = engine.sample(&d, &mut rng) {
                    assert_eq!(s.target.spin_counts(), d.spin_counts());
                    assert_eq!(s.element_abs, s.element.abs());
                    let expected: f64 = draws.iter().filter(|x| x.target == s.target).map(|x| x.p_gen).sum();
                    assert!((s.p_gen - expected).abs() < 1e-14);
                    let reverse = engine.element(&s.target, &d).unwrap();
                    assert!((reverse - s.element).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let h = build_ppp_acene(1).unwrap();
        let engine = Engine::build(&h, OperatorKind::Vtt).unwrap();
        let d = Determinant::from_orbitals([0, 1, 2, 3, 4, 5]);
        let run = |seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            (0..50).map(|_| engine.sample(&d, &mut rng).map(|s| s.target)).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn p_single_default_is_clamped() {
        let h = build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, true).unwrap();
        let e = VttEngine::new(&h).unwrap();
        assert!((0.05..=0.95).contains(&e.p_single()));
        assert!(e.clone().with_p_single(1.5).is_err());
    }
}
