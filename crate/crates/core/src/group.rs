//! Finite Abelian groups, subgroups, cosets and section maps.
//!
//! A group is stored as an addition table over element indices `0..q`,
//! with index 0 the identity. Groups presented as products of cyclic
//! groups use mixed-radix indices with the first factor most significant,
//! so index order coincides with lexicographic order of residue vectors.
//! Quotients are again tabled groups whose elements are the cosets,
//! ordered by their canonical (smallest-index) representatives.
//!
//! Subsets are bitmasks, which caps the group order at 64.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported group order (subsets are `u64` masks).
pub const MAX_GROUP_ORDER: usize = 64;

/// Element of a [`FiniteAbelianGroup`], identified by its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupElement(pub(crate) u16);

impl GroupElement {
    pub const ZERO: GroupElement = GroupElement(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

struct Inner {
    q: usize,
    /// Cyclic factor orders, when the group is a product of cyclic groups.
    orders: Option<Vec<u32>>,
    add: Vec<u16>,
    neg: Vec<u16>,
    names: Vec<String>,
}

/// A finite Abelian group given by its addition table.
#[derive(Clone)]
pub struct FiniteAbelianGroup {
    inner: Arc<Inner>,
}

impl PartialEq for FiniteAbelianGroup {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.q == other.inner.q
                && self.inner.orders == other.inner.orders
                && self.inner.add == other.inner.add)
    }
}

impl Eq for FiniteAbelianGroup {}

impl fmt::Debug for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner.orders {
            Some(o) => write!(f, "FiniteAbelianGroup(Z{:?})", o),
            None => write!(f, "FiniteAbelianGroup(order {})", self.inner.q),
        }
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner.orders {
            Some(o) if o.is_empty() => write!(f, "{{0}}"),
            Some(o) => {
                let parts: Vec<String> = o.iter().map(|n| format!("Z{n}")).collect();
                write!(f, "{}", parts.join("x"))
            }
            None => write!(f, "group of order {}", self.inner.q),
        }
    }
}

impl FiniteAbelianGroup {
    /// Product of cyclic groups `Z_{n_1} x ... x Z_{n_r}`.
    pub fn cyclic_product(orders: &[u32]) -> Result<Self> {
        if orders.iter().any(|&n| n == 0) {
            return Err(Error::validation("cyclic factor orders must be positive"));
        }
        let q = orders
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n as usize))
            .unwrap_or(usize::MAX);
        if q > MAX_GROUP_ORDER {
            return Err(Error::Capacity {
                what: "group order",
                requested: q,
                cap: MAX_GROUP_ORDER,
            });
        }
        let residues: Vec<Vec<u32>> = (0..q).map(|i| mixed_radix(i, orders)).collect();
        let index = |r: &[u32]| -> usize {
            r.iter()
                .zip(orders)
                .fold(0usize, |acc, (&x, &n)| acc * n as usize + x as usize)
        };
        let mut add = vec![0u16; q * q];
        let mut neg = vec![0u16; q];
        for a in 0..q {
            for b in 0..q {
                let s: Vec<u32> = residues[a]
                    .iter()
                    .zip(&residues[b])
                    .zip(orders)
                    .map(|((&x, &y), &n)| (x + y) % n)
                    .collect();
                add[a * q + b] = index(&s) as u16;
            }
            let m: Vec<u32> = residues[a]
                .iter()
                .zip(orders)
                .map(|(&x, &n)| (n - x) % n)
                .collect();
            neg[a] = index(&m) as u16;
        }
        let names = residues
            .iter()
            .map(|r| {
                if r.len() == 1 {
                    r[0].to_string()
                } else {
                    let p: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                    format!("({})", p.join(","))
                }
            })
            .collect();
        Ok(Self {
            inner: Arc::new(Inner {
                q,
                orders: Some(orders.to_vec()),
                add,
                neg,
                names,
            }),
        })
    }

    /// The cyclic group `Z_n`.
    pub fn cyclic(n: u32) -> Result<Self> {
        Self::cyclic_product(&[n])
    }

    /// Group from an explicit table. The caller guarantees the group axioms.
    fn from_table(add: Vec<u16>, names: Vec<String>) -> Self {
        let q = names.len();
        let mut neg = vec![0u16; q];
        for a in 0..q {
            neg[a] = (0..q).find(|&b| add[a * q + b] == 0).expect("group has inverses") as u16;
        }
        Self {
            inner: Arc::new(Inner {
                q,
                orders: None,
                add,
                neg,
                names,
            }),
        }
    }

    pub fn order(&self) -> usize {
        self.inner.q
    }

    /// Cyclic factor orders, if the group was built as a cyclic product.
    pub fn factor_orders(&self) -> Option<&[u32]> {
        self.inner.orders.as_deref()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::ZERO
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> {
        (0..self.inner.q).map(|i| GroupElement(i as u16))
    }

    /// Element with the given index, checked against the group order.
    pub fn element_at(&self, index: usize) -> Result<GroupElement> {
        if index < self.inner.q {
            Ok(GroupElement(index as u16))
        } else {
            Err(Error::structural(format!(
                "index {index} is not an element of a group of order {}",
                self.inner.q
            )))
        }
    }

    /// Element from residues; each residue is reduced modulo its factor.
    pub fn element(&self, residues: &[i64]) -> Result<GroupElement> {
        let orders = self
            .inner
            .orders
            .as_ref()
            .ok_or_else(|| Error::structural("group has no cyclic presentation"))?;
        if residues.len() != orders.len() {
            return Err(Error::structural(format!(
                "expected {} residues, got {}",
                orders.len(),
                residues.len()
            )));
        }
        let idx = residues.iter().zip(orders).fold(0usize, |acc, (&r, &n)| {
            acc * n as usize + r.rem_euclid(n as i64) as usize
        });
        Ok(GroupElement(idx as u16))
    }

    /// Canonical residues of an element of a cyclic-product group.
    pub fn residues(&self, a: GroupElement) -> Option<Vec<u32>> {
        self.inner
            .orders
            .as_ref()
            .map(|o| mixed_radix(a.index(), o))
    }

    pub fn name(&self, a: GroupElement) -> &str {
        &self.inner.names[a.index()]
    }

    #[inline]
    pub fn add(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        GroupElement(self.inner.add[a.index() * self.inner.q + b.index()])
    }

    #[inline]
    pub fn neg(&self, a: GroupElement) -> GroupElement {
        GroupElement(self.inner.neg[a.index()])
    }

    #[inline]
    pub fn sub(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        self.add(a, self.neg(b))
    }

    /// Index-level addition used by hot loops.
    #[inline]
    pub(crate) fn add_idx(&self, a: usize, b: usize) -> usize {
        self.inner.add[a * self.inner.q + b] as usize
    }

    /// Addition that rejects indices outside the group.
    pub fn checked_add(&self, a: GroupElement, b: GroupElement) -> Result<GroupElement> {
        self.element_at(a.index())?;
        self.element_at(b.index())?;
        Ok(self.add(a, b))
    }

    /// Order of an element.
    pub fn element_order(&self, a: GroupElement) -> usize {
        let mut x = a;
        let mut k = 1;
        while x != GroupElement::ZERO {
            x = self.add(x, a);
            k += 1;
        }
        k
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup {
            group: self.clone(),
            mask: 1,
        }
    }

    pub fn whole(&self) -> Subgroup {
        Subgroup {
            group: self.clone(),
            mask: full_mask(self.inner.q),
        }
    }

    /// Smallest subgroup containing every element of `gens`.
    pub fn generated_subgroup(&self, gens: &[GroupElement]) -> Subgroup {
        let mut mask = 1u64;
        for g in gens {
            mask = self.close_with(mask, g.index());
        }
        Subgroup {
            group: self.clone(),
            mask,
        }
    }

    /// Subgroup with the given element set, verified for closure.
    pub fn subgroup(&self, elements: &[GroupElement]) -> Result<Subgroup> {
        let mut mask = 0u64;
        for e in elements {
            self.element_at(e.index())?;
            mask |= 1 << e.index();
        }
        if mask & 1 == 0 || !self.is_closed(mask) {
            return Err(Error::structural("element set is not a subgroup"));
        }
        Ok(Subgroup {
            group: self.clone(),
            mask,
        })
    }

    fn is_closed(&self, mask: u64) -> bool {
        bits(mask).all(|a| bits(mask).all(|b| mask & (1 << self.add_idx(a, b)) != 0))
    }

    /// Closure of the subgroup `mask` together with element `g`.
    fn close_with(&self, mask: u64, g: usize) -> u64 {
        let mut cur = mask | 1 << g;
        loop {
            let mut next = cur;
            for a in bits(cur) {
                for b in bits(cur) {
                    next |= 1 << self.add_idx(a, b);
                }
            }
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    /// All subgroups, ordered by order and then lexicographically by elements.
    pub fn enumerate_subgroups(&self) -> Vec<Subgroup> {
        let q = self.inner.q;
        let mut found: Vec<u64> = vec![1];
        let mut frontier = vec![1u64];
        while let Some(s) = frontier.pop() {
            for g in 0..q {
                if s & (1 << g) == 0 {
                    let t = self.close_with(s, g);
                    if !found.contains(&t) {
                        found.push(t);
                        frontier.push(t);
                    }
                }
            }
        }
        let mut subs: Vec<Subgroup> = found
            .into_iter()
            .map(|mask| Subgroup {
                group: self.clone(),
                mask,
            })
            .collect();
        subs.sort();
        subs
    }

    /// Subgroups `M < H` whose index in `H` is prime.
    pub fn maximal_subgroups(&self, h: &Subgroup) -> Result<Vec<Subgroup>> {
        self.check_owns(h)?;
        Ok(self
            .enumerate_subgroups()
            .into_iter()
            .filter(|m| m.is_subgroup_of(h) && is_prime(h.order() / m.order()) && m.order() < h.order())
            .collect())
    }

    /// Cosets of `h`, sorted by canonical representative.
    pub fn cosets(&self, h: &Subgroup) -> Result<Vec<Coset>> {
        self.check_owns(h)?;
        let mut seen = 0u64;
        let mut out = Vec::new();
        for x in 0..self.inner.q {
            if seen & (1 << x) == 0 {
                let members = self.translate(h.mask, x);
                seen |= members;
                out.push(Coset {
                    subgroup_mask: h.mask,
                    members,
                });
            }
        }
        Ok(out)
    }

    /// The quotient `G/H` as a tabled group together with its cosets.
    pub fn quotient(&self, h: &Subgroup) -> Result<Quotient> {
        let cosets = self.cosets(h)?;
        let m = cosets.len();
        let mut coset_of = vec![0usize; self.inner.q];
        for (i, c) in cosets.iter().enumerate() {
            for x in bits(c.members) {
                coset_of[x] = i;
            }
        }
        let mut add = vec![0u16; m * m];
        for i in 0..m {
            for j in 0..m {
                let s = self.add_idx(cosets[i].representative().index(), cosets[j].representative().index());
                add[i * m + j] = coset_of[s] as u16;
            }
        }
        let names = cosets
            .iter()
            .map(|c| {
                if h.order() == 1 {
                    self.name(c.representative()).to_string()
                } else {
                    format!("{}+H", self.name(c.representative()))
                }
            })
            .collect();
        Ok(Quotient {
            group: FiniteAbelianGroup::from_table(add, names),
            cosets,
            coset_of,
        })
    }

    /// Cosets of `m` contained in the coset `d` of a larger subgroup.
    pub fn refine(&self, d: &Coset, m: &Subgroup) -> Result<Vec<Coset>> {
        self.check_owns(m)?;
        if m.mask & !d.subgroup_mask != 0 {
            return Err(Error::structural("refining subgroup is not contained in the coset's subgroup"));
        }
        Ok(self
            .cosets(m)?
            .into_iter()
            .filter(|c| c.members & !d.members == 0)
            .collect())
    }

    /// `H` as a standalone group; element `i` is the `i`-th smallest member.
    pub fn subgroup_as_group(&self, h: &Subgroup) -> Result<(FiniteAbelianGroup, Vec<GroupElement>)> {
        self.check_owns(h)?;
        let members: Vec<usize> = bits(h.mask).collect();
        let pos = |x: usize| members.iter().position(|&m| m == x).expect("closed");
        let m = members.len();
        let mut add = vec![0u16; m * m];
        for i in 0..m {
            for j in 0..m {
                add[i * m + j] = pos(self.add_idx(members[i], members[j])) as u16;
            }
        }
        let names = members.iter().map(|&x| self.inner.names[x].clone()).collect();
        Ok((
            FiniteAbelianGroup::from_table(add, names),
            members.into_iter().map(|x| GroupElement(x as u16)).collect(),
        ))
    }

    /// Translate of a subset by `x`.
    pub(crate) fn translate(&self, mask: u64, x: usize) -> u64 {
        bits(mask).fold(0u64, |acc, h| acc | 1 << self.add_idx(h, x))
    }

    fn check_owns(&self, h: &Subgroup) -> Result<()> {
        if &h.group != self {
            return Err(Error::structural("subgroup belongs to a different group"));
        }
        Ok(())
    }
}

/// A subgroup of a [`FiniteAbelianGroup`].
#[derive(Clone)]
pub struct Subgroup {
    group: FiniteAbelianGroup,
    mask: u64,
}

impl Subgroup {
    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Index of the subgroup, `|G/H|`.
    pub fn index(&self) -> usize {
        self.group.order() / self.order()
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Subgroup with the given element mask, verified for closure.
    pub fn from_mask(group: &FiniteAbelianGroup, mask: u64) -> Result<Self> {
        if mask & 1 == 0 || mask & !full_mask(group.order()) != 0 || !group.is_closed(mask) {
            return Err(Error::structural("mask is not a subgroup"));
        }
        Ok(Self {
            group: group.clone(),
            mask,
        })
    }

    pub fn contains(&self, a: GroupElement) -> bool {
        a.index() < 64 && self.mask & (1 << a.index()) != 0
    }

    pub fn elements(&self) -> Vec<GroupElement> {
        bits(self.mask).map(|i| GroupElement(i as u16)).collect()
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.group == other.group && self.mask & !other.mask == 0
    }

    pub fn is_trivial(&self) -> bool {
        self.mask == 1
    }

    pub fn is_whole(&self) -> bool {
        self.mask == full_mask(self.group.order())
    }

    /// Short display form such as `{0,2}`.
    pub fn describe(&self) -> String {
        let names: Vec<&str> = bits(self.mask)
            .map(|i| self.group.name(GroupElement(i as u16)))
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

impl PartialEq for Subgroup {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask && self.group == other.group
    }
}

impl Eq for Subgroup {}

impl PartialOrd for Subgroup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subgroup {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| bits(self.mask).cmp(bits(other.mask)))
    }
}

impl fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subgroup{}", self.describe())
    }
}

/// A coset `x + H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coset {
    subgroup_mask: u64,
    members: u64,
}

impl Coset {
    /// Smallest-index member.
    pub fn representative(&self) -> GroupElement {
        GroupElement(self.members.trailing_zeros() as u16)
    }

    pub fn members(&self) -> Vec<GroupElement> {
        bits(self.members).map(|i| GroupElement(i as u16)).collect()
    }

    pub fn members_mask(&self) -> u64 {
        self.members
    }

    /// Mask of the subgroup this is a coset of.
    pub fn subgroup_mask(&self) -> u64 {
        self.subgroup_mask
    }

    pub fn contains(&self, a: GroupElement) -> bool {
        a.index() < 64 && self.members & (1 << a.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.members.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.members == 0
    }
}

/// `G/H` as a group, with the coset belonging to each quotient element.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub group: FiniteAbelianGroup,
    pub cosets: Vec<Coset>,
    /// Quotient index of each element of the parent group.
    pub coset_of: Vec<usize>,
}

/// A choice of one member from every coset of a subgroup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionMap {
    /// Chosen element index for each coset, in canonical coset order.
    pub table: Vec<GroupElement>,
}

impl SectionMap {
    /// Section choosing each coset's canonical representative.
    pub fn zero(group: &FiniteAbelianGroup, h: &Subgroup) -> Result<Self> {
        Ok(Self {
            table: group.cosets(h)?.iter().map(|c| c.representative()).collect(),
        })
    }

    /// Uniformly random section.
    pub fn random<R: Rng + ?Sized>(group: &FiniteAbelianGroup, h: &Subgroup, rng: &mut R) -> Result<Self> {
        let table = group
            .cosets(h)?
            .iter()
            .map(|c| {
                let m = c.members();
                m[rng.gen_range(0..m.len())]
            })
            .collect();
        Ok(Self { table })
    }

    /// Element assigned to the coset with canonical index `coset`.
    pub fn apply(&self, coset: usize) -> GroupElement {
        self.table[coset]
    }

    /// Checks that the table selects one member from each coset of `h`.
    pub fn validate(&self, group: &FiniteAbelianGroup, h: &Subgroup) -> Result<()> {
        let cosets = group.cosets(h)?;
        if cosets.len() != self.table.len() {
            return Err(Error::validation(format!(
                "section has {} entries, subgroup has {} cosets",
                self.table.len(),
                cosets.len()
            )));
        }
        for (c, e) in cosets.iter().zip(&self.table) {
            if !c.contains(*e) {
                return Err(Error::validation(format!(
                    "section entry {} is outside its coset",
                    e.index()
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn full_mask(q: usize) -> u64 {
    if q >= 64 {
        u64::MAX
    } else {
        (1u64 << q) - 1
    }
}

/// Indices of the set bits of a mask, ascending.
pub(crate) fn bits(mask: u64) -> impl Iterator<Item = usize> + Clone {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

fn mixed_radix(mut i: usize, orders: &[u32]) -> Vec<u32> {
    let mut r = vec![0u32; orders.len()];
    for (slot, &n) in r.iter_mut().zip(orders).rev() {
        *slot = (i % n as usize) as u32;
        i /= n as usize;
    }
    r
}

pub(crate) fn is_prime(n: usize) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// Exhaustive oracle: every subset containing 0 that is closed under addition.
    fn brute_subgroups(g: &FiniteAbelianGroup) -> Vec<u64> {
        let q = g.order();
        let mut out = Vec::new();
        for mask in 0..(1u64 << q) {
            if mask & 1 == 1 && g.is_closed(mask) {
                out.push(mask);
            }
        }
        out.sort();
        out
    }

    fn masks(subs: &[Subgroup]) -> Vec<u64> {
        let mut m: Vec<u64> = subs.iter().map(|s| s.mask).collect();
        m.sort();
        m
    }

    #[test]
    fn subgroup_counts_of_small_groups() {
        let z4 = FiniteAbelianGroup::cyclic(4).unwrap();
        assert_eq!(z4.enumerate_subgroups().len(), 3);
        let v4 = FiniteAbelianGroup::cyclic_product(&[2, 2]).unwrap();
        assert_eq!(v4.enumerate_subgroups().len(), 5);
        let z6 = FiniteAbelianGroup::cyclic(6).unwrap();
        assert_eq!(z6.enumerate_subgroups().len(), 4);
        let z2z4 = FiniteAbelianGroup::cyclic_product(&[2, 4]).unwrap();
        assert_eq!(z2z4.enumerate_subgroups().len(), 8);
    }

    #[test]
    fn enumeration_matches_exhaustive_closure() {
        for orders in [&[2u32][..], &[3], &[4], &[2, 2], &[5], &[6], &[2, 3], &[8], &[2, 4], &[2, 2, 2], &[3, 3], &[12], &[2, 6], &[4, 4], &[16]] {
            let g = FiniteAbelianGroup::cyclic_product(orders).unwrap();
            assert_eq!(masks(&g.enumerate_subgroups()), brute_subgroups(&g), "{orders:?}");
        }
    }

    #[test]
    fn subgroups_are_sorted_by_order_then_elements() {
        let g = FiniteAbelianGroup::cyclic_product(&[2, 2]).unwrap();
        let subs = g.enumerate_subgroups();
        assert!(subs[0].is_trivial());
        assert!(subs.last().unwrap().is_whole());
        for w in subs.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(subs[1].describe(), "{(0,0),(0,1)}");
    }

    #[test]
    fn index_order_is_lexicographic() {
        let g = FiniteAbelianGroup::cyclic_product(&[2, 3]).unwrap();
        let r: Vec<Vec<u32>> = g.elements().map(|a| g.residues(a).unwrap()).collect();
        let mut sorted = r.clone();
        sorted.sort();
        assert_eq!(r, sorted);
        assert_eq!(g.element(&[1, -1]).unwrap().index(), 5);
        assert!(g.element(&[1]).is_err());
    }

    #[test]
    fn maximal_subgroups_have_prime_index() {
        let z12 = FiniteAbelianGroup::cyclic(12).unwrap();
        let max = z12.maximal_subgroups(&z12.whole()).unwrap();
        let orders: Vec<usize> = max.iter().map(|m| m.order()).collect();
        assert_eq!(orders, vec![4, 6]);
        let v4 = FiniteAbelianGroup::cyclic_product(&[2, 2]).unwrap();
        assert_eq!(v4.maximal_subgroups(&v4.whole()).unwrap().len(), 3);
        assert!(v4.maximal_subgroups(&v4.trivial_subgroup()).unwrap().is_empty());
    }

    #[test]
    fn cross_group_use_is_rejected() {
        let a = FiniteAbelianGroup::cyclic(4).unwrap();
        let b = FiniteAbelianGroup::cyclic(6).unwrap();
        assert!(a.cosets(&b.whole()).is_err());
        assert!(a.checked_add(GroupElement(5), GroupElement(0)).is_err());
        assert!(FiniteAbelianGroup::cyclic(65).is_err());
    }

    #[test]
    fn refine_splits_coset() {
        let z4 = FiniteAbelianGroup::cyclic(4).unwrap();
        let h = z4.generated_subgroup(&[GroupElement(2)]);
        let d = z4.cosets(&h).unwrap()[1];
        assert_eq!(d.members(), vec![GroupElement(1), GroupElement(3)]);
        let parts = z4.refine(&d, &z4.trivial_subgroup()).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(z4.refine(&d, &z4.whole()).is_err());
    }

    fn arb_group() -> impl Strategy<Value = FiniteAbelianGroup> {
        prop::collection::vec(2u32..5, 1..3)
            .prop_filter("order cap", |o| o.iter().product::<u32>() <= 32)
            .prop_map(|o| FiniteAbelianGroup::cyclic_product(&o).unwrap())
    }

    proptest! {
        #[test]
        fn cosets_partition_group(g in arb_group()) {
            for h in g.enumerate_subgroups() {
                let cs = g.cosets(&h).unwrap();
                prop_assert_eq!(cs.len(), h.index());
                let mut union = 0u64;
                for c in &cs {
                    prop_assert_eq!(c.len(), h.order());
                    prop_assert_eq!(union & c.members, 0);
                    union |= c.members;
                    let rep = c.representative();
                    prop_assert_eq!(g.translate(h.mask, rep.index()), c.members);
                }
                prop_assert_eq!(union, full_mask(g.order()));
                for w in cs.windows(2) {
                    prop_assert!(w[0].representative() < w[1].representative());
                }
            }
        }

        #[test]
        fn quotient_is_a_group_homomorphic_image(g in arb_group()) {
            for h in g.enumerate_subgroups() {
                let qt = g.quotient(&h).unwrap();
                prop_assert_eq!(qt.group.order(), h.index());
                for a in g.elements() {
                    for b in g.elements() {
                        let lhs = qt.coset_of[g.add(a, b).index()];
                        let rhs = qt.group.add_idx(qt.coset_of[a.index()], qt.coset_of[b.index()]);
                        prop_assert_eq!(lhs, rhs);
                    }
                }
                prop_assert_eq!(qt.coset_of[0], 0);
            }
        }

        #[test]
        fn sections_pick_coset_members(g in arb_group(), seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for h in g.enumerate_subgroups() {
                let s = SectionMap::random(&g, &h, &mut rng).unwrap();
                s.validate(&g, &h).unwrap();
                SectionMap::zero(&g, &h).unwrap().validate(&g, &h).unwrap();
            }
        }

        #[test]
        fn group_axioms(g in arb_group()) {
            for a in g.elements() {
                prop_assert_eq!(g.add(a, g.identity()), a);
                prop_assert_eq!(g.add(a, g.neg(a)), g.identity());
                for b in g.elements() {
                    prop_assert_eq!(g.add(a, b), g.add(b, a));
                    for c in g.elements().take(4) {
                        prop_assert_eq!(g.add(g.add(a, b), c), g.add(a, g.add(b, c)));
                    }
                }
            }
        }
    }
}
