//! Group descriptors, elements, word metrics, and metric balls.
//!
//! Two families of finitely generated groups are supported, each with its
//! standard symmetric generating set:
//!
//! * the free group `F_r` on `r` generators, whose elements are reduced
//!   words over the alphabet `{a₁, a₁⁻¹, …, a_r, a_r⁻¹}`, and
//! * the integer lattice `Z^d` with the `2d` unit vectors `±e_i`, whose
//!   word length is the ℓ¹ norm.
//!
//! All arithmetic is exact: free elements are reduced byte strings
//! (lowercase letters are generators, uppercase their inverses, so the
//! word `a b⁻¹ a` is spelled `"aBa"`), lattice elements are `i64`
//! vectors. The word metric is `d(s, t) = l(s⁻¹t)` where `l` is the
//! length function of the generating set.
//!
//! [`Ball`] materializes the finite windows on which all suprema in this
//! crate are evaluated; its element order is canonical
//! (length-lexicographic), so every index-based structure built on top
//! of a ball is reproducible bit for bit.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::{Error, Result};

/// Largest supported free rank: generators are written with the letters
/// `a..z`, so ranks beyond 26 have no textual encoding.
pub const MAX_FREE_RANK: u32 = 26;

/// Largest supported lattice dimension (keeps ball predictions and
/// serialized vectors at sane sizes).
pub const MAX_LATTICE_DIM: u32 = 64;

/// Default element budget for [`Ball::enumerate`]. Enumerations whose
/// predicted size exceeds the budget fail with [`Error::Budget`] before
/// allocating anything.
pub const DEFAULT_BALL_BUDGET: u64 = 2_000_000;

// ===========================================================================
// Letter encoding for free groups
// ===========================================================================
//
// Generator i (0-based) is the byte b'a' + i; its inverse is b'A' + i.
// The canonical letter order interleaves generators and inverses:
// a < a⁻¹ < b < b⁻¹ < …, realized by `letter_key`.

#[inline]
pub(crate) fn letter_is_inverse(b: u8) -> bool {
    b.is_ascii_uppercase()
}

#[inline]
pub(crate) fn letter_index(b: u8) -> u32 {
    if letter_is_inverse(b) {
        (b - b'A') as u32
    } else {
        (b - b'a') as u32
    }
}

/// The inverse letter: flips case (`a` ↔ `A`).
#[inline]
pub(crate) fn letter_flip(b: u8) -> u8 {
    b ^ 0x20
}

/// Position of a letter in the canonical order a < A < b < B < ….
#[inline]
pub(crate) fn letter_key(b: u8) -> u32 {
    2 * letter_index(b) + letter_is_inverse(b) as u32
}

#[inline]
fn letter_valid(b: u8, rank: u32) -> bool {
    b.is_ascii_alphabetic() && letter_index(b) < rank
}

/// Checks that adjacent letters never form a letter–inverse pair.
fn word_is_reduced(word: &[u8]) -> bool {
    word.windows(2).all(|w| w[0] != letter_flip(w[1]))
}

/// Reduced product of two reduced words.
pub(crate) fn word_mul(a: &[u8], b: &[u8]) -> Arc<[u8]> {
    let mut out: Vec<u8> = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    for &ch in b {
        if out.last() == Some(&letter_flip(ch)) {
            out.pop();
        } else {
            out.push(ch);
        }
    }
    out.into()
}

/// Length of the longest common prefix of two words.
pub(crate) fn word_lcp(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// Word distance between reduced words: `l(a⁻¹b) = |a| + |b| − 2·lcp(a,b)`.
///
/// Multiplying `a⁻¹` by `b` cancels exactly one letter pair per matching
/// prefix letter and nothing more (the first mismatched letters are not
/// mutually inverse *as a product* because both words are reduced), so
/// the formula is exact.
#[inline]
pub(crate) fn word_distance(a: &[u8], b: &[u8]) -> u64 {
    let c = word_lcp(a, b);
    (a.len() + b.len() - 2 * c) as u64
}

// ===========================================================================
// Descriptors
// ===========================================================================

/// Which group a value lives in. Serialized as
/// `{"kind":"free","rank":2}` or `{"kind":"lattice","dim":2}`; displayed
/// and parsed as `free:2` / `z:2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupDescriptor {
    Free { rank: u32 },
    Lattice { dim: u32 },
}

impl GroupDescriptor {
    /// The free group `F_rank`.
    pub fn free(rank: u32) -> Result<Self> {
        let d = GroupDescriptor::Free { rank };
        d.validate()?;
        Ok(d)
    }

    /// The lattice `Z^dim`.
    pub fn lattice(dim: u32) -> Result<Self> {
        let d = GroupDescriptor::Lattice { dim };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupDescriptor::Free { rank } => {
                if rank == 0 || rank > MAX_FREE_RANK {
                    return Err(Error::Domain(format!(
                        "free rank must be in 1..={MAX_FREE_RANK}, got {rank}"
                    )));
                }
            }
            GroupDescriptor::Lattice { dim } => {
                if dim == 0 || dim > MAX_LATTICE_DIM {
                    return Err(Error::Domain(format!(
                        "lattice dimension must be in 1..={MAX_LATTICE_DIM}, got {dim}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The identity element (empty word / zero vector).
    pub fn identity(&self) -> GroupElement {
        match *self {
            GroupDescriptor::Free { .. } => GroupElement::Word(Vec::new().into()),
            GroupDescriptor::Lattice { dim } => {
                GroupElement::Vector(vec![0i64; dim as usize].into())
            }
        }
    }

    /// The symmetric generating set in canonical order
    /// (a, a⁻¹, b, b⁻¹, … / +e₁, −e₁, +e₂, −e₂, …).
    pub fn generators(&self) -> Vec<GroupElement> {
        match *self {
            GroupDescriptor::Free { rank } => (0..rank)
                .flat_map(|i| {
                    [
                        GroupElement::Word(vec![b'a' + i as u8].into()),
                        GroupElement::Word(vec![b'A' + i as u8].into()),
                    ]
                })
                .collect(),
            GroupDescriptor::Lattice { dim } => (0..dim as usize)
                .flat_map(|i| {
                    let mut plus = vec![0i64; dim as usize];
                    plus[i] = 1;
                    let mut minus = vec![0i64; dim as usize];
                    minus[i] = -1;
                    [
                        GroupElement::Vector(plus.into()),
                        GroupElement::Vector(minus.into()),
                    ]
                })
                .collect(),
        }
    }

    /// Checks that an element belongs to this group: matching variant,
    /// letters within rank and word reduced (free), exact dimension
    /// (lattice).
    pub fn validate_element(&self, g: &GroupElement) -> Result<()> {
        match (*self, g) {
            (GroupDescriptor::Free { rank }, GroupElement::Word(w)) => {
                if let Some(&bad) = w.iter().find(|&&b| !letter_valid(b, rank)) {
                    return Err(Error::Domain(format!(
                        "letter {:?} out of range for free rank {rank}",
                        bad as char
                    )));
                }
                if !word_is_reduced(w) {
                    return Err(Error::Domain(format!("word {g} is not reduced")));
                }
                Ok(())
            }
            (GroupDescriptor::Lattice { dim }, GroupElement::Vector(v)) => {
                if v.len() != dim as usize {
                    return Err(Error::Domain(format!(
                        "vector has {} coordinates, lattice dimension is {dim}",
                        v.len()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Domain(format!(
                "element {g} does not belong to group {self}"
            ))),
        }
    }

    /// Group law. Free products are reduced; lattice products are
    /// componentwise sums.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        match (self, a, b) {
            (GroupDescriptor::Free { .. }, GroupElement::Word(x), GroupElement::Word(y)) => {
                Ok(GroupElement::Word(word_mul(x, y)))
            }
            (
                GroupDescriptor::Lattice { dim },
                GroupElement::Vector(x),
                GroupElement::Vector(y),
            ) => {
                if x.len() != *dim as usize || y.len() != *dim as usize {
                    return Err(Error::Domain(format!(
                        "vector dimension mismatch in {self}: {a} * {b}"
                    )));
                }
                Ok(GroupElement::Vector(
                    x.iter().zip(y.iter()).map(|(p, q)| p + q).collect(),
                ))
            }
            _ => Err(Error::Domain(format!(
                "cannot multiply {a} and {b} in {self}"
            ))),
        }
    }

    /// Group inverse (reverse-and-flip for words, negation for vectors).
    pub fn inv(&self, g: &GroupElement) -> Result<GroupElement> {
        match (self, g) {
            (GroupDescriptor::Free { .. }, GroupElement::Word(w)) => Ok(GroupElement::Word(
                w.iter().rev().map(|&b| letter_flip(b)).collect(),
            )),
            (GroupDescriptor::Lattice { .. }, GroupElement::Vector(v)) => {
                Ok(GroupElement::Vector(v.iter().map(|x| -x).collect()))
            }
            _ => Err(Error::Domain(format!("element {g} not in group {self}"))),
        }
    }

    /// The length function `l` of the standard generators: letter count
    /// for reduced words, ℓ¹ norm for lattice vectors.
    pub fn word_length(&self, g: &GroupElement) -> Result<u64> {
        self.validate_element(g)?;
        Ok(g.length())
    }

    /// Word metric `d(s,t) = l(s⁻¹t)`.
    pub fn distance(&self, s: &GroupElement, t: &GroupElement) -> Result<u64> {
        match (self, s, t) {
            (GroupDescriptor::Free { .. }, GroupElement::Word(a), GroupElement::Word(b)) => {
                Ok(word_distance(a, b))
            }
            (
                GroupDescriptor::Lattice { dim },
                GroupElement::Vector(a),
                GroupElement::Vector(b),
            ) => {
                if a.len() != *dim as usize || b.len() != *dim as usize {
                    return Err(Error::Domain(format!(
                        "vector dimension mismatch in {self}: d({s}, {t})"
                    )));
                }
                Ok(a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.abs_diff(*y))
                    .sum())
            }
            _ => Err(Error::Domain(format!(
                "cannot measure distance between {s} and {t} in {self}"
            ))),
        }
    }

    /// Parses the textual element encoding: case-encoded letter strings
    /// for free groups (`"aBa"`, `""` = identity) and comma-separated
    /// integers for lattices (`"3,-2"`).
    pub fn parse_element(&self, text: &str) -> Result<GroupElement> {
        match *self {
            GroupDescriptor::Free { .. } => {
                let bytes = text.as_bytes().to_vec();
                let g = GroupElement::Word(bytes.into());
                self.validate_element(&g)
                    .map_err(|e| Error::Parse(format!("bad free element {text:?}: {e}")))?;
                Ok(g)
            }
            GroupDescriptor::Lattice { dim } => {
                let coords: std::result::Result<Vec<i64>, _> =
                    text.split(',').map(|p| p.trim().parse::<i64>()).collect();
                let coords = coords.map_err(|e| {
                    Error::Parse(format!("bad lattice element {text:?}: {e}"))
                })?;
                if coords.len() != dim as usize {
                    return Err(Error::Parse(format!(
                        "lattice element {text:?} has {} coordinates, expected {dim}",
                        coords.len()
                    )));
                }
                Ok(GroupElement::Vector(coords.into()))
            }
        }
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GroupDescriptor::Free { rank } => write!(f, "free:{rank}"),
            GroupDescriptor::Lattice { dim } => write!(f, "z:{dim}"),
        }
    }
}

impl FromStr for GroupDescriptor {
    type Err = Error;

    /// Accepts `free:R`, `z:D`, and the alias `lattice:D`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("group syntax is kind:param, got {s:?}")))?;
        let value: u32 = param
            .parse()
            .map_err(|e| Error::Parse(format!("bad group parameter in {s:?}: {e}")))?;
        match kind {
            "free" => GroupDescriptor::free(value),
            "z" | "lattice" => GroupDescriptor::lattice(value),
            other => Err(Error::Parse(format!("unknown group kind {other:?}"))),
        }
    }
}

// ===========================================================================
// Elements
// ===========================================================================

/// A group element: a reduced word over the free alphabet or an integer
/// vector. The `Ord` implementation is the crate's canonical order —
/// word length first (ℓ¹ norm for vectors), then lexicographic (letter
/// order a < a⁻¹ < b < b⁻¹ < …, numeric order for coordinates). Words
/// sort before vectors so the order is total, though the two variants
/// never mix in valid data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupElement {
    Word(Arc<[u8]>),
    Vector(Arc<[i64]>),
}

impl GroupElement {
    /// The length function of the standard generators (descriptor-free:
    /// the value depends only on the element itself).
    pub fn length(&self) -> u64 {
        match self {
            GroupElement::Word(w) => w.len() as u64,
            GroupElement::Vector(v) => v.iter().map(|x| x.unsigned_abs()).sum(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Word(w) => w.is_empty(),
            GroupElement::Vector(v) => v.iter().all(|&x| x == 0),
        }
    }

    pub(crate) fn as_word(&self) -> Option<&[u8]> {
        match self {
            GroupElement::Word(w) => Some(w),
            GroupElement::Vector(_) => None,
        }
    }

    pub(crate) fn as_vector(&self) -> Option<&[i64]> {
        match self {
            GroupElement::Vector(v) => Some(v),
            GroupElement::Word(_) => None,
        }
    }

    /// Word distance without descriptor dispatch; both elements must be
    /// the same variant (guaranteed inside a validated container).
    pub(crate) fn distance_to(&self, other: &GroupElement) -> u64 {
        match (self, other) {
            (GroupElement::Word(a), GroupElement::Word(b)) => word_distance(a, b),
            (GroupElement::Vector(a), GroupElement::Vector(b)) => {
                a.iter().zip(b.iter()).map(|(x, y)| x.abs_diff(*y)).sum()
            }
            _ => unreachable!("mixed element variants in one container"),
        }
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GroupElement::Word(a), GroupElement::Word(b)) => {
                a.len().cmp(&b.len()).then_with(|| {
                    for (x, y) in a.iter().zip(b.iter()) {
                        let ord = letter_key(*x).cmp(&letter_key(*y));
                        if ord != Ordering::Equal {
                            return ord;
                        }
                    }
                    Ordering::Equal
                })
            }
            (GroupElement::Vector(a), GroupElement::Vector(b)) => self
                .length()
                .cmp(&other.length())
                .then_with(|| a.as_ref().cmp(b.as_ref())),
            (GroupElement::Word(_), GroupElement::Vector(_)) => Ordering::Less,
            (GroupElement::Vector(_), GroupElement::Word(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Word(w) => {
                for &b in w.iter() {
                    write!(f, "{}", b as char)?;
                }
                Ok(())
            }
            GroupElement::Vector(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

// ===========================================================================
// Balls
// ===========================================================================

/// The metric ball `B(R) = {g : l(g) ≤ R}`, materialized as an indexed
/// element list in the canonical (length-lexicographic) order. Balls
/// are the finite windows over which every supremum in this crate is
/// evaluated.
#[derive(Debug, Clone)]
pub struct Ball {
    descriptor: GroupDescriptor,
    radius: u64,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, u32>,
}

impl Ball {
    /// Enumerates `B(radius)` under the default element budget.
    pub fn enumerate(descriptor: GroupDescriptor, radius: u64) -> Result<Ball> {
        Ball::enumerate_with_budget(descriptor, radius, DEFAULT_BALL_BUDGET)
    }

    /// Enumerates `B(radius)`, failing with [`Error::Budget`] before any
    /// allocation if the predicted element count exceeds `budget`.
    pub fn enumerate_with_budget(
        descriptor: GroupDescriptor,
        radius: u64,
        budget: u64,
    ) -> Result<Ball> {
        descriptor.validate()?;
        let predicted = Ball::predicted_size(descriptor, radius);
        if predicted > budget {
            return Err(Error::Budget {
                what: format!("ball of radius {radius} in {descriptor}"),
                needed: predicted,
                budget,
            });
        }
        let elements = match descriptor {
            GroupDescriptor::Free { rank } => enumerate_free(rank, radius),
            GroupDescriptor::Lattice { dim } => enumerate_lattice(dim, radius),
        };
        debug_assert_eq!(elements.len() as u64, predicted);
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect();
        Ok(Ball {
            descriptor,
            radius,
            elements,
            index,
        })
    }

    /// Exact size of `B(radius)` from the growth series (saturating at
    /// `u64::MAX`, which always trips the budget check).
    pub fn predicted_size(descriptor: GroupDescriptor, radius: u64) -> u64 {
        match descriptor {
            GroupDescriptor::Free { rank: 1 } => 2 * radius + 1,
            GroupDescriptor::Free { rank } => {
                // 1 + Σ_{k=1..R} 2r·(2r−1)^{k−1}
                let r = rank as u128;
                let mut total: u128 = 1;
                let mut sphere: u128 = 2 * r;
                for _ in 0..radius {
                    total = total.saturating_add(sphere);
                    sphere = sphere.saturating_mul(2 * r - 1);
                    if total > u64::MAX as u128 {
                        return u64::MAX;
                    }
                }
                total.min(u64::MAX as u128) as u64
            }
            GroupDescriptor::Lattice { dim } => {
                // Σ_{j=0..min(d,R)} 2^j · C(d,j) · C(R,j): choose the j
                // coordinates that are nonzero, their signs, and a
                // composition of the remaining norm.
                let d = dim as u128;
                let r = radius as u128;
                let mut total: u128 = 0;
                let mut term: u128 = 1; // j = 0
                for j in 0..=d.min(r) {
                    total = total.saturating_add(term);
                    if total > u64::MAX as u128 {
                        return u64::MAX;
                    }
                    // term(j+1) = term(j) · 2 · (d−j)/(j+1) · (r−j)/(j+1)
                    term = term
                        .saturating_mul(2)
                        .saturating_mul(d - j)
                        .saturating_mul(r - j)
                        / ((j + 1) * (j + 1));
                }
                total.min(u64::MAX as u128) as u64
            }
        }
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, id: u32) -> &GroupElement {
        &self.elements[id as usize]
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<u32> {
        self.index.get(g).copied()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    /// Elements in canonical order.
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElement> {
        self.elements.iter()
    }
}

/// Breadth-first enumeration of the free ball in canonical letter order.
/// Extending each word of the previous sphere by non-cancelling letters
/// in letter order yields the length-lexicographic order directly.
fn enumerate_free(rank: u32, radius: u64) -> Vec<GroupElement> {
    let letters: Vec<u8> = {
        let mut v: Vec<u8> = (0..rank as u8).flat_map(|i| [b'a' + i, b'A' + i]).collect();
        v.sort_by_key(|&b| letter_key(b));
        v
    };
    let mut elements: Vec<GroupElement> = vec![GroupElement::Word(Vec::new().into())];
    let mut prev_sphere: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..radius {
        let mut next: Vec<Vec<u8>> = Vec::new();
        for word in &prev_sphere {
            for &ch in &letters {
                if word.last() == Some(&letter_flip(ch)) {
                    continue;
                }
                let mut w = word.clone();
                w.push(ch);
                next.push(w);
            }
        }
        elements.extend(next.iter().map(|w| GroupElement::Word(w.clone().into())));
        prev_sphere = next;
    }
    elements
}

/// Enumerates the lattice ℓ¹ ball by coordinate recursion, then sorts
/// into the canonical order.
fn enumerate_lattice(dim: u32, radius: u64) -> Vec<GroupElement> {
    fn rec(remaining: u32, slack: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        if remaining == 1 {
            for x in -slack..=slack {
                prefix.push(x);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for x in -slack..=slack {
            prefix.push(x);
            rec(remaining - 1, slack - x.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(dim, radius as i64, &mut Vec::new(), &mut raw);
    let mut elements: Vec<GroupElement> = raw
        .into_iter()
        .map(|v| GroupElement::Vector(v.into()))
        .collect();
    elements.sort();
    elements
}

// ===========================================================================
// Tubes
// ===========================================================================

/// The tube of radius `R`: the set of pairs `(s, t)` with `l(s⁻¹t) ≤ R`.
/// A kernel "supported in a tube" vanishes outside one of these sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tube {
    pub radius: u64,
}

impl Tube {
    pub fn new(radius: u64) -> Tube {
        Tube { radius }
    }

    /// Membership test `(s,t) ∈ T_R ⇔ d(s,t) ≤ R`.
    pub fn contains(
        &self,
        descriptor: GroupDescriptor,
        s: &GroupElement,
        t: &GroupElement,
    ) -> Result<bool> {
        Ok(descriptor.distance(s, t)? <= self.radius)
    }
}

// ===========================================================================
// Unit tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupDescriptor {
        GroupDescriptor::free(2).unwrap()
    }

    fn w(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    #[test]
    fn products_cancel_and_reduce() {
        let g = f2();
        // (ab)·(b⁻¹a) = aa
        assert_eq!(g.mul(&w("ab"), &w("Ba")).unwrap(), w("aa"));
        // identity is neutral
        assert_eq!(g.mul(&g.identity(), &w("aB")).unwrap(), w("aB"));
        // inv(ab⁻¹) = ba⁻¹
        assert_eq!(g.inv(&w("aB")).unwrap(), w("bA"));
        assert_eq!(g.inv(&g.identity()).unwrap(), g.identity());
    }

    #[test]
    fn lattice_arithmetic() {
        let z2 = GroupDescriptor::lattice(2).unwrap();
        let a = z2.parse_element("1,2").unwrap();
        let b = z2.parse_element("3,-2").unwrap();
        assert_eq!(z2.mul(&a, &b).unwrap(), z2.parse_element("4,0").unwrap());
        assert_eq!(
            z2.inv(&z2.parse_element("2,-1").unwrap()).unwrap(),
            z2.parse_element("-2,1").unwrap()
        );
        assert_eq!(z2.word_length(&b).unwrap(), 5);
    }

    #[test]
    fn lengths_and_distances() {
        let g = f2();
        assert_eq!(g.word_length(&g.identity()).unwrap(), 0);
        assert_eq!(g.word_length(&w("aBa")).unwrap(), 3);
        // d(a, ab) = l(b) = 1; d(a, ba) = l(a⁻¹ba) = 3
        assert_eq!(g.distance(&w("a"), &w("ab")).unwrap(), 1);
        assert_eq!(g.distance(&w("a"), &w("ba")).unwrap(), 3);
    }

    #[test]
    fn tube_membership() {
        let g = f2();
        let t1 = Tube::new(1);
        assert!(t1.contains(g, &w("a"), &w("ab")).unwrap());
        assert!(!t1.contains(g, &w("a"), &w("ba")).unwrap());
        assert!(Tube::new(0).contains(g, &w("ab"), &w("ab")).unwrap());
    }

    #[test]
    fn ball_sizes_match_growth_series() {
        assert_eq!(Ball::enumerate(f2(), 1).unwrap().len(), 5);
        assert_eq!(Ball::enumerate(f2(), 2).unwrap().len(), 17);
        let z1 = GroupDescriptor::lattice(1).unwrap();
        let b3 = Ball::enumerate(z1, 3).unwrap();
        assert_eq!(b3.len(), 7);
        let z2 = GroupDescriptor::lattice(2).unwrap();
        assert_eq!(Ball::enumerate(z2, 2).unwrap().len(), 13);
    }

    #[test]
    fn ball_order_is_length_lexicographic() {
        let b2 = Ball::enumerate(f2(), 2).unwrap();
        let shown: Vec<String> = b2.iter().map(|g| g.to_string()).collect();
        assert_eq!(
            shown,
            vec![
                "", "a", "A", "b", "B", "aa", "ab", "aB", "AA", "Ab", "AB", "ba", "bA", "bb",
                "Ba", "BA", "BB"
            ]
        );
        for (i, g) in b2.iter().enumerate() {
            assert_eq!(b2.index_of(g), Some(i as u32));
        }
    }

    #[test]
    fn budget_is_enforced_before_allocation() {
        let err = Ball::enumerate_with_budget(f2(), 10, 100).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn unreduced_words_are_rejected() {
        assert!(f2().parse_element("abBa").is_err());
        assert!(f2().parse_element("c").is_err());
        let z2 = GroupDescriptor::lattice(2).unwrap();
        assert!(z2.parse_element("1").is_err());
        assert!(z2.parse_element("1,x").is_err());
    }
}
