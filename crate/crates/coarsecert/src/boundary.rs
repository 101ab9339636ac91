//! The boundary of a free group: infinite reduced words.
//!
//! A free group acts on its space of infinite reduced words
//! `ω = a₁a₂a₃…` by left concatenation with cancellation. This module
//! models the *eventually periodic* points of that space — pairs
//! `(head, cycle)` standing for the infinite word `head·cycle·cycle·…` —
//! which is exactly the dense countable part needed by every
//! construction in this crate: the action is computed with zero
//! truncation error, and finite prefixes are available at any length.
//!
//! Points are kept in a canonical form (minimal head, primitive cycle),
//! so structural equality coincides with equality of infinite words:
//! `"a" + ("a")^∞`, `"" + ("aa")^∞` and `"" + ("a")^∞` all normalize to
//! the same value.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::group::{letter_flip, Ball, GroupDescriptor, GroupElement};
use crate::{Error, Result};

/// An eventually periodic infinite reduced word `head·cycle^∞` in
/// canonical form: the head is as short as possible and the cycle is
/// primitive (not a proper power). Displayed as `head:cycle`
/// (`":a"` is `a^∞`, `"ba:a"` is `b·a^∞`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryPoint {
    head: Vec<u8>,
    cycle: Vec<u8>,
}

impl BoundaryPoint {
    /// Builds a boundary point from head and cycle letters, validating
    /// that the infinite word `head·cycle^∞` is reduced, and normalizing
    /// to canonical form.
    pub fn new(head: Vec<u8>, cycle: Vec<u8>) -> Result<BoundaryPoint> {
        if cycle.is_empty() {
            return Err(Error::Domain("boundary cycle must be nonempty".into()));
        }
        for &b in head.iter().chain(cycle.iter()) {
            if !b.is_ascii_alphabetic() {
                return Err(Error::Domain(format!(
                    "boundary letter {:?} is not in the a..z / A..Z alphabet",
                    b as char
                )));
            }
        }
        let check_reduced = |word: &[u8], what: &str| -> Result<()> {
            if word.windows(2).any(|w| w[0] == letter_flip(w[1])) {
                return Err(Error::Domain(format!("boundary {what} is not reduced")));
            }
            Ok(())
        };
        check_reduced(&head, "head")?;
        check_reduced(&cycle, "cycle")?;
        // head→cycle junction
        if let Some(&last) = head.last() {
            if last == letter_flip(cycle[0]) {
                return Err(Error::Domain(
                    "boundary word cancels at the head/cycle junction".into(),
                ));
            }
        }
        // cycle→cycle junction
        if *cycle.last().unwrap() == letter_flip(cycle[0]) {
            return Err(Error::Domain(
                "boundary word cancels at the cycle/cycle junction".into(),
            ));
        }
        Ok(Self::canonicalize(head, cycle))
    }

    /// Normalizes a representation already known to spell a reduced
    /// infinite word: makes the cycle primitive, then shrinks the head
    /// while its last letter equals the cycle's last letter (popping the
    /// head and rotating the cycle right spells the same infinite word
    /// with a shorter head; the loop ends exactly at the minimal head,
    /// where the cycle is the primitive period of the remaining tail).
    fn canonicalize(mut head: Vec<u8>, cycle: Vec<u8>) -> BoundaryPoint {
        let mut cycle = primitive_root(&cycle);
        while let Some(&last) = head.last() {
            if last != *cycle.last().unwrap() {
                break;
            }
            head.pop();
            cycle.rotate_right(1);
        }
        BoundaryPoint { head, cycle }
    }

    /// Checks that every letter fits a free group of the given rank.
    pub fn validate_for(&self, descriptor: GroupDescriptor) -> Result<()> {
        let GroupDescriptor::Free { .. } = descriptor else {
            return Err(Error::Domain(format!(
                "boundary points live over free groups, not {descriptor}"
            )));
        };
        let probe = GroupElement::Word(
            self.head
                .iter()
                .chain(self.cycle.iter())
                .copied()
                .collect::<Vec<u8>>()
                .into(),
        );
        // reducedness already holds; this checks the letter range
        match descriptor.validate_element(&probe) {
            Ok(()) => Ok(()),
            Err(_) => Err(Error::Domain(format!(
                "boundary point {self} uses letters outside {descriptor}"
            ))),
        }
    }

    pub fn head(&self) -> &[u8] {
        &self.head
    }

    pub fn cycle(&self) -> &[u8] {
        &self.cycle
    }

    /// The i-th letter (0-based) of the infinite word.
    #[inline]
    pub fn letter_at(&self, i: u64) -> u8 {
        let h = self.head.len() as u64;
        if i < h {
            self.head[i as usize]
        } else {
            self.cycle[((i - h) % self.cycle.len() as u64) as usize]
        }
    }

    /// The reduced word of the first `k` letters (`k = 0` gives the
    /// identity). Prefixes of a reduced infinite word are reduced.
    pub fn prefix(&self, k: u64) -> GroupElement {
        let letters: Vec<u8> = (0..k).map(|i| self.letter_at(i)).collect();
        GroupElement::Word(letters.into())
    }

    /// Drops the first `k` letters: the point `σᵏ(ω)` with
    /// `ω = ω₁…ω_k · σᵏ(ω)`.
    pub fn shift(&self, k: u64) -> BoundaryPoint {
        let h = self.head.len() as u64;
        if k <= h {
            Self::canonicalize(self.head[k as usize..].to_vec(), self.cycle.clone())
        } else {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(((k - h) % self.cycle.len() as u64) as usize);
            Self::canonicalize(Vec::new(), cycle)
        }
    }

    /// The left concatenation action `ω ↦ s·ω`: letters of `s` are
    /// prepended, cancelling against the front of `ω` (total
    /// cancellation cannot occur — `s` is finite and `ω` infinite).
    /// Satisfies `(st)·ω = s·(t·ω)`.
    pub fn acted_by(&self, s: &GroupElement) -> Result<BoundaryPoint> {
        let Some(word) = s.as_word() else {
            return Err(Error::Domain(format!(
                "boundary action needs a free-group element, got {s}"
            )));
        };
        let mut stack: Vec<u8> = word.to_vec();
        let mut consumed: u64 = 0;
        while let Some(&top) = stack.last() {
            if top == letter_flip(self.letter_at(consumed)) {
                stack.pop();
                consumed += 1;
            } else {
                break;
            }
        }
        let tail = self.shift(consumed);
        // stack is reduced (a prefix of a reduced word) and cannot cancel
        // into tail (the loop stopped), so the concatenation is reduced.
        let mut head = stack;
        head.extend_from_slice(&tail.head);
        Ok(Self::canonicalize(head, tail.cycle))
    }
}

/// Free-function form of the boundary action: `boundary_act(s, ω) = s·ω`.
pub fn boundary_act(s: &GroupElement, omega: &BoundaryPoint) -> Result<BoundaryPoint> {
    omega.acted_by(s)
}

/// One boundary point per reduced word `w` of length `depth`: `w`
/// extended by repeating its last letter forever. The points are
/// pairwise distinct (the first `depth` letters recover `w`) and cover
/// every depth-`depth` cylinder exactly once; they are returned in the
/// canonical order of the underlying words.
pub fn cylinder_sample(descriptor: GroupDescriptor, depth: u64) -> Result<Vec<BoundaryPoint>> {
    let GroupDescriptor::Free { .. } = descriptor else {
        return Err(Error::Domain(format!(
            "cylinder sampling needs a free group, not {descriptor}"
        )));
    };
    if depth == 0 {
        return Err(Error::Domain("cylinder depth must be at least 1".into()));
    }
    let ball = Ball::enumerate(descriptor, depth)?;
    let mut points = Vec::new();
    for g in ball.iter() {
        let word = g.as_word().expect("free ball contains words");
        if word.len() as u64 != depth {
            continue;
        }
        let head = word[..word.len() - 1].to_vec();
        let cycle = vec![*word.last().unwrap()];
        points.push(BoundaryPoint::new(head, cycle)?);
    }
    Ok(points)
}

/// Shortest word whose repetition gives the input (the input itself when
/// it is not a proper power).
fn primitive_root(cycle: &[u8]) -> Vec<u8> {
    let n = cycle.len();
    for p in 1..=n / 2 {
        if n % p == 0 && (p..n).all(|i| cycle[i] == cycle[i - p]) {
            return cycle[..p].to_vec();
        }
    }
    cycle.to_vec()
}

// ===========================================================================
// Text and JSON encodings
// ===========================================================================

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.head {
            write!(f, "{}", b as char)?;
        }
        write!(f, ":")?;
        for &b in &self.cycle {
            write!(f, "{}", b as char)?;
        }
        Ok(())
    }
}

impl FromStr for BoundaryPoint {
    type Err = Error;

    /// Parses `head:cycle`, e.g. `":a"` for `a^∞` or `"ba:a"` for `b·a^∞`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, cycle) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("boundary point syntax is head:cycle, got {s:?}")))?;
        BoundaryPoint::new(head.as_bytes().to_vec(), cycle.as_bytes().to_vec())
            .map_err(|e| Error::Parse(format!("bad boundary point {s:?}: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct BoundaryPointRepr {
    head: String,
    cycle: String,
}

impl Serialize for BoundaryPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BoundaryPointRepr {
            head: String::from_utf8_lossy(&self.head).into_owned(),
            cycle: String::from_utf8_lossy(&self.cycle).into_owned(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundaryPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BoundaryPointRepr::deserialize(deserializer)?;
        BoundaryPoint::new(repr.head.into_bytes(), repr.cycle.into_bytes())
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupDescriptor {
        GroupDescriptor::free(2).unwrap()
    }

    fn w(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    fn pt(s: &str) -> BoundaryPoint {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form_is_minimal() {
        // a·(a)^∞, (aa)^∞ and (a)^∞ are the same point
        assert_eq!(pt("a:a"), pt(":a"));
        assert_eq!(pt(":aa"), pt(":a"));
        // head "ab" with cycle "ab" is (ab)^∞
        assert_eq!(pt("ab:ab"), pt(":ab"));
        assert_eq!(pt("a:ba"), pt(":ab"));
        // a trailing head letter equal to the cycle tail is absorbed
        assert_eq!(pt("ba:a"), pt("b:a"));
        // heads that cannot shrink stay put
        assert_eq!(pt("b:a").head(), b"b");
        assert_eq!(pt("ab:a").head(), b"ab");
        assert_eq!(pt("ab:a").cycle(), b"a");
    }

    #[test]
    fn invalid_points_are_rejected() {
        assert!("aA:b".parse::<BoundaryPoint>().is_err()); // head not reduced
        assert!("a:Ab".parse::<BoundaryPoint>().is_err()); // head/cycle junction cancels
        assert!("b:aA".parse::<BoundaryPoint>().is_err()); // cycle not reduced
        assert!(":abA".parse::<BoundaryPoint>().is_err()); // cycle/cycle junction cancels
        assert!(":".parse::<BoundaryPoint>().is_err()); // empty cycle
    }

    #[test]
    fn action_by_concatenation() {
        let a_inf = pt(":a");
        assert_eq!(a_inf.acted_by(&w("a")).unwrap(), a_inf);
        assert_eq!(a_inf.acted_by(&w("A")).unwrap(), a_inf);
        let b_a = a_inf.acted_by(&w("b")).unwrap();
        assert_eq!(b_a, pt("b:a"));
        // deep cancellation: A·(ab)^∞ swallows the leading a
        assert_eq!(pt(":ab").acted_by(&w("A")).unwrap(), pt(":ba"));
    }

    #[test]
    fn prefixes() {
        assert_eq!(pt(":a").prefix(3), w("aaa"));
        assert_eq!(pt("b:a").prefix(2), w("ba"));
        assert_eq!(pt("b:a").prefix(0), f2().identity());
        assert_eq!(pt("ba:ab").prefix(5), w("baaba"));
    }

    #[test]
    fn cylinder_sampling_counts() {
        let s1 = cylinder_sample(f2(), 1).unwrap();
        assert_eq!(s1.len(), 4);
        assert_eq!(s1[0], pt(":a"));
        let s2 = cylinder_sample(f2(), 2).unwrap();
        assert_eq!(s2.len(), 12);
        for p in &s2 {
            assert!(p.head().len() <= 2);
        }
    }

    #[test]
    fn display_round_trip() {
        for text in [":a", "ba:a", ":ab", "B:ab"] {
            let p = pt(text);
            assert_eq!(p, p.to_string().parse::<BoundaryPoint>().unwrap());
        }
        assert_eq!(pt("ba:a").to_string(), "b:a");
        let json = serde_json::to_string(&pt("b:a")).unwrap();
        assert_eq!(json, r#"{"head":"b","cycle":"a"}"#);
        let back: BoundaryPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pt("b:a"));
    }
}
