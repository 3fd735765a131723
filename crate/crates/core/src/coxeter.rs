//! Right-angled Coxeter systems, ShortLex normal forms and word-metric balls.
//!
//! A right-angled system is determined by which pairs of generators commute;
//! every other pair generates an infinite dihedral group. Group elements are
//! always stored in ShortLex normal form with respect to the declared
//! generator order, so equality of elements is equality of words.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Index of a generator in its system.
pub type Generator = u8;

/// Inline word storage; long enough for every element the sweeps touch.
pub type Word = SmallVec<[Generator; 24]>;

/// Upper bound on the number of elements [`CoxeterSystem::ball`] will
/// materialize.
pub const BALL_LIMIT: usize = 20_000_000;

/// Per-generator exponent vector.
///
/// Lengths, anti-chain sizes and heights all count walls; reading each count
/// per wall type turns a scalar exponent into one of these.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub SmallVec<[u32; 8]>);

impl MultiIndex {
    pub fn zeros(rank: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, rank))
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn bump(&mut self, s: Generator) {
        self.0[s as usize] += 1;
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, s: Generator) -> u32 {
        self.0[s as usize]
    }

    /// Component-wise difference; `None` if any component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = self.clone();
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a = a.checked_sub(*b)?;
        }
        Some(out)
    }
}

/// An element of a right-angled Coxeter group, held as its ShortLex normal
/// form.
///
/// Elements carry no reference to their system; every operation that needs
/// the commutation relation goes through [`CoxeterSystem`].
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupElement {
    word: Word,
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement { word: Word::new() }
    }

    pub fn word(&self) -> &[Generator] {
        &self.word
    }

    /// Word length ℓ(w).
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    /// Per-generator letter counts ℓ_s(w). For a reduced word the number of
    /// type-s letters equals the number of type-s walls separating 1 from w.
    pub fn multi_length(&self, rank: usize) -> MultiIndex {
        let mut m = MultiIndex::zeros(rank);
        for &s in &self.word {
            m.bump(s);
        }
        m
    }

    /// Parity of each generator's letter count, as a bitmask.
    pub fn parity_mask(&self) -> u64 {
        self.word.iter().fold(0u64, |acc, &s| acc ^ (1 << s))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.word
            .len()
            .cmp(&other.word.len())
            .then_with(|| self.word.cmp(&other.word))
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "1");
        }
        for s in &self.word {
            write!(f, "s{s}")?;
        }
        Ok(())
    }
}

/// A right-angled Coxeter system (W, S).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoxeterSystem {
    labels: Vec<String>,
    /// Bit `t` of `commute[s]` is set iff `s != t` and `st = ts`.
    commute: Vec<u64>,
    polygon: Option<usize>,
}

impl CoxeterSystem {
    /// Reflection group of the regular right-angled k-gon: `s_i` commutes
    /// exactly with `s_{i±1 mod k}`.
    pub fn polygon(k: usize) -> Result<Self> {
        if k < 5 {
            return Err(Error::PolygonTooSmall(k));
        }
        if k > 64 {
            return Err(Error::InvalidSystem(format!("{k} generators exceeds the limit of 64")));
        }
        let mut commute = vec![0u64; k];
        for (i, mask) in commute.iter_mut().enumerate() {
            *mask = (1 << ((i + 1) % k)) | (1 << ((i + k - 1) % k));
        }
        Ok(CoxeterSystem {
            labels: (0..k).map(|i| format!("s{i}")).collect(),
            commute,
            polygon: Some(k),
        })
    }

    /// Builds a system from an explicit symmetric, irreflexive commutation
    /// matrix.
    pub fn from_commutation(labels: Vec<String>, matrix: &[Vec<bool>]) -> Result<Self> {
        let n = labels.len();
        if n == 0 || n > 64 {
            return Err(Error::InvalidSystem(format!("rank must be in 1..=64, got {n}")));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSystem("commutation matrix must be square".into()));
        }
        let distinct: HashSet<&String> = labels.iter().collect();
        if distinct.len() != n {
            return Err(Error::InvalidSystem("generator labels must be distinct".into()));
        }
        let mut commute = vec![0u64; n];
        for i in 0..n {
            if matrix[i][i] {
                return Err(Error::InvalidSystem(format!(
                    "commutation relation must be irreflexive (entry {i},{i})"
                )));
            }
            for j in 0..n {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::InvalidSystem(format!(
                        "commutation matrix is not symmetric at ({i},{j})"
                    )));
                }
                if matrix[i][j] {
                    commute[i] |= 1 << j;
                }
            }
        }
        Ok(CoxeterSystem { labels, commute, polygon: None })
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: Generator) -> &str {
        &self.labels[s as usize]
    }

    /// Number of polygon sides, when this is a polygon reflection group.
    pub fn polygon_sides(&self) -> Option<usize> {
        self.polygon
    }

    pub fn generator(&self, label: &str) -> Result<Generator> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| i as Generator)
            .ok_or_else(|| Error::UnknownGenerator(label.to_string()))
    }

    /// The generators as length-one elements.
    pub fn generators(&self) -> impl Iterator<Item = Generator> {
        0..self.rank() as Generator
    }

    pub fn commutes(&self, s: Generator, t: Generator) -> bool {
        self.commute[s as usize] >> t & 1 == 1
    }

    pub fn commutation_mask(&self, s: Generator) -> u64 {
        self.commute[s as usize]
    }

    pub fn gen(&self, s: Generator) -> GroupElement {
        debug_assert!((s as usize) < self.rank());
        GroupElement { word: smallvec::smallvec![s] }
    }

    fn check(&self, word: &[Generator]) -> Result<()> {
        match word.iter().find(|&&s| s as usize >= self.rank()) {
            Some(&s) => Err(Error::GeneratorOutOfRange { index: s as usize, rank: self.rank() }),
            None => Ok(()),
        }
    }

    /// Normal form of an arbitrary word in the generators.
    pub fn reduce(&self, raw: &[Generator]) -> Result<GroupElement> {
        self.check(raw)?;
        Ok(self.reduce_unchecked(raw.iter().copied()))
    }

    /// Normal form of a word given by generator labels.
    pub fn reduce_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<GroupElement> {
        let word = labels
            .iter()
            .map(|l| self.generator(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.reduce(&word)
    }

    /// Parses a word such as `"s0s2"`, `"s0 s2"` or `"s0*s2"`; `"1"` and the
    /// empty string denote the identity. Labels are matched longest-first.
    pub fn parse_word(&self, text: &str) -> Result<GroupElement> {
        let mut rest = text.trim();
        if rest == "1" || rest == "e" {
            return Ok(GroupElement::identity());
        }
        let mut sorted: Vec<(usize, &String)> = self.labels.iter().enumerate().collect();
        sorted.sort_by_key(|(_, l)| std::cmp::Reverse(l.len()));
        let mut word = Vec::new();
        loop {
            rest = rest.trim_start_matches(|c: char| c.is_whitespace() || ",*·.".contains(c));
            if rest.is_empty() {
                break;
            }
            match sorted.iter().find(|(_, l)| rest.starts_with(l.as_str())) {
                Some((i, l)) => {
                    word.push(*i as Generator);
                    rest = &rest[l.len()..];
                }
                None => return Err(Error::UnknownGenerator(rest.to_string())),
            }
        }
        self.reduce(&word)
    }

    /// Renders an element with the system's labels; the identity is `"1"`.
    pub fn format(&self, w: &GroupElement) -> String {
        if w.is_identity() {
            return "1".into();
        }
        w.word.iter().map(|&s| self.label(s)).collect()
    }

    pub(crate) fn reduce_unchecked(&self, raw: impl IntoIterator<Item = Generator>) -> GroupElement {
        let mut word = Word::new();
        for a in raw {
            self.push_reduced(&mut word, a);
        }
        GroupElement { word: self.lex_normal(&word) }
    }

    /// Appends `a` to a reduced word, cancelling it against the last
    /// occurrence of `a` that only commuting letters separate from the end.
    fn push_reduced(&self, word: &mut Word, a: Generator) {
        let mask = self.commute[a as usize];
        for i in (0..word.len()).rev() {
            let b = word[i];
            if b == a {
                word.remove(i);
                return;
            }
            if mask >> b & 1 == 0 {
                break;
            }
        }
        word.push(a);
    }

    /// Lexicographically least word in the commutation class of a reduced
    /// word: repeatedly pull the smallest letter that commutes past
    /// everything in front of it.
    fn lex_normal(&self, word: &[Generator]) -> Word {
        let mut rest: Word = word.iter().copied().collect();
        let mut out = Word::with_capacity(rest.len());
        while !rest.is_empty() {
            let mut seen = 0u64;
            let mut best: Option<(Generator, usize)> = None;
            for (i, &c) in rest.iter().enumerate() {
                let free = seen & !self.commute[c as usize] == 0;
                if free && best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, i));
                }
                seen |= 1 << c;
            }
            let (c, i) = best.expect("a nonempty word always has a movable letter");
            rest.remove(i);
            out.push(c);
        }
        out
    }

    /// Group product in normal form. Fails if either operand uses a
    /// generator outside this system.
    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check(&a.word)?;
        self.check(&b.word)?;
        Ok(self.mul(a, b))
    }

    /// Group product of elements known to belong to this system.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        let mut word: Word = a.word.clone();
        for &s in &b.word {
            self.push_reduced(&mut word, s);
        }
        GroupElement { word: self.lex_normal(&word) }
    }

    pub fn inverse(&self, w: &GroupElement) -> GroupElement {
        let rev: Word = w.word.iter().rev().copied().collect();
        GroupElement { word: self.lex_normal(&rev) }
    }

    /// s·w.
    pub fn left_mul(&self, s: Generator, w: &GroupElement) -> GroupElement {
        self.reduce_unchecked(std::iter::once(s).chain(w.word.iter().copied()))
    }

    /// w·s.
    pub fn right_mul(&self, w: &GroupElement, s: Generator) -> GroupElement {
        let mut word = w.word.clone();
        self.push_reduced(&mut word, s);
        GroupElement { word: self.lex_normal(&word) }
    }

    /// u·w·u⁻¹.
    pub fn conjugate(&self, u: &GroupElement, w: &GroupElement) -> GroupElement {
        let inv = self.inverse(u);
        self.reduce_unchecked(u.word.iter().chain(&w.word).chain(&inv.word).copied())
    }

    /// True iff ℓ(sw) < ℓ(w).
    pub fn is_left_descent(&self, s: Generator, w: &GroupElement) -> bool {
        let mask = self.commute[s as usize];
        for &b in &w.word {
            if b == s {
                return true;
            }
            if mask >> b & 1 == 0 {
                return false;
            }
        }
        false
    }

    /// True iff ℓ(ws) < ℓ(w).
    pub fn is_right_descent(&self, w: &GroupElement, s: Generator) -> bool {
        let mask = self.commute[s as usize];
        for &b in w.word.iter().rev() {
            if b == s {
                return true;
            }
            if mask >> b & 1 == 0 {
                return false;
            }
        }
        false
    }

    pub fn commute_elements(&self, a: &GroupElement, b: &GroupElement) -> bool {
        self.mul(a, b) == self.mul(b, a)
    }

    /// Word-metric spheres of radius `0..=radius`, each sorted in ShortLex
    /// order.
    pub fn spheres(&self, radius: usize) -> Result<Vec<Vec<GroupElement>>> {
        let mut spheres = vec![vec![GroupElement::identity()]];
        let mut total = 1usize;
        for _ in 0..radius {
            let last = spheres.last().expect("nonempty");
            let mut next: HashSet<GroupElement> = HashSet::with_capacity(last.len() * 3);
            for w in last {
                for s in self.generators() {
                    if !self.is_right_descent(w, s) {
                        next.insert(self.right_mul(w, s));
                    }
                }
            }
            total += next.len();
            if total > BALL_LIMIT {
                return Err(Error::ResourceLimit(format!(
                    "ball of radius {radius} exceeds {BALL_LIMIT} elements"
                )));
            }
            let mut next: Vec<GroupElement> = next.into_iter().collect();
            next.sort();
            spheres.push(next);
        }
        Ok(spheres)
    }

    /// All elements of length at most `radius`, in ShortLex order.
    pub fn ball(&self, radius: usize) -> Result<Vec<GroupElement>> {
        Ok(self.spheres(radius)?.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, VecDeque};

    fn pentagon() -> CoxeterSystem {
        CoxeterSystem::polygon(5).unwrap()
    }

    fn el(sys: &CoxeterSystem, w: &[Generator]) -> GroupElement {
        sys.reduce(w).unwrap()
    }

    #[test]
    fn cancellation_and_tie_break() {
        let sys = pentagon();
        assert!(el(&sys, &[0, 0]).is_identity());
        assert_eq!(el(&sys, &[1, 0]).word(), &[0, 1]);
        assert_eq!(el(&sys, &[0, 1, 0]).word(), &[1]);
        assert_eq!(el(&sys, &[4, 0]).word(), &[0, 4]);
        assert_eq!(el(&sys, &[2, 0]).word(), &[2, 0]);
    }

    #[test]
    fn unknown_generators_are_rejected() {
        let sys = pentagon();
        assert!(matches!(sys.reduce(&[5]), Err(Error::GeneratorOutOfRange { .. })));
        assert!(matches!(sys.reduce_labels(&["s9"]), Err(Error::UnknownGenerator(_))));
        let big = CoxeterSystem::polygon(7).unwrap();
        let w = big.reduce(&[6]).unwrap();
        assert!(sys.multiply(&w, &GroupElement::identity()).is_err());
    }

    #[test]
    fn polygon_needs_five_sides() {
        assert_eq!(CoxeterSystem::polygon(4), Err(Error::PolygonTooSmall(4)));
    }

    #[test]
    fn commutation_matrix_is_validated() {
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(CoxeterSystem::from_commutation(labels.clone(), &[vec![true, false], vec![false, false]]).is_err());
        assert!(CoxeterSystem::from_commutation(labels.clone(), &[vec![false, true], vec![false, false]]).is_err());
        let sys = CoxeterSystem::from_commutation(labels, &[vec![false, true], vec![true, false]]).unwrap();
        assert!(sys.commutes(0, 1));
        assert_eq!(sys.polygon_sides(), None);
    }

    #[test]
    fn parse_and_format() {
        let sys = pentagon();
        let w = sys.parse_word("s0 s2*s0").unwrap();
        assert_eq!(sys.format(&w), "s0s2s0");
        assert_eq!(sys.parse_word("s1s0").unwrap().word(), &[0, 1]);
        assert!(sys.parse_word("1").unwrap().is_identity());
        assert!(sys.parse_word("").unwrap().is_identity());
        assert!(sys.parse_word("s0x").is_err());
    }

    #[test]
    fn square_of_non_commuting_pair_has_length_four() {
        let sys = pentagon();
        let a = el(&sys, &[0, 2]);
        let sq = sys.multiply(&a, &a).unwrap();
        assert_eq!(sq.word(), &[0, 2, 0, 2]);
        // BFS over words: no shorter word represents the same element.
        let found = bfs_distance(&sys, &sq, 4);
        assert_eq!(found, Some(4));
    }

    /// Breadth-first search over raw generator words, identifying words by
    /// their image under the reduction map only at the end.
    fn bfs_distance(sys: &CoxeterSystem, target: &GroupElement, max: usize) -> Option<usize> {
        let mut seen: HashMap<Vec<Generator>, usize> = HashMap::new();
        let mut queue = VecDeque::from([Vec::<Generator>::new()]);
        seen.insert(vec![], 0);
        while let Some(word) = queue.pop_front() {
            let d = word.len();
            if sys.reduce(&word).unwrap() == *target {
                return Some(d);
            }
            if d == max {
                continue;
            }
            for s in sys.generators() {
                let mut next = word.clone();
                next.push(s);
                if !seen.contains_key(&next) {
                    seen.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
        None
    }

    #[test]
    fn small_balls() {
        let sys = pentagon();
        assert_eq!(sys.ball(0).unwrap(), vec![GroupElement::identity()]);
        let b1 = sys.ball(1).unwrap();
        assert_eq!(b1.len(), 6);
        assert_eq!(sys.ball(2).unwrap().len(), brute_force_ball_size(&sys, 2));
        assert_eq!(sys.ball(2).unwrap().len(), 21);
    }

    /// Counts distinct normal forms of all words of length ≤ radius.
    fn brute_force_ball_size(sys: &CoxeterSystem, radius: u32) -> usize {
        let k = sys.rank();
        let mut all = HashSet::new();
        for len in 0..=radius {
            for code in 0..k.pow(len) {
                let mut c = code;
                let word: Vec<Generator> = (0..len)
                    .map(|_| {
                        let s = (c % k) as Generator;
                        c /= k;
                        s
                    })
                    .collect();
                all.insert(sys.reduce(&word).unwrap());
            }
        }
        all.len()
    }

    #[test]
    fn ball_matches_brute_force_enumeration() {
        let sys = pentagon();
        for r in 0..=5 {
            assert_eq!(sys.ball(r as usize).unwrap().len(), brute_force_ball_size(&sys, r));
        }
    }

    #[test]
    fn sphere_sizes_follow_growth_series() {
        // Coefficients of 1/(1 - 5x + 5x^2) with x = t/(1+t).
        let sizes: Vec<usize> = pentagon().spheres(8).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 5, 15, 40, 105, 275, 720, 1885, 4935]);
    }

    #[test]
    fn descents() {
        let sys = pentagon();
        let w = el(&sys, &[0, 2, 1]);
        assert!(sys.is_left_descent(0, &w));
        assert!(!sys.is_left_descent(2, &w));
        assert!(sys.is_right_descent(&w, 1));
        let w = el(&sys, &[0, 1]);
        assert!(sys.is_left_descent(1, &w));
        assert!(sys.is_right_descent(&w, 0));
    }

    #[test]
    fn exchange_condition_on_ball() {
        let sys = pentagon();
        for w in sys.ball(6).unwrap() {
            for s in sys.generators() {
                let sw = sys.left_mul(s, &w);
                let up = sw.len() == w.len() + 1;
                let down = sw.len() + 1 == w.len();
                assert!(up ^ down);
                assert_eq!(down, sys.is_left_descent(s, &w));
            }
        }
    }

    #[test]
    fn ball_growth_is_strict() {
        let sys = CoxeterSystem::polygon(6).unwrap();
        let sizes: Vec<usize> = (0..6).map(|r| sys.ball(r).unwrap().len()).collect();
        assert!(sizes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn multi_length_sums_to_length() {
        let sys = pentagon();
        for w in sys.ball(4).unwrap() {
            assert_eq!(w.multi_length(5).total() as usize, w.len());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn word() -> impl Strategy<Value = Vec<Generator>> {
            prop::collection::vec(0u8..5, 0..14)
        }

        proptest! {
            #[test]
            fn reduce_is_idempotent(w in word()) {
                let sys = pentagon();
                let r = sys.reduce(&w).unwrap();
                prop_assert_eq!(sys.reduce(r.word()).unwrap(), r);
            }

            #[test]
            fn reduce_is_a_homomorphism(u in word(), v in word()) {
                let sys = pentagon();
                let uv: Vec<Generator> = u.iter().chain(&v).copied().collect();
                let lhs = sys.reduce(&uv).unwrap();
                let rhs = sys.multiply(&sys.reduce(&u).unwrap(), &sys.reduce(&v).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn inverse_cancels(u in word()) {
                let sys = pentagon();
                let a = sys.reduce(&u).unwrap();
                prop_assert!(sys.mul(&a, &sys.inverse(&a)).is_identity());
            }

            #[test]
            fn associativity(u in word(), v in word(), w in word()) {
                let sys = pentagon();
                let (a, b, c) = (sys.reduce(&u).unwrap(), sys.reduce(&v).unwrap(), sys.reduce(&w).unwrap());
                prop_assert_eq!(sys.mul(&sys.mul(&a, &b), &c), sys.mul(&a, &sys.mul(&b, &c)));
            }

            #[test]
            fn normal_form_is_confluent(u in word(), swaps in prop::collection::vec(0usize..13, 0..20)) {
                // Apply random commutation moves and compare normal forms.
                let sys = pentagon();
                let mut moved = u.clone();
                for i in swaps {
                    if i + 1 < moved.len() && sys.commutes(moved[i], moved[i + 1]) {
                        moved.swap(i, i + 1);
                    }
                }
                prop_assert_eq!(sys.reduce(&u).unwrap(), sys.reduce(&moved).unwrap());
            }
        }
    }
}
