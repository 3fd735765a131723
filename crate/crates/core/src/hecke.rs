//! The multi-parameter Hecke algebra of a right-angled Coxeter group.
//!
//! As a vector space the algebra is spanned by basis elements `e_w`, one per
//! group element. Multiplication deforms the group algebra: for a generator
//! `s`,
//!
//! ```text
//! e_s e_w = e_{sw}                         if ℓ(sw) > ℓ(w)
//!         = (q_s - 1) e_w + q_s e_{sw}     if ℓ(sw) < ℓ(w)
//! ```
//!
//! Two multiplication algorithms are provided. [`mul_recursive`] applies the
//! generator rule letter by letter. [`mul_antichain`] evaluates the closed
//! form
//!
//! ```text
//! (e_w f)(u) = Σ_{h ∈ A P(1|u,w)} (q-1)^{#h} q^{ℓ(w) - ht(h)} f(w⁻¹ h u)
//! ```
//!
//! where the sum runs over anti-chains of walls separating 1 from both `u`
//! and `w`, and every power is read per wall type.

use std::collections::{BTreeMap, HashMap};

use crate::coxeter::{CoxeterSystem, Generator, GroupElement, MultiIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::walls::{side, Side, WallPoset};

/// Deformation parameters `q_s`, one per generator.
#[derive(Clone, Debug, PartialEq)]
pub struct HeckeParams<C> {
    q: Vec<C>,
}

impl<C: Scalar> HeckeParams<C> {
    pub fn new(q: Vec<C>) -> Self {
        HeckeParams { q }
    }

    pub fn uniform(rank: usize, q: C) -> Self {
        HeckeParams { q: vec![q; rank] }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, s: Generator) -> &C {
        &self.q[s as usize]
    }

    pub fn values(&self) -> &[C] {
        &self.q
    }

    /// ∏_s q_s^{m_s}.
    pub fn pow(&self, m: &MultiIndex) -> C {
        self.q.iter().zip(&m.0).fold(C::one(), |acc, (q, &e)| acc * q.powu(e))
    }

    /// ∏_s (q_s − 1)^{m_s}.
    pub fn pow_minus_one(&self, m: &MultiIndex) -> C {
        self.q
            .iter()
            .zip(&m.0)
            .fold(C::one(), |acc, (q, &e)| acc * (q.clone() - C::one()).powu(e))
    }

    fn check(&self, sys: &CoxeterSystem) -> Result<()> {
        if self.q.len() != sys.rank() {
            return Err(Error::SizeMismatch { expected: sys.rank(), got: self.q.len() });
        }
        Ok(())
    }
}

/// A finitely supported function on the group; zero coefficients are never
/// stored.
#[derive(Clone, Debug, PartialEq)]
pub struct HeckeElement<C> {
    terms: BTreeMap<GroupElement, C>,
}

impl<C: Scalar> Default for HeckeElement<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Scalar> HeckeElement<C> {
    pub fn zero() -> Self {
        HeckeElement { terms: BTreeMap::new() }
    }

    /// The basis element e_w.
    pub fn basis(w: GroupElement) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(w, C::one());
        HeckeElement { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (GroupElement, C)>) -> Self {
        let mut out = Self::zero();
        for (w, c) in terms {
            out.add_term(w, c);
        }
        out
    }

    pub fn coeff(&self, w: &GroupElement) -> C {
        self.terms.get(w).cloned().unwrap_or_else(C::zero)
    }

    pub fn get(&self, w: &GroupElement) -> Option<&C> {
        self.terms.get(w)
    }

    pub fn add_term(&mut self, w: GroupElement, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &C)> {
        self.terms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Longest word in the support (0 for the zero element).
    pub fn support_radius(&self) -> usize {
        self.terms.keys().map(GroupElement::len).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, x)| (w.clone(), x.clone() * c.clone())))
    }

    /// Largest coefficient magnitude of `self − other`.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.sub(other).terms.values().map(Scalar::magnitude).fold(0.0, f64::max)
    }

    /// Exact equality for exact rings; entrywise tolerance otherwise.
    pub fn matches(&self, other: &Self, tolerance: f64) -> bool {
        if C::EXACT {
            self == other
        } else {
            self.max_difference(other) <= tolerance
        }
    }
}

/// e_s · f, evaluated pointwise:
/// `(e_s f)(u) = q_s f(su)` if ℓ(su) > ℓ(u), else `(q_s − 1) f(u) + f(su)`.
pub fn mul_gen<C: Scalar>(
    sys: &CoxeterSystem,
    s: Generator,
    f: &HeckeElement<C>,
    params: &HeckeParams<C>,
) -> HeckeElement<C> {
    let q = params.q(s).clone();
    let mut candidates: Vec<GroupElement> = Vec::with_capacity(2 * f.len());
    for u in f.support() {
        candidates.push(u.clone());
        candidates.push(sys.left_mul(s, u));
    }
    candidates.sort();
    candidates.dedup();
    let mut out = HeckeElement::zero();
    for u in candidates {
        let su = sys.left_mul(s, &u);
        let value = if su.len() > u.len() {
            f.coeff(&su) * q.clone()
        } else {
            f.coeff(&u) * (q.clone() - C::one()) + f.coeff(&su)
        };
        out.add_term(u, value);
    }
    out
}

/// e_w · f by applying [`mul_gen`] along the normal form of `w`, rightmost
/// letter first.
pub fn mul_recursive<C: Scalar>(
    sys: &CoxeterSystem,
    w: &GroupElement,
    f: &HeckeElement<C>,
    params: &HeckeParams<C>,
) -> HeckeElement<C> {
    w.word().iter().rev().fold(f.clone(), |acc, &s| mul_gen(sys, s, &acc, params))
}

/// e_{a_1} ⋯ e_{a_n} · f for an explicit reduced word `a_1 … a_n`.
pub fn mul_recursive_word<C: Scalar>(
    sys: &CoxeterSystem,
    word: &[Generator],
    f: &HeckeElement<C>,
    params: &HeckeParams<C>,
) -> Result<HeckeElement<C>> {
    params.check(sys)?;
    if sys.reduce(word)?.len() != word.len() {
        return Err(Error::Precondition("word is not reduced".into()));
    }
    Ok(word.iter().rev().fold(f.clone(), |acc, &s| mul_gen(sys, s, &acc, params)))
}

/// Where [`mul_antichain`] looks for the support of e_w · f.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportBound {
    /// Every `u` with ℓ(u) ≤ ℓ(w) + (longest support word of f).
    Ball,
    /// Only `u = h w v` for anti-chains `h` of P(1|w) and `v` in the
    /// support of f; these are the only points where a summand can be
    /// nonzero.
    AntichainOrbit,
}

/// Precomputed data for evaluating the closed form for a fixed `w`.
pub struct AntichainMultiplier<'a> {
    sys: &'a CoxeterSystem,
    w: GroupElement,
    w_inv: GroupElement,
    w_multi: MultiIndex,
    poset: WallPoset,
    products: HashMap<u64, GroupElement>,
}

impl<'a> AntichainMultiplier<'a> {
    pub fn new(sys: &'a CoxeterSystem, w: &GroupElement) -> Self {
        let poset = WallPoset::separating(sys, w);
        let products = poset
            .antichain_masks(poset.full_mask())
            .into_iter()
            .map(|m| (m, poset.product(sys, m)))
            .collect();
        AntichainMultiplier {
            sys,
            w: w.clone(),
            w_inv: sys.inverse(w),
            w_multi: w.multi_length(sys.rank()),
            poset,
            products,
        }
    }

    pub fn poset(&self) -> &WallPoset {
        &self.poset
    }

    /// Products `h` of all anti-chains of P(1|w).
    pub fn antichain_products(&self) -> impl Iterator<Item = &GroupElement> {
        self.products.values()
    }

    /// Mask of the walls of P(1|w) that also separate 1 from `u`.
    pub fn separating_mask(&self, u: &GroupElement) -> u64 {
        self.poset
            .walls()
            .iter()
            .enumerate()
            .filter(|(_, wall)| side(self.sys, wall, u) == Side::Far)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    /// (e_w f)(u) by the anti-chain sum.
    pub fn coefficient<C: Scalar>(&self, u: &GroupElement, f: &HeckeElement<C>, params: &HeckeParams<C>) -> C {
        let rank = self.sys.rank();
        let within = self.separating_mask(u);
        let mut total = C::zero();
        for h in self.poset.antichain_masks(within) {
            let hu = self.sys.mul(&self.products[&h], u);
            let x = self.sys.mul(&self.w_inv, &hu);
            let Some(fx) = f.get(&x) else { continue };
            let size = self.poset.multi_count(rank, h);
            let height = self.poset.multi_height(rank, h, within);
            let exponent = self
                .w_multi
                .checked_sub(&height)
                .expect("heights never exceed the length");
            total = total + params.pow_minus_one(&size) * params.pow(&exponent) * fx.clone();
        }
        total
    }

    /// e_w · f, evaluating the closed form on the requested support bound.
    pub fn apply<C: Scalar>(&self, f: &HeckeElement<C>, params: &HeckeParams<C>, bound: SupportBound) -> HeckeElement<C> {
        let candidates: Vec<GroupElement> = match bound {
            SupportBound::Ball => self
                .sys
                .ball(self.w.len() + f.support_radius())
                .expect("support ball within resource limits"),
            SupportBound::AntichainOrbit => {
                let mut c: Vec<GroupElement> = Vec::new();
                for v in f.support() {
                    let wv = self.sys.mul(&self.w, v);
                    for h in self.products.values() {
                        c.push(self.sys.mul(h, &wv));
                    }
                }
                c.sort();
                c.dedup();
                c
            }
        };
        HeckeElement::from_terms(candidates.into_iter().map(|u| {
            let c = self.coefficient(&u, f, params);
            (u, c)
        }))
    }
}

/// e_w · f by the anti-chain closed form.
pub fn mul_antichain<C: Scalar>(
    sys: &CoxeterSystem,
    w: &GroupElement,
    f: &HeckeElement<C>,
    params: &HeckeParams<C>,
) -> HeckeElement<C> {
    AntichainMultiplier::new(sys, w).apply(f, params, SupportBound::AntichainOrbit)
}

/// Which single-term product [`product`] extends bilinearly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Recursive,
    Antichain,
}

/// General product a · b, the bilinear extension of e_w · f.
pub fn product<C: Scalar>(
    sys: &CoxeterSystem,
    a: &HeckeElement<C>,
    b: &HeckeElement<C>,
    params: &HeckeParams<C>,
    algorithm: Algorithm,
) -> Result<HeckeElement<C>> {
    params.check(sys)?;
    let mut out = HeckeElement::zero();
    for (w, c) in a.iter() {
        let term = match algorithm {
            Algorithm::Recursive => mul_recursive(sys, w, b, params),
            Algorithm::Antichain => mul_antichain(sys, w, b, params),
        };
        out = out.add(&term.scale(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn pentagon() -> CoxeterSystem {
        CoxeterSystem::polygon(5).unwrap()
    }

    fn el(sys: &CoxeterSystem, w: &[Generator]) -> GroupElement {
        sys.reduce(w).unwrap()
    }

    fn uniform(q: i64) -> HeckeParams<Q> {
        HeckeParams::uniform(5, Q::from_integer(q))
    }

    fn e(w: GroupElement) -> HeckeElement<Q> {
        HeckeElement::basis(w)
    }

    #[test]
    fn generator_rules() {
        let sys = pentagon();
        let p = uniform(3);
        let s = el(&sys, &[0]);
        let got = mul_gen(&sys, 0, &e(s.clone()), &p);
        let expected = HeckeElement::from_terms([(s.clone(), Q::from_integer(2)), (GroupElement::identity(), Q::from_integer(3))]);
        assert_eq!(got, expected);
        let w = el(&sys, &[2, 4]);
        assert_eq!(mul_gen(&sys, 0, &e(w.clone()), &p), e(el(&sys, &[0, 2, 4])));
        assert!(mul_gen(&sys, 0, &HeckeElement::<Q>::zero(), &p).is_zero());
    }

    #[test]
    fn recursive_examples() {
        let sys = pentagon();
        let p = uniform(2);
        let f = e(el(&sys, &[1, 3]));
        assert_eq!(mul_recursive(&sys, &GroupElement::identity(), &f, &p), f);
        assert_eq!(mul_recursive(&sys, &el(&sys, &[2]), &f, &p), mul_gen(&sys, 2, &f, &p));
        let one = e(GroupElement::identity());
        assert_eq!(mul_recursive(&sys, &el(&sys, &[0, 2]), &one, &p), e(el(&sys, &[0, 2])));
    }

    #[test]
    fn non_reduced_words_are_rejected() {
        let sys = pentagon();
        let p = uniform(2);
        assert!(mul_recursive_word(&sys, &[0, 0], &e(GroupElement::identity()), &p).is_err());
    }

    #[test]
    fn closed_form_single_generator() {
        let sys = pentagon();
        let p = uniform(2);
        let s = el(&sys, &[0]);
        for u in sys.ball(3).unwrap() {
            assert_eq!(mul_antichain(&sys, &s, &e(u.clone()), &p), mul_gen(&sys, 0, &e(u), &p));
        }
    }

    #[test]
    fn commuting_pair_summands() {
        // w = s0s1, u = s0s1, f = e_1: only h = ∅ hits the support of f and
        // every anti-chain has height 2 because the two walls cross.
        let sys = pentagon();
        let w = el(&sys, &[0, 1]);
        let m = AntichainMultiplier::new(&sys, &w);
        let within = m.separating_mask(&w);
        let heights: Vec<u32> =
            m.poset().antichain_masks(within).iter().map(|&h| m.poset().height(h, within)).collect();
        assert_eq!(heights, vec![2, 2, 2, 2]);
        let one = e(GroupElement::identity());
        assert_eq!(m.coefficient(&w, &one, &uniform(2)), Q::from_integer(1));
        assert_eq!(mul_antichain(&sys, &w, &one, &uniform(2)), mul_recursive(&sys, &w, &one, &uniform(2)));
    }

    #[test]
    fn mixed_parameters_agree() {
        let sys = pentagon();
        let mut q = vec![Q::from_integer(1); 5];
        q[0] = Q::from_integer(2);
        q[2] = Q::from_integer(3);
        let p = HeckeParams::new(q);
        let w = el(&sys, &[0, 2, 0]);
        let f = e(el(&sys, &[0]));
        let rec = mul_recursive(&sys, &w, &f, &p);
        assert_eq!(mul_antichain(&sys, &w, &f, &p), rec);
        assert!(rec.len() > 1);
    }

    #[test]
    fn support_bounds_agree() {
        let sys = pentagon();
        let p = HeckeParams::new([2, 3, 2, 3, 2].map(Q::from_integer).to_vec());
        for w in sys.ball(3).unwrap() {
            let m = AntichainMultiplier::new(&sys, &w);
            for u in sys.ball(2).unwrap().into_iter().step_by(3) {
                let f = e(u);
                assert_eq!(m.apply(&f, &p, SupportBound::Ball), m.apply(&f, &p, SupportBound::AntichainOrbit));
            }
        }
    }

    #[test]
    fn quadratic_relation() {
        let sys = pentagon();
        let p = HeckeParams::new([2, 3, 5, 7, 11].map(Q::from_integer).to_vec());
        for s in sys.generators() {
            let es = e(sys.gen(s));
            let sq = product(&sys, &es, &es, &p, Algorithm::Recursive).unwrap();
            let q = p.q(s).clone();
            let expected = HeckeElement::from_terms([(sys.gen(s), q - Q::from_integer(1)), (GroupElement::identity(), q)]);
            assert_eq!(sq, expected);
        }
    }

    #[test]
    fn commuting_generators() {
        let sys = pentagon();
        let p = uniform(3);
        let (a, b) = (e(sys.gen(0)), e(sys.gen(1)));
        let ab = product(&sys, &a, &b, &p, Algorithm::Antichain).unwrap();
        let ba = product(&sys, &b, &a, &p, Algorithm::Antichain).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab, e(el(&sys, &[0, 1])));
    }

    #[test]
    fn q_one_is_the_group_algebra() {
        let sys = pentagon();
        let p = uniform(1);
        let ball = sys.ball(3).unwrap();
        for w in &ball {
            for u in ball.iter().step_by(5) {
                assert_eq!(mul_antichain(&sys, w, &e(u.clone()), &p), e(sys.mul(w, u)));
            }
        }
    }

    #[test]
    fn identity_is_neutral() {
        let sys = pentagon();
        let p = uniform(2);
        let b = HeckeElement::from_terms([(el(&sys, &[0, 2]), Q::new(1, 2)), (el(&sys, &[3]), Q::from_integer(-4))]);
        let one = e(GroupElement::identity());
        assert_eq!(product(&sys, &one, &b, &p, Algorithm::Recursive).unwrap(), b);
        assert_eq!(product(&sys, &b, &one, &p, Algorithm::Antichain).unwrap(), b);
    }

    #[test]
    fn reduced_word_independence() {
        let sys = pentagon();
        let p = HeckeParams::new([2, 3, 2, 3, 2].map(Q::from_integer).to_vec());
        let f = HeckeElement::from_terms([(el(&sys, &[1, 3]), Q::from_integer(1)), (el(&sys, &[4]), Q::new(2, 3))]);
        // s0 s1 s3 has the reduced words 013, 103, 031 (s1, s3 do not commute).
        let words: [&[Generator]; 3] = [&[0, 1, 3], &[1, 0, 3], &[0, 3, 1]];
        let results: Vec<_> = words
            .iter()
            .filter(|w| sys.reduce(w).unwrap() == el(&sys, &[0, 1, 3]))
            .map(|w| mul_recursive_word(&sys, w, &f, &p).unwrap())
            .collect();
        assert!(results.len() >= 2);
        assert!(results.windows(2).all(|r| r[0] == r[1]));
    }

    #[test]
    fn associativity_sweep() {
        let sys = pentagon();
        let p = HeckeParams::new([2, 3, 2, 3, 2].map(Q::from_integer).to_vec());
        let ball = sys.ball(4).unwrap();
        for (i, a) in ball.iter().enumerate().step_by(13) {
            for b in ball.iter().skip(i % 7).step_by(17) {
                for c in ball.iter().skip(i % 5).step_by(29) {
                    let (a, b, c) = (e(a.clone()), e(b.clone()), e(c.clone()));
                    let ab = product(&sys, &a, &b, &p, Algorithm::Recursive).unwrap();
                    let bc = product(&sys, &b, &c, &p, Algorithm::Recursive).unwrap();
                    let left = product(&sys, &ab, &c, &p, Algorithm::Recursive).unwrap();
                    let right = product(&sys, &a, &bc, &p, Algorithm::Recursive).unwrap();
                    assert_eq!(left, right);
                }
            }
        }
    }

    #[test]
    fn floating_coefficients_use_tolerance() {
        let sys = pentagon();
        let p = HeckeParams::uniform(5, 1.7f64);
        let w = el(&sys, &[0, 2, 4, 1]);
        let f = HeckeElement::from_terms([(el(&sys, &[4, 2]), 0.25f64), (el(&sys, &[3]), -1.5)]);
        let a = mul_antichain(&sys, &w, &f, &p);
        let b = mul_recursive(&sys, &w, &f, &p);
        assert!(a.matches(&b, crate::scalar::FLOAT_TOLERANCE));
    }

    #[test]
    fn parameter_rank_is_checked() {
        let sys = pentagon();
        let p = HeckeParams::uniform(4, Q::from_integer(2));
        let one = e(GroupElement::identity());
        assert!(product(&sys, &one, &one, &p, Algorithm::Recursive).is_err());
    }
}
