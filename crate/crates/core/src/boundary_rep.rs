//! Principal-series Hecke operators on functions on the boundary circle.
//!
//! The Weyl action of `w` is `(w¹f)(x) = τ(w, x) f(w⁻¹x)` with
//! `τ(w, x) = [d(w_* l)/dl (x)]^{1/2 + iε}`. The Hecke action of a generator
//! is
//!
//! ```text
//! (s^q f)(x) = q^{1/2 − iε} (s¹f)(x)                   on the near arc of s
//!            = (q − 1) f(x) + q^{1/2 + iε} (s¹f)(x)     on the far arc of s
//! ```
//!
//! and for general `w` the closed form sums over anti-chains `h` of the walls
//! separating 1 from both `x` and `w`:
//!
//! ```text
//! (w^q f)(x) = Σ_h (q−1)^{#h} q^{(ℓ(w) − #h)/2 + iε(2 ht(h) − ℓ(w) − #h)} ((hw)¹f)(x)
//! ```
//!
//! Functions are exact evaluators ([`PointFunction`]) so that composing
//! operators never interpolates; [`GridFunction`] samples them for
//! quadrature.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::coxeter::{CoxeterSystem, Generator, GroupElement, MultiIndex};
use crate::error::{Error, Result};
use crate::hyperbolic::{poisson, tau_from_rn, BoundaryPoint, Isometry, Point, PolygonModel, WallArc};
use crate::quadrature::GaussLegendre;
use crate::walls::{Side, Wall, WallPoset};

/// A right-angled polygon group together with its geometric realization.
#[derive(Clone, Debug)]
pub struct BoundaryModel {
    sys: CoxeterSystem,
    model: PolygonModel,
    simple_arcs: Vec<WallArc>,
}

impl BoundaryModel {
    pub fn polygon(k: usize) -> Result<Arc<Self>> {
        let sys = CoxeterSystem::polygon(k)?;
        let model = PolygonModel::build(k)?;
        let simple_arcs = (0..k as Generator).map(|s| WallArc::from_normal(*model.side_normal(s))).collect();
        Ok(Arc::new(BoundaryModel { sys, model, simple_arcs }))
    }

    pub fn system(&self) -> &CoxeterSystem {
        &self.sys
    }

    pub fn geometry(&self) -> &PolygonModel {
        &self.model
    }

    pub fn simple_arc(&self, s: Generator) -> &WallArc {
        &self.simple_arcs[s as usize]
    }

    pub fn wall_arc(&self, wall: &Wall) -> WallArc {
        let n = self.model.represent(wall.prefix()).apply(self.model.side_normal(wall.wall_type()));
        WallArc::from_normal(n)
    }

    /// Walls of P(1|w) that also separate 1 from the boundary point `x`.
    pub fn walls_separating_from_point(&self, w: &GroupElement, x: BoundaryPoint) -> Result<Vec<Wall>> {
        crate::walls::walls_separating_from_set(&self.sys, w, |wall| self.wall_arc(wall).side(x))
    }

    /// `H < H2` read off the boundary: the far arc of `H2` lies strictly
    /// inside the far arc of `H`.
    pub fn arcs_nested(&self, h: &Wall, h2: &Wall) -> bool {
        let (a, b) = (self.wall_arc(h), self.wall_arc(h2));
        let (s1, l1) = (a.centre() - a.half_width(), 2.0 * a.half_width());
        let (s2, l2) = (b.centre() - b.half_width(), 2.0 * b.half_width());
        let offset = (s2 - s1).rem_euclid(std::f64::consts::TAU);
        l2 < l1 && offset + l2 <= l1
    }
}

/// Deformation parameters `q_s ≥ 1` and the twist `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepParams {
    q: Vec<f64>,
    epsilon: f64,
}

impl RepParams {
    pub fn new(q: Vec<f64>, epsilon: f64) -> Result<Self> {
        if let Some(bad) = q.iter().find(|q| !q.is_finite() || **q < 1.0) {
            return Err(Error::Precondition(format!("q_s = {bad} must be a real number ≥ 1")));
        }
        if !epsilon.is_finite() {
            return Err(Error::Precondition("ε must be finite".into()));
        }
        Ok(RepParams { q, epsilon })
    }

    pub fn uniform(rank: usize, q: f64, epsilon: f64) -> Result<Self> {
        Self::new(vec![q; rank], epsilon)
    }

    pub fn q(&self, s: Generator) -> f64 {
        self.q[s as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// `∏_s q_s^{m_s}` for real exponents.
    pub fn pow_real(&self, m: &[f64]) -> f64 {
        self.q.iter().zip(m).map(|(q, e)| q.powf(*e)).product()
    }

    /// `∏_s q_s^{a_s + iε b_s}`.
    pub fn pow_twisted(&self, a: &[f64], b: &[f64]) -> Complex64 {
        let exponent: Complex64 = self
            .q
            .iter()
            .zip(a.iter().zip(b))
            .map(|(q, (a, b))| Complex64::new(*a, self.epsilon * b) * q.ln())
            .sum();
        exponent.exp()
    }

    /// `∏_s (q_s − 1)^{m_s}`.
    pub fn pow_minus_one(&self, m: &MultiIndex) -> f64 {
        self.q.iter().zip(&m.0).map(|(q, &e)| (q - 1.0).powi(e as i32)).product()
    }

    fn check(&self, sys: &CoxeterSystem) -> Result<()> {
        if self.q.len() != sys.rank() {
            return Err(Error::SizeMismatch { expected: sys.rank(), got: self.q.len() });
        }
        Ok(())
    }
}

type Evaluator = dyn Fn(BoundaryPoint) -> Result<Complex64> + Send + Sync;

/// A function on the boundary circle given by an exact evaluator.
#[derive(Clone)]
pub struct PointFunction(Arc<Evaluator>);

impl std::fmt::Debug for PointFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PointFunction")
    }
}

impl PointFunction {
    pub fn new(f: impl Fn(BoundaryPoint) -> Result<Complex64> + Send + Sync + 'static) -> Self {
        PointFunction(Arc::new(f))
    }

    pub fn from_real(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |x| Ok(Complex64::new(f(x.angle()), 0.0)))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| Ok(Complex64::new(c, 0.0)))
    }

    /// `e^{inθ}`.
    pub fn fourier(n: i32) -> Self {
        Self::new(move |x| Ok(Complex64::from_polar(1.0, n as f64 * x.angle())))
    }

    pub fn indicator(arcs: ArcSet) -> Self {
        Self::new(move |x| Ok(Complex64::new(if arcs.contains(x) { 1.0 } else { 0.0 }, 0.0)))
    }

    pub fn eval(&self, x: BoundaryPoint) -> Result<Complex64> {
        (self.0)(x)
    }

    pub fn sample(&self, grid: &BoundaryGrid) -> Sampled {
        let mut values = Vec::with_capacity(grid.len());
        let mut skipped = Vec::new();
        for j in 0..grid.len() {
            match self.eval(grid.point(j)) {
                Ok(v) => values.push(v),
                Err(_) => {
                    skipped.push(j);
                    values.push(Complex64::zero());
                }
            }
        }
        Sampled { function: GridFunction { values }, skipped }
    }
}

/// A finite union of closed arcs `[start, start + length]` of the circle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    pub arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn empty() -> Self {
        ArcSet { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        ArcSet { arcs: vec![(0.0, TAU)] }
    }

    /// The arc running counter-clockwise from `start` to `end`.
    pub fn arc(start: f64, end: f64) -> Self {
        let s = BoundaryPoint::new(start).angle();
        let len = (end - start).rem_euclid(TAU);
        ArcSet { arcs: vec![(s, if len == 0.0 && end != start { TAU } else { len })] }
    }

    pub fn contains(&self, x: BoundaryPoint) -> bool {
        self.arcs.iter().any(|&(s, len)| (x.angle() - s).rem_euclid(TAU) <= len)
    }

    /// Distance (in angle) from `x` to the nearest arc endpoint.
    pub fn boundary_distance(&self, x: BoundaryPoint) -> f64 {
        self.arcs
            .iter()
            .filter(|&&(_, len)| len < TAU)
            .flat_map(|&(s, len)| [s, s + len])
            .map(|e| {
                let d = (x.angle() - e).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Normalized measure.
    pub fn measure(&self) -> f64 {
        self.to_intervals().iter().map(|(a, b)| b - a).sum::<f64>() / TAU
    }

    /// Disjoint sorted sub-intervals of `[0, 2π]`.
    pub fn to_intervals(&self) -> Vec<(f64, f64)> {
        let mut raw = Vec::new();
        for &(s, len) in &self.arcs {
            let e = s + len;
            if e <= TAU {
                raw.push((s, e));
            } else {
                raw.push((s, TAU));
                raw.push((0.0, (e - TAU).min(TAU)));
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in raw {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    pub fn intersect(&self, other: &ArcSet) -> ArcSet {
        let (a, b) = (self.to_intervals(), other.to_intervals());
        let mut arcs = Vec::new();
        for &(a0, a1) in &a {
            for &(b0, b1) in &b {
                let (lo, hi) = (a0.max(b0), a1.min(b1));
                if hi > lo {
                    arcs.push((lo, hi - lo));
                }
            }
        }
        ArcSet { arcs }
    }

    /// The image of the arcs under an isometry.
    pub fn image(&self, g: &Isometry) -> ArcSet {
        let reverses = g.matrix().determinant() < 0.0;
        let arcs = self
            .arcs
            .iter()
            .map(|&(s, len)| {
                if len >= TAU {
                    return (0.0, TAU);
                }
                let a = g.apply_boundary(BoundaryPoint::new(s)).angle();
                let b = g.apply_boundary(BoundaryPoint::new(s + len)).angle();
                if reverses {
                    (b, (a - b).rem_euclid(TAU))
                } else {
                    (a, (b - a).rem_euclid(TAU))
                }
            })
            .collect();
        ArcSet { arcs }
    }
}

impl From<WallArc> for ArcSet {
    /// The far arc of a wall.
    fn from(arc: WallArc) -> Self {
        ArcSet::arc(arc.centre() - arc.half_width(), arc.centre() + arc.half_width())
    }
}

/// `w¹f`.
pub fn apply_w1(model: &Arc<BoundaryModel>, w: &GroupElement, f: &PointFunction, epsilon: f64) -> PointFunction {
    let (model, w, f) = (model.clone(), w.clone(), f.clone());
    PointFunction::new(move |x| {
        let (y, rn) = model.model.pull_back(&w, x);
        Ok(tau_from_rn(rn, epsilon) * f.eval(y)?)
    })
}

/// `s^q f` for a generator.
pub fn apply_sq(model: &Arc<BoundaryModel>, s: Generator, f: &PointFunction, params: &RepParams) -> PointFunction {
    let arc = *model.simple_arc(s);
    let r = *model.model.side_reflection(s);
    let p = r.orbit_point();
    let q = params.q(s);
    let eps = params.epsilon();
    let f = f.clone();
    PointFunction::new(move |x| {
        let weyl = tau_from_rn(poisson(&p, x), eps) * f.eval(r.apply_boundary(x))?;
        Ok(match arc.side(x)? {
            Side::Near => Complex64::new(0.5, -eps).expf(q) * weyl,
            Side::Far => f.eval(x)? * (q - 1.0) + Complex64::new(0.5, eps).expf(q) * weyl,
        })
    })
}

/// `w^q f` by composing generator actions along the normal form of `w`,
/// rightmost letter first.
pub fn apply_wq_composed(model: &Arc<BoundaryModel>, w: &GroupElement, f: &PointFunction, params: &RepParams) -> PointFunction {
    w.word().iter().rev().fold(f.clone(), |acc, &s| apply_sq(model, s, &acc, params))
}

/// `w^q f` along an explicit reduced word.
pub fn apply_wq_word(model: &Arc<BoundaryModel>, word: &[Generator], f: &PointFunction, params: &RepParams) -> Result<PointFunction> {
    params.check(&model.sys)?;
    if model.sys.reduce(word)?.len() != word.len() {
        return Err(Error::Precondition("word is not reduced".into()));
    }
    Ok(word.iter().rev().fold(f.clone(), |acc, &s| apply_sq(model, s, &acc, params)))
}

/// One anti-chain of P(1|w) with the data needed to evaluate its summand.
#[derive(Clone, Debug)]
pub struct AntichainTerm {
    pub mask: u64,
    pub size: MultiIndex,
    /// The element `h·w`.
    pub hw: GroupElement,
    pub hw_point: Point,
    pub hw_inverse: Isometry,
}

/// A summand of the closed form at a fixed boundary point.
#[derive(Clone, Copy, Debug)]
pub struct TermValue {
    /// Index into [`ClosedForm::terms`].
    pub index: usize,
    /// `(q−1)^{#h} q^{(ℓ(w) − #h)/2 + iε(2 ht(h) − ℓ(w) − #h)}`.
    pub coefficient: Complex64,
    pub height: u32,
}

/// The closed form for `w^q`, with everything that does not depend on the
/// evaluation point precomputed.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    w: GroupElement,
    w_multi: MultiIndex,
    poset: WallPoset,
    arcs: Vec<WallArc>,
    terms: Vec<AntichainTerm>,
    params: RepParams,
    geometry: PolygonModel,
}

impl ClosedForm {
    pub fn new(model: &BoundaryModel, w: &GroupElement, params: &RepParams) -> Result<Self> {
        params.check(&model.sys)?;
        let sys = &model.sys;
        let poset = WallPoset::separating(sys, w);
        let arcs = poset.walls().iter().map(|wall| model.wall_arc(wall)).collect();
        let terms = poset
            .antichain_masks(poset.full_mask())
            .into_iter()
            .map(|mask| {
                let hw = sys.mul(&poset.product(sys, mask), w);
                let g = model.model.represent(&hw);
                AntichainTerm {
                    mask,
                    size: poset.multi_count(sys.rank(), mask),
                    hw_point: g.orbit_point(),
                    hw_inverse: g.inverse(),
                    hw,
                }
            })
            .collect();
        Ok(ClosedForm { w: w.clone(), w_multi: w.multi_length(sys.rank()), poset, arcs, terms, params: params.clone(), geometry: model.model.clone() })
    }

    pub fn element(&self) -> &GroupElement {
        &self.w
    }

    pub fn poset(&self) -> &WallPoset {
        &self.poset
    }

    pub fn wall_arcs(&self) -> &[WallArc] {
        &self.arcs
    }

    pub fn terms(&self) -> &[AntichainTerm] {
        &self.terms
    }

    pub fn params(&self) -> &RepParams {
        &self.params
    }

    /// Mask of the walls of P(1|w) whose far arc contains `x`, i.e. P(1|x,w).
    pub fn separating_mask(&self, x: BoundaryPoint) -> Result<u64> {
        let mut mask = 0;
        for (i, arc) in self.arcs.iter().enumerate() {
            if arc.side(x)? == Side::Far {
                mask |= 1 << i;
            }
        }
        Ok(mask)
    }

    /// The summands indexed by anti-chains of P(1|x,w).
    pub fn term_values(&self, x: BoundaryPoint) -> Result<Vec<TermValue>> {
        let within = self.separating_mask(x)?;
        Ok(self.term_values_within(within))
    }

    pub fn term_values_within(&self, within: u64) -> Vec<TermValue> {
        let rank = self.w_multi.rank();
        let mut out = Vec::new();
        for (index, term) in self.terms.iter().enumerate() {
            if term.mask & !within != 0 {
                continue;
            }
            let height = self.poset.multi_height(rank, term.mask, within);
            let mut a = vec![0.0; rank];
            let mut b = vec![0.0; rank];
            for s in 0..rank {
                let (l, n, ht) = (self.w_multi.0[s] as f64, term.size.0[s] as f64, height.0[s] as f64);
                a[s] = (l - n) / 2.0;
                b[s] = 2.0 * ht - l - n;
            }
            let coefficient = self.params.pow_twisted(&a, &b) * self.params.pow_minus_one(&term.size);
            out.push(TermValue { index, coefficient, height: height.total() });
        }
        out
    }

    /// `((hw)¹f)(x)` for one term.
    pub fn weyl_term(&self, index: usize, f: &PointFunction, x: BoundaryPoint) -> Result<Complex64> {
        let (y, rn) = self.geometry.pull_back(&self.terms[index].hw, x);
        Ok(tau_from_rn(rn, self.params.epsilon) * f.eval(y)?)
    }

    pub fn eval(&self, f: &PointFunction, x: BoundaryPoint) -> Result<Complex64> {
        let mut total = Complex64::zero();
        for t in self.term_values(x)? {
            total += t.coefficient * self.weyl_term(t.index, f, x)?;
        }
        Ok(total)
    }
}

/// `w^q f` by the anti-chain closed form.
pub fn apply_wq_closed(model: &Arc<BoundaryModel>, w: &GroupElement, f: &PointFunction, params: &RepParams) -> Result<PointFunction> {
    let closed = ClosedForm::new(model, w, params)?;
    let f = f.clone();
    Ok(PointFunction::new(move |x| closed.eval(&f, x)))
}

/// The uniform grid `θ_j = 2πj/N` with equal weights `1/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    n: usize,
}

impl BoundaryGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("grid needs at least one point".into()));
        }
        Ok(BoundaryGrid { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n as f64
    }

    pub fn point(&self, j: usize) -> BoundaryPoint {
        BoundaryPoint::new(self.angle(j))
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Index of the cell `[θ_j, θ_{j+1})` containing `x`.
    pub fn cell(&self, x: BoundaryPoint) -> usize {
        ((x.angle() / TAU * self.n as f64) as usize).min(self.n - 1)
    }
}

/// Samples of a function on a [`BoundaryGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub values: Vec<Complex64>,
}

/// A sampled function together with the indices of skipped degenerate
/// points.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub function: GridFunction,
    pub skipped: Vec<usize>,
}

/// Quadrature inner product `Σ_j f_j conj(g_j) / N`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    if f.values.len() != g.values.len() {
        return Err(Error::SizeMismatch { expected: f.values.len(), got: g.values.len() });
    }
    let n = f.values.len() as f64;
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() / n)
}

pub fn norm(f: &GridFunction) -> f64 {
    (f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / f.values.len() as f64).sqrt()
}

/// A sparse square matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<BTreeMap<usize, Complex64>>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].get(&j).copied().unwrap_or_default()
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::SizeMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(self.rows.iter().map(|row| row.iter().map(|(&j, a)| a * v[j]).sum()).collect())
    }

    /// `max |A_ij − conj(A_ji)|`.
    pub fn adjoint_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, a) in row {
                worst = worst.max((a - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn max_difference(&self, other: &SparseMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::SizeMismatch { expected: self.dim(), got: other.dim() });
        }
        let mut worst: f64 = 0.0;
        for (i, (a, b)) in self.rows.iter().zip(&other.rows).enumerate() {
            for &j in a.keys().chain(b.keys()) {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        Ok(worst)
    }

    /// Largest singular value, by power iteration on `A†A`.
    pub fn operator_norm(&self, iterations: usize) -> f64 {
        let n = self.dim();
        let mut v: Vec<Complex64> = (0..n).map(|j| Complex64::new(1.0 + (j % 7) as f64 * 0.1, 0.0)).collect();
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let norm_v = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm_v);
            let av = self.apply(&v).expect("square matrix");
            estimate = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut atav = vec![Complex64::zero(); n];
            for (i, row) in self.rows.iter().enumerate() {
                for (&j, a) in row {
                    atav[j] += a.conj() * av[i];
                }
            }
            v = atav;
        }
        estimate
    }
}

/// Galerkin matrix of `w^q` in the orthonormal basis `√N χ_{C_j}` of cell
/// indicators: `A_ij = N ∫_{C_i} w^q χ_{C_j} dl`. Integrals are split at
/// wall endpoints and at the images of cell endpoints, so each piece has a
/// smooth integrand and is integrated by Gauss–Legendre.
pub fn operator_matrix(model: &Arc<BoundaryModel>, w: &GroupElement, params: &RepParams, grid: &BoundaryGrid) -> Result<SparseMatrix> {
    let closed = ClosedForm::new(model, w, params)?;
    let n = grid.len();
    let h = TAU / n as f64;
    let rule = GaussLegendre::new(8);
    let eps = params.epsilon();
    let forward: Vec<Isometry> = closed.terms.iter().map(|t| t.hw_inverse.inverse()).collect();
    let endpoints: Vec<f64> = closed
        .arcs
        .iter()
        .flat_map(|a| {
            let (x, y) = a.endpoints();
            [x.angle(), y.angle()]
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (grid.angle(i), grid.angle(i) + h);
        let mut cuts = vec![a, b];
        cuts.extend(endpoints.iter().copied().filter(|&e| e > a && e < b));
        for (term, g) in closed.terms.iter().zip(&forward) {
            let alpha = term.hw_inverse.apply_boundary(BoundaryPoint::new(a)).angle();
            let beta = term.hw_inverse.apply_boundary(BoundaryPoint::new(b)).angle();
            let (start, len) = if term.hw_inverse.matrix().determinant() > 0.0 {
                (alpha, (beta - alpha).rem_euclid(TAU))
            } else {
                (beta, (alpha - beta).rem_euclid(TAU))
            };
            let mut k = (start / h).floor() as i64 + 1;
            while (k as f64) * h < start + len {
                let y = g.apply_boundary(BoundaryPoint::new(k as f64 * h)).angle();
                // Images of cell endpoints close to 2π wrap to 0.
                let y = if y < a - PI { y + TAU } else { y };
                if y > a && y < b {
                    cuts.push(y);
                }
                k += 1;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        let mut row: BTreeMap<usize, Complex64> = BTreeMap::new();
        for piece in cuts.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            let mid = BoundaryPoint::new(0.5 * (lo + hi));
            for t in closed.term_values(mid)? {
                let term = &closed.terms[t.index];
                let j = grid.cell(term.hw_inverse.apply_boundary(mid));
                let integral: Complex64 = rule.integrate(lo, hi, |x| tau_from_rn(poisson(&term.hw_point, BoundaryPoint::new(x)), eps));
                *row.entry(j).or_default() += t.coefficient * integral * (n as f64 / TAU);
            }
        }
        row.retain(|_, v| v.norm() > 0.0);
        rows.push(row);
    }
    Ok(SparseMatrix { rows })
}

/// `∫_A P(p, θ)^{1/2} dl(θ)` over an arc set, for the Poisson kernel of the
/// point `p`. With `ψ = θ − φ`, `c = e^{−d}` and `sinh σ = e^{d} tan(ψ/2)`
/// the integrand becomes `2 e^{−d/2} / (2π √(1 + c² sinh² σ))`, which is
/// smooth on the scale of 1 however far `p` is from `0`.
pub fn integrate_sqrt_poisson(p: &Point, arcs: &ArcSet, rule: &GaussLegendre) -> f64 {
    let rho = p[0].hypot(p[1]);
    let d = rho.asinh();
    let phi = p[1].atan2(p[0]);
    let c = (-d).exp();
    let direct = |psi: f64| 1.0 / (p[2] - rho * psi.cos()).sqrt();
    let sigma_of = |psi: f64| (d.exp() * (psi / 2.0).tan()).asinh();
    let mut total = 0.0;
    for (lo, hi) in arcs.to_intervals() {
        // Work in ψ ∈ [−π, π), splitting at ±π/2 and at the wrap point.
        let a = (lo - phi + PI).rem_euclid(TAU) - PI;
        let b = a + (hi - lo);
        let mut pieces = Vec::new();
        if b <= PI {
            pieces.push((a, b));
        } else {
            pieces.push((a, PI));
            pieces.push((-PI, b - TAU));
        }
        for (a, b) in pieces {
            let mut cuts = vec![a];
            cuts.extend([-PI / 2.0, PI / 2.0].into_iter().filter(|&e| e > a && e < b));
            cuts.push(b);
            for piece in cuts.windows(2) {
                let (x, y) = (piece[0], piece[1]);
                if y <= x {
                    continue;
                }
                let m = 0.5 * (x + y);
                total += if m.abs() <= PI / 2.0 {
                    let scale = 2.0 * (-d / 2.0).exp();
                    scale * rule.integrate_panels(sigma_of(x), sigma_of(y), 1.0, |s: f64| 1.0 / (1.0 + (c * s.sinh()).powi(2)).sqrt())
                } else {
                    rule.integrate_panels(x, y, 0.5, direct)
                };
            }
        }
    }
    total / TAU
}
