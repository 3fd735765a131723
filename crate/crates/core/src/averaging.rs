//! Averaging operators over spherical layers of the parity-kernel lattice
//!
//! ```text
//! T_t^U = 1/|S_t| Σ_{γ ∈ S_t} χ_U(z(γ)) / ⟨γ^q 1, 1⟩ · γ^q,
//! S_t = {γ ∈ Γ : |0 − γ·0| ∈ (t − R, t + R)}
//! ```
//!
//! `Γ` is the kernel of `W → (Z/2)^S`, `z(γ)` the endpoint of the ray from
//! `0` through `γ·0`. At `ε = 0` every summand of the closed form has a
//! constant coefficient, so `⟨γ^q χ_V, χ_W⟩` is a finite sum of integrals
//! of `√P(hγ·0, ·)` over arcs, which are evaluated exactly up to quadrature.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_rep::{integrate_sqrt_poisson, ArcSet, BoundaryGrid, BoundaryModel, ClosedForm, GridFunction, RepParams};
use crate::coxeter::GroupElement;
use crate::error::{Error, Result};
use crate::hyperbolic::{dist, origin, poisson, BoundaryPoint, Isometry, Point};
use crate::quadrature::GaussLegendre;

/// `z(γ)` closer than this to `∂U` counts as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of group elements visited while enumerating.
pub const DEFAULT_BUDGET: usize = 20_000_000;

/// True iff every generator occurs an even number of times in `w`.
pub fn lattice_membership(w: &GroupElement) -> bool {
    w.parity_mask() == 0
}

/// One representative per parity class, each of minimal displacement
/// `|u·0|` within the word ball of radius `rank`, ordered by parity mask.
pub fn coset_representatives(model: &BoundaryModel) -> Result<Vec<GroupElement>> {
    let sys = model.system();
    let rank = sys.rank();
    let geo = model.geometry();
    let mut best: Vec<Option<(f64, GroupElement)>> = vec![None; 1 << rank];
    for u in sys.ball(rank)? {
        let d = dist(&origin(), &geo.orbit_point(&u));
        let slot = &mut best[u.parity_mask() as usize];
        if slot.as_ref().is_none_or(|(b, _)| d < *b - 1e-12) {
            *slot = Some((d, u));
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(m, b)| b.map(|(_, u)| u).ok_or_else(|| Error::InvalidSystem(format!("parity class {m:#b} not reached"))))
        .collect()
}

/// Mesh spacing (in Klein coordinates) used by [`diameter_r`].
pub const DIAMETER_MESH: f64 = 0.02;

/// An upper bound for `diam(Γ\ℍ²)`.
///
/// `W/Γ` acts isometrically on the quotient with `P` as a fundamental
/// domain, so the diameter is the largest covering radius `max_y d(y, Γx)`
/// over `x ∈ P`. The covering radius of `Γx` is the farthest vertex of the
/// Dirichlet cell of `x`, bounded above by clipping with finitely many
/// bisectors. It is 1-Lipschitz in `x`, so a mesh maximum plus the mesh
/// radius bounds it on all of `P`. The dihedral symmetry of `P` permutes the
/// generators and preserves `Γ`, which restricts `x` to one tenth of `P`.
pub fn diameter_r(model: &BoundaryModel) -> Result<f64> {
    quotient_diameter(model, DIAMETER_MESH)
}

pub fn quotient_diameter(model: &BoundaryModel, mesh: f64) -> Result<f64> {
    let geo = model.geometry();
    let k = geo.sides() as f64;
    let rk = geo.circumradius().tanh();
    let wedge = std::f64::consts::PI / k;
    let near_wedge = |x: f64, y: f64| {
        let (r, a) = (x.hypot(y), y.atan2(x));
        let off = if a < 0.0 { -a } else { (a - wedge).max(0.0) };
        r <= rk + mesh && (off == 0.0 || r * off.min(std::f64::consts::FRAC_PI_2).sin() <= mesh)
    };
    let n = ((rk + mesh) / mesh).ceil() as i64;
    let samples: Vec<Point> = (-n..=n)
        .flat_map(|i| (-n..=n).map(move |j| (i as f64 * mesh, j as f64 * mesh)))
        .filter(|&(x, y)| near_wedge(x, y))
        .map(|(x, y)| klein_point(x, y))
        .collect();
    let mut radius = 12.0;
    loop {
        let ball = lattice_ball(model, radius, DEFAULT_BUDGET)?;
        let isometries: Vec<(f64, Isometry)> = ball.iter().skip(1).map(|p| (p.displacement, geo.represent(&p.gamma))).collect();
        let covers: Vec<Option<f64>> = samples.par_iter().map(|x| covering_radius(x, &isometries, radius)).collect();
        if covers.iter().all(Option::is_some) {
            let best = covers.into_iter().flatten().fold(0.0, f64::max);
            let spread = (mesh / std::f64::consts::SQRT_2) / (1.0 - (rk + mesh).powi(2));
            return Ok(best + spread);
        }
        radius += 3.0;
    }
}

fn klein_point(x: f64, y: f64) -> Point {
    let r = 1.0 / (1.0 - x * x - y * y).sqrt();
    Point::new(x * r, y * r, r)
}

/// Farthest vertex of the Dirichlet cell of `x` clipped by the bisectors of
/// `x` and `γx`, or `None` if the elements supplied (all `γ` with
/// `|γ·0| < radius`, sorted by displacement) cannot certify the bound.
fn covering_radius(x: &Point, isometries: &[(f64, Isometry)], radius: f64) -> Option<f64> {
    let o = origin();
    let offset = 2.0 * dist(x, &o);
    let mut poly: Vec<(f64, f64)> = vec![(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut bound = f64::INFINITY;
    for (displacement, g) in isometries {
        // d(x, γx) ≥ |γ·0| − 2|x|, and a bisector farther than the current
        // bound from x cannot cut the cell.
        if displacement - offset > 2.0 * bound {
            return Some(bound);
        }
        // d(y, x) ≤ d(y, γx) is ⟨y, γx − x⟩ ≤ 0, linear in Klein coordinates.
        let n = g.apply(x) - x;
        let f = |k: (f64, f64)| k.0 * n[0] + k.1 * n[1] - n[2];
        let mut out = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let (fa, fb) = (f(a), f(b));
            if fa <= 0.0 {
                out.push(a);
            }
            if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
                let t = fa / (fa - fb);
                out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        poly = out;
        if poly.iter().all(|&(a, b)| a * a + b * b < 1.0) {
            bound = poly.iter().map(|&(a, b)| dist(&klein_point(a, b), x)).fold(0.0, f64::max);
        }
    }
    (radius - offset > 2.0 * bound).then_some(bound)
}

/// Diameter of a union of chambers. Distance is convex on pairs of convex
/// polygons, so the maximum is attained at vertices.
pub fn chamber_union_diameter(model: &BoundaryModel, elements: &[GroupElement]) -> f64 {
    let geo = model.geometry();
    let vertices: Vec<Point> = elements
        .iter()
        .flat_map(|u| {
            let g = geo.represent(u);
            geo.vertices().iter().map(move |v| g.apply(v)).collect::<Vec<_>>()
        })
        .collect();
    let mut best: f64 = 0.0;
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            best = best.max(dist(a, b));
        }
    }
    best
}

/// A lattice element with its orbit point.
#[derive(Clone, Debug)]
pub struct LatticePoint {
    pub gamma: GroupElement,
    pub point: Point,
    pub displacement: f64,
    pub z: BoundaryPoint,
}

/// Lattice elements with `|γ·0| < radius`, sorted by displacement then
/// ShortLex.
///
/// Spheres of the word metric are streamed, dropping every `u` with
/// `|u·0| > radius + r` where `r` is the circumradius of `P`. This loses
/// nothing: the walls separating `1` from `γ` all cross the segment
/// `[0, γ·0]`, so crossing them in the order met gives a reduced word for
/// `γ` whose prefix chambers all meet the segment.
pub fn lattice_ball(model: &BoundaryModel, radius: f64, budget: usize) -> Result<Vec<LatticePoint>> {
    let sys = model.system();
    let geo = model.geometry();
    let cut = radius + geo.circumradius();
    let o = origin();
    let mut sphere: Vec<(GroupElement, Isometry)> = vec![(GroupElement::identity(), Isometry::identity())];
    let mut out = Vec::new();
    let mut visited = 0usize;
    while !sphere.is_empty() {
        for (u, g) in &sphere {
            if lattice_membership(u) {
                let point = g.orbit_point();
                let displacement = dist(&o, &point);
                if displacement < radius {
                    let z = BoundaryPoint::new(point[1].atan2(point[0]));
                    out.push(LatticePoint { gamma: u.clone(), point, displacement, z });
                }
            }
        }
        visited += sphere.len();
        if visited > budget {
            return Err(Error::ResourceLimit(format!("enumerating |γ·0| < {radius} visits more than {budget} elements")));
        }
        let next: Vec<Vec<(GroupElement, Isometry)>> = sphere
            .par_iter()
            .map(|(u, g)| {
                sys.generators()
                    .filter(|&s| !sys.is_right_descent(u, s))
                    .filter_map(|s| {
                        let h = g.compose(geo.side_reflection(s));
                        (dist(&o, &h.orbit_point()) <= cut).then(|| (sys.right_mul(u, s), h))
                    })
                    .collect()
            })
            .collect();
        let mut seen = HashSet::new();
        sphere = next.into_iter().flatten().filter(|(u, _)| seen.insert(u.clone())).collect();
    }
    out.sort_by(|a, b| a.displacement.total_cmp(&b.displacement).then_with(|| a.gamma.cmp(&b.gamma)));
    Ok(out)
}

/// The layer `S_t` together with its defining constants.
#[derive(Clone, Debug)]
pub struct SphericalLayer {
    pub t: f64,
    pub r: f64,
    pub members: Vec<LatticePoint>,
}

impl SphericalLayer {
    /// Selects `S_t` from a lattice ball of radius at least `t + r`.
    pub fn from_ball(ball: &[LatticePoint], t: f64, r: f64) -> Self {
        let members = ball.iter().filter(|p| p.displacement > t - r && p.displacement < t + r).cloned().collect();
        SphericalLayer { t, r, members }
    }

    pub fn build(model: &BoundaryModel, t: f64, r: f64, budget: usize) -> Result<Self> {
        Ok(Self::from_ball(&lattice_ball(model, t + r, budget)?, t, r))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members `γ` with `z(γ) ∈ U`, and the number of ties with `∂U`.
    /// Ties are counted in, as `U` is closed.
    pub fn select(&self, u: &ArcSet) -> (Vec<&LatticePoint>, usize) {
        let mut ties = 0;
        let chosen = self
            .members
            .iter()
            .filter(|p| {
                if u.boundary_distance(p.z) < TIE_TOLERANCE {
                    ties += 1;
                }
                u.contains(p.z)
            })
            .collect();
        (chosen, ties)
    }
}

/// `γ^q` at `ε = 0` as a list of arc-supported Poisson terms.
pub struct ArcExpansion {
    /// `(coefficient, ∂h⁺, h·γ)` per anti-chain.
    terms: Vec<(f64, ArcSet, Isometry)>,
}

impl ArcExpansion {
    pub fn new(model: &BoundaryModel, gamma: &GroupElement, params: &RepParams) -> Result<Self> {
        if params.epsilon() != 0.0 {
            return Err(Error::Precondition("arc expansions need ε = 0".into()));
        }
        let closed = ClosedForm::new(model, gamma, params)?;
        let poset = closed.poset();
        let values = closed.term_values_within(poset.full_mask());
        let terms = values
            .iter()
            .map(|v| {
                let term = &closed.terms()[v.index];
                let region = (0..poset.len())
                    .filter(|i| term.mask >> i & 1 == 1)
                    .fold(ArcSet::full(), |acc, i| acc.intersect(&ArcSet::from(closed.wall_arcs()[i])));
                (v.coefficient.re, region, term.hw_inverse.inverse())
            })
            .collect();
        Ok(ArcExpansion { terms })
    }

    /// `⟨γ^q χ_V, χ_W⟩`; `V = None` stands for the constant 1.
    pub fn pairing(&self, v: Option<&ArcSet>, w: &ArcSet, rule: &GaussLegendre) -> f64 {
        self.terms
            .iter()
            .map(|(c, region, g)| {
                let mut set = region.intersect(w);
                if let Some(v) = v {
                    set = set.intersect(&v.image(g));
                }
                if set.arcs.is_empty() {
                    0.0
                } else {
                    c * integrate_sqrt_poisson(&g.orbit_point(), &set, rule)
                }
            })
            .sum()
    }

    /// `(γ^q f)(x)`.
    pub fn eval(&self, f: impl Fn(BoundaryPoint) -> f64, x: BoundaryPoint) -> f64 {
        self.terms
            .iter()
            .filter(|(_, region, _)| region.contains(x))
            .map(|(c, _, g)| c * poisson(&g.orbit_point(), x).sqrt() * f(g.inverse().apply_boundary(x)))
            .sum()
    }
}

fn rule() -> GaussLegendre {
    GaussLegendre::new(12)
}

/// `T_t^U f` on a grid, with `f` read as piecewise constant on cells.
pub fn averaging_apply(
    model: &BoundaryModel,
    layer: &SphericalLayer,
    u: &ArcSet,
    f: &GridFunction,
    params: &RepParams,
    grid: &BoundaryGrid,
) -> Result<GridFunction> {
    if layer.is_empty() {
        return Err(Error::EmptyLayer(layer.t));
    }
    if f.values.len() != grid.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), got: f.values.len() });
    }
    let rule = rule();
    let (chosen, _) = layer.select(u);
    let read = |x: BoundaryPoint| f.values[grid.cell(x)].re;
    let partial: Vec<Vec<f64>> = chosen
        .par_iter()
        .map(|p| {
            let exp = ArcExpansion::new(model, &p.gamma, params)?;
            let mass = exp.pairing(None, &ArcSet::full(), &rule);
            Ok((0..grid.len()).map(|j| exp.eval(read, grid.point(j)) / mass).collect())
        })
        .collect::<Result<_>>()?;
    let n = layer.len() as f64;
    let mut values = vec![0.0; grid.len()];
    for row in partial {
        for (a, b) in values.iter_mut().zip(row) {
            *a += b;
        }
    }
    Ok(GridFunction { values: values.into_iter().map(|v| (v / n).into()).collect() })
}

/// The three arc sets of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcTriple {
    pub u: ArcSet,
    pub v: ArcSet,
    pub w: ArcSet,
}

impl ArcTriple {
    /// `ν(U ∩ W) ν(V)`.
    pub fn target(&self) -> f64 {
        (self.u.intersect(&self.w).measure() * self.v.measure()).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub t: f64,
    pub layer_size: usize,
    pub selected: usize,
    pub ties: usize,
    pub value: f64,
    pub target: f64,
    pub error: f64,
}

/// A lattice ball large enough for every requested layer, shared between
/// arc triples and parameters.
pub struct Experiment {
    r: f64,
    radius: f64,
    ball: Vec<LatticePoint>,
}

impl Experiment {
    /// Uses `R` from [`diameter_r`].
    pub fn new(model: &BoundaryModel, t_max: f64, budget: usize) -> Result<Self> {
        Self::with_r(model, diameter_r(model)?, t_max, budget)
    }

    pub fn with_r(model: &BoundaryModel, r: f64, t_max: f64, budget: usize) -> Result<Self> {
        Ok(Experiment { r, radius: t_max + r, ball: lattice_ball(model, t_max + r, budget)? })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn ball(&self) -> &[LatticePoint] {
        &self.ball
    }

    /// One table per triple: `⟨T_t^U χ_V, χ_W⟩` for each `t`.
    pub fn run(&self, model: &BoundaryModel, triples: &[ArcTriple], ts: &[f64], params: &RepParams) -> Result<Vec<Vec<ExperimentRow>>> {
        let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
        if t_max + self.r > self.radius {
            return Err(Error::Precondition(format!("layer at t = {t_max} reaches beyond the enumerated ball of radius {}", self.radius)));
        }
        let rule = rule();
        let relevant: Vec<&LatticePoint> = self
            .ball
            .iter()
            .filter(|p| p.displacement > t_min - self.r && p.displacement < t_max + self.r)
            .collect();
        // Per element, the normalized pairing for each triple whose U holds z(γ).
        let contributions: Vec<Vec<Option<f64>>> = relevant
            .par_iter()
            .map(|p| {
                let inside: Vec<bool> = triples.iter().map(|a| a.u.contains(p.z)).collect();
                if !inside.iter().any(|&b| b) {
                    return Ok(vec![None; triples.len()]);
                }
                let exp = ArcExpansion::new(model, &p.gamma, params)?;
                let mass = exp.pairing(None, &ArcSet::full(), &rule);
                Ok(triples
                    .iter()
                    .zip(&inside)
                    .map(|(a, &inside)| inside.then(|| exp.pairing(Some(&a.v), &a.w, &rule) / mass))
                    .collect())
            })
            .collect::<Result<_>>()?;
        triples
            .iter()
            .enumerate()
            .map(|(i, arcs)| {
                let target = arcs.target();
                ts.iter()
                    .map(|&t| {
                        let mut layer_size = 0;
                        let mut selected = 0;
                        let mut ties = 0;
                        let mut total = 0.0;
                        for (p, c) in relevant.iter().zip(&contributions) {
                            if p.displacement <= t - self.r || p.displacement >= t + self.r {
                                continue;
                            }
                            layer_size += 1;
                            if arcs.u.boundary_distance(p.z) < TIE_TOLERANCE {
                                ties += 1;
                            }
                            if let Some(v) = c[i] {
                                selected += 1;
                                total += v;
                            }
                        }
                        if layer_size == 0 {
                            return Err(Error::EmptyLayer(t));
                        }
                        let value = total / layer_size as f64;
                        Ok(ExperimentRow { t, layer_size, selected, ties, value, target, error: (value - target).abs() })
                    })
                    .collect()
            })
            .collect()
    }
}

/// `⟨T_t^U χ_V, χ_W⟩` for each `t`, from a single lattice ball.
pub fn convergence_experiment(
    model: &Arc<BoundaryModel>,
    arcs: &ArcTriple,
    ts: &[f64],
    params: &RepParams,
    budget: usize,
) -> Result<Vec<ExperimentRow>> {
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let experiment = Experiment::new(model, t_max, budget)?;
    Ok(experiment.run(model, std::slice::from_ref(arcs), ts, params)?.remove(0))
}

/// `‖T_t^1 1‖_∞` at `q = 1`, sampled on a grid.
pub fn sup_norm_at_q1(layer: &SphericalLayer, grid: &BoundaryGrid) -> Result<f64> {
    if layer.is_empty() {
        return Err(Error::EmptyLayer(layer.t));
    }
    let rule = rule();
    let full = ArcSet::full();
    let masses: Vec<f64> = layer.members.par_iter().map(|p| integrate_sqrt_poisson(&p.point, &full, &rule)).collect();
    let best = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j);
            layer.members.iter().zip(&masses).map(|(p, m)| poisson(&p.point, x).sqrt() / m).sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    Ok(best / layer.len() as f64)
}
