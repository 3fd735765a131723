//! Numerical checks of the geometric estimates behind the pointwise bound
//!
//! ```text
//! w¹1 ≤ q^{−ℓ(w)/2} w^q 1 ≤ C w¹1,   C = 1 + e^{2δ} Q M / (1 − e^{−η})
//! ```
//!
//! Throughout, `h` is a nonempty set of pairwise perpendicular walls, each
//! separating 1 from `w` (`w ∈ h⁺`), and `z` is a boundary point beyond
//! every wall of `h` (`z ∈ ∂h⁺`). Distances are `|a − b| = ρ(a·0, b·0)` and
//! `(w|∩h) = |w| − |w − hw|/2`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_rep::{BoundaryModel, ClosedForm, PointFunction, RepParams};
use crate::coxeter::GroupElement;
use crate::error::{Error, Result};
use crate::hyperbolic::{dist, gromov, gromov_boundary, lorentz, origin, polar, ray_point, BoundaryPoint, GeometryConfig, Point};
use crate::walls::{side, AntiChain, Side};

/// The totally geodesic subspace `∩h`: a geodesic for one wall, a point for
/// two perpendicular walls.
#[derive(Clone, Copy, Debug)]
pub enum Intersection {
    Geodesic(Vector3<f64>),
    Point(Point),
}

impl Intersection {
    pub fn from_normals(normals: &[Vector3<f64>]) -> Result<Self> {
        match normals {
            [n] => Ok(Intersection::Geodesic(*n)),
            [a, b] => {
                let c = a.cross(b);
                let v = Vector3::new(c[0], c[1], -c[2]);
                let norm = (-lorentz(&v, &v)).sqrt();
                if !norm.is_finite() || norm == 0.0 {
                    return Err(Error::Precondition("walls do not meet".into()));
                }
                let p = v / norm;
                Ok(Intersection::Point(if p[2] < 0.0 { -p } else { p }))
            }
            _ => Err(Error::Precondition(format!("{} pairwise perpendicular walls cannot meet in the plane", normals.len()))),
        }
    }

    pub fn distance(&self, p: &Point) -> f64 {
        match self {
            Intersection::Geodesic(n) => lorentz(p, n).abs().asinh(),
            Intersection::Point(c) => dist(p, c),
        }
    }
}

/// The point at distance `t` on the geodesic from `0` through `p`.
fn geodesic_from_origin(p: &Point, t: f64) -> Point {
    polar(t, p[1].atan2(p[0]))
}

/// `(w|∩h) = |w| − |w − hw|/2`.
pub fn proj_product(model: &BoundaryModel, w: &GroupElement, h: &AntiChain) -> Result<f64> {
    let sys = model.system();
    if h.walls.iter().any(|wall| side(sys, wall, w) != Side::Far) {
        return Err(Error::Precondition("w is not beyond every wall of h".into()));
    }
    let geo = model.geometry();
    let w0 = geo.orbit_point(w);
    let hw0 = geo.orbit_point(&sys.mul(&h.product, w));
    Ok(dist(&origin(), &w0) - dist(&w0, &hw0) / 2.0)
}

/// Which inequality a row checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `|a − b| ≤ |a − hb|` for `a, b` not separated by `h`.
    ReflectionComparison,
    /// `2(x|hw) − |hw| ≤ 2(x|w) − |w|` for `x ∈ h⁺`.
    GromovReflection,
    /// `2(x|hw) − |hw| ≤ 2(w|∩h) − |w| + 2δ` for `x ∈ h⁺`.
    GromovProjection,
    /// `τ(hw, z) ≤ e^{ηδ} e^{η s(h)} e^{−η|w|/2}`.
    TauBound,
    /// `(w|∩h) ≥ 0`.
    ProjectionNonnegative,
    /// `(x|h) ≥ |h|/2` for interior `x ∈ h⁺`.
    WallProductInterior,
    /// `(z|h) ≥ |h|/2` for `z ∈ ∂h⁺`.
    WallProductBoundary,
    /// `γ^w([|h|/2, (w|∩h)]) ⊂ ∩h[δ]`.
    GeodesicNearIntersection,
    /// `γ^w(s(h)) ∈ ∩h[2δ]`.
    TimeNearIntersection,
    /// `w¹1(z) ≤ q^{−ℓ(w)/2} w^q 1(z)`, with zero tolerance.
    SandwichLower,
    /// `q^{−ℓ(w)/2} w^q 1(z) ≤ C w¹1(z)`.
    SandwichUpper,
    /// The term-wise sum agrees with the closed-form operator.
    ClosedFormAgreement,
}

impl Check {
    pub const ALL: [Check; 12] = [
        Check::ReflectionComparison,
        Check::GromovReflection,
        Check::GromovProjection,
        Check::TauBound,
        Check::ProjectionNonnegative,
        Check::WallProductInterior,
        Check::WallProductBoundary,
        Check::GeodesicNearIntersection,
        Check::TimeNearIntersection,
        Check::SandwichLower,
        Check::SandwichUpper,
        Check::ClosedFormAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::ReflectionComparison => "reflection_comparison",
            Check::GromovReflection => "gromov_reflection",
            Check::GromovProjection => "gromov_projection",
            Check::TauBound => "tau_bound",
            Check::ProjectionNonnegative => "projection_nonnegative",
            Check::WallProductInterior => "wall_product_interior",
            Check::WallProductBoundary => "wall_product_boundary",
            Check::GeodesicNearIntersection => "geodesic_near_intersection",
            Check::TimeNearIntersection => "time_near_intersection",
            Check::SandwichLower => "sandwich_lower",
            Check::SandwichUpper => "sandwich_upper",
            Check::ClosedFormAgreement => "closed_form_agreement",
        }
    }

    fn tolerance(self, grace: f64) -> f64 {
        if self == Check::SandwichLower {
            0.0
        } else {
            grace
        }
    }
}

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub check: Check,
    pub w: String,
    pub z: f64,
    pub h: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Aggregate over all rows of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: Check,
    pub cases: u64,
    pub failures: u64,
    /// Cases whose hypotheses did not hold.
    pub inapplicable: u64,
    pub min_slack: f64,
    pub worst: Option<EstimateRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub lmax: usize,
    pub samples: usize,
    pub seed: u64,
    pub geometry: GeometryConfig,
    /// Numerical grace for every check but the lower sandwich bound.
    pub grace: f64,
    /// Sample points closer than this to a relevant wall endpoint are skipped.
    pub min_gap: f64,
    /// Keep every row, not just the worst one per check.
    pub record_rows: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig { lmax: 8, samples: 64, seed: 1, geometry: GeometryConfig::default(), grace: 1e-9, min_gap: 1e-6, record_rows: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub summaries: Vec<CheckSummary>,
    pub rows: Vec<EstimateRow>,
    /// Largest number of admissible `h` with `s(h)` in a unit window.
    pub m_emp: u64,
    /// `max_{#j ≤ 2} ∏ ((q_s − 1)/√q_s)`.
    pub q_factor: f64,
    /// `1 + e^{2δ} Q M_emp / (1 − e^{−η})`.
    pub c: f64,
    /// Largest observed `q^{−ℓ(w)/2} w^q 1(z) / w¹1(z)`.
    pub max_ratio: f64,
    pub pairs: u64,
    pub skipped: u64,
}

impl EstimateReport {
    pub fn failures(&self) -> u64 {
        self.summaries.iter().map(|s| s.failures).sum()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn summary(&self, check: Check) -> Option<&CheckSummary> {
        self.summaries.iter().find(|s| s.check == check)
    }
}

#[derive(Default)]
struct Accumulator {
    summaries: Vec<CheckSummary>,
    rows: Vec<EstimateRow>,
    record: bool,
    grace: f64,
}

impl Accumulator {
    fn new(grace: f64, record: bool) -> Self {
        let summaries = Check::ALL
            .iter()
            .map(|&check| CheckSummary { check, cases: 0, failures: 0, inapplicable: 0, min_slack: f64::INFINITY, worst: None })
            .collect();
        Accumulator { summaries, rows: Vec::new(), record, grace }
    }

    fn summary(&mut self, check: Check) -> &mut CheckSummary {
        &mut self.summaries[Check::ALL.iter().position(|&c| c == check).expect("listed check")]
    }

    fn skip(&mut self, check: Check) {
        self.summary(check).inapplicable += 1;
    }

    fn push(&mut self, check: Check, case: (&str, f64, &str), lhs: f64, rhs: f64) {
        let slack = rhs - lhs;
        let pass = slack >= -check.tolerance(self.grace);
        let record = self.record;
        let summary = self.summary(check);
        summary.cases += 1;
        if !pass {
            summary.failures += 1;
        }
        let row = || EstimateRow { check, w: case.0.to_string(), z: case.1, h: case.2.to_string(), lhs, rhs, slack, pass };
        if slack < summary.min_slack {
            summary.min_slack = slack;
            summary.worst = Some(row());
        }
        if record {
            self.rows.push(row());
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.summaries.iter_mut().zip(other.summaries) {
            a.cases += b.cases;
            a.failures += b.failures;
            a.inapplicable += b.inapplicable;
            if b.min_slack < a.min_slack {
                a.min_slack = b.min_slack;
                a.worst = b.worst;
            }
        }
        self.rows.extend(other.rows);
    }
}

/// `max` over nonempty sets of at most two generators of
/// `∏ (q_s − 1)/√q_s`.
pub fn q_factor(params: &RepParams) -> f64 {
    let f: Vec<f64> = params.values().iter().map(|q| (q - 1.0) / q.sqrt()).collect();
    let mut best = f.iter().cloned().fold(0.0, f64::max);
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            best = best.max(f[i] * f[j]);
        }
    }
    best
}

/// `C = 1 + e^{2δ} Q M / (1 − e^{−η})`.
pub fn sandwich_constant(geometry: &GeometryConfig, q_factor: f64, m: u64) -> f64 {
    1.0 + (2.0 * geometry.delta).exp() * q_factor * m as f64 / (1.0 - (-geometry.eta).exp())
}

/// Boundary sample points: one jittered point per cell of a uniform grid.
pub fn sample_boundary(samples: usize, seed: u64) -> Vec<BoundaryPoint> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|j| BoundaryPoint::new(TAU * (j as f64 + rng.random_range(0.1..0.9)) / samples as f64))
        .collect()
}

/// Largest number of values in a closed window of length 1.
pub fn max_window(values: &[f64]) -> u64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut hi = 0;
    for lo in 0..v.len() {
        while hi < v.len() && v[hi] <= v[lo] + 1.0 {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best as u64
}

/// Geometry of one admissible `h` for a fixed `w`.
struct HData {
    index: usize,
    label: String,
    h_point: Point,
    hw_point: Point,
    proj: f64,
    intersection: Intersection,
    normals: Vec<Vector3<f64>>,
    weight: f64,
}

/// Per-(w, z) results needed after the sweep.
struct PairResult {
    lhs: f64,
    mid: f64,
    w: String,
    z: f64,
    s_values: Vec<f64>,
    zw: f64,
}

/// Evaluates every estimate for one `w` against all sample points.
fn sweep_element(
    model: &BoundaryModel,
    w: &GroupElement,
    points: &[BoundaryPoint],
    params: &RepParams,
    cfg: &EstimateConfig,
) -> Result<(Accumulator, Vec<PairResult>, u64)> {
    let sys = model.system();
    let geo = model.geometry();
    let delta = cfg.geometry.delta;
    let eta = cfg.geometry.eta;
    let mut acc = Accumulator::new(cfg.grace, cfg.record_rows);
    let closed = ClosedForm::new(model, w, params)?;
    let o = origin();
    let w0 = geo.orbit_point(w);
    let wlen = dist(&o, &w0);
    let wname = sys.format(w);
    let rank = sys.rank();
    let scale = params.pow_real(&w.multi_length(rank).0.iter().map(|&l| -(l as f64) / 2.0).collect::<Vec<_>>());
    let one = PointFunction::constant(1.0);
    let poset = closed.poset();

    let mut hs = Vec::new();
    for (index, term) in closed.terms().iter().enumerate() {
        if term.mask == 0 {
            continue;
        }
        let members: Vec<usize> = (0..poset.len()).filter(|i| term.mask >> i & 1 == 1).collect();
        let normals: Vec<_> = members.iter().map(|&i| *closed.wall_arcs()[i].normal()).collect();
        let h = poset.product(sys, term.mask);
        let proj = wlen - dist(&w0, &term.hw_point) / 2.0;
        let weight = params
            .values()
            .iter()
            .zip(&term.size.0)
            .map(|(q, &n)| ((q - 1.0) / q.sqrt()).powi(n as i32))
            .product();
        hs.push(HData {
            index,
            label: members.iter().map(|&i| sys.format(poset.walls()[i].reflection())).collect::<Vec<_>>().join("|"),
            h_point: geo.orbit_point(&h),
            hw_point: term.hw_point,
            proj,
            intersection: Intersection::from_normals(&normals)?,
            normals,
            weight,
        });
    }

    // Checks that do not involve z.
    for hd in &hs {
        let case = (wname.as_str(), f64::NAN, hd.label.as_str());
        acc.push(Check::ProjectionNonnegative, case, 0.0, hd.proj);
        acc.push(Check::ReflectionComparison, case, dist(&o, &hd.hw_point), wlen);
        let hlen = dist(&o, &hd.h_point);
        acc.push(Check::WallProductInterior, case, hlen / 2.0, gromov(&w0, &hd.h_point, &o));
        if hd.proj >= hlen / 2.0 {
            let steps = 16;
            let worst = (0..=steps)
                .map(|i| {
                    let t = hlen / 2.0 + (hd.proj - hlen / 2.0) * i as f64 / steps as f64;
                    hd.intersection.distance(&geodesic_from_origin(&w0, t))
                })
                .fold(0.0, f64::max);
            acc.push(Check::GeodesicNearIntersection, case, worst, delta);
        } else {
            acc.skip(Check::GeodesicNearIntersection);
        }
    }

    let mut pairs = Vec::new();
    let mut skipped = 0;
    for &z in points {
        let near_endpoint = closed.wall_arcs().iter().any(|arc| {
            let (a, b) = arc.endpoints();
            [a, b].iter().any(|e| {
                let d = (z.angle() - e.angle()).rem_euclid(TAU);
                d.min(TAU - d) < cfg.min_gap
            })
        });
        let within = match closed.separating_mask(z) {
            Ok(m) if !near_endpoint => m,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let zw = gromov_boundary(&w0, z, &o);
        let lhs = geo.pull_back(w, z).1.sqrt();
        let mut mid = lhs;
        let mut s_values = Vec::new();
        for hd in &hs {
            if closed.terms()[hd.index].mask & !within != 0 {
                continue;
            }
            let case = (wname.as_str(), z.angle(), hd.label.as_str());
            let tau = geo.pull_back(&closed.terms()[hd.index].hw, z).1.sqrt();
            mid += hd.weight * tau;
            let s = zw.min(hd.proj);
            s_values.push(s);
            acc.push(Check::TauBound, case, tau, (eta * delta).exp() * (eta * s).exp() * (-eta * wlen / 2.0).exp());
            let hlen = dist(&o, &hd.h_point);
            acc.push(Check::WallProductBoundary, case, hlen / 2.0, gromov_boundary(&hd.h_point, z, &o));
            acc.push(Check::TimeNearIntersection, case, hd.intersection.distance(&geodesic_from_origin(&w0, s)), 2.0 * delta);
            // Interior points of h⁺ along the ray to z, and w itself.
            let rays = [1.0, 3.0, 6.0, 12.0].map(|t| ray_point(&o, z, t));
            for x in rays.iter().chain(std::iter::once(&w0)) {
                if hd.normals.iter().any(|n| lorentz(x, n) <= 0.0) {
                    for c in [Check::GromovReflection, Check::GromovProjection, Check::ReflectionComparison] {
                        acc.skip(c);
                    }
                    continue;
                }
                let hw_len = dist(&o, &hd.hw_point);
                let left = 2.0 * gromov(x, &hd.hw_point, &o) - hw_len;
                acc.push(Check::GromovReflection, case, left, 2.0 * gromov(x, &w0, &o) - wlen);
                acc.push(Check::GromovProjection, case, left, 2.0 * hd.proj - wlen + 2.0 * delta);
                acc.push(Check::ReflectionComparison, case, dist(x, &w0), dist(x, &hd.hw_point));
            }
        }
        let closed_value = closed.eval(&one, z)?.re * scale;
        acc.push(Check::ClosedFormAgreement, (wname.as_str(), z.angle(), ""), (closed_value - mid).abs(), 1e-12 * mid);
        acc.push(Check::SandwichLower, (wname.as_str(), z.angle(), ""), lhs, mid);
        pairs.push(PairResult { lhs, mid, w: wname.clone(), z: z.angle(), s_values, zw });
    }
    Ok((acc, pairs, skipped))
}

/// Number of admissible `h` for `(w, z)` with `s(h) ∈ [lo, hi]`.
pub fn window_count(model: &BoundaryModel, w: &GroupElement, z: BoundaryPoint, lo: f64, hi: f64) -> Result<u64> {
    let geo = model.geometry();
    let o = origin();
    let w0 = geo.orbit_point(w);
    let zw = gromov_boundary(&w0, z, &o);
    if lo < -1e-12 || hi > zw + 1e-12 || hi < lo || hi - lo > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("window [{lo}, {hi}] must lie in [0, {zw}] and have length at most 1")));
    }
    let params = RepParams::uniform(model.system().rank(), 1.0, 0.0)?;
    let closed = ClosedForm::new(model, w, &params)?;
    let within = closed.separating_mask(z)?;
    let wlen = dist(&o, &w0);
    Ok(closed
        .terms()
        .iter()
        .filter(|t| t.mask != 0 && t.mask & !within == 0)
        .map(|t| zw.min(wlen - dist(&w0, &t.hw_point) / 2.0))
        .filter(|s| *s >= lo && *s <= hi)
        .count() as u64)
}

/// The full sweep over `ℓ(w) ≤ lmax` and `samples` boundary points.
pub fn verify_estimates(model: &Arc<BoundaryModel>, params: &RepParams, cfg: &EstimateConfig) -> Result<EstimateReport> {
    if params.epsilon() != 0.0 {
        return Err(Error::Precondition("the estimates are stated for ε = 0".into()));
    }
    let elements = model.system().ball(cfg.lmax)?;
    let points = sample_boundary(cfg.samples, cfg.seed);
    let results: Vec<_> = elements
        .par_iter()
        .map(|w| sweep_element(model, w, &points, params, cfg))
        .collect::<Result<_>>()?;
    let mut acc = Accumulator::new(cfg.grace, cfg.record_rows);
    let mut all_pairs = Vec::new();
    let mut skipped = 0;
    for (a, p, s) in results {
        acc.merge(a);
        all_pairs.extend(p);
        skipped += s;
    }
    let m_emp = all_pairs.iter().map(|p| max_window(&p.s_values)).max().unwrap_or(0);
    debug_assert!(all_pairs.iter().all(|p| p.s_values.iter().all(|s| *s <= p.zw + 1e-12)));
    let q = q_factor(params);
    let c = sandwich_constant(&cfg.geometry, q, m_emp);
    let mut max_ratio: f64 = 1.0;
    for p in &all_pairs {
        max_ratio = max_ratio.max(p.mid / p.lhs);
        acc.push(Check::SandwichUpper, (p.w.as_str(), p.z, ""), p.mid, c * p.lhs);
    }
    Ok(EstimateReport {
        summaries: acc.summaries,
        rows: acc.rows,
        m_emp,
        q_factor: q,
        c,
        max_ratio,
        pairs: all_pairs.len() as u64,
        skipped,
    })
}

/// One `(w, z)` sandwich row with a supplied constant `C`.
pub fn verify_sandwich(model: &Arc<BoundaryModel>, w: &GroupElement, z: BoundaryPoint, params: &RepParams, c: f64) -> Result<EstimateRow> {
    let cfg = EstimateConfig { record_rows: true, ..EstimateConfig::default() };
    let (_, pairs, _) = sweep_element(model, w, &[z], params, &cfg)?;
    let p = pairs.into_iter().next().ok_or(Error::DegenerateBoundaryPoint { angle: z.angle() })?;
    let slack = c * p.lhs - p.mid;
    Ok(EstimateRow {
        check: Check::SandwichUpper,
        w: p.w,
        z: p.z,
        h: String::new(),
        lhs: p.lhs,
        rhs: p.mid,
        slack,
        pass: p.lhs <= p.mid && slack >= -cfg.grace,
    })
}
