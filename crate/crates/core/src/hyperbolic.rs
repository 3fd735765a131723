//! The hyperbolic plane, the regular right-angled polygon tessellation and
//! the boundary circle.
//!
//! Arithmetic is done in the hyperboloid model with the Lorentz form
//! `⟨x, y⟩ = x₀y₀ + x₁y₁ − x₂y₂`; the basepoint `0` of the disc is
//! `o = (0, 0, 1)`. A boundary angle `θ` is represented by the null vector
//! `ξ = (cos θ, sin θ, 1)`, so that the Poisson kernel of the disc is
//! `P(x, θ) = 1 / (−⟨x, ξ⟩)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coxeter::{CoxeterSystem, Generator, GroupElement};
use crate::error::{Error, Result};
use crate::walls::{Side, Wall};

/// A point of the hyperboloid `⟨x, x⟩ = −1, x₂ > 0`.
pub type Point = Vector3<f64>;

const J: [f64; 3] = [1.0, 1.0, -1.0];

pub fn lorentz(x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
    x[0] * y[0] + x[1] * y[1] - x[2] * y[2]
}

/// The basepoint `0` of the disc.
pub fn origin() -> Point {
    Vector3::new(0.0, 0.0, 1.0)
}

pub fn from_disc(a: f64, b: f64) -> Point {
    let r2 = a * a + b * b;
    Vector3::new(2.0 * a, 2.0 * b, 1.0 + r2) / (1.0 - r2)
}

pub fn to_disc(x: &Point) -> (f64, f64) {
    (x[0] / (1.0 + x[2]), x[1] / (1.0 + x[2]))
}

/// The point at distance `t` from `0` in direction `θ`.
pub fn polar(t: f64, theta: f64) -> Point {
    Vector3::new(t.sinh() * theta.cos(), t.sinh() * theta.sin(), t.cosh())
}

/// A point of the boundary circle, stored as an angle in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BoundaryPoint(f64);

impl BoundaryPoint {
    pub fn new(theta: f64) -> Self {
        let t = theta.rem_euclid(TAU);
        BoundaryPoint(if t >= TAU { 0.0 } else { t })
    }

    pub fn angle(self) -> f64 {
        self.0
    }

    /// The null vector `(cos θ, sin θ, 1)`.
    pub fn null_vector(self) -> Vector3<f64> {
        Vector3::new(self.0.cos(), self.0.sin(), 1.0)
    }
}

/// An isometry of the hyperbolic plane: a matrix preserving the Lorentz
/// form and the upper sheet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    m: Matrix3<f64>,
}

impl Isometry {
    pub fn identity() -> Self {
        Isometry { m: Matrix3::identity() }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        Isometry { m }
    }

    /// Reflection in the geodesic `⟨x, n⟩ = 0` for a unit spacelike `n`.
    pub fn reflection(n: &Vector3<f64>) -> Self {
        let jn = Vector3::new(n[0] * J[0], n[1] * J[1], n[2] * J[2]);
        Isometry { m: Matrix3::identity() - 2.0 * n * jn.transpose() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry { m: self.m * other.m }
    }

    /// `J mᵀ J`, the inverse of a Lorentz matrix.
    pub fn inverse(&self) -> Isometry {
        let mut inv = self.m.transpose();
        for i in 0..3 {
            for j in 0..3 {
                inv[(i, j)] *= J[i] * J[j];
            }
        }
        Isometry { m: inv }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.m * x
    }

    pub fn apply_boundary(&self, b: BoundaryPoint) -> BoundaryPoint {
        let v = self.m * b.null_vector();
        BoundaryPoint::new(v[1].atan2(v[0]))
    }

    /// The image of the basepoint.
    pub fn orbit_point(&self) -> Point {
        self.m.column(2).into_owned()
    }

    /// Largest entry of `mᵀ J m − J`.
    pub fn lorentz_defect(&self) -> f64 {
        let j = Matrix3::from_diagonal(&Vector3::new(J[0], J[1], J[2]));
        (self.m.transpose() * j * self.m - j).abs().max()
    }

    pub fn max_difference(&self, other: &Isometry) -> f64 {
        (self.m - other.m).abs().max()
    }
}

/// Constants used by the boundary estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Hyperbolicity constant of the plane.
    pub delta: f64,
    /// Dimension of the boundary.
    pub eta: f64,
    /// Total mass of the boundary measure `l`.
    pub total_mass: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { delta: 3f64.ln(), eta: 1.0, total_mass: 1.0 }
    }
}

/// A regular right-angled `k`-gon centred at `0` together with its side
/// reflections.
#[derive(Clone, Debug)]
pub struct PolygonModel {
    k: usize,
    circumradius: f64,
    vertices: Vec<Point>,
    normals: Vec<Vector3<f64>>,
    reflections: Vec<Isometry>,
}

/// Unit normal of the geodesic through `a` and `b`, oriented so that `0`
/// lies on its negative side.
fn geodesic_normal(a: &Point, b: &Point) -> Vector3<f64> {
    let c = a.cross(b);
    let n = Vector3::new(c[0] * J[0], c[1] * J[1], c[2] * J[2]);
    let n = n / lorentz(&n, &n).sqrt();
    if lorentz(&origin(), &n) > 0.0 {
        -n
    } else {
        n
    }
}

/// The angle at `v` of the geodesic triangle with vertices `a, v, b`.
pub fn vertex_angle(a: &Point, v: &Point, b: &Point) -> f64 {
    let ta = a + lorentz(a, v) * v;
    let tb = b + lorentz(b, v) * v;
    let c = lorentz(&ta, &tb) / (lorentz(&ta, &ta) * lorentz(&tb, &tb)).sqrt();
    c.clamp(-1.0, 1.0).acos()
}

fn regular_vertices(k: usize, radius: f64) -> Vec<Point> {
    (0..k).map(|i| polar(radius, (2 * i + 1) as f64 * PI / k as f64)).collect()
}

impl PolygonModel {
    /// Builds the regular right-angled `k`-gon. Side `i` is the edge with
    /// outward direction `2πi/k`, and vertex `i` joins sides `i` and `i+1`.
    pub fn build(k: usize) -> Result<Self> {
        if k < 5 {
            return Err(Error::PolygonTooSmall(k));
        }
        if k > 64 {
            return Err(Error::InvalidSystem(format!("{k} sides exceeds the supported 64")));
        }
        let angle = |r: f64| {
            let v = regular_vertices(k, r);
            vertex_angle(&v[k - 1], &v[0], &v[1])
        };
        // The vertex angle decreases from the Euclidean value towards 0.
        let (mut lo, mut hi) = (0.0, 1.0);
        while angle(hi) > PI / 2.0 {
            hi *= 2.0;
        }
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if angle(mid) > PI / 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let circumradius = 0.5 * (lo + hi);
        let vertices = regular_vertices(k, circumradius);
        let normals: Vec<_> = (0..k).map(|i| geodesic_normal(&vertices[(i + k - 1) % k], &vertices[i])).collect();
        let reflections = normals.iter().map(Isometry::reflection).collect();
        Ok(PolygonModel { k, circumradius, vertices, normals, reflections })
    }

    pub fn sides(&self) -> usize {
        self.k
    }

    /// Hyperbolic distance from `0` to each vertex.
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn side_normal(&self, s: Generator) -> &Vector3<f64> {
        &self.normals[s as usize]
    }

    pub fn side_reflection(&self, s: Generator) -> &Isometry {
        &self.reflections[s as usize]
    }

    /// Interior angle at every vertex.
    pub fn measured_angles(&self) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|i| vertex_angle(&self.vertices[(i + k - 1) % k], &self.vertices[i], &self.vertices[(i + 1) % k]))
            .collect()
    }

    fn check(&self, sys: &CoxeterSystem) -> Result<()> {
        if sys.polygon_sides() != Some(self.k) {
            return Err(Error::SizeMismatch { expected: self.k, got: sys.rank() });
        }
        Ok(())
    }

    /// The matrix of `w`, the product of side reflections along its word.
    pub fn represent(&self, w: &GroupElement) -> Isometry {
        w.word()
            .iter()
            .fold(Isometry::identity(), |acc, &s| acc.compose(&self.reflections[s as usize]))
    }

    /// `w·0`.
    pub fn orbit_point(&self, w: &GroupElement) -> Point {
        self.represent(w).orbit_point()
    }

    /// The limit point of the ray from `0` through `w·0`.
    pub fn limit_point(&self, w: &GroupElement) -> Result<BoundaryPoint> {
        if w.is_identity() {
            return Err(Error::IdentityLimitPoint);
        }
        let p = self.orbit_point(w);
        Ok(BoundaryPoint::new(p[1].atan2(p[0])))
    }

    /// The geodesic of the wall `H = u s u⁻¹`, with 1 on its near side.
    pub fn wall_geometry(&self, sys: &CoxeterSystem, wall: &Wall) -> Result<WallArc> {
        self.check(sys)?;
        let n = self.represent(wall.prefix()).apply(&self.normals[wall.wall_type() as usize]);
        Ok(WallArc::from_normal(n))
    }

    /// The two endpoints of the wall; the far arc runs counter-clockwise
    /// from the first to the second.
    pub fn wall_arc(&self, sys: &CoxeterSystem, wall: &Wall) -> Result<(BoundaryPoint, BoundaryPoint)> {
        Ok(self.wall_geometry(sys, wall)?.endpoints())
    }

    pub fn boundary_side(&self, sys: &CoxeterSystem, wall: &Wall, b: BoundaryPoint) -> Result<Side> {
        self.wall_geometry(sys, wall)?.side(b)
    }

    /// Radon–Nikodym derivative `d(g_* l)/dl` at `b`, which is the Poisson
    /// kernel `exp(−η β_b(0, g·0))` of the point `g·0`.
    pub fn rn_derivative(&self, g: &Isometry, b: BoundaryPoint) -> f64 {
        poisson(&g.orbit_point(), b)
    }

    /// `(w⁻¹·b, d(w_* l)/dl (b))`, one side reflection at a time. The
    /// product matrix has entries of size `e^{|w·0|}` and loses about
    /// `e^{2|w·0|}` ulps near the attracting end of `w`; single reflections
    /// do not.
    pub fn pull_back(&self, w: &GroupElement, b: BoundaryPoint) -> (BoundaryPoint, f64) {
        let mut y = b;
        let mut rn = 1.0;
        for &s in w.word() {
            let r = &self.reflections[s as usize];
            rn *= poisson(&r.orbit_point(), y);
            y = r.apply_boundary(y);
        }
        (y, rn)
    }

    /// `τ(w, b) = (d(w_* l)/dl (b))^{1/2 + iε}`.
    pub fn tau(&self, w: &GroupElement, b: BoundaryPoint, epsilon: f64) -> Complex64 {
        tau_from_rn(self.pull_back(w, b).1, epsilon)
    }
}

pub fn tau_from_rn(rn: f64, epsilon: f64) -> Complex64 {
    (Complex64::new(0.5, epsilon) * rn.ln()).exp()
}

/// Poisson kernel of the disc for the probability measure on the circle.
pub fn poisson(x: &Point, b: BoundaryPoint) -> f64 {
    1.0 / -lorentz(x, &b.null_vector())
}

/// A wall realized as a geodesic, oriented so that its positive side is the
/// far side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallArc {
    normal: Vector3<f64>,
    centre: f64,
    half_width: f64,
}

impl WallArc {
    pub fn from_normal(normal: Vector3<f64>) -> Self {
        let rho = normal[0].hypot(normal[1]);
        WallArc {
            normal,
            centre: BoundaryPoint::new(normal[1].atan2(normal[0])).angle(),
            half_width: (normal[2] / rho).clamp(-1.0, 1.0).acos(),
        }
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    /// Direction of the middle of the far arc.
    pub fn centre(&self) -> f64 {
        self.centre
    }

    /// Half the angular width of the far arc.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn endpoints(&self) -> (BoundaryPoint, BoundaryPoint) {
        (BoundaryPoint::new(self.centre - self.half_width), BoundaryPoint::new(self.centre + self.half_width))
    }

    /// Signed angular offset of `b` from the arc centre, in `(−π, π]`.
    pub fn offset(&self, b: BoundaryPoint) -> f64 {
        let d = (b.angle() - self.centre).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    }

    pub fn side(&self, b: BoundaryPoint) -> Result<Side> {
        let value = lorentz(&b.null_vector(), &self.normal);
        if value.abs() <= 1e-12 * self.normal.norm() {
            return Err(Error::DegenerateBoundaryPoint { angle: b.angle() });
        }
        Ok(if value > 0.0 { Side::Far } else { Side::Near })
    }
}

pub fn dist(x: &Point, y: &Point) -> f64 {
    (-lorentz(x, y)).max(1.0).acosh()
}

/// `(x|y)_z = ½(ρ(z,x) + ρ(z,y) − ρ(x,y))`.
pub fn gromov(x: &Point, y: &Point, z: &Point) -> f64 {
    0.5 * (dist(z, x) + dist(z, y) - dist(x, y))
}

/// `β_b(x, y) = ln P(x, b) − ln P(y, b)`, the limit of `ρ(y, c) − ρ(x, c)`
/// as `c → b`.
pub fn busemann(b: BoundaryPoint, x: &Point, y: &Point) -> f64 {
    let xi = b.null_vector();
    (-lorentz(y, &xi)).ln() - (-lorentz(x, &xi)).ln()
}

/// `(x|b)_z = ½(ρ(z, x) − β_b(z, x))`.
pub fn gromov_boundary(x: &Point, b: BoundaryPoint, z: &Point) -> f64 {
    0.5 * (dist(z, x) - busemann(b, z, x))
}

/// The point at distance `t` from `x` on the geodesic ray towards `b`.
pub fn ray_point(x: &Point, b: BoundaryPoint, t: f64) -> Point {
    let xi = b.null_vector();
    let a = -lorentz(x, &xi);
    // The unit tangent at x pointing to b.
    let v = xi / a - x;
    x * t.cosh() + v * t.sinh()
}

/// Busemann function of the mix metric
/// `mix(x, y) = |x − y| + Σ_s (ln q_s / η) ℓ_s(x, y)` inside one apartment.
pub fn mix_busemann(
    model: &PolygonModel,
    sys: &CoxeterSystem,
    q: &[f64],
    eta: f64,
    b: BoundaryPoint,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<f64> {
    if q.len() != sys.rank() {
        return Err(Error::SizeMismatch { expected: sys.rank(), got: q.len() });
    }
    let geometric = busemann(b, &model.orbit_point(x), &model.orbit_point(y));
    let gallery = crate::walls::gallery_busemann(sys, x, y, |wall| model.boundary_side(sys, wall, b))?;
    Ok(geometric + gallery.iter().zip(q).map(|(&g, q)| q.ln() / eta * g as f64).sum::<f64>())
}

/// The mix distance between the chambers `x` and `y`.
pub fn mix_distance(model: &PolygonModel, sys: &CoxeterSystem, q: &[f64], eta: f64, x: &GroupElement, y: &GroupElement) -> f64 {
    let d = sys.mul(&sys.inverse(x), y).multi_length(sys.rank());
    dist(&model.orbit_point(x), &model.orbit_point(y)) + q.iter().enumerate().map(|(s, q)| q.ln() / eta * d.get(s as Generator) as f64).sum::<f64>()
}
