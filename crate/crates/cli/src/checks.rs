//! Parameterized verification checks. `suite all` runs them at config
//! scale; the acceptance tests run them at full scale.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use coxhecke::averaging::{ArcTriple, Experiment, ExperimentRow};
use coxhecke::boundary_rep::{
    apply_sq, apply_w1, apply_wq_composed, operator_matrix, ArcSet, BoundaryGrid, BoundaryModel, ClosedForm, PointFunction,
    RepParams,
};
use coxhecke::estimates::{verify_estimates, Check, EstimateConfig, EstimateReport};
use coxhecke::hecke::{mul_antichain, mul_gen};
use coxhecke::hyperbolic::{busemann, polar, BoundaryPoint};
use coxhecke::walls::walls_separating;
use coxhecke::{CoxeterSystem, GroupElement, HeckeElement, HeckeParams, Result, Wall, WallPoset};

/// Outcome of one check: `value` is compared against `bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub cases: u64,
    pub value: f64,
    pub bound: f64,
    pub note: String,
}

impl CheckResult {
    fn at_most(name: &str, cases: u64, value: f64, bound: f64) -> Self {
        CheckResult { name: name.into(), pass: value <= bound, cases, value, bound, note: String::new() }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = if self.note.is_empty() { note } else { format!("{note}; {}", self.note) };
        self
    }
}

pub type Exact = Ratio<i128>;

fn exact_params(q: &[Ratio<i64>]) -> HeckeParams<Exact> {
    HeckeParams::new(q.iter().map(|r| Exact::new(*r.numer() as i128, *r.denom() as i128)).collect())
}

/// `mul_antichain(w, e_u) = mul_recursive(w, e_u)` exactly for all
/// `ℓ(w), ℓ(u) ≤ lmax`. For each `u` the recursive products are built
/// sphere by sphere: `e_w e_u = e_s (e_{sw} e_u)` with `s` the first letter
/// of `w`, which is the recursion of `mul_recursive` shared across `w`.
pub fn hecke_equivalence(sys: &CoxeterSystem, lmax: usize, q_sets: &[Vec<Ratio<i64>>]) -> Result<CheckResult> {
    let ball = sys.ball(lmax)?;
    let mut cases = 0u64;
    let mut mismatches = 0u64;
    for q in q_sets {
        let params = exact_params(q);
        let bad: u64 = ball
            .par_iter()
            .map(|u| {
                let mut memo: HashMap<GroupElement, HeckeElement<Exact>> = HashMap::with_capacity(ball.len());
                let mut bad = 0;
                for w in &ball {
                    let recursive = match w.word().first() {
                        None => HeckeElement::basis(u.clone()),
                        Some(&s) => mul_gen(sys, s, &memo[&sys.left_mul(s, w)], &params),
                    };
                    if mul_antichain(sys, w, &HeckeElement::basis(u.clone()), &params) != recursive {
                        bad += 1;
                    }
                    memo.insert(w.clone(), recursive);
                }
                bad
            })
            .sum();
        mismatches += bad;
        cases += (ball.len() * ball.len()) as u64;
    }
    Ok(CheckResult::at_most("hecke_equivalence", cases, mismatches as f64, 0.0).note(format!("l(w), l(u) <= {lmax}, {} parameter sets", q_sets.len())))
}

/// `e_s² = (q_s − 1)e_s + q_s e_1` exactly.
pub fn hecke_quadratic(sys: &CoxeterSystem, q: &[Ratio<i64>]) -> CheckResult {
    let params = exact_params(q);
    let mut bad = 0;
    for s in sys.generators() {
        let es = HeckeElement::basis(sys.gen(s));
        let square = mul_gen(sys, s, &es, &params);
        let qs = *params.q(s);
        let expected = HeckeElement::from_terms([(sys.gen(s), qs - Exact::from_integer(1)), (GroupElement::identity(), qs)]);
        if square != expected {
            bad += 1;
        }
    }
    CheckResult::at_most("hecke_quadratic", sys.rank() as u64, bad as f64, 0.0)
}

/// Boundary points `2π(j + u_j)/count` with `u_j` uniform in `[0.1, 0.9)`.
pub fn sample_points(count: usize, seed: u64) -> Vec<BoundaryPoint> {
    coxhecke::estimates::sample_boundary(count, seed)
}

fn smooth() -> PointFunction {
    PointFunction::from_real(|t| 1.0 + 0.5 * t.cos() + 0.25 * (3.0 * t).sin())
}

fn residual(a: &PointFunction, b: &PointFunction, points: &[BoundaryPoint]) -> (f64, u64) {
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for &x in points {
        match (a.eval(x), b.eval(x)) {
            (Ok(u), Ok(v)) => worst = worst.max((u - v).norm()),
            _ => skipped += 1,
        }
    }
    (worst, skipped)
}

/// `(s^q)² = (q_s − 1)s^q + q_s I` pointwise.
pub fn operator_quadratic(model: &Arc<BoundaryModel>, params: &RepParams, points: &[BoundaryPoint]) -> CheckResult {
    let f = smooth();
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for s in model.system().generators() {
        let q = params.q(s);
        let once = apply_sq(model, s, &f, params);
        let twice = apply_sq(model, s, &once, params);
        let (once2, f2) = (once.clone(), f.clone());
        let rhs = PointFunction::new(move |x| Ok(once2.eval(x)? * (q - 1.0) + f2.eval(x)? * q));
        let (r, k) = residual(&twice, &rhs, points);
        worst = worst.max(r);
        skipped += k;
    }
    CheckResult::at_most("operator_quadratic", (points.len() * model.system().rank()) as u64, worst, 1e-9)
        .note(format!("{skipped} degenerate points skipped"))
}

/// The closed form against composition of generator actions, for every
/// `ℓ(w) ≤ lmax`.
pub fn closed_form_identity(model: &Arc<BoundaryModel>, lmax: usize, params: &RepParams, points: &[BoundaryPoint]) -> Result<CheckResult> {
    let ball = model.system().ball(lmax)?;
    Ok(closed_form_over(model, &ball, params, points)?.note(format!("l(w) <= {lmax}, eps = {}", params.epsilon())))
}

/// The closed form against composition for a single element.
pub fn closed_form_identity_for(model: &Arc<BoundaryModel>, w: &GroupElement, params: &RepParams, points: &[BoundaryPoint]) -> Result<CheckResult> {
    Ok(closed_form_over(model, std::slice::from_ref(w), params, points)?
        .note(format!("w = {}, eps = {}", model.system().format(w), params.epsilon())))
}

fn closed_form_over(model: &Arc<BoundaryModel>, ball: &[GroupElement], params: &RepParams, points: &[BoundaryPoint]) -> Result<CheckResult> {
    let f = smooth();
    let results: Vec<(f64, u64)> = ball
        .par_iter()
        .map(|w| {
            let closed = ClosedForm::new(model, w, params)?;
            let composed = apply_wq_composed(model, w, &f, params);
            let mut worst: f64 = 0.0;
            let mut skipped = 0;
            for &x in points {
                match (closed.eval(&f, x), composed.eval(x)) {
                    (Ok(a), Ok(b)) => worst = worst.max((a - b).norm()),
                    _ => skipped += 1,
                }
            }
            Ok((worst, skipped))
        })
        .collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let skipped: u64 = results.iter().map(|r| r.1).sum();
    Ok(CheckResult::at_most("closed_form_identity", (ball.len() * points.len()) as u64, worst, 1e-9)
        .note(format!("{skipped} degenerate points skipped")))
}

/// `‖w¹f‖ = ‖f‖` on the `n`-point trapezoid grid, relative error `10/n`.
pub fn weyl_isometry(model: &Arc<BoundaryModel>, lmax: usize, n: usize, epsilon: f64) -> Result<CheckResult> {
    let grid = BoundaryGrid::new(n)?;
    let f = smooth();
    let norm = |g: &PointFunction| g.sample(&grid).function.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let base = norm(&f);
    let ball = model.system().ball(lmax)?;
    let worst = ball
        .par_iter()
        .map(|w| (norm(&apply_w1(model, w, &f, epsilon)) / base - 1.0).abs())
        .reduce(|| 0.0, f64::max);
    Ok(CheckResult::at_most("weyl_isometry", ball.len() as u64, worst, 10.0 / n as f64).note(format!("l(w) <= {lmax}, N = {n}")))
}

/// `‖A − A†‖_max ≤ 10/N` for the Galerkin matrix of every generator at
/// `ε = 0`.
pub fn self_adjoint(model: &Arc<BoundaryModel>, q: &[f64], n: usize) -> Result<CheckResult> {
    let params = RepParams::new(q.to_vec(), 0.0)?;
    let grid = BoundaryGrid::new(n)?;
    let mut worst: f64 = 0.0;
    for s in model.system().generators() {
        let a = operator_matrix(model, &model.system().gen(s), &params, &grid)?;
        worst = worst.max(a.adjoint_residual());
    }
    Ok(CheckResult::at_most(&format!("self_adjoint_n{n}"), model.system().rank() as u64, worst, 10.0 / n as f64))
}

/// Pentagon angles, the Busemann cocycle, RN reciprocity for reflections
/// and the mass of pushforwards.
pub fn geometry(model: &Arc<BoundaryModel>, triples: usize, n: usize, seed: u64) -> Vec<CheckResult> {
    let geo = model.geometry();
    let angle_error = geo.measured_angles().iter().map(|a| (a - FRAC_PI_2).abs()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cocycle: f64 = 0.0;
    for _ in 0..triples {
        let b = BoundaryPoint::new(rng.random_range(0.0..TAU));
        let mut point = || polar(rng.random_range(0.0..4.0), rng.random_range(0.0..TAU));
        let (x, y, z) = (point(), point(), point());
        cocycle = cocycle.max((busemann(b, &x, &z) - busemann(b, &x, &y) - busemann(b, &y, &z)).abs());
    }
    let points = sample_points(triples, seed ^ 0x5eed);
    let mut reciprocity: f64 = 0.0;
    let mut mass: f64 = 0.0;
    let grid = BoundaryGrid::new(n).expect("positive grid");
    for s in model.system().generators() {
        let r = geo.side_reflection(s);
        for &x in &points {
            reciprocity = reciprocity.max((geo.rn_derivative(r, r.apply_boundary(x)) * geo.rn_derivative(r, x) - 1.0).abs());
        }
        let total: f64 = (0..n).map(|j| geo.rn_derivative(r, grid.point(j))).sum::<f64>() / n as f64;
        mass = mass.max((total - 1.0).abs());
    }
    vec![
        CheckResult::at_most("polygon_angles", geo.sides() as u64, angle_error, 1e-9),
        CheckResult::at_most("busemann_cocycle", triples as u64, cocycle, 1e-9),
        CheckResult::at_most("rn_reciprocity", (points.len() * model.system().rank()) as u64, reciprocity, 1e-9),
        CheckResult::at_most("pushforward_mass", model.system().rank() as u64, mass, 10.0 / n as f64),
    ]
}

/// The order on P(1|w) three ways: the gate test, nesting of far arcs, and
/// sampling sides over every chamber of the word ball of radius
/// `lmax + 2`. `H < H2` by sampling means every sampled chamber beyond `H2`
/// is beyond `H`.
pub fn wall_order(model: &Arc<BoundaryModel>, lmax: usize) -> Result<CheckResult> {
    let sys = model.system();
    let chambers = sys.ball(lmax + 2)?;
    let words = chambers.len().div_ceil(64);
    // Far-side indicator of each wall over the chambers.
    let mut far: HashMap<Wall, Vec<u64>> = HashMap::new();
    for (i, c) in chambers.iter().enumerate() {
        for wall in walls_separating(sys, &GroupElement::identity(), c) {
            far.entry(wall).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
        }
    }
    let elements = sys.ball(lmax)?;
    let results: Vec<(u64, u64)> = elements
        .par_iter()
        .map(|w| {
            let poset = WallPoset::separating(sys, w);
            let walls = poset.walls();
            let (mut pairs, mut bad) = (0, 0);
            for i in 0..walls.len() {
                for j in 0..walls.len() {
                    if i == j {
                        continue;
                    }
                    pairs += 1;
                    let gate = poset.less(i, j);
                    let arcs = model.arcs_nested(&walls[i], &walls[j]);
                    let (fi, fj) = (&far[&walls[i]], &far[&walls[j]]);
                    let sampled = fj.iter().zip(fi).all(|(a, b)| a & !b == 0);
                    if gate != arcs || gate != sampled {
                        bad += 1;
                    }
                }
            }
            (pairs, bad)
        })
        .collect();
    let pairs = results.iter().map(|r| r.0).sum();
    let bad = results.iter().map(|r| r.1).sum::<u64>();
    Ok(CheckResult::at_most("wall_order", pairs, bad as f64, 0.0).note(format!("l(w) <= {lmax}, side sampling over the word ball of radius {}", lmax + 2)))
}

/// The estimate sweep and the sandwich bounds as check results.
pub fn estimate_checks(report: &EstimateReport) -> Vec<CheckResult> {
    let sandwich = [Check::SandwichLower, Check::SandwichUpper, Check::ClosedFormAgreement];
    let mut out: Vec<CheckResult> = Vec::new();
    for group in [true, false] {
        let members: Vec<_> = report.summaries.iter().filter(|s| sandwich.contains(&s.check) == group).collect();
        let failures: u64 = members.iter().map(|s| s.failures).sum();
        let cases: u64 = members.iter().map(|s| s.cases).sum();
        let name = if group { "sandwich" } else { "estimate_sweep" };
        let worst = members.iter().map(|s| s.min_slack).fold(f64::INFINITY, f64::min);
        out.push(CheckResult::at_most(name, cases, failures as f64, 0.0).note(if group {
            format!("M_emp = {}, C = {:.6}, max ratio = {:.6}", report.m_emp, report.c, report.max_ratio)
        } else {
            format!("min slack {worst:.3e}")
        }));
    }
    out
}

pub fn estimates(model: &Arc<BoundaryModel>, q: &[f64], lmax: usize, samples: usize, seed: u64) -> Result<EstimateReport> {
    let params = RepParams::new(q.to_vec(), 0.0)?;
    verify_estimates(model, &params, &EstimateConfig { lmax, samples, seed, ..EstimateConfig::default() })
}

/// A named arc triple for the averaging experiment.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct NamedTriple {
    pub name: String,
    /// Arcs as counter-clockwise `[start, end]` pairs, in radians.
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub w: Vec<[f64; 2]>,
}

impl NamedTriple {
    pub fn triple(&self) -> ArcTriple {
        let set = |arcs: &[[f64; 2]]| ArcSet { arcs: arcs.iter().flat_map(|[a, b]| ArcSet::arc(*a, *b).arcs).collect() };
        ArcTriple { u: set(&self.u), v: set(&self.v), w: set(&self.w) }
    }

    /// `U` and `W` are disjoint, so the limit is 0.
    pub fn is_disjoint(&self) -> bool {
        let t = self.triple();
        t.u.intersect(&t.w).arcs.is_empty()
    }
}

/// The arc triples fixed before the first run of the experiment.
pub fn default_triples() -> Vec<NamedTriple> {
    vec![
        NamedTriple { name: "generic".into(), u: vec![[0.3, 2.4]], v: vec![[1.1, 4.0]], w: vec![[1.9, 3.6]] },
        NamedTriple { name: "disjoint".into(), u: vec![[0.3, 1.5]], v: vec![[1.1, 4.0]], w: vec![[3.0, 4.5]] },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragingTable {
    pub triple: String,
    pub q: Vec<f64>,
    pub rows: Vec<ExperimentRow>,
}

pub fn averaging(
    model: &Arc<BoundaryModel>,
    triples: &[NamedTriple],
    ts: &[f64],
    qs: &[Vec<f64>],
    budget: usize,
) -> Result<(f64, Vec<AveragingTable>)> {
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let experiment = Experiment::new(model, t_max, budget)?;
    let arcs: Vec<ArcTriple> = triples.iter().map(NamedTriple::triple).collect();
    let mut tables = Vec::new();
    for q in qs {
        let params = RepParams::new(q.clone(), 0.0)?;
        for (named, rows) in triples.iter().zip(experiment.run(model, &arcs, ts, &params)?) {
            tables.push(AveragingTable { triple: named.name.clone(), q: q.clone(), rows });
        }
    }
    Ok((experiment.r(), tables))
}

/// Trend acceptance: the error at the largest `t` is below the error at the
/// smallest; for disjoint `U`, `W` the value also ends below `0.05`.
pub fn averaging_checks(triples: &[NamedTriple], tables: &[AveragingTable]) -> Vec<CheckResult> {
    tables
        .iter()
        .map(|table| {
            let disjoint = triples.iter().find(|t| t.name == table.triple).is_some_and(NamedTriple::is_disjoint);
            let (first, last) = (&table.rows[0], &table.rows[table.rows.len() - 1]);
            let q = table.q.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
            let name = format!("averaging_{}_q{}", table.triple, q);
            let mut check = CheckResult {
                name,
                pass: last.error < first.error || (first.error == 0.0 && last.error == 0.0),
                cases: table.rows.len() as u64,
                value: last.error,
                bound: first.error,
                note: format!("error at t = {} against t = {}", last.t, first.t),
            };
            if disjoint {
                check.pass &= last.value < 0.05;
                check.note.push_str("; value below 0.05");
            }
            check
        })
        .collect()
}
