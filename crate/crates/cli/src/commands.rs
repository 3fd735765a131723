use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use coxhecke::boundary_rep::{BoundaryModel, RepParams};
use coxhecke::estimates::{EstimateRow, EstimateReport};
use coxhecke::hecke::{product, Algorithm};
use coxhecke::{CoxeterSystem, HeckeElement, HeckeParams, WallPoset};

use crate::checks::{self, CheckResult, NamedTriple};
use crate::config::{parse_rational, RowMode, RunConfig};

/// Version tag written into every JSON report.
pub const SCHEMA: &str = "coxhecke-report/1";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Library(#[from] coxhecke::Error),
    #[error("{0}")]
    Input(String),
}

/// What a command produces: JSON always, CSV when the output is tabular.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub pass: bool,
    pub json: Value,
    pub csv: Option<String>,
    pub summary: String,
}

impl Report {
    fn new(command: &'static str, pass: bool, body: Value, csv: Option<String>, summary: String) -> Self {
        let mut json = json!({ "schema": SCHEMA, "command": command, "pass": pass });
        if let (Value::Object(map), Value::Object(extra)) = (&mut json, body) {
            map.extend(extra);
        }
        Report { command, pass, json, csv, summary }
    }

    /// Pretty JSON with a trailing newline.
    pub fn json_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("reports serialize");
        s.push('\n');
        s
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn system(cfg: &RunConfig) -> Result<CoxeterSystem, CommandError> {
    cfg.validate()?;
    Ok(CoxeterSystem::polygon(cfg.k)?)
}

fn model(cfg: &RunConfig) -> Result<Arc<BoundaryModel>, CommandError> {
    cfg.validate()?;
    Ok(BoundaryModel::polygon(cfg.k)?)
}

pub fn group_info(cfg: &RunConfig) -> Result<Report, CommandError> {
    let sys = system(cfg)?;
    let spheres: Vec<usize> = sys.spheres(cfg.lmax)?.iter().map(Vec::len).collect();
    let commuting: Vec<[String; 2]> = sys
        .generators()
        .flat_map(|s| sys.generators().filter(move |&t| s < t).map(move |t| (s, t)))
        .filter(|&(s, t)| sys.commutes(s, t))
        .map(|(s, t)| [sys.label(s).to_string(), sys.label(t).to_string()])
        .collect();
    let summary = format!("{}-gon group: rank {}, sphere sizes {:?}", cfg.k, sys.rank(), spheres);
    let body = json!({ "k": cfg.k, "rank": sys.rank(), "labels": sys.labels(), "commuting_pairs": commuting, "sphere_sizes": spheres });
    Ok(Report::new("group info", true, body, None, summary))
}

pub fn group_ball(cfg: &RunConfig) -> Result<Report, CommandError> {
    let sys = system(cfg)?;
    let ball = sys.ball(cfg.radius)?;
    #[derive(Serialize)]
    struct Row {
        word: String,
        length: usize,
    }
    let rows: Vec<Row> = ball.iter().map(|w| Row { word: sys.format(w), length: w.len() }).collect();
    let summary = format!("ball of radius {}: {} elements", cfg.radius, rows.len());
    let body = json!({ "radius": cfg.radius, "size": rows.len(), "elements": rows.iter().map(|r| &r.word).collect::<Vec<_>>() });
    Ok(Report::new("group ball", true, body, Some(csv_text(&rows)), summary))
}

pub fn walls_dump(cfg: &RunConfig) -> Result<Report, CommandError> {
    let model = model(cfg)?;
    let sys = model.system();
    let w = sys.parse_word(&cfg.w)?;
    let poset = WallPoset::separating(sys, &w);
    let walls = poset.walls();
    let n = walls.len();
    let describe: Vec<Value> = walls
        .iter()
        .enumerate()
        .map(|(i, wall)| {
            let arc = model.wall_arc(wall);
            json!({
                "index": i,
                "reflection": sys.format(wall.reflection()),
                "type": sys.label(wall.wall_type()),
                "gate": sys.format(&wall.gate(sys)),
                "far_arc": [arc.centre() - arc.half_width(), arc.centre() + arc.half_width()],
            })
        })
        .collect();
    let mut order = Vec::new();
    let mut hasse = Vec::new();
    let mut disagreements = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let less = poset.less(i, j);
            if less != model.arcs_nested(&walls[i], &walls[j]) {
                disagreements += 1;
            }
            if less {
                order.push([i, j]);
                if !(0..n).any(|k| poset.less(i, k) && poset.less(k, j)) {
                    hasse.push([i, j]);
                }
            }
        }
    }
    let full = poset.full_mask();
    let antichains: Vec<Value> = poset
        .antichain_masks(full)
        .into_iter()
        .map(|mask| {
            json!({
                "walls": (0..n).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>(),
                "height": poset.height(mask, full),
                "product": sys.format(&poset.product(sys, mask)),
            })
        })
        .collect();
    let summary = format!("P(1|{}): {} walls, {} anti-chains, {} order/arc disagreements", cfg.w, n, antichains.len(), disagreements);
    let body = json!({ "w": sys.format(&w), "walls": describe, "order": order, "hasse": hasse, "antichains": antichains, "arc_disagreements": disagreements });
    Ok(Report::new("walls dump", disagreements == 0, body, None, summary))
}

fn parse_element(sys: &CoxeterSystem, text: &str) -> Result<HeckeElement<BigRational>, CommandError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CommandError::Input(format!("Hecke element: {e}")))?;
    let map = value.as_object().ok_or_else(|| CommandError::Input("Hecke element must be a JSON object word -> coefficient".into()))?;
    let mut out = HeckeElement::zero();
    for (word, c) in map {
        let text = match c {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(CommandError::Input(format!("coefficient of `{word}` must be a number or a string"))),
        };
        let r = parse_rational(&text).ok_or_else(|| CommandError::Input(format!("coefficient `{text}` of `{word}` is not rational")))?;
        let element = if word == "1" { coxhecke::GroupElement::identity() } else { sys.parse_word(word)? };
        out.add_term(element, big(r));
    }
    Ok(out)
}

fn big(r: crate::config::Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn element_json(sys: &CoxeterSystem, e: &HeckeElement<BigRational>) -> Value {
    let map: BTreeMap<String, String> = e.iter().map(|(w, c)| (sys.format(w), c.to_string())).collect();
    json!(map)
}

pub fn hecke_mul(cfg: &RunConfig, a: &str, b: &str) -> Result<Report, CommandError> {
    let sys = system(cfg)?;
    let (a, b) = (parse_element(&sys, a)?, parse_element(&sys, b)?);
    let params = HeckeParams::new(cfg.q_vector().into_iter().map(big).collect());
    let recursive = product(&sys, &a, &b, &params, Algorithm::Recursive)?;
    let antichain = product(&sys, &a, &b, &params, Algorithm::Antichain)?;
    let matches = recursive == antichain;
    let summary = format!("product has {} terms; algorithms {}", antichain.len(), if matches { "agree" } else { "DISAGREE" });
    let body = json!({
        "q": cfg.q_vector().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
        "antichain": element_json(&sys, &antichain),
        "recursive": element_json(&sys, &recursive),
        "match": matches,
    });
    Ok(Report::new("hecke mul", matches, body, None, summary))
}

pub fn rep_check(cfg: &RunConfig) -> Result<Report, CommandError> {
    let model = model(cfg)?;
    let w = model.system().parse_word(&cfg.w)?;
    let params = RepParams::new(cfg.q_f64(), cfg.eps_f64())?;
    let grid = coxhecke::boundary_rep::BoundaryGrid::new(cfg.n)?;
    let points: Vec<_> = (0..cfg.n).map(|j| grid.point(j)).collect();
    let identity = checks::closed_form_identity_for(&model, &w, &params, &points)?;
    let quadratic = checks::operator_quadratic(&model, &params, &points);
    let results = vec![identity, quadratic];
    let pass = results.iter().all(|c| c.pass);
    let summary = summarize(&results);
    let body = json!({ "w": model.system().format(&w), "n": cfg.n, "eps": cfg.eps.to_string(), "checks": results });
    Ok(Report::new("rep check", pass, body, Some(csv_text(&results)), summary))
}

#[derive(Serialize)]
struct EstimateCsvRow<'a> {
    check: &'static str,
    w: &'a str,
    z: Option<f64>,
    h: &'a str,
    lhs: f64,
    rhs: f64,
    slack: f64,
    pass: bool,
}

fn estimate_rows(report: &EstimateReport, mode: RowMode) -> Vec<EstimateCsvRow<'_>> {
    let rows: Vec<&EstimateRow> = match mode {
        RowMode::All => report.rows.iter().collect(),
        RowMode::Worst => report.summaries.iter().filter_map(|s| s.worst.as_ref()).collect(),
    };
    rows.into_iter()
        .map(|r| EstimateCsvRow {
            check: r.check.name(),
            w: &r.w,
            z: (!r.z.is_nan()).then_some(r.z),
            h: &r.h,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            pass: r.pass,
        })
        .collect()
}

pub fn estimates_sweep(cfg: &RunConfig) -> Result<Report, CommandError> {
    let model = model(cfg)?;
    if cfg.eps_f64() != 0.0 {
        return Err(crate::config::ConfigError { field: "eps".into(), message: "the estimates are stated for eps = 0".into() }.into());
    }
    let params = RepParams::new(cfg.q_f64(), 0.0)?;
    let report = coxhecke::estimates::verify_estimates(
        &model,
        &params,
        &coxhecke::estimates::EstimateConfig {
            lmax: cfg.lmax,
            samples: cfg.samples,
            seed: cfg.seed,
            record_rows: cfg.rows == RowMode::All,
            ..Default::default()
        },
    )?;
    let summaries: Vec<Value> = report
        .summaries
        .iter()
        .map(|s| json!({ "check": s.check.name(), "cases": s.cases, "failures": s.failures, "inapplicable": s.inapplicable, "min_slack": s.min_slack }))
        .collect();
    let pass = report.passed();
    let summary = format!(
        "{} (w, z) pairs, {} failures; M_emp = {}, C = {:.4}, max ratio = {:.4}",
        report.pairs,
        report.failures(),
        report.m_emp,
        report.c,
        report.max_ratio
    );
    let body = json!({
        "lmax": cfg.lmax,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "summaries": summaries,
        "m_emp": report.m_emp,
        "q_factor": report.q_factor,
        "c": report.c,
        "max_ratio": report.max_ratio,
        "pairs": report.pairs,
        "skipped": report.skipped,
    });
    let csv = csv_text(&estimate_rows(&report, cfg.rows));
    Ok(Report::new("estimates sweep", pass, body, Some(csv), summary))
}

fn load_triples(cfg: &RunConfig) -> Result<Vec<NamedTriple>, CommandError> {
    match &cfg.arcs {
        None => Ok(checks::default_triples()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CommandError::Input(format!("arcs file {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CommandError::Input(format!("arcs file {}: {e}", path.display())))
        }
    }
}

#[derive(Serialize)]
struct AveragingCsvRow<'a> {
    triple: &'a str,
    t: f64,
    layer_size: usize,
    selected: usize,
    ties: usize,
    value: f64,
    target: f64,
    error: f64,
}

pub fn averaging_run(cfg: &RunConfig) -> Result<Report, CommandError> {
    let model = model(cfg)?;
    if cfg.eps_f64() != 0.0 {
        return Err(crate::config::ConfigError { field: "eps".into(), message: "averaging needs eps = 0".into() }.into());
    }
    let triples = load_triples(cfg)?;
    let (r, tables) = checks::averaging(&model, &triples, &cfg.t, &[cfg.q_f64()], coxhecke::averaging::DEFAULT_BUDGET)?;
    let results = checks::averaging_checks(&triples, &tables);
    let rows: Vec<AveragingCsvRow> = tables
        .iter()
        .flat_map(|table| {
            table.rows.iter().map(|r| AveragingCsvRow {
                triple: &table.triple,
                t: r.t,
                layer_size: r.layer_size,
                selected: r.selected,
                ties: r.ties,
                value: r.value,
                target: r.target,
                error: r.error,
            })
        })
        .collect();
    let pass = results.iter().all(|c| c.pass);
    let summary = format!("R = {r:.6}; {}", summarize(&results));
    let body = json!({ "r": r, "triples": triples, "tables": tables, "checks": results });
    Ok(Report::new("averaging run", pass, body, Some(csv_text(&rows)), summary))
}

/// Every check at the scale set by the config.
pub fn suite_all(cfg: &RunConfig) -> Result<Report, CommandError> {
    let model = model(cfg)?;
    let sys = model.system();
    let q = cfg.q_f64();
    let small = cfg.lmax.min(4);
    let points = checks::sample_points(cfg.samples, cfg.seed);
    let mut results: Vec<CheckResult> = vec![
        checks::hecke_equivalence(sys, small, &[cfg.q_vector()])?,
        checks::hecke_quadratic(sys, &cfg.q_vector()),
    ];
    let params = RepParams::new(q.clone(), cfg.eps_f64())?;
    results.push(checks::operator_quadratic(&model, &params, &points));
    results.push(checks::closed_form_identity(&model, small, &params, &points)?);
    // w¹f lives on arcs of width about e^{-|w·0|}; longer words fall below the grid spacing.
    let resolved = (cfg.n.trailing_zeros() as usize / 3).min(small);
    results.push(checks::weyl_isometry(&model, resolved, cfg.n, 0.0)?);
    results.push(checks::self_adjoint(&model, &q, cfg.n)?);
    results.extend(checks::geometry(&model, cfg.samples, cfg.n, cfg.seed));
    results.push(checks::wall_order(&model, cfg.lmax)?);
    if cfg.eps_f64() == 0.0 {
        let report = checks::estimates(&model, &q, cfg.lmax, cfg.samples, cfg.seed)?;
        results.extend(checks::estimate_checks(&report));
        let triples = load_triples(cfg)?;
        let (_, tables) = checks::averaging(&model, &triples, &cfg.t, &[q.clone()], coxhecke::averaging::DEFAULT_BUDGET)?;
        results.extend(checks::averaging_checks(&triples, &tables));
    }
    let pass = results.iter().all(|c| c.pass);
    let summary = summarize(&results);
    let body = json!({ "config": cfg, "checks": results });
    Ok(Report::new("suite all", pass, body, Some(csv_text(&results)), summary))
}

fn summarize(results: &[CheckResult]) -> String {
    results
        .iter()
        .map(|c| format!("{} {}: {:.3e} (bound {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound))
        .collect::<Vec<_>>()
        .join("\n")
}
