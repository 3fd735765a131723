//! The acceptance suite: one line per criterion, at full scale.
//!
//! Runs without the libtest harness so the lines always print. The process
//! fails if any criterion's outcome differs from `EXPECTED_RED`, the
//! criteria known to fail honestly.
//!
//! `COXHECKE_ACCEPTANCE=quick` shrinks every criterion for smoke runs;
//! `COXHECKE_CRITERIA=3,9` runs a subset.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use num_rational::Ratio;
use serde::Deserialize;

use coxhecke::averaging::DEFAULT_BUDGET;
use coxhecke::boundary_rep::{BoundaryModel, RepParams};
use coxhecke_cli::checks::{self, AveragingTable, CheckResult};

/// Criterion 9 fails for the generic triple at q = 1: the error at t = 10
/// exceeds the error at t = 4.
const EXPECTED_RED: &[u32] = &[9];

struct Scale {
    lmax_hecke: usize,
    lmax_rep: usize,
    points: usize,
    triples: usize,
    lmax_sweep: usize,
    samples: usize,
    ts: Vec<f64>,
}

impl Scale {
    fn full() -> Self {
        Scale { lmax_hecke: 6, lmax_rep: 6, points: 1000, triples: 1000, lmax_sweep: 8, samples: 64, ts: vec![4.0, 6.0, 8.0, 10.0] }
    }

    fn quick() -> Self {
        Scale { lmax_hecke: 3, lmax_rep: 3, points: 50, triples: 50, lmax_sweep: 4, samples: 8, ts: vec![4.0, 6.0] }
    }
}

fn r(p: i64, q: i64) -> Ratio<i64> {
    Ratio::new(p, q)
}

fn parameter_sets() -> Vec<Vec<Ratio<i64>>> {
    let mut sets: Vec<Vec<Ratio<i64>>> = [r(1, 1), r(3, 2), r(2, 1), r(3, 1)].iter().map(|&q| vec![q; 5]).collect();
    sets.push(vec![r(2, 1), r(3, 1), r(2, 1), r(3, 1), r(2, 1)]);
    sets
}

fn floats(q: &[Ratio<i64>]) -> Vec<f64> {
    q.iter().map(|x| *x.numer() as f64 / *x.denom() as f64).collect()
}

fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|c| c.pass)
}

fn describe(results: &[CheckResult]) -> String {
    results
        .iter()
        .map(|c| format!("{}{} {:.2e}/{:.2e}", if c.pass { "" } else { "!" }, c.name, c.value, c.bound))
        .collect::<Vec<_>>()
        .join(", ")
}

type Outcome = Result<Vec<CheckResult>, String>;

fn hecke_oracle(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    Ok(vec![checks::hecke_equivalence(model.system(), scale.lmax_hecke, &parameter_sets()).map_err(|e| e.to_string())?])
}

fn quadratic(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    let points = checks::sample_points(scale.points, 2);
    let mut out = Vec::new();
    for q in parameter_sets() {
        out.push(checks::hecke_quadratic(model.system(), &q));
        let params = RepParams::new(floats(&q), 0.0).map_err(|e| e.to_string())?;
        out.push(checks::operator_quadratic(&model, &params, &points));
    }
    Ok(out)
}

fn closed_form(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    let points = checks::sample_points(256, 3);
    let mut out = Vec::new();
    for q in parameter_sets() {
        for eps in [0.0, 0.7] {
            let params = RepParams::new(floats(&q), eps).map_err(|e| e.to_string())?;
            out.push(checks::closed_form_identity(&model, scale.lmax_rep, &params, &points).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn unitarity(_: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    let q = vec![2.0; 5];
    Ok(vec![
        checks::weyl_isometry(&model, 4, 4096, 0.0).map_err(|e| e.to_string())?,
        checks::weyl_isometry(&model, 4, 4096, 0.7).map_err(|e| e.to_string())?,
        checks::self_adjoint(&model, &q, 4096).map_err(|e| e.to_string())?,
        checks::self_adjoint(&model, &q, 8192).map_err(|e| e.to_string())?,
    ])
}

/// Criteria 5 and 6 share one sweep.
fn sweep(scale: &Scale) -> Outcome {
    static SWEEP: OnceLock<Outcome> = OnceLock::new();
    SWEEP
        .get_or_init(|| {
            let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
            let report = checks::estimates(&model, &[2.0; 5], scale.lmax_sweep, scale.samples, 1).map_err(|e| e.to_string())?;
            Ok(checks::estimate_checks(&report))
        })
        .clone()
}

fn geometry(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    let hexagon = BoundaryModel::polygon(6).map_err(|e| e.to_string())?;
    let mut out = checks::geometry(&model, scale.triples, 4096, 7);
    let mut hex = checks::geometry(&hexagon, 1, 4096, 7);
    hex[0].name = "hexagon_angles".into();
    out.push(hex.swap_remove(0));
    Ok(out)
}

fn wall_order(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    Ok(vec![checks::wall_order(&model, scale.lmax_sweep).map_err(|e| e.to_string())?])
}

#[derive(Deserialize)]
struct Fixture {
    t: Vec<f64>,
    layer_sizes: Vec<usize>,
    tables: Vec<FixtureTable>,
}

#[derive(Deserialize)]
struct FixtureTable {
    triple: String,
    q: f64,
    target: f64,
    values: Vec<f64>,
}

fn fixture_check(fixture: &Fixture, tables: &[AveragingTable]) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for expected in &fixture.tables {
        let Some(table) = tables.iter().find(|t| t.triple == expected.triple && t.q[0] == expected.q) else {
            worst = f64::INFINITY;
            continue;
        };
        for (i, row) in table.rows.iter().enumerate() {
            let layer = fixture.layer_sizes[i] as f64 - row.layer_size as f64;
            worst = worst
                .max((row.t - fixture.t[i]).abs())
                .max(layer.abs())
                .max((row.target - expected.target).abs())
                .max((row.value - expected.values[i]).abs());
            cases += 1;
        }
    }
    CheckResult { name: "averaging_fixture".into(), pass: worst <= 1e-9, cases, value: worst, bound: 1e-9, note: String::new() }
}

fn averaging(scale: &Scale) -> Outcome {
    let model = BoundaryModel::polygon(5).map_err(|e| e.to_string())?;
    let triples = checks::default_triples();
    let (_, tables) =
        checks::averaging(&model, &triples, &scale.ts, &[vec![1.0; 5], vec![2.0; 5]], DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let mut out = checks::averaging_checks(&triples, &tables);
    for table in &tables {
        for row in &table.rows {
            println!(
                "    {} q={} t={:>4} layer={:>6} value={:.6e} target={:.6e} error={:.3e}",
                table.triple, table.q[0], row.t, row.layer_size, row.value, row.target, row.error
            );
        }
    }
    if scale.ts.len() == 4 {
        let text = include_str!("fixtures/averaging_first_run.json");
        let fixture: Fixture = serde_json::from_str(text).map_err(|e| e.to_string())?;
        out.push(fixture_check(&fixture, &tables));
    }
    Ok(out)
}

fn determinism(scale: &Scale) -> Outcome {
    let dir = std::env::temp_dir().join(format!("coxhecke-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = dir.join("suite.conf");
    let t = if scale.ts.len() == 4 { "4,6" } else { "4" };
    std::fs::write(&config, format!("lmax = 4\nn = 512\nsamples = 16\nseed = 11\nt = {t}\n")).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_coxhecke"))
            .args(["suite", "all", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        let json = std::fs::read(out.join("suite_all.json")).map_err(|e| e.to_string())?;
        let csv = std::fs::read(out.join("suite_all.csv")).map_err(|e| e.to_string())?;
        outputs.push((status.stdout, json, csv, status.status.code()));
    }
    std::fs::remove_dir_all(&dir).ok();
    let same = outputs[0] == outputs[1];
    Ok(vec![CheckResult {
        name: "byte_identical_reports".into(),
        pass: same,
        cases: 2,
        value: if same { 0.0 } else { 1.0 },
        bound: 0.0,
        note: format!("exit codes {:?}, {:?}", outputs[0].3, outputs[1].3),
    }])
}

type Criterion = (u32, &'static str, fn(&Scale) -> Outcome);

fn main() -> ExitCode {
    let quick = std::env::var("COXHECKE_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let scale = if quick { Scale::quick() } else { Scale::full() };
    let criteria: [Criterion; 10] = [
        (1, "hecke_oracle_equivalence", hecke_oracle),
        (2, "quadratic_relations", quadratic),
        (3, "closed_form_identity", closed_form),
        (4, "unitarity_self_adjointness", unitarity),
        (5, "sandwich_inequality", |s| sweep(s).map(|mut v| vec![v.remove(0)])),
        (6, "estimate_sweep", |s| sweep(s).map(|mut v| vec![v.remove(1)])),
        (7, "geometry", geometry),
        (8, "wall_poset_cross_validation", wall_order),
        (9, "averaging_experiment", averaging),
        (10, "determinism", determinism),
    ];
    let selected: Option<BTreeSet<u32>> =
        std::env::var("COXHECKE_CRITERIA").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut red = BTreeSet::new();
    let mut errors = 0;
    for (number, name, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&number)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run(&scale);
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(results) => {
                let pass = all_pass(&results);
                if !pass {
                    red.insert(number);
                }
                println!("criterion {number:>2} {name}: {} ({seconds:.1}s) [{}]", if pass { "PASS" } else { "FAIL" }, describe(&results));
            }
            Err(e) => {
                errors += 1;
                red.insert(number);
                println!("criterion {number:>2} {name}: ERROR {e}");
            }
        }
    }
    let expected: BTreeSet<u32> = if quick {
        BTreeSet::new()
    } else {
        EXPECTED_RED.iter().copied().filter(|n| selected.as_ref().is_none_or(|s| s.contains(n))).collect()
    };
    if errors == 0 && red == expected {
        println!("acceptance: outcome as recorded (failing: {red:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: outcome changed (failing: {red:?}, recorded: {expected:?})");
        ExitCode::FAILURE
    }
}
