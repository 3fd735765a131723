use coxhecke::boundary_rep::{BoundaryModel, RepParams};
use coxhecke::estimates::{verify_estimates, Check, EstimateConfig};

#[test]
fn pentagon_sweep_to_length_eight() {
    let model = BoundaryModel::polygon(5).unwrap();
    let params = RepParams::uniform(5, 2.0, 0.0).unwrap();
    let cfg = EstimateConfig { lmax: 8, samples: 64, seed: 7, ..EstimateConfig::default() };
    let report = verify_estimates(&model, &params, &cfg).unwrap();
    for s in &report.summaries {
        println!("{:<28} cases {:>9} inapplicable {:>8} min slack {:.3e}", s.check.name(), s.cases, s.inapplicable, s.min_slack);
        assert_eq!(s.failures, 0, "{:?}", s.worst);
    }
    println!("M_emp {} Q {} C {} max ratio {} pairs {} skipped {}", report.m_emp, report.q_factor, report.c, report.max_ratio, report.pairs, report.skipped);
    assert!(report.summary(Check::TauBound).unwrap().cases > 0);
    assert!(report.max_ratio <= report.c);
}
