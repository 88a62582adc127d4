use rwbsde::benchmarks::BenchmarkCase;
use rwbsde::experiment::{
    emit_csv, parse_csv, run_mc, run_mc_with, ConvergenceSummary, ExperimentConfig, SchemeChoice,
};
use rwbsde::Execution;

fn small(case: BenchmarkCase) -> ExperimentConfig {
    ExperimentConfig {
        n_list: vec![20, 40, 80],
        replications: 400,
        seed: 7,
        ..ExperimentConfig::new(case)
    }
}

#[test]
fn same_seed_same_series() {
    let c = small(BenchmarkCase::Square);
    assert_eq!(run_mc(&c).unwrap(), run_mc(&c).unwrap());
    let other = ExperimentConfig {
        seed: 8,
        ..c.clone()
    };
    assert_ne!(run_mc(&c).unwrap(), run_mc(&other).unwrap());
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_and_sequential_agree_bitwise() {
    for case in BenchmarkCase::ALL {
        let c = small(case);
        let (a, _) = run_mc_with(&c, Execution::Sequential).unwrap();
        let (b, _) = run_mc_with(&c, Execution::Parallel).unwrap();
        assert_eq!(a, b, "{case}");
    }
}

#[test]
fn one_lattice_per_step_count() {
    let c = small(BenchmarkCase::Sqrt);
    let (_, stats) = run_mc_with(&c, Execution::Sequential).unwrap();
    assert_eq!(stats.lattice_solves, c.n_list.len());
    assert_eq!(stats.replications, c.n_list.len() * c.replications);
}

#[test]
fn root_evaluation_has_no_sampling_noise() {
    // at t = 0 neither the walk nor the bridge carries randomness
    let c = ExperimentConfig {
        t_eval: 0.0,
        ..small(BenchmarkCase::Square)
    };
    for row in run_mc(&c).unwrap().rows {
        assert!(row.se_y <= 1e-12 * row.e_y.max(1.0), "{row:?}");
    }
}

#[test]
fn sqrt_case_reports_no_z() {
    let series = run_mc(&small(BenchmarkCase::Sqrt)).unwrap();
    assert!(series
        .rows
        .iter()
        .all(|r| r.e_z.is_none() && r.se_z.is_none()));
    let summary = ConvergenceSummary::from_series(&series, 0.5);
    assert!(summary.z.is_none());
    assert_eq!(summary.reference_slope, -0.25);
}

#[test]
fn implicit_harness_runs() {
    let c = ExperimentConfig {
        scheme: SchemeChoice::Implicit,
        ..small(BenchmarkCase::Exp)
    };
    let rows = run_mc(&c).unwrap().rows;
    assert!(rows.iter().all(|r| r.e_y.is_finite() && r.e_y > 0.0));
}

#[test]
fn report_roundtrip_through_file() {
    let c = small(BenchmarkCase::Exp);
    let series = run_mc(&c).unwrap();
    let summary = ConvergenceSummary::from_series(&series, c.case.alpha());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    emit_csv(&series, &summary, &path, Some(&c)).unwrap();
    assert_eq!(parse_csv(&path).unwrap(), series);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# case=exp\n"));
    assert!(text.contains("\nn,E_Y,SE_Y,E_Z,SE_Z\n"));
    assert!(text.contains("# reference_slope="));
}

#[test]
fn invalid_configs_are_rejected() {
    let base = small(BenchmarkCase::Square);
    for bad in [
        ExperimentConfig {
            t_eval: 1.0,
            ..base.clone()
        },
        ExperimentConfig {
            n_list: vec![],
            ..base.clone()
        },
        ExperimentConfig {
            n_list: vec![40, 20],
            ..base.clone()
        },
        ExperimentConfig {
            replications: 0,
            ..base.clone()
        },
    ] {
        assert!(run_mc(&bad).is_err());
    }
}
