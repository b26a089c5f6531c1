use std::sync::Mutex;

use backdoor::bench::{
    export_plot_data, run_benchmark, run_benchmark_observed, BenchmarkReport, GraphKind, Method, ScenarioConfig, Stage,
};
use backdoor::discovery::{Lambda2Rule, TuningGrid};
use backdoor::scm::BlockDims;

fn small() -> ScenarioConfig {
    ScenarioConfig {
        block_dims: BlockDims::uniform(2),
        sigma_x2: vec![0.6],
        omega: vec![0.5],
        n_total: 600,
        n_settings: 3,
        methods: Method::ALL.to_vec(),
        discovery: backdoor::discovery::DiscoveryConfig { max_iters: 100, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn replay_is_byte_identical() {
    let cfg = small();
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&ScenarioConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap()).unwrap();
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
    assert!(a.rows.iter().all(|r| r.status == "ok"), "{:?}", a.rows);
    assert!(a.rows.iter().all(|r| r.config_hash == cfg.hash()));
}

#[test]
fn full_grid_shape() {
    let cfg = ScenarioConfig { block_dims: BlockDims::uniform(1), n_total: 200, methods: vec![Method::Marginal, Method::Allz], ..Default::default() };
    let r = run_benchmark(&cfg).unwrap();
    for m in [Method::Marginal, Method::Allz] {
        assert_eq!(r.rows.iter().filter(|row| row.method == m).count(), 100);
    }
    let ids: std::collections::BTreeSet<_> = r.rows.iter().map(|row| row.scenario_id.clone()).collect();
    assert_eq!(ids.len(), 4);
}

#[test]
fn no_leakage_between_splits() {
    for split in [vec![0.5, 0.5], vec![0.4, 0.3, 0.3]] {
        let cfg = ScenarioConfig { split: split.clone(), ..small() };
        let n_train = (cfg.n_total as f64 * split[0]).floor() as usize;
        let n_test_start = if split.len() == 3 { n_train + (cfg.n_total as f64 * split[1]).floor() as usize } else { n_train };
        let seen = Mutex::new(Vec::new());
        run_benchmark_observed(&cfg, &|a| {
            seen.lock().unwrap().push((a.method, a.stage, a.row_ids.to_vec()));
        })
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert!(seen.iter().any(|(m, s, _)| *m == Method::Ours && *s == Stage::Tune));
        for (method, stage, rows) in seen {
            match stage {
                Stage::Select => assert!(rows.iter().all(|&r| r < n_train), "{method:?} selected on non-train rows"),
                Stage::Tune => assert!(rows.iter().all(|&r| r < n_test_start), "{method:?} tuned on test rows"),
                Stage::Estimate => {
                    assert!(rows.iter().all(|&r| r >= n_test_start));
                    assert_eq!(rows.len(), cfg.n_total - n_test_start);
                }
            }
        }
    }
}

#[test]
fn adding_a_method_keeps_other_rows() {
    let base = ScenarioConfig { methods: vec![Method::Marginal, Method::Allz], ..small() };
    let more = ScenarioConfig { methods: vec![Method::Marginal, Method::Allz, Method::Entner], ..small() };
    let (a, b) = (run_benchmark(&base).unwrap(), run_benchmark(&more).unwrap());
    for row in &a.rows {
        let twin = b.rows.iter().find(|r| r.setting == row.setting && r.method == row.method).unwrap();
        assert_eq!(twin.ate_estimate.to_bits(), row.ate_estimate.to_bits());
        assert_eq!(twin.seed, row.seed);
    }
}

#[test]
fn custom_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(
        &path,
        r#"{"nodes":[{"id":"w","role":"W"},{"id":"z","role":"Z"},{"id":"x","role":"X"},{"id":"y","role":"Y"}],
            "edges":[["w","x"],["z","x"],["z","y"],["x","y"]]}"#,
    )
    .unwrap();
    let cfg = ScenarioConfig { graph_kind: GraphKind::CustomFile(path), n_total: 4000, n_settings: 4, ..small() };
    let r = run_benchmark(&cfg).unwrap();
    assert_eq!(r.rows.len(), 4 * 4);
    for row in r.rows.iter().filter(|r| r.method == Method::Entner || r.method == Method::Allz) {
        assert!(row.ate_error < 0.1, "{row:?}");
    }
    let missing = ScenarioConfig { graph_kind: GraphKind::CustomFile(dir.path().join("nope.json")), ..small() };
    assert!(run_benchmark(&missing).is_err());
}

#[test]
fn plot_exports() {
    let dir = tempfile::tempdir().unwrap();
    let empty = BenchmarkReport::read_csv(&b""[..], Lambda2Rule::RaiseOnRejection).unwrap();
    let files = export_plot_data(&empty, dir.path(), None).unwrap();
    assert_eq!(std::fs::read_to_string(&files.histogram).unwrap(), "scenario_id,method,bin_lo,bin_hi,count\n");
    assert_eq!(std::fs::read_to_string(&files.scatter).unwrap(), "scenario_id,setting,baseline,baseline_error,ours_error\n");

    let cfg = ScenarioConfig {
        n_settings: 25,
        methods: vec![Method::Ours, Method::Allz, Method::Marginal],
        tuning: TuningGrid { lambda1: vec![0.1], eta: vec![0.1], ..Default::default() },
        ..small()
    };
    let report = run_benchmark(&cfg).unwrap();
    let files = export_plot_data(&report, dir.path(), None).unwrap();
    let scatter = std::fs::read_to_string(&files.scatter).unwrap();
    for baseline in ["allz", "marginal"] {
        assert_eq!(scatter.lines().filter(|l| l.split(',').nth(2) == Some(baseline)).count(), 25);
    }
    let hist = std::fs::read_to_string(&files.histogram).unwrap();
    for m in ["ours", "allz", "marginal"] {
        let total: usize = hist
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(1) == Some(m))
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 25);
    }
    // round trip through the CSV gives the same plot files
    let back = BenchmarkReport::read_csv(report.to_csv_string().unwrap().as_bytes(), Lambda2Rule::RaiseOnRejection).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let again = export_plot_data(&back, dir2.path(), None).unwrap();
    assert_eq!(std::fs::read(&files.scatter).unwrap(), std::fs::read(&again.scatter).unwrap());
    assert_eq!(std::fs::read(&files.histogram).unwrap(), std::fs::read(&again.histogram).unwrap());
}
