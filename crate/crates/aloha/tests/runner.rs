use aloha::config::{
    ExperimentConfig, FiniteModelConfig, InstrumentationConfig, PacketSpec, Quantity,
    SlottedModelConfig, SlottedSampler, UserCountSpec,
};
use aloha::experiment::run_experiment;
use aloha::output::read_ccdf;
use aloha_core::tail::empirical_ccdf;

fn finite(users: usize, replications: u64, successes: u64) -> ExperimentConfig {
    let model = FiniteModelConfig {
        users,
        lambda: 1.0,
        nu: 0.5,
        packet: PacketSpec::Exponential { rate: 1.0 },
    };
    ExperimentConfig::finite(model, replications, successes, 11)
}

fn slotted() -> ExperimentConfig {
    let model = SlottedModelConfig {
        nu: std::f64::consts::LN_2,
        lambda: None,
        allow_unequal_rates: false,
        users: UserCountSpec::Geometric {
            mean: 3.0,
            support_min: None,
            cap: Some(8),
        },
    };
    ExperimentConfig::slotted(model, 3, 500, 5)
}

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn column(samples: &str, name: &str) -> Vec<String> {
    let mut lines = samples.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

#[test]
fn one_row_per_success() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&finite(1, 1, 10), dir.path()).unwrap();
    let text = read(&r.samples_path);
    assert_eq!(text.lines().next().unwrap(), "replicate,m,user,T,N");
    assert_eq!(text.lines().count(), 11);
    assert_eq!(r.rows, 10);
    // A lone user never collides, so every packet goes out in one attempt.
    assert!(column(&text, "N").iter().all(|n| n == "1"));
}

#[test]
fn reruns_are_byte_identical() {
    for config in [finite(3, 4, 200), slotted()] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_experiment(&config, a.path()).unwrap();
        let rb = run_experiment(&config, b.path()).unwrap();
        assert_eq!(read(&ra.samples_path), read(&rb.samples_path));
        assert_eq!(read(&ra.ccdf_path), read(&rb.ccdf_path));
        assert_eq!(read(&ra.fit_path), read(&rb.fit_path));
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let mut one = finite(3, 4, 300);
    one.workers = Some(1);
    let mut four = one.clone();
    four.workers = Some(4);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&one, a.path()).unwrap();
    let rb = run_experiment(&four, b.path()).unwrap();
    assert_eq!(read(&ra.samples_path), read(&rb.samples_path));
    assert_eq!(read(&ra.ccdf_path), read(&rb.ccdf_path));
    assert_eq!(ra.fit, rb.fit);
}

#[test]
fn warmup_rows_are_left_out() {
    let mut config = finite(2, 3, 50);
    config.warmup = 20;
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&config, dir.path()).unwrap();
    let text = read(&r.samples_path);
    let m: Vec<u64> = column(&text, "m")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(m.len(), 3 * 30);
    assert!(m.iter().all(|&i| i > 20 && i <= 50));
    assert_eq!(
        column(&text, "replicate")
            .iter()
            .filter(|r| *r == "2")
            .count(),
        30
    );
}

#[test]
fn pooled_ccdf_is_the_ccdf_of_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = finite(3, 5, 100);
    config.fit_quantity = Quantity::N;
    let r = run_experiment(&config, dir.path()).unwrap();
    let text = read(&r.samples_path);
    let mut values: Vec<f64> = column(&text, "N")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    // Order of the concatenation is irrelevant.
    values.reverse();
    let expected = empirical_ccdf(&values).unwrap();
    let written = read_ccdf(&r.ccdf_path).unwrap();
    assert_eq!(written.x, expected.x);
    assert_eq!(written.survival, expected.survival);
}

#[test]
fn instrumented_columns_and_summary() {
    let mut config = finite(2, 2, 400);
    config.instrumentation = InstrumentationConfig {
        full_state: true,
        min_residual: true,
    };
    config.fit_quantity = Quantity::Nf;
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&config, dir.path()).unwrap();
    let text = read(&r.samples_path);
    assert_eq!(text.lines().next().unwrap(), "replicate,m,user,T,N,Nf,Lmin");
    let summary: serde_json::Value = serde_json::from_str(&read(&r.summary_path)).unwrap();
    let unresolved = summary["unresolved_nf"].as_u64().unwrap() as usize;
    let empty = column(&text, "Nf").iter().filter(|v| v.is_empty()).count();
    assert_eq!(unresolved, empty);
    assert_eq!(r.fit.sample_count, 800 - empty);
    assert_eq!(r.fit.quantity.as_deref(), Some("Nf"));
    assert!(summary["reference_slopes"]["steady"].is_number());
    assert_eq!(summary["stability"]["verdict"], "PositiveThroughput");
}

#[test]
fn slotted_outputs() {
    let mut config = slotted();
    config.sampler = SlottedSampler::Conditional;
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&config, dir.path()).unwrap();
    let text = read(&r.samples_path);
    assert_eq!(text.lines().next().unwrap(), "replicate,m,M_drawn,T,N");
    for line in text.lines().skip(1) {
        let f: Vec<u64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((1..=8).contains(&f[2]));
        assert!(f[4] >= 1 && f[4] <= f[3]);
    }
    // A capped user count has no power-law tail to compare against.
    assert_eq!(r.fit.reference_kind, None);
}

#[test]
fn transient_reference_for_single_success_runs() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&finite(3, 50, 1), dir.path()).unwrap();
    assert_eq!(r.fit.reference_kind.as_deref(), Some("transient"));
}

#[test]
fn event_budget_is_a_numeric_error() {
    let mut config = finite(3, 1, 1_000_000);
    config.max_events = Some(100);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_experiment(&config, dir.path()).unwrap_err().exit_code(),
        3
    );
}

#[test]
fn fig5_preset_writes_analytic_curves_and_horizons() {
    use aloha::presets::{reproduce, Figure, Scale};
    let dir = tempfile::tempdir().unwrap();
    let r = reproduce(Figure::Fig5, Scale::Desk, dir.path(), Some(1)).unwrap();
    assert_eq!(r.runs.len(), 6);
    for run in &r.runs {
        let analytic = read_ccdf(&run.result.out_dir.join("analytic_ccdf.csv")).unwrap();
        assert_eq!(analytic.survival[0], 1.0);
        assert_eq!(run.result.rows, 100_000);
    }
    let h: Vec<u64> = r.horizons.iter().map(|&(_, h)| h).collect();
    assert!(h.windows(2).all(|w| w[1] > w[0]), "{h:?}");
    let summary: serde_json::Value = serde_json::from_str(&read(&r.summary_path)).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 6);
    assert_eq!(summary["horizons"]["caps"].as_array().unwrap().len(), 5);
}
