use std::path::Path;
use std::process::{Command, Output};

use driftlab::datamodel::StreamConfig;
use driftlab::evaluators::{parse_scores, Evaluator};
use driftlab::generator::StreamGenerator;
use driftlab::learners::{GaussianNb, Learner};
use driftlab::metrics::Metric;
use tempfile::TempDir;

fn driftlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlab")).args(args).current_dir(dir).output().expect("spawn driftlab")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const EXPERIMENT: &str = r#"
metrics = ["accuracy", "precision"]

[stream]
n_chunks = 100
n_drifts = 1

[[classifiers]]
name = "gnb"
kind = "gnb"

[output]
scores = "scores.csv"
plot = "scores.svg"
"#;

#[test]
fn generate_writes_every_row_deterministically() {
    let dir = TempDir::new().unwrap();
    let args = ["generate", "--n-chunks", "100", "--chunk-size", "250", "--n-drifts", "1", "--seed", "42", "-o"];
    let first = driftlab(&[&args[..], &["a.arff"]].concat(), dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("rows: 25000"));
    let text = std::fs::read_to_string(dir.path().join("a.arff")).unwrap();
    let data = text.split("@data\n").nth(1).unwrap();
    assert_eq!(data.lines().count(), 25_000);

    let second = driftlab(&[&args[..], &["b.arff"]].concat(), dir.path());
    assert!(second.status.success());
    assert_eq!(std::fs::read(dir.path().join("a.arff")).unwrap(), std::fs::read(dir.path().join("b.arff")).unwrap());
}

#[test]
fn generate_reports_per_class_totals_and_csv() {
    let dir = TempDir::new().unwrap();
    let o = driftlab(&["generate", "--n-chunks", "4", "--chunk-size", "50", "--format", "csv", "-o", "s.out"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("n_chunks: 4") && out.contains("chunk_size: 50") && out.contains("class 1:"));
    let text = std::fs::read_to_string(dir.path().join("s.out")).unwrap();
    assert!(text.starts_with("f0,f1,"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn invalid_weights_exit_with_status_two() {
    let dir = TempDir::new().unwrap();
    let o = driftlab(&["generate", "--weights", "0.5,0.6", "-o", "w.arff"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sum to 1"), "{}", stderr(&o));
    assert!(!dir.path().join("w.arff").exists());
}

fn inspect_ratios(dir: &Path, file: &str, chunk_size: &str) -> Vec<f64> {
    let o = driftlab(&["inspect", file, "--chunk-size", chunk_size], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
        .lines()
        .skip(1)
        .filter(|l| !l.trim_start().starts_with("total"))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn inspect_shows_balance_and_static_imbalance() {
    let dir = TempDir::new().unwrap();
    let gen = |extra: &[&str], out: &str| {
        let o = driftlab(&[&["generate", "--n-chunks", "10", "--chunk-size", "1000"], extra, &["-o", out]].concat(), dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    };
    gen(&[], "balanced.arff");
    gen(&["--weights", "0.1,0.9"], "skewed.csv");
    let balanced = inspect_ratios(dir.path(), "balanced.arff", "1000");
    assert_eq!(balanced.len(), 10);
    assert!(balanced.iter().all(|r| (1.0..1.25).contains(r)), "{balanced:?}");
    let skewed = inspect_ratios(dir.path(), "skewed.csv", "1000");
    assert!(skewed.iter().all(|r| (6.5..12.0).contains(r)), "{skewed:?}");
}

#[test]
fn inspect_truncated_file_fails_with_line_number() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("t.arff"), "@relation t\n@attribute a numeric\n@attribute class {0,1}\n@data\n1,0\n2\n")
        .unwrap();
    let o = driftlab(&["inspect", "t.arff"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    std::fs::write(dir.path().join("h.arff"), "@relation t\n@attribute a numeric\n@attribute class {0,1}\n").unwrap();
    let o = driftlab(&["inspect", "h.arff"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("@data"), "{}", stderr(&o));
}

#[test]
fn run_writes_scores_and_plot_matching_the_library() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("exp.toml"), EXPERIMENT).unwrap();
    let o = driftlab(&["run", "exp.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert_eq!(csv.lines().count(), 199);
    let svg = std::fs::read_to_string(dir.path().join("scores.svg")).unwrap();
    assert_eq!(svg.matches("class=\"panel\"").count(), 2);
    assert!(svg.contains(">accuracy<") && svg.contains(">precision<"));

    let from_cli = parse_scores(csv.as_bytes()).unwrap();
    let cfg = StreamConfig { n_chunks: 100, n_drifts: 1, ..Default::default() };
    let mut learners: Vec<Box<dyn Learner>> = vec![Box::new(GaussianNb::new())];
    let direct = Evaluator::test_then_train(vec![Metric::Accuracy, Metric::Precision])
        .process(StreamGenerator::new(cfg).unwrap(), &mut learners)
        .unwrap();
    assert!(from_cli.max_abs_diff(&direct).unwrap() <= 1e-9);
}

#[test]
fn run_with_two_classifiers_and_prequential_protocol() {
    let dir = TempDir::new().unwrap();
    let config = r#"
metrics = ["balanced_accuracy"]
[stream]
n_chunks = 20
chunk_size = 100
[[classifiers]]
name = "plain"
kind = "gnb"
[[classifiers]]
name = "pool"
kind = "wae"
max_pool_size = 4
[protocol]
kind = "prequential"
window_size = 300
"#;
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let o = driftlab(&["run", "exp.toml", "-o", "out.csv", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(csv.contains("\nplain,") && csv.contains("\npool,"));
    assert_eq!(csv.lines().count(), 1 + 2 * 19);
}

#[test]
fn run_rejects_unknown_names_with_status_two() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("exp.toml"), EXPERIMENT).unwrap();
    let o = driftlab(&["run", "exp.toml", "--set", "metrics=[\"auc\"]"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("valid metrics: accuracy"), "{}", stderr(&o));

    let o = driftlab(&["run", "exp.toml", "--set", "classifiers[0].kind=forest"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("valid kinds"), "{}", stderr(&o));

    let o = driftlab(&["run", "exp.toml", "--set", "stream.colour=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("scores.csv").exists());
}

#[test]
fn learner_fault_reports_coordinates() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[stream]
n_chunks = 5
n_classes = 3
n_informative = 3
[[classifiers]]
kind = "gnb"
[[classifiers]]
kind = "oob"
"#;
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let o = driftlab(&["run", "exp.toml", "-o", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("classifier 1") && err.contains("chunk 0"), "{err}");
}

#[test]
fn run_reads_a_stream_file() {
    let dir = TempDir::new().unwrap();
    let o = driftlab(&["generate", "--n-chunks", "6", "--chunk-size", "100", "-o", "s.arff"], dir.path());
    assert!(o.status.success());
    let config = "[stream]\npath = \"s.arff\"\nchunk_size = 100\n[[classifiers]]\nkind = \"sea\"\n";
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let o = driftlab(&["run", "exp.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 1 + 5 * 2);
    assert!(csv.contains("sea,5,balanced_accuracy,"));
}
