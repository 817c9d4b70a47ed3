use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use robust_qda::qda::class_model;
use robust_qda::rng::mvn_sample;
use robust_qda::sim::{generate, toy_dataset, Preset, Scenario};
use robust_qda::{
    classify, DataMatrix, FitConfig, LabeledDataset, LocationScatter, Mode, QdaModel, Rng,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-qda"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv(path: &Path, x: &DataMatrix, labels: Option<&[String]>) {
    let mut text = (0..x.n_cols())
        .map(|j| format!("x{}", j + 1))
        .collect::<Vec<_>>()
        .join(",");
    if labels.is_some() {
        text.push_str(",class");
    }
    text.push('\n');
    for (i, row) in x.rows().enumerate() {
        text.push_str(
            &row.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        if let Some(l) = labels {
            text.push(',');
            text.push_str(&l[i]);
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn write_labeled(path: &Path, data: &LabeledDataset) {
    let labels: Vec<String> = data.labels.iter().map(|l| l.to_string()).collect();
    write_csv(path, &data.data, Some(&labels));
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no '{key}' in report"))
        .to_string()
}

fn gaussian(mu: &[f64], sigma: DMatrix<f64>, n: usize, seed: u64) -> DataMatrix {
    let ls = LocationScatter::new(DVector::from_row_slice(mu), sigma).unwrap();
    mvn_sample(&mut Rng::new(seed), &ls, n).unwrap()
}

/// Rebuilds a classifier from a model file using only the library API.
fn model_from_json(path: &Path) -> (QdaModel, serde_json::Value) {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let p = v["p"].as_u64().unwrap() as usize;
    let floats = |x: &serde_json::Value| -> Vec<f64> {
        x.as_array()
            .unwrap()
            .iter()
            .map(|f| f.as_f64().unwrap())
            .collect()
    };
    let classes = v["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            class_model(
                c["label"].as_u64().unwrap() as u32,
                DVector::from_vec(floats(&c["mu"])),
                DMatrix::from_row_slice(p, p, &floats(&c["sigma"])),
                c["prior"].as_f64().unwrap(),
            )
            .unwrap()
        })
        .collect();
    let mode: Mode = v["mode"].as_str().unwrap().parse().unwrap();
    let q = v["outlier_quantile"].as_f64().unwrap();
    let model = QdaModel::from_parts(mode, classes, q, FitConfig::default()).unwrap();
    (model, v)
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

#[test]
fn mcd_recovers_generating_volume() {
    let dir = Dir::new();
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let x = gaussian(&[1.0, -1.0], sigma.clone(), 4000, 1);
    let data = dir.path("x.csv");
    write_csv(&data, &x, None);
    let out = run(&["mcd", "--data", s(&data)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = String::from_utf8(out.stdout).unwrap();
    let det: f64 = report_value(&report, "det").parse().unwrap();
    let truth = sigma.determinant();
    assert!((det / truth - 1.0).abs() < 0.3, "det {det} vs {truth}");
    assert!(report.contains("block,size,log_det,kl,selected"));
}

#[test]
fn mcd_block_counts_agree_on_clean_data() {
    let dir = Dir::new();
    let x = gaussian(&[3.0, 0.0], DMatrix::identity(2, 2), 4000, 2);
    let data = dir.path("x.csv");
    write_csv(&data, &x, None);
    let mu = |q: &str| -> Vec<f64> {
        let out = run(&["mcd", "--data", s(&data), "--blocks", q]);
        assert!(out.status.success());
        let report = String::from_utf8(out.stdout).unwrap();
        assert_eq!(report_value(&report, "blocks"), q);
        report_value(&report, "mu")
            .split(' ')
            .map(|v| v.parse().unwrap())
            .collect()
    };
    let (a, b) = (mu("1"), mu("4"));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 0.05);
    }
}

#[test]
fn mcd_rejects_nan_cells_with_position() {
    let dir = Dir::new();
    let data = dir.path("bad.csv");
    let mut text = String::from("a,b\n");
    for i in 0..30 {
        if i == 6 {
            text.push_str("1.0,NaN\n");
        } else {
            text.push_str(&format!("{},{}\n", i, i * i % 7));
        }
    }
    fs::write(&data, text).unwrap();
    let out = run(&["mcd", "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 7") && err.contains("'b'"), "{err}");
}

#[test]
fn numeric_and_io_failures_have_their_own_exit_codes() {
    let dir = Dir::new();
    let data = dir.path("const.csv");
    let mut text = String::from("a,b\n");
    for i in 0..40 {
        text.push_str(&format!("{i},5\n"));
    }
    fs::write(&data, text).unwrap();
    let out = run(&["mcd", "--data", s(&data)]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&["mcd", "--data", s(&dir.path("missing.csv"))]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(&["mcd", "--data", s(&data), "--blocks", "zero"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trained_model_classifies_like_an_in_process_fit() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(3).unwrap();
    let data = dir.path("train.csv");
    write_labeled(&data, &train);
    let model = dir.path("model.json");
    let out = run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--seed",
        "9",
        "--out",
        s(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (loaded, json) = model_from_json(&model);
    assert_eq!(json["format_version"], 1);
    assert_eq!(json["G"], 2);
    assert_eq!(json["feature_names"], serde_json::json!(["x1", "x2"]));
    let config = FitConfig {
        seed: 9,
        ..FitConfig::default()
    };
    let direct = robust_qda::fit(&train, Mode::Robust, &config).unwrap();
    for (c, d) in json["classes"]
        .as_array()
        .unwrap()
        .iter()
        .zip(direct.classes())
    {
        assert_eq!(c["blocks"].as_u64().map(|b| b as usize), d.blocks);
    }
    let probe = gaussian(&[2.0, 0.0], DMatrix::identity(2, 2) * 16.0, 1000, 4);
    for row in probe.rows() {
        assert_eq!(
            classify(row, &loaded).unwrap(),
            classify(row, &direct).unwrap()
        );
    }
}

#[test]
fn label_gaps_are_rejected() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(3).unwrap();
    let labels: Vec<String> = train
        .labels
        .iter()
        .map(|&l| if l == 2 { "3" } else { "1" }.to_string())
        .collect();
    let data = dir.path("gap.csv");
    write_csv(&data, &train.data, Some(&labels));
    let out = run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--out",
        s(&dir.path("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels must be 1..G contiguous"));
    assert!(!dir.path("m.json").exists());
}

#[test]
fn string_labels_round_trip_through_predictions() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(3).unwrap();
    let labels: Vec<String> = train
        .labels
        .iter()
        .map(|&l| if l == 1 { "pos" } else { "neg" }.to_string())
        .collect();
    let data = dir.path("named.csv");
    write_csv(&data, &train.data, Some(&labels));
    let model = dir.path("m.json");
    let out = run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--mode",
        "classical",
        "--out",
        s(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pred = dir.path("pred.csv");
    assert!(run(&[
        "predict",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--out",
        s(&pred)
    ])
    .status
    .success());
    let text = fs::read_to_string(&pred).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "row,predicted,min_rd,score_neg,score_pos"
    );
    let agree = text
        .lines()
        .skip(1)
        .zip(&labels)
        .filter(|(line, l)| line.split(',').nth(1) == Some(l.as_str()))
        .count();
    assert!(agree > 150);
}

#[test]
fn priors_of_the_clean_reference_scenario() {
    let dir = Dir::new();
    let sc = Scenario::preset(Preset::Clean, 0.01, 5).unwrap();
    let (train, _) = generate(&sc, &mut Rng::new(5)).unwrap();
    let data = dir.path("clean.csv");
    write_labeled(&data, &train);
    let model = dir.path("m.json");
    let out = run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--out",
        s(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, json) = model_from_json(&model);
    for (c, want) in json["classes"]
        .as_array()
        .unwrap()
        .iter()
        .zip([0.25, 0.35, 0.40])
    {
        let prior = c["prior"].as_f64().unwrap();
        assert!((prior - want).abs() < 0.01, "prior {prior} vs {want}");
    }
}

#[test]
fn predict_marks_far_points_as_class_zero() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(3).unwrap();
    let data = dir.path("train.csv");
    write_labeled(&data, &train);
    let model = dir.path("m.json");
    assert!(run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--out",
        s(&model)
    ])
    .status
    .success());
    let query = dir.path("q.csv");
    fs::write(&query, "x2,x1\n1,0\n-50,80\n").unwrap();
    let pred = dir.path("p.csv");
    let out = run(&[
        "predict",
        "--model",
        s(&model),
        "--data",
        s(&query),
        "--out",
        s(&pred),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&pred).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,predicted,min_rd,score_1,score_2");
    assert!(lines[1].starts_with("0,1,"));
    assert!(lines[2].starts_with("1,0,"));
}

#[test]
fn lbplot_outputs_for_the_toy_data() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(5).unwrap();
    let data = dir.path("toy.csv");
    write_labeled(&data, &train);
    let model = dir.path("m.json");
    assert!(run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--out",
        s(&model)
    ])
    .status
    .success());
    let (csv, svg) = (dir.path("lb.csv"), dir.path("lb.svg"));
    let out = run(&[
        "lbplot",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--class",
        "2",
        "--csv",
        s(&csv),
        "--svg",
        s(&svg),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let points = robust_qda::lbplot::parse_lb_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(points.len(), 100);
    let rd_cut = robust_qda::chi2_quantile(2, 0.99).unwrap().sqrt();
    let lb_cut = 2f64.ln().sqrt();
    let circles = points
        .iter()
        .filter(|p| p.overall_outlier && p.lb > lb_cut)
        .count();
    let dots = points
        .iter()
        .filter(|p| !p.overall_outlier && p.lb > lb_cut && p.rd_own > rd_cut)
        .count();
    assert_eq!((circles, dots), (8, 4));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.contains(&format!("RD cutoff {rd_cut:.4}")));
    assert!(text.contains("LB cutoff 0.8326"));

    let out = run(&[
        "lbplot",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--class",
        "7",
        "--csv",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lbplot_without_rows_of_the_class_fails() {
    let dir = Dir::new();
    let (train, _) = toy_dataset(5).unwrap();
    let data = dir.path("toy.csv");
    write_labeled(&data, &train);
    let model = dir.path("m.json");
    assert!(run(&[
        "train",
        "--data",
        s(&data),
        "--label-col",
        "class",
        "--out",
        s(&model)
    ])
    .status
    .success());
    let only_one = dir.path("one.csv");
    fs::write(&only_one, "x1,x2,class\n0,0,1\n1,1,1\n").unwrap();
    let out = run(&[
        "lbplot",
        "--model",
        s(&model),
        "--data",
        s(&only_one),
        "--label-col",
        "class",
        "--class",
        "2",
        "--csv",
        s(&dir.path("lb.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path("lb.csv").exists());
}

#[test]
fn simulate_writes_reproducible_reports() {
    let dir = Dir::new();
    let (a, b) = (dir.path("a"), dir.path("b"));
    for out in [&a, &b] {
        let res = run(&[
            "simulate",
            "--scenario",
            "both",
            "--scale",
            "0.002",
            "--reps",
            "2",
            "--out",
            s(out),
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        assert!(String::from_utf8_lossy(&res.stderr).contains("s per replication"));
    }
    for f in ["report.csv", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let mut reader = csv::Reader::from_path(a.join("report.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["method", "metric", "row", "column", "mean", "sd"]
    );
    let mut rows: Vec<String> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[0] == "robust" && &r[1] == "confusion")
        .map(|r| r[2].to_string())
        .collect();
    rows.dedup();
    assert_eq!(rows.len(), 12);
    assert!(rows.contains(&"pi_{2,0}".to_string()));
}

#[test]
fn simulate_reads_scenario_files() {
    let dir = Dir::new();
    let file = dir.path("sc.txt");
    fs::write(
        &file,
        "name = small\ndims = 2\nclasses = 2\nseed = 4\neps_label = 0.1\neps_meas = 0\n\
         class.1.n = 300\nclass.1.mu = 0 0\nclass.1.sigma_diag = 1 1\n\
         class.2.n = 300\nclass.2.mu = 6 0\nclass.2.sigma_diag = 1 2\n",
    )
    .unwrap();
    let out = dir.path("o");
    let res = run(&[
        "simulate",
        "--scenario",
        s(&file),
        "--reps",
        "1",
        "--methods",
        "robust",
        "--out",
        s(&out),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.starts_with("Scenario: small"));
    assert!(!text.contains("classical"));

    let res = run(&[
        "simulate",
        "--scenario",
        s(&file),
        "--scale",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["simulate", "--scenario", "nonsense", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
}
