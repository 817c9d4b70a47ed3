use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use robust_qda::lbplot::{lb_csv_string, lb_points, lb_svg_string};
use robust_qda::output::{format_csv, write_atomic};
use robust_qda::qda::classify_batch;
use robust_qda::rtmcd::default_block_count;
use robust_qda::sim::{
    benchmark_text, parse_scenario, report_csv, report_text, run_study, Preset, Scenario,
    DEFAULT_SCALE,
};
use robust_qda::{fit, rt_detmcd, DataMatrix, FitConfig, LabeledDataset, Mode, Rng};

use crate::data::{labeled, read_table, Table};
use crate::error::{CliError, CliResult};
use crate::model_file::{self, SavedModel};

pub struct McdArgs {
    pub data: PathBuf,
    pub label_col: Option<String>,
    pub h_frac: f64,
    pub blocks: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub label_col: String,
    pub mode: Mode,
    pub h_frac: f64,
    pub blocks: Option<usize>,
    pub seed: u64,
    pub outlier_quantile: f64,
    pub out: PathBuf,
}

pub struct LbplotArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub label_col: String,
    pub class: String,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

pub struct SimulateArgs {
    pub scenario: String,
    pub scale: Option<f64>,
    pub seed: Option<u64>,
    pub reps: usize,
    pub methods: Vec<Mode>,
    pub out: PathBuf,
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| match e {
        robust_qda::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    })
}

fn check_fraction(h_frac: f64) -> CliResult<()> {
    if !(h_frac > 0.0 && h_frac <= 1.0) {
        return Err(CliError::invalid(format!(
            "--h-frac must lie in (0, 1], got {h_frac}"
        )));
    }
    Ok(())
}

fn vector_text(values: impl Iterator<Item = f64>) -> String {
    values.map(format_csv).collect::<Vec<_>>().join(" ")
}

pub fn mcd(args: &McdArgs) -> CliResult<String> {
    check_fraction(args.h_frac)?;
    let table = read_table(&args.data)?;
    let exclude = match &args.label_col {
        Some(name) => Some(table.column_index(name)?),
        None => None,
    };
    let cols = table.feature_columns(exclude);
    let x = table.features(&cols)?;
    let (n, p) = (x.n_rows(), x.n_cols());
    if n < 2 * (p + 1) {
        return Err(CliError::invalid(format!(
            "need at least {} rows for {p} columns, found {n}",
            2 * (p + 1)
        )));
    }
    let q = args.blocks.unwrap_or_else(|| default_block_count(n, p));
    let fit = rt_detmcd(&x, args.h_frac, q, &mut Rng::new(args.seed))?;

    let mut s = String::new();
    let names: Vec<&str> = cols.iter().map(|&j| table.header[j].as_str()).collect();
    let _ = writeln!(s, "columns = {}", names.join(" "));
    let _ = writeln!(s, "n = {n}");
    let _ = writeln!(s, "p = {p}");
    let _ = writeln!(s, "h_frac = {}", format_csv(args.h_frac));
    let _ = writeln!(s, "blocks = {}", fit.diagnostics.q);
    let _ = writeln!(s, "seed = {}", args.seed);
    let _ = writeln!(s, "inliers = {}", fit.diagnostics.inliers);
    let _ = writeln!(s, "mu = {}", vector_text(fit.estimate.mu().iter().copied()));
    for i in 0..p {
        let row = fit.estimate.sigma().row(i);
        let _ = writeln!(s, "sigma[{}] = {}", i + 1, vector_text(row.iter().copied()));
    }
    let _ = writeln!(
        s,
        "det = {}",
        format_csv(fit.estimate.sigma().determinant())
    );
    let _ = writeln!(s, "raw_mu = {}", vector_text(fit.raw.mu().iter().copied()));
    let _ = writeln!(s, "raw_det = {}", format_csv(fit.raw.sigma().determinant()));
    let _ = writeln!(s, "pooled_rows = {}", fit.diagnostics.pooled_count);
    let _ = writeln!(s, "block,size,log_det,kl,selected");
    let d = &fit.diagnostics;
    for b in 0..d.q {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            b + 1,
            d.block_sizes[b],
            format_csv(d.block_log_dets[b]),
            format_csv(d.kl[b]),
            d.selected.contains(&b)
        );
    }
    if let Some(out) = &args.out {
        write_file(out, &s)?;
    }
    Ok(s)
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    check_fraction(args.h_frac)?;
    if !(args.outlier_quantile > 0.0 && args.outlier_quantile < 1.0) {
        return Err(CliError::invalid("--outlier-quantile must lie in (0, 1)"));
    }
    let table = read_table(&args.data)?;
    let (data, labels, names) = labeled(&table, &args.label_col)?;
    let config = FitConfig {
        h_frac: args.h_frac,
        blocks: args.blocks,
        seed: args.seed,
        outlier_quantile: args.outlier_quantile,
    };
    let model = fit(&data, args.mode, &config)?;
    model_file::save(&args.out, &model, &labels, &names)
}

/// Feature matrix in the model's column order.
fn model_features(table: &Table, saved: &SavedModel) -> CliResult<DataMatrix> {
    let cols = saved
        .feature_names
        .iter()
        .map(|name| table.column_index(name))
        .collect::<CliResult<Vec<_>>>()?;
    table.features(&cols)
}

pub fn predict(model: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let saved = model_file::load(model)?;
    let table = read_table(data)?;
    let x = model_features(&table, &saved)?;
    let preds = classify_batch(&x, &saved.model)?;
    let mut s = String::from("row,predicted,min_rd");
    for name in &saved.labels.names {
        let _ = write!(s, ",score_{name}");
    }
    s.push('\n');
    for (i, pr) in preds.iter().enumerate() {
        let _ = write!(
            s,
            "{i},{},{}",
            saved.labels.name(pr.label),
            format_csv(pr.min_rd)
        );
        for v in &pr.scores {
            let _ = write!(s, ",{}", format_csv(*v));
        }
        s.push('\n');
    }
    write_file(out, &s)
}

pub fn lbplot(args: &LbplotArgs) -> CliResult<()> {
    let saved = model_file::load(&args.model)?;
    let table = read_table(&args.data)?;
    let x = model_features(&table, &saved)?;
    let lj = table.column_index(&args.label_col)?;
    let labels = saved.labels.encode(&table.column_values(lj))?;
    let g = match saved.labels.code(&args.class) {
        Some(g) => g,
        None => {
            return Err(CliError::invalid(format!(
                "class '{}' is not one of the model's classes ({})",
                args.class,
                saved.labels.names.join(", ")
            )))
        }
    };
    let data = LabeledDataset::new(x, labels)?;
    let spec = lb_points(&saved.model, &data, g)?;
    write_file(&args.csv, &lb_csv_string(&spec))?;
    if let Some(svg) = &args.svg {
        write_file(svg, &lb_svg_string(&spec))?;
    }
    Ok(())
}

fn resolve_scenario(args: &SimulateArgs) -> CliResult<Scenario> {
    let path = Path::new(&args.scenario);
    if path.is_file() {
        if args.scale.is_some() {
            return Err(CliError::invalid(
                "--scale applies to presets; set class sizes in the scenario file",
            ));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut sc = parse_scenario(&text)?;
        if let Some(seed) = args.seed {
            sc.seed = seed;
        }
        return Ok(sc);
    }
    let preset: Preset = args.scenario.parse().map_err(|_| {
        CliError::invalid(format!(
            "--scenario '{}' is neither a file nor a preset (clean, label, measurement, both)",
            args.scenario
        ))
    })?;
    Ok(Scenario::preset(
        preset,
        args.scale.unwrap_or(DEFAULT_SCALE),
        args.seed.unwrap_or(0),
    )?)
}

/// Writes `report.csv` and `report.txt` into the output directory and
/// returns the timing summary.
pub fn simulate(args: &SimulateArgs) -> CliResult<String> {
    let sc = resolve_scenario(args)?;
    let report = run_study(&sc, args.reps, &args.methods)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_file(&args.out.join("report.csv"), &report_csv(&report))?;
    write_file(&args.out.join("report.txt"), &report_text(&report))?;
    Ok(benchmark_text(&report))
}
