//! Simulation harness: class-conditional Gaussian scenarios with label noise
//! and measurement noise, extended confusion matrices, covariance KL,
//! determinant and α reporting over seeded replications.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, LocationScatter};
use crate::matrix::{DataMatrix, LabeledDataset};
use crate::output::format_csv;
use crate::qda::{classify_batch, fit, FitConfig, Mode, QdaModel};
use crate::rng::{derive_seed, mvn_sample, Rng};
use crate::special::chi2_quantile;

/// Class sizes of the full-size reference study; presets multiply these by the scale.
pub const REFERENCE_CLASS_SIZES: [usize; 3] = [250_000, 350_000, 400_000];

/// Default preset scale (n = 10⁴).
pub const DEFAULT_SCALE: f64 = 0.01;

#[derive(Debug, Clone)]
pub enum Contamination {
    /// Tight cluster drawn from a normal distribution.
    Cluster(LocationScatter),
    /// Every contaminated row equals this point.
    Point(DVector<f64>),
    /// Normal distribution with a shifted center.
    Shift(LocationScatter),
    /// No contamination model; only valid without measurement noise.
    None,
}

impl Contamination {
    pub fn kind(&self) -> &'static str {
        match self {
            Contamination::Cluster(_) => "cluster",
            Contamination::Point(_) => "point",
            Contamination::Shift(_) => "shift",
            Contamination::None => "none",
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Contamination::Cluster(ls) | Contamination::Shift(ls) => Some(ls.dim()),
            Contamination::Point(x) => Some(x.len()),
            Contamination::None => None,
        }
    }

    fn draw(&self, rng: &mut Rng, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        match self {
            Contamination::Cluster(ls) | Contamination::Shift(ls) => {
                Ok(mvn_sample(rng, ls, n)?.as_slice().to_vec())
            }
            Contamination::Point(x) => Ok(x.iter().copied().cycle().take(n * x.len()).collect()),
            Contamination::None => Err(Error::ConfigError(
                "measurement noise requested without a contamination model".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub n: usize,
    pub dist: LocationScatter,
    pub contamination: Contamination,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub classes: Vec<ClassSpec>,
    pub eps_label: f64,
    pub eps_meas: f64,
    pub seed: u64,
    /// Fraction of the reference sample size, reported alongside results.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Clean,
    Label,
    Measurement,
    Both,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Preset::Clean),
            "label" => Ok(Preset::Label),
            "measurement" => Ok(Preset::Measurement),
            "both" => Ok(Preset::Both),
            other => Err(Error::ConfigError(format!(
                "unknown preset '{other}' (expected clean, label, measurement or both)"
            ))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Clean => "clean",
            Preset::Label => "label",
            Preset::Measurement => "measurement",
            Preset::Both => "both",
        }
    }

    /// (label noise, measurement noise).
    pub fn noise(self) -> (f64, f64) {
        match self {
            Preset::Clean => (0.0, 0.0),
            Preset::Label => (0.2, 0.0),
            Preset::Measurement => (0.0, 0.2),
            Preset::Both => (0.1, 0.1),
        }
    }
}

fn unit(p: usize, k: usize, v: f64) -> DVector<f64> {
    let mut e = DVector::zeros(p);
    e[k] = v;
    e
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

impl Scenario {
    /// Three 5-dimensional classes; class 1 contaminated by a cluster,
    /// class 2 by a point mass and class 3 by a mean shift.
    pub fn preset(preset: Preset, scale: f64, seed: u64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::ConfigError(format!(
                "scale must lie in (0, 1], got {scale}"
            )));
        }
        let s1 = DMatrix::identity(5, 5);
        let s2 = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let s3 = diag(&[1.0, 1.0, 1.0, 5.0, 10.0]);
        let n = |k: usize| (REFERENCE_CLASS_SIZES[k] as f64 * scale).round() as usize;
        let classes = vec![
            ClassSpec {
                n: n(0),
                dist: LocationScatter::new(unit(5, 0, 6.0), s1.clone())?,
                contamination: Contamination::Cluster(LocationScatter::new(
                    unit(5, 0, -6.0),
                    s1 / 10.0,
                )?),
            },
            ClassSpec {
                n: n(1),
                dist: LocationScatter::new(unit(5, 2, 6.0), s2)?,
                contamination: Contamination::Point(DVector::from_vec(vec![
                    0.0, 0.0, -15.0, 0.0, 20.0,
                ])),
            },
            ClassSpec {
                n: n(2),
                dist: LocationScatter::new(unit(5, 4, 6.0), s3.clone())?,
                contamination: Contamination::Shift(LocationScatter::new(
                    DVector::from_vec(vec![14.0, 0.0, 0.0, 0.0, -6.0]),
                    s3,
                )?),
            },
        ];
        let (eps_label, eps_meas) = preset.noise();
        let sc = Scenario {
            name: preset.name().into(),
            classes,
            eps_label,
            eps_meas,
            seed,
            scale,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dist.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_total(&self) -> usize {
        self.classes.iter().map(|c| c.n).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::ConfigError(
                "a scenario needs at least 2 classes".into(),
            ));
        }
        let p = self.dim();
        for (g, c) in self.classes.iter().enumerate() {
            for d in [Some(c.dist.dim()), c.contamination.dim()]
                .into_iter()
                .flatten()
            {
                if d != p {
                    return Err(Error::ConfigError(format!(
                        "class {}: dimension {d}, expected {p}",
                        g + 1
                    )));
                }
            }
            if matches!(c.contamination, Contamination::None) && self.eps_meas > 0.0 {
                return Err(Error::ConfigError(format!(
                    "class {} needs a contamination model when eps_meas > 0",
                    g + 1
                )));
            }
            if c.n == 0 {
                return Err(Error::ConfigError(format!("class {} has n = 0", g + 1)));
            }
        }
        for (name, e) in [("eps_label", self.eps_label), ("eps_meas", self.eps_meas)] {
            if !(0.0..0.5).contains(&e) {
                return Err(Error::ConfigError(format!("{name} = {e} outside [0, 0.5)")));
            }
        }
        if self.eps_label + self.eps_meas >= 0.5 {
            return Err(Error::ConfigError(
                "eps_label + eps_meas must be below 0.5".into(),
            ));
        }
        Ok(())
    }
}

/// Parses the key-value scenario format.
///
/// One `key = value` per line, `#` starts a comment. Vectors are
/// whitespace-separated; full matrices list rows separated by `;`.
///
/// ```text
/// name = custom
/// dims = 2
/// classes = 2
/// seed = 7
/// scale = 1
/// eps_label = 0.1
/// eps_meas = 0.1
/// class.1.n = 200
/// class.1.mu = 0 0
/// class.1.sigma_diag = 1 1
/// class.1.contamination = point
/// class.1.contamination_mu = 8 8
/// class.2.n = 200
/// class.2.mu = 5 0
/// class.2.sigma = 1 0.3; 0.3 2
/// class.2.contamination = cluster
/// class.2.contamination_mu = -5 5
/// class.2.contamination_sigma_diag = 0.1 0.1
/// ```
///
/// `contamination` is `cluster`, `point` or `shift`; `point` takes only
/// `contamination_mu`. It may be omitted when `eps_meas` is 0.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::ConfigError(format!("line {}: expected 'key = value'", k + 1)))?;
        let key = key.trim().to_string();
        if kv
            .insert(key.clone(), (k + 1, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::ConfigError(format!(
                "line {}: duplicate key '{key}'",
                k + 1
            )));
        }
    }
    let used = std::cell::RefCell::new(Vec::<String>::new());
    let get = |key: &str| -> Option<(usize, String)> {
        used.borrow_mut().push(key.to_string());
        kv.get(key).cloned()
    };
    fn req(v: Option<(usize, String)>, key: &str) -> Result<(usize, String)> {
        v.ok_or_else(|| Error::ConfigError(format!("missing key '{key}'")))
    }
    fn num<T: std::str::FromStr>((line, v): &(usize, String), key: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::ConfigError(format!("line {line}: bad value for '{key}': '{v}'")))
    }
    fn vector((line, v): &(usize, String), key: &str, p: usize) -> Result<Vec<f64>> {
        let xs: Vec<f64> = v
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::ConfigError(format!("line {line}: bad number in '{key}'")))?;
        if xs.len() != p || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::ConfigError(format!(
                "line {line}: '{key}' needs {p} finite values, found {}",
                xs.len()
            )));
        }
        Ok(xs)
    }
    fn matrix((line, v): &(usize, String), key: &str, p: usize) -> Result<DMatrix<f64>> {
        let rows: Vec<&str> = v.split(';').collect();
        if rows.len() != p {
            return Err(Error::ConfigError(format!(
                "line {line}: '{key}' needs {p} rows, found {}",
                rows.len()
            )));
        }
        let mut m = DMatrix::zeros(p, p);
        for (i, r) in rows.iter().enumerate() {
            let xs = vector(&(*line, r.to_string()), key, p)?;
            for (j, x) in xs.into_iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    let dims: usize = num(&req(get("dims"), "dims")?, "dims")?;
    let g_count: usize = num(&req(get("classes"), "classes")?, "classes")?;
    if dims == 0 {
        return Err(Error::ConfigError("dims must be positive".into()));
    }
    let name = get("name").map(|v| v.1).unwrap_or_else(|| "custom".into());
    let seed = get("seed")
        .map(|v| num(&v, "seed"))
        .transpose()?
        .unwrap_or(0);
    let scale = get("scale")
        .map(|v| num(&v, "scale"))
        .transpose()?
        .unwrap_or(1.0);
    let eps_label = get("eps_label")
        .map(|v| num(&v, "eps_label"))
        .transpose()?
        .unwrap_or(0.0);
    let eps_meas = get("eps_meas")
        .map(|v| num(&v, "eps_meas"))
        .transpose()?
        .unwrap_or(0.0);

    let sigma_of = |prefix: &str| -> Result<DMatrix<f64>> {
        let full = format!("{prefix}sigma");
        let dg = format!("{prefix}sigma_diag");
        match (get(&full), get(&dg)) {
            (Some(v), None) => matrix(&v, &full, dims),
            (None, Some(v)) => Ok(diag(&vector(&v, &dg, dims)?)),
            (None, None) => Err(Error::ConfigError(format!("missing '{full}' or '{dg}'"))),
            (Some(_), Some(_)) => Err(Error::ConfigError(format!(
                "give only one of '{full}' and '{dg}'"
            ))),
        }
    };

    let mut classes = Vec::with_capacity(g_count);
    for g in 1..=g_count {
        let pre = format!("class.{g}.");
        let key = |k: &str| format!("{pre}{k}");
        let n: usize = num(&req(get(&key("n")), &key("n"))?, &key("n"))?;
        let mu = vector(&req(get(&key("mu")), &key("mu"))?, &key("mu"), dims)?;
        let sigma = sigma_of(&pre)?;
        let dist = LocationScatter::new(DVector::from_vec(mu), sigma)
            .map_err(|e| Error::ConfigError(format!("class {g} covariance: {e}")))?;
        let Some(kind) = get(&key("contamination")) else {
            classes.push(ClassSpec {
                n,
                dist,
                contamination: Contamination::None,
            });
            continue;
        };
        let cmu = DVector::from_vec(vector(
            &req(get(&key("contamination_mu")), &key("contamination_mu"))?,
            &key("contamination_mu"),
            dims,
        )?);
        let contamination = match kind.1.as_str() {
            "point" => Contamination::Point(cmu),
            k @ ("cluster" | "shift") => {
                let ls =
                    LocationScatter::new(cmu, sigma_of(&key("contamination_"))?).map_err(|e| {
                        Error::ConfigError(format!("class {g} contamination covariance: {e}"))
                    })?;
                if k == "cluster" {
                    Contamination::Cluster(ls)
                } else {
                    Contamination::Shift(ls)
                }
            }
            other => {
                return Err(Error::ConfigError(format!(
                    "line {}: unknown contamination '{other}'",
                    kind.0
                )))
            }
        };
        classes.push(ClassSpec {
            n,
            dist,
            contamination,
        });
    }
    let used = used.into_inner();
    if let Some(k) = kv.keys().find(|k| !used.contains(k)) {
        return Err(Error::ConfigError(format!(
            "line {}: unknown key '{k}'",
            kv[k].0
        )));
    }
    let sc = Scenario {
        name,
        classes,
        eps_label,
        eps_meas,
        seed,
        scale,
    };
    sc.validate()?;
    Ok(sc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseKind {
    Clean,
    Mislabeled,
    MeasurementNoise,
}

/// Ground truth of one generated row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubclassTag {
    pub origin: u32,
    pub given: u32,
    pub kind: NoiseKind,
}

impl SubclassTag {
    pub fn clean(origin: u32) -> Self {
        Self {
            origin,
            given: origin,
            kind: NoiseKind::Clean,
        }
    }

    pub fn is_noise(&self) -> bool {
        self.kind != NoiseKind::Clean
    }

    /// Subclass name: `pi_{g,g}` clean, `pi_{g,k}` relabelled to k, `pi_{g,0}` contaminated.
    pub fn name(&self) -> String {
        let second = match self.kind {
            NoiseKind::MeasurementNoise => 0,
            _ => self.given,
        };
        format!("pi_{{{},{}}}", self.origin, second)
    }

    /// Ordering of confusion rows: by origin, then clean, relabelled (by
    /// label), contaminated.
    fn sort_key(&self) -> (u32, u8, u32) {
        match self.kind {
            NoiseKind::Clean => (self.origin, 0, 0),
            NoiseKind::Mislabeled => (self.origin, 1, self.given),
            NoiseKind::MeasurementNoise => (self.origin, 2, 0),
        }
    }
}

/// Draws one data set; rows are grouped by generating class.
///
/// Per class g: ⌊ε_ℓ·n_g⌋ random rows get another label, cycling through the
/// other labels; then ⌊ε_m·n_g⌋ rows still tagged clean are replaced by draws
/// from the class contamination.
pub fn generate(sc: &Scenario, rng: &mut Rng) -> Result<(LabeledDataset, Vec<SubclassTag>)> {
    sc.validate()?;
    let p = sc.dim();
    let g_count = sc.n_classes() as u32;
    let mut values = Vec::with_capacity(sc.n_total() * p);
    let mut tags = Vec::with_capacity(sc.n_total());
    for (g, c) in sc.classes.iter().enumerate() {
        values.extend_from_slice(mvn_sample(rng, &c.dist, c.n)?.as_slice());
        tags.extend(std::iter::repeat_n(SubclassTag::clean(g as u32 + 1), c.n));
    }

    let mut offset = 0;
    for (g, c) in sc.classes.iter().enumerate() {
        let label = g as u32 + 1;
        let others: Vec<u32> = (1..=g_count).filter(|&k| k != label).collect();
        let m = (sc.eps_label * c.n as f64).floor() as usize;
        for (j, i) in rng.choose_indices(c.n, m).into_iter().enumerate() {
            tags[offset + i] = SubclassTag {
                origin: label,
                given: others[j % others.len()],
                kind: NoiseKind::Mislabeled,
            };
        }
        offset += c.n;
    }

    let mut offset = 0;
    for c in &sc.classes {
        let m = (sc.eps_meas * c.n as f64).floor() as usize;
        let clean: Vec<usize> = (offset..offset + c.n)
            .filter(|&i| tags[i].kind == NoiseKind::Clean)
            .collect();
        if m > clean.len() {
            return Err(Error::ConfigError("noise budget exceeds class size".into()));
        }
        let picks = rng.choose_indices(clean.len(), m);
        let draws = c.contamination.draw(rng, m)?;
        for (k, pick) in picks.into_iter().enumerate() {
            let i = clean[pick];
            values[i * p..(i + 1) * p].copy_from_slice(&draws[k * p..(k + 1) * p]);
            tags[i].kind = NoiseKind::MeasurementNoise;
        }
        offset += c.n;
    }

    let labels = tags.iter().map(|t| t.given).collect();
    let data = DataMatrix::from_row_major(tags.len(), p, values)?;
    Ok((LabeledDataset::new(data, labels)?, tags))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionRow {
    pub subclass: SubclassTag,
    /// Rows of this subclass, summed over replications.
    pub count: usize,
    /// Rates for predicted classes 1..=G followed by the class-0 rate.
    pub rates: Vec<f64>,
}

/// Confusion matrix with one row per nonempty subclass and an extra class-0 column.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedConfusion {
    pub n_classes: usize,
    pub rows: Vec<ConfusionRow>,
    pub rep_count: usize,
}

impl ExtendedConfusion {
    /// Column names: `pi_1`..`pi_G`, `pi_0`.
    pub fn column_names(&self) -> Vec<String> {
        (1..=self.n_classes)
            .map(|g| format!("pi_{g}"))
            .chain(std::iter::once("pi_0".to_string()))
            .collect()
    }

    pub fn row(&self, subclass: &SubclassTag) -> Option<&ConfusionRow> {
        self.rows.iter().find(|r| r.subclass == *subclass)
    }

    /// Rate at which `subclass` is predicted as `predicted` (0 = outlier class).
    pub fn rate(&self, subclass: &SubclassTag, predicted: u32) -> Option<f64> {
        let col = if predicted == 0 {
            self.n_classes
        } else {
            predicted as usize - 1
        };
        self.row(subclass).and_then(|r| r.rates.get(col).copied())
    }

    /// Entry-wise mean over replications, accumulated in the given order.
    pub fn mean(items: &[ExtendedConfusion]) -> Result<ExtendedConfusion> {
        let first = items
            .first()
            .ok_or_else(|| Error::DomainError("mean of no confusion matrices".into()))?;
        let mut rows = first.rows.clone();
        for r in rows.iter_mut() {
            r.rates.iter_mut().for_each(|v| *v = 0.0);
            r.count = 0;
        }
        for c in items {
            if c.rows.len() != rows.len()
                || c.rows
                    .iter()
                    .zip(&rows)
                    .any(|(a, b)| a.subclass != b.subclass)
            {
                return Err(Error::DomainError(
                    "confusion matrices have different rows".into(),
                ));
            }
            for (acc, r) in rows.iter_mut().zip(&c.rows) {
                acc.count += r.count;
                for (a, v) in acc.rates.iter_mut().zip(&r.rates) {
                    *a += v;
                }
            }
        }
        let k = items.len() as f64;
        for r in rows.iter_mut() {
            r.rates.iter_mut().for_each(|v| *v /= k);
        }
        Ok(ExtendedConfusion {
            n_classes: first.n_classes,
            rows,
            rep_count: items.iter().map(|c| c.rep_count).sum(),
        })
    }
}

/// Empirical distribution of predicted labels (0..=G) per subclass.
pub fn extended_confusion(
    predicted: &[u32],
    tags: &[SubclassTag],
    n_classes: usize,
) -> Result<ExtendedConfusion> {
    if predicted.len() != tags.len() {
        return Err(Error::DimensionMismatch {
            expected: tags.len(),
            found: predicted.len(),
        });
    }
    let mut counts: BTreeMap<(u32, u8, u32), (SubclassTag, Vec<usize>)> = BTreeMap::new();
    for (&y, t) in predicted.iter().zip(tags) {
        if y as usize > n_classes {
            return Err(Error::UnknownClass(y));
        }
        let entry = counts
            .entry(t.sort_key())
            .or_insert_with(|| (*t, vec![0; n_classes + 1]));
        let col = if y == 0 { n_classes } else { y as usize - 1 };
        entry.1[col] += 1;
    }
    let rows = counts
        .into_values()
        .map(|(subclass, cols)| {
            let n: usize = cols.iter().sum();
            ConfusionRow {
                subclass,
                count: n,
                rates: cols.into_iter().map(|c| c as f64 / n as f64).collect(),
            }
        })
        .collect();
    Ok(ExtendedConfusion {
        n_classes,
        rows,
        rep_count: 1,
    })
}

/// tr(Σ̂Σ⁻¹) − p − ln|Σ̂Σ⁻¹|; zero iff the matrices are equal.
pub fn kl_metric(estimated: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimated.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            found: estimated.nrows(),
        });
    }
    let est = cholesky(estimated)?;
    let tru = cholesky(truth)?;
    let p = truth.nrows() as f64;
    let trace: f64 = estimated
        .iter()
        .zip(tru.inverse.iter())
        .map(|(a, b)| a * b)
        .sum();
    let kl = trace - p - (est.log_det - tru.log_det);
    assert!(
        kl >= -1e-9 * p.max(trace.abs()),
        "covariance KL must be nonnegative, got {kl}"
    );
    Ok(kl.max(0.0))
}

/// Rows given label `g` with own-class distance above `cutoff`, divided by
/// the number of noisy rows carrying label `g`.
pub fn alpha_metric(rd_own: &[f64], tags: &[SubclassTag], g: u32, cutoff: f64) -> Result<f64> {
    if rd_own.len() != tags.len() {
        return Err(Error::DimensionMismatch {
            expected: tags.len(),
            found: rd_own.len(),
        });
    }
    let (mut flagged, mut noisy) = (0usize, 0usize);
    for (rd, t) in rd_own.iter().zip(tags) {
        if t.given != g {
            continue;
        }
        if *rd > cutoff {
            flagged += 1;
        }
        if t.is_noise() {
            noisy += 1;
        }
    }
    if noisy == 0 {
        return Err(Error::ZeroNoise { class: g });
    }
    Ok(flagged as f64 / noisy as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over replications; 0 for a single one.
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, sd }
    }
}

/// Metrics of one method in one replication.
#[derive(Debug, Clone)]
pub struct RepResult {
    pub confusion: ExtendedConfusion,
    pub kl: Vec<f64>,
    pub det: Vec<f64>,
    /// `None` for classes without noisy rows.
    pub alpha: Vec<Option<f64>>,
    pub priors: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub mode: Mode,
    pub confusion: ExtendedConfusion,
    /// Per-row standard deviation of the confusion rates over replications.
    pub confusion_sd: Vec<Vec<f64>>,
    pub kl: Vec<Summary>,
    pub det: Vec<Summary>,
    pub alpha: Vec<Option<Summary>>,
    pub priors: Vec<Summary>,
    pub reps: Vec<RepResult>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub scenario: String,
    pub scale: f64,
    pub n_total: usize,
    pub seed: u64,
    pub reps: usize,
    pub methods: Vec<MethodReport>,
}

/// Fits, classifies the training rows and scores one method on one data set.
pub fn evaluate(
    sc: &Scenario,
    data: &LabeledDataset,
    tags: &[SubclassTag],
    mode: Mode,
    config: &FitConfig,
) -> Result<(QdaModel, RepResult)> {
    let start = Instant::now();
    let model = fit(data, mode, config)?;
    let preds = classify_batch(&data.data, &model)?;
    let seconds = start.elapsed().as_secs_f64();
    let labels: Vec<u32> = preds.iter().map(|p| p.label).collect();
    let confusion = extended_confusion(&labels, tags, sc.n_classes())?;
    let rd_own: Vec<f64> = preds
        .iter()
        .zip(&data.labels)
        .map(|(p, &y)| p.rd_per_class[y as usize - 1])
        .collect();
    let mut kl = Vec::new();
    let mut det = Vec::new();
    let mut alpha = Vec::new();
    for (cm, spec) in model.classes().iter().zip(&sc.classes) {
        kl.push(kl_metric(cm.loc_scat.sigma(), spec.dist.sigma())?);
        det.push(cm.loc_scat.det());
        alpha.push(
            match alpha_metric(&rd_own, tags, cm.label, model.outlier_cutoff()) {
                Ok(a) => Some(a),
                Err(Error::ZeroNoise { .. }) => None,
                Err(e) => return Err(e),
            },
        );
    }
    let priors = model.classes().iter().map(|c| c.prior).collect();
    Ok((
        model,
        RepResult {
            confusion,
            kl,
            det,
            alpha,
            priors,
            seconds,
        },
    ))
}

/// Runs `reps` replications; replication r draws its data from rng substream r
/// of the scenario seed, so results do not depend on scheduling.
pub fn run_study(sc: &Scenario, reps: usize, methods: &[Mode]) -> Result<StudyReport> {
    if reps == 0 {
        return Err(Error::ConfigError("reps must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::ConfigError("no methods selected".into()));
    }
    sc.validate()?;
    let per_rep: Vec<Vec<RepResult>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<RepResult>> {
                let mut rng = Rng::substream(sc.seed, r as u64);
                let (data, tags) = generate(sc, &mut rng)?;
                let config = FitConfig {
                    seed: derive_seed(sc.seed, r as u64),
                    ..FitConfig::default()
                };
                methods
                    .iter()
                    .map(|&m| evaluate(sc, &data, &tags, m, &config).map(|x| x.1))
                    .collect()
            };
            run().map_err(|e| Error::InReplication {
                rep: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let g = sc.n_classes();
    let methods = methods
        .iter()
        .enumerate()
        .map(|(k, &mode)| {
            let reps: Vec<RepResult> = per_rep.iter().map(|r| r[k].clone()).collect();
            let confs: Vec<ExtendedConfusion> = reps.iter().map(|r| r.confusion.clone()).collect();
            let confusion = ExtendedConfusion::mean(&confs)?;
            let confusion_sd = (0..confusion.rows.len())
                .map(|i| {
                    (0..=g)
                        .map(|c| {
                            Summary::of(
                                &confs.iter().map(|m| m.rows[i].rates[c]).collect::<Vec<_>>(),
                            )
                            .sd
                        })
                        .collect()
                })
                .collect();
            let summarize = |get: fn(&RepResult, usize) -> f64| -> Vec<Summary> {
                (0..g)
                    .map(|j| Summary::of(&reps.iter().map(|r| get(r, j)).collect::<Vec<_>>()))
                    .collect()
            };
            let kl = summarize(|r, j| r.kl[j]);
            let det = summarize(|r, j| r.det[j]);
            let priors = summarize(|r, j| r.priors[j]);
            let alpha = (0..g)
                .map(|j| {
                    let vals: Option<Vec<f64>> = reps.iter().map(|r| r.alpha[j]).collect();
                    vals.map(|v| Summary::of(&v))
                })
                .collect();
            Ok(MethodReport {
                mode,
                confusion,
                confusion_sd,
                kl,
                det,
                alpha,
                priors,
                reps,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StudyReport {
        scenario: sc.name.clone(),
        scale: sc.scale,
        n_total: sc.n_total(),
        seed: sc.seed,
        reps,
        methods,
    })
}

fn method_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Robust => "robust",
        Mode::Classical => "classical",
    }
}

/// Long-format CSV: `method,metric,row,column,mean,sd`. Subclass names
/// contain commas and are quoted. Timing is excluded.
pub fn report_csv(rep: &StudyReport) -> String {
    let mut s = String::from("method,metric,row,column,mean,sd\n");
    let _ = writeln!(s, "all,scale,,,{},", format_csv(rep.scale));
    let _ = writeln!(s, "all,n_total,,,{},", rep.n_total);
    let _ = writeln!(s, "all,reps,,,{},", rep.reps);
    let _ = writeln!(s, "all,seed,,,{},", rep.seed);
    for m in &rep.methods {
        let name = method_name(m.mode);
        let cols = m.confusion.column_names();
        for (row, sd) in m.confusion.rows.iter().zip(&m.confusion_sd) {
            for ((col, v), d) in cols.iter().zip(&row.rates).zip(sd) {
                let _ = writeln!(
                    s,
                    "{name},confusion,\"{}\",{col},{},{}",
                    row.subclass.name(),
                    format_csv(*v),
                    format_csv(*d)
                );
            }
        }
        let mut metric = |label: &str, values: &[Option<Summary>]| {
            for (j, v) in values.iter().enumerate() {
                if let Some(v) = v {
                    let _ = writeln!(
                        s,
                        "{name},{label},class_{},,{},{}",
                        j + 1,
                        format_csv(v.mean),
                        format_csv(v.sd)
                    );
                }
            }
        };
        let wrap = |v: &[Summary]| v.iter().copied().map(Some).collect::<Vec<_>>();
        metric("kl", &wrap(&m.kl));
        metric("det", &wrap(&m.det));
        metric("alpha", &m.alpha);
        metric("prior", &wrap(&m.priors));
    }
    s
}

/// Human-readable tables. Timing is excluded.
pub fn report_text(rep: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Scenario: {}", rep.scenario);
    let _ = writeln!(
        s,
        "Sample size: n = {} (scale {} of the reference size n = 1000000)",
        rep.n_total,
        format_csv(rep.scale)
    );
    let _ = writeln!(s, "Replications: {}, seed {}", rep.reps, rep.seed);
    for m in &rep.methods {
        let _ = writeln!(s);
        let _ = writeln!(s, "Method: {}", method_name(m.mode));
        let _ = writeln!(s, "Extended confusion matrix (mean over replications)");
        let _ = write!(s, "{:<10}", "subclass");
        for c in m.confusion.column_names() {
            let _ = write!(s, "{c:>9}");
        }
        let _ = writeln!(s, "{:>9}", "rows");
        for row in &m.confusion.rows {
            let _ = write!(s, "{:<10}", row.subclass.name());
            for v in &row.rates {
                let _ = write!(s, "{v:>9.3}");
            }
            let _ = writeln!(s, "{:>9}", row.count / m.confusion.rep_count.max(1));
        }
        let _ = write!(s, "{:<10}", "");
        for j in 1..=m.kl.len() {
            let _ = write!(s, "{:>11}", format!("class {j}"));
        }
        let _ = writeln!(s);
        let mut line = |label: &str, vals: Vec<Option<f64>>| {
            let _ = write!(s, "{label:<10}");
            for v in vals {
                match v {
                    Some(v) => {
                        let _ = write!(s, "{v:>11.3}");
                    }
                    None => {
                        let _ = write!(s, "{:>11}", "-");
                    }
                }
            }
            let _ = writeln!(s);
        };
        line("KL", m.kl.iter().map(|v| Some(v.mean)).collect());
        line("|Sigma|", m.det.iter().map(|v| Some(v.mean)).collect());
        line("alpha", m.alpha.iter().map(|v| v.map(|v| v.mean)).collect());
        line("prior", m.priors.iter().map(|v| Some(v.mean)).collect());
    }
    s
}

/// Wall-clock seconds of fit + classification per replication and method.
pub fn benchmark_text(rep: &StudyReport) -> String {
    let mut s = String::new();
    for m in &rep.methods {
        let secs: Vec<f64> = m.reps.iter().map(|r| r.seconds).collect();
        let sum = Summary::of(&secs);
        let _ = writeln!(
            s,
            "{}: {:.3} s per replication (sd {:.3}, n = {})",
            method_name(m.mode),
            sum.mean,
            sum.sd,
            rep.n_total
        );
    }
    s
}

/// Two bivariate classes (80 and 100 rows) with 4 rows of each class given
/// the other label, 5 class-1 outliers near class 1 and a cluster of 8
/// class-2 outliers closer to class 1 than to class 2. Outliers replace
/// clean rows, so the class sizes stay 80 and 100.
pub fn toy_dataset(seed: u64) -> Result<(LabeledDataset, Vec<SubclassTag>)> {
    let c1 = LocationScatter::new(
        DVector::from_vec(vec![0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.5]),
    )?;
    let c2 = LocationScatter::new(
        DVector::from_vec(vec![5.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.2, -0.4, -0.4, 1.0]),
    )?;
    let sc = Scenario {
        name: "toy".into(),
        classes: vec![
            ClassSpec {
                n: 80,
                dist: c1,
                contamination: Contamination::Cluster(LocationScatter::new(
                    DVector::from_vec(vec![-4.0, 2.0]),
                    DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.3]),
                )?),
            },
            ClassSpec {
                n: 100,
                dist: c2,
                contamination: Contamination::Cluster(LocationScatter::new(
                    DVector::from_vec(vec![-1.5, -5.5]),
                    DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]),
                )?),
            },
        ],
        eps_label: 0.0,
        eps_meas: 0.0,
        seed,
        scale: 1.0,
    };
    let mut rng = Rng::new(seed);
    let (clean, mut tags) = generate(&sc, &mut rng)?;
    let mut values = clean.data.as_slice().to_vec();
    let offsets = [0usize, 80];
    let mislabeled = 4;
    let outliers = [5usize, 8];
    for (g, c) in sc.classes.iter().enumerate() {
        let label = g as u32 + 1;
        let picks = rng.choose_indices(c.n, mislabeled + outliers[g]);
        let (flip, replace) = picks.split_at(mislabeled);
        for &i in flip {
            tags[offsets[g] + i] = SubclassTag {
                origin: label,
                given: 3 - label,
                kind: NoiseKind::Mislabeled,
            };
        }
        let draws = c.contamination.draw(&mut rng, replace.len())?;
        for (k, &i) in replace.iter().enumerate() {
            let row = offsets[g] + i;
            values[row * 2..row * 2 + 2].copy_from_slice(&draws[k * 2..k * 2 + 2]);
            tags[row].kind = NoiseKind::MeasurementNoise;
        }
    }
    let labels = tags.iter().map(|t| t.given).collect();
    let data = DataMatrix::from_row_major(tags.len(), 2, values)?;
    Ok((LabeledDataset::new(data, labels)?, tags))
}

/// √χ²_{p,q}.
pub fn outlier_cutoff(p: usize, quantile: f64) -> Result<f64> {
    Ok(chi2_quantile(p as u32, quantile)?.sqrt())
}
