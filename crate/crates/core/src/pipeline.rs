//! Data ingestion, descriptive statistics, the three fitting workflows and
//! report files.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_mle_y, log_data, warm_starts, FitConfig, FittedModel};
use crate::gof::gof_report;
use crate::mixture::{Family, ModelSpec};
use crate::sampling::RngStream;
use crate::selection::{summarize_counts, Criterion, CountMatrix, Scores, SelectionRow, SelectionTable};
use crate::truncation::{empirical_window, Rounding, TruncationWindow};

pub const SCHEMA: &str = "composite-dist/1";

/// A labelled sample of positive sizes, kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    label: String,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(label: impl Into<String>, mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyAfterCleaning);
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("sizes must be positive and finite, got {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { label: label.into(), values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn min(&self) -> f64 {
        self.values[0]
    }
    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Result of [`ingest_csv`]: the cleaned data and how many rows were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub dropped: usize,
}

/// Reads one numeric column of a CSV file. `column` is a zero-based index
/// or a header name. A first row whose field is not numeric is taken as a
/// header; later non-numeric or non-positive rows are dropped and counted.
pub fn ingest_csv(path: &Path, column: &str, delimiter: u8) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = rdr.records();
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();

    let mut index = column.parse::<usize>().ok();
    let mut values = Vec::new();
    let mut dropped = 0;
    let mut first = true;
    for rec in &mut records {
        let rec = rec?;
        if first {
            first = false;
            let by_name = rec.iter().position(|h| h == column);
            let numeric = index.and_then(|i| rec.get(i)).is_some_and(|f| f.parse::<f64>().is_ok());
            if !numeric {
                if index.is_none() {
                    index = Some(by_name.ok_or_else(|| {
                        Error::Parse(format!("no column named {column:?} in {}", path.display()))
                    })?);
                }
                continue;
            }
        }
        let i = index.ok_or_else(|| Error::Parse(format!("no column named {column:?} in {}", path.display())))?;
        match rec.get(i).and_then(|f| f.parse::<f64>().ok()) {
            Some(v) if v > 0.0 && v.is_finite() => values.push(v),
            _ => dropped += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    Ok(Ingested { dataset: Dataset::new(label, values)?, dropped })
}

/// Writes the sample as a one-column CSV with header `value`.
pub fn write_values_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(ds.len() * 20);
    out.push_str("value\n");
    for v in ds.values() {
        out.push_str(&format!("{v}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// The nine descriptive columns of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub mean_log: f64,
    pub sd_log: f64,
    pub skew_log: f64,
    /// Non-excess: 3 for normal log-data.
    pub kurt_log: f64,
    pub min: f64,
    pub max: f64,
}

fn central_moments(v: &[f64]) -> (f64, f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Population moments; skewness and kurtosis are those of `ln x`.
pub fn describe(ds: &Dataset) -> Result<DescriptiveStats> {
    if ds.len() < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: ds.len() });
    }
    let ys: Vec<f64> = ds.values().iter().map(|x| x.ln()).collect();
    let (mean, m2x, _, _) = central_moments(ds.values());
    let (mean_log, m2, m3, m4) = central_moments(&ys);
    if !(m2 > 0.0) {
        return Err(Error::Domain("log-data has zero variance".into()));
    }
    Ok(DescriptiveStats {
        n: ds.len(),
        mean,
        sd: m2x.sqrt(),
        mean_log,
        sd_log: m2.sqrt(),
        skew_log: m3 / m2.powf(1.5),
        kurt_log: m4 / (m2 * m2),
        min: ds.min(),
        max: ds.max(),
    })
}

const SPLIT_STREAM: u64 = 0x5EED_0075;

/// Uniform random partition into `⌈0.75 n⌉` in-sample and the remaining
/// out-of-sample observations.
pub fn split_75_25(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.len() < 8 {
        return Err(Error::TooFewObservations { needed: 8, got: ds.len() });
    }
    let mut v = ds.values().to_vec();
    v.shuffle(&mut RngStream::new(seed, SPLIT_STREAM));
    let n_in = (3 * ds.len()).div_ceil(4);
    let out = v.split_off(n_in);
    Ok((
        Dataset::new(format!("{}_is", ds.label()), v)?,
        Dataset::new(format!("{}_oos", ds.label()), out)?,
    ))
}

/// Which sample size enters BIC and HQC of out-of-sample rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OosSampleSize {
    #[default]
    OutOfSample,
    InSample,
}

/// Settings shared by all workflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkflowConfig {
    pub fit: FitConfig,
    pub lower_frac: f64,
    pub upper_frac: f64,
    pub rounding: Rounding,
    pub oos_n: OosSampleSize,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), lower_frac: 0.1, upper_frac: 0.001, rounding: Rounding::Floor, oos_n: OosSampleSize::OutOfSample }
    }
}

/// Models whose fits seed `f`.
fn warm_sources(f: Family) -> &'static [Family] {
    use Family::*;
    match f {
        Ln2 | Dpln | Lnsnp => &[Ln],
        Ln3 => &[Ln2],
        Ln4 => &[Ln3],
        Ln5 => &[Ln4],
        Ll3 => &[Ll2],
        Ll4 => &[Ll3],
        Ll5 => &[Ll4],
        LSt3 => &[LSt2Nu12, LSt2Nu39],
        LSt4 => &[LSt3],
        LSt5 => &[LSt4],
        _ => &[],
    }
}

/// Fitting order inside each independent chain.
const CHAINS: [&[Family]; 4] = {
    use Family::*;
    [
        &[Ln, Ln2, Ln3, Ln4, Ln5, Dpln, Lnsnp],
        &[Ll2, Ll3, Ll4, Ll5],
        &[LSt2Nu12, LSt2Nu39, LSt3, LSt4, LSt5],
        &[Gb2],
    ]
};

/// Fits every spec in `models` to sorted log-data. Chains of nested
/// families run in parallel; inside a chain each fit seeds the next.
/// The result is in the order of `models`.
pub fn fit_battery(
    models: &[ModelSpec],
    ys: &[f64],
    window: Option<TruncationWindow>,
    cfg: &FitConfig,
) -> Vec<Result<FittedModel>> {
    let chains: Vec<Vec<ModelSpec>> = CHAINS
        .iter()
        .map(|c| c.iter().flat_map(|f| models.iter().filter(move |m| m.family == *f).copied()).collect())
        .collect();
    let done: Vec<Vec<(ModelSpec, Result<FittedModel>)>> = chains
        .par_iter()
        .map(|chain| {
            let mut out: Vec<(ModelSpec, Result<FittedModel>)> = Vec::new();
            for &spec in chain {
                let mut warm = Vec::new();
                for src in warm_sources(spec.family) {
                    let fitted = out.iter().find(|(s, _)| s.family == *src && s.truncated == spec.truncated);
                    if let Some((_, Ok(fit))) = fitted {
                        warm.extend(warm_starts(spec.family, *src, &fit.params));
                    }
                }
                let w = if spec.truncated { window } else { None };
                out.push((spec, fit_mle_y(spec, ys, w, cfg, &warm)));
            }
            out
        })
        .collect();
    let mut by_spec: HashMap<ModelSpec, Result<FittedModel>> = done.into_iter().flatten().collect();
    models
        .iter()
        .map(|m| by_spec.remove(m).unwrap_or_else(|| Err(Error::InvalidParams(format!("duplicate model {m}")))))
        .collect()
}

fn reason(e: &Error) -> String {
    match e {
        Error::NotEstimable { reason, .. } => reason.clone(),
        e => e.to_string(),
    }
}

fn scored_rows(fits: Vec<Result<FittedModel>>, models: &[ModelSpec], ys: &[f64]) -> Vec<SelectionRow> {
    fits.into_iter()
        .zip(models)
        .map(|(fit, &spec)| {
            let row = fit.and_then(|f| {
                let gof = gof_report(&f.model()?, ys)?;
                SelectionRow::from_fit(&f, &gof)
            });
            row.unwrap_or_else(|e| SelectionRow::not_estimable(spec, ys.len(), &reason(&e)))
        })
        .collect()
}

fn check_unique(models: &[ModelSpec]) -> Result<()> {
    for (i, m) in models.iter().enumerate() {
        if models[..i].contains(m) {
            return Err(Error::InvalidParams(format!("model {m} listed twice")));
        }
    }
    Ok(())
}

/// Fits and scores every model on the whole sample.
pub fn run_full_workflow(ds: &Dataset, models: &[ModelSpec], cfg: &WorkflowConfig) -> Result<SelectionTable> {
    check_unique(models)?;
    let models: Vec<ModelSpec> = models.iter().map(|m| ModelSpec::new(m.family)).collect();
    let ys = log_data(ds.values(), None)?;
    let fits = fit_battery(&models, &ys, None, &cfg.fit);
    Ok(SelectionTable::new(ds.label(), scored_rows(fits, &models, &ys)))
}

/// Fits on a 75% split and scores the remaining 25% at the in-sample
/// estimates, with the in-sample `k`.
pub fn run_is_oos_workflow(ds: &Dataset, models: &[ModelSpec], cfg: &WorkflowConfig) -> Result<SelectionTable> {
    check_unique(models)?;
    let models: Vec<ModelSpec> = models.iter().map(|m| ModelSpec::new(m.family)).collect();
    let (ins, oos) = split_75_25(ds, cfg.fit.seed)?;
    let ys_in = log_data(ins.values(), None)?;
    let ys_oos = log_data(oos.values(), None)?;
    let n_ic = match cfg.oos_n {
        OosSampleSize::OutOfSample => oos.len(),
        OosSampleSize::InSample => ins.len(),
    };
    let fits = fit_battery(&models, &ys_in, None, &cfg.fit);
    let rows = fits
        .into_iter()
        .zip(&models)
        .map(|(fit, &spec)| {
            let row = fit.and_then(|f| {
                let model = f.model()?;
                let loglik = model.loglik(oos.values())?;
                if !loglik.is_finite() {
                    return Err(Error::NonFiniteObjective);
                }
                let gof = gof_report(&model, &ys_oos)?;
                let scores = Scores::new(loglik, f.k(), n_ic, &gof)?;
                let mut flags: Vec<String> = f.flags.iter().map(|x| x.as_str().to_string()).collect();
                if gof.ad_clamped {
                    flags.push("ad_clamped".into());
                }
                Ok(SelectionRow::estimable(spec, oos.len(), scores, flags))
            });
            row.unwrap_or_else(|e| SelectionRow::not_estimable(spec, oos.len(), &reason(&e)))
        })
        .collect();
    Ok(SelectionTable::new(format!("{}_oos", ds.label()), rows))
}

/// Window spanned by the survivors of `empirical_window`; a side with a
/// zero fraction stays open.
pub fn tt_window(ds: &Dataset, lower_frac: f64, upper_frac: f64, rounding: Rounding) -> Result<(TruncationWindow, Vec<f64>)> {
    let ew = empirical_window(ds.values(), lower_frac, upper_frac, rounding)?;
    let open = TruncationWindow::unbounded();
    let a = if ew.dropped_low == 0 { open.a() } else { ew.window.a() };
    let b = if ew.dropped_high == 0 { open.b() } else { ew.window.b() };
    Ok((TruncationWindow::new(a, b)?, ew.survivors))
}

/// Fits the truncated variants of `models` to the survivors of the
/// empirical truncation.
pub fn run_tt_workflow(
    ds: &Dataset,
    lower_frac: f64,
    upper_frac: f64,
    models: &[ModelSpec],
    cfg: &WorkflowConfig,
) -> Result<SelectionTable> {
    check_unique(models)?;
    let models: Vec<ModelSpec> = models.iter().map(|m| ModelSpec::truncated(m.family)).collect();
    let (window, survivors) = tt_window(ds, lower_frac, upper_frac, cfg.rounding)?;
    let ys = log_data(&survivors, Some(window))?;
    let fits = fit_battery(&models, &ys, Some(window), &cfg.fit);
    Ok(SelectionTable::new(format!("{}_tt", ds.label()), scored_rows(fits, &models, &ys)))
}

/// Output format of report files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub const TABLE_COLUMNS: [&str; 10] = ["model", "k", "loglik", "aic", "bic", "hqc", "ks", "cm", "ad", "flags"];

pub fn table_csv(t: &SelectionTable) -> Result<Vec<u8>> {
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let mut line = vec![r.model.name(), r.k.to_string()];
            match r.scores {
                Some(s) => line.extend([s.loglik, s.aic, s.bic, s.hqc, s.ks, s.cm, s.ad].map(num)),
                None => line.extend(std::iter::repeat_n(String::new(), 7)),
            }
            line.push(r.flags.join(";"));
            line
        })
        .collect();
    csv_bytes(&TABLE_COLUMNS, rows)
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    schema: String,
    table: SelectionTable,
}

#[derive(Serialize, Deserialize)]
struct CountsDoc {
    schema: String,
    criteria: Vec<Criterion>,
    counts: CountMatrix,
}

pub fn table_json(t: &SelectionTable) -> Result<Vec<u8>> {
    let doc = TableDoc { schema: SCHEMA.into(), table: t.clone() };
    let mut v = serde_json::to_vec_pretty(&doc)?;
    v.push(b'\n');
    Ok(v)
}

/// Parses a table written by [`table_json`].
pub fn parse_table_json(bytes: &[u8]) -> Result<SelectionTable> {
    let doc: TableDoc = serde_json::from_slice(bytes)?;
    if doc.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema {:?}", doc.schema)));
    }
    Ok(doc.table)
}

pub fn counts_csv(c: &CountMatrix) -> Result<Vec<u8>> {
    let mut header = vec!["model", "k"];
    header.extend(Criterion::ALL.iter().map(|c| c.name()));
    let mut rows: Vec<Vec<String>> = c
        .rows
        .iter()
        .map(|r| {
            let mut line = vec![r.model.name(), r.k.to_string()];
            line.extend(r.counts.iter().map(|v| v.to_string()));
            line
        })
        .collect();
    let mut total = vec!["Total".to_string(), String::new()];
    total.extend(c.total.iter().map(|v| v.to_string()));
    rows.push(total);
    csv_bytes(&header, rows)
}

pub fn counts_json(c: &CountMatrix) -> Result<Vec<u8>> {
    let doc = CountsDoc { schema: SCHEMA.into(), criteria: Criterion::ALL.to_vec(), counts: c.clone() };
    let mut v = serde_json::to_vec_pretty(&doc)?;
    v.push(b'\n');
    Ok(v)
}

pub fn parse_counts_json(bytes: &[u8]) -> Result<CountMatrix> {
    let doc: CountsDoc = serde_json::from_slice(bytes)?;
    if doc.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema {:?}", doc.schema)));
    }
    Ok(doc.counts)
}

pub const DESCRIBE_COLUMNS: [&str; 9] = ["n", "mean", "sd", "mean_log", "sd_log", "skew_log", "kurt_log", "min", "max"];

/// Descriptive table; the leading `label` column names the sample.
pub fn describe_csv(stats: &[(String, DescriptiveStats)]) -> Result<Vec<u8>> {
    let mut header = vec!["label"];
    header.extend(DESCRIBE_COLUMNS);
    let rows = stats
        .iter()
        .map(|(label, s)| {
            let mut line = vec![label.clone(), s.n.to_string()];
            line.extend([s.mean, s.sd, s.mean_log, s.sd_log, s.skew_log, s.kurt_log, s.min, s.max].map(num));
            line
        })
        .collect();
    csv_bytes(&header, rows)
}

fn file_safe(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Writes `<label>_table.<ext>` per table and `summary_counts.<ext>`;
/// returns the written paths.
pub fn emit_reports(tables: &[SelectionTable], dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let counts = summarize_counts(tables)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}_table.{ext}", file_safe(&t.label)));
        let bytes = match format {
            Format::Csv => table_csv(t)?,
            Format::Json => table_json(t)?,
        };
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    let path = dir.join(format!("summary_counts.{ext}"));
    let bytes = match format {
        Format::Csv => counts_csv(&counts)?,
        Format::Json => counts_json(&counts)?,
    };
    write_atomic(&path, &bytes)?;
    written.push(path);
    Ok(written)
}

/// True when some row of some table could not be estimated.
pub fn is_partial(tables: &[SelectionTable]) -> bool {
    tables.iter().any(|t| t.rows.iter().any(|r| r.scores.is_none()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample;
    use proptest::prelude::*;

    fn ln_data(n: usize, seed: u64) -> Dataset {
        let xs = sample(ModelSpec::new(Family::Ln), &[3.0, 1.2], n, &mut RngStream::new(seed, 0)).unwrap();
        Dataset::new("ln", xs).unwrap()
    }

    #[test]
    fn ingest_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "1\n2\n3\n").unwrap();
        let got = ingest_csv(&p, "0", b',').unwrap();
        assert_eq!(got.dataset.len(), 3);
        assert_eq!((got.dataset.min(), got.dataset.max(), got.dropped), (1.0, 3.0, 0));

        fs::write(&p, "id,sales\na,4\nb,-5\nc,x\nd,2\n").unwrap();
        let got = ingest_csv(&p, "sales", b',').unwrap();
        assert_eq!(got.dataset.values(), &[2.0, 4.0]);
        assert_eq!(got.dropped, 2);

        fs::write(&p, "sales\n-1\n0\n").unwrap();
        assert!(matches!(ingest_csv(&p, "sales", b','), Err(Error::EmptyAfterCleaning)));
    }

    #[test]
    fn values_round_trip_bitwise() {
        let ds = ln_data(100_000, 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        write_values_csv(&ds, &p).unwrap();
        let back = ingest_csv(&p, "value", b',').unwrap().dataset;
        assert!(ds.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.len(), ds.len());
    }

    #[test]
    fn describe_moments() {
        let ds = ln_data(200_000, 2);
        let s = describe(&ds).unwrap();
        let se = 1.2 / (ds.len() as f64).sqrt();
        assert!((s.mean_log - 3.0).abs() < 4.0 * se);
        assert!((s.sd_log - 1.2).abs() < 4.0 * 1.2 / (2.0 * ds.len() as f64).sqrt());
        assert!(s.skew_log.abs() < 0.03 && (s.kurt_log - 3.0).abs() < 0.06);
        assert!(s.min <= s.max);

        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.open01().exp()).collect();
        let s = describe(&Dataset::new("u", xs).unwrap()).unwrap();
        assert!((s.kurt_log - 1.8).abs() < 0.02);

        assert!(describe(&Dataset::new("c", vec![2.0; 10]).unwrap()).is_err());
        assert!(describe(&Dataset::new("s", vec![1.0, 2.0, 3.0]).unwrap()).is_err());
    }

    #[test]
    fn split_sizes_and_partition() {
        let ds = Dataset::new("x", (1..=100).map(f64::from).collect()).unwrap();
        let (a, b) = split_75_25(&ds, 9).unwrap();
        assert_eq!((a.len(), b.len()), (75, 25));
        let mut all: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, ds.values());
        assert_eq!(split_75_25(&ds, 9).unwrap(), (a, b));
        let odd = Dataset::new("y", (1..=9).map(f64::from).collect()).unwrap();
        assert_eq!(split_75_25(&odd, 0).unwrap().0.len(), 7);
    }

    #[test]
    fn split_parts_look_alike() {
        let reps = 200;
        let mut rejected = 0;
        for r in 0..reps {
            let ds = ln_data(400, 100 + r);
            let (a, b) = split_75_25(&ds, r).unwrap();
            let t = crate::gof::two_sample_tests(a.values(), b.values(), 199, r).unwrap();
            if t.p_ks < 0.05 {
                rejected += 1;
            }
        }
        // nominal 5%, binomial SE ≈ 1.5%
        let rate = rejected as f64 / reps as f64;
        assert!(rate < 0.05 + 3.0 * 0.0154, "rejection rate {rate}");
    }

    #[test]
    fn tt_window_open_sides() {
        let ds = ln_data(1000, 4);
        let (w, s) = tt_window(&ds, 0.0, 0.0, Rounding::Floor).unwrap();
        assert_eq!(w, TruncationWindow::unbounded());
        assert_eq!(s.len(), 1000);
        let (w, s) = tt_window(&ds, 0.1, 0.0, Rounding::Floor).unwrap();
        assert_eq!(w.a(), ds.values()[100]);
        assert_eq!(w.b(), TruncationWindow::unbounded().b());
        assert_eq!(s.len(), 900);
    }

    #[test]
    fn reports_shape_and_round_trip() {
        let ds = ln_data(2000, 5);
        let mut cfg = WorkflowConfig::default();
        cfg.fit.n_starts = 2;
        let models = [ModelSpec::new(Family::Ln), ModelSpec::new(Family::Ln2)];
        let t = run_full_workflow(&ds, &models, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_reports(std::slice::from_ref(&t), dir.path(), Format::Csv).unwrap();
        let text = fs::read_to_string(&paths[0]).unwrap();
        assert!(text.starts_with("model,k,loglik,aic,bic,hqc,ks,cm,ad,flags\n"));
        let counts = fs::read_to_string(&paths[1]).unwrap();
        assert!(counts.lines().last().unwrap().starts_with("Total,,1,1,1,1,1,1"));

        let back = parse_table_json(&table_json(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let c = summarize_counts(&[t]).unwrap();
        assert_eq!(parse_counts_json(&counts_json(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn not_estimable_rows_are_blank() {
        let ds = ln_data(60, 6);
        let mut cfg = WorkflowConfig::default();
        cfg.fit.n_starts = 2;
        let models = [ModelSpec::new(Family::Ln), ModelSpec::new(Family::Ln5)];
        let t = run_full_workflow(&ds, &models, &cfg).unwrap();
        assert!(t.rows[0].scores.is_some());
        assert!(t.rows[1].scores.is_none());
        assert!(t.rows[1].flags[0].starts_with("not_estimable"));
        assert!(t.rows[1].argmin.is_empty());
        assert!(is_partial(&[t.clone()]));
        let csv = String::from_utf8(table_csv(&t).unwrap()).unwrap();
        assert!(csv.lines().nth(2).unwrap().starts_with("5LN,14,,,,,,,,"));
    }

    #[test]
    fn is_oos_uses_out_of_sample_n() {
        let ds = ln_data(2000, 7);
        let mut cfg = WorkflowConfig::default();
        cfg.fit.n_starts = 2;
        let t = run_is_oos_workflow(&ds, &[ModelSpec::new(Family::Ln)], &cfg).unwrap();
        let r = &t.rows[0];
        assert_eq!(r.n, 500);
        let s = r.scores.unwrap();
        assert_eq!(s.bic, crate::selection::bic(s.loglik, 2, 500));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 8usize..300, seed in 0u64..1000) {
            let ds = Dataset::new("p", (1..=n).map(|i| i as f64).collect()).unwrap();
            let (a, b) = split_75_25(&ds, seed).unwrap();
            prop_assert_eq!(a.len(), (3 * n).div_ceil(4));
            let mut all: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all, ds.values().to_vec());
        }

        #[test]
        fn describe_is_scale_shift_in_logs(scale in 0.01f64..100.0) {
            let ds = ln_data(500, 8);
            let scaled = Dataset::new("s", ds.values().iter().map(|x| x * scale).collect()).unwrap();
            let (a, b) = (describe(&ds).unwrap(), describe(&scaled).unwrap());
            prop_assert!((b.mean_log - a.mean_log - scale.ln()).abs() < 1e-9);
            prop_assert!((b.sd_log - a.sd_log).abs() < 1e-9);
            prop_assert!((b.kurt_log - a.kurt_log).abs() < 1e-7);
        }
    }
}
