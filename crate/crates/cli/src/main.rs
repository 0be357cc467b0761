use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sizedist::estimation::fit_mle;
use sizedist::fokker_planck::{fp_residual_at, simulate_sde, DriftField, DriftKind, ParamPath};
use sizedist::pipeline::{
    counts_csv, counts_json, describe, describe_csv, emit_reports, ingest_csv, is_partial, parse_table_json,
    run_full_workflow, run_is_oos_workflow, run_tt_workflow, write_atomic, Dataset, Format, WorkflowConfig,
};
use sizedist::sampling::{sample, sample_truncated, RngStream};
use sizedist::selection::{summarize_counts, SelectionTable};
use sizedist::truncation::TruncationWindow;
use sizedist::{Error, ModelSpec};

#[derive(Parser)]
#[command(name = "sizedist", version, about = "Fit, compare and simulate composite size distributions")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// TOML file with workflow settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated model names, e.g. LN,2LN,4LSt (default: all 17).
    #[arg(long, global = true, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of generated starting points per model.
    #[arg(long, global = true)]
    starts: Option<usize>,
    #[arg(long, global = true)]
    lower_frac: Option<f64>,
    #[arg(long, global = true)]
    upper_frac: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct Input {
    /// CSV files, one sample each.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Column index or header name.
    #[arg(long, default_value = "0")]
    column: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args)]
struct FpArgs {
    /// ParamPath JSON document.
    #[arg(long)]
    path: PathBuf,
    /// Diffusion constant s (a = s²).
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, value_enum, default_value_t = Kind::Generic)]
    kind: Kind,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lst4,
    Lst5tt,
    Generic,
}

#[derive(Subcommand)]
enum Verb {
    /// Fit models to each sample and write the estimates as JSON.
    Fit(Input),
    /// Descriptive statistics of each sample.
    Describe(Input),
    /// Full-sample selection tables.
    Full(Input),
    /// 75/25 in-sample/out-of-sample selection tables.
    SplitEval(Input),
    /// Doubly truncated selection tables.
    Tt(Input),
    /// Draw a synthetic sample.
    Sample {
        #[arg(long)]
        model: String,
        /// Comma-separated natural parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long)]
        n: usize,
        /// Truncation window `a,b` for tt models.
        #[arg(long, value_delimiter = ',')]
        window: Vec<f64>,
        #[arg(long, default_value = "sample.csv")]
        name: String,
    },
    /// Drift, density and PDE residual on a (y, t) grid.
    FpDrift {
        #[command(flatten)]
        fp: FpArgs,
        #[arg(long, allow_hyphen_values = true)]
        y_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        y_max: f64,
        #[arg(long, default_value_t = 101)]
        ny: usize,
        #[arg(long, default_value_t = 11)]
        nt: usize,
        /// Finite-difference step of the residual.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Euler-Maruyama ensemble from the density at t0 to t1.
    FpSimulate {
        #[command(flatten)]
        fp: FpArgs,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Count matrix from table JSON files.
    Report {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
    },
}

type AppResult<T> = Result<T, Error>;

fn config(c: &Common) -> AppResult<WorkflowConfig> {
    let mut cfg = match &c.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).map_err(|e| Error::Parse(e.to_string()))?,
        None => WorkflowConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.fit.seed = s;
    }
    if let Some(s) = c.starts {
        cfg.fit.n_starts = s;
    }
    if let Some(f) = c.lower_frac {
        cfg.lower_frac = f;
    }
    if let Some(f) = c.upper_frac {
        cfg.upper_frac = f;
    }
    cfg.fit.validate()?;
    Ok(cfg)
}

fn models(c: &Common) -> AppResult<Vec<ModelSpec>> {
    if c.models.is_empty() {
        return Ok(ModelSpec::all(false));
    }
    c.models.iter().map(|m| m.trim().parse()).collect()
}

fn format(c: &Common) -> Format {
    match c.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    }
}

fn load(input: &Input) -> AppResult<Vec<Dataset>> {
    if !input.delimiter.is_ascii() {
        return Err(Error::Parse(format!("delimiter must be ASCII, got {:?}", input.delimiter)));
    }
    input
        .files
        .iter()
        .map(|f| {
            let got = ingest_csv(f, &input.column, input.delimiter as u8)?;
            if got.dropped > 0 {
                eprintln!("warning: {}: dropped {} non-positive or non-numeric rows", f.display(), got.dropped);
            }
            Ok(got.dataset)
        })
        .collect()
}

fn read_path(fp: &FpArgs) -> AppResult<DriftField> {
    let path: ParamPath = serde_json::from_str(&fs::read_to_string(&fp.path)?)?;
    let kind = match fp.kind {
        Kind::Lst4 => DriftKind::Lst4,
        Kind::Lst5tt => DriftKind::Lst5tt,
        Kind::Generic => DriftKind::Generic,
    };
    DriftField::new(fp.s, path, kind)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> AppResult<()> {
    let p = dir.join(name);
    write_atomic(&p, bytes)?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

/// Returns `true` when the run was partial.
fn run(cli: Cli) -> AppResult<bool> {
    let c = &cli.common;
    match &cli.verb {
        Verb::Fit(input) => {
            let cfg = config(c)?;
            let specs = models(c)?;
            let mut partial = false;
            let mut out = Vec::new();
            for ds in load(input)? {
                for &spec in &specs {
                    match fit_mle(spec, ds.values(), None, &cfg.fit) {
                        Ok(f) => out.push(serde_json::json!({ "label": ds.label(), "fit": f })),
                        Err(e) => {
                            partial = true;
                            out.push(serde_json::json!({ "label": ds.label(), "model": spec, "error": e.to_string() }));
                        }
                    }
                }
            }
            let doc = serde_json::json!({ "schema": sizedist::pipeline::SCHEMA, "fits": out });
            write(&c.out, "fits.json", serde_json::to_string_pretty(&doc)?.as_bytes())?;
            Ok(partial)
        }
        Verb::Describe(input) => {
            let stats = load(input)?
                .iter()
                .map(|d| Ok((d.label().to_string(), describe(d)?)))
                .collect::<AppResult<Vec<_>>>()?;
            write(&c.out, "describe.csv", &describe_csv(&stats)?)?;
            Ok(false)
        }
        Verb::Full(input) | Verb::SplitEval(input) | Verb::Tt(input) => {
            let cfg = config(c)?;
            let specs = models(c)?;
            let tables = load(input)?
                .iter()
                .map(|ds| match &cli.verb {
                    Verb::Full(_) => run_full_workflow(ds, &specs, &cfg),
                    Verb::SplitEval(_) => run_is_oos_workflow(ds, &specs, &cfg),
                    _ => run_tt_workflow(ds, cfg.lower_frac, cfg.upper_frac, &specs, &cfg),
                })
                .collect::<AppResult<Vec<SelectionTable>>>()?;
            for p in emit_reports(&tables, &c.out, format(c))? {
                eprintln!("wrote {}", p.display());
            }
            Ok(is_partial(&tables))
        }
        Verb::Sample { model, params, n, window, name } => {
            let spec: ModelSpec = model.parse()?;
            let mut rng = RngStream::new(c.seed.unwrap_or(0), 0);
            let xs = match (spec.truncated, window.as_slice()) {
                (true, [a, b]) => sample_truncated(spec, params, TruncationWindow::new(*a, *b)?, *n, &mut rng)?,
                (false, []) => sample(spec, params, *n, &mut rng)?,
                _ => return Err(Error::InvalidParams("tt models need --window a,b; others take none".into())),
            };
            let ds = Dataset::new(spec.name(), xs)?;
            let p = c.out.join(name);
            sizedist::pipeline::write_values_csv(&ds, &p)?;
            eprintln!("wrote {}", p.display());
            Ok(false)
        }
        Verb::FpDrift { fp, y_min, y_max, ny, nt, h } => {
            let field = read_path(fp)?;
            let (t0, t1) = (field.path.t0, field.path.t1);
            let mut out = String::from("t,y,pdf,drift,residual\n");
            for i in 0..*nt {
                let t = if *nt == 1 { t0 } else { t0 + (t1 - t0) * i as f64 / (*nt - 1) as f64 };
                let st = field.path.state(t)?;
                for j in 0..*ny {
                    let y = if *ny == 1 { *y_min } else { y_min + (y_max - y_min) * j as f64 / (*ny - 1) as f64 };
                    let cell = |r: AppResult<f64>| r.map(|v| v.to_string()).unwrap_or_default();
                    let drift = field.drift_at(&st, y);
                    let res = fp_residual_at(&field, y, t, *h, *h);
                    out.push_str(&format!("{t},{y},{},{},{}\n", st.pdf(y), cell(drift), cell(res)));
                }
            }
            write(&c.out, "fp_drift.csv", out.as_bytes())?;
            Ok(false)
        }
        Verb::FpSimulate { fp, n, steps } => {
            let field = read_path(fp)?;
            let seed = c.seed.unwrap_or(0);
            let (t0, t1) = (field.path.t0, field.path.t1);
            let y0 = field.path.sample_at(t0, *n, &mut RngStream::new(seed, u64::MAX))?;
            let y1 = simulate_sde(&field, &y0, t0, t1, *steps, seed)?;
            let mut out = String::from("trajectory,y_t0,y_t1\n");
            for (i, (a, b)) in y0.iter().zip(&y1).enumerate() {
                out.push_str(&format!("{i},{a},{b}\n"));
            }
            write(&c.out, "fp_ensemble.csv", out.as_bytes())?;
            Ok(false)
        }
        Verb::Report { tables } => {
            let tables = tables
                .iter()
                .map(|p| parse_table_json(&fs::read(p)?))
                .collect::<AppResult<Vec<_>>>()?;
            let counts = summarize_counts(&tables)?;
            match format(c) {
                Format::Csv => write(&c.out, "summary_counts.csv", &counts_csv(&counts)?)?,
                Format::Json => write(&c.out, "summary_counts.json", &counts_json(&counts)?)?,
            }
            Ok(is_partial(&tables))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("finished with models that could not be estimated");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
