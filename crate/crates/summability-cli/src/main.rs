//! Batch front end for the summability workbench.
//!
//! Loads matrix and ideal literals (or a JSON matrix file), runs the
//! requested measurement, and emits a machine-readable report — JSON by
//! default, CSV for plot-ready flat tables. Every run is deterministic
//! given its flags: reports are assembled from fixed-order structures,
//! so identical invocations produce identical bytes.
//!
//! Exit codes: `0` — completed, verdict on the Pass/Regular side;
//! `1` — completed, verdict on the Fail/NotRegular side; `2` —
//! completed but inconclusive (horizon ran out, hypotheses unmet);
//! `3` — execution error (parse failures, unresolvable references,
//! horizon too small, I/O); `64` — command-line usage error.
//!
//! Matrix references: a builtin literal (`cesaro`, `euler(0.5)`,
//! `riesz(1,2)`, `tail_projection(64)`, `telescoping(64)`,
//! `random(7)`, `random(7,moving,0.75)`, `alternating_mean`, …) or a
//! path to a JSON file `{ "kind": "custom", "dims": {"d": …, "m": …},
//! "prefix": [[block…]…], "nonnegative": bool }` whose `prefix[n][k]`
//! is an m×d row-major block; rows beyond the prefix are zero. A file
//! whose `kind` names a builtin delegates to that builtin.
//!
//! Ideal literals: `fin`, `density`, `summable`, `nu2`,
//! `generated[descriptor;…]` with descriptors `range(a,b)`, `ap(o,s)`,
//! `squares`, `pow2`, `pairrow(r)`, `nu2level(t)`, `nu2atmost(t)`,
//! `union(…)`, `compl(…)`, `finite(…)`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use summability::{
    builtin_family, builtin_matrix, empirical_regularity, regular_verdict, rh_check,
    row_diagnostics, sign_pattern_witness, sliding_hump, sliding_hump_unbounded, transform,
    BlockMatrix, CheckParams, IdealSpec, NamedFamily, NamedMatrix, NormContext, RegularityMode,
    RegularityOutcome, RegularityReport, SetDescriptor, Witness, WitnessError,
};

// =====================================================================
// Command line surface
// =====================================================================

#[derive(Parser)]
#[command(
    name = "summability",
    version,
    about = "Regularity checks, transforms, and witness constructions for operator matrices",
    long_about = "Batch measurements on matrices of linear operators under ideal convergence: \
                  condition-family checks, sequence transforms, sliding-hump witnesses, \
                  sign-pattern defects, and double-sequence (joint-limit) checks. Reports are \
                  deterministic: identical flags produce identical bytes."
)]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Subcommand)]
enum Task {
    /// Run the regularity condition families on a matrix and report a verdict.
    Check(CheckArgs),
    /// Apply a matrix to sequence families and report the transformed values.
    Transform(TransformArgs),
    /// Construct a sliding-hump witness attaining the row-norm limsup.
    Witness(WitnessArgs),
    /// Extract a sign pattern whose restricted row sums attain the defect.
    HahnSchur(HahnSchurArgs),
    /// Check a named four-index kernel through the valuation-shell bridge.
    Pringsheim(PringsheimArgs),
    /// Full bundle: verdict, behavioral cross-check, and row diagnostics.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Largest row/column index sampled (must be at least 16).
    #[arg(long, default_value_t = 1024)]
    horizon: u64,
    /// Absolute tolerance for limit comparisons.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (`json` or `csv`).
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Seed recorded in the report header; builders that sample carry
    /// their own seed inside the matrix literal.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CheckArgs {
    /// Matrix literal or JSON file path.
    #[arg(long)]
    matrix: String,
    /// Source-side ideal literal.
    #[arg(long, default_value = "fin")]
    ideal_i: String,
    /// Target-side ideal literal.
    #[arg(long, default_value = "fin")]
    ideal_j: String,
    /// Scalar target: conditions compare row sums against this multiple
    /// of the identity.
    #[arg(long, default_value_t = 1.0)]
    target: f64,
    /// Descriptor literals; each becomes a unit-indicator family for the
    /// behavioral cross-check attached to the report.
    #[arg(long, value_delimiter = ';')]
    samples: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TransformArgs {
    /// Matrix literal or JSON file path.
    #[arg(long)]
    matrix: String,
    /// Ideal the sampled families declare their limits under.
    #[arg(long, default_value = "fin")]
    ideal_i: String,
    /// Family literals to transform (default: harmonic-rate convergent
    /// family with limit 1 in every coordinate).
    #[arg(long, value_delimiter = ';')]
    samples: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct WitnessArgs {
    /// Matrix literal or JSON file path.
    #[arg(long)]
    matrix: String,
    /// Target-side ideal literal (needs a generator chain: `fin`, `nu2`,
    /// or `generated[…]`).
    #[arg(long, default_value = "fin")]
    ideal_j: String,
    /// Stage budget for the hump recursion.
    #[arg(long, default_value_t = 6)]
    stages: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct HahnSchurArgs {
    /// Matrix literal or JSON file path (scalar rows required).
    #[arg(long)]
    matrix: String,
    /// Target-side ideal literal (needs a generator chain).
    #[arg(long, default_value = "fin")]
    ideal_j: String,
    /// Stage budget for the underlying hump recursion.
    #[arg(long, default_value_t = 6)]
    stages: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct PringsheimArgs {
    /// Named four-index kernel: `cesaro` (box averaging), `identity`
    /// (diagonal), or `ones` (unnormalized box).
    #[arg(long)]
    matrix: String,
    /// Scalar target for the transported row sums.
    #[arg(long, default_value_t = 1.0)]
    target: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Matrix literal or JSON file path.
    #[arg(long)]
    matrix: String,
    /// Source-side ideal literal.
    #[arg(long, default_value = "fin")]
    ideal_i: String,
    /// Target-side ideal literal.
    #[arg(long, default_value = "fin")]
    ideal_j: String,
    /// Scalar target for row sums.
    #[arg(long, default_value_t = 1.0)]
    target: f64,
    /// Extra descriptor literals added to the behavioral battery as
    /// unit-indicator families.
    #[arg(long, value_delimiter = ';')]
    samples: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

// =====================================================================
// Entry point and exit-code mapping
// =====================================================================

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.task {
        Task::Check(args) => run_check(args),
        Task::Transform(args) => run_transform(args),
        Task::Witness(args) => run_witness(args),
        Task::HahnSchur(args) => run_hahn_schur(args),
        Task::Pringsheim(args) => run_pringsheim(args),
        Task::Report(args) => run_report(args),
    }
}

fn ensure_horizon(h: u64) -> Result<()> {
    if h < 16 {
        bail!("horizon {h} too small (need at least 16)");
    }
    Ok(())
}

fn outcome_exit(outcome: RegularityOutcome) -> u8 {
    match outcome {
        RegularityOutcome::Regular => 0,
        RegularityOutcome::NotRegular => 1,
        RegularityOutcome::Inconclusive => 2,
    }
}

/// Exit code for a witness construction that completed with a verdict
/// rather than an artifact.
fn witness_exit(e: &WitnessError) -> Option<u8> {
    match e {
        WitnessError::NotDivergent { .. } => Some(1),
        WitnessError::HorizonExhausted { .. } | WitnessError::HypothesisFailed { .. } => Some(2),
        _ => None,
    }
}

// =====================================================================
// Matrix and ideal resolution
// =====================================================================

fn parse_ideal(s: &str) -> Result<IdealSpec> {
    s.parse::<IdealSpec>()
        .map_err(|e| anyhow!("ideal literal `{s}`: {e}"))
}

fn parse_samples(samples: &[String]) -> Result<Vec<SetDescriptor>> {
    samples
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.parse::<SetDescriptor>()
                .map_err(|e| anyhow!("sample descriptor `{s}`: {e}"))
        })
        .collect()
}

/// A `--matrix` value naming an existing file loads that file; anything
/// else is a builtin literal.
fn resolve_matrix(spec: &str) -> Result<NamedMatrix> {
    if Path::new(spec).is_file() {
        load_matrix_file(Path::new(spec))
            .with_context(|| format!("matrix file `{spec}`"))
    } else {
        builtin_matrix(spec).map_err(|e| anyhow!("matrix literal `{spec}`: {e}"))
    }
}

fn load_matrix_file(path: &Path) -> Result<NamedMatrix> {
    let text = std::fs::read_to_string(path)?;
    let doc: serde_json::Value = serde_json::from_str(&text).context("not valid JSON")?;
    let kind = doc
        .get("kind")
        .and_then(|v| v.as_str())
        .context("missing string field `kind`")?;
    if kind != "custom" {
        return builtin_matrix(kind).map_err(|e| anyhow!("builtin kind `{kind}`: {e}"));
    }
    let dims = doc.get("dims").context("custom matrix needs `dims`")?;
    let d = dims.get("d").and_then(|v| v.as_u64()).context("dims.d")? as usize;
    let m = dims.get("m").and_then(|v| v.as_u64()).context("dims.m")? as usize;
    if d == 0 || m == 0 {
        bail!("dims must be positive (got d = {d}, m = {m})");
    }
    let prefix_doc = doc
        .get("prefix")
        .and_then(|v| v.as_array())
        .context("custom matrix needs array field `prefix`")?;
    let mut prefix: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(prefix_doc.len());
    for (n, row) in prefix_doc.iter().enumerate() {
        let row = row
            .as_array()
            .with_context(|| format!("prefix[{n}] must be an array of blocks"))?;
        let mut blocks = Vec::with_capacity(row.len());
        for (k, block) in row.iter().enumerate() {
            blocks.push(
                parse_block(block, m, d)
                    .with_context(|| format!("prefix[{n}][{k}]"))?,
            );
        }
        prefix.push(blocks);
    }
    let nonnegative = doc
        .get("nonnegative")
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    let widths: Vec<u64> = prefix.iter().map(|row| row.len() as u64).collect();
    let support_widths = widths.clone();
    let matrix = BlockMatrix::new(m, d, move |n, k| {
        prefix
            .get(n as usize)
            .and_then(|row| row.get(k as usize))
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(m, d))
    })
    .with_row_support_end(move |n| {
        support_widths.get(n as usize).copied().unwrap_or(0)
    })
    .with_nonnegative(nonnegative);
    Ok(NamedMatrix {
        name: format!("file:{}", path.display()),
        matrix,
        note: format!(
            "dense {}-row prefix loaded from file; rows beyond the prefix are zero",
            widths.len()
        ),
        truncation: None,
    })
}

fn parse_block(v: &serde_json::Value, m: usize, d: usize) -> Result<DMatrix<f64>> {
    let rows = v.as_array().context("block must be an array of rows")?;
    if rows.len() != m {
        bail!("block has {} rows, expected {m}", rows.len());
    }
    let mut data = Vec::with_capacity(m * d);
    for row in rows {
        let row = row.as_array().context("block row must be an array")?;
        if row.len() != d {
            bail!("block row has {} entries, expected {d}", row.len());
        }
        for x in row {
            data.push(x.as_f64().context("block entry must be a number")?);
        }
    }
    Ok(DMatrix::from_row_slice(m, d, &data))
}

/// Target operator `target · I` shaped for the matrix's blocks.
fn target_matrix(a: &BlockMatrix, target: f64) -> DMatrix<f64> {
    let (m, d) = a.dims();
    DMatrix::identity(m, d) * target
}

// =====================================================================
// Output assembly
// =====================================================================

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing `{}`", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

/// Quote a CSV field when it contains a comma, quote, or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn job_header(task: &str, common: &CommonArgs, extra: serde_json::Value) -> serde_json::Value {
    let mut job = serde_json::json!({
        "task": task,
        "horizon": common.horizon,
        "tol": common.tol,
    });
    if let Some(seed) = common.seed {
        job["seed"] = serde_json::json!(seed);
    }
    if let serde_json::Value::Object(extra) = extra {
        for (k, v) in extra {
            job[k] = v;
        }
    }
    job
}

/// Flat condition table: one row per evidence value, plus witness,
/// notes, and the overall verdict.
fn conditions_csv(report: &RegularityReport) -> String {
    let mut out = String::from("condition,status,field,value\n");
    for c in &report.conditions {
        let status = format!("{:?}", c.status);
        for (name, v) in &c.evidence.values {
            out.push_str(&format!(
                "{},{},{},{v}\n",
                csv_field(&c.id),
                status,
                csv_field(name)
            ));
        }
        if let Some(w) = &c.evidence.witness {
            out.push_str(&format!(
                "{},{},witness,{}\n",
                csv_field(&c.id),
                status,
                csv_field(w)
            ));
        }
        for (i, note) in c.evidence.notes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},note[{i}],{}\n",
                csv_field(&c.id),
                status,
                csv_field(note)
            ));
        }
    }
    out.push_str(&format!("overall,{},route,{}\n", report.overall, csv_field(&report.theorem)));
    out
}

// =====================================================================
// check
// =====================================================================

fn run_check(args: CheckArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let named = resolve_matrix(&args.matrix)?;
    let i = parse_ideal(&args.ideal_i)?;
    let j = parse_ideal(&args.ideal_j)?;
    let sample_sets = parse_samples(&args.samples)?;
    let mut params = CheckParams::new(args.common.horizon);
    params.tol = args.common.tol;
    let t = target_matrix(&named.matrix, args.target);

    let mut report =
        regular_verdict(&named.matrix, &t, &i, &j, RegularityMode::Auto, &params)?;
    if !sample_sets.is_empty() {
        let fams = indicator_families(&sample_sets, &i)?;
        let trials = fams.iter().map(|f| f.members.len()).sum();
        let behavioral =
            empirical_regularity(&named.matrix, &t, &i, &j, &fams, trials, &params)?;
        report.behavioral = Some(behavioral);
    }

    let exit = outcome_exit(report.overall);
    let content = match args.common.format {
        Format::Json => {
            let job = job_header(
                "check",
                &args.common,
                serde_json::json!({
                    "matrix": named.name,
                    "matrix_note": named.note,
                    "truncation": named.truncation,
                    "ideal_i": i.name(),
                    "ideal_j": j.name(),
                    "target": args.target,
                    "samples": args.samples,
                }),
            );
            json_text(&serde_json::json!({
                "job": job,
                "report": serde_json::to_value(&report)?,
            }))
        }
        Format::Csv => conditions_csv(&report),
    };
    emit(args.common.out.as_deref(), &content)?;
    Ok(exit)
}

/// Unit-indicator families over the given descriptors.
fn indicator_families(sets: &[SetDescriptor], ideal: &IdealSpec) -> Result<Vec<NamedFamily>> {
    sets.iter()
        .map(|s| {
            builtin_family(&format!("c00_supported({s},ones)"), ideal)
                .map_err(|e| anyhow!("sample family over `{s}`: {e}"))
        })
        .collect()
}

// =====================================================================
// transform
// =====================================================================

/// Sparse row grid: a dense start, the powers of two, and the horizon.
fn transform_rows(horizon: u64) -> Vec<u64> {
    let mut rows: Vec<u64> = (0..=3).collect();
    let mut p = 4u64;
    while p < horizon {
        rows.push(p);
        p *= 2;
    }
    rows.push(horizon);
    rows.retain(|&r| r <= horizon);
    rows.sort_unstable();
    rows.dedup();
    rows
}

fn run_transform(args: TransformArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let named = resolve_matrix(&args.matrix)?;
    let i = parse_ideal(&args.ideal_i)?;
    let (_, d) = named.matrix.dims();
    let specs: Vec<String> = if args.samples.is_empty() {
        let ones = vec!["1"; d].join(",");
        vec![format!("convergent({ones},harmonic)")]
    } else {
        args.samples.clone()
    };
    let families: Vec<NamedFamily> = specs
        .iter()
        .map(|s| builtin_family(s, &i).map_err(|e| anyhow!("family literal `{s}`: {e}")))
        .collect::<Result<_>>()?;

    let rows = transform_rows(args.common.horizon);
    let mut results = Vec::new();
    for fam in &families {
        for mem in &fam.members {
            for &n in &rows {
                let r = transform(&named.matrix, &mem.x, n, args.common.horizon, args.common.tol)?;
                results.push(serde_json::json!({
                    "family": fam.name,
                    "member": mem.label,
                    "row": n,
                    "value": r.value,
                    "remainder": r.remainder,
                    "certified": r.certified,
                    "columns": r.columns,
                }));
            }
        }
    }

    let content = match args.common.format {
        Format::Json => {
            let job = job_header(
                "transform",
                &args.common,
                serde_json::json!({
                    "matrix": named.name,
                    "ideal_i": i.name(),
                    "samples": specs,
                }),
            );
            json_text(&serde_json::json!({ "job": job, "results": results }))
        }
        Format::Csv => {
            let mut out =
                String::from("family,member,row,component,value,remainder,certified,columns\n");
            for r in &results {
                let value = r["value"].as_array().expect("value array");
                for (c, v) in value.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{c},{},{},{},{}\n",
                        csv_field(r["family"].as_str().expect("family")),
                        csv_field(r["member"].as_str().expect("member")),
                        r["row"],
                        v,
                        r["remainder"],
                        r["certified"],
                        r["columns"],
                    ));
                }
            }
            out
        }
    };
    emit(args.common.out.as_deref(), &content)?;
    Ok(0)
}

// =====================================================================
// witness
// =====================================================================

fn witness_json(kind: &str, w: &Witness) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "kind": kind,
        "support": w.support.to_string(),
        "rows": w.rows,
        "target": w.target,
        "target_bracket": [w.target_bracket.0, w.target_bracket.1],
        "achieved": w.achieved,
        "achieved_bracket": [w.achieved_bracket.0, w.achieved_bracket.1],
        "requested_stages": w.requested_stages,
        "horizon": w.horizon,
        "notes": w.notes,
        "stages": serde_json::to_value(&w.stages)?,
    }))
}

fn stage_csv(w: &Witness) -> String {
    let mut out = String::from(
        "stage,row,cut,block_lo,block_hi,tolerance,demand,block_value,reading,chain_index\n",
    );
    for s in &w.stages {
        let chain = s
            .chain_index
            .map(|c| c.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{chain}\n",
            s.stage,
            s.row,
            s.cut,
            s.block.0,
            s.block.1,
            s.tolerance,
            s.demand,
            s.block_value,
            s.reading,
        ));
    }
    out
}

fn run_witness(args: WitnessArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let named = resolve_matrix(&args.matrix)?;
    let j = parse_ideal(&args.ideal_j)?;
    let ctx = NormContext::one_norm();

    // Bounded recursion first; when its hypotheses fail (divergent row
    // norms), fall through to the unbounded recursion.
    let (kind, outcome) = match sliding_hump(
        &named.matrix,
        &j,
        args.common.horizon,
        args.stages,
        ctx,
    ) {
        Ok(w) => ("bounded", Ok(w)),
        Err(WitnessError::HypothesisFailed { .. }) => (
            "unbounded",
            sliding_hump_unbounded(&named.matrix, &j, args.common.horizon, args.stages, ctx),
        ),
        Err(e) => ("bounded", Err(e)),
    };

    let job = job_header(
        "witness",
        &args.common,
        serde_json::json!({
            "matrix": named.name,
            "ideal_j": j.name(),
            "stages": args.stages,
        }),
    );
    match outcome {
        Ok(w) => {
            let content = match args.common.format {
                Format::Json => json_text(&serde_json::json!({
                    "job": job,
                    "witness": witness_json(kind, &w)?,
                })),
                Format::Csv => stage_csv(&w),
            };
            emit(args.common.out.as_deref(), &content)?;
            Ok(0)
        }
        Err(e) => match witness_exit(&e) {
            Some(code) => {
                let content = match args.common.format {
                    Format::Json => json_text(&serde_json::json!({
                        "job": job,
                        "witness": serde_json::Value::Null,
                        "outcome": e.to_string(),
                    })),
                    Format::Csv => format!("outcome\n{}\n", csv_field(&e.to_string())),
                };
                emit(args.common.out.as_deref(), &content)?;
                Ok(code)
            }
            None => Err(e.into()),
        },
    }
}

// =====================================================================
// hahn-schur
// =====================================================================

fn run_hahn_schur(args: HahnSchurArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let named = resolve_matrix(&args.matrix)?;
    let j = parse_ideal(&args.ideal_j)?;
    let job = job_header(
        "hahn-schur",
        &args.common,
        serde_json::json!({
            "matrix": named.name,
            "ideal_j": j.name(),
            "stages": args.stages,
        }),
    );
    match sign_pattern_witness(&named.matrix, &j, args.common.horizon, args.stages) {
        Ok(report) => {
            let content = match args.common.format {
                Format::Json => json_text(&serde_json::json!({
                    "job": job,
                    "report": {
                        "e": report.e.to_string(),
                        "defect": report.defect,
                        "eta0": report.eta0,
                        "achieved": report.achieved,
                        "rows": report.rows,
                        "notes": report.notes,
                    },
                })),
                Format::Csv => {
                    let mut out = String::from("quantity,value\n");
                    out.push_str(&format!("pattern,{}\n", csv_field(&report.e.to_string())));
                    out.push_str(&format!("defect,{}\n", report.defect));
                    out.push_str(&format!("eta0,{}\n", report.eta0));
                    out.push_str(&format!("achieved,{}\n", report.achieved));
                    for (i, n) in report.rows.iter().enumerate() {
                        out.push_str(&format!("row[{i}],{n}\n"));
                    }
                    out
                }
            };
            emit(args.common.out.as_deref(), &content)?;
            Ok(0)
        }
        Err(e) => match witness_exit(&e) {
            Some(code) => {
                let content = match args.common.format {
                    Format::Json => json_text(&serde_json::json!({
                        "job": job,
                        "report": serde_json::Value::Null,
                        "outcome": e.to_string(),
                    })),
                    Format::Csv => format!("outcome\n{}\n", csv_field(&e.to_string())),
                };
                emit(args.common.out.as_deref(), &content)?;
                Ok(code)
            }
            None => Err(e.into()),
        },
    }
}

// =====================================================================
// pringsheim
// =====================================================================

fn run_pringsheim(args: PringsheimArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let horizon = args.common.horizon;
    let tol = args.common.tol;
    let target = args.target;
    let report = match args.matrix.as_str() {
        "cesaro" => rh_check(
            move |(m, n), (p, q)| {
                if p <= m && q <= n {
                    target / ((m + 1) * (n + 1)) as f64
                } else {
                    0.0
                }
            },
            target,
            horizon,
            tol,
        )?,
        "identity" => rh_check(
            move |(m, n), (p, q)| {
                if (m, n) == (p, q) {
                    target
                } else {
                    0.0
                }
            },
            target,
            horizon,
            tol,
        )?,
        "ones" => rh_check(
            move |(m, n), (p, q)| if p <= m && q <= n { target } else { 0.0 },
            target,
            horizon,
            tol,
        )?,
        other => bail!(
            "unknown double kernel `{other}` (expected cesaro, identity, or ones)"
        ),
    };

    let exit = outcome_exit(report.overall);
    let content = match args.common.format {
        Format::Json => {
            let job = job_header(
                "pringsheim",
                &args.common,
                serde_json::json!({
                    "matrix": args.matrix,
                    "target": args.target,
                }),
            );
            json_text(&serde_json::json!({
                "job": job,
                "report": serde_json::to_value(&report)?,
            }))
        }
        Format::Csv => conditions_csv(&report),
    };
    emit(args.common.out.as_deref(), &content)?;
    Ok(exit)
}

// =====================================================================
// report
// =====================================================================

fn run_report(args: ReportArgs) -> Result<u8> {
    ensure_horizon(args.common.horizon)?;
    let named = resolve_matrix(&args.matrix)?;
    let i = parse_ideal(&args.ideal_i)?;
    let j = parse_ideal(&args.ideal_j)?;
    let sample_sets = parse_samples(&args.samples)?;
    let mut params = CheckParams::new(args.common.horizon);
    params.tol = args.common.tol;
    let t = target_matrix(&named.matrix, args.target);

    let mut report =
        regular_verdict(&named.matrix, &t, &i, &j, RegularityMode::Auto, &params)?;

    // Behavioral battery: norm-convergent families at two rates, plus
    // any unit-indicator families the caller supplied.
    let (_, d) = named.matrix.dims();
    let ones = vec!["1"; d].join(",");
    let mut fams: Vec<NamedFamily> = vec![
        builtin_family(&format!("convergent({ones},harmonic)"), &i)
            .map_err(|e| anyhow!("battery family: {e}"))?,
        builtin_family(&format!("convergent({ones},geometric:0.5)"), &i)
            .map_err(|e| anyhow!("battery family: {e}"))?,
    ];
    fams.extend(indicator_families(&sample_sets, &i)?);
    let trials = fams.iter().map(|f| f.members.len()).sum();
    report.behavioral =
        Some(empirical_regularity(&named.matrix, &t, &i, &j, &fams, trials, &params)?);

    let diagnostics = row_diagnostics(&named.matrix, &t, &params)?;

    let exit = outcome_exit(report.overall);
    let content = match args.common.format {
        Format::Json => {
            let job = job_header(
                "report",
                &args.common,
                serde_json::json!({
                    "matrix": named.name,
                    "matrix_note": named.note,
                    "truncation": named.truncation,
                    "ideal_i": i.name(),
                    "ideal_j": j.name(),
                    "target": args.target,
                    "samples": args.samples,
                }),
            );
            json_text(&serde_json::json!({
                "job": job,
                "report": serde_json::to_value(&report)?,
                "diagnostics": serde_json::to_value(&diagnostics)?,
            }))
        }
        Format::Csv => {
            let mut out =
                String::from("n,total_mass,row_sum_deviation,tail_mass_mid,last_nonzero\n");
            for diag in &diagnostics {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    diag.n,
                    diag.total_mass,
                    diag.row_sum_deviation,
                    diag.tail_mass_mid,
                    diag.last_nonzero,
                ));
            }
            out
        }
    };
    emit(args.common.out.as_deref(), &content)?;
    Ok(exit)
}
