use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wegnerflow::geometry::{band_condition_at, CaseLabel};
use wegnerflow::models::FamilyKind;
use wegnerflow::pipeline::{
    run_flow, run_geodesic, run_metric, summarize_flow, FlowSummary, RunSpec,
};
use wegnerflow::report::{
    metric_csv, residual_csv, to_json, trajectory_csv, write_sidecar, Check, Verdict, F17,
};
use wegnerflow::verify::{verify_all, VerifyOptions};
use wegnerflow::{Error, StopReason};

const EXIT_SPEC: u8 = 2;
const EXIT_INTEGRATOR: u8 = 3;
const EXIT_CHECK_ERROR: u8 = 4;

#[derive(Parser)]
#[command(
    name = "wegnerflow",
    version,
    about = "Wegner flow equations and the geometry of the induced state flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Run specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write the trajectory and a summary.
    Flow(Io),
    /// Scan the metric of the model family against its closed form.
    Metric(Io),
    /// Flow, project onto the model family and run the geometric checks.
    Geodesic(Io),
    /// Evaluate the band-multiple condition for the band at position `a`.
    Condition {
        #[arg(long, value_delimiter = ',', required = true)]
        bands: Vec<usize>,
        /// 1-based position of the target band in the sorted list.
        #[arg(long)]
        a: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    VerifyAll {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Scale applied to every upper-bound tolerance (testing only).
        #[arg(long, default_value_t = 1.0, hide = true)]
        tolerance_scale: f64,
        /// Run only the listed criteria (testing only).
        #[arg(long, value_delimiter = ',', hide = true)]
        criteria: Option<Vec<u32>>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IntegratorFailure { .. } | Error::UnitarityDrift { .. } => EXIT_INTEGRATOR,
            _ => EXIT_SPEC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Flow(io) => cmd_flow(&io),
        Command::Metric(io) => cmd_metric(&io),
        Command::Geodesic(io) => cmd_geodesic(&io),
        Command::Condition { bands, a, out } => cmd_condition(&bands, a, out.as_deref()),
        Command::VerifyAll {
            out,
            seed,
            tolerance_scale,
            criteria,
            ..
        } => cmd_verify_all(
            &out,
            VerifyOptions {
                seed,
                tolerance_scale,
                only: criteria,
            },
        ),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(io: &Io) -> Result<RunSpec, Failure> {
    let text = fs::read_to_string(&io.spec).map_err(|e| Failure {
        code: EXIT_SPEC,
        message: format!("cannot read spec {}: {e}", io.spec.display()),
    })?;
    let base = io.spec.parent().unwrap_or(Path::new("."));
    Ok(RunSpec::from_json(&text, base)?)
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: EXIT_SPEC,
        message: format!("output directory {} is not writable: {e}", dir.display()),
    })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), body).map_err(|e| Failure {
        code: EXIT_SPEC,
        message: format!("cannot write {}: {e}", dir.join(name).display()),
    })
}

fn family_name(kind: &FamilyKind) -> String {
    match *kind {
        FamilyKind::Displacement { .. } => "displacement".into(),
        FamilyKind::Squeeze { n, .. } => format!("squeeze(n={n})"),
        FamilyKind::Spin { s, m } => format!("spin(s={s},m={m})"),
        FamilyKind::Jc { n, .. } => format!("jc(sector={n})"),
    }
}

#[derive(Serialize)]
struct FlowReport<'a> {
    schema_version: u32,
    command: &'static str,
    #[serde(flatten)]
    summary: &'a FlowSummary,
}

fn cmd_flow(io: &Io) -> Outcome {
    let spec = load(io)?;
    out_dir(&io.out)?;
    let (h0, traj) = run_flow(&spec)?;
    let summary = summarize_flow(&h0, &traj, spec.flow_config().cluster_tol_rel);
    write(&io.out, "trajectory.csv", &trajectory_csv(&traj))?;
    let report = FlowReport {
        schema_version: wegnerflow::report::SCHEMA_VERSION,
        command: "flow",
        summary: &summary,
    };
    write(&io.out, "summary.json", &to_json(&report)?)?;
    write_sidecar(&io.out, "flow")?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "flow: {:?} at l = {}, off-diagonal norm^2 {:e}",
        traj.stop_reason,
        traj.last().l,
        traj.last().offdiag_sq
    );
    Ok(0)
}

#[derive(Serialize)]
struct MetricContext {
    command: &'static str,
    family: String,
    coordinates: Vec<String>,
}

fn metric_tolerance(kind: &FamilyKind) -> f64 {
    match kind {
        FamilyKind::Displacement { .. } => 1e-6,
        FamilyKind::Squeeze { .. } => 1e-4,
        FamilyKind::Spin { .. } | FamilyKind::Jc { .. } => 1e-5,
    }
}

fn cmd_metric(io: &Io) -> Outcome {
    let spec = load(io)?;
    out_dir(&io.out)?;
    let (mf, samples, errors) = run_metric(&spec)?;
    let names = mf.family.coord_names().to_vec();
    write(&io.out, "metric.csv", &metric_csv(&names, &samples))?;
    let tol = metric_tolerance(&mf.kind);
    let checks = errors
        .iter()
        .zip(&samples)
        .enumerate()
        .map(|(k, (&e, s))| {
            Check::at_most(format!("metric_error_{k}"), e, tol)
                .with_detail(format!("alpha = {:?}", s.alpha))
        })
        .collect();
    let verdict = Verdict::new(
        MetricContext {
            command: "metric",
            family: family_name(&mf.kind),
            coordinates: names,
        },
        checks,
    );
    write(&io.out, "verdict.json", &to_json(&verdict)?)?;
    write_sidecar(&io.out, "metric")?;
    println!(
        "metric: {} grid points, all pass = {}",
        samples.len(),
        verdict.all_pass()
    );
    Ok(0)
}

#[derive(Serialize)]
struct CheckError {
    check: String,
    error: String,
}

#[derive(Serialize)]
struct GeodesicContext {
    command: &'static str,
    family: String,
    coordinates: Vec<String>,
    stop_reason: StopReason,
    l_final: F17,
    #[serde(skip_serializing_if = "Option::is_none")]
    case: Option<CaseLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<F17>,
    all_pass: bool,
    errors: Vec<CheckError>,
}

fn cmd_geodesic(io: &Io) -> Outcome {
    let spec = load(io)?;
    out_dir(&io.out)?;
    let run = run_geodesic(&spec)?;
    let names = run.family.family.coord_names().to_vec();
    write(&io.out, "trajectory.csv", &trajectory_csv(&run.flow))?;
    if let Some(t) = &run.geodesic_table {
        write(
            &io.out,
            "geodesic.csv",
            &residual_csv(&names, &t.l, &t.s, &t.alpha, &t.residual),
        )?;
    }
    let errors: Vec<CheckError> = run
        .errors
        .iter()
        .map(|(c, e)| CheckError {
            check: c.clone(),
            error: e.clone(),
        })
        .collect();
    let all_pass = errors.is_empty() && run.checks.iter().all(|c| c.pass);
    let verdict = Verdict::new(
        GeodesicContext {
            command: "geodesic",
            family: family_name(&run.family.kind),
            coordinates: names,
            stop_reason: run.flow.stop_reason,
            l_final: F17(run.flow.last().l),
            case: run.case,
            gap: run.gap.map(F17),
            all_pass,
            errors,
        },
        run.checks.clone(),
    );
    write(&io.out, "verdict.json", &to_json(&verdict)?)?;
    write_sidecar(&io.out, "geodesic")?;
    for c in &run.checks {
        println!(
            "{:<28} {:<4} {:e} (tolerance {:e})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.max_residual.0,
            c.tolerance.0
        );
    }
    if run.errors.is_empty() {
        return Ok(0);
    }
    for (c, e) in &run.errors {
        eprintln!("error in {c}: {e}");
    }
    Ok(EXIT_CHECK_ERROR)
}

#[derive(Serialize)]
struct ConditionReport<'a> {
    schema_version: u32,
    bands: &'a [usize],
    a: usize,
    holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    offender: Option<Offender>,
}

#[derive(Serialize)]
struct Offender {
    band: usize,
    multiple: usize,
}

fn cmd_condition(bands: &[usize], a: usize, out: Option<&Path>) -> Outcome {
    let c = band_condition_at(bands, a)?;
    match c.offender {
        Some((b, m)) => println!("false (offender: band {b} = {m}x)"),
        None => println!("true"),
    }
    if let Some(dir) = out {
        out_dir(dir)?;
        let report = ConditionReport {
            schema_version: wegnerflow::report::SCHEMA_VERSION,
            bands,
            a,
            holds: c.holds,
            offender: c
                .offender
                .map(|(band, multiple)| Offender { band, multiple }),
        };
        write(dir, "condition.json", &to_json(&report)?)?;
        write_sidecar(dir, "condition")?;
    }
    Ok(0)
}

fn cmd_verify_all(out: &Path, opts: VerifyOptions) -> Outcome {
    out_dir(out)?;
    let report = verify_all(&opts, |c| {
        println!(
            "criterion {:>2} {}  {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.title
        );
        for k in c.checks.iter().filter(|k| !k.pass) {
            println!(
                "    failed check c{}.{}: {:e} vs {:e}",
                c.id, k.name, k.max_residual.0, k.tolerance.0
            );
        }
        for e in &c.errors {
            println!("    error: {e}");
        }
    });
    write(out, "verify.json", &to_json(&report.verdict())?)?;
    write_sidecar(out, "verify-all")?;
    let failed = report.failed();
    if failed.is_empty() {
        return Ok(0);
    }
    let list: Vec<String> = failed.iter().map(u32::to_string).collect();
    eprintln!("failed criteria: {}", list.join(", "));
    Ok(1)
}
