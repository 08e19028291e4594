use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use blindconv::channel::{generate_dataset, random_interleaver};
use blindconv::classify::{classify_equations, format_groups};
use blindconv::conv::{format_checks, parse_checks};
use blindconv::dual::{find_parity_checks, Engine, RecoveryParams};
use blindconv::pipeline::{reconstruct, reconstruct_from_checks, truth_check, verify_candidate, ReconstructParams, Truth};
use blindconv::{ConvCode, Dataset, Interleaver, ParityCheck};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "blindconv", version, about = "Blind reconstruction of an interleaved convolutional code")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate interleaved noisy codewords.
    Gen(GenArgs),
    /// Search the data for low-weight parity checks.
    FindDuals(FindArgs),
    /// Group parity checks by type and deduce n.
    Classify(ClassifyArgs),
    /// Run the whole reconstruction.
    Reconstruct(ReconArgs),
    /// Check the candidates of a report against data and, optionally, the truth.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Named code (C1, C2, C3) or generator polynomials like `1+D+D2,1+D2+D3`.
    #[arg(long)]
    code: String,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the code and interleaver used, as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the binary format instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Auto,
    Collision,
    InformationSet,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Collision => Engine::Collision,
            EngineArg::InformationSet => Engine::InformationSet,
        }
    }
}

#[derive(Args)]
struct FindArgs {
    data: PathBuf,
    #[arg(long)]
    t: usize,
    /// Crossover estimate used for the acceptance threshold.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Equation list, as written by `find-duals`.
    checks: PathBuf,
    /// Codeword length; read from the list header when omitted.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconArgs {
    data: PathBuf,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    smax: usize,
    /// Crossover estimate; the plug-in estimate is used when omitted.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineArg,
    /// Start from this equation list instead of searching the data.
    #[arg(long)]
    checks: Option<PathBuf>,
    /// Truth file from `gen --truth`, for simulation runs.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON report from `reconstruct`.
    report: PathBuf,
    data: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
}

/// Failure of a pipeline stage, as opposed to bad input.
#[derive(Debug)]
struct StageFailure(String);

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for StageFailure {}

fn parse_code(s: &str) -> anyhow::Result<ConvCode> {
    match ConvCode::named(s) {
        Some(c) => Ok(c),
        None => s.parse().map_err(|e| anyhow!("unknown code '{s}': {e}")),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_truth(path: &Path) -> anyhow::Result<Truth> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
    let code = parse_code(v["code"].as_str().ok_or_else(|| anyhow!("truth file lacks 'code'"))?)?;
    let map: Vec<u32> = serde_json::from_value(v["interleaver"].clone()).context("truth file lacks 'interleaver'")?;
    Ok(Truth { code, interleaver: Interleaver::new(map)? })
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("reading {}", path.display()))
}

fn gen(a: &GenArgs) -> anyhow::Result<()> {
    let code = parse_code(&a.code)?;
    if a.n == 0 || a.n % code.n() != 0 {
        bail!("N={} is not a positive multiple of n={}", a.n, code.n());
    }
    let pi = random_interleaver(a.n, a.seed)?;
    let data = generate_dataset(&code, &pi, a.p, a.m, a.n / code.n(), a.seed)?;
    let mut buf = Vec::new();
    if a.binary {
        data.write_binary(&mut buf)?;
    } else {
        data.write_text(&mut buf)?;
    }
    fs::write(&a.out, buf).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(t) = &a.truth {
        let v = json!({ "code": code.to_string(), "interleaver": pi.map() });
        fs::write(t, serde_json::to_string(&v)?)?;
    }
    Ok(())
}

fn find_duals(a: &FindArgs, as_json: bool) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let mut params = RecoveryParams::new(a.t);
    params.p_est = a.p;
    params.seed = a.seed;
    params.engine = a.engine.into();
    let checks = find_parity_checks(&data, &params).map_err(|e| StageFailure(format!("find-duals: {e}")))?;
    let text = if as_json {
        serde_json::to_string_pretty(&json!({ "n_total": data.n, "t": a.t, "checks": checks }))? + "\n"
    } else {
        format!("# N={} t={} count={}\n{}", data.n, a.t, checks.len(), format_checks(&checks))
    };
    write_out(a.out.as_deref(), &text)
}

/// Equation list plus the `N` from its header, if any.
fn read_checks(path: &Path) -> anyhow::Result<(Vec<ParityCheck>, Option<usize>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text)?;
        let checks = serde_json::from_value(v["checks"].clone()).context("JSON list lacks 'checks'")?;
        return Ok((checks, v["n_total"].as_u64().map(|n| n as usize)));
    }
    let n = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# N="))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|v| v.parse().ok());
    Ok((parse_checks(&text)?, n))
}

fn classify(a: &ClassifyArgs, as_json: bool) -> anyhow::Result<()> {
    let (checks, header_n) = read_checks(&a.checks)?;
    let n_total = a.n.or(header_n).ok_or_else(|| anyhow!("--N is required when the list has no header"))?;
    let c = classify_equations(&checks, n_total).map_err(|e| StageFailure(format!("classify: {e}")))?;
    let text = if as_json { serde_json::to_string_pretty(&c)? + "\n" } else { format_groups(&c) };
    write_out(a.out.as_deref(), &text)
}

fn reconstruct_cmd(a: &ReconArgs, as_json: bool) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let mut params = ReconstructParams::new(a.t, a.smax);
    params.p_est = a.p;
    params.seed = a.seed;
    params.engine = a.engine.into();
    let report = match &a.checks {
        Some(path) => reconstruct_from_checks(&data, &read_checks(path)?.0, &params, truth.as_ref()),
        None => reconstruct(&data, &params, truth.as_ref()),
    };
    let json_text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &a.out {
        fs::write(out, &json_text).with_context(|| format!("writing {}", out.display()))?;
    }
    if as_json {
        print!("{json_text}");
    } else {
        print!("{}", report.summary());
    }
    if !report.verdict.success {
        let why = match &report.failure {
            Some(f) => format!("stage {} failed: {}", f.stage, f.message),
            None => "no candidate passed verification".to_string(),
        };
        return Err(StageFailure(why).into());
    }
    Ok(())
}

fn verify(a: &VerifyArgs, as_json: bool) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let report: Value = serde_json::from_str(&fs::read_to_string(&a.report)?)?;
    let n = report["recovered_n"].as_u64().ok_or_else(|| anyhow!("report has no recovered n"))? as usize;
    let p_est = a.p.or(report["p_est"].as_f64()).unwrap_or(0.0);
    let cands = report["candidates"].as_array().cloned().unwrap_or_default();
    let mut rows = Vec::new();
    for c in &cands {
        let e: ParityCheck = serde_json::from_value(c["e_hat"].clone())?;
        let pi = Interleaver::new(serde_json::from_value(c["interleaver"].clone())?)?;
        let (blind, min_satisfied) = verify_candidate(&e, n, &pi, &data, p_est)?;
        let truth_pass = truth.as_ref().map(|t| truth_check(&e, n, &pi, t));
        rows.push(json!({ "e_hat": e, "blind": blind, "truth": truth_pass, "min_satisfied": min_satisfied }));
    }
    let blind = rows.iter().any(|r| r["blind"] == true);
    let truth_ok = truth.as_ref().map(|_| rows.iter().any(|r| r["blind"] == true && r["truth"] == true));
    let success = blind && truth_ok.unwrap_or(true);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&json!({ "candidates": rows, "blind": blind, "truth": truth_ok, "success": success }))?);
    } else {
        let passing = rows.iter().filter(|r| r["blind"] == true).count();
        println!("{passing} of {} candidates pass blind verification", rows.len());
        if let Some(t) = truth_ok {
            println!("truth: {}", if t { "pass" } else { "fail" });
        }
        println!("verdict: {}", if success { "pass" } else { "fail" });
    }
    if !success {
        return Err(StageFailure("verification failed".into()).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::FindDuals(a) => find_duals(a, cli.json),
        Cmd::Classify(a) => classify(a, cli.json),
        Cmd::Reconstruct(a) => reconstruct_cmd(a, cli.json),
        Cmd::Verify(a) => verify(a, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<StageFailure>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_STAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
