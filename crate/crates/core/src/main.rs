use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wijsman_lab::cli::{
    emit_trace_csv, load_sequence, parse_count, parse_number, parse_theta, write_json, RunConfig,
};
use wijsman_lab::constructions::{self, ConstructionKind, EpsRule, SeparationParams, DEFAULT_SEARCH_CAP};
use wijsman_lab::diagnostics::{assess, trace_rows, AssessConfig, Mode, UiNormalization, WitnessSet};
use wijsman_lab::metric_sets::SequenceFile;
use wijsman_lab::modulus::{check_axioms, classify_compatibility, AxiomGrid, Builtin, ClassifyOptions, ModulusFunction, Probe};
use wijsman_lab::reproduce::{reproduce, write_report, TheoremId};
use wijsman_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "wijsman-lab", version, about = "Modulus-modulated convergence diagnostics for sequences of closed sets")]
struct Cli {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Modulus function checks.
    Modulus {
        #[command(subcommand)]
        action: ModulusAction,
    },
    /// Evaluate a convergence mode on a set sequence and write its trace.
    Diagnose(DiagnoseArgs),
    /// Build a separating construction.
    Construct(ConstructArgs),
    /// Run a theorem reproduction suite.
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
enum ModulusAction {
    /// Axiom checks and compatibility classification.
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Builtin name, optionally with inline parameters: `power_sum(0.5,1)`.
    #[arg(long = "fn")]
    modulus: Option<String>,
    /// Builtin parameter `name=value`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    eps_min: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Set-sequence file or construction reference such as `stat:fn=log1p,c=0.5,K=8`.
    #[arg(long)]
    seq: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "fn")]
    modulus: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    /// Comma-separated eps grid, e.g. `2^-1,2^-2`.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<String>,
    /// Comma-separated scalar witnesses.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    witness: Vec<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Truncation; defaults to min(100000, sequence length).
    #[arg(long = "N")]
    scale: Option<String>,
    /// Use raw block sums in the lacunary UI diagnostic.
    #[arg(long)]
    ui_unnormalized: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    kind: Option<String>,
    #[arg(long = "fn")]
    modulus: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long = "K")]
    checkpoints: Option<String>,
    #[arg(long)]
    eps_rule: Option<String>,
    #[arg(long)]
    search_cap: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_seq: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    theorem: Option<String>,
    #[arg(long = "fn")]
    modulus: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long = "K")]
    checkpoints: Option<String>,
    #[arg(long)]
    eps_rule: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long = "N")]
    scale: Option<String>,
    #[arg(long)]
    traces: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report and CSV traces.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn num(flag: Option<String>, cfg: Option<f64>) -> Result<Option<f64>> {
    flag.as_deref().map(parse_number).transpose().map(|v| v.or(cfg))
}

fn count(flag: Option<String>, cfg: Option<u64>) -> Result<Option<u64>> {
    flag.as_deref().map(parse_count).transpose().map(|v| v.or(cfg))
}

fn required<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("missing --{what}")))
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    match cli.command {
        Command::Modulus { action: ModulusAction::Check(a) } => modulus_check(a, &cfg),
        Command::Diagnose(a) => diagnose(a, &cfg),
        Command::Construct(a) => construct(a, &cfg),
        Command::Reproduce(a) => run_reproduce(a, cfg),
    }
}

fn modulus_check(a: CheckArgs, cfg: &RunConfig) -> Result<u8> {
    let name = required(a.modulus.or(cfg.modulus.clone()), "fn")?;
    let mut params: Vec<(String, f64)> = cfg.params.clone().unwrap_or_default().into_iter().collect();
    for p in &a.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("--param expects name=value, got `{p}`")))?;
        params.retain(|(name, _)| name != k);
        params.push((k.to_string(), parse_number(v)?));
    }
    let f = if params.is_empty() {
        wijsman_lab::make_builtin(&name)?
    } else {
        ModulusFunction::builtin(Builtin::from_parts(&name, &params)?)?
    };
    let eps_min = num(a.eps_min, cfg.eps_min)?.unwrap_or(2f64.powi(-20));
    let n_max = count(a.n_max, cfg.n_max)?.unwrap_or(1 << 40);
    let threshold = num(a.threshold, cfg.threshold)?.unwrap_or(0.05);
    if !(eps_min > 0.0 && eps_min < 1.0) {
        return Err(Error::InvalidParameter(format!("--eps-min must lie in (0, 1), got {eps_min}")));
    }
    let eps_grid: Vec<f64> = (0..).map(|i| 2f64.powi(-i)).take_while(|&e| e >= eps_min).collect();
    let opts = ClassifyOptions { probe: Probe { n_max, ..Probe::default() }, threshold, ..ClassifyOptions::default() };
    let axioms = check_axioms(&f, &AxiomGrid::default())?;
    let class = classify_compatibility(&f, &eps_grid, &opts)?;
    let report = json!({
        "name": f.name(),
        "axioms": axioms,
        "phi": class.phi_estimates,
        "verdict": class.verdict,
        "threshold": threshold,
        "n_max": n_max,
        "tail_slope": class.tail_slope,
    });
    emit_json(&report, a.out.or(cfg.out.clone()))?;
    Ok(0)
}

fn emit_json(value: &serde_json::Value, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => write_json(value, &path),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

fn diagnose(a: DiagnoseArgs, cfg: &RunConfig) -> Result<u8> {
    let seq = load_sequence(&required(a.seq.or(cfg.seq.clone()), "seq")?)?;
    let mode: Mode = required(a.mode.or(cfg.mode.clone()), "mode")?.parse()?;
    let scale = count(a.scale, cfg.scale)?.unwrap_or_else(|| seq.len().min(100_000));
    let mut ac = AssessConfig::new(mode, scale);
    if let Some(d) = num(a.delta, cfg.delta)? {
        ac = ac.with_delta(d);
    }
    if !a.eps.is_empty() {
        ac = ac.with_eps_grid(a.eps.iter().map(|e| parse_number(e)).collect::<Result<_>>()?);
    } else if let Some(grid) = &cfg.eps {
        ac = ac.with_eps_grid(grid.clone());
    }
    if let Some(f) = a.modulus.or(cfg.modulus.clone()) {
        ac = ac.with_modulus(wijsman_lab::make_builtin(&f)?);
    }
    let theta = a.theta.or(cfg.theta.clone()).or_else(|| mode.needs_schedule().then(|| "pow2".to_string()));
    if let Some(rule) = theta {
        ac = ac.with_schedule(parse_theta(&rule)?);
    }
    if a.ui_unnormalized {
        ac.ui_normalization = UiNormalization::Unnormalized;
    }
    let witnesses = if !a.witness.is_empty() {
        WitnessSet::scalars(&a.witness.iter().map(|w| parse_number(w)).collect::<Result<Vec<_>>>()?)?
    } else if let Some(ws) = &cfg.witnesses {
        WitnessSet::scalars(ws)?
    } else {
        WitnessSet::default_line()
    };
    let verdict = assess(&seq, &witnesses, &ac)?;
    if let Some(out) = a.out.or(cfg.out.clone()) {
        emit_trace_csv(&trace_rows(&seq, &witnesses, &ac)?, &out)?;
    }
    let mut value = serde_json::to_value(&verdict)?;
    value["seed"] = json!(cfg.seed());
    emit_json(&value, None)?;
    Ok(0)
}

fn construct(a: ConstructArgs, cfg: &RunConfig) -> Result<u8> {
    let kind: ConstructionKind = required(a.kind.or(cfg.kind.clone()), "kind")?.parse()?;
    let f = wijsman_lab::make_builtin(&a.modulus.or(cfg.modulus.clone()).unwrap_or_else(|| "log1p".into()))?;
    let c = num(a.c, cfg.c)?.unwrap_or(0.5);
    let k = count(a.checkpoints, cfg.checkpoints.map(|k| k as u64))?.unwrap_or(8) as usize;
    let mut p = SeparationParams::new(f, c, k)
        .with_search_cap(count(a.search_cap, cfg.search_cap)?.unwrap_or(DEFAULT_SEARCH_CAP));
    if let Some(rule) = a.eps_rule.or(cfg.eps_rule.clone()) {
        p = p.with_eps_rule(rule.parse::<EpsRule>()?);
    }
    let theta = a.theta.or(cfg.theta.clone()).or_else(|| kind.is_lacunary().then(|| "pow2".to_string()));
    if let Some(rule) = theta {
        p = p.with_theta(parse_theta(&rule)?);
    }
    let sep = constructions::build(kind, &p)?;
    let mut value = serde_json::to_value(&sep.schedule)?;
    value["seed"] = json!(cfg.seed());
    emit_json(&value, a.out.or(cfg.out.clone()))?;
    if let Some(path) = a.emit_seq.or(cfg.emit_seq.clone()) {
        write_json(&SequenceFile::from_sequence(&sep.sequence), &path)?;
    }
    Ok(0)
}

fn run_reproduce(a: ReproduceArgs, mut cfg: RunConfig) -> Result<u8> {
    let id: TheoremId = required(a.theorem.or(cfg.theorem.clone()), "theorem")?.parse()?;
    cfg.modulus = a.modulus.or(cfg.modulus);
    cfg.c = num(a.c, cfg.c)?;
    cfg.checkpoints = count(a.checkpoints, cfg.checkpoints.map(|k| k as u64))?.map(|k| k as usize);
    cfg.eps_rule = a.eps_rule.or(cfg.eps_rule);
    cfg.theta = a.theta.or(cfg.theta);
    cfg.delta = num(a.delta, cfg.delta)?;
    cfg.scale = count(a.scale, cfg.scale)?;
    cfg.traces = a.traces.or(cfg.traces);
    cfg.seed = a.seed.or(cfg.seed);
    cfg.out_dir = a.out_dir.or(cfg.out_dir);
    let report = reproduce(id, &cfg)?;
    write_report(&report, cfg.out_dir.as_deref())?;
    emit_json(&serde_json::to_value(&report)?, None)?;
    Ok(report.status.exit_code() as u8)
}
