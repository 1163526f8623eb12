//! Configuration and artifact plumbing shared by the binary and the
//! reproduction suites.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constructions::{ConstructionKind, EpsRule, SeparationParams, DEFAULT_SEARCH_CAP};
use crate::diagnostics::TraceRow;
use crate::error::{Error, Result};
use crate::lacunary::{LacunarySchedule, ScheduleRule};
use crate::metric_sets::{SequenceFile, SetSequence};
use crate::modulus::make_builtin;

/// Overrides [`RunConfig::seed`] when set.
pub const SEED_ENV: &str = "WIJSMAN_LAB_SEED";

/// Parses `0.5`, `1e6`, `2^-20`, `10^12` and `-2^3`.
pub fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse number `{s}`"));
    let value = match t.split_once('^') {
        Some((base, exp)) => {
            let (sign, base) = match base.strip_prefix('-') {
                Some(b) => (-1.0, b),
                None => (1.0, base),
            };
            let base: f64 = base.parse().map_err(|_| bad())?;
            let exp: f64 = exp.parse().map_err(|_| bad())?;
            sign * base.powf(exp)
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Nonnegative integer form of [`parse_number`]; exact for powers up to `2^63`.
pub fn parse_count(s: &str) -> Result<u64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let bad = || Error::InvalidParameter(format!("`{s}` is not a nonnegative integer"));
    if let Some((base, exp)) = t.split_once('^') {
        let base: u64 = base.parse().map_err(|_| bad())?;
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        return base.checked_pow(exp).ok_or_else(bad);
    }
    let v = parse_number(t)?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(bad())
    }
}

/// Full run description; every field is optional and command-line flags take
/// precedence over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `modulus-check`, `diagnose`, `construct` or `reproduce`.
    pub command: Option<String>,
    pub theorem: Option<String>,
    pub seed: Option<u64>,
    #[serde(rename = "fn")]
    pub modulus: Option<String>,
    pub params: Option<BTreeMap<String, f64>>,
    pub c: Option<f64>,
    #[serde(rename = "K")]
    pub checkpoints: Option<usize>,
    pub eps_rule: Option<String>,
    pub theta: Option<String>,
    pub search_cap: Option<u64>,
    pub delta: Option<f64>,
    #[serde(rename = "N")]
    pub scale: Option<u64>,
    pub traces: Option<usize>,
    pub densities: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub witnesses: Option<Vec<f64>>,
    pub seq: Option<String>,
    pub mode: Option<String>,
    pub kind: Option<String>,
    pub eps_min: Option<f64>,
    pub n_max: Option<u64>,
    pub threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub emit_seq: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    /// Applies [`SEED_ENV`] if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
            self.seed = Some(seed);
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

/// `pow2`, `pow:<b>` or `square`, expanded to its full 64-bit horizon.
pub fn parse_theta(rule: &str) -> Result<LacunarySchedule> {
    let rule: ScheduleRule = rule.parse()?;
    LacunarySchedule::from_rule(rule, u64::MAX)
}

/// Parses a construction reference `kind[:key=value,...]`, e.g.
/// `stat:fn=log1p,c=0.5,K=8` or `lacunary-ui:theta=pow2,c=0.9,K=6`.
/// Recognized keys: `fn`, `c`, `K`, `eps_rule`, `theta`, `search_cap`.
/// Unset keys take the defaults `fn=log1p`, `c=0.5`, `K=8`, `theta=pow2`.
pub fn parse_construction_ref(s: &str) -> Result<(ConstructionKind, SeparationParams)> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let kind: ConstructionKind = kind.trim().parse()?;
    let mut opts: BTreeMap<&str, &str> = BTreeMap::new();
    // `fn` may itself contain commas, e.g. `fn=power_sum(0.5,1)`
    let mut depth = 0i32;
    let mut start = 0usize;
    let mut pieces = Vec::new();
    for (i, ch) in rest.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                pieces.push(&rest[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(&rest[start..]);
    for piece in pieces.into_iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected key=value in `{piece}`")))?;
        opts.insert(k.trim(), v.trim());
    }
    let f = make_builtin(opts.remove("fn").unwrap_or("log1p"))?;
    let c = opts.remove("c").map(parse_number).transpose()?.unwrap_or(0.5);
    let k = opts.remove("K").map(parse_count).transpose()?.unwrap_or(8) as usize;
    let mut params = SeparationParams::new(f, c, k);
    if let Some(rule) = opts.remove("eps_rule") {
        params = params.with_eps_rule(rule.parse::<EpsRule>()?);
    }
    params = params.with_search_cap(opts.remove("search_cap").map(parse_count).transpose()?.unwrap_or(DEFAULT_SEARCH_CAP));
    let theta = opts.remove("theta");
    if kind.is_lacunary() || theta.is_some() {
        params = params.with_theta(parse_theta(theta.unwrap_or("pow2"))?);
    }
    if let Some(key) = opts.keys().next() {
        return Err(Error::InvalidParameter(format!("unknown construction key `{key}`")));
    }
    Ok((kind, params))
}

/// Reads a set-sequence file, or builds the sequence named by a construction
/// reference when `spec` is not an existing path.
pub fn load_sequence(spec: &str) -> Result<SetSequence> {
    let path = Path::new(spec);
    if path.exists() {
        let file: SequenceFile = serde_json::from_reader(File::open(path)?)?;
        if let SequenceFile::Rule { rule } = &file {
            let (kind, params) = parse_construction_ref(rule)?;
            return Ok(crate::constructions::build(kind, &params)?.sequence);
        }
        return Ok(file.into_sequence()?.expect("explicit sequence form"));
    }
    let (kind, params) = parse_construction_ref(spec)?;
    Ok(crate::constructions::build(kind, &params)?.sequence)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `index,witness_id,epsilon,ratio` rows. Empty traces are rejected
/// before the file is created.
pub fn emit_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let mut w = csv::Writer::from_path(path)?;
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

/// [`emit_trace_csv`] into any writer.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let mut w = csv::Writer::from_writer(out);
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[TraceRow]) -> Result<()> {
    w.write_record(["index", "witness_id", "epsilon", "ratio"])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.witness_id.to_string(),
            r.epsilon.map(format_float).unwrap_or_default(),
            format_float(r.ratio),
        ])?;
    }
    Ok(())
}
