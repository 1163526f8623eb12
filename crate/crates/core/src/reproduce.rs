//! One scripted suite per theorem: construct or sample a sequence, run the
//! diagnostics, and compare against the inequalities the theorem predicts at
//! the configured scale.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cli::{emit_trace_csv, parse_theta, RunConfig};
use crate::constructions::{
    build_cesaro_separation, build_lacunary_separation, build_lacunary_ui_separation, build_stat_separation,
    build_ui_separation, check_step_inequality, EpsRule, Separation, SeparationParams, DEFAULT_SEARCH_CAP,
};
use crate::diagnostics::{
    assess, block_chebyshev_violations, cesaro_at, cesaro_trace, chebyshev_violations,
    default_eps_grid, density_at, density_trace, f_cesaro_at, f_cesaro_trace, f_density_at, f_density_trace,
    lacunary_cesaro_trace, lacunary_density_trace, lacunary_f_cesaro_trace, lacunary_f_density_trace,
    lacunary_ui_diag, log_indices, trace_rows_at, uniform_integrability_diag, AssessConfig, BlockTrace, GapTrace,
    Mode, UiNormalization, Verdict, WitnessSet, DENSE_LIMIT,
};
use crate::error::{Error, Result};
use crate::lacunary::LacunarySchedule;
use crate::metric_sets::{ClosedSet, Point, Segment, SetSequence};
use crate::modulus::{
    classify_compatibility, classify_theta_compatibility, default_eps_grid as phi_eps_grid, make_builtin, phi_hat,
    phi_theta_hat, Builtin, ClassifyOptions, Compatibility, ModulusFunction, Probe,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "th1compatible")]
    Th1Compatible,
    #[serde(rename = "converse1")]
    Converse1,
    #[serde(rename = "th2compatible")]
    Th2Compatible,
    #[serde(rename = "converse2")]
    Converse2,
    #[serde(rename = "bridge")]
    Bridge,
    #[serde(rename = "bridge-converse")]
    BridgeConverse,
    #[serde(rename = "lacunary-stat")]
    LacunaryStat,
    #[serde(rename = "lacunary-cesaro")]
    LacunaryCesaro,
    #[serde(rename = "reciprocolacunary-a")]
    ReciprocolacunaryA,
    #[serde(rename = "reciprocolacunary-b")]
    ReciprocolacunaryB,
    #[serde(rename = "lacunary-bridge")]
    LacunaryBridge,
    #[serde(rename = "lacunary-bridge-converse")]
    LacunaryBridgeConverse,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::Th1Compatible,
        TheoremId::Converse1,
        TheoremId::Th2Compatible,
        TheoremId::Converse2,
        TheoremId::Bridge,
        TheoremId::BridgeConverse,
        TheoremId::LacunaryStat,
        TheoremId::LacunaryCesaro,
        TheoremId::ReciprocolacunaryA,
        TheoremId::ReciprocolacunaryB,
        TheoremId::LacunaryBridge,
        TheoremId::LacunaryBridgeConverse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::Th1Compatible => "th1compatible",
            TheoremId::Converse1 => "converse1",
            TheoremId::Th2Compatible => "th2compatible",
            TheoremId::Converse2 => "converse2",
            TheoremId::Bridge => "bridge",
            TheoremId::BridgeConverse => "bridge-converse",
            TheoremId::LacunaryStat => "lacunary-stat",
            TheoremId::LacunaryCesaro => "lacunary-cesaro",
            TheoremId::ReciprocolacunaryA => "reciprocolacunary-a",
            TheoremId::ReciprocolacunaryB => "reciprocolacunary-b",
            TheoremId::LacunaryBridge => "lacunary-bridge",
            TheoremId::LacunaryBridgeConverse => "lacunary-bridge-converse",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown theorem id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub relation: Relation,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ConstructionFailure,
}

impl Status {
    /// Process exit code for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::ConstructionFailure => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub theorem_id: TheoremId,
    pub status: Status,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReproductionReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn failed_assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

/// Runs the suite for `id`. Construction failures are reported in the
/// returned report; configuration and I/O problems are errors.
pub fn reproduce(id: TheoremId, cfg: &RunConfig) -> Result<ReproductionReport> {
    let mut suite = Suite::new(id, cfg)?;
    let outcome = match id {
        TheoremId::Th1Compatible => suite.compatible(Mode::Ws, Mode::WsF),
        TheoremId::Th2Compatible => suite.compatible(Mode::Wn, Mode::WnF),
        TheoremId::LacunaryStat => suite.compatible(Mode::WsTheta, Mode::WsThetaF),
        TheoremId::LacunaryCesaro => suite.compatible(Mode::WnTheta, Mode::WnThetaF),
        TheoremId::Converse1 => suite.indicator_separation(false),
        TheoremId::Converse2 => suite.indicator_separation(true),
        TheoremId::Bridge => suite.bridge(),
        TheoremId::BridgeConverse => suite.ui_separation(),
        TheoremId::ReciprocolacunaryA => suite.lacunary_separation(false),
        TheoremId::ReciprocolacunaryB => suite.lacunary_separation(true),
        TheoremId::LacunaryBridge => suite.lacunary_bridge(),
        TheoremId::LacunaryBridgeConverse => suite.lacunary_ui_separation(),
    };
    let mut report = suite.report;
    match outcome {
        Ok(()) => {
            report.status = if !report.assertions.is_empty() && report.assertions.iter().all(|a| a.passed) {
                Status::Pass
            } else {
                Status::Fail
            };
        }
        Err(e @ Error::Construction { .. }) => {
            report.status = Status::ConstructionFailure;
            report.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Random positive controls

/// `B_k = {z_k}` for `k` in a random set `S` of density `density`, `{0}`
/// otherwise, with `z_k` uniform on `[0, scale)`; limit `{0}`. At the witness
/// `0` the gaps are `z_k 1[k in S]`.
pub fn random_sparse_sequence(rng: &mut ChaCha8Rng, len: u64, density: f64, scale: f64) -> Result<SetSequence> {
    let zero = ClosedSet::point(0.0);
    let mut segments: Vec<Segment> = Vec::new();
    for k in 1..=len {
        let hit = rng.gen::<f64>() < density;
        let z = rng.gen::<f64>() * scale;
        let set = if hit { ClosedSet::point(z) } else { zero.clone() };
        match segments.last_mut() {
            Some(last) if last.set == set => last.end = k,
            _ => segments.push(Segment { end: k, set }),
        }
    }
    SetSequence::from_segments(segments, zero)
}

/// Gap trace `z_k 1[k in S]` with `S` of density `density` and `z_k` uniform
/// on `[0, scale)`.
pub fn random_gap_trace(rng: &mut ChaCha8Rng, len: u64, density: f64, scale: f64) -> Result<GapTrace> {
    let gaps: Vec<f64> = (0..len)
        .map(|_| {
            let hit = rng.gen::<f64>() < density;
            let z = rng.gen::<f64>() * scale;
            if hit {
                z
            } else {
                0.0
            }
        })
        .collect();
    GapTrace::from_gaps(Point::scalar(0.0), &gaps)
}

pub fn default_densities() -> Vec<f64> {
    [4, 6, 8, 10, 12].iter().map(|&i| 2f64.powi(-i)).collect()
}

// ---------------------------------------------------------------------------
// Suites

const RATIO_TOL: f64 = 1e-9;
const CESARO_REL_TOL: f64 = 1e-6;
const DEFAULT_SCALE: u64 = 100_000;
const DEFAULT_TRACES: usize = 100;

struct Suite<'a> {
    id: TheoremId,
    cfg: &'a RunConfig,
    report: ReproductionReport,
    out_dir: Option<PathBuf>,
}

impl<'a> Suite<'a> {
    fn new(id: TheoremId, cfg: &'a RunConfig) -> Result<Self> {
        if let Some(dir) = &cfg.out_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self {
            id,
            cfg,
            report: ReproductionReport {
                theorem_id: id,
                status: Status::Fail,
                seed: cfg.seed(),
                parameters: BTreeMap::new(),
                assertions: Vec::new(),
                artifacts: Vec::new(),
                error: None,
            },
            out_dir: cfg.out_dir.clone(),
        })
    }

    fn param(&mut self, key: &str, value: Value) {
        self.report.parameters.insert(key.to_string(), value);
    }

    /// Non-finite measurements fail and are recorded as `±f64::MAX`.
    fn check(&mut self, name: impl Into<String>, relation: Relation, measured: f64, bound: f64) -> bool {
        let passed = measured.is_finite()
            && match relation {
                Relation::Le => measured <= bound,
                Relation::Ge => measured >= bound,
            };
        let measured = if measured.is_finite() {
            measured
        } else if measured > 0.0 {
            f64::MAX
        } else {
            -f64::MAX
        };
        self.report.assertions.push(Assertion { name: name.into(), relation, measured, bound, passed });
        passed
    }

    fn le(&mut self, name: impl Into<String>, measured: f64, bound: f64) -> bool {
        self.check(name, Relation::Le, measured, bound)
    }

    fn ge(&mut self, name: impl Into<String>, measured: f64, bound: f64) -> bool {
        self.check(name, Relation::Ge, measured, bound)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed())
    }

    fn modulus(&mut self, default: &str) -> Result<ModulusFunction> {
        let f = make_builtin(self.cfg.modulus.as_deref().unwrap_or(default))?;
        self.param("fn", json!(f.name()));
        Ok(f)
    }

    fn witnesses(&mut self) -> Result<WitnessSet> {
        let w = match &self.cfg.witnesses {
            Some(xs) => WitnessSet::scalars(xs)?,
            None => WitnessSet::default_line(),
        };
        let coords: Vec<f64> = w.points().iter().map(|p| p.coords()[0]).collect();
        self.param("witnesses", json!(coords));
        Ok(w)
    }

    fn eps_grid(&mut self) -> Vec<f64> {
        let grid = self.cfg.eps.clone().unwrap_or_else(default_eps_grid);
        self.param("eps_grid", json!(grid));
        grid
    }

    fn delta(&mut self) -> f64 {
        let d = self.cfg.delta.unwrap_or(0.05);
        self.param("delta", json!(d));
        d
    }

    fn scale(&mut self) -> u64 {
        let n = self.cfg.scale.unwrap_or(DEFAULT_SCALE);
        self.param("N", json!(n));
        n
    }

    fn theta(&mut self) -> Result<LacunarySchedule> {
        let rule = self.cfg.theta.clone().unwrap_or_else(|| "pow2".into());
        self.param("theta", json!(rule));
        parse_theta(&rule)
    }

    fn separation_params(&mut self, default_c: f64, default_k: usize, theta: Option<LacunarySchedule>) -> Result<SeparationParams> {
        let f = self.modulus("log1p")?;
        let c = self.cfg.c.unwrap_or(default_c);
        let k = self.cfg.checkpoints.unwrap_or(default_k);
        let rule: EpsRule = match &self.cfg.eps_rule {
            Some(r) => r.parse()?,
            None => EpsRule::Pow2,
        };
        let cap = self.cfg.search_cap.unwrap_or(DEFAULT_SEARCH_CAP);
        self.param("c", json!(c));
        self.param("K", json!(k));
        self.param("eps_rule", json!(rule.to_string()));
        self.param("search_cap", json!(cap));
        let mut p = SeparationParams::new(f, c, k).with_eps_rule(rule).with_search_cap(cap);
        if let Some(theta) = theta {
            p = p.with_theta(theta);
        }
        Ok(p)
    }

    fn record_schedule(&mut self, sep: &Separation) {
        let s = &sep.schedule;
        self.param("m", json!(s.m));
        self.param("n", json!(s.n));
        self.param("length", json!(s.length));
        if let Some(r) = &s.r {
            self.param("r", json!(r));
        }
        if let Some(v) = &s.values {
            self.param("values", json!(v));
        }
        if !s.warnings.is_empty() {
            self.param("warnings", json!(s.warnings));
        }
    }

    fn emit(&mut self, label: &str, seq: &SetSequence, witnesses: &WitnessSet, cfg: &AssessConfig, extra: &[u64]) -> Result<()> {
        let Some(dir) = self.out_dir.clone() else {
            return Ok(());
        };
        let mut idx = log_indices(cfg.scale, 1024, 16);
        idx.extend(extra.iter().copied().filter(|&n| n <= cfg.scale));
        idx.sort_unstable();
        idx.dedup();
        let rows = trace_rows_at(seq, witnesses, cfg, &idx)?;
        let path = dir.join(format!("{}-{label}.csv", self.id));
        emit_trace_csv(&rows, &path)?;
        self.report.artifacts.push(path.display().to_string());
        Ok(())
    }

    /// Exact agreement of the identity-modulated traces with the classical
    /// ones; returns the number of mismatching entries.
    fn identity_mismatches(&self, trace: &GapTrace, eps_grid: &[f64], theta: Option<&LacunarySchedule>) -> Result<u64> {
        let id = ModulusFunction::identity();
        let mut bad = 0u64;
        let count = |a: &[f64], b: &[f64]| a.iter().zip(b).filter(|(x, y)| x.to_bits() != y.to_bits()).count() as u64 + a.len().abs_diff(b.len()) as u64;
        let block_vals = |b: BlockTrace| b.ratios.iter().map(|r| r.ratio).collect::<Vec<_>>();
        match theta {
            Some(theta) => {
                for &e in eps_grid {
                    bad += count(
                        &block_vals(lacunary_density_trace(trace, e, theta)?),
                        &block_vals(lacunary_f_density_trace(trace, e, &id, theta)?),
                    );
                }
                bad += count(&block_vals(lacunary_cesaro_trace(trace, theta)?), &block_vals(lacunary_f_cesaro_trace(trace, &id, theta)?));
            }
            None if trace.len() <= DENSE_LIMIT => {
                for &e in eps_grid {
                    bad += count(&density_trace(trace, e)?, &f_density_trace(trace, e, &id)?);
                }
                bad += count(&cesaro_trace(trace)?, &f_cesaro_trace(trace, &id)?);
            }
            None => {
                for n in trace.sample_indices() {
                    for &e in eps_grid {
                        bad += (density_at(trace, e, n)?.to_bits() != f_density_at(trace, e, &id, n)?.to_bits()) as u64;
                    }
                    bad += (cesaro_at(trace, n)?.to_bits() != f_cesaro_at(trace, &id, n)?.to_bits()) as u64;
                }
            }
        }
        Ok(bad)
    }

    fn chebyshev_all_builtins(&self, trace: &GapTrace, eps_grid: &[f64], theta: Option<&LacunarySchedule>) -> Result<u64> {
        let mut total = 0u64;
        for b in Builtin::catalogue() {
            let f = ModulusFunction::builtin(b)?;
            total += match theta {
                Some(theta) => block_chebyshev_violations(trace, theta, eps_grid, &f)?.len(),
                None => chebyshev_violations(trace, eps_grid, &f)?.len(),
            } as u64;
        }
        Ok(total)
    }

    // -- compatible moduli: the classical and modulated modes agree --------

    fn compatible(&mut self, classical: Mode, modulated: Mode) -> Result<()> {
        let f = self.modulus("power_sum(0.5,0.5)")?;
        let witnesses = self.witnesses()?;
        let eps_grid = self.eps_grid();
        let delta = self.delta();
        let lacunary = classical.needs_schedule();
        let theta = if lacunary { Some(self.theta()?) } else { None };
        let mut n = self.scale();
        if let Some(theta) = &theta {
            let r = theta.complete_blocks(n);
            n = theta.k(r)?;
            self.param("blocks", json!(r));
        }
        let densities = self.cfg.densities.clone().unwrap_or_else(default_densities);
        self.param("densities", json!(densities));
        let opts = ClassifyOptions::default();
        let class = match &theta {
            Some(theta) => classify_theta_compatibility(&f, theta, &phi_eps_grid(), theta.horizon(), &opts)?,
            None => classify_compatibility(&f, &phi_eps_grid(), &opts)?,
        };
        let tail = class.phi_estimates.last().map_or(f64::NAN, |p| p.value);
        self.le("modulus-compatible", tail, class.threshold);
        if class.verdict != Compatibility::Compatible {
            self.le("modulus-classified-compatible", 1.0, 0.0);
        }

        let mut rng = self.rng();
        let mut psi_first = None;
        let mut psi_last = 0.0;
        let mut rho_last = 0.0;
        let mut excess: f64 = f64::NEG_INFINITY;
        let mut dominance_violations = 0u64;
        for (i, &d) in densities.iter().enumerate() {
            let seq = random_sparse_sequence(&mut rng, n, d, 1.0)?;
            let mut base = AssessConfig::new(classical, n).with_eps_grid(eps_grid.clone()).with_delta(delta);
            if let Some(theta) = &theta {
                base = base.with_schedule(theta.clone());
            }
            let v_cl = assess(&seq, &witnesses, &base)?;
            let v_f = assess(&seq, &witnesses, &AssessConfig { mode: modulated, f: Some(f.clone()), ..base.clone() })?;
            let rho = v_cl.max_ratio();
            let psi = v_f.max_ratio();
            for (a, b) in v_cl.ratios.iter().zip(&v_f.ratios) {
                if a.ratio > 2.0 * b.ratio * (1.0 + 1e-12) {
                    dominance_violations += 1;
                }
            }
            let bound = 2.0 * match &theta {
                Some(theta) => {
                    let r = theta.complete_blocks(n);
                    phi_theta_hat(&f, theta, rho.max(1.0 / theta.h(r)? as f64), r)?
                }
                None => phi_hat(&f, rho.max(1.0 / n as f64), Probe::default())?,
            };
            excess = excess.max(psi - bound);
            psi_first.get_or_insert(psi);
            psi_last = psi;
            rho_last = rho;
            if i + 1 == densities.len() {
                self.emit("classical", &seq, &witnesses, &base, &[])?;
                self.emit("modulated", &seq, &witnesses, &AssessConfig { mode: modulated, f: Some(f.clone()), ..base.clone() }, &[])?;
            }
            self.param(&format!("ratios[{d:e}]"), json!({ "classical": rho, "modulated": psi }));
        }
        self.le("classical-converged-at-scale", rho_last, delta);
        self.le("modulated-within-phi-bound", excess, 0.0);
        self.le("classical-dominated-by-modulated", dominance_violations as f64, 0.0);
        self.le("modulated-decreases-with-density", psi_last, psi_first.unwrap_or(0.0));
        Ok(())
    }

    // -- 0/1 separations: classical converges, modulated does not ------------

    fn indicator_separation(&mut self, cesaro: bool) -> Result<()> {
        let p = self.separation_params(0.5, 8, None)?;
        let witnesses = self.witnesses()?;
        let eps_grid = self.eps_grid();
        let delta = self.delta();
        let sep = if cesaro { build_cesaro_separation(&p)? } else { build_stat_separation(&p)? };
        self.record_schedule(&sep);
        let s = &sep.schedule;
        let (m, n) = (s.m.clone(), s.n.clone());
        let big_k = m.len();
        let n_total = s.length;

        for k in 1..big_k {
            let (mk, ek, en, mn) = (m[k - 1], s.eps[k - 1], s.eps[k], m[k]);
            let lhs = 1.0 - en - 1.0 / mn as f64;
            let rhs = (1.0 - ek) * mk as f64 / mn as f64;
            let ok = check_step_inequality(mk, ek, en, mn);
            self.ge(format!("step-inequality[{k}]"), if ok { lhs - rhs } else { -1.0 }, f64::MIN_POSITIVE);
            let [lo, hi] = s.blocks[k];
            self.ge(format!("block-containment[{k}]"), (lo as f64 - mk as f64).min(mn as f64 - hi as f64), 0.0);
        }

        let x0 = GapTrace::build(&sep.sequence, &Point::scalar(0.0), n_total)?;
        for k in 0..big_k {
            let measured = if cesaro {
                f_cesaro_at(&x0, &p.f, m[k])?
            } else {
                eps_grid
                    .iter()
                    .map(|&e| f_density_at(&x0, e, &p.f, m[k]))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            };
            self.ge(format!("modulated-ratio-at-checkpoint[{}]", k + 1), measured, p.c - RATIO_TOL);
        }

        let classical_mode = if cesaro { Mode::Wn } else { Mode::Ws };
        let modulated_mode = if cesaro { Mode::WnF } else { Mode::WsF };
        let bound = 2.0 * n[big_k - 1] as f64 / m[big_k - 1] as f64;
        self.param("classical_delta", json!(bound));
        let cl_cfg = AssessConfig::new(classical_mode, n_total).with_eps_grid(eps_grid.clone()).with_delta(bound);
        let v_cl = assess(&sep.sequence, &witnesses, &cl_cfg)?;
        self.le("classical-ratio-at-final-checkpoint", v_cl.max_ratio(), bound);
        let f_cfg = AssessConfig::new(modulated_mode, n_total)
            .with_eps_grid(eps_grid.clone())
            .with_delta(delta)
            .with_modulus(p.f.clone());
        let v_f = assess(&sep.sequence, &witnesses, &f_cfg)?;
        self.ge("modulated-not-converged-at-scale", v_f.max_ratio(), delta);

        self.le("identity-reduction-mismatches", self.identity_mismatches(&x0, &eps_grid, None)? as f64, 0.0);
        self.le("chebyshev-violations", self.chebyshev_all_builtins(&x0, &eps_grid, None)? as f64, 0.0);
        self.emit("classical", &sep.sequence, &witnesses, &cl_cfg, &m)?;
        self.emit("modulated", &sep.sequence, &witnesses, &f_cfg, &m)?;
        Ok(())
    }

    // -- bridge: modulated Cesàro dominates modulated density and WI ---------

    fn bridge(&mut self) -> Result<()> {
        let eps_grid = self.eps_grid();
        let n = self.scale();
        let traces = self.cfg.traces.unwrap_or(DEFAULT_TRACES);
        self.param("traces", json!(traces));
        let mut rng = self.rng();
        let mut violations = 0u64;
        let mut ui_above_bound: f64 = 0.0;
        let gap_bound = 2.0;
        for _ in 0..traces {
            let d = rng.gen::<f64>();
            let trace = random_gap_trace(&mut rng, n, d, gap_bound)?;
            violations += self.chebyshev_all_builtins(&trace, &eps_grid, None)?;
            ui_above_bound = ui_above_bound.max(uniform_integrability_diag(&trace, &[gap_bound])?[0].value);
        }
        self.le("chebyshev-violations-random", violations as f64, 0.0);
        self.le("ui-above-gap-bound", ui_above_bound, 0.0);

        let mut construction_violations = 0u64;
        let log1p = ModulusFunction::log1p();
        for sep in [
            build_stat_separation(&SeparationParams::new(log1p.clone(), 0.5, 8))?,
            build_ui_separation(&SeparationParams::new(log1p, 0.5, 6))?,
        ] {
            for x in WitnessSet::default_line().points() {
                let trace = GapTrace::build(&sep.sequence, x, sep.sequence.len())?;
                construction_violations += self.chebyshev_all_builtins(&trace, &eps_grid, None)?;
            }
        }
        self.le("chebyshev-violations-constructions", construction_violations as f64, 0.0);
        Ok(())
    }

    fn lacunary_bridge(&mut self) -> Result<()> {
        let eps_grid = self.eps_grid();
        let theta = self.theta()?;
        let scale = self.scale();
        let n = theta.k(theta.complete_blocks(scale))?;
        self.param("length", json!(n));
        let traces = self.cfg.traces.unwrap_or(DEFAULT_TRACES);
        self.param("traces", json!(traces));
        let cutoffs: Vec<f64> = (-3..=3).map(|i| 2f64.powi(i)).collect();
        // sup_t k_t / h_t over the blocks in range
        let spread = (1..=theta.complete_blocks(n))
            .map(|r| Ok(theta.k(r)? as f64 / theta.h(r)? as f64))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(1.0, f64::max);
        self.param("block_spread", json!(spread));
        let mut rng = self.rng();
        let mut violations = 0u64;
        let mut ui_excess: f64 = f64::NEG_INFINITY;
        for _ in 0..traces {
            let d = rng.gen::<f64>();
            let trace = random_gap_trace(&mut rng, n, d, 2.0)?;
            violations += self.chebyshev_all_builtins(&trace, &eps_grid, Some(&theta))?;
            let wi = uniform_integrability_diag(&trace, &cutoffs)?;
            let wi_theta = lacunary_ui_diag(&trace, &theta, &cutoffs, UiNormalization::Normalized)?;
            for (a, b) in wi.iter().zip(&wi_theta) {
                ui_excess = ui_excess.max(b.value - spread * a.value * (1.0 + 1e-12));
            }
        }
        self.le("block-chebyshev-violations-random", violations as f64, 0.0);
        self.le("wi-implies-wi-theta-excess", ui_excess, 0.0);

        let mut construction_violations = 0u64;
        let log1p = ModulusFunction::log1p();
        let pow2 = LacunarySchedule::pow2();
        for sep in [
            build_lacunary_separation(&SeparationParams::new(log1p.clone(), 0.9, 6).with_theta(pow2.clone()))?,
            build_lacunary_ui_separation(&SeparationParams::new(log1p, 0.9, 6).with_theta(pow2.clone()))?,
        ] {
            for x in WitnessSet::default_line().points() {
                let trace = GapTrace::build(&sep.sequence, x, sep.sequence.len())?;
                construction_violations += self.chebyshev_all_builtins(&trace, &eps_grid, Some(&pow2))?;
            }
        }
        self.le("block-chebyshev-violations-constructions", construction_violations as f64, 0.0);
        Ok(())
    }

    // -- WS ∩ WI does not imply WN^f ----------------------------------------

    fn ui_separation(&mut self) -> Result<()> {
        let p = self.separation_params(0.5, 6, None)?;
        let witnesses = self.witnesses()?;
        let delta = self.delta();
        let sep = build_ui_separation(&p)?;
        self.record_schedule(&sep);
        let s = &sep.schedule;
        let values = s.values.clone().unwrap_or_default();
        let n_total = s.length;
        let big_k = s.m.len();

        self.ge("values-positive", values.iter().copied().fold(f64::INFINITY, f64::min), f64::MIN_POSITIVE);
        let increases = values.windows(2).filter(|w| w[1] >= w[0]).count();
        self.le("values-strictly-decreasing", increases as f64, 0.0);

        let r1 = values[0];
        let cutoffs = [r1 * (1.0 + 1e-12), 2.0 * r1];
        let mut ui_max: f64 = 0.0;
        let mut max_gap: f64 = 0.0;
        for x in witnesses.points() {
            let trace = GapTrace::build(&sep.sequence, x, n_total)?;
            ui_max = uniform_integrability_diag(&trace, &cutoffs)?.iter().map(|u| u.value).fold(ui_max, f64::max);
            max_gap = max_gap.max(trace.max_gap());
        }
        self.le("ui-above-first-value", ui_max, 0.0);
        self.le("bounded-by-first-value", max_gap, r1);

        // only eps that the horizon resolves: eps >= eps_{K-2}
        let floor = s.eps[big_k.saturating_sub(3)];
        let eps_grid: Vec<f64> = self.eps_grid().into_iter().filter(|&e| e >= floor).collect();
        self.param("ws_eps_grid", json!(eps_grid));
        let ws_cfg = AssessConfig::new(Mode::Ws, n_total).with_eps_grid(eps_grid.clone()).with_delta(delta);
        let v_ws = assess(&sep.sequence, &witnesses, &ws_cfg)?;
        self.le("classical-statistical-converged-at-scale", v_ws.max_ratio(), delta);

        let x0 = GapTrace::build(&sep.sequence, &Point::scalar(0.0), n_total)?;
        for k in 0..big_k {
            let v = f_cesaro_at(&x0, &p.f, s.m[k])?;
            self.ge(format!("modulated-cesaro-at-checkpoint[{}]", k + 1), v, p.c * (1.0 - CESARO_REL_TOL));
        }
        let wnf_cfg = AssessConfig::new(Mode::WnF, n_total).with_delta(delta).with_modulus(p.f.clone());
        let v_wnf: Verdict = assess(&sep.sequence, &witnesses, &wnf_cfg)?;
        self.ge("modulated-cesaro-not-converged-at-scale", v_wnf.max_ratio(), delta);

        self.le("identity-reduction-mismatches", self.identity_mismatches(&x0, &eps_grid, None)? as f64, 0.0);
        self.le("chebyshev-violations", self.chebyshev_all_builtins(&x0, &eps_grid, None)? as f64, 0.0);
        self.emit("classical", &sep.sequence, &witnesses, &ws_cfg, &s.m)?;
        self.emit("modulated-cesaro", &sep.sequence, &witnesses, &wnf_cfg, &s.m)?;
        Ok(())
    }

    // -- lacunary separations -------------------------------------------------

    fn lacunary_separation(&mut self, cesaro: bool) -> Result<()> {
        let theta = self.theta()?;
        let p = self.separation_params(0.9, 6, Some(theta.clone()))?;
        let witnesses = self.witnesses()?;
        let eps_grid = self.eps_grid();
        let delta = self.delta();
        let sep = build_lacunary_separation(&p)?;
        self.record_schedule(&sep);
        let s = &sep.schedule;
        let rs = s.r.clone().unwrap_or_default();
        let hs = s.h.clone().unwrap_or_default();
        let n_total = s.length;

        for (k, &r) in rs.iter().enumerate() {
            let (lo, hi) = theta.block(r)?;
            let [blo, bhi] = s.blocks[k];
            self.ge(format!("block-containment[{}]", k + 1), (blo as f64 - lo as f64 - 1.0).min(hi as f64 - bhi as f64), 0.0);
            self.ge(format!("gap-inequality[{}]", k + 1), hs[k] as f64 * (1.0 - s.eps[k]) - 1.0, f64::MIN_POSITIVE);
        }

        let x0 = GapTrace::build(&sep.sequence, &Point::scalar(0.0), n_total)?;
        let modulated: Vec<BlockTrace> = if cesaro {
            vec![lacunary_f_cesaro_trace(&x0, &p.f, &theta)?]
        } else {
            eps_grid.iter().map(|&e| lacunary_f_density_trace(&x0, e, &p.f, &theta)).collect::<Result<_>>()?
        };
        let classical: Vec<BlockTrace> = if cesaro {
            vec![lacunary_cesaro_trace(&x0, &theta)?]
        } else {
            eps_grid.iter().map(|&e| lacunary_density_trace(&x0, e, &theta)).collect::<Result<_>>()?
        };
        let mut off_block_max: f64 = 0.0;
        for bt in &modulated {
            for b in bt.ratios.iter().filter(|b| !rs.contains(&b.r)) {
                off_block_max = off_block_max.max(b.ratio);
            }
        }
        for (k, &r) in rs.iter().enumerate() {
            let v = modulated.iter().map(|bt| bt.at(r).unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
            self.ge(format!("modulated-block-ratio[r={r}]"), v, p.c - RATIO_TOL);
            let cl = classical.iter().map(|bt| bt.at(r).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            self.le(format!("classical-block-ratio[r={r}]"), cl, s.eps[k] + 1.0 / hs[k] as f64);
        }
        self.le("modulated-ratio-off-selected-blocks", off_block_max, 0.0);

        let (cl_mode, f_mode) = if cesaro { (Mode::WnTheta, Mode::WnThetaF) } else { (Mode::WsTheta, Mode::WsThetaF) };
        let cl_cfg = AssessConfig::new(cl_mode, n_total)
            .with_eps_grid(eps_grid.clone())
            .with_delta(delta)
            .with_schedule(theta.clone());
        let v_cl = assess(&sep.sequence, &witnesses, &cl_cfg)?;
        self.le("classical-converged-at-scale", v_cl.max_ratio(), delta);
        let f_cfg = AssessConfig { mode: f_mode, f: Some(p.f.clone()), ..cl_cfg.clone() };
        let v_f = assess(&sep.sequence, &witnesses, &f_cfg)?;
        self.ge("modulated-not-converged-at-scale", v_f.max_ratio(), delta);

        self.le("identity-reduction-mismatches", self.identity_mismatches(&x0, &eps_grid, Some(&theta))? as f64, 0.0);
        self.le("block-chebyshev-violations", self.chebyshev_all_builtins(&x0, &eps_grid, Some(&theta))? as f64, 0.0);
        self.emit("classical", &sep.sequence, &witnesses, &cl_cfg, &[])?;
        self.emit("modulated", &sep.sequence, &witnesses, &f_cfg, &[])?;
        Ok(())
    }

    fn lacunary_ui_separation(&mut self) -> Result<()> {
        let theta = self.theta()?;
        let p = self.separation_params(0.9, 6, Some(theta.clone()))?;
        let witnesses = self.witnesses()?;
        let delta = self.delta();
        let sep = build_lacunary_ui_separation(&p)?;
        self.record_schedule(&sep);
        let s = &sep.schedule;
        let rs = s.r.clone().unwrap_or_default();
        let n_total = s.length;
        let eps_1 = s.eps[0];

        let x0 = GapTrace::build(&sep.sequence, &Point::scalar(0.0), n_total)?;
        let fc = lacunary_f_cesaro_trace(&x0, &p.f, &theta)?;
        for &r in &rs {
            self.ge(format!("modulated-block-cesaro[r={r}]"), fc.at(r).unwrap_or(0.0), p.c - RATIO_TOL);
        }

        let cutoffs = [eps_1 * (1.0 + 1e-12), 2.0 * eps_1];
        let mut ui_max: f64 = 0.0;
        for x in witnesses.points() {
            let trace = GapTrace::build(&sep.sequence, x, n_total)?;
            for norm in [UiNormalization::Normalized, UiNormalization::Unnormalized] {
                ui_max = lacunary_ui_diag(&trace, &theta, &cutoffs, norm)?.iter().map(|u| u.value).fold(ui_max, f64::max);
            }
        }
        self.le("lacunary-ui-above-first-eps", ui_max, 0.0);

        // eps the final block resolves: eps >= eps_K
        let floor = *s.eps.last().expect("nonempty schedule");
        let eps_grid: Vec<f64> = self.eps_grid().into_iter().filter(|&e| e >= floor).collect();
        self.param("ws_eps_grid", json!(eps_grid));
        let ws_cfg = AssessConfig::new(Mode::WsThetaF, n_total)
            .with_eps_grid(eps_grid.clone())
            .with_delta(delta)
            .with_schedule(theta.clone())
            .with_modulus(p.f.clone());
        let v_ws = assess(&sep.sequence, &witnesses, &ws_cfg)?;
        self.le("modulated-statistical-converged-at-scale", v_ws.max_ratio(), delta);
        let wn_cfg = AssessConfig { mode: Mode::WnThetaF, ..ws_cfg.clone() };
        let v_wn = assess(&sep.sequence, &witnesses, &wn_cfg)?;
        self.ge("modulated-cesaro-not-converged-at-scale", v_wn.max_ratio(), delta);

        self.le("identity-reduction-mismatches", self.identity_mismatches(&x0, &eps_grid, Some(&theta))? as f64, 0.0);
        self.le("block-chebyshev-violations", self.chebyshev_all_builtins(&x0, &eps_grid, Some(&theta))? as f64, 0.0);
        self.emit("modulated-statistical", &sep.sequence, &witnesses, &ws_cfg, &[])?;
        self.emit("modulated-cesaro", &sep.sequence, &witnesses, &wn_cfg, &[])?;
        Ok(())
    }
}

/// Writes `report` as `<out_dir>/<theorem>-report.json` when an output
/// directory is configured, returning the path.
pub fn write_report(report: &ReproductionReport, out_dir: Option<&Path>) -> Result<Option<PathBuf>> {
    let Some(dir) = out_dir else {
        return Ok(None);
    };
    let path = dir.join(format!("{}-report.json", report.theorem_id));
    crate::cli::write_json(report, &path)?;
    Ok(Some(path))
}
