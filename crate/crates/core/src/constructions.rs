//! Generators for the separating sequences: schedules `(eps_k, m_k, n_k)`
//! with `f(m_k eps_k) >= c f(m_k)` and the set sequences built on them.
//!
//! Blocks are stored as inclusive integer intervals `[lo, hi]`. The
//! statistical blocks are `A_0 = [m_1 - n_1 + 1, m_1]` and
//! `A_k = [m_{k+1} - (n_{k+1} - n_k) + 1, m_{k+1}]`, which makes the number of
//! marked indices up to `m_k` exactly `n_k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lacunary::LacunarySchedule;
use crate::metric_sets::{ClosedSet, Segment, SetSequence};
use crate::modulus::{classify_compatibility, classify_theta_compatibility, default_eps_grid, ClassifyOptions, Compatibility, ModulusFunction};

pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000_000_000;

/// Rule for the decreasing sequence `eps_k`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EpsRule {
    /// `eps_k = 2^-k`.
    #[default]
    Pow2,
    /// `eps_k = q^k` with `0 < q < 1`.
    Geom(f64),
}

impl EpsRule {
    pub fn eps(&self, k: usize) -> f64 {
        match *self {
            EpsRule::Pow2 => 2f64.powi(-(k as i32)),
            EpsRule::Geom(q) => q.powi(k as i32),
        }
    }
}

impl fmt::Display for EpsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsRule::Pow2 => f.write_str("pow2"),
            EpsRule::Geom(q) => write!(f, "geom:{q}"),
        }
    }
}

impl FromStr for EpsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "pow2" {
            return Ok(EpsRule::Pow2);
        }
        if let Some(q) = s.strip_prefix("geom:") {
            let q: f64 = q.parse().map_err(|_| Error::InvalidParameter(format!("bad ratio in eps rule `{s}`")))?;
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidParameter(format!("eps rule ratio must lie in (0, 1), got {q}")));
            }
            return Ok(EpsRule::Geom(q));
        }
        Err(Error::InvalidParameter(format!("unknown eps rule `{s}` (expected pow2 or geom:<q>)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    StatSeparation,
    CesaroSeparation,
    UiSeparation,
    LacunarySeparation,
    LacunaryUiSeparation,
}

impl ConstructionKind {
    pub fn is_lacunary(self) -> bool {
        matches!(self, Self::LacunarySeparation | Self::LacunaryUiSeparation)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::StatSeparation => "stat",
            Self::CesaroSeparation => "cesaro",
            Self::UiSeparation => "ui",
            Self::LacunarySeparation => "lacunary",
            Self::LacunaryUiSeparation => "lacunary-ui",
        }
    }
}

impl FromStr for ConstructionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "stat" | "stat_separation" => Self::StatSeparation,
            "cesaro" | "cesaro_separation" => Self::CesaroSeparation,
            "ui" | "ui_separation" => Self::UiSeparation,
            "lacunary" | "lacunary_separation" => Self::LacunarySeparation,
            "lacunary-ui" | "lacunary_ui" | "lacunary_ui_separation" => Self::LacunaryUiSeparation,
            _ => return Err(Error::InvalidParameter(format!("unknown construction kind `{s}`"))),
        })
    }
}

impl fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone)]
pub struct SeparationParams {
    pub f: ModulusFunction,
    pub c: f64,
    pub eps_rule: EpsRule,
    /// Number of checkpoints `K`.
    pub checkpoints: usize,
    /// Largest `m_k` tried by the non-lacunary searches.
    pub search_cap: u64,
    /// Required by the lacunary kinds; the schedule horizon bounds their search.
    pub theta: Option<LacunarySchedule>,
}

impl SeparationParams {
    pub fn new(f: ModulusFunction, c: f64, checkpoints: usize) -> Self {
        Self { f, c, eps_rule: EpsRule::Pow2, checkpoints, search_cap: DEFAULT_SEARCH_CAP, theta: None }
    }

    pub fn with_theta(mut self, theta: LacunarySchedule) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_eps_rule(mut self, rule: EpsRule) -> Self {
        self.eps_rule = rule;
        self
    }

    pub fn with_search_cap(mut self, cap: u64) -> Self {
        self.search_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("separation constant must be positive, got {}", self.c)));
        }
        if self.checkpoints == 0 {
            return Err(Error::InvalidParameter("at least one checkpoint is required".into()));
        }
        Ok(())
    }

    fn theta(&self) -> Result<&LacunarySchedule> {
        self.theta
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("lacunary constructions need a schedule".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSchedule {
    pub kind: ConstructionKind,
    pub modulus: String,
    pub c: f64,
    pub eps_rule: String,
    pub eps: Vec<f64>,
    /// Checkpoints `m_k`; for lacunary kinds the block ends `k_{r_k}`.
    pub m: Vec<u64>,
    pub n: Vec<u64>,
    /// Inclusive integer intervals.
    pub blocks: Vec<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<u64>>,
    /// Sequence length `N`.
    pub length: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A schedule together with the set sequence it induces on the line.
#[derive(Debug, Clone)]
pub struct Separation {
    pub schedule: ConstructionSchedule,
    pub sequence: SetSequence,
}

/// `1 - eps_next - 1/m_next > (1 - eps_k) m_k / m_next`.
pub fn check_step_inequality(m_k: u64, eps_k: f64, eps_next: f64, m_next: u64) -> bool {
    let m_next = m_next as f64;
    1.0 - eps_next - 1.0 / m_next > (1.0 - eps_k) * m_k as f64 / m_next
}

/// `floor(m * eps) + 1`.
pub fn count_for(m: u64, eps: f64) -> u64 {
    (m as f64 * eps).floor() as u64 + 1
}

fn ratio_holds(f: &ModulusFunction, m: u64, eps: f64, c: f64) -> bool {
    f.eval(m as f64 * eps) >= c * f.eval(m as f64)
}

/// Smallest `m > prev`, `m <= cap`, with `pred(m)`, by doubling the offset
/// from `prev` and then bisecting. Exact when `pred` is monotone in `m`.
fn search_min(prev: u64, cap: u64, k: usize, pred: impl Fn(u64) -> bool) -> Result<u64> {
    let fail = || Error::Construction { k, reason: format!("no feasible m_k in ({prev}, {cap}]") };
    if prev >= cap {
        return Err(fail());
    }
    let mut lo = prev;
    let mut step = 1u64;
    let mut hi;
    loop {
        hi = prev.saturating_add(step).min(cap);
        if pred(hi) {
            break;
        }
        if hi == cap {
            return Err(fail());
        }
        lo = hi;
        step = step.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn compatibility_warning(p: &SeparationParams, kind: ConstructionKind) -> Vec<String> {
    let opts = ClassifyOptions::default();
    let verdict = match (&p.theta, kind.is_lacunary()) {
        (Some(theta), true) => {
            classify_theta_compatibility(&p.f, theta, &default_eps_grid(), theta.horizon(), &opts).map(|r| r.verdict)
        }
        _ => classify_compatibility(&p.f, &default_eps_grid(), &opts).map(|r| r.verdict),
    };
    match verdict {
        Ok(Compatibility::NonCompatible) => Vec::new(),
        Ok(v) => vec![format!("modulus `{}` classified {v:?}; a separation may not exist", p.f.name())],
        Err(e) => vec![format!("compatibility classification failed: {e}")],
    }
}

/// Checkpoint search shared by the statistical, Cesàro and UI kinds. With
/// `forward` set, `m_k` must also make the block value
/// `r_{k-1} = (m_k eps_k - m_{k-1} eps_{k-1}) / (m_k - m_{k-1})` at least
/// `eps_{k+1}`, which forces the values to decrease strictly.
fn search_checkpoints(p: &SeparationParams, forward: bool) -> Result<(Vec<f64>, Vec<u64>, Vec<u64>)> {
    p.validate()?;
    let mut eps = Vec::with_capacity(p.checkpoints);
    let mut m: Vec<u64> = Vec::with_capacity(p.checkpoints);
    let mut n: Vec<u64> = Vec::with_capacity(p.checkpoints);
    for k in 1..=p.checkpoints {
        let e = p.eps_rule.eps(k);
        let prev = m.last().copied();
        let n_prev = n.last().copied();
        let e_prev = eps.last().copied();
        let e_next = p.eps_rule.eps(k + 1);
        let found = search_min(prev.unwrap_or(0), p.search_cap, k, |cand| {
            if !ratio_holds(&p.f, cand, e, p.c) {
                return false;
            }
            let (Some(mp), Some(np), Some(ep)) = (prev, n_prev, e_prev) else {
                return true;
            };
            if !check_step_inequality(mp, ep, e, cand) || count_for(cand, e) <= np {
                return false;
            }
            !forward || block_value(mp, ep, cand, e) >= e_next
        })?;
        eps.push(e);
        n.push(count_for(found, e));
        m.push(found);
    }
    Ok((eps, m, n))
}

fn block_value(m_prev: u64, e_prev: f64, m: u64, e: f64) -> f64 {
    (m as f64 * e - m_prev as f64 * e_prev) / (m - m_prev) as f64
}

fn stat_blocks(m: &[u64], n: &[u64]) -> Vec<[u64; 2]> {
    let mut blocks = vec![[m[0] - n[0] + 1, m[0]]];
    for k in 1..m.len() {
        blocks.push([m[k] - (n[k] - n[k - 1]) + 1, m[k]]);
    }
    blocks
}

/// Schedule for the 0/1 statistical separation.
pub fn build_stat_separation(p: &SeparationParams) -> Result<Separation> {
    build_indicator_kind(p, ConstructionKind::StatSeparation)
}

/// Same schedule as [`build_stat_separation`]; with 0/1 gaps the prefix count
/// and the prefix sum coincide, so it separates the Cesàro modes too.
pub fn build_cesaro_separation(p: &SeparationParams) -> Result<Separation> {
    build_indicator_kind(p, ConstructionKind::CesaroSeparation)
}

fn build_indicator_kind(p: &SeparationParams, kind: ConstructionKind) -> Result<Separation> {
    let (eps, m, n) = search_checkpoints(p, false)?;
    let blocks = stat_blocks(&m, &n);
    let length = *m.last().expect("at least one checkpoint");
    let schedule = ConstructionSchedule {
        kind,
        modulus: p.f.name().to_string(),
        c: p.c,
        eps_rule: p.eps_rule.to_string(),
        eps,
        m,
        n,
        blocks,
        values: None,
        r: None,
        h: None,
        length,
        warnings: compatibility_warning(p, kind),
    };
    finish(schedule, p)
}

/// `B_k = hi` on the blocks, `lo` elsewhere, for `k = 1..=len`.
pub fn indicator_sequence(
    blocks: &[[u64; 2]],
    len: u64,
    hi: ClosedSet,
    lo: ClosedSet,
    limit: ClosedSet,
) -> Result<SetSequence> {
    let valued: Vec<([u64; 2], ClosedSet)> = blocks.iter().map(|b| (*b, hi.clone())).collect();
    block_sequence(&valued, len, lo, limit)
}

/// Sequence taking each block's set on that block and `background` elsewhere.
/// Blocks must be disjoint, sorted and inside `[1, len]`.
pub fn block_sequence(
    blocks: &[([u64; 2], ClosedSet)],
    len: u64,
    background: ClosedSet,
    limit: ClosedSet,
) -> Result<SetSequence> {
    let mut segments = Vec::new();
    let mut covered = 0u64;
    for ([lo, hi], set) in blocks {
        if *lo <= covered || hi < lo || *hi > len {
            return Err(Error::InvalidParameter(format!(
                "block [{lo}, {hi}] is empty, overlaps its predecessor or leaves [1, {len}]"
            )));
        }
        if *lo > covered + 1 {
            segments.push(Segment { end: lo - 1, set: background.clone() });
        }
        segments.push(Segment { end: *hi, set: set.clone() });
        covered = *hi;
    }
    if covered < len {
        segments.push(Segment { end: len, set: background });
    }
    SetSequence::from_segments(merge_segments(segments), limit)
}

fn merge_segments(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for s in segments {
        match out.last_mut() {
            Some(last) if last.set == s.set => last.end = s.end,
            _ => out.push(s),
        }
    }
    out
}

/// Separation of `WN^f` from `WS ∩ WI`: the value `r_j` fills the whole
/// interval `(m_j, m_{j+1}]` (with `m_0 = 0`, `r_0 = eps_1`), so the prefix
/// sum at `m_k` telescopes to `m_k eps_k`.
pub fn build_ui_separation(p: &SeparationParams) -> Result<Separation> {
    let (eps, m, n) = search_checkpoints(p, true)?;
    let mut blocks = Vec::with_capacity(m.len());
    let mut values = Vec::with_capacity(m.len());
    let mut prev = (0u64, 0.0);
    for (&mk, &ek) in m.iter().zip(&eps) {
        values.push(if prev.0 == 0 { ek } else { block_value(prev.0, prev.1, mk, ek) });
        blocks.push([prev.0 + 1, mk]);
        prev = (mk, ek);
    }
    let length = *m.last().expect("at least one checkpoint");
    let schedule = ConstructionSchedule {
        kind: ConstructionKind::UiSeparation,
        modulus: p.f.name().to_string(),
        c: p.c,
        eps_rule: p.eps_rule.to_string(),
        eps,
        m,
        n,
        blocks,
        values: Some(values),
        r: None,
        h: None,
        length,
        warnings: compatibility_warning(p, ConstructionKind::UiSeparation),
    };
    finish(schedule, p)
}

/// Smallest block indices `r_1 < r_2 < ...` with `f(h eps_k) >= c f(h)` and
/// `h (1 - eps_k) - 1 > 0` for `h = h_{r_k}`.
fn search_blocks(p: &SeparationParams) -> Result<(Vec<f64>, Vec<usize>)> {
    p.validate()?;
    let theta = p.theta()?;
    let mut eps = Vec::with_capacity(p.checkpoints);
    let mut rs: Vec<usize> = Vec::with_capacity(p.checkpoints);
    for k in 1..=p.checkpoints {
        let e = p.eps_rule.eps(k);
        let start = rs.last().map_or(1, |r| r + 1);
        let found = (start..=theta.horizon()).find(|&r| {
            let h = theta.h(r).expect("r within horizon");
            ratio_holds(&p.f, h, e, p.c) && h as f64 * (1.0 - e) - 1.0 > 0.0
        });
        let r = found.ok_or_else(|| Error::Construction {
            k,
            reason: format!("no qualifying block in ({}, {}]", start - 1, theta.horizon()),
        })?;
        eps.push(e);
        rs.push(r);
    }
    Ok((eps, rs))
}

fn lacunary_schedule(p: &SeparationParams, kind: ConstructionKind) -> Result<ConstructionSchedule> {
    let theta = p.theta()?;
    let (eps, rs) = search_blocks(p)?;
    let mut m = Vec::new();
    let mut n = Vec::new();
    let mut h = Vec::new();
    let mut blocks = Vec::new();
    for (&r, &e) in rs.iter().zip(&eps) {
        let (lo, hi) = theta.block(r)?;
        let hr = hi - lo;
        let nk = count_for(hr, e);
        m.push(hi);
        n.push(nk);
        h.push(hr);
        blocks.push(match kind {
            ConstructionKind::LacunaryUiSeparation => [lo + 1, hi],
            _ => [hi - nk + 1, hi],
        });
    }
    let values = (kind == ConstructionKind::LacunaryUiSeparation).then(|| eps.clone());
    Ok(ConstructionSchedule {
        kind,
        modulus: p.f.name().to_string(),
        c: p.c,
        eps_rule: p.eps_rule.to_string(),
        eps,
        length: *m.last().expect("at least one checkpoint"),
        m,
        n,
        blocks,
        values,
        r: Some(rs),
        h: Some(h),
        warnings: compatibility_warning(p, kind),
    })
}

/// 0/1 indicator on `A_k = [k_{r_k} - n_k + 1, k_{r_k}]`.
pub fn build_lacunary_separation(p: &SeparationParams) -> Result<Separation> {
    let schedule = lacunary_schedule(p, ConstructionKind::LacunarySeparation)?;
    finish(schedule, p)
}

/// `B_l = {eps_k}` on the whole block `I_{r_k}`, `{0}` elsewhere.
pub fn build_lacunary_ui_separation(p: &SeparationParams) -> Result<Separation> {
    let schedule = lacunary_schedule(p, ConstructionKind::LacunaryUiSeparation)?;
    finish(schedule, p)
}

pub fn build(kind: ConstructionKind, p: &SeparationParams) -> Result<Separation> {
    match kind {
        ConstructionKind::StatSeparation => build_stat_separation(p),
        ConstructionKind::CesaroSeparation => build_cesaro_separation(p),
        ConstructionKind::UiSeparation => build_ui_separation(p),
        ConstructionKind::LacunarySeparation => build_lacunary_separation(p),
        ConstructionKind::LacunaryUiSeparation => build_lacunary_ui_separation(p),
    }
}

/// Set sequence described by a schedule: 0/1 indicators for the statistical
/// kinds, block values otherwise; limit `{0}`.
pub fn schedule_sequence(s: &ConstructionSchedule) -> Result<SetSequence> {
    let zero = ClosedSet::point(0.0);
    match &s.values {
        None => indicator_sequence(&s.blocks, s.length, ClosedSet::point(1.0), zero.clone(), zero),
        Some(values) => {
            let valued: Vec<_> = s.blocks.iter().zip(values).map(|(b, &v)| (*b, ClosedSet::point(v))).collect();
            block_sequence(&valued, s.length, zero.clone(), zero)
        }
    }
}

fn finish(schedule: ConstructionSchedule, p: &SeparationParams) -> Result<Separation> {
    verify_schedule(&schedule, &p.f, p.theta.as_ref())?;
    let sequence = schedule_sequence(&schedule)?;
    Ok(Separation { schedule, sequence })
}

/// Checks every schedule invariant; the first violation is reported as a
/// construction error naming its step.
pub fn verify_schedule(s: &ConstructionSchedule, f: &ModulusFunction, theta: Option<&LacunarySchedule>) -> Result<()> {
    let bad = |k: usize, reason: String| Err(Error::Construction { k, reason });
    let len = s.m.len();
    if len == 0 || s.eps.len() != len || s.n.len() != len || s.blocks.len() != len {
        return bad(0, "schedule arrays have inconsistent lengths".into());
    }
    if s.m.windows(2).any(|w| w[1] <= w[0]) {
        return bad(0, "checkpoints are not strictly increasing".into());
    }
    if s.eps.windows(2).any(|w| w[1] >= w[0]) || s.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return bad(0, "eps_k must decrease inside (0, 1)".into());
    }
    if s.kind.is_lacunary() {
        let theta = theta.ok_or_else(|| Error::InvalidParameter("lacunary schedule check needs theta".into()))?;
        let (Some(rs), Some(hs)) = (&s.r, &s.h) else {
            return bad(0, "lacunary schedule lacks block indices".into());
        };
        for k in 0..len {
            let (lo, hi) = theta.block(rs[k])?;
            let (h, e) = (hs[k], s.eps[k]);
            if h != hi - lo || s.m[k] != hi {
                return bad(k + 1, format!("block {} does not match the schedule", rs[k]));
            }
            if !ratio_holds(f, h, e, s.c) {
                return bad(k + 1, format!("f(h eps) < c f(h) at h = {h}"));
            }
            if !(h as f64 * (1.0 - e) - 1.0 > 0.0) {
                return bad(k + 1, format!("h (1 - eps) - 1 <= 0 at h = {h}"));
            }
            if s.n[k] != count_for(h, e) || s.n[k] >= h {
                return bad(k + 1, format!("n_k = {} inconsistent with h = {h}", s.n[k]));
            }
            let [blo, bhi] = s.blocks[k];
            if blo <= lo || bhi > hi || blo > bhi {
                return bad(k + 1, format!("block [{blo}, {bhi}] escapes I_r = ({lo}, {hi}]"));
            }
        }
        return Ok(());
    }
    for k in 0..len {
        let (m, e) = (s.m[k], s.eps[k]);
        if !ratio_holds(f, m, e, s.c) {
            return bad(k + 1, format!("f(m eps) < c f(m) at m = {m}"));
        }
        if s.n[k] != count_for(m, e) {
            return bad(k + 1, format!("n_k = {} is not floor(m eps) + 1", s.n[k]));
        }
        if k > 0 && !check_step_inequality(s.m[k - 1], s.eps[k - 1], e, m) {
            return bad(k + 1, "step inequality fails".into());
        }
        let lo_bound = if k == 0 { 1 } else { s.m[k - 1] };
        let [blo, bhi] = s.blocks[k];
        if blo < lo_bound || bhi > m || blo > bhi {
            return bad(k + 1, format!("block [{blo}, {bhi}] escapes [{lo_bound}, {m}]"));
        }
    }
    if let (ConstructionKind::UiSeparation, Some(values)) = (s.kind, &s.values) {
        if values.iter().any(|&v| !(v > 0.0)) || values.windows(2).any(|w| w[1] >= w[0]) {
            return bad(0, "block values are not positive and strictly decreasing".into());
        }
    }
    Ok(())
}
