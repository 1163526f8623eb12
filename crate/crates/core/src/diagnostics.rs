//! Finite-truncation convergence traces over a witness set.
//!
//! Every limit in the definitions of (f-)statistical, (f-)strong Cesàro and
//! uniformly integrable convergence is replaced by the value of the
//! corresponding ratio at a declared scale. Gap traces are run-length
//! encoded, so all prefix and block aggregates cost `O(runs)` regardless of
//! the nominal sequence length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::lacunary::LacunarySchedule;
use crate::metric_sets::{dist, Point, SetSequence};
use crate::modulus::ModulusFunction;

/// Longest trace materialized value-by-value.
pub const DENSE_LIMIT: u64 = 1 << 26;

// ---------------------------------------------------------------------------
// Witnesses

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSet {
    points: Vec<Point>,
}

impl WitnessSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("witness set"))?;
        if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch { point: p.dim(), set: first.dim() });
        }
        Ok(Self { points })
    }

    /// `{0, 1/4, 1/2, 3/4, 1, 2}` on the line. `1/2` is equidistant from the
    /// two values used by the indicator constructions and always sees gap 0.
    pub fn default_line() -> Self {
        Self::scalars(&[0.0, 0.25, 0.5, 0.75, 1.0, 2.0]).expect("finite witnesses")
    }

    pub fn scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Point::new(vec![x])).collect::<Result<_>>()?)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

// ---------------------------------------------------------------------------
// Gap traces

/// Maximal run of equal gaps on the indices `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub start: u64,
    pub end: u64,
    pub value: f64,
}

impl Run {
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Gaps `g_k = |d(x, A_k) - d(x, A)|`, `k = 1..=N`, for one witness `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTrace {
    witness: Point,
    runs: Vec<Run>,
    // cumulative sum through the end of each run
    cum_sum: Vec<f64>,
}

impl GapTrace {
    /// Builds a trace from `(length, value)` pieces; adjacent equal values
    /// are merged and zero-length pieces dropped.
    pub fn from_pieces(witness: Point, pieces: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut runs: Vec<Run> = Vec::new();
        let mut next = 1u64;
        for (len, value) in pieces {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!("gap {value} at index {next} is not finite and nonnegative")));
            }
            if len == 0 {
                continue;
            }
            let end = next + len - 1;
            match runs.last_mut() {
                Some(last) if last.value == value => last.end = end,
                _ => runs.push(Run { start: next, end, value }),
            }
            next = end + 1;
        }
        if runs.is_empty() {
            return Err(Error::Empty("gap trace"));
        }
        let mut acc = 0.0;
        let cum_sum = runs
            .iter()
            .map(|r| {
                acc += r.value * r.len() as f64;
                acc
            })
            .collect();
        Ok(Self { witness, runs, cum_sum })
    }

    pub fn from_gaps(witness: Point, gaps: &[f64]) -> Result<Self> {
        Self::from_pieces(witness, gaps.iter().map(|&g| (1, g)))
    }

    /// Gap trace of `seq` at `witness`, truncated to the first `n` indices.
    pub fn build(seq: &SetSequence, witness: &Point, n: u64) -> Result<Self> {
        if n == 0 || n > seq.len() {
            return Err(Error::IndexOutOfRange { index: n, len: seq.len() });
        }
        let base = dist(witness, seq.limit())?;
        let mut pieces = Vec::with_capacity(seq.segments().len());
        let mut prev = 0u64;
        for seg in seq.segments() {
            if prev >= n {
                break;
            }
            let end = seg.end.min(n);
            pieces.push((end - prev, (dist(witness, &seg.set)? - base).abs()));
            prev = end;
        }
        Self::from_pieces(witness.clone(), pieces)
    }

    pub fn witness(&self) -> &Point {
        &self.witness
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn len(&self) -> u64 {
        self.runs.last().map_or(0, |r| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    fn check_index(&self, n: u64) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange { index: n, len: self.len() });
        }
        Ok(())
    }

    fn run_index(&self, k: u64) -> usize {
        self.runs.partition_point(|r| r.end < k)
    }

    pub fn gap(&self, k: u64) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.runs[self.run_index(k)].value)
    }

    /// `#{k <= n : g_k > eps}`.
    pub fn prefix_count(&self, eps: f64, n: u64) -> Result<u64> {
        self.check_index(n)?;
        Ok(self.block_count(eps, 0, n))
    }

    /// `sum_{k <= n} g_k`.
    pub fn prefix_sum(&self, n: u64) -> Result<f64> {
        self.check_index(n)?;
        let i = self.run_index(n);
        let before = if i == 0 { 0.0 } else { self.cum_sum[i - 1] };
        let r = self.runs[i];
        Ok(before + r.value * (n - r.start + 1) as f64)
    }

    fn overlaps(&self, lo: u64, hi: u64) -> impl Iterator<Item = (Run, u64)> + '_ {
        let first = self.run_index(lo + 1);
        self.runs[first..].iter().take_while(move |r| r.start <= hi).map(move |r| {
            let overlap = r.end.min(hi) - r.start.max(lo + 1) + 1;
            (*r, overlap)
        })
    }

    /// `#{k in (lo, hi] : g_k > eps}`; `hi` is clamped to the trace length.
    pub fn block_count(&self, eps: f64, lo: u64, hi: u64) -> u64 {
        let hi = hi.min(self.len());
        if hi <= lo {
            return 0;
        }
        self.overlaps(lo, hi).filter(|(r, _)| r.value > eps).map(|(_, o)| o).sum()
    }

    /// `sum_{k in (lo, hi]} g_k`, summed run by run.
    pub fn block_sum(&self, lo: u64, hi: u64) -> f64 {
        self.block_sum_above(f64::NEG_INFINITY, lo, hi)
    }

    /// `sum_{k in (lo, hi], g_k >= cutoff} g_k`.
    pub fn block_sum_above(&self, cutoff: f64, lo: u64, hi: u64) -> f64 {
        let hi = hi.min(self.len());
        if hi <= lo {
            return 0.0;
        }
        self.overlaps(lo, hi)
            .filter(|(r, _)| r.value >= cutoff)
            .map(|(r, o)| r.value * o as f64)
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn max_gap(&self) -> f64 {
        self.runs.iter().map(|r| r.value).fold(0.0, f64::max)
    }

    /// Indices where every prefix statistic is evaluated when the trace is too
    /// long to walk densely: run endpoints plus geometrically spaced offsets
    /// inside each run.
    pub fn sample_indices(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for r in &self.runs {
            out.push(r.start);
            let mut step = 1u64;
            while let Some(k) = r.start.checked_add(step) {
                if k >= r.end {
                    break;
                }
                out.push(k);
                step = step.saturating_mul(2);
            }
            if r.end != r.start {
                out.push(r.end);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Prefix traces

fn check_positive_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")))
    }
}

fn dense_len(trace: &GapTrace) -> Result<u64> {
    let n = trace.len();
    if n > DENSE_LIMIT {
        return Err(Error::TraceTooLong(n));
    }
    Ok(n)
}

/// Calls `emit(n, count, sum)` for `n = 1..=N`, where `count` counts the gaps
/// above `eps` (zero when `eps` is `None`).
fn walk(trace: &GapTrace, eps: Option<f64>, mut emit: impl FnMut(u64, u64, f64)) -> Result<()> {
    dense_len(trace)?;
    let mut count = 0u64;
    let mut sum = 0.0;
    for r in trace.runs() {
        let hit = eps.is_some_and(|e| r.value > e) as u64;
        for n in r.start..=r.end {
            count += hit;
            sum += r.value;
            emit(n, count, sum);
        }
    }
    Ok(())
}

/// `count(eps, n) / n` for `n = 1..=N`.
pub fn density_trace(trace: &GapTrace, eps: f64) -> Result<Vec<f64>> {
    check_positive_eps(eps)?;
    let mut out = Vec::with_capacity(trace.len() as usize);
    walk(trace, Some(eps), |n, c, _| out.push(c as f64 / n as f64))?;
    Ok(out)
}

/// `f(count(eps, n)) / f(n)` for `n = 1..=N`.
pub fn f_density_trace(trace: &GapTrace, eps: f64, f: &ModulusFunction) -> Result<Vec<f64>> {
    check_positive_eps(eps)?;
    let mut out = Vec::with_capacity(trace.len() as usize);
    // f(count) only changes when the count does
    let mut cached = (0u64, f.eval(0.0));
    walk(trace, Some(eps), |n, c, _| {
        if c != cached.0 {
            cached = (c, f.eval(c as f64));
        }
        out.push(cached.1 / f.eval(n as f64));
    })?;
    Ok(out)
}

/// `sum(n) / n` for `n = 1..=N`.
pub fn cesaro_trace(trace: &GapTrace) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.len() as usize);
    walk(trace, None, |n, _, s| out.push(s / n as f64))?;
    Ok(out)
}

/// `f(sum(n)) / f(n)` for `n = 1..=N`.
pub fn f_cesaro_trace(trace: &GapTrace, f: &ModulusFunction) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.len() as usize);
    walk(trace, None, |n, _, s| out.push(f.eval(s) / f.eval(n as f64)))?;
    Ok(out)
}

pub fn density_at(trace: &GapTrace, eps: f64, n: u64) -> Result<f64> {
    check_positive_eps(eps)?;
    Ok(trace.prefix_count(eps, n)? as f64 / n as f64)
}

pub fn f_density_at(trace: &GapTrace, eps: f64, f: &ModulusFunction, n: u64) -> Result<f64> {
    check_positive_eps(eps)?;
    Ok(f.eval(trace.prefix_count(eps, n)? as f64) / f.eval(n as f64))
}

pub fn cesaro_at(trace: &GapTrace, n: u64) -> Result<f64> {
    Ok(trace.prefix_sum(n)? / n as f64)
}

pub fn f_cesaro_at(trace: &GapTrace, f: &ModulusFunction, n: u64) -> Result<f64> {
    Ok(f.eval(trace.prefix_sum(n)?) / f.eval(n as f64))
}

// ---------------------------------------------------------------------------
// Block traces

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRatio {
    pub r: usize,
    pub ratio: f64,
}

/// Per-block ratios over the complete blocks `1..=R` contained in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTrace {
    pub ratios: Vec<BlockRatio>,
    /// The trailing block that is only partially covered, if any. It is
    /// excluded from `ratios`.
    pub incomplete_block: Option<usize>,
}

impl BlockTrace {
    pub fn at(&self, r: usize) -> Option<f64> {
        self.ratios.iter().find(|b| b.r == r).map(|b| b.ratio)
    }

    pub fn last(&self) -> Option<BlockRatio> {
        self.ratios.last().copied()
    }
}

fn block_trace(
    trace: &GapTrace,
    theta: &LacunarySchedule,
    mut ratio: impl FnMut(u64, u64, u64) -> f64,
) -> Result<BlockTrace> {
    let n = trace.len();
    let last_k = *theta.indices().last().expect("schedule has blocks");
    if n > last_k {
        return Err(Error::ScheduleExhausted {
            requested: theta.horizon() + 1,
            available: theta.horizon(),
        });
    }
    let complete = theta.complete_blocks(n);
    let ratios = (1..=complete)
        .map(|r| {
            let (lo, hi) = theta.block(r)?;
            Ok(BlockRatio { r, ratio: ratio(lo, hi, hi - lo) })
        })
        .collect::<Result<Vec<_>>>()?;
    let incomplete_block = (theta.k(complete)? < n).then_some(complete + 1);
    Ok(BlockTrace { ratios, incomplete_block })
}

/// `f(#{k in I_r : g_k > eps}) / f(h_r)` per complete block.
pub fn lacunary_f_density_trace(
    trace: &GapTrace,
    eps: f64,
    f: &ModulusFunction,
    theta: &LacunarySchedule,
) -> Result<BlockTrace> {
    check_positive_eps(eps)?;
    block_trace(trace, theta, |lo, hi, h| f.eval(trace.block_count(eps, lo, hi) as f64) / f.eval(h as f64))
}

/// `#{k in I_r : g_k > eps} / h_r` per complete block.
pub fn lacunary_density_trace(trace: &GapTrace, eps: f64, theta: &LacunarySchedule) -> Result<BlockTrace> {
    lacunary_f_density_trace(trace, eps, &ModulusFunction::identity(), theta)
}

/// `f(sum_{k in I_r} g_k) / f(h_r)` per complete block.
pub fn lacunary_f_cesaro_trace(trace: &GapTrace, f: &ModulusFunction, theta: &LacunarySchedule) -> Result<BlockTrace> {
    block_trace(trace, theta, |lo, hi, h| f.eval(trace.block_sum(lo, hi)) / f.eval(h as f64))
}

pub fn lacunary_cesaro_trace(trace: &GapTrace, theta: &LacunarySchedule) -> Result<BlockTrace> {
    lacunary_f_cesaro_trace(trace, &ModulusFunction::identity(), theta)
}

// ---------------------------------------------------------------------------
// Uniform integrability

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiPoint {
    pub cutoff: f64,
    pub value: f64,
}

fn check_cutoffs(cutoffs: &[f64]) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::Empty("cutoff grid"));
    }
    if cutoffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("cutoffs must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// For each cutoff `c`: `sup_{n <= N} (1/n) sum_{k <= n, g_k >= c} g_k`.
///
/// Inside a run the running mean is `w + a / n` for constants `w, a`, hence
/// monotone, so the supremum is attained at a run endpoint.
pub fn uniform_integrability_diag(trace: &GapTrace, cutoffs: &[f64]) -> Result<Vec<UiPoint>> {
    check_cutoffs(cutoffs)?;
    Ok(cutoffs
        .iter()
        .map(|&cutoff| {
            let mut s = 0.0;
            let mut sup: f64 = 0.0;
            for r in trace.runs() {
                let w = if r.value >= cutoff { r.value } else { 0.0 };
                sup = sup.max((s + w) / r.start as f64);
                s += w * r.len() as f64;
                sup = sup.max(s / r.end as f64);
            }
            UiPoint { cutoff, value: sup }
        })
        .collect())
}

/// Block normalization used by [`lacunary_ui_diag`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiNormalization {
    /// Each block sum is divided by `h_t`.
    #[default]
    Normalized,
    /// Raw block sums.
    Unnormalized,
}

/// For each cutoff `c`: `sup_t (1/h_t) sum_{k in I_t, g_k >= c} g_k` over the
/// complete blocks (without the `1/h_t` factor when unnormalized).
pub fn lacunary_ui_diag(
    trace: &GapTrace,
    theta: &LacunarySchedule,
    cutoffs: &[f64],
    normalization: UiNormalization,
) -> Result<Vec<UiPoint>> {
    check_cutoffs(cutoffs)?;
    cutoffs
        .iter()
        .map(|&cutoff| {
            let blocks = block_trace(trace, theta, |lo, hi, h| {
                let s = trace.block_sum_above(cutoff, lo, hi);
                match normalization {
                    UiNormalization::Normalized => s / h as f64,
                    UiNormalization::Unnormalized => s,
                }
            })?;
            let value = blocks.ratios.iter().map(|b| b.ratio).fold(0.0, f64::max);
            Ok(UiPoint { cutoff, value })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Chebyshev domination

/// A prefix or block where `f(count) <= ceil(1/eps) * f(sum)` failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevViolation {
    pub index: u64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
}

const CHEBYSHEV_REL_TOL: f64 = 1e-12;

fn chebyshev_ok(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CHEBYSHEV_REL_TOL * rhs.abs().max(1.0)
}

/// Checks `f(count(eps, n)) <= ceil(1/eps) * f(sum(n))` for every prefix `n`
/// (every `n` when the trace is short enough to walk, otherwise on
/// [`GapTrace::sample_indices`]) and every `eps` in `eps_grid`.
pub fn chebyshev_violations(trace: &GapTrace, eps_grid: &[f64], f: &ModulusFunction) -> Result<Vec<ChebyshevViolation>> {
    for &e in eps_grid {
        check_positive_eps(e)?;
    }
    let factors: Vec<f64> = eps_grid.iter().map(|e| (1.0 / e).ceil()).collect();
    let mut out = Vec::new();
    if trace.len() <= DENSE_LIMIT {
        let mut counts = vec![0u64; eps_grid.len()];
        let mut f_counts = vec![f.eval(0.0); eps_grid.len()];
        let mut sum = 0.0;
        let mut f_sum = f.eval(0.0);
        for r in trace.runs() {
            for n in r.start..=r.end {
                if r.value != 0.0 {
                    sum += r.value;
                    f_sum = f.eval(sum);
                }
                for (i, &e) in eps_grid.iter().enumerate() {
                    if r.value > e {
                        counts[i] += 1;
                        f_counts[i] = f.eval(counts[i] as f64);
                    }
                    let rhs = factors[i] * f_sum;
                    if !chebyshev_ok(f_counts[i], rhs) {
                        out.push(ChebyshevViolation { index: n, eps: e, lhs: f_counts[i], rhs });
                    }
                }
            }
        }
    } else {
        for n in trace.sample_indices() {
            let f_sum = f.eval(trace.prefix_sum(n)?);
            for (i, &e) in eps_grid.iter().enumerate() {
                let lhs = f.eval(trace.prefix_count(e, n)? as f64);
                let rhs = factors[i] * f_sum;
                if !chebyshev_ok(lhs, rhs) {
                    out.push(ChebyshevViolation { index: n, eps: e, lhs, rhs });
                }
            }
        }
    }
    Ok(out)
}

/// Block form of [`chebyshev_violations`] over the complete blocks of `theta`;
/// `index` carries the block number.
pub fn block_chebyshev_violations(
    trace: &GapTrace,
    theta: &LacunarySchedule,
    eps_grid: &[f64],
    f: &ModulusFunction,
) -> Result<Vec<ChebyshevViolation>> {
    let complete = theta.complete_blocks(trace.len());
    let mut out = Vec::new();
    for r in 1..=complete {
        let (lo, hi) = theta.block(r)?;
        let f_sum = f.eval(trace.block_sum(lo, hi));
        for &e in eps_grid {
            check_positive_eps(e)?;
            let lhs = f.eval(trace.block_count(e, lo, hi) as f64);
            let rhs = (1.0 / e).ceil() * f_sum;
            if !chebyshev_ok(lhs, rhs) {
                out.push(ChebyshevViolation { index: r as u64, eps: e, lhs, rhs });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "WS")]
    Ws,
    #[serde(rename = "WS_f")]
    WsF,
    #[serde(rename = "WN")]
    Wn,
    #[serde(rename = "WN_f")]
    WnF,
    #[serde(rename = "WS_θ")]
    WsTheta,
    #[serde(rename = "WS_θ_f")]
    WsThetaF,
    #[serde(rename = "WN_θ")]
    WnTheta,
    #[serde(rename = "WN_θ_f")]
    WnThetaF,
    #[serde(rename = "WI")]
    Wi,
    #[serde(rename = "WI_θ")]
    WiTheta,
}

impl Mode {
    pub const ALL: [Mode; 10] = [
        Mode::Ws,
        Mode::WsF,
        Mode::Wn,
        Mode::WnF,
        Mode::WsTheta,
        Mode::WsThetaF,
        Mode::WnTheta,
        Mode::WnThetaF,
        Mode::Wi,
        Mode::WiTheta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ws => "WS",
            Mode::WsF => "WS_f",
            Mode::Wn => "WN",
            Mode::WnF => "WN_f",
            Mode::WsTheta => "WS_θ",
            Mode::WsThetaF => "WS_θ_f",
            Mode::WnTheta => "WN_θ",
            Mode::WnThetaF => "WN_θ_f",
            Mode::Wi => "WI",
            Mode::WiTheta => "WI_θ",
        }
    }

    pub fn needs_modulus(self) -> bool {
        matches!(self, Mode::WsF | Mode::WnF | Mode::WsThetaF | Mode::WnThetaF)
    }

    pub fn needs_schedule(self) -> bool {
        matches!(self, Mode::WsTheta | Mode::WsThetaF | Mode::WnTheta | Mode::WnThetaF | Mode::WiTheta)
    }

    /// Density modes are evaluated once per `eps` in the grid.
    pub fn uses_eps(self) -> bool {
        matches!(self, Mode::Ws | Mode::WsF | Mode::WsTheta | Mode::WsThetaF)
    }

    pub fn is_ui(self) -> bool {
        matches!(self, Mode::Wi | Mode::WiTheta)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// Accepts `WS_θ_f`, `WSθf`, `WSthetaf`, `ws_theta_f`, ...
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .replace("theta", "θ")
            .replace("Theta", "θ")
            .replace("THETA", "θ")
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_uppercase)
            .collect();
        let mode = match key.as_str() {
            "WS" => Mode::Ws,
            "WSF" => Mode::WsF,
            "WN" => Mode::Wn,
            "WNF" => Mode::WnF,
            "WSΘ" => Mode::WsTheta,
            "WSΘF" => Mode::WsThetaF,
            "WNΘ" => Mode::WnTheta,
            "WNΘF" => Mode::WnThetaF,
            "WI" => Mode::Wi,
            "WIΘ" => Mode::WiTheta,
            _ => return Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        };
        Ok(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    ConvergedAtScale,
    NotConvergedAtScale,
}

/// `{2^-1, ..., 2^-6}`.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=6).map(|i| 2f64.powi(-i)).collect()
}

/// `{2^0, ..., 2^10}`.
pub fn default_cutoffs() -> Vec<f64> {
    (0..=10).map(|i| 2f64.powi(i)).collect()
}

#[derive(Debug, Clone)]
pub struct AssessConfig {
    pub mode: Mode,
    pub f: Option<ModulusFunction>,
    pub theta: Option<LacunarySchedule>,
    pub eps_grid: Vec<f64>,
    /// UI cutoffs; the terminal UI value is the one at the largest cutoff.
    pub cutoffs: Vec<f64>,
    pub delta: f64,
    /// Truncation `N`.
    pub scale: u64,
    pub ui_normalization: UiNormalization,
}

impl AssessConfig {
    pub fn new(mode: Mode, scale: u64) -> Self {
        Self {
            mode,
            f: None,
            theta: None,
            eps_grid: default_eps_grid(),
            cutoffs: default_cutoffs(),
            delta: 0.05,
            scale,
            ui_normalization: UiNormalization::Normalized,
        }
    }

    pub fn with_modulus(mut self, f: ModulusFunction) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_schedule(mut self, theta: LacunarySchedule) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_eps_grid(mut self, eps_grid: Vec<f64>) -> Self {
        self.eps_grid = eps_grid;
        self
    }

    pub fn with_cutoffs(mut self, cutoffs: Vec<f64>) -> Self {
        self.cutoffs = cutoffs;
        self
    }

    fn modulus(&self) -> Result<&ModulusFunction> {
        self.f.as_ref().ok_or(Error::MissingParameter { mode: self.mode.as_str(), what: "a modulus function" })
    }

    fn schedule(&self) -> Result<&LacunarySchedule> {
        self.theta.as_ref().ok_or(Error::MissingParameter { mode: self.mode.as_str(), what: "a lacunary schedule" })
    }

    fn validate(&self) -> Result<()> {
        if self.mode.needs_modulus() {
            self.modulus()?;
        }
        if self.mode.needs_schedule() {
            self.schedule()?;
        }
        if self.mode.uses_eps() {
            if self.eps_grid.is_empty() {
                return Err(Error::Empty("eps grid"));
            }
            for &e in &self.eps_grid {
                check_positive_eps(e)?;
            }
        }
        if self.mode.is_ui() {
            check_cutoffs(&self.cutoffs)?;
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Terminal ratio of one witness (and one `eps` for density modes, or the
/// largest cutoff for UI modes, carried in `epsilon`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRatio {
    pub witness_id: usize,
    pub witness: Point,
    pub epsilon: Option<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mode: Mode,
    pub scale: u64,
    /// Last complete block for lacunary modes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_horizon: Option<usize>,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus: Option<String>,
    pub eps_grid: Vec<f64>,
    pub cutoffs: Vec<f64>,
    pub ratios: Vec<WitnessRatio>,
    pub decision: Decision,
}

impl Verdict {
    pub fn converged(&self) -> bool {
        self.decision == Decision::ConvergedAtScale
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }
}

/// `(epsilon, ratio)` pairs plus the block they were read from, if any.
type Terminal = (Vec<(Option<f64>, f64)>, Option<usize>);

/// One witness's terminal values for `cfg.mode` at `cfg.scale`.
fn terminal_ratios(trace: &GapTrace, cfg: &AssessConfig) -> Result<Terminal> {
    let n = trace.len();
    let last_block = |bt: BlockTrace| -> Result<(f64, usize)> {
        let b = bt.last().ok_or(Error::Empty("complete lacunary blocks within the scale"))?;
        Ok((b.ratio, b.r))
    };
    let per_eps = |g: &dyn Fn(f64) -> Result<f64>| -> Result<Vec<(Option<f64>, f64)>> {
        cfg.eps_grid.iter().map(|&e| Ok((Some(e), g(e)?))).collect()
    };
    let out = match cfg.mode {
        Mode::Ws => (per_eps(&|e| density_at(trace, e, n))?, None),
        Mode::WsF => {
            let f = cfg.modulus()?;
            (per_eps(&|e| f_density_at(trace, e, f, n))?, None)
        }
        Mode::Wn => (vec![(None, cesaro_at(trace, n)?)], None),
        Mode::WnF => (vec![(None, f_cesaro_at(trace, cfg.modulus()?, n)?)], None),
        Mode::WsTheta | Mode::WsThetaF => {
            let theta = cfg.schedule()?;
            let id = ModulusFunction::identity();
            let f = if cfg.mode == Mode::WsThetaF { cfg.modulus()? } else { &id };
            let mut r_last = 0;
            let vals = per_eps(&|e| Ok(last_block(lacunary_f_density_trace(trace, e, f, theta)?)?.0))?;
            if let Some(b) = lacunary_f_density_trace(trace, cfg.eps_grid[0], f, theta)?.last() {
                r_last = b.r;
            }
            (vals, Some(r_last))
        }
        Mode::WnTheta | Mode::WnThetaF => {
            let theta = cfg.schedule()?;
            let id = ModulusFunction::identity();
            let f = if cfg.mode == Mode::WnThetaF { cfg.modulus()? } else { &id };
            let (v, r) = last_block(lacunary_f_cesaro_trace(trace, f, theta)?)?;
            (vec![(None, v)], Some(r))
        }
        Mode::Wi => {
            let ui = uniform_integrability_diag(trace, &cfg.cutoffs)?;
            let last = ui.last().expect("cutoffs nonempty");
            (vec![(Some(last.cutoff), last.value)], None)
        }
        Mode::WiTheta => {
            let theta = cfg.schedule()?;
            let ui = lacunary_ui_diag(trace, theta, &cfg.cutoffs, cfg.ui_normalization)?;
            let last = ui.last().expect("cutoffs nonempty");
            (vec![(Some(last.cutoff), last.value)], Some(theta.complete_blocks(n)))
        }
    };
    Ok(out)
}

/// Builds a gap trace per witness, evaluates the mode's terminal ratios at
/// `cfg.scale` and decides convergence at scale: every terminal ratio must be
/// at most `cfg.delta`.
pub fn assess(seq: &SetSequence, witnesses: &WitnessSet, cfg: &AssessConfig) -> Result<Verdict> {
    cfg.validate()?;
    if cfg.scale == 0 || cfg.scale > seq.len() {
        return Err(Error::IndexOutOfRange { index: cfg.scale, len: seq.len() });
    }
    let mut ratios = Vec::new();
    let mut block_horizon = None;
    for (witness_id, x) in witnesses.points().iter().enumerate() {
        let trace = GapTrace::build(seq, x, cfg.scale)?;
        let (vals, blocks) = terminal_ratios(&trace, cfg)?;
        block_horizon = blocks;
        ratios.extend(vals.into_iter().map(|(epsilon, ratio)| WitnessRatio {
            witness_id,
            witness: x.clone(),
            epsilon,
            ratio,
        }));
    }
    let decision = if ratios.iter().all(|r| r.ratio <= cfg.delta) {
        Decision::ConvergedAtScale
    } else {
        Decision::NotConvergedAtScale
    };
    Ok(Verdict {
        mode: cfg.mode,
        scale: cfg.scale,
        block_horizon,
        delta: cfg.delta,
        modulus: cfg.f.as_ref().filter(|_| cfg.mode.needs_modulus()).map(|f| f.name().to_string()),
        eps_grid: if cfg.mode.uses_eps() { cfg.eps_grid.clone() } else { Vec::new() },
        cutoffs: if cfg.mode.is_ui() { cfg.cutoffs.clone() } else { Vec::new() },
        ratios,
        decision,
    })
}

// ---------------------------------------------------------------------------
// Trace rows

/// One CSV row: `index` is `n` for prefix traces and the block number `r`
/// for block traces; `epsilon` is empty for Cesàro traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub index: u64,
    pub witness_id: usize,
    pub epsilon: Option<f64>,
    pub ratio: f64,
}

/// Trace rows of `cfg.mode` for every witness, evaluated at every `n`
/// (prefix modes) or every complete block (lacunary modes). UI modes emit
/// one row per cutoff with the cutoff number as index.
pub fn trace_rows(seq: &SetSequence, witnesses: &WitnessSet, cfg: &AssessConfig) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    if cfg.scale == 0 || cfg.scale > seq.len() {
        return Err(Error::IndexOutOfRange { index: cfg.scale, len: seq.len() });
    }
    let mut rows = Vec::new();
    for (witness_id, x) in witnesses.points().iter().enumerate() {
        let trace = GapTrace::build(seq, x, cfg.scale)?;
        let mut push_dense = |eps: Option<f64>, vals: Vec<f64>| {
            rows.extend(vals.into_iter().enumerate().map(|(i, ratio)| TraceRow {
                index: i as u64 + 1,
                witness_id,
                epsilon: eps,
                ratio,
            }))
        };
        match cfg.mode {
            Mode::Ws => {
                for &e in &cfg.eps_grid {
                    push_dense(Some(e), density_trace(&trace, e)?);
                }
            }
            Mode::WsF => {
                for &e in &cfg.eps_grid {
                    push_dense(Some(e), f_density_trace(&trace, e, cfg.modulus()?)?);
                }
            }
            Mode::Wn => push_dense(None, cesaro_trace(&trace)?),
            Mode::WnF => push_dense(None, f_cesaro_trace(&trace, cfg.modulus()?)?),
            Mode::WsTheta | Mode::WsThetaF | Mode::WnTheta | Mode::WnThetaF => {
                let theta = cfg.schedule()?;
                let id = ModulusFunction::identity();
                let f = if cfg.mode.needs_modulus() { cfg.modulus()? } else { &id };
                let traces: Vec<(Option<f64>, BlockTrace)> = if cfg.mode.uses_eps() {
                    cfg.eps_grid
                        .iter()
                        .map(|&e| Ok((Some(e), lacunary_f_density_trace(&trace, e, f, theta)?)))
                        .collect::<Result<_>>()?
                } else {
                    vec![(None, lacunary_f_cesaro_trace(&trace, f, theta)?)]
                };
                for (eps, bt) in traces {
                    rows.extend(bt.ratios.iter().map(|b| TraceRow {
                        index: b.r as u64,
                        witness_id,
                        epsilon: eps,
                        ratio: b.ratio,
                    }));
                }
            }
            Mode::Wi | Mode::WiTheta => {
                let ui = if cfg.mode == Mode::Wi {
                    uniform_integrability_diag(&trace, &cfg.cutoffs)?
                } else {
                    lacunary_ui_diag(&trace, cfg.schedule()?, &cfg.cutoffs, cfg.ui_normalization)?
                };
                rows.extend(ui.iter().enumerate().map(|(i, p)| TraceRow {
                    index: i as u64 + 1,
                    witness_id,
                    epsilon: Some(p.cutoff),
                    ratio: p.value,
                }));
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Indices `1..=n` thinned geometrically: every index up to `dense`, then
/// about `per_octave` indices per doubling, always including `n`.
pub fn log_indices(n: u64, dense: u64, per_octave: u32) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=dense.min(n)).collect();
    let factor = 2f64.powf(1.0 / per_octave.max(1) as f64);
    let mut x = dense.max(1) as f64;
    loop {
        x *= factor;
        let k = x.floor() as u64;
        if k >= n {
            break;
        }
        if out.last().is_none_or(|&last| k > last) {
            out.push(k);
        }
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Like [`trace_rows`], but prefix modes are evaluated only at `indices`
/// (values above the scale are skipped). Block and UI modes are unaffected.
pub fn trace_rows_at(seq: &SetSequence, witnesses: &WitnessSet, cfg: &AssessConfig, indices: &[u64]) -> Result<Vec<TraceRow>> {
    if cfg.mode.needs_schedule() || cfg.mode.is_ui() {
        return trace_rows(seq, witnesses, cfg);
    }
    cfg.validate()?;
    if cfg.scale == 0 || cfg.scale > seq.len() {
        return Err(Error::IndexOutOfRange { index: cfg.scale, len: seq.len() });
    }
    let indices: Vec<u64> = indices.iter().copied().filter(|&n| n >= 1 && n <= cfg.scale).collect();
    let mut rows = Vec::new();
    for (witness_id, x) in witnesses.points().iter().enumerate() {
        let trace = GapTrace::build(seq, x, cfg.scale)?;
        for &n in &indices {
            match cfg.mode {
                Mode::Ws | Mode::WsF => {
                    for &e in &cfg.eps_grid {
                        let ratio = match cfg.mode {
                            Mode::Ws => density_at(&trace, e, n)?,
                            _ => f_density_at(&trace, e, cfg.modulus()?, n)?,
                        };
                        rows.push(TraceRow { index: n, witness_id, epsilon: Some(e), ratio });
                    }
                }
                Mode::Wn => rows.push(TraceRow { index: n, witness_id, epsilon: None, ratio: cesaro_at(&trace, n)? }),
                _ => rows.push(TraceRow {
                    index: n,
                    witness_id,
                    epsilon: None,
                    ratio: f_cesaro_at(&trace, cfg.modulus()?, n)?,
                }),
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

fn sort_rows(rows: &mut [TraceRow]) {
    rows.sort_by(|a, b| {
        a.index
            .cmp(&b.index)
            .then(a.witness_id.cmp(&b.witness_id))
            .then(a.epsilon.unwrap_or(0.0).total_cmp(&b.epsilon.unwrap_or(0.0)).reverse())
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_sets::ClosedSet;
    use crate::modulus::make_builtin;

    fn x0() -> Point {
        Point::scalar(0.0)
    }

    fn tr(gaps: &[f64]) -> GapTrace {
        GapTrace::from_gaps(x0(), gaps).unwrap()
    }

    #[test]
    fn even_indices_have_half_density() {
        let gaps: Vec<f64> = (1..=10).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let d = density_trace(&tr(&gaps), 0.5).unwrap();
        assert_eq!(d[9], 0.5);
        assert_eq!(d.len(), 10);
    }

    #[test]
    fn zero_gaps_give_zero_everywhere() {
        let t = tr(&[0.0; 50]);
        let f = make_builtin("lambert_w").unwrap();
        assert!(density_trace(&t, 0.1).unwrap().iter().all(|&r| r == 0.0));
        assert!(f_density_trace(&t, 0.1, &f).unwrap().iter().all(|&r| r == 0.0));
        assert!(f_cesaro_trace(&t, &f).unwrap().iter().all(|&r| r == 0.0));
        assert_eq!(t.runs().len(), 1);
    }

    #[test]
    fn harmonic_cesaro() {
        let gaps: Vec<f64> = (1..=4).map(|k| 1.0 / k as f64).collect();
        let c = cesaro_trace(&tr(&gaps)).unwrap();
        assert!((c[3] - 25.0 / 48.0).abs() < 1e-15);
        let constant = cesaro_trace(&tr(&[0.3; 7])).unwrap();
        assert!(constant.iter().all(|&r| (r - 0.3).abs() < 1e-15));
    }

    #[test]
    fn identity_reduces_exactly() {
        let gaps: Vec<f64> = (0..200).map(|k| ((k * 37 % 11) as f64) / 10.0).collect();
        let t = tr(&gaps);
        let id = ModulusFunction::identity();
        assert_eq!(density_trace(&t, 0.3).unwrap(), f_density_trace(&t, 0.3, &id).unwrap());
        assert_eq!(cesaro_trace(&t).unwrap(), f_cesaro_trace(&t, &id).unwrap());
    }

    #[test]
    fn prefix_aggregates() {
        let t = GapTrace::from_pieces(x0(), [(3, 1.0), (2, 0.0), (5, 0.5)]).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.prefix_count(0.4, 10).unwrap(), 8);
        assert_eq!(t.prefix_count(0.6, 10).unwrap(), 3);
        assert_eq!(t.prefix_count(0.4, 4).unwrap(), 3);
        assert_eq!(t.prefix_sum(7).unwrap(), 4.0);
        assert_eq!(t.block_sum(3, 7), 1.0);
        assert_eq!(t.block_count(0.4, 3, 7), 2);
        assert_eq!(t.gap(6).unwrap(), 0.5);
        assert!(t.prefix_sum(11).is_err());
        assert!(GapTrace::from_gaps(x0(), &[-1.0]).is_err());
        assert!(GapTrace::from_gaps(x0(), &[]).is_err());
    }

    #[test]
    fn ui_examples() {
        let mut gaps = vec![0.0; 20];
        gaps[0] = 10.0;
        let ui = uniform_integrability_diag(&tr(&gaps), &[5.0]).unwrap();
        assert_eq!(ui[0].value, 10.0);
        let ui = uniform_integrability_diag(&tr(&[0.7; 30]), &[0.5, 0.7, 1.0]).unwrap();
        assert_eq!(ui.iter().map(|p| p.value).collect::<Vec<_>>(), vec![0.7, 0.7, 0.0]);
        assert!(uniform_integrability_diag(&tr(&[1.0]), &[]).is_err());
        assert!(uniform_integrability_diag(&tr(&[1.0]), &[2.0, 1.0]).is_err());
    }

    #[test]
    fn ui_sup_matches_enumeration() {
        let gaps: Vec<f64> = (0..300).map(|k| ((k * 7919 % 13) as f64) / 4.0).collect();
        let t = tr(&gaps);
        for c in [0.5, 1.0, 2.0, 3.0] {
            let mut s = 0.0;
            let mut sup: f64 = 0.0;
            for (i, &g) in gaps.iter().enumerate() {
                if g >= c {
                    s += g;
                }
                sup = sup.max(s / (i + 1) as f64);
            }
            let v = uniform_integrability_diag(&t, &[c]).unwrap()[0].value;
            assert!((v - sup).abs() <= 1e-12 * sup.max(1.0), "c = {c}: {v} vs {sup}");
        }
    }

    #[test]
    fn lacunary_half_blocks() {
        let theta = LacunarySchedule::new(vec![0, 4, 12, 28]).unwrap();
        // gaps 1 on exactly half of each block
        let t = GapTrace::from_pieces(x0(), [(2, 1.0), (2, 0.0), (4, 1.0), (4, 0.0), (8, 1.0), (8, 0.0), (3, 1.0)]).unwrap();
        let bt = lacunary_f_density_trace(&t, 0.5, &ModulusFunction::identity(), &theta).unwrap_err();
        assert!(matches!(bt, Error::ScheduleExhausted { .. }));
        let t = GapTrace::from_pieces(x0(), [(2, 1.0), (2, 0.0), (4, 1.0), (4, 0.0), (8, 1.0), (6, 0.0)]).unwrap();
        let bt = lacunary_density_trace(&t, 0.5, &theta).unwrap();
        assert_eq!(bt.ratios.len(), 2);
        assert!(bt.ratios.iter().all(|b| b.ratio == 0.5));
        assert_eq!(bt.incomplete_block, Some(3));
        let c = lacunary_cesaro_trace(&GapTrace::from_pieces(x0(), [(4, 0.25), (8, 0.75)]).unwrap(), &theta).unwrap();
        assert_eq!(c.at(1), Some(0.25));
        assert_eq!(c.at(2), Some(0.75));
        assert_eq!(c.incomplete_block, None);
    }

    #[test]
    fn lacunary_ui_quarter_blocks() {
        let theta = LacunarySchedule::pow2();
        let n = 1u64 << 12;
        let mut pieces = Vec::new();
        let mut min_h = u64::MAX;
        for r in 1..=12 {
            let h = theta.h(r).unwrap();
            min_h = min_h.min(h);
            let ones = h.div_ceil(4);
            pieces.push((ones, 1.0));
            pieces.push((h - ones, 0.0));
        }
        let t = GapTrace::from_pieces(x0(), pieces).unwrap();
        assert_eq!(t.len(), n);
        let v = lacunary_ui_diag(&t, &theta, &[0.5], UiNormalization::Normalized).unwrap()[0].value;
        assert!(v >= 0.25 && v <= 0.25 + 1.0 / min_h as f64, "{v}");
        let raw = lacunary_ui_diag(&t, &theta, &[0.5], UiNormalization::Unnormalized).unwrap()[0].value;
        assert_eq!(raw, (theta.h(12).unwrap() / 4) as f64);
        let full = GapTrace::from_pieces(x0(), [(n, 1.0)]).unwrap();
        assert_eq!(lacunary_ui_diag(&full, &theta, &[0.5], UiNormalization::Normalized).unwrap()[0].value, 1.0);
        assert_eq!(lacunary_ui_diag(&full, &theta, &[2.0], UiNormalization::Normalized).unwrap()[0].value, 0.0);
    }

    #[test]
    fn constant_sequence_converges_in_every_mode() {
        let set = ClosedSet::point(3.0);
        let seq = SetSequence::constant(set.clone(), 1 << 12, set).unwrap();
        for mode in Mode::ALL {
            let cfg = AssessConfig::new(mode, 1 << 12)
                .with_modulus(make_builtin("log1p").unwrap())
                .with_schedule(LacunarySchedule::pow2())
                .with_delta(1e-12);
            let v = assess(&seq, &WitnessSet::default_line(), &cfg).unwrap();
            assert!(v.converged(), "{mode}: {v:?}");
        }
    }

    #[test]
    fn assess_parameter_errors() {
        let seq = SetSequence::constant(ClosedSet::point(1.0), 10, ClosedSet::point(0.0)).unwrap();
        let w = WitnessSet::default_line();
        assert!(matches!(
            assess(&seq, &w, &AssessConfig::new(Mode::WsF, 10)),
            Err(Error::MissingParameter { .. })
        ));
        assert!(matches!(
            assess(&seq, &w, &AssessConfig::new(Mode::WnTheta, 10)),
            Err(Error::MissingParameter { .. })
        ));
        assert!(matches!(
            assess(&seq, &w, &AssessConfig::new(Mode::Ws, 11)),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(WitnessSet::new(vec![]).is_err());
    }

    #[test]
    fn mode_parsing() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("WSθf".parse::<Mode>().unwrap(), Mode::WsThetaF);
        assert_eq!("WNthetaf".parse::<Mode>().unwrap(), Mode::WnThetaF);
        assert_eq!("WIθ".parse::<Mode>().unwrap(), Mode::WiTheta);
        assert_eq!("wsf".parse::<Mode>().unwrap(), Mode::WsF);
        assert!("WX".parse::<Mode>().is_err());
    }

    #[test]
    fn trace_rows_are_index_major() {
        let seq = SetSequence::constant(ClosedSet::point(1.0), 3, ClosedSet::point(0.0)).unwrap();
        let w = WitnessSet::scalars(&[0.0]).unwrap();
        let rows = trace_rows(&seq, &w, &AssessConfig::new(Mode::Ws, 3).with_eps_grid(vec![0.5])).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 2, 3]);
        let w2 = WitnessSet::scalars(&[0.0, 2.0]).unwrap();
        let rows = trace_rows(&seq, &w2, &AssessConfig::new(Mode::Wn, 3)).unwrap();
        assert_eq!(rows.iter().map(|r| (r.index, r.witness_id)).collect::<Vec<_>>(), vec![(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)]);
        assert!(rows.iter().all(|r| r.epsilon.is_none()));
    }

    #[test]
    fn sample_indices_cover_run_endpoints() {
        let t = GapTrace::from_pieces(x0(), [(1, 1.0), (1000, 0.0)]).unwrap();
        let s = t.sample_indices();
        assert!(s.contains(&1) && s.contains(&2) && s.contains(&1001));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
