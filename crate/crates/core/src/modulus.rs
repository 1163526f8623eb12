//! Modulus functions, sampled axiom checks and finite-scale estimates of the
//! compatibility profiles `phi(eps) = limsup_n f(n eps) / f(n)` and its
//! lacunary analogue along the gaps `h_t` of a schedule.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lacunary::LacunarySchedule;
use crate::lambert::lambert_w0;

pub type EvalFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Built-in modulus families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// `t^p + t^q`, `0 < p, q <= 1`.
    PowerSum { p: f64, q: f64 },
    /// `t^p + ln(1 + t)`, `0 < p <= 1`.
    PowerPlusLog { p: f64 },
    /// `t + t / (t + 1)`.
    XPlusRational,
    /// `ln(1 + t)`.
    Log1p,
    /// Principal Lambert W, the inverse of `w e^w`.
    LambertW,
    Identity,
}

impl Builtin {
    /// The families listed as examples in the literature on compatible
    /// moduli, plus the identity. Compatible ones first.
    pub fn catalogue() -> Vec<Builtin> {
        vec![
            Builtin::PowerSum { p: 1.0, q: 1.0 },
            Builtin::PowerSum { p: 0.5, q: 0.5 },
            Builtin::PowerSum { p: 0.5, q: 1.0 },
            Builtin::PowerPlusLog { p: 1.0 },
            Builtin::XPlusRational,
            Builtin::Identity,
            Builtin::Log1p,
            Builtin::LambertW,
        ]
    }

    /// Builds a builtin from its bare name and `key=value` parameters.
    pub fn from_parts(name: &str, params: &[(String, f64)]) -> Result<Builtin> {
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameter(format!("`{name}` requires parameter {key}")))
        };
        let b = match name {
            "power_sum" => Builtin::PowerSum { p: get("p")?, q: get("q")? },
            "power_plus_log" => Builtin::PowerPlusLog { p: get("p")? },
            "x_plus_rational" => Builtin::XPlusRational,
            "log1p" => Builtin::Log1p,
            "lambert_w" => Builtin::LambertW,
            "identity" => Builtin::Identity,
            other => return Err(Error::UnknownBuiltin(other.to_string())),
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let unit = |label: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "exponent {label} = {v} outside (0, 1]; the result would not be subadditive"
                )))
            }
        };
        match *self {
            Builtin::PowerSum { p, q } => {
                unit("p", p)?;
                unit("q", q)
            }
            Builtin::PowerPlusLog { p } => unit("p", p),
            _ => Ok(()),
        }
    }

    fn params(&self) -> Vec<(String, f64)> {
        match *self {
            Builtin::PowerSum { p, q } => vec![("p".into(), p), ("q".into(), q)],
            Builtin::PowerPlusLog { p } => vec![("p".into(), p)],
            _ => Vec::new(),
        }
    }

    fn base_name(&self) -> &'static str {
        match self {
            Builtin::PowerSum { .. } => "power_sum",
            Builtin::PowerPlusLog { .. } => "power_plus_log",
            Builtin::XPlusRational => "x_plus_rational",
            Builtin::Log1p => "log1p",
            Builtin::LambertW => "lambert_w",
            Builtin::Identity => "identity",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Builtin::PowerSum { p, q } => write!(f, "power_sum({p},{q})"),
            Builtin::PowerPlusLog { p } => write!(f, "power_plus_log({p})"),
            other => f.write_str(other.base_name()),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `log1p`, `power_sum(0.5,1)`, `power_plus_log(1)`, ...
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidParameter(format!("unbalanced parentheses in `{s}`")))?;
                let args: Vec<f64> = close[open + 1..]
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidParameter(format!("bad argument `{a}` in `{s}`")))
                    })
                    .collect::<Result<_>>()?;
                (&s[..open], args)
            }
            None => (s, Vec::new()),
        };
        let keys: &[&str] = match name {
            "power_sum" => &["p", "q"],
            "power_plus_log" => &["p"],
            _ => &[],
        };
        if !args.is_empty() && args.len() != keys.len() {
            return Err(Error::InvalidParameter(format!(
                "`{name}` takes {} argument(s), got {}",
                keys.len(),
                args.len()
            )));
        }
        let params: Vec<(String, f64)> =
            keys.iter().zip(args).map(|(k, v)| (k.to_string(), v)).collect();
        Builtin::from_parts(name, &params)
    }
}

/// Evaluation oracle for a modulus `f: [0, inf) -> [0, inf)` plus metadata.
#[derive(Clone)]
pub struct ModulusFunction {
    name: String,
    params: Vec<(String, f64)>,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for ModulusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusFunction")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl ModulusFunction {
    /// Wraps a user-supplied oracle. No axioms are checked here; see
    /// [`check_axioms`].
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            params: Vec::new(),
            eval: Arc::new(eval),
        }
    }

    pub fn builtin(b: Builtin) -> Result<Self> {
        b.validate()?;
        let eval: Arc<EvalFn> = match b {
            Builtin::PowerSum { p, q } => Arc::new(move |t: f64| t.powf(p) + t.powf(q)),
            Builtin::PowerPlusLog { p } => Arc::new(move |t: f64| t.powf(p) + t.ln_1p()),
            Builtin::XPlusRational => Arc::new(|t: f64| t + t / (t + 1.0)),
            Builtin::Log1p => Arc::new(|t: f64| t.ln_1p()),
            Builtin::LambertW => Arc::new(lambert_w0),
            Builtin::Identity => Arc::new(|t: f64| t),
        };
        Ok(Self {
            name: b.to_string(),
            params: b.params(),
            eval,
        })
    }

    pub fn identity() -> Self {
        Self::builtin(Builtin::Identity).expect("identity is valid")
    }

    pub fn log1p() -> Self {
        Self::builtin(Builtin::Log1p).expect("log1p is valid")
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }
}

/// Parses a builtin spec string and instantiates it.
pub fn make_builtin(spec: &str) -> Result<ModulusFunction> {
    ModulusFunction::builtin(spec.parse()?)
}

// ---------------------------------------------------------------------------
// Axioms

/// Sample specification for [`check_axioms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomGrid {
    /// Upper end of the sampled interval `[0, max]`.
    pub max: f64,
    /// Number of equispaced points in `(0, max]`.
    pub linear_points: usize,
    /// Number of points `max * 2^-j`, `j = 1..=geometric_points`.
    pub geometric_points: usize,
    /// Additional sample points in `(0, max]`.
    #[serde(default)]
    pub extra: Vec<f64>,
    /// Slack for the inequality axioms, scaled by `max(1, |rhs|)`.
    pub tol: f64,
    /// Right continuity at zero is probed on `2^-j`, `j = 0..=vanish_depth`.
    pub vanish_depth: i32,
    /// `f(2^-vanish_depth)` must not exceed this.
    pub vanish_tol: f64,
    /// Unboundedness is probed on `2^j`, `j = 0..=unbounded_log2`.
    pub unbounded_log2: i32,
    /// `f(2^unbounded_log2)` must exceed this.
    pub unbounded_bound: f64,
}

impl AxiomGrid {
    pub fn new(max: f64, tol: f64) -> Self {
        Self {
            max,
            linear_points: 64,
            geometric_points: 40,
            extra: Vec::new(),
            tol,
            vanish_depth: 1000,
            vanish_tol: 1e-6,
            unbounded_log2: 1000,
            unbounded_bound: 100.0,
        }
    }

    pub fn with_extra(mut self, extra: impl IntoIterator<Item = f64>) -> Self {
        self.extra.extend(extra);
        self
    }

    fn points(&self) -> Result<Vec<f64>> {
        if !(self.max.is_finite() && self.max > 0.0) {
            return Err(Error::InvalidParameter(format!("grid max must be positive, got {}", self.max)));
        }
        let mut pts = vec![0.0];
        for j in 1..=self.linear_points {
            pts.push(self.max * j as f64 / self.linear_points as f64);
        }
        for j in 1..=self.geometric_points {
            pts.push(self.max * 2f64.powi(-(j as i32)));
        }
        pts.extend(self.extra.iter().copied().filter(|&t| t > 0.0 && t <= self.max));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::InvalidParameter("axiom grid needs at least two points in (0, max]".into()));
        }
        Ok(pts)
    }
}

impl Default for AxiomGrid {
    fn default() -> Self {
        Self::new(1e6, 1e-9)
    }
}

/// Outcome of one sampled axiom. `witness` holds the offending arguments and
/// values when the check fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl AxiomCheck {
    fn pass() -> Self {
        Self { passed: true, witness: None, detail: None }
    }

    fn fail(witness: Vec<f64>, detail: impl Into<String>) -> Self {
        Self {
            passed: false,
            witness: Some(witness),
            detail: Some(detail.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub grid: AxiomGrid,
    /// `f(0) = 0` and `f(t) > 0` for `t > 0`.
    pub positivity: AxiomCheck,
    pub subadditivity: AxiomCheck,
    pub monotonicity: AxiomCheck,
    pub right_continuity: AxiomCheck,
    pub unbounded: AxiomCheck,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        [
            &self.positivity,
            &self.subadditivity,
            &self.monotonicity,
            &self.right_continuity,
            &self.unbounded,
        ]
        .iter()
        .all(|c| c.passed)
    }
}

fn slack(tol: f64, rhs: f64) -> f64 {
    tol * rhs.abs().max(1.0)
}

pub fn check_axioms(f: &ModulusFunction, grid: &AxiomGrid) -> Result<AxiomReport> {
    let pts = grid.points()?;
    let vals: Vec<f64> = pts.iter().map(|&t| f.eval(t)).collect();
    let vanish: Vec<(f64, f64)> = (0..=grid.vanish_depth)
        .map(|j| {
            let t = 2f64.powi(-j);
            (t, f.eval(t))
        })
        .collect();

    let positivity = (|| {
        let f0 = f.eval(0.0);
        if !f0.is_finite() || f0.abs() > grid.tol {
            return AxiomCheck::fail(vec![0.0, f0], "f(0) != 0");
        }
        for (&t, &v) in pts.iter().zip(&vals).skip(1) {
            if !v.is_finite() || v <= 0.0 {
                return AxiomCheck::fail(vec![t, v], format!("f({t}) = {v} is not finite and positive"));
            }
        }
        // the vanishing probes may underflow to zero, e.g. t^2 at t = 2^-1000
        for &(t, v) in &vanish {
            if !v.is_finite() || v < 0.0 {
                return AxiomCheck::fail(vec![t, v], format!("f({t}) = {v} is not finite and nonnegative"));
            }
        }
        AxiomCheck::pass()
    })();

    let subadditivity = (|| {
        for i in 0..pts.len() {
            for j in i..pts.len() {
                let (s, t) = (pts[i], pts[j]);
                let lhs = f.eval(s + t);
                let rhs = vals[i] + vals[j];
                if !(lhs <= rhs + slack(grid.tol, rhs)) {
                    return AxiomCheck::fail(
                        vec![s, t, lhs, rhs],
                        format!("f({s} + {t}) = {lhs} > f({s}) + f({t}) = {rhs}"),
                    );
                }
            }
        }
        AxiomCheck::pass()
    })();

    let monotonicity = (|| {
        for w in 0..pts.len() - 1 {
            let (a, b) = (vals[w], vals[w + 1]);
            if !(a <= b + slack(grid.tol, b)) {
                return AxiomCheck::fail(
                    vec![pts[w], pts[w + 1], a, b],
                    format!("f({}) = {a} > f({}) = {b}", pts[w], pts[w + 1]),
                );
            }
        }
        AxiomCheck::pass()
    })();

    let right_continuity = (|| {
        for w in vanish.windows(2) {
            let ((s, a), (t, b)) = (w[0], w[1]);
            if !(b <= a + slack(grid.tol, a)) {
                return AxiomCheck::fail(vec![s, t, a, b], "f is not nonincreasing along t -> 0+");
            }
        }
        let (t, last) = *vanish.last().expect("vanish sample is nonempty");
        if !(last <= grid.vanish_tol) {
            return AxiomCheck::fail(vec![t, last], format!("f({t}) = {last} does not vanish"));
        }
        AxiomCheck::pass()
    })();

    let unbounded = (|| {
        let mut prev = f.eval(1.0);
        for j in 1..=grid.unbounded_log2 {
            let t = 2f64.powi(j);
            let v = f.eval(t);
            if !(v >= prev) {
                return AxiomCheck::fail(vec![t / 2.0, t, prev, v], "f(2^j) is not increasing");
            }
            prev = v;
        }
        if !(prev > grid.unbounded_bound) {
            let t = 2f64.powi(grid.unbounded_log2);
            return AxiomCheck::fail(vec![t, prev], format!("f({t}) = {prev} stays below {}", grid.unbounded_bound));
        }
        AxiomCheck::pass()
    })();

    Ok(AxiomReport {
        grid: grid.clone(),
        positivity,
        subadditivity,
        monotonicity,
        right_continuity,
        unbounded,
    })
}

// ---------------------------------------------------------------------------
// Compatibility

/// Probe parameters for [`phi_hat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub n_max: u64,
    pub tail_start: u64,
}

impl Default for Probe {
    fn default() -> Self {
        Self { n_max: 1 << 40, tail_start: 1 << 10 }
    }
}

impl Probe {
    /// The geometric probe grid `tail_start * 2^j <= n_max`.
    pub fn grid(&self) -> impl Iterator<Item = u64> {
        let n_max = self.n_max;
        std::iter::successors(Some(self.tail_start), |&n| n.checked_mul(2)).take_while(move |&n| n <= n_max)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")))
    }
}

fn ratio_at(f: &ModulusFunction, n: f64, eps: f64) -> Result<f64> {
    let denom = f.eval(n);
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::EstimatorFailure { name: f.name().to_string(), n });
    }
    Ok(f.eval(n * eps) / denom)
}

/// Tail-maximum estimate of `limsup_n f(n eps) / f(n)` over the geometric
/// grid of `probe`.
pub fn phi_hat(f: &ModulusFunction, eps: f64, probe: Probe) -> Result<f64> {
    check_eps(eps)?;
    if probe.tail_start == 0 || probe.tail_start >= probe.n_max {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= tail_start < n_max, got {} and {}",
            probe.tail_start, probe.n_max
        )));
    }
    probe
        .grid()
        .try_fold(f64::NEG_INFINITY, |acc, n| Ok(acc.max(ratio_at(f, n as f64, eps)?)))
}

/// Tail-maximum estimate of `limsup_t f(h_t eps) / f(h_t)` over
/// `t in [t_max / 2, t_max]`.
pub fn phi_theta_hat(f: &ModulusFunction, theta: &LacunarySchedule, eps: f64, t_max: usize) -> Result<f64> {
    check_eps(eps)?;
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be >= 1".into()));
    }
    if t_max > theta.horizon() {
        return Err(Error::ScheduleExhausted {
            requested: t_max,
            available: theta.horizon(),
        });
    }
    (t_max.div_ceil(2).max(1)..=t_max).try_fold(f64::NEG_INFINITY, |acc, t| {
        let h = theta.h(t)? as f64;
        Ok(acc.max(ratio_at(f, h, eps)?))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compatibility {
    Compatible,
    NonCompatible,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub eps: f64,
    pub value: f64,
}

/// Decision parameters for [`classify_compatibility`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub probe: Probe,
    pub threshold: f64,
    /// A tail whose log-log slope `d ln phi / d ln eps` over the last three
    /// grid points is at most this counts as a plateau.
    pub plateau_slope: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            probe: Probe::default(),
            threshold: 0.05,
            plateau_slope: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub name: String,
    pub phi_estimates: Vec<PhiEstimate>,
    pub verdict: Compatibility,
    pub probe_ceiling: u64,
    pub threshold: f64,
    /// Log-log slope of the estimates over the last three grid points.
    pub tail_slope: f64,
}

/// `{2^0, 2^-1, ..., 2^-20}`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=20).map(|i| 2f64.powi(-i)).collect()
}

fn check_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.len() < 3 {
        return Err(Error::InvalidParameter("eps grid needs at least three points".into()));
    }
    for &e in eps_grid {
        check_eps(e)?;
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps grid must be strictly decreasing".into()));
    }
    Ok(())
}

fn decide(estimates: &[PhiEstimate], threshold: f64, plateau_slope: f64) -> (Compatibility, f64) {
    let [a, b, c] = estimates[estimates.len() - 3..] else {
        unreachable!("grid length checked")
    };
    let slope = (a.value / c.value).ln() / (a.eps / c.eps).ln();
    let verdict = if c.value < threshold && a.value > b.value && b.value > c.value {
        Compatibility::Compatible
    } else if c.value >= threshold && slope <= plateau_slope {
        Compatibility::NonCompatible
    } else {
        Compatibility::Inconclusive
    };
    (verdict, slope)
}

pub fn classify_compatibility(f: &ModulusFunction, eps_grid: &[f64], opts: &ClassifyOptions) -> Result<CompatibilityReport> {
    check_eps_grid(eps_grid)?;
    let phi_estimates = eps_grid
        .iter()
        .map(|&eps| Ok(PhiEstimate { eps, value: phi_hat(f, eps, opts.probe)? }))
        .collect::<Result<Vec<_>>>()?;
    let (verdict, tail_slope) = decide(&phi_estimates, opts.threshold, opts.plateau_slope);
    Ok(CompatibilityReport {
        name: f.name().to_string(),
        phi_estimates,
        verdict,
        probe_ceiling: opts.probe.n_max,
        threshold: opts.threshold,
        tail_slope,
    })
}

/// Same decision rule as [`classify_compatibility`], applied to
/// [`phi_theta_hat`] estimates.
pub fn classify_theta_compatibility(
    f: &ModulusFunction,
    theta: &LacunarySchedule,
    eps_grid: &[f64],
    t_max: usize,
    opts: &ClassifyOptions,
) -> Result<CompatibilityReport> {
    check_eps_grid(eps_grid)?;
    let phi_estimates = eps_grid
        .iter()
        .map(|&eps| Ok(PhiEstimate { eps, value: phi_theta_hat(f, theta, eps, t_max)? }))
        .collect::<Result<Vec<_>>>()?;
    let (verdict, tail_slope) = decide(&phi_estimates, opts.threshold, opts.plateau_slope);
    Ok(CompatibilityReport {
        name: f.name().to_string(),
        phi_estimates,
        verdict,
        probe_ceiling: theta.h(t_max)?,
        threshold: opts.threshold,
        tail_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> ModulusFunction {
        make_builtin(s).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(b("power_sum(1,1)").eval(3.0), 6.0);
        assert!((b("log1p").eval(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(b("x_plus_rational").eval(1.0), 1.5);
        assert_eq!(b("identity").eval(2.5), 2.5);
        let w = b("lambert_w").eval(std::f64::consts::E);
        assert!((w - 1.0).abs() < 1e-12);
        let f = b("power_plus_log(0.5)");
        assert!((f.eval(4.0) - (2.0 + 5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn parameter_range_is_enforced() {
        for bad in ["power_sum(0,1)", "power_sum(1.5,1)", "power_plus_log(-1)", "power_sum(0.5)"] {
            assert!(make_builtin(bad).is_err(), "{bad} accepted");
        }
        assert!(matches!(make_builtin("cosh"), Err(Error::UnknownBuiltin(_))));
        let f = Builtin::from_parts("power_sum", &[("p".into(), 0.5), ("q".into(), 1.0)]).unwrap();
        assert_eq!(f, Builtin::PowerSum { p: 0.5, q: 1.0 });
        assert_eq!(f.to_string().parse::<Builtin>().unwrap(), f);
    }

    #[test]
    fn squares_fail_subadditivity_with_witness() {
        let sq = ModulusFunction::new("square", |t| t * t);
        let grid = AxiomGrid::new(10.0, 1e-9).with_extra([1.0]);
        let report = check_axioms(&sq, &grid).unwrap();
        assert!(!report.subadditivity.passed);
        let w = report.subadditivity.witness.unwrap();
        let (s, t, lhs, rhs) = (w[0], w[1], w[2], w[3]);
        assert!(lhs > rhs);
        assert_eq!(lhs, (s + t) * (s + t));
        assert!(report.positivity.passed);
        assert!(report.monotonicity.passed);
    }

    #[test]
    fn bad_oracles_fail_positivity() {
        let neg = ModulusFunction::new("neg", |t| -t);
        let r = check_axioms(&neg, &AxiomGrid::new(10.0, 1e-9)).unwrap();
        assert!(!r.positivity.passed);
        assert!(r.positivity.witness.is_some());
        let nan = ModulusFunction::new("nan", |t| if t > 5.0 { f64::NAN } else { t });
        let r = check_axioms(&nan, &AxiomGrid::new(10.0, 1e-9)).unwrap();
        assert!(!r.positivity.passed);
        let bounded = ModulusFunction::new("bounded", |t: f64| t.min(1.0));
        let r = check_axioms(&bounded, &AxiomGrid::new(10.0, 1e-9)).unwrap();
        assert!(r.subadditivity.passed);
        assert!(!r.unbounded.passed);
    }

    #[test]
    fn identity_passes_small_grid() {
        let r = check_axioms(&b("identity"), &AxiomGrid::new(10.0, 1e-9)).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn phi_hat_anchors() {
        let probe = Probe::default();
        assert!((phi_hat(&b("identity"), 0.5, probe).unwrap() - 0.5).abs() <= 1e-12);
        let v = phi_hat(&b("log1p"), 0.5, probe).unwrap();
        assert!((0.95..=1.0).contains(&v), "{v}");
        let v = phi_hat(&b("power_plus_log(1)"), 0.25, probe).unwrap();
        assert!((0.25..=0.27).contains(&v), "{v}");
        for f in Builtin::catalogue() {
            let f = ModulusFunction::builtin(f).unwrap();
            assert_eq!(phi_hat(&f, 1.0, probe).unwrap(), 1.0);
        }
    }

    #[test]
    fn phi_hat_rejects_bad_input() {
        let f = b("identity");
        assert!(phi_hat(&f, 0.0, Probe::default()).is_err());
        assert!(phi_hat(&f, 1.5, Probe::default()).is_err());
        assert!(phi_hat(&f, 0.5, Probe { n_max: 8, tail_start: 8 }).is_err());
        let dead = ModulusFunction::new("dead", |t: f64| if t < 1e6 { 0.0 } else { t });
        assert!(matches!(
            phi_hat(&dead, 0.5, Probe::default()),
            Err(Error::EstimatorFailure { .. })
        ));
    }

    #[test]
    fn classifier_matches_literature() {
        let opts = ClassifyOptions::default();
        let grid = default_eps_grid();
        for (spec, expected) in [
            ("log1p", Compatibility::NonCompatible),
            ("lambert_w", Compatibility::NonCompatible),
            ("power_sum(0.5,0.5)", Compatibility::Compatible),
            ("identity", Compatibility::Compatible),
        ] {
            let r = classify_compatibility(&b(spec), &grid, &opts).unwrap();
            assert_eq!(r.verdict, expected, "{spec}: {r:?}");
            assert_eq!(r.phi_estimates[0].value, 1.0);
        }
    }

    #[test]
    fn slowly_decaying_power_is_not_labelled() {
        // t^0.2 is compatible but indistinguishable from a plateau at this scale
        let f = ModulusFunction::new("t^0.2", |t: f64| t.powf(0.2));
        let r = classify_compatibility(&f, &default_eps_grid(), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Compatibility::Inconclusive, "{r:?}");
    }

    #[test]
    fn phi_theta_examples() {
        let theta = LacunarySchedule::pow2();
        let id = b("identity");
        assert!((phi_theta_hat(&id, &theta, 0.25, 40).unwrap() - 0.25).abs() < 1e-15);
        let v = phi_theta_hat(&b("log1p"), &theta, 0.5, 40).unwrap();
        // independent evaluation with h_r = 2^(r-1)
        let oracle = (20..=40)
            .map(|r| {
                let h = 2f64.powi(r - 1);
                (1.0 + 0.5 * h).ln() / (1.0 + h).ln()
            })
            .fold(0.0, f64::max);
        assert_eq!(v, oracle);
        assert!(v >= 0.9);
        let short = LacunarySchedule::from_rule(crate::lacunary::ScheduleRule::POW2, 1 << 10).unwrap();
        assert!(matches!(
            phi_theta_hat(&id, &short, 0.5, 20),
            Err(Error::ScheduleExhausted { requested: 20, available: 10 })
        ));
    }

    #[test]
    fn theta_profile_bounded_by_phi_on_shared_probes() {
        let theta = LacunarySchedule::pow2();
        let t_max = 41;
        // h_t = 2^(t-1) for t in [21, 41] is exactly the probe grid below
        let probe = Probe { n_max: 1 << 40, tail_start: 1 << 20 };
        for f in Builtin::catalogue() {
            let f = ModulusFunction::builtin(f).unwrap();
            for i in 1..=10 {
                let eps = 2f64.powi(-i);
                let th = phi_theta_hat(&f, &theta, eps, t_max).unwrap();
                let ph = phi_hat(&f, eps, probe).unwrap();
                assert!(th <= ph + 1e-12, "{}: {th} > {ph}", f.name());
            }
        }
    }

    #[test]
    fn theta_classifier() {
        let theta = LacunarySchedule::pow2();
        let opts = ClassifyOptions::default();
        let grid = default_eps_grid();
        let r = classify_theta_compatibility(&b("log1p"), &theta, &grid, 41, &opts).unwrap();
        assert_eq!(r.verdict, Compatibility::NonCompatible, "{r:?}");
        let r = classify_theta_compatibility(&b("power_sum(1,1)"), &theta, &grid, 41, &opts).unwrap();
        assert_eq!(r.verdict, Compatibility::Compatible);
    }
}
