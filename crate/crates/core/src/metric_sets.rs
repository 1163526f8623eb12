//! Closed sets in Euclidean space and the point-to-set distance `d(x, A)`.
//!
//! The scalar line is the one-dimensional case; the complex plane is handled
//! as `R^2`. Sequences of sets are stored as runs of identical sets so that
//! constructions with astronomically long but piecewise-constant sequences
//! stay cheap.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSet("a point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidSet(format!("non-finite coordinate {c}")));
        }
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x]).expect("finite scalar")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &Point) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { point: self.dim(), set: other.dim() });
        }
        Ok(euclid(&self.0, &other.0))
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

#[inline]
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// User-supplied distance function `x -> d(x, A)`.
#[derive(Clone)]
pub struct DistanceOracle {
    dim: usize,
    label: String,
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl DistanceOracle {
    pub fn new(label: impl Into<String>, dim: usize, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, label: label.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for DistanceOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistanceOracle")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Finite point cloud, kept sorted by the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    points: Vec<Point>,
}

impl Cloud {
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::InvalidSet("empty point cloud".into()))?;
        let dim = first.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { point: p.dim(), set: dim });
        }
        points.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Nearest-member distance by a sweep outward from `x` along the first
    /// coordinate; members whose first-coordinate offset already exceeds the
    /// best distance are skipped.
    fn nearest(&self, x: &[f64]) -> f64 {
        let x0 = x[0];
        let split = self.points.partition_point(|p| p.0[0] < x0);
        let mut best = f64::INFINITY;
        let (mut lo, mut hi) = (split, split);
        loop {
            let left = (lo > 0).then(|| x0 - self.points[lo - 1].0[0]);
            let right = (hi < self.points.len()).then(|| self.points[hi].0[0] - x0);
            let take_left = match (left, right) {
                (None, None) => break,
                (Some(l), Some(r)) => l <= r,
                (Some(_), None) => true,
                (None, Some(_)) => false,
            };
            let offset = if take_left { left.unwrap() } else { right.unwrap() };
            if offset >= best {
                break;
            }
            let p = if take_left {
                lo -= 1;
                &self.points[lo]
            } else {
                hi += 1;
                &self.points[hi - 1]
            };
            best = best.min(euclid(x, &p.0));
        }
        best
    }
}

#[derive(Debug, Clone)]
pub enum ClosedSet {
    Singleton(Point),
    Cloud(Cloud),
    /// Axis-aligned closed box `lower <= x <= upper`.
    Box { lower: Point, upper: Point },
    Ball { center: Point, radius: f64 },
    Oracle(DistanceOracle),
}

impl PartialEq for ClosedSet {
    fn eq(&self, other: &Self) -> bool {
        use ClosedSet::*;
        match (self, other) {
            (Singleton(a), Singleton(b)) => a == b,
            (Cloud(a), Cloud(b)) => a == b,
            (Box { lower: a, upper: b }, Box { lower: c, upper: d }) => a == c && b == d,
            (Ball { center: a, radius: r }, Ball { center: b, radius: s }) => a == b && r == s,
            (Oracle(a), Oracle(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}

impl ClosedSet {
    pub fn point(x: f64) -> Self {
        ClosedSet::Singleton(Point::scalar(x))
    }

    pub fn cloud(points: Vec<Point>) -> Result<Self> {
        Ok(ClosedSet::Cloud(Cloud::new(points)?))
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidSet(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(ClosedSet::Ball { center, radius })
    }

    pub fn closed_box(lower: Point, upper: Point) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::DimensionMismatch { point: lower.dim(), set: upper.dim() });
        }
        if lower.0.iter().zip(&upper.0).any(|(l, u)| l > u) {
            return Err(Error::InvalidSet("box has lower > upper in some coordinate".into()));
        }
        Ok(ClosedSet::Box { lower, upper })
    }

    pub fn oracle(oracle: DistanceOracle) -> Self {
        ClosedSet::Oracle(oracle)
    }

    pub fn dim(&self) -> usize {
        match self {
            ClosedSet::Singleton(p) => p.dim(),
            ClosedSet::Cloud(c) => c.points[0].dim(),
            ClosedSet::Box { lower, .. } => lower.dim(),
            ClosedSet::Ball { center, .. } => center.dim(),
            ClosedSet::Oracle(o) => o.dim,
        }
    }
}

/// `d(x, S) = inf_{s in S} |x - s|`.
pub fn dist(x: &Point, set: &ClosedSet) -> Result<f64> {
    if x.dim() != set.dim() {
        return Err(Error::DimensionMismatch { point: x.dim(), set: set.dim() });
    }
    let d = match set {
        ClosedSet::Singleton(p) => euclid(&x.0, &p.0),
        ClosedSet::Cloud(c) => c.nearest(&x.0),
        ClosedSet::Box { lower, upper } => x
            .0
            .iter()
            .zip(lower.0.iter().zip(&upper.0))
            .map(|(&v, (&l, &u))| {
                let e = (l - v).max(v - u).max(0.0);
                e * e
            })
            .sum::<f64>()
            .sqrt(),
        ClosedSet::Ball { center, radius } => (euclid(&x.0, &center.0) - radius).max(0.0),
        ClosedSet::Oracle(o) => {
            let d = (o.f)(x);
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::BadOracle(d));
            }
            d
        }
    };
    Ok(d)
}

// ---------------------------------------------------------------------------
// Sequences

/// Run of identical sets ending (inclusively) at index `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub end: u64,
    pub set: ClosedSet,
}

/// Sets `A_1, ..., A_N` together with a limit candidate `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSequence {
    segments: Vec<Segment>,
    limit: ClosedSet,
}

impl SetSequence {
    pub fn from_items(items: Vec<ClosedSet>, limit: ClosedSet) -> Result<Self> {
        let segments = items
            .into_iter()
            .enumerate()
            .map(|(i, set)| Segment { end: i as u64 + 1, set })
            .collect();
        Self::from_segments(segments, limit)
    }

    /// Segments must have strictly increasing ends starting above zero.
    pub fn from_segments(segments: Vec<Segment>, limit: ClosedSet) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Empty("set sequence"));
        }
        let mut prev = 0;
        for s in &segments {
            if s.end <= prev {
                return Err(Error::InvalidSet(format!("segment ends must increase: {} after {prev}", s.end)));
            }
            if s.set.dim() != limit.dim() {
                return Err(Error::DimensionMismatch { point: s.set.dim(), set: limit.dim() });
            }
            prev = s.end;
        }
        Ok(Self { segments, limit })
    }

    /// `A_k = set` for `k = 1..=len`.
    pub fn constant(set: ClosedSet, len: u64, limit: ClosedSet) -> Result<Self> {
        Self::from_segments(vec![Segment { end: len, set }], limit)
    }

    pub fn len(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn limit(&self) -> &ClosedSet {
        &self.limit
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.limit.dim()
    }

    pub fn item(&self, k: u64) -> Result<&ClosedSet> {
        if k == 0 || k > self.len() {
            return Err(Error::IndexOutOfRange { index: k, len: self.len() });
        }
        let i = self.segments.partition_point(|s| s.end < k);
        Ok(&self.segments[i].set)
    }
}

/// `|d(x, A_k) - d(x, A)|`.
pub fn gap(x: &Point, k: u64, seq: &SetSequence) -> Result<f64> {
    Ok((dist(x, seq.item(k)?)? - dist(x, seq.limit())?).abs())
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SetSpec {
    Singleton { point: Point },
    Cloud { points: Vec<Point> },
    Ball { center: Point, radius: f64 },
    Box { lower: Point, upper: Point },
}

impl TryFrom<SetSpec> for ClosedSet {
    type Error = Error;
    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::Singleton { point } => Ok(ClosedSet::Singleton(point)),
            SetSpec::Cloud { points } => ClosedSet::cloud(points),
            SetSpec::Ball { center, radius } => ClosedSet::ball(center, radius),
            SetSpec::Box { lower, upper } => ClosedSet::closed_box(lower, upper),
        }
    }
}

impl Serialize for ClosedSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let spec = match self.clone() {
            ClosedSet::Singleton(point) => SetSpec::Singleton { point },
            ClosedSet::Cloud(c) => SetSpec::Cloud { points: c.points },
            ClosedSet::Ball { center, radius } => SetSpec::Ball { center, radius },
            ClosedSet::Box { lower, upper } => SetSpec::Box { lower, upper },
            ClosedSet::Oracle(o) => {
                return Err(serde::ser::Error::custom(format!(
                    "oracle set `{}` has no file representation",
                    o.label
                )))
            }
        };
        spec.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClosedSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = SetSpec::deserialize(deserializer)?;
        ClosedSet::try_from(spec).map_err(serde::de::Error::custom)
    }
}

/// On-disk set-sequence document. `Rule` refers to a named construction and
/// is resolved by the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceFile {
    Items { limit: ClosedSet, items: Vec<ClosedSet> },
    Segments { limit: ClosedSet, segments: Vec<Segment> },
    Rule { rule: String },
}

/// Sequences up to this length are written item by item.
pub const ITEMS_FORM_LIMIT: u64 = 1 << 16;

impl SequenceFile {
    pub fn from_sequence(seq: &SetSequence) -> Self {
        if seq.len() <= ITEMS_FORM_LIMIT {
            let items = (1..=seq.len())
                .map(|k| seq.item(k).expect("index in range").clone())
                .collect();
            SequenceFile::Items { limit: seq.limit.clone(), items }
        } else {
            SequenceFile::Segments { limit: seq.limit.clone(), segments: seq.segments.clone() }
        }
    }

    /// Materializes explicit forms; `Rule` returns `None`.
    pub fn into_sequence(self) -> Result<Option<SetSequence>> {
        match self {
            SequenceFile::Items { limit, items } => SetSequence::from_items(items, limit).map(Some),
            SequenceFile::Segments { limit, segments } => SetSequence::from_segments(segments, limit).map(Some),
            SequenceFile::Rule { .. } => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist(&Point::scalar(0.0), &ClosedSet::point(1.0)).unwrap(), 1.0);
        assert_eq!(dist(&p(&[2.0, -1.0]), &ClosedSet::Singleton(p(&[2.0, -1.0]))).unwrap(), 0.0);
        let ball = ClosedSet::ball(p(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(dist(&p(&[3.0, 4.0]), &ball).unwrap(), 4.0);
        // dense boundary sampling of the unit circle agrees
        let sampled = (0..100_000)
            .map(|i| {
                let a = i as f64 / 100_000.0 * std::f64::consts::TAU;
                euclid(&[3.0, 4.0], &[a.cos(), a.sin()])
            })
            .fold(f64::INFINITY, f64::min);
        assert!((sampled - 4.0).abs() < 1e-8);
        assert_eq!(dist(&p(&[0.5, 0.5]), &ball).unwrap(), 0.0);
    }

    #[test]
    fn box_distance() {
        let b = ClosedSet::closed_box(p(&[0.0, 0.0]), p(&[1.0, 2.0])).unwrap();
        assert_eq!(dist(&p(&[0.5, 1.0]), &b).unwrap(), 0.0);
        assert_eq!(dist(&p(&[4.0, 6.0]), &b).unwrap(), 5.0);
        assert_eq!(dist(&p(&[-2.0, 1.0]), &b).unwrap(), 2.0);
        assert!(ClosedSet::closed_box(p(&[1.0]), p(&[0.0])).is_err());
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ClosedSet::cloud(vec![]).is_err());
        assert!(ClosedSet::ball(p(&[0.0]), -1.0).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(matches!(
            dist(&p(&[0.0, 0.0]), &ClosedSet::point(1.0)),
            Err(Error::DimensionMismatch { point: 2, set: 1 })
        ));
        let bad = ClosedSet::oracle(DistanceOracle::new("neg", 1, |_| -1.0));
        assert!(matches!(dist(&Point::scalar(0.0), &bad), Err(Error::BadOracle(_))));
        let ok = ClosedSet::oracle(DistanceOracle::new("abs", 1, |x| x.coords()[0].abs()));
        assert_eq!(dist(&Point::scalar(-3.0), &ok).unwrap(), 3.0);
    }

    #[test]
    fn gap_examples() {
        let seq = SetSequence::constant(ClosedSet::point(1.0), 5, ClosedSet::point(0.0)).unwrap();
        assert_eq!(gap(&Point::scalar(0.0), 3, &seq).unwrap(), 1.0);
        assert_eq!(gap(&Point::scalar(0.25), 3, &seq).unwrap(), 0.5);
        assert_eq!(gap(&Point::scalar(0.5), 3, &seq).unwrap(), 0.0);
        assert!(gap(&Point::scalar(0.0), 6, &seq).is_err());
        assert!(gap(&Point::scalar(0.0), 0, &seq).is_err());
        let same = SetSequence::constant(ClosedSet::point(7.0), 5, ClosedSet::point(7.0)).unwrap();
        assert_eq!(gap(&Point::scalar(-2.0), 1, &same).unwrap(), 0.0);
    }

    #[test]
    fn segment_lookup() {
        let seq = SetSequence::from_segments(
            vec![
                Segment { end: 3, set: ClosedSet::point(0.0) },
                Segment { end: 10, set: ClosedSet::point(1.0) },
            ],
            ClosedSet::point(0.0),
        )
        .unwrap();
        assert_eq!(seq.len(), 10);
        assert_eq!(seq.item(3).unwrap(), &ClosedSet::point(0.0));
        assert_eq!(seq.item(4).unwrap(), &ClosedSet::point(1.0));
        assert!(SetSequence::from_segments(vec![], ClosedSet::point(0.0)).is_err());
    }

    #[test]
    fn json_forms() {
        let doc = r#"{"limit": {"type": "singleton", "point": [0]},
                      "items": [{"type": "singleton", "point": [1]},
                                {"type": "ball", "center": [0], "radius": 0.5},
                                {"type": "box", "lower": [-1], "upper": [1]},
                                {"type": "cloud", "points": [[3], [2]]}]}"#;
        let file: SequenceFile = serde_json::from_str(doc).unwrap();
        let seq = file.into_sequence().unwrap().unwrap();
        assert_eq!(seq.len(), 4);
        let x = Point::scalar(5.0);
        assert_eq!(dist(&x, seq.item(4).unwrap()).unwrap(), 2.0);
        let back = serde_json::to_string(&SequenceFile::from_sequence(&seq)).unwrap();
        let again: SequenceFile = serde_json::from_str(&back).unwrap();
        assert_eq!(again.into_sequence().unwrap().unwrap(), seq);

        let rule: SequenceFile = serde_json::from_str(r#"{"rule": "stat:fn=log1p"}"#).unwrap();
        assert!(matches!(rule, SequenceFile::Rule { .. }));
        let bad = r#"{"limit": {"type": "ball", "center": [0], "radius": -1}, "items": []}"#;
        assert!(serde_json::from_str::<SequenceFile>(bad).is_err());
    }
}
