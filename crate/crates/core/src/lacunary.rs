//! Lacunary schedules `0 = k_0 < k_1 < ...` with gaps `h_r = k_r - k_{r-1}`
//! and blocks `I_r = (k_{r-1}, k_r]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named generation rule for a [`LacunarySchedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScheduleRule {
    /// `k_r = base^r` for `r >= 1`.
    Power { base: u64 },
    /// `k_r = r^2`.
    Square,
}

impl ScheduleRule {
    pub const POW2: ScheduleRule = ScheduleRule::Power { base: 2 };
}

impl fmt::Display for ScheduleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleRule::Power { base: 2 } => write!(f, "pow2"),
            ScheduleRule::Power { base } => write!(f, "pow:{base}"),
            ScheduleRule::Square => write!(f, "square"),
        }
    }
}

impl FromStr for ScheduleRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "pow2" => return Ok(ScheduleRule::POW2),
            "square" => return Ok(ScheduleRule::Square),
            _ => {}
        }
        if let Some(base) = s.strip_prefix("pow:") {
            let base: u64 = base
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad schedule base in `{s}`")))?;
            if base < 2 {
                return Err(Error::InvalidParameter(format!(
                    "schedule base must be >= 2, got {base}"
                )));
            }
            return Ok(ScheduleRule::Power { base });
        }
        Err(Error::InvalidParameter(format!(
            "unknown lacunary rule `{s}` (expected pow2, pow:<base> or square)"
        )))
    }
}

/// Maximum number of blocks generated for polynomial rules.
const MAX_POLY_BLOCKS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LacunarySchedule {
    k: Vec<u64>,
}

impl LacunarySchedule {
    /// Builds a schedule from explicit indices. `k[0]` must be zero and the
    /// sequence strictly increasing; at least one block is required.
    pub fn new(k: Vec<u64>) -> Result<Self> {
        if k.len() < 2 {
            return Err(Error::InvalidParameter(
                "a lacunary schedule needs k_0 and at least one k_r".into(),
            ));
        }
        if k[0] != 0 {
            return Err(Error::InvalidParameter(format!("k_0 must be 0, got {}", k[0])));
        }
        if let Some(w) = k.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "schedule is not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { k })
    }

    /// Generates every `k_r <= max_k` from `rule`.
    pub fn from_rule(rule: ScheduleRule, max_k: u64) -> Result<Self> {
        let mut k = vec![0u64];
        match rule {
            ScheduleRule::Power { base } => {
                let mut v = base;
                while v <= max_k {
                    k.push(v);
                    match v.checked_mul(base) {
                        Some(next) => v = next,
                        None => break,
                    }
                }
            }
            ScheduleRule::Square => {
                let mut r = 1u64;
                while r <= MAX_POLY_BLOCKS {
                    let v = r * r;
                    if v > max_k {
                        break;
                    }
                    k.push(v);
                    r += 1;
                }
            }
        }
        Self::new(k)
    }

    /// `k_r = 2^r`, for every `r` representable in `u64`.
    pub fn pow2() -> Self {
        Self::from_rule(ScheduleRule::POW2, u64::MAX).expect("pow2 schedule is valid")
    }

    /// Number of blocks `R`.
    pub fn horizon(&self) -> usize {
        self.k.len() - 1
    }

    pub fn k(&self, r: usize) -> Result<u64> {
        self.k.get(r).copied().ok_or(Error::ScheduleExhausted {
            requested: r,
            available: self.horizon(),
        })
    }

    /// Gap `h_r` for `1 <= r <= R`.
    pub fn h(&self, r: usize) -> Result<u64> {
        if r == 0 {
            return Err(Error::InvalidParameter("blocks are indexed from 1".into()));
        }
        Ok(self.k(r)? - self.k[r - 1])
    }

    /// Block `I_r` as `(exclusive lower, inclusive upper)`.
    pub fn block(&self, r: usize) -> Result<(u64, u64)> {
        if r == 0 {
            return Err(Error::InvalidParameter("blocks are indexed from 1".into()));
        }
        Ok((self.k[r - 1], self.k(r)?))
    }

    /// Largest `R` with `k_R <= n`; blocks `1..=R` are complete inside `1..=n`.
    pub fn complete_blocks(&self, n: u64) -> usize {
        self.k.partition_point(|&v| v <= n) - 1
    }

    pub fn indices(&self) -> &[u64] {
        &self.k
    }

    /// Finite proxy for `h_r -> infinity`: the last gap exceeds `bound` and
    /// dominates a majority of the tail half of the gaps.
    pub fn growth_proxy_holds(&self, bound: u64) -> bool {
        let r_max = self.horizon();
        let last = self.k[r_max] - self.k[r_max - 1];
        if last <= bound {
            return false;
        }
        let tail: Vec<u64> = ((r_max / 2).max(1)..=r_max)
            .map(|r| self.k[r] - self.k[r - 1])
            .collect();
        let dominated = tail.iter().filter(|&&h| h <= last).count();
        2 * dominated > tail.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_gaps() {
        let theta = LacunarySchedule::pow2();
        assert_eq!(theta.horizon(), 63);
        assert_eq!(theta.h(1).unwrap(), 2);
        assert_eq!(theta.h(2).unwrap(), 2);
        assert_eq!(theta.h(5).unwrap(), 16);
        assert_eq!(theta.block(3).unwrap(), (4, 8));
        assert_eq!(theta.k(63).unwrap(), 1 << 63);
        assert!(theta.growth_proxy_holds(1 << 40));
    }

    #[test]
    fn complete_blocks_counts_full_blocks_only() {
        let theta = LacunarySchedule::pow2();
        assert_eq!(theta.complete_blocks(1), 0);
        assert_eq!(theta.complete_blocks(2), 1);
        assert_eq!(theta.complete_blocks(7), 2);
        assert_eq!(theta.complete_blocks(8), 3);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(LacunarySchedule::new(vec![1, 2, 3]).is_err());
        assert!(LacunarySchedule::new(vec![0, 2, 2]).is_err());
        assert!(LacunarySchedule::new(vec![0]).is_err());
    }

    #[test]
    fn exhausted_schedule_names_horizon() {
        let theta = LacunarySchedule::from_rule(ScheduleRule::POW2, 1024).unwrap();
        match theta.h(20) {
            Err(Error::ScheduleExhausted { requested, available }) => {
                assert_eq!(requested, 20);
                assert_eq!(available, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rules() {
        assert_eq!("pow2".parse::<ScheduleRule>().unwrap(), ScheduleRule::POW2);
        assert_eq!(
            "pow:3".parse::<ScheduleRule>().unwrap(),
            ScheduleRule::Power { base: 3 }
        );
        assert_eq!("square".parse::<ScheduleRule>().unwrap(), ScheduleRule::Square);
        assert!("pow:1".parse::<ScheduleRule>().is_err());
        let sq = LacunarySchedule::from_rule(ScheduleRule::Square, 100).unwrap();
        assert_eq!(sq.horizon(), 10);
        assert_eq!(sq.h(10).unwrap(), 19);
    }
}
