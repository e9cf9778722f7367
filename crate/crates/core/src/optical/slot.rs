use std::fmt;

use serde::{Deserialize, Serialize};

pub const ANCHOR_THZ: f64 = 193.1;
pub const CENTER_GRANULARITY_GHZ: f64 = 6.25;
pub const WIDTH_GRANULARITY_GHZ: f64 = 12.5;

/// Flexgrid frequency slot: centre 193.1 THz + n·6.25 GHz, width m·12.5 GHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrequencySlot {
    pub n: i32,
    pub m: u32,
}

impl FrequencySlot {
    pub fn new(n: i32, m: u32) -> Self {
        assert!(m >= 1, "slot width multiple must be at least 1");
        Self { n, m }
    }

    pub fn center_thz(&self) -> f64 {
        ANCHOR_THZ + self.n as f64 * CENTER_GRANULARITY_GHZ / 1000.0
    }

    pub fn width_ghz(&self) -> f64 {
        self.m as f64 * WIDTH_GRANULARITY_GHZ
    }

    /// Occupied interval `[lo, hi]` in 6.25 GHz units.
    pub fn interval(&self) -> (i64, i64) {
        let n = self.n as i64;
        let m = self.m as i64;
        (n - m, n + m)
    }

    /// True when the two slots share spectrum; touching edges do not count.
    pub fn overlaps(&self, other: &FrequencySlot) -> bool {
        let (a_lo, a_hi) = self.interval();
        let (b_lo, b_hi) = other.interval();
        a_lo < b_hi && b_lo < a_hi
    }
}

impl fmt::Display for FrequencySlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, m={})", self.n, self.m)
    }
}

/// Allowed central-frequency indices, as inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tunability {
    pub ranges: Vec<(i32, i32)>,
}

impl Tunability {
    pub fn range(lo: i32, hi: i32) -> Self {
        Self {
            ranges: vec![(lo, hi)],
        }
    }

    pub fn contains(&self, n: i32) -> bool {
        self.ranges.iter().any(|&(lo, hi)| lo <= n && n <= hi)
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.iter().all(|&(lo, hi)| lo > hi)
    }

    pub fn max(&self) -> Option<i32> {
        self.ranges
            .iter()
            .filter(|(lo, hi)| lo <= hi)
            .map(|&(_, hi)| hi)
            .max()
    }
}
