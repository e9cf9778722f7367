use serde::{Deserialize, Serialize};

/// Simulated time in seconds. Never goes backwards.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct VirtualClock {
    now_s: f64,
}

impl VirtualClock {
    pub fn at(now_s: f64) -> Self {
        assert!(now_s.is_finite() && now_s >= 0.0, "invalid start time {now_s}");
        Self { now_s }
    }

    pub fn now(&self) -> f64 {
        self.now_s
    }

    pub fn advance(&mut self, dt_s: f64) -> f64 {
        assert!(dt_s >= 0.0, "negative time step {dt_s}");
        self.now_s += dt_s;
        self.now_s
    }

    /// Moves forward to `t_s`; earlier instants leave the clock unchanged.
    pub fn advance_to(&mut self, t_s: f64) -> f64 {
        if t_s > self.now_s {
            self.now_s = t_s;
        }
        self.now_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone() {
        let mut c = VirtualClock::default();
        assert_eq!(c.advance(2.0), 2.0);
        assert_eq!(c.advance_to(1.0), 2.0);
        assert_eq!(c.advance_to(5.5), 5.5);
    }

    #[test]
    #[should_panic]
    fn rejects_negative_step() {
        VirtualClock::default().advance(-1.0);
    }
}
