//! Countermeasures: speedbumps, batch windows, connection limits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::BatchWindow;
use crate::infra::Link;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemediationError {
    #[error("connection limit must be >= 1")]
    ZeroConnectionLimit,
    #[error("batch window must be > 0")]
    ZeroWindow,
    #[error("batch phase {phase} must be smaller than the window {window}")]
    PhaseTooLarge { phase: SimTime, window: SimTime },
}

/// Constant delay attached to a named link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speedbump {
    pub link: String,
    pub delay_ns: u64,
}

/// Copy of `link` that delays every traversal by an extra `delay`.
pub fn apply_speedbump(link: &Link, delay: SimTime) -> Link {
    let mut bumped = link.clone();
    bumped.speedbump += delay;
    bumped
}

/// Per-participant cap on simultaneous gateway connections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConnectionPolicy {
    limit: u32,
}

impl ConnectionPolicy {
    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// How many of `requested` copies get through.
    pub fn admit(&self, requested: usize) -> usize {
        requested.min(self.limit as usize)
    }
}

pub fn set_connection_limit(limit: u32) -> Result<ConnectionPolicy, RemediationError> {
    if limit == 0 {
        return Err(RemediationError::ZeroConnectionLimit);
    }
    Ok(ConnectionPolicy { limit })
}

/// Discrete-time matching: window boundaries at `phase + k * window`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchPolicy {
    window: SimTime,
    phase: SimTime,
}

impl BatchPolicy {
    pub fn new(window: SimTime, phase: SimTime) -> Result<Self, RemediationError> {
        if window == SimTime::ZERO {
            return Err(RemediationError::ZeroWindow);
        }
        if phase >= window {
            return Err(RemediationError::PhaseTooLarge { phase, window });
        }
        Ok(BatchPolicy { window, phase })
    }

    pub fn window_len(&self) -> SimTime {
        self.window
    }

    fn shift(&self) -> u64 {
        (self.window.as_nanos() - self.phase.as_nanos()) % self.window.as_nanos()
    }

    pub fn window_index(&self, t: SimTime) -> u64 {
        (t.as_nanos() + self.shift()) / self.window.as_nanos()
    }

    pub fn window(&self, index: u64) -> BatchWindow {
        let w = self.window.as_nanos();
        let shift = self.shift();
        BatchWindow {
            start: SimTime::from_nanos((index * w).saturating_sub(shift)),
            end: SimTime::from_nanos((index + 1) * w - shift),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infra::LatencyModel;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn zero_bump_leaves_link_unchanged() {
        let link = Link::new("l", LatencyModel::uniform(10, 5));
        assert_eq!(apply_speedbump(&link, SimTime::ZERO), link);
    }

    #[test]
    fn bump_delays_every_traversal_exactly() {
        let link = Link::new("l", LatencyModel::uniform(1_000, 500));
        let bumped = apply_speedbump(&link, SimTime::from_millis(5));
        let mut a = RngStream::new(4, "l");
        let mut b = RngStream::new(4, "l");
        for _ in 0..1000 {
            let plain = link.traverse(None, &mut a);
            assert_eq!(bumped.traverse(None, &mut b), plain + SimTime::from_millis(5));
        }
    }

    #[test]
    fn connection_limit_bounds() {
        assert_eq!(set_connection_limit(0), Err(RemediationError::ZeroConnectionLimit));
        let p = set_connection_limit(2).unwrap();
        assert_eq!(p.admit(4), 2);
        assert_eq!(p.admit(1), 1);
    }

    #[test]
    fn windows_without_phase() {
        let b = BatchPolicy::new(SimTime::from_nanos(100), SimTime::ZERO).unwrap();
        assert_eq!(b.window_index(SimTime::from_nanos(0)), 0);
        assert_eq!(b.window_index(SimTime::from_nanos(99)), 0);
        assert_eq!(b.window_index(SimTime::from_nanos(100)), 1);
        let w = b.window(3);
        assert_eq!((w.start.as_nanos(), w.end.as_nanos()), (300, 400));
    }

    #[test]
    fn windows_with_phase() {
        let b = BatchPolicy::new(SimTime::from_nanos(100), SimTime::from_nanos(30)).unwrap();
        let w0 = b.window(b.window_index(SimTime::from_nanos(10)));
        assert_eq!((w0.start.as_nanos(), w0.end.as_nanos()), (0, 30));
        let w1 = b.window(b.window_index(SimTime::from_nanos(30)));
        assert_eq!((w1.start.as_nanos(), w1.end.as_nanos()), (30, 130));
        assert!(BatchPolicy::new(SimTime::from_nanos(100), SimTime::from_nanos(100)).is_err());
        assert!(BatchPolicy::new(SimTime::ZERO, SimTime::ZERO).is_err());
    }

    proptest! {
        #[test]
        fn every_instant_lies_in_its_window(w in 1u64..10_000, phase_frac in 0.0f64..1.0, t in 0u64..10_000_000) {
            let phase = ((w as f64) * phase_frac) as u64 % w;
            let b = BatchPolicy::new(SimTime::from_nanos(w), SimTime::from_nanos(phase)).unwrap();
            let win = b.window(b.window_index(SimTime::from_nanos(t)));
            prop_assert!(win.start.as_nanos() <= t && t < win.end.as_nanos());
            prop_assert!((win.end.as_nanos() - phase).is_multiple_of(w));
        }
    }
}
