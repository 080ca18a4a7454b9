//! Store-and-forward switching delay.

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("message size must be > 0")]
    EmptyMessage,
    #[error("link rate must be a positive finite number of bytes per ns, got {0}")]
    BadRate(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Forwarded {
    pub delay: SimTime,
    /// Passed through for the engine-side validator.
    pub truncated: bool,
}

/// The whole unit is buffered before it is forwarded, so the delay is
/// `ceil(bytes / link_rate)`.
pub fn switch_forward(bytes: u64, truncated: bool, link_rate: f64) -> Result<Forwarded, SwitchError> {
    if bytes == 0 {
        return Err(SwitchError::EmptyMessage);
    }
    if !(link_rate.is_finite() && link_rate > 0.0) {
        return Err(SwitchError::BadRate(link_rate));
    }
    let exact = bytes as f64 / link_rate;
    // Guard against 1500/1.0 landing a hair above an integer.
    let delay = (exact - 1e-9).ceil().max(0.0) as u64;
    Ok(Forwarded {
        delay: SimTime::from_nanos(delay),
        truncated,
    })
}
