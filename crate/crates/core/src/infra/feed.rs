//! Market-data dissemination from a feed server.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::latency::LatencyModel;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeedPolicy {
    /// Unicast in login order; the k-th recipient (1-based) gets the update
    /// after `k * per_recipient_cost_ns`.
    SequentialByLogin { per_recipient_cost_ns: u64 },
    /// Same costs, but a fresh uniform permutation for every update.
    RandomizedSequential { per_recipient_cost_ns: u64 },
    /// Every recipient gets an independent jitter draw. Port offsets in the
    /// jitter model are keyed by recipient name.
    MulticastJitter { jitter: LatencyModel },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeedError {
    #[error("update has no recipients")]
    NoRecipients,
}

/// Receive times for one update published at `t`. `recipients` are names in
/// login order; the result pairs each recipient's index in that slice with
/// its receive time, listed in delivery order.
pub fn disseminate<R: Rng + ?Sized>(
    t: SimTime,
    recipients: &[&str],
    policy: &FeedPolicy,
    rng: &mut R,
) -> Result<Vec<(usize, SimTime)>, FeedError> {
    if recipients.is_empty() {
        return Err(FeedError::NoRecipients);
    }
    let sequential = |order: Vec<usize>, cost: u64| {
        order
            .into_iter()
            .enumerate()
            .map(|(k, idx)| (idx, t + SimTime::from_nanos((k as u64 + 1) * cost)))
            .collect()
    };
    Ok(match policy {
        FeedPolicy::SequentialByLogin { per_recipient_cost_ns } => {
            sequential((0..recipients.len()).collect(), *per_recipient_cost_ns)
        }
        FeedPolicy::RandomizedSequential { per_recipient_cost_ns } => {
            let mut order: Vec<usize> = (0..recipients.len()).collect();
            order.shuffle(rng);
            sequential(order, *per_recipient_cost_ns)
        }
        FeedPolicy::MulticastJitter { jitter } => recipients
            .iter()
            .enumerate()
            .map(|(idx, name)| (idx, t + jitter.sample(Some(name), rng)))
            .collect(),
    })
}
