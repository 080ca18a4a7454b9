//! Scripted agents that race for stimulus-driven opportunities.
//!
//! Agents are passive: the simulation hands them a market update at their
//! receive time and they answer with messages and send times. Every reactive
//! send happens no earlier than `t_receive + reaction_time`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{OrderId, ParticipantId, Qty, Side, Ticks};
use crate::remediation::ConnectionPolicy;
use crate::time::SimTime;

fn default_trade_probability() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    HonestRacer,
    /// Sends identical copies through every connected gateway.
    Replicator,
    /// Pre-positions the first fragment `lead_ns` before the anticipated
    /// event, then completes or spoils the order once the update arrives.
    OptimisticMessenger {
        lead_ns: u64,
        #[serde(default = "default_trade_probability")]
        trade_probability: f64,
    },
    /// Honest racer that logs in ahead of everyone else.
    EarlyLogin,
    /// Honest racer that submits over its private link.
    FastLinkSniper,
    /// Owns the stale quote and tries to cancel it before it is lifted.
    RestingMaker,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Participant {
    pub id: ParticipantId,
    pub name: String,
    pub reaction_time: SimTime,
    pub strategy: Strategy,
    pub gateways: Vec<String>,
    pub private_link: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StimulusId(pub u64);

/// Liquidity that becomes capturable at `t_e`: a resting order on `side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opportunity {
    pub instrument: u64,
    pub side: Side,
    pub price: Ticks,
    pub qty: Qty,
    pub order: OrderId,
    pub owner: ParticipantId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stimulus {
    pub id: StimulusId,
    pub t_e: SimTime,
    pub opportunity: Opportunity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Intent {
    /// Limit order on `side` at `price`, crossing the opportunity.
    Take { side: Side, price: Ticks, qty: Qty },
    Cancel { target: OrderId },
}

/// A message an agent wants sent, tagged with the stimulus it answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub intent: Intent,
    pub stimulus: StimulusId,
    pub t_send: SimTime,
}

/// The taking order every racer sends for `opp`.
pub fn take_intent(opp: &Opportunity) -> Intent {
    Intent::Take {
        side: opp.side.opposite(),
        price: opp.price,
        qty: opp.qty,
    }
}

pub fn on_update(p: &Participant, update: &Stimulus, t_receive: SimTime) -> Vec<Outgoing> {
    let t_send = t_receive + p.reaction_time;
    let opp = &update.opportunity;
    let intent = match p.strategy {
        Strategy::RestingMaker if opp.owner == p.id => Intent::Cancel { target: opp.order },
        Strategy::RestingMaker => return Vec::new(),
        _ => take_intent(opp),
    };
    vec![Outgoing {
        intent,
        stimulus: update.id,
        t_send,
    }]
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParticipantError {
    #[error("participant {0} is not a replicator")]
    NotReplicator(String),
    #[error("replicator {0} needs at least two gateway connections")]
    TooFewGateways(String),
    #[error("participant {0} is not an optimistic messenger")]
    NotOptimistic(String),
    #[error("optimistic lead must be > 0")]
    ZeroLead,
    #[error("lead {lead} reaches before session start (t_e = {t_e})")]
    LeadBeforeStart { lead: SimTime, t_e: SimTime },
    #[error("optimistic messaging needs a message of at least two fragments")]
    SingleFragment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replication {
    /// Gateways that accept a copy, in connection order.
    pub accepted: Vec<String>,
    /// Gateways past the connection limit.
    pub rejected: Vec<String>,
}

pub fn replicate_dispatch(
    p: &Participant,
    limit: Option<&ConnectionPolicy>,
) -> Result<Replication, ParticipantError> {
    if p.strategy != Strategy::Replicator {
        return Err(ParticipantError::NotReplicator(p.name.clone()));
    }
    if p.gateways.len() < 2 {
        return Err(ParticipantError::TooFewGateways(p.name.clone()));
    }
    let admitted = limit.map_or(p.gateways.len(), |l| l.admit(p.gateways.len()));
    Ok(Replication {
        accepted: p.gateways[..admitted].to_vec(),
        rejected: p.gateways[admitted..].to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Trade,
    Abort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FragmentSend {
    pub index: u32,
    pub t_send: SimTime,
    pub valid_checksum: bool,
}

/// Fragment 0 goes out at `t_e - lead`. The rest follow at
/// `t_receive + reaction_time`, with spoiled checksums on abort.
pub fn optimistic_dispatch(
    p: &Participant,
    anticipated: &Stimulus,
    t_receive: SimTime,
    decision: Decision,
    fragments: u32,
) -> Result<Vec<FragmentSend>, ParticipantError> {
    let Strategy::OptimisticMessenger { lead_ns, .. } = p.strategy else {
        return Err(ParticipantError::NotOptimistic(p.name.clone()));
    };
    let lead = SimTime::from_nanos(lead_ns);
    if lead_ns == 0 {
        return Err(ParticipantError::ZeroLead);
    }
    if fragments < 2 {
        return Err(ParticipantError::SingleFragment);
    }
    let first = anticipated
        .t_e
        .checked_sub(lead)
        .ok_or(ParticipantError::LeadBeforeStart {
            lead,
            t_e: anticipated.t_e,
        })?;
    let rest = t_receive + p.reaction_time;
    let mut sends = vec![FragmentSend {
        index: 0,
        t_send: first,
        valid_checksum: true,
    }];
    sends.extend((1..fragments).map(|index| FragmentSend {
        index,
        t_send: rest,
        valid_checksum: decision == Decision::Trade,
    }));
    Ok(sends)
}
