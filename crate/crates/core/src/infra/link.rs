//! Links and order gateways.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use thiserror::Error;

use super::latency::LatencyModel;
use crate::time::SimTime;

/// A one-way path with a latency model and an optional constant speedbump.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: String,
    pub latency: LatencyModel,
    pub speedbump: SimTime,
}

impl Link {
    pub fn new(id: impl Into<String>, latency: LatencyModel) -> Self {
        Link {
            id: id.into(),
            latency,
            speedbump: SimTime::ZERO,
        }
    }

    pub fn traverse<R: Rng + ?Sized>(&self, port: Option<&str>, rng: &mut R) -> SimTime {
        self.latency.sample(port, rng) + self.speedbump
    }
}

/// What the infrastructure needs to know about a message in flight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub bytes: u64,
    pub truncated: bool,
    /// For truncated messages: whether every critical field survived the cut.
    pub critical_intact: bool,
}

impl WireMessage {
    pub fn whole(bytes: u64) -> Self {
        WireMessage {
            bytes,
            truncated: false,
            critical_intact: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitError {
    #[error("gateway {gateway} dropped a message truncated past its critical fields")]
    Malformed { gateway: String },
}

#[derive(Clone, Debug)]
pub struct Gateway {
    pub link: Link,
    /// Extra delay per message already in flight through this gateway.
    pub load_penalty: SimTime,
    in_flight: BinaryHeap<Reverse<SimTime>>,
}

impl Gateway {
    pub fn new(link: Link, load_penalty: SimTime) -> Self {
        Gateway {
            link,
            load_penalty,
            in_flight: BinaryHeap::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.link.id
    }

    /// Messages that entered before `t` and have not yet reached the engine.
    pub fn in_flight_at(&mut self, t: SimTime) -> u64 {
        while let Some(Reverse(exit)) = self.in_flight.peek() {
            if *exit <= t {
                self.in_flight.pop();
            } else {
                break;
            }
        }
        self.in_flight.len() as u64
    }

    /// Engine arrival time for a message entering at `t_send`:
    /// `t_send + sample(latency) + load_penalty * in_flight`.
    ///
    /// Calls must come in nondecreasing `t_send` order so the in-flight count
    /// reflects simulated time.
    pub fn transit<R: Rng + ?Sized>(
        &mut self,
        msg: WireMessage,
        t_send: SimTime,
        port: Option<&str>,
        rng: &mut R,
    ) -> Result<SimTime, TransitError> {
        if msg.truncated && !msg.critical_intact {
            return Err(TransitError::Malformed {
                gateway: self.link.id.clone(),
            });
        }
        let load = self.in_flight_at(t_send);
        let penalty = SimTime::from_nanos(self.load_penalty.as_nanos() * load);
        let arrival = t_send + self.link.traverse(port, rng) + penalty;
        self.in_flight.push(Reverse(arrival));
        Ok(arrival)
    }
}
