//! Deterministic discrete-event kernel.
//!
//! Events are processed in lexicographic `(fire_at, seq)` order, where `seq`
//! is assigned at scheduling time. Same-instant events are legal and run in
//! scheduling order; there is no randomness in the kernel itself.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("event scheduled in the past: fire_at={fire_at} but clock={now}")]
    ScheduleInPast { fire_at: SimTime, now: SimTime },
}

/// Handle to a registered component; labels show up in the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(u32);

/// Identifier returned by [`Kernel::schedule`]; equal to the event's `seq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event<A> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: ComponentId,
    pub payload: A,
}

struct Queued<A>(Event<A>);

impl<A> PartialEq for Queued<A> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<A> Eq for Queued<A> {}

impl<A> PartialOrd for Queued<A> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Queued<A> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl<A> Queued<A> {
    fn key(&self) -> (SimTime, u64) {
        (self.0.fire_at, self.0.seq)
    }
}

/// One processed event, as written to the trace export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub time: u64,
    pub seq: u64,
    pub component: String,
    pub action: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub records: Vec<TraceRecord>,
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Newline-delimited JSON, one record per processed event.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// SHA-256 of the NDJSON export, hex encoded.
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    /// True if the records appear in strictly increasing `(time, seq)` order.
    pub fn is_ordered(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| (w[0].time, w[0].seq) < (w[1].time, w[1].seq))
    }
}

/// Virtual clock plus pending-event queue.
pub struct Kernel<A> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Queued<A>>>,
    components: Vec<String>,
    record_trace: bool,
}

impl<A: fmt::Debug> Kernel<A> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            components: Vec::new(),
            record_trace: true,
        }
    }

    /// Skip building trace records; [`Kernel::run_until`] then returns an empty trace.
    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn register(&mut self, label: impl Into<String>) -> ComponentId {
        self.components.push(label.into());
        ComponentId(self.components.len() as u32 - 1)
    }

    pub fn label(&self, id: ComponentId) -> &str {
        &self.components[id.0 as usize]
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: ComponentId,
        payload: A,
    ) -> Result<EventId, KernelError> {
        if fire_at < self.now {
            return Err(KernelError::ScheduleInPast {
                fire_at,
                now: self.now,
            });
        }
        self.next_seq += 1;
        let seq = self.next_seq;
        self.queue.push(Reverse(Queued(Event {
            fire_at,
            seq,
            target,
            payload,
        })));
        Ok(EventId(seq))
    }

    /// Process every event with `fire_at <= t_stop`, in `(fire_at, seq)` order,
    /// handing each to `handler`. The handler may schedule further events.
    /// On return the clock reads `t_stop` (or stays put if already later).
    pub fn run_until<E, F>(&mut self, t_stop: SimTime, mut handler: F) -> Result<EventTrace, E>
    where
        F: FnMut(&mut Kernel<A>, Event<A>) -> Result<(), E>,
    {
        let mut trace = EventTrace::default();
        loop {
            match self.queue.peek() {
                Some(Reverse(q)) if q.0.fire_at <= t_stop => {}
                _ => break,
            }
            let Reverse(Queued(event)) = self.queue.pop().expect("peeked");
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            if self.record_trace {
                trace.records.push(TraceRecord {
                    time: event.fire_at.as_nanos(),
                    seq: event.seq,
                    component: self.label(event.target).to_owned(),
                    action: format!("{:?}", event.payload),
                });
            }
            handler(self, event)?;
        }
        if t_stop > self.now {
            self.now = t_stop;
        }
        Ok(trace)
    }
}

impl<A: fmt::Debug> Default for Kernel<A> {
    fn default() -> Self {
        Self::new()
    }
}
