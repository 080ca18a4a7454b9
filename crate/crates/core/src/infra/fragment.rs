//! Message fragmentation and engine-side reassembly.
//!
//! The engine ingress decides each order's priority timestamp. Under
//! [`TimestampPolicy::FirstFragment`] the first fragment reserves a place in
//! the sequencer; complete messages are released strictly in reservation
//! order, so a later complete message waits behind an earlier incomplete one
//! until that one completes or is abandoned. Under
//! [`TimestampPolicy::LastFragment`] a message is stamped and released the
//! moment its last fragment arrives.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::ParticipantId;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampPolicy {
    #[default]
    FirstFragment,
    LastFragment,
}

/// Reassembly identity: one physical copy of one participant message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IngressKey {
    pub participant: ParticipantId,
    pub message: u64,
    /// Replicated copies share `message` but differ here.
    pub copy: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub key: IngressKey,
    pub index: u32,
    pub count: u32,
    pub valid_checksum: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FragmentError {
    #[error("mtu must be > 0")]
    ZeroMtu,
    #[error("message size must be > 0")]
    EmptyMessage,
    #[error("schedule has {got} entries for {expected} fragments")]
    ScheduleLength { expected: u32, got: usize },
    #[error("fragment send times must be nondecreasing")]
    ScheduleNotMonotone,
}

pub fn fragment_count(bytes: u64, mtu: u64) -> Result<u32, FragmentError> {
    if mtu == 0 {
        return Err(FragmentError::ZeroMtu);
    }
    if bytes == 0 {
        return Err(FragmentError::EmptyMessage);
    }
    Ok(bytes.div_ceil(mtu) as u32)
}

/// Byte size of fragment `index` when `bytes` is split at `mtu`.
pub fn fragment_bytes(bytes: u64, mtu: u64, index: u32) -> u64 {
    let start = index as u64 * mtu;
    bytes.saturating_sub(start).min(mtu)
}

/// Split a message into fragments sent at the given `(time, checksum_ok)`
/// schedule, one entry per fragment.
pub fn fragment_and_send(
    key: IngressKey,
    bytes: u64,
    mtu: u64,
    schedule: &[(SimTime, bool)],
) -> Result<Vec<(SimTime, Fragment)>, FragmentError> {
    let count = fragment_count(bytes, mtu)?;
    if schedule.len() != count as usize {
        return Err(FragmentError::ScheduleLength {
            expected: count,
            got: schedule.len(),
        });
    }
    if schedule.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(FragmentError::ScheduleNotMonotone);
    }
    Ok(schedule
        .iter()
        .enumerate()
        .map(|(i, &(t, valid))| {
            (
                t,
                Fragment {
                    key,
                    index: i as u32,
                    count,
                    valid_checksum: valid,
                },
            )
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbandonReason {
    BadChecksum,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IngressEvent<M> {
    /// Complete and first of its `(participant, message)`: hand to the engine.
    Released {
        key: IngressKey,
        payload: M,
        priority: SimTime,
        completed_at: SimTime,
    },
    /// A later copy of an already released message.
    Duplicate { key: IngressKey },
    Abandoned { key: IngressKey, reason: AbandonReason },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FragmentOutcome<M> {
    pub events: Vec<IngressEvent<M>>,
    /// Set when this fragment opened a new reassembly; the caller should
    /// call [`EngineIngress::on_timeout`] at this time.
    pub timeout_at: Option<SimTime>,
}

struct Partial<M> {
    payload: M,
    first_at: SimTime,
    received: BTreeSet<u32>,
    count: u32,
    reservation: Option<(SimTime, u64)>,
}

struct Ready<M> {
    key: IngressKey,
    payload: M,
    completed_at: SimTime,
}

type Reservation<M> = (IngressKey, Option<Ready<M>>);

pub struct EngineIngress<M> {
    policy: TimestampPolicy,
    timeout: SimTime,
    partial: HashMap<IngressKey, Partial<M>>,
    /// Reservation order; `None` while incomplete.
    reservations: BTreeMap<(SimTime, u64), Reservation<M>>,
    next_reservation: u64,
    released: BTreeSet<(ParticipantId, u64)>,
    finished: BTreeSet<IngressKey>,
}

impl<M: Clone> EngineIngress<M> {
    pub fn new(policy: TimestampPolicy, timeout: SimTime) -> Self {
        EngineIngress {
            policy,
            timeout,
            partial: HashMap::new(),
            reservations: BTreeMap::new(),
            next_reservation: 0,
            released: BTreeSet::new(),
            finished: BTreeSet::new(),
        }
    }

    pub fn policy(&self) -> TimestampPolicy {
        self.policy
    }

    pub fn pending(&self) -> usize {
        self.partial.len()
    }

    pub fn on_fragment(&mut self, frag: Fragment, payload: &M, now: SimTime) -> FragmentOutcome<M> {
        let mut out = FragmentOutcome {
            events: Vec::new(),
            timeout_at: None,
        };
        let key = frag.key;
        if self.finished.contains(&key) {
            // Stragglers of a message that already completed or was abandoned.
            return out;
        }
        if !self.partial.contains_key(&key) {
            let reservation = match self.policy {
                TimestampPolicy::FirstFragment => {
                    self.next_reservation += 1;
                    let slot = (now, self.next_reservation);
                    self.reservations.insert(slot, (key, None));
                    Some(slot)
                }
                TimestampPolicy::LastFragment => None,
            };
            self.partial.insert(
                key,
                Partial {
                    payload: payload.clone(),
                    first_at: now,
                    received: BTreeSet::new(),
                    count: frag.count,
                    reservation,
                },
            );
            out.timeout_at = Some(now + self.timeout);
        }

        if !frag.valid_checksum {
            self.abandon(key, AbandonReason::BadChecksum, &mut out.events);
            self.release_ready(&mut out.events);
            return out;
        }

        let part = self.partial.get_mut(&key).expect("inserted above");
        part.received.insert(frag.index);
        if part.received.len() as u32 == part.count {
            let part = self.partial.remove(&key).expect("present");
            self.finished.insert(key);
            match part.reservation {
                Some(slot) => {
                    self.reservations.get_mut(&slot).expect("reserved").1 = Some(Ready {
                        key,
                        payload: part.payload,
                        completed_at: now,
                    });
                }
                None => self.emit(key, part.payload, now, now, &mut out.events),
            }
        }
        self.release_ready(&mut out.events);
        out
    }

    /// Abandon `key` if it is still incomplete once its deadline has passed.
    pub fn on_timeout(&mut self, key: IngressKey, now: SimTime) -> Vec<IngressEvent<M>> {
        let mut events = Vec::new();
        let expired = self
            .partial
            .get(&key)
            .is_some_and(|p| p.first_at + self.timeout <= now);
        if expired {
            self.abandon(key, AbandonReason::Timeout, &mut events);
            self.release_ready(&mut events);
        }
        events
    }

    fn abandon(&mut self, key: IngressKey, reason: AbandonReason, events: &mut Vec<IngressEvent<M>>) {
        if let Some(part) = self.partial.remove(&key) {
            if let Some(slot) = part.reservation {
                self.reservations.remove(&slot);
            }
            self.finished.insert(key);
            events.push(IngressEvent::Abandoned { key, reason });
        }
    }

    fn release_ready(&mut self, events: &mut Vec<IngressEvent<M>>) {
        while let Some(entry) = self.reservations.first_entry() {
            if entry.get().1.is_none() {
                break;
            }
            let ((priority, _), (_, ready)) = entry.remove_entry();
            let ready = ready.expect("checked");
            self.emit(ready.key, ready.payload, priority, ready.completed_at, events);
        }
    }

    fn emit(
        &mut self,
        key: IngressKey,
        payload: M,
        priority: SimTime,
        completed_at: SimTime,
        events: &mut Vec<IngressEvent<M>>,
    ) {
        if self.released.insert((key.participant, key.message)) {
            events.push(IngressEvent::Released {
                key,
                payload,
                priority,
                completed_at,
            });
        } else {
            events.push(IngressEvent::Duplicate { key });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(p: u32, m: u64) -> IngressKey {
        IngressKey {
            participant: ParticipantId(p),
            message: m,
            copy: 0,
        }
    }

    fn frag(k: IngressKey, index: u32, count: u32, valid: bool) -> Fragment {
        Fragment {
            key: k,
            index,
            count,
            valid_checksum: valid,
        }
    }

    fn released(events: &[IngressEvent<&'static str>]) -> Vec<(&'static str, u64)> {
        events
            .iter()
            .filter_map(|e| match e {
                IngressEvent::Released { payload, priority, .. } => Some((*payload, priority.as_nanos())),
                _ => None,
            })
            .collect()
    }

    /// Fragment 1 at 0, fragment 2 at 1ms; competitor whole at 0.5ms.
    fn interleaved(policy: TimestampPolicy) -> Vec<(&'static str, u64)> {
        let mut ing = EngineIngress::new(policy, SimTime::from_millis(100));
        let opt = key(0, 1);
        let rival = key(1, 2);
        let mut order = Vec::new();
        order.extend(released(&ing.on_fragment(frag(opt, 0, 2, true), &"opt", SimTime::ZERO).events));
        order.extend(released(
            &ing.on_fragment(frag(rival, 0, 1, true), &"rival", SimTime::from_micros(500)).events,
        ));
        order.extend(released(
            &ing.on_fragment(frag(opt, 1, 2, true), &"opt", SimTime::from_millis(1)).events,
        ));
        order
    }

    #[test]
    fn first_fragment_policy_keeps_reservation() {
        assert_eq!(
            interleaved(TimestampPolicy::FirstFragment),
            vec![("opt", 0), ("rival", 500_000)]
        );
    }

    #[test]
    fn last_fragment_policy_stamps_completion() {
        assert_eq!(
            interleaved(TimestampPolicy::LastFragment),
            vec![("rival", 500_000), ("opt", 1_000_000)]
        );
    }

    #[test]
    fn single_fragment_identical_under_both_policies() {
        for policy in [TimestampPolicy::FirstFragment, TimestampPolicy::LastFragment] {
            let mut ing = EngineIngress::new(policy, SimTime::from_millis(100));
            let out = ing.on_fragment(frag(key(0, 1), 0, 1, true), &"m", SimTime::from_nanos(42));
            assert_eq!(released(&out.events), vec![("m", 42)]);
        }
    }

    #[test]
    fn invalid_checksum_abandons_and_releases_waiters() {
        let mut ing = EngineIngress::new(TimestampPolicy::FirstFragment, SimTime::from_millis(100));
        let opt = key(0, 1);
        ing.on_fragment(frag(opt, 0, 2, true), &"opt", SimTime::ZERO);
        let blocked = ing.on_fragment(frag(key(1, 2), 0, 1, true), &"rival", SimTime::from_nanos(10));
        assert!(released(&blocked.events).is_empty());
        let out = ing.on_fragment(frag(opt, 1, 2, false), &"opt", SimTime::from_nanos(20));
        assert!(matches!(
            out.events[0],
            IngressEvent::Abandoned {
                reason: AbandonReason::BadChecksum,
                ..
            }
        ));
        assert_eq!(released(&out.events), vec![("rival", 10)]);
        assert_eq!(ing.pending(), 0);
    }

    #[test]
    fn timeout_discards_partial() {
        let mut ing = EngineIngress::new(TimestampPolicy::LastFragment, SimTime::from_nanos(100));
        let k = key(0, 1);
        let out = ing.on_fragment(frag(k, 0, 3, true), &"m", SimTime::ZERO);
        assert_eq!(out.timeout_at, Some(SimTime::from_nanos(100)));
        assert!(ing.on_timeout(k, SimTime::from_nanos(99)).is_empty());
        let ev = ing.on_timeout(k, SimTime::from_nanos(100));
        assert!(matches!(
            ev[0],
            IngressEvent::Abandoned {
                reason: AbandonReason::Timeout,
                ..
            }
        ));
        // A late fragment of the abandoned message is ignored.
        let late = ing.on_fragment(frag(k, 1, 3, true), &"m", SimTime::from_nanos(150));
        assert!(late.events.is_empty());
    }

    #[test]
    fn duplicate_copies_discarded() {
        let mut ing = EngineIngress::new(TimestampPolicy::FirstFragment, SimTime::from_millis(1));
        let a = IngressKey { copy: 0, ..key(3, 9) };
        let b = IngressKey { copy: 1, ..key(3, 9) };
        let first = ing.on_fragment(frag(b, 0, 1, true), &"m", SimTime::from_nanos(5));
        let second = ing.on_fragment(frag(a, 0, 1, true), &"m", SimTime::from_nanos(7));
        assert_eq!(released(&first.events), vec![("m", 5)]);
        assert_eq!(second.events, vec![IngressEvent::Duplicate { key: a }]);
    }

    #[test]
    fn first_fragment_never_later_than_last_fragment() {
        // Same arrival pattern under both policies: priority(FF) <= priority(LF).
        let arrivals = [0u64, 300, 900];
        let mut stamps = Vec::new();
        for policy in [TimestampPolicy::FirstFragment, TimestampPolicy::LastFragment] {
            let mut ing = EngineIngress::new(policy, SimTime::from_millis(1));
            let k = key(0, 1);
            let mut got = None;
            for (i, t) in arrivals.iter().enumerate() {
                let out = ing.on_fragment(frag(k, i as u32, 3, true), &"m", SimTime::from_nanos(*t));
                if let Some(r) = released(&out.events).first() {
                    got = Some(r.1);
                }
            }
            stamps.push(got.unwrap());
        }
        assert_eq!(stamps, vec![0, 900]);
    }

    #[test]
    fn fragmenting_checks_schedule() {
        let k = key(0, 1);
        assert_eq!(fragment_count(3000, 1500), Ok(2));
        assert_eq!(fragment_count(3001, 1500), Ok(3));
        assert_eq!(fragment_bytes(3001, 1500, 2), 1);
        let t = SimTime::from_nanos;
        let frags = fragment_and_send(k, 3000, 1500, &[(t(0), true), (t(5), false)]).unwrap();
        assert_eq!(frags.len(), 2);
        assert!(!frags[1].1.valid_checksum);
        assert_eq!(
            fragment_and_send(k, 3000, 1500, &[(t(5), true), (t(0), true)]),
            Err(FragmentError::ScheduleNotMonotone)
        );
        assert!(matches!(
            fragment_and_send(k, 3000, 1500, &[(t(0), true)]),
            Err(FragmentError::ScheduleLength { .. })
        ));
    }
}
