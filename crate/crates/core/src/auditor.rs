//! Race detection results, residuals, and bounded temporal-fairness metrics.
//!
//! For an entry `P` in a race triggered at `t_e`, the residual is
//! `d_P = t_arrival - t_e - r_P`: the infrastructure delay that entry
//! actually experienced. A race is ε-fair when some common delay `l` places
//! every arrival within `l ± ε/2`, which holds exactly when the largest
//! pairwise residual difference (the race's spread) is at most ε. The
//! exchange-level `ε(δ)` is the empirical δ-quantile of spreads.
//!
//! Everything here is a pure function of completed simulation output and
//! uses simulator ground truth for `t_e`, `r` and arrivals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::book::{BookEvent, OrderId, ParticipantId, Qty, Side, Ticks};
use crate::participants::StimulusId;
use crate::time::SimTime;

pub const DEFAULT_DELTAS: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("race {0:?} has fewer than two arrived entries")]
    TooFewEntries(StimulusId),
    #[error("no judgeable races")]
    NoRaces,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceEntry {
    pub participant: ParticipantId,
    pub name: String,
    pub reaction_time: SimTime,
    /// Priority timestamp at the engine; `None` if the order never booked.
    pub t_arrival: Option<SimTime>,
    pub won: bool,
    /// Batch window the message was matched in, when batching is on.
    pub window: Option<u64>,
}

impl RaceEntry {
    pub fn residual(&self, t_e: SimTime) -> Option<i64> {
        self.t_arrival
            .map(|t| t.signed_diff(t_e) - self.reaction_time.as_nanos() as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceRecord {
    pub stimulus: StimulusId,
    pub t_e: SimTime,
    pub entries: Vec<RaceEntry>,
}

impl RaceRecord {
    pub fn residuals(&self) -> Vec<i64> {
        self.entries.iter().filter_map(|e| e.residual(self.t_e)).collect()
    }

    /// Max pairwise residual difference over arrived entries.
    pub fn spread(&self) -> Option<u64> {
        let d = self.residuals();
        if d.len() < 2 {
            return None;
        }
        let max = *d.iter().max().expect("non-empty");
        let min = *d.iter().min().expect("non-empty");
        Some((max - min) as u64)
    }

    pub fn is_judgeable(&self) -> bool {
        self.spread().is_some()
    }

    pub fn winners(&self) -> impl Iterator<Item = &RaceEntry> {
        self.entries.iter().filter(|e| e.won)
    }

    /// All arrived entries matched in the same batch window.
    pub fn single_window(&self) -> Option<bool> {
        let mut windows = self.entries.iter().filter(|e| e.t_arrival.is_some()).map(|e| e.window);
        let first = windows.next()??;
        Some(windows.all(|w| w == Some(first)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Fair,
    Unfair,
}

pub fn judge_race(rec: &RaceRecord, epsilon: SimTime) -> Result<Verdict, AuditError> {
    let spread = rec.spread().ok_or(AuditError::TooFewEntries(rec.stimulus))?;
    Ok(if spread <= epsilon.as_nanos() {
        Verdict::Fair
    } else {
        Verdict::Unfair
    })
}

/// Empirical distribution of race spreads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ecdf {
    sorted: Vec<u64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<u64>) -> Self {
        samples.sort_unstable();
        Ecdf { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn max(&self) -> Option<u64> {
        self.sorted.last().copied()
    }

    /// Smallest sample `s` with `F(s) >= delta`.
    pub fn quantile(&self, delta: f64) -> Option<u64> {
        if self.sorted.is_empty() {
            return None;
        }
        let n = self.sorted.len();
        let rank = ((delta * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        Some(self.sorted[rank - 1])
    }

    /// `F(x)`: fraction of samples `<= x`.
    pub fn fraction_le(&self, x: u64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// One point per distinct sample value.
    pub fn points(&self) -> Vec<EcdfPoint> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<EcdfPoint> = Vec::new();
        for (i, &s) in self.sorted.iter().enumerate() {
            let fraction = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.spread_ns == s => last.fraction = fraction,
                _ => out.push(EcdfPoint { spread_ns: s, fraction }),
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub spread_ns: u64,
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub delta: f64,
    pub epsilon_ns: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonDelta {
    pub races: usize,
    /// Median residual over every arrived entry of every judged race.
    pub l_hat: i64,
    pub points: Vec<EpsilonPoint>,
    pub ecdf: Ecdf,
}

pub fn estimate_epsilon_delta(records: &[RaceRecord], deltas: &[f64]) -> Result<EpsilonDelta, AuditError> {
    let judged: Vec<&RaceRecord> = records.iter().filter(|r| r.is_judgeable()).collect();
    if judged.is_empty() {
        return Err(AuditError::NoRaces);
    }
    let ecdf = Ecdf::new(judged.iter().filter_map(|r| r.spread()).collect());
    let mut residuals: Vec<i64> = judged.iter().flat_map(|r| r.residuals()).collect();
    residuals.sort_unstable();
    let l_hat = residuals[residuals.len().div_ceil(2) - 1];
    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);
    let points = deltas
        .into_iter()
        .map(|delta| EpsilonPoint {
            delta,
            epsilon_ns: ecdf.quantile(delta).expect("non-empty"),
        })
        .collect();
    Ok(EpsilonDelta {
        races: judged.len(),
        l_hat,
        points,
        ecdf,
    })
}

/// Market-update delivery to one participant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub update: u64,
    pub participant: ParticipantId,
    pub t_receive: SimTime,
}

/// One participant message: first send and the priority timestamp it got.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SendRecord {
    pub stimulus: StimulusId,
    pub participant: ParticipantId,
    pub t_send: SimTime,
    pub t_arrival: Option<SimTime>,
}

/// Ground-truth observations the requirement checks need.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditTrace {
    pub deliveries: Vec<Delivery>,
    pub sends: Vec<SendRecord>,
    /// Book log per instrument.
    pub book_events: BTreeMap<u64, Vec<BookEvent>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementReport {
    /// Max over updates of latest minus earliest delivery.
    pub req1_max_spread_ns: u64,
    /// Pairs of sends (same stimulus, different participants) whose engine
    /// arrival order disagrees with their send order.
    pub req2_violations: u64,
    /// Fills that skipped an older resting order at the same price and side.
    pub req3_violations: u64,
}

pub fn check_requirements(trace: &AuditTrace) -> RequirementReport {
    let mut report = RequirementReport::default();

    let mut per_update: BTreeMap<u64, (SimTime, SimTime)> = BTreeMap::new();
    for d in &trace.deliveries {
        let e = per_update.entry(d.update).or_insert((d.t_receive, d.t_receive));
        e.0 = e.0.min(d.t_receive);
        e.1 = e.1.max(d.t_receive);
    }
    report.req1_max_spread_ns = per_update
        .values()
        .map(|(lo, hi)| (*hi - *lo).as_nanos())
        .max()
        .unwrap_or(0);

    let mut per_stimulus: BTreeMap<StimulusId, Vec<&SendRecord>> = BTreeMap::new();
    for s in trace.sends.iter().filter(|s| s.t_arrival.is_some()) {
        per_stimulus.entry(s.stimulus).or_default().push(s);
    }
    for sends in per_stimulus.values() {
        for (i, a) in sends.iter().enumerate() {
            for b in &sends[i + 1..] {
                if a.participant == b.participant {
                    continue;
                }
                let sent = a.t_send.cmp(&b.t_send);
                let arrived = a.t_arrival.cmp(&b.t_arrival);
                if sent != arrived {
                    report.req2_violations += 1;
                }
            }
        }
    }

    report.req3_violations = trace.book_events.values().map(|ev| price_time_violations(ev)).sum();
    report
}

/// Replays the book log and counts fills of a maker while an order with a
/// smaller engine sequence number rested at the same side and price.
pub fn price_time_violations(events: &[BookEvent]) -> u64 {
    // (side, price) -> engine_seq -> (order, remaining)
    let mut resting: BTreeMap<(Side, Ticks), BTreeMap<u64, (OrderId, Qty)>> = BTreeMap::new();
    let mut where_is: BTreeMap<OrderId, (Side, Ticks, u64)> = BTreeMap::new();
    let mut violations = 0;
    for ev in events {
        match *ev {
            BookEvent::Rested {
                order,
                side,
                price,
                qty,
                engine_seq,
            } => {
                resting.entry((side, price)).or_default().insert(engine_seq, (order, qty));
                where_is.insert(order, (side, price, engine_seq));
            }
            BookEvent::Filled { maker, side, price, qty } => {
                let Some(&(_, _, seq)) = where_is.get(&maker) else {
                    continue;
                };
                let level = resting.entry((side, price)).or_default();
                if level.keys().next().is_some_and(|&head| head < seq) {
                    violations += 1;
                }
                if let Some(entry) = level.get_mut(&seq) {
                    entry.1 = entry.1.saturating_sub(qty);
                    if entry.1 == 0 {
                        level.remove(&seq);
                        where_is.remove(&maker);
                    }
                }
            }
            BookEvent::Cancelled { order } => {
                if let Some((side, price, seq)) = where_is.remove(&order) {
                    if let Some(level) = resting.get_mut(&(side, price)) {
                        level.remove(&seq);
                    }
                }
            }
        }
    }
    violations
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub a: String,
    pub b: String,
    pub r_a_ns: u64,
    pub r_b_ns: u64,
    /// Races both entered and exactly one of the two won.
    pub races: u64,
    pub a_wins: u64,
    pub b_wins: u64,
    /// `None` for equal reaction times.
    pub faster: Option<String>,
    pub faster_win_fraction: Option<f64>,
    /// `|r_a - r_b| < epsilon`.
    pub sub_epsilon: bool,
    /// Uniformity test, equal-r pairs only.
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VictoryStats {
    pub epsilon_ns: u64,
    pub overall_faster_win_fraction: Option<f64>,
    pub sub_epsilon_faster_win_fraction: Option<f64>,
    pub pairs: Vec<PairStats>,
}

impl VictoryStats {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairStats> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

impl PairStats {
    pub fn win_fraction_of(&self, name: &str) -> Option<f64> {
        if self.races == 0 {
            return None;
        }
        let wins = if name == self.a {
            self.a_wins
        } else if name == self.b {
            self.b_wins
        } else {
            return None;
        };
        Some(wins as f64 / self.races as f64)
    }
}

/// Two-category chi-square statistic against a 50/50 split, with its p-value.
pub fn chi_square_uniform(a: u64, b: u64) -> Option<(f64, f64)> {
    let n = a + b;
    if n == 0 {
        return None;
    }
    let expected = n as f64 / 2.0;
    let stat = [a, b]
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let p = ChiSquared::new(1.0).expect("df > 0").sf(stat);
    Some((stat, p))
}

pub fn victory_distribution(records: &[RaceRecord], epsilon: SimTime) -> Result<VictoryStats, AuditError> {
    if records.is_empty() {
        return Err(AuditError::NoRaces);
    }
    struct Acc {
        a: (String, u64),
        b: (String, u64),
        races: u64,
        a_wins: u64,
        b_wins: u64,
    }
    let mut pairs: BTreeMap<(ParticipantId, ParticipantId), Acc> = BTreeMap::new();
    for rec in records {
        let mut entries: Vec<&RaceEntry> = rec.entries.iter().collect();
        entries.sort_by_key(|e| e.participant);
        for (i, x) in entries.iter().enumerate() {
            for y in &entries[i + 1..] {
                let acc = pairs.entry((x.participant, y.participant)).or_insert_with(|| Acc {
                    a: (x.name.clone(), x.reaction_time.as_nanos()),
                    b: (y.name.clone(), y.reaction_time.as_nanos()),
                    races: 0,
                    a_wins: 0,
                    b_wins: 0,
                });
                match (x.won, y.won) {
                    (true, false) => {
                        acc.races += 1;
                        acc.a_wins += 1;
                    }
                    (false, true) => {
                        acc.races += 1;
                        acc.b_wins += 1;
                    }
                    _ => {}
                }
            }
        }
    }

    let eps = epsilon.as_nanos();
    let mut overall = (0u64, 0u64);
    let mut sub = (0u64, 0u64);
    let stats = pairs
        .into_values()
        .map(|acc| {
            let (ra, rb) = (acc.a.1, acc.b.1);
            let faster_wins = match ra.cmp(&rb) {
                std::cmp::Ordering::Less => Some((acc.a.0.clone(), acc.a_wins)),
                std::cmp::Ordering::Greater => Some((acc.b.0.clone(), acc.b_wins)),
                std::cmp::Ordering::Equal => None,
            };
            let sub_epsilon = ra.abs_diff(rb) < eps;
            if let Some((_, w)) = &faster_wins {
                overall.0 += w;
                overall.1 += acc.races;
                if sub_epsilon {
                    sub.0 += w;
                    sub.1 += acc.races;
                }
            }
            let chi = if ra == rb {
                chi_square_uniform(acc.a_wins, acc.b_wins)
            } else {
                None
            };
            PairStats {
                faster_win_fraction: faster_wins
                    .as_ref()
                    .filter(|_| acc.races > 0)
                    .map(|(_, w)| *w as f64 / acc.races as f64),
                faster: faster_wins.map(|(n, _)| n),
                a: acc.a.0,
                b: acc.b.0,
                r_a_ns: ra,
                r_b_ns: rb,
                races: acc.races,
                a_wins: acc.a_wins,
                b_wins: acc.b_wins,
                sub_epsilon,
                chi_square: chi.map(|c| c.0),
                p_value: chi.map(|c| c.1),
            }
        })
        .collect();
    let frac = |(w, n): (u64, u64)| (n > 0).then(|| w as f64 / n as f64);
    Ok(VictoryStats {
        epsilon_ns: eps,
        overall_faster_win_fraction: frac(overall),
        sub_epsilon_faster_win_fraction: frac(sub),
        pairs: stats,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    /// How races were formed; δ is measured over this population.
    pub pairing: String,
    /// Resolved scenario config the run used.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub window_ns: u64,
    pub phase_ns: u64,
    pub single_window_races: u64,
    pub straddling_races: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub provenance: Provenance,
    pub races_total: u64,
    /// Races with at least two arrived entries.
    pub races: u64,
    pub l_hat_ns: Option<i64>,
    pub epsilon_of_delta: Vec<EpsilonPoint>,
    pub max_spread_ns: Option<u64>,
    /// ε used for victory statistics and `fair_fraction_at_epsilon`.
    pub epsilon_ns: u64,
    pub fair_fraction_at_epsilon: Option<f64>,
    pub req1_max_spread_ns: u64,
    pub req2_violations: u64,
    pub req3_violations: u64,
    pub victory_stats: Option<VictoryStats>,
    pub batch: Option<BatchSummary>,
    pub notices: BTreeMap<String, u64>,
    pub ecdf: Vec<EcdfPoint>,
}

impl FairnessReport {
    /// Assemble a report. `epsilon` defaults to the measured ε at the
    /// largest requested δ.
    pub fn build(
        provenance: Provenance,
        records: &[RaceRecord],
        trace: &AuditTrace,
        deltas: &[f64],
        epsilon: Option<SimTime>,
    ) -> FairnessReport {
        let estimate = estimate_epsilon_delta(records, deltas).ok();
        let reqs = check_requirements(trace);
        let eps = epsilon.unwrap_or_else(|| {
            SimTime::from_nanos(
                estimate
                    .as_ref()
                    .and_then(|e| e.points.last().map(|p| p.epsilon_ns))
                    .unwrap_or(0),
            )
        });
        FairnessReport {
            provenance,
            races_total: records.len() as u64,
            races: estimate.as_ref().map_or(0, |e| e.races as u64),
            l_hat_ns: estimate.as_ref().map(|e| e.l_hat),
            epsilon_of_delta: estimate.as_ref().map(|e| e.points.clone()).unwrap_or_default(),
            max_spread_ns: estimate.as_ref().and_then(|e| e.ecdf.max()),
            epsilon_ns: eps.as_nanos(),
            fair_fraction_at_epsilon: estimate.as_ref().map(|e| e.ecdf.fraction_le(eps.as_nanos())),
            req1_max_spread_ns: reqs.req1_max_spread_ns,
            req2_violations: reqs.req2_violations,
            req3_violations: reqs.req3_violations,
            victory_stats: victory_distribution(records, eps).ok(),
            batch: None,
            notices: BTreeMap::new(),
            ecdf: estimate.map(|e| e.ecdf.points()).unwrap_or_default(),
        }
    }

    pub fn epsilon_at(&self, delta: f64) -> Option<u64> {
        self.epsilon_of_delta
            .iter()
            .find(|p| (p.delta - delta).abs() < 1e-12)
            .map(|p| p.epsilon_ns)
    }
}

/// Write race entries as CSV: `stimulus_id,participant,r_ns,t_e_ns,t_arrival_ns,won`.
/// Entries that never reached the book leave `t_arrival_ns` empty.
pub fn write_races_csv<W: std::io::Write>(records: &[RaceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stimulus_id", "participant", "r_ns", "t_e_ns", "t_arrival_ns", "won"])?;
    for rec in records {
        for e in &rec.entries {
            w.write_record([
                rec.stimulus.0.to_string(),
                e.name.clone(),
                e.reaction_time.as_nanos().to_string(),
                rec.t_e.as_nanos().to_string(),
                e.t_arrival.map(|t| t.as_nanos().to_string()).unwrap_or_default(),
                e.won.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(p: u32, r: u64, arrival: Option<u64>, won: bool) -> RaceEntry {
        RaceEntry {
            participant: ParticipantId(p),
            name: format!("P{p}"),
            reaction_time: SimTime::from_nanos(r),
            t_arrival: arrival.map(SimTime::from_nanos),
            won,
            window: None,
        }
    }

    fn race(id: u64, t_e: u64, entries: Vec<RaceEntry>) -> RaceRecord {
        RaceRecord {
            stimulus: StimulusId(id),
            t_e: SimTime::from_nanos(t_e),
            entries,
        }
    }

    #[test]
    fn identical_residuals_fair_at_zero() {
        let rec = race(0, 100, vec![entry(0, 5, Some(115), true), entry(1, 7, Some(117), false)]);
        assert_eq!(rec.spread(), Some(0));
        assert_eq!(judge_race(&rec, SimTime::ZERO), Ok(Verdict::Fair));
    }

    #[test]
    fn one_ms_port_offset_threshold() {
        let ms = 1_000_000;
        // Same reaction time, one path offset by exactly 1ms.
        let rec = race(0, 0, vec![entry(0, 0, Some(10 + ms), false), entry(1, 0, Some(10), true)]);
        assert_eq!(judge_race(&rec, SimTime::from_nanos(ms)), Ok(Verdict::Fair));
        assert_eq!(judge_race(&rec, SimTime::from_nanos(ms - 1)), Ok(Verdict::Unfair));
    }

    #[test]
    fn residual_can_be_negative() {
        let e = entry(0, 5_000, Some(1_000), false);
        assert_eq!(e.residual(SimTime::from_nanos(2_000)), Some(-6_000));
    }

    #[test]
    fn judge_needs_two_arrivals() {
        let rec = race(4, 0, vec![entry(0, 1, Some(5), true), entry(1, 1, None, false)]);
        assert_eq!(judge_race(&rec, SimTime::ZERO), Err(AuditError::TooFewEntries(StimulusId(4))));
    }

    #[test]
    fn three_way_race_uses_max_pairwise() {
        let rec = race(
            0,
            0,
            vec![entry(0, 0, Some(10), true), entry(1, 0, Some(14), false), entry(2, 0, Some(25), false)],
        );
        assert_eq!(rec.spread(), Some(15));
    }

    #[test]
    fn quantile_is_inverse_ecdf() {
        let e = Ecdf::new(vec![5, 1, 3, 2, 4, 6, 7, 8, 9, 10]);
        assert_eq!(e.quantile(0.5), Some(5));
        assert_eq!(e.quantile(0.9), Some(9));
        assert_eq!(e.quantile(0.99), Some(10));
        assert_eq!(e.quantile(0.999), Some(10));
        assert_eq!(e.fraction_le(5), 0.5);
        assert_eq!(e.fraction_le(10), 1.0);
        assert_eq!(e.fraction_le(0), 0.0);
    }

    #[test]
    fn constant_infrastructure_gives_zero_epsilon() {
        let records: Vec<_> = (0..20)
            .map(|i| race(i, i * 1000, vec![entry(0, 5, Some(i * 1000 + 15), true), entry(1, 9, Some(i * 1000 + 19), false)]))
            .collect();
        let est = estimate_epsilon_delta(&records, &DEFAULT_DELTAS).unwrap();
        assert!(est.points.iter().all(|p| p.epsilon_ns == 0));
        assert_eq!(est.l_hat, 10);
    }

    #[test]
    fn estimate_requires_races() {
        assert_eq!(estimate_epsilon_delta(&[], &DEFAULT_DELTAS), Err(AuditError::NoRaces));
    }

    #[test]
    fn requirement_one_and_two() {
        let t = SimTime::from_nanos;
        let trace = AuditTrace {
            deliveries: vec![
                Delivery { update: 0, participant: ParticipantId(0), t_receive: t(1_000) },
                Delivery { update: 0, participant: ParticipantId(1), t_receive: t(2_000) },
                Delivery { update: 0, participant: ParticipantId(2), t_receive: t(3_000) },
            ],
            sends: vec![
                SendRecord { stimulus: StimulusId(0), participant: ParticipantId(0), t_send: t(10), t_arrival: Some(t(30)) },
                SendRecord { stimulus: StimulusId(0), participant: ParticipantId(1), t_send: t(12), t_arrival: Some(t(25)) },
                SendRecord { stimulus: StimulusId(0), participant: ParticipantId(2), t_send: t(50), t_arrival: None },
            ],
            book_events: BTreeMap::new(),
        };
        let r = check_requirements(&trace);
        assert_eq!(r.req1_max_spread_ns, 2_000);
        assert_eq!(r.req2_violations, 1);
        assert_eq!(r.req3_violations, 0);
    }

    #[test]
    fn injected_priority_inversion_detected() {
        let ev = vec![
            BookEvent::Rested { order: OrderId(1), side: Side::Ask, price: 100, qty: 1, engine_seq: 1 },
            BookEvent::Rested { order: OrderId(2), side: Side::Ask, price: 100, qty: 1, engine_seq: 2 },
            BookEvent::Filled { maker: OrderId(2), side: Side::Ask, price: 100, qty: 1 },
            BookEvent::Filled { maker: OrderId(1), side: Side::Ask, price: 100, qty: 1 },
        ];
        assert_eq!(price_time_violations(&ev), 1);
        let cancelled_head = vec![
            ev[0],
            ev[1],
            BookEvent::Cancelled { order: OrderId(1) },
            ev[2],
        ];
        assert_eq!(price_time_violations(&cancelled_head), 0);
    }

    #[test]
    fn victory_perfect_infrastructure() {
        let records: Vec<_> = (0..10)
            .map(|i| race(i, 0, vec![entry(0, 5, Some(15), true), entry(1, 9, Some(19), false)]))
            .collect();
        let v = victory_distribution(&records, SimTime::from_nanos(1)).unwrap();
        assert_eq!(v.overall_faster_win_fraction, Some(1.0));
        assert_eq!(v.sub_epsilon_faster_win_fraction, None);
        let pair = v.pair("P0", "P1").unwrap();
        assert_eq!(pair.faster.as_deref(), Some("P0"));
        assert_eq!(pair.races, 10);
        assert!(pair.chi_square.is_none());
    }

    #[test]
    fn chi_square_for_equal_pairs() {
        let (stat, p) = chi_square_uniform(50, 50).unwrap();
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        // 60/40 over 100: stat 4.0, p ≈ 0.0455.
        let (stat, p) = chi_square_uniform(60, 40).unwrap();
        assert!((stat - 4.0).abs() < 1e-12);
        assert!((p - 0.0455).abs() < 1e-3);
    }

    #[test]
    fn races_csv_layout() {
        let rec = race(7, 100, vec![entry(0, 5, Some(120), true), entry(1, 9, None, false)]);
        let mut buf = Vec::new();
        write_races_csv(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "stimulus_id,participant,r_ns,t_e_ns,t_arrival_ns,won\n7,P0,5,100,120,true\n7,P1,9,100,,false\n"
        );
    }
}
