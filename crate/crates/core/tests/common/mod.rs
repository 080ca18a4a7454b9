//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use fairsim::book::{CancelOutcome, Message, MatchOutcome, OrderBook, OrderKind, Side};
use fairsim::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefOrder {
    pub id: u64,
    pub participant: u32,
    pub side: Side,
    pub price: i64,
    pub qty: u64,
    pub seq: u64,
}

/// (taker, maker, price, qty)
pub type RefTrade = (u64, u64, i64, u64);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefOutcome {
    pub trades: Vec<RefTrade>,
    pub cancelled: Option<bool>,
}

/// Flat list of resting orders; every match scans all of them.
#[derive(Default)]
pub struct RefBook {
    pub resting: Vec<RefOrder>,
    seq: u64,
}

impl RefBook {
    pub fn apply(&mut self, msg: &Message) -> RefOutcome {
        let mut out = RefOutcome::default();
        match *msg {
            Message::Cancel { target, participant } => {
                let pos = self
                    .resting
                    .iter()
                    .position(|o| o.id == target.0 && o.participant == participant.0);
                out.cancelled = Some(pos.is_some());
                if let Some(pos) = pos {
                    self.resting.remove(pos);
                }
            }
            Message::New(order) => {
                self.seq += 1;
                let limit = match order.kind {
                    OrderKind::Limit { price } => Some(price),
                    OrderKind::Market => None,
                };
                let mut remaining = order.qty;
                while remaining > 0 {
                    let best = self
                        .resting
                        .iter()
                        .enumerate()
                        .filter(|(_, o)| o.side != order.side)
                        .filter(|(_, o)| match (order.side, limit) {
                            (_, None) => true,
                            (Side::Bid, Some(p)) => o.price <= p,
                            (Side::Ask, Some(p)) => o.price >= p,
                        })
                        .min_by_key(|(_, o)| {
                            let price_rank = match order.side {
                                Side::Bid => o.price,
                                Side::Ask => -o.price,
                            };
                            (price_rank, o.seq)
                        })
                        .map(|(i, _)| i);
                    let Some(i) = best else { break };
                    let maker = &mut self.resting[i];
                    let qty = remaining.min(maker.qty);
                    out.trades.push((order.id.0, maker.id, maker.price, qty));
                    maker.qty -= qty;
                    remaining -= qty;
                    if maker.qty == 0 {
                        self.resting.remove(i);
                    }
                }
                if remaining > 0 {
                    if let Some(price) = limit {
                        self.resting.push(RefOrder {
                            id: order.id.0,
                            participant: order.participant.0,
                            side: order.side,
                            price,
                            qty: remaining,
                            seq: self.seq,
                        });
                    }
                }
            }
        }
        out
    }

    /// Resting orders sorted the way a book snapshot lists them.
    pub fn sorted(&self) -> Vec<(Side, i64, u64, u64)> {
        let mut v: Vec<_> = self
            .resting
            .iter()
            .map(|o| (o.side, o.price, o.seq, o.qty))
            .collect();
        v.sort_by_key(|&(side, price, seq, _)| match side {
            Side::Bid => (0, -price, seq),
            Side::Ask => (1, price, seq),
        });
        v.into_iter().map(|(s, p, _, q)| (s, p, q, 0)).collect()
    }
}

pub fn outcome_of(o: &MatchOutcome) -> RefOutcome {
    RefOutcome {
        trades: o
            .trades
            .iter()
            .map(|t| (t.taker_order.0, t.maker_order.0, t.price, t.qty))
            .collect(),
        cancelled: o.cancel.map(|c| matches!(c, CancelOutcome::Cancelled { .. })),
    }
}

pub fn book_state(book: &OrderBook) -> Vec<(Side, i64, u64, u64)> {
    let snap = book.snapshot();
    let mut v = Vec::new();
    for (side, levels) in [(Side::Bid, &snap.bids), (Side::Ask, &snap.asks)] {
        for level in levels {
            for o in &level.orders {
                v.push((side, level.price, o.qty, 0));
            }
        }
    }
    v
}

/// Random message stream over `levels` adjacent prices: mostly limits, some
/// market orders, and cancels aimed at earlier ids (sometimes by the wrong
/// participant, sometimes at already-filled orders).
pub fn random_messages(seed: u64, max_len: usize, levels: i64) -> Vec<Message> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_len);
    let mut msgs = Vec::with_capacity(n);
    let mut owners: Vec<(u64, u32)> = Vec::new();
    for i in 0..n {
        let id = i as u64 + 1;
        let participant = rng.random_range(0..4u32);
        let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
        let roll: f64 = rng.random();
        let msg = if roll < 0.15 && !owners.is_empty() {
            let (target, owner) = owners[rng.random_range(0..owners.len())];
            let who = if rng.random_bool(0.8) { owner } else { (owner + 1) % 4 };
            Message::cancel(target, who)
        } else if roll < 0.25 {
            Message::market(id, participant, side, rng.random_range(1..=10))
        } else {
            let price = 100 + rng.random_range(0..levels);
            owners.push((id, participant));
            Message::limit(id, participant, side, price, rng.random_range(1..=10))
        };
        msgs.push(msg);
    }
    msgs
}

/// Run `msgs` through both matchers; `Err` describes the first divergence.
pub fn compare_with_reference(msgs: &[Message]) -> Result<(), String> {
    let mut book = OrderBook::new();
    let mut reference = RefBook::default();
    for (i, msg) in msgs.iter().enumerate() {
        let got = book
            .process_message(msg, SimTime::from_nanos(i as u64))
            .map_err(|e| format!("message {i}: {e}"))?;
        let want = reference.apply(msg);
        if outcome_of(&got) != want {
            return Err(format!("message {i} {msg:?}: got {:?}, want {want:?}", outcome_of(&got)));
        }
    }
    if book_state(&book) != reference.sorted() {
        return Err("final resting sets differ".into());
    }
    Ok(())
}

/// Does some `l` on the half-nanosecond grid put every residual within
/// `l ± ε/2`? Works in doubled units to stay integral.
pub fn l_exists(residuals: &[i64], epsilon: u64) -> bool {
    let lo = *residuals.iter().min().unwrap() * 2;
    let hi = *residuals.iter().max().unwrap() * 2;
    (lo..=hi).any(|l2| residuals.iter().all(|&d| (2 * d - l2).unsigned_abs() <= epsilon))
}
