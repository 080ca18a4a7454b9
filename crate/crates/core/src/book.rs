//! Limit order book with price-time priority matching.
//!
//! Priority within a price level is the engine sequence number assigned when
//! a message is processed, not the raw arrival timestamp: two messages can
//! share a nanosecond, and the kernel's `(fire_at, seq)` order already
//! resolved which one the engine saw first.
//!
//! Also hosts the batch matcher: messages collected over one window are
//! shuffled uniformly and then fed through the same continuous path.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

pub type Ticks = i64;
pub type Qty = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticipantId(pub u32);

impl ParticipantId {
    /// Owner of exchange-injected liquidity.
    pub const HOUSE: ParticipantId = ParticipantId(u32::MAX);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderKind {
    Limit { price: Ticks },
    Market,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NewOrder {
    pub id: OrderId,
    pub participant: ParticipantId,
    pub side: Side,
    pub kind: OrderKind,
    pub qty: Qty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Message {
    New(NewOrder),
    Cancel { target: OrderId, participant: ParticipantId },
}

impl Message {
    pub fn limit(id: u64, participant: u32, side: Side, price: Ticks, qty: Qty) -> Message {
        Message::New(NewOrder {
            id: OrderId(id),
            participant: ParticipantId(participant),
            side,
            kind: OrderKind::Limit { price },
            qty,
        })
    }

    pub fn market(id: u64, participant: u32, side: Side, qty: Qty) -> Message {
        Message::New(NewOrder {
            id: OrderId(id),
            participant: ParticipantId(participant),
            side,
            kind: OrderKind::Market,
            qty,
        })
    }

    pub fn cancel(target: u64, participant: u32) -> Message {
        Message::Cancel {
            target: OrderId(target),
            participant: ParticipantId(participant),
        }
    }
}

/// A resting order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Order {
    pub id: OrderId,
    pub participant: ParticipantId,
    pub side: Side,
    pub price: Ticks,
    pub qty: Qty,
    pub engine_arrival: SimTime,
    pub engine_seq: u64,
}

/// FIFO queue of resting orders at one price, ascending `engine_seq`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceLevel {
    pub price: Ticks,
    queue: VecDeque<Order>,
}

impl PriceLevel {
    fn new(price: Ticks) -> Self {
        PriceLevel {
            price,
            queue: VecDeque::new(),
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.queue.iter()
    }

    pub fn total_qty(&self) -> Qty {
        self.queue.iter().map(|o| o.qty).sum()
    }

    fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Trade {
    pub taker_order: OrderId,
    pub maker_order: OrderId,
    pub taker_participant: ParticipantId,
    pub maker_participant: ParticipantId,
    /// Side of the taker.
    pub taker_side: Side,
    pub price: Ticks,
    pub qty: Qty,
    pub at: SimTime,
}

/// Book mutations, in the order they happened. Enough to replay the
/// resting set and audit price-time priority independently of the book.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum BookEvent {
    Rested {
        order: OrderId,
        side: Side,
        price: Ticks,
        qty: Qty,
        engine_seq: u64,
    },
    Filled {
        maker: OrderId,
        side: Side,
        price: Ticks,
        qty: Qty,
    },
    Cancelled {
        order: OrderId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CancelOutcome {
    Cancelled { remaining: Qty },
    /// Target unknown, already filled, or owned by someone else.
    TooLate,
}

/// Trades plus book delta produced by one message.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchOutcome {
    pub trades: Vec<Trade>,
    pub events: Vec<BookEvent>,
    pub rested: Option<OrderId>,
    pub discarded_qty: Qty,
    pub cancel: Option<CancelOutcome>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("order {0:?} has zero quantity")]
    ZeroQty(OrderId),
    #[error("order id {0:?} is already resting")]
    DuplicateId(OrderId),
    #[error("message arrived at {arrival} outside batch window [{start}, {end})")]
    OutsideWindow {
        arrival: SimTime,
        start: SimTime,
        end: SimTime,
    },
}

/// Half-open interval `[start, end)` whose messages are matched together at `end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchWindow {
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LevelSnapshot {
    pub price: Ticks,
    pub orders: Vec<Order>,
}

/// Value copy of the book. Bids best-first (descending), asks best-first (ascending).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BookSnapshot {
    pub bids: Vec<LevelSnapshot>,
    pub asks: Vec<LevelSnapshot>,
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BTreeMap<Ticks, PriceLevel>,
    asks: BTreeMap<Ticks, PriceLevel>,
    index: HashMap<OrderId, (Side, Ticks)>,
    next_seq: u64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_bid(&self) -> Option<(Ticks, Qty)> {
        self.bids
            .iter()
            .next_back()
            .map(|(p, l)| (*p, l.total_qty()))
    }

    pub fn best_ask(&self) -> Option<(Ticks, Qty)> {
        self.asks.iter().next().map(|(p, l)| (*p, l.total_qty()))
    }

    pub fn is_resting(&self, id: OrderId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn resting_count(&self) -> usize {
        self.index.len()
    }

    /// Best price an incoming order on `side` would trade against, if any.
    pub fn best_opposite(&self, side: Side) -> Option<Ticks> {
        match side {
            Side::Bid => self.best_ask().map(|(p, _)| p),
            Side::Ask => self.best_bid().map(|(p, _)| p),
        }
    }

    pub fn process_message(&mut self, msg: &Message, arrival: SimTime) -> Result<MatchOutcome, BookError> {
        self.process_at(msg, arrival, arrival)
    }

    /// Like [`OrderBook::process_message`], but trades are stamped `exec`
    /// while a resting order keeps `arrival` as its engine arrival.
    pub fn process_at(
        &mut self,
        msg: &Message,
        arrival: SimTime,
        exec: SimTime,
    ) -> Result<MatchOutcome, BookError> {
        match *msg {
            Message::New(order) => self.process_new(order, arrival, exec),
            Message::Cancel { target, participant } => Ok(self.process_cancel(target, participant)),
        }
    }

    fn process_new(&mut self, order: NewOrder, arrival: SimTime, exec: SimTime) -> Result<MatchOutcome, BookError> {
        if order.qty == 0 {
            return Err(BookError::ZeroQty(order.id));
        }
        if self.index.contains_key(&order.id) {
            return Err(BookError::DuplicateId(order.id));
        }
        self.next_seq += 1;
        let engine_seq = self.next_seq;

        let mut out = MatchOutcome::default();
        let mut remaining = order.qty;
        let limit = match order.kind {
            OrderKind::Limit { price } => Some(price),
            OrderKind::Market => None,
        };

        let opposite = match order.side {
            Side::Bid => &mut self.asks,
            Side::Ask => &mut self.bids,
        };
        while remaining > 0 {
            let best = match order.side {
                Side::Bid => opposite.keys().next().copied(),
                Side::Ask => opposite.keys().next_back().copied(),
            };
            let Some(level_price) = best else { break };
            let crosses = match (order.side, limit) {
                (_, None) => true,
                (Side::Bid, Some(p)) => level_price <= p,
                (Side::Ask, Some(p)) => level_price >= p,
            };
            if !crosses {
                break;
            }
            let level = opposite.get_mut(&level_price).expect("level exists");
            while remaining > 0 {
                let Some(maker) = level.queue.front_mut() else { break };
                let qty = remaining.min(maker.qty);
                maker.qty -= qty;
                remaining -= qty;
                out.trades.push(Trade {
                    taker_order: order.id,
                    maker_order: maker.id,
                    taker_participant: order.participant,
                    maker_participant: maker.participant,
                    taker_side: order.side,
                    price: level_price,
                    qty,
                    at: exec,
                });
                out.events.push(BookEvent::Filled {
                    maker: maker.id,
                    side: maker.side,
                    price: level_price,
                    qty,
                });
                if maker.qty == 0 {
                    let done = level.queue.pop_front().expect("front exists");
                    self.index.remove(&done.id);
                }
            }
            if level.is_empty() {
                opposite.remove(&level_price);
            }
        }

        if remaining > 0 {
            match limit {
                Some(price) => {
                    let own = match order.side {
                        Side::Bid => &mut self.bids,
                        Side::Ask => &mut self.asks,
                    };
                    own.entry(price).or_insert_with(|| PriceLevel::new(price)).queue.push_back(Order {
                        id: order.id,
                        participant: order.participant,
                        side: order.side,
                        price,
                        qty: remaining,
                        engine_arrival: arrival,
                        engine_seq,
                    });
                    self.index.insert(order.id, (order.side, price));
                    out.rested = Some(order.id);
                    out.events.push(BookEvent::Rested {
                        order: order.id,
                        side: order.side,
                        price,
                        qty: remaining,
                        engine_seq,
                    });
                }
                None => out.discarded_qty = remaining,
            }
        }
        Ok(out)
    }

    fn process_cancel(&mut self, target: OrderId, participant: ParticipantId) -> MatchOutcome {
        let mut out = MatchOutcome::default();
        let Some(&(side, price)) = self.index.get(&target) else {
            out.cancel = Some(CancelOutcome::TooLate);
            return out;
        };
        let levels = match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        };
        let level = levels.get_mut(&price).expect("indexed level exists");
        let pos = level
            .queue
            .iter()
            .position(|o| o.id == target)
            .expect("indexed order exists");
        if level.queue[pos].participant != participant {
            out.cancel = Some(CancelOutcome::TooLate);
            return out;
        }
        let removed = level.queue.remove(pos).expect("position valid");
        if level.is_empty() {
            levels.remove(&price);
        }
        self.index.remove(&target);
        out.events.push(BookEvent::Cancelled { order: target });
        out.cancel = Some(CancelOutcome::Cancelled {
            remaining: removed.qty,
        });
        out
    }

    /// Match every message of one batch window: shuffle uniformly, then run
    /// them through the continuous path, all stamped at the window close.
    /// Returns one outcome per message, in processing order, paired with the
    /// index the message had in `msgs`.
    pub fn batch_process<R: Rng + ?Sized>(
        &mut self,
        window: BatchWindow,
        msgs: Vec<(Message, SimTime)>,
        rng: &mut R,
    ) -> Result<Vec<(usize, MatchOutcome)>, BookError> {
        if let Some(&(_, arrival)) = msgs
            .iter()
            .find(|(_, t)| *t < window.start || *t >= window.end)
        {
            return Err(BookError::OutsideWindow {
                arrival,
                start: window.start,
                end: window.end,
            });
        }
        let mut order: Vec<usize> = (0..msgs.len()).collect();
        order.shuffle(rng);
        order
            .into_iter()
            .map(|i| {
                let (msg, arrival) = &msgs[i];
                self.process_at(msg, *arrival, window.end).map(|o| (i, o))
            })
            .collect()
    }

    pub fn snapshot(&self) -> BookSnapshot {
        let level = |l: &PriceLevel| LevelSnapshot {
            price: l.price,
            orders: l.queue.iter().cloned().collect(),
        };
        BookSnapshot {
            bids: self.bids.values().rev().map(level).collect(),
            asks: self.asks.values().map(level).collect(),
        }
    }
}

/// Write trades as CSV: `time_ns,taker_id,maker_id,price_ticks,qty`.
pub fn write_trades_csv<W: std::io::Write>(trades: &[Trade], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ns", "taker_id", "maker_id", "price_ticks", "qty"])?;
    for t in trades {
        w.write_record([
            t.at.as_nanos().to_string(),
            t.taker_order.0.to_string(),
            t.maker_order.0.to_string(),
            t.price.to_string(),
            t.qty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn t(ns: u64) -> SimTime {
        SimTime::from_nanos(ns)
    }

    #[test]
    fn limit_rests_on_empty_book() {
        let mut book = OrderBook::new();
        let out = book.process_message(&Message::limit(1, 0, Side::Bid, 100, 10), t(0)).unwrap();
        assert!(out.trades.is_empty());
        assert_eq!(out.rested, Some(OrderId(1)));
        assert_eq!(book.best_bid(), Some((100, 10)));
        assert_eq!(book.best_ask(), None);
    }

    #[test]
    fn fifo_head_consumed_first() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 0, Side::Ask, 100, 5), t(0)).unwrap();
        book.process_message(&Message::limit(2, 1, Side::Ask, 100, 5), t(1)).unwrap();
        let out = book.process_message(&Message::market(3, 2, Side::Bid, 5), t(2)).unwrap();
        assert_eq!(out.trades.len(), 1);
        assert_eq!(out.trades[0].maker_order, OrderId(1));
        assert_eq!(out.trades[0].qty, 5);
        assert!(!book.is_resting(OrderId(1)));
        assert!(book.is_resting(OrderId(2)));
    }

    #[test]
    fn better_price_beats_earlier_time() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 0, Side::Ask, 101, 1), t(0)).unwrap();
        book.process_message(&Message::limit(2, 0, Side::Ask, 100, 1), t(1)).unwrap();
        let out = book.process_message(&Message::limit(3, 1, Side::Bid, 101, 2), t(2)).unwrap();
        let makers: Vec<_> = out.trades.iter().map(|tr| (tr.maker_order, tr.price)).collect();
        assert_eq!(makers, vec![(OrderId(2), 100), (OrderId(1), 101)]);
    }

    #[test]
    fn execution_at_maker_price() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 0, Side::Bid, 100, 3), t(0)).unwrap();
        let out = book.process_message(&Message::limit(2, 1, Side::Ask, 95, 2), t(1)).unwrap();
        assert_eq!(out.trades[0].price, 100);
        assert_eq!(book.best_bid(), Some((100, 1)));
    }

    #[test]
    fn market_remainder_discarded() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 0, Side::Ask, 100, 2), t(0)).unwrap();
        let out = book.process_message(&Message::market(2, 1, Side::Bid, 5), t(1)).unwrap();
        assert_eq!(out.discarded_qty, 3);
        assert_eq!(out.rested, None);
        assert_eq!(book.resting_count(), 0);
    }

    #[test]
    fn cancel_resting_then_too_late() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 4, Side::Ask, 100, 1), t(0)).unwrap();
        let out = book.process_message(&Message::cancel(1, 4), t(1)).unwrap();
        assert_eq!(out.cancel, Some(CancelOutcome::Cancelled { remaining: 1 }));
        let again = book.process_message(&Message::cancel(1, 4), t(2)).unwrap();
        assert_eq!(again.cancel, Some(CancelOutcome::TooLate));
    }

    #[test]
    fn cancel_after_fill_is_too_late() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 4, Side::Ask, 100, 1), t(0)).unwrap();
        book.process_message(&Message::market(2, 5, Side::Bid, 1), t(1)).unwrap();
        let out = book.process_message(&Message::cancel(1, 4), t(2)).unwrap();
        assert_eq!(out.cancel, Some(CancelOutcome::TooLate));
        assert!(out.events.is_empty());
    }

    #[test]
    fn cancel_by_non_owner_is_refused() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 4, Side::Ask, 100, 1), t(0)).unwrap();
        let out = book.process_message(&Message::cancel(1, 9), t(1)).unwrap();
        assert_eq!(out.cancel, Some(CancelOutcome::TooLate));
        assert!(book.is_resting(OrderId(1)));
    }

    #[test]
    fn self_match_allowed() {
        let mut book = OrderBook::new();
        book.process_message(&Message::limit(1, 7, Side::Ask, 100, 1), t(0)).unwrap();
        let out = book.process_message(&Message::limit(2, 7, Side::Bid, 100, 1), t(1)).unwrap();
        assert_eq!(out.trades.len(), 1);
    }

    #[test]
    fn zero_qty_rejected() {
        let mut book = OrderBook::new();
        let err = book.process_message(&Message::limit(1, 0, Side::Bid, 100, 0), t(0)).unwrap_err();
        assert_eq!(err, BookError::ZeroQty(OrderId(1)));
    }

    #[test]
    fn snapshot_is_stable_copy() {
        let mut book = OrderBook::new();
        assert_eq!(book.snapshot(), BookSnapshot::default());
        book.process_message(&Message::limit(1, 0, Side::Bid, 100, 10), t(0)).unwrap();
        let a = book.snapshot();
        let b = book.snapshot();
        assert_eq!(a, b);
        assert_eq!(a.bids.len(), 1);
        assert_eq!(a.bids[0].orders[0].qty, 10);
        assert!(a.asks.is_empty());
    }

    #[test]
    fn batch_single_message_matches_continuous() {
        let mut a = OrderBook::new();
        let mut b = OrderBook::new();
        for book in [&mut a, &mut b] {
            book.process_message(&Message::limit(1, 0, Side::Ask, 100, 3), t(0)).unwrap();
        }
        let msg = Message::limit(2, 1, Side::Bid, 100, 2);
        let cont = a.process_at(&msg, t(5), t(10)).unwrap();
        let mut rng = RngStream::new(1, "batch");
        let window = BatchWindow { start: t(0), end: t(10) };
        let batch = b.batch_process(window, vec![(msg, t(5))], &mut rng).unwrap();
        assert_eq!(batch, vec![(0, cont)]);
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn batch_rejects_out_of_window() {
        let mut book = OrderBook::new();
        let mut rng = RngStream::new(1, "batch");
        let window = BatchWindow { start: t(10), end: t(20) };
        let err = book
            .batch_process(window, vec![(Message::limit(1, 0, Side::Bid, 1, 1), t(20))], &mut rng)
            .unwrap_err();
        assert!(matches!(err, BookError::OutsideWindow { .. }));
    }

    #[test]
    fn trades_csv_layout() {
        let trades = [Trade {
            taker_order: OrderId(3),
            maker_order: OrderId(1),
            taker_participant: ParticipantId(0),
            maker_participant: ParticipantId(1),
            taker_side: Side::Bid,
            price: 100,
            qty: 2,
            at: t(42),
        }];
        let mut buf = Vec::new();
        write_trades_csv(&trades, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_ns,taker_id,maker_id,price_ticks,qty\n42,3,1,100,2\n"
        );
    }
}
