//! Routing between the nodes of a decentralized book.

use rand::Rng;
use thiserror::Error;

use super::link::Link;
use crate::book::{NewOrder, OrderBook, OrderKind, Side};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("remote book offers no better price than the local book")]
    NoBetterRemotePrice,
}

fn improves(side: Side, candidate: i64, incumbent: i64) -> bool {
    match side {
        Side::Bid => candidate < incumbent,
        Side::Ask => candidate > incumbent,
    }
}

fn crosses(order: &NewOrder, price: i64) -> bool {
    match (order.kind, order.side) {
        (OrderKind::Market, _) => true,
        (OrderKind::Limit { price: limit }, Side::Bid) => price <= limit,
        (OrderKind::Limit { price: limit }, Side::Ask) => price >= limit,
    }
}

/// Forward `order`, received by the local node at `t_local`, to the remote
/// node over `link`. Only legal when the remote book holds the better
/// executable price. Returns the arrival time at the remote engine.
pub fn route_cross_book<R: Rng + ?Sized>(
    order: &NewOrder,
    from_book: &OrderBook,
    to_book: &OrderBook,
    link: &Link,
    t_local: SimTime,
    rng: &mut R,
) -> Result<SimTime, RouteError> {
    let remote = to_book
        .best_opposite(order.side)
        .filter(|&p| crosses(order, p))
        .ok_or(RouteError::NoBetterRemotePrice)?;
    if let Some(local) = from_book.best_opposite(order.side).filter(|&p| crosses(order, p)) {
        if !improves(order.side, remote, local) {
            return Err(RouteError::NoBetterRemotePrice);
        }
    }
    Ok(t_local + link.traverse(None, rng))
}
