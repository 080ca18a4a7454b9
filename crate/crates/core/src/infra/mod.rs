//! Everything between a participant's machine and the matching engine, and back.

pub mod cross_book;
pub mod feed;
pub mod fragment;
pub mod latency;
pub mod link;
pub mod switch;

pub use cross_book::{route_cross_book, RouteError};
pub use feed::{disseminate, FeedError, FeedPolicy};
pub use fragment::{
    fragment_and_send, fragment_bytes, fragment_count, AbandonReason, EngineIngress, Fragment, FragmentError,
    FragmentOutcome, IngressEvent, IngressKey, TimestampPolicy,
};
pub use latency::{Jitter, LatencyModel};
pub use link::{Gateway, Link, TransitError, WireMessage};
pub use switch::{switch_forward, Forwarded, SwitchError};
