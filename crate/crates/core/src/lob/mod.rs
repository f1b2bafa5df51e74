//! Limit order book with price-time priority matching.
//!
//! Prices are signed integers in ticks; currency conversion happens only at
//! I/O boundaries. The book keeps two price-indexed sides of FIFO queues, a
//! monotone sequence counter and an append-only event log whose replay
//! reproduces the book state exactly.

mod book;
mod events;

pub use book::{BookSnapshot, CancelOutcome, LimitOutcome, MarketOutcome, OrderBook, Quotes};
pub use events::{export_event_log_csv, parse_event_log_csv, BookEvent, BookEventKind};

use thiserror::Error;

pub type OrderId = u64;
pub type AgentId = u64;
/// Price in ticks.
pub type Price = i64;
/// Quantity in shares.
pub type Qty = u64;
/// Nanoseconds since session midnight.
pub type TimeNs = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::Buy => 'B',
            Side::Sell => 'S',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    Limit,
    Market,
}

/// A resting or incoming order. Market orders carry no price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub order_id: OrderId,
    pub agent_id: AgentId,
    pub side: Side,
    pub price_ticks: Option<Price>,
    pub quantity: Qty,
    pub remaining: Qty,
    pub submit_time: TimeNs,
    pub kind: OrderKind,
}

impl Order {
    pub fn limit(
        order_id: OrderId,
        agent_id: AgentId,
        side: Side,
        price_ticks: Price,
        quantity: Qty,
        submit_time: TimeNs,
    ) -> Self {
        Order {
            order_id,
            agent_id,
            side,
            price_ticks: Some(price_ticks),
            quantity,
            remaining: quantity,
            submit_time,
            kind: OrderKind::Limit,
        }
    }
}

/// One execution. The price always equals the maker's resting price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fill {
    pub maker_order_id: OrderId,
    pub taker_order_id: OrderId,
    pub maker_agent_id: AgentId,
    pub taker_agent_id: AgentId,
    pub price_ticks: Price,
    pub quantity: Qty,
    pub time_ns: TimeNs,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LobError {
    #[error("duplicate order id {0}")]
    DuplicateOrderId(OrderId),
    #[error("order quantity must be positive")]
    ZeroQuantity,
    #[error("limit price {0} is off the tick grid (must be >= 1)")]
    BadPrice(Price),
    #[error("expected a {expected:?} order")]
    WrongKind { expected: OrderKind },
    #[error("order {0} not found")]
    NotFound(OrderId),
}
