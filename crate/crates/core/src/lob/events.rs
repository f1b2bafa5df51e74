use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{AgentId, OrderId, Price, Qty, Side, TimeNs};

/// The six-letter order book event alphabet (K = 6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BookEventKind {
    LimitBuy,
    LimitSell,
    MarketBuy,
    MarketSell,
    CancelPartial,
    CancelFull,
}

pub const EVENT_ALPHABET: usize = 6;

impl BookEventKind {
    pub const ALL: [BookEventKind; EVENT_ALPHABET] = [
        BookEventKind::LimitBuy,
        BookEventKind::LimitSell,
        BookEventKind::MarketBuy,
        BookEventKind::MarketSell,
        BookEventKind::CancelPartial,
        BookEventKind::CancelFull,
    ];

    /// Stable 0-based index into the event alphabet.
    pub fn index(self) -> usize {
        match self {
            BookEventKind::LimitBuy => 0,
            BookEventKind::LimitSell => 1,
            BookEventKind::MarketBuy => 2,
            BookEventKind::MarketSell => 3,
            BookEventKind::CancelPartial => 4,
            BookEventKind::CancelFull => 5,
        }
    }

    pub fn from_index(idx: usize) -> Option<BookEventKind> {
        BookEventKind::ALL.get(idx).copied()
    }
}

impl fmt::Display for BookEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BookEventKind::LimitBuy => "LimitBuy",
            BookEventKind::LimitSell => "LimitSell",
            BookEventKind::MarketBuy => "MarketBuy",
            BookEventKind::MarketSell => "MarketSell",
            BookEventKind::CancelPartial => "CancelPartial",
            BookEventKind::CancelFull => "CancelFull",
        };
        f.write_str(s)
    }
}

impl FromStr for BookEventKind {
    type Err = EventCsvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "LimitBuy" => BookEventKind::LimitBuy,
            "LimitSell" => BookEventKind::LimitSell,
            "MarketBuy" => BookEventKind::MarketBuy,
            "MarketSell" => BookEventKind::MarketSell,
            "CancelPartial" => BookEventKind::CancelPartial,
            "CancelFull" => BookEventKind::CancelFull,
            other => return Err(EventCsvError::BadKind(other.to_string())),
        })
    }
}

/// One append-only log entry. `agent_id` is kept in memory for replay and
/// accounting; the CSV export carries the documented six columns only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookEvent {
    pub time_ns: TimeNs,
    pub kind: BookEventKind,
    pub order_id: OrderId,
    pub agent_id: AgentId,
    pub side: Side,
    pub price_ticks: Option<Price>,
    pub quantity: Qty,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventCsvError {
    #[error("unknown event kind '{0}'")]
    BadKind(String),
    #[error("line {0}: expected 6 fields")]
    BadShape(usize),
    #[error("line {0}: bad field '{1}'")]
    BadField(usize, String),
}

pub const EVENT_CSV_HEADER: &str = "time_ns,kind,order_id,side,price_ticks,quantity";

/// Serialize the event log as `time_ns,kind,order_id,side,price_ticks,quantity`.
pub fn export_event_log_csv(events: &[BookEvent]) -> String {
    let mut out = String::from(EVENT_CSV_HEADER);
    out.push('\n');
    for ev in events {
        let price = ev
            .price_ticks
            .map(|p| p.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            ev.time_ns,
            ev.kind,
            ev.order_id,
            ev.side.as_char(),
            price,
            ev.quantity
        ));
    }
    out
}

/// Parse the CSV export back into events. Agent ids are not part of the
/// format and come back as 0.
pub fn parse_event_log_csv(text: &str) -> Result<Vec<BookEvent>, EventCsvError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line == EVENT_CSV_HEADER {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(EventCsvError::BadShape(i + 1));
        }
        let bad = |f: &str| EventCsvError::BadField(i + 1, f.to_string());
        let time_ns: TimeNs = fields[0].parse().map_err(|_| bad(fields[0]))?;
        let kind: BookEventKind = fields[1].parse()?;
        let order_id: OrderId = fields[2].parse().map_err(|_| bad(fields[2]))?;
        let side = match fields[3] {
            "B" => Side::Buy,
            "S" => Side::Sell,
            other => return Err(bad(other)),
        };
        let price_ticks = if fields[4].is_empty() {
            None
        } else {
            Some(fields[4].parse().map_err(|_| bad(fields[4]))?)
        };
        let quantity: Qty = fields[5].parse().map_err(|_| bad(fields[5]))?;
        events.push(BookEvent {
            time_ns,
            kind,
            order_id,
            agent_id: 0,
            side,
            price_ticks,
            quantity,
        });
    }
    Ok(events)
}
