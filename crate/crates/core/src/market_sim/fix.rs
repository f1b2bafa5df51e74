use thiserror::Error;

use crate::lob::{Price, Qty, Side, TimeNs};

pub const SOH: u8 = 0x01;

pub mod tags {
    pub const CHECKSUM: u32 = 10;
    pub const CL_ORD_ID: u32 = 11;
    pub const EXEC_PRICE: u32 = 31;
    pub const EXEC_QTY: u32 = 32;
    pub const MSG_TYPE: u32 = 35;
    pub const ORDER_QTY: u32 = 38;
    pub const ORD_TYPE: u32 = 40;
    pub const PRICE: u32 = 44;
    pub const SIDE: u32 = 54;
    pub const SYMBOL: u32 = 55;
    pub const TRANSACT_TIME: u32 = 60;
    pub const LEAVES_QTY: u32 = 151;
}

/// Tag-value message. Field order is preserved and unknown tags ride along,
/// so decode(encode(m)) == m and encode(decode(b)) == b.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixMessage {
    pub fields: Vec<(u32, String)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixError {
    #[error("malformed field at byte offset {0}")]
    Malformed(usize),
    #[error("missing required tag {0}")]
    MissingTag(u32),
    #[error("unknown message type '{0}'")]
    UnknownMsgType(String),
    #[error("checksum mismatch: computed {computed:03}, message says {stated}")]
    BadChecksum { computed: u8, stated: String },
    #[error("bad value for tag {tag}: '{value}'")]
    BadValue { tag: u32, value: String },
}

impl FixMessage {
    pub fn new(fields: Vec<(u32, String)>) -> Self {
        FixMessage { fields }
    }

    pub fn get(&self, tag: u32) -> Option<&str> {
        self.fields
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, v)| v.as_str())
    }

    pub fn msg_type(&self) -> Option<&str> {
        self.get(tags::MSG_TYPE)
    }

    fn require(&self, tag: u32) -> Result<&str, FixError> {
        self.get(tag).ok_or(FixError::MissingTag(tag))
    }

    fn require_parsed<T: std::str::FromStr>(&self, tag: u32) -> Result<T, FixError> {
        let raw = self.require(tag)?;
        raw.parse().map_err(|_| FixError::BadValue {
            tag,
            value: raw.to_string(),
        })
    }

    /// Validate required tags for the known message types (D new order,
    /// F cancel, 8 execution report).
    pub fn validate(&self) -> Result<(), FixError> {
        match self.msg_type() {
            None => Err(FixError::MissingTag(tags::MSG_TYPE)),
            Some("D") => {
                for tag in [
                    tags::CL_ORD_ID,
                    tags::SYMBOL,
                    tags::SIDE,
                    tags::ORDER_QTY,
                    tags::ORD_TYPE,
                    tags::TRANSACT_TIME,
                ] {
                    self.require(tag)?;
                }
                if self.require(tags::ORD_TYPE)? == "2" {
                    self.require(tags::PRICE)?;
                }
                Ok(())
            }
            Some("F") => {
                self.require(tags::CL_ORD_ID)?;
                self.require(tags::SYMBOL)?;
                Ok(())
            }
            Some("8") => {
                self.require(tags::CL_ORD_ID)?;
                Ok(())
            }
            Some(other) => Err(FixError::UnknownMsgType(other.to_string())),
        }
    }

    pub fn new_order(
        cl_ord_id: u64,
        symbol: &str,
        side: Side,
        qty: Qty,
        price: Option<Price>,
        time_ns: TimeNs,
    ) -> Self {
        let mut fields = vec![
            (tags::MSG_TYPE, "D".to_string()),
            (tags::CL_ORD_ID, cl_ord_id.to_string()),
            (tags::SYMBOL, symbol.to_string()),
            (
                tags::SIDE,
                match side {
                    Side::Buy => "1".to_string(),
                    Side::Sell => "2".to_string(),
                },
            ),
            (tags::ORDER_QTY, qty.to_string()),
            (
                tags::ORD_TYPE,
                if price.is_some() { "2" } else { "1" }.to_string(),
            ),
        ];
        if let Some(p) = price {
            fields.push((tags::PRICE, p.to_string()));
        }
        fields.push((tags::TRANSACT_TIME, time_ns.to_string()));
        FixMessage::new(fields)
    }

    pub fn cancel(cl_ord_id: u64, symbol: &str, qty: Option<Qty>, time_ns: TimeNs) -> Self {
        let mut fields = vec![
            (tags::MSG_TYPE, "F".to_string()),
            (tags::CL_ORD_ID, cl_ord_id.to_string()),
            (tags::SYMBOL, symbol.to_string()),
        ];
        if let Some(q) = qty {
            fields.push((tags::ORDER_QTY, q.to_string()));
        }
        fields.push((tags::TRANSACT_TIME, time_ns.to_string()));
        FixMessage::new(fields)
    }

    pub fn execution_report(
        cl_ord_id: u64,
        symbol: &str,
        side: Side,
        price: Price,
        qty: Qty,
        leaves: Qty,
        time_ns: TimeNs,
    ) -> Self {
        FixMessage::new(vec![
            (tags::MSG_TYPE, "8".to_string()),
            (tags::CL_ORD_ID, cl_ord_id.to_string()),
            (tags::SYMBOL, symbol.to_string()),
            (
                tags::SIDE,
                match side {
                    Side::Buy => "1".to_string(),
                    Side::Sell => "2".to_string(),
                },
            ),
            (tags::EXEC_PRICE, price.to_string()),
            (tags::EXEC_QTY, qty.to_string()),
            (tags::LEAVES_QTY, leaves.to_string()),
            (tags::TRANSACT_TIME, time_ns.to_string()),
        ])
    }

    pub fn parsed_side(&self) -> Result<Side, FixError> {
        match self.require(tags::SIDE)? {
            "1" => Ok(Side::Buy),
            "2" => Ok(Side::Sell),
            other => Err(FixError::BadValue {
                tag: tags::SIDE,
                value: other.to_string(),
            }),
        }
    }

    pub fn parsed_qty(&self) -> Result<Qty, FixError> {
        self.require_parsed(tags::ORDER_QTY)
    }

    pub fn parsed_cl_ord_id(&self) -> Result<u64, FixError> {
        self.require_parsed(tags::CL_ORD_ID)
    }

    pub fn parsed_price(&self) -> Result<Option<Price>, FixError> {
        match self.get(tags::PRICE) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| FixError::BadValue {
                    tag: tags::PRICE,
                    value: raw.to_string(),
                }),
        }
    }

    pub fn parsed_time(&self) -> Result<TimeNs, FixError> {
        self.require_parsed(tags::TRANSACT_TIME)
    }
}

/// Encode as ASCII `tag=value` pairs delimited by 0x01.
pub fn encode_fix(msg: &FixMessage) -> Vec<u8> {
    let mut out = Vec::new();
    for (tag, value) in &msg.fields {
        out.extend(tag.to_string().as_bytes());
        out.push(b'=');
        out.extend(value.as_bytes());
        out.push(SOH);
    }
    out
}

/// Standard modulo-256 checksum over everything before the tag-10 field.
pub fn checksum(bytes_before_tag10: &[u8]) -> u8 {
    bytes_before_tag10
        .iter()
        .fold(0u8, |acc, b| acc.wrapping_add(*b))
}

/// Encode and append a trailing `10=NNN` checksum field.
pub fn encode_fix_with_checksum(msg: &FixMessage) -> Vec<u8> {
    let mut out = encode_fix(msg);
    let ck = checksum(&out);
    out.extend(format!("10={ck:03}").as_bytes());
    out.push(SOH);
    out
}

/// Decode a tag-value byte stream. Unknown tags are preserved; the checksum
/// field, when present, is verified against the preceding bytes. The decoded
/// message is structurally validated for the known message types.
pub fn decode_fix(bytes: &[u8]) -> Result<FixMessage, FixError> {
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let field_start = pos;
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == SOH)
            .map(|off| pos + off)
            .ok_or(FixError::Malformed(field_start))?;
        let field = &bytes[pos..end];
        let eq = field
            .iter()
            .position(|&b| b == b'=')
            .ok_or(FixError::Malformed(field_start))?;
        let tag: u32 = std::str::from_utf8(&field[..eq])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(FixError::Malformed(field_start))?;
        let value = std::str::from_utf8(&field[eq + 1..])
            .map_err(|_| FixError::Malformed(field_start))?
            .to_string();
        if tag == tags::CHECKSUM {
            let computed = checksum(&bytes[..field_start]);
            let stated = value.clone();
            if format!("{computed:03}") != stated {
                return Err(FixError::BadChecksum { computed, stated });
            }
        }
        fields.push((tag, value));
        pos = end + 1;
    }
    let msg = FixMessage::new(fields);
    msg.validate()?;
    Ok(msg)
}
