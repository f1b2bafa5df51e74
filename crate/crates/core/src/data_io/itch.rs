use thiserror::Error;

/// Supported order/trade message subset of the exchange binary feed. All
/// integers are big-endian; timestamps are 6-byte nanoseconds since
/// midnight; symbols are 8 bytes, space-padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItchMessage {
    /// 'A' add order (anonymous).
    AddOrder(AddOrder),
    /// 'F' add order with attribution (4-byte MPID suffix).
    AddOrderAttributed(AddOrder, [u8; 4]),
    /// 'E' order executed.
    Executed {
        timestamp_ns: u64,
        order_ref: u64,
        shares: u32,
        match_number: u64,
    },
    /// 'C' order executed with price.
    ExecutedWithPrice {
        timestamp_ns: u64,
        order_ref: u64,
        shares: u32,
        match_number: u64,
        printable: bool,
        price: u32,
    },
    /// 'X' order cancel (partial).
    Cancel {
        timestamp_ns: u64,
        order_ref: u64,
        cancelled_shares: u32,
    },
    /// 'D' order delete.
    Delete { timestamp_ns: u64, order_ref: u64 },
    /// 'U' order replace.
    Replace {
        timestamp_ns: u64,
        original_ref: u64,
        new_ref: u64,
        shares: u32,
        price: u32,
    },
    /// 'P' non-cross trade (hidden liquidity execution).
    Trade {
        timestamp_ns: u64,
        order_ref: u64,
        side_sell: bool,
        shares: u32,
        symbol: [u8; 8],
        price: u32,
        match_number: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddOrder {
    pub timestamp_ns: u64,
    pub order_ref: u64,
    pub side_sell: bool,
    pub shares: u32,
    pub symbol: [u8; 8],
    /// Unsigned price in 1e-4 currency units.
    pub price: u32,
}

impl ItchMessage {
    pub fn timestamp_ns(&self) -> u64 {
        match self {
            ItchMessage::AddOrder(a) | ItchMessage::AddOrderAttributed(a, _) => a.timestamp_ns,
            ItchMessage::Executed { timestamp_ns, .. }
            | ItchMessage::ExecutedWithPrice { timestamp_ns, .. }
            | ItchMessage::Cancel { timestamp_ns, .. }
            | ItchMessage::Delete { timestamp_ns, .. }
            | ItchMessage::Replace { timestamp_ns, .. }
            | ItchMessage::Trade { timestamp_ns, .. } => *timestamp_ns,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ItchError {
    #[error("truncated record at byte offset {0}")]
    Truncated(usize),
    #[error("record length {len} does not match type '{msg_type}' at byte offset {offset}")]
    BadLength {
        offset: usize,
        msg_type: char,
        len: usize,
    },
    #[error("invalid side byte {0:#x} at byte offset {1}")]
    BadSide(u8, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseStats {
    pub parsed: usize,
    /// Records of unsupported types, skipped.
    pub skipped: usize,
}

// payload sizes (including the type byte) for the supported types
fn expected_len(msg_type: u8) -> Option<usize> {
    Some(match msg_type {
        b'A' => 36,
        b'F' => 40,
        b'E' => 31,
        b'C' => 36,
        b'X' => 23,
        b'D' => 19,
        b'U' => 35,
        b'P' => 44,
        _ => return None,
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    fn u16(&mut self) -> u16 {
        u16::from_be_bytes(self.take::<2>())
    }

    fn u32(&mut self) -> u32 {
        u32::from_be_bytes(self.take::<4>())
    }

    fn u64(&mut self) -> u64 {
        u64::from_be_bytes(self.take::<8>())
    }

    /// 6-byte big-endian timestamp.
    fn ts48(&mut self) -> u64 {
        let b = self.take::<6>();
        let mut v = 0u64;
        for x in b {
            v = (v << 8) | x as u64;
        }
        v
    }
}

fn parse_side(byte: u8, offset: usize) -> Result<bool, ItchError> {
    match byte {
        b'B' => Ok(false),
        b'S' => Ok(true),
        other => Err(ItchError::BadSide(other, offset)),
    }
}

/// Parse a length-prefixed binary feed: each record is a 2-byte big-endian
/// payload length followed by the payload whose first byte is the message
/// type. Unsupported types are counted and skipped; structural damage is an
/// error carrying the byte offset.
pub fn parse_itch(bytes: &[u8]) -> Result<(Vec<ItchMessage>, ParseStats), ItchError> {
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    let mut pos = 0usize;
    while pos < bytes.len() {
        if pos + 2 > bytes.len() {
            return Err(ItchError::Truncated(pos));
        }
        let len = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        let start = pos + 2;
        if len == 0 {
            return Err(ItchError::BadLength {
                offset: pos,
                msg_type: '?',
                len,
            });
        }
        if start + len > bytes.len() {
            return Err(ItchError::Truncated(pos));
        }
        let payload = &bytes[start..start + len];
        let msg_type = payload[0];
        match expected_len(msg_type) {
            None => {
                stats.skipped += 1;
                pos = start + len;
                continue;
            }
            Some(want) if want != len => {
                return Err(ItchError::BadLength {
                    offset: pos,
                    msg_type: msg_type as char,
                    len,
                });
            }
            Some(_) => {}
        }

        let mut c = Cursor {
            buf: payload,
            pos: 1,
        };
        let _stock_locate = c.u16();
        let _tracking = c.u16();
        let timestamp_ns = c.ts48();
        let msg = match msg_type {
            b'A' | b'F' => {
                let order_ref = c.u64();
                let side_byte = c.take::<1>()[0];
                let side_sell = parse_side(side_byte, start + c.pos - 1)?;
                let shares = c.u32();
                let symbol = c.take::<8>();
                let price = c.u32();
                let add = AddOrder {
                    timestamp_ns,
                    order_ref,
                    side_sell,
                    shares,
                    symbol,
                    price,
                };
                if msg_type == b'A' {
                    ItchMessage::AddOrder(add)
                } else {
                    ItchMessage::AddOrderAttributed(add, c.take::<4>())
                }
            }
            b'E' => ItchMessage::Executed {
                timestamp_ns,
                order_ref: c.u64(),
                shares: c.u32(),
                match_number: c.u64(),
            },
            b'C' => {
                let order_ref = c.u64();
                let shares = c.u32();
                let match_number = c.u64();
                let printable = c.take::<1>()[0] == b'Y';
                let price = c.u32();
                ItchMessage::ExecutedWithPrice {
                    timestamp_ns,
                    order_ref,
                    shares,
                    match_number,
                    printable,
                    price,
                }
            }
            b'X' => ItchMessage::Cancel {
                timestamp_ns,
                order_ref: c.u64(),
                cancelled_shares: c.u32(),
            },
            b'D' => ItchMessage::Delete {
                timestamp_ns,
                order_ref: c.u64(),
            },
            b'U' => ItchMessage::Replace {
                timestamp_ns,
                original_ref: c.u64(),
                new_ref: c.u64(),
                shares: c.u32(),
                price: c.u32(),
            },
            b'P' => {
                let order_ref = c.u64();
                let side_byte = c.take::<1>()[0];
                let side_sell = parse_side(side_byte, start + c.pos - 1)?;
                ItchMessage::Trade {
                    timestamp_ns,
                    order_ref,
                    side_sell,
                    shares: c.u32(),
                    symbol: c.take::<8>(),
                    price: c.u32(),
                    match_number: c.u64(),
                }
            }
            _ => unreachable!("expected_len filtered unsupported types"),
        };
        out.push(msg);
        stats.parsed += 1;
        pos = start + len;
    }
    Ok((out, stats))
}

/// Serialize messages back to the length-prefixed binary layout. Test
/// fixtures and synthetic feeds are built through this.
pub fn serialize_itch(messages: &[ItchMessage]) -> Vec<u8> {
    let mut out = Vec::new();
    for msg in messages {
        let mut payload: Vec<u8> = Vec::new();
        let push_header = |payload: &mut Vec<u8>, t: u8, ts: u64| {
            payload.push(t);
            payload.extend(0u16.to_be_bytes()); // stock locate
            payload.extend(0u16.to_be_bytes()); // tracking number
            payload.extend(&ts.to_be_bytes()[2..8]);
        };
        match msg {
            ItchMessage::AddOrder(a) | ItchMessage::AddOrderAttributed(a, _) => {
                let t = if matches!(msg, ItchMessage::AddOrder(_)) {
                    b'A'
                } else {
                    b'F'
                };
                push_header(&mut payload, t, a.timestamp_ns);
                payload.extend(a.order_ref.to_be_bytes());
                payload.push(if a.side_sell { b'S' } else { b'B' });
                payload.extend(a.shares.to_be_bytes());
                payload.extend(a.symbol);
                payload.extend(a.price.to_be_bytes());
                if let ItchMessage::AddOrderAttributed(_, mpid) = msg {
                    payload.extend(mpid);
                }
            }
            ItchMessage::Executed {
                timestamp_ns,
                order_ref,
                shares,
                match_number,
            } => {
                push_header(&mut payload, b'E', *timestamp_ns);
                payload.extend(order_ref.to_be_bytes());
                payload.extend(shares.to_be_bytes());
                payload.extend(match_number.to_be_bytes());
            }
            ItchMessage::ExecutedWithPrice {
                timestamp_ns,
                order_ref,
                shares,
                match_number,
                printable,
                price,
            } => {
                push_header(&mut payload, b'C', *timestamp_ns);
                payload.extend(order_ref.to_be_bytes());
                payload.extend(shares.to_be_bytes());
                payload.extend(match_number.to_be_bytes());
                payload.push(if *printable { b'Y' } else { b'N' });
                payload.extend(price.to_be_bytes());
            }
            ItchMessage::Cancel {
                timestamp_ns,
                order_ref,
                cancelled_shares,
            } => {
                push_header(&mut payload, b'X', *timestamp_ns);
                payload.extend(order_ref.to_be_bytes());
                payload.extend(cancelled_shares.to_be_bytes());
            }
            ItchMessage::Delete {
                timestamp_ns,
                order_ref,
            } => {
                push_header(&mut payload, b'D', *timestamp_ns);
                payload.extend(order_ref.to_be_bytes());
            }
            ItchMessage::Replace {
                timestamp_ns,
                original_ref,
                new_ref,
                shares,
                price,
            } => {
                push_header(&mut payload, b'U', *timestamp_ns);
                payload.extend(original_ref.to_be_bytes());
                payload.extend(new_ref.to_be_bytes());
                payload.extend(shares.to_be_bytes());
                payload.extend(price.to_be_bytes());
            }
            ItchMessage::Trade {
                timestamp_ns,
                order_ref,
                side_sell,
                shares,
                symbol,
                price,
                match_number,
            } => {
                push_header(&mut payload, b'P', *timestamp_ns);
                payload.extend(order_ref.to_be_bytes());
                payload.push(if *side_sell { b'S' } else { b'B' });
                payload.extend(shares.to_be_bytes());
                payload.extend(symbol);
                payload.extend(price.to_be_bytes());
                payload.extend(match_number.to_be_bytes());
            }
        }
        out.extend((payload.len() as u16).to_be_bytes());
        out.extend(payload);
    }
    out
}

pub fn symbol_from(s: &str) -> [u8; 8] {
    let mut out = [b' '; 8];
    for (i, b) in s.bytes().take(8).enumerate() {
        out[i] = b;
    }
    out
}
