//! Property fuzzing of the binary feed parser: arbitrary bytes never panic,
//! structural errors carry in-range offsets, and parse/serialize is an
//! identity on the supported subset.

use proptest::prelude::*;

use hawkmaker_core::data_io::{
    parse_itch, serialize_itch, symbol_from, AddOrder, ItchError, ItchMessage,
};

fn arb_message() -> impl Strategy<Value = ItchMessage> {
    let sym = prop_oneof![Just(symbol_from("TEST")), Just(symbol_from("AAPLLONG"))];
    prop_oneof![
        (any::<u32>(), any::<u64>(), any::<bool>(), 1u32..10_000, sym.clone(), 1u32..5_000_000)
            .prop_map(|(t, r, s, sh, sym, p)| ItchMessage::AddOrder(AddOrder {
                timestamp_ns: t as u64,
                order_ref: r,
                side_sell: s,
                shares: sh,
                symbol: sym,
                price: p,
            })),
        (any::<u32>(), any::<u64>(), 1u32..10_000, any::<u64>()).prop_map(|(t, r, sh, m)| {
            ItchMessage::Executed {
                timestamp_ns: t as u64,
                order_ref: r,
                shares: sh,
                match_number: m,
            }
        }),
        (any::<u32>(), any::<u64>(), 1u32..10_000).prop_map(|(t, r, sh)| ItchMessage::Cancel {
            timestamp_ns: t as u64,
            order_ref: r,
            cancelled_shares: sh,
        }),
        (any::<u32>(), any::<u64>()).prop_map(|(t, r)| ItchMessage::Delete {
            timestamp_ns: t as u64,
            order_ref: r,
        }),
        (any::<u32>(), any::<u64>(), any::<u64>(), 1u32..10_000, 1u32..5_000_000).prop_map(
            |(t, r, n, sh, p)| ItchMessage::Replace {
                timestamp_ns: t as u64,
                original_ref: r,
                new_ref: n,
                shares: sh,
                price: p,
            }
        ),
    ]
}

proptest! {
    #[test]
    fn random_bytes_never_crash(bytes in proptest::collection::vec(any::<u8>(), 0..4096)) {
        match parse_itch(&bytes) {
            Ok(_) => {}
            Err(ItchError::Truncated(off)) => prop_assert!(off <= bytes.len()),
            Err(ItchError::BadLength { offset, .. }) => prop_assert!(offset <= bytes.len()),
            Err(ItchError::BadSide(_, off)) => prop_assert!(off <= bytes.len()),
        }
    }

    #[test]
    fn serialize_then_parse_is_identity(msgs in proptest::collection::vec(arb_message(), 0..40)) {
        let bytes = serialize_itch(&msgs);
        let (back, stats) = parse_itch(&bytes).unwrap();
        prop_assert_eq!(back, msgs.clone());
        prop_assert_eq!(stats.parsed, msgs.len());
        prop_assert_eq!(stats.skipped, 0);
    }
}
