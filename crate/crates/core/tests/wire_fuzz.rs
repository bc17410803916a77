mod common;

use common::fuzz_decoder;
use proptest::prelude::*;
use rlframe_core::wire::{decode_f64, encode_f64, Frame};

#[test]
fn decoder_survives_a_hundred_thousand_fuzz_frames() {
    let accepted = fuzz_decoder(100_000, 1);
    assert!(accepted < 100_000);
}

proptest! {
    #[test]
    fn any_f64_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back = decode_f64(&encode_f64(x), "x").unwrap();
        prop_assert!(back.to_bits() == bits || (x.is_nan() && back.is_nan()));
    }

    #[test]
    fn arbitrary_strings_never_panic(s in ".{0,200}") {
        let _ = Frame::decode(&s);
    }
}
