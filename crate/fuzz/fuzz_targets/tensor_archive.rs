#![no_main]
use libfuzzer_sys::fuzz_target;
use stfm_core::archive::{decode_tensor_series, encode_tensor_series};

fuzz_target!(|data: &[u8]| {
    if let Ok(ts) = decode_tensor_series(data) {
        let again = encode_tensor_series(&ts);
        assert_eq!(decode_tensor_series(&again).unwrap(), ts);
    }
});
