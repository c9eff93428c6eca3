#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::io::{decode_bench_json, encode_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = decode_bench_json(data) {
        if !records.is_empty() {
            let bytes = encode_json(&records).unwrap();
            assert_eq!(decode_bench_json(&bytes).unwrap(), records);
        }
    }
});
