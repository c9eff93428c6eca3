#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::io::{decode_bench_csv, encode_bench_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = decode_bench_csv(data) {
        if !records.is_empty() {
            let bytes = encode_bench_csv(&records).unwrap();
            assert_eq!(decode_bench_csv(&bytes).unwrap(), records);
        }
    }
});
