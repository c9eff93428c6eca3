#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::io::decode_idx_labels;

fuzz_target!(|data: &[u8]| {
    let _ = decode_idx_labels(data);
});
