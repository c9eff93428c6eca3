#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::io::decode_idx_images;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_idx_images(data) {
        assert_eq!(img.pixels.len(), img.count * img.rows * img.cols);
    }
});
