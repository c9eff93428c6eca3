#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::io::ingest_mnist_bytes;

// First byte picks the split point between the image and label files.
fuzz_target!(|data: &[u8]| {
    let Some((&cut, rest)) = data.split_first() else { return };
    let cut = (cut as usize).min(rest.len());
    let (images, labels) = rest.split_at(rest.len() - cut);
    if let Ok(d) = ingest_mnist_bytes(images, labels, Some(1), Some(64)) {
        assert!(d.len() <= 64);
    }
});
