//! Replays the checked-in fuzz corpus through the same properties the fuzz
//! targets assert, so regressions show up without a nightly toolchain.

use std::path::PathBuf;

use parspike::config::RunConfig;
use parspike::io::{
    decode_bench_csv, decode_bench_json, decode_idx_images, decode_idx_labels, encode_bench_csv,
    encode_json, ingest_mnist_bytes,
};
use parspike::traingrad::Checkpoint;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn idx_images() {
    for (name, data) in corpus("idx_images") {
        match decode_idx_images(&data) {
            Ok(img) => assert_eq!(img.pixels.len(), img.count * img.rows * img.cols, "{name}"),
            Err(_) => assert!(name.contains("truncated"), "{name} should decode"),
        }
    }
}

#[test]
fn idx_labels() {
    for (name, data) in corpus("idx_labels") {
        decode_idx_labels(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn mnist_pair() {
    for (name, data) in corpus("mnist_pair") {
        let (&cut, rest) = data.split_first().unwrap();
        let cut = (cut as usize).min(rest.len());
        let (images, labels) = rest.split_at(rest.len() - cut);
        let d = ingest_mnist_bytes(images, labels, Some(1), Some(64))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(d.len() <= 64);
    }
}

#[test]
fn checkpoint() {
    for (name, data) in corpus("checkpoint") {
        let c = Checkpoint::decode(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(c.encode().unwrap(), data, "{name}");
    }
}

#[test]
fn run_config() {
    for (name, data) in corpus("run_config") {
        let cfg = RunConfig::from_toml(std::str::from_utf8(&data).unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap(), "{name}");
    }
}

#[test]
fn bench_csv() {
    for (name, data) in corpus("bench_csv") {
        let records = decode_bench_csv(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        if !records.is_empty() {
            assert_eq!(
                decode_bench_csv(&encode_bench_csv(&records).unwrap()).unwrap(),
                records,
                "{name}"
            );
        }
    }
}

#[test]
fn bench_json() {
    for (name, data) in corpus("bench_json") {
        let records = decode_bench_json(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!records.is_empty(), "{name}");
        assert_eq!(
            decode_bench_json(&encode_json(&records).unwrap()).unwrap(),
            records,
            "{name}"
        );
    }
}
