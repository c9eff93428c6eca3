//! File formats: IDX images and labels, MNIST ingestion, CSV/JSON reports.

mod idx;
mod mnist;
mod report;

pub use idx::{decode_idx_images, decode_idx_labels, maybe_gunzip, IdxImages, MAX_DECOMPRESSED};
pub use mnist::{
    ingest_mnist, ingest_mnist_bytes, locate_mnist, permutation, SplitMix64, DATA_DIR_ENV,
};
pub use report::{
    decode_bench_csv, decode_bench_json, emit_report, encode_bench_csv, encode_csv, encode_json,
    BenchRecord, Phase, ReportFormat, RunMode, BENCH_CSV_HEADER,
};
