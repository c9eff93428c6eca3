use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64;

use super::idx::{decode_idx_images, decode_idx_labels};
use crate::error::{Error, Result};
use crate::traingrad::Dataset;

/// Environment variable naming the MNIST directory.
pub const DATA_DIR_ENV: &str = "PARSPIKE_DATA_DIR";

/// `(images, labels)` paths of `split` (`train` or `t10k`) in `dir`, with or
/// without a `.gz` suffix.
pub fn locate_mnist(dir: &Path, split: &str) -> Option<(PathBuf, PathBuf)> {
    let pick = |stem: String| {
        [dir.join(&stem), dir.join(format!("{stem}.gz"))]
            .into_iter()
            .find(|p| p.is_file())
    };
    Some((
        pick(format!("{split}-images-idx3-ubyte"))?,
        pick(format!("{split}-labels-idx1-ubyte"))?,
    ))
}

/// Fisher–Yates over `0..n`: for `i` from `n − 1` down to 1, swap `i` with
/// `j = next_u64() % (i + 1)`, drawing from SplitMix64 seeded with `seed`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}

/// Build a pixel-by-pixel classification set from IDX bytes.
///
/// Pixels are scaled to `[0, 1]` in row-major order. With `permute_seed`,
/// position `k` of every sequence holds pixel `permutation(..)[k]`.
pub fn ingest_mnist_bytes(
    images: &[u8],
    labels: &[u8],
    permute_seed: Option<u64>,
    limit: Option<usize>,
) -> Result<Dataset> {
    let images = decode_idx_images(images)?;
    let labels = decode_idx_labels(labels)?;
    if images.count != labels.len() {
        return Err(Error::malformed(
            "IDX",
            format!("{} images but {} labels", images.count, labels.len()),
        ));
    }
    let len = images.rows * images.cols;
    if len == 0 {
        return Err(Error::malformed("IDX images", "empty images"));
    }
    let n = limit.map_or(images.count, |l| l.min(images.count));
    let order: Vec<usize> = match permute_seed {
        Some(s) => permutation(len, s),
        None => (0..len).collect(),
    };
    let mut inputs = Vec::with_capacity(n * len);
    for i in 0..n {
        let img = images.image(i);
        inputs.extend(order.iter().map(|&k| img[k] as f64 / 255.0));
    }
    let labels = labels[..n].iter().map(|&l| l as usize).collect();
    Dataset::new(len, 1, 10, inputs, labels)
}

pub fn ingest_mnist(
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    permute_seed: Option<u64>,
    limit: Option<usize>,
) -> Result<Dataset> {
    let images = std::fs::read(image_path)?;
    let labels = std::fs::read(label_path)?;
    ingest_mnist_bytes(&images, &labels, permute_seed, limit)
}
