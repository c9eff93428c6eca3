use std::borrow::Cow;
use std::io::Read;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Upper bound on gunzipped size. Full MNIST train images are about 47 MB.
pub const MAX_DECOMPRESSED: u64 = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, image after image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

/// Inflate `bytes` if they start with the gzip magic `1f 8b`.
pub fn maybe_gunzip(bytes: &[u8]) -> Result<Cow<'_, [u8]>> {
    if bytes.len() < 2 || bytes[..2] != [0x1f, 0x8b] {
        return Ok(Cow::Borrowed(bytes));
    }
    let mut out = Vec::new();
    GzDecoder::new(bytes)
        .take(MAX_DECOMPRESSED + 1)
        .read_to_end(&mut out)
        .map_err(|e| Error::malformed("gzip", e.to_string()))?;
    if out.len() as u64 > MAX_DECOMPRESSED {
        return Err(Error::malformed("gzip", "decompressed data too large"));
    }
    Ok(Cow::Owned(out))
}

fn header(bytes: &[u8], magic: u32, what: &'static str) -> Result<Vec<usize>> {
    let dims = (magic & 0xff) as usize;
    let head = 4 + 4 * dims;
    if bytes.len() < head {
        return Err(Error::malformed(
            what,
            format!("truncated header ({} bytes)", bytes.len()),
        ));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("four bytes"));
    let found = word(0);
    if found != magic {
        return Err(Error::malformed(
            what,
            format!("bad magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    Ok((0..dims).map(|d| word(4 + 4 * d) as usize).collect())
}

fn body<'a>(bytes: &'a [u8], dims: &[usize], what: &'static str) -> Result<&'a [u8]> {
    let head = 4 + 4 * dims.len();
    let n = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::malformed(what, "dimensions overflow"))?;
    let data = &bytes[head..];
    match data.len().cmp(&n) {
        std::cmp::Ordering::Less => Err(Error::malformed(
            what,
            format!("truncated: {} of {n} data bytes", data.len()),
        )),
        std::cmp::Ordering::Greater => Err(Error::malformed(
            what,
            format!("{} trailing bytes", data.len() - n),
        )),
        std::cmp::Ordering::Equal => Ok(data),
    }
}

/// Parse an IDX3 (`0x00000803`) image file, gzipped or not.
pub fn decode_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let bytes = maybe_gunzip(bytes)?;
    let dims = header(&bytes, IMAGES_MAGIC, "IDX images")?;
    let pixels = body(&bytes, &dims, "IDX images")?.to_vec();
    Ok(IdxImages {
        count: dims[0],
        rows: dims[1],
        cols: dims[2],
        pixels,
    })
}

/// Parse an IDX1 (`0x00000801`) label file, gzipped or not.
pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let bytes = maybe_gunzip(bytes)?;
    let dims = header(&bytes, LABELS_MAGIC, "IDX labels")?;
    Ok(body(&bytes, &dims, "IDX labels")?.to_vec())
}
