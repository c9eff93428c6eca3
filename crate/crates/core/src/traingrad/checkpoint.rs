//! Binary parameter dump.
//!
//! All integers little-endian:
//!
//! ```text
//! magic    8 bytes  "PSPKCKPT"
//! version  u32      1
//! count    u32
//! count × entry:
//!   name_len u16, name (UTF-8)
//!   group    u8     0 weight, 1 bias, 2 neuron
//!   ndim     u8     >= 1
//!   dims     ndim × u32
//!   values   prod(dims) × f64 (IEEE-754 bits)
//! ```
//!
//! No trailing bytes are allowed. Values round-trip bit-exactly.

use std::path::Path;

use super::model::{Model, ParamGroup};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PSPKCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub group: ParamGroup,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub entries: Vec<CheckpointEntry>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::malformed(
                "checkpoint",
                format!("truncated at byte {}", self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("two bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("four bytes"),
        ))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            entries: model
                .params()
                .into_iter()
                .map(|(name, group, tensor)| CheckpointEntry {
                    name,
                    group,
                    tensor: tensor.clone(),
                })
                .collect(),
        }
    }

    /// Copy stored values into `model`. Names, order and shapes must match.
    pub fn apply(&self, model: &mut Model) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = model
            .params()
            .iter()
            .map(|(n, _, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if expected.len() != self.entries.len() {
            return Err(Error::shape(format!(
                "checkpoint has {} tensors, model has {}",
                self.entries.len(),
                expected.len()
            )));
        }
        for (e, (name, shape)) in self.entries.iter().zip(&expected) {
            if &e.name != name || e.tensor.shape() != &shape[..] {
                return Err(Error::shape(format!(
                    "checkpoint entry {} {:?} does not match model {name} {shape:?}",
                    e.name,
                    e.tensor.shape()
                )));
            }
        }
        for (dst, e) in model.params_mut().into_iter().zip(&self.entries) {
            *dst = e.tensor.clone();
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(
            &u32::try_from(self.entries.len())
                .map_err(|_| Error::param("too many tensors"))?
                .to_le_bytes(),
        );
        for e in &self.entries {
            let name = e.name.as_bytes();
            let len =
                u16::try_from(name.len()).map_err(|_| Error::param("tensor name too long"))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name);
            out.push(e.group.code());
            let shape = e.tensor.shape();
            out.push(u8::try_from(shape.len()).map_err(|_| Error::param("too many dimensions"))?);
            for &d in shape {
                out.extend_from_slice(
                    &u32::try_from(d)
                        .map_err(|_| Error::param("dimension too large"))?
                        .to_le_bytes(),
                );
            }
            for v in e.tensor.data() {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::malformed("checkpoint", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::malformed(
                "checkpoint",
                format!("unsupported version {version}"),
            ));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::malformed("checkpoint", "tensor name is not UTF-8"))?
                .to_string();
            let group = ParamGroup::from_code(r.u8()?)
                .ok_or_else(|| Error::malformed("checkpoint", "unknown parameter group"))?;
            let ndim = r.u8()? as usize;
            if ndim == 0 {
                return Err(Error::malformed("checkpoint", "tensor with no dimensions"));
            }
            let mut shape = Vec::with_capacity(ndim);
            let mut n: usize = 1;
            for _ in 0..ndim {
                let d = r.u32()? as usize;
                n = n
                    .checked_mul(d)
                    .ok_or_else(|| Error::malformed("checkpoint", "tensor size overflows"))?;
                shape.push(d);
            }
            if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
                return Err(Error::malformed(
                    "checkpoint",
                    format!("truncated data for {name}"),
                ));
            }
            let data = r
                .take(n * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("eight bytes"))))
                .collect();
            let tensor = Tensor::new(shape, data)
                .map_err(|e| Error::malformed("checkpoint", e.to_string()))?;
            entries.push(CheckpointEntry {
                name,
                group,
                tensor,
            });
        }
        if r.remaining() != 0 {
            return Err(Error::malformed(
                "checkpoint",
                format!("{} trailing bytes", r.remaining()),
            ));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traingrad::model::{Architecture, BlockMode, ModelConfig};
    use crate::traingrad::SurrogateSpec;
    use proptest::prelude::*;

    fn model(seed: u64) -> Model {
        Model::new(
            ModelConfig {
                architecture: Architecture::SdTcm(BlockMode::Bidirectional),
                input_dim: 1,
                width: 3,
                depth: 2,
                classes: 2,
                v_th: 1.0,
                spatial_v_th: 1.0,
                delta_range: (0.01, 0.1),
                theta_range: (0.0, 1.0),
                tau_init: 2.0,
                surrogate: SurrogateSpec::default(),
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn model_round_trip() {
        let src = model(1);
        let bytes = Checkpoint::from_model(&src).encode().unwrap();
        let mut dst = model(2);
        assert_ne!(src, dst);
        Checkpoint::decode(&bytes).unwrap().apply(&mut dst).unwrap();
        assert_eq!(src, dst);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = Checkpoint::from_model(&model(3));
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = Checkpoint::from_model(&model(1)).encode().unwrap();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::decode(&magic).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(Checkpoint::decode(&version).is_err());
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let ckpt = Checkpoint::from_model(&model(1));
        let mut other = Model::new(
            ModelConfig {
                width: 4,
                ..model(1).config
            },
            0,
        )
        .unwrap();
        assert!(ckpt.apply(&mut other).is_err());
    }

    proptest! {
        #[test]
        fn values_round_trip_bit_exactly(bits in prop::collection::vec(any::<u64>(), 1..40), name in "[a-z.]{0,20}") {
            let data: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
            let ckpt = Checkpoint {
                entries: vec![CheckpointEntry {
                    name,
                    group: ParamGroup::Neuron,
                    tensor: Tensor::new(vec![data.len()], data).unwrap(),
                }],
            };
            let back = Checkpoint::decode(&ckpt.encode().unwrap()).unwrap();
            let a: Vec<u64> = ckpt.entries[0].tensor.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.entries[0].tensor.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(&ckpt.entries[0].name, &back.entries[0].name);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = Checkpoint::decode(&bytes);
        }
    }
}
