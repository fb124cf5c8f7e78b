//! Binary embedding (`PFEM`) and checkpoint (`PFCK`) files. All integers and
//! scalars are little-endian.
//!
//! PFEM: magic, version u16, dtype u8 (0 = f32), rank u8, dims u32 each,
//! then the row-major payload.
//!
//! PFCK: magic, version u16, tensor count u32, then per tensor: name length
//! u32, UTF-8 name, rank u8, dims u32 each, f32 payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::backbone::{BackboneConfig, StageConfig};
use crate::error::{ensure, Error, Result};
use crate::kernel::Tensor;
use crate::nn::ParamStore;

pub const PFEM_MAGIC: &[u8; 4] = b"PFEM";
pub const PFCK_MAGIC: &[u8; 4] = b"PFCK";
pub const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

/// Checkpoint tensor describing the backbone layout the weights belong to.
pub const META_BACKBONE: &str = "meta.backbone";
/// Checkpoint tensor listing the class count of each auxiliary task head.
pub const META_TASKS: &str = "meta.tasks";

struct Cursor<'b> {
    buf: &'b [u8],
    pos: usize,
}

impl<'b> Cursor<'b> {
    fn take(&mut self, n: usize) -> Result<&'b [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::format(format!("truncated at byte {} (wanted {n} more)", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(Error::format(format!("bad magic {m:?}, expected {:?}", std::str::from_utf8(magic).unwrap_or(""))));
        }
        let v = self.u16()?;
        if v != VERSION {
            return Err(Error::format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn shape_and_payload(&mut self) -> Result<Tensor<f32>> {
        let rank = self.u8()? as usize;
        let dims = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::format("dims overflow"))?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format("payload overflow"))?)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Tensor::new(dims, data)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_shape_and_payload(out: &mut Vec<u8>, t: &Tensor<f32>) -> Result<()> {
    ensure(t.rank() <= u8::MAX as usize, || format!("rank {} does not fit the format", t.rank()))?;
    out.push(t.rank() as u8);
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::contract(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode_embedding(t: &Tensor<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.numel());
    out.extend_from_slice(PFEM_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    put_shape_and_payload(&mut out, t)?;
    Ok(out)
}

pub fn decode_embedding(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    c.header(PFEM_MAGIC)?;
    let dtype = c.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::format(format!("unsupported dtype code {dtype}")));
    }
    let t = c.shape_and_payload()?;
    c.finish()?;
    Ok(t)
}

pub fn encode_checkpoint(params: &ParamStore<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(PFCK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(params.len()).map_err(|_| Error::contract("too many tensors"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        put_shape_and_payload(&mut out, t)?;
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamStore<f32>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    c.header(PFCK_MAGIC)?;
    let count = c.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?).map_err(|e| Error::format(format!("tensor name: {e}")))?;
        if store.contains(name) {
            return Err(Error::format(format!("duplicate tensor {name}")));
        }
        let t = c.shape_and_payload()?;
        store.insert(name, t)?;
    }
    c.finish()?;
    Ok(store)
}

pub fn write_embedding(path: &Path, t: &Tensor<f32>) -> Result<()> {
    Ok(fs::write(path, encode_embedding(t)?)?)
}

pub fn read_embedding(path: &Path) -> Result<Tensor<f32>> {
    decode_embedding(&fs::read(path)?)
}

pub fn write_checkpoint(path: &Path, params: &ParamStore<f32>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(params)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ParamStore<f32>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

/// `[image, patch, channels, mlp_ratio, then (spectral, attention, heads,
/// dim) per stage]`.
pub fn backbone_meta(cfg: &BackboneConfig) -> Tensor<f32> {
    let mut v = vec![cfg.image_size, cfg.patch_size, cfg.in_channels, cfg.mlp_ratio];
    for s in &cfg.stages {
        v.extend([s.spectral_layers, s.attention_layers, s.heads, s.dim]);
    }
    let n = v.len();
    Tensor::from_parts(vec![n], v.into_iter().map(|x| x as f32).collect())
}

pub fn backbone_from_meta(t: &Tensor<f32>) -> Result<BackboneConfig> {
    let bad = || Error::format(format!("{META_BACKBONE} has invalid layout {:?}", t.shape()));
    if t.rank() != 1 || t.numel() < 8 || t.numel() % 4 != 0 {
        return Err(bad());
    }
    let ints: Vec<usize> = t
        .data()
        .iter()
        .map(|&x| if x >= 0.0 && x.fract() == 0.0 && x < 1e7 { Ok(x as usize) } else { Err(bad()) })
        .collect::<Result<_>>()?;
    let cfg = BackboneConfig {
        image_size: ints[0],
        patch_size: ints[1],
        in_channels: ints[2],
        mlp_ratio: ints[3],
        stages: ints[4..].chunks_exact(4).map(|s| StageConfig::new(s[0], s[1], s[2], s[3])).collect(),
    };
    cfg.validate().map_err(|e| Error::format(format!("{META_BACKBONE}: {e}")))?;
    Ok(cfg)
}

/// Backbone layout stored in a checkpoint, or the default when absent.
pub fn checkpoint_backbone(params: &ParamStore<f32>) -> Result<BackboneConfig> {
    match params.get(META_BACKBONE) {
        Ok(t) => backbone_from_meta(t),
        Err(_) => Ok(BackboneConfig::default()),
    }
}
