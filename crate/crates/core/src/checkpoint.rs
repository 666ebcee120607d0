//! Binary checkpoints.
//!
//! Layout (little endian): magic `VRNCKPT\0`, u32 format version, u32 d,
//! u32 entities, u32 relations, u32 vocabulary size, u8 weight mode,
//! u8 directional relations, u8 shared posterior, u8 reserved, u64 step,
//! f64 signal mean, f64 signal std, f64 signal decay, u32 block count, then
//! per block: u16 name length, name bytes, u32 rows, u32 cols, rows*cols f64.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, VrnError};
use crate::model::{Matrix, Params, Shapes, WeightMode};
use crate::train::{BaselineNet, LearningSignalState, TrainState};

pub const MAGIC: &[u8; 8] = b"VRNCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> VrnError {
    VrnError::Checkpoint(msg.into())
}

fn u32_of(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| bad(format!("{what} {x} does not fit in u32")))
}

pub fn write_checkpoint<W: Write>(state: &TrainState, mut w: W) -> Result<()> {
    let s = state.params.shapes;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for (x, what) in [(s.dim, "dim"), (s.num_entities, "entities"), (s.num_relations, "relations"), (s.vocab_size, "vocab")] {
        w.write_all(&u32_of(x, what)?.to_le_bytes())?;
    }
    let mode = match state.params.weight_mode() {
        WeightMode::NameBow => 0u8,
        WeightMode::Free => 1u8,
    };
    w.write_all(&[mode, u8::from(s.directional_relations), u8::from(state.params.shares_posterior()), 0])?;
    w.write_all(&state.step.to_le_bytes())?;
    for x in [state.signal.mu, state.signal.sigma, state.signal.decay] {
        w.write_all(&x.to_le_bytes())?;
    }
    let mut blocks = state.params.blocks();
    blocks.extend(state.baseline.blocks());
    w.write_all(&u32_of(blocks.len(), "block count")?.to_le_bytes())?;
    for (name, m) in blocks {
        let len = u16::try_from(name.len()).map_err(|_| bad("block name too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&u32_of(m.rows(), "rows")?.to_le_bytes())?;
        w.write_all(&u32_of(m.cols(), "cols")?.to_le_bytes())?;
        for x in m.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| bad(format!("truncated: {e}")))?;
        Ok(b)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<TrainState> {
    let mut r = Reader { inner: r };
    if &r.bytes::<8>()? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let (dim, num_entities, num_relations, vocab_size) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let [mode, directional, share, _] = r.bytes::<4>()?;
    let weight_mode = match mode {
        0 => WeightMode::NameBow,
        1 => WeightMode::Free,
        m => return Err(bad(format!("unknown weight mode {m}"))),
    };
    let shapes = Shapes { dim, num_entities, num_relations, vocab_size, directional_relations: directional != 0 };
    let step = r.u64()?;
    let signal = LearningSignalState { mu: r.f64()?, sigma: r.f64()?, decay: r.f64()? };
    let count = r.u32()?;
    let mut blocks: BTreeMap<String, Matrix> = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let mut name = vec![0u8; len];
        r.inner.read_exact(&mut name).map_err(|e| bad(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| bad("block name is not utf-8"))?;
        let (rows, cols) = (r.u32()?, r.u32()?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        if blocks.insert(name.clone(), Matrix::from_vec(rows, cols, data)).is_some() {
            return Err(bad(format!("duplicate block {name}")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after last block"));
    }

    let mut params = Params::zeros(shapes, weight_mode, share != 0);
    for (name, m) in params.blocks_mut() {
        let src = blocks.remove(name).ok_or_else(|| bad(format!("missing block {name}")))?;
        if src.shape() != m.shape() {
            return Err(bad(format!("block {name} is {:?}, expected {:?}", src.shape(), m.shape())));
        }
        *m = src;
    }
    let mut take = |name: &str| blocks.remove(name).ok_or_else(|| bad(format!("missing block {name}")));
    let (w1, b1, w2, b2) = (take("baseline.w1")?, take("baseline.b1")?, take("baseline.w2")?, take("baseline.b2")?);
    let hidden = w1.rows();
    if w1.cols() != num_entities + vocab_size
        || b1.shape() != (1, hidden)
        || w2.shape() != (1, hidden)
        || b2.shape() != (1, 1)
    {
        return Err(bad("baseline blocks have inconsistent shapes"));
    }
    if let Some(name) = blocks.keys().next() {
        return Err(bad(format!("unexpected block {name}")));
    }
    let baseline = BaselineNet::from_blocks(num_entities, w1, b1, w2, b2);
    Ok(TrainState { params, baseline, signal, step })
}

pub fn save(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(state, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainState> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
