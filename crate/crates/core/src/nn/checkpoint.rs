//! Flat binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "DCRNNCK1"
//! count    u32      number of records
//! record*  count    group_len u32 | group utf-8 | rank u32 | dims u64*rank | data f64*numel
//! ```
//!
//! Records appear in parameter-store order, so a store round-trips
//! bit-exactly.

use std::io::{Read, Write};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::params::ParamStore;

const MAGIC: &[u8; 8] = b"DCRNNCK1";

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub group: String,
    pub tensor: Tensor,
}

pub fn records(store: &ParamStore) -> Vec<Record> {
    store
        .iter()
        .map(|(_, p)| Record {
            group: p.group.clone(),
            tensor: p.value().clone(),
        })
        .collect()
}

pub fn write(store: &ParamStore, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + store.scalar_count() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        buf.extend_from_slice(&(p.group.len() as u32).to_le_bytes());
        buf.extend_from_slice(p.group.as_bytes());
        let dims = p.value().dims();
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value().data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("writing checkpoint", e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read(mut input: impl Read) -> Result<Vec<Record>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("reading checkpoint", e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let count = cur.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let group = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Checkpoint("group name is not utf-8".into()))?
            .to_string();
        let rank = cur.u32()? as usize;
        let dims = (0..rank)
            .map(|_| cur.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint("record size overflows".into()))?;
        let raw = cur.take(
            numel
                .checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("record size overflows".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(dims, data).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.push(Record { group, tensor });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(out)
}

/// Copies records into `store`; groups and shapes must match one-to-one.
pub fn load_into(store: &mut ParamStore, records: Vec<Record>) -> Result<()> {
    if records.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model has {}",
            records.len(),
            store.len()
        )));
    }
    let ids: Vec<_> = store.ids().collect();
    for (id, rec) in ids.into_iter().zip(records) {
        let p = store.param(id);
        if p.group != rec.group || p.value().shape() != rec.tensor.shape() {
            return Err(Error::Checkpoint(format!(
                "record {} is {} {}, model expects {} {}",
                id.index(),
                rec.group,
                rec.tensor.shape(),
                p.group,
                p.value().shape()
            )));
        }
        store.set(id, rec.tensor)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Initializer;

    fn sample_store(seed: u64) -> ParamStore {
        let mut init = Initializer::new(seed);
        let mut store = ParamStore::new();
        store.add("embedding", "field0", init.uniform(&[3, 2], 3));
        store.add("task0.rnn", "fwd.bias", init.uniform(&[4], 4));
        store.add("ada", "a0", Tensor::scalar(-0.0));
        store
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let store = sample_store(1);
        let mut bytes = Vec::new();
        write(&store, &mut bytes).unwrap();
        let recs = read(bytes.as_slice()).unwrap();
        assert_eq!(recs.len(), 3);
        let mut other = sample_store(2);
        load_into(&mut other, recs).unwrap();
        for id in store.ids() {
            let a: Vec<u64> = store.get(id).data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = other.get(id).data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        let mut again = Vec::new();
        write(&other, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_mismatch_and_truncation() {
        let store = sample_store(1);
        let mut bytes = Vec::new();
        write(&store, &mut bytes).unwrap();
        assert!(read(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = ParamStore::new();
        wrong.add(
            "embedding",
            "field0",
            Tensor::zeros(&crate::autodiff::Shape::new(vec![2, 2]).unwrap()),
        );
        wrong.add(
            "task0.rnn",
            "x",
            Tensor::zeros(&crate::autodiff::Shape::new(vec![4]).unwrap()),
        );
        wrong.add("ada", "a0", Tensor::scalar(0.0));
        assert!(load_into(&mut wrong, read(bytes.as_slice()).unwrap()).is_err());
    }
}
