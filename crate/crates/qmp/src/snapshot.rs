//! Versioned binary snapshot of a tensor list, little-endian throughout:
//! `b"QMPS"`, `u32` version, `u32` tensor count, then per tensor a `u32`
//! rank, `rank` × `u64` dims and the `f64` values.

use std::path::Path;

use qmp_core::nn::Tensor;
use qmp_core::sac::SacAgent;

pub const MAGIC: [u8; 4] = *b"QMPS";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("snapshot truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last tensor")]
    Trailing(usize),
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SnapshotError> {
        let end = self.pos + N;
        let s = self.bytes.get(self.pos..end).ok_or(SnapshotError::Truncated(self.bytes.len()))?;
        self.pos = end;
        Ok(s.try_into().expect("slice of length N"))
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>, SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>().map_err(|_| SnapshotError::BadMagic)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.filter(|&l| l <= (bytes.len() - r.pos) / 8).ok_or(SnapshotError::Truncated(bytes.len()))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(r.take()?));
        }
        out.push(Tensor::new(shape, data).map_err(|e| SnapshotError::Malformed(e.to_string()))?);
    }
    if r.pos != bytes.len() {
        return Err(SnapshotError::Trailing(bytes.len() - r.pos));
    }
    Ok(out)
}

/// Agent parameters after `epoch` epochs. Stored as a header tensor
/// `[epoch, agent count, tensors per agent...]` followed by each agent's tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub agents: Vec<Vec<Tensor>>,
}

impl Checkpoint {
    pub fn capture(epoch: usize, agents: &[SacAgent]) -> Self {
        Self { epoch, agents: agents.iter().map(SacAgent::to_tensors).collect() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = vec![self.epoch as f64, self.agents.len() as f64];
        header.extend(self.agents.iter().map(|a| a.len() as f64));
        let mut all = vec![Tensor::new(vec![header.len()], header).expect("header shape")];
        for a in &self.agents {
            all.extend(a.iter().cloned());
        }
        encode(&all)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let tensors = decode(bytes)?;
        let header = tensors.first().ok_or_else(|| SnapshotError::Malformed("missing header".into()))?;
        if header.data.len() < 2 || header.data[1] as usize + 2 != header.data.len() {
            return Err(SnapshotError::Malformed("bad checkpoint header".into()));
        }
        let mut rest = tensors[1..].iter();
        let mut agents = Vec::new();
        for &count in &header.data[2..] {
            let a: Vec<Tensor> = rest.by_ref().take(count as usize).cloned().collect();
            if a.len() != count as usize {
                return Err(SnapshotError::Malformed("checkpoint ends mid-agent".into()));
            }
            agents.push(a);
        }
        if rest.next().is_some() {
            return Err(SnapshotError::Malformed("extra tensors after the last agent".into()));
        }
        Ok(Self { epoch: header.data[0] as usize, agents })
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads parameters into agents built from the same configuration.
    pub fn restore(&self, agents: &mut [SacAgent]) -> Result<(), SnapshotError> {
        if agents.len() != self.agents.len() {
            return Err(SnapshotError::Malformed(format!("{} agents in checkpoint, {} expected", self.agents.len(), agents.len())));
        }
        for (agent, t) in agents.iter_mut().zip(&self.agents) {
            agent.load_tensors(t).map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Tensor> {
        vec![
            Tensor::new(vec![2, 3], vec![1.0, -2.5, 0.0, f64::MIN_POSITIVE, 1e300, -0.0]).unwrap(),
            Tensor::new(vec![], vec![7.0]).unwrap(),
            Tensor::new(vec![0], vec![]).unwrap(),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample();
        let back = decode(&encode(&t)).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in t.iter().zip(&back) {
            assert_eq!(a.shape, b.shape);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"QMPS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode(&sample());
        assert!(matches!(decode(b"NOPE"), Err(SnapshotError::BadMagic)));
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(SnapshotError::Truncated(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(SnapshotError::Version(2))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode(&extra), Err(SnapshotError::Trailing(1))));
    }

    #[test]
    fn huge_declared_shape_does_not_allocate() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"QMPS");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(SnapshotError::Truncated(_))));
    }
}
