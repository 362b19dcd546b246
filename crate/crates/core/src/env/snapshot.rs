use crate::error::{Error, Result};

/// Canonical environment snapshot.
///
/// Layout (all little-endian): `u32 kind tag`, `u64 config hash`,
/// `u32 field count`, then `count` × `i64` fields.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct EnvState {
    bytes: Vec<u8>,
}

impl EnvState {
    pub(crate) fn encode(kind: u32, config_hash: u64, fields: &[i64]) -> Self {
        let mut bytes = Vec::with_capacity(16 + 8 * fields.len());
        bytes.extend_from_slice(&kind.to_le_bytes());
        bytes.extend_from_slice(&config_hash.to_le_bytes());
        bytes.extend_from_slice(&(fields.len() as u32).to_le_bytes());
        for f in fields {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        Self { bytes }
    }

    /// Check header compatibility and return the field list.
    pub(crate) fn decode(&self, kind: u32, config_hash: u64) -> Result<Vec<i64>> {
        let (k, h, fields) = self.parts()?;
        if k != kind {
            return Err(Error::SnapshotMismatch(format!(
                "environment kind {k} cannot be restored into kind {kind}"
            )));
        }
        if h != config_hash {
            return Err(Error::SnapshotMismatch(format!(
                "config hash {h:016x} does not match {config_hash:016x}"
            )));
        }
        Ok(fields)
    }

    fn parts(&self) -> Result<(u32, u64, Vec<i64>)> {
        let b = &self.bytes;
        if b.len() < 16 {
            return Err(Error::MalformedSnapshot("header truncated".into()));
        }
        let kind = u32::from_le_bytes(b[0..4].try_into().unwrap());
        let hash = u64::from_le_bytes(b[4..12].try_into().unwrap());
        let count = u32::from_le_bytes(b[12..16].try_into().unwrap()) as usize;
        if b.len() != 16 + 8 * count {
            return Err(Error::MalformedSnapshot(format!(
                "expected {} bytes for {count} fields, found {}",
                16 + 8 * count,
                b.len()
            )));
        }
        let fields = b[16..]
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((kind, hash, fields))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let s = Self { bytes };
        s.parts()?;
        Ok(s)
    }

    pub fn config_hash(&self) -> u64 {
        u64::from_le_bytes(self.bytes[4..12].try_into().unwrap())
    }
}

/// Stable 64-bit digest of a canonical config description.
pub(crate) fn config_digest(canonical: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(canonical.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
