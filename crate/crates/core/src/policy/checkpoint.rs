//! Versioned binary checkpoints.
//!
//! Layout (little-endian): 8 magic bytes, `u32` version, `u8` role
//! (0 policy, 1 critic), `u8` parameterization (0 tabular, 1 mlp), `u64`
//! output width, `f64` temperature, then a parameterization-specific shape
//! header and the parameters as `f64`.
//!
//! Tabular: `u64` capacity, `u64` rows, per row `u32` key length and `i32`
//! key entries, then `rows × out` parameters in row order.
//! MLP: `u32` component count, `u64` cardinalities, `u64` hidden width,
//! `u64` parameter count, parameters.

use std::collections::HashMap;
use std::path::Path;

use super::body::{Body, Mlp, Tabular};
use super::model::{CriticModel, PolicyModel};
use crate::env::{ObsSpec, Observation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"POLYCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Policy,
    Critic,
}

fn encode<S: Scalar>(role: Role, body: &Body<S>, temperature: f64) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(match role {
        Role::Policy => 0,
        Role::Critic => 1,
    });
    let f = |b: &mut Vec<u8>, x: S| b.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
    match body {
        Body::Tabular(t) => {
            b.push(0);
            b.extend_from_slice(&(t.out as u64).to_le_bytes());
            b.extend_from_slice(&temperature.to_le_bytes());
            b.extend_from_slice(&(t.capacity as u64).to_le_bytes());
            b.extend_from_slice(&(t.keys.len() as u64).to_le_bytes());
            for k in &t.keys {
                b.extend_from_slice(&(k.0.len() as u32).to_le_bytes());
                for v in &k.0 {
                    b.extend_from_slice(&v.to_le_bytes());
                }
            }
            for &x in &t.values[..t.keys.len() * t.out] {
                f(&mut b, x);
            }
        }
        Body::Mlp(m) => {
            b.push(1);
            b.extend_from_slice(&(m.out as u64).to_le_bytes());
            b.extend_from_slice(&temperature.to_le_bytes());
            b.extend_from_slice(&(m.spec.cardinalities.len() as u32).to_le_bytes());
            for &c in &m.spec.cardinalities {
                b.extend_from_slice(&(c as u64).to_le_bytes());
            }
            b.extend_from_slice(&(m.hidden as u64).to_le_bytes());
            b.extend_from_slice(&(m.values.len() as u64).to_le_bytes());
            for &x in &m.values {
                f(&mut b, x);
            }
        }
    }
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("size {v} out of range")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn params<S: Scalar>(&mut self, n: usize) -> Result<Vec<S>> {
        if n.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err(Error::Checkpoint("parameter block truncated".into()));
        }
        (0..n)
            .map(|_| {
                let x = self.f64()?;
                if x.is_finite() {
                    Ok(S::of(x))
                } else {
                    Err(Error::Checkpoint("non-finite parameter".into()))
                }
            })
            .collect()
    }
}

fn decode<S: Scalar>(bytes: &[u8], expect: Role) -> Result<(Body<S>, f64)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let role = match r.u8()? {
        0 => Role::Policy,
        1 => Role::Critic,
        x => return Err(Error::Checkpoint(format!("unknown role tag {x}"))),
    };
    if role != expect {
        return Err(Error::Checkpoint(format!("expected a {expect:?} checkpoint, found {role:?}")));
    }
    let kind = r.u8()?;
    let out = r.u64()?;
    let temperature = r.f64()?;
    let body = match kind {
        0 => {
            let capacity = r.u64()?;
            let used = r.u64()?;
            if used > capacity {
                return Err(Error::Checkpoint("more rows than capacity".into()));
            }
            let mut keys = Vec::with_capacity(used);
            let mut rows = HashMap::with_capacity(used);
            for i in 0..used {
                let len = r.u32()? as usize;
                let key = Observation((0..len).map(|_| r.i32()).collect::<Result<_>>()?);
                if rows.insert(key.clone(), i).is_some() {
                    return Err(Error::Checkpoint("duplicate table key".into()));
                }
                keys.push(key);
            }
            let mut values = r.params::<S>(used * out)?;
            values.resize(capacity * out, S::zero());
            Body::Tabular(Tabular { out, capacity, rows, keys, values })
        }
        1 => {
            let comps = r.u32()? as usize;
            let cardinalities = (0..comps).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let spec = ObsSpec { cardinalities };
            let hidden = r.u64()?;
            let n = r.u64()?;
            let input = spec.one_hot_width();
            if n != hidden * input + hidden + out * hidden + out {
                return Err(Error::Checkpoint("parameter count does not match shape header".into()));
            }
            let values = r.params::<S>(n)?;
            Body::Mlp(Mlp { spec, input, hidden, out, values })
        }
        x => return Err(Error::Checkpoint(format!("unknown parameterization tag {x}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((body, temperature))
}

pub fn policy_to_bytes<S: Scalar>(p: &PolicyModel<S>) -> Vec<u8> {
    encode(Role::Policy, &p.body, p.temperature.to_f64_lossy())
}

pub fn policy_from_bytes<S: Scalar>(bytes: &[u8]) -> Result<PolicyModel<S>> {
    let (body, t) = decode(bytes, Role::Policy)?;
    Ok(PolicyModel::from_body(body, S::of(t)))
}

pub fn critic_to_bytes<S: Scalar>(c: &CriticModel<S>) -> Vec<u8> {
    encode(Role::Critic, &c.body, 1.0)
}

pub fn critic_from_bytes<S: Scalar>(bytes: &[u8]) -> Result<CriticModel<S>> {
    Ok(CriticModel::from_body(decode(bytes, Role::Critic)?.0))
}

pub fn save_policy<S: Scalar>(p: &PolicyModel<S>, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, policy_to_bytes(p))?)
}

pub fn load_policy<S: Scalar>(path: &Path) -> Result<PolicyModel<S>> {
    policy_from_bytes(&std::fs::read(path)?)
}

pub fn save_critic<S: Scalar>(c: &CriticModel<S>, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, critic_to_bytes(c))?)
}

pub fn load_critic<S: Scalar>(path: &Path) -> Result<CriticModel<S>> {
    critic_from_bytes(&std::fs::read(path)?)
}
