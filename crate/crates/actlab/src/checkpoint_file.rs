//! Versioned binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` payload length, `u32`
//! CRC-32 of the payload, then the payload. Integers and floats are
//! little-endian; floats are raw IEEE-754 bits, so a load reproduces every
//! value exactly. The run setup is embedded as JSON text.

use std::fs;
use std::io::Write;
use std::path::Path;

use actlab_core::envs::{EnvSnapshot, JointState};
use actlab_core::ppo::{
    AdamState, Batch, Checkpoint, LossTerms, ObsNormalizer, TrainSetup, TrainerRngState, CHECKPOINT_VERSION,
};
use actlab_core::rng::StreamState;

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 8] = b"ACTLABCK";
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated: needed {needed} bytes, found {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("checkpoint corrupt: {0}")]
    Corrupt(String),
}

// ---------------------------------------------------------------------------
// Encoding

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
    fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }
    fn stream(&mut self, s: &StreamState) {
        self.buf.extend_from_slice(&s.seed);
        self.u64(s.stream);
        self.u128(s.word_pos);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

type Decode<T> = std::result::Result<T, CheckpointError>;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Decode<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| {
            CheckpointError::Corrupt(format!("field at byte {} overruns the payload", self.pos))
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Decode<u8> {
        Ok(self.take(1)?[0])
    }
    fn flag(&mut self) -> Decode<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CheckpointError::Corrupt(format!("invalid flag byte {b}"))),
        }
    }
    fn u64(&mut self) -> Decode<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn u128(&mut self) -> Decode<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }
    fn f64(&mut self) -> Decode<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self, elem: usize) -> Decode<usize> {
        let n = self.u64()?;
        let remaining = (self.data.len() - self.pos) as u64;
        if n.saturating_mul(elem as u64) > remaining {
            return Err(CheckpointError::Corrupt(format!("length {n} exceeds remaining payload")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self) -> Decode<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn bytes(&mut self) -> Decode<&'a [u8]> {
        let n = self.len(1)?;
        self.take(n)
    }
    fn stream(&mut self) -> Decode<StreamState> {
        let seed: [u8; 32] = self.take(32)?.try_into().expect("32 bytes");
        Ok(StreamState {
            seed,
            stream: self.u64()?,
            word_pos: self.u128()?,
        })
    }
}

fn encode_payload(c: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::default();
    let setup = serde_json::to_vec(&c.setup).expect("setup serializes");
    w.bytes(&setup);
    w.f64s(&c.params);
    w.f64s(&c.adam.m);
    w.f64s(&c.adam.v);
    w.u64(c.adam.t);
    match &c.normalizer {
        Some(n) => {
            w.u8(1);
            w.f64s(&n.mean);
            w.f64s(&n.var);
            w.f64(n.count);
        }
        None => w.u8(0),
    }
    w.stream(&c.rng.action);
    w.stream(&c.rng.shuffle);
    w.stream(&c.rng.env);
    w.f64s(&c.env.state.q);
    w.f64s(&c.env.state.qdot);
    w.f64s(&c.env.target);
    w.u64(c.env.t as u64);
    w.f64(c.episode_return);
    w.u64(c.env_step);
    w.u64(c.gradient_step);
    w.u64(c.iteration);
    match &c.frozen {
        Some(b) => {
            w.u8(1);
            w.u64(b.obs_dim as u64);
            w.u64(b.act_dim as u64);
            w.f64s(&b.observations);
            w.f64s(&b.actions);
            w.f64s(&b.old_log_probs);
            w.f64s(&b.advantages);
            w.f64s(&b.returns);
            w.f64s(&b.old_values);
        }
        None => w.u8(0),
    }
    match &c.stored_loss {
        Some(l) => {
            w.u8(1);
            w.f64(l.total);
            w.f64(l.policy);
            w.f64(l.value);
            w.f64(l.entropy);
        }
        None => w.u8(0),
    }
    w.buf
}

fn decode_payload(data: &[u8]) -> Decode<Checkpoint> {
    let mut r = Reader { data, pos: 0 };
    let setup: TrainSetup = serde_json::from_slice(r.bytes()?)
        .map_err(|e| CheckpointError::Corrupt(format!("run setup: {e}")))?;
    let params = r.f64s()?;
    let adam = AdamState {
        m: r.f64s()?,
        v: r.f64s()?,
        t: r.u64()?,
    };
    let normalizer = if r.flag()? {
        Some(ObsNormalizer {
            mean: r.f64s()?,
            var: r.f64s()?,
            count: r.f64()?,
        })
    } else {
        None
    };
    let rng = TrainerRngState {
        action: r.stream()?,
        shuffle: r.stream()?,
        env: r.stream()?,
    };
    let env = EnvSnapshot {
        state: JointState::new(r.f64s()?, r.f64s()?),
        target: r.f64s()?,
        t: r.u64()? as usize,
    };
    let episode_return = r.f64()?;
    let env_step = r.u64()?;
    let gradient_step = r.u64()?;
    let iteration = r.u64()?;
    let frozen = if r.flag()? {
        Some(Batch {
            obs_dim: r.u64()? as usize,
            act_dim: r.u64()? as usize,
            observations: r.f64s()?,
            actions: r.f64s()?,
            old_log_probs: r.f64s()?,
            advantages: r.f64s()?,
            returns: r.f64s()?,
            old_values: r.f64s()?,
        })
    } else {
        None
    };
    let stored_loss = if r.flag()? {
        Some(LossTerms {
            total: r.f64()?,
            policy: r.f64()?,
            value: r.f64()?,
            entropy: r.f64()?,
        })
    } else {
        None
    };
    if r.pos != data.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes after payload",
            data.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        setup,
        params,
        adam,
        normalizer,
        rng,
        env,
        episode_return,
        env_step,
        gradient_step,
        iteration,
        frozen,
        stored_loss,
    })
}

/// Serializes a checkpoint into the container format.
pub fn encode(c: &Checkpoint) -> Vec<u8> {
    let payload = encode_payload(c);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode(data: &[u8]) -> Decode<Checkpoint> {
    if data.len() >= 8 && &data[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if data.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            needed: HEADER_LEN as u64,
            available: data.len() as u64,
        });
    }
    let version = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let len = u64::from_le_bytes(data[12..20].try_into().expect("8 bytes"));
    let crc = u32::from_le_bytes(data[20..24].try_into().expect("4 bytes"));
    let available = (data.len() - HEADER_LEN) as u64;
    if available < len {
        return Err(CheckpointError::Truncated {
            needed: HEADER_LEN as u64 + len,
            available: data.len() as u64,
        });
    }
    if available > len {
        return Err(CheckpointError::Corrupt(format!("{} bytes past the declared payload", available - len)));
    }
    let payload = &data[HEADER_LEN..];
    if crc32fast::hash(payload) != crc {
        return Err(CheckpointError::Corrupt("checksum mismatch".into()));
    }
    decode_payload(payload)
}

/// Writes atomically (temporary file, then rename).
pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let tmp = path.with_extension("bin.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?;
    f.write_all(&encode(c)).map_err(|e| AppError::io(&tmp, e))?;
    f.sync_all().map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let data = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&data).map_err(|source| AppError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}
