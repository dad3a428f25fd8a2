//! Versioned binary container for a [`Trainer`]'s full state.
//!
//! Layout:
//!
//! ```text
//! "MMANCKPT" | u32 version | u8 dtype-name length, dtype name | 32-byte config digest
//! sections, each: 4-byte tag | u64 length | bytes
//!   CONF  canonical config text
//!   ARCH  architecture manifest
//!   STAT  iteration, rng seed/stream/word position, optimizer step counts
//!   TRAC  convergence trace CSV
//!   BTAB  block table: name, shape, byte offset, byte length per line
//!   DATA  little-endian parameter and moment blocks
//! 32-byte SHA-256 of everything above
//! ```
//!
//! All integers are little-endian.

use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::adam::AdamState;
use super::config::{hex, TrainConfig};
use super::trainer::Trainer;
use crate::error::{Error, Result};
use crate::metrics::ConvergenceTrace;
use crate::nn::ParamStore;
use crate::tensor::{Real, Tensor};

pub const MAGIC: &[u8; 8] = b"MMANCKPT";
pub const VERSION: u32 = 1;

const SECTIONS: [&[u8; 4]; 6] = [b"CONF", b"ARCH", b"STAT", b"TRAC", b"BTAB", b"DATA"];

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Blocks<'a, T> {
    table: String,
    data: Vec<u8>,
    _marker: std::marker::PhantomData<&'a T>,
}

impl<T: Real> Blocks<'_, T> {
    fn push(&mut self, name: &str, t: &Tensor<T>) {
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let offset = self.data.len();
        for &v in t.data() {
            v.write_le(&mut self.data);
        }
        let _ = writeln!(
            self.table,
            "{name} {} {offset} {}",
            shape.join("x"),
            self.data.len() - offset
        );
    }

    fn push_store(&mut self, prefix: &str, store: &ParamStore<T>, opt: &AdamState<T>) {
        for (i, p) in store.params().iter().enumerate() {
            self.push(&format!("{prefix}/{}", p.name), &p.value);
            self.push(&format!("{prefix}/{}#m", p.name), &opt.m[i]);
            self.push(&format!("{prefix}/{}#v", p.name), &opt.v[i]);
        }
    }
}

fn store_prefixes<T: Real>(trainer: &Trainer<T>) -> Vec<String> {
    let mut v = vec!["gen".to_string()];
    v.extend((0..trainer.models.discs.len()).map(|i| format!("disc{i}")));
    v
}

/// Serializes the trainer's parameters, optimizer moments, rng position,
/// iteration counter and trace.
pub fn to_bytes<T: Real>(trainer: &Trainer<T>) -> Vec<u8> {
    let mut blocks = Blocks::<T> {
        table: String::new(),
        data: Vec::new(),
        _marker: std::marker::PhantomData,
    };
    let prefixes = store_prefixes(trainer);
    blocks.push_store(
        &prefixes[0],
        trainer.models.generator.store(),
        &trainer.gen_opt,
    );
    for (i, d) in trainer.models.discs.iter().enumerate() {
        blocks.push_store(&prefixes[i + 1], d.disc.store(), &trainer.disc_opts[i]);
    }

    let rng = &trainer.rng;
    let mut state = String::new();
    let _ = writeln!(state, "iteration {}", trainer.iteration);
    let _ = writeln!(state, "rng_seed {}", hex(&rng.get_seed()));
    let _ = writeln!(state, "rng_stream {}", rng.get_stream());
    let _ = writeln!(state, "rng_word_pos {}", rng.get_word_pos());
    let _ = writeln!(state, "adam_step gen {}", trainer.gen_opt.step);
    for (i, o) in trainer.disc_opts.iter().enumerate() {
        let _ = writeln!(state, "adam_step disc{i} {}", o.step);
    }
    let mut trace = Vec::new();
    trainer
        .trace
        .write_csv(&mut trace)
        .expect("writing to memory cannot fail");

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::NAME.len() as u8);
    out.extend_from_slice(T::NAME.as_bytes());
    out.extend_from_slice(&trainer.config.digest());
    let (config, arch) = (trainer.config.to_text(), trainer.models.manifest());
    let bodies: [&[u8]; 6] = [
        config.as_bytes(),
        arch.as_bytes(),
        state.as_bytes(),
        &trace,
        blocks.table.as_bytes(),
        &blocks.data,
    ];
    for (tag, body) in SECTIONS.iter().zip(bodies) {
        out.extend_from_slice(*tag);
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(body);
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

fn text(body: &[u8], tag: &str) -> Result<String> {
    String::from_utf8(body.to_vec()).map_err(|_| bad(format!("section {tag} is not UTF-8")))
}

fn unhex32(s: &str) -> Result<[u8; 32]> {
    if s.len() != 64 {
        return Err(bad("rng seed must be 64 hex digits"));
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b =
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad("rng seed is not hex"))?;
    }
    Ok(out)
}

fn state_value<'a>(state: &'a str, key: &str) -> Result<&'a str> {
    state
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .ok_or_else(|| bad(format!("state entry `{key}` missing")))
}

fn parse_num<V: std::str::FromStr>(s: &str, what: &str) -> Result<V> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("bad {what} `{s}`")))
}

/// Rebuilds a trainer from [`to_bytes`] output. Nothing is constructed
/// until the trailing checksum and the header have been verified.
pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Trainer<T>> {
    if bytes.len() < MAGIC.len() + 32 {
        return Err(bad("file too short"));
    }
    let (payload, sum) = bytes.split_at(bytes.len() - 32);
    if bytes[..MAGIC.len()] != MAGIC[..] {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    if Sha256::digest(payload).as_slice() != sum {
        return Err(bad("checksum mismatch; file is corrupt"));
    }
    let mut r = Reader {
        bytes: payload,
        pos: MAGIC.len(),
    };
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!(
            "version {version}, this build reads {VERSION}"
        )));
    }
    let name_len = r.take(1)?[0] as usize;
    let dtype = r.take(name_len)?;
    if dtype != T::NAME.as_bytes() {
        return Err(bad(format!(
            "stored as {}, requested {}",
            String::from_utf8_lossy(dtype),
            T::NAME
        )));
    }
    let digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let mut bodies = Vec::new();
    for tag in SECTIONS {
        let found = r.take(4)?;
        if found != tag {
            return Err(bad(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let len = r.u64()? as usize;
        bodies.push(r.take(len)?);
    }
    if r.pos != payload.len() {
        return Err(bad("trailing bytes after the last section"));
    }

    let config = TrainConfig::parse(&text(bodies[0], "CONF")?)?;
    if config.digest() != digest {
        return Err(bad("config digest does not match the stored config"));
    }
    let mut trainer = Trainer::<T>::new(config)?;
    if trainer.models.manifest() != text(bodies[1], "ARCH")? {
        return Err(bad("architecture manifest does not match the config"));
    }

    let state = text(bodies[2], "STAT")?;
    trainer.iteration = parse_num(state_value(&state, "iteration")?, "iteration")?;
    let mut rng =
        <ChaCha8Rng as rand::SeedableRng>::from_seed(unhex32(state_value(&state, "rng_seed")?)?);
    rng.set_stream(parse_num(state_value(&state, "rng_stream")?, "rng stream")?);
    rng.set_word_pos(parse_num(
        state_value(&state, "rng_word_pos")?,
        "rng word position",
    )?);
    trainer.rng = rng;
    trainer.gen_opt.step = parse_num(state_value(&state, "adam_step gen")?, "optimizer step")?;
    for i in 0..trainer.disc_opts.len() {
        trainer.disc_opts[i].step = parse_num(
            state_value(&state, &format!("adam_step disc{i}"))?,
            "optimizer step",
        )?;
    }
    trainer.trace = ConvergenceTrace::read_csv(bodies[3])?;

    let table = text(bodies[4], "BTAB")?;
    let data = bodies[5];
    let mut entries = std::collections::HashMap::new();
    for line in table.lines() {
        let parts: Vec<&str> = line.split(' ').collect();
        let [name, shape, offset, len] = parts[..] else {
            return Err(bad(format!("bad block table line `{line}`")));
        };
        let shape: Vec<usize> = shape
            .split('x')
            .map(|d| parse_num(d, "block shape"))
            .collect::<Result<_>>()?;
        let offset: usize = parse_num(offset, "block offset")?;
        let len: usize = parse_num(len, "block length")?;
        let end = offset.checked_add(len).filter(|&e| e <= data.len());
        let end = end.ok_or_else(|| bad(format!("block `{name}` runs past the data section")))?;
        entries.insert(name.to_string(), (shape, &data[offset..end]));
    }
    let expected_blocks = 3
        * (trainer.models.generator.store().len()
            + trainer
                .models
                .discs
                .iter()
                .map(|d| d.disc.store().len())
                .sum::<usize>());
    if entries.len() != expected_blocks {
        return Err(bad(format!(
            "{} blocks stored, model has {expected_blocks}",
            entries.len()
        )));
    }
    let mut fetch = |name: String, target: &mut Tensor<T>| -> Result<()> {
        let (shape, raw) = entries
            .remove(&name)
            .ok_or_else(|| bad(format!("block `{name}` missing")))?;
        if shape != target.shape() || raw.len() != target.numel() * T::BYTES {
            return Err(bad(format!(
                "block `{name}` has shape {shape:?}, model expects {:?}",
                target.shape()
            )));
        }
        for (v, chunk) in target.data_mut().iter_mut().zip(raw.chunks_exact(T::BYTES)) {
            *v = T::read_le(chunk);
        }
        Ok(())
    };
    let prefixes = store_prefixes(&trainer);
    let Trainer {
        models,
        gen_opt,
        disc_opts,
        ..
    } = &mut trainer;
    let mut stores: Vec<(&mut ParamStore<T>, &mut AdamState<T>)> =
        vec![(models.generator.store_mut(), gen_opt)];
    for (d, o) in models.discs.iter_mut().zip(disc_opts.iter_mut()) {
        stores.push((d.disc.store_mut(), o));
    }
    for ((store, opt), prefix) in stores.into_iter().zip(&prefixes) {
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            fetch(format!("{prefix}/{}", p.name), &mut p.value)?;
            fetch(format!("{prefix}/{}#m", p.name), &mut opt.m[i])?;
            fetch(format!("{prefix}/{}#v", p.name), &mut opt.v[i])?;
        }
    }
    Ok(trainer)
}

pub fn save<T: Real>(trainer: &Trainer<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_bytes(trainer)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: &Path) -> Result<Trainer<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Element type recorded in a checkpoint header.
pub fn stored_precision(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 13 || bytes[..8] != MAGIC[..] {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let n = bytes[12] as usize;
    let name = bytes
        .get(13..13 + n)
        .ok_or_else(|| bad("truncated header"))?;
    Ok(String::from_utf8_lossy(name).into_owned())
}
