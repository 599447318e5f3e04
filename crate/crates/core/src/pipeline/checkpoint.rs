//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//! `MORE1`, u32 meta count, then per entry u32 key length, key, u32 value
//! length, value; u32 tensor count, then per tensor u32 name length, name,
//! u32 rows, u32 cols, u8 flags (bit 0 = trainable), rows·cols f64 values.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::Config;
use super::{PipelineError, Result};
use crate::linalg::Matrix;
use crate::nn::{AdamState, ParameterSet};
use crate::rng::{decode_state, encode_state, Rng};
use crate::sentence_gen::Seq2SeqModel;
use crate::term_gen::MoreModel;
use crate::vocab::Vocabulary;

pub const MAGIC: &[u8; 5] = b"MORE1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub trainable: bool,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, Vec<u8>>,
    pub tensors: Vec<Tensor>,
}

fn bad(msg: impl Into<String>) -> PipelineError {
    PipelineError::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("length fits in u32").to_le_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        put_u32(&mut out, self.meta.len());
        for (k, v) in &self.meta {
            put_u32(&mut out, k.len());
            out.extend_from_slice(k.as_bytes());
            put_u32(&mut out, v.len());
            out.extend_from_slice(v);
        }
        put_u32(&mut out, self.tensors.len());
        for t in &self.tensors {
            put_u32(&mut out, t.name.len());
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.rows);
            put_u32(&mut out, t.cols);
            out.push(u8::from(t.trainable));
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
            return Err(bad("not a MORE1 checkpoint"));
        }
        let mut ck = Self::default();
        for _ in 0..r.u32()? {
            let key = String::from_utf8(r.blob()?.to_vec()).map_err(|_| bad("non-UTF-8 key"))?;
            ck.meta.insert(key, r.blob()?.to_vec());
        }
        for _ in 0..r.u32()? {
            let name = String::from_utf8(r.blob()?.to_vec()).map_err(|_| bad("non-UTF-8 tensor name"))?;
            let rows = r.u32()?;
            let cols = r.u32()?;
            let trainable = r.take(1)?[0] & 1 == 1;
            let raw = r.take(rows * cols * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            ck.tensors.push(Tensor {
                name,
                rows,
                cols,
                trainable,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(ck)
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| PipelineError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn meta_bytes(&self, key: &str) -> Result<&[u8]> {
        self.meta
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| bad(format!("missing metadata '{key}'")))
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        std::str::from_utf8(self.meta_bytes(key)?).map_err(|_| bad(format!("metadata '{key}' is not UTF-8")))
    }

    fn meta_u64(&self, key: &str) -> Result<u64> {
        let b = self.meta_bytes(key)?;
        Ok(u64::from_le_bytes(
            b.try_into()
                .map_err(|_| bad(format!("metadata '{key}' is not a u64")))?,
        ))
    }

    fn set_str(&mut self, key: impl Into<String>, value: &str) {
        self.meta.insert(key.into(), value.as_bytes().to_vec());
    }

    fn set_u64(&mut self, key: impl Into<String>, value: u64) {
        self.meta.insert(key.into(), value.to_le_bytes().to_vec());
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| bad(format!("missing tensor '{name}'")))
    }

    fn push(&mut self, name: String, m: &Matrix, trainable: bool) {
        self.tensors.push(Tensor {
            name,
            rows: m.rows(),
            cols: m.cols(),
            trainable,
            data: m.as_slice().to_vec(),
        });
    }

    pub fn kind(&self) -> Result<&str> {
        self.meta_str("kind")
    }

    pub fn config(&self) -> Result<Config> {
        Config::parse(self.meta_str("config")?)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        let found = self.kind()?;
        if found != kind {
            return Err(bad(format!("expected a '{kind}' checkpoint, found '{found}'")));
        }
        Ok(())
    }
}

struct TrainingState<'a> {
    params: &'a ParameterSet,
    optimizer: &'a AdamState,
    rng: &'a Rng,
    epochs: usize,
}

fn store(ck: &mut Checkpoint, prefix: &str, s: TrainingState<'_>) {
    for (id, p) in s.params.iter() {
        let name = format!("{prefix}{}", p.name);
        ck.push(name.clone(), &p.value, p.trainable);
        ck.push(format!("adam.m/{name}"), &s.optimizer.first[id.index()], false);
        ck.push(format!("adam.v/{name}"), &s.optimizer.second[id.index()], false);
        let frozen: Vec<u8> = (0..p.value.rows())
            .filter(|&r| p.row_frozen(r))
            .flat_map(|r| (r as u32).to_le_bytes())
            .collect();
        if !frozen.is_empty() {
            ck.meta.insert(format!("frozen/{name}"), frozen);
        }
    }
    ck.set_u64(format!("{prefix}adam_step"), s.optimizer.step);
    ck.set_u64(format!("{prefix}epochs"), s.epochs as u64);
    ck.meta.insert(format!("{prefix}rng"), encode_state(s.rng));
}

fn matrix_from(t: &Tensor, like: &Matrix) -> Result<Matrix> {
    if (t.rows, t.cols) != like.shape() {
        return Err(bad(format!(
            "tensor '{}' is {}x{}, model expects {}x{}",
            t.name,
            t.rows,
            t.cols,
            like.rows(),
            like.cols()
        )));
    }
    Matrix::from_vec(t.rows, t.cols, t.data.clone()).map_err(|e| bad(e.to_string()))
}

fn restore(
    ck: &Checkpoint,
    prefix: &str,
    params: &mut ParameterSet,
    optimizer: &mut AdamState,
    rng: &mut Rng,
) -> Result<usize> {
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    for id in ids {
        let name = format!("{prefix}{}", params.get(id).name);
        let t = ck.tensor(&name)?;
        let value = matrix_from(t, params.value(id))?;
        optimizer.first[id.index()] = matrix_from(ck.tensor(&format!("adam.m/{name}"))?, &value)?;
        optimizer.second[id.index()] = matrix_from(ck.tensor(&format!("adam.v/{name}"))?, &value)?;
        let p = params.get_mut(id);
        p.value = value;
        p.trainable = t.trainable;
        p.frozen_rows.clear();
        if let Some(bytes) = ck.meta.get(&format!("frozen/{name}")) {
            let rows: Vec<usize> = bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
                .collect();
            params.freeze_rows(id, &rows);
        }
    }
    optimizer.step = ck.meta_u64(&format!("{prefix}adam_step"))?;
    *rng = decode_state(ck.meta_bytes(&format!("{prefix}rng"))?).ok_or_else(|| bad("corrupt rng state"))?;
    Ok(ck.meta_u64(&format!("{prefix}epochs"))? as usize)
}

fn vocab_meta(ck: &Checkpoint, key: &str) -> Result<Vocabulary> {
    Vocabulary::from_text(ck.meta_str(key)?).map_err(|e| bad(format!("{key}: {e}")))
}

pub fn save_term_model(model: &MoreModel, config: &Config) -> Checkpoint {
    let mut ck = Checkpoint::default();
    ck.set_str("kind", "term");
    ck.set_str("config", &config.to_text());
    ck.set_str("vocab", &model.vocab.to_text());
    for (i, e) in model.experts.iter().enumerate() {
        let state = TrainingState {
            params: &e.params,
            optimizer: &e.optimizer,
            rng: &e.rng,
            epochs: e.epochs_done,
        };
        store(&mut ck, &format!("expert{}/", i + 1), state);
    }
    ck
}

pub fn load_term_model(ck: &Checkpoint) -> Result<(MoreModel, Config)> {
    ck.expect_kind("term")?;
    let config = ck.config()?;
    let mut model = MoreModel::new(config.term_gen(), vocab_meta(ck, "vocab")?)?;
    for (i, e) in model.experts.iter_mut().enumerate() {
        e.epochs_done = restore(
            ck,
            &format!("expert{}/", i + 1),
            &mut e.params,
            &mut e.optimizer,
            &mut e.rng,
        )?;
    }
    Ok((model, config))
}

pub fn save_sentence_model(model: &Seq2SeqModel, config: &Config) -> Checkpoint {
    let mut ck = Checkpoint::default();
    ck.set_str("kind", "sent");
    ck.set_str("config", &config.to_text());
    ck.set_str("source_vocab", &model.source_vocab.to_text());
    ck.set_str("target_vocab", &model.target_vocab.to_text());
    let state = TrainingState {
        params: &model.params,
        optimizer: &model.optimizer,
        rng: &model.rng,
        epochs: model.epochs_done,
    };
    store(&mut ck, "", state);
    ck
}

pub fn load_sentence_model(ck: &Checkpoint) -> Result<(Seq2SeqModel, Config)> {
    ck.expect_kind("sent")?;
    let config = ck.config()?;
    let source = vocab_meta(ck, "source_vocab")?;
    let mut model = Seq2SeqModel::new(config.sentence_gen(), &source, vocab_meta(ck, "target_vocab")?)?;
    if model.source_vocab != source {
        return Err(bad("source vocabulary does not match the configured styles"));
    }
    model.epochs_done = restore(ck, "", &mut model.params, &mut model.optimizer, &mut model.rng)?;
    Ok((model, config))
}
