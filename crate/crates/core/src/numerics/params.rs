use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "INFMAX-PARAMS";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors with gradients of matching shape.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

/// Free-form `key=value` metadata carried by a checkpoint.
pub type CheckpointMeta = Vec<(String, String)>;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad parameter name {name:?}")));
        }
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name:?}")));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| &self.values[id.0])
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// Zeroed gradient buffer laid out like this store.
    pub fn grad_buffer(&self) -> Vec<Tensor> {
        self.values.iter().map(|v| Tensor::zeros(v.shape())).collect()
    }

    /// Adds `scale * buffer` into the stored gradients.
    pub fn accumulate(&mut self, buffer: &[Tensor], scale: f64) {
        for (g, b) in self.grads.iter_mut().zip(buffer) {
            g.axpy(scale, b);
        }
    }

    pub fn total_values(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Copies values from another store with the same manifest.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names
            || self.values.iter().zip(&other.values).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::InvalidArgument("parameter manifests differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.data_mut().copy_from_slice(b.data());
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and value bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, v) in self.names.iter().zip(&self.values) {
            h.update(name.as_bytes());
            for &d in v.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for &x in v.data() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Checkpoint layout: a text header (magic + version, `meta` lines, one
    /// `param <name> <d0>x<d1>` line per tensor, `end`), then every tensor as
    /// row-major little-endian `f64` in manifest order.
    pub fn write_checkpoint<W: Write>(&self, mut out: W, meta: &CheckpointMeta) -> std::io::Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        for (k, v) in meta {
            debug_assert!(!k.contains(['=', '\n']) && !v.contains('\n'));
            writeln!(out, "meta {k}={v}")?;
        }
        for (name, v) in self.names.iter().zip(&self.values) {
            let dims: Vec<String> = v.shape().iter().map(|d| d.to_string()).collect();
            writeln!(out, "param {name} {}", dims.join("x"))?;
        }
        writeln!(out, "end")?;
        for v in &self.values {
            for &x in v.data() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<(ParamStore, CheckpointMeta)> {
        let bad = |msg: String| Error::Format {
            what: "checkpoint",
            msg,
        };
        let mut line = String::new();
        let mut read_line = |line: &mut String| -> Result<()> {
            line.clear();
            let k = input.read_line(line).map_err(|e| bad(e.to_string()))?;
            if k == 0 {
                return Err(bad("unexpected end of header".into()));
            }
            while line.ends_with('\n') || line.ends_with('\r') {
                line.pop();
            }
            Ok(())
        };
        read_line(&mut line)?;
        let version = line
            .strip_prefix(CHECKPOINT_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("bad magic line {line:?}")))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut meta = Vec::new();
        let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            read_line(&mut line)?;
            if line == "end" {
                break;
            } else if let Some(kv) = line.strip_prefix("meta ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad meta line {line:?}")))?;
                meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("param ") {
                let (name, dims) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| bad(format!("bad param line {line:?}")))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(format!("bad shape in {line:?}")))?;
                manifest.push((name.to_string(), shape));
            } else {
                return Err(bad(format!("unexpected header line {line:?}")));
            }
        }
        let mut drop_input = input;
        let mut store = ParamStore::new();
        for (name, shape) in manifest {
            let count: usize = shape.iter().product();
            let mut bytes = vec![0u8; count * 8];
            drop_input
                .read_exact(&mut bytes)
                .map_err(|_| bad(format!("truncated data for {name}")))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            store.add(&name, Tensor::new(shape, data)?)?;
        }
        let mut rest = [0u8; 1];
        if drop_input.read(&mut rest).map_err(|e| bad(e.to_string()))? != 0 {
            return Err(bad("trailing bytes after data".into()));
        }
        Ok((store, meta))
    }

    pub fn save(&self, path: &Path, meta: &CheckpointMeta) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(f), meta)
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(ParamStore, CheckpointMeta)> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample_store() -> ParamStore {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        s.add("gnn/layer0/W", init_uniform(&[3, 3], 3, &mut rng)).unwrap();
        s.add("qhead/theta1", init_uniform(&[6], 6, &mut rng)).unwrap();
        s.add("scalar", Tensor::scalar(-0.25)).unwrap();
        s
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = sample_store();
        let meta = vec![("seed".to_string(), "42".to_string()), ("note".into(), "a b=c".into())];
        let mut buf = Vec::new();
        s.write_checkpoint(&mut buf, &meta).unwrap();
        let (back, meta_back) = ParamStore::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(back.content_hash(), s.content_hash());
        assert_eq!(back.get("gnn/layer0/W").unwrap().shape(), &[3, 3]);

        assert!(ParamStore::read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(ParamStore::read_checkpoint(&extra[..]).is_err());
    }

    #[test]
    fn names_are_unique() {
        let mut s = sample_store();
        assert!(s.add("scalar", Tensor::scalar(1.0)).is_err());
        assert!(s.add("has space", Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn grads_follow_shapes() {
        let s = sample_store();
        for id in s.ids() {
            assert_eq!(s.grad(id).shape(), s.value(id).shape());
        }
    }
}
