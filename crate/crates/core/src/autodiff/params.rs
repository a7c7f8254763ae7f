use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Magic first line of a parameter checkpoint.
pub const CHECKPOINT_MAGIC: &str = "MFUSE1";

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    /// Buffers (batch-norm running statistics) are stored but never optimized.
    pub trainable: bool,
}

/// Named parameters and buffers of a model, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(
            name.into(),
            Param {
                value,
                trainable: true,
            },
        );
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(
            name.into(),
            Param {
                value,
                trainable: false,
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|p| p.trainable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .values()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|p| p.value.all_finite())
    }

    /// Serializes to the `MFUSE1` text format: the magic line, then one line per
    /// entry: `name kind d0xd1x.. v0 v1 ..` with `kind` in {`param`, `buffer`}
    /// and values in shortest round-trip exponent notation.
    pub fn to_checkpoint_string(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        for (name, p) in &self.entries {
            let kind = if p.trainable { "param" } else { "buffer" };
            let dims: Vec<String> = p.value.shape().iter().map(usize::to_string).collect();
            let _ = write!(out, "{name} {kind} {}", dims.join("x"));
            for v in p.value.data() {
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(Error::Data(format!(
                "checkpoint does not start with `{CHECKPOINT_MAGIC}`"
            )));
        }
        let mut store = ParamStore::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Data(format!("checkpoint line {}: {what}", n + 2));
            let mut fields = line.split_ascii_whitespace();
            let name = fields.next().ok_or_else(|| bad("empty record"))?;
            let trainable = match fields.next() {
                Some("param") => true,
                Some("buffer") => false,
                _ => return Err(bad("kind must be `param` or `buffer`")),
            };
            let shape: Vec<usize> = fields
                .next()
                .ok_or_else(|| bad("missing shape"))?
                .split('x')
                .map(|d| d.parse().map_err(|_| bad("malformed shape")))
                .collect::<Result<_>>()?;
            let values: Vec<f64> = fields
                .map(|v| v.parse().map_err(|_| bad("malformed value")))
                .collect::<Result<_>>()?;
            let value = Tensor::new(shape, values).map_err(|e| bad(&e.to_string()))?;
            if store.entries.contains_key(name) {
                return Err(bad("duplicate name"));
            }
            store
                .entries
                .insert(name.to_string(), Param { value, trainable });
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text)
    }

    /// SHA-256 of the checkpoint serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_checkpoint_string().as_bytes()))
    }

    /// Replaces values of every entry present in `other` with matching shape.
    /// Returns the number of entries copied.
    pub fn load_matching(&mut self, other: &ParamStore) -> Result<usize> {
        let mut copied = 0;
        for (name, p) in &other.entries {
            if let Some(dst) = self.entries.get_mut(name) {
                if dst.value.shape() != p.value.shape() {
                    return Err(Error::Data(format!(
                        "parameter `{name}`: checkpoint shape {:?} vs model shape {:?}",
                        p.value.shape(),
                        dst.value.shape()
                    )));
                }
                dst.value = p.value.clone();
                copied += 1;
            }
        }
        Ok(copied)
    }
}

/// Maps parameter names to graph leaves for one forward pass.
///
/// Each name is recorded at most once per graph, so weights reused across
/// time steps accumulate a single gradient.
#[derive(Debug)]
pub struct Binder<'a> {
    store: &'a ParamStore,
    ids: BTreeMap<String, NodeId>,
}

impl<'a> Binder<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            ids: BTreeMap::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn bind(&mut self, g: &mut Graph, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.ids.get(name) {
            return Ok(id);
        }
        let entry = self
            .store
            .entries
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
        let id = g.leaf(entry.value.clone(), entry.trainable);
        self.ids.insert(name.to_string(), id);
        Ok(id)
    }

    /// Binds `name` to an existing node instead of a fresh leaf, e.g. to
    /// differentiate with respect to externally supplied values.
    pub fn preset(&mut self, name: &str, id: NodeId) {
        self.ids.insert(name.to_string(), id);
    }

    pub fn ids(&self) -> &BTreeMap<String, NodeId> {
        &self.ids
    }

    /// Gradients of bound trainable parameters after `g.backward`.
    pub fn gradients(&self, g: &Graph) -> BTreeMap<String, Tensor> {
        self.ids
            .iter()
            .filter(|(name, _)| self.store.is_trainable(name))
            .filter_map(|(name, &id)| g.grad(id).map(|t| (name.clone(), t.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("fc.w", Tensor::new(vec![2, 2], vec![0.1, -1e-300, 3.5e10, 1.0 / 3.0]).unwrap());
        s.insert_buffer("bn.mean", Tensor::from_vec(vec![0.25, -0.75]));
        s
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let s = store();
        let back = ParamStore::from_checkpoint_str(&s.to_checkpoint_string()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.digest(), s.digest());
        assert!(!back.is_trainable("bn.mean"));
    }

    #[test]
    fn checkpoint_requires_magic() {
        let text = s_without_magic();
        assert!(ParamStore::from_checkpoint_str(&text).is_err());
    }

    fn s_without_magic() -> String {
        store().to_checkpoint_string().replacen(CHECKPOINT_MAGIC, "MFUSE0", 1)
    }

    #[test]
    fn checkpoint_rejects_shape_value_mismatch() {
        let text = format!("{CHECKPOINT_MAGIC}\nw param 2x2 1 2 3\n");
        assert!(ParamStore::from_checkpoint_str(&text).is_err());
    }
}
