use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Tape, Tensor, TensorError, Var};

/// Index of a parameter inside its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
}

/// Named trainable tensors, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
    ids: Vec<ParamId>,
    by_name: HashMap<String, ParamId>,
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: [usize; 2],
    values: Vec<f64>,
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))` for a `fan_in x fan_out` weight.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(fan_in, fan_out, data).expect("length matches shape")
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, TensorError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(TensorError::Invalid(format!("duplicate parameter name {name:?}")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value });
        self.ids.push(id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// Records every parameter on `tape`; the result is indexed like `ids()`.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.value.clone())).collect()
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, StoredTensor> = self
            .params
            .iter()
            .map(|p| {
                (
                    p.name.as_str(),
                    StoredTensor {
                        shape: [p.value.rows(), p.value.cols()],
                        values: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("finite floats serialize")
    }

    /// Overwrites values from a checkpoint. Every parameter must be present
    /// with a matching shape, and the checkpoint may not carry extra names.
    pub fn load_json(&mut self, text: &str) -> Result<(), TensorError> {
        let map: BTreeMap<String, StoredTensor> =
            serde_json::from_str(text).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        if let Some(extra) = map.keys().find(|k| !self.by_name.contains_key(*k)) {
            return Err(TensorError::Checkpoint(format!("unknown parameter {extra:?}")));
        }
        for p in &mut self.params {
            let stored = map
                .get(&p.name)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing parameter {:?}", p.name)))?;
            if stored.shape != [p.value.rows(), p.value.cols()] {
                return Err(TensorError::Checkpoint(format!(
                    "parameter {:?} has shape {:?}, checkpoint has {:?}",
                    p.name,
                    p.value.shape(),
                    stored.shape
                )));
            }
            p.value = Tensor::new(stored.shape[0], stored.shape[1], stored.values.clone())
                .map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TensorError> {
        std::fs::write(path, self.to_json()).map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(&mut self, path: &Path) -> Result<(), TensorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))?;
        self.load_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::zeros(1, 1)).unwrap();
        assert!(ps.add("w", Tensor::zeros(1, 1)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ps = ParamSet::new();
        ps.add("a", glorot_uniform(3, 4, &mut rng)).unwrap();
        ps.add("b", Tensor::row_vector(vec![0.1, 1.0 / 3.0, -2e-300])).unwrap();
        let text = ps.to_json();
        let mut other = ps.clone();
        for id in other.ids().to_vec() {
            other.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        other.load_json(&text).unwrap();
        assert_eq!(other, ps);
    }

    #[test]
    fn checkpoint_shape_mismatch_is_rejected() {
        let mut ps = ParamSet::new();
        ps.add("a", Tensor::zeros(2, 2)).unwrap();
        let mut small = ParamSet::new();
        small.add("a", Tensor::zeros(1, 2)).unwrap();
        assert!(ps.load_json(&small.to_json()).is_err());
    }

    #[test]
    fn glorot_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot_uniform(10, 20, &mut rng);
        let bound = (6.0f64 / 30.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
    }
}
