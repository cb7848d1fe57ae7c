use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::key::ParamKey;
use super::scheme::SharingConfig;
use crate::error::{shape_err, Error, Result};
use crate::model::layout::{parameter_sites, Init};
use crate::model::ModelConfig;
use crate::numeric::{Scalar, Tape, Tensor, Var};

/// Seed for one tensor, a pure function of the run seed and the key of its
/// first covered site. Tied tensors therefore start from the same values
/// the unshared model uses at that site.
fn tensor_seed(seed: u64, key: &ParamKey) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(key.representative().to_string().as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn init_tensor<T: Scalar>(shape: &[usize], init: Init, seed: u64) -> Tensor<T> {
    match init {
        Init::Zeros => Tensor::zeros(shape),
        Init::Ones => Tensor::full(shape, T::one()),
        Init::Constant(v) => Tensor::full(shape, T::from_f64(v)),
        Init::FanIn(fan_in) => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let numel = shape.iter().product();
            let data = (0..numel)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            Tensor::new(shape, data).expect("shape matches numel")
        }
    }
}

/// Owns every model parameter under canonical keys.
#[derive(Debug, Clone)]
pub struct ParameterStore<T> {
    sharing: SharingConfig,
    tensors: BTreeMap<ParamKey, Tensor<T>>,
    site_refs: BTreeMap<ParamKey, usize>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn empty(sharing: SharingConfig) -> Self {
        Self {
            sharing,
            tensors: BTreeMap::new(),
            site_refs: BTreeMap::new(),
        }
    }

    pub fn initialize(config: &ModelConfig, seed: u64) -> Self {
        let mut store = Self::empty(config.sharing);
        for spec in parameter_sites(config) {
            let key = spec.key.canonicalize(&config.sharing);
            *store.site_refs.entry(key).or_insert(0) += 1;
            store
                .tensors
                .entry(key)
                .or_insert_with(|| init_tensor(&spec.shape, spec.init, tensor_seed(seed, &key)));
        }
        store
    }

    /// Builds a store for `config` from tensors keyed under `source_sharing`,
    /// e.g. a checkpoint written by a differently shared model.
    pub fn from_keyed(
        config: &ModelConfig,
        source_sharing: &SharingConfig,
        tensors: &BTreeMap<ParamKey, Tensor<T>>,
    ) -> Result<Self> {
        let mut store = Self::empty(config.sharing);
        for spec in parameter_sites(config) {
            let key = spec.key.canonicalize(&config.sharing);
            *store.site_refs.entry(key).or_insert(0) += 1;
            if store.tensors.contains_key(&key) {
                continue;
            }
            let source_key = key.representative().canonicalize(source_sharing);
            let tensor = tensors
                .get(&source_key)
                .ok_or_else(|| Error::MissingParameter(source_key.to_string()))?;
            store.insert(key, tensor.clone());
        }
        store.validate(config)?;
        Ok(store)
    }

    /// Copy of this store laid out for `config` (same architecture, any sharing).
    pub fn relayout(&self, config: &ModelConfig) -> Result<Self> {
        Self::from_keyed(config, &self.sharing, &self.tensors)
    }

    pub fn sharing(&self) -> &SharingConfig {
        &self.sharing
    }

    /// Checks that every site of `config` resolves to a tensor of the right shape.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if config.sharing != self.sharing {
            return Err(Error::InvalidConfig(format!(
                "store built for scheme {} but config uses {}",
                self.sharing, config.sharing
            )));
        }
        for spec in parameter_sites(config) {
            let tensor = self.get(&spec.key).ok_or_else(|| Error::MissingParameter(spec.key.to_string()))?;
            if tensor.shape() != spec.shape.as_slice() {
                return Err(shape_err("parameter store", "parameter element count", spec.numel(), tensor.numel()));
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, key: ParamKey, tensor: Tensor<T>) {
        self.tensors.insert(key.canonicalize(&self.sharing), tensor);
    }

    /// Tensor read by `site` (canonicalized first).
    pub fn get(&self, site: &ParamKey) -> Option<&Tensor<T>> {
        self.tensors.get(&site.canonicalize(&self.sharing))
    }

    pub fn get_mut(&mut self, site: &ParamKey) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(&site.canonicalize(&self.sharing))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamKey, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&ParamKey, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn tensors(&self) -> &BTreeMap<ParamKey, Tensor<T>> {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Number of sites reading the tensor at canonical `key`.
    pub fn site_refs(&self, key: &ParamKey) -> usize {
        self.site_refs.get(key).copied().unwrap_or(0)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Records every tensor once on `tape`.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Bindings {
        let vars = self
            .tensors
            .iter()
            .map(|(key, tensor)| {
                let t = Tensor::new(tensor.shape(), tensor.data().to_vec()).expect("valid tensor");
                let var = if trainable { tape.parameter(t) } else { tape.constant(t) };
                (*key, var)
            })
            .collect();
        Bindings {
            sharing: self.sharing,
            vars,
        }
    }

    /// Copies gradients from a backpropagated tape into the stored tensors.
    /// Parameters that did not receive a gradient get zeros.
    pub fn absorb_grads(&mut self, tape: &Tape<T>, bindings: &Bindings) -> Result<()> {
        for (key, tensor) in self.tensors.iter_mut() {
            let var = bindings.vars.get(key).ok_or_else(|| Error::MissingParameter(key.to_string()))?;
            let grad = tape
                .grad(*var)
                .map(<[T]>::to_vec)
                .unwrap_or_else(|| vec![T::zero(); tensor.numel()]);
            tensor.set_grad(grad)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        ParameterStore {
            sharing: self.sharing,
            tensors: self.tensors.iter().map(|(k, t)| (*k, t.cast())).collect(),
            site_refs: self.site_refs.clone(),
        }
    }
}

/// Canonical key to tape variable, for one recorded forward pass.
#[derive(Debug, Clone)]
pub struct Bindings {
    sharing: SharingConfig,
    vars: BTreeMap<ParamKey, Var>,
}

impl Bindings {
    pub fn get(&self, site: &ParamKey) -> Result<Var> {
        let key = site.canonicalize(&self.sharing);
        self.vars
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingParameter(key.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamKey, &Var)> {
        self.vars.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;
    use crate::sharing::{enumerate_ablation_grid, Component, TensorRole};

    #[test]
    fn distinct_tensors_match_distinct_canonical_keys() {
        for sharing in enumerate_ablation_grid() {
            let config = ModelConfig::preset(Preset::Tiny).with_sharing(sharing);
            let store: ParameterStore<f64> = ParameterStore::initialize(&config, 3);
            let keys: std::collections::BTreeSet<_> = parameter_sites(&config)
                .iter()
                .map(|s| s.key.canonicalize(&sharing))
                .collect();
            assert_eq!(store.len(), keys.len(), "{sharing}");
            let refs: usize = keys.iter().map(|k| store.site_refs(k)).sum();
            assert_eq!(refs, parameter_sites(&config).len());
        }
    }

    #[test]
    fn write_through_one_site_reads_through_another() {
        let config = ModelConfig::preset(Preset::Tiny).with_sharing("ss".parse().unwrap());
        let mut store: ParameterStore<f64> = ParameterStore::initialize(&config, 1);
        let a = ParamKey::block(Component::Separable, 0, 2, TensorRole::DepthwiseWeight);
        let b = ParamKey::block(Component::Separable, 1, 2, TensorRole::DepthwiseWeight);
        store.get_mut(&a).unwrap().data_mut()[0] = 42.0;
        assert_eq!(store.get(&b).unwrap().data()[0], 42.0);
        let c = ParamKey::block(Component::Separable, 1, 1, TensorRole::DepthwiseWeight);
        assert_ne!(store.get(&c).unwrap().data()[0], 42.0);
    }

    #[test]
    fn unshared_sites_initialize_identically_across_schemes() {
        let base = ModelConfig::preset(Preset::Tiny);
        let plain: ParameterStore<f64> = ParameterStore::initialize(&base, 9);
        for sharing in enumerate_ablation_grid() {
            let shared: ParameterStore<f64> = ParameterStore::initialize(&base.clone().with_sharing(sharing), 9);
            for (key, tensor) in shared.iter() {
                assert_eq!(tensor, plain.get(&key.representative()).unwrap(), "{key}");
            }
        }
    }

    #[test]
    fn missing_parameter_fails_validation() {
        let config = ModelConfig::preset(Preset::Tiny);
        let mut store: ParameterStore<f64> = ParameterStore::initialize(&config, 1);
        let key = ParamKey::block(Component::Pointwise, 1, 1, TensorRole::SkipBias);
        store.tensors.remove(&key);
        assert!(matches!(store.validate(&config), Err(Error::MissingParameter(_))));
    }
}
