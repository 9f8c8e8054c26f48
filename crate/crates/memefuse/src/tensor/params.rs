//! Named, ordered collections of trainable tensors.
//!
//! Order is insertion order everywhere: binding, optimizer state, and
//! checkpoint layout all follow it, which keeps runs reproducible.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// The full trainable state of a model.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|p| p.name == name) {
            return Err(Error::contract(format!("duplicate parameter name {name:?}")));
        }
        self.entries.push(Param { name, value });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|p| p.name == name)
            .map(|p| &mut p.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    /// Pushes every parameter onto a graph, returning ids in insertion order.
    pub fn bind(&self, g: &mut Graph) -> Vec<NodeId> {
        self.entries
            .iter()
            .map(|p| g.parameter(p.value.clone()))
            .collect()
    }

    /// Copies gradients from bound graph leaves back into this set after a
    /// backward pass.
    pub fn harvest(&mut self, g: &Graph, ids: &[NodeId]) -> Result<()> {
        if ids.len() != self.entries.len() {
            return Err(Error::contract(format!(
                "harvest: {} bound ids for {} parameters",
                ids.len(),
                self.entries.len()
            )));
        }
        for (p, &id) in self.entries.iter_mut().zip(ids) {
            let t = g.tensor(id);
            match &t.grad {
                Some(grad) => p.value.grad = Some(grad.clone()),
                None => {
                    return Err(Error::contract(format!(
                        "harvest: no gradient on parameter {:?}; run backward first",
                        p.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.value.grad = None;
        }
    }
}

/// Uniform init over `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init(shape: Vec<usize>, fan_in: usize, rng: &mut impl Rng) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::contract("uniform_init: fan_in must be positive"));
    }
    let bound = 1.0 / (fan_in as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel)
        .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_name_is_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(1.0)).unwrap();
        let err = ps.add("w", Tensor::scalar(2.0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn bind_and_harvest_roundtrip() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::new(vec![2], vec![3.0, -1.0]).unwrap())
            .unwrap();
        let mut g = Graph::new();
        let ids = ps.bind(&mut g);
        let sq = g.mul(ids[0], ids[0]).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss).unwrap();
        ps.harvest(&g, &ids).unwrap();
        assert_eq!(ps.get("w").unwrap().grad.as_deref().unwrap(), &[6.0, -2.0]);
        ps.zero_grads();
        assert!(ps.get("w").unwrap().grad.is_none());
    }

    #[test]
    fn harvest_without_backward_is_an_error() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::scalar(1.0)).unwrap();
        let mut g = Graph::new();
        let ids = ps.bind(&mut g);
        assert!(ps.harvest(&g, &ids).is_err());
    }

    #[test]
    fn uniform_init_is_bounded_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = uniform_init(vec![40, 10], 10, &mut rng).unwrap();
        let bound = 1.0 / 10f64.sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
        assert!(t.data().iter().any(|v| v.abs() > bound * 0.5));

        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let t2 = uniform_init(vec![40, 10], 10, &mut rng2).unwrap();
        assert_eq!(t.data(), t2.data());

        let mut rng3 = ChaCha8Rng::seed_from_u64(8);
        let t3 = uniform_init(vec![40, 10], 10, &mut rng3).unwrap();
        assert_ne!(t.data(), t3.data());
    }
}
