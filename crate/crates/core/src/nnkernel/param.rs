use rand::Rng;

use super::{KernelError, Scalar, Tensor};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// A learnable tensor together with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBuffer<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
}

impl<S: Scalar> ParamBuffer<S> {
    pub fn new(name: impl Into<String>, value: Tensor<S>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(S::zero());
    }

    pub fn accumulate(&mut self, g: &Tensor<S>) -> Result<(), KernelError> {
        self.grad.add_assign(g).map_err(|e| match e {
            KernelError::Shape(msg) => KernelError::Shape(format!("{}: {msg}", self.name)),
            other => other,
        })
    }
}

/// Ordered collection of named parameters. Insertion order is the
/// checkpoint order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<S> {
    params: Vec<ParamBuffer<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<ParamId, KernelError> {
        let name = name.into();
        if self.find(&name).is_some() {
            return Err(KernelError::Param(format!("duplicate parameter {name:?}")));
        }
        self.params.push(ParamBuffer::new(name, value));
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, KernelError> {
        self.find(name)
            .ok_or_else(|| KernelError::Param(format!("no parameter named {name:?}")))
    }

    pub fn get(&self, id: ParamId) -> &ParamBuffer<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamBuffer<S> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamBuffer<S>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamBuffer<S>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(ParamBuffer::zero_grad);
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| ParamBuffer {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
        }
    }
}

/// Uniform Glorot initialisation for a tensor with the given fan-in/out.
pub fn glorot_uniform<S: Scalar, R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<S> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| S::lit(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches element count")
}
