//! Explicit reverse-mode tape.
//!
//! Every operator computes its forward value eagerly and pushes a
//! [`TapeOp`] holding whatever it needs for the adjoint. [`Tape::backward`]
//! consumes the tape, so each recorded forward is differentiated at most
//! once.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use super::{KernelError, ParamId, ParamStore, Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Hand-derived adjoint of one recorded operator.
pub trait TapeOp<S: Scalar>: Send {
    fn name(&self) -> &'static str;

    fn inputs(&self) -> Vec<Var>;

    /// Cotangents for [`TapeOp::inputs`], in the same order.
    fn backward(
        &self,
        values: &ValueView<'_, S>,
        output: &Tensor<S>,
        grad_output: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError>;

    /// Feeds the discrete choices of the forward pass (argmax positions,
    /// activation masks) into `hasher`. Two evaluations with equal
    /// fingerprints lie in the same smooth piece of the function.
    fn fingerprint(&self, _hasher: &mut DefaultHasher) {}
}

enum Origin<S: Scalar> {
    Leaf,
    Param(ParamId),
    Op(Box<dyn TapeOp<S>>),
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    origin: Origin<S>,
}

/// Read access to the values recorded so far.
pub struct ValueView<'a, S: Scalar> {
    nodes: &'a [Node<S>],
}

impl<S: Scalar> ValueView<'_, S> {
    pub fn get(&self, var: Var) -> &Tensor<S> {
        &self.nodes[var.0].value
    }
}

#[derive(Default)]
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant input. Its gradient is reported by
    /// [`Tape::backward`] but not stored anywhere else.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value,
            origin: Origin::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a parameter; its gradient is accumulated into the store.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.value(id).clone(),
            origin: Origin::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn push(&mut self, value: Tensor<S>, op: Box<dyn TapeOp<S>>) -> Var {
        self.nodes.push(Node {
            value,
            origin: Origin::Op(op),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor<S> {
        &self.nodes[var.0].value
    }

    pub fn values(&self) -> ValueView<'_, S> {
        ValueView { nodes: &self.nodes }
    }

    /// Hash of every discrete forward decision on the tape.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for node in &self.nodes {
            if let Origin::Op(op) = &node.origin {
                op.fingerprint(&mut hasher);
            }
        }
        hasher.finish()
    }

    /// Fails on the first recorded value holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<(), KernelError> {
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.value.all_finite() {
                let name = match &node.origin {
                    Origin::Leaf => "leaf",
                    Origin::Param(_) => "param",
                    Origin::Op(op) => op.name(),
                };
                return Err(KernelError::NonFinite(format!("node {i} ({name})")));
            }
        }
        Ok(())
    }

    /// Propagates the seeded cotangents back to every node. Parameter
    /// gradients are added to `store`; all node gradients are returned.
    pub fn backward(
        self,
        seeds: Vec<(Var, Tensor<S>)>,
        store: &mut ParamStore<S>,
    ) -> Result<Gradients<S>, KernelError> {
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (var, seed) in seeds {
            seed.expect_shape(self.nodes[var.0].value.shape())?;
            accumulate(&mut grads[var.0], seed)?;
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            let (before, rest) = self.nodes.split_at(idx);
            let node = &rest[0];
            match &node.origin {
                Origin::Leaf => {}
                Origin::Param(id) => store.get_mut(*id).accumulate(&grad)?,
                Origin::Op(op) => {
                    let view = ValueView { nodes: before };
                    let input_grads = op.backward(&view, &node.value, &grad)?;
                    for (var, g) in op.inputs().into_iter().zip(input_grads) {
                        if !g.all_finite() {
                            return Err(KernelError::NonFinite(format!(
                                "gradient of node {} ({})",
                                var.0,
                                op.name()
                            )));
                        }
                        g.expect_shape(before[var.0].value.shape())?;
                        accumulate(&mut grads[var.0], g)?;
                    }
                }
            }
            grads[idx] = Some(grad);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<S: Scalar>(slot: &mut Option<Tensor<S>>, g: Tensor<S>) -> Result<(), KernelError> {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Cotangents of every node reached by [`Tape::backward`].
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, var: Var) -> Option<&Tensor<S>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}
