//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its output
//! value and enough context to run its adjoint. Sequence-aware operations
//! (attention, recurrence, pooling) take explicit row [`Span`]s, so batches of
//! variable-length sequences are packed without padding and padded positions
//! never enter a computation.

mod gradcheck;
mod ops;
mod params;

pub use gradcheck::{check_gradients, TensorCheck, ZERO_GRADIENT};
pub use ops::{attention_probs, ConvGeometry};
pub use params::{Bound, ParamId, ParamStore};

use alloc::vec::Vec;

use crate::tensor::Tensor;

/// A contiguous run of rows forming one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// `count` back-to-back spans of equal length.
    pub fn uniform(count: usize, len: usize) -> Vec<Span> {
        (0..count).map(|i| Span::new(i * len, len)).collect()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct Node {
    value: Tensor,
    op: ops::Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: ops::Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, ops::Op::Leaf, true)
    }

    /// A leaf that never receives a gradient (inputs, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, ops::Op::Leaf, false)
    }

    /// Binds every tensor of `store` as a leaf. Frozen stores produce
    /// constants, so no gradient can reach them.
    pub fn bind(&mut self, store: &ParamStore, trainable: bool) -> Bound {
        let vars = store
            .tensors()
            .iter()
            .map(|t| {
                if trainable {
                    self.param(t.clone())
                } else {
                    self.constant(t.clone())
                }
            })
            .collect();
        Bound::new(vars)
    }

    /// Runs the adjoint sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward starts from a scalar"
        );
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        if !self.needs_grad(loss) {
            return Grads { grads };
        }
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if matches!(node.op, ops::Op::Leaf) {
                grads[i] = Some(upstream);
                continue;
            }
            ops::backward(self, &node.op, &node.value, &upstream, &mut grads);
        }
        Grads { grads }
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    /// Gradient of a leaf, or `None` when nothing flowed into it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients for every bound parameter in store order; parameters the
    /// loss does not depend on get zeros.
    pub fn collect(&self, graph: &Graph, bound: &Bound) -> Vec<Tensor> {
        bound
            .vars()
            .iter()
            .map(|&v| match self.get(v) {
                Some(g) => g.clone(),
                None => {
                    let (r, c) = graph.value(v).shape();
                    Tensor::zeros(r, c)
                }
            })
            .collect()
    }
}
