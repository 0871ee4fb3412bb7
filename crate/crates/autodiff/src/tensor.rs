use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Whether operations on the current thread record a backward graph.
pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Restores the previous grad mode when dropped.
#[must_use = "grad mode is restored as soon as the guard is dropped"]
pub struct GradModeGuard {
    prev: bool,
}

impl Drop for GradModeGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

/// Disables graph recording on this thread until the guard is dropped.
pub fn no_grad() -> GradModeGuard {
    set_grad_enabled(false)
}

pub fn set_grad_enabled(enabled: bool) -> GradModeGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(enabled));
    GradModeGuard { prev }
}

/// Context handed to a backward closure.
pub struct BackwardCtx<'a> {
    pub inputs: &'a [Tensor],
    pub output: &'a Tensor,
    pub grad: &'a Tensor,
    /// `needs[i]` is false when no requested gradient depends on input `i`.
    pub needs: &'a [bool],
}

pub(crate) type BackwardFn = dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>> + Send + Sync;

pub(crate) struct Node {
    pub(crate) op: &'static str,
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) backward: Box<BackwardFn>,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Arc<[f64]>,
    requires_grad: bool,
    node: Option<Node>,
}

/// Dense, immutable, row-major `f64` tensor.
///
/// Cloning is cheap (reference counted). A tensor produced by an operation
/// while grad mode is enabled and any input requires grad carries a backward
/// node; those nodes are themselves built from tensor operations, so
/// gradients can be differentiated again.
#[derive(Clone)]
pub struct Tensor(Arc<Inner>);

impl Tensor {
    fn build(data: Arc<[f64]>, shape: Vec<usize>, requires_grad: bool, node: Option<Node>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length does not match shape {shape:?}"
        );
        Tensor(Arc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            node,
        }))
    }

    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Self {
        Self::build(data.into(), shape.to_vec(), false, None)
    }

    pub fn from_slice(data: &[f64], shape: &[usize]) -> Self {
        Self::build(data.into(), shape.to_vec(), false, None)
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_vec(vec![value], &[])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::from_vec(vec![value; shape.iter().product()], shape)
    }

    /// A leaf tensor that gradients are tracked for.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Self {
        Self::build(data.into(), shape.to_vec(), true, None)
    }

    /// Leaf sharing this tensor's storage, with gradient tracking enabled.
    pub fn requires_grad_leaf(&self) -> Self {
        Self::build(self.0.data.clone(), self.0.shape.clone(), true, None)
    }

    /// Leaf sharing this tensor's storage, cut from any graph.
    pub fn detach(&self) -> Self {
        if !self.0.requires_grad {
            return self.clone();
        }
        Self::build(self.0.data.clone(), self.0.shape.clone(), false, None)
    }

    pub(crate) fn from_op<F>(
        data: Vec<f64>,
        shape: Vec<usize>,
        op: &'static str,
        inputs: Vec<Tensor>,
        backward: F,
    ) -> Self
    where
        F: Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>> + Send + Sync + 'static,
    {
        let track = is_grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        if track {
            let node = Node {
                op,
                inputs,
                backward: Box::new(backward),
            };
            Self::build(data.into(), shape, true, Some(node))
        } else {
            Self::build(data.into(), shape, false, None)
        }
    }

    /// Shares storage under a new shape; used by reshape.
    pub(crate) fn with_shared_data<F>(
        &self,
        shape: Vec<usize>,
        op: &'static str,
        backward: F,
    ) -> Self
    where
        F: Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>> + Send + Sync + 'static,
    {
        let track = is_grad_enabled() && self.requires_grad();
        let node = track.then(|| Node {
            op,
            inputs: vec![self.clone()],
            backward: Box::new(backward),
        });
        Self::build(self.0.data.clone(), shape, track, node)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.0.shape[axis]
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    /// Name of the operation that produced this tensor, if it is tracked.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.node.as_ref().map(|n| n.op)
    }

    pub(crate) fn node(&self) -> Option<&Node> {
        self.0.node.as_ref()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.shape());
        if self.numel() <= 16 {
            s.field("data", &self.data());
        }
        if let Some(op) = self.op_name() {
            s.field("op", &op);
        }
        s.field("requires_grad", &self.requires_grad()).finish()
    }
}

impl Drop for Inner {
    // Long recurrent graphs form deep chains of nodes; unlink them
    // iteratively so dropping a loss never recurses once per op.
    fn drop(&mut self) {
        let mut stack: Vec<Tensor> = match self.node.take() {
            Some(node) => node.inputs,
            None => return,
        };
        while let Some(t) = stack.pop() {
            if let Ok(mut inner) = Arc::try_unwrap(t.0) {
                if let Some(node) = inner.node.take() {
                    stack.extend(node.inputs);
                }
            }
        }
    }
}
