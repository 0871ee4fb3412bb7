use crate::shape::{expand, reduce_to};
use crate::Tensor;

impl Tensor {
    /// Sum of all elements, as a 0-d tensor.
    pub fn sum(&self) -> Tensor {
        self.sum_to(&[])
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().mul_scalar(1.0 / n)
    }

    /// Sums the given axes; reduced axes are kept as size 1 when `keepdim`.
    pub fn sum_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let kept: Vec<usize> = self
            .shape()
            .iter()
            .enumerate()
            .map(|(i, &d)| if axes.contains(&i) { 1 } else { d })
            .collect();
        let summed = self.sum_to(&kept);
        if keepdim {
            summed
        } else {
            let squeezed: Vec<usize> = self
                .shape()
                .iter()
                .enumerate()
                .filter(|(i, _)| !axes.contains(i))
                .map(|(_, &d)| d)
                .collect();
            summed.reshape(&squeezed)
        }
    }

    pub fn mean_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let count: usize = axes.iter().map(|&a| self.dim(a)).product();
        self.sum_axes(axes, keepdim).mul_scalar(1.0 / count.max(1) as f64)
    }

    /// Reduces by summation to `shape`, which must broadcast to this
    /// tensor's shape.
    pub fn sum_to(&self, shape: &[usize]) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let data = reduce_to(self.data(), self.shape(), shape);
        let src_shape = self.shape().to_vec();
        Tensor::from_op(data, shape.to_vec(), "sum_to", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.broadcast_to(&src_shape))]
        })
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let data = expand(self.data(), self.shape(), shape);
        let src_shape = self.shape().to_vec();
        Tensor::from_op(data, shape.to_vec(), "broadcast_to", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.sum_to(&src_shape))]
        })
    }

    /// Euclidean norm of each row of a 2-d tensor, shape `[rows]`.
    ///
    /// The gradient at a zero row is taken as zero.
    pub fn row_norms(&self) -> Tensor {
        assert_eq!(self.ndim(), 2, "row_norms expects a matrix");
        let cols = self.dim(1);
        let data: Vec<f64> = self
            .data()
            .chunks(cols.max(1))
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let rows = self.dim(0);
        Tensor::from_op(data, vec![rows], "row_norms", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| {
                let out = ctx.output;
                let zero_fix = Tensor::from_vec(
                    out.data().iter().map(|&v| if v == 0.0 { 1.0 } else { 0.0 }).collect(),
                    &[rows],
                );
                let scale = ctx.grad.div(&out.add(&zero_fix)).reshape(&[rows, 1]);
                scale.mul(&ctx.inputs[0])
            })]
        })
    }

    /// Row-wise maximum of a 2-d tensor, outside the graph.
    pub fn row_max_detached(&self) -> Tensor {
        assert_eq!(self.ndim(), 2);
        let cols = self.dim(1);
        let data = self
            .data()
            .chunks(cols.max(1))
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Tensor::from_vec(data, &[self.dim(0), 1])
    }

    /// Numerically stable log-softmax over the last axis of a 2-d tensor.
    pub fn log_softmax(&self) -> Tensor {
        let shifted = self.sub(&self.row_max_detached());
        let lse = shifted.exp().sum_axes(&[1], true).ln();
        shifted.sub(&lse)
    }

    /// Index of the maximum per row; ties resolve to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        assert_eq!(self.ndim(), 2);
        let cols = self.dim(1);
        self.data().chunks(cols.max(1)).map(argmax).collect()
    }
}

/// Index of the first maximal element.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
