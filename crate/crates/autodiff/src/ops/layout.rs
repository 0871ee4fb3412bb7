use crate::Tensor;

/// `(outer, axis_len, inner)` for slicing along `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.numel(),
            "cannot reshape {:?} to {shape:?}",
            self.shape()
        );
        if self.shape() == shape {
            return self.clone();
        }
        let src_shape = self.shape().to_vec();
        self.with_shared_data(shape.to_vec(), "reshape", move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.reshape(&src_shape))]
        })
    }

    /// Transpose of a matrix.
    pub fn t(&self) -> Tensor {
        assert_eq!(self.ndim(), 2, "t() expects a matrix, got {:?}", self.shape());
        let (r, c) = (self.dim(0), self.dim(1));
        let src = self.data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        Tensor::from_op(data, vec![c, r], "t", vec![self.clone()], |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.t())]
        })
    }

    /// Contiguous slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor {
        let shape = self.shape().to_vec();
        assert!(start + len <= shape[axis], "narrow out of range on {shape:?}");
        let (outer, n, inner) = split_at_axis(&shape, axis);
        let src = self.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        Tensor::from_op(data, out_shape, "narrow", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.pad_axis(axis, start, n))]
        })
    }

    /// Embeds this tensor at offset `start` of a zero tensor whose `axis`
    /// has length `full`; the adjoint of `narrow`.
    pub fn pad_axis(&self, axis: usize, start: usize, full: usize) -> Tensor {
        let shape = self.shape().to_vec();
        let len = shape[axis];
        assert!(start + len <= full);
        let (outer, _, inner) = split_at_axis(&shape, axis);
        let src = self.data();
        let mut data = vec![0.0; outer * full * inner];
        for o in 0..outer {
            let dst = (o * full + start) * inner;
            data[dst..dst + len * inner].copy_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = full;
        Tensor::from_op(data, out_shape, "pad_axis", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.narrow(axis, start, len))]
        })
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn cat(parts: &[Tensor], axis: usize) -> Tensor {
        assert!(!parts.is_empty(), "cat of nothing");
        let first = parts[0].shape();
        for p in parts {
            assert_eq!(p.ndim(), first.len());
            for (d, (&a, &b)) in p.shape().iter().zip(first).enumerate() {
                assert!(d == axis || a == b, "cat shape mismatch {:?} vs {first:?}", p.shape());
            }
        }
        let lens: Vec<usize> = parts.iter().map(|p| p.dim(axis)).collect();
        let total: usize = lens.iter().sum();
        let (outer, _, inner) = split_at_axis(first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &len) in parts.iter().zip(&lens) {
                data.extend_from_slice(&p.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut out_shape = first.to_vec();
        out_shape[axis] = total;
        Tensor::from_op(data, out_shape, "cat", parts.to_vec(), move |ctx| {
            let mut offset = 0;
            lens.iter()
                .enumerate()
                .map(|(i, &len)| {
                    let g = ctx.needs[i].then(|| ctx.grad.narrow(axis, offset, len));
                    offset += len;
                    g
                })
                .collect()
        })
    }

    /// Gathers rows (slices along axis 0) by index.
    pub fn index_select(&self, indices: &[usize]) -> Tensor {
        let rows = self.dim(0);
        let row_len: usize = self.shape()[1..].iter().product();
        let src = self.data();
        let mut data = Vec::with_capacity(indices.len() * row_len);
        for &i in indices {
            assert!(i < rows, "index {i} out of range for {rows} rows");
            data.extend_from_slice(&src[i * row_len..(i + 1) * row_len]);
        }
        let mut shape = self.shape().to_vec();
        shape[0] = indices.len();
        let idx = indices.to_vec();
        Tensor::from_op(data, shape, "index_select", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.index_add(&idx, rows))]
        })
    }

    /// Scatters rows into a zero tensor with `rows` rows, summing
    /// duplicates; the adjoint of `index_select`.
    pub fn index_add(&self, indices: &[usize], rows: usize) -> Tensor {
        assert_eq!(indices.len(), self.dim(0));
        let row_len: usize = self.shape()[1..].iter().product();
        let src = self.data();
        let mut data = vec![0.0; rows * row_len];
        for (k, &i) in indices.iter().enumerate() {
            let dst = &mut data[i * row_len..(i + 1) * row_len];
            for (d, s) in dst.iter_mut().zip(&src[k * row_len..(k + 1) * row_len]) {
                *d += s;
            }
        }
        let mut shape = self.shape().to_vec();
        shape[0] = rows;
        let idx = indices.to_vec();
        Tensor::from_op(data, shape, "index_add", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.index_select(&idx))]
        })
    }
}
