use crate::Tensor;

/// `C = alpha * A * B + beta * C` for row-major operands with explicit
/// strides (so transposed views need no copy).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_rs: usize,
    a_cs: usize,
    b: &[f64],
    b_rs: usize,
    b_cs: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!(a.len() > (m - 1) * a_rs + (k - 1) * a_cs);
        assert!(b.len() > (k - 1) * b_rs + (n - 1) * b_cs);
    }
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_rs as isize,
            a_cs as isize,
            b.as_ptr(),
            b_rs as isize,
            b_cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tensor {
    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert!(
            self.ndim() == 2 && other.ndim() == 2 && self.dim(1) == other.dim(0),
            "matmul shape mismatch {:?} x {:?}",
            self.shape(),
            other.shape()
        );
        let (m, k, n) = (self.dim(0), self.dim(1), other.dim(1));
        let mut data = vec![0.0; m * n];
        gemm(m, k, n, self.data(), k, 1, other.data(), n, 1, 0.0, &mut data);
        Tensor::from_op(data, vec![m, n], "matmul", vec![self.clone(), other.clone()], |ctx| {
            let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
            vec![
                ctx.needs[0].then(|| ctx.grad.matmul(&b.t())),
                ctx.needs[1].then(|| a.t().matmul(ctx.grad)),
            ]
        })
    }
}
