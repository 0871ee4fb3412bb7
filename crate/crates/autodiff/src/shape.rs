//! Broadcasting and strided iteration helpers.

pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

pub fn contiguous_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i] = acc;
        acc *= shape[i];
    }
    strides
}

/// Strides of `src` viewed as `out` under right-aligned broadcasting;
/// broadcast dimensions get stride 0.
pub fn broadcast_strides(src: &[usize], out: &[usize]) -> Vec<usize> {
    assert!(src.len() <= out.len(), "cannot broadcast {src:?} to {out:?}");
    let base = contiguous_strides(src);
    let offset = out.len() - src.len();
    (0..out.len())
        .map(|i| {
            if i < offset {
                0
            } else {
                let d = src[i - offset];
                assert!(
                    d == out[i] || d == 1,
                    "cannot broadcast {src:?} to {out:?}"
                );
                if d == 1 && out[i] != 1 {
                    0
                } else {
                    base[i - offset]
                }
            }
        })
        .collect()
}

/// An iteration plan over `shape` for several operands with given strides.
/// Adjacent dimensions that are contiguous for every operand are merged so
/// the innermost run is as long as possible.
pub struct StridedPlan<const N: usize> {
    shape: Vec<usize>,
    strides: [Vec<usize>; N],
}

impl<const N: usize> StridedPlan<N> {
    pub fn new(shape: &[usize], strides: [Vec<usize>; N]) -> Self {
        let mut m_shape: Vec<usize> = Vec::with_capacity(shape.len());
        let mut m_strides: [Vec<usize>; N] = std::array::from_fn(|_| Vec::new());
        for (d, &len) in shape.iter().enumerate() {
            if len == 1 {
                continue;
            }
            let mergeable = !m_shape.is_empty()
                && (0..N).all(|k| {
                    let prev = *m_strides[k].last().unwrap();
                    prev == strides[k][d] * len
                });
            if mergeable {
                *m_shape.last_mut().unwrap() *= len;
                for k in 0..N {
                    *m_strides[k].last_mut().unwrap() = strides[k][d];
                }
            } else {
                m_shape.push(len);
                for k in 0..N {
                    m_strides[k].push(strides[k][d]);
                }
            }
        }
        StridedPlan {
            shape: m_shape,
            strides: m_strides,
        }
    }

    /// Calls `f(offsets, run_len, run_strides)` for every innermost run, in
    /// row-major order over the plan's shape.
    pub fn for_each_run(&self, mut f: impl FnMut([usize; N], usize, [usize; N])) {
        let nd = self.shape.len();
        if nd == 0 {
            f([0; N], 1, [0; N]);
            return;
        }
        if self.shape.contains(&0) {
            return;
        }
        let inner = self.shape[nd - 1];
        let inner_strides: [usize; N] = std::array::from_fn(|k| self.strides[k][nd - 1]);
        let outer = &self.shape[..nd - 1];
        let mut idx = vec![0usize; outer.len()];
        let mut offs = [0usize; N];
        loop {
            f(offs, inner, inner_strides);
            let mut d = outer.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                for (k, o) in offs.iter_mut().enumerate() {
                    *o += self.strides[k][d];
                }
                if idx[d] < outer[d] {
                    break;
                }
                for (k, o) in offs.iter_mut().enumerate() {
                    *o -= self.strides[k][d] * outer[d];
                }
                idx[d] = 0;
            }
        }
    }
}

/// Elementwise `f(a, b)` with numpy broadcasting.
pub fn broadcast_binary(
    a: &[f64],
    a_shape: &[usize],
    b: &[f64],
    b_shape: &[usize],
    f: impl Fn(f64, f64) -> f64,
) -> (Vec<f64>, Vec<usize>) {
    let out_shape = broadcast_shape(a_shape, b_shape)
        .unwrap_or_else(|| panic!("shapes {a_shape:?} and {b_shape:?} do not broadcast"));
    if a_shape == b_shape {
        let data = a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        return (data, out_shape);
    }
    if b.len() == 1 {
        let y = b[0];
        if a_shape == out_shape.as_slice() {
            return (a.iter().map(|&x| f(x, y)).collect(), out_shape);
        }
    }
    if a.len() == 1 {
        let x = a[0];
        if b_shape == out_shape.as_slice() {
            return (b.iter().map(|&y| f(x, y)).collect(), out_shape);
        }
    }
    let n: usize = out_shape.iter().product();
    let mut out = Vec::with_capacity(n);
    let plan = StridedPlan::new(
        &out_shape,
        [
            broadcast_strides(a_shape, &out_shape),
            broadcast_strides(b_shape, &out_shape),
        ],
    );
    plan.for_each_run(|[oa, ob], len, [sa, sb]| match (sa, sb) {
        (1, 1) => out.extend(a[oa..oa + len].iter().zip(&b[ob..ob + len]).map(|(&x, &y)| f(x, y))),
        (1, 0) => {
            let y = b[ob];
            out.extend(a[oa..oa + len].iter().map(|&x| f(x, y)));
        }
        (0, 1) => {
            let x = a[oa];
            out.extend(b[ob..ob + len].iter().map(|&y| f(x, y)));
        }
        _ => out.extend((0..len).map(|i| f(a[oa + i * sa], b[ob + i * sb]))),
    });
    (out, out_shape)
}

/// Materializes `src` broadcast to `out_shape`.
pub fn expand(src: &[f64], src_shape: &[usize], out_shape: &[usize]) -> Vec<f64> {
    let n: usize = out_shape.iter().product();
    if src_shape == out_shape {
        return src.to_vec();
    }
    if src.len() == 1 {
        return vec![src[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let plan = StridedPlan::new(out_shape, [broadcast_strides(src_shape, out_shape)]);
    plan.for_each_run(|[o], len, [s]| {
        if s == 1 {
            out.extend_from_slice(&src[o..o + len]);
        } else if s == 0 {
            out.extend(std::iter::repeat(src[o]).take(len));
        } else {
            out.extend((0..len).map(|i| src[o + i * s]));
        }
    });
    out
}

/// Sums `src` (of `src_shape`) down to `dst_shape`, the inverse of
/// broadcasting `dst_shape` up to `src_shape`.
pub fn reduce_to(src: &[f64], src_shape: &[usize], dst_shape: &[usize]) -> Vec<f64> {
    if src_shape == dst_shape {
        return src.to_vec();
    }
    let n: usize = dst_shape.iter().product();
    let mut out = vec![0.0; n];
    if n == 1 {
        out[0] = src.iter().sum();
        return out;
    }
    let dst_strides = broadcast_strides(dst_shape, src_shape);
    let plan = StridedPlan::new(src_shape, [contiguous_strides(src_shape), dst_strides]);
    plan.for_each_run(|[os, od], len, [ss, sd]| {
        if sd == 0 {
            let s: f64 = (0..len).map(|i| src[os + i * ss]).sum();
            out[od] += s;
        } else {
            for i in 0..len {
                out[od + i * sd] += src[os + i * ss];
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_shapes() {
        assert_eq!(broadcast_shape(&[2, 1, 3], &[4, 1]), Some(vec![2, 4, 3]));
        assert_eq!(broadcast_shape(&[], &[3]), Some(vec![3]));
        assert_eq!(broadcast_shape(&[2], &[3]), None);
    }

    #[test]
    fn binary_matches_naive_indexing() {
        // a: [2,1,3], b: [1,4,1]
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let b: Vec<f64> = (0..4).map(|v| 10.0 * v as f64).collect();
        let (out, shape) = broadcast_binary(&a, &[2, 1, 3], &b, &[1, 4, 1], |x, y| x + y);
        assert_eq!(shape, vec![2, 4, 3]);
        for i in 0..2 {
            for j in 0..4 {
                for k in 0..3 {
                    assert_eq!(out[i * 12 + j * 3 + k], a[i * 3 + k] + b[j]);
                }
            }
        }
    }

    #[test]
    fn reduce_inverts_expand_counts() {
        let src = vec![1.0, 2.0, 3.0];
        let big = expand(&src, &[3, 1], &[2, 3, 4]);
        assert_eq!(big.len(), 24);
        let back = reduce_to(&big, &[2, 3, 4], &[3, 1]);
        assert_eq!(back, vec![8.0, 16.0, 24.0]);
    }
}
