use autodiff::numeric::{central_difference, max_relative_error, with_data};
use autodiff::{grad, no_grad, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::param((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape)
}

/// Compares the analytic gradient of `f` w.r.t. each input against central
/// differences.
fn check(inputs: &[Tensor], f: impl Fn(&[Tensor]) -> Tensor) {
    let out = f(inputs);
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let analytic = grad(&out, &refs, None, false);
    for (k, input) in inputs.iter().enumerate() {
        let numeric = central_difference(input.data(), STEP, |x| {
            let _g = no_grad();
            let mut moved = inputs.to_vec();
            moved[k] = with_data(input, x);
            f(&moved).sum().item()
        });
        let err = max_relative_error(analytic[k].data(), &numeric, 1e-6);
        assert!(err < TOL, "input {k}: relative error {err}");
    }
}

#[test]
fn elementwise_and_broadcast_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&mut rng, &[2, 3, 4]);
    let b = random(&mut rng, &[3, 1]);
    check(&[a.clone(), b.clone()], |t| (&t[0] + &t[1]).mul(&t[0]).sub(&t[1]));
    check(&[a.clone(), b.clone()], |t| t[0].div(&t[1].square().add_scalar(1.0)));
    check(&[a.clone()], |t| t[0].sigmoid().mul(&t[0].tanh()));
    check(&[a.clone()], |t| t[0].exp().add_scalar(1.0).ln().sqrt());
    check(&[a.clone()], |t| t[0].leaky_relu(0.2).mul_scalar(3.0));
    check(&[a.clone()], |t| t[0].abs().powf(1.5));
    check(&[a.clone()], |t| t[0].sum_axes(&[0, 2], true).square());
    check(&[a.clone()], |t| t[0].mean_axes(&[1], false).square());
    check(&[b.clone()], |t| t[0].broadcast_to(&[2, 3, 5]).square());
    check(&[a.reshape(&[6, 4]).detach().requires_grad_leaf()], |t| t[0].row_norms());
    check(&[a.reshape(&[6, 4]).detach().requires_grad_leaf()], |t| t[0].log_softmax().mul(&t[0]));
}

#[test]
fn layout_and_matmul_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[4, 5]);
    let c = random(&mut rng, &[3, 2]);
    check(&[a.clone(), b.clone()], |t| t[0].matmul(&t[1]).square());
    check(&[a.clone(), c.clone()], |t| Tensor::cat(&[t[0].clone(), t[1].clone()], 1).square());
    check(&[a.clone()], |t| t[0].narrow(1, 1, 2).square().t());
    check(&[a.clone()], |t| t[0].index_select(&[2, 0, 2]).square());
    check(&[a.clone()], |t| t[0].index_add(&[1, 1, 0], 2).square());
    check(&[a.clone()], |t| t[0].pad_axis(0, 1, 5).exp());
}

#[test]
fn convolution_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(h, k, s, p) in &[(6, 3, 1, 1), (8, 4, 2, 1), (5, 5, 1, 2)] {
        let x = random(&mut rng, &[2, 2, h, h]);
        let w = random(&mut rng, &[3, 2, k, k]);
        check(&[x.clone(), w.clone()], |t| t[0].conv2d(&t[1], s, p).square());
        let y_shape = x.conv2d(&w, s, p).shape().to_vec();
        let y = random(&mut rng, &y_shape);
        check(&[y.clone(), w.clone()], |t| t[0].conv_transpose2d(&t[1], s, p, (h, h)).square());
        check(&[x.clone(), y.clone()], |t| {
            t[0].conv2d_weight_grad(&t[1], &[3, 2, k, k], s, p).square()
        });
    }
}

/// d/dθ ‖∇_x f(x; θ)‖² against finite differences of a first-order gradient.
#[test]
fn second_order_through_conv_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[2, 3, 8, 8]);
    let w1 = random(&mut rng, &[4, 3, 4, 4]);
    let w2 = random(&mut rng, &[1, 4, 4, 4]);
    let penalty = |x: &Tensor, w1: &Tensor, w2: &Tensor, create: bool| {
        let score = x.conv2d(w1, 2, 1).leaky_relu(0.1).conv2d(w2, 2, 1).tanh().sum();
        let gx = grad(&score, &[x], None, create).remove(0);
        gx.reshape(&[2, 3 * 64]).row_norms().add_scalar(-1.0).square().mean()
    };
    let gp = penalty(&x, &w1, &w2, true);
    let analytic = grad(&gp, &[&w1, &w2], None, false);
    for (k, w) in [&w1, &w2].into_iter().enumerate() {
        let numeric = central_difference(w.data(), STEP, |d| {
            let moved = with_data(w, d);
            let (a, b) = if k == 0 { (&moved, &w2) } else { (&w1, &moved) };
            penalty(&x, a, b, false).item()
        });
        let err = max_relative_error(analytic[k].data(), &numeric, 1e-6);
        assert!(err < 1e-5, "weight {k}: relative error {err}");
    }
}

#[test]
fn unrelated_inputs_get_zero_grad() {
    let a = Tensor::param(vec![1.0, 2.0], &[2]);
    let b = Tensor::param(vec![3.0], &[1]);
    let g = grad(&a.square().sum(), &[&a, &b], None, false);
    assert_eq!(g[0].data(), &[2.0, 4.0]);
    assert_eq!(g[1].data(), &[0.0]);
}

#[test]
fn no_grad_records_nothing() {
    let a = Tensor::param(vec![1.0, 2.0], &[2]);
    let out = {
        let _g = no_grad();
        a.square()
    };
    assert!(!out.requires_grad());
    assert!(a.square().requires_grad());
}

#[test]
fn deep_chain_drops_without_overflow() {
    let a = Tensor::param(vec![0.5], &[1]);
    let mut x = a.clone();
    for _ in 0..200_000 {
        x = x.mul_scalar(1.0);
    }
    drop(x);
}

proptest! {
    #[test]
    fn sum_to_is_adjoint_of_broadcast(
        (small, big) in (1usize..4, 1usize..4, 1usize..4).prop_map(|(a, b, c)| (vec![a, 1, c], vec![2, a, b, c])),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, &small).detach();
        let y = random(&mut rng, &big).detach();
        let lhs: f64 = x.broadcast_to(&big).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(y.sum_to(&small).data()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}
