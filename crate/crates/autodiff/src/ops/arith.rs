use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::shape::broadcast_binary;
use crate::Tensor;

fn unary<F>(x: &Tensor, op: &'static str, f: F, backward: impl Fn(&crate::BackwardCtx<'_>) -> Tensor + Send + Sync + 'static) -> Tensor
where
    F: Fn(f64) -> f64,
{
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_op(data, x.shape().to_vec(), op, vec![x.clone()], move |ctx| {
        vec![ctx.needs[0].then(|| backward(ctx))]
    })
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Tensor {
        let (data, shape) = broadcast_binary(self.data(), self.shape(), other.data(), other.shape(), |a, b| a + b);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(data, shape, "add", vec![self.clone(), other.clone()], move |ctx| {
            vec![
                ctx.needs[0].then(|| ctx.grad.sum_to(&sa)),
                ctx.needs[1].then(|| ctx.grad.sum_to(&sb)),
            ]
        })
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let (data, shape) = broadcast_binary(self.data(), self.shape(), other.data(), other.shape(), |a, b| a - b);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(data, shape, "sub", vec![self.clone(), other.clone()], move |ctx| {
            vec![
                ctx.needs[0].then(|| ctx.grad.sum_to(&sa)),
                ctx.needs[1].then(|| ctx.grad.sum_to(&sb).neg()),
            ]
        })
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        let (data, shape) = broadcast_binary(self.data(), self.shape(), other.data(), other.shape(), |a, b| a * b);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(data, shape, "mul", vec![self.clone(), other.clone()], move |ctx| {
            let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
            vec![
                ctx.needs[0].then(|| ctx.grad.mul(b).sum_to(&sa)),
                ctx.needs[1].then(|| ctx.grad.mul(a).sum_to(&sb)),
            ]
        })
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        let (data, shape) = broadcast_binary(self.data(), self.shape(), other.data(), other.shape(), |a, b| a / b);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(data, shape, "div", vec![self.clone(), other.clone()], move |ctx| {
            let b = &ctx.inputs[1];
            vec![
                ctx.needs[0].then(|| ctx.grad.div(b).sum_to(&sa)),
                ctx.needs[1].then(|| ctx.grad.mul(ctx.output).div(b).neg().sum_to(&sb)),
            ]
        })
    }

    pub fn neg(&self) -> Tensor {
        unary(self, "neg", |v| -v, |ctx| ctx.grad.neg())
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        unary(self, "add_scalar", move |v| v + c, |ctx| ctx.grad.clone())
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        unary(self, "mul_scalar", move |v| v * c, move |ctx| ctx.grad.mul_scalar(c))
    }

    /// `c - self`
    pub fn rsub_scalar(&self, c: f64) -> Tensor {
        unary(self, "rsub_scalar", move |v| c - v, |ctx| ctx.grad.neg())
    }

    pub fn powf(&self, p: f64) -> Tensor {
        unary(self, "powf", move |v| v.powf(p), move |ctx| {
            ctx.grad.mul(&ctx.inputs[0].powf(p - 1.0)).mul_scalar(p)
        })
    }

    pub fn square(&self) -> Tensor {
        unary(self, "square", |v| v * v, |ctx| ctx.grad.mul(&ctx.inputs[0]).mul_scalar(2.0))
    }

    pub fn exp(&self) -> Tensor {
        unary(self, "exp", f64::exp, |ctx| ctx.grad.mul(ctx.output))
    }

    pub fn ln(&self) -> Tensor {
        unary(self, "ln", f64::ln, |ctx| ctx.grad.div(&ctx.inputs[0]))
    }

    pub fn sqrt(&self) -> Tensor {
        unary(self, "sqrt", f64::sqrt, |ctx| ctx.grad.div(ctx.output).mul_scalar(0.5))
    }

    pub fn sigmoid(&self) -> Tensor {
        unary(
            self,
            "sigmoid",
            |v| 1.0 / (1.0 + (-v).exp()),
            |ctx| {
                let y = ctx.output;
                ctx.grad.mul(&y.sub(&y.square()))
            },
        )
    }

    pub fn tanh(&self) -> Tensor {
        unary(self, "tanh", f64::tanh, |ctx| {
            ctx.grad.mul(&ctx.output.square().rsub_scalar(1.0))
        })
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    /// `max(x, 0) + slope * min(x, 0)`; the derivative at 0 is taken as `slope`.
    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let slope_mask = Tensor::from_vec(
            self.data().iter().map(|&v| if v > 0.0 { 1.0 } else { slope }).collect(),
            self.shape(),
        );
        let data = self
            .data()
            .iter()
            .zip(slope_mask.data())
            .map(|(&v, &m)| v * m)
            .collect();
        Tensor::from_op(data, self.shape().to_vec(), "leaky_relu", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.mul(&slope_mask))]
        })
    }

    pub fn abs(&self) -> Tensor {
        let sign = Tensor::from_vec(self.data().iter().map(|&v| v.signum() * (v != 0.0) as u8 as f64).collect(), self.shape());
        let data = self.data().iter().map(|v| v.abs()).collect();
        Tensor::from_op(data, self.shape().to_vec(), "abs", vec![self.clone()], move |ctx| {
            vec![ctx.needs[0].then(|| ctx.grad.mul(&sign))]
        })
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Tensor> for &Tensor {
            type Output = Tensor;
            fn $method(self, rhs: &Tensor) -> Tensor {
                Tensor::$method(self, rhs)
            }
        }
        impl $trait<Tensor> for Tensor {
            type Output = Tensor;
            fn $method(self, rhs: Tensor) -> Tensor {
                Tensor::$method(&self, &rhs)
            }
        }
        impl $trait<&Tensor> for Tensor {
            type Output = Tensor;
            fn $method(self, rhs: &Tensor) -> Tensor {
                Tensor::$method(&self, rhs)
            }
        }
        impl $trait<Tensor> for &Tensor {
            type Output = Tensor;
            fn $method(self, rhs: Tensor) -> Tensor {
                Tensor::$method(self, &rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Add<f64> for &Tensor {
    type Output = Tensor;
    fn add(self, rhs: f64) -> Tensor {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Tensor {
    type Output = Tensor;
    fn add(self, rhs: f64) -> Tensor {
        self.add_scalar(rhs)
    }
}

impl Sub<f64> for &Tensor {
    type Output = Tensor;
    fn sub(self, rhs: f64) -> Tensor {
        self.add_scalar(-rhs)
    }
}

impl Sub<f64> for Tensor {
    type Output = Tensor;
    fn sub(self, rhs: f64) -> Tensor {
        self.add_scalar(-rhs)
    }
}

impl Mul<f64> for &Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        self.mul_scalar(rhs)
    }
}

impl Mul<f64> for Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        self.mul_scalar(rhs)
    }
}

impl Neg for &Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        Tensor::neg(self)
    }
}

impl Neg for Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        Tensor::neg(&self)
    }
}
