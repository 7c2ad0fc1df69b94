//! Differentiable compute kernels with hand-written backward passes.
//!
//! No computation graph: each kernel exposes a forward function and an
//! explicit backward that maps the upstream gradient to operand gradients.
//! The model layer composes them in a fixed order.

mod adam;
mod batchnorm;
mod conv;
mod gradcheck;
mod loss;

pub use adam::AdamState;
pub use batchnorm::{BatchNorm1d, BnCache};
pub use conv::{conv2d, conv2d_backward};
pub use gradcheck::grad_check;
pub use loss::{bce_backward, bce_loss, BCE_CLAMP};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Train/eval switch shared by dropout, batch norm, and model scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dense real tensor with up to 4 axes (batch, channel, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::Shape(format!("tensor rank {} not in 1..=4", shape.len())));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape("tensor extents must be positive".into()));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {len} values, got {}",
                shape,
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        Tensor::new(shape, vec![0.0; len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Reinterpret as a new shape of the same total length.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }
}

/// `x·W + b` for `x: [N,K]`, `w: [K,M]`, `b: [M]`.
pub fn affine(x: &Tensor, w: &Tensor, b: &[f64]) -> Result<Tensor> {
    let (n, k) = dims2(x, "affine input")?;
    let (kw, m) = dims2(w, "affine weight")?;
    if k != kw || b.len() != m {
        return Err(Error::Shape(format!(
            "affine: x[{n},{k}] · w[{kw},{m}] + b[{}]",
            b.len()
        )));
    }
    let mut out = Tensor::zeros(&[n, m])?;
    linalg::matmul_nn(x.data(), w.data(), n, k, m, out.data_mut());
    for row in out.data.chunks_mut(m) {
        for (o, &bb) in row.iter_mut().zip(b) {
            *o += bb;
        }
    }
    Ok(out)
}

/// Gradients of [`affine`] w.r.t. x, W, and b.
pub fn affine_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let (n, k) = dims2(x, "affine input")?;
    let (_, m) = dims2(w, "affine weight")?;
    let mut gx = Tensor::zeros(&[n, k])?;
    linalg::matmul_nt(grad_out.data(), w.data(), n, m, k, gx.data_mut());
    let mut gw = Tensor::zeros(&[k, m])?;
    linalg::matmul_tn(x.data(), grad_out.data(), n, k, m, gw.data_mut());
    let mut gb = vec![0.0; m];
    for row in grad_out.data().chunks(m) {
        for (g, &v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    Ok((gx, gw, gb))
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Backward through max(0, x), given the forward input.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data.iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data.iter_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
    out
}

/// Backward through the sigmoid, given its output `y`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &yv) in g.data.iter_mut().zip(y.data()) {
        *gv *= yv * (1.0 - yv);
    }
    g
}

/// Per-element multipliers saved by a train-mode dropout pass; `None` means
/// the pass was an identity (eval mode or zero rate).
#[derive(Debug, Clone)]
pub struct DropoutMask(Option<Vec<f64>>);

impl DropoutMask {
    /// Mask of an identity pass.
    pub fn identity() -> Self {
        DropoutMask(None)
    }
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1−rate); eval mode is the identity.
pub fn dropout<R: Rng>(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} not in [0,1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutMask(None)));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mut out = x.clone();
    let mut mask = vec![0.0; x.len()];
    for (m, v) in mask.iter_mut().zip(out.data.iter_mut()) {
        if rng.gen::<f64>() < rate {
            *v = 0.0;
        } else {
            *m = scale;
            *v *= scale;
        }
    }
    Ok((out, DropoutMask(Some(mask))))
}

pub fn dropout_backward(mask: &DropoutMask, grad_out: &Tensor) -> Tensor {
    match &mask.0 {
        None => grad_out.clone(),
        Some(m) => {
            let mut g = grad_out.clone();
            for (gv, &mv) in g.data.iter_mut().zip(m) {
                *gv *= mv;
            }
            g
        }
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [n, k] => Ok((*n, *k)),
        s => Err(Error::Shape(format!("{what} must be 2-axis, got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn affine_identity_and_bias() {
        let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = affine(&x, &w, &[3.0, 4.0]).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0]);

        let same = affine(&x, &w, &[0.0, 0.0]).unwrap();
        assert_eq!(same.data(), x.data());
    }

    #[test]
    fn affine_bias_gradient_is_column_sum() {
        let x = Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let ones = Tensor::new(&[3, 2], vec![1.0; 6]).unwrap();
        let (_, _, gb) = affine_backward(&x, &w, &ones).unwrap();
        assert_eq!(gb, vec![3.0, 3.0]);
    }

    #[test]
    fn relu_and_sigmoid_values() {
        let x = Tensor::new(&[1, 2], vec![-2.0, 3.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 3.0]);
        let z = Tensor::new(&[1, 1], vec![0.0]).unwrap();
        assert_eq!(sigmoid(&z).data(), &[0.5]);
    }

    #[test]
    fn dropout_zero_rate_and_eval_are_identity() {
        let x = Tensor::new(&[2, 2], vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (y, _) = dropout(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        let (y, _) = dropout(&x, 0.9, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let x = Tensor::new(&[1, 1], vec![1.0]).unwrap();
        let rate = 0.3;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (y, _) = dropout(&x, rate, Mode::Train, &mut rng).unwrap();
            sum += y.data()[0];
        }
        let mean = sum / n as f64;
        // Var of one sample: 1/(1-rate) - 1.
        let sigma = ((1.0 / (1.0 - rate) - 1.0) / n as f64).sqrt();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 3.0 * sigma);
    }

    #[test]
    fn dropout_backward_uses_saved_mask() {
        let x = Tensor::new(&[1, 8], vec![1.0; 8]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let g = dropout_backward(&mask, &x);
        assert_eq!(g.data(), y.data());
    }

    #[test]
    fn tensor_shape_validation() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(&[0], vec![]).is_err());
        assert!(Tensor::new(&[1, 1, 1, 1, 1], vec![0.0]).is_err());
    }
}
