use rand::Rng;

use super::tape::{Tape, Var};
use super::tensor::{matmul_into, Tensor};
use crate::error::{invalid, shape_err, Result};

/// Fully connected network with `tanh` hidden layers and a linear output.
///
/// Parameters are stored flat as `[w0, b0, w1, b1, ...]` where `w_i` has
/// shape `(widths[i], widths[i + 1])` and `b_i` has length `widths[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<Tensor>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid(format!("mlp widths must have >= 2 positive entries, got {widths:?}")));
        }
        let mut params = Vec::with_capacity(2 * (widths.len() - 1));
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Tensor::from_parts(vec![fan_in, fan_out], w));
            params.push(Tensor::zeros(&[fan_out]));
        }
        Ok(Self {
            widths: widths.to_vec(),
            params,
        })
    }

    /// Builds a network from explicit parameters in `[w0, b0, ...]` order.
    pub fn from_params(widths: &[usize], params: Vec<Tensor>) -> Result<Self> {
        if widths.len() < 2 || params.len() != 2 * (widths.len() - 1) {
            return Err(invalid("parameter list does not match layer widths"));
        }
        for (i, pair) in widths.windows(2).enumerate() {
            if params[2 * i].shape() != [pair[0], pair[1]] || params[2 * i + 1].shape() != [pair[1]] {
                return Err(shape_err("Mlp::from_params", format!("layer {i} has wrong shape")));
            }
        }
        Ok(Self {
            widths: widths.to_vec(),
            params,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Multiplies the output layer's weights by `k`.
    pub fn scale_output_layer(&mut self, k: f64) {
        let n = self.params.len();
        for w in self.params[n - 2].data_mut() {
            *w *= k;
        }
    }

    fn batch_dims(&self, input: &Tensor) -> Result<usize> {
        let in_w = self.input_width();
        match input.shape() {
            [n] if *n == in_w => Ok(1),
            [b, n] if *n == in_w => Ok(*b),
            s => Err(shape_err("mlp_forward", format!("input {s:?} does not end in width {in_w}"))),
        }
    }

    /// Evaluates the network without recording gradients. A 1-D input gives
    /// a 1-D output; a `(B, in)` input gives `(B, out)`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let batch = self.batch_dims(input)?;
        let mut h = input.data().to_vec();
        let layers = self.widths.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let mut z = matmul_into(&h, self.params[2 * l].data(), batch, fan_in, fan_out);
            let bias = self.params[2 * l + 1].data();
            for row in z.chunks_mut(fan_out) {
                for (x, &b) in row.iter_mut().zip(bias) {
                    *x += b;
                }
            }
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            h = z;
        }
        let shape = if input.shape().len() == 1 {
            vec![self.output_width()]
        } else {
            vec![batch, self.output_width()]
        };
        Ok(Tensor::from_parts(shape, h))
    }

    /// Records every parameter as a differentiable leaf.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().cloned().map(|p| tape.param(p)).collect()
    }

    /// Records every parameter as a constant leaf.
    pub fn register_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().cloned().map(|p| tape.constant(p)).collect()
    }

    /// Forward pass on a tape. `input` must be a `(B, in)` node and `vars`
    /// the handles from [`Mlp::register`].
    pub fn forward_on(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        self.batch_dims(tape.value(input))?;
        if tape.value(input).shape().len() != 2 {
            return Err(shape_err("mlp_forward", "tape input must be (B, in)"));
        }
        let layers = self.widths.len() - 1;
        let mut h = input;
        for l in 0..layers {
            let z = tape.matmul(h, vars[2 * l])?;
            let z = tape.add_row(z, vars[2 * l + 1])?;
            h = if l + 1 < layers { tape.tanh(z) } else { z };
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let params = vec![
            Tensor::zeros(&[3, 4]),
            Tensor::zeros(&[4]),
            Tensor::zeros(&[4, 2]),
            Tensor::zeros(&[2]),
        ];
        let net = Mlp::from_params(&[3, 4, 2], params).unwrap();
        let out = net.forward(&Tensor::vector(vec![0.3, -7.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let net = Mlp::from_params(&[2, 2], vec![w, Tensor::zeros(&[2])]).unwrap();
        let out = net.forward(&Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn parameter_count_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 64, 64, 1], &mut rng).unwrap();
        assert_eq!(net.param_count(), 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn batched_shape_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 5, 2], &mut rng).unwrap();
        let x = Tensor::zeros(&[7, 3]);
        assert_eq!(net.forward(&x).unwrap().shape(), &[7, 2]);
        assert!(net.forward(&Tensor::zeros(&[7, 4])).is_err());
    }

    #[test]
    fn tape_forward_matches_plain_forward_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 8, 2], &mut rng).unwrap();
        let x = Tensor::from_rows(&[vec![0.1, -0.4, 2.0], vec![1.0, 1.0, -1.0]]).unwrap();
        let mut tape = Tape::new();
        let vars = net.register(&mut tape);
        let xv = tape.constant(x.clone());
        let out = net.forward_on(&mut tape, &vars, xv).unwrap();
        assert_eq!(tape.value(out).data(), net.forward(&x).unwrap().data());
    }
}
