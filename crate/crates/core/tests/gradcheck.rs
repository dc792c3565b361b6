use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rl_lab_core::autodiff::{grad, Mlp, Tape, Tensor, Var};
use rl_lab_core::Result;

const H: f64 = 1e-6;
const REL: f64 = 1e-4;
const ABS: f64 = 1e-7;

fn value<F>(f: &F, at: &[Tensor]) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = at.iter().cloned().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &vars).unwrap();
    tape.value(out).item().unwrap()
}

/// Compares reverse-mode gradients against central differences for every
/// input coordinate.
fn check<F>(name: &str, f: F, at: Vec<Tensor>)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let g = grad(&f, &at).unwrap();
    for (i, t) in at.iter().enumerate() {
        for j in 0..t.len() {
            let mut plus = at.clone();
            plus[i].data_mut()[j] += H;
            let mut minus = at.clone();
            minus[i].data_mut()[j] -= H;
            let fd = (value(&f, &plus) - value(&f, &minus)) / (2.0 * H);
            let an = g[i].data()[j];
            let err = (an - fd).abs();
            assert!(
                err <= REL * an.abs().max(fd.abs()) + ABS,
                "{name}: input {i}[{j}] analytic {an} vs fd {fd}"
            );
        }
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values bounded away from `kink` by at least `gap`.
fn away_from(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64, kinks: &[f64], gap: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.random_range(lo..hi);
            if kinks.iter().all(|k| (v - k).abs() > gap) {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Reduces an arbitrary-shaped node to a scalar through fixed random weights,
/// so every output coordinate contributes a distinct adjoint.
fn weighted(tape: &mut Tape, x: Var, w: &Tensor) -> Result<Var> {
    let wv = tape.constant(w.clone());
    let p = tape.mul(x, wv)?;
    Ok(tape.sum(p))
}

const INSTANCES: usize = 100;

fn shape(rng: &mut ChaCha8Rng) -> Vec<usize> {
    vec![rng.random_range(1..4), rng.random_range(1..4)]
}

#[test]
fn elementwise_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..INSTANCES {
        let s = shape(&mut rng);
        let a = rand_tensor(&mut rng, &s, -2.0, 2.0);
        let b = rand_tensor(&mut rng, &s, -2.0, 2.0);
        let w = rand_tensor(&mut rng, &s, -1.0, 1.0);
        check("add", |t, x| { let y = t.add(x[0], x[1])?; weighted(t, y, &w) }, vec![a.clone(), b.clone()]);
        check("sub", |t, x| { let y = t.sub(x[0], x[1])?; weighted(t, y, &w) }, vec![a.clone(), b.clone()]);
        check("mul", |t, x| { let y = t.mul(x[0], x[1])?; weighted(t, y, &w) }, vec![a.clone(), b.clone()]);
        let d = away_from(&mut rng, &s, -2.0, 2.0, &[0.0], 0.3);
        check("div", |t, x| { let y = t.div(x[0], x[1])?; weighted(t, y, &w) }, vec![a.clone(), d]);
        // Keep pairs apart so min has no ties inside the stencil.
        let mut b2 = b.clone();
        for (bv, av) in b2.data_mut().iter_mut().zip(a.data()) {
            if (*bv - av).abs() < 1e-3 {
                *bv += 0.1;
            }
        }
        check("min", |t, x| { let y = t.min(x[0], x[1])?; weighted(t, y, &w) }, vec![a, b2]);
    }
}

#[test]
fn elementwise_unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..INSTANCES {
        let s = shape(&mut rng);
        let x = rand_tensor(&mut rng, &s, -2.0, 2.0);
        let pos = rand_tensor(&mut rng, &s, 0.1, 3.0);
        let w = rand_tensor(&mut rng, &s, -1.0, 1.0);
        let k: f64 = rng.random_range(-3.0..3.0);
        check("neg", |t, v| { let y = t.neg(v[0]); weighted(t, y, &w) }, vec![x.clone()]);
        check("scale", |t, v| { let y = t.scale(v[0], k); weighted(t, y, &w) }, vec![x.clone()]);
        check("shift", |t, v| { let y = t.shift(v[0], k); weighted(t, y, &w) }, vec![x.clone()]);
        check("tanh", |t, v| { let y = t.tanh(v[0]); weighted(t, y, &w) }, vec![x.clone()]);
        check("exp", |t, v| { let y = t.exp(v[0]); weighted(t, y, &w) }, vec![x.clone()]);
        check("square", |t, v| { let y = t.square(v[0]); weighted(t, y, &w) }, vec![x.clone()]);
        check("ln", |t, v| { let y = t.ln(v[0]); weighted(t, y, &w) }, vec![pos.clone()]);
        check("sqrt", |t, v| { let y = t.sqrt(v[0]); weighted(t, y, &w) }, vec![pos]);
        let lo = -0.5;
        let hi = 0.7;
        let xc = away_from(&mut rng, &s, -2.0, 2.0, &[lo, hi], 1e-3);
        check("clamp_min", |t, v| { let y = t.clamp_min(v[0], lo); weighted(t, y, &w) }, vec![xc.clone()]);
        check("clamp", |t, v| { let y = t.clamp(v[0], lo, hi); weighted(t, y, &w) }, vec![xc]);
    }
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..INSTANCES {
        let (r, i, c) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
        let a = rand_tensor(&mut rng, &[r, i], -1.5, 1.5);
        let b = rand_tensor(&mut rng, &[i, c], -1.5, 1.5);
        let bias = rand_tensor(&mut rng, &[c], -1.0, 1.0);
        let w = rand_tensor(&mut rng, &[r, c], -1.0, 1.0);
        let wr = rand_tensor(&mut rng, &[r], -1.0, 1.0);
        check("matmul", |t, x| { let y = t.matmul(x[0], x[1])?; weighted(t, y, &w) }, vec![a.clone(), b.clone()]);
        check(
            "add_row",
            |t, x| {
                let m = t.matmul(x[0], x[1])?;
                let y = t.add_row(m, x[2])?;
                weighted(t, y, &w)
            },
            vec![a.clone(), b.clone(), bias.clone()],
        );
        check("broadcast_rows", |t, x| { let y = t.broadcast_rows(x[0], r)?; weighted(t, y, &w) }, vec![bias]);
        let m = rand_tensor(&mut rng, &[r, c], -2.0, 2.0);
        check("sum", |t, x| { let y = t.square(x[0]); Ok(t.sum(y)) }, vec![m.clone()]);
        check("mean", |t, x| { let y = t.square(x[0]); Ok(t.mean(y)) }, vec![m.clone()]);
        check("sum_rows", |t, x| { let y = t.sum_rows(x[0])?; weighted(t, y, &wr) }, vec![m]);
    }
}

#[test]
fn composite_mlp_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let net = Mlp::new(&[3, 8, 8, 2], &mut rng).unwrap();
        let input = rand_tensor(&mut rng, &[5, 3], -2.0, 2.0);
        let w = rand_tensor(&mut rng, &[5, 2], -1.0, 1.0);
        let widths = net.widths().to_vec();
        check(
            "mlp",
            |t, p| {
                let x = t.constant(input.clone());
                let net = Mlp::from_params(&widths, p.iter().map(|&v| t.value(v).clone()).collect())?;
                let y = net.forward_on(t, p, x)?;
                weighted(t, y, &w)
            },
            net.params().to_vec(),
        );
    }
}

/// Hand-rolled dense layers, independent of the library's matmul.
fn oracle_forward(params: &[Tensor], widths: &[usize], input: &[f64]) -> Vec<f64> {
    let mut h = input.to_vec();
    let layers = widths.len() - 1;
    for l in 0..layers {
        let (w, b) = (&params[2 * l], &params[2 * l + 1]);
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let mut out = vec![0.0; n_out];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = b.data()[j];
            for (i, hi) in h.iter().enumerate().take(n_in) {
                acc += hi * w.data()[i * n_out + j];
            }
            *o = if l + 1 < layers { acc.tanh() } else { acc };
        }
        h = out;
    }
    h
}

#[test]
fn seeded_mlp_matches_matmul_oracle() {
    let net = Mlp::new(&[3, 4, 1], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let mut net = net;
    // Non-zero biases so they are exercised too.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let x = [0.5, -0.5, 1.0];
    let got = net.forward(&Tensor::vector(x.to_vec()).unwrap()).unwrap();
    let want = oracle_forward(net.params(), net.widths(), &x);
    assert_eq!(got.shape(), &[1]);
    assert!((got.data()[0] - want[0]).abs() < 1e-12);
}

#[test]
fn forward_is_bitwise_repeatable() {
    let net = Mlp::new(&[3, 64, 1], &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let x = Tensor::from_rows(&[vec![0.3, -0.1, 2.0], vec![1.0, 1.0, -1.0]]).unwrap();
    let a = net.forward(&x).unwrap();
    let b = net.clone().forward(&x).unwrap();
    assert_eq!(
        a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}
