//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texturefuse::layer::{LayerKind, LayerSpec, NetworkSpec};
use texturefuse::{Mode, Network, Tape, Tensor};

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_REL_TOL: f64 = 1e-4;

/// Re-draw every conv weight with He-style variance so activations stay
/// O(1) through deep stacks (the 0.01 init makes deep outputs nearly uniform,
/// which would hide disagreements).
pub fn he_init(net: &mut Network<f32>, rng: &mut ChaCha8Rng) {
    for p in net.params_mut().iter_mut().flatten() {
        let s = p.weights.shape().to_vec();
        let fan_in = (s[1] * s[2] * s[3]) as f64;
        p.weights = Tensor::randn(s.to_vec(), (2.0 / fan_in).sqrt(), rng);
        p.bias = Tensor::randn([s[0]], 0.1, rng);
    }
}

/// Single-layer f64 network.
pub fn one_layer(kind: LayerKind, in_channels: usize) -> NetworkSpec {
    NetworkSpec {
        name: format!("check-{}", kind.tag()),
        input_channels: in_channels,
        class_count: 2,
        layers: vec![LayerSpec::new("layer", kind)],
    }
}

/// Random input whose entries are pairwise separated (no max-pool ties) and
/// kept away from zero (no ReLU kinks).
pub fn spaced_input(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product::<usize>();
    let mut values: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 * 4.0 - 2.0).collect();
    for i in (1..n).rev() {
        values.swap(i, rng.random_range(0..=i));
    }
    for v in &mut values {
        if v.abs() < 0.05 {
            *v += 0.1f64.copysign(*v);
        }
    }
    Tensor::new(shape.to_vec(), values).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b|| / max(||a||, ||b||)`, or the absolute norm when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Loss `sum(output * weights)` evaluated with dropout masks drawn from a
/// fixed seed, so repeated evaluations see identical masks.
fn loss(net: &Network<f64>, x: &Tensor<f64>, r: &Tensor<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    let y = net
        .forward_recorded(x, &mut tape, Mode::Train(&mut rng), net.spec().layers.len())
        .unwrap();
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error over input and parameter gradients of `net` at `x`.
pub fn check_network(net: &mut Network<f64>, x: &Tensor<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let seed = rng.random::<u64>();
    let out_shape = net.spec().output_shape(x.shape().try_into().unwrap()).unwrap();
    let r = Tensor::<f64>::randn(out_shape.to_vec(), 1.0, rng);

    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    net.forward_recorded(x, &mut tape, Mode::Train(&mut mask_rng), net.spec().layers.len())
        .unwrap();
    let grads = net.backward(&tape, &r).unwrap();

    let mut worst = 0f64;
    let mut xp = x.clone();
    let mut numeric = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + FD_STEP;
        let up = loss(net, &xp, &r, seed);
        xp.data_mut()[i] = orig - FD_STEP;
        let down = loss(net, &xp, &r, seed);
        xp.data_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    worst = worst.max(rel_err(grads.input.data(), &numeric));

    for layer in 0..net.params().len() {
        let Some(analytic) = grads.layers[layer].clone() else {
            continue;
        };
        for which in 0..2 {
            let len = {
                let p = net.params()[layer].as_ref().unwrap();
                if which == 0 {
                    p.weights.len()
                } else {
                    p.bias.len()
                }
            };
            let mut numeric = Vec::with_capacity(len);
            for i in 0..len {
                let mut eval = |delta: f64| {
                    let p = net.params_mut()[layer].as_mut().unwrap();
                    let t = if which == 0 { &mut p.weights } else { &mut p.bias };
                    t.data_mut()[i] += delta;
                    let l = loss(net, x, &r, seed);
                    let p = net.params_mut()[layer].as_mut().unwrap();
                    let t = if which == 0 { &mut p.weights } else { &mut p.bias };
                    t.data_mut()[i] -= delta;
                    l
                };
                let up = eval(FD_STEP);
                let down = eval(-FD_STEP);
                numeric.push((up - down) / (2.0 * FD_STEP));
            }
            let a = if which == 0 {
                analytic.weights.data()
            } else {
                analytic.bias.data()
            };
            worst = worst.max(rel_err(a, &numeric));
        }
    }
    worst
}
