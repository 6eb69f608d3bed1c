use indexmap::IndexMap;

use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates, one pair of tensors per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: IndexMap<String, Tensor>,
    pub v: IndexMap<String, Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shapes: impl Iterator<Item = (String, Vec<usize>)>) -> Self {
        let mut m = IndexMap::new();
        let mut v = IndexMap::new();
        for (name, shape) in shapes {
            m.insert(name.clone(), Tensor::zeros(&shape));
            v.insert(name, Tensor::zeros(&shape));
        }
        AdamState {
            m,
            v,
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One bias-corrected update. Returns the parameter deltas in gradient
/// order; callers add them to the parameters.
pub fn adam_step(
    grads: &IndexMap<String, Tensor>,
    state: &mut AdamState,
    lr: f64,
) -> IndexMap<String, Tensor> {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let mut deltas = IndexMap::new();
    for (name, g) in grads {
        let m = state.m.get_mut(name).expect("adam state missing parameter");
        let v = state.v.get_mut(name).expect("adam state missing parameter");
        debug_assert_eq!(m.shape(), g.shape(), "adam shape mismatch for {name}");
        let mut delta = Tensor::zeros(g.shape());
        for i in 0..g.len() {
            let gi = g.data()[i];
            let mi = state.beta1 * m.data()[i] + (1.0 - state.beta1) * gi;
            let vi = state.beta2 * v.data()[i] + (1.0 - state.beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            delta.data_mut()[i] = -lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        deltas.insert(name.clone(), delta);
    }
    deltas
}

/// Scale all gradients so their global Euclidean norm is at most
/// `max_norm`. Returns the pre-clipping norm.
pub fn clip_global_norm(grads: &mut IndexMap<String, Tensor>, max_norm: f64) -> f64 {
    let norm: f64 = grads
        .values()
        .map(|t| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in grads.values_mut() {
            for v in t.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, vals: Vec<f64>) -> IndexMap<String, Tensor> {
        let mut m = IndexMap::new();
        m.insert(name.to_string(), Tensor::vector(vals));
        m
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // with eps ~ 0 the bias-corrected first step is -lr * sign(g)
        let grads = single("p", vec![0.3, -0.02, 5.0]);
        let mut state = AdamState::new([("p".to_string(), vec![3])].into_iter());
        state.eps = 1e-16;
        let deltas = adam_step(&grads, &mut state, 0.01);
        let d = deltas["p"].data();
        assert!((d[0] + 0.01).abs() < 1e-9);
        assert!((d[1] - 0.01).abs() < 1e-9);
        assert!((d[2] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_never_moves() {
        let grads = single("p", vec![0.0, 0.0]);
        let mut state = AdamState::new([("p".to_string(), vec![2])].into_iter());
        for _ in 0..5 {
            let deltas = adam_step(&grads, &mut state, 0.1);
            assert_eq!(deltas["p"].data(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn two_steps_match_scalar_trace() {
        // hand trace on f(x) = x^2 / 2 starting at x = 1 (gradient = x)
        let lr = 0.1;
        let (b1, b2, eps) = (ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        let mut x = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expect = Vec::new();
        for t in 1..=2 {
            let g = x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x += -lr * mh / (vh.sqrt() + eps);
            expect.push(x);
        }

        let mut state = AdamState::new([("x".to_string(), vec![1])].into_iter());
        let mut xv = 1.0f64;
        for step in 0..2 {
            let grads = single("x", vec![xv]);
            let deltas = adam_step(&grads, &mut state, lr);
            xv += deltas["x"].data()[0];
            assert!(
                (xv - expect[step]).abs() < 1e-15,
                "step {step}: {xv} vs {}",
                expect[step]
            );
        }
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut grads = single("a", vec![3.0, 4.0]); // norm 5
        let pre = clip_global_norm(&mut grads, 1.0);
        assert!((pre - 5.0).abs() < 1e-12);
        let post: f64 = grads["a"].data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((post - 1.0).abs() < 1e-12);

        let mut small = single("a", vec![0.3, 0.4]);
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small["a"].data(), &[0.3, 0.4]);
    }
}
