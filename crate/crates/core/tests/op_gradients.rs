//! Central finite-difference checks for every differentiable tape op.
//!
//! Each op is composed with a fixed random linear functional to produce a
//! scalar, every input component is perturbed by +/- h, and the analytic
//! gradient must match (f(x+h) - f(x-h)) / 2h.

use std::rc::Rc;

use deeprnn_core::rng::rng_for;
use deeprnn_core::tensor::{Tape, Tensor, Var};
use rand::Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= TOL * analytic.abs().max(numeric.abs()) || diff <= 1e-9
}

/// Checks d(build(inputs))/d(inputs) against central differences for every
/// component of every input. Returns the number of probes performed.
fn fd_check(name: &str, inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> usize {
    let eval = |tensors: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors
            .iter()
            .map(|t| tape.leaf(Rc::new(t.clone())))
            .collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };

    // analytic gradients
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| tape.leaf(Rc::new(t.clone())))
        .collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out).expect("scalar loss");

    let mut probes = 0;
    for (i, input) in inputs.iter().enumerate() {
        let g = grads.get(vars[i]);
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += H;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= H;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
            let analytic = g.data()[j];
            assert!(
                close(analytic, numeric),
                "{name}: input {i} component {j}: analytic {analytic} vs numeric {numeric}"
            );
            probes += 1;
        }
    }
    probes
}

fn rand_vec(rng: &mut impl Rng, n: usize) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.gen_range(-1.5..1.5)).collect())
}

fn rand_mat(rng: &mut impl Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Project a vector-valued var down to a scalar with a fixed functional.
fn to_scalar(tape: &mut Tape, v: Var) -> Var {
    let n = tape.value(v).len();
    let w = tape.constant(Tensor::vector(
        (0..n).map(|i| 0.3 + 0.1 * i as f64).collect(),
    ));
    tape.dot(v, w)
}

#[test]
fn every_op_passes_finite_differences() {
    let mut rng = rng_for(2024, "op-fd");
    let mut probes = 0;

    for _ in 0..4 {
        let a = rand_vec(&mut rng, 5);
        let b = rand_vec(&mut rng, 5);
        probes += fd_check("add", &[a.clone(), b.clone()], |t, v| {
            let y = t.add(v[0], v[1]);
            to_scalar(t, y)
        });
        probes += fd_check("mul", &[a.clone(), b.clone()], |t, v| {
            let y = t.mul(v[0], v[1]);
            to_scalar(t, y)
        });
        probes += fd_check("scale", &[a.clone()], |t, v| {
            let y = t.scale(v[0], -1.7);
            to_scalar(t, y)
        });
        probes += fd_check("sigmoid", &[a.clone()], |t, v| {
            let y = t.sigmoid(v[0]);
            to_scalar(t, y)
        });
        probes += fd_check("tanh", &[a.clone()], |t, v| {
            let y = t.tanh(v[0]);
            to_scalar(t, y)
        });
        probes += fd_check("dot", &[a.clone(), b.clone()], |t, v| t.dot(v[0], v[1]));
        probes += fd_check("softmax", &[a.clone()], |t, v| {
            let y = t.softmax(v[0]);
            to_scalar(t, y)
        });
        probes += fd_check("nll", &[a.clone()], |t, v| t.nll_from_logits(v[0], 2));

        let w = rand_mat(&mut rng, 4, 5);
        probes += fd_check("matvec", &[w.clone(), a.clone()], |t, v| {
            let y = t.matvec(v[0], v[1]);
            to_scalar(t, y)
        });

        let c = rand_vec(&mut rng, 3);
        probes += fd_check("concat", &[a.clone(), c.clone()], |t, v| {
            let y = t.concat(&[v[0], v[1]]);
            to_scalar(t, y)
        });

        let table = rand_mat(&mut rng, 6, 4);
        probes += fd_check("embed_row", &[table], |t, v| {
            let y = t.embed_row(v[0], 3);
            to_scalar(t, y)
        });

        let gain = rand_vec(&mut rng, 5);
        let bias = rand_vec(&mut rng, 5);
        probes += fd_check("layer_norm", &[a.clone(), gain, bias], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5);
            to_scalar(t, y)
        });

        let r0 = rand_vec(&mut rng, 4);
        let r1 = rand_vec(&mut rng, 4);
        let r2 = rand_vec(&mut rng, 4);
        let ws = rand_vec(&mut rng, 3);
        probes += fd_check(
            "weighted_sum",
            &[r0.clone(), r1.clone(), r2.clone(), ws],
            |t, v| {
                let y = t.weighted_sum(&v[0..3], v[3]);
                to_scalar(t, y)
            },
        );
        probes += fd_check("mean_list", &[r0, r1, r2], |t, v| {
            let y = t.mean_list(&v[0..3]);
            to_scalar(t, y)
        });
    }

    assert!(probes >= 100, "only {probes} probes performed");
}

#[test]
fn layer_norm_gradient_matches_fd_through_sum() {
    // d sum(layer_norm(a)) / da, the tensor-module contract case
    let mut rng = rng_for(7, "ln-sum");
    let a = rand_vec(&mut rng, 6);
    let gain = Tensor::vector(vec![1.0; 6]);
    let bias = Tensor::vector(vec![0.0; 6]);
    fd_check("ln-sum", &[a, gain, bias], |t, v| {
        let y = t.layer_norm(v[0], v[1], v[2], 1e-5);
        let ones = t.constant(Tensor::vector(vec![1.0; 6]));
        t.dot(y, ones)
    });
}
