//! One gradient check per kernel operator, shared by the gradient and
//! acceptance suites.

use super::{check_graph, check_model, random_tensor, rng, toy_config};
use tfnet_core::nnkernel::lstm::{self, LstmVars};
use tfnet_core::nnkernel::ops::{self, Conv1dSpec, Conv2dSpec};
use tfnet_core::nnkernel::{GradCheckReport, ParamStore};
use tfnet_core::objective::LossToggles;
use tfnet_core::tfnet::dft_magnitude;

fn store(params: &[(&str, Vec<usize>, f64)], seed: u64) -> ParamStore<f64> {
    let mut r = rng(seed);
    let mut s = ParamStore::new();
    for (name, shape, scale) in params {
        s.add(*name, random_tensor(shape, &mut r, *scale)).unwrap();
    }
    s
}

pub fn linear(seed: u64) -> Vec<GradCheckReport> {
    let mut s = store(&[("x", vec![4, 3], 1.0), ("w", vec![3, 5], 1.0), ("b", vec![5], 1.0)], seed);
    vec![check_graph(&mut s, seed, |t, s| {
        let (x, w, b) = (t.param(s, s.id("x")?), t.param(s, s.id("w")?), t.param(s, s.id("b")?));
        ops::linear(t, x, w, b)
    })]
}

pub fn conv1d(seed: u64) -> Vec<GradCheckReport> {
    [Conv1dSpec::K5_P2, Conv1dSpec { kernel: 3, stride: 2, padding: 1 }]
        .into_iter()
        .map(|spec| {
            let k = spec.kernel;
            let mut s = store(&[("x", vec![7, 3], 1.0), ("w", vec![4, 3, k], 0.5), ("b", vec![4], 0.5)], seed);
            check_graph(&mut s, seed, |t, s| {
                let (x, w, b) = (t.param(s, s.id("x")?), t.param(s, s.id("w")?), t.param(s, s.id("b")?));
                ops::conv1d(t, x, w, b, spec)
            })
        })
        .collect()
}

/// conv2d, relu and global average pooling in one graph.
pub fn conv2d_relu_pool(seed: u64) -> Vec<GradCheckReport> {
    let spec = Conv2dSpec {
        kernel: 3,
        stride: 2,
        padding: 1,
    };
    let mut s = store(
        &[("x", vec![2, 3, 6, 5], 1.0), ("w", vec![4, 3, 3, 3], 0.5), ("b", vec![4], 0.5)],
        seed,
    );
    vec![check_graph(&mut s, seed, |t, s| {
        let (x, w, b) = (t.param(s, s.id("x")?), t.param(s, s.id("w")?), t.param(s, s.id("b")?));
        let y = ops::conv2d(t, x, w, b, spec)?;
        let y = ops::relu(t, y);
        ops::global_avg_pool(t, y)
    })]
}

pub fn maxpool(seed: u64) -> Vec<GradCheckReport> {
    let mut s = store(&[("x", vec![9, 3], 1.0)], seed);
    vec![check_graph(&mut s, seed, |t, s| {
        let x = t.param(s, s.id("x")?);
        ops::maxpool1d(t, x, 2, 2)
    })]
}

pub fn add(seed: u64) -> Vec<GradCheckReport> {
    let mut s = store(&[("a", vec![3, 4], 1.0), ("b", vec![3, 4], 1.0)], seed);
    vec![check_graph(&mut s, seed, |t, s| {
        let (a, b) = (t.param(s, s.id("a")?), t.param(s, s.id("b")?));
        ops::add(t, a, b)
    })]
}

pub fn bilstm(seed: u64) -> Vec<GradCheckReport> {
    let (t_len, cin, h) = (5, 3, 4);
    let mut s = store(
        &[
            ("x", vec![t_len, cin], 1.0),
            ("f.w_ih", vec![4 * h, cin], 0.5),
            ("f.w_hh", vec![4 * h, h], 0.5),
            ("f.b", vec![4 * h], 0.5),
            ("b.w_ih", vec![4 * h, cin], 0.5),
            ("b.w_hh", vec![4 * h, h], 0.5),
            ("b.b", vec![4 * h], 0.5),
        ],
        seed,
    );
    vec![check_graph(&mut s, seed, |t, s| {
        let mut p = |n: &str| s.id(n).map(|id| t.param(s, id));
        let x = p("x")?;
        let fwd = LstmVars {
            w_ih: p("f.w_ih")?,
            w_hh: p("f.w_hh")?,
            b: p("f.b")?,
        };
        let bwd = LstmVars {
            w_ih: p("b.w_ih")?,
            w_hh: p("b.w_hh")?,
            b: p("b.b")?,
        };
        lstm::bilstm(t, x, fwd, bwd)
    })]
}

pub fn dft(seed: u64) -> Vec<GradCheckReport> {
    [1, 2, 5, 8]
        .into_iter()
        .map(|t_len| {
            let mut s = store(&[("x", vec![t_len, 3], 1.0)], seed);
            check_graph(&mut s, seed, |t, s| {
                let x = t.param(s, s.id("x")?);
                dft_magnitude(t, x)
            })
        })
        .collect()
}

/// Summed objective through the whole toy network.
pub fn full_model(seed: u64) -> Vec<GradCheckReport> {
    vec![check_model(&toy_config(), LossToggles::default(), seed)]
}

pub type OpCheck = fn(u64) -> Vec<GradCheckReport>;

pub const OPERATORS: [(&str, OpCheck); 7] = [
    ("linear", linear),
    ("conv1d", conv1d),
    ("conv2d+relu+gap", conv2d_relu_pool),
    ("maxpool", maxpool),
    ("add", add),
    ("bilstm", bilstm),
    ("dft", dft),
];
