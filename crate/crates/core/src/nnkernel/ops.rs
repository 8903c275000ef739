//! Differentiable operators. Each comes as a plain forward function over
//! tensors plus a tape-recording wrapper with its adjoint.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hash;

use super::tape::{Tape, TapeOp, ValueView, Var};
use super::{KernelError, Scalar, Tensor};

// ---------------------------------------------------------------- linear

/// `y = x·W + b` for `x: T×Cin`, `W: Cin×Cout`, `b: Cout`.
pub fn linear_forward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
) -> Result<Tensor<S>, KernelError> {
    let (t, cin) = x.dims2()?;
    let (win, cout) = w.dims2()?;
    if win != cin || b.shape() != [cout] {
        return Err(KernelError::Shape(format!(
            "linear: x {:?}, W {:?}, b {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![S::zero(); t * cout];
    for r in 0..t {
        let acc = &mut out[r * cout..(r + 1) * cout];
        for i in 0..cin {
            let xv = xd[r * cin + i];
            let wrow = &wd[i * cout..(i + 1) * cout];
            for (a, &wv) in acc.iter_mut().zip(wrow) {
                *a += xv * wv;
            }
        }
        for (a, &bv) in acc.iter_mut().zip(bd) {
            *a += bv;
        }
    }
    Tensor::from_vec(&[t, cout], out)
}

struct LinearOp {
    x: Var,
    w: Var,
    b: Var,
}

impl<S: Scalar> TapeOp<S> for LinearOp {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x, self.w, self.b]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let w = values.get(self.w);
        let (t, cin) = x.dims2()?;
        let (_, cout) = w.dims2()?;
        let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
        let mut dx = vec![S::zero(); t * cin];
        let mut dw = vec![S::zero(); cin * cout];
        let mut db = vec![S::zero(); cout];
        for r in 0..t {
            let g = &dyd[r * cout..(r + 1) * cout];
            for i in 0..cin {
                let wrow = &wd[i * cout..(i + 1) * cout];
                let mut acc = S::zero();
                for (&gv, &wv) in g.iter().zip(wrow) {
                    acc += gv * wv;
                }
                dx[r * cin + i] = acc;
                let xv = xd[r * cin + i];
                for (d, &gv) in dw[i * cout..(i + 1) * cout].iter_mut().zip(g) {
                    *d += xv * gv;
                }
            }
            for (d, &gv) in db.iter_mut().zip(g) {
                *d += gv;
            }
        }
        Ok(vec![
            Tensor::from_vec(&[t, cin], dx)?,
            Tensor::from_vec(&[cin, cout], dw)?,
            Tensor::from_vec(&[cout], db)?,
        ])
    }
}

pub fn linear<S: Scalar>(tape: &mut Tape<S>, x: Var, w: Var, b: Var) -> Result<Var, KernelError> {
    let y = linear_forward(tape.value(x), tape.value(w), tape.value(b))?;
    Ok(tape.push(y, Box::new(LinearOp { x, w, b })))
}

// ---------------------------------------------------------------- conv1d

/// Hyper-parameters of a 1-D convolution over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dSpec {
    pub const K5_P2: Self = Self {
        kernel: 5,
        stride: 1,
        padding: 2,
    };

    /// `floor((T + 2p - k) / s) + 1`, or an error carrying the minimum
    /// admissible input length.
    pub fn output_len(&self, t: usize) -> Result<usize, KernelError> {
        if self.kernel % 2 == 0 || self.stride == 0 {
            return Err(KernelError::Shape(format!(
                "conv1d needs an odd kernel and positive stride, got {self:?}"
            )));
        }
        if t + 2 * self.padding < self.kernel {
            return Err(KernelError::TooShort {
                len: t,
                required: self.kernel.saturating_sub(2 * self.padding).max(1),
            });
        }
        Ok((t + 2 * self.padding - self.kernel) / self.stride + 1)
    }
}

/// `x: T×Cin`, `w: Cout×Cin×k`, `b: Cout` → `T_out×Cout`, zero padded.
pub fn conv1d_forward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
    spec: Conv1dSpec,
) -> Result<Tensor<S>, KernelError> {
    let (t, cin) = x.dims2()?;
    let [cout, wcin, k] = w.shape()[..] else {
        return Err(KernelError::Shape(format!("conv1d weight {:?}", w.shape())));
    };
    if wcin != cin || k != spec.kernel || b.shape() != [cout] {
        return Err(KernelError::Shape(format!(
            "conv1d: x {:?}, w {:?}, b {:?}, {spec:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let tout = spec.output_len(t)?;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![S::zero(); tout * cout];
    for to in 0..tout {
        for o in 0..cout {
            let mut acc = S::zero();
            for kk in 0..k {
                let Some(ti) = (to * spec.stride + kk).checked_sub(spec.padding) else {
                    continue;
                };
                if ti >= t {
                    continue;
                }
                let xrow = &xd[ti * cin..(ti + 1) * cin];
                for (ci, &xv) in xrow.iter().enumerate() {
                    acc += wd[(o * cin + ci) * k + kk] * xv;
                }
            }
            out[to * cout + o] = acc + bd[o];
        }
    }
    Tensor::from_vec(&[tout, cout], out)
}

struct Conv1dOp {
    x: Var,
    w: Var,
    b: Var,
    spec: Conv1dSpec,
}

impl<S: Scalar> TapeOp<S> for Conv1dOp {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x, self.w, self.b]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let w = values.get(self.w);
        let (t, cin) = x.dims2()?;
        let (tout, cout) = dy.dims2()?;
        let k = self.spec.kernel;
        let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
        let mut dx = vec![S::zero(); t * cin];
        let mut dw = vec![S::zero(); cout * cin * k];
        let mut db = vec![S::zero(); cout];
        for to in 0..tout {
            for o in 0..cout {
                let g = dyd[to * cout + o];
                db[o] += g;
                for kk in 0..k {
                    let Some(ti) = (to * self.spec.stride + kk).checked_sub(self.spec.padding)
                    else {
                        continue;
                    };
                    if ti >= t {
                        continue;
                    }
                    for ci in 0..cin {
                        let wi = (o * cin + ci) * k + kk;
                        dx[ti * cin + ci] += g * wd[wi];
                        dw[wi] += g * xd[ti * cin + ci];
                    }
                }
            }
        }
        Ok(vec![
            Tensor::from_vec(&[t, cin], dx)?,
            Tensor::from_vec(&[cout, cin, k], dw)?,
            Tensor::from_vec(&[cout], db)?,
        ])
    }
}

pub fn conv1d<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    w: Var,
    b: Var,
    spec: Conv1dSpec,
) -> Result<Var, KernelError> {
    let y = conv1d_forward(tape.value(x), tape.value(w), tape.value(b), spec)?;
    Ok(tape.push(y, Box::new(Conv1dOp { x, w, b, spec })))
}

// ---------------------------------------------------------------- conv2d

/// Square-kernel 2-D convolution hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dSpec {
    pub fn output_size(&self, n: usize) -> Result<usize, KernelError> {
        if self.stride == 0 || self.kernel == 0 {
            return Err(KernelError::Shape(format!("bad conv2d spec {self:?}")));
        }
        if n + 2 * self.padding < self.kernel {
            return Err(KernelError::TooShort {
                len: n,
                required: self.kernel - 2 * self.padding,
            });
        }
        Ok((n + 2 * self.padding - self.kernel) / self.stride + 1)
    }

    /// Output positions `o` for which `o*stride + tap - padding` lands in
    /// `0..n`.
    fn valid_range(&self, tap: usize, n: usize, out: usize) -> std::ops::Range<usize> {
        let s = self.stride;
        let lo = if tap >= self.padding {
            0
        } else {
            (self.padding - tap).div_ceil(s)
        };
        let hi = if n + self.padding > tap {
            ((n + self.padding - tap - 1) / s + 1).min(out)
        } else {
            0
        };
        lo..hi.max(lo)
    }
}

/// `x: N×Cin×H×W`, `w: Cout×Cin×k×k`, `b: Cout` → `N×Cout×Ho×Wo`.
pub fn conv2d_forward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
    spec: Conv2dSpec,
) -> Result<Tensor<S>, KernelError> {
    let (n, cin, h, wid) = x.dims4()?;
    let (cout, wcin, kh, kw) = w.dims4()?;
    if wcin != cin || kh != spec.kernel || kw != spec.kernel || b.shape() != [cout] {
        return Err(KernelError::Shape(format!(
            "conv2d: x {:?}, w {:?}, b {:?}, {spec:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let ho = spec.output_size(h)?;
    let wo = spec.output_size(wid)?;
    let k = spec.kernel;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![S::zero(); n * cout * ho * wo];
    for f in 0..n {
        for o in 0..cout {
            let plane = &mut out[(f * cout + o) * ho * wo..(f * cout + o + 1) * ho * wo];
            for ci in 0..cin {
                let xin = &xd[(f * cin + ci) * h * wid..(f * cin + ci + 1) * h * wid];
                for ky in 0..k {
                    let rows = spec.valid_range(ky, h, ho);
                    for kx in 0..k {
                        let wv = wd[((o * cin + ci) * k + ky) * k + kx];
                        let cols = spec.valid_range(kx, wid, wo);
                        for oy in rows.clone() {
                            let iy = oy * spec.stride + ky - spec.padding;
                            let xrow = &xin[iy * wid..(iy + 1) * wid];
                            let orow = &mut plane[oy * wo..(oy + 1) * wo];
                            for ox in cols.clone() {
                                orow[ox] += wv * xrow[ox * spec.stride + kx - spec.padding];
                            }
                        }
                    }
                }
            }
            for v in plane.iter_mut() {
                *v += bd[o];
            }
        }
    }
    Tensor::from_vec(&[n, cout, ho, wo], out)
}

struct Conv2dOp {
    x: Var,
    w: Var,
    b: Var,
    spec: Conv2dSpec,
}

impl<S: Scalar> TapeOp<S> for Conv2dOp {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x, self.w, self.b]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let w = values.get(self.w);
        let (n, cin, h, wid) = x.dims4()?;
        let (_, cout, ho, wo) = dy.dims4()?;
        let spec = self.spec;
        let k = spec.kernel;
        let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
        let mut dx = vec![S::zero(); xd.len()];
        let mut dw = vec![S::zero(); wd.len()];
        let mut db = vec![S::zero(); cout];
        for f in 0..n {
            for o in 0..cout {
                let g = &dyd[(f * cout + o) * ho * wo..(f * cout + o + 1) * ho * wo];
                db[o] += g.iter().copied().sum::<S>();
                for ci in 0..cin {
                    let base = (f * cin + ci) * h * wid;
                    for ky in 0..k {
                        let rows = spec.valid_range(ky, h, ho);
                        for kx in 0..k {
                            let wi = ((o * cin + ci) * k + ky) * k + kx;
                            let wv = wd[wi];
                            let cols = spec.valid_range(kx, wid, wo);
                            let mut acc = S::zero();
                            for oy in rows.clone() {
                                let iy = oy * spec.stride + ky - spec.padding;
                                let grow = &g[oy * wo..(oy + 1) * wo];
                                let xoff = base + iy * wid;
                                for ox in cols.clone() {
                                    let ix = xoff + ox * spec.stride + kx - spec.padding;
                                    acc += grow[ox] * xd[ix];
                                    dx[ix] += grow[ox] * wv;
                                }
                            }
                            dw[wi] += acc;
                        }
                    }
                }
            }
        }
        Ok(vec![
            Tensor::from_vec(x.shape(), dx)?,
            Tensor::from_vec(w.shape(), dw)?,
            Tensor::from_vec(&[cout], db)?,
        ])
    }
}

pub fn conv2d<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    w: Var,
    b: Var,
    spec: Conv2dSpec,
) -> Result<Var, KernelError> {
    let y = conv2d_forward(tape.value(x), tape.value(w), tape.value(b), spec)?;
    Ok(tape.push(y, Box::new(Conv2dOp { x, w, b, spec })))
}

// ---------------------------------------------------------------- relu

struct ReluOp {
    x: Var,
    active: Vec<bool>,
}

impl<S: Scalar> TapeOp<S> for ReluOp {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x]
    }

    fn backward(
        &self,
        _values: &ValueView<'_, S>,
        output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let data = self
            .active
            .iter()
            .zip(dy.data())
            .map(|(&on, &g)| if on { g } else { S::zero() })
            .collect();
        Ok(vec![Tensor::from_vec(output.shape(), data)?])
    }

    fn fingerprint(&self, hasher: &mut DefaultHasher) {
        self.active.hash(hasher);
    }
}

pub fn relu<S: Scalar>(tape: &mut Tape<S>, x: Var) -> Var {
    let xv = tape.value(x);
    let y = xv.map(|v| v.max(S::zero()));
    let active = xv.data().iter().map(|&v| v > S::zero()).collect();
    tape.push(y, Box::new(ReluOp { x, active }))
}

// ---------------------------------------------------------------- global average pool

/// `N×C×H×W` → `N×C` spatial mean.
pub fn global_avg_pool_forward<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>, KernelError> {
    let (n, c, h, w) = x.dims4()?;
    let area = S::lit((h * w) as f64);
    let data = x
        .data()
        .chunks(h * w)
        .map(|plane| plane.iter().copied().sum::<S>() / area)
        .collect();
    Tensor::from_vec(&[n, c], data)
}

struct GlobalAvgPoolOp {
    x: Var,
}

impl<S: Scalar> TapeOp<S> for GlobalAvgPoolOp {
    fn name(&self) -> &'static str {
        "global_avg_pool"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let (_, _, h, w) = x.dims4()?;
        let area = S::lit((h * w) as f64);
        let mut dx = Vec::with_capacity(x.len());
        for &g in dy.data() {
            let v = g / area;
            dx.extend(std::iter::repeat(v).take(h * w));
        }
        Ok(vec![Tensor::from_vec(x.shape(), dx)?])
    }
}

pub fn global_avg_pool<S: Scalar>(tape: &mut Tape<S>, x: Var) -> Result<Var, KernelError> {
    let y = global_avg_pool_forward(tape.value(x))?;
    Ok(tape.push(y, Box::new(GlobalAvgPoolOp { x })))
}

// ---------------------------------------------------------------- maxpool1d

/// Window max over time for `x: T×C`. Returns the pooled values and, per
/// output cell, the source row; ties go to the lowest row.
pub fn maxpool1d_forward<S: Scalar>(
    x: &Tensor<S>,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor<S>, Vec<usize>), KernelError> {
    let (t, c) = x.dims2()?;
    if kernel == 0 || stride == 0 {
        return Err(KernelError::Shape("maxpool needs kernel, stride >= 1".into()));
    }
    if t < kernel {
        return Err(KernelError::TooShort {
            len: t,
            required: kernel,
        });
    }
    let tout = (t - kernel) / stride + 1;
    let mut out = Vec::with_capacity(tout * c);
    let mut argmax = Vec::with_capacity(tout * c);
    for to in 0..tout {
        for ch in 0..c {
            let start = to * stride;
            let mut best = start;
            for r in start + 1..start + kernel {
                if x.at2(r, ch) > x.at2(best, ch) {
                    best = r;
                }
            }
            out.push(x.at2(best, ch));
            argmax.push(best);
        }
    }
    Ok((Tensor::from_vec(&[tout, c], out)?, argmax))
}

struct MaxPool1dOp {
    x: Var,
    argmax: Vec<usize>,
}

impl<S: Scalar> TapeOp<S> for MaxPool1dOp {
    fn name(&self) -> &'static str {
        "maxpool1d"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let (_, c) = x.dims2()?;
        let mut dx = Tensor::zeros(x.shape());
        let d = dx.data_mut();
        for (cell, (&src, &g)) in self.argmax.iter().zip(dy.data()).enumerate() {
            d[src * c + cell % c] += g;
        }
        Ok(vec![dx])
    }

    fn fingerprint(&self, hasher: &mut DefaultHasher) {
        self.argmax.hash(hasher);
    }
}

pub fn maxpool1d<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    kernel: usize,
    stride: usize,
) -> Result<Var, KernelError> {
    let (y, argmax) = maxpool1d_forward(tape.value(x), kernel, stride)?;
    Ok(tape.push(y, Box::new(MaxPool1dOp { x, argmax })))
}

// ---------------------------------------------------------------- add

struct AddOp {
    a: Var,
    b: Var,
}

impl<S: Scalar> TapeOp<S> for AddOp {
    fn name(&self) -> &'static str {
        "add"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.a, self.b]
    }

    fn backward(
        &self,
        _values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        Ok(vec![dy.clone(), dy.clone()])
    }
}

pub fn add<S: Scalar>(tape: &mut Tape<S>, a: Var, b: Var) -> Result<Var, KernelError> {
    let y = tape.value(a).add(tape.value(b))?;
    Ok(tape.push(y, Box::new(AddOp { a, b })))
}

// ---------------------------------------------------------------- softmax

/// Max-subtracted softmax of a vector.
pub fn softmax<S: Scalar>(x: &[S]) -> Vec<S> {
    let max = x.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Row-wise log-softmax of a matrix.
pub fn log_softmax_rows<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>, KernelError> {
    let (t, c) = x.dims2()?;
    let mut out = Vec::with_capacity(t * c);
    for r in 0..t {
        out.extend(log_softmax(x.row(r)));
    }
    Tensor::from_vec(&[t, c], out)
}

pub fn log_softmax<S: Scalar>(x: &[S]) -> Vec<S> {
    let max = x.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = max + x.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
    x.iter().map(|&v| v - lse).collect()
}
