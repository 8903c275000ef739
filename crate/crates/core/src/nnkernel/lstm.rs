//! Bidirectional LSTM with hand-written backpropagation through time.
//!
//! Gate blocks are stacked in the order (input, forget, candidate, output)
//! along the leading axis of `w_ih: 4H×Cin`, `w_hh: 4H×H` and `b: 4H`.
//! Initial hidden and cell states are zero.

use super::tape::{Tape, TapeOp, ValueView, Var};
use super::{KernelError, Scalar, Tensor};

/// Borrowed weights of one LSTM direction.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a, S> {
    pub w_ih: &'a Tensor<S>,
    pub w_hh: &'a Tensor<S>,
    pub b: &'a Tensor<S>,
}

impl<S: Scalar> LstmWeights<'_, S> {
    fn dims(&self, cin: usize) -> Result<usize, KernelError> {
        let (g4, wcin) = self.w_ih.dims2()?;
        let h = g4 / 4;
        if g4 % 4 != 0
            || h == 0
            || wcin != cin
            || self.w_hh.shape() != [4 * h, h]
            || self.b.shape() != [4 * h]
        {
            return Err(KernelError::Shape(format!(
                "lstm: input width {cin}, w_ih {:?}, w_hh {:?}, b {:?}",
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.b.shape()
            )));
        }
        Ok(h)
    }
}

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Per-step activations of one direction, indexed in processing order.
struct DirectionCache<S> {
    hidden: usize,
    /// `[i, f, g, o]` activations, `4H` per step.
    gates: Vec<S>,
    cell: Vec<S>,
    tanh_cell: Vec<S>,
    out: Vec<S>,
}

/// Runs one direction over `rows` (already in processing order).
fn run_direction<S: Scalar>(
    x: &Tensor<S>,
    rows: &[usize],
    w: LstmWeights<'_, S>,
) -> Result<DirectionCache<S>, KernelError> {
    let (_, cin) = x.dims2()?;
    let h = w.dims(cin)?;
    let steps = rows.len();
    let (wih, whh, bias) = (w.w_ih.data(), w.w_hh.data(), w.b.data());
    let mut cache = DirectionCache {
        hidden: h,
        gates: vec![S::zero(); steps * 4 * h],
        cell: vec![S::zero(); steps * h],
        tanh_cell: vec![S::zero(); steps * h],
        out: vec![S::zero(); steps * h],
    };
    let mut z = vec![S::zero(); 4 * h];
    for (step, &r) in rows.iter().enumerate() {
        let xr = x.row(r);
        for (j, zj) in z.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (&wv, &xv) in wih[j * cin..(j + 1) * cin].iter().zip(xr) {
                acc += wv * xv;
            }
            if step > 0 {
                let hp = &cache.out[(step - 1) * h..step * h];
                for (&wv, &hv) in whh[j * h..(j + 1) * h].iter().zip(hp) {
                    acc += wv * hv;
                }
            }
            *zj = acc + bias[j];
        }
        let gates = &mut cache.gates[step * 4 * h..(step + 1) * 4 * h];
        for u in 0..h {
            gates[u] = sigmoid(z[u]);
            gates[h + u] = sigmoid(z[h + u]);
            gates[2 * h + u] = z[2 * h + u].tanh();
            gates[3 * h + u] = sigmoid(z[3 * h + u]);
        }
        for u in 0..h {
            let c_prev = if step > 0 {
                cache.cell[(step - 1) * h + u]
            } else {
                S::zero()
            };
            let c = gates[h + u] * c_prev + gates[u] * gates[2 * h + u];
            let tc = c.tanh();
            cache.cell[step * h + u] = c;
            cache.tanh_cell[step * h + u] = tc;
            cache.out[step * h + u] = gates[3 * h + u] * tc;
        }
    }
    Ok(cache)
}

struct DirectionGrads<S> {
    dx: Vec<S>,
    dw_ih: Vec<S>,
    dw_hh: Vec<S>,
    db: Vec<S>,
}

/// BPTT for one direction. `dy` holds `T×2H` output cotangents and
/// `column` selects this direction's half.
fn backprop_direction<S: Scalar>(
    x: &Tensor<S>,
    rows: &[usize],
    w: LstmWeights<'_, S>,
    cache: &DirectionCache<S>,
    dy: &Tensor<S>,
    column: usize,
) -> Result<DirectionGrads<S>, KernelError> {
    let (t, cin) = x.dims2()?;
    let h = cache.hidden;
    let (wih, whh) = (w.w_ih.data(), w.w_hh.data());
    let mut grads = DirectionGrads {
        dx: vec![S::zero(); t * cin],
        dw_ih: vec![S::zero(); 4 * h * cin],
        dw_hh: vec![S::zero(); 4 * h * h],
        db: vec![S::zero(); 4 * h],
    };
    let mut dh_next = vec![S::zero(); h];
    let mut dc_next = vec![S::zero(); h];
    let mut dz = vec![S::zero(); 4 * h];
    let one = S::one();
    for step in (0..rows.len()).rev() {
        let r = rows[step];
        let gates = &cache.gates[step * 4 * h..(step + 1) * 4 * h];
        let dyr = dy.row(r);
        for u in 0..h {
            let (i, f, g, o) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
            let tc = cache.tanh_cell[step * h + u];
            let c_prev = if step > 0 {
                cache.cell[(step - 1) * h + u]
            } else {
                S::zero()
            };
            let dh = dyr[column + u] + dh_next[u];
            let d_o = dh * tc;
            let dc = dh * o * (one - tc * tc) + dc_next[u];
            dz[u] = dc * g * i * (one - i);
            dz[h + u] = dc * c_prev * f * (one - f);
            dz[2 * h + u] = dc * i * (one - g * g);
            dz[3 * h + u] = d_o * o * (one - o);
            dc_next[u] = dc * f;
        }
        let xr = x.row(r);
        let dxr = &mut grads.dx[r * cin..(r + 1) * cin];
        for (j, &dzj) in dz.iter().enumerate() {
            grads.db[j] += dzj;
            let wrow = &wih[j * cin..(j + 1) * cin];
            for ((dw, dxv), (&xv, &wv)) in grads.dw_ih[j * cin..(j + 1) * cin]
                .iter_mut()
                .zip(dxr.iter_mut())
                .zip(xr.iter().zip(wrow))
            {
                *dw += dzj * xv;
                *dxv += dzj * wv;
            }
        }
        dh_next.iter_mut().for_each(|v| *v = S::zero());
        if step > 0 {
            let hp = &cache.out[(step - 1) * h..step * h];
            for (j, &dzj) in dz.iter().enumerate() {
                let wrow = &whh[j * h..(j + 1) * h];
                for ((dw, dhn), (&hv, &wv)) in grads.dw_hh[j * h..(j + 1) * h]
                    .iter_mut()
                    .zip(dh_next.iter_mut())
                    .zip(hp.iter().zip(wrow))
                {
                    *dw += dzj * hv;
                    *dhn += dzj * wv;
                }
            }
        }
    }
    Ok(grads)
}

fn concat_outputs<S: Scalar>(
    t: usize,
    fwd: &DirectionCache<S>,
    bwd: &DirectionCache<S>,
) -> Result<Tensor<S>, KernelError> {
    let h = fwd.hidden;
    let mut out = vec![S::zero(); t * 2 * h];
    for r in 0..t {
        out[r * 2 * h..r * 2 * h + h].copy_from_slice(&fwd.out[r * h..(r + 1) * h]);
        let step = t - 1 - r;
        out[r * 2 * h + h..(r + 1) * 2 * h].copy_from_slice(&bwd.out[step * h..(step + 1) * h]);
    }
    Tensor::from_vec(&[t, 2 * h], out)
}

/// Single-direction LSTM over `x: T×Cin`, returning `T×H` hidden states.
pub fn lstm_forward<S: Scalar>(
    x: &Tensor<S>,
    w: LstmWeights<'_, S>,
) -> Result<Tensor<S>, KernelError> {
    let (t, _) = x.dims2()?;
    let rows: Vec<usize> = (0..t).collect();
    let cache = run_direction(x, &rows, w)?;
    Tensor::from_vec(&[t, cache.hidden], cache.out)
}

/// `x: T×Cin` → `T×2H`: forward-direction states in the first half of
/// each row, backward-direction states (aligned to original time) in the
/// second.
pub fn bilstm_forward<S: Scalar>(
    x: &Tensor<S>,
    fwd: LstmWeights<'_, S>,
    bwd: LstmWeights<'_, S>,
) -> Result<Tensor<S>, KernelError> {
    let (t, cin) = x.dims2()?;
    if fwd.dims(cin)? != bwd.dims(cin)? {
        return Err(KernelError::Shape("bilstm directions differ in width".into()));
    }
    let forward_rows: Vec<usize> = (0..t).collect();
    let backward_rows: Vec<usize> = (0..t).rev().collect();
    let f = run_direction(x, &forward_rows, fwd)?;
    let b = run_direction(x, &backward_rows, bwd)?;
    concat_outputs(t, &f, &b)
}

/// Tape handles of one direction's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b: Var,
}

struct BiLstmOp<S> {
    x: Var,
    fwd: LstmVars,
    bwd: LstmVars,
    fwd_cache: DirectionCache<S>,
    bwd_cache: DirectionCache<S>,
}

fn weights<'a, S: Scalar>(values: &'a ValueView<'_, S>, v: LstmVars) -> LstmWeights<'a, S> {
    LstmWeights {
        w_ih: values.get(v.w_ih),
        w_hh: values.get(v.w_hh),
        b: values.get(v.b),
    }
}

impl<S: Scalar> TapeOp<S> for BiLstmOp<S> {
    fn name(&self) -> &'static str {
        "bilstm"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![
            self.x,
            self.fwd.w_ih,
            self.fwd.w_hh,
            self.fwd.b,
            self.bwd.w_ih,
            self.bwd.w_hh,
            self.bwd.b,
        ]
    }

    fn backward(
        &self,
        values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let x = values.get(self.x);
        let (t, cin) = x.dims2()?;
        let h = self.fwd_cache.hidden;
        let forward_rows: Vec<usize> = (0..t).collect();
        let backward_rows: Vec<usize> = (0..t).rev().collect();
        let fw = weights(values, self.fwd);
        let bw = weights(values, self.bwd);
        let gf = backprop_direction(x, &forward_rows, fw, &self.fwd_cache, dy, 0)?;
        let gb = backprop_direction(x, &backward_rows, bw, &self.bwd_cache, dy, h)?;
        let dx: Vec<S> = gf.dx.iter().zip(&gb.dx).map(|(&a, &b)| a + b).collect();
        Ok(vec![
            Tensor::from_vec(&[t, cin], dx)?,
            Tensor::from_vec(&[4 * h, cin], gf.dw_ih)?,
            Tensor::from_vec(&[4 * h, h], gf.dw_hh)?,
            Tensor::from_vec(&[4 * h], gf.db)?,
            Tensor::from_vec(&[4 * h, cin], gb.dw_ih)?,
            Tensor::from_vec(&[4 * h, h], gb.dw_hh)?,
            Tensor::from_vec(&[4 * h], gb.db)?,
        ])
    }
}

pub fn bilstm<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    fwd: LstmVars,
    bwd: LstmVars,
) -> Result<Var, KernelError> {
    let (y, fwd_cache, bwd_cache) = {
        let values = tape.values();
        let xv = values.get(x);
        let (t, cin) = xv.dims2()?;
        let fw = weights(&values, fwd);
        let bw = weights(&values, bwd);
        if fw.dims(cin)? != bw.dims(cin)? {
            return Err(KernelError::Shape("bilstm directions differ in width".into()));
        }
        let forward_rows: Vec<usize> = (0..t).collect();
        let backward_rows: Vec<usize> = (0..t).rev().collect();
        let f = run_direction(xv, &forward_rows, fw)?;
        let b = run_direction(xv, &backward_rows, bw)?;
        (concat_outputs(t, &f, &b)?, f, b)
    };
    Ok(tape.push(
        y,
        Box::new(BiLstmOp {
            x,
            fwd,
            bwd,
            fwd_cache,
            bwd_cache,
        }),
    ))
}
