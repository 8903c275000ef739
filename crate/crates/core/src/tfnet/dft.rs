//! Magnitude spectrum along time.
//!
//! For each channel `c`, `X[k] = Σ_t f[t, c] · e^{-2πikt/T}` (unnormalised)
//! and the output row `k` holds `|X[k]|`, so the sequence length is kept.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::nnkernel::tape::{Tape, TapeOp, ValueView, Var};
use crate::nnkernel::{KernelError, Scalar, Tensor};

/// Per-channel complex spectra, `spectra[c][k]`, and the magnitude matrix.
fn spectra<S: Scalar>(f: &Tensor<S>) -> Result<(Vec<Vec<Complex<S>>>, Tensor<S>), KernelError> {
    let (t, c) = f.dims2()?;
    if t == 0 {
        return Err(KernelError::TooShort { len: 0, required: 1 });
    }
    let fft = FftPlanner::<S>::new().plan_fft_forward(t);
    let mut all = Vec::with_capacity(c);
    let mut mags = vec![S::zero(); t * c];
    for ch in 0..c {
        let mut buf: Vec<Complex<S>> = (0..t).map(|r| Complex::new(f.at2(r, ch), S::zero())).collect();
        fft.process(&mut buf);
        for (k, x) in buf.iter().enumerate() {
            mags[k * c + ch] = x.norm();
        }
        all.push(buf);
    }
    Ok((all, Tensor::from_vec(&[t, c], mags)?))
}

/// `T×C'` features → `T×C'` DFT magnitudes.
pub fn dft_time<S: Scalar>(f: &Tensor<S>) -> Result<Tensor<S>, KernelError> {
    Ok(spectra(f)?.1)
}

struct DftMagnitudeOp<S> {
    x: Var,
    spectra: Vec<Vec<Complex<S>>>,
}

impl<S: Scalar> TapeOp<S> for DftMagnitudeOp<S> {
    fn name(&self) -> &'static str {
        "dft_magnitude"
    }

    fn inputs(&self) -> Vec<Var> {
        vec![self.x]
    }

    // d|X_k|/df_t = Re(conj(X_k) e^{-2πikt/T}) / |X_k|, so the input
    // cotangent is Re(FFT(u))[t] with u_k = g_k conj(X_k) / |X_k|.
    // Bins with |X_k| = 0 contribute nothing.
    fn backward(
        &self,
        _values: &ValueView<'_, S>,
        _output: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<Vec<Tensor<S>>, KernelError> {
        let (t, c) = dy.dims2()?;
        let fft = FftPlanner::<S>::new().plan_fft_forward(t);
        let mut dx = vec![S::zero(); t * c];
        for (ch, spectrum) in self.spectra.iter().enumerate() {
            let mut u: Vec<Complex<S>> = spectrum
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let mag = x.norm();
                    if mag > S::zero() {
                        x.conj() * (dy.at2(k, ch) / mag)
                    } else {
                        Complex::new(S::zero(), S::zero())
                    }
                })
                .collect();
            fft.process(&mut u);
            for (r, v) in u.iter().enumerate() {
                dx[r * c + ch] = v.re;
            }
        }
        Ok(vec![Tensor::from_vec(&[t, c], dx)?])
    }
}

pub fn dft_magnitude<S: Scalar>(tape: &mut Tape<S>, x: Var) -> Result<Var, KernelError> {
    let (spectra, mags) = spectra(tape.value(x))?;
    Ok(tape.push(mags, Box::new(DftMagnitudeOp { x, spectra })))
}
