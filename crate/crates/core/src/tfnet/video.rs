use crate::corpus::FrameArchive;
use crate::nnkernel::{KernelError, Scalar, Tensor};

/// `T×C×H×W` frame sequence with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor<S> {
    pub data: Tensor<S>,
}

impl<S: Scalar> VideoTensor<S> {
    pub fn new(data: Tensor<S>) -> Result<Self, KernelError> {
        let (t, ..) = data.dims4()?;
        if t == 0 {
            return Err(KernelError::Shape("video has no frames".into()));
        }
        Ok(Self { data })
    }

    /// Converts interleaved `H×W×C` bytes to planar values in `[0, 1]`.
    pub fn from_archive(archive: &FrameArchive) -> Result<Self, KernelError> {
        let (c, h, w) = (archive.channels, archive.height, archive.width);
        let scale = S::lit(1.0 / 255.0);
        let mut data = Vec::with_capacity(archive.len() * c * h * w);
        for frame in &archive.frames {
            for ch in 0..c {
                for p in 0..h * w {
                    data.push(S::lit(frame[p * c + ch] as f64) * scale);
                }
            }
        }
        Self::new(Tensor::from_vec(&[archive.len(), c, h, w], data)?)
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn frame(&self, t: usize) -> &[S] {
        let n = self.channels() * self.height() * self.width();
        &self.data.data()[t * n..(t + 1) * n]
    }
}
