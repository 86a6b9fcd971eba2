use crate::error::{shape_err, Error, Result};

/// Real feature tensor of shape `[bands x frames x dim]`, band-major, so the
/// frames of one band form a contiguous `[frames x dim]` block.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFeatures {
    bands: usize,
    frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl SubbandFeatures {
    pub fn zeros(bands: usize, frames: usize, dim: usize) -> Self {
        Self {
            bands,
            frames,
            dim,
            data: vec![0.0; bands * frames * dim],
        }
    }

    pub fn from_vec(bands: usize, frames: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != bands * frames * dim {
            return Err(shape_err(format!(
                "feature data has {} values, expected {bands} x {frames} x {dim}",
                data.len()
            )));
        }
        Ok(Self {
            bands,
            frames,
            dim,
            data,
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.bands, self.frames, self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    fn offset(&self, band: usize, frame: usize) -> usize {
        (band * self.frames + frame) * self.dim
    }

    /// Feature vector of one (band, frame) cell.
    pub fn cell(&self, band: usize, frame: usize) -> &[f32] {
        let o = self.offset(band, frame);
        &self.data[o..o + self.dim]
    }

    pub fn cell_mut(&mut self, band: usize, frame: usize) -> &mut [f32] {
        let o = self.offset(band, frame);
        let d = self.dim;
        &mut self.data[o..o + d]
    }

    /// The `[frames x dim]` block of one band.
    pub fn band(&self, band: usize) -> &[f32] {
        let o = self.offset(band, 0);
        &self.data[o..o + self.frames * self.dim]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f32] {
        let o = self.offset(band, 0);
        let n = self.frames * self.dim;
        &mut self.data[o..o + n]
    }

    /// Copies out the `[bands x dim]` slice of one frame.
    pub fn frame(&self, frame: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.bands * self.dim);
        for k in 0..self.bands {
            out.extend_from_slice(self.cell(k, frame));
        }
        out
    }

    pub fn set_frame(&mut self, frame: usize, values: &[f32]) {
        debug_assert_eq!(values.len(), self.bands * self.dim);
        for k in 0..self.bands {
            let d = self.dim;
            self.cell_mut(k, frame)
                .copy_from_slice(&values[k * d..(k + 1) * d]);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_shape(&self, bands: usize, frames: usize, dim: usize) -> Result<()> {
        if self.shape() != (bands, frames, dim) {
            return Err(Error::Shape(format!(
                "features are {:?}, expected ({bands}, {frames}, {dim})",
                self.shape()
            )));
        }
        Ok(())
    }

    /// Splits off the band-major tensor into the first `bands` bands and the rest.
    pub fn split_bands(mut self, bands: usize) -> (SubbandFeatures, SubbandFeatures) {
        let at = bands.min(self.bands) * self.frames * self.dim;
        let rest = self.data.split_off(at);
        let low = SubbandFeatures {
            bands: bands.min(self.bands),
            frames: self.frames,
            dim: self.dim,
            data: self.data,
        };
        let high = SubbandFeatures {
            bands: self.bands - low.bands,
            frames: self.frames,
            dim: self.dim,
            data: rest,
        };
        (low, high)
    }

    /// Inverse of [`split_bands`](Self::split_bands).
    pub fn concat_bands(
        mut low: SubbandFeatures,
        high: SubbandFeatures,
    ) -> Result<SubbandFeatures> {
        if low.frames != high.frames || low.dim != high.dim {
            return Err(shape_err("band concatenation needs equal frames and dim"));
        }
        low.bands += high.bands;
        low.data.extend_from_slice(&high.data);
        Ok(low)
    }
}
