//! A minimal dense tensor: a shape and a contiguous row-major buffer.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, checking that the value count matches the shape.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, String> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(format!(
                "shape {shape:?} wants {expect} values, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for shapes known to be consistent.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// First dimension (batch size for 2-D batches).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Features per row for 2-D batches.
    pub fn cols(&self) -> usize {
        self.data.len() / self.rows().max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
