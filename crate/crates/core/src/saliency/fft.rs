//! Two-dimensional FFT over row-major complex grids.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::SaliencyError;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn from_real(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height, "grid size mismatch");
        Self {
            width,
            height,
            data: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn at(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }
}

/// Forward (unnormalized) or inverse (scaled by `1/(W·H)`) 2-D DFT.
pub fn fft2(grid: &ComplexGrid, inverse: bool) -> Result<ComplexGrid, SaliencyError> {
    let (w, h) = (grid.width, grid.height);
    if !w.is_power_of_two() || !h.is_power_of_two() {
        return Err(SaliencyError::NonPowerOfTwo(w, h));
    }
    let direction = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    let mut planner = FftPlanner::<f64>::new();
    let mut data = grid.data.clone();

    let row_fft = planner.plan_fft(w, direction);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }

    let col_fft = planner.plan_fft(h, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for (y, c) in column.iter_mut().enumerate() {
            *c = data[y * w + x];
        }
        col_fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            data[y * w + x] = *c;
        }
    }

    if inverse {
        let scale = 1.0 / (w * h) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(ComplexGrid {
        width: w,
        height: h,
        data,
    })
}
