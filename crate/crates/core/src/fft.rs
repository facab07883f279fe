//! Two-dimensional DFT on row-major buffers.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Inverse transform including the `1/N` normalization.
    Inverse,
}

fn plan(planner: &mut FftPlanner<f64>, n: usize, dir: Direction) -> std::sync::Arc<dyn Fft<f64>> {
    match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

fn transform_rows(data: &mut [Complex64], cols: usize, fft: &std::sync::Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(cols).for_each(|row| fft.process(row));
}

pub fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(j, col)| {
        for (i, v) in col.iter_mut().enumerate() {
            *v = data[i * cols + j];
        }
    });
    out
}

/// In-place 2D DFT of a `rows x cols` row-major buffer.
pub fn fft2(data: &mut Vec<Complex64>, rows: usize, cols: usize, dir: Direction) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    let row_fft = plan(&mut planner, cols, dir);
    let col_fft = plan(&mut planner, rows, dir);
    transform_rows(data, cols, &row_fft);
    let mut t = transpose(data, rows, cols);
    transform_rows(&mut t, rows, &col_fft);
    *data = transpose(&t, cols, rows);
    if dir == Direction::Inverse {
        let s = 1.0 / (rows * cols) as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }
}

/// Angular frequencies `2 pi k / (n h)` in DFT order.
pub fn angular_frequencies(n: usize, h: f64) -> Vec<f64> {
    let l = n as f64 * h;
    (0..n)
        .map(|k| {
            let kk = if k < n.div_ceil(2) {
                k as f64
            } else {
                k as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * kk / l
        })
        .collect()
}
