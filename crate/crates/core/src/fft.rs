//! Multi-dimensional complex FFT over row-major `N^m` arrays.
//!
//! Forward transforms are scaled by `N^-m` so that the output holds Fourier
//! series coefficients; inverse transforms are unscaled.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Lines per parallel work item along the contiguous axis.
const LINE_BATCH: usize = 64;

fn transform(data: &mut [Complex64], n: usize, dim: usize, inverse: bool) {
    let total = n.pow(dim as u32);
    assert_eq!(data.len(), total, "fft buffer has wrong length");
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let scratch_len = plan.get_inplace_scratch_len();

    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(n * LINE_BATCH).for_each(|chunk| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                plan.process_with_scratch(chunk, &mut scratch);
            });
        } else {
            // Each block is an (n x stride) matrix whose lines run down the
            // columns; columns are gathered in groups, transformed in
            // parallel, then scattered back.
            let block = n * stride;
            let group = LINE_BATCH.min(stride);
            for blk in data.chunks_mut(block) {
                let src: &[Complex64] = blk;
                let done: Vec<Vec<Complex64>> = (0..stride.div_ceil(group))
                    .into_par_iter()
                    .map(|gi| {
                        let i0 = gi * group;
                        let w = group.min(stride - i0);
                        let mut buf = vec![Complex64::new(0.0, 0.0); w * n];
                        for j in 0..n {
                            let row = &src[j * stride + i0..j * stride + i0 + w];
                            for (c, z) in row.iter().enumerate() {
                                buf[c * n + j] = *z;
                            }
                        }
                        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                        plan.process_with_scratch(&mut buf, &mut scratch);
                        buf
                    })
                    .collect();
                for (gi, buf) in done.iter().enumerate() {
                    let i0 = gi * group;
                    let w = buf.len() / n;
                    for j in 0..n {
                        let row = &mut blk[j * stride + i0..j * stride + i0 + w];
                        for (c, z) in row.iter_mut().enumerate() {
                            *z = buf[c * n + j];
                        }
                    }
                }
            }
        }
    }

    if !inverse {
        let scale = 1.0 / total as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }
}

pub(crate) fn forward(data: &mut [Complex64], n: usize, dim: usize) {
    transform(data, n, dim, false);
}

pub(crate) fn inverse(data: &mut [Complex64], n: usize, dim: usize) {
    transform(data, n, dim, true);
}
