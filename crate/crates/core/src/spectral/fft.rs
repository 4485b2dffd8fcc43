use std::cell::RefCell;

use rustfft::FftPlanner;

use super::Grid;
use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalised in-place d-dimensional DFT over a row-major buffer.
pub(super) fn fft_nd(grid: Grid, buf: &mut [C64], inverse: bool) {
    let n = grid.n();
    let d = grid.dim();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // the last axis is contiguous
    fft.process_with_scratch(buf, &mut scratch);
    if d == 1 {
        return;
    }
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..d - 1 {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = buf.len() / (n * stride);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (k, l) in line.iter_mut().enumerate() {
                    *l = buf[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, l) in line.iter().enumerate() {
                    buf[base + k * stride] = *l;
                }
            }
        }
    }
}
