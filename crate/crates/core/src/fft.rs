//! Square 2-D transforms on row-major buffers.
//!
//! Frequency-side buffers are stored centered: index `c` along an axis holds
//! wavenumber `c - n/2`. The centering is folded into a `(-1)^(i1+i2)`
//! modulation of the spatial samples, so no quadrant swap is needed.
//! Transforms are unnormalized; callers apply the physical scaling.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

struct PlanPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<PlanPair> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PlanPair>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(PlanPair {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn rows_transform(buf: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>, rows: Option<&[usize]>) {
    let scratch_len = fft.get_inplace_scratch_len();
    match rows {
        None => buf.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        ),
        Some(list) => {
            let mut picked: Vec<&mut [Complex64]> = Vec::with_capacity(list.len());
            let mut wanted = vec![false; n];
            for &r in list {
                wanted[r] = true;
            }
            for (r, row) in buf.chunks_mut(n).enumerate() {
                if wanted[r] {
                    picked.push(row);
                }
            }
            picked.into_par_iter().for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, row| fft.process_with_scratch(row, scratch),
            );
        }
    }
}

/// In-place transpose of an `n x n` row-major matrix.
pub(crate) fn transpose(buf: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

fn checkerboard(buf: &mut [Complex64], n: usize) {
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let start = 1 - (i & 1);
        for v in row.iter_mut().skip(start).step_by(2) {
            *v = -*v;
        }
    });
}

/// Spatial samples (natural order) to centered spectrum, unnormalized.
pub(crate) fn forward_centered(buf: &mut [Complex64], n: usize) {
    debug_assert_eq!(buf.len(), n * n);
    let p = plans(n);
    checkerboard(buf, n);
    rows_transform(buf, n, &p.forward, None);
    transpose(buf, n);
    rows_transform(buf, n, &p.forward, None);
    transpose(buf, n);
}

fn nonzero_lines(buf: &[Complex64], n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut row_hit = vec![false; n];
    let mut col_hit = vec![false; n];
    for (r, row) in buf.chunks(n).enumerate() {
        for (c, v) in row.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                row_hit[r] = true;
                col_hit[c] = true;
            }
        }
    }
    let pick = |hits: Vec<bool>| hits.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect();
    (pick(row_hit), pick(col_hit))
}

/// Centered spectrum to spatial samples, unnormalized. Rows or columns that
/// are identically zero are skipped in the first pass.
pub(crate) fn inverse_centered(buf: &mut [Complex64], n: usize) {
    debug_assert_eq!(buf.len(), n * n);
    let p = plans(n);
    let (rows, cols) = nonzero_lines(buf, n);
    if rows.is_empty() {
        return;
    }
    if rows.len() <= cols.len() {
        rows_transform(buf, n, &p.inverse, Some(&rows));
        transpose(buf, n);
        rows_transform(buf, n, &p.inverse, None);
        transpose(buf, n);
    } else {
        transpose(buf, n);
        rows_transform(buf, n, &p.inverse, Some(&cols));
        transpose(buf, n);
        rows_transform(buf, n, &p.inverse, None);
    }
    checkerboard(buf, n);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_is_involution() {
        let n = 40;
        let orig: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(k as f64, -(k as f64))).collect();
        let mut buf = orig.clone();
        transpose(&mut buf, n);
        assert_eq!(buf[1], orig[n]);
        transpose(&mut buf, n);
        assert_eq!(buf, orig);
    }

    #[test]
    fn pruned_inverse_matches_dense() {
        let n = 16;
        let mut spec = vec![Complex64::new(0.0, 0.0); n * n];
        spec[3 * n + 5] = Complex64::new(1.0, 2.0);
        spec[3 * n + 9] = Complex64::new(-0.5, 0.25);
        let mut pruned = spec.clone();
        inverse_centered(&mut pruned, n);
        // Dense reference by direct summation.
        for i1 in 0..n {
            for i2 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for c1 in 0..n {
                    for c2 in 0..n {
                        let v = spec[c1 * n + c2];
                        if v.norm() == 0.0 {
                            continue;
                        }
                        let k1 = c1 as f64 - (n / 2) as f64;
                        let k2 = c2 as f64 - (n / 2) as f64;
                        let ph = 2.0 * std::f64::consts::PI * (k1 * i1 as f64 + k2 * i2 as f64) / n as f64;
                        acc += v * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - pruned[i1 * n + i2]).norm() < 1e-12);
            }
        }
    }
}
