//! Small dense-vector kernels shared by the scan, scoring and training paths.
//!
//! Every cosine/dot in the crate funnels through these so that independently
//! computed results (e.g. sharded vs unsharded scans) are bit-identical.

/// Dot product of two f32 slices with a fixed 4-accumulator summation order.
///
/// The manual accumulators let LLVM keep the reduction in vector registers
/// while the bracketing stays deterministic.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0f32;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_f32(a: &[f32]) -> f64 {
    a.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_f64(a: &[f64]) -> f64 {
    dot_f64(a, a).sqrt()
}

/// Cosine of two f64 vectors, both normalized internally.
#[inline]
pub fn cosine_f64(a: &[f64], b: &[f64]) -> f64 {
    dot_f64(a, b) / (norm_f64(a) * norm_f64(b))
}

/// Normalize a vector in f64 and narrow to f32.
///
/// Used by every generator so rows land on the unit sphere to f32 precision.
pub fn unit_f32_from_f64(v: &[f64]) -> Vec<f32> {
    let n = norm_f64(v);
    v.iter().map(|&x| (x / n) as f32).collect()
}

/// `a += s * b`
#[inline]
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}
