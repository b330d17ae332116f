/// Linear-interpolation resampling to exactly `out_len` samples. Output
/// sample `i` reads the input at position `i · in_len / out_len`; reads past
/// the last sample hold its value.
pub fn resample_linear(x: &[f32], out_len: usize) -> Vec<f32> {
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let ratio = x.len() as f64 / out_len as f64;
    let last = x.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = pos - i0 as f64;
            (f64::from(x[i0]) * (1.0 - frac) + f64::from(x[i1]) * frac) as f32
        })
        .collect()
}

/// Converts between sample rates; output length is `round(n · to / from)`.
pub fn resample_rate(x: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to {
        return x.to_vec();
    }
    let out_len = (x.len() as f64 * f64::from(to) / f64::from(from)).round() as usize;
    resample_linear(x, out_len)
}
