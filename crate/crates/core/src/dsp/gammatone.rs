use super::{Matrix, N_BANDS, N_FFT, SAMPLE_RATE};

/// Lowest and highest frequencies spanned by the band centres.
pub const F_MIN: f64 = 20.0;
pub const F_MAX: f64 = 22_050.0;
/// Gammatone filter order.
pub const ORDER: i32 = 4;
/// Bandwidth factor relative to the ERB.
const BANDWIDTH: f64 = 1.019;

/// ERB-rate (number of ERBs below `f` Hz).
pub fn erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn erb_rate_inverse(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `f` Hz.
fn erb(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// Spectral weighting matrix: one row per band, one column per FFT bin.
///
/// Band centres are equally spaced on the ERB-rate scale over
/// `[F_MIN, F_MAX]` (midpoints of `n_bands` equal ERB-rate intervals, so
/// every centre lies strictly inside the range). Row `b` is the squared
/// magnitude response of a 4th-order gammatone filter centred at `c_b`,
///
/// ```text
/// |H(f)|² = (1 + ((f − c_b) / (1.019·ERB(c_b)))²)^(−4)
/// ```
///
/// sampled at the bin frequencies and scaled so that its maximum is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct GammatoneFilterbank {
    pub weights: Matrix,
    pub center_frequencies: Vec<f64>,
}

impl Default for GammatoneFilterbank {
    fn default() -> Self {
        Self::new(N_BANDS, SAMPLE_RATE, N_FFT)
    }
}

impl GammatoneFilterbank {
    pub fn new(n_bands: usize, sample_rate: u32, n_fft: usize) -> Self {
        assert!(n_bands >= 1, "filterbank needs at least one band");
        let sr = f64::from(sample_rate);
        let n_bins = n_fft / 2 + 1;
        let (lo, hi) = (erb_rate(F_MIN), erb_rate(F_MAX.min(sr / 2.0)));
        let step = (hi - lo) / n_bands as f64;
        let centers: Vec<f64> = (0..n_bands)
            .map(|b| erb_rate_inverse(lo + (b as f64 + 0.5) * step))
            .collect();
        let mut weights = Matrix::zeros(n_bands, n_bins);
        for (b, &c) in centers.iter().enumerate() {
            let bw = BANDWIDTH * erb(c);
            let resp: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sr / n_fft as f64;
                    (1.0 + ((f - c) / bw).powi(2)).powi(-ORDER)
                })
                .collect();
            let peak = resp.iter().copied().fold(0.0, f64::max);
            for (k, r) in resp.iter().enumerate() {
                weights.set(b, k, (r / peak) as f32);
            }
        }
        GammatoneFilterbank {
            weights,
            center_frequencies: centers,
        }
    }

    pub fn n_bands(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.cols()
    }
}
