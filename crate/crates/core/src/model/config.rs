use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Receptive field `(freq, time)` of each convolution pair.
pub const CONV_KERNELS: [(usize, usize); 4] = [(3, 5), (3, 1), (1, 5), (3, 3)];

/// Max-pool window (equal to its stride) after each convolution pair.
pub const POOL_WINDOWS: [(usize, usize); 4] = [(4, 3), (4, 1), (1, 3), (2, 2)];

/// Where frame-level attention is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    None,
    L2,
    L4,
    L6,
    L8,
    L10,
}

impl Placement {
    pub const ALL: [Placement; 6] = [
        Placement::None,
        Placement::L2,
        Placement::L4,
        Placement::L6,
        Placement::L8,
        Placement::L10,
    ];

    /// Convolution pair (0-based) whose pooled output is attended, if any.
    pub fn cnn_pair(self) -> Option<usize> {
        match self {
            Placement::L2 => Some(0),
            Placement::L4 => Some(1),
            Placement::L6 => Some(2),
            Placement::L8 => Some(3),
            Placement::None | Placement::L10 => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Placement::None => "none",
            Placement::L2 => "l2",
            Placement::L4 => "l4",
            Placement::L6 => "l6",
            Placement::L8 => "l8",
            Placement::L10 => "l10",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Placement::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown attention placement {s:?}; expected none, l2, l4, l6, l8 or l10")))
    }
}

/// Score function of the recurrent attention head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RnnAttentionForm {
    /// `score_t = w · h_t`.
    Linear,
    /// `score_t = w · tanh(W1 h_t + b1)`.
    Mlp,
}

impl RnnAttentionForm {
    pub fn label(self) -> &'static str {
        match self {
            RnnAttentionForm::Linear => "linear",
            RnnAttentionForm::Mlp => "mlp",
        }
    }
}

impl fmt::Display for RnnAttentionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RnnAttentionForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RnnAttentionForm::Linear),
            "mlp" => Ok(RnnAttentionForm::Mlp),
            _ => Err(Error::Config(format!("unknown rnn attention form {s:?}; expected linear or mlp"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ACRNNConfig {
    pub num_classes: usize,
    pub attention_placement: Placement,
    pub conv_widths: [usize; 8],
    pub gru_hidden: usize,
    pub dropout_p: f64,
    pub l2_coeff: f64,
    pub rnn_attention_form: RnnAttentionForm,
    /// `(frequency bands, frames, channels)` of one input segment.
    pub input: (usize, usize, usize),
}

impl Default for ACRNNConfig {
    fn default() -> Self {
        ACRNNConfig {
            num_classes: 50,
            attention_placement: Placement::L10,
            conv_widths: [32, 32, 64, 64, 128, 128, 256, 256],
            gru_hidden: 256,
            dropout_p: 0.5,
            l2_coeff: 1e-4,
            rnn_attention_form: RnnAttentionForm::Mlp,
            input: (128, 128, 2),
        }
    }
}

impl ACRNNConfig {
    pub fn with_classes(num_classes: usize) -> Self {
        ACRNNConfig {
            num_classes,
            ..Self::default()
        }
    }

    /// Eight-times narrower network on `32×32×2` input with a 16-unit GRU,
    /// small enough for finite-difference checks.
    pub fn reduced(num_classes: usize) -> Self {
        ACRNNConfig {
            input: (32, 32, 2),
            ..Self::narrow(num_classes)
        }
    }

    /// The [`reduced`](Self::reduced) widths on full-size segments, for
    /// quick training runs on real features.
    pub fn narrow(num_classes: usize) -> Self {
        ACRNNConfig {
            num_classes,
            conv_widths: [4, 4, 8, 8, 16, 16, 32, 32],
            gru_hidden: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be at least 2, got {}", self.num_classes)));
        }
        if self.conv_widths.contains(&0) || self.gru_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        if !(self.l2_coeff >= 0.0 && self.l2_coeff.is_finite()) {
            return Err(Error::Config(format!("l2_coeff {} must be non-negative", self.l2_coeff)));
        }
        let (f, t, c) = self.input;
        if f == 0 || t == 0 || c == 0 {
            return Err(Error::Config(format!("input shape {:?} has a zero dimension", self.input)));
        }
        self.pooled_dims().map(|_| ())
    }

    /// `(F, T, C)` after each pooled convolution pair.
    pub fn pooled_dims(&self) -> Result<[(usize, usize, usize); 4]> {
        let (mut f, mut t, _) = self.input;
        let mut out = [(0, 0, 0); 4];
        for (pair, &(pf, pt)) in POOL_WINDOWS.iter().enumerate() {
            f /= pf;
            t /= pt;
            if f == 0 || t == 0 {
                return Err(Error::Config(format!(
                    "input {:?} is too small: pooling after l{} leaves no frames",
                    self.input,
                    2 * pair + 2
                )));
            }
            out[pair] = (f, t, self.conv_widths[2 * pair + 1]);
        }
        Ok(out)
    }

    /// `(steps, width)` of the sequence entering the first GRU layer.
    pub fn sequence_dims(&self) -> Result<(usize, usize)> {
        let (f, t, c) = self.pooled_dims()?[3];
        Ok((t, f * c))
    }
}
