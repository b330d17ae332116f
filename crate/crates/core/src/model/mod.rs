//! The attention-based convolutional recurrent network.
//!
//! Eight convolution layers in four pairs, each pair followed by max
//! pooling, feed two bidirectional GRU layers and a softmax classifier.
//! Frame-level attention can be placed after any pooled convolution pair
//! (rescaling time columns) or on the final GRU sequence (weighted pooling).

mod check;
mod config;
mod net;
mod params;

pub use check::{check_model, gradcheck_suite, GradcheckReport, DEFAULT_GRADCHECK_PLACEMENTS, MODEL_FD_STEP, MODEL_TOLERANCE};
pub use config::{ACRNNConfig, Placement, RnnAttentionForm, CONV_KERNELS, POOL_WINDOWS};
pub use net::{
    cnn_attention, forward_graph, predict, rnn_attention, shape_trace, ForwardPass, RnnAttentionVars, ShapeTrace,
};
pub use params::{build, param_layout, regularization_loss, ModelParams, Param, ParamKind, ParamSpec, INIT_STD};
