//! Layer descriptions shared by the plaintext stack, the MPC forward pass and
//! the randomness budget.

use std::fmt;

/// One layer. Tensors are row-major; conv activations are `[channels, height, width]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        in_height: usize,
        in_width: usize,
    },
    Linear {
        inputs: usize,
        outputs: usize,
    },
    Relu {
        width: usize,
    },
}

impl LayerSpec {
    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, hw: (usize, usize)) -> Self {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel,
            stride,
            in_height: hw.0,
            in_width: hw.1,
        }
    }

    pub fn linear(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Linear { inputs, outputs }
    }

    /// Spatial output size of a conv layer (no padding).
    pub fn conv_out_hw(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv {
                kernel,
                stride,
                in_height,
                in_width,
                ..
            } => Some(((in_height - kernel) / stride + 1, (in_width - kernel) / stride + 1)),
            _ => None,
        }
    }

    /// Flattened per-sample input width.
    pub fn input_len(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels,
                in_height,
                in_width,
                ..
            } => in_channels * in_height * in_width,
            LayerSpec::Linear { inputs, .. } => inputs,
            LayerSpec::Relu { width } => width,
        }
    }

    /// Flattened per-sample output width.
    pub fn output_len(&self) -> usize {
        match *self {
            LayerSpec::Conv { out_channels, .. } => {
                let (h, w) = self.conv_out_hw().unwrap();
                out_channels * h * w
            }
            LayerSpec::Linear { outputs, .. } => outputs,
            LayerSpec::Relu { width } => width,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            LayerSpec::Linear { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Relu { .. } => 0,
        }
    }

    pub fn weight_shape(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((out_channels, in_channels * kernel * kernel)),
            LayerSpec::Linear { inputs, outputs } => Some((outputs, inputs)),
            LayerSpec::Relu { .. } => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => write!(f, "Conv({in_channels}->{out_channels}, k{kernel}, s{stride})"),
            LayerSpec::Linear { inputs, outputs } => write!(f, "Linear({inputs}->{outputs})"),
            LayerSpec::Relu { width } => write!(f, "ReLU({width})"),
        }
    }
}

/// Builds `[Linear, ReLU, Linear, ReLU, ..., Linear]` for the given widths.
pub fn mlp(widths: &[usize]) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for (i, pair) in widths.windows(2).enumerate() {
        if i > 0 {
            layers.push(LayerSpec::Relu { width: pair[0] });
        }
        layers.push(LayerSpec::linear(pair[0], pair[1]));
    }
    layers
}

pub const VIEW_INPUT: (usize, usize, usize) = (3, 45, 60);
pub const VIEW_FEATURE: usize = 32;
pub const MAP_CELLS: usize = 25;
pub const MAP_FEATURE: usize = 128;
pub const CAMERAS: usize = 4;
pub const BUNDLE_LEN: usize = CAMERAS * VIEW_FEATURE + VIEW_FEATURE + MAP_FEATURE;
pub const ACTIONS: usize = 5;

/// View encoder: two stride-2 5x5 convs then two linear layers, 3x45x60 -> 32.
pub fn view_encoder() -> Vec<LayerSpec> {
    let (c, h, w) = VIEW_INPUT;
    let conv1 = LayerSpec::conv(c, 6, 5, 2, (h, w));
    let hw1 = conv1.conv_out_hw().unwrap();
    let conv2 = LayerSpec::conv(6, 6, 5, 2, hw1);
    let flat = conv2.output_len();
    vec![
        conv1,
        LayerSpec::Relu {
            width: conv1.output_len(),
        },
        conv2,
        LayerSpec::Relu { width: flat },
        LayerSpec::linear(flat, 128),
        LayerSpec::Relu { width: 128 },
        LayerSpec::linear(128, VIEW_FEATURE),
    ]
}

/// Map encoder: 25 -> 64 -> 128 -> 128.
pub fn map_encoder() -> Vec<LayerSpec> {
    mlp(&[MAP_CELLS, 64, 128, MAP_FEATURE])
}

/// Action classifier: 288 -> 128 -> 64 -> 16 -> 5.
pub fn action_classifier() -> Vec<LayerSpec> {
    mlp(&[BUNDLE_LEN, 128, 64, 16, ACTIONS])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(layers: &[LayerSpec]) -> Vec<usize> {
        layers
            .iter()
            .filter(|l| !matches!(l, LayerSpec::Relu { .. }))
            .map(|l| l.param_count())
            .collect()
    }

    #[test]
    fn architecture_parameter_counts() {
        assert_eq!(params(&view_encoder()), vec![456, 906, 83072, 4128]);
        assert_eq!(params(&map_encoder()), vec![1664, 8320, 16512]);
        assert_eq!(params(&action_classifier()), vec![36992, 8256, 1040, 85]);
    }

    #[test]
    fn view_encoder_shapes() {
        let v = view_encoder();
        assert_eq!(v[0].conv_out_hw(), Some((21, 28)));
        assert_eq!(v[2].conv_out_hw(), Some((9, 12)));
        assert_eq!(v[2].output_len(), 648);
        assert_eq!(BUNDLE_LEN, 288);
        for pair in v.windows(2) {
            assert_eq!(pair[0].output_len(), pair[1].input_len());
        }
    }
}
