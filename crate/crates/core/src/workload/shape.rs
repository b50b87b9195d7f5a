//! Layer shape descriptions and the arithmetic that turns them into
//! weight footprint, MAC count and output activation volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Conv,
    Fc,
    DepthwiseConv,
}

/// Shape of one compute layer.
///
/// `hout`/`wout` are the output spatial dimensions; for fully connected
/// layers they (and the kernel dimensions) are 1. For depthwise
/// convolutions `cout` must equal `cin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub kind: LayerKind,
    pub cin: u64,
    pub cout: u64,
    #[serde(default = "one")]
    pub kh: u64,
    #[serde(default = "one")]
    pub kw: u64,
    #[serde(default = "one")]
    pub hout: u64,
    #[serde(default = "one")]
    pub wout: u64,
    pub bits_per_weight: u64,
    pub bits_per_activation: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerStats {
    pub weight_bits: u64,
    pub mac_ops: u64,
    pub out_activation_bits: u64,
}

impl LayerShape {
    pub fn fc(cin: u64, cout: u64, bits: u64) -> Self {
        LayerShape {
            kind: LayerKind::Fc,
            cin,
            cout,
            kh: 1,
            kw: 1,
            hout: 1,
            wout: 1,
            bits_per_weight: bits,
            bits_per_activation: bits,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv(cin: u64, cout: u64, k: u64, hout: u64, wout: u64, bits: u64) -> Self {
        LayerShape {
            kind: LayerKind::Conv,
            cin,
            cout,
            kh: k,
            kw: k,
            hout,
            wout,
            bits_per_weight: bits,
            bits_per_activation: bits,
        }
    }

    pub fn depthwise(channels: u64, k: u64, hout: u64, wout: u64, bits: u64) -> Self {
        LayerShape {
            kind: LayerKind::DepthwiseConv,
            cin: channels,
            cout: channels,
            kh: k,
            kw: k,
            hout,
            wout,
            bits_per_weight: bits,
            bits_per_activation: bits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("cin", self.cin),
            ("cout", self.cout),
            ("kh", self.kh),
            ("kw", self.kw),
            ("hout", self.hout),
            ("wout", self.wout),
            ("bits_per_weight", self.bits_per_weight),
            ("bits_per_activation", self.bits_per_activation),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("layer dimension `{name}` must be >= 1")));
        }
        match self.kind {
            LayerKind::Fc => {
                if self.kh != 1 || self.kw != 1 || self.hout != 1 || self.wout != 1 {
                    return Err(Error::Validation(
                        "fully connected layers take kh = kw = hout = wout = 1".into(),
                    ));
                }
            }
            LayerKind::DepthwiseConv => {
                if self.cout != self.cin {
                    return Err(Error::Validation(format!(
                        "depthwise convolution needs cout == cin (got {} vs {})",
                        self.cout, self.cin
                    )));
                }
            }
            LayerKind::Conv => {}
        }
        Ok(())
    }
}

/// Weight bits, MAC count and output activation bits of one layer.
pub fn layer_stats(shape: &LayerShape) -> Result<LayerStats> {
    shape.validate()?;
    let s = shape;
    let overflow = || Error::Validation("layer statistics overflow u64".into());
    let mul = |xs: &[u64]| xs.iter().try_fold(1u64, |acc, &x| acc.checked_mul(x)).ok_or_else(overflow);
    let stats = match s.kind {
        LayerKind::Conv | LayerKind::Fc => LayerStats {
            weight_bits: mul(&[s.kh, s.kw, s.cin, s.cout, s.bits_per_weight])?,
            mac_ops: mul(&[s.kh, s.kw, s.cin, s.cout, s.hout, s.wout])?,
            out_activation_bits: mul(&[s.cout, s.hout, s.wout, s.bits_per_activation])?,
        },
        // One kh x kw filter per channel.
        LayerKind::DepthwiseConv => LayerStats {
            weight_bits: mul(&[s.kh, s.kw, s.cin, s.bits_per_weight])?,
            mac_ops: mul(&[s.kh, s.kw, s.cin, s.hout, s.wout])?,
            out_activation_bits: mul(&[s.cin, s.hout, s.wout, s.bits_per_activation])?,
        },
    };
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts MACs by walking every output element and every kernel tap.
    fn brute_force(shape: &LayerShape) -> LayerStats {
        let mut macs = 0u64;
        let mut weights = std::collections::BTreeSet::new();
        let mut outputs = 0u64;
        for co in 0..shape.cout {
            for y in 0..shape.hout {
                for x in 0..shape.wout {
                    outputs += 1;
                    let inputs: Vec<u64> = match shape.kind {
                        LayerKind::DepthwiseConv => vec![co],
                        _ => (0..shape.cin).collect(),
                    };
                    for ci in inputs {
                        for ky in 0..shape.kh {
                            for kx in 0..shape.kw {
                                macs += 1;
                                let _ = (y, x);
                                weights.insert((co, ci, ky, kx));
                            }
                        }
                    }
                }
            }
        }
        LayerStats {
            weight_bits: weights.len() as u64 * shape.bits_per_weight,
            mac_ops: macs,
            out_activation_bits: outputs * shape.bits_per_activation,
        }
    }

    #[test]
    fn fc_example() {
        let s = layer_stats(&LayerShape::fc(4, 2, 8)).unwrap();
        assert_eq!(s, LayerStats { weight_bits: 64, mac_ops: 8, out_activation_bits: 16 });
        assert_eq!(s, brute_force(&LayerShape::fc(4, 2, 8)));
    }

    #[test]
    fn unit_conv() {
        let s = layer_stats(&LayerShape::conv(1, 1, 1, 1, 1, 1)).unwrap();
        assert_eq!(s, LayerStats { weight_bits: 1, mac_ops: 1, out_activation_bits: 1 });
    }

    #[test]
    fn resnet_style_conv() {
        // Brute force on a downscaled copy, then scale each factor back up.
        let small = LayerShape::conv(4, 8, 3, 7, 7, 8);
        let b = brute_force(&small);
        assert_eq!(b, layer_stats(&small).unwrap());
        let scale_c = (64 / 4) * (128 / 8);
        let scale_hw = (56 * 56) / (7 * 7);
        let expected_w = b.weight_bits * scale_c;
        let expected_macs = b.mac_ops * scale_c * scale_hw;
        assert_eq!(expected_w, 589_824);
        assert_eq!(expected_macs, 231_211_008);

        let s = layer_stats(&LayerShape::conv(64, 128, 3, 56, 56, 8)).unwrap();
        assert_eq!(s.weight_bits, expected_w);
        assert_eq!(s.mac_ops, expected_macs);
        assert_eq!(s.out_activation_bits, 128 * 56 * 56 * 8);
    }

    #[test]
    fn exhaustive_small_shapes_match_loop_count() {
        let kinds = [LayerKind::Conv, LayerKind::Fc, LayerKind::DepthwiseConv];
        for kind in kinds {
            for cin in 1..=8u64 {
                for cout in [1u64, 3, 8] {
                    for k in [1u64, 2, 3] {
                        for hw in [1u64, 2, 5, 8] {
                            let shape = match kind {
                                LayerKind::Fc => LayerShape::fc(cin, cout, 2),
                                LayerKind::Conv => LayerShape::conv(cin, cout, k, hw, hw, 3),
                                LayerKind::DepthwiseConv => LayerShape::depthwise(cin, k, hw, hw, 4),
                            };
                            assert_eq!(layer_stats(&shape).unwrap(), brute_force(&shape), "{shape:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut s = LayerShape::fc(4, 2, 8);
        s.cin = 0;
        assert!(matches!(layer_stats(&s), Err(Error::Validation(_))));
        let mut d = LayerShape::depthwise(4, 3, 2, 2, 8);
        d.cout = 5;
        assert!(layer_stats(&d).is_err());
    }
}
