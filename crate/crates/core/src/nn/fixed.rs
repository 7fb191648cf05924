//! Plaintext fixed-point forward pass that mirrors the secure engine: ring
//! products accumulate with wraparound, each layer rescales once with a floor
//! shift, then adds the bias. It is the oracle for the secure forward pass.

use super::kernels::im2col;
use super::model::conv_geom;
use super::{LayerSpec, NnError, Param, Scalar, Sequential, Tensor};
use crate::ring::{truncate_floor, FixedConfig, Ring64};

#[derive(Clone, Debug, PartialEq)]
pub struct FixedParam {
    /// `[rows, cols]`, as in the real-valued model.
    pub w: Vec<Ring64>,
    /// `[cols, rows]`, the right-hand operand of the engine's matmul.
    pub w_t: Vec<Ring64>,
    pub b: Vec<Ring64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedModel {
    specs: Vec<LayerSpec>,
    params: Vec<Option<FixedParam>>,
    cfg: FixedConfig,
}

fn transpose(w: &[Ring64], rows: usize, cols: usize) -> Vec<Ring64> {
    let mut t = vec![Ring64::ZERO; w.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    t
}

impl FixedModel {
    pub fn quantize<T: Scalar>(model: &Sequential<T>, cfg: FixedConfig) -> Result<Self, NnError> {
        let mut params = Vec::with_capacity(model.specs().len());
        for (spec, p) in model.specs().iter().zip(model.params()) {
            params.push(match (spec.weight_shape(), p) {
                (Some((rows, cols)), Some(p)) => {
                    let w = cfg.encode_slice(&p.w)?;
                    Some(FixedParam {
                        w_t: transpose(&w, rows, cols),
                        w,
                        b: cfg.encode_slice(&p.b)?,
                    })
                }
                _ => None,
            });
        }
        Ok(FixedModel {
            specs: model.specs().to_vec(),
            params,
            cfg,
        })
    }

    /// Real-valued model holding exactly the quantised weights.
    pub fn dequantize(&self) -> Sequential<f64> {
        let params = self
            .params
            .iter()
            .map(|p| {
                p.as_ref().map(|p| Param {
                    w: self.cfg.decode_slice(&p.w),
                    b: self.cfg.decode_slice(&p.b),
                })
            })
            .collect();
        Sequential::from_params(self.specs.clone(), params).unwrap()
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Option<FixedParam>] {
        &self.params
    }

    pub fn cfg(&self) -> FixedConfig {
        self.cfg
    }

    pub fn input_len(&self) -> usize {
        self.specs[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.specs.last().unwrap().output_len()
    }

    /// Forward pass over `batch` encoded rows.
    pub fn forward(&self, x: &[Ring64], batch: usize) -> Result<Vec<Ring64>, NnError> {
        if x.len() != batch * self.input_len() {
            return Err(NnError::Shape(format!(
                "{} values for {batch} rows of {}",
                x.len(),
                self.input_len()
            )));
        }
        let cfg = self.cfg;
        let mut cur = x.to_vec();
        for (spec, p) in self.specs.iter().zip(&self.params) {
            let in_len = spec.input_len();
            let out_len = spec.output_len();
            let mut y = vec![Ring64::ZERO; batch * out_len];
            match *spec {
                LayerSpec::Relu { .. } => {
                    for (o, &v) in y.iter_mut().zip(&cur) {
                        *o = if v.signed() > 0 { v } else { Ring64::ZERO };
                    }
                }
                LayerSpec::Linear { inputs, outputs } => {
                    let p = p.as_ref().unwrap();
                    for b in 0..batch {
                        let xr = &cur[b * in_len..(b + 1) * in_len];
                        for o in 0..outputs {
                            let acc: Ring64 = xr.iter().zip(&p.w[o * inputs..(o + 1) * inputs]).map(|(&a, &w)| a * w).sum();
                            y[b * outputs + o] = truncate_floor(acc, cfg) + p.b[o];
                        }
                    }
                }
                LayerSpec::Conv { out_channels, .. } => {
                    let p = p.as_ref().unwrap();
                    let g = conv_geom(spec).unwrap();
                    let (pos, patch) = (g.positions(), g.patch());
                    let mut cols = Vec::with_capacity(pos * patch);
                    for b in 0..batch {
                        im2col(&cur[b * in_len..(b + 1) * in_len], &g, &mut cols);
                        for c in 0..out_channels {
                            let wc = &p.w[c * patch..(c + 1) * patch];
                            for q in 0..pos {
                                let acc: Ring64 = cols[q * patch..(q + 1) * patch].iter().zip(wc).map(|(&a, &w)| a * w).sum();
                                y[b * out_len + c * pos + q] = truncate_floor(acc, cfg) + p.b[c];
                            }
                        }
                    }
                }
            }
            cur = y;
        }
        Ok(cur)
    }

    /// Encodes real inputs, runs [`FixedModel::forward`] and decodes.
    pub fn forward_real(&self, x: &Tensor<f64>) -> Result<Tensor<f64>, NnError> {
        let enc = self.cfg.encode_slice(x.data())?;
        let out = self.forward(&enc, x.rows())?;
        Tensor::new(self.cfg.decode_slice(&out), vec![x.rows(), self.output_len()])
    }
}
