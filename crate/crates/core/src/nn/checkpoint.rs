//! Checkpoint file: named models, little-endian throughout.
//!
//! ```text
//! magic "PNCK" | version u16 | model count u32
//! per model:  name (u16 length + UTF-8) | layer count u32
//! per layer:  tag u8 (0 conv, 1 linear, 2 relu) | u32 dims
//!             conv:   in_channels out_channels kernel stride in_height in_width
//!             linear: inputs outputs
//!             relu:   width
//!             then, for conv and linear, rows*cols weights and rows biases as f64
//! ```

use std::path::Path;

use super::{LayerSpec, NnError, Param, Scalar, Sequential};

pub const MAGIC: &[u8; 4] = b"PNCK";
pub const VERSION: u16 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn to_bytes<T: Scalar>(models: &[(&str, &Sequential<T>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, models.len());
    for (name, model) in models {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, model.specs().len());
        for (spec, p) in model.specs().iter().zip(model.params()) {
            match *spec {
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    in_height,
                    in_width,
                } => {
                    out.push(0);
                    for v in [in_channels, out_channels, kernel, stride, in_height, in_width] {
                        put_u32(&mut out, v);
                    }
                }
                LayerSpec::Linear { inputs, outputs } => {
                    out.push(1);
                    put_u32(&mut out, inputs);
                    put_u32(&mut out, outputs);
                }
                LayerSpec::Relu { width } => {
                    out.push(2);
                    put_u32(&mut out, width);
                }
            }
            if let Some(p) = p {
                for v in p.w.iter().chain(&p.b) {
                    out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NnError::Checkpoint("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn from_bytes<T: Scalar>(buf: &[u8]) -> Result<Vec<(String, Sequential<T>)>, NnError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint file".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = c.u32()?;
    let mut models = Vec::with_capacity(count.min(16));
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec()).map_err(|_| NnError::Checkpoint("model name is not UTF-8".into()))?;
        let layers = c.u32()?;
        let mut specs = Vec::new();
        let mut params = Vec::new();
        for _ in 0..layers {
            let spec = match c.u8()? {
                0 => {
                    let d: Vec<usize> = (0..6).map(|_| c.u32()).collect::<Result<_, _>>()?;
                    if d[2] == 0 || d[3] == 0 || d[2] > d[4] || d[2] > d[5] {
                        return Err(NnError::Checkpoint("bad conv geometry".into()));
                    }
                    LayerSpec::conv(d[0], d[1], d[2], d[3], (d[4], d[5]))
                }
                1 => LayerSpec::linear(c.u32()?, c.u32()?),
                2 => LayerSpec::Relu { width: c.u32()? },
                t => return Err(NnError::Checkpoint(format!("unknown layer tag {t}"))),
            };
            params.push(match spec.weight_shape() {
                Some((rows, cols)) => {
                    let conv = |v: Vec<f64>| v.into_iter().map(|x| T::from(x).unwrap()).collect();
                    let w = conv(c.f64s(rows * cols)?);
                    let b = conv(c.f64s(rows)?);
                    Some(Param { w, b })
                }
                None => None,
            });
            specs.push(spec);
        }
        models.push((name, Sequential::from_params(specs, params)?));
    }
    if c.pos != buf.len() {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    Ok(models)
}

pub fn save<T: Scalar>(path: &Path, models: &[(&str, &Sequential<T>)]) -> Result<(), NnError> {
    std::fs::write(path, to_bytes(models))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<Vec<(String, Sequential<T>)>, NnError> {
    from_bytes(&std::fs::read(path)?)
}
