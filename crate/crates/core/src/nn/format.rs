//! Binary net container, little-endian throughout.
//!
//! ```text
//! magic        8 bytes   "WSNGNET\0"
//! version      u16       FORMAT_VERSION
//! width        u8        scalar width in bytes of the saved values (4 or 8)
//! kind         u8        0 = single net, 1 = predictor bundle
//! -- kind 0 --
//! net
//! -- kind 1 --
//! count        u32
//! count × { node_id u32, window_len u32, m u32, m × neighbor id u32, net }
//!
//! net:
//! layers       u32, then that many u32 layer sizes
//! activations  u8 hidden, u8 output   (0 = tanh, 1 = linear)
//! input scale  input_size × (offset f64, scale f64)
//! output scale offset f64, scale f64
//! params       param_count × f64, per layer row-major weights then biases
//! ```
//!
//! Values are stored as `f64` bit patterns; `f32` nets widen exactly and the
//! width byte makes loading into a different scalar type a format error.

use super::net::{Activation, NetTopologySpec, NeuralNet};
use super::normalize::{Affine, Normalization};
use super::predictor::NeighborPredictor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"WSNGNET\0";
pub const FORMAT_VERSION: u16 = 1;

const KIND_NET: u8 = 0;
const KIND_BUNDLE: u8 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn header<T: Scalar>(kind: u8) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        w.0.push(T::WIDTH);
        w.0.push(kind);
        w
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("sizes fit in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn net<T: Scalar>(&mut self, net: &NeuralNet<T>) {
        let spec = net.spec();
        self.u32(spec.layer_sizes.len());
        for &s in &spec.layer_sizes {
            self.u32(s);
        }
        self.u8(activation_code(spec.hidden_activation));
        self.u8(activation_code(spec.output_activation));
        let norm = net.normalization();
        for a in norm.inputs.iter().chain(std::iter::once(&norm.output)) {
            self.f64(a.offset.as_f64());
            self.f64(a.scale.as_f64());
        }
        for p in net.params() {
            self.f64(p.as_f64());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated: need {n} bytes at offset {}, have {}",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        )))
    }

    fn header<T: Scalar>(&mut self, kind: u8) -> Result<()> {
        if self.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("bad magic; not a net file".into()));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let width = self.u8()?;
        if width != T::WIDTH {
            return Err(Error::Format(format!(
                "file holds {width}-byte scalars, loader expects {}",
                T::WIDTH
            )));
        }
        let found = self.u8()?;
        if found != kind {
            return Err(Error::Format(format!(
                "container kind {found}, expected {kind}"
            )));
        }
        Ok(())
    }

    fn scalar<T: Scalar>(&mut self) -> Result<T> {
        T::from_f64(self.f64()?).ok_or_else(|| Error::Format("unrepresentable value".into()))
    }

    fn net<T: Scalar>(&mut self) -> Result<NeuralNet<T>> {
        let n_layers = self.u32()?;
        if n_layers > 64 {
            return Err(Error::Format(format!("implausible layer count {n_layers}")));
        }
        let layer_sizes = (0..n_layers)
            .map(|_| self.u32())
            .collect::<Result<Vec<_>>>()?;
        let spec = NetTopologySpec {
            layer_sizes,
            hidden_activation: activation_from(self.u8()?)?,
            output_activation: activation_from(self.u8()?)?,
        };
        spec.validate().map_err(|e| Error::Format(e.to_string()))?;
        let mut affines = Vec::with_capacity(spec.input_size() + 1);
        for _ in 0..=spec.input_size() {
            affines.push(Affine {
                offset: self.scalar()?,
                scale: self.scalar()?,
            });
        }
        let output = affines.pop().expect("at least one affine");
        let params = (0..spec.param_count())
            .map(|_| self.scalar())
            .collect::<Result<Vec<T>>>()?;
        let mut net = NeuralNet::zeros(spec)?;
        net.set_params(&params)?;
        net.set_normalization(Normalization {
            inputs: affines,
            output,
        })?;
        Ok(net)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::HyperbolicTangent => 0,
        Activation::Linear => 1,
    }
}

fn activation_from(code: u8) -> Result<Activation> {
    match code {
        0 => Ok(Activation::HyperbolicTangent),
        1 => Ok(Activation::Linear),
        other => Err(Error::Format(format!("unknown activation code {other}"))),
    }
}

pub fn save_net<T: Scalar>(net: &NeuralNet<T>) -> Vec<u8> {
    let mut w = Writer::header::<T>(KIND_NET);
    w.net(net);
    w.0
}

pub fn load_net<T: Scalar>(bytes: &[u8]) -> Result<NeuralNet<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header::<T>(KIND_NET)?;
    let net = r.net()?;
    r.finish()?;
    Ok(net)
}

pub fn save_predictors<T: Scalar>(predictors: &[NeighborPredictor<T>]) -> Vec<u8> {
    let mut w = Writer::header::<T>(KIND_BUNDLE);
    w.u32(predictors.len());
    for p in predictors {
        w.u32(p.node_id as usize);
        w.u32(p.window_len);
        w.u32(p.neighbor_ids.len());
        for &id in &p.neighbor_ids {
            w.u32(id as usize);
        }
        w.net(&p.net);
    }
    w.0
}

pub fn load_predictors<T: Scalar>(bytes: &[u8]) -> Result<Vec<NeighborPredictor<T>>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.header::<T>(KIND_BUNDLE)?;
    let count = r.u32()?;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let node_id = r.u32()? as u32;
        let window_len = r.u32()?;
        let m = r.u32()?;
        let neighbor_ids = (0..m)
            .map(|_| r.u32().map(|v| v as u32))
            .collect::<Result<Vec<_>>>()?;
        let net = r.net()?;
        out.push(
            NeighborPredictor::new(node_id, neighbor_ids, window_len, net)
                .map_err(|e| Error::Format(e.to_string()))?,
        );
    }
    r.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetTopologySpec;

    fn sample_net() -> NeuralNet<f64> {
        let mut net = NeuralNet::random(NetTopologySpec::new(3, &[4, 2]), 17).unwrap();
        net.set_normalization(Normalization {
            inputs: vec![
                Affine {
                    offset: 22.0,
                    scale: 3.5,
                },
                Affine {
                    offset: 21.9,
                    scale: 4.0,
                },
                Affine {
                    offset: 0.1,
                    scale: 1.0 / 3.0,
                },
            ],
            output: Affine {
                offset: 22.05,
                scale: 3.7,
            },
        })
        .unwrap();
        net
    }

    #[test]
    fn net_round_trip_is_bit_exact() {
        let net = sample_net();
        let back: NeuralNet<f64> = load_net(&save_net(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn f32_round_trip_and_width_check() {
        let net = NeuralNet::<f32>::random(NetTopologySpec::new(2, &[3]), 2).unwrap();
        let bytes = save_net(&net);
        assert_eq!(load_net::<f32>(&bytes).unwrap(), net);
        assert!(matches!(load_net::<f64>(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = save_net(&sample_net());
        for cut in 0..bytes.len() {
            assert!(
                matches!(load_net::<f64>(&bytes[..cut]), Err(Error::Format(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_net::<f64>(&extra).is_err());
    }

    #[test]
    fn version_and_magic_mismatch() {
        let mut bytes = save_net(&sample_net());
        bytes[8] = 9;
        let err = load_net::<f64>(&bytes).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        let mut bytes = save_net(&sample_net());
        bytes[0] = b'X';
        assert!(load_net::<f64>(&bytes).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let preds = vec![
            NeighborPredictor::new(5, vec![1, 2, 9], 1, sample_net()).unwrap(),
            NeighborPredictor::new(7, vec![0, 3, 4], 1, sample_net()).unwrap(),
        ];
        let bytes = save_predictors(&preds);
        assert_eq!(load_predictors::<f64>(&bytes).unwrap(), preds);
        assert!(load_net::<f64>(&bytes).is_err());
        assert!(load_predictors::<f64>(&bytes[..bytes.len() - 3]).is_err());
    }
}
