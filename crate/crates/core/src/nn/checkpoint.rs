//! Little-endian binary layout for networks and optimizer state.
//!
//! Network file (`RBNN`, version 1):
//!
//! ```text
//! magic      4 bytes  "RBNN"
//! version    u32
//! layers     u32
//! per layer  u32 inputs, u32 outputs, u8 activation (0 relu, 1 tanh, 2 identity)
//! count      u64      number of parameters that follow
//! params     f64 * count, layer order: weights row-major (inputs, outputs), then bias
//! ```
//!
//! Optimizer file (`RBAD`, version 1): magic, version, four f64 hyperparameters
//! (learning rate, beta1, beta2, epsilon), u64 step, u64 length, then the first
//! and second moment vectors.

use std::io::{Read, Write};

use super::{Activation, Adam, AdamConfig, Layer, Network};
use crate::error::{Error, Result};

const NET_MAGIC: &[u8; 4] = b"RBNN";
const ADAM_MAGIC: &[u8; 4] = b"RBAD";
const VERSION: u32 = 1;

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn expect_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    Ok(())
}

impl Network {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(NET_MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, self.layers.len() as u32)?;
        for l in &self.layers {
            write_u32(w, l.inputs as u32)?;
            write_u32(w, l.outputs as u32)?;
            w.write_all(&[l.activation.tag()])?;
        }
        write_u64(w, self.param_count() as u64)?;
        write_f64s(w, &self.params())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_header(r, NET_MAGIC)?;
        let n_layers = read_u32(r)? as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let inputs = read_u32(r)? as usize;
            let outputs = read_u32(r)? as usize;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            let act = Activation::from_tag(tag[0])
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {}", tag[0])))?;
            shapes.push((inputs, outputs, act));
        }
        let count = read_u64(r)? as usize;
        let expected: usize = shapes.iter().map(|(i, o, _)| i * o + o).sum();
        if count != expected {
            return Err(Error::Checkpoint(format!(
                "parameter count {count} does not match architecture ({expected})"
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (inputs, outputs, act) in shapes {
            let weights = read_f64s(r, inputs * outputs)?;
            let bias = read_f64s(r, outputs)?;
            layers.push(Layer::new(inputs, outputs, weights, bias, act)?);
        }
        Network::from_layers(layers)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Network::read_from(&mut bytes)
    }
}

impl Adam {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(ADAM_MAGIC)?;
        write_u32(w, VERSION)?;
        let c = &self.config;
        write_f64s(w, &[c.learning_rate, c.beta1, c.beta2, c.epsilon])?;
        write_u64(w, self.step)?;
        write_u64(w, self.first.len() as u64)?;
        write_f64s(w, &self.first)?;
        write_f64s(w, &self.second)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_header(r, ADAM_MAGIC)?;
        let config = AdamConfig {
            learning_rate: read_f64(r)?,
            beta1: read_f64(r)?,
            beta2: read_f64(r)?,
            epsilon: read_f64(r)?,
        };
        let step = read_u64(r)?;
        let n = read_u64(r)? as usize;
        let first = read_f64s(r, n)?;
        let second = read_f64s(r, n)?;
        Ok(Adam {
            config,
            step,
            first,
            second,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::Gradients;

    #[test]
    fn network_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::mlp(7, &[16, 16], 1, Activation::Tanh, &mut rng);
        let back = Network::from_bytes(&net.to_bytes()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let net = Network::from_layers(vec![Layer::new(
            2,
            1,
            vec![1.0, 2.0],
            vec![0.5],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..4], b"RBNN");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(bytes[20], 2);
        assert_eq!(&bytes[21..29], &3u64.to_le_bytes());
        assert_eq!(&bytes[29..37], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 29 + 3 * 8);
    }

    #[test]
    fn corrupt_magic_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bytes = Network::mlp(2, &[3], 1, Activation::Tanh, &mut rng).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            Network::from_bytes(&bytes),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_file_is_io_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bytes = Network::mlp(2, &[3], 1, Activation::Tanh, &mut rng).to_bytes();
        assert!(matches!(
            Network::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn adam_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = Network::mlp(2, &[3], 1, Activation::Tanh, &mut rng);
        let mut adam = Adam::new(&net, AdamConfig::default());
        let g = Gradients::from_flat(&net, &vec![0.3; net.param_count()]).unwrap();
        adam.apply(&mut net, &g).unwrap();
        let mut buf = Vec::new();
        adam.write_to(&mut buf).unwrap();
        assert_eq!(Adam::read_from(&mut buf.as_slice()).unwrap(), adam);
    }
}
