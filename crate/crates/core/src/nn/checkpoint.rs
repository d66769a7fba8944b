//! Binary checkpoints. Layout (little-endian): magic `TKNN`, u32 version,
//! input shape, u64 seed, u32 layer count, one descriptor per layer
//! (u8 kind, u32, u32), u64 weight count, then the weights as f32.

use std::path::Path;

use super::layer::LayerSpec;
use super::network::{Network, NetworkSpec};
use super::tensor::Shape;
use crate::error::{Result, TrajkitError};

pub const MAGIC: &[u8; 4] = b"TKNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f32s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f64>) {
        for v in vals {
            self.bytes(&(*v as f32).to_le_bytes());
        }
    }
    pub fn usize(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v)
            .map_err(|_| TrajkitError::Format(format!("dimension {v} too large")))?;
        self.u32(v);
        Ok(())
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(TrajkitError::Format(format!(
                "truncated checkpoint at byte {}",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| TrajkitError::Format("weight count overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect())
    }
    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(TrajkitError::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }
    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(TrajkitError::Format(format!(
                "{} trailing bytes after checkpoint",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_shape(w: &mut ByteWriter, s: Shape) -> Result<()> {
    match s {
        Shape::Vector(n) => {
            w.u8(0);
            w.usize(n)?;
            w.u32(0);
        }
        Shape::Sequence { steps, features } => {
            w.u8(1);
            w.usize(steps)?;
            w.usize(features)?;
        }
    }
    Ok(())
}

fn read_shape(r: &mut ByteReader) -> Result<Shape> {
    let tag = r.u8()?;
    let (a, b) = (r.usize()?, r.usize()?);
    match tag {
        0 => Ok(Shape::Vector(a)),
        1 => Ok(Shape::seq(a, b)),
        t => Err(TrajkitError::Format(format!("unknown shape tag {t}"))),
    }
}

fn write_layer(w: &mut ByteWriter, spec: LayerSpec) -> Result<()> {
    let (code, a, b) = match spec {
        LayerSpec::Dense { units } => (0, units, 0),
        LayerSpec::Conv1d { filters, kernel } => (1, filters, kernel),
        LayerSpec::Lstm { units } => (2, units, 0),
        LayerSpec::Relu => (3, 0, 0),
        LayerSpec::Softmax => (4, 0, 0),
        LayerSpec::Flatten => (5, 0, 0),
        LayerSpec::GlobalMaxPool => (6, 0, 0),
        LayerSpec::FuseAggregate => (7, 0, 0),
    };
    w.u8(code);
    w.usize(a)?;
    w.usize(b)
}

fn read_layer(r: &mut ByteReader) -> Result<LayerSpec> {
    let code = r.u8()?;
    let (a, b) = (r.usize()?, r.usize()?);
    Ok(match code {
        0 => LayerSpec::Dense { units: a },
        1 => LayerSpec::Conv1d {
            filters: a,
            kernel: b,
        },
        2 => LayerSpec::Lstm { units: a },
        3 => LayerSpec::Relu,
        4 => LayerSpec::Softmax,
        5 => LayerSpec::Flatten,
        6 => LayerSpec::GlobalMaxPool,
        7 => LayerSpec::FuseAggregate,
        c => return Err(TrajkitError::Format(format!("unknown layer kind {c}"))),
    })
}

pub fn to_bytes(net: &Network) -> Result<Vec<u8>> {
    let spec = net.spec();
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    write_shape(&mut w, spec.input)?;
    w.u64(spec.seed);
    w.usize(spec.layers.len())?;
    for l in &spec.layers {
        write_layer(&mut w, *l)?;
    }
    w.u64(net.param_count() as u64);
    w.f32s(net.params().flatten());
    Ok(w.buf)
}

pub fn from_bytes(data: &[u8]) -> Result<Network> {
    let mut r = ByteReader::new(data);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(TrajkitError::Format(format!(
            "unsupported TKNN version {version}"
        )));
    }
    let input = read_shape(&mut r)?;
    let seed = r.u64()?;
    let n_layers = r.usize()?;
    let layers = (0..n_layers)
        .map(|_| read_layer(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let spec = NetworkSpec {
        input,
        layers,
        seed,
    };
    let count = usize::try_from(r.u64()?)
        .map_err(|_| TrajkitError::Format("weight count too large".into()))?;
    let weights = r.f32s(count)?;
    r.finish()?;
    Network::from_weights(&spec, &weights).map_err(|e| {
        TrajkitError::Format(format!("checkpoint does not match its architecture: {e}"))
    })
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(net)?).map_err(|e| TrajkitError::io(path, e))
}

pub fn load(path: &Path) -> Result<Network> {
    let data = std::fs::read(path).map_err(|e| TrajkitError::io(path, e))?;
    from_bytes(&data).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network {
        Network::new(
            Shape::seq(12, 32),
            &[
                LayerSpec::FuseAggregate,
                LayerSpec::Conv1d {
                    filters: 8,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::GlobalMaxPool,
                LayerSpec::Dense { units: 4 },
                LayerSpec::Softmax,
            ],
            42,
        )
        .unwrap()
    }

    #[test]
    fn snapped_network_round_trips_exactly() {
        let mut n = net();
        n.snap_to_f32();
        let back = from_bytes(&to_bytes(&n).unwrap()).unwrap();
        assert_eq!(back, n);
        assert_eq!(back.checksum(), n.checksum());
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let bytes = to_bytes(&net()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(from_bytes(&longer).is_err());
    }
}
