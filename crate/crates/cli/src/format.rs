//! Binary dataset (`WFDS`) and checkpoint (`WFCK`) files.
//!
//! Every integer and float is little-endian regardless of host. Strings are a
//! `u32` byte length followed by UTF-8.
//!
//! Dataset: magic, `u32` version, pde id string, `u32` dim, `dim × u64` extents,
//! `u64` samples, `u64` time, `f64` dt between frames, parameter string
//! (`key=value` lines), `u8` paper-scale flag, `u64` seed, then
//! `samples × time × Πextents` `f64` values, row-major.
//!
//! Checkpoint: magic, `u32` version, config string, `u32` tensor count, then per
//! tensor a name string, `u32` rank and `rank × u64` dims, then every tensor's
//! `f64` values in table order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;
use waveformer_core::data::TrajectoryDataset;
use waveformer_core::model::ParamStore;
use waveformer_core::tensor::Tensor;

pub const DATASET_MAGIC: [u8; 4] = *b"WFDS";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"WFCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

type Result<T> = std::result::Result<T, FormatError>;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.0.write_all(b)?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn string(&mut self, s: &str) -> Result<()> {
        let len = u32::try_from(s.len()).map_err(|_| FormatError::Corrupt("string longer than 4 GiB".into()))?;
        self.u32(len)?;
        self.bytes(s.as_bytes())
    }
    fn floats(&mut self, values: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| FormatError::Corrupt("size does not fit in memory".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut b = Vec::new();
        (&mut self.0).take(len as u64).read_to_end(&mut b)?;
        if b.len() != len {
            return Err(FormatError::Corrupt("truncated string".into()));
        }
        String::from_utf8(b).map_err(|_| FormatError::Corrupt("string is not UTF-8".into()))
    }
    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| FormatError::Corrupt("payload size overflows".into()))?;
        let mut b = Vec::new();
        (&mut self.0).take(bytes as u64).read_to_end(&mut b)?;
        if b.len() != bytes {
            return Err(FormatError::Corrupt(format!("payload has {} bytes, header declares {bytes}", b.len())));
        }
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
    }
    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.array::<4>()?;
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(&expected).into(),
                found: String::from_utf8_lossy(&found).into(),
            });
        }
        match self.u32()? {
            VERSION => Ok(()),
            v => Err(FormatError::Version(v)),
        }
    }
    fn end(&mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self.0.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(FormatError::Corrupt("trailing bytes after payload".into())),
        }
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FormatError::Corrupt(format!("dimensions {dims:?} overflow")))
}

fn params_text(params: &[(String, String)]) -> Result<String> {
    let mut s = String::new();
    for (k, v) in params {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(FormatError::Corrupt(format!("parameter `{k}` cannot be stored as a key=value line")));
        }
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_dataset(w: impl Write, ds: &TrajectoryDataset<f64>) -> Result<()> {
    let mut w = Writer(w);
    w.bytes(&DATASET_MAGIC)?;
    w.u32(VERSION)?;
    w.string(&ds.pde)?;
    w.u32(ds.spatial.len() as u32)?;
    for &e in &ds.spatial {
        w.u64(e as u64)?;
    }
    w.u64(ds.samples as u64)?;
    w.u64(ds.time as u64)?;
    w.f64(ds.dt)?;
    w.string(&params_text(&ds.params)?)?;
    w.bytes(&[u8::from(ds.paper_scale)])?;
    w.u64(ds.seed)?;
    w.floats(&ds.data)?;
    Ok(w.0.flush()?)
}

pub fn read_dataset(r: impl Read) -> Result<TrajectoryDataset<f64>> {
    let mut r = Reader(r);
    r.magic(DATASET_MAGIC)?;
    let pde = r.string()?;
    let dim = r.u32()? as usize;
    if !(1..=3).contains(&dim) {
        return Err(FormatError::Corrupt(format!("spatial dimension {dim}")));
    }
    let spatial = (0..dim).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let samples = r.usize()?;
    let time = r.usize()?;
    let dt = r.f64()?;
    let params = r
        .string()?
        .lines()
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| FormatError::Corrupt(format!("parameter line `{l}` has no `=`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let paper_scale = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(FormatError::Corrupt(format!("paper-scale flag {v}"))),
    };
    let seed = r.u64()?;
    let mut dims = vec![samples, time];
    dims.extend_from_slice(&spatial);
    let data = r.floats(checked_product(&dims)?)?;
    r.end()?;
    let mut ds = TrajectoryDataset::new(pde, spatial, samples, time, dt, data).map_err(|e| FormatError::Corrupt(e.to_string()))?;
    ds.params = params;
    ds.paper_scale = paper_scale;
    ds.seed = seed;
    Ok(ds)
}

/// A parameter store together with the resolved config text that built it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub params: ParamStore<f64>,
}

pub fn write_checkpoint(w: impl Write, ckpt: &Checkpoint) -> Result<()> {
    let mut w = Writer(w);
    w.bytes(&CHECKPOINT_MAGIC)?;
    w.u32(VERSION)?;
    w.string(&ckpt.config)?;
    w.u32(ckpt.params.len() as u32)?;
    for (name, t) in ckpt.params.iter() {
        w.string(name)?;
        w.u32(t.shape().len() as u32)?;
        for &d in t.shape() {
            w.u64(d as u64)?;
        }
    }
    for (_, t) in ckpt.params.iter() {
        w.floats(t.data())?;
    }
    Ok(w.0.flush()?)
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint> {
    let mut r = Reader(r);
    r.magic(CHECKPOINT_MAGIC)?;
    let config = r.string()?;
    let count = r.u32()? as usize;
    let mut table = Vec::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(FormatError::Corrupt(format!("tensor `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        table.push((name, shape));
    }
    let mut params = ParamStore::new();
    for (name, shape) in table {
        let data = r.floats(checked_product(&shape)?)?;
        let t = Tensor::new(shape, data).map_err(|e| FormatError::Corrupt(e.to_string()))?;
        params.insert(name, t).map_err(|e| FormatError::Corrupt(e.to_string()))?;
    }
    r.end()?;
    Ok(Checkpoint { config, params })
}

pub fn save_dataset(path: &Path, ds: &TrajectoryDataset<f64>) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), ds)
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset<f64>> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
