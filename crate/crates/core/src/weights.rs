//! Binary weight container.
//!
//! Layout (all integers little-endian `u32` unless noted):
//!
//! ```text
//! magic "TXFW" | version | meta_len | meta (UTF-8) | entry_count
//! entry: name_len | name (UTF-8) | kind (u8: 1 = conv, 2 = tensor) | groups
//!        | weight ndim | weight dims.. | bias ndim | bias dims..
//!        | weight data (f32 LE) | bias data (f32 LE)
//! ```
//!
//! Tensor entries carry a single tensor in the weight slot and `bias ndim = 0`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layer::LayerKind;
use crate::network::{ConvParams, Network};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TXFW";
pub const VERSION: u32 = 1;
pub const FILE_EXTENSION: &str = "tfw";

#[derive(Debug, Clone, PartialEq)]
pub enum EntryData {
    Conv { groups: usize, params: ConvParams<f32> },
    Tensor(Tensor<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub data: EntryData,
}

/// An ordered list of named entries plus free-form metadata text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFile {
    pub meta: String,
    pub entries: Vec<Entry>,
}

impl WeightFile {
    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Value of `key` in whitespace-separated `key=value` metadata.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    /// One conv entry per parameterised layer of `net`, in layer order.
    pub fn from_network(net: &Network<f32>, meta: impl Into<String>) -> Self {
        let entries = net
            .spec()
            .layers
            .iter()
            .zip(net.params())
            .filter_map(|(layer, p)| {
                let groups = match &layer.kind {
                    LayerKind::Conv(c) => c.groups,
                    _ => return None,
                };
                Some(Entry {
                    name: layer.name.clone(),
                    data: EntryData::Conv {
                        groups,
                        params: p.clone()?,
                    },
                })
            })
            .collect();
        WeightFile {
            meta: meta.into(),
            entries,
        }
    }

    /// Parameters for every conv layer of `spec`, looked up by name. Fails
    /// naming the first layer whose entry is missing or mis-shaped.
    pub fn conv_params_for(&self, net: &Network<f32>) -> Result<Vec<Option<ConvParams<f32>>>> {
        let mut out = Vec::with_capacity(net.params().len());
        for (layer, current) in net.spec().layers.iter().zip(net.params()) {
            let LayerKind::Conv(c) = &layer.kind else {
                out.push(None);
                continue;
            };
            let current = current.as_ref().expect("conv params");
            let entry = self.entry(&layer.name).ok_or_else(|| Error::WeightImport {
                layer: layer.name.clone(),
                detail: "no entry in weight file".into(),
            })?;
            out.push(Some(checked_conv(entry, c.groups, current)?));
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, VERSION);
        put_str(&mut buf, &self.meta);
        put_u32(&mut buf, self.entries.len() as u32);
        for e in &self.entries {
            put_str(&mut buf, &e.name);
            let (kind, groups, w, b) = match &e.data {
                EntryData::Conv { groups, params } => (1u8, *groups, &params.weights, Some(&params.bias)),
                EntryData::Tensor(t) => (2u8, 1, t, None),
            };
            buf.push(kind);
            put_u32(&mut buf, groups as u32);
            put_dims(&mut buf, w.shape());
            put_dims(&mut buf, b.map(|b| b.shape()).unwrap_or(&[]));
            for v in w.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for v in b.map(|b| b.data()).unwrap_or(&[]) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::WeightFormat("bad magic (expected TXFW)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::WeightFormat(format!("unsupported version {version}")));
        }
        let meta = r.string()?;
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string()?;
            let kind = r.take(1)?[0];
            let groups = r.u32()? as usize;
            let wdims = r.dims(&name)?;
            let bdims = r.dims(&name)?;
            let weights = r.tensor(&name, wdims)?;
            let data = match kind {
                1 => {
                    if groups == 0 || bdims.len() != 1 {
                        return Err(Error::WeightImport {
                            layer: name,
                            detail: "conv entry needs groups >= 1 and a 1-d bias".into(),
                        });
                    }
                    let bias = r.tensor(&name, bdims)?;
                    EntryData::Conv {
                        groups,
                        params: ConvParams { weights, bias },
                    }
                }
                2 if bdims.is_empty() => EntryData::Tensor(weights),
                _ => {
                    return Err(Error::WeightImport {
                        layer: name,
                        detail: format!("unknown entry kind {kind}"),
                    })
                }
            };
            entries.push(Entry { name, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::WeightFormat(format!(
                "{} trailing bytes after last entry",
                bytes.len() - r.pos
            )));
        }
        Ok(WeightFile { meta, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Validate a conv entry against the layer's current parameter shapes.
pub(crate) fn checked_conv(entry: &Entry, groups: usize, current: &ConvParams<f32>) -> Result<ConvParams<f32>> {
    let fail = |detail: String| Error::WeightImport {
        layer: entry.name.clone(),
        detail,
    };
    let EntryData::Conv { groups: g, params } = &entry.data else {
        return Err(fail("entry is a plain tensor, expected conv weights".into()));
    };
    if *g != groups {
        return Err(fail(format!("file has groups={g}, layer expects groups={groups}")));
    }
    if params.weights.shape() != current.weights.shape() || params.bias.shape() != current.bias.shape() {
        return Err(fail(format!(
            "file shapes {:?}/{:?}, layer expects {:?}/{:?}",
            params.weights.shape(),
            params.bias.shape(),
            current.weights.shape(),
            current.bias.shape()
        )));
    }
    Ok(params.clone())
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

fn put_dims(buf: &mut Vec<u8>, dims: &[usize]) {
    put_u32(buf, dims.len() as u32);
    for &d in dims {
        put_u32(buf, d as u32);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::WeightFormat(format!("truncated file: need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::WeightFormat("string is not valid UTF-8".into()))
    }

    fn dims(&mut self, name: &str) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if n > 8 {
            return Err(Error::WeightImport {
                layer: name.into(),
                detail: format!("implausible tensor rank {n}"),
            });
        }
        (0..n).map(|_| self.u32().map(|d| d as usize)).collect()
    }

    fn tensor(&mut self, name: &str, dims: Vec<usize>) -> Result<Tensor<f32>> {
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c > 0 && c.checked_mul(4).is_some_and(|b| b <= self.bytes.len()))
            .ok_or_else(|| Error::WeightImport {
                layer: name.into(),
                detail: format!("invalid tensor shape {dims:?}"),
            })?;
        let raw = self.take(count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(dims, data)
    }
}
