//! `.lvt` tensor files: the interchange format between model-side extractors
//! and the numeric core.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes   "LVT1"
//! version  u32       1
//! rank     u32       1 or 2
//! dims     rank x u64
//! dtype    u32       0 = binary64, 1 = binary32
//! meta_len u32
//! meta     meta_len bytes of UTF-8 JSON (an object, possibly empty)
//! payload  prod(dims) values, row-major
//! ```
//!
//! Metadata is carried along but never interpreted by numeric code. The keys
//! `model`, `layer`, `prompt_set` and `role` are lifted into typed fields;
//! everything else round-trips through [`ActivationMatrix::extra`].

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"LVT1";
pub const FORMAT_VERSION: u32 = 1;
pub const EXTENSION: &str = "lvt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Positive,
    Negative,
    Direction,
    Pattern,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Positive => "positive",
            Role::Negative => "negative",
            Role::Direction => "direction",
            Role::Pattern => "pattern",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "positive" => Role::Positive,
            "negative" => Role::Negative,
            "direction" => Role::Direction,
            "pattern" => Role::Pattern,
            _ => return None,
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// On-disk element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

impl Precision {
    pub fn code(self) -> u32 {
        match self {
            Precision::F64 => 0,
            Precision::F32 => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Precision::F64),
            1 => Ok(Precision::F32),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn width(self) -> usize {
        match self {
            Precision::F64 => 8,
            Precision::F32 => 4,
        }
    }
}

/// Decoded fixed header plus raw metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorHeader {
    pub version: u32,
    pub dims: Vec<u64>,
    pub precision: Precision,
    pub meta: Map<String, Value>,
    /// Byte offset at which the payload starts.
    pub payload_offset: usize,
}

impl TensorHeader {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Parses and validates the header of a complete file image, including
    /// the payload length check.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let rank = cur.u32()?;
        if rank != 1 && rank != 2 {
            return Err(Error::BadRank(rank));
        }
        let dims = (0..rank).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::ZeroDim(dims));
        }
        let precision = Precision::from_code(cur.u32()?)?;
        let meta_len = cur.u32()? as usize;
        let meta_bytes = cur.take(meta_len)?;
        let meta = parse_meta(meta_bytes)?;

        let expected = dims
            .iter()
            .try_fold(precision.width(), |acc, &d| {
                usize::try_from(d).ok().and_then(|d| acc.checked_mul(d))
            })
            .unwrap_or(usize::MAX);
        let actual = bytes.len() - cur.pos;
        if expected != actual {
            return Err(Error::PayloadLength { expected, actual });
        }
        Ok(TensorHeader {
            version,
            dims,
            precision,
            meta,
            payload_offset: cur.pos,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::TruncatedHeader {
                needed: self.pos.saturating_add(n),
                actual: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn parse_meta(bytes: &[u8]) -> Result<Map<String, Value>> {
    if bytes.is_empty() {
        return Ok(Map::new());
    }
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedMeta(e.to_string()))?;
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(other) => Err(Error::MalformedMeta(format!(
            "expected a JSON object, found {}",
            json_kind(&other)
        ))),
        Err(e) => Err(Error::MalformedMeta(e.to_string())),
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Row-major `n x d` matrix of finite values with provenance tags.
///
/// Rank-1 tensors (pattern and steering vectors) load as `1 x d` with
/// `vector` set, and are written back as rank 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
    pub vector: bool,
    pub role: Option<Role>,
    pub layer: Option<u32>,
    pub source_tag: String,
    pub prompt_set: Option<String>,
    pub extra: Map<String, Value>,
}

impl<T: Scalar> ActivationMatrix<T> {
    /// Builds a matrix from row-major data; rejects empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Empty("matrix must have n >= 1 and d >= 1"));
        }
        if data.len() != n * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for {n}x{d}", n * d),
                found: format!("{} values", data.len()),
            });
        }
        check_finite(&data, d)?;
        Ok(ActivationMatrix {
            n,
            d,
            data,
            vector: false,
            role: None,
            layer: None,
            source_tag: String::new(),
            prompt_set: None,
            extra: Map::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {d}"),
                found: format!("row of length {}", bad.len()),
            });
        }
        Self::new(n, d, rows.concat())
    }

    /// A rank-1 tensor.
    pub fn from_vector(values: Vec<T>) -> Result<Self> {
        let d = values.len();
        let mut m = Self::new(1, d, values)?;
        m.vector = true;
        Ok(m)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn with_layer(mut self, layer: u32) -> Self {
        self.layer = Some(layer);
        self
    }

    pub fn with_source(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.d)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Copies provenance fields (not shape or data) from another matrix.
    pub fn inherit_tags<U>(&mut self, other: &ActivationMatrix<U>) {
        self.layer = other.layer;
        self.source_tag = other.source_tag.clone();
        self.prompt_set = other.prompt_set.clone();
    }

    fn meta_object(&self) -> Map<String, Value> {
        let mut meta = self.extra.clone();
        if !self.source_tag.is_empty() {
            meta.insert("model".into(), Value::String(self.source_tag.clone()));
        }
        if let Some(layer) = self.layer {
            meta.insert("layer".into(), Value::from(layer));
        }
        if let Some(ps) = &self.prompt_set {
            meta.insert("prompt_set".into(), Value::String(ps.clone()));
        }
        if let Some(role) = self.role {
            meta.insert("role".into(), Value::String(role.as_str().into()));
        }
        meta
    }

    /// Serializes to an in-memory file image.
    pub fn to_bytes(&self, precision: Precision) -> Result<Vec<u8>> {
        check_finite(&self.data, self.d)?;
        let meta = serde_json::to_vec(&Value::Object(self.meta_object()))
            .map_err(|e| Error::MalformedMeta(e.to_string()))?;
        let meta_len = u32::try_from(meta.len())
            .map_err(|_| Error::MalformedMeta("metadata exceeds 4 GiB".into()))?;
        let dims: Vec<u64> = if self.vector && self.n == 1 {
            vec![self.d as u64]
        } else {
            vec![self.n as u64, self.d as u64]
        };

        let mut out =
            Vec::with_capacity(24 + 8 * dims.len() + meta.len() + self.data.len() * precision.width());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&precision.code().to_le_bytes());
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(&meta);
        for (idx, &x) in self.data.iter().enumerate() {
            let x = x.as_f64();
            match precision {
                Precision::F64 => out.extend_from_slice(&x.to_le_bytes()),
                Precision::F32 => {
                    let y = x as f32;
                    if !y.is_finite() {
                        // finite in f64 but overflows binary32
                        return Err(Error::NonFinite {
                            row: idx / self.d,
                            col: idx % self.d,
                        });
                    }
                    out.extend_from_slice(&y.to_le_bytes())
                }
            }
        }
        Ok(out)
    }

    /// Parses a complete file image.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = TensorHeader::parse(bytes)?;
        let payload = &bytes[header.payload_offset..];
        let (n, d, vector) = match header.dims.as_slice() {
            [d] => (1, *d as usize, true),
            [n, d] => (*n as usize, *d as usize, false),
            _ => unreachable!("rank validated"),
        };
        let data: Vec<T> = match header.precision {
            Precision::F64 => payload
                .chunks_exact(8)
                .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect(),
            Precision::F32 => payload
                .chunks_exact(4)
                .map(|c| {
                    T::from_f32(f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .expect("f32 representable")
                })
                .collect(),
        };
        let mut m = Self::new(n, d, data)?;
        m.vector = vector;

        let mut meta = header.meta;
        if let Some(v) = meta.remove("model") {
            m.source_tag = meta_string(v, "model")?;
        }
        if let Some(v) = meta.remove("prompt_set") {
            m.prompt_set = Some(meta_string(v, "prompt_set")?);
        }
        if let Some(v) = meta.remove("layer") {
            let layer = v
                .as_u64()
                .and_then(|l| u32::try_from(l).ok())
                .ok_or_else(|| Error::MalformedMeta(format!("layer must be a u32, got {v}")))?;
            m.layer = Some(layer);
        }
        if let Some(v) = meta.remove("role") {
            let s = meta_string(v, "role")?;
            m.role = Some(
                Role::parse(&s).ok_or_else(|| Error::MalformedMeta(format!("unknown role {s:?}")))?,
            );
        }
        m.extra = meta;
        Ok(m)
    }
}

fn meta_string(v: Value, key: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s),
        other => Err(Error::MalformedMeta(format!(
            "{key} must be a string, got {}",
            json_kind(&other)
        ))),
    }
}

fn check_finite<T: Scalar>(data: &[T], d: usize) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(idx) => Err(Error::NonFinite {
            row: idx / d,
            col: idx % d,
        }),
        None => Ok(()),
    }
}

/// Writes `bytes` to `path` through a sibling temp file and an atomic rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_tensor<T: Scalar>(
    path: impl AsRef<Path>,
    matrix: &ActivationMatrix<T>,
    precision: Precision,
) -> Result<()> {
    let bytes = matrix.to_bytes(precision)?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn read_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<ActivationMatrix<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ActivationMatrix::from_bytes(&bytes)
}

/// Validates a file without keeping the decoded values.
pub fn validate_tensor(path: impl AsRef<Path>) -> Result<TensorHeader> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ActivationMatrix::<f64>::from_bytes(&bytes)?;
    TensorHeader::parse(&bytes)
}
