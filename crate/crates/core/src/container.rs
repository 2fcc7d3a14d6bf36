//! Tensor container files.
//!
//! Layout:
//!
//! ```text
//! [u64 LE header length N][N bytes UTF-8 JSON header][raw little-endian f32 buffers]
//! ```
//!
//! The header maps each tensor name to
//! `{"dtype":"F32","shape":[..],"data_offsets":[begin,end]}`, with offsets
//! relative to the first byte after the header. An optional `__metadata__`
//! object holds string-valued keys. Buffers must tile the data section
//! exactly: no gaps, no overlap, no trailing bytes.
//!
//! Writers emit tensors in ascending name order and pad the header with
//! spaces to a multiple of 8 bytes, so the same input always produces the
//! same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const METADATA_KEY: &str = "__metadata__";
const DTYPE_F32: &str = "F32";

/// Everything a container file holds, before any naming convention is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<Tensor<f32>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub data_offsets: (usize, usize),
}

/// The parsed header, without touching tensor payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub raw_json: String,
    pub metadata: BTreeMap<String, String>,
    /// Sorted by begin offset.
    pub entries: Vec<TensorEntry>,
}

pub fn encode(container: &Container) -> Result<Vec<u8>> {
    let mut sorted: Vec<&Tensor<f32>> = container.tensors.iter().collect();
    sorted.sort_by(|a, b| a.name().cmp(b.name()));
    for pair in sorted.windows(2) {
        if pair[0].name() == pair[1].name() {
            return Err(Error::Validation(format!(
                "duplicate tensor name `{}`",
                pair[0].name()
            )));
        }
    }
    if sorted.iter().any(|t| t.name() == METADATA_KEY) {
        return Err(Error::Validation(format!("`{METADATA_KEY}` is reserved")));
    }

    let mut header = Map::new();
    if !container.metadata.is_empty() {
        let meta: Map<String, Value> = container
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        header.insert(METADATA_KEY.to_string(), Value::Object(meta));
    }
    let mut offset = 0usize;
    for t in &sorted {
        let end = offset + t.len() * 4;
        let mut entry = Map::new();
        entry.insert("dtype".into(), Value::from(DTYPE_F32));
        entry.insert("shape".into(), Value::from(t.shape().to_vec()));
        entry.insert("data_offsets".into(), Value::from(vec![offset, end]));
        header.insert(t.name().to_string(), Value::Object(entry));
        offset = end;
    }
    let mut header_bytes = serde_json::to_vec(&Value::Object(header))?;
    while header_bytes.len() % 8 != 0 {
        header_bytes.push(b' ');
    }

    let mut out = Vec::with_capacity(8 + header_bytes.len() + offset);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for t in &sorted {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Split off and validate the header. Returns it with the data section.
pub fn parse_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::HeaderLength(format!(
            "file is {} bytes, shorter than the 8-byte length prefix",
            bytes.len()
        )));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let available = (bytes.len() - 8) as u64;
    if n == 0 || n > available {
        return Err(Error::HeaderLength(format!(
            "declared header length {n} but {available} bytes follow the prefix"
        )));
    }
    let n = n as usize;
    let raw = std::str::from_utf8(&bytes[8..8 + n])
        .map_err(|e| Error::Format(format!("header is not UTF-8: {e}")))?;
    let data = &bytes[8 + n..];

    let value: Value = serde_json::from_str(raw)
        .map_err(|e| Error::Format(format!("header is not valid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(Error::Format("header is not a JSON object".into()));
    };

    let mut metadata = BTreeMap::new();
    let mut entries = Vec::new();
    for (name, v) in obj {
        if name == METADATA_KEY {
            let Value::Object(meta) = v else {
                return Err(Error::Format(format!("`{METADATA_KEY}` is not an object")));
            };
            for (k, mv) in meta {
                let Value::String(s) = mv else {
                    return Err(Error::Format(format!("metadata `{k}` is not a string")));
                };
                metadata.insert(k, s);
            }
            continue;
        }
        entries.push(parse_entry(name, &v)?);
    }

    entries.sort_by(|a, b| {
        a.data_offsets
            .cmp(&b.data_offsets)
            .then_with(|| a.name.cmp(&b.name))
    });
    let mut cursor = 0usize;
    for (i, e) in entries.iter().enumerate() {
        let (begin, end) = e.data_offsets;
        if begin < cursor {
            let prev = &entries[i - 1];
            return Err(Error::OffsetOverlap {
                first: prev.name.clone(),
                first_range: prev.data_offsets,
                second: e.name.clone(),
                second_range: e.data_offsets,
            });
        }
        if begin > cursor {
            return Err(Error::Format(format!(
                "gap before tensor `{}`: data section byte {cursor} is unused",
                e.name
            )));
        }
        cursor = end;
    }
    if cursor != data.len() {
        return Err(Error::Format(format!(
            "tensors cover {cursor} bytes but the data section is {} bytes",
            data.len()
        )));
    }

    Ok((
        Header {
            raw_json: raw.trim_end().to_string(),
            metadata,
            entries,
        },
        data,
    ))
}

fn parse_entry(name: String, v: &Value) -> Result<TensorEntry> {
    let bad = |what: &str| Error::Format(format!("tensor `{name}`: {what}"));
    let obj = v.as_object().ok_or_else(|| bad("entry is not an object"))?;
    let dtype = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing dtype"))?;
    if dtype != DTYPE_F32 {
        return Err(bad(&format!("unsupported dtype {dtype}")));
    }
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing shape"))?
        .iter()
        .map(|d| d.as_u64().filter(|&d| d > 0).map(|d| d as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("shape entries must be positive integers"))?;
    if shape.is_empty() {
        return Err(bad("shape is empty"));
    }
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| bad("data_offsets must be [begin, end]"))?;
    let begin = offsets[0].as_u64().ok_or_else(|| bad("bad begin offset"))? as usize;
    let end = offsets[1].as_u64().ok_or_else(|| bad("bad end offset"))? as usize;
    if end < begin {
        return Err(bad("end offset precedes begin offset"));
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| bad("shape overflows"))?;
    if end - begin != count {
        return Err(bad(&format!(
            "byte range {begin}..{end} does not hold {} f32 values",
            count / 4
        )));
    }
    Ok(TensorEntry {
        name,
        dtype: dtype.to_string(),
        shape,
        data_offsets: (begin, end),
    })
}

pub fn decode(bytes: &[u8]) -> Result<Container> {
    let (header, data) = parse_header(bytes)?;
    let mut tensors = Vec::with_capacity(header.entries.len());
    for e in header.entries {
        let (begin, end) = e.data_offsets;
        let values: Vec<f32> = data[begin..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(e.name, e.shape, values)?;
        t.check_finite()?;
        tensors.push(t);
    }
    tensors.sort_by(|a, b| a.name().cmp(b.name()));
    Ok(Container {
        metadata: header.metadata,
        tensors,
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Container> {
    decode(&read_bytes(path)?)
}

pub fn write(container: &Container, path: &Path) -> Result<()> {
    let bytes = encode(container)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            metadata: BTreeMap::from([("label".to_string(), "en".to_string())]),
            tensors: vec![
                Tensor::new("b", vec![2], vec![1.5, -2.0]).unwrap(),
                Tensor::new("a", vec![1, 3], vec![0.0, 1.0, 2.0]).unwrap(),
            ],
        }
    }

    fn with_header(json: &str, data: &[u8]) -> Vec<u8> {
        let mut out = (json.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(json.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn round_trip_sorts_by_name() {
        let c = sample();
        let bytes = encode(&c).unwrap();
        assert_eq!(u64::from_le_bytes(bytes[..8].try_into().unwrap()) % 8, 0);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.metadata, c.metadata);
        let names: Vec<_> = back.tensors.iter().map(|t| t.name()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(back.tensors[1].data(), &[1.5, -2.0]);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn header_length_errors() {
        assert!(matches!(decode(&[1, 2, 3]), Err(Error::HeaderLength(_))));
        let mut bytes = encode(&sample()).unwrap();
        bytes[..8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::HeaderLength(_))));
    }

    #[test]
    fn overlap_is_its_own_error() {
        let json = r#"{"x":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"y":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#;
        let err = decode(&with_header(json, &[0u8; 8])).unwrap_err();
        assert!(matches!(err, Error::OffsetOverlap { .. }), "{err}");
    }

    #[test]
    fn gaps_and_trailing_bytes_are_format_errors() {
        let json = r#"{"x":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#;
        assert!(matches!(decode(&with_header(json, &[0u8; 8])), Err(Error::Format(_))));
        let json = r#"{"x":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}}"#;
        assert!(matches!(decode(&with_header(json, &[0u8; 8])), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_non_finite_payload() {
        let json = r#"{"x":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}}"#;
        let mut data = 1.0f32.to_le_bytes().to_vec();
        data.extend_from_slice(&f32::NAN.to_le_bytes());
        match decode(&with_header(json, &data)) {
            Err(Error::NonFinite { tensor, index }) => assert_eq!((tensor.as_str(), index), ("x", 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_other_dtypes_and_garbage() {
        let json = r#"{"x":{"dtype":"F16","shape":[2],"data_offsets":[0,4]}}"#;
        assert!(matches!(decode(&with_header(json, &[0u8; 4])), Err(Error::Format(_))));
        assert!(matches!(decode(&with_header("[1,2]", &[])), Err(Error::Format(_))));
        assert!(matches!(decode(&with_header("{nope", &[])), Err(Error::Format(_))));
        let json = r#"{"x":{"dtype":"F32","shape":[0],"data_offsets":[0,0]}}"#;
        assert!(matches!(decode(&with_header(json, &[])), Err(Error::Format(_))));
    }
}
