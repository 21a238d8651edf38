//! Reader and writer for version 1.0 of the `.npy` binary array format.
//!
//! Only 2-D, C-order, little-endian `f4`/`f8` payloads are accepted. Anything
//! else is rejected rather than converted.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurestore::FeatureMatrix;
use crate::scalar::Scalar;

pub(crate) const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE: usize = 10;
const ALIGN: usize = 64;

/// Element type declared in a file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Parsed header of an array file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrayHeader {
    pub dtype: DType,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Byte offset of the payload.
    pub data_offset: usize,
}

/// Parses the header from the start of `bytes`.
pub fn parse_header(bytes: &[u8], path: &Path) -> Result<ArrayHeader> {
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < PREAMBLE || &bytes[..6] != MAGIC {
        return Err(malformed("missing magic string"));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(malformed(&format!(
            "unsupported format version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_offset = PREAMBLE + header_len;
    if bytes.len() < data_offset {
        return Err(malformed("header length exceeds file size"));
    }
    let text = std::str::from_utf8(&bytes[PREAMBLE..data_offset])
        .map_err(|_| malformed("header is not ASCII"))?;
    let dict = HeaderDict::parse(text).map_err(|reason| malformed(&reason))?;

    let dtype = match dict.descr.as_str() {
        "<f4" => DType::F32,
        "<f8" => DType::F64,
        other => {
            return Err(Error::UnsupportedDType {
                path: path.to_path_buf(),
                descr: other.to_string(),
            })
        }
    };
    if dict.fortran_order {
        return Err(malformed("column-major (Fortran) storage is not supported"));
    }
    if dict.shape.len() != 2 {
        return Err(Error::NotTwoDimensional {
            path: path.to_path_buf(),
            shape: dict.shape,
        });
    }
    Ok(ArrayHeader {
        dtype,
        n_rows: dict.shape[0],
        n_cols: dict.shape[1],
        data_offset,
    })
}

/// Reads only the header of the file at `path`.
pub fn read_header(path: &Path) -> Result<ArrayHeader> {
    use std::io::Read;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::open(path).map_err(io_err)?;
    let mut preamble = [0u8; PREAMBLE];
    file.read_exact(&mut preamble)
        .map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "file shorter than the format preamble".into(),
        })?;
    let header_len = if &preamble[..6] == MAGIC {
        u16::from_le_bytes([preamble[8], preamble[9]]) as usize
    } else {
        0
    };
    let mut bytes = preamble.to_vec();
    bytes.resize(PREAMBLE + header_len, 0);
    file.read_exact(&mut bytes[PREAMBLE..])
        .map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "truncated header".into(),
        })?;
    parse_header(&bytes, path)
}

/// Decodes a full file image into a matrix of element type `T`.
///
/// An `f4` file may be read as `f64` (lossless widening); reading an `f8` file
/// as `f32` is refused.
pub fn decode<T: Scalar>(bytes: &[u8], path: &Path) -> Result<FeatureMatrix<T>> {
    let header = parse_header(bytes, path)?;
    if header.dtype.width() > T::WIDTH {
        return Err(Error::UnsupportedDType {
            path: path.to_path_buf(),
            descr: format!(
                "<f{} (requested narrower {})",
                header.dtype.width(),
                T::DESCR
            ),
        });
    }
    let count = header.n_rows * header.n_cols;
    let payload = &bytes[header.data_offset..];
    let expected = count * header.dtype.width();
    if payload.len() != expected {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!(
                "payload holds {} bytes, shape ({}, {}) needs {expected}",
                payload.len(),
                header.n_rows,
                header.n_cols
            ),
        });
    }
    let values: Vec<T> = match header.dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| T::narrow(f64::from(f32::read_le(c))))
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| T::narrow(f64::read_le(c)))
            .collect(),
    };
    FeatureMatrix::from_vec(header.n_rows, header.n_cols, values).map_err(|e| match e {
        Error::NonFiniteValue { row, col, .. } => Error::NonFiniteValue {
            path: Some(path.to_path_buf()),
            row,
            col,
        },
        Error::InvalidShape(reason) => Error::MalformedHeader {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Encodes a matrix as a complete file image.
pub fn encode<T: Scalar>(matrix: &FeatureMatrix<T>) -> Vec<u8> {
    let (n, d) = matrix.shape();
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({n}, {d}), }}",
        T::DESCR
    );
    // Pad with spaces so the payload starts on an ALIGN boundary; the header ends in '\n'.
    let unpadded = PREAMBLE + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE + dict.len() + n * d * T::WIDTH);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for &v in matrix.as_slice() {
        v.write_le(&mut out);
    }
    out
}

#[derive(Debug, Default)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    /// Parses the Python-literal dictionary stored in the header.
    fn parse(text: &str) -> std::result::Result<Self, String> {
        let body = text
            .trim_end_matches(['\n', ' ', '\0'])
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or("header is not a dictionary literal")?;

        let mut dict = HeaderDict::default();
        let (mut seen_descr, mut seen_order, mut seen_shape) = (false, false, false);
        let mut rest = body.trim_start();
        while !rest.is_empty() {
            let (key, after) = parse_quoted(rest)?;
            rest = after
                .trim_start()
                .strip_prefix(':')
                .ok_or("expected ':' after key")?
                .trim_start();
            match key {
                "descr" => {
                    let (value, after) = parse_quoted(rest)?;
                    dict.descr = value.to_string();
                    seen_descr = true;
                    rest = after;
                }
                "fortran_order" => {
                    if let Some(after) = rest.strip_prefix("True") {
                        dict.fortran_order = true;
                        rest = after;
                    } else if let Some(after) = rest.strip_prefix("False") {
                        dict.fortran_order = false;
                        rest = after;
                    } else {
                        return Err("fortran_order is not a boolean".into());
                    }
                    seen_order = true;
                }
                "shape" => {
                    let inner = rest.strip_prefix('(').ok_or("shape is not a tuple")?;
                    let close = inner.find(')').ok_or("unterminated shape tuple")?;
                    dict.shape = inner[..close]
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|_| format!("bad dimension {s:?}"))
                        })
                        .collect::<std::result::Result<_, _>>()?;
                    seen_shape = true;
                    rest = &inner[close + 1..];
                }
                other => return Err(format!("unexpected key {other:?}")),
            }
            rest = rest.trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        if !(seen_descr && seen_order && seen_shape) {
            return Err("header lacks descr, fortran_order or shape".into());
        }
        Ok(dict)
    }
}

fn parse_quoted(s: &str) -> std::result::Result<(&str, &str), String> {
    let quote = s.chars().next().filter(|c| *c == '\'' || *c == '"');
    let quote = quote.ok_or_else(|| format!("expected quoted string at {s:?}"))?;
    let inner = &s[1..];
    let end = inner.find(quote).ok_or("unterminated string")?;
    Ok((&inner[..end], &inner[end + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.npy")
    }

    #[test]
    fn header_is_aligned_and_terminated() {
        let m = FeatureMatrix::from_rows(&[[1.0f64, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let bytes = encode(&m);
        let header = parse_header(&bytes, p()).unwrap();
        assert_eq!(header.data_offset % 64, 0);
        assert_eq!(bytes[header.data_offset - 1], b'\n');
        assert_eq!((header.n_rows, header.n_cols), (2, 3));
        assert_eq!(header.dtype, DType::F64);
    }

    #[test]
    fn parses_numpy_style_headers() {
        let dict =
            HeaderDict::parse("{'descr': '<f4', 'fortran_order': False, 'shape': (10, 3), }    \n")
                .unwrap();
        assert_eq!(dict.descr, "<f4");
        assert_eq!(dict.shape, vec![10, 3]);
        let dict =
            HeaderDict::parse("{\"shape\": (7,), \"fortran_order\": True, \"descr\": \"<f8\"}")
                .unwrap();
        assert!(dict.fortran_order);
        assert_eq!(dict.shape, vec![7]);
        assert!(HeaderDict::parse("{'descr': '<f8'}").is_err());
        assert!(HeaderDict::parse("not a dict").is_err());
    }

    fn with_header(dict: &str, payload: &[u8]) -> Vec<u8> {
        let mut text = dict.to_string();
        text.push('\n');
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(text.len() as u16).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn rejects_unsupported_layouts() {
        let bytes = with_header(
            "{'descr': '<f2', 'fortran_order': False, 'shape': (1, 1), }",
            &[0, 0],
        );
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::UnsupportedDType { .. })
        ));

        let bytes = with_header(
            "{'descr': '>f8', 'fortran_order': False, 'shape': (1, 1), }",
            &[0; 8],
        );
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::UnsupportedDType { .. })
        ));

        let bytes = with_header(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }",
            &[0; 16],
        );
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::NotTwoDimensional { .. })
        ));

        let bytes = with_header(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2, 1), }",
            &[0; 32],
        );
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::NotTwoDimensional { .. })
        ));

        let bytes = with_header(
            "{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }",
            &[0; 8],
        );
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn rejects_bad_version_and_truncation() {
        let m = FeatureMatrix::from_rows(&[[1.0f64], [2.0]]).unwrap();
        let mut bytes = encode(&m);
        bytes[6] = 2;
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::MalformedHeader { .. })
        ));

        let mut bytes = encode(&m);
        bytes.pop();
        assert!(matches!(
            decode::<f64>(&bytes, p()),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn f32_widens_but_f64_does_not_narrow() {
        let m = FeatureMatrix::from_rows(&[[0.1f32, 2.5]]).unwrap();
        let wide: FeatureMatrix<f64> = decode(&encode(&m), p()).unwrap();
        assert_eq!(wide.get(0, 0), f64::from(0.1f32));

        let m = FeatureMatrix::from_rows(&[[0.1f64, 2.5]]).unwrap();
        assert!(matches!(
            decode::<f32>(&encode(&m), p()),
            Err(Error::UnsupportedDType { .. })
        ));
    }

    #[test]
    fn screens_non_finite_payload() {
        let mut payload = Vec::new();
        for v in [1.0f64, f64::NAN, 3.0, 4.0] {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let bytes = with_header(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &payload,
        );
        match decode::<f64>(&bytes, p()) {
            Err(Error::NonFiniteValue { path, row, col }) => {
                assert_eq!((row, col), (0, 1));
                assert_eq!(path.as_deref(), Some(p()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
