//! Minimal MAT-file level-5 reader: uncompressed double matrices only,
//! both endiannesses. Compressed (`miCOMPRESSED`) elements are rejected
//! with a pointer at the CSV conversion path.

use std::fs;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::ingest::{Label, RawSignal};
use crate::num::{real, Real};

const MI_INT8: u32 = 1;
const MI_DOUBLE: u32 = 9;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;
const MI_UTF8: u32 = 16;

const MX_DOUBLE_CLASS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        match self {
            Endian::Little => LittleEndian::read_u16(b),
            Endian::Big => BigEndian::read_u16(b),
        }
    }
    fn u32(self, b: &[u8]) -> u32 {
        match self {
            Endian::Little => LittleEndian::read_u32(b),
            Endian::Big => BigEndian::read_u32(b),
        }
    }
    fn i32(self, b: &[u8]) -> i32 {
        match self {
            Endian::Little => LittleEndian::read_i32(b),
            Endian::Big => BigEndian::read_i32(b),
        }
    }
    fn f64(self, b: &[u8]) -> f64 {
        match self {
            Endian::Little => LittleEndian::read_f64(b),
            Endian::Big => BigEndian::read_f64(b),
        }
    }
}

/// One decoded sub-element tag: type, payload range, next tag offset.
struct SubElement {
    data_type: u32,
    start: usize,
    len: usize,
    next: usize,
}

fn read_tag(buf: &[u8], off: usize, endian: Endian, path: &Path) -> Result<SubElement> {
    if off + 8 > buf.len() {
        return Err(short_file(path));
    }
    let word = endian.u32(&buf[off..off + 4]);
    // Small data element: the byte count packs into the upper 16 bits of
    // the first word, the type into the lower 16.
    let small_len = (word >> 16) as usize;
    if small_len != 0 {
        let data_type = word & 0xFFFF;
        return Ok(SubElement {
            data_type,
            start: off + 4,
            len: small_len,
            next: off + 8,
        });
    }
    let data_type = word;
    let len = endian.u32(&buf[off + 4..off + 8]) as usize;
    let start = off + 8;
    if start + len > buf.len() {
        return Err(short_file(path));
    }
    // Payloads are padded to 8-byte boundaries (compressed ones are not,
    // but we never step past a compressed element's payload).
    let padded = len.div_ceil(8) * 8;
    Ok(SubElement {
        data_type,
        start,
        len,
        next: start + padded,
    })
}

fn short_file(path: &Path) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: "truncated MAT data element".into(),
    }
}

/// Load the first double-precision matrix whose name contains `var_filter`,
/// flattened column-major.
pub fn load_mat_v5<T: Real>(path: &Path, var_filter: &str, label: Label) -> Result<RawSignal<T>> {
    let buf = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if buf.len() < 128 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "shorter than the 128-byte MAT header".into(),
        });
    }
    let endian = match &buf[126..128] {
        b"IM" => Endian::Little,
        b"MI" => Endian::Big,
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("bad endian marker {other:?}"),
            })
        }
    };
    let version = endian.u16(&buf[124..126]);
    if version != 0x0100 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unsupported MAT version 0x{version:04x}"),
        });
    }

    let mut off = 128;
    let mut available = Vec::new();
    let mut saw_compressed = false;
    while off + 8 <= buf.len() {
        let elem = read_tag(&buf, off, endian, path)?;
        match elem.data_type {
            MI_COMPRESSED => {
                // Contents (and names) are opaque without inflation.
                saw_compressed = true;
            }
            MI_MATRIX => {
                if let Some(sig) =
                    parse_matrix(&buf[elem.start..elem.start + elem.len], endian, path, var_filter, label, &mut available)?
                {
                    return Ok(sig);
                }
            }
            _ => {} // skip padding / unknown top-level elements
        }
        if elem.next <= off {
            return Err(short_file(path));
        }
        off = elem.next;
    }

    if saw_compressed {
        return Err(Error::MatCompressed);
    }
    Err(Error::MatVarNotFound {
        filter: var_filter.to_string(),
        available,
    })
}

/// Parse one miMATRIX payload. Returns the signal when the name matches,
/// records the name in `available` otherwise.
fn parse_matrix<T: Real>(
    body: &[u8],
    endian: Endian,
    path: &Path,
    var_filter: &str,
    label: Label,
    available: &mut Vec<String>,
) -> Result<Option<RawSignal<T>>> {
    // Array flags (miUINT32 x 2): class in the low byte of the first word.
    let flags = read_tag(body, 0, endian, path)?;
    if flags.len < 8 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "matrix missing array flags".into(),
        });
    }
    let class = endian.u32(&body[flags.start..flags.start + 4]) & 0xFF;

    let dims_elem = read_tag(body, flags.next, endian, path)?;
    let n_dims = dims_elem.len / 4;
    let mut count = 1usize;
    for d in 0..n_dims {
        let v = endian.i32(&body[dims_elem.start + 4 * d..dims_elem.start + 4 * d + 4]);
        count = count.saturating_mul(v.max(0) as usize);
    }

    let name_elem = read_tag(body, dims_elem.next, endian, path)?;
    if name_elem.data_type != MI_INT8 && name_elem.data_type != MI_UTF8 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected name element type {}", name_elem.data_type),
        });
    }
    let name = String::from_utf8_lossy(&body[name_elem.start..name_elem.start + name_elem.len])
        .trim_end_matches('\0')
        .to_string();

    if !name.contains(var_filter) {
        available.push(name);
        return Ok(None);
    }

    if class != MX_DOUBLE_CLASS {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("variable {name:?} has non-double storage class {class}"),
        });
    }
    let data_elem = read_tag(body, name_elem.next, endian, path)?;
    if data_elem.data_type != MI_DOUBLE {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "variable {name:?} stores element type {} instead of double",
                data_elem.data_type
            ),
        });
    }
    let n_vals = data_elem.len / 8;
    if n_vals != count {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("variable {name:?}: dims say {count} values, data holds {n_vals}"),
        });
    }
    // MAT stores matrices column-major, so file order is already the
    // flattened order the contract asks for.
    let mut samples = Vec::with_capacity(n_vals);
    for i in 0..n_vals {
        let v = endian.f64(&body[data_elem.start + 8 * i..data_elem.start + 8 * i + 8]);
        if !v.is_finite() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("variable {name:?}: non-finite sample at index {i}"),
            });
        }
        samples.push(real(v));
    }
    if samples.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("variable {name:?} is empty"),
        });
    }
    Ok(Some(RawSignal {
        samples,
        sample_rate: 12_000.0,
        label,
        fault_diameter: None,
    }))
}
