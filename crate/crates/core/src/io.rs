//! File formats: control-sequence CSV, Middlebury `.flo` flow fields, and
//! JSON frame-feature / latent-code documents.
//!
//! Every writer goes through a temp-file-plus-rename so readers never see a
//! half-written file. Readers validate aggressively and report 1-based
//! line/column positions for text formats; binary `.flo` failures name the
//! file and the offending header field.
//!
//! # CSV layout
//!
//! ```text
//! t,c0,c1,…,c{D−1}
//! 0,0.125,-3.5,…
//! 1,0.25,-3.25,…
//! ```
//!
//! Timestamps are consecutive integers from 0. Values are printed with the
//! shortest decimal form that parses back to the identical double (at most
//! 17 significant digits), so write → read → write is byte-identical.
//!
//! # `.flo` layout
//!
//! Little-endian: the float 202021.25 as magic, `i32` width, `i32` height,
//! then `height` rows of `width` interleaved `(u, v)` float pairs. The
//! in-memory [`FlowField`] is double precision; components pass through
//! `f32` on disk, so a read → write round trip is byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::aggregator::{FrameFeatures, LatentCode};
use crate::error::{Error, Result};
use crate::metrics::FlowField;
use crate::stabilizer::ControlSequence;

/// Magic number opening every `.flo` file ("PIEH" as a little-endian float).
pub const FLO_MAGIC: f32 = 202021.25;

/// Sanity bound on `.flo` dimensions, matching common readers.
const FLO_MAX_DIM: i32 = 99_999;

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Control-sequence CSV
// ---------------------------------------------------------------------------

/// Renders a control sequence in the CSV layout described in the
/// [module docs](self).
pub fn control_sequence_to_csv(seq: &ControlSequence) -> String {
    let mut out = String::new();
    out.push('t');
    for i in 0..seq.dims() {
        out.push_str(&format!(",c{i}"));
    }
    out.push('\n');
    for (t, row) in seq.values().rows().into_iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            // `{}` prints the shortest digits that parse back to `v` exactly.
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Writes a control sequence as CSV, atomically.
pub fn write_control_sequence_csv(path: &Path, seq: &ControlSequence) -> Result<()> {
    atomic_write(path, control_sequence_to_csv(seq).as_bytes())
}

/// Parses a control sequence from CSV text; `path` labels errors.
pub fn control_sequence_from_csv(text: &str, path: &Path) -> Result<ControlSequence> {
    let parse_err = |line: u64, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };

    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(1, 1, "empty file, expected a header row".into()));
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields[0] != "t" {
        return Err(parse_err(
            1,
            1,
            format!("header must start with 't', got '{}'", fields[0]),
        ));
    }
    if fields.len() < 2 {
        return Err(parse_err(1, 1, "header lists no value columns".into()));
    }
    for (i, field) in fields[1..].iter().enumerate() {
        let want = format!("c{i}");
        if *field != want {
            return Err(parse_err(
                1,
                i + 2,
                format!("expected column header '{want}', got '{field}'"),
            ));
        }
    }
    let dims = fields.len() - 1;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, line) in lines {
        let line_no = index as u64 + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dims + 1 {
            return Err(parse_err(
                line_no,
                fields.len().min(dims + 1),
                format!("expected {} fields, got {}", dims + 1, fields.len()),
            ));
        }
        let t: usize = fields[0].parse().map_err(|_| {
            parse_err(
                line_no,
                1,
                format!(
                    "timestamp must be a non-negative integer, got '{}'",
                    fields[0]
                ),
            )
        })?;
        if t != rows.len() {
            return Err(parse_err(
                line_no,
                1,
                format!(
                    "timestamps must be consecutive integers from 0; expected {}, got {t}",
                    rows.len()
                ),
            ));
        }
        let mut row = Vec::with_capacity(dims);
        for (i, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(
                    line_no,
                    i + 2,
                    format!("expected a decimal number, got '{field}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line_no,
                    i + 2,
                    format!("value must be finite, got '{field}'"),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    ControlSequence::from_rows(&rows)
}

/// Reads a control-sequence CSV file.
pub fn read_control_sequence_csv(path: &Path) -> Result<ControlSequence> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    control_sequence_from_csv(&text, path)
}

// ---------------------------------------------------------------------------
// Middlebury .flo
// ---------------------------------------------------------------------------

/// Serializes a flow field into `.flo` bytes.
pub fn flow_to_flo_bytes(flow: &FlowField) -> Vec<u8> {
    let (w, h) = (flow.width(), flow.height());
    let mut bytes = Vec::with_capacity(12 + 8 * w * h);
    let mut scratch = [0u8; 4];
    LittleEndian::write_f32(&mut scratch, FLO_MAGIC);
    bytes.extend_from_slice(&scratch);
    LittleEndian::write_i32(&mut scratch, w as i32);
    bytes.extend_from_slice(&scratch);
    LittleEndian::write_i32(&mut scratch, h as i32);
    bytes.extend_from_slice(&scratch);
    for y in 0..h {
        for x in 0..w {
            LittleEndian::write_f32(&mut scratch, flow.u()[[y, x]] as f32);
            bytes.extend_from_slice(&scratch);
            LittleEndian::write_f32(&mut scratch, flow.v()[[y, x]] as f32);
            bytes.extend_from_slice(&scratch);
        }
    }
    bytes
}

/// Writes a flow field as `.flo`, atomically.
pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    atomic_write(path, &flow_to_flo_bytes(flow))
}

/// Parses `.flo` bytes; `path` labels errors.
pub fn flow_from_flo_bytes(bytes: &[u8], path: &Path) -> Result<FlowField> {
    let bad = |message: String| Error::input(format!("{}: {message}", path.display()));
    if bytes.len() < 12 {
        return Err(bad(format!(
            "truncated .flo header ({} bytes)",
            bytes.len()
        )));
    }
    let magic = LittleEndian::read_f32(&bytes[0..4]);
    if magic != FLO_MAGIC {
        return Err(bad(format!(
            "bad .flo magic {magic} (expected {FLO_MAGIC})"
        )));
    }
    let w = LittleEndian::read_i32(&bytes[4..8]);
    let h = LittleEndian::read_i32(&bytes[8..12]);
    if w < 1 || h < 1 || w > FLO_MAX_DIM || h > FLO_MAX_DIM {
        return Err(bad(format!("implausible .flo dimensions {w}×{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 8 * w * h;
    if bytes.len() != expected {
        return Err(bad(format!(
            "wrong .flo payload size: {} bytes for {w}×{h} (expected {expected})",
            bytes.len()
        )));
    }
    let mut u = Array2::zeros((h, w));
    let mut v = Array2::zeros((h, w));
    let mut offset = 12;
    for y in 0..h {
        for x in 0..w {
            u[[y, x]] = LittleEndian::read_f32(&bytes[offset..offset + 4]) as f64;
            v[[y, x]] = LittleEndian::read_f32(&bytes[offset + 4..offset + 8]) as f64;
            offset += 8;
        }
    }
    FlowField::new(u, v).map_err(|e| bad(e.to_string()))
}

/// Reads a `.flo` flow-field file.
pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    flow_from_flo_bytes(&bytes, path)
}

// ---------------------------------------------------------------------------
// JSON frame features and latent codes
// ---------------------------------------------------------------------------

/// Shape header of a frame-features document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramesHeader {
    /// Query/key length `d_k`.
    pub key_dim: usize,
    /// Latent layer count `L`.
    pub layers: usize,
    /// Latent channel count `C`.
    pub channels: usize,
}

#[derive(Serialize, Deserialize)]
struct FramesFileJson {
    d_k: usize,
    #[serde(rename = "L")]
    layers: usize,
    #[serde(rename = "C")]
    channels: usize,
    frames: Vec<FrameRecordJson>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecordJson {
    q: Vec<f64>,
    k: Vec<f64>,
    w: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct LatentJson {
    w: Vec<Vec<f64>>,
}

fn json_parse_error(path: &Path, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    }
}

fn rows_to_array(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let layers = rows.len();
    if layers == 0 {
        return Err(Error::input(format!("{what} has no layers")));
    }
    let channels = rows[0].len();
    for (l, row) in rows.iter().enumerate() {
        if row.len() != channels {
            return Err(Error::input(format!(
                "{what} layer {l} has {} channels, expected {channels}",
                row.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((layers, channels), flat)
        .expect("row-major buffer matches the declared shape"))
}

/// Reads a frame-features JSON document
/// (`{"d_k": …, "L": …, "C": …, "frames": [{"q": …, "k": …, "w": …}, …]}`),
/// validating every frame against the declared shape.
pub fn read_frames_json(path: &Path) -> Result<(FramesHeader, Vec<FrameFeatures>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: FramesFileJson =
        serde_json::from_str(&text).map_err(|e| json_parse_error(path, &e))?;
    let header = FramesHeader {
        key_dim: doc.d_k,
        layers: doc.layers,
        channels: doc.channels,
    };
    let mut frames = Vec::with_capacity(doc.frames.len());
    for (i, record) in doc.frames.iter().enumerate() {
        if record.q.len() != header.key_dim || record.k.len() != header.key_dim {
            return Err(Error::input(format!(
                "frame {i}: q has {} and k has {} entries, document says d_k = {}",
                record.q.len(),
                record.k.len(),
                header.key_dim
            )));
        }
        let latent = rows_to_array(&record.w, &format!("frame {i} latent"))?;
        if latent.dim() != (header.layers, header.channels) {
            return Err(Error::input(format!(
                "frame {i} latent is {:?}, document says {}×{}",
                latent.dim(),
                header.layers,
                header.channels
            )));
        }
        frames.push(FrameFeatures::new(
            record.q.clone(),
            record.k.clone(),
            latent,
        )?);
    }
    Ok((header, frames))
}

/// Writes a frame-features JSON document, atomically.
pub fn write_frames_json(
    path: &Path,
    header: FramesHeader,
    frames: &[FrameFeatures],
) -> Result<()> {
    let doc = FramesFileJson {
        d_k: header.key_dim,
        layers: header.layers,
        channels: header.channels,
        frames: frames
            .iter()
            .map(|f| FrameRecordJson {
                q: f.query().to_vec(),
                k: f.key().to_vec(),
                w: f.latent().rows().into_iter().map(|r| r.to_vec()).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| json_parse_error(path, &e))?;
    atomic_write(path, text.as_bytes())
}

/// Writes a latent code as `{"w": [[…], …]}`, atomically.
pub fn write_latent_json(path: &Path, latent: &LatentCode) -> Result<()> {
    let doc = LatentJson {
        w: latent
            .values()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| json_parse_error(path, &e))?;
    atomic_write(path, text.as_bytes())
}

/// Reads a latent-code JSON document.
pub fn read_latent_json(path: &Path) -> Result<LatentCode> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: LatentJson = serde_json::from_str(&text).map_err(|e| json_parse_error(path, &e))?;
    let values = rows_to_array(&doc.w, "latent code")?;
    if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!(
            "latent code contains a non-finite entry ({bad})"
        )));
    }
    Ok(LatentCode::new(values))
}
