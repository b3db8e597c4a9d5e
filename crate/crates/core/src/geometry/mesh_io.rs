//! Wavefront OBJ and STL readers.

use std::path::Path;

use thiserror::Error;

use super::{GeometryError, Point, TriangleSoup};

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed STL: {0}")]
    Stl(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported mesh extension {0:?} (expected .obj or .stl)")]
    Extension(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshIoError {
    MeshIoError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `v` and `f` records; faces with more than three corners are fan
/// triangulated. Negative (relative) indices are accepted.
pub fn parse_obj(text: &str) -> Result<TriangleSoup, MeshIoError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(line_no, "vertex needs three coordinates"));
                }
                vertices.push(Point::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let k: i64 = head
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad face index {tok:?}: {e}")))?;
                    let resolved = if k > 0 {
                        k - 1
                    } else if k < 0 {
                        vertices.len() as i64 + k
                    } else {
                        return Err(parse_err(line_no, "face index 0 is invalid"));
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(parse_err(line_no, format!("face index {k} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least three vertices"));
                }
                for j in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleSoup::new(vertices, triangles)?)
}

fn parse_ascii_stl(text: &str) -> Result<TriangleSoup, MeshIoError> {
    let mut vertices = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let mut tokens = raw.split_whitespace();
        if tokens.next() == Some("vertex") {
            let c: Vec<f64> = tokens
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(i + 1, format!("bad STL vertex: {e}")))?;
            if c.len() != 3 {
                return Err(parse_err(i + 1, "STL vertex needs three coordinates"));
            }
            vertices.push(Point::new(c[0], c[1], c[2]));
        }
    }
    if vertices.len() % 3 != 0 {
        return Err(MeshIoError::Stl("vertex count is not a multiple of three".into()));
    }
    let triangles = (0..vertices.len() / 3).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
    Ok(TriangleSoup::new(vertices, triangles)?)
}

fn parse_binary_stl(bytes: &[u8]) -> Result<TriangleSoup, MeshIoError> {
    if bytes.len() < 84 {
        return Err(MeshIoError::Stl("shorter than the 84-byte header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() < expected {
        return Err(MeshIoError::Stl(format!(
            "header declares {count} triangles but file has {} bytes",
            bytes.len()
        )));
    }
    let mut vertices = Vec::with_capacity(3 * count);
    for t in 0..count {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        for v in 0..3 {
            let mut c = [0.0f64; 3];
            for (k, slot) in c.iter_mut().enumerate() {
                let off = 12 + 12 * v + 4 * k;
                *slot = f32::from_le_bytes(rec[off..off + 4].try_into().unwrap()) as f64;
            }
            vertices.push(Point::new(c[0], c[1], c[2]));
        }
    }
    let triangles = (0..count).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
    Ok(TriangleSoup::new(vertices, triangles)?)
}

/// Reads ASCII or binary little-endian STL; binary is detected by the
/// record count matching the file length.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleSoup, MeshIoError> {
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if 84 + 50 * count == bytes.len() {
            return parse_binary_stl(bytes);
        }
    }
    match std::str::from_utf8(bytes) {
        Ok(text) if text.trim_start().starts_with("solid") => parse_ascii_stl(text),
        _ => parse_binary_stl(bytes),
    }
}

pub fn load_soup(path: &Path) -> Result<TriangleSoup, MeshIoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "obj" => parse_obj(&std::fs::read_to_string(path)?),
        "stl" => parse_stl(&std::fs::read(path)?),
        _ => Err(MeshIoError::Extension(ext)),
    }
}

pub fn write_obj(soup: &TriangleSoup) -> String {
    let mut out = String::new();
    for v in soup.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in soup.triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}
