//! Readers and writers for the two supported scan formats.
//!
//! `xyz-ascii`: one point per line, whitespace separated, optional fourth
//! integer column holding the scan-line id and an optional `# unit: mm|m`
//! header (millimeters when absent).
//!
//! `ply`: ascii or binary little endian with a `vertex` element carrying
//! `x y z`, optionally `nx ny nz` and `line_id`. The unit is read from a
//! `comment unit: mm|m` header line and defaults to millimeters as well.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CloudMeta, GeometryError, LengthUnit, Point3, PointCloud, Result, Vector3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    XyzAscii,
    Ply,
}

impl std::str::FromStr for CloudFormat {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" | "xyz-ascii" => Ok(Self::XyzAscii),
            "ply" => Ok(Self::Ply),
            other => Err(GeometryError::InvalidParameter(format!(
                "unknown cloud format `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut cloud = match format {
        CloudFormat::XyzAscii => parse_xyz(&String::from_utf8_lossy(&bytes))?,
        CloudFormat::Ply => parse_ply(&bytes)?,
    };
    cloud.meta.source = path.display().to_string();
    cloud.validate()?;
    Ok(cloud)
}

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut unit = LengthUnit::Millimeter;
    let mut points = Vec::new();
    let mut lines: Vec<u32> = Vec::new();
    let mut has_lines = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(decl) = comment.trim().strip_prefix("unit:") {
                unit = LengthUnit::parse(decl)?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 3 or 4 columns, found {}", fields.len()),
            ));
        }
        let mut xyz = [0.0; 3];
        for (slot, tok) in xyz.iter_mut().zip(&fields) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("invalid coordinate `{tok}`")))?;
        }
        let carries_line = fields.len() == 4;
        match has_lines {
            None => has_lines = Some(carries_line),
            Some(prev) if prev != carries_line => {
                return Err(parse_err(lineno, "inconsistent column count"));
            }
            _ => {}
        }
        if carries_line {
            let id = fields[3]
                .parse::<u32>()
                .map_err(|_| parse_err(lineno, format!("invalid scan-line id `{}`", fields[3])))?;
            lines.push(id);
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }

    let scale = unit.to_meters();
    for p in &mut points {
        p.coords *= scale;
    }
    Ok(PointCloud {
        points,
        line_index: has_lines.unwrap_or(false).then_some(lines),
        normals: None,
        meta: CloudMeta {
            unit,
            ..CloudMeta::default()
        },
    })
}

/// Writes meters with 12 significant digits.
pub fn save_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# unit: m")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{:.11e} {:.11e} {:.11e}", p.x, p.y, p.z)?;
        if let Some(lines) = &cloud.line_index {
            write!(out, " {}", lines[i])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, encoding: PlyEncoding) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&ply_bytes(cloud, encoding))?;
    out.flush()?;
    Ok(())
}

/// Serialized PLY document, meters, doubles for coordinates and normals.
pub fn ply_bytes(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut header = String::from("ply\n");
    header.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    header.push_str("comment unit: m\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if cloud.line_index.is_some() {
        header.push_str("property uint line_id\n");
    }
    header.push_str("end_header\n");

    let mut buf = header.into_bytes();
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        let normal = cloud.normals.as_ref().map(|n| n[i]);
        let line = cloud.line_index.as_ref().map(|l| l[i]);
        match encoding {
            PlyEncoding::Ascii => {
                let mut row = format!("{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
                if let Some(n) = normal {
                    row.push_str(&format!(" {:.17e} {:.17e} {:.17e}", n.x, n.y, n.z));
                }
                if let Some(l) = line {
                    row.push_str(&format!(" {l}"));
                }
                row.push('\n');
                buf.extend_from_slice(row.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(n) = normal {
                    for v in [n.x, n.y, n.z] {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                if let Some(l) = line {
                    buf.extend_from_slice(&l.to_le_bytes());
                }
            }
        }
    }
    buf
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarType)>,
    has_list: bool,
}

pub(crate) fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    // Header is ASCII up to and including "end_header\n".
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err(1, "missing end_header"))?;
    let body_start = bytes[end..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| end + p + 1)
        .unwrap_or(bytes.len());
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| parse_err(1, "header is not valid UTF-8"))?;

    let mut encoding = None;
    let mut unit = LengthUnit::Millimeter;
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_lines = 0;
    for (i, line) in header.lines().enumerate() {
        header_lines = i + 1;
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["ply"] if i == 0 => {}
            _ if i == 0 => return Err(parse_err(1, "missing `ply` magic")),
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => {
                encoding = Some(PlyEncoding::BinaryLittleEndian)
            }
            ["format", other, ..] => {
                return Err(parse_err(lineno, format!("unsupported format `{other}`")))
            }
            ["comment", rest @ ..] => {
                let text = rest.join(" ");
                if let Some(decl) = text.strip_prefix("unit:") {
                    unit = LengthUnit::parse(decl)?;
                }
            }
            ["obj_info", ..] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid element count `{count}`")))?,
                properties: Vec::new(),
                has_list: false,
            }),
            ["property", "list", ..] => {
                let elem = elements
                    .last()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?;
                if elem.name == "vertex" {
                    return Err(parse_err(lineno, "list properties on vertex are unsupported"));
                }
                // Lists are only allowed after the vertex element; parsing stops there.
                elements.last_mut().unwrap().has_list = true;
            }
            ["property", ty, name] => {
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| parse_err(lineno, format!("unknown property type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?
                    .properties
                    .push((name.to_string(), ty));
            }
            _ => return Err(parse_err(lineno, format!("unrecognized header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(1, "missing format line"))?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(header_lines, "no vertex element"))?;

    if elements[..vertex_pos].iter().any(|e| e.has_list && e.count > 0) {
        return Err(parse_err(header_lines, "list elements before vertex are unsupported"));
    }
    let vertex = &elements[vertex_pos];
    let col = |name: &str| vertex.properties.iter().position(|(n, _)| n == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(parse_err(header_lines, "vertex lacks x, y or z")),
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let line_col = col("line_id");

    let rows: Vec<Vec<f64>> = match encoding {
        PlyEncoding::Ascii => {
            let body = std::str::from_utf8(&bytes[body_start..])
                .map_err(|_| parse_err(header_lines + 1, "body is not valid UTF-8"))?;
            let mut data_lines = body
                .lines()
                .enumerate()
                .map(|(i, l)| (header_lines + 2 + i, l))
                .filter(|(_, l)| !l.trim().is_empty());
            for elem in &elements[..vertex_pos] {
                for _ in 0..elem.count {
                    data_lines
                        .next()
                        .ok_or_else(|| parse_err(header_lines, "truncated body"))?;
                }
            }
            let mut rows = Vec::with_capacity(vertex.count);
            for _ in 0..vertex.count {
                let (lineno, line) = data_lines
                    .next()
                    .ok_or_else(|| parse_err(header_lines, "fewer vertices than declared"))?;
                let vals = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(lineno, format!("invalid value `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != vertex.properties.len() {
                    return Err(parse_err(
                        lineno,
                        format!(
                            "expected {} values, found {}",
                            vertex.properties.len(),
                            vals.len()
                        ),
                    ));
                }
                rows.push(vals);
            }
            rows
        }
        PlyEncoding::BinaryLittleEndian => {
            let mut offset = body_start;
            for elem in &elements[..vertex_pos] {
                let stride: usize = elem.properties.iter().map(|(_, t)| t.size()).sum();
                offset += stride * elem.count;
            }
            let stride: usize = vertex.properties.iter().map(|(_, t)| t.size()).sum();
            if bytes.len() < offset + stride * vertex.count {
                return Err(parse_err(header_lines, "binary body shorter than declared"));
            }
            (0..vertex.count)
                .map(|i| {
                    let mut at = offset + i * stride;
                    vertex
                        .properties
                        .iter()
                        .map(|(_, ty)| {
                            let v = ty.read_le(&bytes[at..]);
                            at += ty.size();
                            v
                        })
                        .collect()
                })
                .collect()
        }
    };

    let scale = unit.to_meters();
    let points = rows
        .iter()
        .map(|r| Point3::new(r[ix] * scale, r[iy] * scale, r[iz] * scale))
        .collect();
    let normals = normal_cols.map(|(a, b, c)| {
        rows.iter()
            .map(|r| Vector3::new(r[a], r[b], r[c]))
            .collect()
    });
    let line_index = line_col.map(|c| rows.iter().map(|r| r[c] as u32).collect());
    Ok(PointCloud {
        points,
        line_index,
        normals,
        meta: CloudMeta {
            unit,
            ..CloudMeta::default()
        },
    })
}
