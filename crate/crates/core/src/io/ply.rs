//! PLY reader (ASCII and binary little-endian) and writers.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::Point3;
use thiserror::Error;

use crate::mesh::{PointCloud, TerrainMesh};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed PLY header at byte {offset}: {message}")]
    Header { offset: usize, message: String },
    #[error("truncated PLY payload at byte {offset}: expected {expected}")]
    Truncated { offset: usize, expected: String },
    #[error("PLY vertex element (byte {offset}) lacks an x, y or z property")]
    MissingXyz { offset: usize },
    #[error("invalid value at byte {offset}: {message}")]
    Value { offset: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::U32 => f64::from(u32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F32 => f64::from(f32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    offset: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body: usize,
}

fn parse_header(data: &[u8]) -> Result<Header, PlyError> {
    let err = |offset, message: &str| PlyError::Header {
        offset,
        message: message.to_string(),
    };
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= data.len() {
            return None;
        }
        let start = *pos;
        let end = data[start..]
            .iter()
            .position(|&c| c == b'\n')
            .map_or(data.len(), |i| start + i);
        *pos = (end + 1).min(data.len());
        let line = String::from_utf8_lossy(&data[start..end]);
        Some((start, line.trim_end_matches('\r').to_string()))
    };

    match next_line(&mut pos) {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(0, "missing 'ply' magic line")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((offset, line)) = next_line(&mut pos) else {
            return Err(err(pos, "missing end_header"));
        };
        let mut words = line.split_whitespace();
        match words.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match words.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    Some(other) => {
                        return Err(err(offset, &format!("unsupported format '{other}'")))
                    }
                    None => return Err(err(offset, "format line without a format")),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (words.next(), words.next()) else {
                    return Err(err(offset, "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| err(offset, &format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    offset,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(err(offset, "property before any element"));
                };
                let ty = |w: Option<&str>| {
                    w.and_then(Scalar::parse)
                        .ok_or_else(|| err(offset, "unknown property type"))
                };
                let words: Vec<&str> = words.collect();
                let property = if words.first() == Some(&"list") {
                    if words.len() != 4 {
                        return Err(err(
                            offset,
                            "list property needs count type, item type and name",
                        ));
                    }
                    Property::List {
                        count: ty(words.get(1).copied())?,
                        item: ty(words.get(2).copied())?,
                    }
                } else {
                    if words.len() != 2 {
                        return Err(err(offset, "property needs a type and a name"));
                    }
                    Property::Scalar {
                        ty: ty(words.first().copied())?,
                        name: words[1].to_string(),
                    }
                };
                element.properties.push(property);
            }
            Some("end_header") => break,
            Some(other) => return Err(err(offset, &format!("unexpected keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| err(0, "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body: pos,
    })
}

/// Positions of the x, y and z scalar properties.
fn xyz_slots(element: &Element) -> Result<[usize; 3], PlyError> {
    let find = |axis: &str| {
        element
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
    };
    match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => Ok([x, y, z]),
        _ => Err(PlyError::MissingXyz {
            offset: element.offset,
        }),
    }
}

/// Parses PLY bytes into a point cloud taken from the `vertex` element.
pub fn parse_ply(data: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(data)?;
    let Some(vertex_index) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(PlyError::MissingXyz { offset: 0 });
    };
    let slots = xyz_slots(&header.elements[vertex_index])?;
    let points = match header.encoding {
        PlyEncoding::Ascii => read_ascii(data, &header, vertex_index, slots)?,
        PlyEncoding::BinaryLittleEndian => read_binary(data, &header, vertex_index, slots)?,
    };
    let offset = header.body;
    PointCloud::new(points).map_err(|e| PlyError::Value {
        offset,
        message: e.to_string(),
    })
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), PlyError> {
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PlyError::Truncated {
                offset: start,
                expected: expected.to_string(),
            });
        }
        let s = std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| PlyError::Value {
            offset: start,
            message: "non-UTF-8 token".into(),
        })?;
        Ok((start, s))
    }

    fn number(&mut self, expected: &str) -> Result<f64, PlyError> {
        let (offset, s) = self.next(expected)?;
        s.parse().map_err(|_| PlyError::Value {
            offset,
            message: format!("'{s}' is not a number"),
        })
    }
}

fn read_ascii(
    data: &[u8],
    header: &Header,
    vertex_index: usize,
    slots: [usize; 3],
) -> Result<Vec<Point3<f64>>, PlyError> {
    let mut tokens = Tokens {
        data,
        pos: header.body,
    };
    let mut points = Vec::new();
    for (e, element) in header.elements.iter().enumerate().take(vertex_index + 1) {
        for i in 0..element.count {
            let mut xyz = [0.0; 3];
            for (p, property) in element.properties.iter().enumerate() {
                let what = || format!("entry {i} of element '{}'", element.name);
                match property {
                    Property::Scalar { .. } => {
                        let v = tokens.number(&what())?;
                        if let Some(axis) = slots.iter().position(|&s| s == p) {
                            xyz[axis] = v;
                        }
                    }
                    Property::List { .. } => {
                        let n = tokens.number(&what())?;
                        for _ in 0..n as usize {
                            tokens.next(&what())?;
                        }
                    }
                }
            }
            if e == vertex_index {
                points.push(Point3::from(xyz));
            }
        }
    }
    Ok(points)
}

fn read_binary(
    data: &[u8],
    header: &Header,
    vertex_index: usize,
    slots: [usize; 3],
) -> Result<Vec<Point3<f64>>, PlyError> {
    let mut pos = header.body;
    let mut take = |len: usize, expected: &dyn Fn() -> String| -> Result<&[u8], PlyError> {
        if data.len() - pos < len {
            return Err(PlyError::Truncated {
                offset: data.len(),
                expected: expected(),
            });
        }
        let s = &data[pos..pos + len];
        pos += len;
        Ok(s)
    };
    let mut points = Vec::new();
    for (e, element) in header.elements.iter().enumerate().take(vertex_index + 1) {
        if e == vertex_index {
            points.reserve(element.count);
        }
        for i in 0..element.count {
            let what = || format!("entry {i} of element '{}'", element.name);
            let mut xyz = [0.0; 3];
            for (p, property) in element.properties.iter().enumerate() {
                match *property {
                    Property::Scalar { ty, .. } => {
                        let bytes = take(ty.size(), &what)?;
                        if let Some(axis) = slots.iter().position(|&s| s == p) {
                            xyz[axis] = ty.decode(bytes);
                        }
                    }
                    Property::List { count, item } => {
                        let n = count.decode(take(count.size(), &what)?);
                        take(n as usize * item.size(), &what)?;
                    }
                }
            }
            if e == vertex_index {
                points.push(Point3::from(xyz));
            }
        }
    }
    Ok(points)
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|source| PlyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ply(&data)
}

fn write_header(
    out: &mut impl Write,
    encoding: PlyEncoding,
    vertices: usize,
    faces: Option<usize>,
) -> io::Result<()> {
    writeln!(out, "ply")?;
    match encoding {
        PlyEncoding::Ascii => writeln!(out, "format ascii 1.0")?,
        PlyEncoding::BinaryLittleEndian => writeln!(out, "format binary_little_endian 1.0")?,
    }
    writeln!(out, "element vertex {vertices}")?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    if let Some(faces) = faces {
        writeln!(out, "element face {faces}")?;
        writeln!(out, "property list uchar uint vertex_indices")?;
    }
    writeln!(out, "end_header")
}

fn write_vertices(
    out: &mut impl Write,
    encoding: PlyEncoding,
    points: &[Point3<f64>],
) -> io::Result<()> {
    for p in points {
        match encoding {
            PlyEncoding::Ascii => writeln!(out, "{} {} {}", p.x, p.y, p.z)?,
            PlyEncoding::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z] {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Writes vertices only; ASCII output uses shortest round-trip decimals.
pub fn write_cloud_ply(
    out: &mut impl Write,
    points: &[Point3<f64>],
    encoding: PlyEncoding,
) -> io::Result<()> {
    write_header(out, encoding, points.len(), None)?;
    write_vertices(out, encoding, points)
}

/// Writes mesh vertices and triangle faces.
pub fn write_mesh_ply(
    out: &mut impl Write,
    mesh: &TerrainMesh,
    encoding: PlyEncoding,
) -> io::Result<()> {
    write_header(
        out,
        encoding,
        mesh.vertices().len(),
        Some(mesh.triangles().len()),
    )?;
    write_vertices(out, encoding, mesh.vertices())?;
    for tri in mesh.triangles() {
        match encoding {
            PlyEncoding::Ascii => writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?,
            PlyEncoding::BinaryLittleEndian => {
                out.write_all(&[3u8])?;
                for &v in tri {
                    let v = u32::try_from(v).expect("vertex index fits in u32");
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
