//! Binary and ASCII STL.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::Mesh;
use crate::{Error, Result};

pub const STL_HEADER_LEN: usize = 80;
pub const STL_TRIANGLE_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StlFormat {
    #[default]
    Binary,
    Ascii,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

/// Triangles in millimeters plus the header or solid name.
#[derive(Debug, Clone, PartialEq)]
pub struct StlDocument {
    pub format: StlFormat,
    /// Binary header bytes, or the ASCII solid name.
    pub header: Vec<u8>,
    pub triangles: Vec<StlTriangle>,
}

fn facet_normal(v: &[[f32; 3]; 3]) -> [f32; 3] {
    let p = v.map(|a| Point3::new(a[0] as f64, a[1] as f64, a[2] as f64));
    let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let len = n.norm();
    if len > 0.0 && len.is_finite() {
        [(n.x / len) as f32, (n.y / len) as f32, (n.z / len) as f32]
    } else {
        [0.0; 3]
    }
}

impl StlDocument {
    /// Triangles of `mesh` after mapping each vertex through `to_mm`.
    pub fn from_mesh(mesh: &Mesh, format: StlFormat, name: &str, to_mm: impl Fn(&Point3<f64>) -> [f64; 3]) -> StlDocument {
        let verts: Vec<[f32; 3]> = mesh
            .vertices
            .iter()
            .map(|p| to_mm(p).map(|c| c as f32))
            .collect();
        let triangles = mesh
            .triangles
            .iter()
            .map(|t| {
                let vertices = t.map(|i| verts[i as usize]);
                StlTriangle {
                    normal: facet_normal(&vertices),
                    vertices,
                    attribute: 0,
                }
            })
            .collect();
        let header = match format {
            StlFormat::Binary => {
                let mut h = name.as_bytes().to_vec();
                h.resize(STL_HEADER_LEN, b' ');
                h
            }
            StlFormat::Ascii => name.split_whitespace().next().unwrap_or("model").as_bytes().to_vec(),
        };
        StlDocument {
            format,
            header,
            triangles,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self.format {
            StlFormat::Binary => self.to_binary(),
            StlFormat::Ascii => self.to_ascii().into_bytes(),
        }
    }

    fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STL_HEADER_LEN + 4 + STL_TRIANGLE_LEN * self.triangles.len());
        let mut header = self.header.clone();
        header.resize(STL_HEADER_LEN, b' ');
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for t in &self.triangles {
            for c in t.normal.iter().chain(t.vertices.iter().flatten()) {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.extend_from_slice(&t.attribute.to_le_bytes());
        }
        out
    }

    fn to_ascii(&self) -> String {
        let name = String::from_utf8_lossy(&self.header).trim().to_string();
        let mut s = String::new();
        let _ = writeln!(s, "solid {name}");
        for t in &self.triangles {
            let [a, b, c] = t.normal;
            let _ = writeln!(s, "  facet normal {a:e} {b:e} {c:e}");
            let _ = writeln!(s, "    outer loop");
            for v in &t.vertices {
                let _ = writeln!(s, "      vertex {:e} {:e} {:e}", v[0], v[1], v[2]);
            }
            let _ = writeln!(s, "    endloop");
            let _ = writeln!(s, "  endfacet");
        }
        let _ = writeln!(s, "endsolid {name}");
        s
    }

    /// Read either flavour. A payload whose length matches its binary
    /// triangle count is binary even if it starts with `solid`.
    pub fn parse(bytes: &[u8]) -> Result<StlDocument> {
        if bytes.len() >= STL_HEADER_LEN + 4 {
            let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
            if count.checked_mul(STL_TRIANGLE_LEN).map(|n| n + STL_HEADER_LEN + 4) == Some(bytes.len()) {
                return Ok(parse_binary(bytes, count));
            }
        }
        if bytes.trim_ascii_start().starts_with(b"solid") {
            return parse_ascii(bytes);
        }
        if bytes.len() < STL_HEADER_LEN + 4 {
            return Err(Error::parse("stl", format!("{} bytes is shorter than a binary STL header", bytes.len())));
        }
        let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        Err(Error::parse(
            "stl",
            format!(
                "binary STL declares {count} triangles but carries {} payload bytes",
                bytes.len() - STL_HEADER_LEN - 4
            ),
        ))
    }

    /// Indexed mesh in millimeters; vertices with identical coordinates are
    /// shared.
    pub fn to_mesh(&self) -> Mesh {
        let mut ids: HashMap<[u32; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(self.triangles.len());
        for t in &self.triangles {
            let tri = t.vertices.map(|v| {
                let key = v.map(|c| if c == 0.0 { 0 } else { c.to_bits() });
                *ids.entry(key).or_insert_with(|| {
                    vertices.push(Point3::new(v[0] as f64, v[1] as f64, v[2] as f64));
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(tri);
        }
        Mesh::new(vertices, triangles)
    }

    /// Signed volume of the triangles, in mm³.
    pub fn volume_mm3(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.vertices.map(|v| Point3::new(v[0] as f64, v[1] as f64, v[2] as f64));
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn parse_binary(bytes: &[u8], count: usize) -> StlDocument {
    let mut triangles = Vec::with_capacity(count);
    for i in 0..count {
        let base = STL_HEADER_LEN + 4 + i * STL_TRIANGLE_LEN;
        let f = |k: usize| f32_at(bytes, base + 4 * k);
        triangles.push(StlTriangle {
            normal: [f(0), f(1), f(2)],
            vertices: [[f(3), f(4), f(5)], [f(6), f(7), f(8)], [f(9), f(10), f(11)]],
            attribute: u16::from_le_bytes([bytes[base + 48], bytes[base + 49]]),
        });
    }
    StlDocument {
        format: StlFormat::Binary,
        header: bytes[..STL_HEADER_LEN].to_vec(),
        triangles,
    }
}

fn parse_ascii(bytes: &[u8]) -> Result<StlDocument> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("stl", format!("ASCII STL is not UTF-8: {e}")))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let bad = |line: usize, msg: &str| Error::parse(format!("line {line}"), msg.to_string());
    let (first, head) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let name = head
        .strip_prefix("solid")
        .ok_or_else(|| bad(first, "expected `solid`"))?
        .trim()
        .to_string();
    let floats = |line: usize, s: &str, n: usize| -> Result<Vec<f32>> {
        let v: Vec<f32> = s
            .split_whitespace()
            .map(|x| x.parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(line, &format!("bad number: {e}")))?;
        if v.len() != n {
            return Err(bad(line, &format!("expected {n} numbers")));
        }
        Ok(v)
    };
    let mut triangles = Vec::new();
    loop {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, "missing `endsolid`"))?;
        if l.starts_with("endsolid") {
            break;
        }
        let normal = floats(ln, l.strip_prefix("facet normal").ok_or_else(|| bad(ln, "expected `facet normal`"))?, 3)?;
        let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated facet"))?;
        if l != "outer loop" {
            return Err(bad(ln, "expected `outer loop`"));
        }
        let mut vertices = [[0f32; 3]; 3];
        for v in &mut vertices {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated facet"))?;
            let c = floats(ln, l.strip_prefix("vertex").ok_or_else(|| bad(ln, "expected `vertex`"))?, 3)?;
            *v = [c[0], c[1], c[2]];
        }
        for expect in ["endloop", "endfacet"] {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "truncated facet"))?;
            if l != expect {
                return Err(bad(ln, &format!("expected `{expect}`")));
            }
        }
        triangles.push(StlTriangle {
            normal: [normal[0], normal[1], normal[2]],
            vertices,
            attribute: 0,
        });
    }
    Ok(StlDocument {
        format: StlFormat::Ascii,
        header: name.into_bytes(),
        triangles,
    })
}
