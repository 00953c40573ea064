use std::fmt::Write;

use super::IoError;
use crate::geometry::{IndexedMesh, Normalization, Triangle};

/// Wavefront text with 1-based face indices. Coordinates use the shortest
/// decimal form that parses back to the same value.
pub fn to_obj(mesh: &IndexedMesh, norm: &Normalization) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.len() * 24);
    for v in &mesh.vertices {
        let g = norm.to_global(v);
        writeln!(s, "v {} {} {}", g[0], g[1], g[2]).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "f {} {} {}", t.0[0] + 1, t.0[1] + 1, t.0[2] + 1).unwrap();
    }
    s
}

pub fn parse_obj(text: &str) -> Result<IndexedMesh, IoError> {
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| IoError::Parse {
            at: format!("line {}", i + 1),
            msg,
        };
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    let t = toks.next().ok_or_else(|| err("vertex needs 3 coordinates".into()))?;
                    *c = t.parse().map_err(|_| err(format!("bad coordinate '{t}'")))?;
                }
                verts.push(p);
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(err(format!("expected a triangle, got {} indices", idx.len())));
                }
                let mut t = [0u32; 3];
                for (k, s) in idx.iter().enumerate() {
                    let head = s.split('/').next().unwrap_or("");
                    let v: i64 = head.parse().map_err(|_| err(format!("bad index '{s}'")))?;
                    let abs = if v < 0 { verts.len() as i64 + v } else { v - 1 };
                    if abs < 0 || abs >= verts.len() as i64 {
                        return Err(err(format!("index {v} out of range")));
                    }
                    t[k] = abs as u32;
                }
                tris.push(Triangle(t));
            }
            _ => {}
        }
    }
    IndexedMesh::from_triangles(verts, tris).map_err(|msg| IoError::Parse {
        at: "faces".into(),
        msg,
    })
}
