//! Wavefront OBJ reading and writing.
//!
//! Polygons are fan-triangulated on load. Texture coordinates and normals play
//! no part in physics but are kept so a mesh can be written back out with them.

use std::fmt::Write as _;
use std::path::Path;

use super::{TriangleMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjExtras {
    pub texcoords: Vec<[f64; 2]>,
    pub normals: Vec<Vec3>,
    /// Per triangle corner: (texcoord index, normal index).
    pub corners: Vec<[(Option<usize>, Option<usize>); 3]>,
}

impl ObjExtras {
    fn is_empty(&self) -> bool {
        self.texcoords.is_empty() && self.normals.is_empty()
    }
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_obj(&text).map_err(|e| match e {
        Error::Parse { path: p, message } => Error::Parse {
            path: format!("{}:{p}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut extras = ObjExtras::default();
    let mut triangles = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let err = |message: String| Error::Parse {
            path: format!("line {}", lineno + 1),
            message,
        };
        let floats = |it: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
            it.map(|s| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad number `{s}`: {e}")))
            })
            .collect()
        };
        match tag {
            "v" => {
                let f = floats(it)?;
                if f.len() < 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(f[0], f[1], f[2]));
            }
            "vt" => {
                let f = floats(it)?;
                extras.texcoords.push([
                    f.first().copied().unwrap_or(0.0),
                    f.get(1).copied().unwrap_or(0.0),
                ]);
            }
            "vn" => {
                let f = floats(it)?;
                if f.len() < 3 {
                    return Err(err("normal needs 3 components".into()));
                }
                extras.normals.push(Vec3::new(f[0], f[1], f[2]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let resolve = |s: Option<&str>, count: usize| -> Result<Option<usize>> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 =
                                    s.parse().map_err(|_| err(format!("bad index `{s}`")))?;
                                let idx = if i > 0 { i - 1 } else { count as i64 + i };
                                if idx < 0 || idx as usize >= count {
                                    return Err(err(format!("index {i} out of range")));
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let v = resolve(parts.next(), vertices.len())?
                        .ok_or_else(|| err("face corner without vertex index".into()))?;
                    let vt = resolve(parts.next(), extras.texcoords.len())?;
                    let vn = resolve(parts.next(), extras.normals.len())?;
                    corners.push((v, vt, vn));
                }
                if corners.len() < 3 {
                    return Err(err("face needs at least 3 corners".into()));
                }
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    triangles.push(tri.map(|c| c.0));
                    extras.corners.push(tri.map(|c| (c.1, c.2)));
                }
            }
            _ => {}
        }
    }

    let mesh = TriangleMesh::new(vertices, triangles)?;
    Ok(if extras.is_empty() {
        mesh
    } else {
        mesh.with_extras(extras)
    })
}

pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    let extras = mesh.extras();
    if let Some(x) = extras {
        for t in &x.texcoords {
            let _ = writeln!(out, "vt {} {}", t[0], t[1]);
        }
        for n in &x.normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        out.push('f');
        for (k, &v) in tri.iter().enumerate() {
            let corner = extras.and_then(|x| x.corners.get(ti)).map(|c| c[k]);
            match corner {
                Some((Some(vt), Some(vn))) => {
                    let _ = write!(out, " {}/{}/{}", v + 1, vt + 1, vn + 1);
                }
                Some((Some(vt), None)) => {
                    let _ = write!(out, " {}/{}", v + 1, vt + 1);
                }
                Some((None, Some(vn))) => {
                    let _ = write!(out, " {}//{}", v + 1, vn + 1);
                }
                _ => {
                    let _ = write!(out, " {}", v + 1);
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_obj_string(mesh))?;
    Ok(())
}
