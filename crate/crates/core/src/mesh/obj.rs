//! Wavefront OBJ subset: `v`, `vt`, triangle `f a/b c/d e/f`, `#` comments,
//! and `# side front|back` markers that tag the faces that follow.

use std::fmt::Write as _;
use std::path::Path;

use super::{Face, Side, TexturedMesh};
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};
use crate::scalar::Real;

pub fn load_obj<T: Real>(path: impl AsRef<Path>) -> Result<TexturedMesh<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

pub fn save_obj<T: Real>(mesh: &TexturedMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}

/// Parses OBJ text. `name` is used in diagnostics.
pub fn parse_obj<T: Real>(text: &str, name: &str) -> Result<TexturedMesh<T>> {
    let err = |line: usize, msg: String| Error::Parse { path: name.to_string(), line, msg };
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    let mut tags = Vec::new();
    let mut current_side: Option<Side> = None;
    let mut any_side = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            if it.next() == Some("side") {
                current_side = match it.next() {
                    Some("front") => Some(Side::Front),
                    Some("back") => Some(Side::Back),
                    other => return Err(err(lineno, format!("bad side tag {other:?}"))),
                };
                any_side = true;
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let directive = it.next().unwrap_or_default();
        let args: Vec<&str> = it.collect();
        let num = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(T::lit)
                .ok_or_else(|| err(lineno, format!("invalid number `{s}`")))
        };
        match directive {
            "v" => {
                if args.len() != 3 {
                    return Err(err(lineno, format!("`v` needs 3 coordinates, got {}", args.len())));
                }
                vertices.push(Vec3::new(num(args[0])?, num(args[1])?, num(args[2])?));
            }
            "vt" => {
                if args.len() != 2 {
                    return Err(err(lineno, format!("`vt` needs 2 coordinates, got {}", args.len())));
                }
                uvs.push(Vec2::new(num(args[0])?, num(args[1])?));
            }
            "f" => {
                if args.len() != 3 {
                    return Err(err(lineno, format!("only triangles supported, got {} corners", args.len())));
                }
                let mut v = [0usize; 3];
                let mut t = [0usize; 3];
                for (k, corner) in args.iter().enumerate() {
                    let (a, b) =
                        corner.split_once('/').ok_or_else(|| err(lineno, format!("corner `{corner}` must be v/vt")))?;
                    let parse_idx = |s: &str, len: usize, what: &str| -> Result<usize> {
                        let idx: usize = s.parse().map_err(|_| err(lineno, format!("invalid {what} index `{s}`")))?;
                        if idx == 0 || idx > len {
                            return Err(err(lineno, format!("{what} index {idx} out of range (have {len})")));
                        }
                        Ok(idx - 1)
                    };
                    v[k] = parse_idx(a, vertices.len(), "vertex")?;
                    t[k] = parse_idx(b, uvs.len(), "vt")?;
                }
                faces.push(Face { v, t });
                tags.push(current_side);
            }
            other => return Err(err(lineno, format!("unsupported directive `{other}`"))),
        }
    }

    let side_tags = if any_side {
        let mut out = Vec::with_capacity(tags.len());
        for (fi, t) in tags.into_iter().enumerate() {
            out.push(t.ok_or(Error::MissingSideTag(fi))?);
        }
        Some(out)
    } else {
        None
    };
    TexturedMesh::new(vertices, uvs, faces, side_tags)
}

/// Serializes with shortest round-trip float formatting, so reading the
/// output back reproduces every coordinate bit for bit.
pub fn write_obj<T: Real>(mesh: &TexturedMesh<T>) -> String {
    let mut s = String::with_capacity(64 * (mesh.vertices.len() + mesh.faces.len()));
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.uvs {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    let mut side: Option<Side> = None;
    for (fi, f) in mesh.faces.iter().enumerate() {
        if let Some(tag) = mesh.side(fi) {
            if side != Some(tag) {
                let _ = writeln!(s, "# side {}", tag.as_str());
                side = Some(tag);
            }
        }
        let _ =
            writeln!(s, "f {}/{} {}/{} {}/{}", f.v[0] + 1, f.t[0] + 1, f.v[1] + 1, f.t[1] + 1, f.v[2] + 1, f.t[2] + 1);
    }
    s
}
