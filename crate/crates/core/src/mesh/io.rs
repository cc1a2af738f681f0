use super::{MeshError, TriMesh};
use crate::se3::Vec3;
use std::fmt::Write as _;
use std::path::Path;

/// Reads an OBJ file (`v` and `f` records only), scaling coordinates by `scale`.
pub fn load_mesh(path: impl AsRef<Path>, scale: f64) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    let m = parse_obj(&text)?;
    Ok(if scale == 1.0 { m } else { m.scaled(scale) })
}

/// Parses OBJ text. Polygonal faces are fan-triangulated; `a/b/c` index forms
/// and negative (relative) indices are accepted.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        let mut tok = body.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .by_ref()
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::Parse {
                        line,
                        msg: format!("bad vertex coordinate: {e}"),
                    })?;
                if c.len() != 3 || c.iter().any(|x| !x.is_finite()) {
                    return Err(MeshError::Parse {
                        line,
                        msg: "vertex needs three finite coordinates".into(),
                    });
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = tok
                    .map(|s| {
                        s.split('/').next().unwrap_or("").parse::<i64>().map_err(|e| {
                            MeshError::Parse {
                                line,
                                msg: format!("bad face index '{s}': {e}"),
                            }
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        msg: "face needs at least three vertices".into(),
                    });
                }
                // Relative indices refer to vertices read so far.
                let resolved = idx
                    .into_iter()
                    .map(|i| if i < 0 { vertices.len() as i64 + i + 1 } else { i })
                    .collect();
                faces.push((line, resolved));
            }
            _ => {}
        }
    }
    let n = vertices.len();
    let mut triangles = Vec::new();
    for (line, f) in faces {
        for &i in &f {
            if i < 1 || i as usize > n {
                return Err(MeshError::IndexOutOfRange {
                    line,
                    index: i,
                    count: n,
                });
            }
        }
        let z: Vec<usize> = f.iter().map(|&i| i as usize - 1).collect();
        for k in 1..z.len() - 1 {
            triangles.push([z[0], z[k], z[k + 1]]);
        }
    }
    if triangles.is_empty() {
        return Err(MeshError::Empty);
    }
    TriMesh::new(vertices, triangles)
}

/// ASCII PLY dump of a mesh.
pub fn mesh_to_ply(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}
