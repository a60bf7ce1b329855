//! Mesh ingestion: STL (ASCII or binary) and Wavefront OBJ. Only vertex
//! positions and triangular faces are kept; OBJ faces with more than three
//! vertices are fan-triangulated and every other record is ignored.

use std::fs::File;
use std::io::{BufReader, Cursor, Read};
use std::path::Path;

use super::{GeometryError, Result, TriMesh, Vec3};

pub fn load_mesh(path: &Path, material: usize) -> Result<TriMesh> {
    let err = |reason: String| GeometryError::MeshLoad {
        path: path.display().to_string(),
        reason,
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| err(e.to_string()))?;
    match ext.as_str() {
        "stl" => parse_stl(&bytes, material),
        "obj" => parse_obj(&bytes, material),
        other => Err(err(format!("unsupported mesh extension {other:?}"))),
    }
    .map_err(|e| match e {
        GeometryError::MeshLoad { reason, .. } => err(reason),
        other => err(other.to_string()),
    })
}

pub fn parse_stl(bytes: &[u8], material: usize) -> Result<TriMesh> {
    let mesh = stl_io::read_stl(&mut Cursor::new(bytes)).map_err(|e| GeometryError::MeshLoad {
        path: "<stl>".into(),
        reason: e.to_string(),
    })?;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let triangles = mesh
        .faces
        .iter()
        .map(|f| f.vertices.map(|i| i as u32))
        .collect();
    TriMesh::new(vertices, triangles, material)
}

pub fn parse_obj(bytes: &[u8], material: usize) -> Result<TriMesh> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(&mut Cursor::new(bytes), &opts, |_| {
        Err(tobj::LoadError::OpenFileFailed)
    })
    .map_err(|e| GeometryError::MeshLoad {
        path: "<obj>".into(),
        reason: e.to_string(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for model in &models {
        let base = vertices.len() as u32;
        vertices.extend(model.mesh.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        triangles.extend(
            model
                .mesh
                .indices
                .chunks_exact(3)
                .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
        );
    }
    TriMesh::new(vertices, triangles, material)
}
