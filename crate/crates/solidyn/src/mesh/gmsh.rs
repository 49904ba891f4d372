//! Reader for the Gmsh MSH 2.2 ASCII format, restricted to 2-node lines,
//! 3-node triangles, 4-node tetrahedra and physical-group tags.

use super::{Facet, Mesh, UNUSED};
use crate::error::{Result, SolidynError};
use nalgebra::Vector3;
use std::collections::HashMap;

struct RawElement {
    elem_type: i32,
    physical: i32,
    nodes: Vec<usize>,
}

pub fn read_gmsh(text: &str) -> Result<Mesh> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut physical_names: HashMap<(i32, i32), String> = HashMap::new();
    let mut node_ids: Vec<i64> = Vec::new();
    let mut coords: Vec<Vector3<f64>> = Vec::new();
    let mut raw_elements: Vec<RawElement> = Vec::new();

    let err = |line: usize, msg: &str| SolidynError::GmshParse {
        line: line + 1,
        message: msg.to_string(),
    };

    while i < lines.len() {
        let line = lines[i].trim();
        match line {
            "" => i += 1,
            "$MeshFormat" => {
                let header = lines.get(i + 1).ok_or_else(|| err(i, "truncated $MeshFormat"))?;
                let version = header
                    .split_whitespace()
                    .next()
                    .ok_or_else(|| err(i + 1, "empty format line"))?;
                if !version.starts_with("2.2") {
                    return Err(err(i + 1, &format!("unsupported MSH version {version}")));
                }
                i = expect_end(&lines, i + 2, "$EndMeshFormat").map_err(|m| err(i, &m))?;
            }
            "$PhysicalNames" => {
                let n: usize = parse_count(&lines, i + 1).map_err(|m| err(i + 1, &m))?;
                for k in 0..n {
                    let l = lines.get(i + 2 + k).ok_or_else(|| err(i, "truncated $PhysicalNames"))?;
                    let mut it = l.split_whitespace();
                    let dim: i32 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let id: i32 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let name = l
                        .splitn(3, char::is_whitespace)
                        .nth(2)
                        .unwrap_or("")
                        .trim()
                        .trim_matches('"')
                        .to_string();
                    physical_names.insert((dim, id), name);
                }
                i = expect_end(&lines, i + 2 + n, "$EndPhysicalNames").map_err(|m| err(i, &m))?;
            }
            "$Nodes" => {
                let n: usize = parse_count(&lines, i + 1).map_err(|m| err(i + 1, &m))?;
                for k in 0..n {
                    let l = lines.get(i + 2 + k).ok_or_else(|| err(i, "truncated $Nodes"))?;
                    let mut it = l.split_whitespace();
                    let id: i64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let x: f64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let y: f64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let z: f64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    node_ids.push(id);
                    coords.push(Vector3::new(x, y, z));
                }
                i = expect_end(&lines, i + 2 + n, "$EndNodes").map_err(|m| err(i, &m))?;
            }
            "$Elements" => {
                let n: usize = parse_count(&lines, i + 1).map_err(|m| err(i + 1, &m))?;
                for k in 0..n {
                    let l = lines.get(i + 2 + k).ok_or_else(|| err(i, "truncated $Elements"))?;
                    let mut it = l.split_whitespace();
                    let _id: i64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let elem_type: i32 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let n_nodes = match elem_type {
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        15 => 1, // isolated points are read and dropped
                        t => return Err(SolidynError::GmshUnsupportedElement { elem_type: t }),
                    };
                    let n_tags: usize = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                    let mut physical = 0i32;
                    for t in 0..n_tags {
                        let tag: i32 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                        if t == 0 {
                            physical = tag;
                        }
                    }
                    let mut nodes = Vec::with_capacity(n_nodes);
                    for _ in 0..n_nodes {
                        let id: i64 = next_num(&mut it).map_err(|m| err(i + 2 + k, &m))?;
                        nodes.push(id as usize);
                    }
                    raw_elements.push(RawElement { elem_type, physical, nodes });
                }
                i = expect_end(&lines, i + 2 + n, "$EndElements").map_err(|m| err(i, &m))?;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                // Skip unknown sections wholesale.
                let end = format!("$End{}", &s[1..]);
                let mut j = i + 1;
                while j < lines.len() && lines[j].trim() != end {
                    j += 1;
                }
                if j == lines.len() {
                    return Err(err(i, &format!("unterminated section {s}")));
                }
                i = j + 1;
            }
            s => return Err(err(i, &format!("unexpected content '{s}'"))),
        }
    }

    if coords.is_empty() {
        return Err(SolidynError::GmshParse { line: 0, message: "no $Nodes section".into() });
    }

    let id_map: HashMap<i64, usize> = node_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let remap = |raw: &[usize]| -> Result<Vec<usize>> {
        raw.iter()
            .map(|&id| {
                id_map.get(&(id as i64)).copied().ok_or(SolidynError::GmshParse {
                    line: 0,
                    message: format!("element references unknown node {id}"),
                })
            })
            .collect()
    };

    let dim = if raw_elements.iter().any(|e| e.elem_type == 4) { 3 } else { 2 };

    let mut elements: Vec<[usize; 4]> = Vec::new();
    let mut facet_specs: Vec<(Vec<usize>, i32)> = Vec::new();
    for raw in &raw_elements {
        match (dim, raw.elem_type) {
            (2, 2) => {
                let n = remap(&raw.nodes)?;
                elements.push([n[0], n[1], n[2], UNUSED]);
            }
            (3, 4) => {
                let n = remap(&raw.nodes)?;
                elements.push([n[0], n[1], n[2], n[3]]);
            }
            (2, 1) | (3, 2) => facet_specs.push((remap(&raw.nodes)?, raw.physical)),
            _ => {} // lines inside a 3D mesh, stray points: not boundary facets here
        }
    }

    if elements.is_empty() {
        return Err(SolidynError::GmshParse { line: 0, message: "no volume elements".into() });
    }

    // Tag table: physical names where available, otherwise the raw id.
    let mut tags: Vec<String> = Vec::new();
    let mut tag_of: HashMap<i32, u32> = HashMap::new();
    let mut facets = Vec::new();
    for (nodes, physical) in facet_specs {
        let tag = *tag_of.entry(physical).or_insert_with(|| {
            let name = physical_names
                .get(&(dim as i32 - 1, physical))
                .cloned()
                .unwrap_or_else(|| physical.to_string());
            tags.push(name);
            (tags.len() - 1) as u32
        });
        let f = if dim == 2 {
            [nodes[0], nodes[1], UNUSED]
        } else {
            [nodes[0], nodes[1], nodes[2]]
        };
        facets.push(Facet { nodes: f, tag });
    }

    let mesh = Mesh::new(dim, coords, elements, facets, tags)?;
    check_facets_on_boundary(&mesh)?;
    Ok(mesh)
}

/// Every boundary facet must be a face of exactly one element.
fn check_facets_on_boundary(mesh: &Mesh) -> Result<()> {
    let dim = mesh.dim();
    let mut face_count: HashMap<Vec<usize>, usize> = HashMap::new();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        for skip in 0..nodes.len() {
            let mut face: Vec<usize> = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &n)| n)
                .collect();
            face.sort_unstable();
            *face_count.entry(face).or_insert(0) += 1;
        }
    }
    for (fi, facet) in mesh.boundary_facets().iter().enumerate() {
        let mut key: Vec<usize> = facet.nodes(dim).to_vec();
        key.sort_unstable();
        match face_count.get(&key) {
            Some(1) => {}
            _ => {
                return Err(SolidynError::GmshParse {
                    line: 0,
                    message: format!("boundary facet {fi} is not a face of exactly one element"),
                })
            }
        }
    }
    Ok(())
}

fn expect_end(lines: &[&str], at: usize, marker: &str) -> std::result::Result<usize, String> {
    match lines.get(at) {
        Some(l) if l.trim() == marker => Ok(at + 1),
        _ => Err(format!("expected {marker}")),
    }
}

fn parse_count(lines: &[&str], at: usize) -> std::result::Result<usize, String> {
    lines
        .get(at)
        .ok_or_else(|| "missing count".to_string())?
        .trim()
        .parse()
        .map_err(|_| "invalid count".to_string())
}

fn next_num<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace<'_>,
) -> std::result::Result<T, String> {
    it.next()
        .ok_or_else(|| "missing field".to_string())?
        .parse()
        .map_err(|_| "invalid number".to_string())
}
