//! Simplicial meshes: storage, benchmark generators, geometric queries and
//! updated-Lagrangian mesh motion.
//!
//! Coordinates are kept as 3-vectors in both 2D and 3D; planar meshes live in
//! the z = 0 plane. Elements are triangles (3 nodes) or tetrahedra (4 nodes),
//! boundary facets are edges or triangles carrying a string tag.

mod gmsh;

pub use gmsh::read_gmsh;

use crate::error::{Result, SolidynError};
use nalgebra::{Matrix2, Matrix3, Vector3};

/// Sentinel for the unused connectivity slot of planar elements.
const UNUSED: usize = usize::MAX;

/// Tagged boundary facet: an edge in 2D, a triangle in 3D.
#[derive(Debug, Clone)]
pub struct Facet {
    nodes: [usize; 3],
    tag: u32,
}

impl Facet {
    pub fn nodes(&self, dim: usize) -> &[usize] {
        &self.nodes[..dim]
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }
}

/// Simplicial mesh with current and reference node coordinates.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    nodes_current: Vec<Vector3<f64>>,
    nodes_reference: Vec<Vector3<f64>>,
    elements: Vec<[usize; 4]>,
    boundary_facets: Vec<Facet>,
    tags: Vec<String>,
}

/// Constant P1 data of one element, evaluated on a given configuration.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Gradient of shape function `a` (rows sum to zero).
    pub shape_gradients: [Vector3<f64>; 4],
    pub volume: f64,
    /// Characteristic length (d! * volume)^(1/d).
    pub h: f64,
    pub centroid: Vector3<f64>,
}

impl Mesh {
    fn new(
        dim: usize,
        nodes: Vec<Vector3<f64>>,
        mut elements: Vec<[usize; 4]>,
        boundary_facets: Vec<Facet>,
        tags: Vec<String>,
    ) -> Result<Self> {
        // Fix orientation, then reject anything degenerate.
        for (e, elem) in elements.iter_mut().enumerate() {
            let v = signed_volume(dim, &nodes, elem);
            if v < 0.0 {
                elem.swap(0, 1);
            }
            let v = signed_volume(dim, &nodes, elem);
            if !(v > 0.0) || !v.is_finite() {
                return Err(SolidynError::DegenerateElement { element: e });
            }
        }
        Ok(Self {
            dim,
            nodes_reference: nodes.clone(),
            nodes_current: nodes,
            elements,
            boundary_facets,
            tags,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_current.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Connectivity of element `e` (3 node ids in 2D, 4 in 3D).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn node_current(&self, n: usize) -> Vector3<f64> {
        self.nodes_current[n]
    }

    pub fn node_reference(&self, n: usize) -> Vector3<f64> {
        self.nodes_reference[n]
    }

    pub fn nodes_current(&self) -> &[Vector3<f64>] {
        &self.nodes_current
    }

    pub fn nodes_reference(&self) -> &[Vector3<f64>] {
        &self.nodes_reference
    }

    pub fn boundary_facets(&self) -> &[Facet] {
        &self.boundary_facets
    }

    pub fn tag_name(&self, tag: u32) -> &str {
        &self.tags[tag as usize]
    }

    pub fn tag_id(&self, name: &str) -> Option<u32> {
        self.tags.iter().position(|t| t == name).map(|i| i as u32)
    }

    pub fn facets_with_tag(&self, name: &str) -> impl Iterator<Item = &Facet> + '_ {
        let id = self.tag_id(name);
        self.boundary_facets
            .iter()
            .filter(move |f| Some(f.tag) == id)
    }

    /// Nodes touched by any facet carrying `name`.
    pub fn nodes_with_tag(&self, name: &str) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .facets_with_tag(name)
            .flat_map(|f| f.nodes(self.dim).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// P1 geometry of element `e` in the current configuration.
    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        geometry(self.dim, &self.nodes_current, &self.elements[e])
            .ok_or(SolidynError::InvertedElement { element: e })
    }

    /// P1 geometry of element `e` in the reference configuration.
    pub fn reference_geometry(&self, e: usize) -> Result<ElementGeometry> {
        geometry(self.dim, &self.nodes_reference, &self.elements[e])
            .ok_or(SolidynError::InvertedElement { element: e })
    }

    /// Ratio of current to reference element volume (det F of the affine map).
    pub fn jacobian_to_reference(&self, e: usize) -> f64 {
        signed_volume(self.dim, &self.nodes_current, &self.elements[e])
            / signed_volume(self.dim, &self.nodes_reference, &self.elements[e])
    }

    /// Relocate the current nodes by `delta_u`. All element volumes must stay
    /// positive, otherwise nothing is changed and the offending element is
    /// reported so the caller can reject the step.
    pub fn move_mesh(&mut self, delta_u: &[Vector3<f64>]) -> Result<()> {
        assert_eq!(delta_u.len(), self.n_nodes());
        let moved: Vec<Vector3<f64>> = self
            .nodes_current
            .iter()
            .zip(delta_u)
            .map(|(x, d)| x + d)
            .collect();
        for (e, elem) in self.elements.iter().enumerate() {
            if signed_volume(self.dim, &moved, elem) <= 0.0 {
                return Err(SolidynError::MeshInversion { element: e });
            }
        }
        self.nodes_current = moved;
        Ok(())
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| signed_volume(self.dim, &self.nodes_current, &self.elements[e]))
            .sum()
    }

    pub fn total_reference_volume(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| signed_volume(self.dim, &self.nodes_reference, &self.elements[e]))
            .sum()
    }

    /// Uniform scaling of both configurations about the origin.
    pub fn scale(&mut self, factor: f64) {
        for x in self.nodes_current.iter_mut().chain(&mut self.nodes_reference) {
            *x *= factor;
        }
    }

    pub fn translate(&mut self, shift: Vector3<f64>) {
        for x in self.nodes_current.iter_mut().chain(&mut self.nodes_reference) {
            *x += shift;
        }
    }

    /// Rigid rotation of both configurations about a coordinate axis through
    /// the origin. `axis` is 0, 1 or 2; `angle_deg` in degrees.
    pub fn rotate(&mut self, axis: usize, angle_deg: f64) {
        let a = angle_deg.to_radians();
        let (s, c) = a.sin_cos();
        let r = match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            _ => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        };
        for x in self.nodes_current.iter_mut().chain(&mut self.nodes_reference) {
            *x = r * *x;
        }
    }

    /// Locate the point in the reference configuration; returns the containing
    /// element and its barycentric coordinates.
    pub fn locate_reference(&self, p: Vector3<f64>) -> Option<(usize, [f64; 4])> {
        let tol = -1e-10;
        for e in 0..self.n_elements() {
            if let Some(b) = barycentric(self.dim, &self.nodes_reference, &self.elements[e], p) {
                if b.iter().take(self.dim + 1).all(|&w| w >= tol) {
                    return Some((e, b));
                }
            }
        }
        None
    }

    /// One-ring node adjacency (each list includes the node itself), sorted.
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in 0..self.n_elements() {
            let nodes = self.element(e);
            for &a in nodes {
                for &b in nodes {
                    adj[a].push(b);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

fn signed_volume(dim: usize, nodes: &[Vector3<f64>], elem: &[usize; 4]) -> f64 {
    let a = nodes[elem[0]];
    if dim == 2 {
        let e1 = nodes[elem[1]] - a;
        let e2 = nodes[elem[2]] - a;
        0.5 * (e1.x * e2.y - e1.y * e2.x)
    } else {
        let e1 = nodes[elem[1]] - a;
        let e2 = nodes[elem[2]] - a;
        let e3 = nodes[elem[3]] - a;
        e1.dot(&e2.cross(&e3)) / 6.0
    }
}

fn geometry(dim: usize, nodes: &[Vector3<f64>], elem: &[usize; 4]) -> Option<ElementGeometry> {
    let volume = signed_volume(dim, nodes, elem);
    if !(volume > 0.0) {
        return None;
    }
    let mut grads = [Vector3::zeros(); 4];
    let a = nodes[elem[0]];
    if dim == 2 {
        let e1 = nodes[elem[1]] - a;
        let e2 = nodes[elem[2]] - a;
        let d = Matrix2::new(e1.x, e2.x, e1.y, e2.y);
        let dinv = d.try_inverse()?;
        // Rows of D^-1 are the gradients of the barycentric coordinates 1, 2.
        grads[1] = Vector3::new(dinv[(0, 0)], dinv[(0, 1)], 0.0);
        grads[2] = Vector3::new(dinv[(1, 0)], dinv[(1, 1)], 0.0);
        grads[0] = -grads[1] - grads[2];
    } else {
        let e1 = nodes[elem[1]] - a;
        let e2 = nodes[elem[2]] - a;
        let e3 = nodes[elem[3]] - a;
        let d = Matrix3::from_columns(&[e1, e2, e3]);
        let dinv = d.try_inverse()?;
        for i in 0..3 {
            grads[i + 1] = Vector3::new(dinv[(i, 0)], dinv[(i, 1)], dinv[(i, 2)]);
        }
        grads[0] = -grads[1] - grads[2] - grads[3];
    }
    let fact = if dim == 2 { 2.0 } else { 6.0 };
    let h = (fact * volume).powf(1.0 / dim as f64);
    let mut centroid = Vector3::zeros();
    for &n in &elem[..dim + 1] {
        centroid += nodes[n];
    }
    centroid /= (dim + 1) as f64;
    Some(ElementGeometry {
        shape_gradients: grads,
        volume,
        h,
        centroid,
    })
}

fn barycentric(
    dim: usize,
    nodes: &[Vector3<f64>],
    elem: &[usize; 4],
    p: Vector3<f64>,
) -> Option<[f64; 4]> {
    let g = geometry(dim, nodes, elem)?;
    let mut b = [0.0; 4];
    for a in 0..=dim {
        // lambda_a is affine with gradient shape_gradients[a] and value 1 at node a.
        let xa = nodes[elem[a]];
        b[a] = 1.0 + g.shape_gradients[a].dot(&(p - xa));
    }
    Some(b)
}

/// Structured triangulation of the Cook membrane trapezoid with corners
/// (0,0), (48,44), (48,60), (0,44): (n+1)^2 nodes, 2 n^2 triangles. Boundary
/// tags: "left", "right", "top", "bottom".
pub fn generate_cook_mesh(n: usize) -> Result<Mesh> {
    assert!(n >= 1);
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let x = 48.0 * s;
        let y_bottom = 44.0 * s;
        let y_top = 44.0 + 16.0 * s;
        for j in 0..=n {
            let t = j as f64 / n as f64;
            nodes.push(Vector3::new(x, y_bottom + t * (y_top - y_bottom), 0.0));
        }
    }
    let mut elements = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            elements.push([a, b, c, UNUSED]);
            elements.push([a, c, d, UNUSED]);
        }
    }
    let tags = vec![
        "left".to_string(),
        "right".to_string(),
        "top".to_string(),
        "bottom".to_string(),
    ];
    let mut facets = Vec::new();
    for j in 0..n {
        facets.push(Facet { nodes: [idx(0, j), idx(0, j + 1), UNUSED], tag: 0 });
        facets.push(Facet { nodes: [idx(n, j), idx(n, j + 1), UNUSED], tag: 1 });
    }
    for i in 0..n {
        facets.push(Facet { nodes: [idx(i, n), idx(i + 1, n), UNUSED], tag: 2 });
        facets.push(Facet { nodes: [idx(i, 0), idx(i + 1, 0), UNUSED], tag: 3 });
    }
    Mesh::new(2, nodes, elements, facets, tags)
}

/// Structured simplicial box mesh. In 2D (`extents.len() == 2`) each grid cell
/// is split into 2 triangles; in 3D into 6 tetrahedra (Kuhn split, conforming
/// across cells). Face tags "xmin","xmax","ymin","ymax" and in 3D also
/// "zmin","zmax".
pub fn generate_box_mesh(extents: &[f64], subdivisions: &[usize]) -> Result<Mesh> {
    assert_eq!(extents.len(), subdivisions.len());
    assert!(extents.iter().all(|&e| e > 0.0));
    assert!(subdivisions.iter().all(|&s| s > 0));
    match extents.len() {
        2 => box_mesh_2d(extents, subdivisions),
        3 => box_mesh_3d(extents, subdivisions),
        d => panic!("unsupported dimension {d}"),
    }
}

fn box_mesh_2d(ext: &[f64], sub: &[usize]) -> Result<Mesh> {
    let (nx, ny) = (sub[0], sub[1]);
    let idx = |i: usize, j: usize| i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            nodes.push(Vector3::new(
                ext[0] * i as f64 / nx as f64,
                ext[1] * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            elements.push([a, b, c, UNUSED]);
            elements.push([a, c, d, UNUSED]);
        }
    }
    let tags: Vec<String> = ["xmin", "xmax", "ymin", "ymax"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut facets = Vec::new();
    for j in 0..ny {
        facets.push(Facet { nodes: [idx(0, j), idx(0, j + 1), UNUSED], tag: 0 });
        facets.push(Facet { nodes: [idx(nx, j), idx(nx, j + 1), UNUSED], tag: 1 });
    }
    for i in 0..nx {
        facets.push(Facet { nodes: [idx(i, 0), idx(i + 1, 0), UNUSED], tag: 2 });
        facets.push(Facet { nodes: [idx(i, ny), idx(i + 1, ny), UNUSED], tag: 3 });
    }
    Mesh::new(2, nodes, elements, facets, tags)
}

/// Kuhn split: the 6 tetrahedra follow the monotone paths from cell corner
/// (0,0,0) to (1,1,1), one per permutation of the axes.
const KUHN_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn box_mesh_3d(ext: &[f64], sub: &[usize]) -> Result<Mesh> {
    let (nx, ny, nz) = (sub[0], sub[1], sub[2]);
    let idx = |i: usize, j: usize, k: usize| (i * (ny + 1) + j) * (nz + 1) + k;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            for k in 0..=nz {
                nodes.push(Vector3::new(
                    ext[0] * i as f64 / nx as f64,
                    ext[1] * j as f64 / ny as f64,
                    ext[2] * k as f64 / nz as f64,
                ));
            }
        }
    }
    let mut elements = Vec::with_capacity(6 * nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                for perm in &KUHN_PERMS {
                    let mut corner = [i, j, k];
                    let mut tet = [0usize; 4];
                    tet[0] = idx(corner[0], corner[1], corner[2]);
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] += 1;
                        tet[step + 1] = idx(corner[0], corner[1], corner[2]);
                    }
                    elements.push(tet);
                }
            }
        }
    }
    let tags: Vec<String> = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    // Boundary triangles: each quad face splits along the diagonal implied by
    // the Kuhn split (the diagonal through the cell's min and max corners).
    let mut facets = Vec::new();
    for j in 0..ny {
        for k in 0..nz {
            push_quad(&mut facets, idx(0, j, k), idx(0, j + 1, k), idx(0, j + 1, k + 1), idx(0, j, k + 1), 0);
            push_quad(&mut facets, idx(nx, j, k), idx(nx, j + 1, k), idx(nx, j + 1, k + 1), idx(nx, j, k + 1), 1);
        }
    }
    for i in 0..nx {
        for k in 0..nz {
            push_quad(&mut facets, idx(i, 0, k), idx(i + 1, 0, k), idx(i + 1, 0, k + 1), idx(i, 0, k + 1), 2);
            push_quad(&mut facets, idx(i, ny, k), idx(i + 1, ny, k), idx(i + 1, ny, k + 1), idx(i, ny, k + 1), 3);
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            push_quad(&mut facets, idx(i, j, 0), idx(i + 1, j, 0), idx(i + 1, j + 1, 0), idx(i, j + 1, 0), 4);
            push_quad(&mut facets, idx(i, j, nz), idx(i + 1, j, nz), idx(i + 1, j + 1, nz), idx(i, j + 1, nz), 5);
        }
    }
    Mesh::new(3, nodes, elements, facets, tags)
}

fn push_quad(facets: &mut Vec<Facet>, a: usize, b: usize, c: usize, d: usize, tag: u32) {
    // Split along the a-c diagonal: matches the Kuhn tetrahedra, whose faces
    // on the boundary always contain the cell diagonal corners.
    facets.push(Facet { nodes: [a, b, c], tag });
    facets.push(Facet { nodes: [a, c, d], tag });
}
