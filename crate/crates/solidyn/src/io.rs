//! Output plumbing: legacy ASCII VTK snapshots and CSV probe series.

use crate::cases::{element_fields, LoadedCase, PlacedProbe};
use crate::error::{Result, SolidynError};
use crate::materials::Material;
use crate::mesh::Mesh;
use crate::solver::State;
use nalgebra::Vector3;
use std::fmt::Write as _;
use std::path::Path;

/// Everything one VTK file needs, copied out of the running state so output
/// can overlap the next step.
#[derive(Debug, Clone)]
pub struct VtkSnapshot {
    pub time: f64,
    pub dim: usize,
    pub points: Vec<Vector3<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub displacement: Vec<Vector3<f64>>,
    pub pressure: Vec<f64>,
    pub von_mises: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub density: Vec<f64>,
}

impl VtkSnapshot {
    pub fn capture(mesh: &Mesh, material: &Material, state: &State) -> Result<Self> {
        let n_nodes = mesh.n_nodes();
        let mut von_mises_nodal = vec![0.0; n_nodes];
        let mut weight = vec![0.0; n_nodes];
        let mut jacobian = Vec::with_capacity(mesh.n_elements());
        let mut density = Vec::with_capacity(mesh.n_elements());
        let mut cells = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let fields = element_fields(mesh, material, &state.u, e)?;
            jacobian.push(fields.jacobian);
            density.push(fields.density);
            let nodes = mesh.element(e);
            // Volume-weighted nodal average of the element-constant stress.
            let v = mesh.reference_geometry(e)?.volume;
            for &n in nodes {
                von_mises_nodal[n] += v * fields.von_mises;
                weight[n] += v;
            }
            cells.push(nodes.to_vec());
        }
        for (s, w) in von_mises_nodal.iter_mut().zip(&weight) {
            if *w > 0.0 {
                *s /= w;
            }
        }
        Ok(Self {
            time: state.t,
            dim: mesh.dim(),
            points: mesh.nodes_current().to_vec(),
            cells,
            displacement: state.u.clone(),
            pressure: state.p.clone(),
            von_mises: von_mises_nodal,
            jacobian,
            density,
        })
    }

    pub fn render(&self) -> String {
        assert_eq!(self.displacement.len(), self.points.len());
        assert_eq!(self.pressure.len(), self.points.len());
        assert_eq!(self.jacobian.len(), self.cells.len());
        let mut out = String::new();
        let f = |v: f64| format!("{v:.16e}");
        out.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(out, "solidyn snapshot t = {}", f(self.time));
        out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(out, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", f(p.x), f(p.y), f(p.z));
        }
        let n_per_cell = self.dim + 1;
        let _ = writeln!(out, "CELLS {} {}", self.cells.len(), self.cells.len() * (n_per_cell + 1));
        for cell in &self.cells {
            out.push_str(&cell.len().to_string());
            for n in cell {
                let _ = write!(out, " {n}");
            }
            out.push('\n');
        }
        let cell_type = if self.dim == 2 { 5 } else { 10 };
        let _ = writeln!(out, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            let _ = writeln!(out, "{cell_type}");
        }
        let _ = writeln!(out, "POINT_DATA {}", self.points.len());
        out.push_str("VECTORS displacement double\n");
        for u in &self.displacement {
            let _ = writeln!(out, "{} {} {}", f(u.x), f(u.y), f(u.z));
        }
        out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for p in &self.pressure {
            let _ = writeln!(out, "{}", f(*p));
        }
        out.push_str("SCALARS von_mises double 1\nLOOKUP_TABLE default\n");
        for s in &self.von_mises {
            let _ = writeln!(out, "{}", f(*s));
        }
        let _ = writeln!(out, "CELL_DATA {}", self.cells.len());
        out.push_str("SCALARS J double 1\nLOOKUP_TABLE default\n");
        for j in &self.jacobian {
            let _ = writeln!(out, "{}", f(*j));
        }
        out.push_str("SCALARS density double 1\nLOOKUP_TABLE default\n");
        for r in &self.density {
            let _ = writeln!(out, "{}", f(*r));
        }
        out
    }
}

pub fn write_vtk(snapshot: &VtkSnapshot, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot.render())?;
    Ok(())
}

/// One probe's time history.
#[derive(Debug, Clone)]
pub struct ProbeSeries {
    pub field_label: String,
    pub point: Vector3<f64>,
    rows: Vec<(f64, f64)>,
}

impl ProbeSeries {
    pub fn new(field_label: &str, point: Vector3<f64>) -> Self {
        Self { field_label: field_label.to_string(), point, rows: Vec::new() }
    }

    pub fn for_probe(probe: &PlacedProbe) -> Self {
        Self::new(probe.spec.field.label(), probe.spec.point)
    }

    /// Append one row; `t` must strictly increase.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.rows.last() {
            if t <= last {
                return Err(SolidynError::NonMonotoneProbe);
            }
        }
        self.rows.push((t, value));
        Ok(())
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "t,{}@({:?},{:?},{:?})\n",
            self.field_label, self.point.x, self.point.y, self.point.z
        );
        for &(t, v) in &self.rows {
            let _ = writeln!(out, "{t:?},{v:?}");
        }
        out
    }

    /// Parse a file produced by `render` (header line plus rows).
    pub fn parse(text: &str) -> Result<Vec<(f64, f64)>> {
        let bad = |line: usize, msg: &str| SolidynError::CaseParse {
            line,
            message: format!("probe csv: {msg}"),
        };
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 {
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| bad(idx + 1, "missing comma"))?;
            rows.push((
                t.parse().map_err(|_| bad(idx + 1, "bad time"))?,
                v.parse().map_err(|_| bad(idx + 1, "bad value"))?,
            ));
        }
        Ok(rows)
    }
}

pub fn write_probe_csv(series: &ProbeSeries, path: &Path) -> Result<()> {
    std::fs::write(path, series.render())?;
    Ok(())
}

/// Sample every probe of a case into fresh rows.
pub fn sample_probes(case: &LoadedCase, state: &State) -> Result<Vec<f64>> {
    case.probes
        .iter()
        .map(|p| p.sample(&case.mesh, &case.material, state))
        .collect()
}
