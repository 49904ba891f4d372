//! Case configuration: benchmark presets, the plain-text case format, and
//! derived diagnostics (probes, Von Mises stress, pressure oscillation).

mod parse;

pub use parse::{parse_case, serialize_case};

use crate::error::{Result, SolidynError};
use crate::fem::{
    apply_dirichlet, assemble_steady_linear, dirichlet_values, BcKind, BoundaryCondition, DofMap,
};
use crate::materials::{deviator, linear_dev_stress, Material, MaterialKind};
use crate::mesh::{generate_box_mesh, generate_cook_mesh, read_gmsh, Mesh};
use crate::solver::{
    advance_step, solve_linear_system, LinearSolverConfig, Scheme, SolverConfig, State, StepReport,
};
use crate::vms::{tau_field, StabilizationParams};
use nalgebra::{Matrix3, Vector3};

pub const PRESET_NAMES: [&str; 7] = [
    "cook_static",
    "cook_transient",
    "upsetting",
    "csm1",
    "csm2",
    "csm3",
    "bending_beam_3d",
];

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Cook { n: usize, scale: f64 },
    Box {
        extents: Vec<f64>,
        subdivisions: Vec<usize>,
        translate: Vector3<f64>,
        rotate_axis: usize,
        rotate_deg: f64,
    },
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSpec {
    pub kind: MaterialKind,
    pub e: f64,
    pub nu: f64,
    pub rho0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBlock {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeField {
    Ux,
    Uy,
    Uz,
    P,
    VonMises,
}

impl ProbeField {
    pub fn label(&self) -> &'static str {
        match self {
            ProbeField::Ux => "u_x",
            ProbeField::Uy => "u_y",
            ProbeField::Uz => "u_z",
            ProbeField::P => "p",
            ProbeField::VonMises => "von_mises",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub name: String,
    pub point: Vector3<f64>,
    pub field: ProbeField,
}

/// Full declarative description of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub name: String,
    pub geometry: GeometrySpec,
    pub material: MaterialSpec,
    pub bcs: Vec<(String, BoundaryCondition)>,
    /// None: a single static solve.
    pub time: Option<TimeBlock>,
    pub initial_velocity_gradient: Option<Matrix3<f64>>,
    pub stabilization: StabilizationParams,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear: LinearSolverConfig,
    pub probes: Vec<ProbeSpec>,
    /// Emit a VTK snapshot every this many steps (0: only at the end).
    pub vtk_every: usize,
}

impl CaseConfig {
    fn base(name: &str, geometry: GeometrySpec, material: MaterialSpec) -> Self {
        Self {
            name: name.to_string(),
            geometry,
            material,
            bcs: Vec::new(),
            time: None,
            initial_velocity_gradient: None,
            stabilization: StabilizationParams::default(),
            newton_tol: 1e-8,
            newton_max_iter: 25,
            linear: LinearSolverConfig::Direct,
            probes: Vec::new(),
            vtk_every: 0,
        }
    }
}

fn dirichlet(tag: &str, value: Vector3<f64>, ramp: Option<f64>) -> BoundaryCondition {
    BoundaryCondition {
        tag: Some(tag.to_string()),
        kind: BcKind::Dirichlet { value, components: [true; 3] },
        ramp,
    }
}

/// The benchmark setups, fully populated.
pub fn preset(name: &str) -> Result<CaseConfig> {
    let cook_material = MaterialSpec {
        kind: MaterialKind::LinearElastic,
        e: 250.0,
        nu: 0.49995,
        rho0: 1.0,
    };
    let csm_material = |e: f64| MaterialSpec {
        kind: MaterialKind::StVenantKirchhoff,
        e,
        nu: 0.4,
        rho0: 1000.0,
    };
    let csm_beam = GeometrySpec::Box {
        extents: vec![0.35, 0.02],
        subdivisions: vec![35, 2],
        translate: Vector3::zeros(),
        rotate_axis: 2,
        rotate_deg: 0.0,
    };
    let gravity = BoundaryCondition {
        tag: None,
        kind: BcKind::BodyForce { value: Vector3::new(0.0, -2.0, 0.0), per_mass: true },
        ramp: None,
    };

    let mut config = match name {
        "cook_static" => {
            let mut c = CaseConfig::base(name, GeometrySpec::Cook { n: 16, scale: 1.0 }, cook_material);
            c.bcs.push(("clamp".into(), dirichlet("left", Vector3::zeros(), None)));
            c.bcs.push((
                "load".into(),
                BoundaryCondition {
                    tag: Some("right".into()),
                    kind: BcKind::Traction(Vector3::new(0.0, 6.25, 0.0)),
                    ramp: None,
                },
            ));
            c.probes.push(ProbeSpec {
                name: "tip".into(),
                point: Vector3::new(48.0, 60.0, 0.0),
                field: ProbeField::Uy,
            });
            c
        }
        "cook_transient" => {
            let mut c = preset("cook_static")?;
            c.name = name.into();
            c.geometry = GeometrySpec::Cook { n: 16, scale: 0.1 };
            c.time = Some(TimeBlock { dt: 0.005, t_end: 7.0, scheme: Scheme::Bdf2 });
            c.probes[0].point = Vector3::new(4.8, 6.0, 0.0);
            c
        }
        "upsetting" => {
            let mut c = CaseConfig::base(
                name,
                GeometrySpec::Box {
                    extents: vec![14.0, 14.0, 10.0],
                    subdivisions: vec![4, 4, 3],
                    translate: Vector3::zeros(),
                    rotate_axis: 2,
                    rotate_deg: 0.0,
                },
                MaterialSpec { kind: MaterialKind::LinearElastic, e: 2.0e5, nu: 0.4999, rho0: 1.0 },
            );
            c.bcs.push(("bottom".into(), dirichlet("zmin", Vector3::zeros(), None)));
            // Rigid plate: clamped horizontally, pressed to 7 % of the height.
            c.bcs.push(("plate".into(), dirichlet("zmax", Vector3::new(0.0, 0.0, -0.7), Some(1.0))));
            c.time = Some(TimeBlock { dt: 0.05, t_end: 1.0, scheme: Scheme::Bdf1 });
            c.probes.push(ProbeSpec {
                name: "plate_center".into(),
                point: Vector3::new(7.0, 7.0, 10.0),
                field: ProbeField::Uz,
            });
            c
        }
        "csm1" | "csm2" => {
            let e = if name == "csm1" { 1.4e6 } else { 5.6e6 };
            let mut c = CaseConfig::base(name, csm_beam.clone(), csm_material(e));
            c.bcs.push(("clamp".into(), dirichlet("xmin", Vector3::zeros(), None)));
            c.bcs.push(("gravity".into(), gravity.clone()));
            // Dissipative BDF1 march to the steady state.
            c.time = Some(TimeBlock { dt: 0.05, t_end: 10.0, scheme: Scheme::Bdf1 });
            c.probes.push(ProbeSpec {
                name: "tip".into(),
                point: Vector3::new(0.35, 0.01, 0.0),
                field: ProbeField::Uy,
            });
            c
        }
        "csm3" => {
            let mut c = preset("csm1")?;
            c.name = name.into();
            c.time = Some(TimeBlock { dt: 0.005, t_end: 4.0, scheme: Scheme::Bdf2 });
            c
        }
        "bending_beam_3d" => {
            let mut c = CaseConfig::base(
                name,
                GeometrySpec::Box {
                    extents: vec![1.0, 6.0, 1.0],
                    subdivisions: vec![2, 10, 2],
                    translate: Vector3::new(-0.5, 0.0, -0.5),
                    rotate_axis: 2,
                    rotate_deg: 5.2,
                },
                MaterialSpec {
                    kind: MaterialKind::NeoHookeanSimoTaylor,
                    e: 1.7e7,
                    nu: 0.499,
                    rho0: 1.1e3,
                },
            );
            c.bcs.push(("clamp".into(), dirichlet("ymin", Vector3::zeros(), None)));
            // v(x) = G x with dv_x/dy = 5/3 along the beam axis.
            let mut g = Matrix3::zeros();
            g[(0, 1)] = 5.0 / 3.0;
            c.initial_velocity_gradient = Some(g);
            c.time = Some(TimeBlock { dt: 0.01, t_end: 2.0, scheme: Scheme::Bdf2 });
            let a = 5.2f64.to_radians();
            c.probes.push(ProbeSpec {
                name: "tip".into(),
                point: Vector3::new(-6.0 * a.sin(), 6.0 * a.cos(), 0.0),
                field: ProbeField::Ux,
            });
            c
        }
        other => return Err(SolidynError::UnknownPreset(other.to_string())),
    };
    config.name = name.to_string();
    Ok(config)
}

/// sqrt(3/2 dev : dev) of a deviatoric Cauchy stress.
pub fn von_mises(dev_stress: &Matrix3<f64>) -> f64 {
    (1.5 * dev_stress.norm_squared()).sqrt()
}

/// Theta = |p - avg(p)| / max(|p|, 1e-30) with one-ring nodal averaging:
/// near zero for smooth fields, order one for checkerboard modes.
pub fn pressure_oscillation_indicator(mesh: &Mesh, p: &[f64]) -> f64 {
    assert_eq!(p.len(), mesh.n_nodes());
    let neighbors = mesh.node_neighbors();
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for (n, ring) in neighbors.iter().enumerate() {
        let avg: f64 = ring.iter().map(|&m| p[m]).sum::<f64>() / ring.len() as f64;
        diff2 += (p[n] - avg).powi(2);
        norm2 += p[n].powi(2);
    }
    diff2.sqrt() / norm2.sqrt().max(1e-30)
}

/// Per-element fields derived from the solution state.
#[derive(Debug, Clone, Copy)]
pub struct ElementFields {
    pub jacobian: f64,
    pub density: f64,
    pub von_mises: f64,
}

/// Deviatoric Cauchy stress of one element at the given total displacement.
pub fn element_dev_stress(
    mesh: &Mesh,
    material: &Material,
    u: &[Vector3<f64>],
    e: usize,
) -> Result<Matrix3<f64>> {
    let geom = mesh.reference_geometry(e)?;
    let nodes = mesh.element(e);
    let mut f = Matrix3::identity();
    for (a, &node) in nodes.iter().enumerate() {
        f += u[node] * geom.shape_gradients[a].transpose();
    }
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(SolidynError::KinematicInversion);
    }
    let mu = material.moduli.mu;
    Ok(match material.kind {
        MaterialKind::LinearElastic => {
            let grad = f - Matrix3::identity();
            linear_dev_stress(&grad, mu)
        }
        MaterialKind::NeoHookeanSimoTaylor => deviator(&(f * f.transpose())) * (mu * j.powf(-5.0 / 3.0)),
        MaterialKind::StVenantKirchhoff => {
            let e_gl = (f.transpose() * f - Matrix3::identity()) * 0.5;
            let s = Matrix3::identity() * (material.moduli.lambda() * e_gl.trace()) + e_gl * (2.0 * mu);
            deviator(&(f * s * f.transpose() / j))
        }
    })
}

pub fn element_fields(
    mesh: &Mesh,
    material: &Material,
    u: &[Vector3<f64>],
    e: usize,
) -> Result<ElementFields> {
    let geom = mesh.reference_geometry(e)?;
    let nodes = mesh.element(e);
    let mut f = Matrix3::identity();
    for (a, &node) in nodes.iter().enumerate() {
        f += u[node] * geom.shape_gradients[a].transpose();
    }
    let j = f.determinant();
    Ok(ElementFields {
        jacobian: j,
        density: material.rho0 / j,
        von_mises: von_mises(&element_dev_stress(mesh, material, u, e)?),
    })
}

/// A probe bound to its containing reference element (material-point
/// tracking: the interpolation weights never change).
#[derive(Debug, Clone)]
pub struct PlacedProbe {
    pub spec: ProbeSpec,
    element: usize,
    weights: [f64; 4],
}

impl PlacedProbe {
    pub fn place(mesh: &Mesh, spec: ProbeSpec) -> Result<Self> {
        let (element, weights) = mesh
            .locate_reference(spec.point)
            .ok_or(SolidynError::ProbeOutsideMesh([spec.point.x, spec.point.y, spec.point.z]))?;
        Ok(Self { spec, element, weights })
    }

    pub fn sample(&self, mesh: &Mesh, material: &Material, state: &State) -> Result<f64> {
        let nodes = mesh.element(self.element);
        let n = mesh.dim() + 1;
        let interp = |f: &dyn Fn(usize) -> f64| -> f64 {
            (0..n).map(|a| self.weights[a] * f(nodes[a])).sum()
        };
        Ok(match self.spec.field {
            ProbeField::Ux => interp(&|n| state.u[n].x),
            ProbeField::Uy => interp(&|n| state.u[n].y),
            ProbeField::Uz => interp(&|n| state.u[n].z),
            ProbeField::P => interp(&|n| state.p[n]),
            ProbeField::VonMises => {
                von_mises(&element_dev_stress(mesh, material, &state.u, self.element)?)
            }
        })
    }
}

/// A case made concrete: mesh built, material validated, probes placed.
pub struct LoadedCase {
    pub name: String,
    pub mesh: Mesh,
    pub material: Material,
    pub bcs: Vec<BoundaryCondition>,
    pub solver: SolverConfig,
    pub stab: StabilizationParams,
    pub t_end: Option<f64>,
    pub initial_velocity_gradient: Option<Matrix3<f64>>,
    pub probes: Vec<PlacedProbe>,
    pub vtk_every: usize,
}

impl CaseConfig {
    pub fn load(&self) -> Result<LoadedCase> {
        let mesh = match &self.geometry {
            GeometrySpec::Cook { n, scale } => {
                let mut m = generate_cook_mesh(*n)?;
                if *scale != 1.0 {
                    m.scale(*scale);
                }
                m
            }
            GeometrySpec::Box { extents, subdivisions, translate, rotate_axis, rotate_deg } => {
                let mut m = generate_box_mesh(extents, subdivisions)?;
                if translate.norm() != 0.0 {
                    m.translate(*translate);
                }
                if *rotate_deg != 0.0 {
                    m.rotate(*rotate_axis, *rotate_deg);
                }
                m
            }
            GeometrySpec::File(path) => read_gmsh(&std::fs::read_to_string(path)?)?,
        };
        let material =
            Material::new(self.material.kind, self.material.e, self.material.nu, self.material.rho0)?;
        for (name, bc) in &self.bcs {
            if let Some(tag) = &bc.tag {
                mesh.tag_id(tag).ok_or_else(|| {
                    SolidynError::Config(format!("bc '{name}' references unknown tag '{tag}'"))
                })?;
            }
        }
        let probes = self
            .probes
            .iter()
            .map(|spec| PlacedProbe::place(&mesh, spec.clone()))
            .collect::<Result<Vec<_>>>()?;
        let (dt, scheme) = match self.time {
            Some(tb) => (tb.dt, tb.scheme),
            None => (1.0, Scheme::Bdf1),
        };
        Ok(LoadedCase {
            name: self.name.clone(),
            mesh,
            material,
            bcs: self.bcs.iter().map(|(_, bc)| bc.clone()).collect(),
            solver: SolverConfig {
                scheme,
                dt,
                newton_tol: self.newton_tol,
                newton_max_iter: self.newton_max_iter,
                linear: self.linear.clone(),
            },
            stab: self.stabilization,
            t_end: self.time.map(|tb| tb.t_end),
            initial_velocity_gradient: self.initial_velocity_gradient,
            probes,
            vtk_every: self.vtk_every,
        })
    }
}

impl LoadedCase {
    /// Single static solve (linear elastic only).
    pub fn solve_static(&self) -> Result<State> {
        let tau = tau_field(
            &self.mesh,
            self.material.moduli.mu,
            self.material.rho0,
            self.solver.dt,
            &self.stab,
        )?;
        let mut system = assemble_steady_linear(&self.mesh, &self.material, &self.bcs, &tau, 0.0)?;
        let dofs = DofMap::new(&self.mesh);
        let constraints = dirichlet_values(&self.mesh, &dofs, &self.bcs, 0.0)?;
        apply_dirichlet(&mut system, &constraints);
        let x = solve_linear_system(&system, &self.solver.linear)?;
        let mut state = State::new(self.mesh.n_nodes());
        for node in 0..self.mesh.n_nodes() {
            for axis in 0..self.mesh.dim() {
                state.u[node][axis] = x[dofs.displacement(node, axis)];
            }
            state.p[node] = x[dofs.pressure(node)];
        }
        Ok(state)
    }

    /// Fresh initial state with the configured velocity seeding.
    pub fn initial_state(&self) -> State {
        let mut state = State::new(self.mesh.n_nodes());
        if let Some(g) = self.initial_velocity_gradient {
            let v: Vec<Vector3<f64>> =
                self.mesh.nodes_reference().iter().map(|x| g * x).collect();
            state.seed_velocity(&v, self.solver.dt);
        }
        state
    }

    /// Run the transient loop to t_end, invoking the callback after every
    /// accepted step.
    pub fn run<F>(&mut self, mut on_step: F) -> Result<State>
    where
        F: FnMut(&Mesh, &State, &StepReport) -> Result<()>,
    {
        let t_end = self.t_end.ok_or_else(|| {
            SolidynError::Config(format!("case '{}' has no time block", self.name))
        })?;
        let mut state = self.initial_state();
        let steps = (t_end / self.solver.dt).round().max(1.0) as usize;
        for _ in 0..steps {
            let report = advance_step(
                &mut self.mesh,
                &self.material,
                &mut state,
                &self.solver,
                &self.bcs,
                &self.stab,
            )?;
            on_step(&self.mesh, &state, &report)?;
        }
        Ok(state)
    }
}
