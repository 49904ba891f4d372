//! Python bindings: case setup, static/transient solves, and diagnostics.

use nalgebra::Matrix3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use solidyn_core::cases::{
    parse_case, preset, pressure_oscillation_indicator, serialize_case, CaseConfig, PRESET_NAMES,
};
use solidyn_core::io::VtkSnapshot;
use solidyn_core::materials::compute_moduli;
use solidyn_core::solver::State;
use solidyn_core::SolidynError;
use std::collections::HashMap;

fn to_py_err(e: SolidynError) -> PyErr {
    match e {
        SolidynError::CaseParse { .. }
        | SolidynError::Config(_)
        | SolidynError::UnknownTag(_)
        | SolidynError::UnknownPreset(_)
        | SolidynError::MaterialRange(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Names of the built-in benchmark cases.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// Shear moduli pair (mu, bulk); bulk is None for nu = 0.5.
#[pyfunction]
fn moduli(e: f64, nu: f64) -> PyResult<(f64, Option<f64>)> {
    let m = compute_moduli(e, nu).map_err(to_py_err)?;
    let bulk = match m.bulk {
        solidyn_core::materials::Bulk::Finite(k) => Some(k),
        solidyn_core::materials::Bulk::Infinite => None,
    };
    Ok((m.mu, bulk))
}

/// Von Mises stress of a row-major 3x3 deviatoric stress tensor.
#[pyfunction]
fn von_mises(dev: [f64; 9]) -> f64 {
    solidyn_core::cases::von_mises(&Matrix3::from_row_slice(&dev))
}

#[pyclass]
struct Case {
    config: CaseConfig,
}

#[pyclass]
struct Solution {
    #[pyo3(get)]
    t: f64,
    #[pyo3(get)]
    steps: usize,
    #[pyo3(get)]
    displacement: Vec<(f64, f64, f64)>,
    #[pyo3(get)]
    pressure: Vec<f64>,
    /// Probe name -> list of (t, value) rows.
    #[pyo3(get)]
    probes: HashMap<String, Vec<(f64, f64)>>,
    #[pyo3(get)]
    pressure_oscillation: f64,
    vtk: String,
}

#[pymethods]
impl Solution {
    /// The final state as a legacy ASCII VTK file body.
    fn vtk(&self) -> &str {
        &self.vtk
    }
}

fn pack_solution(
    case: &solidyn_core::cases::LoadedCase,
    state: &State,
    steps: usize,
    probes: HashMap<String, Vec<(f64, f64)>>,
) -> PyResult<Solution> {
    let snapshot = VtkSnapshot::capture(&case.mesh, &case.material, state).map_err(to_py_err)?;
    Ok(Solution {
        t: state.t,
        steps,
        displacement: state.u.iter().map(|u| (u.x, u.y, u.z)).collect(),
        pressure: state.p.clone(),
        probes,
        pressure_oscillation: pressure_oscillation_indicator(&case.mesh, &state.p),
        vtk: snapshot.render(),
    })
}

#[pymethods]
impl Case {
    /// Build a case from a built-in preset name.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self { config: preset(name).map_err(to_py_err)? })
    }

    /// Parse the text form of a case file.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { config: parse_case(text).map_err(to_py_err)? })
    }

    /// Override one key, e.g. set("geometry.n", "8").
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.config.apply(key, value, 0).map_err(to_py_err)
    }

    fn serialize(&self) -> String {
        serialize_case(&self.config)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.config.name
    }

    #[getter]
    fn is_transient(&self) -> bool {
        self.config.time.is_some()
    }

    /// Single static solve (linear-elastic cases without a time block).
    fn solve_static(&self) -> PyResult<Solution> {
        let case = self.config.load().map_err(to_py_err)?;
        let state = case.solve_static().map_err(to_py_err)?;
        let mut probes = HashMap::new();
        for probe in &case.probes {
            let v = probe.sample(&case.mesh, &case.material, &state).map_err(to_py_err)?;
            probes.insert(probe.spec.name.clone(), vec![(0.0, v)]);
        }
        pack_solution(&case, &state, 1, probes)
    }

    /// Run the transient loop to t_end, recording every probe each step.
    fn run(&self) -> PyResult<Solution> {
        let mut case = self.config.load().map_err(to_py_err)?;
        let specs = case.probes.clone();
        let material = case.material;
        let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); specs.len()];
        let mut steps = 0usize;
        let state = case
            .run(|mesh, state, _| {
                for (probe, rows) in specs.iter().zip(&mut rows) {
                    rows.push((state.t, probe.sample(mesh, &material, state)?));
                }
                steps += 1;
                Ok(())
            })
            .map_err(to_py_err)?;
        let probes = specs
            .iter()
            .zip(rows)
            .map(|(p, r)| (p.spec.name.clone(), r))
            .collect();
        pack_solution(&case, &state, steps, probes)
    }

    /// Node positions of the (possibly transformed) reference mesh.
    fn reference_nodes(&self) -> PyResult<Vec<(f64, f64, f64)>> {
        let case = self.config.load().map_err(to_py_err)?;
        Ok(case.mesh.nodes_reference().iter().map(|p| (p.x, p.y, p.z)).collect())
    }
}

/// Pressure checkerboard indicator for an externally supplied nodal field.
#[pyfunction]
fn pressure_oscillation(case: &Case, p: Vec<f64>) -> PyResult<f64> {
    let loaded = case.config.load().map_err(to_py_err)?;
    if p.len() != loaded.mesh.n_nodes() {
        return Err(PyValueError::new_err(format!(
            "expected {} nodal values, got {}",
            loaded.mesh.n_nodes(),
            p.len()
        )));
    }
    Ok(pressure_oscillation_indicator(&loaded.mesh, &p))
}

#[pymodule]
fn solidyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Case>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(moduli, m)?)?;
    m.add_function(wrap_pyfunction!(von_mises, m)?)?;
    m.add_function(wrap_pyfunction!(pressure_oscillation, m)?)?;
    Ok(())
}
