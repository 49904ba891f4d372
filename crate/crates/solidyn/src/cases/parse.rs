//! Line-oriented `section.key = value` case files.
//!
//! Strings are double-quoted, vectors are parenthesized tuples, `#` starts a
//! comment. `case.preset` expands a built-in case; keys after it override
//! individual fields. Unknown keys are hard errors so typos cannot silently
//! fall back to defaults.

use super::{preset, CaseConfig, GeometrySpec, MaterialSpec, ProbeField, ProbeSpec, TimeBlock};
use crate::error::{Result, SolidynError};
use crate::fem::{BcKind, BoundaryCondition};
use crate::materials::MaterialKind;
use crate::solver::{LinearSolverConfig, Scheme};
use crate::vms::StabilizationModel;
use nalgebra::{Matrix3, Vector3};

fn err(line: usize, message: impl Into<String>) -> SolidynError {
    SolidynError::CaseParse { line, message: message.into() }
}

pub fn parse_case(text: &str) -> Result<CaseConfig> {
    let mut config = CaseConfig::base(
        "unnamed",
        GeometrySpec::Box {
            extents: vec![1.0, 1.0],
            subdivisions: vec![1, 1],
            translate: Vector3::zeros(),
            rotate_axis: 2,
            rotate_deg: 0.0,
        },
        MaterialSpec { kind: MaterialKind::LinearElastic, e: 1.0, nu: 0.3, rho0: 1.0 },
    );
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = strip_comment(raw);
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(err(line, format!("expected `key = value`, got '{stripped}'")));
        };
        config.apply(key.trim(), value.trim(), line)?;
    }
    Ok(config)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_string(value: &str, line: usize) -> Result<String> {
    let v = value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        Ok(v[1..v.len() - 1].to_string())
    } else {
        Err(err(line, format!("expected a quoted string, got '{v}'")))
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value.trim().parse().map_err(|_| err(line, format!("expected a number, got '{value}'")))
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value.trim().parse().map_err(|_| err(line, format!("expected an integer, got '{value}'")))
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(err(line, format!("expected true/false, got '{other}'"))),
    }
}

fn tuple_items(value: &str, line: usize) -> Result<Vec<&str>> {
    let v = value.trim();
    if !(v.starts_with('(') && v.ends_with(')')) {
        return Err(err(line, format!("expected a parenthesized tuple, got '{v}'")));
    }
    Ok(v[1..v.len() - 1].split(',').map(str::trim).collect())
}

fn parse_f64_tuple(value: &str, line: usize) -> Result<Vec<f64>> {
    tuple_items(value, line)?.iter().map(|s| parse_f64(s, line)).collect()
}

fn parse_vector3(value: &str, line: usize) -> Result<Vector3<f64>> {
    let items = parse_f64_tuple(value, line)?;
    if items.len() != 3 {
        return Err(err(line, format!("expected 3 components, got {}", items.len())));
    }
    Ok(Vector3::new(items[0], items[1], items[2]))
}

impl CaseConfig {
    /// Shared setter behind both the file parser and command-line overrides.
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["case", "name"] => self.name = parse_string(value, line)?,
            ["case", "preset"] => *self = preset(&parse_string(value, line)?)?,
            ["geometry", rest] => self.apply_geometry(rest, value, line)?,
            ["material", "kind"] => {
                self.material.kind = match parse_string(value, line)?.as_str() {
                    "linear_elastic" => MaterialKind::LinearElastic,
                    "neo_hookean" => MaterialKind::NeoHookeanSimoTaylor,
                    "svk" => MaterialKind::StVenantKirchhoff,
                    other => return Err(err(line, format!("unknown material kind '{other}'"))),
                }
            }
            ["material", "e"] => self.material.e = parse_f64(value, line)?,
            ["material", "nu"] => self.material.nu = parse_f64(value, line)?,
            ["material", "rho0"] => self.material.rho0 = parse_f64(value, line)?,
            ["bc", name, rest] => self.apply_bc(name, rest, value, line)?,
            ["time", "dt"] => self.time_block(line)?.dt = parse_f64(value, line)?,
            ["time", "t_end"] => self.time_block(line)?.t_end = parse_f64(value, line)?,
            ["time", "scheme"] => {
                self.time_block(line)?.scheme = match parse_string(value, line)?.as_str() {
                    "bdf1" => Scheme::Bdf1,
                    "bdf2" => Scheme::Bdf2,
                    other => return Err(err(line, format!("unknown scheme '{other}'"))),
                }
            }
            ["time", "initial_velocity_gradient"] => {
                let items = parse_f64_tuple(value, line)?;
                if items.len() != 9 {
                    return Err(err(line, format!("expected 9 entries, got {}", items.len())));
                }
                self.initial_velocity_gradient = Some(Matrix3::from_row_slice(&items));
            }
            ["stabilization", "alpha"] => self.stabilization.alpha = parse_f64(value, line)?,
            ["stabilization", "model"] => {
                self.stabilization.model = match parse_string(value, line)?.as_str() {
                    "static" => StabilizationModel::Static,
                    "dynamic" => StabilizationModel::Dynamic,
                    other => return Err(err(line, format!("unknown stabilization model '{other}'"))),
                }
            }
            ["newton", "tol"] => self.newton_tol = parse_f64(value, line)?,
            ["newton", "max_iter"] => self.newton_max_iter = parse_usize(value, line)?,
            ["linear", "kind"] => {
                self.linear = match parse_string(value, line)?.as_str() {
                    "direct" => LinearSolverConfig::Direct,
                    "iterative" => {
                        LinearSolverConfig::Iterative { tol: 1e-8, max_iter: 2000, restart: 60 }
                    }
                    other => return Err(err(line, format!("unknown linear solver '{other}'"))),
                }
            }
            ["linear", sub @ ("tol" | "max_iter" | "restart")] => {
                let LinearSolverConfig::Iterative { tol, max_iter, restart } = &mut self.linear
                else {
                    return Err(err(line, "set linear.kind = \"iterative\" before its options"));
                };
                match *sub {
                    "tol" => *tol = parse_f64(value, line)?,
                    "max_iter" => *max_iter = parse_usize(value, line)?,
                    _ => *restart = parse_usize(value, line)?,
                }
            }
            ["output", "vtk_every"] => self.vtk_every = parse_usize(value, line)?,
            ["output", "probe", name, rest] => self.apply_probe(name, rest, value, line)?,
            _ => return Err(err(line, format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn apply_geometry(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        if key == "kind" {
            self.geometry = match parse_string(value, line)?.as_str() {
                "cook" => GeometrySpec::Cook { n: 16, scale: 1.0 },
                "box" => GeometrySpec::Box {
                    extents: vec![1.0, 1.0],
                    subdivisions: vec![1, 1],
                    translate: Vector3::zeros(),
                    rotate_axis: 2,
                    rotate_deg: 0.0,
                },
                "file" => GeometrySpec::File(String::new()),
                other => return Err(err(line, format!("unknown geometry kind '{other}'"))),
            };
            return Ok(());
        }
        match (&mut self.geometry, key) {
            (GeometrySpec::Cook { n, .. }, "n") => *n = parse_usize(value, line)?,
            (GeometrySpec::Cook { scale, .. }, "scale") => *scale = parse_f64(value, line)?,
            (GeometrySpec::Box { extents, .. }, "extents") => {
                *extents = parse_f64_tuple(value, line)?
            }
            (GeometrySpec::Box { subdivisions, .. }, "subdivisions") => {
                *subdivisions = tuple_items(value, line)?
                    .iter()
                    .map(|s| parse_usize(s, line))
                    .collect::<Result<_>>()?
            }
            (GeometrySpec::Box { translate, .. }, "translate") => {
                *translate = parse_vector3(value, line)?
            }
            (GeometrySpec::Box { rotate_axis, .. }, "rotate_axis") => {
                *rotate_axis = parse_usize(value, line)?
            }
            (GeometrySpec::Box { rotate_deg, .. }, "rotate_deg") => {
                *rotate_deg = parse_f64(value, line)?
            }
            (GeometrySpec::File(path), "path") => *path = parse_string(value, line)?,
            _ => {
                return Err(err(
                    line,
                    format!("geometry key '{key}' does not apply to the selected kind"),
                ))
            }
        }
        Ok(())
    }

    fn apply_bc(&mut self, name: &str, key: &str, value: &str, line: usize) -> Result<()> {
        if key == "kind" {
            let kind = match parse_string(value, line)?.as_str() {
                "dirichlet" => {
                    BcKind::Dirichlet { value: Vector3::zeros(), components: [true; 3] }
                }
                "traction" => BcKind::Traction(Vector3::zeros()),
                "body_force" => BcKind::BodyForce { value: Vector3::zeros(), per_mass: false },
                other => return Err(err(line, format!("unknown bc kind '{other}'"))),
            };
            let bc = BoundaryCondition { tag: None, kind, ramp: None };
            match self.bcs.iter_mut().find(|(n, _)| n == name) {
                Some(entry) => entry.1 = bc,
                None => self.bcs.push((name.to_string(), bc)),
            }
            return Ok(());
        }
        let bc = &mut self
            .bcs
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| err(line, format!("set bc.{name}.kind before its options")))?
            .1;
        match key {
            "tag" => bc.tag = Some(parse_string(value, line)?),
            "ramp" => bc.ramp = Some(parse_f64(value, line)?),
            "value" => {
                let v = parse_vector3(value, line)?;
                match &mut bc.kind {
                    BcKind::Dirichlet { value, .. } => *value = v,
                    BcKind::Traction(value) => *value = v,
                    BcKind::BodyForce { value, .. } => *value = v,
                }
            }
            "components" => {
                let BcKind::Dirichlet { components, .. } = &mut bc.kind else {
                    return Err(err(line, "components only applies to dirichlet conditions"));
                };
                let items = tuple_items(value, line)?;
                if items.len() != 3 {
                    return Err(err(line, format!("expected 3 flags, got {}", items.len())));
                }
                for (c, item) in components.iter_mut().zip(items) {
                    *c = parse_bool(item, line)?;
                }
            }
            "per_mass" => {
                let BcKind::BodyForce { per_mass, .. } = &mut bc.kind else {
                    return Err(err(line, "per_mass only applies to body forces"));
                };
                *per_mass = parse_bool(value, line)?;
            }
            other => return Err(err(line, format!("unknown bc key '{other}'"))),
        }
        Ok(())
    }

    fn apply_probe(&mut self, name: &str, key: &str, value: &str, line: usize) -> Result<()> {
        if self.probes.iter().all(|p| p.name != name) {
            self.probes.push(ProbeSpec {
                name: name.to_string(),
                point: Vector3::zeros(),
                field: ProbeField::P,
            });
        }
        let probe = self.probes.iter_mut().find(|p| p.name == name).unwrap();
        match key {
            "point" => probe.point = parse_vector3(value, line)?,
            "field" => {
                probe.field = match parse_string(value, line)?.as_str() {
                    "u_x" => ProbeField::Ux,
                    "u_y" => ProbeField::Uy,
                    "u_z" => ProbeField::Uz,
                    "p" => ProbeField::P,
                    "von_mises" => ProbeField::VonMises,
                    other => return Err(err(line, format!("unknown probe field '{other}'"))),
                }
            }
            other => return Err(err(line, format!("unknown probe key '{other}'"))),
        }
        Ok(())
    }

    fn time_block(&mut self, _line: usize) -> Result<&mut TimeBlock> {
        Ok(self
            .time
            .get_or_insert(TimeBlock { dt: 0.01, t_end: 1.0, scheme: Scheme::Bdf2 }))
    }
}

fn fmt_tuple(items: &[f64]) -> String {
    let inner: Vec<String> = items.iter().map(|v| format!("{v:?}")).collect();
    format!("({})", inner.join(", "))
}

/// Canonical text form; `parse_case(serialize_case(c))` reproduces `c`.
pub fn serialize_case(config: &CaseConfig) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("case.name = \"{}\"", config.name));
    match &config.geometry {
        GeometrySpec::Cook { n, scale } => {
            line("geometry.kind = \"cook\"".into());
            line(format!("geometry.n = {n}"));
            line(format!("geometry.scale = {scale:?}"));
        }
        GeometrySpec::Box { extents, subdivisions, translate, rotate_axis, rotate_deg } => {
            line("geometry.kind = \"box\"".into());
            line(format!("geometry.extents = {}", fmt_tuple(extents)));
            let subs: Vec<String> = subdivisions.iter().map(|s| s.to_string()).collect();
            line(format!("geometry.subdivisions = ({})", subs.join(", ")));
            line(format!(
                "geometry.translate = {}",
                fmt_tuple(&[translate.x, translate.y, translate.z])
            ));
            line(format!("geometry.rotate_axis = {rotate_axis}"));
            line(format!("geometry.rotate_deg = {rotate_deg:?}"));
        }
        GeometrySpec::File(path) => {
            line("geometry.kind = \"file\"".into());
            line(format!("geometry.path = \"{path}\""));
        }
    }
    let kind = match config.material.kind {
        MaterialKind::LinearElastic => "linear_elastic",
        MaterialKind::NeoHookeanSimoTaylor => "neo_hookean",
        MaterialKind::StVenantKirchhoff => "svk",
    };
    line(format!("material.kind = \"{kind}\""));
    line(format!("material.e = {:?}", config.material.e));
    line(format!("material.nu = {:?}", config.material.nu));
    line(format!("material.rho0 = {:?}", config.material.rho0));
    for (name, bc) in &config.bcs {
        let (kind, value) = match &bc.kind {
            BcKind::Dirichlet { value, .. } => ("dirichlet", value),
            BcKind::Traction(value) => ("traction", value),
            BcKind::BodyForce { value, .. } => ("body_force", value),
        };
        line(format!("bc.{name}.kind = \"{kind}\""));
        if let Some(tag) = &bc.tag {
            line(format!("bc.{name}.tag = \"{tag}\""));
        }
        line(format!("bc.{name}.value = {}", fmt_tuple(&[value.x, value.y, value.z])));
        if let BcKind::Dirichlet { components, .. } = &bc.kind {
            let flags: Vec<&str> =
                components.iter().map(|&c| if c { "true" } else { "false" }).collect();
            line(format!("bc.{name}.components = ({})", flags.join(", ")));
        }
        if let BcKind::BodyForce { per_mass, .. } = &bc.kind {
            line(format!("bc.{name}.per_mass = {per_mass}"));
        }
        if let Some(ramp) = bc.ramp {
            line(format!("bc.{name}.ramp = {ramp:?}"));
        }
    }
    if let Some(tb) = &config.time {
        line(format!("time.dt = {:?}", tb.dt));
        line(format!("time.t_end = {:?}", tb.t_end));
        let scheme = match tb.scheme {
            Scheme::Bdf1 => "bdf1",
            Scheme::Bdf2 => "bdf2",
        };
        line(format!("time.scheme = \"{scheme}\""));
    }
    if let Some(g) = &config.initial_velocity_gradient {
        let rows: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| g[(i, j)])).collect();
        line(format!("time.initial_velocity_gradient = {}", fmt_tuple(&rows)));
    }
    line(format!("stabilization.alpha = {:?}", config.stabilization.alpha));
    let model = match config.stabilization.model {
        StabilizationModel::Static => "static",
        StabilizationModel::Dynamic => "dynamic",
    };
    line(format!("stabilization.model = \"{model}\""));
    line(format!("newton.tol = {:?}", config.newton_tol));
    line(format!("newton.max_iter = {}", config.newton_max_iter));
    match &config.linear {
        LinearSolverConfig::Direct => line("linear.kind = \"direct\"".into()),
        LinearSolverConfig::Iterative { tol, max_iter, restart } => {
            line("linear.kind = \"iterative\"".into());
            line(format!("linear.tol = {tol:?}"));
            line(format!("linear.max_iter = {max_iter}"));
            line(format!("linear.restart = {restart}"));
        }
    }
    line(format!("output.vtk_every = {}", config.vtk_every));
    for probe in &config.probes {
        line(format!(
            "output.probe.{}.point = {}",
            probe.name,
            fmt_tuple(&[probe.point.x, probe.point.y, probe.point.z])
        ));
        line(format!("output.probe.{}.field = \"{}\"", probe.name, probe.field.label()));
    }
    out
}
