//! Command-line driver: run cases, run mesh-convergence studies, list the
//! built-in presets, and execute a quick verification suite.

use clap::{Parser, Subcommand};
use solidyn::cases::{
    parse_case, preset, pressure_oscillation_indicator, serialize_case, CaseConfig, GeometrySpec,
    PRESET_NAMES,
};
use solidyn::io::{write_probe_csv, write_vtk, ProbeSeries, VtkSnapshot};
use solidyn::solver::State;
use solidyn::{Result, SolidynError};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "solidyn",
    version,
    about = "Mixed displacement-pressure finite elements for nearly incompressible solid dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a case file (static solve or transient loop).
    Run {
        /// Preset name or path to a case file.
        case: String,
        /// Override a case key, e.g. --set geometry.n=8 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory for VTK and CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Suppress per-step progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Static mesh-convergence study over a list of mesh densities.
    Study {
        /// Preset with a parametric mesh density (the Cook cases).
        preset: String,
        /// Densities to run, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4, 8, 16, 32])]
        densities: Vec<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in presets with their full case text.
    Presets,
    /// Run the built-in end-to-end verification checks.
    Verify {
        #[arg(long)]
        quiet: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { case, set, out, quiet } => cmd_run(&case, &set, &out, quiet),
        Command::Study { preset, densities, set, out, quiet } => {
            cmd_study(&preset, &densities, &set, &out, quiet)
        }
        Command::Presets => cmd_presets(),
        Command::Verify { quiet } => cmd_verify(quiet),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

/// Stable contract: 0 success, 1 numerical failure, 2 usage or configuration.
fn exit_code(e: &SolidynError) -> i32 {
    match e {
        SolidynError::NewtonNonConvergence { .. }
        | SolidynError::LinearSolver(_)
        | SolidynError::MeshInversion { .. }
        | SolidynError::KinematicInversion
        | SolidynError::DegenerateElement { .. }
        | SolidynError::MissingHistory { .. }
        | SolidynError::NonMonotoneProbe => 1,
        _ => 2,
    }
}

fn load_config(case: &str, overrides: &[String]) -> Result<CaseConfig> {
    let mut config = if PRESET_NAMES.contains(&case) {
        preset(case)?
    } else {
        parse_case(&std::fs::read_to_string(case)?)?
    };
    for (i, entry) in overrides.iter().enumerate() {
        let Some((key, value)) = entry.split_once('=') else {
            return Err(SolidynError::Config(format!("--set expects KEY=VALUE, got '{entry}'")));
        };
        // Report override position as a pseudo line number.
        config.apply(key.trim(), value.trim(), i + 1)?;
    }
    Ok(config)
}

fn cmd_run(case: &str, overrides: &[String], out: &Path, quiet: bool) -> Result<()> {
    let started = Instant::now();
    let config = load_config(case, overrides)?;
    let mut loaded = config.load()?;
    std::fs::create_dir_all(out)?;
    let name = loaded.name.clone();

    let mut series: Vec<ProbeSeries> =
        loaded.probes.iter().map(ProbeSeries::for_probe).collect();
    let mut steps = 0usize;

    let final_state: State = if loaded.t_end.is_some() {
        let vtk_every = loaded.vtk_every;
        let out_dir = out.to_path_buf();
        let case_name = name.clone();
        let probes = loaded.probes.clone();
        let material = loaded.material;
        let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); probes.len()];
        let state = loaded.run(|mesh, state, report| {
            for (probe, rows) in probes.iter().zip(&mut rows) {
                rows.push((state.t, probe.sample(mesh, &material, state)?));
            }
            if vtk_every > 0 && state.step % vtk_every == 0 {
                let snap = VtkSnapshot::capture(mesh, &material, state)?;
                write_vtk(&snap, &out_dir.join(format!("{case_name}_{:06}.vtk", state.step)))?;
            }
            if !quiet {
                println!(
                    "step {:5}  t = {:9.4}  newton = {}{}",
                    state.step,
                    state.t,
                    report.newton_iterations,
                    if report.bdf1_fallback { "  (bdf1 startup)" } else { "" }
                );
            }
            Ok(())
        })?;
        // Replay the recorded history into the series buffers.
        for (s, r) in series.iter_mut().zip(rows) {
            for (t, v) in r {
                s.push(t, v)?;
            }
            steps = steps.max(s.rows().len());
        }
        state
    } else {
        let state = loaded.solve_static()?;
        for (probe, s) in loaded.probes.iter().zip(&mut series) {
            s.push(0.0, probe.sample(&loaded.mesh, &loaded.material, &state)?)?;
        }
        state
    };

    let snap = if loaded.t_end.is_some() {
        VtkSnapshot::capture(&loaded.mesh, &loaded.material, &final_state)?
    } else {
        // Static solve does not move the mesh; render the deformed shape.
        let mut mesh = loaded.mesh.clone();
        mesh.move_mesh(&final_state.u)?;
        VtkSnapshot::capture(&mesh, &loaded.material, &final_state)?
    };
    let vtk_path = out.join(format!("{name}_final.vtk"));
    write_vtk(&snap, &vtk_path)?;
    let mut paths = vec![vtk_path.display().to_string()];
    for (probe, s) in loaded.probes.iter().zip(&series) {
        let path = out.join(format!("{name}_{}.csv", probe.spec.name));
        write_probe_csv(s, &path)?;
        paths.push(path.display().to_string());
    }

    if !quiet {
        println!("case:        {name}");
        println!("steps:       {}", if loaded.t_end.is_some() { steps } else { 1 });
        println!("wall time:   {:.2} s", started.elapsed().as_secs_f64());
        for (probe, s) in loaded.probes.iter().zip(&series) {
            if let Some(&(t, v)) = s.rows().last() {
                println!(
                    "probe {:12} {} = {v:.8e}  (t = {t})",
                    probe.spec.name, probe.spec.field.label()
                );
            }
        }
        for p in &paths {
            println!("wrote:       {p}");
        }
    }
    Ok(())
}

fn cmd_study(
    preset_name: &str,
    densities: &[usize],
    overrides: &[String],
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let mut densities: Vec<usize> = densities.to_vec();
    densities.sort_unstable();
    densities.dedup();
    if densities.is_empty() {
        return Err(SolidynError::Config("study needs at least one density".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for &n in &densities {
        let mut config = load_config(preset_name, overrides)?;
        match &mut config.geometry {
            GeometrySpec::Cook { n: density, .. } => *density = n,
            _ => {
                return Err(SolidynError::Config(format!(
                    "preset '{preset_name}' has no parametric mesh density"
                )))
            }
        }
        config.time = None; // the study solves the static problem
        let loaded = config.load()?;
        let state = loaded.solve_static()?;
        let tip = loaded.probes[0].sample(&loaded.mesh, &loaded.material, &state)?;
        let theta = pressure_oscillation_indicator(&loaded.mesh, &state.p);
        if !quiet {
            println!("n = {n:4}  tip = {tip:.8}  theta = {theta:.4e}");
        }
        rows.push((n, tip, theta));
    }
    let mut csv = String::from("density,tip,theta\n");
    for (n, tip, theta) in &rows {
        csv.push_str(&format!("{n},{tip:?},{theta:?}\n"));
    }
    let path = out.join(format!("{preset_name}_study.csv"));
    std::fs::write(&path, csv)?;
    if rows.len() >= 3 {
        let last = &rows[rows.len() - 3..];
        let (e1, e2) = ((last[1].1 - last[0].1).abs(), (last[2].1 - last[1].1).abs());
        if e2 > 0.0 {
            let order = (e1 / e2).log2();
            if !quiet {
                println!("observed self-convergence order: {order:.2}");
            }
        }
    }
    if !quiet {
        println!("wrote: {}", path.display());
    }
    Ok(())
}

fn cmd_presets() -> Result<()> {
    for name in PRESET_NAMES {
        println!("# ---- {name} ----");
        print!("{}", serialize_case(&preset(name)?));
        println!();
    }
    Ok(())
}

fn cmd_verify(quiet: bool) -> Result<()> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures += 1;
        }
        if !quiet || !ok {
            println!("{}  {name}", if ok { "PASS" } else { "FAIL" });
        }
    };

    for name in PRESET_NAMES {
        let loaded = preset(name).and_then(|c| c.load());
        check(&format!("preset {name} loads"), loaded.is_ok());
    }

    let tip = (|| -> Result<f64> {
        let mut config = preset("cook_static")?;
        config.geometry = GeometrySpec::Cook { n: 8, scale: 1.0 };
        let loaded = config.load()?;
        let state = loaded.solve_static()?;
        loaded.probes[0].sample(&loaded.mesh, &loaded.material, &state)
    })();
    check(
        "static bending deflection in the expected range",
        matches!(tip, Ok(v) if v > 4.0 && v < 10.0),
    );

    let run_short = |steps: usize| -> Result<Vec<f64>> {
        let mut config = preset("upsetting")?;
        if let Some(tb) = &mut config.time {
            tb.t_end = tb.dt * steps as f64;
        }
        let mut loaded = config.load()?;
        let state = loaded.run(|_, _, _| Ok(()))?;
        Ok(state.u.iter().map(|u| u.z).collect())
    };
    let a = run_short(3);
    let b = run_short(3);
    check(
        "short transient run is deterministic",
        matches!((&a, &b), (Ok(x), Ok(y)) if x == y),
    );
    check(
        "compression run moves the loaded face downward",
        matches!(&a, Ok(u) if u.iter().cloned().fold(f64::INFINITY, f64::min) < -0.05),
    );

    let round_trip_ok = PRESET_NAMES.iter().all(|name| {
        preset(name)
            .map(|c| parse_case(&serialize_case(&c)).map(|r| r == c).unwrap_or(false))
            .unwrap_or(false)
    });
    check("case files round-trip through the serializer", round_trip_ok);

    if failures > 0 {
        return Err(SolidynError::Config(format!("{failures} verification check(s) failed")));
    }
    if !quiet {
        println!("all verification checks passed");
    }
    Ok(())
}
