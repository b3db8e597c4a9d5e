//! `sbm`: mesh, solve and measure shifted boundary elasticity problems on
//! implicit geometries.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use sbm_core::cases::Case;
use sbm_core::fem::field::{element_von_mises, evaluate};
use sbm_core::fem::NitscheVariant;
use sbm_core::inr::GradientCache;
use sbm_core::metrics::{
    gauss_point_direction_error, geometry_oracle, host_leaf, nmse_delta, soup_oracle,
    surface_error_integral,
};
use sbm_core::octree::mesh_geometry;
use sbm_core::pipeline::{
    bench_geometry, convergence_csv, convergence_study, load_geometry, solve_case, GeometrySource,
    LoadedGeometry, MetricReport, PhaseTimes, RunConfig, SolveOutcome,
};
use sbm_core::solver::{Preconditioner, SolverMethod};
use sbm_core::vtk::write_vtk;

#[derive(Parser, Debug)]
#[command(name = "sbm", version, about = "Shifted boundary linear elasticity on implicit geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// sphere | disk | ring | gyroid | icosphere | soup:PATH | inr:PATH
    #[arg(long, global = true)]
    geometry: Option<GeometrySource>,
    /// Ground-truth geometry for geom-metrics and surface errors.
    #[arg(long, global = true)]
    reference: Option<GeometrySource>,
    /// ring2d | icosphere | bunny | eiffel | gyroid | linear-patch
    #[arg(long, global = true)]
    case: Option<String>,
    #[arg(long, global = true)]
    base_level: Option<u8>,
    #[arg(long, global = true)]
    boundary_level: Option<u8>,
    /// Inside-fraction threshold of the element classification.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Nitsche penalty; defaults to 40 (λ + 2μ).
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<NitscheVariant>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true, value_parser = parse_preconditioner)]
    preconditioner: Option<Preconditioner>,
    /// auto | direct | bicgstab | cg
    #[arg(long, global = true, value_parser = parse_method)]
    method: Option<SolverMethod>,
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Points per axis of the band-error grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Band half-width of the band error.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Comma-separated base levels of a convergence study.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<u8>>,
    /// Boundary minus base level in a convergence study.
    #[arg(long, global = true)]
    offset: Option<u8>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build the surrogate mesh and print its statistics.
    Mesh,
    /// Solve the case and report errors, iterations and timings.
    Solve,
    /// Solve at each of --levels and tabulate the L2 error and order.
    Convergence,
    /// Band error and distance-vector accuracy against --reference.
    GeomMetrics,
    /// Solve and write a VTK file to --out.
    ExportVtk,
    /// Meshing and assembly cost of --geometry (and --reference).
    Bench,
}

fn parse_variant(s: &str) -> Result<NitscheVariant, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown variant {s:?}; expected as-printed or symmetrized"))
}

fn parse_preconditioner(s: &str) -> Result<Preconditioner, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown preconditioner {s:?}; expected jacobi, ilu0 or none"))
}

fn parse_method(s: &str) -> Result<SolverMethod, String> {
    let key = if s == "bicgstab" { "bi_cg_stab" } else { s };
    serde_json::from_value(serde_json::Value::String(key.to_string()))
        .map_err(|_| format!("unknown method {s:?}; expected auto, direct, bicgstab or cg"))
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = Some(v.clone()); })*
            };
        }
        set!(case, lambda, variant, tol, preconditioner, method, fd_step, grid, delta, seed, levels);
        set_opt!(geometry, reference, base_level, boundary_level, gamma, max_iter, out, workers, offset);
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn counters(g: &LoadedGeometry) -> (Option<u64>, Option<u64>) {
    (
        g.inr.as_ref().map(|m| m.evaluations()),
        g.soup.as_ref().map(|s| s.triangle_visits()),
    )
}

fn load_reference(cfg: &RunConfig) -> Result<Option<LoadedGeometry>> {
    cfg.reference
        .as_ref()
        .map(|src| {
            let margin = if *src == GeometrySource::Icosphere { None } else { cfg.margin };
            load_geometry(src, margin, cfg.fd_step).map_err(Into::into)
        })
        .transpose()
}

fn run_solve(cfg: &RunConfig, case: &Case, g: &LoadedGeometry) -> Result<SolveOutcome> {
    let cache = GradientCache::new();
    Ok(solve_case(
        case,
        g.geom.as_ref(),
        g.domain,
        &cfg.mesh_config(case),
        &cfg.assembly(case),
        &cfg.solver(),
        &cache,
    )?)
}

#[derive(Serialize)]
struct MeshSummary {
    case: String,
    dim: usize,
    base_level: u8,
    boundary_level: u8,
    leaves: usize,
    active: usize,
    markers: BTreeMap<String, usize>,
    faces: usize,
    flagged_faces: usize,
    nodes: usize,
    free_nodes: usize,
    mesh_seconds: f64,
    network_evaluations: Option<u64>,
    triangle_visits: Option<u64>,
}

fn cmd_mesh(cfg: &RunConfig) -> Result<String> {
    let (case, g) = cfg.load()?;
    let mesh_cfg = cfg.mesh_config(&case);
    let start = Instant::now();
    let mesh = mesh_geometry(g.geom.as_ref(), g.domain, &mesh_cfg, &GradientCache::new())?;
    let mesh_seconds = start.elapsed().as_secs_f64();
    let mut markers = BTreeMap::new();
    for m in &mesh.markers {
        *markers.entry(m.to_string()).or_insert(0) += 1;
    }
    let (network_evaluations, triangle_visits) = counters(&g);
    json(&MeshSummary {
        case: case.id.to_string(),
        dim: mesh.dim(),
        base_level: mesh_cfg.base_level,
        boundary_level: mesh_cfg.boundary_level,
        leaves: mesh.octree.len(),
        active: mesh.active_leaves().count(),
        markers,
        faces: mesh.faces.len(),
        flagged_faces: mesh.flagged_faces,
        nodes: mesh.nodes.len(),
        free_nodes: mesh.nodes.free_count(),
        mesh_seconds,
        network_evaluations,
        triangle_visits,
    })
}

fn cmd_solve(cfg: &RunConfig) -> Result<String> {
    let (case, g) = cfg.load()?;
    let out = run_solve(cfg, &case, &g)?;
    let (network_evaluations, triangle_visits) = counters(&g);
    let mut report = MetricReport {
        case: case.id.to_string(),
        seed: cfg.seed,
        l2_error: out.l2_error,
        times: out.times.clone(),
        network_evaluations,
        triangle_visits,
        solver: Some((&out.report, out.solution.len()).into()),
        ..Default::default()
    };
    // surface error between this solution and one computed on the reference
    if let Some(reference) = load_reference(cfg)? {
        let Some(soup) = reference.soup.clone() else {
            bail!("the surface error needs a triangle-soup reference");
        };
        let ref_case = Case::new(case.id, reference.dim())?;
        let ref_out = run_solve(cfg, &ref_case, &reference)?;
        let ref_eval = |x: &sbm_core::geometry::Point| {
            let (leaf, _) = host_leaf(&ref_out.mesh, x);
            evaluate(&ref_out.mesh, leaf, x, &ref_out.solution).0
        };
        let s = surface_error_integral(&out.mesh, &out.solution, &soup, ref_eval);
        report.surface_error = Some(s.integral);
        report.surface_extrapolated = Some(s.extrapolated);
    }
    json(&report)
}

fn cmd_convergence(cfg: &RunConfig) -> Result<String> {
    let (case, g) = cfg.load()?;
    let rows = convergence_study(
        &case,
        &g,
        &cfg.levels,
        cfg.offset(&case),
        &cfg.assembly(&case),
        &cfg.solver(),
    )?;
    Ok(convergence_csv(&rows))
}

fn cmd_geom_metrics(cfg: &RunConfig) -> Result<String> {
    let (case, g) = cfg.load()?;
    let Some(reference) = load_reference(cfg)? else {
        bail!("geom-metrics needs --reference");
    };
    if reference.dim() != g.dim() {
        bail!("geometry is {}D but the reference is {}D", g.dim(), reference.dim());
    }
    let start = Instant::now();
    let nmse = nmse_delta(g.geom.as_ref(), reference.geom.as_ref(), cfg.delta, cfg.grid)?;
    let mesh = mesh_geometry(g.geom.as_ref(), g.domain, &cfg.mesh_config(&case), &GradientCache::new())?;
    let mesh_time = start.elapsed();
    let dir = match &reference.soup {
        Some(soup) => gauss_point_direction_error(&mesh.faces, soup_oracle(soup)),
        None => gauss_point_direction_error(&mesh.faces, geometry_oracle(reference.geom.as_ref())),
    };
    let (network_evaluations, triangle_visits) = counters(&g);
    json(&MetricReport {
        case: case.id.to_string(),
        seed: cfg.seed,
        nmse_delta: Some(nmse),
        cosine_mean: Some(dir.mean),
        cosine_sd: Some(dir.sd),
        cosine_skipped: Some(dir.skipped),
        times: PhaseTimes {
            mesh: mesh_time,
            ..Default::default()
        },
        network_evaluations,
        triangle_visits,
        ..Default::default()
    })
}

fn cmd_export_vtk(cfg: &RunConfig) -> Result<String> {
    let Some(path) = &cfg.out else {
        bail!("export-vtk needs --out");
    };
    let (case, g) = cfg.load()?;
    let out = run_solve(cfg, &case, &g)?;
    let vm = element_von_mises(&out.mesh, &case.material, &out.solution);
    write_vtk(path, &out.mesh, Some(&out.solution), Some(&vm))
        .with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(String::new())
}

fn cmd_bench(cfg: &RunConfig) -> Result<String> {
    let (case, g) = cfg.load()?;
    let mesh_cfg = cfg.mesh_config(&case);
    let mut rows = vec![bench_geometry("geometry", &g, &case, &mesh_cfg)?];
    if let Some(reference) = load_reference(cfg)? {
        rows.push(bench_geometry("reference", &reference, &case, &mesh_cfg)?);
    }
    let opt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("label,triangles,leaves,faces,network_evaluations,triangle_visits,mesh_seconds,assembly_seconds\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.4},{:.4}\n",
            r.label,
            r.triangles.map_or(String::new(), |t| t.to_string()),
            r.leaves,
            r.faces,
            opt(r.network_evaluations),
            opt(r.triangle_visits),
            r.mesh_time.as_secs_f64(),
            r.assembly_time.as_secs_f64()
        ));
    }
    Ok(s)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = cli.run_config()?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let text = match cli.command {
        Command::Mesh => cmd_mesh(&cfg)?,
        Command::Solve => cmd_solve(&cfg)?,
        Command::Convergence => cmd_convergence(&cfg)?,
        Command::GeomMetrics => cmd_geom_metrics(&cfg)?,
        Command::ExportVtk => return cmd_export_vtk(&cfg).map(|_| ()),
        Command::Bench => cmd_bench(&cfg)?,
    };
    emit(cfg.out.as_deref(), &text)
}
