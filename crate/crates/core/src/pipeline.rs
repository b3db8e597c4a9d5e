//! End-to-end runs: geometry loading, mesh → assemble → solve, convergence
//! studies and cost benchmarks.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::{gyroid_geometry, icosphere_soup, ring_domain, ring_geometry, Case, CaseId};
use crate::fem::{assemble, AssemblyOptions, FemError, NitscheVariant};
use crate::geometry::{
    load_soup, rescale_soup, DomainTransform, GeometryError, ImplicitGeometry, MeshIoError, Point,
    Sphere, TriangleSoup,
};
use crate::inr::{load_inrw, GradientCache, InrError, InrModel};
use crate::metrics::{l2_field_error, MetricError};
use crate::octree::{mesh_geometry, Domain, MeshConfig, OctreeError, SurrogateMesh};
use crate::solver::{solve, Preconditioner, SolveReport, SolverConfig, SolverError, SolverMethod};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    MeshIo(#[from] MeshIoError),
    #[error(transparent)]
    Inr(#[from] InrError),
    #[error(transparent)]
    Octree(#[from] OctreeError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Where the geometry comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GeometrySource {
    Sphere,
    Disk,
    Ring,
    Gyroid,
    /// Built-in level-2 icosphere soup.
    Icosphere,
    Soup(PathBuf),
    Inr(PathBuf),
}

impl FromStr for GeometrySource {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = s.strip_prefix("soup:") {
            return Ok(GeometrySource::Soup(p.into()));
        }
        if let Some(p) = s.strip_prefix("inr:") {
            return Ok(GeometrySource::Inr(p.into()));
        }
        match s {
            "sphere" => Ok(GeometrySource::Sphere),
            "disk" => Ok(GeometrySource::Disk),
            "ring" => Ok(GeometrySource::Ring),
            "gyroid" => Ok(GeometrySource::Gyroid),
            "icosphere" => Ok(GeometrySource::Icosphere),
            _ => Err(PipelineError::Config(format!(
                "unknown geometry {s:?}; expected sphere, disk, ring, gyroid, icosphere, soup:PATH or inr:PATH"
            ))),
        }
    }
}

impl From<GeometrySource> for String {
    fn from(g: GeometrySource) -> String {
        match g {
            GeometrySource::Sphere => "sphere".into(),
            GeometrySource::Disk => "disk".into(),
            GeometrySource::Ring => "ring".into(),
            GeometrySource::Gyroid => "gyroid".into(),
            GeometrySource::Icosphere => "icosphere".into(),
            GeometrySource::Soup(p) => format!("soup:{}", p.display()),
            GeometrySource::Inr(p) => format!("inr:{}", p.display()),
        }
    }
}

impl TryFrom<String> for GeometrySource {
    type Error = PipelineError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A loaded geometry with handles to the concrete provider, so callers can
/// read its counters.
#[derive(Clone)]
pub struct LoadedGeometry {
    pub geom: Arc<dyn ImplicitGeometry>,
    pub domain: Domain,
    pub soup: Option<Arc<TriangleSoup>>,
    pub inr: Option<Arc<InrModel>>,
    /// Raw-to-canonical map applied to a loaded soup.
    pub transform: Option<DomainTransform>,
}

impl LoadedGeometry {
    pub fn from_soup(soup: TriangleSoup) -> Self {
        let soup = Arc::new(soup);
        LoadedGeometry {
            geom: soup.clone(),
            domain: Domain::canonical(3),
            soup: Some(soup),
            inr: None,
            transform: None,
        }
    }

    pub fn from_inr(model: InrModel) -> Self {
        let dim = model.in_dim();
        let model = Arc::new(model);
        LoadedGeometry {
            geom: model.clone(),
            domain: Domain::canonical(dim),
            soup: None,
            inr: Some(model),
            transform: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }
}

/// Loads `source`. Soups are rescaled into the canonical cube with `margin`
/// unless it is `None`; networks use the FD step `fd_step`.
pub fn load_geometry(
    source: &GeometrySource,
    margin: Option<f64>,
    fd_step: f64,
) -> Result<LoadedGeometry, PipelineError> {
    let analytic = |g: Arc<dyn ImplicitGeometry>, domain| LoadedGeometry {
        geom: g,
        domain,
        soup: None,
        inr: None,
        transform: None,
    };
    Ok(match source {
        GeometrySource::Sphere => analytic(
            Arc::new(Sphere::new(Point::new(0.03, -0.02, 0.01), 0.6)?),
            Domain::canonical(3),
        ),
        GeometrySource::Disk => analytic(
            Arc::new(Sphere::disk(Point::new(0.03, -0.02, 0.0), 0.61)?),
            Domain::canonical(2),
        ),
        GeometrySource::Ring => analytic(Arc::new(ring_geometry()), ring_domain()),
        GeometrySource::Gyroid => analytic(Arc::new(gyroid_geometry()), Domain::canonical(3)),
        GeometrySource::Icosphere => LoadedGeometry::from_soup(icosphere_soup()),
        GeometrySource::Soup(path) => {
            let raw = load_soup(path)?;
            match margin {
                Some(m) => {
                    let (soup, t) = rescale_soup(&raw, m)?;
                    let mut g = LoadedGeometry::from_soup(soup);
                    g.transform = Some(t);
                    g
                }
                None => LoadedGeometry::from_soup(raw),
            }
        }
        GeometrySource::Inr(path) => {
            let mut model = load_inrw(path)?;
            model.fd_step = fd_step;
            LoadedGeometry::from_inr(model)
        }
    })
}

/// Flat run configuration shared by the CLI flags and JSON config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the case's built-in geometry.
    pub geometry: Option<GeometrySource>,
    /// Second geometry used as ground truth by the metrics.
    pub reference: Option<GeometrySource>,
    pub case: String,
    pub base_level: Option<u8>,
    pub boundary_level: Option<u8>,
    pub lambda: f64,
    /// `None` means `40 (λ + 2μ)`.
    pub gamma: Option<f64>,
    pub variant: NitscheVariant,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub method: SolverMethod,
    pub fd_step: f64,
    /// Points per axis of the metric grid.
    pub grid: usize,
    /// Band half-width of the band error.
    pub delta: f64,
    /// Soup rescaling margin; `None` keeps raw coordinates.
    pub margin: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub workers: Option<usize>,
    /// Base levels of a convergence study.
    pub levels: Vec<u8>,
    /// `boundary − base` in a convergence study; `None` keeps the case's.
    pub offset: Option<u8>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: None,
            reference: None,
            case: "linear-patch".into(),
            base_level: None,
            boundary_level: None,
            lambda: 1.0,
            gamma: None,
            variant: NitscheVariant::AsPrinted,
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
            method: SolverMethod::Auto,
            fd_step: crate::geometry::DEFAULT_FD_STEP,
            grid: 128,
            delta: 1.0 / 128.0,
            margin: Some(0.15),
            out: None,
            seed: 0,
            workers: None,
            levels: vec![5, 6, 7, 8],
            offset: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn case_id(&self) -> Result<CaseId, PipelineError> {
        Ok(self.case.parse::<CaseId>()?)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            preconditioner: self.preconditioner,
            method: self.method,
            ..Default::default()
        }
    }

    /// The geometry to mesh: the explicit source or the case default.
    pub fn load(&self) -> Result<(Case, LoadedGeometry), PipelineError> {
        let id = self.case_id()?;
        let dim = if id == CaseId::Ring2d { 2 } else { 3 };
        let source = match &self.geometry {
            Some(src) => src.clone(),
            None => Case::new(id, dim)?.default_source().ok_or_else(|| {
                PipelineError::Config(format!("case {id} has no built-in geometry; pass soup:PATH or inr:PATH"))
            })?,
        };
        let margin = if source == GeometrySource::Icosphere { None } else { self.margin };
        let geometry = load_geometry(&source, margin, self.fd_step)?;
        let case = Case::new(id, geometry.dim())?;
        Ok((case, geometry))
    }

    pub fn mesh_config(&self, case: &Case) -> MeshConfig {
        let mut cfg = case.mesh;
        if let Some(b) = self.base_level {
            cfg.base_level = b;
            if self.boundary_level.is_none() {
                cfg.boundary_level = cfg.boundary_level.max(b);
            }
        }
        if let Some(b) = self.boundary_level {
            cfg.boundary_level = b;
        }
        cfg.lambda_criteria = self.lambda;
        cfg
    }

    pub fn offset(&self, case: &Case) -> u8 {
        self.offset
            .unwrap_or(case.mesh.boundary_level.saturating_sub(case.mesh.base_level))
    }

    pub fn assembly(&self, case: &Case) -> AssemblyOptions {
        let mut opts = AssemblyOptions::for_material(&case.material);
        if let Some(g) = self.gamma {
            opts.gamma = g;
        }
        opts.variant = self.variant;
        opts
    }
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    #[serde(serialize_with = "secs")]
    pub mesh: Duration,
    #[serde(serialize_with = "secs")]
    pub assembly: Duration,
    #[serde(serialize_with = "secs")]
    pub solve: Duration,
}

pub struct SolveOutcome {
    pub mesh: SurrogateMesh,
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub times: PhaseTimes,
    pub strong_dofs: usize,
    /// Inside-gated L2 error against the case field, when it is exact.
    pub l2_error: Option<f64>,
}

/// Meshes `geom`, assembles the case and solves.
pub fn solve_case(
    case: &Case,
    geom: &dyn ImplicitGeometry,
    domain: Domain,
    mesh_cfg: &MeshConfig,
    opts: &AssemblyOptions,
    solver: &SolverConfig,
    cache: &GradientCache,
) -> Result<SolveOutcome, PipelineError> {
    let t0 = Instant::now();
    let mesh = mesh_geometry(geom, domain, mesh_cfg, cache)?;
    if mesh.flagged_faces > 0 {
        log::warn!("{} surrogate faces failed the landing check", mesh.flagged_faces);
    }
    let t1 = Instant::now();
    let force = case.body_force_fn();
    let dirichlet = case.dirichlet();
    let sys = assemble(&mesh, &case.material, force.as_deref(), Some(&dirichlet), opts)?;
    let strong = case.strong_dofs(&mesh);
    let sys = if strong.is_empty() {
        sys
    } else {
        sys.apply_strong_dirichlet(&strong)
    };
    let t2 = Instant::now();
    let (solution, report) = solve(&sys.matrix, &sys.rhs, solver)?;
    let t3 = Instant::now();
    log::info!(
        "{}: {} leaves, {} dofs, {} iterations, residual {:e}",
        case.id,
        mesh.octree.len(),
        sys.size(),
        report.iterations,
        report.relative_residual
    );
    let l2_error = case
        .has_exact_solution()
        .then(|| l2_field_error(&mesh, &solution, case.field.as_ref(), geom, 3));
    Ok(SolveOutcome {
        mesh,
        solution,
        report,
        times: PhaseTimes {
            mesh: t1 - t0,
            assembly: t2 - t1,
            solve: t3 - t2,
        },
        strong_dofs: strong.len(),
        l2_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub base_level: u8,
    pub boundary_level: u8,
    pub h: f64,
    pub leaves: usize,
    pub dofs: usize,
    pub iterations: usize,
    pub l2_error: f64,
    /// `log2(e_prev / e)` against the previous row.
    pub order: Option<f64>,
    pub seconds: f64,
}

/// Solves the case at each base level with `boundary = base + offset`.
pub fn convergence_study(
    case: &Case,
    geometry: &LoadedGeometry,
    levels: &[u8],
    offset: u8,
    opts: &AssemblyOptions,
    solver: &SolverConfig,
) -> Result<Vec<ConvergenceRow>, PipelineError> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PipelineError::Config("convergence levels must be strictly ascending".into()));
    }
    if !case.has_exact_solution() {
        return Err(PipelineError::Config(format!("case {} has no exact solution", case.id)));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &base in levels {
        let start = Instant::now();
        let mut cfg = case.mesh;
        cfg.base_level = base;
        cfg.boundary_level = base + offset;
        let cache = GradientCache::new();
        let out = solve_case(case, geometry.geom.as_ref(), geometry.domain, &cfg, opts, solver, &cache)?;
        let err = out.l2_error.expect("exact solution checked above");
        let order = rows.last().map(|p| (p.l2_error / err).log2());
        rows.push(ConvergenceRow {
            base_level: base,
            boundary_level: base + offset,
            h: geometry.domain.cell_size(base),
            leaves: out.mesh.octree.len(),
            dofs: out.solution.len(),
            iterations: out.report.iterations,
            l2_error: err,
            order,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// CSV table of a convergence study.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("base_level,boundary_level,h,leaves,dofs,iterations,l2_error,order,seconds\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:e},{},{:.3}\n",
            r.base_level,
            r.boundary_level,
            r.h,
            r.leaves,
            r.dofs,
            r.iterations,
            r.l2_error,
            r.order.map_or(String::new(), |o| format!("{o:.4}")),
            r.seconds
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub label: String,
    /// Triangles of the soup (or of the soup the network was trained on, if known).
    pub triangles: Option<usize>,
    pub leaves: usize,
    pub faces: usize,
    /// Network evaluations during meshing and classification.
    pub network_evaluations: Option<u64>,
    /// Triangle visits by closest-point and ray queries during meshing.
    pub triangle_visits: Option<u64>,
    #[serde(serialize_with = "secs")]
    pub mesh_time: Duration,
    #[serde(serialize_with = "secs")]
    pub assembly_time: Duration,
}

/// Meshes and assembles `case` once on `geometry`, reading its counters.
pub fn bench_geometry(
    label: &str,
    geometry: &LoadedGeometry,
    case: &Case,
    cfg: &MeshConfig,
) -> Result<BenchRow, PipelineError> {
    if let Some(m) = &geometry.inr {
        m.reset_evaluations();
    }
    if let Some(s) = &geometry.soup {
        s.reset_counters();
    }
    let cache = GradientCache::new();
    let t0 = Instant::now();
    let mesh = mesh_geometry(geometry.geom.as_ref(), geometry.domain, cfg, &cache)?;
    let mesh_time = t0.elapsed();
    let network_evaluations = geometry.inr.as_ref().map(|m| m.evaluations());
    let triangle_visits = geometry.soup.as_ref().map(|s| s.triangle_visits());
    let t1 = Instant::now();
    let force = case.body_force_fn();
    let opts = AssemblyOptions::for_material(&case.material);
    assemble(&mesh, &case.material, force.as_deref(), Some(&case.dirichlet()), &opts)?;
    let assembly_time = t1.elapsed();
    Ok(BenchRow {
        label: label.to_string(),
        triangles: geometry.soup.as_ref().map(|s| s.triangle_count()),
        leaves: mesh.octree.len(),
        faces: mesh.faces.len(),
        network_evaluations,
        triangle_visits,
        mesh_time,
        assembly_time,
    })
}

/// Accuracy and cost summary of one run; absent entries were not computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub case: String,
    pub seed: u64,
    pub nmse_delta: Option<f64>,
    pub cosine_mean: Option<f64>,
    pub cosine_sd: Option<f64>,
    pub cosine_skipped: Option<usize>,
    pub l2_error: Option<f64>,
    pub surface_error: Option<f64>,
    pub surface_extrapolated: Option<usize>,
    pub times: PhaseTimes,
    pub network_evaluations: Option<u64>,
    pub triangle_visits: Option<u64>,
    pub solver: Option<SolverSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub dofs: usize,
}

impl From<(&SolveReport, usize)> for SolverSummary {
    fn from((r, dofs): (&SolveReport, usize)) -> Self {
        SolverSummary {
            iterations: r.iterations,
            relative_residual: r.relative_residual,
            converged: r.converged,
            dofs,
        }
    }
}
