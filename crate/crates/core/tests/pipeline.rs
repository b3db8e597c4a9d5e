use std::path::PathBuf;

use sbm_core::cases::{Case, CaseId};
use sbm_core::inr::GradientCache;
use sbm_core::pipeline::{
    convergence_csv, convergence_study, load_geometry, solve_case, GeometrySource, LoadedGeometry, PipelineError,
    RunConfig,
};
use sbm_core::solver::SolverMethod;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn geometry_sources_round_trip() {
    for s in ["sphere", "disk", "ring", "gyroid", "icosphere", "soup:a/b.obj", "inr:net.inrw"] {
        let g: GeometrySource = s.parse().unwrap();
        assert_eq!(String::from(g), s);
    }
    assert!(matches!("torus".parse::<GeometrySource>(), Err(PipelineError::Config(_))));
}

#[test]
fn run_config_json_keys_and_defaults() {
    let cfg: RunConfig = serde_json::from_str(
        r#"{"case": "icosphere", "geometry": "soup:x.stl", "method": "direct", "levels": [3, 4], "offset": 0}"#,
    )
    .unwrap();
    assert_eq!(cfg.geometry, Some(GeometrySource::Soup("x.stl".into())));
    assert_eq!(cfg.method, SolverMethod::Direct);
    assert_eq!(cfg.tol, RunConfig::default().tol);
    let case = Case::new(CaseId::Icosphere, 3).unwrap();
    assert_eq!(cfg.offset(&case), 0);
    assert_eq!(RunConfig::default().offset(&case), 2);
    assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn level_overrides_keep_boundary_above_base() {
    let case = Case::new(CaseId::LinearPatch, 3).unwrap();
    let cfg = RunConfig {
        base_level: Some(6),
        ..Default::default()
    };
    let m = cfg.mesh_config(&case);
    assert_eq!((m.base_level, m.boundary_level), (6, 6));
    let cfg = RunConfig {
        base_level: Some(2),
        boundary_level: Some(3),
        lambda: 0.5,
        ..Default::default()
    };
    let m = cfg.mesh_config(&case);
    assert_eq!((m.base_level, m.boundary_level, m.lambda_criteria), (2, 3, 0.5));
}

#[test]
fn cases_without_builtin_geometry_need_a_source() {
    let cfg = RunConfig {
        case: "bunny".into(),
        ..Default::default()
    };
    assert!(matches!(cfg.load(), Err(PipelineError::Config(_))));
    let cfg = RunConfig {
        case: "ring2d".into(),
        ..Default::default()
    };
    let (case, geom) = cfg.load().unwrap();
    assert_eq!((case.id, geom.dim()), (CaseId::Ring2d, 2));
}

#[test]
fn network_fixture_drives_a_solve() {
    let geom = load_geometry(&GeometrySource::Inr(fixture("icosphere_320.inrw")), None, 5e-4).unwrap();
    let case = Case::new(CaseId::LinearPatch, 3).unwrap();
    let run = RunConfig {
        base_level: Some(3),
        boundary_level: Some(3),
        tol: 1e-12,
        ..Default::default()
    };
    let out = solve_case(
        &case,
        geom.geom.as_ref(),
        geom.domain,
        &run.mesh_config(&case),
        &run.assembly(&case),
        &run.solver(),
        &GradientCache::new(),
    )
    .unwrap();
    assert!(geom.inr.as_ref().unwrap().evaluations() > 0);
    assert!(out.report.converged);
    assert!(out.l2_error.unwrap() < 1e-10);
}

#[test]
fn convergence_rows_and_csv() {
    let case = Case::new(CaseId::LinearPatch, 3).unwrap();
    let geom = LoadedGeometry::from_soup(sbm_core::cases::icosphere_soup());
    let run = RunConfig::default();
    assert!(convergence_study(&case, &geom, &[3, 3], 0, &run.assembly(&case), &run.solver()).is_err());
    let rows = convergence_study(&case, &geom, &[2, 3], 0, &run.assembly(&case), &run.solver()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].order.is_none() && rows[1].order.is_some());
    assert!(rows[1].dofs > rows[0].dofs);
    let csv = convergence_csv(&rows);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("base_level,boundary_level,h,"));
}
