//! Task execution. Each task returns a JSON result plus optional side files.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use trotter_bound::determinants::sector_dimension;
use trotter_bound::exact_oracle::sector_norms;
use trotter_bound::fciqmc::population_sweep;
use trotter_bound::fermion_ops::nested_commutators;
use trotter_bound::hamiltonians::{
    build_extended_hubbard_1d, build_extended_hubbard_hexagonal, build_ppp_acene, build_ueg_dual_plane_wave,
};
use trotter_bound::trotter_bounds::{
    l1_bound, tighter_triangle_bound, trotter_error_norm, trotter_steps, BoundsSummary, L1Pair, NormInputs, NormValue,
    Provenance, StepCount, TrianglePair,
};
use trotter_bound::{
    build_sector_matrix, exact_trotter_error, run, spectral_norm, DiagonalCoulombHamiltonian, Engine, Error, OperatorKind,
    Result, RunConfig, RunReport, SectorSpec,
};

use crate::job::{JobSpec, NormSource, Task};

pub struct Outcome {
    pub result: Value,
    /// Written as `series.csv` when present.
    pub series: Option<Series>,
}

pub enum Series {
    Run(Box<RunReport>),
    Table(String),
}

fn kinds(op: Option<OperatorKind>) -> Vec<OperatorKind> {
    op.map_or_else(|| vec![OperatorKind::Vtv, OperatorKind::Vtt], |k| vec![k])
}

fn percent(exact: f64, bound: f64) -> f64 {
    if exact == 0.0 {
        0.0
    } else {
        100.0 * (bound - exact) / exact
    }
}

pub fn execute(task: Task, job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec, out: &Path) -> Result<Outcome> {
    match task {
        Task::Build => build(job, h, sector, out),
        Task::ExactNorm => exact_norm(job, h, sector, out),
        Task::McNorm => mc_norm(job, h, sector),
        Task::TrotterErrorExact => trotter_error(job, h, sector),
        Task::Bounds => bounds(job, h, sector),
        Task::BiasSweep => bias_sweep(job, h, sector),
    }
}

fn build(_job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec, out: &Path) -> Result<Outcome> {
    std::fs::write(out.join("hamiltonian.json"), h.to_json()?)?;
    let (vtt, vtv) = nested_commutators(h);
    let result = json!({
        "n_spatial": h.n_spatial,
        "n_spin_orbitals": h.n_spin_orbitals(),
        "units": h.units.label(),
        "sector": sector,
        "sector_dimension": sector_dimension(h.n_spatial, sector).to_string(),
        "l1_vtt": l1_bound(&vtt),
        "l1_vtv": l1_bound(&vtv),
        "hamiltonian": "hamiltonian.json",
    });
    Ok(Outcome { result, series: None })
}

fn exact_norm(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec, out: &Path) -> Result<Outcome> {
    let mut rows = serde_json::Map::new();
    for kind in kinds(job.operator) {
        let engine = Engine::build(h, kind)?;
        let m = build_sector_matrix(&engine, sector, false)?;
        let exact = spectral_norm(&m, job.tolerance)?;
        let abs = spectral_norm(&m.abs(), job.tolerance)?;
        if job.write_matrix {
            m.write_matrix_market(std::io::BufWriter::new(std::fs::File::create(out.join("matrix.mtx"))?))?;
        }
        rows.insert(
            kind.label().to_string(),
            json!({
                "dimension": m.dim(),
                "nnz": m.nnz(),
                "exact": exact,
                "abs": abs,
                "percent_error": percent(exact, abs),
            }),
        );
    }
    Ok(Outcome { result: Value::Object(rows), series: None })
}

fn mc_norm(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec) -> Result<Outcome> {
    let kind = job.operator.expect("validated");
    let engine = Engine::build(h, kind)?;
    let cfg = RunConfig { operator: kind, ..job.fciqmc.clone() };
    let report = run(&cfg, &engine, sector)?;
    Ok(Outcome { result: serde_json::to_value(&report)?, series: Some(Series::Run(Box::new(report))) })
}

fn trotter_error(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec) -> Result<Outcome> {
    let ordering = job.trotter.ordering;
    let vtv = sector_norms(&Engine::build(h, OperatorKind::Vtv)?, sector, job.tolerance)?;
    let vtt = sector_norms(&Engine::build(h, OperatorKind::Vtt)?, sector, job.tolerance)?;
    let w_exact = trotter_error_norm(&NormInputs { norm_vtt: NormValue::exact(vtt.0), norm_vtv: NormValue::exact(vtv.0) }, ordering);
    let w_abs = trotter_error_norm(&NormInputs { norm_vtt: NormValue::exact(vtt.1), norm_vtv: NormValue::exact(vtv.1) }, ordering);
    let mut table = String::from("t,error,bound_exact,bound_abs\n");
    let mut points = Vec::new();
    for &t in &job.trotter.times {
        let err = exact_trotter_error(h, sector, t, ordering)?;
        let (b1, b2) = (w_exact * t.powi(3), w_abs * t.powi(3));
        table.push_str(&format!("{t:.6e},{err:.12e},{b1:.12e},{b2:.12e}\n"));
        points.push(json!({"t": t, "error": err, "bound_exact": b1, "bound_abs": b2, "ratio": err / b1}));
    }
    let result = json!({
        "ordering": ordering,
        "norm_vtv": {"exact": vtv.0, "abs": vtv.1},
        "norm_vtt": {"exact": vtt.0, "abs": vtt.1},
        "w_exact": w_exact,
        "w_abs": w_abs,
        "points": points,
    });
    Ok(Outcome { result, series: Some(Series::Table(table)) })
}

fn mc_value(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec, kind: OperatorKind) -> Result<NormValue> {
    let cfg = RunConfig { operator: kind, ..job.fciqmc.clone() };
    let r = run(&cfg, &Engine::build(h, kind)?, sector)?;
    NormValue::new(r.norm, Provenance::McAbs { stderr: r.norm_stderr })
}

fn triangle(h: &DiagonalCoulombHamiltonian, kind: OperatorKind) -> Result<Option<f64>> {
    match tighter_triangle_bound(h, kind) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Applicability(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn bounds(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec) -> Result<Outcome> {
    let spec = &job.bounds;
    let inputs = match spec.source {
        NormSource::Exact => {
            let vtt = sector_norms(&Engine::build(h, OperatorKind::Vtt)?, sector, job.tolerance)?.0;
            let vtv = sector_norms(&Engine::build(h, OperatorKind::Vtv)?, sector, job.tolerance)?.0;
            NormInputs { norm_vtt: NormValue::exact(vtt), norm_vtv: NormValue::exact(vtv) }
        }
        NormSource::Mc => NormInputs {
            norm_vtt: mc_value(job, h, sector, OperatorKind::Vtt)?,
            norm_vtv: mc_value(job, h, sector, OperatorKind::Vtv)?,
        },
    };
    let mut summary = BoundsSummary::new(inputs);
    if spec.l1 {
        let (vtt, vtv) = nested_commutators(h);
        summary.l1 = Some(L1Pair { vtt: l1_bound(&vtt), vtv: l1_bound(&vtv) });
    }
    if spec.triangle {
        summary.triangle = Some(TrianglePair { vtt: triangle(h, OperatorKind::Vtt)?, vtv: triangle(h, OperatorKind::Vtv)? });
    }
    if let (Some(t), Some(epsilon)) = (spec.t, spec.epsilon) {
        let w = trotter_error_norm(&inputs, spec.ordering);
        summary.r_steps = Some(StepCount { t, epsilon, ordering: spec.ordering, r: trotter_steps(w, t, epsilon)? });
    }
    Ok(Outcome { result: serde_json::to_value(&summary)?, series: None })
}

fn bias_sweep(job: &JobSpec, h: &DiagonalCoulombHamiltonian, sector: SectorSpec) -> Result<Outcome> {
    let kind = job.operator.expect("validated");
    let engine = Engine::build(h, kind)?;
    let cfg = RunConfig { operator: kind, ..job.fciqmc.clone() };
    let (reports, fit) = population_sweep(&cfg, &engine, sector, &job.bias_sweep.populations)?;
    let mut table = String::from("target,mean_population,norm,norm_stderr\n");
    for (target, r) in job.bias_sweep.populations.iter().zip(&reports) {
        table.push_str(&format!("{target:.6e},{:.12e},{:.12e},{:.12e}\n", r.mean_population, r.norm, r.norm_stderr));
    }
    let result = json!({ "fit": fit, "runs": reports });
    Ok(Outcome { result, series: Some(Series::Table(table)) })
}

#[derive(Serialize)]
pub struct TableRow {
    pub system: &'static str,
    pub vtv_exact: f64,
    pub vtv_abs: f64,
    pub vtv_percent: f64,
    pub vtt_exact: f64,
    pub vtt_abs: f64,
    pub vtt_percent: f64,
}

fn table1_systems() -> Result<Vec<(&'static str, DiagonalCoulombHamiltonian, SectorSpec)>> {
    Ok(vec![
        ("extended Hubbard 1D N=6", build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, true)?, SectorSpec::new(3, 3)),
        ("extended Hubbard 1D N=8", build_extended_hubbard_1d(8, 1.0, 4.0, 2.0, true)?, SectorSpec::new(4, 4)),
        ("extended Hubbard 1D N=10", build_extended_hubbard_1d(10, 1.0, 4.0, 2.0, true)?, SectorSpec::new(5, 5)),
        ("extended Hubbard hexagonal 2x2", build_extended_hubbard_hexagonal(2, 2, 1.0, 4.0, 2.0)?, SectorSpec::new(4, 4)),
        ("PPP benzene", build_ppp_acene(1)?, SectorSpec::new(3, 3)),
        ("PPP napthalene", build_ppp_acene(2)?, SectorSpec::new(5, 5)),
        ("UEG 2x2", build_ueg_dual_plane_wave(2, 2, 10.0, 4)?, SectorSpec::new(2, 2)),
        ("UEG 2x2x2", build_ueg_dual_plane_wave(3, 2, 10.0, 8)?, SectorSpec::new(4, 4)),
    ])
}

/// All eight comparison rows. A failing row is recorded and the rest still run.
pub fn table1(tolerance: f64) -> Result<(Vec<TableRow>, Vec<(String, Error)>)> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (name, h, sector) in table1_systems()? {
        let row = (|| -> Result<TableRow> {
            let (vtv_exact, vtv_abs) = sector_norms(&Engine::build(&h, OperatorKind::Vtv)?, sector, tolerance)?;
            let (vtt_exact, vtt_abs) = sector_norms(&Engine::build(&h, OperatorKind::Vtt)?, sector, tolerance)?;
            Ok(TableRow {
                system: name,
                vtv_exact,
                vtv_abs,
                vtv_percent: percent(vtv_exact, vtv_abs),
                vtt_exact,
                vtt_abs,
                vtt_percent: percent(vtt_exact, vtt_abs),
            })
        })();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((name.to_string(), e)),
        }
    }
    Ok((rows, failures))
}

pub fn table1_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("system,vtv_exact,vtv_abs,vtv_percent,vtt_exact,vtt_abs,vtt_percent\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.10e},{:.10e},{:.4},{:.10e},{:.10e},{:.4}\n",
            r.system, r.vtv_exact, r.vtv_abs, r.vtv_percent, r.vtt_exact, r.vtt_abs, r.vtt_percent
        ));
    }
    s
}
