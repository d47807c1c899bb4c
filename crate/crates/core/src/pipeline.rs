//! End-to-end runs driven by a JSON run specification.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    direct_eigenvalues, integrate_flow, FlowConfig, FlowTrajectory, GeneratorChoice, StopReason,
};
use crate::geometry::{
    band_condition, case_classify, fs_metric, generator_consistency, generator_relation_residual,
    geodesic_residual, sandwiched_ode_residual, speed_consistency, variational_gradient,
    xi_residual, CaseLabel, GeodesicOptions, MetricSample, VariationalOptions,
};
use crate::models::{
    coordinate_projection, displacement_family, edge_amplitude, jc_family, spin_family,
    squeeze_family, FamilyKind, ModelFamily, ModelSpec, Projection,
};
use crate::operator::{band_split, HermitianOperator, MatrixJson};
use crate::report::{f17_vec, Check, F17};

/// Tolerance used when reading matrices from JSON.
pub const MATRIX_READ_TOL: f64 = 1e-10;

/// Tolerances of the geodesic verification chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicTolerances {
    pub projection: f64,
    pub geodesic: f64,
    pub min_samples: usize,
    pub variational: f64,
    pub xi_relative: f64,
    pub generator_consistency: f64,
    pub generator_relation: f64,
    pub speed_consistency: f64,
    pub sandwiched: f64,
    pub phase_drift: f64,
    pub edge_amplitude: f64,
}

impl Default for GeodesicTolerances {
    fn default() -> Self {
        GeodesicTolerances {
            projection: 1e-6,
            geodesic: 1e-3,
            min_samples: 200,
            variational: 5e-4,
            xi_relative: 1e-5,
            generator_consistency: 1e-5,
            generator_relation: 1e-3,
            speed_consistency: 1e-5,
            sandwiched: 1e-6,
            phase_drift: 1e-8,
            edge_amplitude: 1e-8,
        }
    }
}

/// A run specification. Exactly one of `model`, `matrix`, `matrix_file` is given.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub matrix: Option<MatrixJson>,
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorChoice>,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    /// Base state: Fock level for the oscillator, `m` for the spin.
    #[serde(default)]
    pub base: Option<f64>,
    /// Jaynes-Cummings sector `n` (base `|e,n>`).
    #[serde(default)]
    pub sector: Option<usize>,
    /// Coordinates at which `metric` evaluates the family.
    #[serde(default)]
    pub grid: Option<Vec<Vec<f64>>>,
    /// Evaluate the relation between generators at every `stride`-th sample.
    #[serde(default)]
    pub generator_relation_stride: Option<usize>,
    #[serde(default)]
    pub tolerances: Option<GeodesicTolerances>,
}

impl RunSpec {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: RunSpec =
            serde_json::from_str(text).map_err(|e| Error::SpecViolation(e.to_string()))?;
        if let Some(p) = &spec.matrix_file {
            if p.is_relative() {
                spec.matrix_file = Some(base_dir.join(p));
            }
        }
        let given = spec.model.is_some() as u8
            + spec.matrix.is_some() as u8
            + spec.matrix_file.is_some() as u8;
        if given != 1 {
            return Err(Error::SpecViolation(
                "exactly one of model, matrix, matrix_file must be given".into(),
            ));
        }
        if let Some(m) = &spec.model {
            m.validate()?;
        }
        if let Some(f) = &spec.flow {
            f.validate()
                .map_err(|e| Error::SpecViolation(e.to_string()))?;
        }
        Ok(spec)
    }

    /// The Hamiltonian that is flowed.
    pub fn hamiltonian(&self) -> Result<HermitianOperator> {
        if let Some(m) = &self.model {
            return m.flow_hamiltonian();
        }
        if let Some(m) = &self.matrix {
            return crate::operator::validate_hermitian(&m.to_matrix()?, MATRIX_READ_TOL);
        }
        let path = self.matrix_file.as_ref().expect("validated");
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SpecViolation(format!("cannot read {}: {e}", path.display())))?;
        MatrixJson::read_hermitian(&text, MATRIX_READ_TOL)
    }

    pub fn generator_choice(&self) -> GeneratorChoice {
        self.generator.unwrap_or(GeneratorChoice::Wegner)
    }

    pub fn flow_config(&self) -> FlowConfig {
        self.flow.clone().unwrap_or_default()
    }

    /// The registered family of the model at the requested base state.
    pub fn family(&self) -> Result<ModelFamily> {
        let model = self
            .model
            .ok_or_else(|| Error::SpecViolation("a model spec is needed for a family".into()))?;
        match model {
            ModelSpec::Gho(g) => {
                let n = self.base.unwrap_or(0.0);
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(Error::SpecViolation(format!(
                        "base {n} is not a Fock level"
                    )));
                }
                if g.lambda.norm() > 0.0 {
                    squeeze_family(n as usize, g.n_max)
                } else if n == 0.0 {
                    displacement_family(g.n_max)
                } else {
                    Err(Error::SpecViolation(
                        "the displacement family is registered for base 0 only".into(),
                    ))
                }
            }
            ModelSpec::Spin(s) => spin_family(s.s, self.base.unwrap_or(s.s)),
            ModelSpec::Jc(j) => jc_family(j.n_max, self.sector.unwrap_or(0)),
        }
        .map_err(|e| match e {
            Error::InvalidInput(m) => Error::SpecViolation(m),
            other => other,
        })
    }
}

/// Summary of a flow run.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub stop_reason: StopReason,
    pub samples: usize,
    pub l_final: F17,
    pub final_offdiag_sq: F17,
    pub eigenvalue_match_error: F17,
    pub trace_drift: F17,
    pub trace_sq_drift: F17,
    pub eta_norm_final: F17,
    pub final_diagonal: Vec<F17>,
    /// Near-degenerate clusters of the final diagonal with more than one member.
    pub degenerate_blocks: Vec<BlockSummary>,
    /// Off-diagonal weight left between different clusters.
    pub inter_block_offdiag_sq: F17,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSummary {
    pub indices: Vec<usize>,
    pub eps: Vec<F17>,
    pub intra_offdiag_sq: F17,
}

pub fn summarize_flow(
    h0: &HermitianOperator,
    traj: &FlowTrajectory,
    cluster_tol_rel: f64,
) -> FlowSummary {
    let blocks = traj.block_report(cluster_tol_rel);
    let last = traj.last();
    let mut diag = last.h.diagonal();
    let mut exact = direct_eigenvalues(h0);
    diag.sort_by(f64::total_cmp);
    exact.sort_by(f64::total_cmp);
    let err = diag
        .iter()
        .zip(&exact)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let (t1, t2) = traj.trace_drift();
    let mut warnings = Vec::new();
    if traj.stop_reason == StopReason::Stalled {
        warnings.push(format!(
            "flow stalled at l = {}: the generator vanishes (degenerate diagonal fixed point) while off-diagonal norm^2 = {:e} remains",
            last.l, last.target_sq
        ));
    }
    FlowSummary {
        stop_reason: traj.stop_reason,
        samples: traj.samples.len(),
        l_final: F17(last.l),
        final_offdiag_sq: F17(last.offdiag_sq),
        eigenvalue_match_error: F17(err),
        trace_drift: F17(t1),
        trace_sq_drift: F17(t2),
        eta_norm_final: F17(last.eta_norm),
        final_diagonal: f17_vec(&last.h.diagonal()),
        degenerate_blocks: blocks
            .clusters
            .iter()
            .filter(|c| c.indices.len() > 1)
            .map(|c| BlockSummary {
                indices: c.indices.clone(),
                eps: f17_vec(&c.eps),
                intra_offdiag_sq: F17(c.intra_offdiag_sq),
            })
            .collect(),
        inter_block_offdiag_sq: F17(blocks.inter_offdiag_sq),
        warnings,
    }
}

pub fn run_flow(spec: &RunSpec) -> Result<(HermitianOperator, FlowTrajectory)> {
    let h0 = spec.hamiltonian()?;
    let traj = integrate_flow(&h0, spec.generator_choice(), &spec.flow_config())?;
    Ok((h0, traj))
}

pub fn run_metric(spec: &RunSpec) -> Result<(ModelFamily, Vec<MetricSample>, Vec<f64>)> {
    let mf = spec.family()?;
    let grid = match &spec.grid {
        Some(g) => g.clone(),
        None => default_grid(&mf),
    };
    let mut samples = Vec::with_capacity(grid.len());
    let mut errors = Vec::with_capacity(grid.len());
    for alpha in &grid {
        let m = fs_metric(&mf.family, alpha)?;
        let exact = mf.analytic_metric(alpha);
        errors.push((&m.g - exact).abs().max());
        samples.push(m);
    }
    Ok((mf, samples, errors))
}

/// A small grid away from coordinate singularities.
pub fn default_grid(mf: &ModelFamily) -> Vec<Vec<f64>> {
    match mf.kind {
        FamilyKind::Displacement { .. } => vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.5, 0.4]],
        FamilyKind::Squeeze { .. } => vec![vec![0.1, 0.2], vec![0.2, 1.0], vec![0.3, 2.5]],
        FamilyKind::Spin { .. } => vec![vec![0.4, 0.1], vec![1.2, 2.0], vec![2.5, 4.0]],
        FamilyKind::Jc { .. } => vec![
            vec![0.3, 0.2, -0.4],
            vec![0.6, 1.0, 0.5],
            vec![0.9, -0.7, 2.0],
        ],
    }
}

/// Everything the geodesic chain produced.
#[derive(Debug, Clone)]
pub struct GeodesicRun {
    pub family: ModelFamily,
    pub flow: FlowTrajectory,
    pub projection: Option<Projection>,
    pub checks: Vec<Check>,
    /// Checks that could not be evaluated, with the reason.
    pub errors: Vec<(String, String)>,
    pub case: Option<CaseLabel>,
    pub gap: Option<f64>,
    pub geodesic_table: Option<GeodesicTable>,
}

#[derive(Debug, Clone)]
pub struct GeodesicTable {
    pub l: Vec<f64>,
    pub s: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub residual: Vec<Vec<f64>>,
}

impl GeodesicRun {
    fn record<T>(&mut self, name: &str, r: Result<T>, f: impl FnOnce(T) -> Vec<Check>) {
        match r {
            Ok(v) => self.checks.extend(f(v)),
            Err(e) => self.errors.push((name.to_string(), e.to_string())),
        }
    }
}

/// Storage index of the family's base state and the band it couples through.
fn base_and_band(mf: &ModelFamily, h0: &HermitianOperator) -> Result<(usize, usize)> {
    let bands = band_split(h0).present_bands();
    let band = match mf.kind {
        FamilyKind::Jc { n_max, .. } => n_max,
        FamilyKind::Squeeze { .. } => 2,
        FamilyKind::Displacement { .. } => 1,
        FamilyKind::Spin { .. } => 1,
    };
    if !bands.is_empty() && !bands.contains(&band) {
        return Err(Error::NoSuchBand { index: band });
    }
    Ok((mf.base_index, band))
}

/// Flow, project onto the model family, then run every geometric check.
pub fn run_geodesic(spec: &RunSpec) -> Result<GeodesicRun> {
    let mf = spec.family()?;
    let tol = spec.tolerances.unwrap_or_default();
    let h0 = spec.hamiltonian()?;
    let mut cfg = spec.flow_config();
    cfg.track_unitary = true;
    let choice = spec.generator_choice();
    let flow = integrate_flow(&h0, choice, &cfg)?;
    let (n, band) = base_and_band(&mf, &h0)?;
    let mut run = GeodesicRun {
        family: mf.clone(),
        flow,
        projection: None,
        checks: Vec::new(),
        errors: Vec::new(),
        case: None,
        gap: None,
        geodesic_table: None,
    };
    let fam = &mf.family;

    let bd = band_split(&h0);
    let bands = bd.present_bands();
    if !bands.is_empty() {
        run.record("band_condition", band_condition(&bands, band), |c| {
            let mut chk = Check::exact("band_condition", c.holds);
            if let Some((b, m)) = c.offender {
                chk = chk.with_detail(format!("band {b} = {m} x {band}"));
            }
            vec![chk]
        });
        match case_classify(&bd, n, band) {
            Ok(v) => {
                run.case = Some(v.label);
                run.gap = v.gap;
            }
            Err(e) => run.errors.push(("case_classify".into(), e.to_string())),
        }
    }

    let projection = match coordinate_projection(&run.flow, &mf) {
        Ok(p) => p,
        Err(e) => {
            run.errors
                .push(("coordinate_projection".into(), e.to_string()));
            return Ok(run);
        }
    };
    run.checks.push(Check::at_most(
        "projection_residual",
        projection.max_residual(),
        tol.projection,
    ));
    let traj = &projection.traj;

    let geo = geodesic_residual(traj, fam, &GeodesicOptions::default());
    if let Ok(g) = &geo {
        run.geodesic_table = Some(GeodesicTable {
            l: g.l.clone(),
            s: g.s.clone(),
            alpha: g
                .index
                .iter()
                .map(|&k| traj.samples[k].alpha.clone())
                .collect(),
            residual: g.residual.clone(),
        });
    }
    run.record("geodesic_residual", geo, |g| {
        vec![
            Check::at_most("geodesic_residual", g.max_abs(), tol.geodesic),
            Check::at_least(
                "geodesic_samples",
                g.index.len() as f64,
                tol.min_samples as f64,
            ),
        ]
    });
    run.record(
        "variational_gradient",
        variational_gradient(traj, fam, &VariationalOptions::default()),
        |v| {
            vec![Check::at_most(
                "variational_gradient",
                v.max_abs(),
                tol.variational,
            )]
        },
    );
    run.record("xi_residual", xi_residual(fam, traj, &run.flow, n), |x| {
        vec![Check::at_most(
            "xi_residual_relative",
            x.max_relative(),
            tol.xi_relative,
        )]
    });
    // the oscillator families are truncated, so they are compared on the base column only
    let column = matches!(
        mf.kind,
        FamilyKind::Displacement { .. } | FamilyKind::Squeeze { .. }
    )
    .then_some(n);
    run.record(
        "generator_consistency",
        generator_consistency(fam, traj, &run.flow, column),
        |(_, r)| {
            vec![Check::at_most(
                "generator_consistency",
                r.iter().fold(0.0, |a, &b| a.max(b)),
                tol.generator_consistency,
            )]
        },
    );
    if !matches!(mf.kind, FamilyKind::Jc { .. }) {
        let stride = spec
            .generator_relation_stride
            .unwrap_or_else(|| (traj.len() / 50).max(1));
        run.record(
            "generator_relation_residual",
            generator_relation_residual(fam, traj, fam.fd_step(), stride),
            |r| {
                vec![Check::at_most(
                    "generator_relation_residual",
                    r.max_abs(),
                    tol.generator_relation,
                )]
            },
        );
    }
    run.record(
        "speed_consistency",
        speed_consistency(
            fam,
            traj,
            &run.flow,
            n,
            GeodesicOptions::default().speed_cut_rel,
        ),
        |(_, r)| {
            vec![Check::at_most(
                "speed_consistency",
                r.iter().fold(0.0, |a, &b| a.max(b)),
                tol.speed_consistency,
            )]
        },
    );
    if !bands.is_empty() {
        run.record(
            "sandwiched_ode",
            sandwiched_ode_residual(&run.flow, n, band),
            |s| {
                vec![
                    Check::at_most("sandwiched_ode_residual", s.max_residual(), tol.sandwiched),
                    Check::at_most(
                        "sandwiched_phase_drift",
                        s.max_phase_drift(),
                        tol.phase_drift,
                    ),
                ]
            },
        );
    }
    if let FamilyKind::Squeeze { .. } = mf.kind {
        if let Some(edge) = edge_amplitude(&run.flow, n) {
            run.checks
                .push(Check::at_most("edge_amplitude", edge, tol.edge_amplitude));
        }
    }
    run.projection = Some(projection);
    Ok(run)
}
