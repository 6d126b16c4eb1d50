//! The four subcommands. Each returns its exit code.

use std::collections::BTreeMap;
use std::path::Path;

use equideform::continuation::{
    congruence_check, continue_branch, corrector_step, orbit_project, CorrectorDiagnostics,
    GroupParameters, RecordDiagnostics, Termination,
};
use equideform::equivariance::{assess, full_diagnostics, DiagnosticsReport, NondegeneracyReport, Verdict};
use equideform::lie_bundle::{
    algebra_basis, bracket_closure_residual_of, closure_check, complement_and_slice_check,
    deformed_bracket_check, invariance_residual, section_check, two_letter_word, ReductivePair,
    SLICE_MARGIN,
};
use equideform::variational::{generator_names, Instance, ProblemState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{self, Metadata};
use crate::problem::{
    build_problem, build_problem_with_h, default_lambda, initial_state, inject_degenerate_mode,
    primary_scalar,
};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_CONVERGENCE, EXIT_OK};

pub struct Context<'a> {
    pub config: &'a RunConfig,
    /// Directory of the config file; state files are resolved against it.
    pub base: &'a Path,
    pub out: &'a Path,
    pub seed: u64,
    pub input_hash: String,
}

impl Context<'_> {
    fn metadata(&self) -> Metadata {
        Metadata::new(self.input_hash.clone(), self.seed)
    }
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    lambda: f64,
    n: usize,
    value: f64,
    threshold: f64,
    passed: bool,
}

impl Check {
    fn below(name: &'static str, lambda: f64, n: usize, value: f64, threshold: f64) -> Self {
        Self {
            name,
            lambda,
            n,
            value,
            threshold,
            passed: value < threshold,
        }
    }
}

#[derive(Debug, Serialize)]
struct BundlePayload {
    checks: Vec<Check>,
    failing: Vec<String>,
    passed: bool,
}

fn lib_err(e: equideform::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Replaces the first basis element by a symmetric matrix.
fn broken_basis(lambda: f64, n: usize) -> Result<Vec<DMatrix<f64>>, CliError> {
    let mut mats = algebra_basis(lambda, n).map_err(lib_err)?.matrices();
    let mut s = DMatrix::zeros(n + 1, n + 1);
    s[(1, 2)] = 1.0;
    s[(2, 1)] = 1.0;
    mats[0] = s;
    Ok(mats)
}

pub fn verify_bundle(ctx: &Context) -> Result<i32, CliError> {
    let b = &ctx.config.bundle;
    let broken = ctx.config.fixture.break_basis;
    let mut checks = Vec::new();
    for &n in &b.dims {
        for &lambda in &b.lambdas {
            let (closure, invariance) = if broken {
                let mats = broken_basis(lambda, n)?;
                let inv = mats
                    .iter()
                    .map(|m| invariance_residual(m, lambda))
                    .fold(0.0, f64::max);
                (bracket_closure_residual_of(&mats), inv)
            } else {
                let r = closure_check(lambda, n).map_err(lib_err)?;
                (r.closure_residual, r.invariance_residual)
            };
            checks.push(Check::below("bracket_closure", lambda, n, closure, 1e-12));
            checks.push(Check::below("invariance", lambda, n, invariance, 1e-12));
            let slice = complement_and_slice_check(lambda, n, b.samples, ctx.seed).map_err(lib_err)?;
            checks.push(Check {
                name: "complement_rank",
                lambda,
                n,
                value: slice.rank as f64,
                threshold: slice.expected_rank as f64,
                passed: slice.full_rank,
            });
            checks.push(Check {
                name: "slice_margin",
                lambda,
                n,
                value: slice.min_off_identity_residual,
                threshold: SLICE_MARGIN,
                passed: slice.passed,
            });
        }

        let [lo, hi] = b.section_range;
        let m = b.section_points;
        let lambdas: Vec<f64> = (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect();
        let (word, target) = two_letter_word(n, 0.7, -0.4).map_err(lib_err)?;
        let section = section_check(&word, &target, &lambdas);
        checks.push(Check::below("section_membership", 1.0, n, section.max_membership_residual, 1e-10));
        checks.push(Check::below("section_base", 1.0, n, section.base_residual, 1e-12));

        let pair = ReductivePair::rotations(n).map_err(lib_err)?;
        for (i, &lambda) in b.bracket_lambdas.iter().enumerate() {
            let seed = ctx.seed.wrapping_add(i as u64);
            let r = deformed_bracket_check(&pair, lambda, b.triples, seed).map_err(lib_err)?;
            checks.push(Check {
                name: "bracket_antisymmetry",
                lambda,
                n,
                value: r.antisymmetry,
                threshold: 0.0,
                passed: r.antisymmetry == 0.0,
            });
            checks.push(Check::below("bracket_jacobi", lambda, n, r.max_jacobi_residual, 1e-12));
            if lambda == 1.0 {
                checks.push(Check::below("bracket_undeformed", lambda, n, r.undeformed_defect, 1e-14));
            }
        }
    }
    let mut failing: Vec<String> = Vec::new();
    for c in checks.iter().filter(|c| !c.passed) {
        if !failing.iter().any(|f| f == c.name) {
            failing.push(c.name.to_string());
        }
    }
    let payload = BundlePayload {
        passed: failing.is_empty(),
        failing,
        checks,
    };
    output::write_report(ctx.out, "verify-bundle", &payload, &ctx.metadata())?;
    if payload.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!("verify-bundle: failing checks: {}", payload.failing.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

#[derive(Debug, Serialize)]
struct AnalyzePayload {
    instance: &'static str,
    n: usize,
    lambda_hat: f64,
    newton_iters: usize,
    corrector: CorrectorDiagnostics,
    nondegeneracy: NondegeneracyReport,
    diagnostics: DiagnosticsReport,
    injected_degenerate_mode: bool,
    derived_scalars: BTreeMap<String, f64>,
    state: ProblemState,
}

#[derive(Debug, Serialize)]
struct FailurePayload {
    instance: &'static str,
    lambda_hat: f64,
    error: String,
}

pub fn analyze(ctx: &Context) -> Result<i32, CliError> {
    let p = ctx.config.problem()?;
    let problem = build_problem(p)?;
    let lambda = default_lambda(p);
    let seed_state = initial_state(&problem, p, ctx.base, lambda)?;
    let cc = ctx.config.continuation(ctx.seed);
    let out = match corrector_step(&problem, &seed_state, lambda, &cc) {
        Ok(out) => out,
        Err(e) => {
            let payload = FailurePayload {
                instance: problem.name(),
                lambda_hat: lambda,
                error: e.to_string(),
            };
            output::write_report(ctx.out, "analyze", &payload, &ctx.metadata())?;
            eprintln!("analyze: corrector failed: {e}");
            return Ok(EXIT_CONVERGENCE);
        }
    };
    let state = out.state;
    let run = || -> equideform::Result<_> {
        let residual = problem.residual_norm(&state, lambda)?;
        let mut j = problem.jacobi(&state, lambda)?;
        let tol = ctx.config.nondegeneracy();
        if ctx.config.fixture.inject_degenerate_mode {
            j = inject_degenerate_mode(&j, tol.kernel_rel_for(j.dim()));
        }
        let kj = problem.killing_jacobi_basis(&state, lambda)?;
        let report = assess(&j, &kj, &tol, residual)?;
        let diagnostics = full_diagnostics(&problem, &state, lambda, &j, ctx.seed)?;
        Ok((report, diagnostics, problem.derived_scalars(&state, lambda)?))
    };
    let (report, diagnostics, derived_scalars) = run().map_err(|e| CliError::Config(e.to_string()))?;
    let ok = report.verdict == Verdict::Nondegenerate && diagnostics.passed;
    eprintln!(
        "analyze: {} kernel {}/{} verdict {:?}",
        problem.name(),
        report.kernel_dim,
        report.killing_rank,
        report.verdict
    );
    let payload = AnalyzePayload {
        instance: problem.name(),
        n: problem.grid.len(),
        lambda_hat: lambda,
        newton_iters: out.iterations,
        corrector: out.diagnostics,
        nondegeneracy: report,
        diagnostics,
        injected_degenerate_mode: ctx.config.fixture.inject_degenerate_mode,
        derived_scalars,
        state,
    };
    output::write_report(ctx.out, "analyze", &payload, &ctx.metadata())?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Debug, Serialize)]
struct ContinuePayload<'a> {
    instance: &'static str,
    termination: &'a Termination,
    record_count: usize,
    final_lambda_hat: Option<f64>,
    diagnostics_passed: bool,
    max_symmetry_residual: f64,
    max_hessian_consistency: f64,
    max_orthogonality_defect: f64,
    diagnostics: &'a [RecordDiagnostics],
}

#[derive(Serialize)]
struct JsonLine<'a, R: Serialize> {
    #[serde(flatten)]
    record: &'a R,
    config: &'a RunConfig,
    input_hash: &'a str,
}

pub fn continue_path(ctx: &Context) -> Result<i32, CliError> {
    let p = ctx.config.problem()?;
    let path = ctx
        .config
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("continue needs a [path] section".into()))?;
    let problem = build_problem(p)?;
    let cc = ctx.config.continuation(ctx.seed);
    cc.validate().map_err(lib_err)?;
    let seed_state = initial_state(&problem, p, ctx.base, path.start)?;
    let run = continue_branch(&problem, &seed_state, &cc).map_err(lib_err)?;

    let mut jsonl = String::new();
    for record in &run.records {
        jsonl.push_str(&output::to_line(&JsonLine {
            record,
            config: ctx.config,
            input_hash: &ctx.input_hash,
        })?);
        jsonl.push('\n');
    }
    output::write_file(&ctx.out.join("branch.jsonl"), &jsonl)?;

    let scalar = primary_scalar(&problem);
    let mut csv = format!("lambda_hat,residual_norm,kernel_dim,{scalar}\n");
    for r in &run.records {
        let value = r.derived_scalars.get(scalar).copied().unwrap_or(f64::NAN);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            output::float(r.lambda_hat),
            output::float(r.residual_norm),
            r.kernel_dim,
            output::float(value)
        ));
    }
    output::write_file(&ctx.out.join("branch.csv"), &csv)?;

    let max_of = |f: &dyn Fn(&RecordDiagnostics) -> f64| run.diagnostics.iter().map(f).fold(0.0, f64::max);
    let diagnostics_passed = run.diagnostics.iter().all(|d| d.operator.passed);
    let payload = ContinuePayload {
        instance: problem.name(),
        termination: &run.termination,
        record_count: run.records.len(),
        final_lambda_hat: run.records.last().map(|r| r.lambda_hat),
        diagnostics_passed,
        max_symmetry_residual: max_of(&|d| d.operator.symmetry_residual),
        max_hessian_consistency: max_of(&|d| d.operator.hessian_consistency.unwrap_or(0.0)),
        max_orthogonality_defect: max_of(&|d| d.corrector.max_orthogonality_defect),
        diagnostics: &run.diagnostics,
    };
    output::write_report(ctx.out, "continue", &payload, &ctx.metadata())?;
    eprintln!(
        "continue: {} records, termination {:?}",
        run.records.len(),
        run.termination
    );
    Ok(match run.termination {
        Termination::Completed if diagnostics_passed => EXIT_OK,
        Termination::Completed | Termination::Degenerate { .. } => EXIT_CHECK_FAILED,
        Termination::Failed { .. } => EXIT_CONVERGENCE,
    })
}

#[derive(Debug, Serialize)]
struct CongruencePayload {
    instance: &'static str,
    lambda_hat: f64,
    compare_h: Option<f64>,
    applied: GroupParameters,
    recovered: GroupParameters,
    /// Largest `|t_recovered + t_applied|`; the projection undoes the motion.
    parameter_error: Option<f64>,
    distance: f64,
    corrected: bool,
    congruent: bool,
}

pub fn congruence(ctx: &Context) -> Result<i32, CliError> {
    let p = ctx.config.problem()?;
    let settings = &ctx.config.congruence;
    let problem = build_problem(p)?;
    let lambda = default_lambda(p);
    let cc = ctx.config.continuation(ctx.seed);
    let polish = |problem: &equideform::variational::Problem, s: &ProblemState| {
        corrector_step(problem, s, lambda, &cc).map(|o| o.state)
    };
    let seed_state = initial_state(&problem, p, ctx.base, lambda)?;
    let failure = |e: equideform::Error| -> Result<i32, CliError> {
        let payload = FailurePayload {
            instance: problem.name(),
            lambda_hat: lambda,
            error: e.to_string(),
        };
        output::write_report(ctx.out, "congruence", &payload, &ctx.metadata())?;
        eprintln!("congruence: {e}");
        Ok(EXIT_CONVERGENCE)
    };
    let base = match polish(&problem, &seed_state) {
        Ok(s) => s,
        Err(e) => return failure(e),
    };
    let other = match settings.compare_h {
        None => base.clone(),
        Some(h) => {
            if !matches!(
                problem.instance,
                Instance::CmcCircle { .. } | Instance::CmcProfile { .. }
            ) {
                return Err(CliError::Config("compare_h applies to CMC instances only".into()));
            }
            let other_problem = build_problem_with_h(p, Some(h))?;
            let s = other_problem.analytic_seed(lambda).map_err(lib_err)?;
            match polish(&other_problem, &s) {
                Ok(s) => s,
                Err(e) => return failure(e),
            }
        }
    };

    let generators = match orbit_project(&problem, &base, lambda, &base, &cc) {
        Ok(proj) => proj.parameters.generators,
        Err(e) => return failure(e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut t: Vec<f64> = generators.iter().map(|_| rng.sample(StandardNormal)).collect();
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = settings.max_norm * rng.random::<f64>() / norm.max(f64::MIN_POSITIVE);
    t.iter_mut().for_each(|x| *x *= scale);
    let names = generator_names(&problem.instance);
    let applied = GroupParameters {
        names: generators.iter().map(|&g| names[g].to_string()).collect(),
        generators,
        t,
    };
    let count = problem.generator_count();
    let moved = match problem.apply_motion(&other, lambda, &applied.full(count)) {
        Ok(s) => s,
        Err(e) => return failure(e),
    };
    let result = match congruence_check(&problem, &base, &moved, lambda, settings.tol, &cc) {
        Ok(r) => r,
        Err(e) => return failure(e),
    };
    let parameter_error = settings.compare_h.is_none().then(|| {
        let a = applied.full(count);
        let r = result.parameters.full(count);
        a.iter().zip(&r).map(|(a, r)| (a + r).abs()).fold(0.0, f64::max)
    });
    let congruent = result.congruent && parameter_error.is_none_or(|e| e < settings.param_tol);
    let payload = CongruencePayload {
        instance: problem.name(),
        lambda_hat: lambda,
        compare_h: settings.compare_h,
        applied,
        recovered: result.parameters,
        parameter_error,
        distance: result.distance,
        corrected: result.corrected,
        congruent,
    };
    output::write_report(ctx.out, "congruence", &payload, &ctx.metadata())?;
    eprintln!(
        "congruence: congruent={} distance={:e}",
        payload.congruent, payload.distance
    );
    Ok(if congruent { EXIT_OK } else { EXIT_CHECK_FAILED })
}
