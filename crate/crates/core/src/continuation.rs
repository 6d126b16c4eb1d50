//! Branch continuation modulo the symmetry group: a bordered Newton
//! corrector constrained to the slice, a secant predictor with step
//! control, orbit projection and congruence checks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::equivariance::{
    full_diagnostics, killing_frame, nondegeneracy_report, slice_basis, transversality_margin,
    DiagnosticsReport, SliceBasis, Tolerances, Verdict,
};
use crate::error::{Error, Result};
use crate::variational::{generator_names, Problem, ProblemState};

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationConfig {
    pub start: f64,
    pub end: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Corrector stops once the residual `W`-norm is below this.
    pub tolerance: f64,
    pub max_newton: usize,
    pub retries: usize,
    /// Largest residual norm a corrector accepts as a starting point.
    pub basin_guard: f64,
    /// Operator diagnostics run on every `diagnostics_every`-th record.
    pub diagnostics_every: usize,
    pub growth: f64,
    pub min_margin: f64,
    pub max_condition: f64,
    pub trust_radius: f64,
    pub nondegeneracy: Tolerances,
    pub seed: u64,
}

impl ContinuationConfig {
    pub fn new(start: f64, end: f64, step: f64) -> Self {
        Self {
            start,
            end,
            initial_step: step,
            min_step: step * 1e-3,
            max_step: step,
            tolerance: 1e-10,
            max_newton: 12,
            retries: 6,
            basin_guard: 5e-2,
            diagnostics_every: 1,
            growth: 1.3,
            min_margin: 0.1,
            max_condition: 1e12,
            trust_radius: 0.5,
            nondegeneracy: Tolerances::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("max_step", self.max_step),
            ("tolerance", self.tolerance),
            ("basin_guard", self.basin_guard),
            ("max_condition", self.max_condition),
            ("trust_radius", self.trust_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.min_step > self.max_step || self.initial_step > self.max_step {
            return Err(Error::Precondition("step bounds are inconsistent".into()));
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::Precondition("path ends must be finite".into()));
        }
        if self.max_newton == 0 || self.diagnostics_every == 0 {
            return Err(Error::Precondition("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// Coefficients of `exp(sum_i t_i X_i)` over a subset of the generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupParameters {
    pub generators: Vec<usize>,
    pub names: Vec<String>,
    pub t: Vec<f64>,
}

impl GroupParameters {
    /// Coefficient vector over all `count` generators.
    pub fn full(&self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        for (&g, &t) in self.generators.iter().zip(&self.t) {
            out[g] = t;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CorrectorDiagnostics {
    /// Residual norm before each Newton update and at the end.
    pub residual_norms: Vec<f64>,
    /// Largest `|<delta, h>_W| / (|delta|_W |h|_W)` over updates and
    /// Killing–Jacobi frame vectors.
    pub max_orthogonality_defect: f64,
    pub max_condition: f64,
}

#[derive(Debug, Clone)]
pub struct CorrectorOutcome {
    pub state: ProblemState,
    pub iterations: usize,
    pub diagnostics: CorrectorDiagnostics,
}

/// Newton iteration on the bordered system
/// `[[W J, W B], [B^T W, 0]] [delta; mu] = [-W r; 0]`, where the columns of
/// `B` are a `W`-orthonormal basis of the Killing–Jacobi span at the
/// current iterate.
pub fn corrector_step(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    config: &ContinuationConfig,
) -> Result<CorrectorOutcome> {
    let pairing = problem.pairing();
    let w = &pairing.weights;
    let sw = pairing.sqrt_weights();
    let n = pairing.dim();
    let mut x = state.clone();
    let mut diag = CorrectorDiagnostics::default();
    for iter in 0..=config.max_newton {
        let r = problem.residual(&x, lambda_hat)?;
        let norm = pairing.norm(&r);
        diag.residual_norms.push(norm);
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
            });
        }
        if iter == 0 && norm > config.basin_guard {
            return Err(Error::Precondition(format!(
                "initial residual {norm:e} exceeds the basin guard {:e}",
                config.basin_guard
            )));
        }
        if norm < config.tolerance {
            return Ok(CorrectorOutcome {
                state: x,
                iterations: iter,
                diagnostics: diag,
            });
        }
        if iter == config.max_newton {
            break;
        }
        let j = problem.jacobi(&x, lambda_hat)?;
        let kj = problem.killing_jacobi_basis(&x, lambda_hat)?;
        let frame = killing_frame(&pairing, &kj, config.nondegeneracy.killing_rel);
        let k = frame.ncols();
        let mut a = DMatrix::zeros(n + k, n + k);
        a.view_mut((0, 0), (n, n)).copy_from(&j.weighted());
        for c in 0..k {
            for i in 0..n {
                // W B with B = W^{-1/2} frame
                let v = frame[(i, c)] * sw[i];
                a[(i, n + c)] = v;
                a[(n + c, i)] = v;
            }
        }
        let mut rhs = DVector::zeros(n + k);
        for i in 0..n {
            rhs[i] = -w[i] * r[i];
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        diag.max_condition = diag.max_condition.max(cond);
        if !(cond <= config.max_condition) {
            return Err(Error::IllConditioned(cond));
        }
        let sol = svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::Precondition(e.to_string()))?;
        let delta = sol.rows(0, n).into_owned();
        let dnorm = pairing.norm(&delta);
        if dnorm > 0.0 {
            for c in 0..k {
                let b = DVector::from_fn(n, |i, _| frame[(i, c)] / sw[i]);
                let defect = pairing.inner(&delta, &b).abs() / (dnorm * pairing.norm(&b));
                diag.max_orthogonality_defect = diag.max_orthogonality_defect.max(defect);
            }
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                residual: norm,
            });
        }
        x = problem.displace(&x, &delta);
    }
    Err(Error::NoConvergence {
        iterations: config.max_newton,
        residual: *diag.residual_norms.last().unwrap_or(&f64::NAN),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub lambda_hat: f64,
    pub state: ProblemState,
    pub residual_norm: f64,
    pub kernel_dim: usize,
    pub killing_rank: usize,
    pub max_principal_angle: f64,
    pub spectral_gap: f64,
    pub verdict: Verdict,
    pub transversality_margin: f64,
    pub newton_iters: usize,
    pub derived_scalars: BTreeMap<String, f64>,
    /// Set on a final record that failed certification.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordDiagnostics {
    pub record: usize,
    pub lambda_hat: f64,
    pub operator: DiagnosticsReport,
    pub corrector: CorrectorDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Degenerate { lambda_hat: f64 },
    Failed { lambda_hat: f64, error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRun {
    pub records: Vec<BranchRecord>,
    pub diagnostics: Vec<RecordDiagnostics>,
    pub termination: Termination,
}

enum Attempt {
    Accepted(Box<(BranchRecord, CorrectorDiagnostics, SliceBasis)>),
    Degenerate(Box<BranchRecord>),
    Rejected(String),
}

fn attempt(
    problem: &Problem,
    guess: &ProblemState,
    lambda_hat: f64,
    config: &ContinuationConfig,
    previous_slice: Option<&SliceBasis>,
) -> Result<Attempt> {
    let out = match corrector_step(problem, guess, lambda_hat, config) {
        Ok(out) => out,
        Err(e) => return Ok(Attempt::Rejected(e.to_string())),
    };
    let report = match nondegeneracy_report(problem, &out.state, lambda_hat, &config.nondegeneracy) {
        Ok(r) => r,
        Err(e) => return Ok(Attempt::Rejected(e.to_string())),
    };
    let slice = slice_basis(problem, &out.state, lambda_hat)?;
    let margin = match previous_slice {
        Some(s) => transversality_margin(problem, &out.state, lambda_hat, s)?,
        None => transversality_margin(problem, &out.state, lambda_hat, &slice)?,
    };
    let record = BranchRecord {
        lambda_hat,
        residual_norm: report.residual_norm,
        kernel_dim: report.kernel_dim,
        killing_rank: report.killing_rank,
        max_principal_angle: report.max_principal_angle,
        spectral_gap: report.spectral_gap,
        verdict: report.verdict,
        transversality_margin: margin,
        newton_iters: out.iterations,
        derived_scalars: problem.derived_scalars(&out.state, lambda_hat)?,
        state: out.state,
        flagged: false,
    };
    Ok(match report.verdict {
        Verdict::Degenerate => Attempt::Degenerate(Box::new(BranchRecord {
            flagged: true,
            ..record
        })),
        Verdict::Indeterminate => Attempt::Rejected(format!(
            "nondegeneracy indeterminate (kernel {}, Killing rank {}, gap {:e})",
            record.kernel_dim, record.killing_rank, record.spectral_gap
        )),
        Verdict::Nondegenerate if margin <= config.min_margin => {
            Attempt::Rejected(format!("transversality margin {margin} too small"))
        }
        Verdict::Nondegenerate => Attempt::Accepted(Box::new((record, out.diagnostics, slice))),
    })
}

/// Marches the parameter from `config.start` to `config.end`.
pub fn continue_branch(
    problem: &Problem,
    seed_state: &ProblemState,
    config: &ContinuationConfig,
) -> Result<BranchRun> {
    config.validate()?;
    let mut run = BranchRun {
        records: Vec::new(),
        diagnostics: Vec::new(),
        termination: Termination::Completed,
    };
    let mut slice = match attempt(problem, seed_state, config.start, config, None)? {
        Attempt::Accepted(acc) => {
            let (record, corr, slice) = *acc;
            push(problem, config, &mut run, record, corr)?;
            slice
        }
        Attempt::Degenerate(record) => {
            run.records.push(*record);
            run.termination = Termination::Degenerate {
                lambda_hat: config.start,
            };
            return Ok(run);
        }
        Attempt::Rejected(why) => {
            run.termination = Termination::Failed {
                lambda_hat: config.start,
                error: format!("seed rejected: {why}"),
            };
            return Ok(run);
        }
    };

    let direction = (config.end - config.start).signum();
    let landing = 1e-12 * config.end.abs().max(1.0);
    let mut step = config.initial_step;
    let mut fast = 0;
    let mut current = config.start;
    while (config.end - current).abs() > landing {
        let mut h = step;
        let mut tries = 0;
        loop {
            let remaining = (config.end - current).abs();
            let target = if h >= remaining - landing {
                config.end
            } else {
                current + direction * h
            };
            let guess = predict(problem, &run.records, target);
            let outcome = match guess {
                Some(g) => attempt(problem, &g, target, config, Some(&slice))?,
                None => Attempt::Rejected("predictor left the state domain".into()),
            };
            match outcome {
                Attempt::Accepted(acc) => {
                    let (record, corr, new_slice) = *acc;
                    if record.newton_iters <= 3 {
                        fast += 1;
                    } else {
                        fast = 0;
                    }
                    step = h;
                    if fast >= 2 {
                        step = (step * config.growth).min(config.max_step);
                        fast = 0;
                    }
                    current = target;
                    slice = new_slice;
                    push(problem, config, &mut run, record, corr)?;
                    break;
                }
                Attempt::Degenerate(record) => {
                    run.records.push(*record);
                    run.termination = Termination::Degenerate { lambda_hat: target };
                    return Ok(run);
                }
                Attempt::Rejected(why) => {
                    tries += 1;
                    fast = 0;
                    h *= 0.5;
                    if tries > config.retries || h < config.min_step {
                        run.termination = Termination::Failed {
                            lambda_hat: target,
                            error: why,
                        };
                        return Ok(run);
                    }
                }
            }
        }
    }
    Ok(run)
}

fn push(
    problem: &Problem,
    config: &ContinuationConfig,
    run: &mut BranchRun,
    record: BranchRecord,
    corrector: CorrectorDiagnostics,
) -> Result<()> {
    let index = run.records.len();
    if index % config.diagnostics_every == 0 {
        let j = problem.jacobi(&record.state, record.lambda_hat)?;
        let operator = full_diagnostics(
            problem,
            &record.state,
            record.lambda_hat,
            &j,
            config.seed.wrapping_add(index as u64),
        )?;
        run.diagnostics.push(RecordDiagnostics {
            record: index,
            lambda_hat: record.lambda_hat,
            operator,
            corrector,
        });
    }
    run.records.push(record);
    Ok(())
}

/// Secant extrapolation through the last two records, or the last state.
fn predict(problem: &Problem, records: &[BranchRecord], target: f64) -> Option<ProblemState> {
    let last = records.last()?;
    let guess = match records.len() {
        1 => last.state.clone(),
        k => {
            let prev = &records[k - 2];
            let ratio = (target - last.lambda_hat) / (last.lambda_hat - prev.lambda_hat);
            let delta = (problem.free_values(&last.state) - problem.free_values(&prev.state)) * ratio;
            problem.displace(&last.state, &delta)
        }
    };
    problem.check_state(&guess, target).ok().map(|_| guess)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitProjection {
    pub parameters: GroupParameters,
    pub state: ProblemState,
    /// `W`-distance from the moved state to the affine slice through the
    /// reference.
    pub distance: f64,
    pub iterations: usize,
}

/// Generators whose Killing–Jacobi columns are independent, chosen by
/// greedy column pivoting in `W^{1/2}` coordinates.
fn pivot_generators(cols: &[DVector<f64>], rel: f64) -> Vec<usize> {
    let mut residual: Vec<DVector<f64>> = cols.to_vec();
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut chosen = Vec::new();
    loop {
        let best = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap());
        let Some((i, v)) = best else { break };
        let nv = v.norm();
        if !(nv > rel * scale) {
            break;
        }
        let q = v / nv;
        chosen.push(i);
        for r in residual.iter_mut() {
            let c = q.dot(r);
            *r -= &q * c;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Finds `t` so that `exp(sum t_i X_i)` moves `state` onto the affine slice
/// through `reference`.
pub fn orbit_project(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    reference: &ProblemState,
    config: &ContinuationConfig,
) -> Result<OrbitProjection> {
    let pairing = problem.pairing();
    let sw = pairing.sqrt_weights();
    let rel = config.nondegeneracy.killing_rel;
    let kj = problem.killing_jacobi_basis(reference, lambda_hat)?;
    let scaled: Vec<DVector<f64>> = kj.iter().map(|v| v.component_mul(&sw)).collect();
    let generators = pivot_generators(&scaled, rel);
    let names = generator_names(&problem.instance);
    let frame = killing_frame(&pairing, &kj, rel);
    let count = problem.generator_count();
    let ref_free = problem.free_values(reference);
    let make_params = |t: &DVector<f64>| GroupParameters {
        generators: generators.clone(),
        names: generators.iter().map(|&g| names[g].to_string()).collect(),
        t: t.iter().copied().collect(),
    };
    let residual = |t: &DVector<f64>| -> Result<(DVector<f64>, ProblemState)> {
        let moved = problem.apply_motion(state, lambda_hat, &make_params(t).full(count))?;
        let diff = (problem.free_values(&moved) - &ref_free).component_mul(&sw);
        Ok((frame.transpose() * diff, moved))
    };

    let k = generators.len();
    let mut t = DVector::zeros(k);
    let (mut r, mut moved) = residual(&t)?;
    let mut iterations = 0;
    let h = 1e-6;
    while r.norm() > 1e-15 && iterations < 50 {
        iterations += 1;
        let mut jac = DMatrix::zeros(frame.ncols(), k);
        for i in 0..k {
            let mut tp = t.clone();
            tp[i] += h;
            let mut tm = t.clone();
            tm[i] -= h;
            let col = (residual(&tp)?.0 - residual(&tm)?.0) / (2.0 * h);
            jac.set_column(i, &col);
        }
        let step = jac
            .svd(true, true)
            .solve(&(-&r), 1e-14)
            .map_err(|e| Error::Precondition(e.to_string()))?;
        t += &step;
        if t.norm() > config.trust_radius {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.norm(),
            });
        }
        let prev = r.norm();
        (r, moved) = residual(&t)?;
        if step.norm() < 1e-15 || (r.norm() >= prev && r.norm() < 1e-12) {
            break;
        }
    }
    if r.norm() > 1e-8 {
        return Err(Error::NoConvergence {
            iterations,
            residual: r.norm(),
        });
    }
    Ok(OrbitProjection {
        parameters: make_params(&t),
        state: moved,
        distance: r.norm(),
        iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Congruence {
    pub congruent: bool,
    pub parameters: GroupParameters,
    /// Final `W`-distance between the reference and the moved, corrected state.
    pub distance: f64,
    pub corrected: bool,
}

/// Moves `state2` onto the slice of `state1`, re-solves, and compares.
pub fn congruence_check(
    problem: &Problem,
    state1: &ProblemState,
    state2: &ProblemState,
    lambda_hat: f64,
    tol: f64,
    config: &ContinuationConfig,
) -> Result<Congruence> {
    let proj = orbit_project(problem, state2, lambda_hat, state1, config)?;
    let pairing = problem.pairing();
    let (final_state, corrected) = match corrector_step(problem, &proj.state, lambda_hat, config) {
        Ok(out) => (out.state, true),
        Err(Error::Precondition(_)) | Err(Error::NoConvergence { .. }) => (proj.state, false),
        Err(e) => return Err(e),
    };
    let distance =
        pairing.norm(&(problem.free_values(&final_state) - problem.free_values(state1)));
    Ok(Congruence {
        congruent: distance < tol,
        parameters: proj.parameters,
        distance,
        corrected,
    })
}
