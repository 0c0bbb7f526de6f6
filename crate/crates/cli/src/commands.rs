use std::time::Instant;

use anyhow::Context;
use cvarlab_core::{
    mc_cvar_estimate, run_vili, run_viq, simulate_policy, ActionId, AtomGrid, AugmentedPolicy,
    Evaluator as Forpecvar, ForpecvarConfig, Heuristic, McConfig, ModelFile, PolicySpec,
    SolverConfig, SolverKind, SspMdp, StateId, TracePoint,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{LoadedModel, ModelSource};
use crate::output::{self, Row, RowWriter};
use crate::{
    EvalArgs, EvaluateArgs, Evaluator, GenerateArgs, SimulateArgs, SolveArgs, SweepArgs, Validation,
};

/// A solver's output in the form the evaluators consume.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub solver: SolverKind,
    pub source: ModelSource,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_ms: Option<f64>,
    pub grid: AtomGrid,
    /// `value[s][k] = V(s, y_k)`.
    pub value: Vec<Vec<f64>>,
    pub policy: Vec<Vec<ActionId>>,
    /// `xi[s][k]` lists `(successor, factor)` for the chosen action.
    pub xi: Vec<Vec<Vec<(StateId, f64)>>>,
}

impl SolutionFile {
    fn augmented_policy(&self) -> AugmentedPolicy {
        AugmentedPolicy {
            grid: self.grid.clone(),
            action: self.policy.clone(),
            xi: self.xi.clone(),
        }
    }

    fn check_shape(&self, model: &SspMdp) -> anyhow::Result<()> {
        let (n, k) = (model.n_states(), self.grid.len());
        let ok = self.value.len() == n
            && self.policy.len() == n
            && self.xi.len() == n
            && self.value.iter().all(|r| r.len() == k)
            && self.policy.iter().all(|r| r.len() == k)
            && self.xi.iter().all(|r| r.len() == k);
        if !ok {
            return Err(Validation(format!(
                "solution tables do not match a model with {n} states and {k} atoms"
            ))
            .into());
        }
        Ok(())
    }
}

pub struct SolveSettings {
    pub kind: SolverKind,
    pub atoms: usize,
    pub alpha0: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

fn check_epsilon(epsilon: f64) -> anyhow::Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Validation(format!("--epsilon must be positive, got {epsilon}")).into());
    }
    Ok(())
}

fn solve_model(
    model: &SspMdp,
    source: &ModelSource,
    s: &SolveSettings,
) -> anyhow::Result<SolutionFile> {
    check_epsilon(s.epsilon)?;
    let grid = AtomGrid::log_spaced(s.alpha0, s.atoms)?;
    let cfg = SolverConfig {
        max_iterations: s.max_iterations,
        ..SolverConfig::with_epsilon(s.epsilon)
    };
    let start = Instant::now();
    let (value, policy, iterations, residual, xi) = match s.kind {
        SolverKind::Vili => {
            let sol = run_vili(model, &grid, &cfg)?;
            (sol.value, sol.policy, sol.iterations, sol.residual, sol.xi)
        }
        SolverKind::Viq => {
            let sol = run_viq(model, &grid, &cfg)?;
            let xi = AugmentedPolicy::from_quantile(model, &sol, cfg.lower_tail).xi;
            (sol.value, sol.policy, sol.iterations, sol.residual, xi)
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    log::info!(
        "{} on {} states x {} atoms: {iterations} iterations, {ms:.1} ms",
        s.kind,
        model.n_states(),
        grid.len()
    );
    Ok(SolutionFile {
        solver: s.kind,
        source: source.clone(),
        epsilon: s.epsilon,
        iterations,
        residual,
        solve_ms: Some(ms),
        grid,
        value,
        policy,
        xi,
    })
}

pub fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let loaded = a.model.source()?.load()?;
    ModelFile::from_model(&loaded.model)
        .write(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let source = a.model.source()?;
    let loaded = source.load()?;
    let settings = SolveSettings {
        kind: a.solver,
        atoms: a.grid.atoms,
        alpha0: a.grid.alpha0,
        epsilon: a.epsilon,
        max_iterations: a.max_iterations,
    };
    let mut sol = solve_model(&loaded.model, &source, &settings)?;
    if a.no_timing {
        sol.solve_ms = None;
    }
    output::write_json(Some(&a.out), &sol)
}

/// Confidence levels to evaluate: the requested ones, else every atom.
fn targets(requested: &[f64], grid: &AtomGrid) -> anyhow::Result<Vec<f64>> {
    if requested.is_empty() {
        return Ok(grid.atoms().to_vec());
    }
    let alpha0 = grid.alpha0();
    for &alpha in requested {
        if !(alpha <= 1.0) {
            return Err(Validation(format!("target α {alpha} above 1")).into());
        }
        if !(alpha >= alpha0 * (1.0 - 1e-12)) {
            return Err(Validation(format!("target α {alpha} below α₀ {alpha0}")).into());
        }
    }
    Ok(requested.to_vec())
}

fn start_states(requested: &[usize], loaded: &LoadedModel) -> anyhow::Result<Vec<StateId>> {
    if requested.is_empty() {
        return Ok(vec![loaded.start]);
    }
    let n = loaded.model.n_states();
    if let Some(&s) = requested.iter().find(|&&s| s >= n) {
        return Err(Validation(format!(
            "start state {s} out of range (model has {n} states)"
        ))
        .into());
    }
    Ok(requested.to_vec())
}

struct Evaluated {
    row: Row,
    trace: Option<Vec<TracePoint>>,
}

/// Evaluates one solution at every `(s0, alpha)` pair, in order.
fn evaluate_solution(
    loaded: &LoadedModel,
    sol: &SolutionFile,
    eval: &EvalArgs,
    seed: u64,
    parallel: bool,
) -> anyhow::Result<Vec<Evaluated>> {
    sol.check_shape(&loaded.model)?;
    let alphas = targets(&eval.alpha, &sol.grid)?;
    let starts = start_states(&eval.s0, loaded)?;
    let policy = sol.augmented_policy();
    let spec = PolicySpec::Augmented(&policy);
    let exact = match eval.evaluator {
        Evaluator::Forpecvar => Some(Forpecvar::new(
            &loaded.model,
            spec,
            ForpecvarConfig::default(),
        )?),
        Evaluator::Mc => None,
    };
    let tail = SolverConfig::default().lower_tail;
    let points: Vec<(StateId, f64)> = starts
        .iter()
        .flat_map(|&s| alphas.iter().map(move |&a| (s, a)))
        .collect();

    let one = |&(s0, alpha): &(StateId, f64)| -> anyhow::Result<Evaluated> {
        let start = Instant::now();
        let (cvar, var, trace) = match &exact {
            Some(ev) => {
                let r = ev.evaluate(s0, alpha, Heuristic::MinCost)?;
                (r.cvar, r.var, Some(r.trace))
            }
            None => {
                let cfg = McConfig {
                    samples: eval.samples,
                    seed,
                    max_steps: eval.max_steps,
                    time_budget: None,
                };
                let r = simulate_policy(&loaded.model, spec, s0, alpha, &cfg)?;
                let (cvar, var) = mc_cvar_estimate(&r.distribution, alpha);
                (cvar, var, None)
            }
        };
        let eval_ms = start.elapsed().as_secs_f64() * 1e3;
        let row = Row {
            domain: loaded.domain,
            rows: loaded.rows,
            cols: loaded.cols,
            solver: sol.solver.to_string(),
            atoms: sol.grid.len(),
            alpha0: sol.grid.alpha0(),
            s0,
            alpha,
            approx: sol.grid.interpolate(&sol.value[s0], alpha, tail),
            exact_cvar: cvar,
            exact_var: var,
            solve_ms: sol.solve_ms,
            eval_ms: Some(eval_ms),
        };
        Ok(Evaluated { row, trace })
    };

    if parallel {
        points.par_iter().map(one).collect()
    } else {
        points.iter().map(one).collect()
    }
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    s0: StateId,
    alpha: f64,
    cvar: f64,
    var: f64,
    /// `(X, y, V)` at each goal pop.
    trace: &'a [TracePoint],
}

pub fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.solution)
        .with_context(|| format!("reading {}", a.solution.display()))?;
    let sol: SolutionFile = serde_json::from_str(&text)
        .map_err(cvarlab_core::Error::from)
        .with_context(|| format!("parsing {}", a.solution.display()))?;
    let source = if a.model.is_given() {
        a.model.source()?
    } else {
        sol.source.clone()
    };
    let loaded = source.load()?;
    let results = evaluate_solution(&loaded, &sol, &a.eval, a.model.mc_seed(), true)?;

    let mut w = RowWriter::new(a.out.as_deref(), false)?;
    for r in &results {
        let mut row = r.row.clone();
        if a.no_timing {
            row.solve_ms = None;
            row.eval_ms = None;
        }
        w.write(&row)?;
    }
    w.finish()?;

    if let Some(path) = &a.trace {
        if a.eval.evaluator != Evaluator::Forpecvar {
            return Err(Validation("--trace needs --evaluator forpecvar".into()).into());
        }
        let records: Vec<TraceRecord<'_>> = results
            .iter()
            .map(|r| TraceRecord {
                s0: r.row.s0,
                alpha: r.row.alpha,
                cvar: r.row.exact_cvar,
                var: r.row.exact_var,
                trace: r.trace.as_deref().unwrap_or_default(),
            })
            .collect();
        output::write_json(Some(path), &records)?;
    }
    Ok(())
}

pub fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    check_epsilon(a.epsilon)?;
    if a.solver.is_empty() || a.atoms.is_empty() || a.alpha0.is_empty() {
        return Err(Validation(
            "--solver, --atoms and --alpha0 need at least one value each".into(),
        )
        .into());
    }
    let source = a.model.source()?;
    let loaded = source.load()?;
    let seed = a.model.mc_seed();

    let mut jobs = Vec::new();
    for &kind in &a.solver {
        for &atoms in &a.atoms {
            for &alpha0 in &a.alpha0 {
                jobs.push(SolveSettings {
                    kind,
                    atoms,
                    alpha0,
                    epsilon: a.epsilon,
                    max_iterations: a.max_iterations,
                });
            }
        }
    }

    let results: Vec<anyhow::Result<Vec<Evaluated>>> = jobs
        .par_iter()
        .map(|job| {
            let sol = solve_model(&loaded.model, &source, job)?;
            evaluate_solution(&loaded, &sol, &a.eval, seed, false)
        })
        .collect();

    // rows of every finished job are written, in job order, before any error is returned
    let mut w = RowWriter::new(a.out.as_deref(), true)?;
    let mut first_err = None;
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(rows) => {
                for r in rows {
                    let mut row = r.row;
                    if a.no_timing {
                        row.solve_ms = None;
                        row.eval_ms = None;
                    }
                    w.write(&row)?;
                }
            }
            Err(e) => {
                log::error!(
                    "{} N={} alpha0={} failed: {e:#}",
                    job.kind,
                    job.atoms,
                    job.alpha0
                );
                first_err.get_or_insert(e.context(format!(
                    "sweep point {} N={} alpha0={}",
                    job.kind, job.atoms, job.alpha0
                )));
            }
        }
    }
    w.finish()?;
    first_err.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct SimulationReport {
    s0: StateId,
    alpha: f64,
    seed: u64,
    samples: usize,
    failures: usize,
    mean: f64,
    cvar: f64,
    var: f64,
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.solution)
        .with_context(|| format!("reading {}", a.solution.display()))?;
    let sol: SolutionFile = serde_json::from_str(&text).map_err(cvarlab_core::Error::from)?;
    let source = if a.model.is_given() {
        a.model.source()?
    } else {
        sol.source.clone()
    };
    let loaded = source.load()?;
    sol.check_shape(&loaded.model)?;
    let s0 = start_states(&a.s0.into_iter().collect::<Vec<_>>(), &loaded)?[0];
    let policy = sol.augmented_policy();
    let seed = a.model.mc_seed();
    let cfg = McConfig {
        samples: a.samples,
        seed,
        max_steps: a.max_steps,
        time_budget: a.time_budget,
    };
    let r = simulate_policy(
        &loaded.model,
        PolicySpec::Augmented(&policy),
        s0,
        a.alpha,
        &cfg,
    )?;
    let (cvar, var) = mc_cvar_estimate(&r.distribution, a.alpha);
    let report = SimulationReport {
        s0,
        alpha: a.alpha,
        seed,
        samples: r.samples,
        failures: r.failures,
        mean: r.distribution.mean(),
        cvar,
        var,
    };
    output::write_json(a.out.as_deref(), &report)
}
