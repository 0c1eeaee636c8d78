//! Randomized soundness campaigns.
//!
//! A campaign instantiates random transaction sets from the workload's
//! LTPs (bindings respect the foreign-key annotations), samples MVRC
//! schedules over them, and asserts on every accepted schedule that the
//! dependency flow rule holds, that every serialization-graph cycle has the
//! required shape, that the summary graph covers every dependency, and —
//! when the analysis declared the workload robust — that the schedule is
//! conflict-serializable. Any violation is an implementation bug and comes
//! with a seed and a schedule dump for reproduction.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::oracle::deps::{check_cycle_conditions, check_graph_coverage, is_conflict_serializable};
use crate::oracle::schedule::{for_each_schedule, GenConfig, Schedule};
use crate::oracle::txn::{instantiate, Binding, Transaction};
use crate::oracle::universe::{TupleId, Universe};
use crate::robustness::{has_type1_cycle, has_type2_cycle, AnalysisError};
use crate::summary::construct_summary_graph;
use crate::unfold::{unfold_workload, Ltp};
use crate::workload::{validate_workload, AnalysisSettings, Btp, Method, Schema, StatementKind};

#[derive(Debug, Clone, Copy)]
pub struct FuzzConfig {
    /// Accepted-schedule budget for the whole campaign.
    pub budget: usize,
    pub seed: u64,
    pub max_txns: usize,
    pub max_tuples: u32,
    /// Upper bound on tuples read by one predicate-based statement.
    pub max_pred_tuples: usize,
    /// Accepted schedules sampled per transaction set.
    pub schedules_per_set: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            budget: 10_000,
            seed: 0,
            max_txns: 4,
            max_tuples: 3,
            max_pred_tuples: 3,
            schedules_per_set: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuzzReport {
    pub settings: AnalysisSettings,
    pub seed: u64,
    pub declared_robust: bool,
    pub accepted_schedules: usize,
    pub rejected_interleavings: usize,
    pub rejected_instantiations: usize,
    pub dependencies_checked: usize,
    pub cycles_checked: usize,
    pub flow_violations: usize,
    pub cycle_shape_violations: usize,
    pub coverage_violations: usize,
    /// Non-serializable schedules for a workload declared robust: always a
    /// bug.
    pub soundness_violations: usize,
    /// Non-serializable schedules for a workload not declared robust:
    /// expected counterexamples, reported for information.
    pub expected_counterexamples: usize,
    pub first_violation: Option<String>,
}

impl FuzzReport {
    pub fn is_clean(&self) -> bool {
        self.flow_violations == 0
            && self.cycle_shape_violations == 0
            && self.coverage_violations == 0
            && self.soundness_violations == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "{} seed={} robust={} schedules={} (rejected {} interleavings, {} instantiations) \
             deps={} cycles={} violations: flow={} shape={} coverage={} soundness={} \
             expected-counterexamples={}",
            self.settings.label(),
            self.seed,
            self.declared_robust,
            self.accepted_schedules,
            self.rejected_interleavings,
            self.rejected_instantiations,
            self.dependencies_checked,
            self.cycles_checked,
            self.flow_violations,
            self.cycle_shape_violations,
            self.coverage_violations,
            self.soundness_violations,
            self.expected_counterexamples,
        )
    }
}

const WRITE_KINDS: [StatementKind; 3] = [
    StatementKind::Insert,
    StatementKind::KeyUpdate,
    StatementKind::KeyDelete,
];

/// Assigns a tuple to every key-based statement of the LTP by backtracking
/// search: annotation constraints pin targets to foreign-key images of their
/// sources, and two key-based writing statements over the same relation must
/// not share a tuple (a transaction writes a tuple at most once). Domains
/// are shuffled for diversity. Returns `None` when unsatisfiable in this
/// universe.
fn solve_key_bindings<R: Rng>(
    ltp: &Ltp,
    universe: &Universe,
    rng: &mut R,
) -> Option<Vec<Option<TupleId>>> {
    let n = ltp.statements.len();
    let mut vars: Vec<usize> = Vec::new();
    let mut domains: Vec<Vec<TupleId>> = vec![Vec::new(); n];
    for occ in &ltp.statements {
        if occ.statement.kind.is_key_based() {
            let rel = universe.index.id(&occ.statement.relation)?;
            let mut domain: Vec<TupleId> = universe.tuples_of(rel).collect();
            domain.shuffle(rng);
            domains[occ.position] = domain;
            vars.push(occ.position);
        }
    }
    // Key-to-key annotation constraints; predicate sources are handled later
    // by filtering their tuple pools.
    let eq: Vec<(usize, usize, &str)> = ltp
        .annotations
        .iter()
        .filter(|a| ltp.kind_of(a.source).is_key_based())
        .map(|a| (a.source, a.target, a.fk.as_str()))
        .collect();
    let mut neq: Vec<(usize, usize)> = Vec::new();
    for (i, a) in ltp.statements.iter().enumerate() {
        for (j, b) in ltp.statements.iter().enumerate().skip(i + 1) {
            if WRITE_KINDS.contains(&a.statement.kind)
                && WRITE_KINDS.contains(&b.statement.kind)
                && a.statement.relation == b.statement.relation
            {
                neq.push((i, j));
            }
        }
    }

    let mut assignment: Vec<Option<TupleId>> = vec![None; n];
    let consistent = |assignment: &[Option<TupleId>]| -> bool {
        for &(src, dst, fk) in &eq {
            if let (Some(s), Some(d)) = (assignment[src], assignment[dst]) {
                if universe.fk_image(fk, s) != Some(d) {
                    return false;
                }
            }
        }
        for &(i, j) in &neq {
            if let (Some(a), Some(b)) = (assignment[i], assignment[j]) {
                if a == b {
                    return false;
                }
            }
        }
        true
    };

    fn backtrack(
        vars: &[usize],
        at: usize,
        domains: &[Vec<TupleId>],
        assignment: &mut Vec<Option<TupleId>>,
        consistent: &impl Fn(&[Option<TupleId>]) -> bool,
        nodes: &mut usize,
    ) -> bool {
        if at == vars.len() {
            return true;
        }
        let var = vars[at];
        for &candidate in &domains[var] {
            if *nodes == 0 {
                return false;
            }
            *nodes -= 1;
            assignment[var] = Some(candidate);
            if consistent(assignment)
                && backtrack(vars, at + 1, domains, assignment, consistent, nodes)
            {
                return true;
            }
            assignment[var] = None;
        }
        false
    }

    let mut nodes = 4000usize;
    if backtrack(&vars, 0, &domains, &mut assignment, &consistent, &mut nodes) {
        Some(assignment)
    } else {
        None
    }
}

fn sample_bindings<R: Rng>(
    ltp: &Ltp,
    universe: &Universe,
    config: &FuzzConfig,
    rng: &mut R,
) -> Option<Vec<Binding>> {
    let keys = solve_key_bindings(ltp, universe, rng)?;
    let mut written: HashSet<TupleId> = ltp
        .statements
        .iter()
        .filter(|occ| WRITE_KINDS.contains(&occ.statement.kind))
        .filter_map(|occ| keys[occ.position])
        .collect();

    let mut bindings: Vec<Binding> = Vec::with_capacity(ltp.statements.len());
    for occ in &ltp.statements {
        let pos = occ.position;
        if occ.statement.kind.is_key_based() {
            bindings.push(Binding::Tuple(keys[pos]?));
            continue;
        }
        let rel = universe.index.id(&occ.statement.relation)?;
        let mut pool: Vec<TupleId> = universe.tuples_of(rel).collect();
        // Predicate sources of annotations may only touch tuples mapping to
        // the annotated target.
        for ann in ltp.annotations.iter().filter(|a| a.source == pos) {
            let target = keys[ann.target]?;
            pool.retain(|t| universe.fk_image(&ann.fk, *t) == Some(target));
        }
        let writes = matches!(
            occ.statement.kind,
            StatementKind::PredUpdate | StatementKind::PredDelete
        );
        if writes {
            pool.retain(|t| !written.contains(t));
        }
        pool.shuffle(rng);
        let count = rng.gen_range(0..=config.max_pred_tuples.min(pool.len()));
        pool.truncate(count);
        if writes {
            written.extend(pool.iter().copied());
        }
        bindings.push(Binding::Tuples(pool));
    }
    Some(bindings)
}

/// Runs a soundness campaign over the workload at the given settings.
pub fn fuzz_soundness(
    schema: &Schema,
    programs: &[Btp],
    settings: &AnalysisSettings,
    config: &FuzzConfig,
) -> Result<FuzzReport, AnalysisError> {
    let issues = validate_workload(schema, programs);
    if !issues.is_empty() {
        return Err(AnalysisError::Invalid(issues));
    }
    let ltps: Vec<Arc<Ltp>> = unfold_workload(programs)
        .into_iter()
        .map(Arc::new)
        .collect();
    let graph = construct_summary_graph(
        ltps.iter().map(|l| (**l).clone()).collect(),
        schema,
        settings,
    );
    let verdict = match settings.method {
        Method::Type2 => has_type2_cycle(&graph),
        Method::Type1 => has_type1_cycle(&graph),
    };

    let mut report = FuzzReport {
        settings: *settings,
        seed: config.seed,
        declared_robust: verdict.robust,
        accepted_schedules: 0,
        rejected_interleavings: 0,
        rejected_instantiations: 0,
        dependencies_checked: 0,
        cycles_checked: 0,
        flow_violations: 0,
        cycle_shape_violations: 0,
        coverage_violations: 0,
        soundness_violations: 0,
        expected_counterexamples: 0,
        first_violation: None,
    };
    if config.budget == 0 || ltps.is_empty() {
        return Ok(report);
    }

    let mut rng = StdRng::seed_from_u64(config.seed);
    let max_rounds = config.budget.saturating_mul(20).max(100);

    'rounds: for round in 0..max_rounds {
        if report.accepted_schedules >= config.budget {
            break;
        }
        // Alternate uniform and fully random foreign-key images: uniform
        // universes keep annotation chains satisfiable, random ones cover
        // aliasing patterns the uniform map cannot produce.
        let universe = if round % 2 == 0 {
            Universe::uniform(schema, config.max_tuples)
        } else {
            Universe::random(schema, config.max_tuples, &mut rng)
        };
        let txn_count = rng.gen_range(1..=config.max_txns);
        let mut txns: Vec<Transaction> = Vec::with_capacity(txn_count);
        for id in 0..txn_count {
            let ltp = &ltps[rng.gen_range(0..ltps.len())];
            let mut made = None;
            for _ in 0..4 {
                let Some(bindings) = sample_bindings(ltp, &universe, config, &mut rng) else {
                    continue;
                };
                if let Ok(txn) = instantiate(ltp, id, &bindings, &universe) {
                    made = Some(txn);
                    break;
                }
            }
            match made {
                Some(txn) => txns.push(txn),
                None => {
                    report.rejected_instantiations += 1;
                    continue 'rounds;
                }
            }
        }
        // A tuple inserted or deleted twice across the set can never form a
        // schedule; skip such sets wholesale.
        let mut inserted = HashSet::new();
        let mut deleted = HashSet::new();
        for t in &txns {
            for tuple in t.inserted_tuples() {
                if !inserted.insert(tuple) {
                    report.rejected_instantiations += 1;
                    continue 'rounds;
                }
            }
            for tuple in t.deleted_tuples() {
                if !deleted.insert(tuple) {
                    report.rejected_instantiations += 1;
                    continue 'rounds;
                }
            }
        }

        let remaining = config.budget - report.accepted_schedules;
        let gen = GenConfig {
            budget: config.schedules_per_set.min(remaining),
            seed: rng.gen(),
            exhaustive_limit: 0, // always sample; exhaustive mode is for tests
        };
        let stats = for_each_schedule(&txns, &universe, &gen, |schedule| {
            inspect_schedule(&mut report, schedule, &graph, settings, &universe);
            ControlFlow::Continue(())
        });
        report.accepted_schedules += stats.accepted;
        report.rejected_interleavings += stats.rejected;
    }
    Ok(report)
}

fn inspect_schedule(
    report: &mut FuzzReport,
    schedule: &Schedule,
    graph: &crate::summary::SummaryGraph,
    settings: &AnalysisSettings,
    universe: &Universe,
) {
    let cycle_report = check_cycle_conditions(schedule, settings.granularity);
    report.dependencies_checked += cycle_report.dependencies;
    report.cycles_checked += cycle_report.cycles_checked;
    if !cycle_report.flow_violations.is_empty() {
        report.flow_violations += cycle_report.flow_violations.len();
        note_violation(report, &cycle_report.flow_violations[0], schedule, universe);
    }
    if !cycle_report.shape_violations.is_empty() {
        report.cycle_shape_violations += cycle_report.shape_violations.len();
        note_violation(
            report,
            &cycle_report.shape_violations[0],
            schedule,
            universe,
        );
    }
    match check_graph_coverage(schedule, graph, settings.granularity, universe) {
        Ok(_) => {}
        Err(missing) => {
            report.coverage_violations += 1;
            note_violation(report, &missing, schedule, universe);
        }
    }
    if !is_conflict_serializable(schedule, settings.granularity) {
        if report.declared_robust {
            report.soundness_violations += 1;
            note_violation(
                report,
                "non-serializable schedule for a robust workload",
                schedule,
                universe,
            );
        } else {
            report.expected_counterexamples += 1;
        }
    }
}

fn note_violation(
    report: &mut FuzzReport,
    message: &str,
    schedule: &Schedule,
    universe: &Universe,
) {
    if report.first_violation.is_none() {
        report.first_violation = Some(format!(
            "seed {}: {message}; schedule: {}",
            report.seed,
            schedule.dump(universe)
        ));
    }
}
