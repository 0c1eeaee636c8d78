//! Oracle-versus-analysis agreement on randomly generated workloads.
//!
//! The benchmark corpus never uses predicate deletes and exercises inserts
//! only lightly, so this generator is biased toward writes: random schemas,
//! random statement kinds, occasional loops and optional blocks. For every
//! workload and setting, a fuzz campaign must come back clean — dependency
//! flow, cycle shapes, summary-graph coverage, and serializability of
//! everything declared robust.

use mvrc_core::oracle::{fuzz_soundness, FuzzConfig};
use mvrc_core::workload::{
    validate_workload, AnalysisSettings, AttrSet, Btp, ForeignKeyDecl, Granularity, Method,
    ProgramNode, RelationDecl, Schema, Statement, StatementKind,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn build_workload(seed: u64) -> (Schema, Vec<Btp>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let rel_count = rng.gen_range(1..=2usize);
    let mut relations = Vec::new();
    for r in 0..rel_count {
        let attr_count = rng.gen_range(1..=3usize);
        let attributes: Vec<String> = (0..attr_count).map(|a| format!("a{a}")).collect();
        let key_len = rng.gen_range(1..=attr_count);
        relations.push(RelationDecl {
            name: format!("R{r}"),
            key: attributes[..key_len].to_vec(),
            attributes,
        });
    }
    let mut foreign_keys = Vec::new();
    for f in 0..rng.gen_range(0..=1usize) {
        let from = rng.gen_range(0..rel_count);
        let to = rng.gen_range(0..rel_count);
        let needed = relations[to].key.len();
        if relations[from].attributes.len() < needed {
            continue;
        }
        foreign_keys.push(ForeignKeyDecl {
            name: format!("f{f}"),
            from_relation: relations[from].name.clone(),
            from_attrs: relations[from].attributes[..needed].to_vec(),
            to_relation: relations[to].name.clone(),
            to_attrs: relations[to].key.clone(),
        });
    }
    let schema = Schema {
        relations,
        foreign_keys,
    };

    let mut label = 0usize;
    let mut programs = Vec::new();
    for p in 0..rng.gen_range(1..=3usize) {
        let mut items = Vec::new();
        for _ in 0..rng.gen_range(1..=3usize) {
            let rel = &schema.relations[rng.gen_range(0..schema.relations.len())];
            let kind = StatementKind::ALL[rng.gen_range(0..7)];
            let full: AttrSet = rel.attributes.iter().cloned().collect();
            let sub = |rng: &mut StdRng, non_empty: bool| -> AttrSet {
                loop {
                    let s: AttrSet = rel
                        .attributes
                        .iter()
                        .filter(|_| rng.gen_bool(0.6))
                        .cloned()
                        .collect();
                    if !non_empty || !s.is_empty() {
                        return s;
                    }
                }
            };
            let mut q = Statement::new(format!("q{label}"), kind, rel.name.clone());
            label += 1;
            match kind {
                StatementKind::Insert | StatementKind::KeyDelete => q.mod_set = Some(full),
                StatementKind::PredDelete => {
                    q.pred_set = Some(sub(&mut rng, false));
                    q.mod_set = Some(full);
                }
                StatementKind::KeySelect => q.obs_set = Some(sub(&mut rng, false)),
                StatementKind::PredSelect => {
                    q.pred_set = Some(sub(&mut rng, false));
                    q.obs_set = Some(sub(&mut rng, false));
                }
                StatementKind::KeyUpdate => {
                    q.obs_set = Some(sub(&mut rng, false));
                    q.mod_set = Some(sub(&mut rng, true));
                }
                StatementKind::PredUpdate => {
                    q.pred_set = Some(sub(&mut rng, false));
                    q.obs_set = Some(sub(&mut rng, false));
                    q.mod_set = Some(sub(&mut rng, true));
                }
            }
            let node = ProgramNode::Stmt(q);
            items.push(match rng.gen_range(0..10) {
                0 => ProgramNode::Loop(Box::new(node)),
                1 => ProgramNode::Optional(Box::new(node)),
                _ => node,
            });
        }
        programs.push(Btp::new(format!("P{p}"), ProgramNode::Seq(items)));
    }
    (schema, programs)
}

#[test]
fn fuzz_campaigns_on_random_workloads_are_clean() {
    let mut robust_cases = 0usize;
    let mut counterexamples = 0usize;
    for seed in 0..40u64 {
        let (schema, programs) = build_workload(seed);
        assert!(
            validate_workload(&schema, &programs).is_empty(),
            "seed {seed} generated an invalid workload"
        );
        for granularity in [Granularity::Attribute, Granularity::Tuple] {
            let settings = AnalysisSettings::new(granularity, true, Method::Type2);
            let report = fuzz_soundness(
                &schema,
                &programs,
                &settings,
                &FuzzConfig {
                    budget: 250,
                    seed: seed ^ 0x5EED,
                    ..FuzzConfig::default()
                },
            )
            .unwrap();
            assert!(
                report.is_clean(),
                "seed {seed} {granularity:?}: {}\n{:?}",
                report.summary(),
                report.first_violation
            );
            if report.declared_robust {
                robust_cases += 1;
            }
            counterexamples += report.expected_counterexamples;
        }
    }
    // The generator must cover both outcomes for the run to mean anything.
    assert!(robust_cases > 5, "only {robust_cases} robust cases");
    assert!(
        counterexamples > 100,
        "only {counterexamples} counterexamples"
    );
}
