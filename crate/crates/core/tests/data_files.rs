//! The committed workload and SQL files must agree with the in-code
//! benchmark builders: the DSL files are the canonical emission of the
//! builders, and translating the SQL yields the same programs statement for
//! statement, with the builders' constraint sets appearing as the inferred
//! candidates.

use mvrc_core::bench::{auction, smallbank, tpcc};
use mvrc_core::dsl::{emit_workload, parse_workload};
use mvrc_core::sql::translate_sql_file;
use mvrc_core::workload::{Btp, Schema};

type Case = (&'static str, (Schema, Vec<Btp>), &'static str, &'static str);

fn cases() -> Vec<Case> {
    vec![
        (
            "auction",
            auction(),
            include_str!("../data/auction.workload"),
            include_str!("../data/auction.sql"),
        ),
        (
            "smallbank",
            smallbank(),
            include_str!("../data/smallbank.workload"),
            include_str!("../data/smallbank.sql"),
        ),
        (
            "tpcc",
            tpcc(),
            include_str!("../data/tpcc.workload"),
            include_str!("../data/tpcc.sql"),
        ),
    ]
}

#[test]
fn workload_files_are_the_canonical_emission_of_the_builders() {
    for (name, (schema, programs), text, _) in cases() {
        assert_eq!(
            emit_workload(&schema, &programs),
            text,
            "{name}.workload is stale"
        );
    }
}

#[test]
fn workload_files_parse_back_to_the_builders() {
    for (name, (schema, programs), text, _) in cases() {
        let (parsed_schema, parsed_programs) =
            parse_workload(text, Some(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        assert_eq!(parsed_schema, schema, "{name} schema");
        assert_eq!(parsed_programs, programs, "{name} programs");
    }
}

#[test]
fn sql_translation_matches_the_hand_encoded_programs() {
    for (name, (schema, programs), _, sql) in cases() {
        let translated =
            translate_sql_file(sql, &schema).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        assert_eq!(translated.len(), programs.len(), "{name} program count");
        for (got, want) in translated.iter().zip(&programs) {
            assert_eq!(got.btp.name, want.name, "{name} program name");
            assert_eq!(got.btp.body, want.body, "{name}/{} body", want.name);
            // The inferred constraint candidates are exactly the frozen
            // per-program annotation sets.
            assert_eq!(
                got.candidates, want.fk_annotations,
                "{name}/{} constraint candidates",
                want.name
            );
        }
    }
}
