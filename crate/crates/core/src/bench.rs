//! Built-in benchmark workloads: SmallBank, TPC-C, Auction, and the scaled
//! Auction(n) family.
//!
//! The builders are the authoritative encodings; the DSL files shipped under
//! `data/` must stay byte-identical to the canonical emission of these
//! builders (covered by golden tests). Foreign-key constraints on programs
//! are the frozen result of running the parameter-flow inference over the
//! shipped SQL, reviewed against the expected analysis results.

use std::fmt;
use std::str::FromStr;

use crate::workload::{
    Btp, FkAnnotation, ForeignKeyDecl, ProgramNode, RelationDecl, Schema, Statement,
    StatementKind::*,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    SmallBank,
    Tpcc,
    Auction,
    /// Auction scaled to `n` items, each with its own bids relation.
    AuctionN(u32),
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchmarkId::SmallBank => f.write_str("smallbank"),
            BenchmarkId::Tpcc => f.write_str("tpcc"),
            BenchmarkId::Auction => f.write_str("auction"),
            BenchmarkId::AuctionN(n) => write!(f, "auction({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownBenchmark(pub String);

impl fmt::Display for UnknownBenchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown benchmark {:?}; expected smallbank, tpcc, auction, or auction(N)",
            self.0
        )
    }
}

impl std::error::Error for UnknownBenchmark {}

impl FromStr for BenchmarkId {
    type Err = UnknownBenchmark;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smallbank" => return Ok(BenchmarkId::SmallBank),
            "tpcc" => return Ok(BenchmarkId::Tpcc),
            "auction" => return Ok(BenchmarkId::Auction),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("auction(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(n) = rest.parse::<u32>() {
                if n >= 1 {
                    return Ok(BenchmarkId::AuctionN(n));
                }
            }
        }
        Err(UnknownBenchmark(s.to_string()))
    }
}

/// Loads a benchmark workload; the result passes validation with no issues.
pub fn load_benchmark(id: BenchmarkId) -> (Schema, Vec<Btp>) {
    match id {
        BenchmarkId::SmallBank => smallbank(),
        BenchmarkId::Tpcc => tpcc(),
        BenchmarkId::Auction => auction(),
        BenchmarkId::AuctionN(n) => auction_n(n),
    }
}

/// Short program names used in reports, fixed per benchmark so subset
/// listings are compact and stable.
pub fn abbreviation(program: &str) -> &str {
    match program {
        "Amalgamate" => "Am",
        "Balance" => "Bal",
        "DepositChecking" => "DC",
        "TransactSavings" => "TS",
        "WriteCheck" => "WC",
        "Delivery" => "Del",
        "NewOrder" => "NO",
        "OrderStatus" => "OS",
        "Payment" => "Pay",
        "StockLevel" => "SL",
        "FindBids" => "FB",
        "PlaceBid" => "PB",
        other => other,
    }
}

fn seq(stmts: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode::Seq(stmts)
}

fn stmt(s: Statement) -> ProgramNode {
    ProgramNode::Stmt(s)
}

fn type2_loop(body: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode::Loop(Box::new(ProgramNode::Seq(body)))
}

fn optional(body: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode::Optional(Box::new(ProgramNode::Seq(body)))
}

fn branch(left: Vec<ProgramNode>, right: Vec<ProgramNode>) -> ProgramNode {
    ProgramNode::Branch(
        Box::new(ProgramNode::Seq(left)),
        Box::new(ProgramNode::Seq(right)),
    )
}

pub fn smallbank() -> (Schema, Vec<Btp>) {
    let schema = Schema {
        relations: vec![
            RelationDecl::new("Account", &["Name", "CustomerId"], &["Name"]),
            RelationDecl::new("Savings", &["CustomerId", "Balance"], &["CustomerId"]),
            RelationDecl::new("Checking", &["CustomerId", "Balance"], &["CustomerId"]),
        ],
        foreign_keys: vec![
            ForeignKeyDecl::new("f1", "Account", &["CustomerId"], "Savings", &["CustomerId"]),
            ForeignKeyDecl::new(
                "f2",
                "Account",
                &["CustomerId"],
                "Checking",
                &["CustomerId"],
            ),
        ],
    };

    let amalgamate = Btp::new(
        "Amalgamate",
        seq(vec![
            stmt(Statement::new("q1", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(Statement::new("q2", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(
                Statement::new("q3", KeyUpdate, "Savings")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
            stmt(
                Statement::new("q4", KeyUpdate, "Checking")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
            stmt(
                Statement::new("q5", KeyUpdate, "Checking")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q3", "f1", "q1"),
        FkAnnotation::new("q4", "f2", "q1"),
        FkAnnotation::new("q5", "f2", "q2"),
    ]);

    let balance = Btp::new(
        "Balance",
        seq(vec![
            stmt(Statement::new("q6", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(Statement::new("q7", KeySelect, "Savings").obs(&["Balance"])),
            stmt(Statement::new("q8", KeySelect, "Checking").obs(&["Balance"])),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q7", "f1", "q6"),
        FkAnnotation::new("q8", "f2", "q6"),
    ]);

    let deposit_checking = Btp::new(
        "DepositChecking",
        seq(vec![
            stmt(Statement::new("q9", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(
                Statement::new("q10", KeyUpdate, "Checking")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
        ]),
    )
    .with_annotations(vec![FkAnnotation::new("q10", "f2", "q9")]);

    let transact_savings = Btp::new(
        "TransactSavings",
        seq(vec![
            stmt(Statement::new("q11", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(
                Statement::new("q12", KeyUpdate, "Savings")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
        ]),
    )
    .with_annotations(vec![FkAnnotation::new("q12", "f1", "q11")]);

    let write_check = Btp::new(
        "WriteCheck",
        seq(vec![
            stmt(Statement::new("q13", KeySelect, "Account").obs(&["CustomerId"])),
            stmt(Statement::new("q14", KeySelect, "Savings").obs(&["Balance"])),
            stmt(Statement::new("q15", KeySelect, "Checking").obs(&["Balance"])),
            stmt(
                Statement::new("q16", KeyUpdate, "Checking")
                    .obs(&["Balance"])
                    .mods(&["Balance"]),
            ),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q14", "f1", "q13"),
        FkAnnotation::new("q15", "f2", "q13"),
        FkAnnotation::new("q16", "f2", "q13"),
    ]);

    (
        schema,
        vec![
            amalgamate,
            balance,
            deposit_checking,
            transact_savings,
            write_check,
        ],
    )
}

pub fn tpcc() -> (Schema, Vec<Btp>) {
    let schema = Schema {
        relations: vec![
            RelationDecl::new(
                "Warehouse",
                &[
                    "w_id",
                    "w_name",
                    "w_street_1",
                    "w_street_2",
                    "w_city",
                    "w_state",
                    "w_zip",
                    "w_tax",
                    "w_ytd",
                ],
                &["w_id"],
            ),
            RelationDecl::new(
                "District",
                &[
                    "d_id",
                    "d_w_id",
                    "d_name",
                    "d_street_1",
                    "d_street_2",
                    "d_city",
                    "d_state",
                    "d_zip",
                    "d_tax",
                    "d_ytd",
                    "d_next_o_id",
                ],
                &["d_id", "d_w_id"],
            ),
            RelationDecl::new(
                "Customer",
                &[
                    "c_id",
                    "c_d_id",
                    "c_w_id",
                    "c_first",
                    "c_middle",
                    "c_last",
                    "c_street_1",
                    "c_street_2",
                    "c_city",
                    "c_state",
                    "c_zip",
                    "c_phone",
                    "c_since",
                    "c_credit",
                    "c_credit_lim",
                    "c_discount",
                    "c_balance",
                    "c_ytd_payment",
                    "c_payment_cnt",
                    "c_delivery_cnt",
                    "c_data",
                ],
                &["c_id", "c_d_id", "c_w_id"],
            ),
            RelationDecl::new(
                "History",
                &[
                    "h_c_id", "h_c_d_id", "h_c_w_id", "h_d_id", "h_w_id", "h_date", "h_amount",
                    "h_data",
                ],
                &["h_c_id", "h_c_d_id", "h_c_w_id", "h_d_id", "h_w_id"],
            ),
            RelationDecl::new(
                "New_Order",
                &["no_o_id", "no_d_id", "no_w_id"],
                &["no_o_id", "no_d_id", "no_w_id"],
            ),
            RelationDecl::new(
                "Orders",
                &[
                    "o_id",
                    "o_d_id",
                    "o_w_id",
                    "o_c_id",
                    "o_entry_id",
                    "o_carrier_id",
                    "o_ol_cnt",
                    "o_all_local",
                ],
                &["o_id", "o_d_id", "o_w_id"],
            ),
            RelationDecl::new(
                "Order_Line",
                &[
                    "ol_o_id",
                    "ol_d_id",
                    "ol_w_id",
                    "ol_number",
                    "ol_i_id",
                    "ol_supply_w_id",
                    "ol_delivery_d",
                    "ol_quantity",
                    "ol_amount",
                    "ol_dist_info",
                ],
                &["ol_o_id", "ol_d_id", "ol_w_id", "ol_number"],
            ),
            RelationDecl::new(
                "Item",
                &["i_id", "i_im_id", "i_name", "i_price", "i_data"],
                &["i_id"],
            ),
            RelationDecl::new(
                "Stock",
                &[
                    "s_i_id",
                    "s_w_id",
                    "s_quantity",
                    "s_dist_01",
                    "s_dist_02",
                    "s_dist_03",
                    "s_dist_04",
                    "s_dist_05",
                    "s_dist_06",
                    "s_dist_07",
                    "s_dist_08",
                    "s_dist_09",
                    "s_dist_10",
                    "s_ytd",
                    "s_order_cnt",
                    "s_remote_cnt",
                    "s_data",
                ],
                &["s_i_id", "s_w_id"],
            ),
        ],
        foreign_keys: vec![
            ForeignKeyDecl::new("f1", "District", &["d_w_id"], "Warehouse", &["w_id"]),
            ForeignKeyDecl::new(
                "f2",
                "Customer",
                &["c_d_id", "c_w_id"],
                "District",
                &["d_id", "d_w_id"],
            ),
            ForeignKeyDecl::new(
                "f3",
                "History",
                &["h_c_id", "h_c_d_id", "h_c_w_id"],
                "Customer",
                &["c_id", "c_d_id", "c_w_id"],
            ),
            ForeignKeyDecl::new(
                "f4",
                "History",
                &["h_d_id", "h_w_id"],
                "District",
                &["d_id", "d_w_id"],
            ),
            ForeignKeyDecl::new(
                "f5",
                "New_Order",
                &["no_o_id", "no_d_id", "no_w_id"],
                "Orders",
                &["o_id", "o_d_id", "o_w_id"],
            ),
            ForeignKeyDecl::new(
                "f6",
                "Orders",
                &["o_d_id", "o_w_id"],
                "District",
                &["d_id", "d_w_id"],
            ),
            ForeignKeyDecl::new(
                "f7",
                "Orders",
                &["o_c_id", "o_d_id", "o_w_id"],
                "Customer",
                &["c_id", "c_d_id", "c_w_id"],
            ),
            ForeignKeyDecl::new(
                "f8",
                "Order_Line",
                &["ol_o_id", "ol_d_id", "ol_w_id"],
                "Orders",
                &["o_id", "o_d_id", "o_w_id"],
            ),
            ForeignKeyDecl::new("f9", "Order_Line", &["ol_i_id"], "Item", &["i_id"]),
            ForeignKeyDecl::new(
                "f10",
                "Order_Line",
                &["ol_supply_w_id"],
                "Warehouse",
                &["w_id"],
            ),
            ForeignKeyDecl::new("f11", "Stock", &["s_i_id"], "Item", &["i_id"]),
            ForeignKeyDecl::new("f12", "Stock", &["s_w_id"], "Warehouse", &["w_id"]),
        ],
    };

    let delivery = Btp::new(
        "Delivery",
        seq(vec![type2_loop(vec![
            stmt(
                Statement::new("q1", PredSelect, "New_Order")
                    .pred(&["no_d_id", "no_w_id"])
                    .obs(&["no_o_id"]),
            ),
            stmt(
                Statement::new("q2", KeyDelete, "New_Order")
                    .mods(&["no_o_id", "no_d_id", "no_w_id"]),
            ),
            stmt(Statement::new("q3", KeySelect, "Orders").obs(&["o_c_id"])),
            stmt(
                Statement::new("q4", KeyUpdate, "Orders")
                    .obs(&[])
                    .mods(&["o_carrier_id"]),
            ),
            stmt(
                Statement::new("q5", PredUpdate, "Order_Line")
                    .pred(&["ol_d_id", "ol_o_id", "ol_w_id"])
                    .obs(&[])
                    .mods(&["ol_delivery_d"]),
            ),
            stmt(
                Statement::new("q6", PredSelect, "Order_Line")
                    .pred(&["ol_d_id", "ol_o_id", "ol_w_id"])
                    .obs(&["ol_amount"]),
            ),
            stmt(
                Statement::new("q7", KeyUpdate, "Customer")
                    .obs(&["c_balance", "c_delivery_cnt"])
                    .mods(&["c_balance", "c_delivery_cnt"]),
            ),
        ])]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q3", "f5", "q2"),
        FkAnnotation::new("q4", "f5", "q2"),
        FkAnnotation::new("q7", "f7", "q3"),
        FkAnnotation::new("q3", "f8", "q5"),
        FkAnnotation::new("q4", "f8", "q5"),
        FkAnnotation::new("q3", "f8", "q6"),
        FkAnnotation::new("q4", "f8", "q6"),
    ]);

    let new_order = Btp::new(
        "NewOrder",
        seq(vec![
            stmt(Statement::new("q8", KeySelect, "Customer").obs(&[
                "c_credit",
                "c_discount",
                "c_last",
            ])),
            stmt(Statement::new("q9", KeySelect, "Warehouse").obs(&["w_tax"])),
            stmt(
                Statement::new("q10", KeyUpdate, "District")
                    .obs(&["d_next_o_id", "d_tax"])
                    .mods(&["d_next_o_id"]),
            ),
            stmt(Statement::new("q11", Insert, "Orders").mods(&[
                "o_all_local",
                "o_c_id",
                "o_d_id",
                "o_entry_id",
                "o_id",
                "o_ol_cnt",
                "o_w_id",
                "o_carrier_id",
            ])),
            stmt(
                Statement::new("q12", Insert, "New_Order").mods(&["no_d_id", "no_o_id", "no_w_id"]),
            ),
            type2_loop(vec![
                stmt(
                    Statement::new("q13", KeySelect, "Item").obs(&["i_data", "i_name", "i_price"]),
                ),
                stmt(
                    Statement::new("q14", KeyUpdate, "Stock")
                        .obs(&[
                            "s_data",
                            "s_dist_01",
                            "s_dist_02",
                            "s_dist_03",
                            "s_dist_04",
                            "s_dist_05",
                            "s_dist_06",
                            "s_dist_07",
                            "s_dist_08",
                            "s_dist_09",
                            "s_dist_10",
                            "s_order_cnt",
                            "s_quantity",
                            "s_remote_cnt",
                            "s_ytd",
                        ])
                        .mods(&["s_order_cnt", "s_quantity", "s_remote_cnt", "s_ytd"]),
                ),
                stmt(Statement::new("q15", Insert, "Order_Line").mods(&[
                    "ol_amount",
                    "ol_d_id",
                    "ol_dist_info",
                    "ol_i_id",
                    "ol_number",
                    "ol_o_id",
                    "ol_quantity",
                    "ol_supply_w_id",
                    "ol_w_id",
                    "ol_delivery_d",
                ])),
            ]),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q9", "f1", "q10"),
        FkAnnotation::new("q10", "f2", "q8"),
        FkAnnotation::new("q11", "f5", "q12"),
        FkAnnotation::new("q10", "f6", "q11"),
        FkAnnotation::new("q8", "f7", "q11"),
        FkAnnotation::new("q11", "f8", "q15"),
        FkAnnotation::new("q13", "f9", "q15"),
        FkAnnotation::new("q13", "f11", "q14"),
    ]);

    let order_status = Btp::new(
        "OrderStatus",
        seq(vec![
            branch(
                vec![stmt(
                    Statement::new("q16", PredSelect, "Customer")
                        .pred(&["c_d_id", "c_last", "c_w_id"])
                        .obs(&["c_balance", "c_first", "c_id", "c_middle"]),
                )],
                vec![stmt(Statement::new("q17", KeySelect, "Customer").obs(&[
                    "c_balance",
                    "c_first",
                    "c_last",
                    "c_middle",
                ]))],
            ),
            stmt(
                Statement::new("q18", PredSelect, "Orders")
                    .pred(&["o_c_id", "o_d_id", "o_w_id"])
                    .obs(&["o_carrier_id", "o_entry_id", "o_id"]),
            ),
            stmt(
                Statement::new("q19", PredSelect, "Order_Line")
                    .pred(&["ol_d_id", "ol_o_id", "ol_w_id"])
                    .obs(&[
                        "ol_amount",
                        "ol_delivery_d",
                        "ol_i_id",
                        "ol_quantity",
                        "ol_supply_w_id",
                    ]),
            ),
        ]),
    )
    .with_annotations(vec![FkAnnotation::new("q17", "f7", "q18")]);

    let payment = Btp::new(
        "Payment",
        seq(vec![
            stmt(
                Statement::new("q20", KeyUpdate, "Warehouse")
                    .obs(&[
                        "w_city",
                        "w_name",
                        "w_state",
                        "w_street_1",
                        "w_street_2",
                        "w_ytd",
                        "w_zip",
                    ])
                    .mods(&["w_ytd"]),
            ),
            stmt(
                Statement::new("q21", KeyUpdate, "District")
                    .obs(&[
                        "d_city",
                        "d_name",
                        "d_state",
                        "d_street_1",
                        "d_street_2",
                        "d_ytd",
                        "d_zip",
                    ])
                    .mods(&["d_ytd"]),
            ),
            optional(vec![stmt(
                Statement::new("q22", PredSelect, "Customer")
                    .pred(&["c_d_id", "c_last", "c_w_id"])
                    .obs(&["c_id"]),
            )]),
            stmt(
                Statement::new("q23", KeyUpdate, "Customer")
                    .obs(&[
                        "c_balance",
                        "c_city",
                        "c_credit",
                        "c_credit_lim",
                        "c_discount",
                        "c_first",
                        "c_last",
                        "c_middle",
                        "c_phone",
                        "c_since",
                        "c_state",
                        "c_street_1",
                        "c_street_2",
                        "c_ytd_payment",
                        "c_zip",
                    ])
                    .mods(&["c_balance", "c_payment_cnt", "c_ytd_payment"]),
            ),
            optional(vec![
                stmt(Statement::new("q24", KeySelect, "Customer").obs(&["c_data"])),
                stmt(
                    Statement::new("q25", KeyUpdate, "Customer")
                        .obs(&[])
                        .mods(&["c_data"]),
                ),
            ]),
            stmt(Statement::new("q26", Insert, "History").mods(&[
                "h_amount", "h_c_d_id", "h_c_id", "h_c_w_id", "h_d_id", "h_data", "h_date",
                "h_w_id",
            ])),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q20", "f1", "q21"),
        FkAnnotation::new("q21", "f2", "q22"),
        FkAnnotation::new("q21", "f2", "q23"),
        FkAnnotation::new("q21", "f2", "q24"),
        FkAnnotation::new("q21", "f2", "q25"),
        FkAnnotation::new("q23", "f3", "q26"),
        FkAnnotation::new("q24", "f3", "q26"),
        FkAnnotation::new("q25", "f3", "q26"),
        FkAnnotation::new("q21", "f4", "q26"),
    ]);

    let stock_level = Btp::new(
        "StockLevel",
        seq(vec![
            stmt(Statement::new("q27", KeySelect, "District").obs(&["d_next_o_id"])),
            stmt(
                Statement::new("q28", PredSelect, "Order_Line")
                    .pred(&["ol_d_id", "ol_o_id", "ol_w_id"])
                    .obs(&["ol_i_id"]),
            ),
            stmt(
                Statement::new("q29", PredSelect, "Stock")
                    .pred(&["s_quantity", "s_w_id"])
                    .obs(&["s_i_id"]),
            ),
        ]),
    );

    (
        schema,
        vec![delivery, new_order, order_status, payment, stock_level],
    )
}

pub fn auction() -> (Schema, Vec<Btp>) {
    let schema = Schema {
        relations: vec![
            RelationDecl::new("Buyer", &["id", "calls"], &["id"]),
            RelationDecl::new("Bids", &["buyerId", "bid"], &["buyerId"]),
            RelationDecl::new("Log", &["id", "buyerId", "bid"], &["id"]),
        ],
        foreign_keys: vec![
            ForeignKeyDecl::new("f1", "Bids", &["buyerId"], "Buyer", &["id"]),
            ForeignKeyDecl::new("f2", "Log", &["buyerId"], "Buyer", &["id"]),
        ],
    };
    let programs = auction_programs("", "Bids", "f1", "f2", 1);
    (schema, programs)
}

/// The scaled variant: one bids relation per item, with Buyer and Log
/// shared. `auction_n(1)` is the plain Auction benchmark up to naming.
pub fn auction_n(n: u32) -> (Schema, Vec<Btp>) {
    let mut relations = vec![RelationDecl::new("Buyer", &["id", "calls"], &["id"])];
    let mut foreign_keys = Vec::new();
    let mut programs = Vec::new();
    for i in 1..=n {
        let bids = format!("Bids{i}");
        relations.push(RelationDecl::new(
            bids.as_str(),
            &["buyerId", "bid"],
            &["buyerId"],
        ));
        foreign_keys.push(ForeignKeyDecl::new(
            format!("f1_{i}"),
            &bids,
            &["buyerId"],
            "Buyer",
            &["id"],
        ));
    }
    relations.push(RelationDecl::new("Log", &["id", "buyerId", "bid"], &["id"]));
    foreign_keys.push(ForeignKeyDecl::new(
        "f2",
        "Log",
        &["buyerId"],
        "Buyer",
        &["id"],
    ));
    for i in 1..=n {
        programs.extend(auction_programs(
            &i.to_string(),
            &format!("Bids{i}"),
            &format!("f1_{i}"),
            "f2",
            i,
        ));
    }
    (
        Schema {
            relations,
            foreign_keys,
        },
        programs,
    )
}

fn auction_programs(suffix: &str, bids: &str, f1: &str, f2: &str, _item: u32) -> Vec<Btp> {
    let find_bids = Btp::new(
        format!("FindBids{suffix}"),
        seq(vec![
            stmt(
                Statement::new("q1", KeyUpdate, "Buyer")
                    .obs(&["calls"])
                    .mods(&["calls"]),
            ),
            stmt(
                Statement::new("q2", PredSelect, bids)
                    .pred(&["bid"])
                    .obs(&["bid"]),
            ),
        ]),
    );
    let place_bid = Btp::new(
        format!("PlaceBid{suffix}"),
        seq(vec![
            stmt(
                Statement::new("q3", KeyUpdate, "Buyer")
                    .obs(&["calls"])
                    .mods(&["calls"]),
            ),
            stmt(Statement::new("q4", KeySelect, bids).obs(&["bid"])),
            optional(vec![stmt(
                Statement::new("q5", KeyUpdate, bids)
                    .obs(&[])
                    .mods(&["bid"]),
            )]),
            stmt(Statement::new("q6", Insert, "Log").mods(&["id", "buyerId", "bid"])),
        ]),
    )
    .with_annotations(vec![
        FkAnnotation::new("q3", f1, "q4"),
        FkAnnotation::new("q3", f1, "q5"),
        FkAnnotation::new("q3", f2, "q6"),
    ]);
    vec![find_bids, place_bid]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robustness::{check_robust, maximal_robust_subsets};
    use crate::summary::construct_summary_graph;
    use crate::unfold::{unfold_program, unfold_workload};
    use crate::workload::{validate_workload, AnalysisSettings, Granularity, Method};

    #[test]
    fn benchmarks_validate_cleanly() {
        for id in [
            BenchmarkId::SmallBank,
            BenchmarkId::Tpcc,
            BenchmarkId::Auction,
            BenchmarkId::AuctionN(3),
        ] {
            let (schema, programs) = load_benchmark(id);
            let report = validate_workload(&schema, &programs);
            assert!(report.is_empty(), "{id}: {report:?}");
        }
    }

    #[test]
    fn statement_and_relation_counts() {
        let (schema, programs) = smallbank();
        assert_eq!(schema.relations.len(), 3);
        assert_eq!(programs.len(), 5);
        let stmts: usize = programs.iter().map(|p| p.statements().len()).sum();
        assert_eq!(stmts, 16);

        let (schema, programs) = tpcc();
        assert_eq!(schema.relations.len(), 9);
        assert_eq!(programs.len(), 5);
        let stmts: usize = programs.iter().map(|p| p.statements().len()).sum();
        assert_eq!(stmts, 29);
    }

    #[test]
    fn unfolding_counts_match() {
        let (_, programs) = smallbank();
        assert_eq!(unfold_workload(&programs).len(), 5);

        let (_, programs) = tpcc();
        assert_eq!(unfold_workload(&programs).len(), 13);
        let per_program: Vec<(String, usize)> = programs
            .iter()
            .map(|p| (p.name.clone(), unfold_program(p).len()))
            .collect();
        assert_eq!(
            per_program,
            vec![
                ("Delivery".to_string(), 3),
                ("NewOrder".to_string(), 3),
                ("OrderStatus".to_string(), 2),
                ("Payment".to_string(), 4),
                ("StockLevel".to_string(), 1),
            ]
        );

        let (_, programs) = auction();
        assert_eq!(unfold_workload(&programs).len(), 3);

        let (_, programs) = auction_n(4);
        assert_eq!(unfold_workload(&programs).len(), 12);
    }

    fn stats_for(id: BenchmarkId, granularity: Granularity, use_fk: bool) -> (usize, usize, usize) {
        let (schema, programs) = load_benchmark(id);
        let graph = construct_summary_graph(
            unfold_workload(&programs),
            &schema,
            &AnalysisSettings::new(granularity, use_fk, Method::Type2),
        );
        let s = graph.stats();
        (s.nodes, s.edges, s.counterflow_edges)
    }

    #[test]
    fn smallbank_graph_counts() {
        assert_eq!(
            stats_for(BenchmarkId::SmallBank, Granularity::Attribute, true),
            (5, 56, 12)
        );
    }

    #[test]
    fn auction_graph_counts() {
        assert_eq!(
            stats_for(BenchmarkId::Auction, Granularity::Attribute, true),
            (3, 17, 1)
        );
    }

    #[test]
    fn tpcc_graph_counts() {
        assert_eq!(
            stats_for(BenchmarkId::Tpcc, Granularity::Attribute, true),
            (13, 405, 83)
        );
    }

    // The two inserts that list only a column subset (q11 leaves o_carrier_id
    // unset, q15 leaves ol_delivery_d unset) are encoded with full attribute
    // sets above so the workload validates. Narrowing them to the listed
    // columns removes the nine q11->q4 non-counterflow quintuples and nothing
    // else.
    #[test]
    fn tpcc_narrowed_insert_columns_drop_nine_edges() {
        let (schema, mut programs) = tpcc();
        fn narrow(node: &mut ProgramNode) {
            match node {
                ProgramNode::Stmt(q) => {
                    if q.label == "q11" {
                        q.mod_set.as_mut().unwrap().remove("o_carrier_id");
                    }
                    if q.label == "q15" {
                        q.mod_set.as_mut().unwrap().remove("ol_delivery_d");
                    }
                }
                ProgramNode::Seq(cs) => cs.iter_mut().for_each(narrow),
                ProgramNode::Loop(c) | ProgramNode::Optional(c) => narrow(c),
                ProgramNode::Branch(l, r) => {
                    narrow(l);
                    narrow(r);
                }
            }
        }
        for p in &mut programs {
            narrow(&mut p.body);
        }
        let graph = construct_summary_graph(
            unfold_workload(&programs),
            &schema,
            &AnalysisSettings::new(Granularity::Attribute, true, Method::Type2),
        );
        let s = graph.stats();
        assert_eq!((s.nodes, s.edges, s.counterflow_edges), (13, 396, 83));
    }

    #[test]
    fn auction_n_graph_counts_follow_formula() {
        for n in 1..=10u32 {
            let (nodes, edges, cf) =
                stats_for(BenchmarkId::AuctionN(n), Granularity::Attribute, true);
            let n = n as usize;
            assert_eq!(nodes, 3 * n);
            assert_eq!(edges, 8 * n + 9 * n * n);
            assert_eq!(cf, n);
        }
    }

    fn subsets_for(
        id: BenchmarkId,
        granularity: Granularity,
        use_fk: bool,
        method: Method,
    ) -> Vec<Vec<String>> {
        let (schema, programs) = load_benchmark(id);
        maximal_robust_subsets(
            &schema,
            &programs,
            &AnalysisSettings::new(granularity, use_fk, method),
        )
        .unwrap()
    }

    fn named(sets: &[Vec<String>]) -> Vec<Vec<&str>> {
        sets.iter()
            .map(|s| s.iter().map(|p| abbreviation(p)).collect())
            .collect()
    }

    #[test]
    fn smallbank_maximal_subsets_all_settings() {
        for settings in AnalysisSettings::all_four(Method::Type2) {
            let sets = subsets_for(
                BenchmarkId::SmallBank,
                settings.granularity,
                settings.use_fk,
                Method::Type2,
            );
            assert_eq!(
                named(&sets),
                vec![vec!["Am", "DC", "TS"], vec!["Bal", "DC"], vec!["Bal", "TS"]],
                "setting {}",
                settings.label()
            );
        }
    }

    #[test]
    fn tpcc_maximal_subsets_by_setting() {
        let with_fk_attr = subsets_for(
            BenchmarkId::Tpcc,
            Granularity::Attribute,
            true,
            Method::Type2,
        );
        assert_eq!(
            named(&with_fk_attr),
            vec![vec!["OS", "Pay", "SL"], vec!["NO", "Pay"]]
        );
        for (granularity, use_fk) in [
            (Granularity::Tuple, false),
            (Granularity::Attribute, false),
            (Granularity::Tuple, true),
        ] {
            let sets = subsets_for(BenchmarkId::Tpcc, granularity, use_fk, Method::Type2);
            assert_eq!(named(&sets), vec![vec!["OS", "SL"], vec!["NO"]]);
        }
    }

    #[test]
    fn auction_maximal_subsets_by_setting() {
        for granularity in [Granularity::Attribute, Granularity::Tuple] {
            let with_fk = subsets_for(BenchmarkId::Auction, granularity, true, Method::Type2);
            assert_eq!(named(&with_fk), vec![vec!["FB", "PB"]]);
            let without_fk = subsets_for(BenchmarkId::Auction, granularity, false, Method::Type2);
            assert_eq!(named(&without_fk), vec![vec!["FB"]]);
        }
    }

    #[test]
    fn type1_baseline_subsets() {
        for settings in AnalysisSettings::all_four(Method::Type1) {
            let sets = subsets_for(
                BenchmarkId::SmallBank,
                settings.granularity,
                settings.use_fk,
                Method::Type1,
            );
            assert_eq!(named(&sets), vec![vec!["Am", "DC", "TS"], vec!["Bal"]]);
        }
        let auction_fk = subsets_for(
            BenchmarkId::Auction,
            Granularity::Attribute,
            true,
            Method::Type1,
        );
        assert_eq!(named(&auction_fk), vec![vec!["FB"], vec!["PB"]]);
        let auction_plain = subsets_for(
            BenchmarkId::Auction,
            Granularity::Attribute,
            false,
            Method::Type1,
        );
        assert_eq!(named(&auction_plain), vec![vec!["FB"]]);

        let tpcc_fk_attr = subsets_for(
            BenchmarkId::Tpcc,
            Granularity::Attribute,
            true,
            Method::Type1,
        );
        assert_eq!(
            named(&tpcc_fk_attr),
            vec![vec!["NO", "Pay"], vec!["OS", "SL"], vec!["Pay", "SL"]]
        );
        for (granularity, use_fk) in [
            (Granularity::Tuple, false),
            (Granularity::Attribute, false),
            (Granularity::Tuple, true),
        ] {
            let sets = subsets_for(BenchmarkId::Tpcc, granularity, use_fk, Method::Type1);
            assert_eq!(named(&sets), vec![vec!["OS", "SL"], vec!["NO"]]);
        }
    }

    #[test]
    fn delivery_alone_is_reported_non_robust() {
        let (schema, programs) = tpcc();
        let delivery: Vec<Btp> = programs
            .into_iter()
            .filter(|p| p.name == "Delivery")
            .collect();
        let (verdict, _) = check_robust(&schema, &delivery, &AnalysisSettings::default()).unwrap();
        assert!(!verdict.robust);
    }

    #[test]
    fn auction_n_is_robust_and_matches_auction_at_one() {
        let one = stats_for(BenchmarkId::AuctionN(1), Granularity::Attribute, true);
        let base = stats_for(BenchmarkId::Auction, Granularity::Attribute, true);
        assert_eq!(one, base);
        for n in [1u32, 5, 10] {
            let (schema, programs) = auction_n(n);
            let (verdict, _) =
                check_robust(&schema, &programs, &AnalysisSettings::default()).unwrap();
            assert!(verdict.robust, "auction({n})");
        }
    }

    // Widening the granularity or dropping the constraints can only add
    // edges, and constraints only ever remove counterflow edges.
    #[test]
    fn edge_sets_are_monotone_in_the_settings() {
        for id in [
            BenchmarkId::SmallBank,
            BenchmarkId::Tpcc,
            BenchmarkId::Auction,
        ] {
            let (schema, programs) = load_benchmark(id);
            let graph = |granularity, use_fk| {
                construct_summary_graph(
                    unfold_workload(&programs),
                    &schema,
                    &AnalysisSettings::new(granularity, use_fk, Method::Type2),
                )
            };
            for use_fk in [false, true] {
                let attr = graph(Granularity::Attribute, use_fk);
                let tuple = graph(Granularity::Tuple, use_fk);
                for e in &attr.edges {
                    assert!(tuple.edges.contains(e), "{id}: attr edge missing at tuple");
                }
            }
            for granularity in [Granularity::Attribute, Granularity::Tuple] {
                let with_fk = graph(granularity, true);
                let without_fk = graph(granularity, false);
                for e in &with_fk.edges {
                    assert!(
                        without_fk.edges.contains(e),
                        "{id}: fk edge not in no-fk graph"
                    );
                }
                let nc = |g: &crate::summary::SummaryGraph| {
                    g.edges
                        .iter()
                        .filter(|e| e.flow == crate::summary::FlowClass::NonCounterflow)
                        .count()
                };
                assert_eq!(
                    nc(&with_fk),
                    nc(&without_fk),
                    "{id}: non-counterflow differ"
                );
            }
        }
    }

    // Robustness is anti-monotone (a subset of a robust set is robust) and
    // the refined criterion accepts everything the baseline accepts.
    #[test]
    fn subset_verdicts_are_anti_monotone_and_type2_extends_type1() {
        use crate::robustness::{has_type1_cycle, has_type2_cycle};
        for id in [
            BenchmarkId::SmallBank,
            BenchmarkId::Tpcc,
            BenchmarkId::Auction,
        ] {
            let (schema, programs) = load_benchmark(id);
            let n = programs.len();
            let settings = AnalysisSettings::new(Granularity::Attribute, true, Method::Type2);
            let mut robust2 = vec![false; 1 << n];
            for mask in 1u32..(1 << n) {
                let subset: Vec<Btp> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| programs[i].clone())
                    .collect();
                let graph = construct_summary_graph(unfold_workload(&subset), &schema, &settings);
                let t2 = has_type2_cycle(&graph).robust;
                let t1 = has_type1_cycle(&graph).robust;
                if t1 {
                    assert!(t2, "{id} mask {mask:#b}: type-1 robust but type-2 not");
                }
                robust2[mask as usize] = t2;
            }
            for mask in 1usize..(1 << n) {
                if robust2[mask] {
                    let mut sub = mask;
                    while sub > 0 {
                        assert!(
                            robust2[sub],
                            "{id}: subset {sub:#b} of robust {mask:#b} not robust"
                        );
                        sub = (sub - 1) & mask;
                    }
                }
            }
        }
    }

    #[test]
    fn benchmark_ids_parse() {
        assert_eq!("smallbank".parse(), Ok(BenchmarkId::SmallBank));
        assert_eq!("auction(7)".parse(), Ok(BenchmarkId::AuctionN(7)));
        assert!("auction(0)".parse::<BenchmarkId>().is_err());
        assert!("nope".parse::<BenchmarkId>().is_err());
    }
}
