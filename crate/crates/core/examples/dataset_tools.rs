//! Export preference pairs, compute dataset statistics and evaluate one
//! session directory against another.
//!
//! `cargo run --example dataset_tools -- gold_dir [pred_dir]`

use screenagent::score::evaluate_stores;
use screenagent::store::{dataset_stats, export_pairs, ExportItem, Store};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let gold_dir = args
        .next()
        .unwrap_or_else(|| "crates/core/tests/fixtures/dataset".into());
    let gold = Store::open(&gold_dir)?;

    let stats = dataset_stats(&gold)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);

    let items = export_pairs(&gold)?;
    let pairs = items
        .iter()
        .filter(|i| matches!(i, ExportItem::Pair(_)))
        .count();
    println!("{pairs} preference pairs, {} skipped", items.len() - pairs);

    if let Some(pred_dir) = args.next() {
        let eval = evaluate_stores(&gold, &Store::open(pred_dir)?)?;
        println!("{}", eval.report.to_table());
        println!(
            "missing sessions {:?}, missing steps {}",
            eval.missing_sessions,
            eval.missing_steps.len()
        );
    }
    Ok(())
}
