//! Acceptance run: every criterion once with a fixed seed, one line each.

use bicombing_lab::suite::{run_suite, Status, SuiteResult, SUITES};

const SEED: u64 = 7;

/// Wall-clock budgets in seconds, for the criteria that have one.
const BUDGETS: [(&str, f64); 4] = [
    ("lemma5sp-trajectories", 60.0),
    ("helly", 5.0),
    ("axioms", 120.0),
    ("oracle-agreement", 300.0),
];

fn report(r: &SuiteResult) -> Vec<String> {
    let mut failed = Vec::new();
    for (i, (name, _)) in SUITES.iter().enumerate() {
        let cases: Vec<_> = r.cases.iter().filter(|c| c.id.split('/').next() == Some(name)).collect();
        let bad: Vec<_> = cases.iter().filter(|c| c.status != Status::Pass).collect();
        let secs = r.timings.iter().find(|t| t.0 == *name).map_or(f64::NAN, |t| t.1);
        let budget = BUDGETS.iter().find(|b| b.0 == *name).map(|b| b.1);
        let slow = budget.is_some_and(|b| !(secs <= b));
        let ok = !cases.is_empty() && bad.is_empty() && !slow;
        let budget_note = budget.map_or(String::new(), |b| format!(", budget {b:.0}s"));
        println!(
            "[{}] criterion {:>2} {:<22} {}/{} cases, {:.1}s{}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            name,
            cases.len() - bad.len(),
            cases.len(),
            secs,
            budget_note
        );
        for c in &bad {
            println!(
                "       {} value={} {} {} {}",
                c.id,
                c.value,
                serde_json::to_value(c.bound).unwrap().as_str().unwrap(),
                c.tolerance,
                c.detail.as_deref().unwrap_or("")
            );
        }
        if slow {
            println!("       over budget");
        }
        if !ok {
            failed.push(name.to_string());
        }
    }
    failed
}

// Runs without the libtest harness so the lines above reach the terminal.
fn main() {
    let r = run_suite("all", SEED).unwrap();
    let failed = report(&r);
    println!("total {:.1}s", r.elapsed);
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
