//! Verifies every analytic gradient against central finite differences on
//! the built-in two-flow, two-window scenario.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use flowcast::model::gradient_check;

fn main() {
    let report = gradient_check(1e-4, None).expect("check runs");
    let worst = report
        .items
        .iter()
        .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
        .unwrap();
    println!(
        "{} parameter elements checked across {} tensors",
        report.parameters_checked,
        report.items.len()
    );
    println!(
        "worst tensor: {} at max relative error {:.3e} (tolerance {:.0e})",
        worst.name, worst.max_rel_err, report.tolerance
    );
    assert!(report.passed(), "gradient check failed");
    println!("all gradients agree with finite differences");
}
