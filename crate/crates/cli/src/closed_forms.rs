//! Closed-form oracle checks exposed to the CLI.

use hypergns_core::exponents::closed_forms;
use hypergns_core::exponents::Rational;

/// Default evaluation exponents; the odd rational exercises non-integer r.
pub const DEFAULT_R: [&str; 4] = ["5", "7", "12", "101/10"];

pub struct Check {
    pub label: String,
    pub pass: bool,
}

pub fn run_closed_form_checks(r_values: &[Rational]) -> Vec<Check> {
    closed_forms::closed_form_checks(r_values)
        .into_iter()
        .map(|c| Check { label: c.label, pass: c.pass })
        .collect()
}
