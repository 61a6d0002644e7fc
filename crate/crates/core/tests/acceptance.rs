//! Acceptance suite: runs every validation criterion at full scale with
//! the shipped seed and prints one pass/fail line per criterion.
//!
//! These are the same criteria `heiswiener validate --suite all` executes;
//! each is pinned here as its own test so a red criterion is visible by
//! name in the test report.

use heiswiener::validate::{self, Scale};

fn run(id: &str) {
    let timed = validate::run_criteria(&[id], validate::DEFAULT_SEED, Scale::Full).unwrap();
    let r = &timed[0].result;
    println!(
        "{} {:<40} {} [{:.1}s]",
        r.id,
        r.name,
        if r.pass { "pass" } else { "FAIL" },
        timed[0].runtime_s
    );
    for c in &r.checks {
        println!(
            "    [{}] {}: {:.6e} {} {:.6e}",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.op,
            c.threshold
        );
    }
    assert!(r.pass, "criterion {} failed", r.id);
}

#[test]
fn c01_kernel_normalization() {
    run("C01");
}

#[test]
fn c02_origin_value_oracle() {
    run("C02");
}

#[test]
fn c03_scaling_identity() {
    run("C03");
}

#[test]
fn c04_semigroup_chapman_kolmogorov() {
    run("C04");
}

#[test]
fn c05_sampler_moments() {
    run("C05");
}

#[test]
fn c06_endpoint_law_chi_square() {
    run("C06");
}

#[test]
fn c07_cylinder_consistency() {
    run("C07");
}

#[test]
fn c08_chaining_implication() {
    run("C08");
}

#[test]
fn c09_holder_tail_decay() {
    run("C09");
}

#[test]
fn c10_feynman_kac_vs_heat_reference() {
    run("C10");
}

#[test]
fn c11_duhamel_residual() {
    run("C11");
}

#[test]
fn c12_symmetry_with_potential() {
    run("C12");
}

#[test]
fn c13_determinism_across_threads() {
    run("C13");
}
