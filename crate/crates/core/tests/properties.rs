mod common;

use hmwtpp::routes::brute_force;
use hmwtpp::{EncodeOptions, Objective, SecMode};

use common::*;

#[test]
fn lazy_cuts_and_mtz_agree() {
    for seed in 0..25 {
        let inst = mode_suite(seed);
        let dfj = solve_mode(&inst, SecMode::DfjLazy).optimum();
        let mtz = solve_mode(&inst, SecMode::Mtz).optimum();
        assert!(same_optimum(dfj, mtz, 1e-6), "seed {seed}: {dfj:?} vs {mtz:?}");
    }
}

#[test]
fn solver_matches_brute_force() {
    for seed in 0..10 {
        let inst = brute_suite(seed);
        let opts = EncodeOptions::from_instance(&inst, SecMode::DfjLazy, Objective::Mtm);
        let solved = solve_with(&inst, &opts).optimum();
        let brute = brute_force(&inst, &graph(&inst), &opts).unwrap().map(|b| b.objective);
        assert!(same_optimum(solved, brute, 1e-6), "seed {seed}: {solved:?} vs {brute:?}");
    }
}

#[test]
fn total_time_matches_brute_force() {
    for seed in 10..16 {
        let inst = brute_suite(seed);
        let opts = EncodeOptions::from_instance(&inst, SecMode::Mtz, Objective::TotalTime);
        let solved = solve_with(&inst, &opts).optimum();
        let brute = brute_force(&inst, &graph(&inst), &opts).unwrap().map(|b| b.objective);
        assert!(same_optimum(solved, brute, 1e-6), "seed {seed}: {solved:?} vs {brute:?}");
    }
}

#[test]
fn extra_pairs_never_help() {
    for seed in 0..10 {
        let inst = brute_suite(seed);
        let Some(tight) = tighten(&inst, seed) else { continue };
        let base = solve_mode(&inst, SecMode::DfjLazy).optimum();
        let more = solve_mode(&tight, SecMode::DfjLazy).optimum();
        assert!(no_worse(base, more, 1e-6), "seed {seed}: {base:?} then {more:?}");
    }
}

#[test]
fn waiting_never_hurts() {
    for seed in 0..10 {
        let mut inst = brute_suite(seed);
        inst.waiting = false;
        let rigid = solve_mode(&inst, SecMode::DfjLazy).optimum();
        inst.waiting = true;
        let flexible = solve_mode(&inst, SecMode::DfjLazy).optimum();
        assert!(no_worse(flexible, rigid, 1e-6), "seed {seed}: {flexible:?} vs {rigid:?}");
    }
}
