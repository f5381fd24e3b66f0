mod common;

use qeck_core::engine::{schedule_weight_sums, schedules_agree, weights_sum_to_one, BasisInput};
use qeck_core::lang::validate;
use qeck_core::scheduler::{
    describe_step, enabled_steps, explore, explore_with, Configuration, Mode, SchedulerError, Step,
    DEFAULT_NODE_BUDGET,
};

fn total_leaves(p: &qeck_core::lang::CheckedProgram, mode: Mode) -> u64 {
    BasisInput::enumerate(&p.input_sorts())
        .iter()
        .map(|input| explore_with(p, input, mode, DEFAULT_NODE_BUDGET, |_, _| Ok(())).unwrap().leaves)
        .sum()
}

#[test]
fn teleportation_initial_steps() {
    let (p, _) = common::corpus_protocol("Teleportation").checked();
    let c = Configuration::initial(&p);
    assert_eq!(c.threads.len(), 3);
    let steps = enabled_steps(&c, Mode::Concurrent).unwrap();
    assert_eq!(steps, vec![Step::Local(0), Step::Local(1)]);
    let labels: Vec<String> = steps.iter().map(|&s| describe_step(&c, s)).collect();
    assert_eq!(labels, ["[t0] newqubit y", "[t1] input x"]);
    assert_eq!(enabled_steps(&c, Mode::Sequential).unwrap(), vec![Step::Local(0)]);
}

#[test]
fn every_schedule_has_unit_weight() {
    for p in common::corpus() {
        let (i, s) = p.checked();
        for (program, mode) in [(&i, Mode::Concurrent), (&s, Mode::Sequential)] {
            for input in BasisInput::enumerate(&program.input_sorts()) {
                let sums = schedule_weight_sums(program, &input, mode, DEFAULT_NODE_BUDGET).unwrap();
                assert!(!sums.is_empty());
                assert!(weights_sum_to_one(&sums), "{} {input}: {sums:?}", p.name());
            }
        }
    }
}

#[test]
fn schedules_are_confluent() {
    for name in ["Teleportation", "Dense Coding", "X-Teleportation", "Z-Teleportation", "Remote CNOT(A)"] {
        let (i, _) = common::corpus_protocol(name).checked();
        for input in BasisInput::enumerate(&i.input_sorts()) {
            assert!(schedules_agree(&i, &input, Mode::Concurrent, DEFAULT_NODE_BUDGET).unwrap(), "{name} {input}");
        }
    }
}

#[test]
fn counts_are_deterministic_and_match_headers() {
    for p in common::corpus() {
        let (i, _) = p.checked();
        assert_eq!(Some(total_leaves(&i, Mode::Sequential)), p.header.expected_branches, "{}", p.name());
        if p.name() == "Teleportation" {
            assert_eq!(total_leaves(&i, Mode::Concurrent), 400);
            assert_eq!(total_leaves(&i, Mode::Concurrent), 400);
        }
    }
}

#[test]
fn tree_and_streaming_exploration_agree() {
    let (p, _) = common::corpus_protocol("Teleportation").checked();
    for input in BasisInput::enumerate(&p.input_sorts()) {
        let tree = explore(&p, &input, Mode::Concurrent, DEFAULT_NODE_BUDGET).unwrap();
        let stats = explore_with(&p, &input, Mode::Concurrent, DEFAULT_NODE_BUDGET, |_, _| Ok(())).unwrap();
        assert_eq!(tree.interleavings() as u64, stats.leaves);
        assert_eq!(tree.nodes.len() as u64, stats.nodes);
        assert!(tree.root().parent.is_none());
    }
}

#[test]
fn budget_and_deadlock_are_reported() {
    let (p, _) = common::corpus_protocol("Teleportation").checked();
    let input = &BasisInput::enumerate(&p.input_sorts())[0];
    assert!(matches!(
        explore_with(&p, input, Mode::Concurrent, 10, |_, _| Ok(())),
        Err(SchedulerError::Budget { budget: 10 })
    ));

    let program = qeck_core::lang::load_definition("Stuck = newqubit x . d?y . c!x . nil | newqubit z . c?w . d!z . nil", "Stuck").unwrap();
    let stuck = validate(&program).unwrap();
    match explore_with(&stuck, &BasisInput::default(), Mode::Concurrent, 100, |_, _| Ok(())) {
        Err(SchedulerError::Deadlock { heads }) => assert_eq!(heads, ["t0: d?y", "t1: c?w"]),
        other => panic!("expected deadlock, got {other:?}"),
    }
}
