mod common;

use creativ::corpus::{CaseKind, PromptCase, Submodule};
use creativ::metrics::{
    check_elaboration, component_count, compute_creativity, compute_elaboration,
    compute_flexibility, compute_fluency, compute_fluency_by_m, compute_fluency_pairwise,
    compute_functionality, compute_originality, unique_count, MetricFlag, MetricValue,
    MetricsError, PromptOutcome, DEFAULT_EPS, DEFAULT_WEIGHTS,
};
use creativ::Experiment;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn outcome(
    case_id: &str,
    experiment: Experiment,
    functional: &[u32],
    scores: &[f64],
    unscorable: u32,
) -> PromptOutcome {
    PromptOutcome {
        case_id: case_id.to_string(),
        experiment,
        t: 3,
        functional_indices: functional.to_vec(),
        scores: scores.to_vec(),
        unscorable_count: unscorable,
        elaborated: None,
        pairwise_unique: None,
    }
}

// ---------------------------------------------------------------- helpers

#[test]
fn unique_count_chains_values_within_eps() {
    assert_eq!(unique_count(&[], 1e-6), 0);
    assert_eq!(unique_count(&[0.7], 1e-6), 1);
    assert_eq!(unique_count(&[0.5, 0.5, 0.5], 1e-6), 1);
    assert_eq!(unique_count(&[1.0, 0.5, -0.5], 1e-6), 3);
    // Chaining: each neighbor gap is within eps, so the whole run is one
    // cluster even though its ends differ by more than eps.
    assert_eq!(unique_count(&[0.0, 0.9e-6, 1.8e-6], 1e-6), 1);
    assert_eq!(unique_count(&[0.5, 0.5 + 2e-6, 1.0], 1e-6), 3);
    // Order never matters.
    assert_eq!(unique_count(&[1.0, -1.0, 0.0], 1e-6), unique_count(&[0.0, 1.0, -1.0], 1e-6));
}

#[test]
fn component_count_merges_transitively() {
    assert_eq!(component_count(0, &[]), 0);
    assert_eq!(component_count(4, &[]), 4);
    assert_eq!(component_count(4, &[(0, 1), (1, 2)]), 2);
    assert_eq!(component_count(4, &[(0, 1), (2, 3), (1, 2)]), 1);
    assert_eq!(component_count(3, &[(0, 0), (1, 1)]), 3, "self edges merge nothing");
    assert_eq!(component_count(3, &[(0, 1), (0, 1)]), 2, "duplicates are harmless");
}

// ---------------------------------------------------------------- frozen

/// The desk-fixture outcome table, frozen from hand-simulation of every
/// replay response. The end-to-end pipeline test re-derives the same rows
/// from disk; here they feed the metric layer directly.
fn fixture_completion() -> Vec<PromptOutcome> {
    vec![
        outcome("add2", Experiment::Completion, &[0, 2], &[1.0, -0.10233437660308542], 0),
        outcome("and_gate", Experiment::Completion, &[0, 1], &[1.0, 1.0], 0),
        outcome("count2", Experiment::Completion, &[], &[], 0),
        outcome("dff_sr", Experiment::Completion, &[0, 2], &[1.0, 1.0], 0),
        outcome(
            "mux2",
            Experiment::Completion,
            &[0, 1, 2],
            &[1.0, 0.46484402756005716, 0.63067191951382706],
            0,
        ),
        outcome("xnor2", Experiment::Completion, &[0], &[1.0], 0),
    ]
}

fn fixture_rewrite() -> Vec<PromptOutcome> {
    vec![
        outcome("add2", Experiment::Rewrite, &[], &[], 0),
        outcome(
            "and_gate",
            Experiment::Rewrite,
            &[0, 1],
            &[0.0017346066809424965, -0.14571785702966977],
            0,
        ),
        outcome("count2", Experiment::Rewrite, &[0, 1], &[1.0, 1.0], 0),
        outcome("dff_sr", Experiment::Rewrite, &[0, 1, 2], &[1.0, 0.5], 1),
        outcome(
            "mux2",
            Experiment::Rewrite,
            &[0, 1],
            &[0.63067191951382706, 0.26315917269799982],
            0,
        ),
        outcome("xnor2", Experiment::Rewrite, &[0, 1], &[1.0, 0.015592719267212507], 0),
    ]
}

#[test]
fn fixture_metric_values_are_reproduced_exactly() {
    let completion = fixture_completion();
    let rewrite = fixture_rewrite();

    let f = compute_fluency(&completion, 3, DEFAULT_EPS);
    assert_eq!(f, MetricValue { value: 0.5333333333333333, n: 5 });

    let x = compute_flexibility(&rewrite, 0.0);
    assert_eq!(x, MetricValue { value: 0.2, n: 5 });

    let o = compute_originality(&completion);
    assert_eq!(o, MetricValue { value: 0.16374903490430284, n: 5 });

    let e = compute_elaboration(&[true, false], 2).unwrap();
    assert_eq!(e, MetricValue { value: 0.5, n: 2 });

    let func = compute_functionality(&[true, true, false, true, true, true, true, true]).unwrap();
    assert_eq!(func, 0.875);

    let c = compute_creativity(f.value, x.value, o.value, e.value, &DEFAULT_WEIGHTS).unwrap();
    assert_eq!(c, 0.349270592059409);
}

#[test]
fn metric_results_ignore_outcome_order() {
    let mut rng = StdRng::seed_from_u64(11);
    let baseline_f = compute_fluency(&fixture_completion(), 3, DEFAULT_EPS);
    let baseline_x = compute_flexibility(&fixture_rewrite(), 0.0);
    let baseline_o = compute_originality(&fixture_completion());
    for _ in 0..100 {
        let mut completion = fixture_completion();
        let mut rewrite = fixture_rewrite();
        for i in (1..completion.len()).rev() {
            completion.swap(i, rng.gen_range(0..=i));
        }
        for i in (1..rewrite.len()).rev() {
            rewrite.swap(i, rng.gen_range(0..=i));
        }
        assert_eq!(compute_fluency(&completion, 3, DEFAULT_EPS), baseline_f);
        assert_eq!(compute_flexibility(&rewrite, 0.0), baseline_x);
        assert_eq!(compute_originality(&completion), baseline_o);
    }
}

// ---------------------------------------------------------------- n rules

#[test]
fn prompts_without_functional_responses_leave_the_means() {
    let with_dead_prompt = vec![
        outcome("a", Experiment::Completion, &[0], &[1.0], 0),
        outcome("b", Experiment::Completion, &[], &[], 0),
    ];
    let f = compute_fluency(&with_dead_prompt, 3, DEFAULT_EPS);
    assert_eq!(f.n, 1, "a prompt with m = 0 contributes to no mean");
    assert_eq!(f.value, 1.0 / 3.0);

    let o = compute_originality(&with_dead_prompt);
    assert_eq!((o.value, o.n), (0.0, 1));
}

#[test]
fn unscorable_only_prompts_count_for_fluency_but_not_min_metrics() {
    // Functional responses none of which parse: the prompt took real samples
    // (so fluency sees zero unique implementations out of t) but exposes no
    // minimum score for flexibility or originality to use.
    let outcomes = vec![
        outcome("a", Experiment::Rewrite, &[0, 1], &[], 2),
        outcome("b", Experiment::Rewrite, &[0], &[-0.9], 0),
    ];
    let f = compute_fluency(&outcomes, 3, DEFAULT_EPS);
    assert_eq!((f.value, f.n), (0.5 / 3.0 * 1.0, 2));

    let x = compute_flexibility(&outcomes, 0.0);
    assert_eq!((x.value, x.n), (1.0, 1));

    let o = compute_originality(&outcomes);
    assert_eq!((o.value, o.n), (0.95, 1));
}

#[test]
fn empty_inputs_collapse_to_zero_with_zero_n() {
    assert_eq!(compute_fluency(&[], 3, DEFAULT_EPS), MetricValue { value: 0.0, n: 0 });
    assert_eq!(compute_flexibility(&[], 0.0), MetricValue { value: 0.0, n: 0 });
    assert_eq!(compute_originality(&[]), MetricValue { value: 0.0, n: 0 });
    assert_eq!(compute_functionality(&[]), Err(MetricsError::ZeroPrompts));
    assert_eq!(compute_elaboration(&[], 0), Err(MetricsError::ZeroPrompts));
}

#[test]
fn flexibility_threshold_is_strict() {
    let at_zero = vec![outcome("a", Experiment::Rewrite, &[0], &[0.0], 0)];
    assert_eq!(compute_flexibility(&at_zero, 0.0).value, 0.0, "0 is not below 0");
    assert_eq!(compute_flexibility(&at_zero, 0.0 + f64::EPSILON).value, 1.0);

    let spread = vec![
        outcome("a", Experiment::Rewrite, &[0], &[0.05], 0),
        outcome("b", Experiment::Rewrite, &[0], &[0.15], 0),
    ];
    assert_eq!(compute_flexibility(&spread, 0.1).value, 0.5);
    // The minimum of the prompt's scores is what faces the threshold.
    let min_wins = vec![outcome("a", Experiment::Rewrite, &[0, 1], &[0.9, -0.2], 0)];
    assert_eq!(compute_flexibility(&min_wins, 0.0).value, 1.0);
}

#[test]
fn originality_maps_min_similarity_onto_unit_interval() {
    let clone_only = vec![outcome("a", Experiment::Completion, &[0], &[1.0], 0)];
    assert_eq!(compute_originality(&clone_only).value, 0.0);
    let disjoint = vec![outcome("a", Experiment::Completion, &[0], &[-1.0], 0)];
    assert_eq!(compute_originality(&disjoint).value, 1.0);
    let mixed = vec![outcome("a", Experiment::Completion, &[0, 1], &[1.0, -1.0], 0)];
    assert_eq!(compute_originality(&mixed).value, 1.0, "the minimum decides");
}

// ---------------------------------------------------------------- variants

#[test]
fn fluency_variants_change_only_the_normalizer() {
    let outcomes = vec![outcome("a", Experiment::Completion, &[0, 1], &[1.0, 0.2], 0)];
    assert_eq!(compute_fluency(&outcomes, 4, DEFAULT_EPS).value, 0.5);
    assert_eq!(compute_fluency_by_m(&outcomes, DEFAULT_EPS).value, 1.0);

    let mut with_pairwise = outcomes.clone();
    with_pairwise[0].pairwise_unique = Some(2);
    assert_eq!(compute_fluency_pairwise(&with_pairwise, 4).value, 0.5);
    // Pairwise uniqueness can see sameness that golden-similarity cannot:
    // two responses equally far from the golden may still be one another's
    // clones, collapsing the count.
    with_pairwise[0].pairwise_unique = Some(1);
    assert_eq!(compute_fluency_pairwise(&with_pairwise, 4).value, 0.25);
}

// ---------------------------------------------------------------- weights

#[test]
fn creativity_is_the_weighted_mean() {
    assert_eq!(compute_creativity(1.0, 1.0, 1.0, 1.0, &DEFAULT_WEIGHTS).unwrap(), 1.0);
    assert_eq!(compute_creativity(0.5, 0.0, 0.25, 0.25, &DEFAULT_WEIGHTS).unwrap(), 0.25);
    let skewed = [0.4, 0.3, 0.2, 0.1];
    let got = compute_creativity(0.5, 0.5, 0.5, 0.5, &skewed).unwrap();
    assert!((got - 0.5).abs() < 1e-15);
}

#[test]
fn bad_weights_are_rejected() {
    let negative = [-0.25, 0.5, 0.5, 0.25];
    assert_eq!(
        compute_creativity(0.5, 0.5, 0.5, 0.5, &negative),
        Err(MetricsError::BadWeights(negative))
    );
    let off_sum = [0.25, 0.25, 0.25, 0.26];
    assert_eq!(
        compute_creativity(0.5, 0.5, 0.5, 0.5, &off_sum),
        Err(MetricsError::BadWeights(off_sum))
    );
}

// ---------------------------------------------------------------- elaboration

fn two_submodule_case() -> PromptCase {
    let half_add = "module half_add(input a, input b, output s, output c);\n\
                    assign s = a ^ b;\nassign c = a & b;\nendmodule\n";
    let inv = "module inv(input a, output y);\nassign y = ~a;\nendmodule\n";
    PromptCase {
        id: "two_subs".to_string(),
        kind: CaseKind::Multi,
        description: "demo".to_string(),
        interface_decl: "module two_subs(input a, input b, output y);".to_string(),
        golden_solution: "module two_subs(input a, input b, output y);\n\
                          wire s, c;\n\
                          half_add h(.a(a), .b(b), .s(s), .c(c));\n\
                          inv i(.a(c), .y(y));\nendmodule\n"
            .to_string(),
        testbench: "module tb();\nendmodule\n".to_string(),
        submodules: vec![
            Submodule {
                path: "half_add.v".to_string(),
                source: half_add.to_string(),
                module_name: "half_add".to_string(),
            },
            Submodule {
                path: "inv.v".to_string(),
                source: inv.to_string(),
                module_name: "inv".to_string(),
            },
        ],
        pass_rule: None,
    }
}

#[test]
fn elaboration_checks_instantiation_of_provided_submodules() {
    let corpus = common::load_fixture_corpus();
    let case = corpus.cases.iter().find(|c| c.id == "full_add").unwrap();
    // The golden instantiates half_add twice; a from-scratch version never
    // names it; prose parses to nothing.
    assert!(check_elaboration(&[case.golden_solution.clone()], case, false));
    let from_scratch = "module full_add(input a, input b, input cin, output s, output cout);\n\
                        assign s = a ^ b ^ cin;\n\
                        assign cout = (a & b) | (cin & (a ^ b));\nendmodule\n"
        .to_string();
    assert!(!check_elaboration(&[from_scratch.clone()], case, false));
    assert!(!check_elaboration(&["not verilog at all".to_string()], case, false));
    // Any single elaborating response suffices.
    assert!(check_elaboration(
        &[from_scratch, case.golden_solution.clone()],
        case,
        false
    ));
    assert!(!check_elaboration(&[], case, false));
}

#[test]
fn elaboration_any_versus_all_submodules() {
    let case = two_submodule_case();
    let only_half = "module two_subs(input a, input b, output y);\nwire s, c;\n\
                     half_add h(.a(a), .b(b), .s(s), .c(c));\nassign y = ~c;\nendmodule\n"
        .to_string();
    assert!(check_elaboration(&[only_half.clone()], &case, false));
    assert!(!check_elaboration(&[only_half], &case, true));
    assert!(check_elaboration(&[case.golden_solution.clone()], &case, true));
}

#[test]
fn single_cases_never_elaborate() {
    let corpus = common::load_fixture_corpus();
    let case = corpus.cases.iter().find(|c| c.id == "and_gate").unwrap();
    assert!(!check_elaboration(&[case.golden_solution.clone()], case, false));
}

#[test]
fn elaboration_rate_is_k_over_p() {
    assert_eq!(
        compute_elaboration(&[true, false, true], 3).unwrap(),
        MetricValue { value: 2.0 / 3.0, n: 3 }
    );
    // Prompts whose flags are missing (skipped cases) still divide the rate.
    assert_eq!(compute_elaboration(&[true], 4).unwrap().value, 0.25);
}

// ---------------------------------------------------------------- flags

#[test]
fn flag_constructors_carry_codes_and_metrics() {
    let f = MetricFlag::no_functional_responses("fluency");
    assert_eq!(f.code, "no_functional_responses");
    assert_eq!(f.metric.as_deref(), Some("fluency"));
    assert!(f.detail.contains("fluency"));

    assert_eq!(MetricFlag::not_run("flexibility").code, "metric_not_run");
    assert_eq!(MetricFlag::no_prompts("elaboration").code, "no_contributing_prompts");
    assert_eq!(MetricFlag::not_all_components().metric.as_deref(), Some("creativity"));
    assert!(MetricFlag::unscorable(3).detail.contains('3'));
    assert!(MetricFlag::timeouts(2).detail.contains('2'));
    let p = MetricFlag::partial_functionality(6, 8);
    assert!(p.detail.contains("6 of 8"));
}
