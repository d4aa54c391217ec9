//! Property tests for the cross-module invariants.

mod common;

use std::collections::BTreeMap;

use common::{deterministic_env, holds, law_menu, oracle_allowed, oracle_blocks, random_trajectory};
use lawshield::actor::RandomAllowed;
use lawshield::critic::{check_grounding, CandidateLaw, CandidateSource, StepRef};
use lawshield::env::{Item, Outcome, Primitive, WorldState};
use lawshield::ltl::parse_law_file;
use lawshield::{
    allowed_actions, check, eval_trace, filter_with_fallback, fixtures, parse_formula, run_episode, run_round,
    AbstractState, ActionVector, BipartiteGraph, Env, EpisodeConfig, Law, LawSet, LawSource, LtlError, StepOutcome,
    TraceVerdict, Vocabulary,
};
use proptest::prelude::*;

fn minecraft() -> Vocabulary {
    Vocabulary::minecraft()
}

fn state_strategy(n: usize) -> impl Strategy<Value = AbstractState> {
    proptest::collection::vec(any::<bool>(), n).prop_map(AbstractState::new)
}

/// Every law from the bundled fixtures, in one pool.
fn fixture_pool(v: &Vocabulary) -> Vec<Law> {
    let mut pool = Vec::new();
    for text in [fixtures::SAYCAN_HARD, fixtures::SAYCAN_SOFT, fixtures::INNER_MONOLOGUE] {
        pool.extend(parse_law_file(text, v).unwrap());
    }
    pool
}

fn subset(pool: &[Law], mask: &[bool]) -> LawSet {
    LawSet::from_laws(pool.iter().zip(mask).filter(|(_, &m)| m).map(|(l, _)| l.clone())).unwrap()
}

/// Replays a sequence of action indices from `init(seed)`, returning every
/// world visited together with the step outcomes.
fn walk(env: &Env, seed: u64, actions: &[usize]) -> Vec<(WorldState, usize, Outcome, WorldState)> {
    let m = env.vocab().num_actions();
    let mut world = env.init(seed);
    let mut out = Vec::new();
    for &a in actions {
        let r = env.step(&world, ActionVector::new(a % m, m)).unwrap();
        out.push((world.clone(), a % m, r.outcome, r.world.clone()));
        world = r.world;
    }
    out
}

// ---------------------------------------------------------------- vocab/env

fn recipe(p: Primitive) -> &'static [(Item, i64)] {
    use Item::*;
    match p {
        Primitive::CraftPlanks => &[(Log, -1), (Plank, 4)],
        Primitive::CraftStick => &[(Plank, -2), (Stick, 4)],
        Primitive::CraftCraftingTable => &[(Plank, -4), (CraftingTable, 1)],
        Primitive::CraftFurnace => &[(Cobblestone, -8), (Furnace, 1)],
        Primitive::CraftWoodenPickaxe => &[(Plank, -3), (Stick, -2), (WoodenPickaxe, 1)],
        Primitive::CraftStonePickaxe => &[(Cobblestone, -3), (Stick, -2), (StonePickaxe, 1)],
        Primitive::CraftIronPickaxe => &[(IronIngot, -3), (Stick, -2), (IronPickaxe, 1)],
        Primitive::MineLog => &[(Log, 1)],
        Primitive::MineStone => &[(Cobblestone, 1)],
        Primitive::MineIronOre => &[(IronOre, 1)],
        Primitive::MineCoal => &[(Coal, 1)],
        Primitive::MineDiamond => &[(Diamond, 1)],
        Primitive::PlaceCraftingTable => &[(CraftingTable, -1)],
        Primitive::PlaceFurnace => &[(Furnace, -1)],
        _ => &[],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn thresholds_are_monotone_and_equipping_implies_possession(
        seed in 0u64..1000,
        actions in proptest::collection::vec(0usize..20, 0..80),
    ) {
        let env = deterministic_env();
        let v = env.vocab();
        let chains: [&[&str]; 3] = [
            &["obs_has_plank", "obs_has_2x_plank", "obs_has_3x_plank", "obs_has_4x_plank", "obs_has_11x_plank"],
            &["obs_has_3x_cobble", "obs_has_8x_cobble", "obs_has_11x_cobble"],
            &["obs_has_1x_iron_ore", "obs_has_2x_iron_ore", "obs_has_3x_iron_ore"],
        ];
        let pairs = [
            ("obs_wood_pickaxe_equipped", "obs_has_wood_pickaxe"),
            ("obs_stone_pickaxe_equipped", "obs_has_stone_pickaxe"),
            ("obs_iron_pickaxe_equipped", "obs_has_iron_pickaxe"),
        ];
        let bit = |s: &AbstractState, n: &str| s.get(v.observation_index(n).unwrap());
        for (_, _, _, next) in walk(&env, seed, &actions) {
            let s = env.abstract_state(&next);
            prop_assert_eq!(&s, &env.abstract_state(&next));
            for chain in chains {
                for w in chain.windows(2) {
                    prop_assert!(!bit(&s, w[1]) || bit(&s, w[0]), "{} without {}", w[1], w[0]);
                }
            }
            for (eq, has) in pairs {
                prop_assert!(!bit(&s, eq) || bit(&s, has), "{} without {}", eq, has);
            }
        }
    }

    #[test]
    fn steps_conserve_items_and_errors_are_atomic_and_coherent(
        seed in 0u64..1000,
        actions in proptest::collection::vec(0usize..20, 1..80),
    ) {
        let env = deterministic_env();
        let v = env.vocab();
        for (before, a, outcome, after) in walk(&env, seed, &actions) {
            let p = env.primitive(ActionVector::new(a, v.num_actions())).unwrap();
            let s = env.abstract_state(&before);
            match outcome {
                Outcome::EnvError { precondition, .. } => {
                    prop_assert_eq!(&before, &after);
                    prop_assert!(!precondition.eval_state(&s).unwrap());
                    prop_assert!(precondition.atoms().iter().all(|atom| atom.name.starts_with("obs_")));
                }
                Outcome::Ok => {
                    for r in p.requirements() {
                        let f = parse_formula(r.text, v).unwrap();
                        prop_assert!(f.eval_state(&s).unwrap(), "{} ran without {}", p.name(), r.text);
                    }
                    let mut expected: BTreeMap<Item, i64> = recipe(p).iter().copied().collect();
                    if p == Primitive::SmeltIron {
                        let fuel = if before.inventory().get(Item::Coal) > 0 { Item::Coal } else { Item::Plank };
                        expected.insert(fuel, -1);
                        expected.insert(Item::IronOre, -1);
                        expected.insert(Item::IronIngot, 1);
                    }
                    for item in Item::ALL {
                        let delta = i64::from(after.inventory().get(item)) - i64::from(before.inventory().get(item));
                        prop_assert_eq!(delta, expected.get(&item).copied().unwrap_or(0), "{} via {}", item.name(), p.name());
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------- ltl

const SMALL_OBS: [&str; 3] = ["obs_a", "obs_b", "obs_c"];
const SMALL_ACT: [&str; 3] = ["action_x", "action_y", "action_z"];

fn small_vocab() -> Vocabulary {
    Vocabulary::from_names(&SMALL_OBS, &SMALL_ACT).unwrap()
}

/// Parses a generated law, discarding the case when its obligation has no
/// satisfying action. Any other parse error fails the test.
fn parse_or_reject(text: &str, v: &Vocabulary) -> Result<Law, TestCaseError> {
    match Law::parse("p", text, LawSource::CriticEfficiency, v) {
        Ok(law) => Ok(law),
        Err(LtlError::UnsatisfiableAction(_)) => Err(TestCaseError::reject("unsatisfiable obligation")),
        Err(e) => Err(TestCaseError::fail(format!("{text}: {e}"))),
    }
}

fn formula_text(atoms: &'static [&'static str]) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        6 => proptest::sample::select(atoms).prop_map(String::from),
        1 => Just("true".to_string()),
        1 => Just("false".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|x| format!("!({x})")),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| format!("({x} & {y})")),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| format!("({x} | {y})")),
            (inner.clone(), inner).prop_map(|(x, y)| format!("({x} -> {y})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn trace_monitor_agrees_with_stepwise_shield(
        cond in formula_text(&SMALL_OBS),
        act in formula_text(&SMALL_ACT),
        trace in proptest::collection::vec((proptest::collection::vec(any::<bool>(), 3), 0usize..3), 0..=20),
    ) {
        let v = small_vocab();
        let law = parse_or_reject(&format!("G({cond} -> X({act}))"), &v)?;
        let laws = LawSet::from_laws([law.clone()]).unwrap();
        let states: Vec<AbstractState> = trace.iter().map(|(b, _)| AbstractState::new(b.clone())).collect();
        let steps: Vec<(&AbstractState, Option<ActionVector>)> = states
            .iter()
            .zip(&trace)
            .map(|(s, (_, a))| (s, Some(ActionVector::new(*a, 3))))
            .collect();
        let expected = match steps.iter().position(|(s, a)| !check(s, a.unwrap(), &laws, &v).allowed) {
            Some(i) => TraceVerdict::Violated(i + 1),
            None => TraceVerdict::Satisfied,
        };
        let verdict = eval_trace(&law, steps.iter().copied()).unwrap();
        prop_assert_eq!(verdict, expected);
        for (s, a) in &steps {
            prop_assert_eq!(
                law.blocks(s, a.unwrap().index()),
                oracle_blocks(&law, s, a.unwrap().index())
            );
        }
    }

    #[test]
    fn one_hot_models_match_brute_force(act in formula_text(&SMALL_ACT)) {
        let v = small_vocab();
        let f = parse_formula(&act, &v).unwrap();
        let models = f.one_hot_models(3).unwrap();
        let empty = AbstractState::new(vec![false; 3]);
        for a in 0..3 {
            prop_assert_eq!(models.contains(a), holds(&f, &empty, a));
            prop_assert_eq!(models.contains(a), f.eval_action(ActionVector::new(a, 3)).unwrap());
        }
    }

    #[test]
    fn printing_round_trips(cond in formula_text(&SMALL_OBS), act in formula_text(&SMALL_ACT)) {
        let v = small_vocab();
        let law = parse_or_reject(&format!("G({cond} -> X({act}))"), &v)?;
        let again = parse_formula(&law.text(), &v).unwrap();
        prop_assert_eq!(&again, &law.formula);
    }
}

// ---------------------------------------------------------------- shield

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn allowed_set_matches_brute_force(state in state_strategy(30), mask in proptest::collection::vec(any::<bool>(), 54)) {
        let v = minecraft();
        let pool = fixture_pool(&v);
        let laws = subset(&pool, &mask);
        let got: Vec<usize> = allowed_actions(&state, &laws, 20).allowed.iter().collect();
        prop_assert_eq!(got, oracle_allowed(&laws, &state, 20));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn adding_laws_never_enables_actions(
        state in state_strategy(30),
        small in proptest::collection::vec(any::<bool>(), 54),
        extra in proptest::collection::vec(any::<bool>(), 54),
    ) {
        let v = minecraft();
        let pool = fixture_pool(&v);
        let big: Vec<bool> = small.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
        let a = allowed_actions(&state, &subset(&pool, &small), 20).allowed;
        let b = allowed_actions(&state, &subset(&pool, &big), 20).allowed;
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn fallback_never_admits_hard_violations(state in state_strategy(30), mask in proptest::collection::vec(any::<bool>(), 54)) {
        let v = minecraft();
        let pool = fixture_pool(&v);
        let laws = subset(&pool, &mask);
        let filtered = filter_with_fallback(&state, &laws, 20).unwrap();
        let hard = laws.hard_subset();
        for a in filtered.allowed.allowed.iter() {
            prop_assert!(hard.laws().iter().all(|l| !oracle_blocks(l, &state, a)));
            if !filtered.used_fallback {
                prop_assert!(laws.laws().iter().all(|l| !oracle_blocks(l, &state, a)));
            }
        }
        prop_assert_eq!(filtered.used_fallback, oracle_allowed(&laws, &state, 20).is_empty());
    }
}

// ---------------------------------------------------------------- actor

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn executed_actions_respect_the_active_laws(seed in 0u64..10_000, which in 0usize..4, uniform in any::<bool>()) {
        let env = deterministic_env();
        let v = env.vocab();
        let laws = law_menu(v)[which].clone();
        let mut policy = if uniform { RandomAllowed::uniform() } else { RandomAllowed::new() };
        let cfg = EpisodeConfig { max_steps: 60, retry_budget: 5 };
        let t = run_episode(&env, &mut policy, &laws, &cfg, seed).unwrap();
        let hard = laws.hard_subset();
        for s in &t.steps {
            let Some(a) = &s.executed_action else { continue };
            let a = v.action_from_name(a).unwrap();
            let active = if s.used_fallback { &hard } else { &laws };
            prop_assert!(check(&s.abstract_state, a, active, v).allowed);
            if !uniform {
                prop_assert_eq!(s.proposals.len(), 1);
            }
        }
        if !t.steps.iter().any(|s| s.used_fallback) {
            let steps = t.monitor_steps(v).unwrap();
            for law in laws.laws() {
                prop_assert_eq!(eval_trace(law, steps.iter().copied()).unwrap(), TraceVerdict::Satisfied);
            }
        }
        let again = run_episode(&env, &mut policy, &laws, &cfg, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&t).unwrap(), serde_json::to_string(&again).unwrap());
    }
}

// ---------------------------------------------------------------- critic

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn critic_rounds_are_grounded_feasible_bounded_and_idempotent(i in 0u64..100_000) {
        let env = deterministic_env();
        let v = env.vocab();
        let (t, laws) = random_trajectory(&env, i);
        let trajs = std::slice::from_ref(&t);
        let (next, round) = run_round(trajs, &laws, v, None).unwrap();
        prop_assert!(round.added.len() <= t.steps.len());
        for a in &round.added {
            let c = CandidateLaw {
                law: next.get(&a.id).unwrap().clone(),
                source: CandidateSource::Efficiency,
                evidence: vec![StepRef { trajectory: 0, step: 0 }],
            };
            prop_assert!(check_grounding(&c, trajs));
        }
        for s in t.states() {
            prop_assert!(!allowed_actions(s, &next, v.num_actions()).allowed.is_empty());
        }
        for h in laws.laws().iter().filter(|l| l.is_hard()) {
            prop_assert_eq!(next.get(&h.id), Some(h));
        }
        let (third, again) = run_round(trajs, &next, v, None).unwrap();
        prop_assert!(again.added.is_empty(), "second round added {:?}", again.added);
        prop_assert_eq!(third.laws(), next.laws());
    }
}

// ---------------------------------------------------------------- graph

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prune_keeps_exactly_the_shield_allowed_edges(
        picks in proptest::collection::vec(0u64..500, 1..6),
        mask in proptest::collection::vec(any::<bool>(), 54),
    ) {
        let env = deterministic_env();
        let v = env.vocab();
        let trajs: Vec<_> = picks.iter().map(|&i| random_trajectory(&env, i).0).collect();
        let g = BipartiteGraph::build(&trajs, v).unwrap();
        let laws = subset(&fixture_pool(v), &mask);
        let pruned = g.prune(&laws, v);
        for (s, a) in g.choice_edges() {
            let allowed = check(s, ActionVector::new(a, 20), &laws, v).allowed;
            prop_assert_eq!(!pruned.successors(s, a).is_empty(), allowed);
        }
        let steps: usize = trajs.iter().map(|t| t.steps.len()).sum();
        prop_assert!(g.state_count() <= steps + trajs.len());
        prop_assert!(g.pair_count() <= steps);
        let before = g.distances();
        for (b, p) in before.iter().zip(pruned.distances()) {
            if let Some(p) = p {
                prop_assert!(b.is_some_and(|b| b <= p));
            }
        }
    }
}

#[test]
fn empirical_distance_bounds_oracle_along_scripted_run() {
    use lawshield::actor::ScriptedGreedy;
    use lawshield::graph::brute_force_optimal;
    let env = deterministic_env();
    let v = env.vocab();
    let mut p = ScriptedGreedy::new(v).unwrap();
    let t = run_episode(&env, &mut p, &LawSet::new(), &EpisodeConfig::default(), 0).unwrap();
    let g = BipartiteGraph::build(std::slice::from_ref(&t), v).unwrap();
    let mut world = env.init(0);
    // Abstract states can repeat along a run (a second cobblestone crosses
    // no threshold), and a repeat gives the graph a shortcut the concrete
    // world lacks. The graph bound is only checked where no state from
    // there on repeats. Every suffix of the scripted run must itself be
    // optimal. The early steps are slow to search and are covered by the
    // acceptance run, so the scan starts at step 12.
    let mut seen: BTreeMap<&AbstractState, usize> = BTreeMap::new();
    for s in &t.steps {
        *seen.entry(&s.abstract_state).or_default() += 1;
    }
    let mut clean_suffix = vec![true; t.steps.len() + 1];
    for k in (0..t.steps.len()).rev() {
        clean_suffix[k] = clean_suffix[k + 1] && seen[&t.steps[k].abstract_state] == 1;
    }
    for (k, s) in t.steps.iter().enumerate() {
        if k >= 12 {
            let opt = brute_force_optimal(env.config(), &world.core, 60).unwrap().unwrap();
            assert_eq!(opt, t.steps.len() - k, "step {k}");
            if clean_suffix[k] {
                let emp = g.distance_to_goal(&s.abstract_state).unwrap().unwrap();
                assert!(emp >= opt, "step {k}: empirical {emp} < optimal {opt}");
            }
        }
        let a = v.action_from_name(s.executed_action.as_deref().unwrap()).unwrap();
        world = env.step(&world, a).unwrap().world;
    }
    assert!(matches!(t.steps.last().unwrap().outcome, StepOutcome::Ok));
}

#[test]
fn node_count_is_bounded_by_logged_steps() {
    let env = deterministic_env();
    let trajs: Vec<_> = (0..30).map(|i| random_trajectory(&env, i).0).collect();
    let g = BipartiteGraph::build(&trajs, env.vocab()).unwrap();
    let steps: usize = trajs.iter().map(|t| t.steps.len()).sum();
    assert!(g.state_count() <= steps + trajs.len());
}
