//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use lawshield::actor::{DecisionContext, PolicyError, RandomAllowed, ScriptedGreedy};
use lawshield::env::EnvConfig;
use lawshield::{
    fixtures, run_episode, AbstractState, Env, EpisodeConfig, Formula, Law, LawSet, Policy, PropKind, Trajectory,
    Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Evaluates a non-temporal formula against a state and a one-hot action
/// by walking the syntax tree directly.
pub fn holds(f: &Formula, state: &AbstractState, action: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => match a.kind {
            PropKind::Observation => state.bits()[a.index],
            PropKind::Action => a.index == action,
        },
        Formula::Not(x) => !holds(x, state, action),
        Formula::And(x, y) => holds(x, state, action) && holds(y, state, action),
        Formula::Or(x, y) => holds(x, state, action) || holds(y, state, action),
        Formula::Implies(x, y) => !holds(x, state, action) || holds(y, state, action),
        other => panic!("temporal operator inside a step formula: {other:?}"),
    }
}

/// Whether choosing `action` in `state` violates `law`, read straight off
/// the `G(cond -> X(act))` syntax. Pure state invariants never block.
pub fn oracle_blocks(law: &Law, state: &AbstractState, action: usize) -> bool {
    let Formula::Globally(body) = &law.formula else {
        panic!("law {} is not a G(...) formula", law.id)
    };
    match body.as_ref() {
        Formula::Implies(cond, next) => match next.as_ref() {
            Formula::Next(act) => holds(cond, state, action) && !holds(act, state, action),
            _ => false,
        },
        _ => false,
    }
}

/// Brute-force allowed set: every action no law blocks, in index order.
pub fn oracle_allowed(laws: &LawSet, state: &AbstractState, num_actions: usize) -> Vec<usize> {
    (0..num_actions)
        .filter(|&a| laws.laws().iter().all(|l| !oracle_blocks(l, state, a)))
        .collect()
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> AbstractState {
    AbstractState::new((0..n).map(|_| rng.random_bool(0.5)).collect())
}

/// Scripted ladder policy that substitutes a uniformly random action with
/// probability `noise` on each first proposal.
pub struct NoisyScripted {
    inner: ScriptedGreedy,
    rng: ChaCha8Rng,
    noise: f64,
}

impl NoisyScripted {
    pub fn new(vocab: &Vocabulary, noise: f64) -> Self {
        Self {
            inner: ScriptedGreedy::new(vocab).unwrap(),
            rng: ChaCha8Rng::seed_from_u64(0),
            noise,
        }
    }
}

impl Policy for NoisyScripted {
    fn name(&self) -> &str {
        "noisy_scripted"
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    }

    fn propose(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError> {
        if ctx.retry == 0 && self.rng.random_bool(self.noise) {
            let actions = ctx.vocab.actions();
            return Ok(Some(actions[self.rng.random_range(0..actions.len())].name.clone()));
        }
        self.inner.propose(ctx)
    }
}

/// The law sets random trajectories are drawn under.
pub fn law_menu(vocab: &Vocabulary) -> Vec<LawSet> {
    vec![
        LawSet::new(),
        fixtures::saycan_hard(vocab),
        fixtures::saycan_all(vocab),
        fixtures::inner_monologue(vocab),
    ]
}

/// The `i`-th random trajectory: a random length in 1..=50, a law set from
/// [`law_menu`], and one of three actors (uniform random, shield-aware
/// random, noisy scripted).
pub fn random_trajectory(env: &Env, i: u64) -> (Trajectory, LawSet) {
    let vocab = env.vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5A5 + i);
    let menu = law_menu(vocab);
    let laws = menu[rng.random_range(0..menu.len())].clone();
    let config = EpisodeConfig {
        max_steps: rng.random_range(1..=50),
        retry_budget: 5,
    };
    let mut policy: Box<dyn Policy> = match i % 3 {
        0 => Box::new(RandomAllowed::uniform()),
        1 => Box::new(RandomAllowed::new()),
        _ => Box::new(NoisyScripted::new(vocab, 0.2)),
    };
    let t = run_episode(env, policy.as_mut(), &laws, &config, i).unwrap();
    (t, laws)
}

pub fn deterministic_env() -> Env {
    Env::minecraft(EnvConfig::deterministic())
}
