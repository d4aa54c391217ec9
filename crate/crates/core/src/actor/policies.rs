use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ActorError, DecisionContext, Policy, PolicyError};
use crate::env::{EnvError, Primitive};
use crate::ltl::{parse_formula, Formula};
use crate::vocab::{AbstractState, Vocabulary};

/// The primitive that makes each requirement true.
const PRODUCERS: &[(&str, Primitive)] = &[
    (
        "obs_wood_pickaxe_equipped | obs_stone_pickaxe_equipped | obs_iron_pickaxe_equipped",
        Primitive::EquipWoodPickaxe,
    ),
    (
        "obs_stone_pickaxe_equipped | obs_iron_pickaxe_equipped",
        Primitive::EquipStonePickaxe,
    ),
    ("obs_iron_pickaxe_equipped", Primitive::EquipIronPickaxe),
    ("obs_iron_in_chunk", Primitive::ExploreGeneral),
    ("obs_coal_in_chunk", Primitive::ExploreGeneral),
    ("obs_diamond_in_chunk", Primitive::ExploreDiamondDown),
    ("obs_near_crafting_table", Primitive::PlaceCraftingTable),
    ("obs_near_furnace", Primitive::PlaceFurnace),
    ("obs_has_log", Primitive::MineLog),
    ("obs_has_2x_plank", Primitive::CraftPlanks),
    ("obs_has_3x_plank", Primitive::CraftPlanks),
    ("obs_has_4x_plank", Primitive::CraftPlanks),
    ("obs_has_fuel", Primitive::CraftPlanks),
    ("obs_has_2x_stick", Primitive::CraftStick),
    ("obs_has_3x_cobble", Primitive::MineStone),
    ("obs_has_8x_cobble", Primitive::MineStone),
    ("obs_has_3x_iron_ingot", Primitive::SmeltIron),
    ("obs_has_1x_iron_ore", Primitive::MineIronOre),
    ("obs_has_wood_pickaxe", Primitive::CraftWoodenPickaxe),
    ("obs_has_stone_pickaxe", Primitive::CraftStonePickaxe),
    ("obs_has_iron_pickaxe", Primitive::CraftIronPickaxe),
    ("obs_has_crafting_table", Primitive::CraftCraftingTable),
    ("obs_has_furnace", Primitive::CraftFurnace),
];

struct Step {
    /// Requirement formulas paired with the primitive that establishes each.
    requirements: Vec<(Formula, Primitive)>,
}

/// Deterministic subgoal-ladder policy.
///
/// Works backwards from mining a diamond: the first unmet requirement of
/// the current target becomes the new target, until a target whose
/// requirements all hold is found. On shield rejection, the k-th retry
/// proposes the k-th other executable primitive in ladder order.
pub struct ScriptedGreedy {
    steps: Vec<Step>,
    wood_equipped: Option<usize>,
    stone_equipped: Option<usize>,
    iron_equipped: Option<usize>,
}

/// Subgoal stage of each primitive along the diamond ladder.
fn stage(p: Primitive) -> u8 {
    match p {
        Primitive::MineLog => 1,
        Primitive::CraftPlanks | Primitive::CraftStick => 2,
        Primitive::CraftCraftingTable | Primitive::PlaceCraftingTable | Primitive::CraftWoodenPickaxe => 3,
        Primitive::EquipWoodPickaxe | Primitive::MineStone => 4,
        Primitive::CraftStonePickaxe
        | Primitive::EquipStonePickaxe
        | Primitive::CraftFurnace
        | Primitive::PlaceFurnace => 5,
        Primitive::MineIronOre | Primitive::MineCoal | Primitive::ExploreGeneral => 6,
        Primitive::SmeltIron => 7,
        Primitive::CraftIronPickaxe | Primitive::EquipIronPickaxe => 8,
        Primitive::ExploreDiamondDown | Primitive::MineDiamond => 9,
    }
}

impl ScriptedGreedy {
    pub fn new(vocab: &Vocabulary) -> Result<Self, ActorError> {
        let mut steps = Vec::with_capacity(Primitive::ALL.len());
        for p in Primitive::ALL {
            let mut requirements = Vec::new();
            for r in p.requirements() {
                let formula =
                    parse_formula(r.text, vocab).map_err(|source| EnvError::Requirement { text: r.text, source })?;
                let producer = PRODUCERS
                    .iter()
                    .find(|(text, _)| *text == r.text)
                    .map(|(_, p)| *p)
                    .expect("every requirement has a producer");
                requirements.push((formula, producer));
            }
            steps.push(Step { requirements });
        }
        Ok(Self {
            steps,
            wood_equipped: vocab.observation_index("obs_wood_pickaxe_equipped"),
            stone_equipped: vocab.observation_index("obs_stone_pickaxe_equipped"),
            iron_equipped: vocab.observation_index("obs_iron_pickaxe_equipped"),
        })
    }

    fn step(&self, p: Primitive) -> &Step {
        &self.steps[p as usize]
    }

    fn executable(&self, p: Primitive, state: &AbstractState) -> bool {
        self.step(p)
            .requirements
            .iter()
            .all(|(f, _)| f.eval_state(state).unwrap_or(false))
    }

    /// Next ladder primitive towards the goal.
    pub fn next_primitive(&self, state: &AbstractState) -> Primitive {
        let mut target = Primitive::MineDiamond;
        for _ in 0..Primitive::ALL.len() {
            let unmet = self
                .step(target)
                .requirements
                .iter()
                .find(|(f, _)| !f.eval_state(state).unwrap_or(false));
            match unmet {
                Some((_, producer)) => target = *producer,
                None => return target,
            }
        }
        target
    }

    /// Ranked proposals: the ladder choice, then every other executable
    /// primitive, furthest ladder stage first. Re-equipping the tool in
    /// hand is never offered.
    pub fn candidates(&self, state: &AbstractState) -> Vec<Primitive> {
        let first = self.next_primitive(state);
        let mut rest: Vec<Primitive> = Primitive::ALL
            .into_iter()
            .filter(|p| *p != first && self.executable(*p, state) && !self.is_reequip(*p, state))
            .collect();
        rest.sort_by_key(|p| std::cmp::Reverse(stage(*p)));
        let mut out = vec![first];
        out.extend(rest);
        out
    }

    fn is_reequip(&self, p: Primitive, state: &AbstractState) -> bool {
        let held = match p {
            Primitive::EquipWoodPickaxe => self.wood_equipped,
            Primitive::EquipStonePickaxe => self.stone_equipped,
            Primitive::EquipIronPickaxe => self.iron_equipped,
            _ => return false,
        };
        held.is_some_and(|i| state.get(i))
    }
}

impl Policy for ScriptedGreedy {
    fn name(&self) -> &str {
        "scripted_greedy"
    }

    fn propose(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError> {
        Ok(self
            .candidates(ctx.abstract_state)
            .get(ctx.retry)
            .map(|p| p.name().to_string()))
    }
}

/// Samples uniformly from the shield's allowed set, or from every action
/// when no allowed set is available.
pub struct RandomAllowed {
    rng: ChaCha8Rng,
    use_allowed: bool,
}

impl RandomAllowed {
    pub fn new() -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(0),
            use_allowed: true,
        }
    }

    /// Ignores the shield and samples from every action, so blocked
    /// proposals show up in the log.
    pub fn uniform() -> Self {
        Self {
            use_allowed: false,
            ..Self::new()
        }
    }
}

impl Default for RandomAllowed {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for RandomAllowed {
    fn name(&self) -> &str {
        if self.use_allowed {
            "random_allowed"
        } else {
            "random_uniform"
        }
    }

    fn wants_allowed_set(&self) -> bool {
        self.use_allowed
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn propose(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError> {
        let pick = match ctx.allowed_actions.filter(|_| self.use_allowed) {
            Some(allowed) => allowed.choose(&mut self.rng).cloned(),
            None => ctx.vocab.actions().choose(&mut self.rng).map(|p| p.name.clone()),
        };
        Ok(pick)
    }
}

/// Always proposes the same action name. Useful for probing a law set.
pub struct FixedPolicy {
    action: String,
}

impl FixedPolicy {
    pub fn new(action: impl Into<String>) -> Self {
        Self { action: action.into() }
    }
}

impl Policy for FixedPolicy {
    fn name(&self) -> &str {
        "fixed"
    }

    fn propose(&mut self, _ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError> {
        Ok(Some(self.action.clone()))
    }
}
