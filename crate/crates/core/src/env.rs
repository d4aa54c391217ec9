//! Symbolic crafting environment.
//!
//! Inventories, placements and nearby-resource flags evolve under twenty
//! high-level primitives. A primitive whose requirements are unmet fails
//! with an environment error carrying the violated requirement as a
//! propositional formula, and leaves the world untouched.
//!
//! Recipes: 1 log -> 4 planks; 2 planks -> 4 sticks; 4 planks -> crafting
//! table; 8 cobblestone -> furnace; pickaxes take 3 of their material plus
//! 2 sticks; smelting turns 1 iron ore into 1 ingot and burns 1 coal, or 1
//! plank when no coal is held.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{parse_formula, Formula, LtlError};
use crate::vocab::{abstract_state, AbstractState, ActionVector, Vocabulary};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("vocabulary lacks action `{0}` required by the environment")]
    MissingAction(&'static str),
    #[error("vocabulary cannot express requirement `{text}`: {source}")]
    Requirement {
        text: &'static str,
        #[source]
        source: LtlError,
    },
    #[error("malformed action vector (index {index}, {len} actions)")]
    MalformedAction { index: usize, len: usize },
    #[error("explore_success_prob must be in [0, 1], got {0}")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Log,
    Plank,
    Stick,
    Cobblestone,
    IronOre,
    IronIngot,
    Coal,
    Diamond,
    CraftingTable,
    Furnace,
    WoodenPickaxe,
    StonePickaxe,
    IronPickaxe,
}

impl Item {
    pub const ALL: [Item; 13] = [
        Item::Log,
        Item::Plank,
        Item::Stick,
        Item::Cobblestone,
        Item::IronOre,
        Item::IronIngot,
        Item::Coal,
        Item::Diamond,
        Item::CraftingTable,
        Item::Furnace,
        Item::WoodenPickaxe,
        Item::StonePickaxe,
        Item::IronPickaxe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Item::Log => "log",
            Item::Plank => "plank",
            Item::Stick => "stick",
            Item::Cobblestone => "cobblestone",
            Item::IronOre => "iron_ore",
            Item::IronIngot => "iron_ingot",
            Item::Coal => "coal",
            Item::Diamond => "diamond",
            Item::CraftingTable => "crafting_table",
            Item::Furnace => "furnace",
            Item::WoodenPickaxe => "wooden_pickaxe",
            Item::StonePickaxe => "stone_pickaxe",
            Item::IronPickaxe => "iron_pickaxe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Wood,
    Stone,
    Iron,
}

impl Tier {
    pub fn pickaxe(self) -> Item {
        match self {
            Tier::Wood => Item::WoodenPickaxe,
            Tier::Stone => Item::StonePickaxe,
            Tier::Iron => Item::IronPickaxe,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Inventory([u32; 13]);

impl Inventory {
    pub fn get(&self, item: Item) -> u32 {
        self.0[item as usize]
    }

    pub fn set(&mut self, item: Item, count: u32) {
        self.0[item as usize] = count;
    }

    pub fn add(&mut self, item: Item, n: u32) {
        self.0[item as usize] += n;
    }

    fn take(&mut self, item: Item, n: u32) {
        debug_assert!(self.get(item) >= n, "requirement checked before consuming");
        self.0[item as usize] -= n;
    }

    pub fn has(&self, item: Item, n: u32) -> bool {
        self.get(item) >= n
    }

    /// Clamps every counter to at most `cap`.
    pub fn cap(&mut self, cap: u32) {
        for c in &mut self.0 {
            *c = (*c).min(cap);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkFlags {
    pub iron: bool,
    pub coal: bool,
    pub diamond: bool,
}

/// World state without the random stream: what the dynamics act on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorldCore {
    pub inventory: Inventory,
    pub equipped: Option<Tier>,
    pub near_crafting_table: bool,
    pub near_furnace: bool,
    pub chunk: ChunkFlags,
}

impl WorldCore {
    fn equipped_at_least(&self, tier: Tier) -> bool {
        self.equipped.is_some_and(|t| t >= tier)
    }

    fn has_fuel(&self) -> bool {
        self.inventory.has(Item::Coal, 1) || self.inventory.has(Item::Plank, 1)
    }

    /// Meaning of each known observation proposition.
    pub fn observe(&self, name: &str) -> Option<bool> {
        let inv = &self.inventory;
        Some(match name {
            "obs_has_log" => inv.has(Item::Log, 1),
            "obs_has_plank" => inv.has(Item::Plank, 1),
            "obs_has_2x_plank" => inv.has(Item::Plank, 2),
            "obs_has_3x_plank" => inv.has(Item::Plank, 3),
            "obs_has_4x_plank" => inv.has(Item::Plank, 4),
            "obs_has_11x_plank" => inv.has(Item::Plank, 11),
            "obs_has_2x_stick" => inv.has(Item::Stick, 2),
            "obs_has_3x_cobble" => inv.has(Item::Cobblestone, 3),
            "obs_has_8x_cobble" => inv.has(Item::Cobblestone, 8),
            "obs_has_11x_cobble" => inv.has(Item::Cobblestone, 11),
            "obs_has_wood_pickaxe" => inv.has(Item::WoodenPickaxe, 1),
            "obs_has_stone_pickaxe" => inv.has(Item::StonePickaxe, 1),
            "obs_has_iron_pickaxe" => inv.has(Item::IronPickaxe, 1),
            "obs_has_diamond" => inv.has(Item::Diamond, 1),
            "obs_has_iron_ingot" => inv.has(Item::IronIngot, 1),
            "obs_has_3x_iron_ingot" => inv.has(Item::IronIngot, 3),
            "obs_has_1x_iron_ore" => inv.has(Item::IronOre, 1),
            "obs_has_2x_iron_ore" => inv.has(Item::IronOre, 2),
            "obs_has_3x_iron_ore" => inv.has(Item::IronOre, 3),
            "obs_has_crafting_table" => inv.has(Item::CraftingTable, 1),
            "obs_has_furnace" => inv.has(Item::Furnace, 1),
            "obs_has_fuel" => self.has_fuel(),
            "obs_near_crafting_table" => self.near_crafting_table,
            "obs_near_furnace" => self.near_furnace,
            "obs_diamond_in_chunk" => self.chunk.diamond,
            "obs_iron_in_chunk" => self.chunk.iron,
            "obs_coal_in_chunk" => self.chunk.coal,
            "obs_iron_pickaxe_equipped" => self.equipped == Some(Tier::Iron),
            "obs_stone_pickaxe_equipped" => self.equipped == Some(Tier::Stone),
            "obs_wood_pickaxe_equipped" => self.equipped == Some(Tier::Wood),
            _ => return None,
        })
    }

    /// Applies a primitive. On failure returns the index of the first unmet
    /// requirement in [`Primitive::requirements`] and leaves `self` as it was.
    pub fn apply<R: Rng>(&mut self, p: Primitive, config: &EnvConfig, rng: &mut R) -> Result<(), usize> {
        if let Some(i) = p.requirements().iter().position(|r| !(r.holds)(self)) {
            return Err(i);
        }
        let inv = &mut self.inventory;
        match p {
            Primitive::MineLog => inv.add(Item::Log, 1),
            Primitive::MineStone => inv.add(Item::Cobblestone, 1),
            Primitive::MineIronOre => inv.add(Item::IronOre, 1),
            Primitive::MineCoal => inv.add(Item::Coal, 1),
            Primitive::MineDiamond => inv.add(Item::Diamond, 1),
            Primitive::CraftPlanks => {
                inv.take(Item::Log, 1);
                inv.add(Item::Plank, 4);
            }
            Primitive::CraftStick => {
                inv.take(Item::Plank, 2);
                inv.add(Item::Stick, 4);
            }
            Primitive::CraftCraftingTable => {
                inv.take(Item::Plank, 4);
                inv.add(Item::CraftingTable, 1);
            }
            Primitive::CraftFurnace => {
                inv.take(Item::Cobblestone, 8);
                inv.add(Item::Furnace, 1);
            }
            Primitive::CraftWoodenPickaxe => {
                inv.take(Item::Plank, 3);
                inv.take(Item::Stick, 2);
                inv.add(Item::WoodenPickaxe, 1);
            }
            Primitive::CraftStonePickaxe => {
                inv.take(Item::Cobblestone, 3);
                inv.take(Item::Stick, 2);
                inv.add(Item::StonePickaxe, 1);
            }
            Primitive::CraftIronPickaxe => {
                inv.take(Item::IronIngot, 3);
                inv.take(Item::Stick, 2);
                inv.add(Item::IronPickaxe, 1);
            }
            Primitive::SmeltIron => {
                if inv.has(Item::Coal, 1) {
                    inv.take(Item::Coal, 1);
                } else {
                    inv.take(Item::Plank, 1);
                }
                inv.take(Item::IronOre, 1);
                inv.add(Item::IronIngot, 1);
            }
            Primitive::EquipWoodPickaxe => self.equipped = Some(Tier::Wood),
            Primitive::EquipStonePickaxe => self.equipped = Some(Tier::Stone),
            Primitive::EquipIronPickaxe => self.equipped = Some(Tier::Iron),
            Primitive::PlaceCraftingTable => {
                inv.take(Item::CraftingTable, 1);
                self.near_crafting_table = true;
            }
            Primitive::PlaceFurnace => {
                inv.take(Item::Furnace, 1);
                self.near_furnace = true;
            }
            Primitive::ExploreGeneral => {
                let abundance = config.resource_abundance;
                if config.deterministic {
                    self.chunk.iron |= abundance.iron;
                    self.chunk.coal |= abundance.coal;
                } else {
                    let p = config.explore_success_prob;
                    self.chunk.iron |= abundance.iron && rng.random_bool(p);
                    self.chunk.coal |= abundance.coal && rng.random_bool(p);
                }
                self.near_crafting_table = false;
                self.near_furnace = false;
            }
            Primitive::ExploreDiamondDown => {
                let abundance = config.resource_abundance;
                if config.deterministic {
                    self.chunk.diamond |= abundance.diamond;
                } else {
                    let p = config.explore_success_prob;
                    self.chunk.diamond |= abundance.diamond && rng.random_bool(p);
                }
                self.near_crafting_table = false;
                self.near_furnace = false;
            }
        }
        Ok(())
    }
}

/// The twenty high-level primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    MineLog,
    MineStone,
    MineIronOre,
    MineCoal,
    MineDiamond,
    CraftPlanks,
    CraftStick,
    CraftWoodenPickaxe,
    CraftStonePickaxe,
    CraftIronPickaxe,
    CraftCraftingTable,
    CraftFurnace,
    SmeltIron,
    EquipWoodPickaxe,
    EquipStonePickaxe,
    EquipIronPickaxe,
    ExploreGeneral,
    ExploreDiamondDown,
    PlaceCraftingTable,
    PlaceFurnace,
}

/// A precondition: its formula text over observations and its direct
/// check on the world.
pub struct Requirement {
    pub text: &'static str,
    pub holds: fn(&WorldCore) -> bool,
}

const ANY_PICKAXE: Requirement = Requirement {
    text: "obs_wood_pickaxe_equipped | obs_stone_pickaxe_equipped | obs_iron_pickaxe_equipped",
    holds: |w| w.equipped.is_some(),
};
const STONE_OR_BETTER: Requirement = Requirement {
    text: "obs_stone_pickaxe_equipped | obs_iron_pickaxe_equipped",
    holds: |w| w.equipped_at_least(Tier::Stone),
};
const IRON_EQUIPPED: Requirement = Requirement {
    text: "obs_iron_pickaxe_equipped",
    holds: |w| w.equipped == Some(Tier::Iron),
};
const NEAR_TABLE: Requirement = Requirement {
    text: "obs_near_crafting_table",
    holds: |w| w.near_crafting_table,
};
const TWO_STICKS: Requirement = Requirement {
    text: "obs_has_2x_stick",
    holds: |w| w.inventory.has(Item::Stick, 2),
};

impl Primitive {
    pub const ALL: [Primitive; 20] = [
        Primitive::MineLog,
        Primitive::MineStone,
        Primitive::MineIronOre,
        Primitive::MineCoal,
        Primitive::MineDiamond,
        Primitive::CraftPlanks,
        Primitive::CraftStick,
        Primitive::CraftWoodenPickaxe,
        Primitive::CraftStonePickaxe,
        Primitive::CraftIronPickaxe,
        Primitive::CraftCraftingTable,
        Primitive::CraftFurnace,
        Primitive::SmeltIron,
        Primitive::EquipWoodPickaxe,
        Primitive::EquipStonePickaxe,
        Primitive::EquipIronPickaxe,
        Primitive::ExploreGeneral,
        Primitive::ExploreDiamondDown,
        Primitive::PlaceCraftingTable,
        Primitive::PlaceFurnace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::MineLog => "action_mine_log",
            Primitive::MineStone => "action_mine_stone",
            Primitive::MineIronOre => "action_mine_iron_ore",
            Primitive::MineCoal => "action_mine_coal",
            Primitive::MineDiamond => "action_mine_diamond",
            Primitive::CraftPlanks => "action_craft_planks",
            Primitive::CraftStick => "action_craft_stick",
            Primitive::CraftWoodenPickaxe => "action_craft_wooden_pickaxe",
            Primitive::CraftStonePickaxe => "action_craft_stone_pickaxe",
            Primitive::CraftIronPickaxe => "action_craft_iron_pickaxe",
            Primitive::CraftCraftingTable => "action_craft_crafting_table",
            Primitive::CraftFurnace => "action_craft_furnace",
            Primitive::SmeltIron => "action_smelt_iron",
            Primitive::EquipWoodPickaxe => "action_equip_wood_pickaxe",
            Primitive::EquipStonePickaxe => "action_equip_stone_pickaxe",
            Primitive::EquipIronPickaxe => "action_equip_iron_pickaxe",
            Primitive::ExploreGeneral => "action_explore_general",
            Primitive::ExploreDiamondDown => "action_explore_diamond_down",
            Primitive::PlaceCraftingTable => "action_place_crafting_table",
            Primitive::PlaceFurnace => "action_place_furnace",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Requirements, checked in order; the first unmet one is reported.
    pub fn requirements(self) -> &'static [Requirement] {
        match self {
            Primitive::MineLog | Primitive::ExploreGeneral => &[],
            Primitive::MineStone => &[ANY_PICKAXE],
            Primitive::MineIronOre => &[
                STONE_OR_BETTER,
                Requirement {
                    text: "obs_iron_in_chunk",
                    holds: |w| w.chunk.iron,
                },
            ],
            Primitive::MineCoal => &[
                ANY_PICKAXE,
                Requirement {
                    text: "obs_coal_in_chunk",
                    holds: |w| w.chunk.coal,
                },
            ],
            Primitive::MineDiamond => &[
                IRON_EQUIPPED,
                Requirement {
                    text: "obs_diamond_in_chunk",
                    holds: |w| w.chunk.diamond,
                },
            ],
            Primitive::CraftPlanks => &[Requirement {
                text: "obs_has_log",
                holds: |w| w.inventory.has(Item::Log, 1),
            }],
            Primitive::CraftStick => &[Requirement {
                text: "obs_has_2x_plank",
                holds: |w| w.inventory.has(Item::Plank, 2),
            }],
            Primitive::CraftCraftingTable => &[Requirement {
                text: "obs_has_4x_plank",
                holds: |w| w.inventory.has(Item::Plank, 4),
            }],
            Primitive::CraftFurnace => &[
                Requirement {
                    text: "obs_has_8x_cobble",
                    holds: |w| w.inventory.has(Item::Cobblestone, 8),
                },
                NEAR_TABLE,
            ],
            Primitive::CraftWoodenPickaxe => &[
                Requirement {
                    text: "obs_has_3x_plank",
                    holds: |w| w.inventory.has(Item::Plank, 3),
                },
                TWO_STICKS,
                NEAR_TABLE,
            ],
            Primitive::CraftStonePickaxe => &[
                Requirement {
                    text: "obs_has_3x_cobble",
                    holds: |w| w.inventory.has(Item::Cobblestone, 3),
                },
                TWO_STICKS,
                NEAR_TABLE,
            ],
            Primitive::CraftIronPickaxe => &[
                Requirement {
                    text: "obs_has_3x_iron_ingot",
                    holds: |w| w.inventory.has(Item::IronIngot, 3),
                },
                TWO_STICKS,
                NEAR_TABLE,
            ],
            Primitive::SmeltIron => &[
                Requirement {
                    text: "obs_has_1x_iron_ore",
                    holds: |w| w.inventory.has(Item::IronOre, 1),
                },
                Requirement {
                    text: "obs_near_furnace",
                    holds: |w| w.near_furnace,
                },
                Requirement {
                    text: "obs_has_fuel",
                    holds: WorldCore::has_fuel,
                },
            ],
            Primitive::EquipWoodPickaxe => &[Requirement {
                text: "obs_has_wood_pickaxe",
                holds: |w| w.inventory.has(Item::WoodenPickaxe, 1),
            }],
            Primitive::EquipStonePickaxe => &[Requirement {
                text: "obs_has_stone_pickaxe",
                holds: |w| w.inventory.has(Item::StonePickaxe, 1),
            }],
            Primitive::EquipIronPickaxe => &[Requirement {
                text: "obs_has_iron_pickaxe",
                holds: |w| w.inventory.has(Item::IronPickaxe, 1),
            }],
            Primitive::ExploreDiamondDown => &[IRON_EQUIPPED],
            Primitive::PlaceCraftingTable => &[Requirement {
                text: "obs_has_crafting_table",
                holds: |w| w.inventory.has(Item::CraftingTable, 1),
            }],
            Primitive::PlaceFurnace => &[Requirement {
                text: "obs_has_furnace",
                holds: |w| w.inventory.has(Item::Furnace, 1),
            }],
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Abundance {
    pub iron: bool,
    pub coal: bool,
    pub diamond: bool,
}

impl Default for Abundance {
    fn default() -> Self {
        Self {
            iron: true,
            coal: true,
            diamond: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub deterministic: bool,
    pub explore_success_prob: f64,
    pub resource_abundance: Abundance,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::deterministic()
    }
}

impl EnvConfig {
    pub fn deterministic() -> Self {
        Self {
            deterministic: true,
            explore_success_prob: 1.0,
            resource_abundance: Abundance::default(),
        }
    }

    pub fn stochastic(explore_success_prob: f64) -> Self {
        Self {
            deterministic: false,
            explore_success_prob,
            resource_abundance: Abundance::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..=1.0).contains(&self.explore_success_prob) {
            return Err(EnvError::BadProbability(self.explore_success_prob));
        }
        Ok(())
    }
}

/// Full simulator state: the world plus its random stream and step clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub core: WorldCore,
    rng: ChaCha8Rng,
    pub step_count: u64,
}

impl WorldState {
    pub fn from_core(core: WorldCore, seed: u64) -> Self {
        Self {
            core,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step_count: 0,
        }
    }

    pub fn inventory(&self) -> &Inventory {
        &self.core.inventory
    }

    pub fn observe(&self, name: &str) -> Option<bool> {
        self.core.observe(name)
    }

    /// Structured text description handed to actors.
    pub fn render_full(&self) -> String {
        let core = &self.core;
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        let mut out = format!("step: {}\ninventory:", self.step_count);
        for item in Item::ALL {
            out.push_str(&format!(" {}={}", item.name(), core.inventory.get(item)));
        }
        out.push_str("\nequipped: ");
        out.push_str(core.equipped.map_or("none", |t| t.pickaxe().name()));
        out.push_str(&format!(
            "\nnear: crafting_table={} furnace={}\nnearby resources: iron={} coal={} diamond={}\n",
            yes_no(core.near_crafting_table),
            yes_no(core.near_furnace),
            yes_no(core.chunk.iron),
            yes_no(core.chunk.coal),
            yes_no(core.chunk.diamond),
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok,
    EnvError { precondition: Formula, message: String },
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub outcome: Outcome,
    pub world: WorldState,
}

/// The environment bound to a vocabulary.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    vocab: Vocabulary,
    /// Primitive for each vocabulary action index.
    primitives: Vec<Option<Primitive>>,
    /// Parsed requirement formulas, parallel to `Primitive::ALL`.
    requirement_formulas: Vec<Vec<Formula>>,
}

impl Env {
    pub fn new(config: EnvConfig, vocab: Vocabulary) -> Result<Env, EnvError> {
        config.validate()?;
        for p in Primitive::ALL {
            if vocab.action_index(p.name()).is_none() {
                return Err(EnvError::MissingAction(p.name()));
            }
        }
        let primitives = vocab.actions().iter().map(|a| Primitive::from_name(&a.name)).collect();
        let requirement_formulas = Primitive::ALL
            .iter()
            .map(|p| {
                p.requirements()
                    .iter()
                    .map(|r| {
                        parse_formula(r.text, &vocab).map_err(|source| EnvError::Requirement { text: r.text, source })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Env {
            config,
            vocab,
            primitives,
            requirement_formulas,
        })
    }

    pub fn minecraft(config: EnvConfig) -> Env {
        Env::new(config, Vocabulary::minecraft()).expect("default vocabulary covers the environment")
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Empty inventory, nothing placed. Deterministic worlds start with iron
    /// and coal already discovered.
    pub fn init(&self, seed: u64) -> WorldState {
        let mut core = WorldCore::default();
        if self.config.deterministic {
            core.chunk.iron = self.config.resource_abundance.iron;
            core.chunk.coal = self.config.resource_abundance.coal;
        }
        WorldState::from_core(core, seed)
    }

    pub fn abstract_state(&self, world: &WorldState) -> AbstractState {
        abstract_state(world, &self.vocab)
    }

    pub fn primitive(&self, action: ActionVector) -> Result<Primitive, EnvError> {
        let malformed = EnvError::MalformedAction {
            index: action.index(),
            len: action.len(),
        };
        if action.len() != self.vocab.num_actions() {
            return Err(malformed);
        }
        self.primitives[action.index()].ok_or(malformed)
    }

    pub fn step(&self, world: &WorldState, action: ActionVector) -> Result<StepResult, EnvError> {
        let primitive = self.primitive(action)?;
        let mut next = world.clone();
        match next.core.apply(primitive, &self.config, &mut next.rng) {
            Ok(()) => {
                next.step_count += 1;
                Ok(StepResult {
                    outcome: Outcome::Ok,
                    world: next,
                })
            }
            Err(i) => {
                let precondition = self.requirement_formulas[primitive as usize][i].clone();
                let message = format!(
                    "{} failed: requirement `{}` does not hold",
                    primitive.name(),
                    precondition
                );
                Ok(StepResult {
                    outcome: Outcome::EnvError { precondition, message },
                    world: world.clone(),
                })
            }
        }
    }
}

/// Goal test: the agent holds a diamond.
pub fn is_goal(state: &AbstractState, vocab: &Vocabulary) -> bool {
    vocab.observation_index("obs_has_diamond").is_some_and(|i| state.get(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Env {
        Env::minecraft(EnvConfig::deterministic())
    }

    fn act(env: &Env, name: &str) -> ActionVector {
        env.vocab().action_from_name(name).unwrap()
    }

    fn run(env: &Env, world: &WorldState, names: &[&str]) -> WorldState {
        let mut w = world.clone();
        for name in names {
            let r = env.step(&w, act(env, name)).unwrap();
            assert_eq!(r.outcome, Outcome::Ok, "{name} failed in\n{}", w.render_full());
            w = r.world;
        }
        w
    }

    #[test]
    fn deterministic_init_only_sets_iron_and_coal_flags() {
        let env = env();
        let s = env.abstract_state(&env.init(0));
        let v = env.vocab();
        assert_eq!(v.true_names(&s), vec!["obs_iron_in_chunk", "obs_coal_in_chunk"]);
        assert!(Item::ALL.iter().all(|i| env.init(0).inventory().get(*i) == 0));
    }

    #[test]
    fn stochastic_init_has_no_chunk_flags() {
        let env = Env::minecraft(EnvConfig::stochastic(0.5));
        let s = env.abstract_state(&env.init(7));
        assert!(s.bits().iter().all(|b| !b));
    }

    #[test]
    fn four_planks_set_every_threshold_up_to_four() {
        let env = env();
        let mut w = env.init(0);
        w.core.inventory.set(Item::Plank, 4);
        let s = env.abstract_state(&w);
        let v = env.vocab();
        for name in [
            "obs_has_plank",
            "obs_has_2x_plank",
            "obs_has_3x_plank",
            "obs_has_4x_plank",
        ] {
            assert!(s.get(v.observation_index(name).unwrap()), "{name}");
        }
        assert!(!s.get(v.observation_index("obs_has_11x_plank").unwrap()));
    }

    #[test]
    fn equipped_iron_pickaxe_sets_both_bits() {
        let env = env();
        let mut w = env.init(0);
        w.core.inventory.set(Item::IronPickaxe, 1);
        w.core.equipped = Some(Tier::Iron);
        let s = env.abstract_state(&w);
        let v = env.vocab();
        assert!(s.get(v.observation_index("obs_has_iron_pickaxe").unwrap()));
        assert!(s.get(v.observation_index("obs_iron_pickaxe_equipped").unwrap()));
    }

    #[test]
    fn crafting_planks_without_logs_fails_on_has_log() {
        let env = env();
        let w = env.init(0);
        let r = env.step(&w, act(&env, "action_craft_planks")).unwrap();
        match r.outcome {
            Outcome::EnvError { precondition, .. } => assert_eq!(precondition.to_string(), "obs_has_log"),
            other => panic!("{other:?}"),
        }
        assert_eq!(r.world, w);
    }

    #[test]
    fn one_log_becomes_four_planks() {
        let env = env();
        let w = run(&env, &env.init(0), &["action_mine_log", "action_craft_planks"]);
        assert_eq!(w.inventory().get(Item::Log), 0);
        assert_eq!(w.inventory().get(Item::Plank), 4);
    }

    #[test]
    fn mining_diamond_without_pickaxe_names_the_equip_requirement() {
        let env = env();
        let r = env.step(&env.init(0), act(&env, "action_mine_diamond")).unwrap();
        match r.outcome {
            Outcome::EnvError { precondition, .. } => {
                assert_eq!(precondition.to_string(), "obs_iron_pickaxe_equipped")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn goal_detection() {
        let v = Vocabulary::minecraft();
        assert!(is_goal(&v.state_from_true(&["obs_has_diamond"]).unwrap(), &v));
        assert!(!is_goal(&v.empty_state(), &v));

        let env = env();
        let mut w = env.init(0);
        w.core.inventory.set(Item::IronPickaxe, 1);
        w.core.equipped = Some(Tier::Iron);
        let w = run(&env, &w, &["action_explore_diamond_down", "action_mine_diamond"]);
        assert!(is_goal(&env.abstract_state(&w), &v));
    }

    #[test]
    fn equipping_replaces_previous_tool() {
        let env = env();
        let mut w = env.init(0);
        w.core.inventory.set(Item::WoodenPickaxe, 1);
        w.core.inventory.set(Item::StonePickaxe, 1);
        let w = run(&env, &w, &["action_equip_wood_pickaxe", "action_equip_stone_pickaxe"]);
        assert_eq!(w.core.equipped, Some(Tier::Stone));
    }

    #[test]
    fn smelting_burns_coal_before_planks() {
        let env = env();
        let mut w = env.init(0);
        w.core.near_furnace = true;
        w.core.inventory.set(Item::IronOre, 2);
        w.core.inventory.set(Item::Coal, 1);
        w.core.inventory.set(Item::Plank, 1);
        let w = run(&env, &w, &["action_smelt_iron"]);
        assert_eq!(w.inventory().get(Item::Coal), 0);
        assert_eq!(w.inventory().get(Item::Plank), 1);
        let w = run(&env, &w, &["action_smelt_iron"]);
        assert_eq!(w.inventory().get(Item::Plank), 0);
        assert_eq!(w.inventory().get(Item::IronIngot), 2);
    }

    #[test]
    fn exploring_clears_proximity() {
        let env = env();
        let mut w = env.init(0);
        w.core.near_crafting_table = true;
        w.core.near_furnace = true;
        let w = run(&env, &w, &["action_explore_general"]);
        assert!(!w.core.near_crafting_table && !w.core.near_furnace);
    }

    #[test]
    fn requirement_formulas_all_parse_against_default_vocab() {
        let env = env();
        assert_eq!(env.requirement_formulas.len(), 20);
    }

    #[test]
    fn malformed_action_rejected() {
        let env = env();
        let bad = ActionVector::new(3, 21);
        assert!(matches!(
            env.step(&env.init(0), bad),
            Err(EnvError::MalformedAction { .. })
        ));
    }

    #[test]
    fn render_full_lists_inventory() {
        let env = env();
        let text = env.init(3).render_full();
        assert!(text.contains("log=0"));
        assert!(text.contains("equipped: none"));
    }
}
