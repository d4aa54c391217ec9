//! Bipartite task graph over observed states and state-action pairs, with
//! law-based pruning, distances to the goal, and an exact shortest-path
//! oracle over the deterministic dynamics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actor::Trajectory;
use crate::env::{EnvConfig, Item, Primitive, Tier, WorldCore};
use crate::shield::{check, LawSet};
use crate::vocab::{AbstractState, ActionVector, VocabError, Vocabulary};

/// Largest inventory count any recipe or observation threshold inspects.
/// Must stay below 16 so capped counts fit the oracle's 4-bit packing.
pub const INVENTORY_CAP: u32 = 11;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("state {0} is not in the graph")]
    UnknownState(String),
    #[error("the oracle needs a deterministic environment configuration")]
    NotDeterministic,
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BipartiteGraph {
    states: Vec<AbstractState>,
    index: HashMap<AbstractState, usize>,
    /// `(state, action) -> observed successor states`.
    pairs: BTreeMap<(usize, usize), BTreeSet<usize>>,
    goals: BTreeSet<usize>,
}

impl BipartiteGraph {
    /// Builds the graph from observed transitions. Failed actions are
    /// stored as self-loops since the world does not change.
    pub fn build(trajectories: &[Trajectory], vocab: &Vocabulary) -> Result<Self, GraphError> {
        let mut g = BipartiteGraph::default();
        for t in trajectories {
            for s in t.states() {
                g.intern(s, vocab);
            }
            for tr in t.transitions() {
                let action = vocab.action_from_name(tr.action)?.index();
                let from = g.index[tr.state];
                let to = g.index[tr.next];
                g.pairs.entry((from, action)).or_default().insert(to);
            }
        }
        Ok(g)
    }

    fn intern(&mut self, state: &AbstractState, vocab: &Vocabulary) -> usize {
        if let Some(&i) = self.index.get(state) {
            return i;
        }
        let i = self.states.len();
        self.states.push(state.clone());
        self.index.insert(state.clone(), i);
        if crate::env::is_goal(state, vocab) {
            self.goals.insert(i);
        }
        i
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn states(&self) -> &[AbstractState] {
        &self.states
    }

    pub fn contains(&self, state: &AbstractState) -> bool {
        self.index.contains_key(state)
    }

    pub fn goal_states(&self) -> impl Iterator<Item = &AbstractState> {
        self.goals.iter().map(|&i| &self.states[i])
    }

    /// Choice edges as `(state, action index)`.
    pub fn choice_edges(&self) -> impl Iterator<Item = (&AbstractState, usize)> {
        self.pairs.keys().map(|&(s, a)| (&self.states[s], a))
    }

    /// Observed successors of `(state, action)`, empty when the pair is absent.
    pub fn successors(&self, state: &AbstractState, action: usize) -> Vec<&AbstractState> {
        self.index
            .get(state)
            .and_then(|&s| self.pairs.get(&(s, action)))
            .map(|succ| succ.iter().map(|&t| &self.states[t]).collect())
            .unwrap_or_default()
    }

    /// Keeps only choice edges whose action the shield allows in their state.
    pub fn prune(&self, laws: &LawSet, vocab: &Vocabulary) -> BipartiteGraph {
        let m = vocab.num_actions();
        let pairs = self
            .pairs
            .iter()
            .filter(|((s, a), _)| check(&self.states[*s], ActionVector::new(*a, m), laws, vocab).allowed)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        BipartiteGraph {
            states: self.states.clone(),
            index: self.index.clone(),
            pairs,
            goals: self.goals.clone(),
        }
    }

    /// Hop counts to the nearest goal state for every node, by reverse BFS.
    /// Any observed successor of a pair counts, so distances are optimistic
    /// under stochastic transitions.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for (&(s, _), succ) in &self.pairs {
            for &t in succ {
                reverse[t].push(s);
            }
        }
        let mut dist = vec![None; self.states.len()];
        let mut queue = VecDeque::new();
        for &g in &self.goals {
            dist[g] = Some(0);
            queue.push_back(g);
        }
        while let Some(t) = queue.pop_front() {
            let d = dist[t].expect("queued nodes have a distance");
            for &s in &reverse[t] {
                if dist[s].is_none() {
                    dist[s] = Some(d + 1);
                    queue.push_back(s);
                }
            }
        }
        dist
    }

    pub fn distance_to_goal(&self, state: &AbstractState) -> Result<Option<usize>, GraphError> {
        let &i = self
            .index
            .get(state)
            .ok_or_else(|| GraphError::UnknownState(state.to_string()))?;
        Ok(self.distances()[i])
    }

    /// Distance lookup table keyed by state, for repeated queries.
    pub fn distance_map(&self) -> HashMap<&AbstractState, Option<usize>> {
        self.states.iter().zip(self.distances()).collect()
    }

    /// Graphviz rendering; nodes are labelled with their true propositions.
    pub fn to_dot(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("digraph task {\n  rankdir=LR;\n");
        for (i, s) in self.states.iter().enumerate() {
            let names = vocab.true_names(s);
            let label = if names.is_empty() {
                "(none)".to_string()
            } else {
                names.join("\\n")
            };
            let shape = if self.goals.contains(&i) {
                "doublecircle"
            } else {
                "ellipse"
            };
            let _ = writeln!(out, "  s{i} [shape={shape}, label=\"{label}\"];");
        }
        for (&(s, a), succ) in &self.pairs {
            let _ = writeln!(out, "  p{s}_{a} [shape=box, label=\"{}\"];", vocab.actions()[a].name);
            let _ = writeln!(out, "  s{s} -> p{s}_{a};");
            for t in succ {
                let _ = writeln!(out, "  p{s}_{a} -> s{t};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Exact minimal number of primitives from `start` to holding a diamond.
pub fn brute_force_optimal(config: &EnvConfig, start: &WorldCore, horizon: usize) -> Result<Option<usize>, GraphError> {
    brute_force_to(config, start, horizon, |w| w.inventory.has(Item::Diamond, 1))
}

/// Breadth-first search over the deterministic dynamics to any world
/// satisfying `goal`. Inventory counters are capped at [`INVENTORY_CAP`]
/// so the search space is finite. Returns `None` when the goal is not
/// reachable within `horizon` primitives.
pub fn brute_force_to(
    config: &EnvConfig,
    start: &WorldCore,
    horizon: usize,
    goal: impl Fn(&WorldCore) -> bool,
) -> Result<Option<usize>, GraphError> {
    if !config.deterministic {
        return Err(GraphError::NotDeterministic);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut root = *start;
    root.inventory.cap(INVENTORY_CAP);
    if goal(&root) {
        return Ok(Some(0));
    }
    let mut seen = HashSet::from([pack(&root)]);
    let mut frontier = vec![root];
    for depth in 1..=horizon {
        let mut next = Vec::new();
        for w in &frontier {
            for p in Primitive::ALL {
                let mut n = *w;
                if n.apply(p, config, &mut rng).is_err() {
                    continue;
                }
                n.inventory.cap(INVENTORY_CAP);
                if goal(&n) {
                    return Ok(Some(depth));
                }
                if seen.insert(pack(&n)) {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            return Ok(None);
        }
        frontier = next;
    }
    Ok(None)
}

/// Packs a capped world into 64 bits: four bits per inventory slot, then
/// the equipped tier, the two proximity flags and the three chunk flags.
fn pack(w: &WorldCore) -> u64 {
    let mut key = 0u64;
    for item in Item::ALL {
        key = (key << 4) | u64::from(w.inventory.get(item));
    }
    let tier = match w.equipped {
        None => 0,
        Some(Tier::Wood) => 1,
        Some(Tier::Stone) => 2,
        Some(Tier::Iron) => 3,
    };
    let flags = [
        w.near_crafting_table,
        w.near_furnace,
        w.chunk.iron,
        w.chunk.coal,
        w.chunk.diamond,
    ];
    key = (key << 2) | tier;
    for f in flags {
        key = (key << 1) | u64::from(f);
    }
    key
}
