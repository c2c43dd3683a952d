use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::model::{JointActions, TabularMarkovGame};
use crate::rng::sample_categorical;

const SUM_TOL: f64 = 1e-12;

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidPolicy(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidPolicy(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Independent per-player action distributions at one `(h, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductLayer {
    pub dists: Vec<Vec<f64>>,
}

impl ProductLayer {
    pub fn uniform(action_counts: &[usize]) -> Self {
        Self { dists: action_counts.iter().map(|&a| vec![1.0 / a as f64; a]).collect() }
    }

    pub fn pure(actions: &[usize], action_counts: &[usize]) -> Self {
        let dists = actions
            .iter()
            .zip(action_counts)
            .map(|(&a, &n)| {
                let mut d = vec![0.0; n];
                d[a] = 1.0;
                d
            })
            .collect();
        Self { dists }
    }

    pub fn validate(&self, action_counts: &[usize]) -> Result<()> {
        if self.dists.len() != action_counts.len() {
            return Err(Error::InvalidPolicy(format!(
                "layer has {} players, expected {}",
                self.dists.len(),
                action_counts.len()
            )));
        }
        for (i, (d, &n)) in self.dists.iter().zip(action_counts).enumerate() {
            if d.len() != n {
                return Err(Error::InvalidPolicy(format!("player {i} has {} actions, expected {n}", d.len())));
            }
            check_distribution(d, &format!("player {i} distribution"))?;
        }
        Ok(())
    }

    /// Probability of a joint action index.
    pub fn joint_prob(&self, joint: &JointActions, index: usize) -> f64 {
        self.dists.iter().enumerate().map(|(i, d)| d[joint.action_of(index, i)]).product()
    }

    /// Adds `weight * P(a)` to every joint entry of `out`.
    pub fn accumulate_joint(&self, joint: &JointActions, weight: f64, out: &mut [f64]) {
        // Outer product, built player by player.
        let mut acc = vec![weight];
        for d in &self.dists {
            let mut next = Vec::with_capacity(acc.len() * d.len());
            for &x in &acc {
                next.extend(d.iter().map(|p| x * p));
            }
            acc = next;
        }
        debug_assert_eq!(acc.len(), joint.len());
        for (o, x) in out.iter_mut().zip(acc) {
            *o += x;
        }
    }

    pub fn sample_actions<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        for (o, d) in out.iter_mut().zip(&self.dists) {
            *o = sample_categorical(d, rng);
        }
    }
}

/// One weighted product component of a mixture cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub layer: ProductLayer,
}

/// Markov joint policy stored per `(h, s)` as a weighted mixture of product
/// layers: `pi_h(a|s) = sum_c w_c prod_i layer_c,i(a_i)`.
///
/// Dense joint tables are produced only on demand by [`Self::joint_probs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMarkovPolicy {
    horizon: usize,
    states: usize,
    action_counts: Vec<usize>,
    /// Indexed by `h * states + s`.
    cells: Vec<Vec<Component>>,
}

impl MixtureMarkovPolicy {
    pub fn new(horizon: usize, states: usize, action_counts: Vec<usize>, cells: Vec<Vec<Component>>) -> Result<Self> {
        if cells.len() != horizon * states {
            return Err(Error::ShapeMismatch(format!(
                "policy has {} cells, expected {}",
                cells.len(),
                horizon * states
            )));
        }
        let policy = Self { horizon, states, action_counts, cells };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<()> {
        for (c, comps) in self.cells.iter().enumerate() {
            if comps.is_empty() {
                return Err(Error::InvalidPolicy(format!("cell {c} has no components")));
            }
            let weights: Vec<f64> = comps.iter().map(|x| x.weight).collect();
            check_distribution(&weights, &format!("mixture weights of cell {c}"))?;
            for comp in comps {
                comp.layer.validate(&self.action_counts)?;
            }
        }
        Ok(())
    }

    /// Product policy with one layer per `(h, s)`.
    pub fn from_layers<F>(horizon: usize, states: usize, action_counts: &[usize], mut layer: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> ProductLayer,
    {
        let mut cells = Vec::with_capacity(horizon * states);
        for h in 0..horizon {
            for s in 0..states {
                cells.push(vec![Component { weight: 1.0, layer: layer(h, s) }]);
            }
        }
        Self::new(horizon, states, action_counts.to_vec(), cells)
    }

    pub fn uniform(horizon: usize, states: usize, action_counts: &[usize]) -> Self {
        Self::from_layers(horizon, states, action_counts, |_, _| ProductLayer::uniform(action_counts))
            .expect("uniform layers are valid")
    }

    pub fn uniform_for(game: &TabularMarkovGame) -> Self {
        Self::uniform(game.horizon(), game.num_states(), game.action_counts())
    }

    /// Deterministic product policy; `action(h, s, i)` gives player `i`'s action.
    pub fn deterministic<F>(horizon: usize, states: usize, action_counts: &[usize], mut action: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> usize,
    {
        let m = action_counts.len();
        Self::from_layers(horizon, states, action_counts, |h, s| {
            let actions: Vec<usize> = (0..m).map(|i| action(h, s, i)).collect();
            ProductLayer::pure(&actions, action_counts)
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn cell(&self, h: usize, s: usize) -> &[Component] {
        &self.cells[h * self.states + s]
    }

    pub fn cells(&self) -> &[Vec<Component>] {
        &self.cells
    }

    pub fn check_compatible(&self, game: &TabularMarkovGame) -> Result<()> {
        if self.horizon != game.horizon()
            || self.states != game.num_states()
            || self.action_counts != game.action_counts()
        {
            return Err(Error::ShapeMismatch(format!(
                "policy dims (H={}, S={}, A={:?}) do not match game (H={}, S={}, A={:?})",
                self.horizon,
                self.states,
                self.action_counts,
                game.horizon(),
                game.num_states(),
                game.action_counts()
            )));
        }
        Ok(())
    }

    /// True when every cell holds a single product component.
    pub fn is_product(&self) -> bool {
        self.cells.iter().all(|c| c.len() == 1)
    }

    /// True when every cell is a single point mass.
    pub fn is_deterministic(&self) -> bool {
        self.is_product() && self.cells.iter().all(|c| c[0].layer.dists.iter().all(|d| d.contains(&1.0)))
    }

    /// Joint distribution at `(h, s)`, recomputed from the mixture.
    pub fn joint_probs(&self, h: usize, s: usize, joint: &JointActions) -> Vec<f64> {
        let mut out = vec![0.0; joint.len()];
        for comp in self.cell(h, s) {
            comp.layer.accumulate_joint(joint, comp.weight, &mut out);
        }
        out
    }

    /// Marginal of player `i` at `(h, s)`.
    pub fn player_marginal(&self, h: usize, s: usize, player: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.action_counts[player]];
        for comp in self.cell(h, s) {
            for (o, p) in out.iter_mut().zip(&comp.layer.dists[player]) {
                *o += comp.weight * p;
            }
        }
        out
    }

    /// Samples a component by weight at `(h, s)`.
    pub fn sample_component<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> &ProductLayer {
        let comps = self.cell(h, s);
        if comps.len() == 1 {
            return &comps[0].layer;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for comp in comps {
            acc += comp.weight;
            if u < acc {
                return &comp.layer;
            }
        }
        &comps.iter().rev().find(|c| c.weight > 0.0).unwrap_or(&comps[comps.len() - 1]).layer
    }

    /// Replaces player `i`'s factor in every component by `dist(h, s)`.
    ///
    /// The result is `pi'_i x pi_{-i}` where `pi_{-i}` is the marginal of the
    /// other players, which is how a deviating player sees the joint policy.
    pub fn with_player<F>(&self, player: usize, mut dist: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut cells = self.cells.clone();
        for h in 0..self.horizon {
            for s in 0..self.states {
                let d = dist(h, s);
                for comp in &mut cells[h * self.states + s] {
                    comp.layer.dists[player] = d.clone();
                }
            }
        }
        Self::new(self.horizon, self.states, self.action_counts.clone(), cells)
    }

    /// `psi_i <> pi`: player `i`'s recommended actions are remapped by `psi`.
    pub fn modified(&self, modification: &StrategyModification) -> Result<Self> {
        let i = modification.player;
        let n = self.action_counts[i];
        let mut cells = self.cells.clone();
        for h in 0..self.horizon {
            for s in 0..self.states {
                for comp in &mut cells[h * self.states + s] {
                    let old = &comp.layer.dists[i];
                    let mut new = vec![0.0; n];
                    for (a, &p) in old.iter().enumerate() {
                        new[modification.target(h, s, a)] += p;
                    }
                    comp.layer.dists[i] = new;
                }
            }
        }
        Self::new(self.horizon, self.states, self.action_counts.clone(), cells)
    }

    /// Rewrites every cell holding more than `|A|` components as the
    /// equivalent mixture of point-mass products over joint actions, provided
    /// `|A| <= max_joint`. The induced joint distribution is unchanged.
    pub fn compact(&mut self, max_joint: usize) -> Result<()> {
        let joint = JointActions::new(&self.action_counts)?;
        if joint.len() > max_joint {
            return Ok(());
        }
        let mut actions = vec![0; joint.num_players()];
        for c in 0..self.cells.len() {
            if self.cells[c].len() <= joint.len() {
                continue;
            }
            let mut probs = vec![0.0; joint.len()];
            for comp in &self.cells[c] {
                comp.layer.accumulate_joint(&joint, comp.weight, &mut probs);
            }
            let total: f64 = probs.iter().sum();
            let mut comps = Vec::new();
            for (idx, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    joint.decode_into(idx, &mut actions);
                    comps.push(Component {
                        weight: p / total,
                        layer: ProductLayer::pure(&actions, &self.action_counts),
                    });
                }
            }
            self.cells[c] = comps;
        }
        self.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text)?;
        Self::new(raw.horizon, raw.states, raw.action_counts, raw.cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Per-`(h, s, a_i)` replacement actions for one player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyModification {
    pub player: usize,
    horizon: usize,
    states: usize,
    actions: usize,
    /// Indexed by `(h * states + s) * actions + a`.
    map: Vec<usize>,
}

impl StrategyModification {
    pub fn identity(player: usize, horizon: usize, states: usize, actions: usize) -> Self {
        let map = (0..horizon * states).flat_map(|_| 0..actions).collect();
        Self { player, horizon, states, actions, map }
    }

    pub fn from_map(player: usize, horizon: usize, states: usize, actions: usize, map: Vec<usize>) -> Result<Self> {
        if map.len() != horizon * states * actions {
            return Err(Error::ShapeMismatch("modification table has the wrong length".into()));
        }
        if map.iter().any(|&a| a >= actions) {
            return Err(Error::InvalidPolicy("replacement action out of range".into()));
        }
        Ok(Self { player, horizon, states, actions, map })
    }

    pub fn target(&self, h: usize, s: usize, a: usize) -> usize {
        self.map[(h * self.states + s) * self.actions + a]
    }

    pub fn set(&mut self, h: usize, s: usize, a: usize, to: usize) {
        assert!(to < self.actions, "replacement action out of range");
        self.map[(h * self.states + s) * self.actions + a] = to;
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &a)| a == k % self.actions)
    }
}

/// Deterministic single-player Markov policy, one action per `(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerPolicy {
    pub horizon: usize,
    pub states: usize,
    pub actions: Vec<usize>,
}

impl PlayerPolicy {
    pub fn constant(horizon: usize, states: usize, action: usize) -> Self {
        Self { horizon, states, actions: vec![action; horizon * states] }
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.states + s]
    }

    /// Point-mass distribution over `num_actions` at `(h, s)`.
    pub fn dist(&self, h: usize, s: usize, num_actions: usize) -> Vec<f64> {
        let mut d = vec![0.0; num_actions];
        d[self.action(h, s)] = 1.0;
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlated() -> MixtureMarkovPolicy {
        let counts = vec![2, 2];
        let cells = vec![vec![
            Component { weight: 0.5, layer: ProductLayer::pure(&[0, 0], &counts) },
            Component { weight: 0.5, layer: ProductLayer::pure(&[1, 1], &counts) },
        ]];
        MixtureMarkovPolicy::new(1, 1, counts, cells).unwrap()
    }

    #[test]
    fn joint_probs_from_mixture() {
        let pi = correlated();
        let joint = JointActions::new(&[2, 2]).unwrap();
        assert_eq!(pi.joint_probs(0, 0, &joint), vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(pi.player_marginal(0, 0, 1), vec![0.5, 0.5]);
        assert!(!pi.is_product());
    }

    #[test]
    fn rejects_unnormalized_weights() {
        let counts = vec![2];
        let cells = vec![vec![Component { weight: 0.9, layer: ProductLayer::uniform(&counts) }]];
        assert!(MixtureMarkovPolicy::new(1, 1, counts, cells).is_err());
    }

    #[test]
    fn compact_preserves_joint() {
        let counts = vec![2, 3];
        let joint = JointActions::new(&counts).unwrap();
        let mut comps = Vec::new();
        for k in 0..10 {
            let p = (k as f64 + 1.0) / 12.0;
            let q = [0.2, 0.3 + 0.01 * k as f64, 0.5 - 0.01 * k as f64];
            comps.push(Component { weight: 0.1, layer: ProductLayer { dists: vec![vec![p, 1.0 - p], q.to_vec()] } });
        }
        let mut pi = MixtureMarkovPolicy::new(1, 1, counts, vec![comps]).unwrap();
        let before = pi.joint_probs(0, 0, &joint);
        pi.compact(1 << 20).unwrap();
        let after = pi.joint_probs(0, 0, &joint);
        assert!(pi.cell(0, 0).len() <= joint.len());
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn modification_remaps_mass() {
        let pi = correlated();
        let mut psi = StrategyModification::identity(0, 1, 1, 2);
        assert!(psi.is_identity());
        psi.set(0, 0, 1, 0);
        let joint = JointActions::new(&[2, 2]).unwrap();
        let modified = pi.modified(&psi).unwrap();
        assert_eq!(modified.joint_probs(0, 0, &joint), vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn policy_json_round_trip() {
        let pi = correlated();
        let back = MixtureMarkovPolicy::from_json(&pi.to_json().unwrap()).unwrap();
        assert_eq!(pi, back);
    }
}
