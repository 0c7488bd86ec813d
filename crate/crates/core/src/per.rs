//! Proportional prioritized replay over individual transitions.
//!
//! [`SumTree`] keeps leaf priorities in a flat complete binary tree whose
//! internal nodes hold the sum of their children; [`PrioritizedStore`] pairs
//! it with a ring of items and a companion max-tree so new items can enter
//! at the current maximum priority.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complete binary tree of nonnegative priorities.
///
/// Leaves live at `nodes[capacity - 1 ..]`; node `i` has children `2i + 1`
/// and `2i + 2`. Ancestors are recomputed from their children on every
/// write, so each internal node is always the rounded sum of its two
/// children and no incremental drift accumulates.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// Creates a tree with at least `min_leaves` leaves, rounded up to a
    /// power of two. Unused leaves hold priority 0.
    pub fn new(min_leaves: usize) -> Self {
        let capacity = min_leaves.max(1).next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[0]
    }

    pub fn get(&self, leaf: usize) -> Result<f64> {
        self.check(leaf)?;
        Ok(self.nodes[self.capacity - 1 + leaf])
    }

    /// Leaf priorities in index order.
    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.capacity - 1..]
    }

    /// Raw node array, root first.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn check(&self, leaf: usize) -> Result<()> {
        if leaf >= self.capacity {
            return Err(Error::Index {
                index: leaf,
                capacity: self.capacity,
            });
        }
        Ok(())
    }

    /// Sets one leaf and refreshes its `log2(capacity)` ancestors.
    pub fn update(&mut self, leaf: usize, priority: f64) -> Result<()> {
        self.check(leaf)?;
        if !(priority.is_finite() && priority >= 0.0) {
            return Err(Error::InvalidPriority(priority));
        }
        let mut node = self.capacity - 1 + leaf;
        self.nodes[node] = priority;
        while node > 0 {
            node = (node - 1) / 2;
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2];
        }
        Ok(())
    }

    /// Recomputes every internal node bottom-up.
    pub fn rebuild(&mut self) {
        for node in (0..self.capacity - 1).rev() {
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2];
        }
    }

    /// Finds the leaf `i` with `sum(leaves[..i]) <= prefix < sum(leaves[..=i])`.
    ///
    /// The descent never enters an empty subtree, so a zero-priority leaf is
    /// never returned even when rounding pushes `prefix` across a boundary.
    pub fn sample(&self, prefix: f64) -> Result<usize> {
        let total = self.total();
        if !(prefix >= 0.0 && prefix < total) {
            return Err(Error::Range {
                value: prefix,
                total,
            });
        }
        let mut node = 0;
        let mut rest = prefix;
        while node < self.capacity - 1 {
            let left = 2 * node + 1;
            let right = left + 1;
            let left_sum = self.nodes[left];
            if (rest < left_sum || self.nodes[right] <= 0.0) && left_sum > 0.0 {
                node = left;
                rest = rest.min(prev_float(left_sum));
            } else {
                node = right;
                rest = (rest - left_sum).clamp(0.0, prev_float(self.nodes[right]));
            }
        }
        Ok(node + 1 - self.capacity)
    }

    /// Draws a leaf with probability proportional to its priority.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let total = self.total();
        let prefix = (rng.gen::<f64>() * total).min(prev_float(total));
        self.sample(prefix)
    }
}

fn prev_float(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        0.0
    }
}

/// Companion tree answering "largest leaf" in O(1).
#[derive(Debug, Clone)]
struct MaxTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl MaxTree {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
        }
    }

    fn update(&mut self, leaf: usize, value: f64) {
        let mut node = self.capacity - 1 + leaf;
        self.nodes[node] = value;
        while node > 0 {
            node = (node - 1) / 2;
            self.nodes[node] = self.nodes[2 * node + 1].max(self.nodes[2 * node + 2]);
        }
    }

    fn max(&self) -> f64 {
        self.nodes[0]
    }
}

/// Hyperparameters of proportional prioritization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerConfig {
    /// Priority exponent; 0 gives uniform sampling.
    pub alpha: f64,
    /// Floor added to `|td_error|` so no transition starves.
    pub eps: f64,
    /// New items enter at the current maximum leaf priority (1 when empty);
    /// otherwise they enter at priority 1.
    pub new_at_max: bool,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            eps: 0.01,
            new_at_max: true,
        }
    }
}

impl PerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("per alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("per eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }

    /// `(|td_error| + eps)^alpha`.
    pub fn priority(&self, td_error: f64) -> Result<f64> {
        if !td_error.is_finite() {
            return Err(Error::InvalidPriority(td_error));
        }
        Ok((td_error.abs() + self.eps).powf(self.alpha))
    }
}

/// Ring of items sampled in proportion to per-item priorities.
#[derive(Debug, Clone)]
pub struct PrioritizedStore<T> {
    config: PerConfig,
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
    tree: SumTree,
    max_tree: MaxTree,
}

impl<T> PrioritizedStore<T> {
    pub fn new(capacity: usize, config: PerConfig) -> Result<Self> {
        config.validate()?;
        if capacity == 0 {
            return Err(Error::Config("prioritized store capacity must be positive".into()));
        }
        let tree = SumTree::new(capacity);
        let max_tree = MaxTree::new(tree.capacity());
        Ok(Self {
            config,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            cursor: 0,
            tree,
            max_tree,
        })
    }

    pub fn config(&self) -> &PerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    pub fn priority(&self, index: usize) -> Result<f64> {
        self.check(index)?;
        self.tree.get(index)
    }

    /// Largest priority currently held by any stored item.
    pub fn max_priority(&self) -> f64 {
        self.max_tree.max()
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.items.len() {
            return Err(Error::Index {
                index,
                capacity: self.items.len(),
            });
        }
        Ok(())
    }

    /// Stores an item at the ring cursor, overwriting the oldest item once
    /// full, and returns its slot.
    pub fn insert(&mut self, item: T) -> usize {
        let priority = if self.config.new_at_max && !self.items.is_empty() {
            self.max_priority()
        } else {
            1.0
        };
        let slot = self.cursor;
        if slot == self.items.len() {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.set_priority(slot, priority);
        self.cursor = (self.cursor + 1) % self.capacity;
        slot
    }

    fn set_priority(&mut self, slot: usize, priority: f64) {
        // slot < capacity <= tree capacity and priority is finite and >= 0
        self.tree
            .update(slot, priority)
            .expect("slot and priority validated by caller");
        self.max_tree.update(slot, priority);
    }

    /// Sets each listed slot's priority to `(|td_error| + eps)^alpha`.
    /// Nothing is modified if any index or error value is invalid.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::Shape(format!(
                "{} indices but {} td errors",
                indices.len(),
                td_errors.len()
            )));
        }
        let mut priorities = Vec::with_capacity(indices.len());
        for (&index, &delta) in indices.iter().zip(td_errors) {
            self.check(index)?;
            priorities.push(self.config.priority(delta)?);
        }
        for (&index, priority) in indices.iter().zip(priorities) {
            self.set_priority(index, priority);
        }
        Ok(())
    }

    /// Draws one slot proportionally to priority.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        self.tree.sample_with(rng)
    }
}
