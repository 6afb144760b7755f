//! Capacity-indexed max segment tree for `O(log L)` best-fit queries.
//!
//! The tree has one leaf per capacity value `1..=L`. Leaf `c` holds `c`
//! while at least one open bin has remaining capacity exactly `c` and `0`
//! otherwise; every internal node holds the maximum of its children. A
//! best-fit query for weight `w` descends from the root, going left
//! whenever the left child is at least `w`, and lands on the leftmost
//! live leaf `>= w` — the smallest adequate capacity.
//!
//! Leaf `L` is permanently live: it stands for the unbounded supply of
//! fresh bins, so the structure stays `O(L)` regardless of how many bins
//! exist and a query can never fail for `w <= L`.

/// Max segment tree over capacities `1..=L`, laid out as an implicit
/// array with the leaf count rounded up to a power of two. Padding leaves
/// hold `0` forever and are never selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityTree {
    max_capacity: u32,
    leaf_base: usize,
    nodes: Vec<u32>,
}

impl CapacityTree {
    /// A fresh tree: only the virtual empty-bin leaf `L` is live.
    pub fn new(max_capacity: u32) -> Self {
        assert!(max_capacity >= 1, "capacity bound must be >= 1");
        let leaf_base = (max_capacity as usize).next_power_of_two();
        let mut tree = CapacityTree {
            max_capacity,
            leaf_base,
            nodes: vec![0; 2 * leaf_base],
        };
        tree.write_leaf(max_capacity, max_capacity);
        tree
    }

    pub fn max_capacity(&self) -> u32 {
        self.max_capacity
    }

    /// Smallest live capacity `>= weight`, i.e. the best fit. `None` is
    /// unreachable while the virtual empty-bin leaf is live, but the
    /// signature keeps the miss case representable.
    pub fn query_best_fit(&self, weight: u32) -> Option<u32> {
        self.query_counting(weight).0
    }

    /// `query_best_fit` plus the number of nodes visited; the descent
    /// touches at most `ceil(log2 L) + 1` nodes.
    pub(crate) fn query_counting(&self, weight: u32) -> (Option<u32>, u32) {
        assert!(
            weight >= 1 && weight <= self.max_capacity,
            "weight {weight} outside 1..={}",
            self.max_capacity
        );
        let mut node = 1;
        let mut visited = 1;
        if self.nodes[node] < weight {
            return (None, visited);
        }
        while node < self.leaf_base {
            node = if self.nodes[2 * node] >= weight {
                2 * node
            } else {
                2 * node + 1
            };
            visited += 1;
        }
        let capacity = (node - self.leaf_base) as u32 + 1;
        debug_assert_eq!(self.nodes[node], capacity);
        (Some(capacity), visited)
    }

    /// Marks capacity `capacity` live (some bin has exactly that much
    /// space) or dead (none does), restoring internal maxima bottom-up.
    /// Clearing leaf `L` is ignored; the empty-bin supply never runs out.
    pub fn set_capacity(&mut self, capacity: u32, live: bool) {
        assert!(
            capacity >= 1 && capacity <= self.max_capacity,
            "capacity {capacity} outside 1..={}",
            self.max_capacity
        );
        if capacity == self.max_capacity && !live {
            return;
        }
        self.write_leaf(capacity, if live { capacity } else { 0 });
    }

    fn write_leaf(&mut self, capacity: u32, value: u32) {
        let mut node = self.leaf_base + capacity as usize - 1;
        if self.nodes[node] == value {
            return;
        }
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            let merged = self.nodes[2 * node].max(self.nodes[2 * node + 1]);
            if self.nodes[node] == merged {
                break;
            }
            self.nodes[node] = merged;
        }
    }

    /// Live capacities in increasing order (always ends with `L`).
    pub fn live_capacities(&self) -> Vec<u32> {
        (1..=self.max_capacity)
            .filter(|&c| self.nodes[self.leaf_base + c as usize - 1] != 0)
            .collect()
    }

    #[cfg(test)]
    fn leaf_values(&self) -> Vec<u32> {
        (0..self.max_capacity as usize)
            .map(|i| self.nodes[self.leaf_base + i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    /// Brute-force reference: smallest live capacity >= w by linear scan.
    fn scan_best_fit(live: &BTreeSet<u32>, weight: u32) -> Option<u32> {
        live.iter().copied().find(|&c| c >= weight)
    }

    #[test]
    fn fresh_tree_has_only_the_empty_bin_leaf() {
        let tree = CapacityTree::new(8);
        assert_eq!(tree.leaf_values(), vec![0, 0, 0, 0, 0, 0, 0, 8]);
        assert_eq!(tree.nodes[1], 8);
        assert_eq!(tree.live_capacities(), vec![8]);
    }

    #[test]
    fn single_capacity_tree() {
        let tree = CapacityTree::new(1);
        assert_eq!(tree.query_best_fit(1), Some(1));
    }

    #[test]
    fn non_power_of_two_bound() {
        let tree = CapacityTree::new(3);
        assert_eq!(tree.leaf_values(), vec![0, 0, 3]);
        assert_eq!(tree.nodes[1], 3);
        assert_eq!(tree.query_best_fit(2), Some(3));
    }

    #[test]
    fn best_fit_walks_to_smallest_adequate_capacity() {
        let mut tree = CapacityTree::new(8);
        tree.set_capacity(2, true);
        tree.set_capacity(4, true);
        // Live capacities {2, 4, 8}.
        assert_eq!(tree.query_best_fit(3), Some(4));
        assert_eq!(tree.query_best_fit(2), Some(2));
        assert_eq!(tree.query_best_fit(5), Some(8));
    }

    #[test]
    fn fresh_tree_serves_smallest_weights_from_leaf_l() {
        let tree = CapacityTree::new(8);
        assert_eq!(tree.query_best_fit(1), Some(8));
    }

    #[test]
    fn set_then_clear_restores_fresh_tree() {
        let mut tree = CapacityTree::new(8);
        tree.set_capacity(4, true);
        tree.set_capacity(4, false);
        assert_eq!(tree, CapacityTree::new(8));
    }

    #[test]
    fn buckets_drive_queries() {
        let mut tree = CapacityTree::new(8);
        tree.set_capacity(2, true);
        tree.set_capacity(4, true);
        assert_eq!(tree.query_best_fit(3), Some(4));
        assert_eq!(tree.query_best_fit(1), Some(2));
    }

    #[test]
    fn clearing_leaf_l_is_ignored() {
        let mut tree = CapacityTree::new(8);
        tree.set_capacity(8, false);
        assert_eq!(tree.query_best_fit(8), Some(8));
        assert_eq!(tree, CapacityTree::new(8));
    }

    #[test]
    fn query_visits_stay_logarithmic() {
        for max in [1u32, 2, 3, 5, 8, 13, 64, 100, 2048] {
            let budget = (max as f64).log2().ceil() as u32 + 1;
            let tree = CapacityTree::new(max);
            for w in [1, max / 2 + 1, max] {
                let (hit, visited) = tree.query_counting(w.max(1));
                assert!(hit.is_some());
                assert!(
                    visited <= budget,
                    "L={max} w={w}: visited {visited} > budget {budget}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn matches_linear_scan_oracle(
            max_capacity in 1u32..100,
            ops in proptest::collection::vec((1u32..100, any::<bool>()), 0..200),
            weights in proptest::collection::vec(1u32..100, 1..50),
        ) {
            let mut tree = CapacityTree::new(max_capacity);
            let mut live: BTreeSet<u32> = BTreeSet::new();
            live.insert(max_capacity);
            for (cap, on) in ops {
                let cap = (cap - 1) % max_capacity + 1;
                tree.set_capacity(cap, on);
                if on {
                    live.insert(cap);
                } else if cap != max_capacity {
                    live.remove(&cap);
                }
            }
            for w in weights {
                let w = (w - 1) % max_capacity + 1;
                prop_assert_eq!(tree.query_best_fit(w), scan_best_fit(&live, w));
            }
        }
    }
}
