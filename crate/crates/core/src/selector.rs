//! Argmax selection shared by all greedy loops.
//!
//! The eager rule scans candidates in ascending id and keeps the first
//! strictly larger gain. The lazy variant keeps stale upper bounds in a
//! max-heap and refreshes every entry whose bound could still reach the best
//! fresh gain (within `LAZY_EPS`), so for submodular gains it returns exactly
//! the eager choice.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

const LAZY_EPS: f64 = 1e-9;

#[derive(Copy, Clone, Debug)]
struct Entry {
    bound: f64,
    id: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| Reverse(self.id).cmp(&Reverse(other.id)))
    }
}

#[derive(Debug)]
pub struct Selector {
    removed: Vec<bool>,
    heap: Option<BinaryHeap<Entry>>,
    evaluations: u64,
}

impl Selector {
    pub fn new(candidates: usize, lazy: bool) -> Self {
        let heap = lazy.then(|| {
            (0..candidates)
                .map(|id| Entry {
                    bound: f64::INFINITY,
                    id,
                })
                .collect()
        });
        Selector {
            removed: vec![false; candidates],
            heap,
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Permanently drops a candidate (selected, or infeasible for good).
    pub fn remove(&mut self, id: usize) {
        self.removed[id] = true;
    }

    /// Best eligible candidate and its gain. Ineligible candidates are removed:
    /// callers must only report ineligibility that is permanent.
    pub fn select(
        &mut self,
        mut eligible: impl FnMut(usize) -> bool,
        mut gain: impl FnMut(usize) -> f64,
    ) -> Option<(usize, f64)> {
        if self.heap.is_none() {
            let mut best: Option<(usize, f64)> = None;
            for id in 0..self.removed.len() {
                if self.removed[id] {
                    continue;
                }
                if !eligible(id) {
                    self.removed[id] = true;
                    continue;
                }
                let g = gain(id);
                self.evaluations += 1;
                if best.is_none_or(|(_, b)| g > b) {
                    best = Some((id, g));
                }
            }
            return best;
        }

        let heap = self.heap.as_mut().unwrap();
        let mut fresh: Vec<(usize, f64)> = Vec::new();
        let mut best = f64::NEG_INFINITY;
        while let Some(top) = heap.peek() {
            if !fresh.is_empty() && top.bound < best - LAZY_EPS {
                break;
            }
            let Entry { id, .. } = heap.pop().unwrap();
            if self.removed[id] {
                continue;
            }
            if !eligible(id) {
                self.removed[id] = true;
                continue;
            }
            let g = gain(id);
            self.evaluations += 1;
            best = best.max(g);
            fresh.push((id, g));
        }
        let chosen = fresh
            .iter()
            .copied()
            .filter(|&(_, g)| g == best)
            .min_by_key(|&(id, _)| id);
        for &(id, g) in &fresh {
            if Some(id) != chosen.map(|c| c.0) {
                heap.push(Entry { bound: g, id });
            }
        }
        chosen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lazy: bool, weights: &[f64], rounds: usize) -> (Vec<usize>, u64) {
        // Coverage-like gains: weight discounted by how many picks already share its parity.
        let mut sel = Selector::new(weights.len(), lazy);
        let mut picked = Vec::new();
        for _ in 0..rounds {
            let shared = |id: usize, picked: &Vec<usize>| picked.iter().filter(|&&p| p % 2 == id % 2).count();
            let r = sel.select(|_| true, |id| weights[id] / (1.0 + shared(id, &picked) as f64));
            match r {
                Some((id, _)) => {
                    sel.remove(id);
                    picked.push(id);
                }
                None => break,
            }
        }
        (picked, sel.evaluations())
    }

    #[test]
    fn lazy_matches_eager_with_fewer_evaluations() {
        let w = [3.0, 1.0, 3.0, 2.0, 0.5, 2.0, 3.0, 0.0];
        let (a, ea) = run(false, &w, 8);
        let (b, eb) = run(true, &w, 8);
        assert_eq!(a, b);
        assert!(eb <= ea);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let mut sel = Selector::new(3, false);
        assert_eq!(sel.select(|_| true, |_| 1.0), Some((0, 1.0)));
        let mut sel = Selector::new(3, true);
        assert_eq!(sel.select(|_| true, |_| 1.0), Some((0, 1.0)));
    }

    #[test]
    fn ineligible_are_dropped() {
        let mut sel = Selector::new(3, true);
        assert_eq!(sel.select(|id| id == 2, |id| id as f64), Some((2, 2.0)));
        sel.remove(2);
        assert_eq!(sel.select(|_| true, |id| id as f64), None);
    }
}
