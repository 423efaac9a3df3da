//! Step ordering constraints with an eagerly maintained transitive closure.
//!
//! Each step owns a row of bits marking every step it strictly precedes, so
//! `precedes` is a single bit test. Insertion propagates the successor row
//! of the new edge's head into every row that reaches its tail.

pub type StepId = u32;

pub const START: StepId = 0;
pub const GOAL: StepId = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderingStore {
    steps: usize,
    words: usize,
    reach: Vec<u64>,
    edges: Vec<(StepId, StepId)>,
}

impl Default for OrderingStore {
    fn default() -> Self {
        OrderingStore::new()
    }
}

impl OrderingStore {
    /// A store holding only the start and goal dummies, start before goal.
    pub fn new() -> OrderingStore {
        let mut store = OrderingStore {
            steps: 2,
            words: 1,
            reach: vec![0; 2],
            edges: Vec::new(),
        };
        store.insert(START, GOAL);
        store
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    /// Direct constraints in insertion order (implied pairs are not recorded).
    pub fn edges(&self) -> &[(StepId, StepId)] {
        &self.edges
    }

    fn bit(&self, row: StepId, col: StepId) -> bool {
        let (w, b) = (col as usize / 64, col as usize % 64);
        self.reach[row as usize * self.words + w] >> b & 1 == 1
    }

    #[cfg(test)]
    fn set(&mut self, row: StepId, col: StepId) {
        let (w, b) = (col as usize / 64, col as usize % 64);
        self.reach[row as usize * self.words + w] |= 1 << b;
    }

    /// Strict precedence `a ≺ b` under the closure.
    pub fn precedes(&self, a: StepId, b: StepId) -> bool {
        (a as usize) < self.steps && (b as usize) < self.steps && self.bit(a, b)
    }

    fn grow(&mut self) {
        let words = self.words * 2;
        let mut reach = vec![0u64; self.steps.max(1) * words];
        for row in 0..self.steps {
            reach[row * words..row * words + self.words]
                .copy_from_slice(&self.reach[row * self.words..(row + 1) * self.words]);
        }
        self.words = words;
        self.reach = reach;
    }

    /// Adds a step ordered after start and before goal; returns its id.
    pub fn add_step(&mut self) -> StepId {
        if self.steps + 1 > self.words * 64 {
            self.grow();
        }
        let id = self.steps as StepId;
        self.steps += 1;
        self.reach.extend(std::iter::repeat_n(0, self.words));
        let ok = self.insert(START, id) && self.insert(id, GOAL);
        debug_assert!(ok);
        id
    }

    /// Adds `before ≺ after`. Returns false, leaving the store unchanged, if
    /// the constraint would create a cycle.
    pub fn insert(&mut self, before: StepId, after: StepId) -> bool {
        if before == after || self.precedes(after, before) {
            return false;
        }
        if self.precedes(before, after) {
            return true;
        }
        self.edges.push((before, after));
        let words = self.words;
        let mut row_after =
            self.reach[after as usize * words..(after as usize + 1) * words].to_vec();
        row_after[after as usize / 64] |= 1 << (after as usize % 64);
        for x in 0..self.steps as StepId {
            if x == before || self.bit(x, before) {
                let base = x as usize * words;
                for (slot, add) in self.reach[base..base + words].iter_mut().zip(&row_after) {
                    *slot |= add;
                }
            }
        }
        true
    }

    /// Non-mutating variant of [`OrderingStore::insert`].
    pub fn with(&self, before: StepId, after: StepId) -> Option<OrderingStore> {
        let mut next = self.clone();
        next.insert(before, after).then_some(next)
    }

    /// Topological order, choosing the lowest-numbered ready step each time.
    pub fn linearize(&self) -> Option<Vec<StepId>> {
        let n = self.steps as StepId;
        let mut placed = vec![false; self.steps];
        let mut out = Vec::with_capacity(self.steps);
        while out.len() < self.steps {
            let next = (0..n).find(|&s| {
                !placed[s as usize] && (0..n).all(|p| placed[p as usize] || !self.precedes(p, s))
            })?;
            placed[next as usize] = true;
            out.push(next);
        }
        Some(out)
    }

    #[cfg(test)]
    pub(crate) fn set_unchecked(&mut self, a: StepId, b: StepId) {
        self.set(a, b);
    }
}
