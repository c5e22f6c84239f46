//! Order-statistic multiset for sliding-window quantiles.
//!
//! A treap with subtree sizes. Entries are keyed by `(value, index)` so that
//! tied values stay distinguishable and removals are unambiguous.

use std::cmp::Ordering;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    value: f64,
    index: u64,
    priority: u64,
    left: u32,
    right: u32,
    size: u32,
}

/// Multiset of `f64` supporting insert, remove and rank selection in `O(log n)`.
#[derive(Debug, Clone)]
pub struct SlidingQuantileWindow {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    capacity: usize,
}

fn key_cmp(av: f64, ai: u64, bv: f64, bi: u64) -> Ordering {
    av.total_cmp(&bv).then(ai.cmp(&bi))
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl SlidingQuantileWindow {
    pub fn with_capacity(capacity: usize) -> Self {
        Self { nodes: Vec::with_capacity(capacity), free: Vec::new(), root: NIL, capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size(self.root) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    fn size(&self, t: u32) -> u32 {
        if t == NIL {
            0
        } else {
            self.nodes[t as usize].size
        }
    }

    fn update(&mut self, t: u32) {
        let (l, r) = {
            let n = &self.nodes[t as usize];
            (n.left, n.right)
        };
        self.nodes[t as usize].size = 1 + self.size(l) + self.size(r);
    }

    /// Splits `t` into keys `< (value, index)` and keys `>=`.
    fn split(&mut self, t: u32, value: f64, index: u64) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        let node = &self.nodes[t as usize];
        if key_cmp(node.value, node.index, value, index) == Ordering::Less {
            let right = node.right;
            let (l, r) = self.split(right, value, index);
            self.nodes[t as usize].right = l;
            self.update(t);
            (t, r)
        } else {
            let left = node.left;
            let (l, r) = self.split(left, value, index);
            self.nodes[t as usize].left = r;
            self.update(t);
            (l, t)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].priority > self.nodes[b as usize].priority {
            let ar = self.nodes[a as usize].right;
            let m = self.merge(ar, b);
            self.nodes[a as usize].right = m;
            self.update(a);
            a
        } else {
            let bl = self.nodes[b as usize].left;
            let m = self.merge(a, bl);
            self.nodes[b as usize].left = m;
            self.update(b);
            b
        }
    }

    /// Inserts `value` tagged with a caller-chosen unique `index`.
    pub fn insert(&mut self, value: f64, index: u64) {
        let node = Node { value, index, priority: mix(index), left: NIL, right: NIL, size: 1 };
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        let (l, r) = self.split(self.root, value, index);
        let l = self.merge(l, id);
        self.root = self.merge(l, r);
    }

    /// Removes the entry `(value, index)`; returns whether it was present.
    pub fn remove(&mut self, value: f64, index: u64) -> bool {
        let (root, removed) = self.remove_at(self.root, value, index);
        self.root = root;
        removed
    }

    fn remove_at(&mut self, t: u32, value: f64, index: u64) -> (u32, bool) {
        if t == NIL {
            return (NIL, false);
        }
        let node = &self.nodes[t as usize];
        match key_cmp(value, index, node.value, node.index) {
            Ordering::Equal => {
                let (l, r) = (node.left, node.right);
                self.free.push(t);
                (self.merge(l, r), true)
            }
            Ordering::Less => {
                let left = node.left;
                let (sub, removed) = self.remove_at(left, value, index);
                self.nodes[t as usize].left = sub;
                self.update(t);
                (t, removed)
            }
            Ordering::Greater => {
                let right = node.right;
                let (sub, removed) = self.remove_at(right, value, index);
                self.nodes[t as usize].right = sub;
                self.update(t);
                (t, removed)
            }
        }
    }

    /// Value of rank `j` (1-based) among current contents.
    pub fn select(&self, j: usize) -> Option<f64> {
        if j == 0 || j > self.len() {
            return None;
        }
        let mut t = self.root;
        let mut j = j as u32;
        loop {
            let node = &self.nodes[t as usize];
            let left = self.size(node.left);
            match j.cmp(&(left + 1)) {
                Ordering::Equal => return Some(node.value),
                Ordering::Less => t = node.left,
                Ordering::Greater => {
                    j -= left + 1;
                    t = node.right;
                }
            }
        }
    }
}
