//! Exact bottleneck distance between finite diagrams.
//!
//! Atoms are expanded by multiplicity. Each side receives one diagonal slot per
//! point of the other side, giving a square bipartite graph whose edge costs
//! are point-to-point distances, point-to-diagonal distances, or zero between
//! two slots. The answer is the smallest cost threshold admitting a perfect
//! matching; thresholds are drawn from the sorted distinct costs, so the
//! result is one of them bit for bit.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint};

pub fn bottleneck_distance(a: &PersistenceMeasure, b: &PersistenceMeasure) -> Result<f64> {
    let xs = expand(a)?;
    let ys = expand(b)?;
    let (n, m) = (xs.len(), ys.len());
    if n == 0 && m == 0 {
        return Ok(0.0);
    }

    let mut candidates = vec![0.0];
    for x in &xs {
        candidates.push(x.diag_distance());
        for y in &ys {
            candidates.push(x.distance(y));
        }
    }
    candidates.extend(ys.iter().map(|y| y.diag_distance()));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let graph = ThresholdGraph::new(&xs, &ys);
    // the largest candidate is always feasible
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if graph.has_perfect_matching(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

fn expand(mu: &PersistenceMeasure) -> Result<Vec<PlanarPoint>> {
    let mut out = Vec::new();
    for atom in mu.atoms() {
        if atom.mass.fract() != 0.0 || atom.mass > u32::MAX as f64 {
            return Err(Error::NonIntegerMass(atom.mass));
        }
        out.extend(std::iter::repeat_n(atom.point, atom.mass as usize));
    }
    Ok(out)
}

struct ThresholdGraph<'a> {
    xs: &'a [PlanarPoint],
    ys: &'a [PlanarPoint],
}

impl<'a> ThresholdGraph<'a> {
    fn new(xs: &'a [PlanarPoint], ys: &'a [PlanarPoint]) -> Self {
        Self { xs, ys }
    }

    // Left: xs then one diagonal slot per y. Right: ys then one slot per x.
    fn adjacency(&self, t: f64) -> Vec<Vec<usize>> {
        let (n, m) = (self.xs.len(), self.ys.len());
        let mut adj = vec![Vec::new(); n + m];
        for (i, x) in self.xs.iter().enumerate() {
            for (j, y) in self.ys.iter().enumerate() {
                if x.distance(y) <= t {
                    adj[i].push(j);
                }
            }
            if x.diag_distance() <= t {
                adj[i].extend(m..m + n);
            }
        }
        for (j, y) in self.ys.iter().enumerate() {
            let slot = &mut adj[n + j];
            if y.diag_distance() <= t {
                slot.push(j);
            }
            slot.extend(m..m + n);
        }
        adj
    }

    fn has_perfect_matching(&self, t: f64) -> bool {
        let adj = self.adjacency(t);
        let size = adj.len();
        hopcroft_karp(&adj, size) == size
    }
}

/// Maximum matching size in a bipartite graph with `adj[left] = rights`.
fn hopcroft_karp(adj: &[Vec<usize>], right_count: usize) -> usize {
    const FREE: usize = usize::MAX;
    let left_count = adj.len();
    let mut match_left = vec![FREE; left_count];
    let mut match_right = vec![FREE; right_count];
    let mut dist = vec![0usize; left_count];
    let mut queue = VecDeque::new();
    let mut matched = 0;

    loop {
        // layered BFS from free left vertices
        queue.clear();
        let mut found = false;
        for u in 0..left_count {
            if match_left[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }
        let mut next = vec![0usize; left_count];
        for u in 0..left_count {
            if match_left[u] == FREE && augment(u, adj, &mut match_left, &mut match_right, &mut dist, &mut next) {
                matched += 1;
            }
        }
    }
}

fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    const FREE: usize = usize::MAX;
    // iterative DFS along the layered graph
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        if next[u] == adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let v = adj[u][next[u]];
        next[u] += 1;
        let w = match_right[v];
        if w == FREE {
            // flip the path recorded on the stack
            let mut right = v;
            while let Some(l) = stack.pop() {
                let prev = match_left[l];
                match_left[l] = right;
                match_right[right] = l;
                right = prev;
            }
            return true;
        }
        if dist[w] == dist[u] + 1 {
            stack.push(w);
        }
    }
    false
}
