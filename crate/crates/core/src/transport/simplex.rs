//! Transportation simplex on a complete bipartite graph.
//!
//! Solves `min Σ c_ij f_ij` subject to row sums `supply`, column sums
//! `demand`, `f ≥ 0`, for real (non-integer) masses. The basis is a spanning
//! tree with `rows + cols − 1` cells. Pricing scans blocks of cells; after a
//! run of degenerate pivots the solver switches to Bland's rule until the next
//! pivot that moves mass, which rules out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::CostMatrix;

const DEGENERATE_RUN_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub struct Flow {
    /// `(row, col, mass)` with mass > 0.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

struct Tree {
    // basic cells and their flows
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    // node adjacency: node -> basic cell indices; rows are 0..n, cols n..n+m
    adj: Vec<Vec<usize>>,
    // BFS output
    parent_cell: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    queue: VecDeque<usize>,
    stack: Vec<usize>,
}

impl Tree {
    fn other_end(&self, cell: usize, node: usize, n: usize) -> usize {
        let (r, c) = self.cells[cell];
        if node == r {
            n + c
        } else {
            r
        }
    }

    fn refresh(&mut self, n: usize, cost: &CostMatrix) {
        const NONE: usize = usize::MAX;
        let total = self.adj.len();
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.queue.clear();
        self.parent[0] = 0;
        self.parent_cell[0] = NONE;
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        self.queue.push_back(0);
        let mut seen = 1;
        while let Some(u) = self.queue.pop_front() {
            for k in 0..self.adj[u].len() {
                let cell = self.adj[u][k];
                let w = self.other_end(cell, u, n);
                if self.parent[w] != NONE {
                    continue;
                }
                let (r, c) = self.cells[cell];
                // u_r + v_c = c_rc
                self.pot[w] = cost.get(r, c) - self.pot[u];
                self.parent[w] = u;
                self.parent_cell[w] = cell;
                self.depth[w] = self.depth[u] + 1;
                self.queue.push_back(w);
                seen += 1;
            }
        }
        debug_assert_eq!(seen, total, "basis must span every node");
    }

    /// Re-hangs the subtree below `w` after `cell` became its parent edge,
    /// recomputing potentials and depths there only.
    fn rehang(&mut self, w: usize, cell: usize, n: usize, cost: &CostMatrix) {
        let u = self.other_end(cell, w, n);
        let (r, c) = self.cells[cell];
        self.parent[w] = u;
        self.parent_cell[w] = cell;
        self.depth[w] = self.depth[u] + 1;
        self.pot[w] = cost.get(r, c) - self.pot[u];
        self.stack.clear();
        self.stack.push(w);
        while let Some(x) = self.stack.pop() {
            for k in 0..self.adj[x].len() {
                let e = self.adj[x][k];
                if e == self.parent_cell[x] {
                    continue;
                }
                let y = self.other_end(e, x, n);
                let (r, c) = self.cells[e];
                self.pot[y] = cost.get(r, c) - self.pot[x];
                self.parent[y] = x;
                self.parent_cell[y] = e;
                self.depth[y] = self.depth[x] + 1;
                self.stack.push(y);
            }
        }
    }
}

/// Exact solution of the balanced transportation problem.
///
/// `supply` and `demand` must have (numerically) equal totals. Rows or columns
/// with zero mass are allowed.
pub fn solve(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<Flow> {
    let (n_all, m_all) = (supply.len(), demand.len());
    if cost.rows() != n_all || cost.cols() != m_all {
        return Err(Error::Numerical(format!(
            "cost matrix is {}x{} but marginals are {}x{}",
            cost.rows(),
            cost.cols(),
            n_all,
            m_all
        )));
    }
    if supply.iter().chain(demand).any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::Numerical("marginals must be finite and nonnegative".into()));
    }
    let rows: Vec<usize> = (0..n_all).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..m_all).filter(|&j| demand[j] > 0.0).collect();
    let total_s: f64 = rows.iter().map(|&i| supply[i]).sum();
    let total_d: f64 = cols.iter().map(|&j| demand[j]).sum();
    let scale = total_s.max(total_d).max(1.0);
    if (total_s - total_d).abs() > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "unbalanced problem: supply {total_s} vs demand {total_d}"
        )));
    }
    if rows.is_empty() || cols.is_empty() {
        return Ok(Flow {
            entries: Vec::new(),
            cost: 0.0,
        });
    }

    let sub = cost.select(&rows, &cols);
    let s: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let d: Vec<f64> = cols.iter().map(|&j| demand[j]).collect();
    let flow = solve_positive(&s, &d, &sub)?;

    let entries = flow
        .into_iter()
        .map(|(r, c, f)| (rows[r], cols[c], f))
        .collect::<Vec<_>>();
    let cost_value = entries.iter().map(|&(r, c, f)| f * cost.get(r, c)).sum();
    Ok(Flow {
        entries,
        cost: cost_value,
    })
}

/// Least-cost starting basis: cells are visited by increasing cost and each
/// allocation retires exactly one row or column (both on the last one), which
/// yields `rows + cols − 1` cells forming a spanning tree.
fn least_cost_start(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Vec<(usize, usize, f64)> {
    let (n, m) = (supply.len(), demand.len());
    let mut order: Vec<u32> = (0..(n * m) as u32).collect();
    let entries = cost.entries();
    order.sort_unstable_by(|&a, &b| entries[a as usize].total_cmp(&entries[b as usize]).then(a.cmp(&b)));
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_alive = vec![true; n];
    let mut col_alive = vec![true; m];
    let (mut rows_left, mut cols_left) = (n, m);
    let mut out = Vec::with_capacity(n + m - 1);
    for idx in order {
        let (i, j) = (idx as usize / m, idx as usize % m);
        if !(row_alive[i] && col_alive[j]) {
            continue;
        }
        if rows_left == 1 && cols_left == 1 {
            // absorb rounding residue in the last cell
            out.push((i, j, s[i].max(d[j]).max(0.0)));
            break;
        }
        let f = s[i].min(d[j]).max(0.0);
        out.push((i, j, f));
        s[i] -= f;
        d[j] -= f;
        let retire_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            s[i] <= d[j]
        };
        if retire_row {
            row_alive[i] = false;
            rows_left -= 1;
        } else {
            col_alive[j] = false;
            cols_left -= 1;
        }
    }
    out
}

fn solve_positive(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<Vec<(usize, usize, f64)>> {
    let (n, m) = (supply.len(), demand.len());
    let nodes = n + m;

    let mut tree = Tree {
        cells: Vec::with_capacity(nodes - 1),
        flow: Vec::with_capacity(nodes - 1),
        adj: vec![Vec::new(); nodes],
        parent_cell: vec![0; nodes],
        parent: vec![0; nodes],
        depth: vec![0; nodes],
        pot: vec![0.0; nodes],
        queue: VecDeque::with_capacity(nodes),
        stack: Vec::with_capacity(nodes),
    };
    for (i, j, f) in least_cost_start(supply, demand, cost) {
        let k = tree.cells.len();
        tree.cells.push((i, j));
        tree.flow.push(f);
        tree.adj[i].push(k);
        tree.adj[n + j].push(k);
    }

    let max_cost = cost.max_abs().max(1.0);
    let tol = 1e-12 * max_cost;
    let total_cells = n * m;
    let block = ((total_cells as f64).sqrt() as usize).max(64).min(total_cells);
    let mut cursor = 0usize;
    let mut degenerate_run = 0usize;
    let max_pivots = 1_000 + 200 * nodes * nodes.max(10);
    let mut path_up: Vec<usize> = Vec::new();
    let mut path_down: Vec<usize> = Vec::new();

    tree.refresh(n, cost);
    for _ in 0..max_pivots {
        let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;

        // pricing
        let reduced = |idx: usize, tree: &Tree| {
            let (i, j) = (idx / m, idx % m);
            cost.get(i, j) - tree.pot[i] - tree.pot[n + j]
        };
        let mut entering: Option<usize> = None;
        if bland {
            for idx in 0..total_cells {
                if reduced(idx, &tree) < -tol {
                    entering = Some(idx);
                    break;
                }
            }
        } else {
            // scan whole row segments so the inner loop is a plain slice walk
            let entries = cost.entries();
            let (row_pot, col_pot) = tree.pot.split_at(n);
            let mut best = -tol;
            let mut scanned = 0;
            let (mut ci, mut cj) = (cursor / m, cursor % m);
            while scanned < total_cells {
                let end = (scanned + block).min(total_cells);
                while scanned < end {
                    let len = (m - cj).min(end - scanned);
                    let base = ci * m + cj;
                    let pr = row_pot[ci];
                    for (k, (&c, &pc)) in entries[base..base + len].iter().zip(&col_pot[cj..cj + len]).enumerate() {
                        let rc = c - pr - pc;
                        if rc < best {
                            best = rc;
                            entering = Some(base + k);
                        }
                    }
                    scanned += len;
                    cj += len;
                    if cj == m {
                        cj = 0;
                        ci = if ci + 1 == n { 0 } else { ci + 1 };
                    }
                }
                if entering.is_some() {
                    cursor = ci * m + cj;
                    break;
                }
            }
        }
        let Some(idx) = entering else {
            return Ok(tree
                .cells
                .iter()
                .zip(&tree.flow)
                .filter(|(_, &f)| f > 0.0)
                .map(|(&(i, j), &f)| (i, j, f))
                .collect());
        };
        let (ei, ej) = (idx / m, idx % m);

        // tree path between row ei and column ej
        path_up.clear();
        path_down.clear();
        let (mut a, mut b) = (ei, n + ej);
        while tree.depth[a] > tree.depth[b] {
            path_up.push(tree.parent_cell[a]);
            a = tree.parent[a];
        }
        while tree.depth[b] > tree.depth[a] {
            path_down.push(tree.parent_cell[b]);
            b = tree.parent[b];
        }
        while a != b {
            path_up.push(tree.parent_cell[a]);
            a = tree.parent[a];
            path_down.push(tree.parent_cell[b]);
            b = tree.parent[b];
        }
        // Cycle: entering (+), then from column ej back to row ei the cells
        // alternate -, +, -, ...
        let cycle: Vec<usize> = path_down.iter().chain(path_up.iter().rev()).copied().collect();
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        let mut leaving_pos = 0;
        for (pos, &cell) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                let f = tree.flow[cell];
                let better = f < theta
                    || (f == theta && bland && {
                        let (ci, cj) = tree.cells[cell];
                        let (li, lj) = tree.cells[leaving];
                        ci * m + cj < li * m + lj
                    });
                if better {
                    theta = f;
                    leaving = cell;
                    leaving_pos = pos;
                }
            }
        }
        if leaving == usize::MAX {
            return Err(Error::Numerical("transport simplex found no leaving cell".into()));
        }
        let theta = theta.max(0.0);
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        for (pos, &cell) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                tree.flow[cell] = (tree.flow[cell] - theta).max(0.0);
            } else {
                tree.flow[cell] += theta;
            }
        }
        // swap leaving for entering in place
        let (li, lj) = tree.cells[leaving];
        tree.adj[li].retain(|&c| c != leaving);
        tree.adj[n + lj].retain(|&c| c != leaving);
        tree.cells[leaving] = (ei, ej);
        tree.flow[leaving] = theta;
        tree.adj[ei].push(leaving);
        tree.adj[n + ej].push(leaving);
        // the endpoint on the far side of the removed edge is re-hung
        let w = if leaving_pos < path_down.len() { n + ej } else { ei };
        tree.rehang(w, leaving, n, cost);
    }
    Err(Error::Numerical("transport simplex exceeded its pivot budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CostMatrix {
        CostMatrix::from_fn(rows, cols, f)
    }

    // exhaustive check over permutations for unit masses
    fn assignment_brute(c: &CostMatrix) -> f64 {
        fn rec(c: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == c.rows() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c.cols() {
                if !used[j] {
                    used[j] = true;
                    rec(c, row + 1, used, acc + c.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(c, 0, &mut vec![false; c.cols()], 0.0, &mut best);
        best
    }

    #[test]
    fn two_by_two_swap() {
        let c = matrix(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let flow = solve(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert_eq!(flow.cost, 0.0);
        assert_eq!(flow.entries.len(), 2);
    }

    #[test]
    fn marginals_hold_with_zero_rows() {
        let c = matrix(3, 4, |i, j| ((i as f64) - (j as f64) * 0.7).abs());
        let s = [1.0, 0.0, 2.5];
        let d = [0.5, 1.0, 0.0, 2.0];
        let flow = solve(&s, &d, &c).unwrap();
        let mut rs = [0.0; 3];
        let mut cs = [0.0; 4];
        for &(i, j, f) in &flow.entries {
            rs[i] += f;
            cs[j] += f;
        }
        for i in 0..3 {
            assert!((rs[i] - s[i]).abs() < 1e-12);
        }
        for j in 0..4 {
            assert!((cs[j] - d[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_assignment_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.gen_range(1..=6);
            let vals: Vec<f64> = (0..k * k).map(|_| rng.gen_range(0.0..10.0)).collect();
            let c = matrix(k, k, |i, j| vals[i * k + j]);
            let flow = solve(&vec![1.0; k], &vec![1.0; k], &c).unwrap();
            assert!((flow.cost - assignment_brute(&c)).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_integer_costs() {
        // many ties; exercises the anti-cycling fallback
        let k = 12;
        let c = matrix(k, k, |i, j| ((i * 7 + j * 3) % 4) as f64);
        let flow = solve(&vec![1.0; k], &vec![1.0; k], &c).unwrap();
        assert!(flow.cost >= 0.0);
        assert_eq!(flow.cost, 0.0);
    }

    #[test]
    fn rejects_unbalanced() {
        let c = matrix(1, 1, |_, _| 0.0);
        assert!(solve(&[1.0], &[2.0], &c).is_err());
    }
}
