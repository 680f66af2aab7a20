//! Exact transportation simplex (network simplex on the bipartite graph).

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Basic cells `(i, j, flow)`; zero-flow basics are dropped.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual potentials with `u_i + v_j <= c_ij`, tight on the basis.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    m: usize,
    /// Basic cells as (row, col, flow).
    cells: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<usize>>,
    parent_edge: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
}

impl Tree {
    fn other(&self, e: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[e];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn remove_adj(&mut self, node: usize, e: usize) {
        let list = &mut self.adj[node];
        let pos = list.iter().position(|&x| x == e).expect("edge in adjacency");
        list.swap_remove(pos);
    }

    /// Potentials and parent pointers rooted at row 0.
    fn potentials(&mut self, cost: &[f64], n: usize, u: &mut [f64], v: &mut [f64]) {
        let total = self.adj.len();
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = usize::MAX;
        while let Some(node) = stack.pop() {
            for k in 0..self.adj[node].len() {
                let e = self.adj[node][k];
                let next = self.other(e, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j, _) = self.cells[e];
                let c = cost[i * n + j];
                if next >= self.m {
                    v[j] = c - u[i];
                } else {
                    u[i] = c - v[j];
                }
                self.parent[next] = node;
                self.parent_edge[next] = e;
                self.depth[next] = self.depth[node] + 1;
                stack.push(next);
            }
        }
    }
}

/// Minimizes `sum c_ij x_ij` over couplings of `a` and `b` (both summing
/// to the same total). `cost` is row-major `a.len() x b.len()`.
pub fn solve(a: &[f64], b: &[f64], cost: &[f64]) -> Result<LpSolution> {
    let (m, n) = (a.len(), b.len());
    assert_eq!(cost.len(), m * n);
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("transport marginals must be nonempty".into()));
    }
    // North-west corner start: exactly m + n - 1 basic cells forming a tree.
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        if i == m - 1 && j == n - 1 {
            cells.push((i, j, ra[i].max(rb[j]).max(0.0)));
            break;
        }
        let x = ra[i].min(rb[j]).max(0.0);
        cells.push((i, j, x));
        ra[i] -= x;
        rb[j] -= x;
        if (ra[i] <= rb[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let total = m + n;
    let mut tree = Tree {
        m,
        cells,
        adj: vec![Vec::new(); total],
        parent_edge: vec![usize::MAX; total],
        parent: vec![usize::MAX; total],
        depth: vec![0; total],
    };
    for (e, &(i, j, _)) in tree.cells.iter().enumerate() {
        tree.adj[i].push(e);
        tree.adj[m + j].push(e);
    }
    let scale = cost.iter().fold(0.0f64, |s, &c| s.max(c.abs())).max(1e-300);
    let eps = 1e-12 * scale;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let block = ((m * n) as f64).sqrt().ceil() as usize * 4;
    let max_pivots = 50 * (m + n) * (m + n).max(100);
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let mut path_a = Vec::new();
    let mut path_b = Vec::new();
    loop {
        tree.potentials(cost, n, &mut u, &mut v);
        // Block pricing: best reduced cost in the first block containing a
        // negative one, scanning cyclically from the last position.
        let mut best = -eps;
        let mut enter = None;
        let mut scanned = 0;
        while scanned < m * n {
            let end = (scanned + block).min(m * n);
            for _ in scanned..end {
                let (r, c) = (cursor / n, cursor % n);
                let red = cost[cursor] - u[r] - v[c];
                if red < best {
                    best = red;
                    enter = Some((r, c));
                }
                cursor += 1;
                if cursor == m * n {
                    cursor = 0;
                }
            }
            scanned = end;
            if enter.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = enter else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical {
                message: "transportation simplex exceeded its pivot budget".into(),
                iterations: pivots,
                residual: best,
            });
        }
        // Tree path from column node to row node.
        path_a.clear();
        path_b.clear();
        let (mut x, mut y) = (ei, m + ej);
        while tree.depth[x] > tree.depth[y] {
            path_a.push(tree.parent_edge[x]);
            x = tree.parent[x];
        }
        while tree.depth[y] > tree.depth[x] {
            path_b.push(tree.parent_edge[y]);
            y = tree.parent[y];
        }
        while x != y {
            path_a.push(tree.parent_edge[x]);
            x = tree.parent[x];
            path_b.push(tree.parent_edge[y]);
            y = tree.parent[y];
        }
        // Cycle: entering (+), then path_b from the column upward, then
        // path_a downward to the row; signs alternate starting with minus.
        let cycle: Vec<usize> = path_b.iter().copied().chain(path_a.iter().rev().copied()).collect();
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &e) in cycle.iter().enumerate() {
            if k % 2 == 0 && tree.cells[e].2 < theta {
                theta = tree.cells[e].2;
                leave = e;
            }
        }
        for (k, &e) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                tree.cells[e].2 -= theta;
            } else {
                tree.cells[e].2 += theta;
            }
        }
        let (li, lj, _) = tree.cells[leave];
        tree.remove_adj(li, leave);
        tree.remove_adj(m + lj, leave);
        tree.cells[leave] = (ei, ej, theta);
        tree.adj[ei].push(leave);
        tree.adj[m + ej].push(leave);
    }
    let flows: Vec<(usize, usize, f64)> = tree.cells.iter().copied().filter(|c| c.2 > 0.0).collect();
    let cost_value = flows.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
    Ok(LpSolution {
        flows,
        cost: cost_value,
        u,
        v,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over permutation couplings (uniform weights).
    fn brute_force_assignment(cost: &[f64], n: usize) -> f64 {
        fn rec(k: usize, n: usize, used: &mut Vec<bool>, acc: f64, cost: &[f64], best: &mut f64) {
            if k == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(k + 1, n, used, acc + cost[k * n + j], cost, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, n, &mut vec![false; n], 0.0, cost, &mut best);
        best / n as f64
    }

    #[test]
    fn two_by_two_shift() {
        // {0, 1} -> {2, 3} with squared distances.
        let xs = [0.0, 1.0];
        let ys = [2.0, 3.0];
        let cost: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y) * (x - y))).collect();
        let s = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((s.cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 6;
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
            let w = vec![1.0 / n as f64; n];
            let s = solve(&w, &w, &cost).unwrap();
            assert!((s.cost - brute_force_assignment(&cost, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_duals_and_strong_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, n) = (37, 23);
        let mut a: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 0.01).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        let cost: Vec<f64> = (0..m * n).map(|_| rng.gen::<f64>()).collect();
        let s = solve(&a, &b, &cost).unwrap();
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for &(i, j, x) in &s.flows {
            rows[i] += x;
            cols[j] += x;
        }
        assert!(rows.iter().zip(&a).all(|(r, a)| (r - a).abs() < 1e-12));
        assert!(cols.iter().zip(&b).all(|(c, b)| (c - b).abs() < 1e-12));
        for i in 0..m {
            for j in 0..n {
                assert!(s.u[i] + s.v[j] <= cost[i * n + j] + 1e-10);
            }
        }
        let dual: f64 = s.u.iter().zip(&a).map(|(u, a)| u * a).sum::<f64>() + s.v.iter().zip(&b).map(|(v, b)| v * b).sum::<f64>();
        assert!((dual - s.cost).abs() < 1e-10);
    }
}
