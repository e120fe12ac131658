//! Primal network simplex for the uncapacitated transportation problem on
//! the complete bipartite graph `sources × targets`.
//!
//! Arcs are implicit: arc `e = i·n + j` joins source `i` to target `j` and its
//! cost is computed on demand, so memory is `O(m + n)` plus a tree bitset.
//! The spanning-tree bookkeeping (thread, reverse thread, successor counts,
//! last successors) and the block-search pivot rule follow the classical
//! strongly-feasible-tree implementation used by LEMON.

const NONE: usize = usize::MAX;

/// Result of a solve: tree flows and node potentials.
#[derive(Debug, Clone)]
pub struct Solution {
    /// `(source, target, flow)` for every real tree arc with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    /// Potentials of the sources (`u_i`) and targets (`v_j`) such that
    /// `c(i,j) − u_i − v_j ≥ 0` with equality on the flows.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Flow left on the artificial arcs (zero for balanced inputs).
    pub artificial_flow: f64,
    pub pivots: usize,
}

struct Simplex<'a, C: Fn(usize, usize) -> f64> {
    m: usize,
    n: usize,
    cost: &'a C,
    art_cost: f64,
    eps: f64,
    root: usize,
    // per node
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    flow: Vec<f64>,
    art_forward: Vec<bool>,
    in_tree: Vec<u64>,
    // pivot state
    block: usize,
    next_arc: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    dirty: Vec<usize>,
}

impl<'a, C: Fn(usize, usize) -> f64> Simplex<'a, C> {
    fn real_arcs(&self) -> usize {
        self.m * self.n
    }

    fn source(&self, e: usize) -> usize {
        if e < self.real_arcs() {
            e / self.n
        } else {
            let u = e - self.real_arcs();
            if self.art_forward[u] {
                u
            } else {
                self.root
            }
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.real_arcs() {
            self.m + e % self.n
        } else {
            let u = e - self.real_arcs();
            if self.art_forward[u] {
                self.root
            } else {
                u
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs() {
            (self.cost)(e / self.n, e % self.n)
        } else if self.art_forward[e - self.real_arcs()] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn set_tree(&mut self, e: usize, on: bool) {
        if e < self.real_arcs() {
            let (w, b) = (e / 64, e % 64);
            if on {
                self.in_tree[w] |= 1 << b;
            } else {
                self.in_tree[w] &= !(1 << b);
            }
        }
    }

    fn is_tree(&self, e: usize) -> bool {
        self.in_tree[e / 64] >> (e % 64) & 1 == 1
    }

    fn new(supply: &[f64], demand: &[f64], cost: &'a C) -> Self {
        let m = supply.len();
        let n = demand.len();
        let nodes = m + n;
        let root = nodes;
        let mut max_cost: f64 = 0.0;
        // A coarse scan is enough to bound costs for the artificial arcs.
        for i in 0..m {
            for j in 0..n {
                max_cost = max_cost.max(cost(i, j).abs());
            }
        }
        let art_cost = (max_cost + 1.0) * nodes as f64;
        let arcs = m * n;
        let mut s = Simplex {
            m,
            n,
            cost,
            art_cost,
            eps: 1e-14 * art_cost.max(1.0),
            root,
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            up: vec![false; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![1; nodes + 1],
            last_succ: vec![0; nodes + 1],
            pi: vec![0.0; nodes + 1],
            flow: vec![0.0; nodes + 1],
            art_forward: vec![false; nodes],
            in_tree: vec![0; arcs.div_ceil(64).max(1)],
            block: ((arcs as f64).sqrt().ceil() as usize)
                .max(10)
                .min(arcs.max(1)),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            dirty: Vec::new(),
        };
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        for u in 0..nodes {
            let sup = if u < m { supply[u] } else { -demand[u - m] };
            s.parent[u] = root;
            s.pred[u] = arcs + u;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            if sup >= 0.0 {
                s.art_forward[u] = true;
                s.up[u] = true;
                s.pi[u] = 0.0;
                s.flow[u] = sup;
            } else {
                s.art_forward[u] = false;
                s.up[u] = false;
                s.pi[u] = art_cost;
                s.flow[u] = -sup;
            }
        }
        s
    }

    fn reduced(&self, e: usize) -> f64 {
        self.arc_cost(e) + self.pi[self.source(e)] - self.pi[self.target(e)]
    }

    fn find_entering_arc(&mut self) -> bool {
        let arcs = self.real_arcs();
        if arcs == 0 {
            return false;
        }
        let mut min = -self.eps;
        let mut cnt = self.block;
        let mut found = NONE;
        let start = self.next_arc;
        for step in 0..arcs {
            let e = (start + step) % arcs;
            if !self.is_tree(e) {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    found = e;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    self.in_arc = found;
                    self.next_arc = (e + 1) % arcs;
                    return true;
                }
                cnt = self.block;
            }
        }
        if found != NONE {
            self.in_arc = found;
            self.next_arc = start;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let d = if self.up[u] {
                self.flow[u]
            } else {
                f64::INFINITY
            };
            if d < delta {
                delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let d = if self.up[u] {
                f64::INFINITY
            } else {
                self.flow[u]
            };
            if d <= delta {
                delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta.max(0.0);
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.flow[u] += if self.up[u] { -val } else { val };
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.flow[u] += if self.up[u] { val } else { -val };
                u = self.parent[u];
            }
        }
        // The leaving arc drops to exactly zero.
        self.flow[self.u_out] = 0.0;
        let out_arc = self.pred[self.u_out];
        self.set_tree(out_arc, false);
        self.set_tree(self.in_arc, true);
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let in_arc = self.in_arc;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_flow = self.delta;

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.up[u_in] = u_in == self.source(in_arc);
            self.flow[u_in] = in_flow;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty.clear();
            self.dirty.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty.len() {
                let u = self.dirty[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.up[u] = !self.up[p];
                self.flow[u] = self.flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.up[u_in] = u_in == self.source(in_arc);
            self.flow[u_in] = in_flow;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let c = self.arc_cost(self.in_arc);
        let sigma =
            self.pi[self.v_in] - self.pi[self.u_in] - if self.up[self.u_in] { c } else { -c };
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes every potential from the tree, removing accumulated drift.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            let c = self.arc_cost(self.pred[u]);
            self.pi[u] = if self.up[u] {
                self.pi[p] - c
            } else {
                self.pi[p] + c
            };
            u = self.thread[u];
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<usize, String> {
        let mut pivots = 0;
        loop {
            if !self.find_entering_arc() {
                self.refresh_potentials();
                if !self.find_entering_arc() {
                    return Ok(pivots);
                }
            }
            self.find_join_node();
            if !self.find_leaving_arc() || !self.delta.is_finite() {
                return Err("unbounded pivot cycle".into());
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
            if pivots % 4096 == 0 {
                self.refresh_potentials();
            }
            if pivots > max_pivots {
                return Err(format!("no convergence after {pivots} pivots"));
            }
        }
    }
}

/// Solves `min Σ c(i,j) x_ij` subject to `Σ_j x_ij = supply_i`,
/// `Σ_i x_ij = demand_j`, `x ≥ 0`. Inputs must be nonnegative and (nearly)
/// balanced; any imbalance is reported as `artificial_flow`.
pub fn solve<C>(supply: &[f64], demand: &[f64], cost: &C) -> Result<Solution, String>
where
    C: Fn(usize, usize) -> f64,
{
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err("empty support".into());
    }
    let mut s = Simplex::new(supply, demand, cost);
    let max_pivots = 1000 * (m + n) * (m + n).max(64) + 1_000_000;
    let pivots = s.run(max_pivots)?;
    s.refresh_potentials();

    let arcs = s.real_arcs();
    let mut flows = Vec::new();
    let mut artificial_flow = 0.0;
    for u in 0..m + n {
        let e = s.pred[u];
        if e < arcs {
            if s.flow[u] > 0.0 {
                flows.push((e / n, e % n, s.flow[u]));
            }
        } else {
            artificial_flow += s.flow[u].abs();
        }
    }
    flows.sort_by_key(|f| (f.0, f.1));
    let u = (0..m).map(|i| -s.pi[i]).collect();
    let v = (0..n).map(|j| s.pi[m + j]).collect();
    Ok(Solution {
        flows,
        u,
        v,
        artificial_flow,
        pivots,
    })
}
