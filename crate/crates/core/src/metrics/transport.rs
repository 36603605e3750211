//! Exact discrete optimal transport between two uniform distributions,
//! solved as an integer min-cost flow.
//!
//! With `m` sources and `n` sinks, masses are scaled by `L = lcm(m, n)` so
//! every source supplies `L / m` units and every sink demands `L / n`. The
//! transportation polytope has integral vertices for integral margins, so an
//! integral min-cost flow is an optimal transport plan; dividing by `L`
//! recovers the probability-mass plan.

use crate::error::{Error, Result};

/// Optimal plan and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `plan[i][j]` is the mass moved from source `i` to sink `j`.
    pub plan: Vec<Vec<f64>>,
    pub cost: f64,
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(nodes: usize) -> Self {
        Graph {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Adds an edge and its residual twin; returns the forward edge index.
    fn add(&mut self, from: usize, to: usize, cap: u64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Minimum-cost transport from uniform weights over rows to uniform weights
/// over columns of `cost` (an `m × n` matrix of non-negative finite costs).
pub fn uniform_transport(cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let m = cost.len();
    let n = cost.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport needs at least one source and one sink"));
    }
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("cost matrix rows differ in length"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid("transport costs must be finite and non-negative"));
    }
    let (mu, nu) = (m as u64, n as u64);
    let total = mu / gcd(mu, nu) * nu;
    let (supply, demand) = (total / mu, total / nu);

    // nodes: source 0, rows 1..=m, columns m+1..=m+n, sink m+n+1
    let source = 0;
    let sink = m + n + 1;
    let nodes = m + n + 2;
    let mut g = Graph::new(nodes);
    for i in 0..m {
        g.add(source, 1 + i, supply, 0.0);
    }
    let mut cell = vec![vec![0usize; n]; m];
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            cell[i][j] = g.add(1 + i, 1 + m + j, supply.min(demand), c);
        }
    }
    for j in 0..n {
        g.add(1 + m + j, sink, demand, 0.0);
    }

    // Successive shortest paths with Dijkstra on reduced costs. All initial
    // costs are non-negative, so zero potentials are feasible.
    let mut potential = vec![0.0f64; nodes];
    let mut sent = 0u64;
    while sent < total {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev_edge = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[source] = 0.0;
        while let Some(u) = (0..nodes)
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        {
            done[u] = true;
            for &e in &g.adj[u] {
                let edge = &g.edges[e];
                if edge.cap == 0 || done[edge.to] {
                    continue;
                }
                let reduced = (edge.cost + potential[u] - potential[edge.to]).max(0.0);
                let candidate = dist[u] + reduced;
                if candidate < dist[edge.to] {
                    dist[edge.to] = candidate;
                    prev_edge[edge.to] = e;
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::invalid("transport network has no augmenting path"));
        }
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        let mut push = total - sent;
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            push = push.min(g.edges[e].cap);
            v = g.edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            g.edges[e].cap -= push;
            g.edges[e ^ 1].cap += push;
            v = g.edges[e ^ 1].to;
        }
        sent += push;
    }

    let scale = total as f64;
    let mut plan = vec![vec![0.0; n]; m];
    let mut cost_sum = 0.0;
    for i in 0..m {
        for j in 0..n {
            let flow = g.edges[cell[i][j] ^ 1].cap;
            if flow > 0 {
                plan[i][j] = flow as f64 / scale;
                cost_sum += flow as f64 * cost[i][j];
            }
        }
    }
    Ok(TransportPlan {
        plan,
        cost: cost_sum / scale,
    })
}
