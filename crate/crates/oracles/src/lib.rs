//! Brute-force reference implementations used by the test suites.
//!
//! Nothing here shares code with `softdec-core`: graphs are plain edge
//! lists and every quantity is computed by enumeration.

/// An edge of a matching graph. `b == None` joins `a` to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlainEdge {
    pub a: usize,
    pub b: Option<usize>,
    pub weight: f64,
    pub logical: bool,
}

/// Minimum correction weight in each logical class, found by trying every
/// subset of edges. Returns `[even, odd]`; `None` when no subset of that
/// class explains the defects. Only usable for a few dozen edges at most.
pub fn min_weight_by_subsets(num_nodes: usize, edges: &[PlainEdge], defects: &[usize]) -> [Option<f64>; 2] {
    assert!(edges.len() <= 24, "subset enumeration is exponential");
    let mut target = vec![false; num_nodes];
    for &d in defects {
        target[d] ^= true;
    }
    let mut best = [None::<f64>; 2];
    for mask in 0u32..(1 << edges.len()) {
        let mut parity = vec![false; num_nodes];
        let mut w = 0.0;
        let mut logical = false;
        for (k, e) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                parity[e.a] ^= true;
                if let Some(b) = e.b {
                    parity[b] ^= true;
                }
                w += e.weight;
                logical ^= e.logical;
            }
        }
        if parity == target {
            let slot = &mut best[logical as usize];
            if slot.is_none_or(|b| w < b) {
                *slot = Some(w);
            }
        }
    }
    best
}

/// Shortest path weights from `src` to every node with each logical
/// parity, over nonnegative weights. The boundary is node `num_nodes`.
fn parity_dijkstra(num_nodes: usize, edges: &[PlainEdge], src: usize) -> Vec<[f64; 2]> {
    let total = num_nodes + 1;
    let mut adj: Vec<Vec<(usize, f64, bool)>> = vec![Vec::new(); total];
    for e in edges {
        let b = e.b.unwrap_or(num_nodes);
        adj[e.a].push((b, e.weight, e.logical));
        adj[b].push((e.a, e.weight, e.logical));
    }
    let mut dist = vec![[f64::INFINITY; 2]; total];
    let mut done = vec![[false; 2]; total];
    dist[src][0] = 0.0;
    // O(V^2) selection keeps the oracle free of heap subtleties.
    loop {
        let mut pick = None;
        for v in 0..total {
            for p in 0..2 {
                if !done[v][p] && dist[v][p].is_finite() && pick.is_none_or(|(u, q): (usize, usize)| dist[v][p] < dist[u][q]) {
                    pick = Some((v, p));
                }
            }
        }
        let Some((u, p)) = pick else { break };
        done[u][p] = true;
        for &(v, w, l) in &adj[u] {
            let q = p ^ l as usize;
            let nd = dist[u][p] + w;
            if nd < dist[v][q] {
                dist[v][q] = nd;
            }
        }
    }
    dist
}

/// Minimum correction weight per logical class by enumerating every way of
/// pairing the defects with each other or with the boundary, using
/// parity-resolved shortest paths. Returns `[even, odd]`. Bulk cycles are
/// assumed to carry no logical flip.
pub fn min_weight_by_matching(num_nodes: usize, edges: &[PlainEdge], defects: &[usize]) -> [Option<f64>; 2] {
    let mut ds: Vec<usize> = Vec::new();
    for &d in defects {
        if let Some(pos) = ds.iter().position(|&x| x == d) {
            ds.remove(pos);
        } else {
            ds.push(d);
        }
    }
    let paths: Vec<Vec<[f64; 2]>> = ds.iter().map(|&d| parity_dijkstra(num_nodes, edges, d)).collect();
    let mut best = [f64::INFINITY; 2];
    let mut used = vec![false; ds.len()];
    fn rec(
        ds: &[usize],
        paths: &[Vec<[f64; 2]>],
        boundary: usize,
        used: &mut [bool],
        acc: [f64; 2],
        best: &mut [f64; 2],
    ) {
        let Some(i) = used.iter().position(|&u| !u) else {
            for p in 0..2 {
                best[p] = best[p].min(acc[p]);
            }
            return;
        };
        used[i] = true;
        let mut options = vec![paths[i][boundary]];
        let partners: Vec<usize> = (i + 1..ds.len()).filter(|&j| !used[j]).collect();
        for &j in &partners {
            options.push(paths[i][ds[j]]);
        }
        for (o, w) in options.iter().enumerate() {
            let mut next = [f64::INFINITY; 2];
            for a in 0..2 {
                for b in 0..2 {
                    next[a ^ b] = next[a ^ b].min(acc[a] + w[b]);
                }
            }
            if o == 0 {
                rec(ds, paths, boundary, used, next, best);
            } else {
                let j = partners[o - 1];
                used[j] = true;
                rec(ds, paths, boundary, used, next, best);
                used[j] = false;
            }
        }
        used[i] = false;
    }
    rec(&ds, &paths, num_nodes, &mut used, [0.0, f64::INFINITY], &mut best);
    // A correction may also contain a logical loop that leaves and
    // re-enters the boundary.
    let border = parity_dijkstra(num_nodes, edges, num_nodes)[num_nodes][1];
    let best = [best[0].min(best[1] + border), best[1].min(best[0] + border)];
    best.map(|b| b.is_finite().then_some(b))
}

/// Exact `(<di>, <dj>, <di dj>)` for two detectors that share an edge of
/// probability `p` and are each flipped by one further independent
/// mechanism (`a` on `i`, `b` on `j`), by enumerating all 8 outcomes.
pub fn two_detector_moments(p: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let mut m = (0.0, 0.0, 0.0);
    for mask in 0..8u8 {
        let fire = |k: u8| mask >> k & 1 == 1;
        let prob = [p, a, b]
            .iter()
            .enumerate()
            .map(|(k, &q)| if fire(k as u8) { q } else { 1.0 - q })
            .product::<f64>();
        let di = fire(0) ^ fire(1);
        let dj = fire(0) ^ fire(2);
        m.0 += prob * di as u8 as f64;
        m.1 += prob * dj as u8 as f64;
        m.2 += prob * (di && dj) as u8 as f64;
    }
    m
}

/// Exact `<d>` of a detector flipped by independent mechanisms.
pub fn detector_mean(probs: &[f64]) -> f64 {
    odd_parity_probability(probs)
}

/// Probability that an odd number of independent events occur, by
/// enumerating every subset.
pub fn odd_parity_probability(probs: &[f64]) -> f64 {
    assert!(probs.len() <= 20);
    let mut odd = 0.0;
    for mask in 0u32..(1 << probs.len()) {
        if mask.count_ones() % 2 == 1 {
            odd += probs
                .iter()
                .enumerate()
                .map(|(k, &q)| if mask >> k & 1 == 1 { q } else { 1.0 - q })
                .product::<f64>();
        }
    }
    odd
}

/// Matching weight `-ln(P(odd) / P(even))` of independent events given as
/// probabilities.
pub fn parity_weight(probs: &[f64]) -> f64 {
    let odd = odd_parity_probability(probs);
    -(odd / (1.0 - odd)).ln()
}

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2) && n > 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
