//! Graphs the search algorithms run on: hypercube grids, starfish graphs,
//! irregular graphs loaded from files, plus the structural helpers the
//! algorithms need (balls, dimension constants, minimum-height spanning trees,
//! depth-first segment schedules).
//!
//! Vertices are `u32` and 0-indexed in memory. The line-based text format and
//! every user-facing dump use 1-indexed labels.

use std::collections::VecDeque;
use std::fmt;

/// Vertex id, 0-indexed.
pub type Vertex = u32;

/// Hard cap on graph/grid sizes so a typo'd `side^d` fails fast instead of
/// exhausting memory.
pub const MAX_VERTICES: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    TooLarge { requested: u128 },
    Disconnected,
    SelfLoop { v: Vertex },
    VertexOutOfRange { v: u128 },
    Parse { line: usize, msg: String },
    Empty,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::TooLarge { requested } => {
                write!(f, "graph of {requested} vertices exceeds cap {MAX_VERTICES}")
            }
            GraphError::Disconnected => write!(f, "graph is not connected"),
            GraphError::SelfLoop { v } => write!(f, "self-loop at vertex {}", v + 1),
            GraphError::VertexOutOfRange { v } => write!(f, "vertex label {v} out of range"),
            GraphError::Parse { line, msg } => write!(f, "parse error on line {line}: {msg}"),
            GraphError::Empty => write!(f, "graph must have at least one vertex"),
        }
    }
}

impl std::error::Error for GraphError {}

/// Connected undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<Vertex>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list, checking the type invariants:
    /// undirected, no self-loops, connected.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Graph, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if n > MAX_VERTICES {
            return Err(GraphError::TooLarge { requested: n as u128 });
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n {
                return Err(GraphError::VertexOutOfRange { v: u as u128 });
            }
            if v as usize >= n {
                return Err(GraphError::VertexOutOfRange { v: v as u128 });
            }
            if u == v {
                return Err(GraphError::SelfLoop { v: u });
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = adj.iter().map(|l| l.len()).sum::<usize>() / 2;
        let g = Graph { adj, edge_count };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v as usize]
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([0 as Vertex]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n()
    }

    /// BFS distances from `v`; unreachable would be `u32::MAX` but the graph
    /// is connected by construction.
    pub fn distances(&self, v: Vertex) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        dist[v as usize] = 0;
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize];
            for &w in self.neighbors(u) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: Vertex) -> u32 {
        *self.distances(v).iter().max().unwrap()
    }

    pub fn diameter(&self) -> u32 {
        (0..self.n() as Vertex)
            .map(|v| self.eccentricity(v))
            .max()
            .unwrap()
    }

    /// Serializes to the line-based text format: `n`, then one `u v` edge per
    /// line, 1-indexed, with u < v.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n());
        for u in 0..self.n() as Vertex {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push_str(&format!("{} {}\n", u + 1, v + 1));
                }
            }
        }
        out
    }

    /// Parses the text format produced by [`Graph::to_text`].
    pub fn from_text(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(GraphError::Empty)?;
        let n: usize = header.parse().map_err(|_| GraphError::Parse {
            line,
            msg: format!("expected vertex count, got {header:?}"),
        })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let mut it = l.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<u64, GraphError> {
                tok.ok_or(GraphError::Parse {
                    line,
                    msg: "expected `u v`".into(),
                })?
                .parse()
                .map_err(|_| GraphError::Parse {
                    line,
                    msg: "expected `u v`".into(),
                })
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(GraphError::Parse {
                    line,
                    msg: "trailing tokens after edge".into(),
                });
            }
            if u == 0 || v == 0 {
                return Err(GraphError::VertexOutOfRange { v: 0 });
            }
            edges.push(((u - 1) as Vertex, (v - 1) as Vertex));
        }
        Graph::from_edges(n, &edges)
    }
}

/// Coordinate bijection for a `side^d` grid. Vertex index is row-major with
/// axis 0 fastest: `index = sum_j coord[j] * side^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridCoords {
    pub d: usize,
    pub side: usize,
}

impl GridCoords {
    pub fn n(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn to_coords(&self, v: Vertex) -> Vec<usize> {
        let mut rem = v as usize;
        let mut c = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            c.push(rem % self.side);
            rem /= self.side;
        }
        c
    }

    pub fn to_vertex(&self, coords: &[usize]) -> Vertex {
        debug_assert_eq!(coords.len(), self.d);
        let mut v = 0usize;
        for (j, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.side);
            v += c * self.side.pow(j as u32);
        }
        v as Vertex
    }
}

/// `side^d` hypercube grid together with its coordinate bijection.
#[derive(Debug, Clone)]
pub struct Grid {
    pub graph: Graph,
    pub coords: GridCoords,
}

/// Builds the d-dimensional grid graph of side length `side`: vertices are
/// coordinate tuples, adjacent iff they differ by 1 in exactly one coordinate.
pub fn make_grid(d: usize, side: usize) -> Result<Grid, GraphError> {
    assert!(d >= 1 && side >= 1, "make_grid requires d >= 1, side >= 1");
    let n_big = (side as u128).pow(d as u32);
    if n_big > MAX_VERTICES as u128 {
        return Err(GraphError::TooLarge { requested: n_big });
    }
    let coords = GridCoords { d, side };
    let n = coords.n();
    let mut edges = Vec::new();
    for v in 0..n as Vertex {
        let c = coords.to_coords(v);
        for j in 0..d {
            if c[j] + 1 < side {
                let mut c2 = c.clone();
                c2[j] += 1;
                edges.push((v, coords.to_vertex(&c2)));
            }
        }
    }
    // A 1x1x..x1 grid has no edges but is connected.
    let graph = Graph::from_edges(n, &edges)?;
    Ok(Grid { graph, coords })
}

/// Starfish graph: central vertex 0 with `m` legs of `leg_len` vertices each.
/// Leg j occupies vertices `1 + j*leg_len .. 1 + (j+1)*leg_len`, tip last.
pub fn make_starfish(m: usize, leg_len: usize) -> Result<Graph, GraphError> {
    assert!(m >= 1 && leg_len >= 1, "starfish needs m >= 1, leg_len >= 1");
    let n = 1 + m * leg_len;
    if n > MAX_VERTICES {
        return Err(GraphError::TooLarge { requested: n as u128 });
    }
    let mut edges = Vec::new();
    for j in 0..m {
        let base = (1 + j * leg_len) as Vertex;
        edges.push((0, base));
        for i in 1..leg_len {
            edges.push((base + i as Vertex - 1, base + i as Vertex));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Vertex sets of each starfish leg, in leg order. Matches [`make_starfish`]'s
/// layout; used as the region partition for lower-bound instrumentation.
pub fn starfish_legs(m: usize, leg_len: usize) -> Vec<Vec<Vertex>> {
    (0..m)
        .map(|j| {
            let base = 1 + j * leg_len;
            (base..base + leg_len).map(|v| v as Vertex).collect()
        })
        .collect()
}

/// Tip vertex of starfish leg `j`.
pub fn starfish_tip(j: usize, leg_len: usize) -> Vertex {
    (1 + j * leg_len + leg_len - 1) as Vertex
}

/// Ball B(v, l): all vertices at distance at most `l` from `v`, by BFS.
pub fn ball(g: &Graph, v: Vertex, l: u32) -> Vec<Vertex> {
    let dist = g.distances(v);
    (0..g.n() as Vertex)
        .filter(|&u| dist[u as usize] <= l)
        .collect()
}

/// Vertex count up to which the dimension constant is computed exhaustively;
/// larger graphs fall back to a deterministic stride sample of centers.
pub const DIMENSION_EXHAUSTIVE_CAP: usize = 10_000;

/// Largest kappa such that |B(v, l)| >= min(kappa * l^d, n) for every vertex v
/// and every radius l >= 1. Exhaustive over all (v, l) pairs up to
/// [`DIMENSION_EXHAUSTIVE_CAP`] vertices; above that, centers are sampled on
/// a fixed stride (an upper estimate of the true constant). Pairs with
/// |B| = n impose no constraint; the result is capped at n.
pub fn dimension_constant(g: &Graph, d: f64) -> f64 {
    assert!(d >= 1.0, "dimension_constant requires d >= 1");
    let n = g.n();
    let stride = n.div_ceil(DIMENSION_EXHAUSTIVE_CAP).max(1);
    let mut kappa = n as f64;
    for v in (0..n as Vertex).step_by(stride) {
        let dist = g.distances(v);
        // Ball sizes by counting sort over distances.
        let ecc = *dist.iter().max().unwrap() as usize;
        let mut count = vec![0usize; ecc + 1];
        for &dd in &dist {
            count[dd as usize] += 1;
        }
        let mut ball_size = count[0];
        for (l, &shell) in count.iter().enumerate().skip(1) {
            ball_size += shell;
            if ball_size < n {
                kappa = kappa.min(ball_size as f64 / (l as f64).powf(d));
            }
        }
    }
    kappa
}

/// BFS spanning tree of minimal height rooted at `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    pub root: Vertex,
    /// parent[v] for v != root; parent[root] = root.
    pub parent: Vec<Vertex>,
    pub depth: Vec<u32>,
    /// Children lists in ascending vertex order.
    pub children: Vec<Vec<Vertex>>,
}

impl SpanningTree {
    pub fn height(&self) -> u32 {
        *self.depth.iter().max().unwrap()
    }

    /// Path from `root` down to `v`, inclusive of both.
    pub fn path_from_root(&self, v: Vertex) -> Vec<Vertex> {
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.root {
            cur = self.parent[cur as usize];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// BFS tree rooted at `root`; its height equals the root's eccentricity.
/// Neighbor lists are visited in ascending order, so the tree is deterministic.
pub fn min_height_spanning_tree(g: &Graph, root: Vertex) -> SpanningTree {
    let n = g.n();
    let mut parent = vec![u32::MAX; n];
    let mut depth = vec![0u32; n];
    let mut children = vec![Vec::new(); n];
    parent[root as usize] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if parent[w as usize] == u32::MAX {
                parent[w as usize] = v;
                depth[w as usize] = depth[v as usize] + 1;
                children[v as usize].push(w);
                queue.push_back(w);
            }
        }
    }
    SpanningTree {
        root,
        parent,
        depth,
        children,
    }
}

/// Euler-tour walk of a depth-first search over the spanning tree: starts and
/// ends at the root, 2(n-1) moves, every move along a tree edge.
pub fn dfs_walk(tree: &SpanningTree) -> Vec<Vertex> {
    let mut walk = Vec::with_capacity(2 * tree.parent.len());
    fn visit(tree: &SpanningTree, v: Vertex, walk: &mut Vec<Vertex>) {
        walk.push(v);
        for &c in &tree.children[v as usize] {
            visit(tree, c, walk);
            walk.push(v);
        }
    }
    visit(tree, tree.root, &mut walk);
    walk
}

/// One segment of a depth-first traversal: walk from the root to the body,
/// traverse the body, walk back to the root. Each list is a vertex walk along
/// graph edges; consecutive entries are adjacent (or equal for length-0 hops).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// Root-to-body-start walk, excluding the body's first vertex.
    pub prefix: Vec<Vertex>,
    /// Body walk, inclusive.
    pub body: Vec<Vertex>,
    /// Body-end-to-root walk, excluding the body's last vertex.
    pub suffix: Vec<Vertex>,
}

impl Segment {
    /// Number of moves in the full schedule; a segment always has at least
    /// its body, so there is no empty case.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.prefix.len() + (self.body.len() - 1) + self.suffix.len()
    }

    /// Full walk root -> body -> root.
    pub fn full_walk(&self) -> Vec<Vertex> {
        let mut w = self.prefix.clone();
        w.extend_from_slice(&self.body);
        w.extend_from_slice(&self.suffix);
        w
    }
}

/// Segment schedule from splitting a DFS traversal into bodies of `delta`
/// moves each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSchedule {
    pub root: Vertex,
    pub segments: Vec<Segment>,
}

impl SegmentSchedule {
    /// Moves in the longest segment schedule.
    pub fn max_len(&self) -> usize {
        self.segments.iter().map(Segment::len).max().unwrap_or(0)
    }
}

/// Splits the 2(n-1)-move DFS walk of a minimum-height spanning tree rooted at
/// vertex 0 into ceil((2n-2)/delta) bodies of `delta` moves each, and wraps
/// each body with root-to-start and end-to-root tree walks. With `delta` equal
/// to the graph diameter every full schedule has at most 3*diameter moves.
pub fn dfs_segments(g: &Graph, delta: usize) -> SegmentSchedule {
    assert!(delta >= 1, "delta must be positive");
    assert!(delta <= 2 * g.n(), "delta must be at most 2n");
    let root: Vertex = 0;
    let tree = min_height_spanning_tree(g, root);
    let walk = dfs_walk(&tree);
    if walk.len() == 1 {
        // Single-vertex graph: one degenerate segment.
        return SegmentSchedule {
            root,
            segments: vec![Segment {
                prefix: vec![],
                body: vec![root],
                suffix: vec![],
            }],
        };
    }
    let moves = walk.len() - 1;
    let mut segments = Vec::new();
    let mut start = 0;
    while start < moves {
        let end = (start + delta).min(moves);
        let body: Vec<Vertex> = walk[start..=end].to_vec();
        let mut prefix = tree.path_from_root(body[0]);
        prefix.pop(); // body carries its own first vertex
        let mut suffix = tree.path_from_root(*body.last().unwrap());
        suffix.reverse();
        suffix.remove(0); // body carries its own last vertex
        segments.push(Segment {
            prefix,
            body,
            suffix,
        });
        start = end;
    }
    SegmentSchedule { root, segments }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n as Vertex - 1).map(|v| (v, v + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn grid_2x3_counts() {
        let g = make_grid(2, 3).unwrap();
        assert_eq!(g.graph.n(), 9);
        assert_eq!(g.graph.edge_count(), 12);
    }

    #[test]
    fn grid_1d_is_path() {
        let g = make_grid(1, 4).unwrap();
        assert_eq!(g.graph.n(), 4);
        assert_eq!(g.graph.edge_count(), 3);
    }

    #[test]
    fn grid_cube_counts() {
        let g = make_grid(3, 2).unwrap();
        assert_eq!(g.graph.n(), 8);
        assert_eq!(g.graph.edge_count(), 12);
    }

    #[test]
    fn grid_neighbors_match_coordinate_rule_exhaustively() {
        // Exhaustive pairwise check on a few grids up to 10^4 vertices.
        for (d, side) in [(2usize, 9usize), (3, 8), (1, 17), (4, 5)] {
            let grid = make_grid(d, side).unwrap();
            let n = grid.graph.n();
            assert!(n <= 10_000);
            for u in 0..n as Vertex {
                let cu = grid.coords.to_coords(u);
                for v in 0..n as Vertex {
                    let cv = grid.coords.to_coords(v);
                    let diff: usize = cu
                        .iter()
                        .zip(&cv)
                        .map(|(a, b)| a.abs_diff(*b))
                        .sum();
                    let one_axis = cu.iter().zip(&cv).filter(|(a, b)| a != b).count() == 1;
                    let expected = diff == 1 && one_axis;
                    assert_eq!(grid.graph.has_edge(u, v), expected, "u={u} v={v}");
                }
            }
        }
    }

    #[test]
    fn grid_size_cap_enforced() {
        assert!(matches!(
            make_grid(8, 100),
            Err(GraphError::TooLarge { .. })
        ));
    }

    #[test]
    fn starfish_counts_and_diameter() {
        let g = make_starfish(6, 2).unwrap();
        assert_eq!(g.n(), 13);
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn starfish_single_leg_is_path() {
        let g = make_starfish(1, 3).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.diameter(), 3);
    }

    #[test]
    fn ball_examples() {
        let grid = make_grid(2, 3).unwrap();
        let center = grid.coords.to_vertex(&[1, 1]);
        assert_eq!(ball(&grid.graph, center, 0), vec![center]);
        assert_eq!(ball(&grid.graph, center, 1).len(), 5);
        let diam = grid.graph.diameter();
        assert_eq!(ball(&grid.graph, center, diam).len(), 9);
        // Monotone nesting.
        for l in 0..diam {
            let a = ball(&grid.graph, 0, l);
            let b = ball(&grid.graph, 0, l + 1);
            assert!(a.iter().all(|v| b.contains(v)));
        }
    }

    /// Independent oracle: brute-force the defining inequality over every
    /// (v, l) pair and every candidate kappa produced by some pair.
    fn dimension_constant_oracle(g: &Graph, d: f64) -> f64 {
        let n = g.n();
        let mut best = n as f64;
        for v in 0..n as Vertex {
            for l in 1..=g.eccentricity(v) {
                let b = ball(g, v, l).len();
                if b < n {
                    best = best.min(b as f64 / (l as f64).powf(d));
                }
            }
        }
        best
    }

    #[test]
    fn dimension_constant_matches_oracle_on_l2_9() {
        let grid = make_grid(2, 9).unwrap();
        let kappa = dimension_constant(&grid.graph, 2.0);
        let oracle = dimension_constant_oracle(&grid.graph, 2.0);
        assert!((kappa - oracle).abs() < 1e-12);
        // Re-verification pass: kappa satisfies the inequality everywhere.
        let n = grid.graph.n();
        for v in 0..n as Vertex {
            for l in 1..=grid.graph.eccentricity(v) {
                let b = ball(&grid.graph, v, l).len() as f64;
                assert!(b + 1e-9 >= (kappa * (l as f64).powi(2)).min(n as f64));
            }
        }
    }

    #[test]
    fn path_tested_as_2d_degrades() {
        // |B(v,l)| <= 2l+1 on a path, so kappa -> 0 as n grows.
        let k8 = dimension_constant(&path(8), 2.0);
        let k32 = dimension_constant(&path(32), 2.0);
        let k128 = dimension_constant(&path(128), 2.0);
        assert!(k32 < k8 && k128 < k32);
        assert!(k128 < 0.1);
    }

    #[test]
    fn dimension_one_kappa_at_least_one() {
        for g in [
            path(17),
            make_starfish(5, 3).unwrap(),
            make_grid(2, 5).unwrap().graph,
        ] {
            assert!(dimension_constant(&g, 1.0) >= 1.0);
        }
    }

    #[test]
    fn spanning_tree_depths() {
        let t = min_height_spanning_tree(&path(6), 0);
        assert_eq!(t.height(), 5);

        let grid = make_grid(2, 3).unwrap();
        let t = min_height_spanning_tree(&grid.graph, 0);
        assert_eq!(t.height(), 4);

        let star = make_starfish(7, 1).unwrap();
        let t = min_height_spanning_tree(&star, 0);
        assert_eq!(t.height(), 1);
    }

    #[test]
    fn dfs_walk_is_euler_tour() {
        let grid = make_grid(2, 4).unwrap();
        let t = min_height_spanning_tree(&grid.graph, 0);
        let walk = dfs_walk(&t);
        assert_eq!(walk.len(), 2 * grid.graph.n() - 1);
        assert_eq!(walk[0], 0);
        assert_eq!(*walk.last().unwrap(), 0);
        for w in walk.windows(2) {
            assert!(grid.graph.has_edge(w[0], w[1]));
        }
    }

    #[test]
    fn dfs_segments_single_segment() {
        let g = path(5);
        let s = dfs_segments(&g, 2 * g.n() - 2);
        assert_eq!(s.segments.len(), 1);
    }

    #[test]
    fn dfs_segments_path4_delta2() {
        // DFS walk on the path 0-1-2-3 is 0,1,2,3,2,1,0: 6 moves, so three
        // 2-move bodies.
        let g = path(4);
        let s = dfs_segments(&g, 2);
        assert_eq!(s.segments.len(), 3);
        assert_eq!(s.segments[0].body, vec![0, 1, 2]);
        assert_eq!(s.segments[1].body, vec![2, 3, 2]);
        assert_eq!(s.segments[2].body, vec![2, 1, 0]);
    }

    #[test]
    fn dfs_segments_cover_all_vertices_and_walk_edges() {
        for g in [
            path(9),
            make_grid(2, 4).unwrap().graph,
            make_starfish(4, 3).unwrap(),
        ] {
            let delta = g.diameter() as usize;
            let s = dfs_segments(&g, delta);
            let mut covered = vec![false; g.n()];
            for seg in &s.segments {
                for &v in &seg.body {
                    covered[v as usize] = true;
                }
                let w = seg.full_walk();
                assert_eq!(w[0], 0, "schedule starts at root");
                assert_eq!(*w.last().unwrap(), 0, "schedule ends at root");
                for pair in w.windows(2) {
                    assert!(g.has_edge(pair[0], pair[1]));
                }
                let ecc = g.eccentricity(0) as usize;
                assert!(seg.len() <= 2 * ecc + delta);
                assert!(seg.len() <= 3 * g.diameter() as usize);
            }
            assert!(covered.iter().all(|&c| c), "bodies cover V");
        }
    }

    #[test]
    fn text_round_trip() {
        let g = make_starfish(3, 2).unwrap();
        let text = g.to_text();
        let g2 = Graph::from_text(&text).unwrap();
        assert_eq!(g, g2);
        assert!(text.starts_with("7\n"));
    }

    #[test]
    fn text_rejects_disconnected() {
        let text = "4\n1 2\n3 4\n";
        assert!(matches!(Graph::from_text(text), Err(GraphError::Disconnected)));
    }
}
