use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::Serialize;

use crate::estimate::EstimateError;

pub const MIN_LISTS: usize = 2;
pub const MAX_LISTS: usize = 6;

/// Index of the unordered pair `{i, j}` in the lexicographic pair order.
pub fn pair_index(lists: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * lists - a - 1) / 2 + (b - a - 1)
}

pub fn pair_count(lists: usize) -> usize {
    lists * (lists - 1) / 2
}

/// Chordal graph on the lists with a junction decomposition.
///
/// Vertex sets (cliques, separators) are bitmasks over lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DecomposableGraph {
    lists: usize,
    edges: u32,
    cliques: Vec<u16>,
    separators: Vec<u16>,
}

impl DecomposableGraph {
    /// Graph from an edge bitmask (bit `pair_index(i, j)` set for edge i-j).
    pub fn from_edges(lists: usize, edges: u32) -> Result<Self, EstimateError> {
        check_lists(lists)?;
        if edges >> pair_count(lists) != 0 {
            return Err(EstimateError::InvalidArgument(format!("edge mask {edges:#b} too wide for {lists} lists")));
        }
        let adj = adjacency(lists, edges);
        let (cliques, separators) = junction_decomposition(&adj)?;
        Ok(DecomposableGraph { lists, edges, cliques, separators })
    }

    pub fn complete(lists: usize) -> Self {
        DecomposableGraph::from_edges(lists, (1u32 << pair_count(lists)) - 1).expect("complete graph is chordal")
    }

    pub fn empty(lists: usize) -> Self {
        DecomposableGraph::from_edges(lists, 0).expect("empty graph is chordal")
    }

    pub fn lists(&self) -> usize {
        self.lists
    }

    pub fn edges(&self) -> u32 {
        self.edges
    }

    pub fn edge_count(&self) -> u32 {
        self.edges.count_ones()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges & (1 << pair_index(self.lists, i, j)) != 0
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() as usize == pair_count(self.lists)
    }

    pub fn cliques(&self) -> &[u16] {
        &self.cliques
    }

    /// Separators in junction order, one per clique after the first; empty
    /// separators are kept.
    pub fn separators(&self) -> &[u16] {
        &self.separators
    }

    pub fn adjacency(&self) -> Vec<u16> {
        adjacency(self.lists, self.edges)
    }

    /// Relabelled copy: vertex `k` of the result is vertex `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> DecomposableGraph {
        let mut edges = 0u32;
        for i in 0..self.lists {
            for j in i + 1..self.lists {
                if self.has_edge(perm[i], perm[j]) {
                    edges |= 1 << pair_index(self.lists, i, j);
                }
            }
        }
        DecomposableGraph::from_edges(self.lists, edges).expect("relabelled chordal graph is chordal")
    }

    /// Cliques written with list names, e.g. `[LA,NG][GO]`.
    pub fn describe(&self, names: &[String]) -> String {
        self.cliques
            .iter()
            .map(|&c| {
                let members: Vec<&str> =
                    (0..self.lists).filter(|j| c & (1 << j) != 0).map(|j| names[j].as_str()).collect();
                format!("[{}]", members.join(","))
            })
            .collect()
    }
}

impl fmt::Display for DecomposableGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe(&crate::data::default_list_names(self.lists)))
    }
}

fn check_lists(lists: usize) -> Result<(), EstimateError> {
    if (MIN_LISTS..=MAX_LISTS).contains(&lists) {
        Ok(())
    } else {
        Err(EstimateError::InvalidArgument(format!(
            "graph enumeration supports {MIN_LISTS} to {MAX_LISTS} lists, got {lists}"
        )))
    }
}

fn adjacency(lists: usize, edges: u32) -> Vec<u16> {
    let mut adj = vec![0u16; lists];
    for i in 0..lists {
        for j in i + 1..lists {
            if edges & (1 << pair_index(lists, i, j)) != 0 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

/// Maximum cardinality search; ties go to the lowest vertex.
fn mcs_order(adj: &[u16]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = 0u16;
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|v| visited & (1 << v) == 0)
            .max_by_key(|&v| ((adj[v] & visited).count_ones(), std::cmp::Reverse(v)))
            .expect("unvisited vertex");
        visited |= 1 << v;
        order.push(v);
    }
    order
}

/// Chordality via maximum cardinality search: the graph is chordal iff each
/// vertex's earlier neighbours in the search order form a clique.
pub fn is_chordal(adj: &[u16]) -> bool {
    earlier_neighbourhoods(adj).is_some()
}

fn earlier_neighbourhoods(adj: &[u16]) -> Option<Vec<(usize, u16)>> {
    let order = mcs_order(adj);
    let mut seen = 0u16;
    let mut out = Vec::with_capacity(order.len());
    for &v in &order {
        let earlier = adj[v] & seen;
        for u in 0..adj.len() {
            if earlier & (1 << u) != 0 && (earlier & !(1 << u)) & !adj[u] != 0 {
                return None;
            }
        }
        out.push((v, earlier));
        seen |= 1 << v;
    }
    Some(out)
}

/// Maximal cliques in search order and the separators
/// `C_k ∩ (C_1 ∪ ... ∪ C_{k-1})`.
pub fn junction_decomposition(adj: &[u16]) -> Result<(Vec<u16>, Vec<u16>), EstimateError> {
    let steps = earlier_neighbourhoods(adj)
        .ok_or_else(|| EstimateError::InvalidArgument("graph is not chordal".into()))?;
    let candidates: Vec<u16> = steps.iter().map(|&(v, earlier)| earlier | (1 << v)).collect();
    let mut cliques: Vec<u16> = Vec::new();
    for (k, &c) in candidates.iter().enumerate() {
        let dominated = candidates[k + 1..].iter().any(|&d| d & c == c);
        if !dominated {
            cliques.push(c);
        }
    }
    let mut union = 0u16;
    let mut separators = Vec::with_capacity(cliques.len().saturating_sub(1));
    for (k, &c) in cliques.iter().enumerate() {
        if k > 0 {
            separators.push(c & union);
        }
        union |= c;
    }
    Ok((cliques, separators))
}

fn enumerate_all(lists: usize) -> Vec<DecomposableGraph> {
    (0..1u32 << pair_count(lists))
        .filter(|&e| is_chordal(&adjacency(lists, e)))
        .map(|e| DecomposableGraph::from_edges(lists, e).expect("chordal"))
        .collect()
}

fn all_graphs(lists: usize) -> &'static [DecomposableGraph] {
    static CACHE: [OnceLock<Vec<DecomposableGraph>>; MAX_LISTS + 1] =
        [const { OnceLock::new() }; MAX_LISTS + 1];
    CACHE[lists].get_or_init(|| enumerate_all(lists))
}

/// Every labelled chordal graph on `lists` vertices, ordered by edge mask.
pub fn enumerate_decomposable_graphs(
    lists: usize,
    include_complete: bool,
) -> Result<Vec<DecomposableGraph>, EstimateError> {
    check_lists(lists)?;
    Ok(all_graphs(lists).iter().filter(|g| include_complete || !g.is_complete()).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Regenerated,
}

const CACHE_HEADER: &str = "# decomposable graphs as edge bitmasks";

/// Write the full graph space for `lists` (complete graph included).
pub fn write_graph_cache(path: &Path, lists: usize) -> Result<(), EstimateError> {
    check_lists(lists)?;
    let graphs = all_graphs(lists);
    let mut text = format!("{CACHE_HEADER}\nlists {lists}\ncount {}\n", graphs.len());
    for g in graphs {
        text.push_str(&format!("{}\n", g.edges));
    }
    fs::write(path, text).map_err(|e| EstimateError::InvalidArgument(format!("{}: {e}", path.display())))
}

/// Read a graph cache, verifying it against a fresh enumeration. A missing,
/// malformed or mismatched file is regenerated.
pub fn load_graph_cache(
    path: &Path,
    lists: usize,
    include_complete: bool,
) -> Result<(Vec<DecomposableGraph>, CacheStatus), EstimateError> {
    check_lists(lists)?;
    let status = match fs::read_to_string(path).ok().and_then(|s| parse_cache(&s, lists)) {
        Some(masks) if masks == all_graphs(lists).iter().map(|g| g.edges).collect::<BTreeSet<_>>() => CacheStatus::Hit,
        _ => {
            write_graph_cache(path, lists)?;
            CacheStatus::Regenerated
        }
    };
    Ok((enumerate_decomposable_graphs(lists, include_complete)?, status))
}

fn parse_cache(text: &str, lists: usize) -> Option<BTreeSet<u32>> {
    let mut lines = text.lines();
    if lines.next()? != CACHE_HEADER {
        return None;
    }
    let declared_lists: usize = lines.next()?.strip_prefix("lists ")?.parse().ok()?;
    let count: usize = lines.next()?.strip_prefix("count ")?.parse().ok()?;
    if declared_lists != lists {
        return None;
    }
    let mut masks = BTreeSet::new();
    for line in lines {
        let mask: u32 = line.trim().parse().ok()?;
        if mask >> pair_count(lists) != 0 || !is_chordal(&adjacency(lists, mask)) || !masks.insert(mask) {
            return None;
        }
    }
    (masks.len() == count).then_some(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: a graph is chordal iff no induced subgraph on four
    /// or more vertices is a cycle.
    fn chordal_by_induced_cycles(lists: usize, adj: &[u16]) -> bool {
        for subset in 0u16..1 << lists {
            let k = subset.count_ones();
            if k < 4 {
                continue;
            }
            let members: Vec<usize> = (0..lists).filter(|v| subset & (1 << v) != 0).collect();
            let all_degree_two = members.iter().all(|&v| (adj[v] & subset).count_ones() == 2);
            if all_degree_two && connected(&members, adj, subset) {
                return false;
            }
        }
        true
    }

    fn connected(members: &[usize], adj: &[u16], subset: u16) -> bool {
        let mut reached = 1u16 << members[0];
        loop {
            let grow = members.iter().filter(|&&v| reached & (1 << v) != 0).fold(reached, |acc, &v| acc | (adj[v] & subset));
            if grow == reached {
                return reached == subset;
            }
            reached = grow;
        }
    }

    #[test]
    fn counts_match_brute_force() {
        assert_eq!(enumerate_decomposable_graphs(2, true).unwrap().len(), 2);
        assert_eq!(enumerate_decomposable_graphs(3, true).unwrap().len(), 8);
        assert_eq!(enumerate_decomposable_graphs(4, true).unwrap().len(), 61);
        assert_eq!(enumerate_decomposable_graphs(5, true).unwrap().len(), 822);
        assert_eq!(enumerate_decomposable_graphs(5, false).unwrap().len(), 821);
    }

    #[test]
    fn mcs_agrees_with_induced_cycle_oracle() {
        for lists in 3..=5 {
            for e in 0..1u32 << pair_count(lists) {
                let adj = adjacency(lists, e);
                assert_eq!(is_chordal(&adj), chordal_by_induced_cycles(lists, &adj), "lists {lists} edges {e:#b}");
            }
        }
    }

    #[test]
    fn lists_out_of_range() {
        assert!(enumerate_decomposable_graphs(1, true).is_err());
        assert!(enumerate_decomposable_graphs(7, true).is_err());
    }

    #[test]
    fn textbook_decompositions() {
        let path = DecomposableGraph::from_edges(3, (1 << pair_index(3, 0, 1)) | (1 << pair_index(3, 1, 2))).unwrap();
        let mut cliques = path.cliques().to_vec();
        cliques.sort();
        assert_eq!(cliques, vec![0b011, 0b110]);
        assert_eq!(path.separators(), &[0b010]);

        let empty = DecomposableGraph::empty(3);
        assert_eq!(empty.cliques().len(), 3);
        assert_eq!(empty.separators(), &[0, 0]);

        let full = DecomposableGraph::complete(4);
        assert_eq!(full.cliques(), &[0b1111]);
        assert!(full.separators().is_empty());
    }

    #[test]
    fn chordless_square_is_rejected() {
        let e = [(0, 1), (1, 2), (2, 3), (0, 3)].iter().fold(0u32, |m, &(i, j)| m | 1 << pair_index(4, i, j));
        assert!(DecomposableGraph::from_edges(4, e).is_err());
    }

    #[test]
    fn running_intersection_holds() {
        for g in enumerate_decomposable_graphs(5, true).unwrap() {
            let cliques = g.cliques();
            assert_eq!(cliques.iter().fold(0, |a, c| a | c), 0b11111);
            let mut union = cliques[0];
            for (k, &c) in cliques.iter().enumerate().skip(1) {
                let sep = g.separators()[k - 1];
                assert_eq!(sep, c & union);
                assert!(cliques[..k].iter().any(|&d| d & sep == sep), "{g}");
                union |= c;
            }
            for &c in cliques {
                for i in 0..5 {
                    for j in i + 1..5 {
                        if c & (1 << i) != 0 && c & (1 << j) != 0 {
                            assert!(g.has_edge(i, j));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cache_round_trip_and_repair() {
        let dir = std::env::temp_dir().join(format!("msekit-graphs-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("graphs4.txt");
        let _ = fs::remove_file(&path);
        let (g, status) = load_graph_cache(&path, 4, true).unwrap();
        assert_eq!((g.len(), status), (61, CacheStatus::Regenerated));
        assert_eq!(load_graph_cache(&path, 4, true).unwrap().1, CacheStatus::Hit);
        let corrupt = fs::read_to_string(&path).unwrap().replace("count 61", "count 60");
        fs::write(&path, corrupt).unwrap();
        assert_eq!(load_graph_cache(&path, 4, false).unwrap().1, CacheStatus::Regenerated);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn pair_indices_are_dense() {
        let mut seen = BTreeSet::new();
        for i in 0..6 {
            for j in i + 1..6 {
                assert_eq!(pair_index(6, i, j), pair_index(6, j, i));
                seen.insert(pair_index(6, i, j));
            }
        }
        assert_eq!(seen, (0..15).collect());
    }
}
