//! Contact networks: the Moore lattice and its small-world rewiring.
//!
//! Agents are numbered `0..N` in row-major grid order, so agent `row * width
//! + col` sits at `(row, col)`. Edges are undirected and unweighted.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub type AgentId = usize;

/// Dimensions of the agent lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    width: usize,
    height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 3 {
            return Err(Error::config("grid.width", format!("{width} < 3")));
        }
        if height < 3 {
            return Err(Error::config("grid.height", format!("{height} < 3")));
        }
        Ok(GridSpec { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of agents.
    pub fn agents(&self) -> usize {
        self.width * self.height
    }
}

/// Per-edge rewiring probability `P_r` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct RewiringProbability(f64);

impl RewiringProbability {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config("network.p_r", format!("{p} is outside [0, 1]")));
        }
        Ok(RewiringProbability(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Immutable undirected contact structure in compressed sparse row form.
/// Each agent's contact list is sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    offsets: Vec<usize>,
    contacts: Vec<u32>,
}

impl Network {
    fn from_lists(lists: &[Vec<u32>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut contacts = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for list in lists {
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]));
            contacts.extend_from_slice(list);
            offsets.push(contacts.len());
        }
        Network { offsets, contacts }
    }

    fn to_lists(&self) -> Vec<Vec<u32>> {
        (0..self.len()).map(|a| self.contacts(a).to_vec()).collect()
    }

    /// Number of agents.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted contact list of `agent`. Panics when out of range; see
    /// [`Network::degree`] for the checked variant.
    #[inline]
    pub fn contacts(&self, agent: AgentId) -> &[u32] {
        &self.contacts[self.offsets[agent]..self.offsets[agent + 1]]
    }

    /// Number of contacts `V_α`.
    pub fn degree(&self, agent: AgentId) -> Result<usize> {
        if agent >= self.len() {
            return Err(Error::Usage(format!(
                "agent {agent} out of range for {} agents",
                self.len()
            )));
        }
        Ok(self.offsets[agent + 1] - self.offsets[agent])
    }

    pub fn degree_sum(&self) -> usize {
        self.contacts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.contacts.len() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, ordered by `a` then `b`.
    /// This is the canonical order rewiring visits edges in.
    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        (0..self.len()).flat_map(move |a| {
            self.contacts(a)
                .iter()
                .map(|&b| b as usize)
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }

    /// True when every edge is mirrored and no list holds `self` or repeats.
    pub fn is_consistent(&self) -> bool {
        (0..self.len()).all(|a| {
            let list = self.contacts(a);
            list.windows(2).all(|w| w[0] < w[1])
                && list.iter().all(|&b| {
                    let b = b as usize;
                    b != a && b < self.len() && self.contacts(b).binary_search(&(a as u32)).is_ok()
                })
        })
    }

    /// Mean local clustering coefficient. Agents with fewer than two
    /// contacts contribute zero.
    pub fn clustering_coefficient(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for a in 0..self.len() {
            let list = self.contacts(a);
            let k = list.len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            for (i, &b) in list.iter().enumerate() {
                let nb = self.contacts(b as usize);
                links += list[i + 1..]
                    .iter()
                    .filter(|c| nb.binary_search(c).is_ok())
                    .count();
            }
            total += links as f64 / (k * (k - 1) / 2) as f64;
        }
        total / self.len() as f64
    }

    /// Writes the edge list: a `# nodes=N edges=E seed=S p_r=P` header,
    /// then one `a b` line per edge with `a < b` in canonical order.
    pub fn write_edges<W: Write>(&self, mut out: W, seed: u64, p_r: RewiringProbability) -> io::Result<()> {
        writeln!(
            out,
            "# nodes={} edges={} seed={} p_r={}",
            self.len(),
            self.edge_count(),
            seed,
            p_r.value()
        )?;
        for (a, b) in self.edges() {
            writeln!(out, "{a} {b}")?;
        }
        Ok(())
    }
}

/// Regular lattice where each agent touches its eight surrounding cells.
/// Boundaries are open: corners get 3 contacts, other border cells 5.
pub fn build_moore_lattice(grid: GridSpec) -> Network {
    let (w, h) = (grid.width as isize, grid.height as isize);
    let mut lists = Vec::with_capacity(grid.agents());
    for row in 0..h {
        for col in 0..w {
            let mut list = Vec::with_capacity(8);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (r, c) = (row + dr, col + dc);
                    if (dr, dc) == (0, 0) || r < 0 || r >= h || c < 0 || c >= w {
                        continue;
                    }
                    list.push((r * w + c) as u32);
                }
            }
            // row-major scan of the 3x3 block is already ascending
            lists.push(list);
        }
    }
    Network::from_lists(&lists)
}

/// Watts–Strogatz rewiring adapted to an arbitrary starting network.
///
/// Reproducibility contract:
/// * the edges of `net` are visited once each in canonical order (smaller
///   endpoint, then larger), as listed before any rewiring happens;
/// * each visit consumes one uniform draw; the edge is rewired when the
///   draw is below `p_r`;
/// * a rewired edge keeps its smaller endpoint `a` and replaces the other
///   with an agent drawn by `below(N)`, redrawing on self-loops and on
///   contacts `a` already has;
/// * the rewire is skipped (the draw is still consumed) when the dropped
///   endpoint would be left without contacts or `a` is already connected
///   to everyone.
///
/// Edge count and degree sum are preserved exactly.
pub fn rewire(net: &Network, p_r: RewiringProbability, rng: &mut RandomStream) -> Network {
    let p = p_r.value();
    if p == 0.0 {
        return net.clone();
    }
    let n = net.len();
    let original: Vec<(AgentId, AgentId)> = net.edges().collect();
    let mut lists = net.to_lists();

    for (a, b) in original {
        if rng.uniform() >= p {
            continue;
        }
        if lists[b].len() <= 1 || lists[a].len() + 1 >= n {
            continue;
        }
        let target = loop {
            let c = rng.below(n as u64) as usize;
            if c != a && lists[a].binary_search(&(c as u32)).is_err() {
                break c;
            }
        };
        remove_sorted(&mut lists[a], b as u32);
        remove_sorted(&mut lists[b], a as u32);
        insert_sorted(&mut lists[a], target as u32);
        insert_sorted(&mut lists[target], a as u32);
    }
    Network::from_lists(&lists)
}

fn remove_sorted(list: &mut Vec<u32>, value: u32) {
    if let Ok(i) = list.binary_search(&value) {
        list.remove(i);
    }
}

fn insert_sorted(list: &mut Vec<u32>, value: u32) {
    if let Err(i) = list.binary_search(&value) {
        list.insert(i, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;

    fn grid(w: usize, h: usize) -> GridSpec {
        GridSpec::new(w, h).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(GridSpec::new(2, 5), Err(Error::Config { key, .. }) if key == "grid.width"));
        assert!(matches!(GridSpec::new(5, 0), Err(Error::Config { key, .. }) if key == "grid.height"));
        assert!(RewiringProbability::new(1.5).is_err());
        assert!(RewiringProbability::new(-0.1).is_err());
    }

    #[test]
    fn three_by_three_lattice() {
        let net = build_moore_lattice(grid(3, 3));
        assert_eq!(net.degree(4).unwrap(), 8);
        for corner in [0, 2, 6, 8] {
            assert_eq!(net.degree(corner).unwrap(), 3);
        }
        for mid in [1, 3, 5, 7] {
            assert_eq!(net.degree(mid).unwrap(), 5);
        }
        assert_eq!(net.edge_count(), 20);
        assert!(net.is_consistent());
    }

    #[test]
    fn full_size_lattice_has_forty_thousand_agents() {
        let g = grid(200, 200);
        assert_eq!(g.agents(), 40_000);
        let net = build_moore_lattice(g);
        assert_eq!(net.len(), 40_000);
        assert_eq!(net.degree(201).unwrap(), 8);
        assert_eq!(net.degree(0).unwrap(), 3);
        assert_eq!(net.degree(100).unwrap(), 5);
    }

    #[test]
    fn no_wraparound() {
        let net = build_moore_lattice(grid(4, 3));
        // agent 3 is the top-right corner; 0 is top-left
        assert!(!net.contacts(3).contains(&0));
        assert_eq!(net.contacts(3), &[2, 6, 7]);
    }

    #[test]
    fn degree_out_of_range_is_usage_error() {
        let net = build_moore_lattice(grid(3, 3));
        assert!(matches!(net.degree(9), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_probability_is_identity() {
        let net = build_moore_lattice(grid(10, 7));
        let mut rng = RandomStream::new(5, Domain::Rewiring, 0, 0);
        assert_eq!(rewire(&net, RewiringProbability::new(0.0).unwrap(), &mut rng), net);
    }

    #[test]
    fn rewiring_preserves_edges_and_symmetry() {
        let net = build_moore_lattice(grid(30, 30));
        for (seed, p) in [(1, 0.02), (2, 0.3), (3, 1.0)] {
            let mut rng = RandomStream::new(seed, Domain::Rewiring, 0, 0);
            let out = rewire(&net, RewiringProbability::new(p).unwrap(), &mut rng);
            assert_eq!(out.edge_count(), net.edge_count());
            assert_eq!(out.degree_sum(), 2 * out.edge_count());
            assert!(out.is_consistent());
            assert!((0..out.len()).all(|a| out.degree(a).unwrap() >= 1));
        }
    }

    #[test]
    fn rewiring_is_deterministic() {
        let net = build_moore_lattice(grid(20, 20));
        let p = RewiringProbability::new(0.1).unwrap();
        let a = rewire(&net, p, &mut RandomStream::new(9, Domain::Rewiring, 0, 0));
        let b = rewire(&net, p, &mut RandomStream::new(9, Domain::Rewiring, 0, 0));
        let c = rewire(&net, p, &mut RandomStream::new(10, Domain::Rewiring, 0, 0));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn edge_dump_format() {
        let net = build_moore_lattice(grid(3, 3));
        let mut buf = Vec::new();
        net.write_edges(&mut buf, 4, RewiringProbability::new(0.0).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# nodes=9 edges=20 seed=4 p_r=0"));
        assert_eq!(lines.next(), Some("0 1"));
        assert_eq!(text.lines().count(), 21);
        assert!(text.ends_with('\n'));
    }
}
