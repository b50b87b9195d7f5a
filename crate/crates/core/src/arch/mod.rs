//! Architecture characterization graph: chiplets, their PIM clusters, the
//! network-on-interposer links between them and hop-distance queries.

mod config;
mod file;
mod gen;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{ArchConfig, TopologySpec, TypeProps};
pub use file::{TOPOLOGY_FILE_VERSION, acg_from_topology_str, acg_to_topology_string, load_topology_file, write_topology_file};
pub use gen::{build_hexamesh, build_mesh, ChipletTemplate, GridLayout};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PimType {
    Standard,
    SharedAdc,
    Accumulator,
    AdcLess,
}

impl PimType {
    /// Cluster enumeration order; also the tie-break order everywhere.
    pub const ALL: [PimType; 4] = [PimType::Standard, PimType::SharedAdc, PimType::Accumulator, PimType::AdcLess];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<PimType> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PimType::Standard => "standard",
            PimType::SharedAdc => "shared_adc",
            PimType::Accumulator => "accumulator",
            PimType::AdcLess => "adc_less",
        }
    }
}

impl fmt::Display for PimType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PimType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PimType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown PIM type `{s}`")))
    }
}

/// One value per PIM type, addressable by [`PimType`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerType<T> {
    pub standard: T,
    pub shared_adc: T,
    pub accumulator: T,
    pub adc_less: T,
}

impl<T> PerType<T> {
    pub fn from_fn(mut f: impl FnMut(PimType) -> T) -> Self {
        PerType {
            standard: f(PimType::Standard),
            shared_adc: f(PimType::SharedAdc),
            accumulator: f(PimType::Accumulator),
            adc_less: f(PimType::AdcLess),
        }
    }

    pub fn get(&self, t: PimType) -> &T {
        match t {
            PimType::Standard => &self.standard,
            PimType::SharedAdc => &self.shared_adc,
            PimType::Accumulator => &self.accumulator,
            PimType::AdcLess => &self.adc_less,
        }
    }

    pub fn get_mut(&mut self, t: PimType) -> &mut T {
        match t {
            PimType::Standard => &mut self.standard,
            PimType::SharedAdc => &mut self.shared_adc,
            PimType::Accumulator => &mut self.accumulator,
            PimType::AdcLess => &mut self.adc_less,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (PimType, &T)> {
        PimType::ALL.into_iter().map(move |t| (t, self.get(t)))
    }
}

impl<T> std::ops::Index<PimType> for PerType<T> {
    type Output = T;
    fn index(&self, t: PimType) -> &T {
        self.get(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Compute(PimType),
    Io,
}

impl NodeKind {
    pub fn pim_type(self) -> Option<PimType> {
        match self {
            NodeKind::Compute(t) => Some(t),
            NodeKind::Io => None,
        }
    }
}

pub const DEFAULT_AMBIENT_K: f64 = 298.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Chiplet {
    pub id: usize,
    pub kind: NodeKind,
    pub mem_cap: u64,
    pub mem_avail: u64,
    pub temp: f64,
    pub t_max: f64,
    pub position: (f64, f64),
    pub area: f64,
    pub throttled: bool,
}

impl Chiplet {
    pub fn compute(id: usize, pim: PimType, mem_cap: u64, t_max: f64, position: (f64, f64), area: f64) -> Self {
        Chiplet {
            id,
            kind: NodeKind::Compute(pim),
            mem_cap,
            mem_avail: mem_cap,
            temp: DEFAULT_AMBIENT_K,
            t_max,
            position,
            area,
            throttled: false,
        }
    }

    pub fn io(id: usize, position: (f64, f64), area: f64) -> Self {
        Chiplet {
            id,
            kind: NodeKind::Io,
            mem_cap: 0,
            mem_avail: 0,
            temp: DEFAULT_AMBIENT_K,
            t_max: f64::INFINITY,
            position,
            area,
            throttled: false,
        }
    }

    pub fn pim_type(&self) -> Option<PimType> {
        self.kind.pim_type()
    }

    pub fn is_io(&self) -> bool {
        matches!(self.kind, NodeKind::Io)
    }

    /// Can accept new weights right now.
    pub fn eligible(&self) -> bool {
        !self.is_io() && !self.throttled && self.mem_avail > 0
    }
}

/// Undirected NoI link with optional per-link overrides of the default
/// link profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub latency_s: Option<f64>,
    pub energy_per_bit_j: Option<f64>,
}

impl Link {
    pub fn plain(a: usize, b: usize) -> Self {
        Link { a, b, latency_s: None, energy_per_bit_j: None }
    }
}

const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Acg {
    chiplets: Vec<Chiplet>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(usize, usize)>>,
    hops: Vec<u32>,
    io: Vec<usize>,
    nearest_io: Vec<u32>,
    clusters: PerType<Vec<usize>>,
}

impl Acg {
    pub fn new(chiplets: Vec<Chiplet>, links: Vec<Link>) -> Result<Self> {
        let n = chiplets.len();
        if n == 0 {
            return Err(Error::Topology("architecture has no chiplets".into()));
        }
        for (i, c) in chiplets.iter().enumerate() {
            if c.id != i {
                return Err(Error::Topology(format!("chiplet ids must be consecutive: position {i} has id {}", c.id)));
            }
            if c.mem_avail > c.mem_cap {
                return Err(Error::Topology(format!("chiplet {i} has mem_avail > mem_cap")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, l) in links.iter().enumerate() {
            if l.a >= n || l.b >= n {
                return Err(Error::Topology(format!("link {}-{} references an undeclared node", l.a, l.b)));
            }
            if l.a == l.b {
                return Err(Error::Topology(format!("self-loop on node {}", l.a)));
            }
            if adjacency[l.a].iter().any(|&(v, _)| v == l.b) {
                return Err(Error::Topology(format!("duplicate link {}-{}", l.a, l.b)));
            }
            adjacency[l.a].push((l.b, k));
            adjacency[l.b].push((l.a, k));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let mut hops = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            let row = &mut hops[s * n..(s + 1) * n];
            row[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adjacency[u] {
                    if row[v] == UNREACHABLE {
                        row[v] = row[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        if hops[..n].contains(&UNREACHABLE) {
            return Err(Error::Topology("architecture graph is disconnected".into()));
        }

        let io: Vec<usize> = chiplets.iter().filter(|c| c.is_io()).map(|c| c.id).collect();
        let nearest_io = (0..n)
            .map(|c| io.iter().map(|&i| hops[i * n + c]).min().unwrap_or(0))
            .collect();
        let mut clusters: PerType<Vec<usize>> = PerType::default();
        for c in &chiplets {
            if let Some(t) = c.pim_type() {
                clusters.get_mut(t).push(c.id);
            }
        }
        Ok(Acg { chiplets, links, adjacency, hops, io, nearest_io, clusters })
    }

    pub fn len(&self) -> usize {
        self.chiplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chiplets.is_empty()
    }

    pub fn chiplets(&self) -> &[Chiplet] {
        &self.chiplets
    }

    pub fn chiplet(&self, id: usize) -> &Chiplet {
        &self.chiplets[id]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Neighbors of `id` in ascending id order.
    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[id].iter().map(|&(v, _)| v)
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn io_chiplets(&self) -> &[usize] {
        &self.io
    }

    pub fn cluster_members(&self, t: PimType) -> &[usize] {
        &self.clusters[t]
    }

    pub fn compute_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.chiplets.iter().filter(|c| !c.is_io()).map(|c| c.id)
    }

    /// Minimum hop count between two chiplets.
    pub fn hop_distance(&self, src: usize, dst: usize) -> Result<u32> {
        let n = self.len();
        if src >= n || dst >= n {
            return Err(Error::Topology(format!("no such chiplet pair ({src}, {dst})")));
        }
        match self.hops[src * n + dst] {
            UNREACHABLE => Err(Error::Topology(format!("{dst} unreachable from {src}"))),
            h => Ok(h),
        }
    }

    /// Unchecked hop lookup for hot paths; ids must be valid.
    pub fn hops(&self, src: usize, dst: usize) -> u32 {
        self.hops[src * self.len() + dst]
    }

    /// Hops from `id` to the closest I/O chiplet (0 when there is none).
    pub fn hops_to_io(&self, id: usize) -> u32 {
        self.nearest_io[id]
    }

    /// Closest I/O chiplet to `id`, lowest id on ties.
    pub fn nearest_io(&self, id: usize) -> Option<usize> {
        self.io.iter().copied().min_by_key(|&i| (self.hops(i, id), i))
    }

    /// Shortest path from `src` to `dst`; among equal-length paths the
    /// lexicographically smallest node sequence is returned.
    pub fn route(&self, src: usize, dst: usize) -> Vec<usize> {
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            let want = self.hops(cur, dst) - 1;
            cur = self
                .neighbors(cur)
                .find(|&v| self.hops(v, dst) == want)
                .expect("connected graph always has a next hop");
            path.push(cur);
        }
        path
    }

    /// The link joining two adjacent nodes.
    pub fn link_between(&self, a: usize, b: usize) -> Option<&Link> {
        self.adjacency[a].iter().find(|&&(v, _)| v == b).map(|&(_, k)| &self.links[k])
    }

    pub fn mem_avail(&self) -> Vec<u64> {
        self.chiplets.iter().map(|c| c.mem_avail).collect()
    }

    pub fn total_mem_avail(&self) -> u64 {
        self.chiplets.iter().map(|c| c.mem_avail).sum()
    }

    pub fn total_mem_cap(&self) -> u64 {
        self.chiplets.iter().map(|c| c.mem_cap).sum()
    }

    pub fn reserve(&mut self, id: usize, bits: u64) -> Result<()> {
        let c = self
            .chiplets
            .get_mut(id)
            .ok_or_else(|| Error::Invariant(format!("placement on unknown chiplet {id}")))?;
        if c.is_io() {
            return Err(Error::Invariant(format!("placement on I/O chiplet {id}")));
        }
        if bits > c.mem_avail {
            return Err(Error::Invariant(format!(
                "chiplet {id} over-allocated: {bits} bits requested, {} available",
                c.mem_avail
            )));
        }
        c.mem_avail -= bits;
        Ok(())
    }

    pub fn release(&mut self, id: usize, bits: u64) -> Result<()> {
        let c = &mut self.chiplets[id];
        if c.mem_avail + bits > c.mem_cap {
            return Err(Error::Invariant(format!("chiplet {id} released more memory than it held")));
        }
        c.mem_avail += bits;
        Ok(())
    }

    pub fn set_temperature(&mut self, id: usize, temp: f64) {
        self.chiplets[id].temp = temp;
    }

    pub fn set_throttled(&mut self, id: usize, throttled: bool) {
        self.chiplets[id].throttled = throttled;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub members: Vec<usize>,
    pub total_mem_avail: u64,
    pub total_mem_cap: u64,
    /// `None` for a cluster with no chiplets.
    pub max_temp: Option<f64>,
}

/// Per-cluster aggregates of chiplet state. Throttled chiplets are included.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterView {
    pub clusters: PerType<ClusterStats>,
}

impl ClusterView {
    pub fn get(&self, t: PimType) -> &ClusterStats {
        &self.clusters[t]
    }
}

pub fn cluster_view(acg: &Acg) -> ClusterView {
    cluster_view_with(acg, &acg.mem_avail())
}

/// Cluster view with memory availability taken from `avail` instead of the
/// chiplets themselves (used while a layer placement is still tentative).
pub fn cluster_view_with(acg: &Acg, avail: &[u64]) -> ClusterView {
    let clusters = PerType::from_fn(|t| {
        let members = acg.cluster_members(t).to_vec();
        ClusterStats {
            total_mem_avail: members.iter().map(|&i| avail[i]).sum(),
            total_mem_cap: members.iter().map(|&i| acg.chiplet(i).mem_cap).sum(),
            max_temp: members.iter().map(|&i| acg.chiplet(i).temp).reduce(f64::max),
            members,
        }
    });
    ClusterView { clusters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn line(n: usize) -> Acg {
        let chiplets = (0..n).map(|i| Chiplet::compute(i, PimType::Standard, 100, 330.0, (i as f64, 0.0), 4.0)).collect();
        let links = (1..n).map(|i| Link::plain(i - 1, i)).collect();
        Acg::new(chiplets, links).unwrap()
    }

    /// Shortest simple path length by enumerating every simple path.
    fn exhaustive_hops(adj: &[Vec<usize>], s: usize, t: usize) -> Option<u32> {
        fn dfs(adj: &[Vec<usize>], u: usize, t: usize, seen: &mut Vec<bool>, depth: u32, best: &mut Option<u32>) {
            if u == t {
                *best = Some(best.map_or(depth, |b| b.min(depth)));
                return;
            }
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    dfs(adj, v, t, seen, depth + 1, best);
                    seen[v] = false;
                }
            }
        }
        let mut seen = vec![false; adj.len()];
        seen[s] = true;
        let mut best = None;
        dfs(adj, s, t, &mut seen, 0, &mut best);
        best
    }

    fn random_connected(n: usize, extra: &[(usize, usize)]) -> (Vec<Chiplet>, Vec<Link>) {
        let chiplets = (0..n).map(|i| Chiplet::compute(i, PimType::ALL[i % 4], 10, 330.0, (0.0, 0.0), 1.0)).collect();
        // spanning path guarantees connectivity, extras add cycles
        let mut links: Vec<Link> = (1..n).map(|i| Link::plain(i - 1, i)).collect();
        for &(a, b) in extra {
            let (a, b) = (a % n, b % n);
            if a != b && !links.iter().any(|l| (l.a, l.b) == (a, b) || (l.a, l.b) == (b, a)) {
                links.push(Link::plain(a, b));
            }
        }
        (chiplets, links)
    }

    proptest! {
        #[test]
        fn hops_match_path_enumeration(n in 2usize..=10, extra in prop::collection::vec((0usize..10, 0usize..10), 0..12)) {
            let (chiplets, links) = random_connected(n, &extra);
            let acg = Acg::new(chiplets, links).unwrap();
            let adj: Vec<Vec<usize>> = (0..n).map(|i| acg.neighbors(i).collect()).collect();
            for s in 0..n {
                for t in 0..n {
                    let h = acg.hop_distance(s, t).unwrap();
                    prop_assert_eq!(Some(h), exhaustive_hops(&adj, s, t));
                    prop_assert_eq!(h, acg.hop_distance(t, s).unwrap());
                    prop_assert_eq!(acg.route(s, t).len() as u32, h + 1);
                    for m in 0..n {
                        prop_assert!(h <= acg.hops(s, m) + acg.hops(m, t));
                    }
                }
            }
        }
    }

    #[test]
    fn same_chiplet_zero_hops() {
        let acg = line(3);
        assert_eq!(acg.hop_distance(1, 1).unwrap(), 0);
        assert!(acg.hop_distance(0, 9).is_err());
    }

    #[test]
    fn disconnected_rejected() {
        let chiplets = (0..3).map(|i| Chiplet::compute(i, PimType::Standard, 1, 330.0, (0.0, 0.0), 1.0)).collect();
        assert!(matches!(Acg::new(chiplets, vec![Link::plain(0, 1)]), Err(Error::Topology(_))));
    }

    #[test]
    fn route_prefers_lowest_ids() {
        // square 0-1, 0-2, 1-3, 2-3: both 0->1->3 and 0->2->3 are shortest
        let chiplets = (0..4).map(|i| Chiplet::compute(i, PimType::Standard, 1, 330.0, (0.0, 0.0), 1.0)).collect();
        let links = vec![Link::plain(0, 2), Link::plain(0, 1), Link::plain(1, 3), Link::plain(2, 3)];
        let acg = Acg::new(chiplets, links).unwrap();
        assert_eq!(acg.route(0, 3), vec![0, 1, 3]);
        assert_eq!(acg.route(3, 0), vec![3, 1, 0]);
    }

    #[test]
    fn cluster_view_aggregates() {
        let mut chiplets: Vec<Chiplet> = (0..4)
            .map(|i| Chiplet::compute(i, if i < 2 { PimType::Standard } else { PimType::AdcLess }, 5000, 330.0, (0.0, 0.0), 1.0))
            .collect();
        chiplets.iter_mut().for_each(|c| c.temp = 300.0);
        chiplets[1].temp = 331.0;
        let links = (1..4).map(|i| Link::plain(i - 1, i)).collect();
        let mut acg = Acg::new(chiplets, links).unwrap();
        let v = cluster_view(&acg);
        assert_eq!(v.get(PimType::Standard).total_mem_avail, 10_000);
        assert_eq!(v.get(PimType::Standard).total_mem_avail, v.get(PimType::Standard).total_mem_cap);
        assert_eq!(v.get(PimType::Standard).max_temp, Some(331.0));
        assert_eq!(v.get(PimType::AdcLess).max_temp, Some(300.0));
        assert_eq!(v.get(PimType::SharedAdc).max_temp, None);

        acg.reserve(2, 1000).unwrap();
        acg.set_throttled(2, true);
        let after = cluster_view(&acg);
        assert_eq!(v.get(PimType::AdcLess).total_mem_avail - after.get(PimType::AdcLess).total_mem_avail, 1000);
        assert!(acg.reserve(3, 6000).is_err());
        acg.release(2, 1000).unwrap();
        assert_eq!(acg.total_mem_avail(), acg.total_mem_cap());
        assert!(acg.release(2, 1).is_err());
    }
}
