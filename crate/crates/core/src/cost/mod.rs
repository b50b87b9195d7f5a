//! Parametric compute and communication costs.
//!
//! Compute cost is linear in MAC count with per-PIM-type constants; link
//! transfers pay a per-hop energy per bit, a fixed per-hop latency and one
//! serialization delay at the link width. Links are contention-free.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{Acg, PerType, PimType};
use crate::error::{read_to_string, Error, Result};

pub const COST_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PimCostProfile {
    /// Effective seconds per MAC, amortized over crossbar parallelism.
    pub mac_latency_s: f64,
    pub mac_energy_j: f64,
    pub leakage_w: f64,
    pub peak_dynamic_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    pub width_bits: u64,
    pub energy_pj_per_bit_per_hop: f64,
    pub clock_hz: f64,
    pub per_hop_latency_s: f64,
}

impl Default for LinkProfile {
    fn default() -> Self {
        LinkProfile { width_bits: 64, energy_pj_per_bit_per_hop: 0.5, clock_hz: 1e9, per_hop_latency_s: 1e-9 }
    }
}

impl LinkProfile {
    pub fn energy_per_bit_j(&self) -> f64 {
        self.energy_pj_per_bit_per_hop * 1e-12
    }

    pub fn serialization_s(&self, bits: u64) -> f64 {
        bits.div_ceil(self.width_bits) as f64 / self.clock_hz
    }
}

/// Calibration file contents: one profile per PIM type plus the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default)]
    pub link: LinkProfile,
    pub pim: PerType<PimCostProfile>,
}

fn version() -> u32 {
    COST_FILE_VERSION
}

impl Default for CostModel {
    fn default() -> Self {
        let p = |mac_latency_s, mac_energy_j, leakage_w, peak_dynamic_w| PimCostProfile {
            mac_latency_s,
            mac_energy_j,
            leakage_w,
            peak_dynamic_w,
        };
        CostModel {
            version: COST_FILE_VERSION,
            link: LinkProfile::default(),
            pim: PerType {
                standard: p(2.0e-13, 1.0e-12, 0.10, 8.0),
                shared_adc: p(1.0e-13, 1.2e-12, 0.30, 15.0),
                accumulator: p(3.0e-13, 0.8e-12, 0.10, 6.0),
                adc_less: p(2.5e-13, 0.5e-12, 0.15, 5.0),
            },
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != COST_FILE_VERSION {
            return Err(Error::Config(format!("unsupported cost file version {}", self.version)));
        }
        for (t, p) in self.pim.iter() {
            let fields = [p.mac_latency_s, p.mac_energy_j, p.leakage_w, p.peak_dynamic_w];
            if !fields.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(Error::Config(format!("{t}: cost profile values must be finite and positive")));
            }
        }
        for (i, a) in PimType::ALL.iter().enumerate() {
            for b in &PimType::ALL[i + 1..] {
                if self.pim[*a] == self.pim[*b] {
                    return Err(Error::Config(format!("{a} and {b} have identical cost profiles")));
                }
            }
        }
        let l = &self.link;
        if l.width_bits == 0 || !(l.clock_hz > 0.0) || !(l.energy_pj_per_bit_per_hop >= 0.0) || !(l.per_hop_latency_s >= 0.0) {
            return Err(Error::Config("link profile needs width >= 1, clock > 0 and non-negative costs".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let model: CostModel = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }

    pub fn profile(&self, t: PimType) -> &PimCostProfile {
        &self.pim[t]
    }
}

/// `(latency, energy)` of `mac_ops` MACs on one chiplet of type `t`.
pub fn compute_cost(mac_ops: f64, t: PimType, model: &CostModel) -> (f64, f64) {
    let p = model.profile(t);
    (mac_ops * p.mac_latency_s, mac_ops * p.mac_energy_j)
}

/// `(latency, energy)` of moving `bits` over `hops` uniform links.
pub fn comm_cost(bits: u64, hops: u32, link: &LinkProfile) -> (f64, f64) {
    if hops == 0 || bits == 0 {
        return (0.0, 0.0);
    }
    let latency = hops as f64 * link.per_hop_latency_s + link.serialization_s(bits);
    let energy = bits as f64 * link.energy_per_bit_j() * hops as f64;
    (latency, energy)
}

pub fn leakage_energy(t: PimType, dt: f64, model: &CostModel) -> f64 {
    model.profile(t).leakage_w * dt
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PathCost {
    hops: u32,
    latency_s: f64,
    energy_per_bit_j: f64,
}

/// Per-pair route costs along the deterministic shortest path, honoring
/// per-link overrides.
#[derive(Debug, Clone)]
pub struct CommTable {
    n: usize,
    paths: Vec<PathCost>,
    link: LinkProfile,
}

impl CommTable {
    pub fn new(acg: &Acg, link: &LinkProfile) -> Self {
        let n = acg.len();
        let mut paths = vec![PathCost::default(); n * n];
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                let route = acg.route(s, d);
                let mut pc = PathCost { hops: (route.len() - 1) as u32, ..PathCost::default() };
                for w in route.windows(2) {
                    let l = acg.link_between(w[0], w[1]).expect("route follows links");
                    pc.latency_s += l.latency_s.unwrap_or(link.per_hop_latency_s);
                    pc.energy_per_bit_j += l.energy_per_bit_j.unwrap_or(link.energy_per_bit_j());
                }
                paths[s * n + d] = pc;
            }
        }
        CommTable { n, paths, link: *link }
    }

    pub fn hops(&self, src: usize, dst: usize) -> u32 {
        self.paths[src * self.n + dst].hops
    }

    /// `(latency, energy)` of one transfer of `bits` from `src` to `dst`.
    pub fn cost(&self, bits: u64, src: usize, dst: usize) -> (f64, f64) {
        let p = &self.paths[src * self.n + dst];
        if p.hops == 0 || bits == 0 {
            return (0.0, 0.0);
        }
        (p.latency_s + self.link.serialization_s(bits), bits as f64 * p.energy_per_bit_j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_mesh, ChipletTemplate, GridLayout, Link};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-30)
    }

    #[test]
    fn compute_cost_examples() {
        let mut m = CostModel::default();
        assert_eq!(compute_cost(0.0, PimType::Standard, &m), (0.0, 0.0));
        m.pim.standard.mac_latency_s = 1e-9;
        m.pim.standard.mac_energy_j = 1e-12;
        let (l, e) = compute_cost(1e6, PimType::Standard, &m);
        assert!(close(l, 1e-3) && close(e, 1e-6));
        m.pim.adc_less.mac_energy_j = 2e-12;
        let (_, e2) = compute_cost(1e6, PimType::AdcLess, &m);
        assert_eq!(e2 / e, 2.0);
    }

    #[test]
    fn comm_cost_examples() {
        let link = LinkProfile::default();
        let (_, e) = comm_cost(1000, 3, &link);
        assert!(close(e, 1.5e-9));
        assert_eq!(comm_cost(1000, 0, &link), (0.0, 0.0));
        let (l, _) = comm_cost(64, 1, &link);
        assert!(close(l, 2e-9));
        // 65 bits need two flits
        assert!(close(comm_cost(65, 1, &link).0, 3e-9));
    }

    #[test]
    fn leakage_linear() {
        let mut m = CostModel::default();
        m.pim.standard.leakage_w = 1.0;
        assert_eq!(leakage_energy(PimType::Standard, 0.0, &m), 0.0);
        assert!(close(leakage_energy(PimType::Standard, 0.1, &m), 0.1));
    }

    #[test]
    fn default_calibration_orderings() {
        let m = CostModel::default();
        m.validate().unwrap();
        let min_by = |f: fn(&PimCostProfile) -> f64| {
            PimType::ALL.into_iter().min_by(|a, b| f(m.profile(*a)).total_cmp(&f(m.profile(*b)))).unwrap()
        };
        assert_eq!(min_by(|p| p.mac_energy_j), PimType::AdcLess);
        assert_eq!(min_by(|p| p.mac_latency_s), PimType::SharedAdc);
    }

    #[test]
    fn identical_profiles_rejected() {
        let mut m = CostModel::default();
        m.pim.accumulator = m.pim.standard;
        assert!(matches!(m.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn comm_table_matches_uniform_formula_and_overrides() {
        let tpl = PerType::from_fn(|_| ChipletTemplate { mem_bits: 1, area_mm2: 4.0, t_max_k: 330.0 });
        let acg = build_mesh(&GridLayout::new(3, 3), &[(PimType::Standard, 9)], &tpl).unwrap();
        let link = LinkProfile::default();
        let table = CommTable::new(&acg, &link);
        for s in 0..9 {
            for d in 0..9 {
                let (l, e) = table.cost(1000, s, d);
                let (l2, e2) = comm_cost(1000, acg.hops(s, d), &link);
                assert!(close(l, l2) && close(e, e2), "{s}->{d}");
            }
        }

        let chiplets = acg.chiplets().to_vec();
        let mut links: Vec<Link> = acg.links().to_vec();
        links[0].energy_per_bit_j = Some(2e-12);
        let acg2 = Acg::new(chiplets, links.clone()).unwrap();
        let t2 = CommTable::new(&acg2, &link);
        let (a, b) = (links[0].a, links[0].b);
        assert!(close(t2.cost(10, a, b).1, 20e-12));
    }

    #[test]
    fn toml_round_trip() {
        let m = CostModel::default();
        let text = toml::to_string(&m).unwrap();
        assert_eq!(CostModel::from_toml(&text, Path::new("x")).unwrap(), m);
    }
}
