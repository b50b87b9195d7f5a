//! Topology files: explicit node lists with positions plus an edge list
//! with optional per-link overrides.
//!
//! ```toml
//! version = 1
//! [[nodes]]
//! id = 0
//! pim_type = "standard"   # or "io"
//! x_mm = 0.0
//! y_mm = 0.0
//! area_mm2 = 4.0
//! # mem_bits and t_max_k override the per-type defaults when present
//! [[edges]]
//! a = 0
//! b = 1
//! latency_s = 1e-9          # optional
//! energy_pj_per_bit = 0.5   # optional
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gen::ChipletTemplate;
use super::{Acg, Chiplet, Link, NodeKind, PerType, PimType};
use crate::error::{read_to_string, write_atomic, Error, Result};

pub const TOPOLOGY_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    version: u32,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: usize,
    pim_type: String,
    x_mm: f64,
    y_mm: f64,
    area_mm2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mem_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_max_k: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    a: usize,
    b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latency_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy_pj_per_bit: Option<f64>,
}

pub fn acg_from_topology_str(text: &str, origin: &Path, templates: &PerType<ChipletTemplate>) -> Result<Acg> {
    let mut file: TopologyFile = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
    if file.version != TOPOLOGY_FILE_VERSION {
        return Err(Error::parse(origin, format!("unsupported topology file version {}", file.version)));
    }
    file.nodes.sort_by_key(|n| n.id);
    let mut chiplets = Vec::with_capacity(file.nodes.len());
    for (i, n) in file.nodes.iter().enumerate() {
        if n.id != i {
            return Err(Error::Topology(format!("node ids must be 0..{} without gaps or duplicates", file.nodes.len())));
        }
        if !(n.area_mm2 > 0.0) {
            return Err(Error::Topology(format!("node {i} has non-positive area")));
        }
        let pos = (n.x_mm, n.y_mm);
        let chiplet = if n.pim_type == "io" {
            Chiplet::io(i, pos, n.area_mm2)
        } else {
            let t: PimType = n.pim_type.parse()?;
            let tpl = templates[t];
            Chiplet::compute(i, t, n.mem_bits.unwrap_or(tpl.mem_bits), n.t_max_k.unwrap_or(tpl.t_max_k), pos, n.area_mm2)
        };
        chiplets.push(chiplet);
    }
    let links = file
        .edges
        .iter()
        .map(|e| {
            if e.latency_s.is_some_and(|v| !(v >= 0.0)) || e.energy_pj_per_bit.is_some_and(|v| !(v >= 0.0)) {
                return Err(Error::Topology(format!("edge {}-{} has a negative override", e.a, e.b)));
            }
            Ok(Link { a: e.a, b: e.b, latency_s: e.latency_s, energy_per_bit_j: e.energy_pj_per_bit.map(|pj| pj * 1e-12) })
        })
        .collect::<Result<Vec<_>>>()?;
    Acg::new(chiplets, links)
}

pub fn acg_to_topology_string(acg: &Acg) -> String {
    let nodes = acg
        .chiplets()
        .iter()
        .map(|c| NodeEntry {
            id: c.id,
            pim_type: match c.kind {
                NodeKind::Io => "io".to_string(),
                NodeKind::Compute(t) => t.to_string(),
            },
            x_mm: c.position.0,
            y_mm: c.position.1,
            area_mm2: c.area,
            mem_bits: (!c.is_io()).then_some(c.mem_cap),
            t_max_k: (!c.is_io()).then_some(c.t_max),
        })
        .collect();
    let edges = acg
        .links()
        .iter()
        .map(|l| EdgeEntry {
            a: l.a,
            b: l.b,
            latency_s: l.latency_s,
            energy_pj_per_bit: l.energy_per_bit_j.map(|j| j * 1e12),
        })
        .collect();
    let file = TopologyFile { version: TOPOLOGY_FILE_VERSION, nodes, edges };
    toml::to_string(&file).expect("topology serialization is infallible")
}

pub fn load_topology_file(path: &Path, templates: &PerType<ChipletTemplate>) -> Result<Acg> {
    acg_from_topology_str(&read_to_string(path)?, path, templates)
}

pub fn write_topology_file(acg: &Acg, path: &Path) -> Result<()> {
    write_atomic(path, acg_to_topology_string(acg).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_hexamesh, GridLayout};

    fn tpl() -> PerType<ChipletTemplate> {
        PerType::from_fn(|_| ChipletTemplate { mem_bits: 64, area_mm2: 4.0, t_max_k: 330.0 })
    }

    fn adjacency(acg: &Acg) -> Vec<Vec<usize>> {
        (0..acg.len()).map(|i| acg.neighbors(i).collect()).collect()
    }

    #[test]
    fn round_trip_preserves_adjacency() {
        let mut layout = GridLayout::new(4, 4);
        layout.io_per_side = 1;
        let acg = build_hexamesh(&layout, &[(PimType::Standard, 6), (PimType::AdcLess, 6)], &tpl()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.toml");
        write_topology_file(&acg, &path).unwrap();
        let back = load_topology_file(&path, &tpl()).unwrap();
        assert_eq!(adjacency(&back), adjacency(&acg));
        assert_eq!(back.chiplets(), acg.chiplets());
    }

    #[test]
    fn link_overrides_survive() {
        let text = r#"
version = 1
nodes = [
  { id = 0, pim_type = "io", x_mm = 0.0, y_mm = 0.0, area_mm2 = 4.0 },
  { id = 1, pim_type = "shared_adc", x_mm = 3.5, y_mm = 0.0, area_mm2 = 9.0 },
]
edges = [{ a = 0, b = 1, latency_s = 2e-9, energy_pj_per_bit = 0.25 }]
"#;
        let acg = acg_from_topology_str(text, Path::new("x"), &tpl()).unwrap();
        let l = acg.link_between(1, 0).unwrap();
        assert_eq!(l.latency_s, Some(2e-9));
        assert!((l.energy_per_bit_j.unwrap() - 0.25e-12).abs() < 1e-24);
        assert_eq!(acg.chiplet(1).mem_cap, 64);
    }

    #[test]
    fn undeclared_node_is_topology_error() {
        let text = r#"
version = 1
nodes = [{ id = 0, pim_type = "standard", x_mm = 0.0, y_mm = 0.0, area_mm2 = 4.0 }]
edges = [{ a = 0, b = 5 }]
"#;
        assert!(matches!(acg_from_topology_str(text, Path::new("x"), &tpl()), Err(Error::Topology(_))));
    }

    #[test]
    fn disconnected_file_is_topology_error() {
        let text = r#"
version = 1
nodes = [
  { id = 0, pim_type = "standard", x_mm = 0.0, y_mm = 0.0, area_mm2 = 4.0 },
  { id = 1, pim_type = "standard", x_mm = 5.0, y_mm = 0.0, area_mm2 = 4.0 },
]
"#;
        assert!(matches!(acg_from_topology_str(text, Path::new("x"), &tpl()), Err(Error::Topology(_))));
    }
}
