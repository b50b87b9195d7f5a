use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gen::{build_hexamesh, build_mesh, ChipletTemplate, GridLayout};
use super::{file::load_topology_file, Acg, PerType, PimType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeProps {
    pub count: usize,
    pub mem_kb: u64,
    pub area_mm2: f64,
    pub t_max_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Mesh { rows: usize, cols: usize },
    Hexamesh { rows: usize, cols: usize },
    /// Adjacency file; relative paths resolve against the config file.
    File { path: PathBuf },
}

/// Chiplet mix, per-type properties and interposer layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    #[serde(default = "default_kb_bits")]
    pub kb_bits: u64,
    #[serde(default = "default_pitch")]
    pub pitch_mm: f64,
    #[serde(default = "default_io_per_side")]
    pub io_per_side: usize,
    #[serde(default = "default_io_area")]
    pub io_area_mm2: f64,
    #[serde(default = "default_block_order")]
    pub block_order: Vec<PimType>,
    #[serde(default = "default_topology")]
    pub topology: TopologySpec,
    #[serde(default = "default_types")]
    pub types: PerType<TypeProps>,
}

fn default_kb_bits() -> u64 {
    1024
}
fn default_pitch() -> f64 {
    3.5
}
fn default_io_per_side() -> usize {
    1
}
fn default_io_area() -> f64 {
    4.0
}
fn default_block_order() -> Vec<PimType> {
    PimType::ALL.to_vec()
}

fn default_topology() -> TopologySpec {
    TopologySpec::Mesh { rows: 9, cols: 10 }
}
fn default_types() -> PerType<TypeProps> {
    let props = |count, mem_kb, area_mm2, t_max_k| TypeProps { count, mem_kb, area_mm2, t_max_k };
    PerType {
        standard: props(25, 9568, 4.0, 330.0),
        shared_adc: props(28, 9792, 9.0, 358.0),
        accumulator: props(10, 19200, 4.0, 330.0),
        adc_less: props(15, 2416, 4.0, 358.0),
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            kb_bits: default_kb_bits(),
            pitch_mm: default_pitch(),
            io_per_side: default_io_per_side(),
            io_area_mm2: default_io_area(),
            block_order: default_block_order(),
            topology: default_topology(),
            types: default_types(),
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let mut order = self.block_order.clone();
        order.sort();
        if order != PimType::ALL {
            return Err(Error::Config("block_order must list every PIM type exactly once".into()));
        }
        for (t, p) in self.types.iter() {
            if p.mem_kb == 0 || !(p.area_mm2 > 0.0) || !(p.t_max_k > 0.0) {
                return Err(Error::Config(format!("{t}: memory, area and t_max must be positive")));
            }
        }
        if self.kb_bits == 0 {
            return Err(Error::Config("kb_bits must be positive".into()));
        }
        Ok(())
    }

    pub fn templates(&self) -> PerType<ChipletTemplate> {
        PerType::from_fn(|t| {
            let p = self.types[t];
            ChipletTemplate { mem_bits: p.mem_kb * self.kb_bits, area_mm2: p.area_mm2, t_max_k: p.t_max_k }
        })
    }

    pub fn compute_count(&self) -> usize {
        self.types.iter().map(|(_, p)| p.count).sum()
    }

    /// Builds the ACG. `base_dir` resolves relative topology file paths.
    pub fn build_acg(&self, base_dir: &Path) -> Result<Acg> {
        self.validate()?;
        let placement: Vec<(PimType, usize)> = self.block_order.iter().map(|&t| (t, self.types[t].count)).collect();
        let layout = |rows, cols| GridLayout {
            rows,
            cols,
            pitch_mm: self.pitch_mm,
            io_per_side: self.io_per_side,
            io_area_mm2: self.io_area_mm2,
        };
        match &self.topology {
            TopologySpec::Mesh { rows, cols } => build_mesh(&layout(*rows, *cols), &placement, &self.templates()),
            TopologySpec::Hexamesh { rows, cols } => build_hexamesh(&layout(*rows, *cols), &placement, &self.templates()),
            TopologySpec::File { path } => load_topology_file(&base_dir.join(path), &self.templates()),
        }
    }
}
