//! TOML readers and writers for model description files.
//!
//! A DCG file holds the derived graph; a shape file holds per-layer shapes
//! from which a DCG is generated with [`layer_stats`](super::layer_stats).
//! Both carry a mandatory `version` field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dcg::{build_dcg, Dcg, Flow, NeuralLayer};
use super::shape::{LayerKind, LayerShape};
use crate::error::{read_to_string, write_atomic, Error, Result};

pub const DCG_FILE_VERSION: u32 = 1;
pub const SHAPE_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DcgFile {
    version: u32,
    name: String,
    #[serde(default)]
    input_bits: u64,
    #[serde(default)]
    output_bits: u64,
    layers: Vec<LayerEntry>,
    #[serde(default)]
    flows: Vec<FlowEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    id: usize,
    weight_mem_bits: u64,
    mac_ops: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowEntry {
    src: usize,
    dst: usize,
    bits: u64,
}

pub fn dcg_from_str(text: &str, origin: &Path) -> Result<Dcg> {
    let file: DcgFile = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
    if file.version != DCG_FILE_VERSION {
        return Err(Error::parse(
            origin,
            format!("unsupported DCG file version {} (expected {DCG_FILE_VERSION})", file.version),
        ));
    }
    let layers = file
        .layers
        .iter()
        .map(|l| NeuralLayer { id: l.id, weight_bits: l.weight_mem_bits, mac_ops: l.mac_ops })
        .collect();
    let flows = file.flows.iter().map(|f| Flow { src: f.src, dst: f.dst, bits: f.bits }).collect();
    Dcg::new(file.name, layers, flows, file.input_bits, file.output_bits).map_err(|e| Error::parse(origin, e))
}

pub fn dcg_to_string(dcg: &Dcg) -> String {
    let file = DcgFile {
        version: DCG_FILE_VERSION,
        name: dcg.name().to_string(),
        input_bits: dcg.input_bits(),
        output_bits: dcg.output_bits(),
        layers: dcg
            .layers()
            .iter()
            .map(|l| LayerEntry { id: l.id, weight_mem_bits: l.weight_bits, mac_ops: l.mac_ops })
            .collect(),
        flows: dcg.flows().iter().map(|f| FlowEntry { src: f.src, dst: f.dst, bits: f.bits }).collect(),
    };
    toml::to_string(&file).expect("DCG serialization is infallible")
}

pub fn parse_dcg_file(path: &Path) -> Result<Dcg> {
    dcg_from_str(&read_to_string(path)?, path)
}

pub fn write_dcg_file(dcg: &Dcg, path: &Path) -> Result<()> {
    write_atomic(path, dcg_to_string(dcg).as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    version: u32,
    name: String,
    bits_per_weight: u64,
    bits_per_activation: u64,
    input_bits: u64,
    layers: Vec<ShapeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeEntry {
    #[serde(default)]
    name: Option<String>,
    kind: LayerKind,
    cin: u64,
    cout: u64,
    #[serde(default)]
    k: Option<u64>,
    #[serde(default)]
    kh: Option<u64>,
    #[serde(default)]
    kw: Option<u64>,
    #[serde(default)]
    hw: Option<u64>,
    #[serde(default)]
    hout: Option<u64>,
    #[serde(default)]
    wout: Option<u64>,
    /// Producer layers; defaults to the previous layer.
    #[serde(default)]
    inputs: Option<Vec<usize>>,
}

/// Layer shapes and edges loaded from a shape file.
#[derive(Debug, Clone)]
pub struct ModelShapes {
    pub name: String,
    pub shapes: Vec<LayerShape>,
    pub edges: Vec<(usize, usize)>,
    pub input_bits: u64,
}

impl ModelShapes {
    pub fn to_dcg(&self) -> Result<Dcg> {
        build_dcg(&self.name, &self.shapes, &self.edges, self.input_bits)
    }
}

pub fn parse_shape_file(path: &Path) -> Result<ModelShapes> {
    let text = read_to_string(path)?;
    let file: ShapeFile = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if file.version != SHAPE_FILE_VERSION {
        return Err(Error::parse(path, format!("unsupported shape file version {}", file.version)));
    }
    let mut shapes = Vec::with_capacity(file.layers.len());
    let mut edges = Vec::new();
    for (i, l) in file.layers.iter().enumerate() {
        let kh = l.kh.or(l.k).unwrap_or(1);
        let kw = l.kw.or(l.k).unwrap_or(1);
        let hout = l.hout.or(l.hw).unwrap_or(1);
        let wout = l.wout.or(l.hw).unwrap_or(1);
        let shape = LayerShape {
            kind: l.kind,
            cin: l.cin,
            cout: l.cout,
            kh,
            kw,
            hout,
            wout,
            bits_per_weight: file.bits_per_weight,
            bits_per_activation: file.bits_per_activation,
        };
        shape.validate().map_err(|e| {
            Error::parse(path, format!("layer {i} ({}): {e}", l.name.as_deref().unwrap_or("unnamed")))
        })?;
        shapes.push(shape);
        match &l.inputs {
            Some(srcs) => edges.extend(srcs.iter().map(|&s| (s, i))),
            None if i > 0 => edges.push((i - 1, i)),
            None => {}
        }
    }
    Ok(ModelShapes { name: file.name, shapes, edges, input_bits: file.input_bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::LayerShape;
    use proptest::prelude::*;

    fn sample() -> Dcg {
        let shapes = [LayerShape::conv(3, 8, 3, 8, 8, 8), LayerShape::conv(8, 8, 3, 8, 8, 8), LayerShape::fc(512, 10, 8)];
        build_dcg("sample", &shapes, &[(0, 1), (1, 2), (0, 2)], 3 * 8 * 8 * 8).unwrap()
    }

    #[test]
    fn write_then_parse_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        let dcg = sample();
        write_dcg_file(&dcg, &path).unwrap();
        assert_eq!(parse_dcg_file(&path).unwrap(), dcg);
    }

    #[test]
    fn negative_weight_is_parse_error() {
        let text = "version = 1\nname = \"bad\"\n[[layers]]\nid = 0\nweight_mem_bits = -5\nmac_ops = 3\n";
        let err = dcg_from_str(text, Path::new("bad.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn zero_weight_is_parse_error() {
        let text = "version = 1\nname = \"bad\"\n[[layers]]\nid = 0\nweight_mem_bits = 0\nmac_ops = 3\n";
        assert!(matches!(dcg_from_str(text, Path::new("bad.toml")), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_version_rejected() {
        let text = "name = \"bad\"\n[[layers]]\nid = 0\nweight_mem_bits = 1\nmac_ops = 3\n";
        assert!(dcg_from_str(text, Path::new("bad.toml")).is_err());
    }

    proptest! {
        #[test]
        fn random_chains_round_trip(dims in prop::collection::vec(1u64..64, 2..8), skip in any::<bool>()) {
            let shapes: Vec<_> = dims.windows(2).map(|w| LayerShape::fc(w[0], w[1], 8)).collect();
            let mut edges: Vec<_> = (1..shapes.len()).map(|j| (j - 1, j)).collect();
            if skip && shapes.len() > 2 {
                edges.push((0, 2));
            }
            let dcg = build_dcg("chain", &shapes, &edges, dims[0] * 8).unwrap();
            let text = dcg_to_string(&dcg);
            prop_assert_eq!(dcg_from_str(&text, Path::new("mem")).unwrap(), dcg);
        }
    }
}
