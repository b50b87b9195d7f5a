use serde::{Deserialize, Serialize};

use super::shape::{layer_stats, LayerShape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuralLayer {
    pub id: usize,
    pub weight_bits: u64,
    pub mac_ops: u64,
}

/// Activation volume from layer `src` to layer `dst`, in bits per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Flow {
    pub src: usize,
    pub dst: usize,
    pub bits: u64,
}

/// Workload characterization graph: layers in topological order plus the
/// sparse activation-flow matrix between them.
///
/// `input_bits` is the per-frame input delivered to layer 0 by the host and
/// `output_bits` the per-frame result returned from the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dcg {
    name: String,
    layers: Vec<NeuralLayer>,
    flows: Vec<Flow>,
    input_bits: u64,
    output_bits: u64,
    incoming: Vec<Vec<usize>>,
    // suffix sums from layer i to the end
    rem_weight: Vec<u64>,
    rem_macs: Vec<u64>,
    rem_act: Vec<u64>,
}

impl Dcg {
    pub fn new(
        name: impl Into<String>,
        layers: Vec<NeuralLayer>,
        mut flows: Vec<Flow>,
        input_bits: u64,
        output_bits: u64,
    ) -> Result<Self> {
        let name = name.into();
        if layers.is_empty() {
            return Err(Error::Graph(format!("model `{name}` has no layers")));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.id != i {
                return Err(Error::Graph(format!("layer ids must be consecutive: position {i} has id {}", l.id)));
            }
            if l.weight_bits == 0 || l.mac_ops == 0 {
                return Err(Error::Validation(format!(
                    "layer {i} must have weight_mem > 0 and mac_ops > 0"
                )));
            }
        }
        let n = layers.len();
        flows.sort();
        for w in flows.windows(2) {
            if (w[0].src, w[0].dst) == (w[1].src, w[1].dst) {
                return Err(Error::Graph(format!("duplicate flow {} -> {}", w[0].src, w[0].dst)));
            }
        }
        let mut incoming = vec![Vec::new(); n];
        let mut has_out = vec![false; n];
        for (k, f) in flows.iter().enumerate() {
            if f.dst >= n || f.src >= n {
                return Err(Error::Graph(format!("flow {} -> {} references a missing layer", f.src, f.dst)));
            }
            if f.src >= f.dst {
                return Err(Error::Graph(format!(
                    "flow {} -> {} violates topological order (needs src < dst)",
                    f.src, f.dst
                )));
            }
            if f.bits == 0 {
                return Err(Error::Validation(format!("flow {} -> {} carries zero bits", f.src, f.dst)));
            }
            incoming[f.dst].push(k);
            has_out[f.src] = true;
        }
        for (i, inc) in incoming.iter().enumerate().skip(1) {
            if inc.is_empty() {
                return Err(Error::Graph(format!("layer {i} has no incoming flow")));
            }
        }
        for (i, out) in has_out.iter().enumerate().take(n - 1) {
            if !out {
                return Err(Error::Graph(format!("layer {i} has no outgoing flow")));
            }
        }

        let mut rem_weight = vec![0u64; n + 1];
        let mut rem_macs = vec![0u64; n + 1];
        let mut rem_act = vec![0u64; n + 1];
        for i in (0..n).rev() {
            let inbound: u64 = incoming[i].iter().map(|&k| flows[k].bits).sum();
            rem_weight[i] = rem_weight[i + 1] + layers[i].weight_bits;
            rem_macs[i] = rem_macs[i + 1] + layers[i].mac_ops;
            rem_act[i] = rem_act[i + 1] + inbound;
        }

        Ok(Dcg { name, layers, flows, input_bits, output_bits, incoming, rem_weight, rem_macs, rem_act })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[NeuralLayer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &NeuralLayer {
        &self.layers[i]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// All flows, sorted by `(src, dst)`.
    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flow(&self, src: usize, dst: usize) -> u64 {
        self.flows
            .binary_search_by(|f| (f.src, f.dst).cmp(&(src, dst)))
            .map(|k| self.flows[k].bits)
            .unwrap_or(0)
    }

    pub fn incoming(&self, dst: usize) -> impl Iterator<Item = &Flow> + '_ {
        self.incoming[dst].iter().map(move |&k| &self.flows[k])
    }

    /// Σ_k f_kj for layer `j`.
    pub fn incoming_bits(&self, j: usize) -> u64 {
        self.incoming(j).map(|f| f.bits).sum()
    }

    pub fn input_bits(&self) -> u64 {
        self.input_bits
    }

    pub fn output_bits(&self) -> u64 {
        self.output_bits
    }

    pub fn total_weight_bits(&self) -> u64 {
        self.rem_weight[0]
    }

    pub fn total_mac_ops(&self) -> u64 {
        self.rem_macs[0]
    }

    pub fn remaining_weight_bits(&self, from: usize) -> u64 {
        self.rem_weight[from.min(self.len())]
    }

    pub fn remaining_mac_ops(&self, from: usize) -> u64 {
        self.rem_macs[from.min(self.len())]
    }

    /// Σ_k Σ_{j >= from} f_kj.
    pub fn remaining_activation_bits(&self, from: usize) -> u64 {
        self.rem_act[from.min(self.len())]
    }
}

/// Builds a DCG from layer shapes; each edge `(i, j)` carries the full
/// output activation volume of layer `i`.
pub fn build_dcg(name: &str, shapes: &[LayerShape], edges: &[(usize, usize)], input_bits: u64) -> Result<Dcg> {
    let stats = shapes.iter().map(layer_stats).collect::<Result<Vec<_>>>()?;
    let layers = stats
        .iter()
        .enumerate()
        .map(|(id, s)| NeuralLayer { id, weight_bits: s.weight_bits, mac_ops: s.mac_ops })
        .collect();
    let mut flows = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        if i >= shapes.len() || j >= shapes.len() {
            return Err(Error::Graph(format!("edge ({i}, {j}) references a missing layer")));
        }
        if i >= j {
            return Err(Error::Graph(format!("edge ({i}, {j}) is not a forward edge in topological order")));
        }
        flows.push(Flow { src: i, dst: j, bits: stats[i].out_activation_bits });
    }
    let output_bits = stats.last().map(|s| s.out_activation_bits).unwrap_or(0);
    Dcg::new(name, layers, flows, input_bits, output_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_two_fc() {
        let shapes = [LayerShape::fc(16, 8, 8), LayerShape::fc(8, 4, 8)];
        let dcg = build_dcg("mlp", &shapes, &[(0, 1)], 128).unwrap();
        assert_eq!(dcg.flows().len(), 1);
        assert_eq!(dcg.flow(0, 1), 8 * 8);
        assert_eq!(dcg.output_bits(), 4 * 8);
    }

    #[test]
    fn skip_edge_sums_inputs() {
        let shapes = [LayerShape::fc(16, 8, 8), LayerShape::fc(8, 4, 8), LayerShape::fc(12, 2, 8)];
        let dcg = build_dcg("skip", &shapes, &[(0, 1), (1, 2), (0, 2)], 128).unwrap();
        assert_eq!(dcg.incoming_bits(2), dcg.flow(0, 2) + dcg.flow(1, 2));
        assert_eq!(dcg.incoming_bits(2), 64 + 32);
        assert_eq!(dcg.remaining_activation_bits(1), 64 + 96);
    }

    #[test]
    fn disconnected_is_graph_error() {
        let shapes = [LayerShape::fc(4, 4, 8), LayerShape::fc(4, 4, 8)];
        assert!(matches!(build_dcg("x", &shapes, &[], 0), Err(Error::Graph(_))));
    }

    #[test]
    fn backward_edge_is_graph_error() {
        let shapes = [LayerShape::fc(4, 4, 8), LayerShape::fc(4, 4, 8)];
        assert!(matches!(build_dcg("x", &shapes, &[(1, 0)], 0), Err(Error::Graph(_))));
        assert!(matches!(build_dcg("x", &shapes, &[(0, 0)], 0), Err(Error::Graph(_))));
    }

    #[test]
    fn suffix_sums() {
        let shapes = [LayerShape::fc(4, 4, 1), LayerShape::fc(4, 2, 1), LayerShape::fc(2, 1, 1)];
        let dcg = build_dcg("x", &shapes, &[(0, 1), (1, 2)], 4).unwrap();
        assert_eq!(dcg.total_weight_bits(), 16 + 8 + 2);
        assert_eq!(dcg.remaining_weight_bits(2), 2);
        assert_eq!(dcg.remaining_weight_bits(3), 0);
        assert_eq!(dcg.remaining_mac_ops(1), 8 + 2);
    }
}
