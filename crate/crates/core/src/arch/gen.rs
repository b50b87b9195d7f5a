//! Mesh and hexamesh interposer generators.

use super::{Acg, Chiplet, Link, PerType, PimType};
use crate::error::{Error, Result};

/// Physical properties shared by every chiplet of one PIM type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipletTemplate {
    pub mem_bits: u64,
    pub area_mm2: f64,
    pub t_max_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub pitch_mm: f64,
    /// I/O chiplets per grid side, spread evenly along the boundary.
    pub io_per_side: usize,
    pub io_area_mm2: f64,
}

impl GridLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridLayout { rows, cols, pitch_mm: 3.5, io_per_side: 0, io_area_mm2: 4.0 }
    }

    fn io_slots(&self) -> Vec<(usize, usize)> {
        let k = self.io_per_side;
        let spread = |len: usize| -> Vec<usize> { (0..k).map(|j| ((2 * j + 1) * len) / (2 * k)).collect() };
        let (r, c) = (self.rows, self.cols);
        let mut slots = Vec::new();
        for x in spread(c) {
            slots.push((0, x));
            slots.push((r - 1, x));
        }
        for y in spread(r) {
            slots.push((y, 0));
            slots.push((y, c - 1));
        }
        slots.sort_unstable();
        slots.dedup();
        slots
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Grid {
    Mesh,
    Hex,
}

/// 4-neighbor grid without wraparound. `placement` lists cluster blocks in
/// the order they fill the grid (row-major, after I/O slots are reserved).
pub fn build_mesh(layout: &GridLayout, placement: &[(PimType, usize)], templates: &PerType<ChipletTemplate>) -> Result<Acg> {
    build_grid(Grid::Mesh, layout, placement, templates)
}

/// Offset-row hexagonal grid: odd rows are shifted half a pitch to the
/// right, so interior nodes have six neighbors.
pub fn build_hexamesh(
    layout: &GridLayout,
    placement: &[(PimType, usize)],
    templates: &PerType<ChipletTemplate>,
) -> Result<Acg> {
    build_grid(Grid::Hex, layout, placement, templates)
}

fn build_grid(
    grid: Grid,
    layout: &GridLayout,
    placement: &[(PimType, usize)],
    templates: &PerType<ChipletTemplate>,
) -> Result<Acg> {
    let (rows, cols) = (layout.rows, layout.cols);
    if rows == 0 || cols == 0 {
        return Err(Error::Config("grid needs at least one row and one column".into()));
    }
    let p = layout.pitch_mm;
    let max_side = templates.iter().map(|(_, t)| t.area_mm2).fold(layout.io_area_mm2, f64::max).sqrt();
    if !(p.is_finite() && p >= max_side) {
        return Err(Error::Config(format!("grid pitch {p} mm is smaller than the largest chiplet side {max_side:.3} mm")));
    }
    let io = if layout.io_per_side > 0 { layout.io_slots() } else { Vec::new() };
    let compute: usize = placement.iter().map(|&(_, n)| n).sum();
    if compute + io.len() > rows * cols {
        return Err(Error::Config(format!(
            "{rows}x{cols} grid has {} slots but {} compute and {} I/O chiplets were requested",
            rows * cols,
            compute,
            io.len()
        )));
    }

    let mut blocks = placement.iter().flat_map(|&(t, n)| std::iter::repeat_n(t, n));
    let mut slot_id = vec![None; rows * cols];
    let mut chiplets = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let pos = match grid {
                Grid::Mesh => (c as f64 * p, r as f64 * p),
                Grid::Hex => (c as f64 * p + if r % 2 == 1 { p / 2.0 } else { 0.0 }, r as f64 * p * 0.866),
            };
            let id = chiplets.len();
            let chiplet = if io.contains(&(r, c)) {
                Chiplet::io(id, pos, layout.io_area_mm2)
            } else if let Some(t) = blocks.next() {
                let tpl = templates[t];
                Chiplet::compute(id, t, tpl.mem_bits, tpl.t_max_k, pos, tpl.area_mm2)
            } else {
                continue;
            };
            slot_id[r * cols + c] = Some(id);
            chiplets.push(chiplet);
        }
    }

    let at = |r: usize, c: usize| slot_id[r * cols + c];
    let mut links = Vec::new();
    let mut connect = |a: Option<usize>, b: Option<usize>| {
        if let (Some(a), Some(b)) = (a, b) {
            links.push(Link::plain(a, b));
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                connect(at(r, c), at(r, c + 1));
            }
            if r + 1 < rows {
                connect(at(r, c), at(r + 1, c));
                if grid == Grid::Hex {
                    // odd rows sit to the right: link down-right; even rows: down-left
                    if r % 2 == 1 && c + 1 < cols {
                        connect(at(r, c), at(r + 1, c + 1));
                    } else if r % 2 == 0 && c > 0 {
                        connect(at(r, c), at(r + 1, c - 1));
                    }
                }
            }
        }
    }
    Acg::new(chiplets, links)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tpl() -> PerType<ChipletTemplate> {
        PerType::from_fn(|_| ChipletTemplate { mem_bits: 1000, area_mm2: 4.0, t_max_k: 330.0 })
    }

    #[test]
    fn two_by_two_has_four_links() {
        let acg = build_mesh(&GridLayout::new(2, 2), &[(PimType::Standard, 4)], &tpl()).unwrap();
        assert_eq!(acg.links().len(), 4);
    }

    #[test]
    fn three_by_three_degrees_and_corners() {
        let acg = build_mesh(&GridLayout::new(3, 3), &[(PimType::Standard, 9)], &tpl()).unwrap();
        assert_eq!(acg.degree(0), 2);
        assert_eq!(acg.degree(4), 4);
        assert!((0..9).all(|i| (2..=4).contains(&acg.degree(i))));
        assert_eq!(acg.hop_distance(0, 8).unwrap(), 4);
    }

    #[test]
    fn insufficient_slots() {
        let r = build_mesh(&GridLayout::new(2, 2), &[(PimType::Standard, 5)], &tpl());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn clusters_are_contiguous_blocks() {
        let placement = [(PimType::AdcLess, 3), (PimType::Standard, 5)];
        let mut layout = GridLayout::new(3, 4);
        layout.io_per_side = 1;
        let acg = build_mesh(&layout, &placement, &tpl()).unwrap();
        let order: Vec<_> = acg.chiplets().iter().filter_map(|c| c.pim_type()).collect();
        assert_eq!(order, [vec![PimType::AdcLess; 3], vec![PimType::Standard; 5]].concat());
        assert_eq!(acg.io_chiplets().len(), 4);
        assert!(acg.io_chiplets().iter().all(|&i| acg.chiplet(i).mem_cap == 0));
    }

    #[test]
    fn hexamesh_interior_degree_six() {
        let acg = build_hexamesh(&GridLayout::new(5, 5), &[(PimType::SharedAdc, 25)], &tpl()).unwrap();
        for r in 1..4 {
            for c in 1..4 {
                assert_eq!(acg.degree(r * 5 + c), 6, "node ({r},{c})");
            }
        }
        let n = acg.neighbors(12).next().unwrap();
        assert_eq!(acg.hop_distance(12, n).unwrap(), 1);
        // neighbors sit one pitch apart
        for l in acg.links() {
            let (a, b) = (acg.chiplet(l.a).position, acg.chiplet(l.b).position);
            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            assert!((d - 3.5).abs() < 0.01, "{d}");
        }
    }

    proptest::proptest! {
        #[test]
        fn full_mesh_degrees(rows in 2usize..8, cols in 2usize..8) {
            let acg = build_mesh(&GridLayout::new(rows, cols), &[(PimType::Standard, rows * cols)], &tpl()).unwrap();
            proptest::prop_assert!((0..acg.len()).all(|i| (2..=4).contains(&acg.degree(i))));
            proptest::prop_assert_eq!(acg.links().len(), rows * (cols - 1) + cols * (rows - 1));
        }
    }

    #[test]
    fn pitch_must_fit_largest_chiplet() {
        let mut t = tpl();
        t.shared_adc.area_mm2 = 16.0;
        let mut layout = GridLayout::new(2, 2);
        layout.pitch_mm = 3.5;
        assert!(build_mesh(&layout, &[(PimType::Standard, 4)], &t).is_err());
    }
}
