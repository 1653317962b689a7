use crate::geometry::{BBox, LocalPoint, ON_EDGE_EPS};

const MAX_CELLS_PER_AXIS: usize = 128;
const MIN_CELL_SIZE: f64 = 1.0;

/// Uniform grid over item bounding boxes. Each cell lists the items whose
/// box overlaps it, so a point query only tests a handful of polygons.
#[derive(Clone, Debug)]
pub(crate) struct GridIndex {
    bounds: BBox,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    pub fn build(boxes: impl Iterator<Item = BBox>) -> Self {
        let boxes: Vec<BBox> = boxes.collect();
        if boxes.is_empty() {
            return Self {
                bounds: BBox::empty(),
                cell: 1.0,
                nx: 0,
                ny: 0,
                cells: Vec::new(),
            };
        }
        let bounds = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.union(b));
        let extent = (bounds.max.x - bounds.min.x).max(bounds.max.y - bounds.min.y);
        let cell = (extent / MAX_CELLS_PER_AXIS as f64).max(MIN_CELL_SIZE);
        let nx = (((bounds.max.x - bounds.min.x) / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS);
        let ny = (((bounds.max.y - bounds.min.y) / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut index = Self {
            bounds,
            cell,
            nx,
            ny,
            cells: Vec::new(),
        };
        for (i, b) in boxes.iter().enumerate() {
            let pad = LocalPoint::new(ON_EDGE_EPS, ON_EDGE_EPS);
            let (x0, y0) = index.cell_of(b.min - pad);
            let (x1, y1) = index.cell_of(b.max + pad);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    cells[cy * nx + cx].push(i as u32);
                }
            }
        }
        index.cells = cells;
        index
    }

    fn cell_of(&self, p: LocalPoint) -> (usize, usize) {
        let cx = ((p.x - self.bounds.min.x) / self.cell).floor().max(0.0) as usize;
        let cy = ((p.y - self.bounds.min.y) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    /// Items whose bounding box may contain `p`.
    pub fn candidates(&self, p: LocalPoint) -> &[u32] {
        if self.nx == 0 || !self.bounds.contains(p) {
            return &[];
        }
        let (cx, cy) = self.cell_of(p);
        &self.cells[cy * self.nx + cx]
    }
}
