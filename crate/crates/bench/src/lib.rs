//! Fixtures shared by the pipeline benchmarks.

use coarsequant::coarse::{ladder_partition, NuCutoff};
use coarsequant::symbol::{winding, Cosymbol};
use coarsequant::{ManifoldGrid, PartitionOfUnity};
use std::f64::consts::PI;

pub struct CircleFixture {
    pub grid: ManifoldGrid,
    pub cos: Cosymbol,
    pub pou: PartitionOfUnity,
    pub legs: NuCutoff,
}

/// Flat or conformal circle with the winding-1 cosymbol and a ladder
/// partition of radius 4π/50.
pub fn circle(n: usize, conformal: bool) -> CircleFixture {
    let grid = ManifoldGrid::circle(n, conformal);
    let legs = NuCutoff::new(grid.ball_radius().min(0.5));
    let cos = Cosymbol::new(winding(1), n, 1, Some(legs.radius));
    let pou = ladder_partition(&grid, 4.0 * PI / 50.0).expect("compact model");
    CircleFixture { grid, cos, pou, legs }
}
