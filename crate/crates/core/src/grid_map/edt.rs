//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas transform: one pass along columns,
//! one along rows, each linear in the number of cells. Distances are between
//! cell centers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{CellState, DistanceField, OccupancyGrid, UnknownRule};

/// 1D squared distance transform of a sampled function.
///
/// `f[q]` is `None` where the function is +inf. Writes `min_p (q-p)^2 + f[p]`
/// to `out`, or `None` when every input is infinite.
fn transform_1d<T: Scalar>(
    f: &[Option<T>],
    out: &mut [Option<T>],
    v: &mut Vec<usize>,
    z: &mut Vec<T>,
) {
    v.clear();
    z.clear();
    let two = T::of(2.0);
    for (q, fq) in f.iter().enumerate() {
        let Some(fq) = *fq else { continue };
        let qf = T::of(q as f64);
        loop {
            let Some(&p) = v.last() else { break };
            let pf = T::of(p as f64);
            let fp = f[p].expect("envelope holds finite parabolas only");
            let s = ((fq + qf * qf) - (fp + pf * pf)) / (two * (qf - pf));
            if s <= *z.last().expect("z tracks v") {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(T::neg_infinity());
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = None);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = T::of(q as f64);
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = qf - T::of(p as f64);
        *o = Some(d * d + f[p].expect("finite"));
    }
}

/// Squared distance, in cells², from every cell center to the nearest
/// obstacle cell center. `None` where the grid holds no obstacle at all.
pub fn edt_squared_cells<T: Scalar>(grid: &OccupancyGrid, rule: UnknownRule) -> Vec<Option<T>> {
    let (w, h) = (grid.width(), grid.height());
    let is_obstacle = |c: CellState| match c {
        CellState::Occupied => true,
        CellState::Unknown => rule == UnknownRule::TreatAsOccupied,
        CellState::Free => false,
    };

    let mut buf: Vec<Option<T>> = grid
        .cells()
        .iter()
        .map(|&c| is_obstacle(c).then(T::zero))
        .collect();

    let n = w.max(h);
    let mut col_in = vec![None; n];
    let mut col_out = vec![None; n];
    let mut v = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);

    for x in 0..w {
        for y in 0..h {
            col_in[y] = buf[y * w + x];
        }
        transform_1d(&col_in[..h], &mut col_out[..h], &mut v, &mut z);
        for y in 0..h {
            buf[y * w + x] = col_out[y];
        }
    }
    for y in 0..h {
        let row = &mut buf[y * w..(y + 1) * w];
        col_in[..w].copy_from_slice(row);
        transform_1d(&col_in[..w], row, &mut v, &mut z);
    }
    buf
}

/// Truncated distance field at full precision.
///
/// Each cell holds `min(r_max, distance to the nearest obstacle center)` in
/// meters; with no obstacle in the grid every cell holds `r_max`.
pub fn compute_edt(grid: &OccupancyGrid, r_max: f64, rule: UnknownRule) -> Result<DistanceField> {
    if grid.is_empty() {
        return Err(Error::input("distance transform of an empty grid"));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::input(format!("r_max must be positive, got {r_max}")));
    }
    let res = grid.resolution();
    // Largest f32 not above r_max, so stored values never exceed the bound.
    let mut cap = r_max as f32;
    if cap as f64 > r_max {
        cap = f32::from_bits(cap.to_bits() - 1);
    }
    let values = edt_squared_cells::<f64>(grid, rule)
        .into_iter()
        .map(|d2| match d2 {
            Some(d2) => ((d2.sqrt() * res) as f32).min(cap),
            None => cap,
        })
        .collect();
    Ok(DistanceField::from_full(grid, r_max, values))
}
