//! Closed-form capacity region of the linear deterministic interference
//! channel with intermittent output feedback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{ChannelError, LdicParams};
use crate::formats::fmt_num;
use crate::regions::{max_weighted, HalfPlane, RateRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("feedback probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, CapacityError>;

fn pos(x: i64) -> f64 {
    x.max(0) as f64
}

/// The capacity constraints as raw half-planes, with each `min{·,·}` bound
/// emitted as two rows. Order: `R1` pair, `R2` pair, first sum-rate pair,
/// second sum-rate row, `2R1 + R2`, `R1 + 2R2`.
pub fn capacity_halfplanes(p: &LdicParams, p1: f64, p2: f64) -> Result<Vec<HalfPlane>> {
    p.validate()?;
    for v in [p1, p2] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CapacityError::BadProbability(v));
        }
    }
    let [n11, n12, n21, n22] = [p.n11, p.n12, p.n21, p.n22].map(|n| n as i64);
    let f = |n: i64| n as f64;
    let d1 = pos(n11 - n21);
    let d2 = pos(n22 - n12);
    let top1 = f(n11.max(n12));
    let top2 = f(n22.max(n21));
    let seen_at_1 = f(n12).max(d1);
    let seen_at_2 = f(n21).max(d2);
    let fed_1 = f(n12).min(d1);
    let fed_2 = f(n21).min(d2);
    Ok(vec![
        HalfPlane::new(1.0, 0.0, top1),
        HalfPlane::new(1.0, 0.0, f(n11) + p2 * pos(n21 - n11)),
        HalfPlane::new(0.0, 1.0, top2),
        HalfPlane::new(0.0, 1.0, f(n22) + p1 * pos(n12 - n22)),
        HalfPlane::new(1.0, 1.0, top1 + d2),
        HalfPlane::new(1.0, 1.0, top2 + d1),
        HalfPlane::new(1.0, 1.0, seen_at_1 + seen_at_2 + p1 * fed_1 + p2 * fed_2),
        HalfPlane::new(2.0, 1.0, top1 + seen_at_2 + d1 + p2 * fed_2),
        HalfPlane::new(1.0, 2.0, top2 + seen_at_1 + d2 + p1 * fed_1),
    ])
}

pub fn capacity_region(p: &LdicParams, p1: f64, p2: f64) -> Result<RateRegion> {
    let rows = capacity_halfplanes(p, p1, p2)?;
    let cap = (p.q + 1) as f64;
    Ok(RateRegion::from_halfplanes(&rows, [cap, cap]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p1: f64,
    pub p2: f64,
    pub sum_rate: f64,
    pub vertices: Vec<[f64; 2]>,
}

/// One capacity evaluation per `(p1, p2)` grid point, sorted by `(p1, p2)`.
pub fn capacity_sweep(p: &LdicParams, grid: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(CapacityError::EmptyGrid);
    }
    let mut rows = grid
        .iter()
        .map(|&(p1, p2)| {
            let r = capacity_region(p, p1, p2)?;
            let sum_rate = max_weighted(&r, 1.0, 1.0).map_or(0.0, |(v, _)| v);
            Ok(SweepRow {
                p1,
                p2,
                sum_rate,
                vertices: r.vertices().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.p1.total_cmp(&b.p1).then(a.p2.total_cmp(&b.p2)));
    Ok(rows)
}

/// Tab-separated sweep table: `p1 p2 sumrate` followed by one `R1,R2`
/// column per vertex.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("p1\tp2\tsumrate\tvertices\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}", fmt_num(r.p1), fmt_num(r.p2), fmt_num(r.sum_rate)));
        for v in &r.vertices {
            out.push_str(&format!("\t{},{}", fmt_num(v[0]), fmt_num(v[1])));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{hausdorff, is_subset};

    fn params(n11: usize, n22: usize, n12: usize, n21: usize) -> LdicParams {
        LdicParams::new(3, n11, n12, n21, n22).unwrap()
    }

    fn close(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9)
    }

    fn sum_rate(r: &RateRegion) -> f64 {
        max_weighted(r, 1.0, 1.0).unwrap().0
    }

    #[test]
    fn no_feedback_values() {
        let r = capacity_region(&params(2, 2, 1, 1), 0.0, 0.0).unwrap();
        assert!((sum_rate(&r) - 2.0).abs() < 1e-9);
        assert!(close(r.vertices(), &[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]), "{:?}", r.vertices());
    }

    #[test]
    fn full_feedback_values() {
        let r = capacity_region(&params(2, 2, 1, 1), 1.0, 1.0).unwrap();
        assert!((sum_rate(&r) - 3.0).abs() < 1e-9);
        assert!(
            close(r.vertices(), &[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 2.0], [0.0, 2.0]]),
            "{:?}",
            r.vertices()
        );
    }

    #[test]
    fn half_feedback_weighted_rows_cut() {
        // rows at p = 1/2: R1, R2 <= 2; R1+R2 <= 3; 2R1+R2 <= 4.5; R1+2R2 <= 4.5
        let r = capacity_region(&params(2, 2, 1, 1), 0.5, 0.5).unwrap();
        assert!((sum_rate(&r) - 3.0).abs() < 1e-9);
        assert!(
            close(r.vertices(), &[[0.0, 0.0], [2.0, 0.0], [2.0, 0.5], [1.5, 1.5], [0.5, 2.0], [0.0, 2.0]]),
            "{:?}",
            r.vertices()
        );
    }

    #[test]
    fn zero_gains_give_origin() {
        let r = capacity_region(&params(0, 0, 0, 0), 0.7, 0.2).unwrap();
        assert!(close(r.vertices(), &[[0.0, 0.0]]));
    }

    #[test]
    fn emits_nine_rows() {
        assert_eq!(capacity_halfplanes(&params(2, 2, 1, 1), 1.0, 1.0).unwrap().len(), 9);
    }

    #[test]
    fn no_interference_is_rectangle() {
        for (p1, p2) in [(0.0, 0.0), (0.3, 0.9), (1.0, 1.0)] {
            let r = capacity_region(&params(3, 2, 0, 0), p1, p2).unwrap();
            assert!(close(r.vertices(), &[[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [0.0, 2.0]]));
        }
    }

    #[test]
    fn feedback_extends_single_user_rate() {
        // n21 > n11 lets user 1 route extra bits through the feedback link
        let rows = capacity_halfplanes(&params(1, 1, 0, 3), 0.0, 0.5).unwrap();
        assert_eq!(rows[1].c, 2.0);
    }

    #[test]
    fn rejects_bad_probability() {
        assert_eq!(
            capacity_region(&params(1, 1, 1, 1), 1.5, 0.0).unwrap_err(),
            CapacityError::BadProbability(1.5)
        );
        assert!(matches!(
            capacity_region(&LdicParams { q: 1, n11: 2, n12: 0, n21: 0, n22: 0 }, 0.0, 0.0),
            Err(CapacityError::Channel(_))
        ));
    }

    #[test]
    fn sweep_single_point_matches_region() {
        let p = params(2, 2, 1, 1);
        let rows = capacity_sweep(&p, &[(0.3, 0.6)]).unwrap();
        let r = capacity_region(&p, 0.3, 0.6).unwrap();
        assert!(close(&rows[0].vertices, r.vertices()));
        assert!((rows[0].sum_rate - sum_rate(&r)).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_sorted_and_monotone() {
        let p = params(2, 2, 1, 1);
        let rows = capacity_sweep(&p, &[(1.0, 1.0), (0.5, 0.5), (0.0, 0.0)]).unwrap();
        let sums: Vec<f64> = rows.iter().map(|r| r.sum_rate).collect();
        assert_eq!(rows.iter().map(|r| r.p1).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert!(sums.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        assert!((sums[0] - 2.0).abs() < 1e-9 && (sums[1] - 3.0).abs() < 1e-9 && (sums[2] - 3.0).abs() < 1e-9);
        assert_eq!(capacity_sweep(&p, &[]).unwrap_err(), CapacityError::EmptyGrid);
    }

    #[test]
    fn larger_feedback_probability_gives_superset() {
        let p = params(3, 1, 2, 1);
        let lo = capacity_region(&p, 0.2, 0.4).unwrap();
        let hi = capacity_region(&p, 0.6, 0.4).unwrap();
        assert!(is_subset(&lo, &hi, 1e-9));
        assert!(hausdorff(&lo, &lo) == 0.0);
    }

    #[test]
    fn sweep_table_layout() {
        let rows = capacity_sweep(&params(1, 1, 0, 0), &[(0.0, 0.0)]).unwrap();
        let t = sweep_table(&rows);
        assert_eq!(t.lines().nth(1).unwrap(), "0\t0\t2\t0,0\t1,0\t1,1\t0,1");
    }
}
