//! Oracles shared by the property suite and the acceptance harness. None of
//! them call into the code they check.

#![allow(dead_code)]

use icfb::channels::IcGfChannel;
use icfb::probability::{JointPmf, Variable};
use icfb::regions::LinearRateSystem;
use rand::Rng;

/// Rows of a small random system over `R1, R2` and `extras` more variables,
/// as `(coefficients, rhs)` with the coefficient order of `names`.
pub struct SmallSystem {
    pub names: Vec<String>,
    pub rows: Vec<(Vec<i64>, f64)>,
}

impl SmallSystem {
    pub fn random<R: Rng>(rng: &mut R, extras: usize, rows: usize) -> Self {
        let mut names = vec!["R1".to_string(), "R2".to_string()];
        names.extend((0..extras).map(|i| format!("Z{i}")));
        let rows = (0..rows)
            .map(|_| {
                let coeffs: Vec<i64> = (0..names.len()).map(|_| rng.gen_range(-2..=2)).collect();
                let rhs = (rng.gen_range(-1.0..4.0f64) * 20.0).round() / 20.0;
                (coeffs, rhs)
            })
            .collect();
        Self { names, rows }
    }

    pub fn to_system(&self) -> LinearRateSystem {
        let refs: Vec<&str> = self.names.iter().map(String::as_str).collect();
        let mut s = LinearRateSystem::new(&refs).unwrap();
        for (c, rhs) in &self.rows {
            let terms: Vec<(&str, i64)> = refs.iter().copied().zip(c.iter().copied()).collect();
            s.add_le(&terms, *rhs).unwrap();
        }
        s
    }

    /// Whether some value of the extra variables satisfies every row at the
    /// rate pair `r`, with each right-hand side shifted by `slack`.
    pub fn feasible_at(&self, r: [f64; 2], slack: f64) -> bool {
        const BOX: f64 = 1000.0;
        let k = self.names.len() - 2;
        let mut rows: Vec<(Vec<f64>, f64)> = self
            .rows
            .iter()
            .map(|(c, rhs)| {
                let rest = rhs + slack - c[0] as f64 * r[0] - c[1] as f64 * r[1];
                (c[2..].iter().map(|&v| v as f64).collect(), rest)
            })
            .collect();
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            rows.push((e.clone(), BOX));
            e[i] = -1.0;
            rows.push((e, BOX));
        }
        let ok = |z: &[f64]| {
            rows.iter()
                .all(|(a, b)| a.iter().zip(z).map(|(x, y)| x * y).sum::<f64>() <= b + 1e-11)
        };
        match k {
            0 => ok(&[]),
            1 => {
                // the feasible set is an interval; test every endpoint
                rows.iter().filter(|(a, _)| a[0] != 0.0).any(|(a, b)| ok(&[b / a[0]]))
            }
            2 => {
                for i in 0..rows.len() {
                    for j in i + 1..rows.len() {
                        let (a, b) = (&rows[i], &rows[j]);
                        let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
                        if det.abs() < 1e-12 {
                            continue;
                        }
                        let z0 = (a.1 * b.0[1] - a.0[1] * b.1) / det;
                        let z1 = (a.0[0] * b.1 - a.1 * b.0[0]) / det;
                        if ok(&[z0, z1]) {
                            return true;
                        }
                    }
                }
                false
            }
            _ => panic!("oracle handles at most two extra variables"),
        }
    }
}

/// Random joint over three variables `A, B, C` with the given sizes.
pub fn random_joint<R: Rng>(rng: &mut R, sizes: [usize; 3]) -> JointPmf {
    let n: usize = sizes.iter().product();
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let vars = ["A", "B", "C"]
        .iter()
        .zip(sizes)
        .map(|(l, s)| Variable::new(*l, s))
        .collect();
    JointPmf::new(vars, w).unwrap()
}

/// Entropy in bits of the marginal on the positions flagged in `keep`,
/// computed straight from the weights.
pub fn raw_entropy(weights: &[f64], sizes: &[usize], keep: &[bool]) -> f64 {
    use std::collections::HashMap;
    let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
    for (idx, &w) in weights.iter().enumerate() {
        let mut rem = idx;
        let mut sym = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            sym[i] = rem % sizes[i];
            rem /= sizes[i];
        }
        let key: Vec<usize> = sym.iter().zip(keep).filter(|(_, &k)| k).map(|(&s, _)| s).collect();
        *acc.entry(key).or_insert(0.0) += w;
    }
    acc.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Capacity-region right-hand sides, transcribed term by term:
/// `[R1, R2, R1+R2, 2R1+R2, R1+2R2]`.
pub fn capacity_terms(n11: f64, n12: f64, n21: f64, n22: f64, p1: f64, p2: f64) -> [f64; 5] {
    let pos = |x: f64| x.max(0.0);
    let r1 = n11.max(n12).min(n11 + p2 * pos(n21 - n11));
    let r2 = n22.max(n21).min(n22 + p1 * pos(n12 - n22));
    let sum_a = (n11.max(n12) + pos(n22 - n12)).min(n22.max(n21) + pos(n11 - n21));
    let sum_b = n12.max(pos(n11 - n21))
        + n21.max(pos(n22 - n12))
        + p1 * n12.min(pos(n11 - n21))
        + p2 * n21.min(pos(n22 - n12));
    let w21 = n11.max(n12) + n21.max(pos(n22 - n12)) + pos(n11 - n21) + p2 * n21.min(pos(n22 - n12));
    let w12 = n22.max(n21) + n12.max(pos(n11 - n21)) + pos(n22 - n12) + p1 * n12.min(pos(n11 - n21));
    [r1, r2, sum_a.min(sum_b), w21, w12]
}

/// Vertices of `{R >= 0} ∩ rows` by brute force over pairwise line
/// intersections, sorted lexicographically.
pub fn brute_vertices(rows: &[([f64; 2], f64)]) -> Vec<[f64; 2]> {
    let mut all: Vec<([f64; 2], f64)> = rows.to_vec();
    all.push(([-1.0, 0.0], 0.0));
    all.push(([0.0, -1.0], 0.0));
    let inside = |p: [f64; 2]| all.iter().all(|(a, b)| a[0] * p[0] + a[1] * p[1] <= b + 1e-9);
    let mut out: Vec<[f64; 2]> = Vec::new();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (a, b) = (all[i], all[j]);
            let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let p = [(a.1 * b.0[1] - a.0[1] * b.1) / det, (a.0[0] * b.1 - a.1 * b.0[0]) / det];
            if inside(p) && !out.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9) {
                out.push(p);
            }
        }
    }
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out
}

pub fn sorted(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v
}

/// Random channel with binary inputs and outputs.
pub fn random_binary_channel<R: Rng>(rng: &mut R) -> IcGfChannel {
    let mut w = vec![0.0; 64];
    for x in 0..4 {
        let row: Vec<f64> = (0..16).map(|_| rng.gen::<f64>().powi(3)).collect();
        let total: f64 = row.iter().sum();
        for (y, v) in row.iter().enumerate() {
            w[x * 16 + y] = v / total;
        }
    }
    IcGfChannel::new([2; 6], w).unwrap()
}

pub fn dirichlet<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..m).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|x| x / s).collect()
}
