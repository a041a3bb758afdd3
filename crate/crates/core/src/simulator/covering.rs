//! Empirical covering test for the compression step.
//!
//! A trial draws `(u^n, y^n)` and a codebook of `2^⌈n·Rhat⌉` sequences
//! `v^n ~ P(v|u)` and succeeds when some codeword is jointly typical with
//! `(u^n, y^n)`. Small codebooks are drawn explicitly. For large ones the
//! per-trial success probability `1 − (1 − π)^M` is evaluated exactly, with
//! `π` the probability that one codeword lands in the typical box given
//! `(u^n, y^n)`, and the trial outcome is a Bernoulli draw with that
//! probability. Both routes sample the same random experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive, sample_letter, Result, SimError, Typicality, TypicalityChecker};
use crate::probability::{JointPmf, Variable};

/// `P_U`, `P_{Y|U}` and the test channel `P_{V|U,Y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringDistribution {
    pub p_u: Vec<f64>,
    pub y_given_u: Vec<Vec<f64>>,
    pub v_given_uy: Vec<Vec<Vec<f64>>>,
}

impl CoveringDistribution {
    pub fn new(p_u: Vec<f64>, y_given_u: Vec<Vec<f64>>, v_given_uy: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d = Self {
            p_u,
            y_given_u,
            v_given_uy,
        };
        d.joint()?;
        Ok(d)
    }

    /// Uniform `Y` on `{0,1}`, trivial `U`, and `V = Y` flipped with
    /// probability `flip`.
    pub fn binary_symmetric(flip: f64) -> Result<Self> {
        Self::new(
            vec![1.0],
            vec![vec![0.5, 0.5]],
            vec![vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]]],
        )
    }

    fn sizes(&self) -> (usize, usize, usize) {
        let ys = self.y_given_u.first().map_or(0, Vec::len);
        let vs = self.v_given_uy.first().and_then(|r| r.first()).map_or(0, Vec::len);
        (self.p_u.len(), ys, vs)
    }

    /// Joint over `(U, Y, V)`, row-major with `V` fastest.
    pub fn joint(&self) -> Result<JointPmf> {
        let (us, ys, vs) = self.sizes();
        let shape_ok = self.y_given_u.len() == us
            && self.y_given_u.iter().all(|r| r.len() == ys)
            && self.v_given_uy.len() == us
            && self.v_given_uy.iter().all(|r| r.len() == ys && r.iter().all(|c| c.len() == vs));
        if !shape_ok || us == 0 || ys == 0 || vs == 0 {
            return Err(SimError::Degenerate("covering distribution has inconsistent shapes".into()));
        }
        let mut w = Vec::with_capacity(us * ys * vs);
        for u in 0..us {
            for y in 0..ys {
                for v in 0..vs {
                    w.push(self.p_u[u] * self.y_given_u[u][y] * self.v_given_uy[u][y][v]);
                }
            }
        }
        Ok(JointPmf::new(
            vec![Variable::new("U", us), Variable::new("Y", ys), Variable::new("V", vs)],
            w,
        )?)
    }

    /// `I(V; Y | U)` in bits.
    pub fn compression_rate(&self) -> Result<f64> {
        Ok(self.joint()?.mutual_information(&["V"], &["Y"], &["U"])?)
    }

    /// Codeword law `P(v|u) = Σ_y P(y|u) P(v|u,y)`.
    fn v_given_u(&self) -> Vec<Vec<f64>> {
        let (us, ys, vs) = self.sizes();
        (0..us)
            .map(|u| {
                (0..vs)
                    .map(|v| (0..ys).map(|y| self.y_given_u[u][y] * self.v_given_uy[u][y][v]).sum())
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoveringRoute {
    /// Explicit codebook when it fits under the cap, exact evaluation otherwise.
    Auto,
    Explicit,
    TypeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringConfig {
    pub n: usize,
    pub rhat: f64,
    pub typicality: Typicality,
    pub trials: usize,
    pub seed: u64,
    pub route: CoveringRoute,
    /// Largest explicit codebook, in codewords.
    pub max_codewords: usize,
}

impl CoveringConfig {
    pub fn new(n: usize, rhat: f64, epsilon: f64, trials: usize, seed: u64) -> Self {
        Self {
            n,
            rhat,
            typicality: Typicality::new(epsilon),
            trials,
            seed,
            route: CoveringRoute::Auto,
            max_codewords: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub stderr: f64,
    /// Per-trial success flags, in trial order.
    pub outcomes: Vec<bool>,
    /// Mean exact success probability (type-class route only).
    pub mean_probability: Option<f64>,
}

/// `log2` of the codebook size, `⌈n·Rhat⌉`.
fn codebook_bits(n: usize, rhat: f64) -> f64 {
    (n as f64 * rhat).ceil().max(0.0)
}

pub fn covering_success_rate(dist: &CoveringDistribution, cfg: &CoveringConfig) -> Result<CoveringReport> {
    if cfg.trials == 0 || cfg.n == 0 {
        return Err(SimError::Degenerate("covering test needs n ≥ 1 and trials ≥ 1".into()));
    }
    if cfg.rhat.is_nan() || cfg.rhat < 0.0 {
        return Err(SimError::Degenerate(format!("compression rate {} must be nonnegative", cfg.rhat)));
    }
    let joint = dist.joint()?;
    let pmf = joint.weights().to_vec();
    let bits = codebook_bits(cfg.n, cfg.rhat);
    let codewords = 2f64.powf(bits);
    let explicit = match cfg.route {
        CoveringRoute::Explicit => {
            if codewords > cfg.max_codewords as f64 {
                return Err(SimError::CapExceeded {
                    what: "explicit covering codebook",
                    needed: codewords,
                    cap: cfg.max_codewords as f64,
                });
            }
            true
        }
        CoveringRoute::TypeClass => false,
        CoveringRoute::Auto => codewords <= cfg.max_codewords as f64,
    };
    let v_given_u = dist.v_given_u();
    let (us, ys, vs) = dist.sizes();
    let results: Vec<(bool, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[t as u64]));
            let u: Vec<usize> = (0..cfg.n).map(|_| sample_letter(&mut rng, &dist.p_u)).collect();
            let y: Vec<usize> = u.iter().map(|&a| sample_letter(&mut rng, &dist.y_given_u[a])).collect();
            if explicit {
                let mut checker = TypicalityChecker::new(&cfg.typicality, &pmf, cfg.n);
                let mut v = vec![0usize; cfg.n];
                let found = (0..codewords as usize).any(|_| {
                    for (slot, &a) in v.iter_mut().zip(&u) {
                        *slot = sample_letter(&mut rng, &v_given_u[a]);
                    }
                    checker.check((0..cfg.n).map(|i| (u[i] * ys + y[i]) * vs + v[i]))
                });
                (found, f64::NAN)
            } else {
                let ln_pi = ln_box_probability(&cfg.typicality, &pmf, (us, ys, vs), &v_given_u, &u, &y);
                let p = success_probability(ln_pi, bits);
                (rng.gen::<f64>() < p, p)
            }
        })
        .collect();
    let outcomes: Vec<bool> = results.iter().map(|r| r.0).collect();
    let successes = outcomes.iter().filter(|&&s| s).count();
    let rate = successes as f64 / cfg.trials as f64;
    let mean_probability = (!explicit).then(|| results.iter().map(|r| r.1).sum::<f64>() / cfg.trials as f64);
    Ok(CoveringReport {
        trials: cfg.trials,
        successes,
        rate,
        stderr: (rate * (1.0 - rate) / cfg.trials as f64).sqrt(),
        outcomes,
        mean_probability,
    })
}

/// `1 − (1 − π)^M` with `M = 2^bits`, from `ln π`.
fn success_probability(ln_pi: f64, bits: f64) -> f64 {
    if ln_pi == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_pi >= 0.0 {
        return 1.0;
    }
    let pi = ln_pi.exp();
    // ln(-ln(1 - π)), accurate for tiny π
    let ln_hazard = if pi < 1e-9 { ln_pi } else { (-(-pi).ln_1p()).ln() };
    let t = bits * std::f64::consts::LN_2 + ln_hazard;
    -(-t.exp()).exp_m1()
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln P(one codeword v^n ~ Π P(v|u_i) is typical with (u^n, y^n))`.
///
/// Given `(u^n, y^n)` the `V` counts inside each `(u, y)` group are an
/// independent multinomial, and the typical set is a box in the joint
/// counts, so the probability factorizes over groups.
fn ln_box_probability(
    typ: &Typicality,
    pmf: &[f64],
    (us, ys, vs): (usize, usize, usize),
    v_given_u: &[Vec<f64>],
    u: &[usize],
    y: &[usize],
) -> f64 {
    let n = u.len();
    let mut group = vec![0usize; us * ys];
    for (&a, &b) in u.iter().zip(y) {
        group[a * ys + b] += 1;
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut total = 0.0;
    for a in 0..us {
        for b in 0..ys {
            let m = group[a * ys + b];
            let ranges: Vec<(usize, usize)> = (0..vs)
                .map(|v| typ.count_range(pmf[(a * ys + b) * vs + v], pmf.len(), n))
                .collect();
            let lp = ln_multinomial_box(m, &v_given_u[a], &ranges, &ln_fact);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            total += lp;
        }
    }
    total
}

/// `ln P(c_v ∈ [lo_v, hi_v] ∀v)` for `c ~ Multinomial(m, q)`, by peeling one
/// letter at a time as a binomial on the remaining count.
fn ln_multinomial_box(m: usize, q: &[f64], ranges: &[(usize, usize)], ln_fact: &[f64]) -> f64 {
    let k = q.len();
    // f[r] = ln P(letters v.. land in their boxes | r draws remain)
    let mut f: Vec<f64> = (0..=m)
        .map(|r| {
            let (lo, hi) = ranges[k - 1];
            if lo <= r && r <= hi && (r == 0 || q[k - 1] > 0.0) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    for v in (0..k - 1).rev() {
        let tail: f64 = q[v..].iter().sum();
        let p = if tail > 0.0 { (q[v] / tail).min(1.0) } else { 0.0 };
        let (lo, hi) = ranges[v];
        let g: Vec<f64> = (0..=m)
            .map(|r| {
                let mut acc = f64::NEG_INFINITY;
                for c in lo..=hi.min(r) {
                    let rest = f[r - c];
                    if rest == f64::NEG_INFINITY {
                        continue;
                    }
                    let lb = ln_binomial(r, c, p, ln_fact);
                    acc = ln_add(acc, lb + rest);
                }
                acc
            })
            .collect();
        f = g;
    }
    f[m]
}

fn ln_binomial(r: usize, c: usize, p: f64, ln_fact: &[f64]) -> f64 {
    if p == 0.0 {
        return if c == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if c == r { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_fact[r] - ln_fact[c] - ln_fact[r - c] + c as f64 * p.ln() + (r - c) as f64 * (1.0 - p).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bsc_compression_rate() {
        let d = CoveringDistribution::binary_symmetric(0.1).unwrap();
        assert!((d.compression_rate().unwrap() - 0.531004406410719).abs() < 1e-12);
    }

    #[test]
    fn multinomial_box_matches_enumeration() {
        let n = 7;
        let ln_fact: Vec<f64> = (0..=n).map(|k| (1..=k).map(|i| (i as f64).ln()).sum()).collect();
        let q = [0.2f64, 0.5, 0.3];
        let ranges = [(1, 3), (2, 5), (0, 2)];
        let mut brute = 0.0;
        for a in 0..=n {
            for b in 0..=n - a {
                let c = n - a - b;
                if (ranges[0].0..=ranges[0].1).contains(&a)
                    && (ranges[1].0..=ranges[1].1).contains(&b)
                    && (ranges[2].0..=ranges[2].1).contains(&c)
                {
                    let coef = (ln_fact[n] - ln_fact[a] - ln_fact[b] - ln_fact[c]).exp();
                    brute += coef * q[0].powi(a as i32) * q[1].powi(b as i32) * q[2].powi(c as i32);
                }
            }
        }
        let got = ln_multinomial_box(n, &q, &ranges, &ln_fact).exp();
        assert!((got - brute).abs() < 1e-12, "{got} vs {brute}");
    }

    #[test]
    fn success_probability_limits() {
        assert_eq!(success_probability(f64::NEG_INFINITY, 10.0), 0.0);
        assert!((success_probability(0.5f64.ln(), 0.0) - 0.5).abs() < 1e-12);
        // π = 1/4, M = 4: 1 - (3/4)^4
        assert!((success_probability(0.25f64.ln(), 2.0) - (1.0 - 0.75f64.powi(4))).abs() < 1e-12);
        assert!(success_probability(-400.0, 2000.0) > 0.999_999);
    }

    #[test]
    fn exhaustive_codebook_always_covers() {
        let d = CoveringDistribution::binary_symmetric(0.0).unwrap();
        let mut cfg = CoveringConfig::new(6, 3.0, 0.6, 40, 5);
        cfg.route = CoveringRoute::Explicit;
        let r = covering_success_rate(&d, &cfg).unwrap();
        assert_eq!(r.rate, 1.0);
    }

    #[test]
    fn independent_test_channel_needs_one_codeword() {
        let d = CoveringDistribution::new(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]]).unwrap();
        let mut cfg = CoveringConfig::new(40, 0.0, 1.0, 50, 9);
        for route in [CoveringRoute::Explicit, CoveringRoute::TypeClass] {
            cfg.route = route;
            let r = covering_success_rate(&d, &cfg).unwrap();
            assert!(r.rate >= 0.9, "{route:?}: {}", r.rate);
        }
    }

    #[test]
    fn routes_agree_in_distribution() {
        let d = CoveringDistribution::binary_symmetric(0.2).unwrap();
        let mut cfg = CoveringConfig::new(24, 0.5, 0.3, 400, 2);
        cfg.route = CoveringRoute::Explicit;
        let a = covering_success_rate(&d, &cfg).unwrap();
        cfg.route = CoveringRoute::TypeClass;
        let b = covering_success_rate(&d, &cfg).unwrap();
        let gap = (a.rate - b.rate).abs();
        assert!(gap < 4.0 * (a.stderr + b.stderr) + 0.02, "{} vs {}", a.rate, b.rate);
        assert!((b.mean_probability.unwrap() - b.rate).abs() < 4.0 * b.stderr + 0.02);
    }

    #[test]
    fn cap_and_degenerate_inputs() {
        let d = CoveringDistribution::binary_symmetric(0.1).unwrap();
        let mut cfg = CoveringConfig::new(100, 0.9, 0.1, 1, 0);
        cfg.route = CoveringRoute::Explicit;
        assert!(matches!(covering_success_rate(&d, &cfg), Err(SimError::CapExceeded { .. })));
        cfg.trials = 0;
        assert!(matches!(covering_success_rate(&d, &cfg), Err(SimError::Degenerate(_))));
        assert!(CoveringDistribution::new(vec![1.0], vec![vec![0.5, 0.5]], vec![vec![vec![1.0]]]).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let d = CoveringDistribution::binary_symmetric(0.1).unwrap();
        let cfg = CoveringConfig::new(200, 0.6, 0.2, 30, 77);
        assert_eq!(covering_success_rate(&d, &cfg).unwrap(), covering_success_rate(&d, &cfg).unwrap());
    }
}
