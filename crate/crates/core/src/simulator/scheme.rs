//! Toy-scale run of the block-Markov compress-and-forward scheme on the
//! linear deterministic channel.
//!
//! Per block `i` and user `k` there are three random codebooks, generated
//! lazily from seeds derived from `(trial, block, user, kind, indices)`:
//! `u(w0, t')`, then `v(w0, t', t) ~ P(v|u)` and `x(w0, t', w) ~ P(x|u)`.
//! The first compression index `t'` of block `i` is the index chosen for
//! block `i − 1`, so decoders see the same index in two places and search
//! only over consistent index vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive, reconstruct_tilde, sample_letter, sample_states, transmit, Encoder, Result, SimError, Typicality, TypicalityChecker};
use crate::bounds::GfInputDistribution;
use crate::channels::{bits_to_word, det_to_icgf, ldic_build, word_to_bits, FeedbackStateSpec, LdicParams};
use crate::formats::fmt_num;
use crate::probability::JointPmf;

/// Rates in bits per channel use of one block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemeRates {
    pub r10: f64,
    pub r11: f64,
    pub r20: f64,
    pub r22: f64,
    pub rhat1: f64,
    pub rhat2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Block length.
    pub n: usize,
    /// Number of blocks.
    pub blocks: usize,
    pub rates: SchemeRates,
    pub typicality: Typicality,
    pub trials: usize,
    pub seed: u64,
    /// Largest admissible per-decoder search size.
    pub max_search: f64,
}

impl SchemeConfig {
    pub fn new(n: usize, blocks: usize, rates: SchemeRates, epsilon: f64, trials: usize, seed: u64) -> Self {
        Self {
            n,
            blocks,
            rates,
            typicality: Typicality::new(epsilon),
            trials,
            seed,
            max_search: (1u64 << 24) as f64,
        }
    }

    /// Codebook sizes `⌈2^(n·rate)⌉`: `[M10, M11, M20, M22, Mhat1, Mhat2]`.
    pub fn sizes(&self) -> Result<[usize; 6]> {
        let r = &self.rates;
        let mut out = [0usize; 6];
        for (slot, rate) in out.iter_mut().zip([r.r10, r.r11, r.r20, r.r22, r.rhat1, r.rhat2]) {
            if rate.is_nan() || rate < 0.0 {
                return Err(SimError::Degenerate(format!("rate {rate} must be nonnegative")));
            }
            let m = (self.n as f64 * rate).exp2().ceil();
            if m > self.max_search {
                return Err(SimError::CapExceeded {
                    what: "codebook",
                    needed: m,
                    cap: self.max_search,
                });
            }
            *slot = (m as usize).max(1);
        }
        Ok(out)
    }

    /// Decoder `k` search size `M_k0·M_kk·M_j0·Mhat1^B·Mhat2^B`.
    pub fn search_size(&self, k: usize) -> Result<f64> {
        let m = self.sizes()?.map(|v| v as f64);
        let b = self.blocks as i32;
        let own = if k == 0 { m[0] * m[1] * m[2] } else { m[2] * m[3] * m[0] };
        Ok(own * m[4].powi(b) * m[5].powi(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `(w10, w11, w20, w22)`
    pub sent: [usize; 4],
    /// Decoder `k`'s `(w_k0, w_kk)`, `None` when no unique candidate.
    pub decoded: [Option<(usize, usize)>; 2],
    pub ok: [bool; 2],
    /// Surviving message candidates per decoder, capped at 2.
    pub candidates: [u8; 2],
    pub covering_failures: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemeDiagnostics {
    pub covering_failures: [usize; 2],
    /// Trials where more than one message candidate survived.
    pub ties: [usize; 2],
    /// Trials where no candidate survived.
    pub empty: [usize; 2],
    pub search_size: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub error_rate: [f64; 2],
    pub trials: usize,
    pub diagnostics: SchemeDiagnostics,
    pub log: Vec<TrialRecord>,
}

/// One record per trial, tab separated.
pub fn trial_log_tsv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial\tseed\tw10\tw11\tw20\tw22\tdec10\tdec11\tdec20\tdec22\tok1\tok2\tcover_fail1\tcover_fail2\n");
    let dec = |d: Option<(usize, usize)>| d.map_or(("-".to_string(), "-".to_string()), |(a, b)| (a.to_string(), b.to_string()));
    for r in records {
        let (a, b) = dec(r.decoded[0]);
        let (c, d) = dec(r.decoded[1]);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{a}\t{b}\t{c}\t{d}\t{}\t{}\t{}\t{}\n",
            r.trial, r.seed, r.sent[0], r.sent[1], r.sent[2], r.sent[3], r.ok[0] as u8, r.ok[1] as u8, r.covering_failures[0], r.covering_failures[1]
        ));
    }
    out
}

impl SchemeReport {
    pub fn summary(&self) -> String {
        let se = |p: f64| (p * (1.0 - p) / self.trials as f64).sqrt();
        format!(
            "error_rate_1={} ± {}\terror_rate_2={} ± {}\ttrials={}",
            fmt_num(self.error_rate[0]),
            fmt_num(se(self.error_rate[0])),
            fmt_num(self.error_rate[1]),
            fmt_num(se(self.error_rate[1])),
            self.trials
        )
    }
}

/// Single-letter laws the codebooks and typicality checks need.
struct Laws {
    /// `[user] -> P(u)`
    p_u: [Vec<f64>; 2],
    /// `[user][u] -> P(v|u)`
    v_given_u: [Vec<Vec<f64>>; 2],
    /// `[user][u] -> P(x|u)`
    x_given_u: [Vec<Vec<f64>>; 2],
    /// `[user]` joint `(U, V, Y_fb)` for the covering step.
    cover: [JointPmf; 2],
    /// `[decoder]` joint `(Uk, Vk, Xk, Uj, Vj, Y)`.
    decode: [JointPmf; 2],
}

fn conditional(pair: &JointPmf) -> Vec<Vec<f64>> {
    let (a, b) = (pair.variables()[0].size, pair.variables()[1].size);
    let w = pair.weights();
    (0..a)
        .map(|i| {
            let row = &w[i * b..(i + 1) * b];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / b as f64; b]
            }
        })
        .collect()
}

fn pair<T>(v: Vec<T>) -> [T; 2] {
    v.try_into().ok().expect("two users")
}

impl Laws {
    fn new(joint: &JointPmf) -> Result<Self> {
        let lab = |k: usize, s: &str| format!("{s}{}", k + 1);
        let mut p_u = Vec::new();
        let mut vgu = Vec::new();
        let mut xgu = Vec::new();
        let mut cover = Vec::new();
        let mut decode = Vec::new();
        for k in 0..2 {
            let j = 1 - k;
            let (u, v, x, y) = (lab(k, "U"), lab(k, "V"), lab(k, "X"), lab(k, "Y"));
            p_u.push(joint.marginal_weights(&[&u])?);
            vgu.push(conditional(&joint.marginalize(&[&u, &v])?));
            xgu.push(conditional(&joint.marginalize(&[&u, &x])?));
            cover.push(joint.marginalize(&[&u, &v, &y])?);
            let rx = format!("Y{}", k + 3);
            decode.push(joint.marginalize(&[&u, &v, &x, &lab(j, "U"), &lab(j, "V"), &rx])?);
        }
        Ok(Self {
            p_u: pair(p_u),
            v_given_u: pair(vgu),
            x_given_u: pair(xgu),
            cover: pair(cover),
            decode: pair(decode),
        })
    }
}

const KIND_U: u64 = 0;
const KIND_V: u64 = 1;
const KIND_X: u64 = 2;

/// Lazily generated codebooks of one trial.
struct Codebooks<'a> {
    laws: &'a Laws,
    n: usize,
    key: u64,
}

impl Codebooks<'_> {
    fn u(&self, block: usize, k: usize, w0: usize, tp: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.key, &[block as u64, k as u64, KIND_U, w0 as u64, tp as u64]));
        (0..self.n).map(|_| sample_letter(&mut rng, &self.laws.p_u[k])).collect()
    }

    fn v(&self, block: usize, k: usize, w0: usize, tp: usize, t: usize, u: &[usize]) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.key, &[block as u64, k as u64, KIND_V, w0 as u64, tp as u64, t as u64]));
        u.iter().map(|&a| sample_letter(&mut rng, &self.laws.v_given_u[k][a])).collect()
    }

    fn x(&self, block: usize, k: usize, w0: usize, tp: usize, w: usize, u: &[usize]) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.key, &[block as u64, k as u64, KIND_X, w0 as u64, tp as u64, w as u64]));
        u.iter().map(|&a| sample_letter(&mut rng, &self.laws.x_given_u[k][a])).collect()
    }
}

fn cell(sizes: &[usize], symbols: &[usize]) -> usize {
    symbols.iter().zip(sizes).fold(0, |acc, (&s, &m)| acc * m + s)
}

/// Runs the scheme with uniform inputs, trivial `U`, and each encoder
/// compressing the interference it reconstructs from feedback losslessly
/// (`Vk` a copy of `Yk`).
pub fn simulate_scheme(p: &LdicParams, fb: &FeedbackStateSpec, cfg: &SchemeConfig) -> Result<SchemeReport> {
    let a = p.alphabet();
    let uniform = vec![1.0 / a as f64; a];
    let dist = GfInputDistribution::feedback_copies(&uniform, &uniform, [a + 1, a + 1])?;
    simulate_scheme_with(p, fb, &dist, cfg)
}

/// Runs the scheme with an arbitrary single-letter distribution (`|Q| = 1`)
/// over the generalized-feedback view of the channel, where encoder 1 sees
/// `Y1 = T̃2` and encoder 2 sees `Y2 = T̃1`.
pub fn simulate_scheme_with(p: &LdicParams, fb: &FeedbackStateSpec, dist: &GfInputDistribution, cfg: &SchemeConfig) -> Result<SchemeReport> {
    if cfg.n == 0 || cfg.blocks == 0 || cfg.trials == 0 {
        return Err(SimError::Degenerate("n, blocks and trials must be positive".into()));
    }
    if dist.q_size() != 1 {
        return Err(SimError::Degenerate("the scheme simulator needs |Q| = 1".into()));
    }
    let sizes = cfg.sizes()?;
    let search = [cfg.search_size(0)?, cfg.search_size(1)?];
    for &s in &search {
        if s > cfg.max_search {
            return Err(SimError::CapExceeded {
                what: "decoder search",
                needed: s,
                cap: cfg.max_search,
            });
        }
    }
    let det = ldic_build(p)?;
    let ch = det_to_icgf(&det, fb)?;
    let joint = dist.joint(&ch, crate::probability::DEFAULT_CELL_CAP)?;
    let laws = Laws::new(&joint)?;
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(p, fb, &laws, cfg, sizes, t))
        .collect::<Result<Vec<_>>>()?;
    let mut diagnostics = SchemeDiagnostics {
        search_size: search,
        ..SchemeDiagnostics::default()
    };
    let mut errors = [0usize; 2];
    for r in &records {
        for (k, err) in errors.iter_mut().enumerate() {
            diagnostics.covering_failures[k] += r.covering_failures[k];
            *err += usize::from(!r.ok[k]);
        }
    }
    for r in &records {
        for k in 0..2 {
            match r.candidates[k] {
                0 => diagnostics.empty[k] += 1,
                1 => {}
                _ => diagnostics.ties[k] += 1,
            }
        }
    }
    Ok(SchemeReport {
        error_rate: errors.map(|e| e as f64 / cfg.trials as f64),
        trials: cfg.trials,
        diagnostics,
        log: records,
    })
}

enum Decision {
    Unique((usize, usize)),
    Tie,
    Empty,
}

fn run_trial(p: &LdicParams, fb: &FeedbackStateSpec, laws: &Laws, cfg: &SchemeConfig, sizes: [usize; 6], t: usize) -> Result<TrialRecord> {
    let seed = derive(cfg.seed, &[t as u64]);
    let mut msg_rng = ChaCha8Rng::seed_from_u64(derive(seed, &[0xA11CE]));
    let uniform = |m: usize| vec![1.0 / m as f64; m];
    let sent = [0, 1, 2, 3].map(|i| sample_letter(&mut msg_rng, &uniform(sizes[i])));
    let (n, b) = (cfg.n, cfg.blocks);
    let books = Codebooks { laws, n, key: seed };
    let states = sample_states(n * b, fb, derive(seed, &[0x57A7E]))?;
    let q = p.q;
    let erasure = p.alphabet();
    let w0 = [sent[0], sent[2]];
    let wk = [sent[1], sent[3]];
    let mhat = [sizes[4], sizes[5]];
    // t[k][i] for i = 0..=b; t[k][0] is the default index
    let mut tidx = [vec![0usize; b + 1], vec![0usize; b + 1]];
    let mut fb_seen: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut y_rx: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    let mut u_sent: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    let mut covering_failures = [0usize; 2];
    let cover_sizes: [Vec<usize>; 2] = [0, 1].map(|k| laws.cover[k].variables().iter().map(|v| v.size).collect());
    let mut cover_check = [0, 1].map(|k| TypicalityChecker::new(&cfg.typicality, laws.cover[k].weights(), n));
    for i in 1..=b {
        let mut x_blk = Vec::with_capacity(2);
        for k in 0..2 {
            if i >= 2 {
                // compression of last block's feedback, smallest typical index wins
                let tp = tidx[k][i - 2];
                let u_prev = &u_sent[k][i - 2];
                let y_prev = &fb_seen[k];
                let found = (0..mhat[k]).find(|&cand| {
                    let v = books.v(i - 1, k, w0[k], tp, cand, u_prev);
                    cover_check[k].check((0..n).map(|s| cell(&cover_sizes[k], &[u_prev[s], v[s], y_prev[s]])))
                });
                tidx[k][i - 1] = found.unwrap_or_else(|| {
                    covering_failures[k] += 1;
                    0
                });
            }
            let u = books.u(i, k, w0[k], tidx[k][i - 1]);
            x_blk.push(books.x(i, k, w0[k], tidx[k][i - 1], wk[k], &u));
            u_sent[k].push(u);
        }
        let mut seen = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut rx = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for (s, (&w1, &w2)) in x_blk[0].iter().zip(&x_blk[1]).enumerate() {
            let (b1, b2) = (word_to_bits(q, w1), word_to_bits(q, w2));
            let out = transmit(p, &b1, &b2, states.states[(i - 1) * n + s])?;
            let r1 = reconstruct_tilde(p, &b1, out.fb1.as_deref(), Encoder::One)?;
            let r2 = reconstruct_tilde(p, &b2, out.fb2.as_deref(), Encoder::Two)?;
            seen[0].push(r1.map_or(erasure, |v| bits_to_word(&v)));
            seen[1].push(r2.map_or(erasure, |v| bits_to_word(&v)));
            rx[0].push(bits_to_word(&out.y3));
            rx[1].push(bits_to_word(&out.y4));
        }
        let [s0, s1] = seen;
        fb_seen = [s0, s1];
        let [r0, r1] = rx;
        y_rx[0].push(r0);
        y_rx[1].push(r1);
    }
    let mut decoded = [None, None];
    let mut ok = [false, false];
    let mut candidates = [0u8; 2];
    for k in 0..2 {
        let truth = (w0[k], wk[k]);
        candidates[k] = match decode(&books, laws, cfg, sizes, k, &y_rx[k]) {
            Decision::Unique(c) => {
                decoded[k] = Some(c);
                ok[k] = c == truth;
                1
            }
            Decision::Tie => 2,
            Decision::Empty => 0,
        };
    }
    Ok(TrialRecord {
        trial: t,
        seed,
        sent,
        decoded,
        ok,
        candidates,
        covering_failures,
    })
}

/// Simultaneous nonunique decoding at receiver `k` over all blocks.
fn decode(books: &Codebooks, laws: &Laws, cfg: &SchemeConfig, sizes: [usize; 6], k: usize, y: &[Vec<usize>]) -> Decision {
    let j = 1 - k;
    let n = cfg.n;
    let (m_own0, m_own, m_other0) = if k == 0 { (sizes[0], sizes[1], sizes[2]) } else { (sizes[2], sizes[3], sizes[0]) };
    let mhat = [sizes[4], sizes[5]];
    let dsizes: Vec<usize> = laws.decode[k].variables().iter().map(|v| v.size).collect();
    let mut checker = TypicalityChecker::new(&cfg.typicality, laws.decode[k].weights(), n);
    let mut accepted: Option<(usize, usize)> = None;
    for a in 0..m_own0 {
        for w in 0..m_own {
            let mut hit = false;
            'outer: for c in 0..m_other0 {
                if consistent(books, &dsizes, &mut checker, k, j, (a, w, c), mhat, y, 1, (0, 0)) {
                    hit = true;
                    break 'outer;
                }
            }
            if hit {
                if accepted.is_some() {
                    return Decision::Tie;
                }
                accepted = Some((a, w));
            }
        }
    }
    accepted.map_or(Decision::Empty, Decision::Unique)
}

/// Whether blocks `i..=B` admit compression indices continuing from
/// `prev = (t_k, t_j)` that make every block jointly typical.
#[allow(clippy::too_many_arguments)]
fn consistent(
    books: &Codebooks,
    dsizes: &[usize],
    checker: &mut TypicalityChecker,
    k: usize,
    j: usize,
    (a, w, c): (usize, usize, usize),
    mhat: [usize; 2],
    y: &[Vec<usize>],
    i: usize,
    prev: (usize, usize),
) -> bool {
    let b = y.len();
    let n = books.n;
    let uk = books.u(i, k, a, prev.0);
    let xk = books.x(i, k, a, prev.0, w, &uk);
    let uj = books.u(i, j, c, prev.1);
    let yi = &y[i - 1];
    for tk in 0..mhat[k] {
        let vk = books.v(i, k, a, prev.0, tk, &uk);
        for tj in 0..mhat[j] {
            let vj = books.v(i, j, c, prev.1, tj, &uj);
            let typical = checker.check((0..n).map(|s| cell(dsizes, &[uk[s], vk[s], xk[s], uj[s], vj[s], yi[s]])));
            if typical && (i == b || consistent(books, dsizes, checker, k, j, (a, w, c), mhat, y, i + 1, (tk, tj))) {
                return true;
            }
        }
    }
    false
}
