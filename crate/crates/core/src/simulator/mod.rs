//! Time-domain simulation of the linear deterministic channel with
//! intermittent feedback.
//!
//! Everything here is seeded: the same seed gives the same trace, codebooks
//! and decisions regardless of how many rayon workers run the trials.

mod covering;
mod scheme;

pub use covering::{covering_success_rate, CoveringConfig, CoveringDistribution, CoveringReport, CoveringRoute};
pub use scheme::{
    simulate_scheme, simulate_scheme_with, trial_log_tsv, SchemeConfig, SchemeDiagnostics, SchemeRates, SchemeReport,
    TrialRecord,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundsError;
use crate::channels::{shift_apply, ChannelError, FeedbackStateSpec, LdicParams};
use crate::probability::ProbabilityError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("expected a bit vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{what} needs {needed}, cap is {cap}")]
    CapExceeded { what: &'static str, needed: f64, cap: f64 },
    #[error("invalid configuration: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Stateless 64-bit mixer used to derive per-trial and per-codeword seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed, 0x5EED), |acc, &t| mix(acc, t))
}

/// Draws a letter from `pmf` by inversion.
pub(crate) fn sample_letter<R: Rng>(rng: &mut R, pmf: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total; take the last letter with mass
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Strong typicality: letter `a` may occur with empirical frequency within
/// `epsilon·p(a) + epsilon/|A|` of `p(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Typicality {
    pub epsilon: f64,
    /// Reject any occurrence of a letter of probability zero.
    pub forbid_zero_cells: bool,
}

impl Typicality {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            forbid_zero_cells: true,
        }
    }

    pub fn tolerance(&self, p: f64, alphabet: usize) -> f64 {
        self.epsilon * p + self.epsilon / alphabet as f64
    }

    /// Inclusive range of admissible counts of a letter with probability
    /// `p` among `n` draws.
    pub fn count_range(&self, p: f64, alphabet: usize, n: usize) -> (usize, usize) {
        if p == 0.0 && self.forbid_zero_cells {
            return (0, 0);
        }
        let tol = self.tolerance(p, alphabet);
        let nf = n as f64;
        let slack = 1e-9;
        let lo = (nf * (p - tol) - slack).ceil().max(0.0) as usize;
        let hi = ((nf * (p + tol) + slack).floor().max(0.0) as usize).min(n);
        (lo, hi)
    }

    pub fn is_typical(&self, counts: &[usize], pmf: &[f64]) -> bool {
        let n = counts.iter().sum();
        counts.iter().zip(pmf).all(|(&c, &p)| {
            let (lo, hi) = self.count_range(p, pmf.len(), n);
            lo <= c && c <= hi
        })
    }
}

/// Precomputed count ranges for sequences of a fixed length against a fixed
/// pmf; a reusable scratch buffer avoids reallocating per check.
#[derive(Debug, Clone)]
pub(crate) struct TypicalityChecker {
    lo: Vec<usize>,
    hi: Vec<usize>,
    required: Vec<usize>,
    counts: Vec<usize>,
}

impl TypicalityChecker {
    pub fn new(typ: &Typicality, pmf: &[f64], n: usize) -> Self {
        let (lo, hi): (Vec<usize>, Vec<usize>) = pmf.iter().map(|&p| typ.count_range(p, pmf.len(), n)).unzip();
        let required = (0..pmf.len()).filter(|&a| lo[a] > 0).collect();
        Self {
            lo,
            hi,
            required,
            counts: vec![0; pmf.len()],
        }
    }

    /// Checks the sequence of joint-letter indices `cells`.
    pub fn check(&mut self, cells: impl Iterator<Item = usize> + Clone) -> bool {
        let mut ok = true;
        for c in cells.clone() {
            self.counts[c] += 1;
            if self.counts[c] > self.hi[c] {
                ok = false;
            }
        }
        if ok {
            ok = self.required.iter().all(|&a| self.counts[a] >= self.lo[a]);
        }
        for c in cells {
            self.counts[c] = 0;
        }
        ok
    }
}

/// A feedback-state sequence: `states[i] = (s1_on, s2_on)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTrace {
    pub seed: u64,
    pub states: Vec<(bool, bool)>,
}

impl StateTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Fraction of steps in which each feedback link was on.
    pub fn on_fractions(&self) -> [f64; 2] {
        let n = self.states.len().max(1) as f64;
        let a = self.states.iter().filter(|s| s.0).count() as f64;
        let b = self.states.iter().filter(|s| s.1).count() as f64;
        [a / n, b / n]
    }
}

/// I.i.d. draws from the joint state law.
pub fn sample_states(n: usize, fb: &FeedbackStateSpec, seed: u64) -> Result<StateTrace> {
    if n == 0 {
        return Err(SimError::Degenerate("state trace length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = fb.cells();
    let states = (0..n)
        .map(|_| match sample_letter(&mut rng, &cells) {
            0 => (true, true),
            1 => (true, false),
            2 => (false, true),
            _ => (false, false),
        })
        .collect();
    Ok(StateTrace { seed, states })
}

/// Channel outputs of one use: receiver outputs and the two feedback
/// observations (`None` is an erasure).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub y3: Vec<u8>,
    pub y4: Vec<u8>,
    pub fb1: Option<Vec<u8>>,
    pub fb2: Option<Vec<u8>>,
}

fn check_len(q: usize, v: &[u8]) -> Result<()> {
    if v.len() != q {
        return Err(SimError::LengthMismatch {
            expected: q,
            got: v.len(),
        });
    }
    Ok(())
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| (x ^ y) & 1).collect()
}

pub fn transmit(p: &LdicParams, x1: &[u8], x2: &[u8], state: (bool, bool)) -> Result<Transmission> {
    p.validate()?;
    check_len(p.q, x1)?;
    check_len(p.q, x2)?;
    let y3 = xor(&shift_apply(p.q, p.n11, x1)?, &shift_apply(p.q, p.n12, x2)?);
    let y4 = xor(&shift_apply(p.q, p.n22, x2)?, &shift_apply(p.q, p.n21, x1)?);
    Ok(Transmission {
        fb1: state.0.then(|| y3.clone()),
        fb2: state.1.then(|| y4.clone()),
        y3,
        y4,
    })
}

/// Which encoder is reconstructing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoder {
    One,
    Two,
}

/// Strips the encoder's own contribution from its feedback observation,
/// leaving the interference it saw (`T̃2` for encoder 1, `T̃1` for encoder 2).
pub fn reconstruct_tilde(p: &LdicParams, own_x: &[u8], fb: Option<&[u8]>, which: Encoder) -> Result<Option<Vec<u8>>> {
    check_len(p.q, own_x)?;
    let Some(y) = fb else {
        return Ok(None);
    };
    check_len(p.q, y)?;
    let gain = match which {
        Encoder::One => p.n11,
        Encoder::Two => p.n22,
    };
    Ok(Some(xor(y, &shift_apply(p.q, gain, own_x)?)))
}
