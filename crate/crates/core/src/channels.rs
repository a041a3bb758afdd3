//! Channel models: the generic interference channel with generalized
//! feedback, injective deterministic channels, the shift-matrix linear
//! deterministic family and the intermittent feedback state law.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probability::{Kernel, ProbabilityError, Variable, SUM_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("bit vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("gain {n} outside 0..={q}")]
    GainOutOfRange { n: usize, q: usize },
    #[error("vector length q={0} must be in 1..=16")]
    BadVectorLength(usize),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("state cells must be nonnegative and sum to 1, got {0:?}")]
    BadStateLaw([f64; 4]),
    #[error("channel table: {0}")]
    BadTable(String),
    #[error("deterministic channel is not injective in the interference")]
    NotInjective,
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// Generic two-user interference channel with generalized feedback,
/// `W(y1, y2, y3, y4 | x1, x2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcGfChannel {
    /// |X1|, |X2|, |Y1|, |Y2|, |Y3|, |Y4|
    pub alphabets: [usize; 6],
    /// Row-major over (x1, x2, y1, y2, y3, y4).
    pub weights: Vec<f64>,
}

pub const INPUT_LABELS: [&str; 2] = ["X1", "X2"];
pub const OUTPUT_LABELS: [&str; 4] = ["Y1", "Y2", "Y3", "Y4"];

impl IcGfChannel {
    pub fn new(alphabets: [usize; 6], weights: Vec<f64>) -> Result<Self> {
        if alphabets.contains(&0) {
            return Err(ChannelError::BadTable("empty alphabet".into()));
        }
        let rows = alphabets[0] * alphabets[1];
        let outs = alphabets[2..].iter().product::<usize>();
        if weights.len() != rows * outs {
            return Err(ChannelError::BadTable(format!(
                "expected {} weights, got {}",
                rows * outs,
                weights.len()
            )));
        }
        for (r, row) in weights.chunks(outs).enumerate() {
            if row.iter().any(|&w| !w.is_finite() || w < 0.0) {
                return Err(ChannelError::BadTable(format!("negative weight in row {r}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(ChannelError::BadTable(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self { alphabets, weights })
    }

    /// Builds the table from a per-input-pair weight function.
    pub fn from_fn(alphabets: [usize; 6], mut w: impl FnMut([usize; 2], [usize; 4]) -> f64) -> Result<Self> {
        let mut weights = Vec::new();
        for x1 in 0..alphabets[0] {
            for x2 in 0..alphabets[1] {
                for y1 in 0..alphabets[2] {
                    for y2 in 0..alphabets[3] {
                        for y3 in 0..alphabets[4] {
                            for y4 in 0..alphabets[5] {
                                weights.push(w([x1, x2], [y1, y2, y3, y4]));
                            }
                        }
                    }
                }
            }
        }
        Self::new(alphabets, weights)
    }

    pub fn weight(&self, x: [usize; 2], y: [usize; 4]) -> f64 {
        let a = &self.alphabets;
        let idx = ((((x[0] * a[1] + x[1]) * a[2] + y[0]) * a[3] + y[1]) * a[4] + y[2]) * a[5] + y[3];
        self.weights[idx]
    }

    /// The channel as a chain of single-output kernels
    /// `Y1|X1,X2`, `Y2|X1,X2,Y1`, `Y3|X1,X2,Y1,Y2`, `Y4|X1,X2,Y1,Y2,Y3`.
    ///
    /// Conditioning rows of zero probability are filled with a uniform row.
    pub fn kernels(&self) -> Result<Vec<Kernel>> {
        let a = self.alphabets;
        let vars: Vec<Variable> = INPUT_LABELS
            .iter()
            .chain(OUTPUT_LABELS.iter())
            .zip(a)
            .map(|(l, s)| Variable::new(*l, s))
            .collect();
        let mut kernels = Vec::with_capacity(4);
        for k in 0..4 {
            let inputs = vars[..2 + k].to_vec();
            let output = vars[2 + k].clone();
            // prefix mass P(y_1..y_k | x), summing the suffix out
            let prefix = |x: &[usize], ys: &[usize]| -> f64 {
                let mut total = 0.0;
                let free: Vec<usize> = (ys.len()..4).map(|j| a[2 + j]).collect();
                let count: usize = free.iter().product();
                let mut y = [0usize; 4];
                y[..ys.len()].copy_from_slice(ys);
                for mut c in 0..count {
                    for j in (ys.len()..4).rev() {
                        y[j] = c % a[2 + j];
                        c /= a[2 + j];
                    }
                    total += self.weight([x[0], x[1]], y);
                }
                total
            };
            let kernel = Kernel::from_fn(inputs, output.clone(), |inp, out| {
                let x = &inp[..2];
                let ys = &inp[2..];
                let denom = prefix(x, ys);
                if denom <= 0.0 {
                    return 1.0 / output.size as f64;
                }
                let mut extended = ys.to_vec();
                extended.push(out);
                prefix(x, &extended) / denom
            });
            kernels.push(kernel?);
        }
        Ok(kernels)
    }
}

/// Deterministic interference channel `Y3 = f3(X1, t2(X2))`,
/// `Y4 = f4(X2, t1(X1))`, given as lookup tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectiveDetIc {
    /// |X1|, |X2|, |T1|, |T2|, |Y3|, |Y4|
    pub alphabets: [usize; 6],
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    /// Indexed by `x1 * |T2| + t2`.
    pub f3: Vec<usize>,
    /// Indexed by `x2 * |T1| + t1`.
    pub f4: Vec<usize>,
}

impl InjectiveDetIc {
    pub fn new(
        alphabets: [usize; 6],
        t1: Vec<usize>,
        t2: Vec<usize>,
        f3: Vec<usize>,
        f4: Vec<usize>,
    ) -> Result<Self> {
        let [x1, x2, tt1, tt2, y3, y4] = alphabets;
        let check = |name: &str, table: &[usize], len: usize, range: usize| -> Result<()> {
            if table.len() != len {
                return Err(ChannelError::BadTable(format!("{name} has {} entries, expected {len}", table.len())));
            }
            if table.iter().any(|&v| v >= range) {
                return Err(ChannelError::BadTable(format!("{name} value out of range")));
            }
            Ok(())
        };
        check("t1", &t1, x1, tt1)?;
        check("t2", &t2, x2, tt2)?;
        check("f3", &f3, x1 * tt2, y3)?;
        check("f4", &f4, x2 * tt1, y4)?;
        Ok(Self {
            alphabets,
            t1,
            t2,
            f3,
            f4,
        })
    }

    pub fn t1(&self, x1: usize) -> usize {
        self.t1[x1]
    }

    pub fn t2(&self, x2: usize) -> usize {
        self.t2[x2]
    }

    pub fn f3(&self, x1: usize, t2: usize) -> usize {
        self.f3[x1 * self.alphabets[3] + t2]
    }

    pub fn f4(&self, x2: usize, t1: usize) -> usize {
        self.f4[x2 * self.alphabets[2] + t1]
    }

    pub fn y3(&self, x1: usize, x2: usize) -> usize {
        self.f3(x1, self.t2(x2))
    }

    pub fn y4(&self, x1: usize, x2: usize) -> usize {
        self.f4(x2, self.t1(x1))
    }

    /// Erasure symbol index of `T̃1 = S2·T1`.
    pub fn erasure1(&self) -> usize {
        self.alphabets[2]
    }

    /// Erasure symbol index of `T̃2 = S1·T2`.
    pub fn erasure2(&self) -> usize {
        self.alphabets[3]
    }
}

/// Exhaustively checks that `t2 ↦ f3(x1, t2)` and `t1 ↦ f4(x2, t1)` are
/// one-to-one for every `x1`, `x2`.
pub fn injectivity_check(c: &InjectiveDetIc) -> bool {
    let [x1s, x2s, t1s, t2s, _, _] = c.alphabets;
    let one_to_one = |n: usize, f: &dyn Fn(usize) -> usize| {
        let mut seen: Vec<usize> = (0..n).map(f).collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    };
    (0..x1s).all(|x1| one_to_one(t2s, &|t| c.f3(x1, t)))
        && (0..x2s).all(|x2| one_to_one(t1s, &|t| c.f4(x2, t)))
}

/// Joint law of the two feedback link states. Cells are ordered
/// (on,on), (on,erased), (erased,on), (erased,erased) for (S1, S2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackStateSpec {
    cells: [f64; 4],
}

impl FeedbackStateSpec {
    pub fn new(cells: [f64; 4]) -> Result<Self> {
        let sum: f64 = cells.iter().sum();
        if cells.iter().any(|&c| !c.is_finite() || c < 0.0) || (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ChannelError::BadStateLaw(cells));
        }
        Ok(Self { cells })
    }

    pub fn independent(p1: f64, p2: f64) -> Result<Self> {
        Self::correlated(p1, p2, 0.0)
    }

    /// States with marginals `p1`, `p2` and Pearson correlation `rho`
    /// between the two on-indicators.
    pub fn correlated(p1: f64, p2: f64, rho: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ChannelError::BadProbability(p));
            }
        }
        let both = p1 * p2 + rho * (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt();
        let cells = [both, p1 - both, p2 - both, 1.0 - p1 - p2 + both];
        let cells = cells.map(|c| if c.abs() < 1e-15 { 0.0 } else { c });
        Self::new(cells)
    }

    pub fn cells(&self) -> [f64; 4] {
        self.cells
    }

    /// Probability of `(s1_on, s2_on)`.
    pub fn prob(&self, s1_on: bool, s2_on: bool) -> f64 {
        self.cells[(!s1_on as usize) * 2 + (!s2_on as usize)]
    }

    pub fn p1(&self) -> f64 {
        self.cells[0] + self.cells[1]
    }

    pub fn p2(&self) -> f64 {
        self.cells[0] + self.cells[2]
    }
}

/// Gain profile of the shift-matrix linear deterministic channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LdicParams {
    pub q: usize,
    pub n11: usize,
    pub n12: usize,
    pub n21: usize,
    pub n22: usize,
}

impl LdicParams {
    pub fn new(q: usize, n11: usize, n12: usize, n21: usize, n22: usize) -> Result<Self> {
        let p = Self { q, n11, n12, n21, n22 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.q > 16 {
            return Err(ChannelError::BadVectorLength(self.q));
        }
        for n in [self.n11, self.n12, self.n21, self.n22] {
            if n > self.q {
                return Err(ChannelError::GainOutOfRange { n, q: self.q });
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> usize {
        1 << self.q
    }
}

/// `H^(q-n) x` on a most-significant-first bit vector: the top `n` bits of
/// `x` move to the bottom `n` positions and zeros fill the top.
pub fn shift_apply(q: usize, n: usize, x: &[u8]) -> Result<Vec<u8>> {
    if x.len() != q {
        return Err(ChannelError::LengthMismatch {
            expected: q,
            got: x.len(),
        });
    }
    if n > q {
        return Err(ChannelError::GainOutOfRange { n, q });
    }
    let shift = q - n;
    Ok((0..q).map(|i| if i < shift { 0 } else { x[i - shift] & 1 }).collect())
}

/// [`shift_apply`] on the integer encoding of a bit vector (first bit is the
/// most significant).
pub fn shift_word(q: usize, n: usize, x: usize) -> usize {
    debug_assert!(n <= q);
    x >> (q - n)
}

pub fn bits_to_word(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn word_to_bits(q: usize, word: usize) -> Vec<u8> {
    (0..q).map(|i| ((word >> (q - 1 - i)) & 1) as u8).collect()
}

/// The linear deterministic channel as an [`InjectiveDetIc`] over
/// `{0,1}^q` symbols.
pub fn ldic_build(p: &LdicParams) -> Result<InjectiveDetIc> {
    p.validate()?;
    let size = p.alphabet();
    let q = p.q;
    let t1 = (0..size).map(|x| shift_word(q, p.n21, x)).collect();
    let t2 = (0..size).map(|x| shift_word(q, p.n12, x)).collect();
    let mut f3 = Vec::with_capacity(size * size);
    let mut f4 = Vec::with_capacity(size * size);
    for x in 0..size {
        for t in 0..size {
            f3.push(shift_word(q, p.n11, x) ^ t);
            f4.push(shift_word(q, p.n22, x) ^ t);
        }
    }
    let c = InjectiveDetIc::new([size; 6], t1, t2, f3, f4)?;
    if !injectivity_check(&c) {
        return Err(ChannelError::NotInjective);
    }
    Ok(c)
}

/// Generalized-feedback view of a deterministic channel with intermittent
/// feedback: `Y1 = S1·t2(X2)`, `Y2 = S2·t1(X1)`, with the erasure `*` as the
/// extra last letter of each feedback alphabet.
pub fn det_to_icgf(c: &InjectiveDetIc, fb: &FeedbackStateSpec) -> Result<IcGfChannel> {
    if !injectivity_check(c) {
        return Err(ChannelError::NotInjective);
    }
    let [x1s, x2s, t1s, t2s, y3s, y4s] = c.alphabets;
    let alphabets = [x1s, x2s, t2s + 1, t1s + 1, y3s, y4s];
    IcGfChannel::from_fn(alphabets, |[x1, x2], [y1, y2, y3, y4]| {
        if y3 != c.y3(x1, x2) || y4 != c.y4(x1, x2) {
            return 0.0;
        }
        let mut w = 0.0;
        for s1 in [true, false] {
            for s2 in [true, false] {
                let e1 = if s1 { c.t2(x2) } else { t2s };
                let e2 = if s2 { c.t1(x1) } else { t1s };
                if e1 == y1 && e2 == y2 {
                    w += fb.prob(s1, s2);
                }
            }
        }
        w
    })
}
