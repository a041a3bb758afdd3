//! Inner-bound evaluators.
//!
//! * Generalized feedback: the rate-splitting/compression region over
//!   `(Q, U1, V1, U2, V2, X1, X2)` ([`inner_region_gf`]), and the raw
//!   per-decoder constraint system of the block-Markov scheme
//!   ([`scheme_v_system`]) whose projection must coincide with it.
//! * Injective deterministic channels with intermittent feedback
//!   ([`inner_region_det_if`]).
//! * Union-over-distributions search drivers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{det_to_icgf, injectivity_check, ChannelError, FeedbackStateSpec, IcGfChannel, InjectiveDetIc};
use crate::probability::{JointPmf, Kernel, ProbabilityError, Variable, DEFAULT_CELL_CAP};
use crate::regions::{project_to_rate_plane, LinearRateSystem, RateRegion, RegionError};

/// Relative slack added to the `log2|X|` rate caps.
pub const CAP_MARGIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("incompatible distribution: {0}")]
    Incompatible(String),
    #[error("the distribution family is empty")]
    EmptyFamily,
    #[error("search needs {needed} evaluations, limit is {limit}")]
    TooManyEvaluations { needed: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, BoundsError>;

fn var(label: &str, size: usize) -> Variable {
    Variable::new(label, size)
}

/// Rate caps `log2|X_k|·(1 + CAP_MARGIN)`.
pub fn input_caps(x1: usize, x2: usize) -> [f64; 2] {
    [x1, x2].map(|s| (s as f64).log2() * (1.0 + CAP_MARGIN))
}

/// Per-user free factors `P(u|q)`, `P(x|u,q)`, `P(v|u,y,q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFactors {
    pub u_given_q: Kernel,
    pub x_given_uq: Kernel,
    pub v_given_uyq: Kernel,
}

/// Input distribution of the generalized-feedback bound. User `k` uses the
/// labels `Uk`, `Xk`, `Vk` and compresses its feedback output `Yk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfInputDistribution {
    pub p_q: Kernel,
    pub users: [UserFactors; 2],
}

const U: [&str; 2] = ["U1", "U2"];
const V: [&str; 2] = ["V1", "V2"];
const X: [&str; 2] = ["X1", "X2"];
const FB: [&str; 2] = ["Y1", "Y2"];
const RX: [&str; 2] = ["Y3", "Y4"];

impl GfInputDistribution {
    pub fn new(p_q: Kernel, users: [UserFactors; 2]) -> Result<Self> {
        let d = Self { p_q, users };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BoundsError::Incompatible(m));
        if !self.p_q.inputs().is_empty() || self.p_q.output().label != "Q" {
            return bad("P_Q must be an unconditional pmf over Q".into());
        }
        for (k, f) in self.users.iter().enumerate() {
            let expect = |kern: &Kernel, out: &str, ins: &[&str]| -> Result<()> {
                let mut got: Vec<&str> = kern.inputs().iter().map(|v| v.label.as_str()).collect();
                got.sort_unstable();
                let mut want = ins.to_vec();
                want.sort_unstable();
                if kern.output().label != out || got != want {
                    return Err(BoundsError::Incompatible(format!(
                        "expected factor {out}|{ins:?}, got {}|{got:?}",
                        kern.output().label
                    )));
                }
                Ok(())
            };
            expect(&f.u_given_q, U[k], &["Q"])?;
            expect(&f.x_given_uq, X[k], &[U[k], "Q"])?;
            expect(&f.v_given_uyq, V[k], &[U[k], FB[k], "Q"])?;
        }
        Ok(())
    }

    pub fn q_size(&self) -> usize {
        self.p_q.output().size
    }

    /// Builds the full joint over `(Q, U1, X1, U2, X2, Y1..Y4, V1, V2)`.
    pub fn joint(&self, ch: &IcGfChannel, cap: usize) -> Result<JointPmf> {
        for k in 0..2 {
            if self.users[k].x_given_uq.output().size != ch.alphabets[k] {
                return Err(BoundsError::Incompatible(format!("|{}| differs from the channel", X[k])));
            }
            let y_in = self.users[k]
                .v_given_uyq
                .inputs()
                .iter()
                .find(|v| v.label == FB[k])
                .map(|v| v.size);
            if y_in != Some(ch.alphabets[2 + k]) {
                return Err(BoundsError::Incompatible(format!("|{}| differs from the channel", FB[k])));
            }
        }
        let mut j = JointPmf::unit().extend_with_cap(&self.p_q, cap)?;
        for f in &self.users {
            j = j.extend_with_cap(&f.u_given_q, cap)?;
            j = j.extend_with_cap(&f.x_given_uq, cap)?;
        }
        for k in ch.kernels()? {
            j = j.extend_with_cap(&k, cap)?;
        }
        for f in &self.users {
            j = j.extend_with_cap(&f.v_given_uyq, cap)?;
        }
        Ok(j)
    }

    /// Trivial `Q`, `U`, `V`; inputs drawn independently from `px1`, `px2`.
    pub fn plain_inputs(px1: &[f64], px2: &[f64], y_sizes: [usize; 2]) -> Result<Self> {
        Self::structured(px1, px2, y_sizes, false)
    }

    /// Trivial `Q`, `U`; each encoder's `V` is a copy of its feedback output.
    pub fn feedback_copies(px1: &[f64], px2: &[f64], y_sizes: [usize; 2]) -> Result<Self> {
        Self::structured(px1, px2, y_sizes, true)
    }

    fn structured(px1: &[f64], px2: &[f64], y_sizes: [usize; 2], copy: bool) -> Result<Self> {
        let q = var("Q", 1);
        let p_q = Kernel::marginal(q.clone(), vec![1.0])?;
        let mut users = Vec::with_capacity(2);
        for (k, px) in [px1, px2].into_iter().enumerate() {
            let u = var(U[k], 1);
            let y = var(FB[k], y_sizes[k]);
            let u_given_q = Kernel::deterministic(vec![q.clone()], u.clone(), |_| 0)?;
            let x_given_uq = Kernel::from_fn(vec![u.clone(), q.clone()], var(X[k], px.len()), |_, x| px[x])?;
            let v_size = if copy { y_sizes[k] } else { 1 };
            let v_given_uyq = Kernel::deterministic(vec![u, y, q.clone()], var(V[k], v_size), |s| if copy { s[1] } else { 0 })?;
            users.push(UserFactors {
                u_given_q,
                x_given_uq,
                v_given_uyq,
            });
        }
        let [a, b]: [UserFactors; 2] = users.try_into().expect("two users");
        Self::new(p_q, [a, b])
    }
}

/// Mutual-information constants of the generalized-feedback region, for one
/// user `k` with `j` the other user and `Y` its receiver output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UserConstants {
    /// `I(Uk,Vk,Xk; Y,Uj,Vj | Q)`
    pub a: f64,
    /// `I(U1,V1,U2,V2,Xk; Y | Q)`
    pub b: f64,
    /// `I(Uj,Vj; Uk,Vk,Xk | Q)`
    pub c: f64,
    /// `I(Uj,Vj,Xk; Y | Uk,Vk,Q)`
    pub d: f64,
    /// `I(Uk,Vk,Xk; Y | Uj,Vj,Q)`
    pub e: f64,
    /// `I(Xk; Y | U1,V1,U2,V2,Q)`
    pub f: f64,
    /// `I(Vk; Yk | Uk,Q)`, the compression rate of encoder `k`.
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Theorem1Constants {
    pub users: [UserConstants; 2],
}

pub fn theorem1_constants(d: &GfInputDistribution, ch: &IcGfChannel) -> Result<Theorem1Constants> {
    theorem1_constants_with_cap(d, ch, DEFAULT_CELL_CAP)
}

pub fn theorem1_constants_with_cap(d: &GfInputDistribution, ch: &IcGfChannel, cap: usize) -> Result<Theorem1Constants> {
    let joint = d.joint(ch, cap)?;
    constants_from_joint(&joint)
}

/// Evaluates the fourteen constants on a joint carrying the labels
/// `Q, U1, V1, U2, V2, X1, X2, Y1..Y4`.
pub fn constants_from_joint(joint: &JointPmf) -> Result<Theorem1Constants> {
    let mut users = [UserConstants::default(); 2];
    for k in 0..2 {
        let j = 1 - k;
        let (uk, vk, xk, yk, y) = (U[k], V[k], X[k], FB[k], RX[k]);
        let (uj, vj) = (U[j], V[j]);
        let mi = |a: &[&str], b: &[&str], g: &[&str]| joint.mutual_information(a, b, g);
        users[k] = UserConstants {
            a: mi(&[uk, vk, xk], &[y, uj, vj], &["Q"])?,
            b: mi(&["U1", "V1", "U2", "V2", xk], &[y], &["Q"])?,
            c: mi(&[uj, vj], &[uk, vk, xk], &["Q"])?,
            d: mi(&[uj, vj, xk], &[y], &[uk, vk, "Q"])?,
            e: mi(&[uk, vk, xk], &[y], &[uj, vj, "Q"])?,
            f: mi(&[xk], &[y], &["U1", "V1", "U2", "V2", "Q"])?,
            g: mi(&[vk], &[yk], &[uk, "Q"])?,
        };
    }
    Ok(Theorem1Constants { users })
}

/// Switches for the emitted inequality systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOptions {
    /// Add `R10 ≤ R1` and `R20 ≤ R2` (the private parts have nonnegative rate).
    pub split_cap: bool,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self { split_cap: true }
    }
}

const OWN_SPLIT: [&str; 2] = ["R10", "R20"];
const RATE: [&str; 2] = ["R1", "R2"];
const RHAT: [&str; 2] = ["Rhat1", "Rhat2"];

fn side_constraints(s: &mut LinearRateSystem, opts: SystemOptions) -> Result<()> {
    for k in 0..2 {
        s.add_ge(&[(OWN_SPLIT[k], 1)], 0.0)?;
        if opts.split_cap {
            s.add_le(&[(OWN_SPLIT[k], 1), (RATE[k], -1)], 0.0)?;
        }
    }
    Ok(())
}

/// The ten inequalities over `(R1, R2, R10, R20)`, `min{·,·}` terms emitted
/// as row pairs.
pub fn theorem1_system(c: &Theorem1Constants, opts: SystemOptions) -> Result<LinearRateSystem> {
    let mut s = LinearRateSystem::new(&["R1", "R2", "R10", "R20"])?;
    for k in 0..2 {
        let j = 1 - k;
        let u = &c.users[k];
        let (gk, gj) = (c.users[k].g, c.users[j].g);
        let (rk, rk0, rj0) = (RATE[k], OWN_SPLIT[k], OWN_SPLIT[j]);
        s.add_le(&[(rk, 1)], u.a - gk)?;
        s.add_le(&[(rk, 1), (rj0, 1)], u.b + u.c - gk - gj)?;
        s.add_le(&[(rk, 1), (rk0, -1), (rj0, 1)], u.b - gk + u.c - gj)?;
        s.add_le(&[(rk, 1), (rk0, -1), (rj0, 1)], u.d + u.c - gj)?;
        s.add_le(&[(rk, 1), (rk0, -1)], u.e + u.c - gk - gj)?;
        s.add_le(&[(rk, 1), (rk0, -1)], u.d + u.c - gk - gj)?;
        s.add_le(&[(rk, 1), (rk0, -1)], u.f + u.c)?;
    }
    side_constraints(&mut s, opts)?;
    Ok(s)
}

/// Per-decoder constraints of the block-Markov scheme over
/// `(R1, R2, R10, R20, Rhat1, Rhat2)`, with the private rates substituted as
/// `Rkk = Rk − Rk0`.
pub fn scheme_v_system(c: &Theorem1Constants) -> Result<LinearRateSystem> {
    let mut s = LinearRateSystem::new(&["R1", "R2", "R10", "R20", "Rhat1", "Rhat2"])?;
    for k in 0..2 {
        let j = 1 - k;
        let u = &c.users[k];
        let (rk, rk0, rj0) = (RATE[k], OWN_SPLIT[k], OWN_SPLIT[j]);
        let (hk, hj) = (RHAT[k], RHAT[j]);
        // covering: Rhat_k >= I(Vk; Yk | Uk)
        s.add_ge(&[(hk, 1)], u.g)?;
        s.add_ge(&[(hk, 1)], 0.0)?;
        // Rkk + Rk0 = Rk
        s.add_le(&[(rk, 1), (hk, 1)], u.a)?;
        s.add_le(&[(rk, 1), (hk, 1), (hj, 1)], u.b + u.c)?;
        s.add_le(&[(rk, 1), (rj0, 1), (hk, 1), (hj, 1)], u.b + u.c)?;
        // Rkk alone is Rk - Rk0
        let private = [(rk, 1), (rk0, -1)];
        let with = |extra: &[(&'static str, i64)]| {
            let mut t = private.to_vec();
            t.extend_from_slice(extra);
            t
        };
        s.add_le(&private, u.f + u.c)?;
        s.add_le(&with(&[(rj0, 1), (hj, 1)]), u.d + u.c)?;
        s.add_le(&with(&[(hk, 1), (hj, 1)]), u.e + u.c)?;
        s.add_le(&with(&[(hk, 1), (hj, 1)]), u.d + u.c)?;
        s.add_le(&with(&[(rj0, 1), (hk, 1), (hj, 1)]), u.b + u.c)?;
        // nonnegativity of Rk0 and Rkk
        s.add_ge(&[(rk0, 1)], 0.0)?;
        s.add_ge(&private, 0.0)?;
    }
    Ok(s)
}

pub fn inner_region_gf(d: &GfInputDistribution, ch: &IcGfChannel, opts: SystemOptions) -> Result<RateRegion> {
    let c = theorem1_constants(d, ch)?;
    let s = theorem1_system(&c, opts)?;
    Ok(project_to_rate_plane(&s, input_caps(ch.alphabets[0], ch.alphabets[1]))?)
}

pub fn scheme_v_region(d: &GfInputDistribution, ch: &IcGfChannel) -> Result<RateRegion> {
    let c = theorem1_constants(d, ch)?;
    let s = scheme_v_system(&c)?;
    Ok(project_to_rate_plane(&s, input_caps(ch.alphabets[0], ch.alphabets[1]))?)
}

/// Independent inputs `P(q) P(x1|q) P(x2|q)` for the deterministic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetIfInputDistribution {
    pub p_q: Kernel,
    pub x1_given_q: Kernel,
    pub x2_given_q: Kernel,
}

impl DetIfInputDistribution {
    pub fn new(p_q: Kernel, x1_given_q: Kernel, x2_given_q: Kernel) -> Result<Self> {
        let ok = p_q.inputs().is_empty()
            && p_q.output().label == "Q"
            && x1_given_q.output().label == "X1"
            && x2_given_q.output().label == "X2"
            && [&x1_given_q, &x2_given_q]
                .iter()
                .all(|k| k.inputs().len() == 1 && k.inputs()[0] == *p_q.output());
        if !ok {
            return Err(BoundsError::Incompatible("expected factors Q, X1|Q, X2|Q".into()));
        }
        Ok(Self {
            p_q,
            x1_given_q,
            x2_given_q,
        })
    }

    /// `|Q| = 1` with the given input pmfs.
    pub fn product(px1: &[f64], px2: &[f64]) -> Result<Self> {
        let q = var("Q", 1);
        Self::new(
            Kernel::marginal(q.clone(), vec![1.0])?,
            Kernel::from_fn(vec![q.clone()], var("X1", px1.len()), |_, x| px1[x])?,
            Kernel::from_fn(vec![q], var("X2", px2.len()), |_, x| px2[x])?,
        )
    }

    pub fn uniform(x1: usize, x2: usize) -> Result<Self> {
        Self::product(&vec![1.0 / x1 as f64; x1], &vec![1.0 / x2 as f64; x2])
    }

    /// Time-sharing mixture: `pq[i]` weight on `(px1[i], px2[i])`.
    pub fn mixture(pq: &[f64], px1: &[Vec<f64>], px2: &[Vec<f64>]) -> Result<Self> {
        let q = var("Q", pq.len());
        Self::new(
            Kernel::marginal(q.clone(), pq.to_vec())?,
            Kernel::from_fn(vec![q.clone()], var("X1", px1[0].len()), |s, x| px1[s[0]][x])?,
            Kernel::from_fn(vec![q], var("X2", px2[0].len()), |s, x| px2[s[0]][x])?,
        )
    }
}

/// Entropy constants of the intermittent-feedback region. Index `k` is user
/// `k + 1`; `T̃1 = S2·T1`, `T̃2 = S1·T2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Theorem2Constants {
    /// `H(Y_{k+2} | T_j, T̃1, T̃2, Q)`
    pub a: [f64; 2],
    /// `H(T̃1 | Q)`, `H(T̃2 | Q)`
    pub b: [f64; 2],
    /// `H(Y_{k+2} | Q)`
    pub c: [f64; 2],
    /// `H(Y_{k+2} | T_k, T̃1, T̃2, Q)`
    pub d: [f64; 2],
    /// `H(Y_{k+2} | T1, T2, T̃1, T̃2, Q)`
    pub f: [f64; 2],
}

/// Joint over `(Q, T1, T2, TT1, TT2, Y3, Y4)`, the only variables the
/// intermittent-feedback constants depend on. The inputs and states are
/// summed out while the table is filled, which keeps `q = 3` instances far
/// below the cell cap. The erasure letter of `TTk` is `|Tk|`.
pub fn det_if_joint(det: &InjectiveDetIc, d: &DetIfInputDistribution, fb: &FeedbackStateSpec) -> Result<JointPmf> {
    if !injectivity_check(det) {
        return Err(ChannelError::NotInjective.into());
    }
    let [x1s, x2s, t1s, t2s, y3s, y4s] = det.alphabets;
    if d.x1_given_q.output().size != x1s || d.x2_given_q.output().size != x2s {
        return Err(BoundsError::Incompatible("input alphabets differ from the channel".into()));
    }
    let qs = d.p_q.output().size;
    let vars = vec![
        var("Q", qs),
        var("T1", t1s),
        var("T2", t2s),
        var("TT1", t1s + 1),
        var("TT2", t2s + 1),
        var("Y3", y3s),
        var("Y4", y4s),
    ];
    let sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
    let cells = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).unwrap_or(usize::MAX);
    if cells > DEFAULT_CELL_CAP {
        return Err(ProbabilityError::CellCapExceeded {
            cells,
            cap: DEFAULT_CELL_CAP,
        }
        .into());
    }
    let index = |sym: [usize; 7]| sym.iter().zip(&sizes).fold(0, |acc, (&s, &n)| acc * n + s);
    let mut w = vec![0.0; cells];
    let pq = d.p_q.weights();
    for q in 0..qs {
        let r1 = d.x1_given_q.row(&[q]);
        let r2 = d.x2_given_q.row(&[q]);
        for (x1, &a) in r1.iter().enumerate() {
            for (x2, &b) in r2.iter().enumerate() {
                let base = pq[q] * a * b;
                if base == 0.0 {
                    continue;
                }
                let (t1, t2) = (det.t1(x1), det.t2(x2));
                let (y3, y4) = (det.f3(x1, t2), det.f4(x2, t1));
                for s1_on in [false, true] {
                    for s2_on in [false, true] {
                        let ps = fb.prob(s1_on, s2_on);
                        if ps == 0.0 {
                            continue;
                        }
                        let tt1 = if s2_on { t1 } else { t1s };
                        let tt2 = if s1_on { t2 } else { t2s };
                        w[index([q, t1, t2, tt1, tt2, y3, y4])] += base * ps;
                    }
                }
            }
        }
    }
    Ok(JointPmf::new(vars, w)?)
}

pub fn theorem2_constants(det: &InjectiveDetIc, d: &DetIfInputDistribution, fb: &FeedbackStateSpec) -> Result<Theorem2Constants> {
    let j = det_if_joint(det, d, fb)?;
    let h = |t: &str, g: &[&str]| j.entropy(&[t], g);
    let mut c = Theorem2Constants::default();
    let (y, own_t, other_t) = (["Y3", "Y4"], ["T1", "T2"], ["T2", "T1"]);
    c.b = [h("TT1", &["Q"])?, h("TT2", &["Q"])?];
    for k in 0..2 {
        c.a[k] = h(y[k], &[other_t[k], "TT1", "TT2", "Q"])?;
        c.c[k] = h(y[k], &["Q"])?;
        c.d[k] = h(y[k], &[own_t[k], "TT1", "TT2", "Q"])?;
        c.f[k] = h(y[k], &["T1", "T2", "TT1", "TT2", "Q"])?;
    }
    Ok(c)
}

/// The intermittent-feedback inequalities over `(R1, R2, R10, R20)`.
pub fn theorem2_system(c: &Theorem2Constants, opts: SystemOptions) -> Result<LinearRateSystem> {
    let mut s = LinearRateSystem::new(&["R1", "R2", "R10", "R20"])?;
    let [b1, b2] = c.b;
    for k in 0..2 {
        let j = 1 - k;
        let (rk, rk0, rj0) = (RATE[k], OWN_SPLIT[k], OWN_SPLIT[j]);
        // user 1 reads b1 where user 2 reads b2 and vice versa
        let (b_own, b_other) = (c.b[k], c.b[j]);
        s.add_le(&[(rk, 1)], c.a[k] + b_own)?;
        s.add_le(&[(rk, 1), (rj0, 1)], c.c[k])?;
        s.add_le(&[(rk, 1), (rk0, -1), (rj0, 1)], c.c[k])?;
        s.add_le(&[(rk, 1), (rk0, -1), (rj0, 1)], c.d[k] + b_other)?;
        s.add_le(&[(rk, 1), (rk0, -1)], c.a[k])?;
        s.add_le(&[(rk, 1), (rk0, -1)], c.d[k])?;
        s.add_le(&[(rk, 1), (rk0, -1)], c.f[k] + b1 + b2)?;
    }
    side_constraints(&mut s, opts)?;
    Ok(s)
}

pub fn inner_region_det_if(
    det: &InjectiveDetIc,
    d: &DetIfInputDistribution,
    fb: &FeedbackStateSpec,
    opts: SystemOptions,
) -> Result<RateRegion> {
    let c = theorem2_constants(det, d, fb)?;
    let s = theorem2_system(&c, opts)?;
    Ok(project_to_rate_plane(&s, input_caps(det.alphabets[0], det.alphabets[1]))?)
}

/// Generalized-feedback region of the deterministic channel with
/// `Y1 = T̃2`, `Y2 = T̃1`, `Uk` trivial and `Vk` a copy of `Yk`, for
/// comparison against [`inner_region_det_if`].
pub fn specialized_gf_region(
    det: &InjectiveDetIc,
    d: &DetIfInputDistribution,
    fb: &FeedbackStateSpec,
    opts: SystemOptions,
) -> Result<RateRegion> {
    let ch = det_to_icgf(det, fb)?;
    let q = d.p_q.output().clone();
    let mut users = Vec::new();
    for k in 0..2 {
        let u = var(U[k], 1);
        let xk = if k == 0 { &d.x1_given_q } else { &d.x2_given_q };
        let y = var(FB[k], ch.alphabets[2 + k]);
        users.push(UserFactors {
            u_given_q: Kernel::deterministic(vec![q.clone()], u.clone(), |_| 0)?,
            x_given_uq: Kernel::from_fn(vec![u.clone(), q.clone()], xk.output().clone(), |s, x| xk.row(&[s[1]])[x])?,
            v_given_uyq: Kernel::deterministic(vec![u, y.clone(), q.clone()], var(V[k], y.size), |s| s[1])?,
        });
    }
    let [a, b]: [UserFactors; 2] = users.try_into().expect("two users");
    let gf = GfInputDistribution::new(d.p_q.clone(), [a, b])?;
    inner_region_gf(&gf, &ch, opts)
}

/// Which distributions a union search evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Include the uniform-input distribution.
    pub uniform: bool,
    /// Simplex grid step `1/grid_resolution`; 0 disables the grid.
    pub grid_resolution: usize,
    /// Number of seeded Dirichlet(1) samples.
    pub samples: usize,
    pub seed: u64,
    /// Time-sharing alphabet sizes cycled through by the random samples.
    pub q_sizes: Vec<usize>,
    pub max_evaluations: usize,
    pub options: SystemOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            uniform: true,
            grid_resolution: 4,
            samples: 64,
            seed: 0,
            q_sizes: vec![1, 2],
            max_evaluations: 200_000,
            options: SystemOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness<D> {
    pub vertex: [f64; 2],
    /// Position of the distribution in the evaluated family.
    pub index: usize,
    pub distribution: D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<D> {
    pub region: RateRegion,
    pub witnesses: Vec<Witness<D>>,
    pub evaluated: usize,
}

/// All points of the probability simplex over `m` letters with coordinates
/// in multiples of `1/res`.
pub fn simplex_grid(m: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == m - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(m, left - c, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 || res == 0 {
        return out;
    }
    rec(m, res, res, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Dirichlet(1) sample via normalized exponentials.
pub fn dirichlet<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let mut p: Vec<f64> = e.iter().map(|v| v / s).collect();
    // push the rounding residue into the largest entry
    let resid = 1.0 - p.iter().sum::<f64>();
    let imax = (0..m).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap_or(0);
    p[imax] += resid;
    p
}

fn count_grid(m: usize, res: usize) -> usize {
    // C(res + m - 1, m - 1)
    let mut c: usize = 1;
    for i in 0..m.saturating_sub(1) {
        c = c.saturating_mul(res + i + 1) / (i + 1);
    }
    c
}

/// Family of product input distributions for the deterministic model.
pub fn det_family(x_sizes: [usize; 2], cfg: &SearchConfig) -> Result<Vec<DetIfInputDistribution>> {
    let mut family = Vec::new();
    if cfg.uniform {
        family.push(DetIfInputDistribution::uniform(x_sizes[0], x_sizes[1])?);
    }
    if cfg.grid_resolution > 0 {
        let needed = count_grid(x_sizes[0], cfg.grid_resolution)
            .saturating_mul(count_grid(x_sizes[1], cfg.grid_resolution));
        if needed > cfg.max_evaluations {
            return Err(BoundsError::TooManyEvaluations {
                needed,
                limit: cfg.max_evaluations,
            });
        }
        let g1 = simplex_grid(x_sizes[0], cfg.grid_resolution);
        let g2 = simplex_grid(x_sizes[1], cfg.grid_resolution);
        for a in &g1 {
            for b in &g2 {
                family.push(DetIfInputDistribution::product(a, b)?);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.samples {
        let qs = cfg.q_sizes.get(i % cfg.q_sizes.len().max(1)).copied().unwrap_or(1).max(1);
        let pq = dirichlet(&mut rng, qs);
        let px1: Vec<Vec<f64>> = (0..qs).map(|_| dirichlet(&mut rng, x_sizes[0])).collect();
        let px2: Vec<Vec<f64>> = (0..qs).map(|_| dirichlet(&mut rng, x_sizes[1])).collect();
        family.push(DetIfInputDistribution::mixture(&pq, &px1, &px2)?);
    }
    if family.len() > cfg.max_evaluations {
        return Err(BoundsError::TooManyEvaluations {
            needed: family.len(),
            limit: cfg.max_evaluations,
        });
    }
    Ok(family)
}

/// Random generalized-feedback distribution with `|Q| = q`, `|Uk|` in
/// `1..=|Xk|` and `|Vk|` in `1..=|Yk|+1`.
pub fn random_gf_distribution<R: Rng>(rng: &mut R, ch: &IcGfChannel, q: usize) -> Result<GfInputDistribution> {
    let qv = var("Q", q);
    let pq = dirichlet(rng, q);
    let p_q = Kernel::marginal(qv.clone(), pq)?;
    let mut users = Vec::with_capacity(2);
    for k in 0..2 {
        let xs = ch.alphabets[k];
        let ys = ch.alphabets[2 + k];
        let us = rng.gen_range(1..=xs);
        let vs = rng.gen_range(1..=ys + 1);
        let u = var(U[k], us);
        let mut rows = |n_rows: usize, m: usize| -> Vec<f64> { (0..n_rows).flat_map(|_| dirichlet(rng, m)).collect() };
        let u_given_q = Kernel::new(vec![qv.clone()], u.clone(), rows(q, us))?;
        let x_given_uq = Kernel::new(vec![u.clone(), qv.clone()], var(X[k], xs), rows(us * q, xs))?;
        let v_given_uyq = Kernel::new(vec![u, var(FB[k], ys), qv.clone()], var(V[k], vs), rows(us * ys * q, vs))?;
        users.push(UserFactors {
            u_given_q,
            x_given_uq,
            v_given_uyq,
        });
    }
    let [a, b]: [UserFactors; 2] = users.try_into().expect("two users");
    GfInputDistribution::new(p_q, [a, b])
}

/// Family for the generalized-feedback search: uniform/grid input pmfs with
/// trivial auxiliaries and with feedback-copy compression, plus random
/// samples over all factors.
pub fn gf_family(ch: &IcGfChannel, cfg: &SearchConfig) -> Result<Vec<GfInputDistribution>> {
    let xs = [ch.alphabets[0], ch.alphabets[1]];
    let ys = [ch.alphabets[2], ch.alphabets[3]];
    let mut inputs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if cfg.uniform {
        inputs.push((vec![1.0 / xs[0] as f64; xs[0]], vec![1.0 / xs[1] as f64; xs[1]]));
    }
    if cfg.grid_resolution > 0 {
        let needed = 2 * count_grid(xs[0], cfg.grid_resolution).saturating_mul(count_grid(xs[1], cfg.grid_resolution));
        if needed > cfg.max_evaluations {
            return Err(BoundsError::TooManyEvaluations {
                needed,
                limit: cfg.max_evaluations,
            });
        }
        for a in simplex_grid(xs[0], cfg.grid_resolution) {
            for b in simplex_grid(xs[1], cfg.grid_resolution) {
                inputs.push((a.clone(), b));
            }
        }
    }
    let mut family = Vec::new();
    for (a, b) in &inputs {
        family.push(GfInputDistribution::plain_inputs(a, b, ys)?);
        family.push(GfInputDistribution::feedback_copies(a, b, ys)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.samples {
        let q = cfg.q_sizes.get(i % cfg.q_sizes.len().max(1)).copied().unwrap_or(1).max(1);
        family.push(random_gf_distribution(&mut rng, ch, q)?);
    }
    if family.len() > cfg.max_evaluations {
        return Err(BoundsError::TooManyEvaluations {
            needed: family.len(),
            limit: cfg.max_evaluations,
        });
    }
    Ok(family)
}

/// Evaluates `eval` on every member of `family` in parallel and returns the
/// convex hull of the union of the resulting regions (time sharing), with a
/// witness distribution for every hull vertex.
pub fn search_union<D, F>(family: Vec<D>, eval: F) -> Result<SearchResult<D>>
where
    D: Clone + Send + Sync,
    F: Fn(&D) -> Result<RateRegion> + Sync,
{
    if family.is_empty() {
        return Err(BoundsError::EmptyFamily);
    }
    let regions: Vec<RateRegion> = family.par_iter().map(&eval).collect::<Result<Vec<_>>>()?;
    let mut points: Vec<([f64; 2], usize)> = Vec::new();
    for (i, r) in regions.iter().enumerate() {
        points.extend(r.vertices().iter().map(|&v| (v, i)));
    }
    let region = RateRegion::from_points(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let witnesses = region
        .vertices()
        .iter()
        .map(|&v| {
            // the distribution whose region contains v (first in family order)
            let index = regions
                .iter()
                .position(|r| r.contains(v, 1e-9))
                .or_else(|| {
                    points
                        .iter()
                        .filter(|p| p.0[0] >= v[0] - 1e-9 && p.0[1] >= v[1] - 1e-9)
                        .map(|p| p.1)
                        .next()
                })
                .unwrap_or(0);
            Witness {
                vertex: v,
                index,
                distribution: family[index].clone(),
            }
        })
        .collect();
    Ok(SearchResult {
        region,
        witnesses,
        evaluated: family.len(),
    })
}

pub fn search_union_det(
    det: &InjectiveDetIc,
    fb: &FeedbackStateSpec,
    cfg: &SearchConfig,
) -> Result<SearchResult<DetIfInputDistribution>> {
    let family = det_family([det.alphabets[0], det.alphabets[1]], cfg)?;
    search_union(family, |d| inner_region_det_if(det, d, fb, cfg.options))
}

/// Which generalized-feedback evaluator a search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GfEvaluator {
    Theorem1,
    SchemeV,
}

pub fn search_union_gf(
    ch: &IcGfChannel,
    cfg: &SearchConfig,
    evaluator: GfEvaluator,
) -> Result<SearchResult<GfInputDistribution>> {
    let family = gf_family(ch, cfg)?;
    search_union(family, |d| match evaluator {
        GfEvaluator::Theorem1 => inner_region_gf(d, ch, cfg.options),
        GfEvaluator::SchemeV => scheme_v_region(d, ch),
    })
}
