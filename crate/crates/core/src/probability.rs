//! Finite-alphabet joint distributions and information measures.
//!
//! A [`JointPmf`] is a dense tensor over an ordered tuple of labeled
//! variables, stored row-major with the last variable varying fastest.
//! Conditional factors are [`Kernel`]s, and [`JointPmf::extend`] chains a
//! kernel onto an existing joint. All information quantities are in bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest joint tensor accepted by default (2^22 cells).
pub const DEFAULT_CELL_CAP: usize = 1 << 22;

/// Tolerance on normalisation of pmfs and kernel rows.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Mutual information below `-NEGATIVE_INFO_ERROR` signals a broken pmf.
pub const NEGATIVE_INFO_ERROR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("unknown variable label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate variable label `{0}`")]
    DuplicateLabel(String),
    #[error("variable `{0}` has an empty alphabet")]
    EmptyAlphabet(String),
    #[error("expected {expected} weights, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid weight {value} at cell {index}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("row {row} sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("joint would need {cells} cells, cap is {cap}")]
    CellCapExceeded { cells: usize, cap: usize },
    #[error("label set must not be empty")]
    EmptyLabelSet,
    #[error("label `{0}` appears in more than one argument set")]
    OverlappingSets(String),
    #[error("mutual information {0} is negative beyond tolerance")]
    NegativeInformation(f64),
}

pub type Result<T> = std::result::Result<T, ProbabilityError>;

/// A labeled finite random variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub label: String,
    pub size: usize,
}

impl Variable {
    pub fn new(label: impl Into<String>, size: usize) -> Self {
        Self {
            label: label.into(),
            size,
        }
    }
}

fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn checked_cells(sizes: impl IntoIterator<Item = usize>, cap: usize) -> Result<usize> {
    let mut cells: usize = 1;
    for s in sizes {
        cells = cells
            .checked_mul(s)
            .ok_or(ProbabilityError::CellCapExceeded {
                cells: usize::MAX,
                cap,
            })?;
    }
    if cells > cap {
        return Err(ProbabilityError::CellCapExceeded { cells, cap });
    }
    Ok(cells)
}

fn check_weight(index: usize, value: f64) -> Result<()> {
    if !(0.0..=1.0 + SUM_TOLERANCE).contains(&value) {
        return Err(ProbabilityError::InvalidWeight { index, value });
    }
    Ok(())
}

/// Conditional pmf of one output variable given an ordered list of inputs.
///
/// Rows are indexed by the mixed-radix value of the input symbols (last input
/// fastest); each row holds `output.size` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    inputs: Vec<Variable>,
    output: Variable,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(inputs: Vec<Variable>, output: Variable, weights: Vec<f64>) -> Result<Self> {
        let kernel = Self {
            inputs,
            output,
            weights,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Builds a kernel from a function of (input symbols, output symbol).
    pub fn from_fn(
        inputs: Vec<Variable>,
        output: Variable,
        mut weight: impl FnMut(&[usize], usize) -> f64,
    ) -> Result<Self> {
        let rows: usize = inputs.iter().map(|v| v.size).product();
        let sizes: Vec<usize> = inputs.iter().map(|v| v.size).collect();
        let mut weights = Vec::with_capacity(rows * output.size);
        let mut symbols = vec![0usize; inputs.len()];
        for row in 0..rows {
            decode_index(row, &sizes, &mut symbols);
            for y in 0..output.size {
                weights.push(weight(&symbols, y));
            }
        }
        Self::new(inputs, output, weights)
    }

    /// Kernel placing all mass on `map(inputs)`.
    pub fn deterministic(
        inputs: Vec<Variable>,
        output: Variable,
        mut map: impl FnMut(&[usize]) -> usize,
    ) -> Result<Self> {
        Self::from_fn(inputs, output, |x, y| if map(x) == y { 1.0 } else { 0.0 })
    }

    /// A kernel without inputs, i.e. a plain pmf over `output`.
    pub fn marginal(output: Variable, weights: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), output, weights)
    }

    pub fn uniform(inputs: Vec<Variable>, output: Variable) -> Result<Self> {
        let p = 1.0 / output.size as f64;
        Self::from_fn(inputs, output, |_, _| p)
    }

    pub fn inputs(&self) -> &[Variable] {
        &self.inputs
    }

    pub fn output(&self) -> &Variable {
        &self.output
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_count(&self) -> usize {
        self.inputs.iter().map(|v| v.size).product()
    }

    /// The pmf row for one combination of input symbols.
    pub fn row(&self, input_symbols: &[usize]) -> &[f64] {
        let sizes: Vec<usize> = self.inputs.iter().map(|v| v.size).collect();
        let r = encode_index(input_symbols, &sizes);
        &self.weights[r * self.output.size..(r + 1) * self.output.size]
    }

    fn validate(&self) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for v in self.inputs.iter().chain(std::iter::once(&self.output)) {
            if v.size == 0 {
                return Err(ProbabilityError::EmptyAlphabet(v.label.clone()));
            }
            if seen.contains(&v.label.as_str()) {
                return Err(ProbabilityError::DuplicateLabel(v.label.clone()));
            }
            seen.push(&v.label);
        }
        let expected = self.row_count() * self.output.size;
        if self.weights.len() != expected {
            return Err(ProbabilityError::ShapeMismatch {
                expected,
                got: self.weights.len(),
            });
        }
        for (i, &w) in self.weights.iter().enumerate() {
            check_weight(i, w)?;
        }
        for (row, chunk) in self.weights.chunks(self.output.size).enumerate() {
            let sum = neumaier_sum(chunk.iter().copied());
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(ProbabilityError::RowNotNormalized { row, sum });
            }
        }
        Ok(())
    }
}

fn decode_index(mut index: usize, sizes: &[usize], out: &mut [usize]) {
    for k in (0..sizes.len()).rev() {
        out[k] = index % sizes[k];
        index /= sizes[k];
    }
}

fn encode_index(symbols: &[usize], sizes: &[usize]) -> usize {
    symbols
        .iter()
        .zip(sizes)
        .fold(0, |acc, (&s, &n)| acc * n + s)
}

/// Dense joint pmf over labeled finite variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    variables: Vec<Variable>,
    weights: Vec<f64>,
}

impl JointPmf {
    pub fn new(variables: Vec<Variable>, weights: Vec<f64>) -> Result<Self> {
        Self::with_cap(variables, weights, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(variables: Vec<Variable>, weights: Vec<f64>, cap: usize) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::new();
        for v in &variables {
            if v.size == 0 {
                return Err(ProbabilityError::EmptyAlphabet(v.label.clone()));
            }
            if seen.contains(&v.label.as_str()) {
                return Err(ProbabilityError::DuplicateLabel(v.label.clone()));
            }
            seen.push(&v.label);
        }
        let cells = checked_cells(variables.iter().map(|v| v.size), cap)?;
        if weights.len() != cells {
            return Err(ProbabilityError::ShapeMismatch {
                expected: cells,
                got: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            check_weight(i, w)?;
        }
        let sum = neumaier_sum(weights.iter().copied());
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProbabilityError::NotNormalized(sum));
        }
        Ok(Self { variables, weights })
    }

    /// Joint of a single variable.
    pub fn single(variable: Variable, weights: Vec<f64>) -> Result<Self> {
        Self::new(vec![variable], weights)
    }

    /// The trivial joint over no variables (a single cell of mass 1).
    pub fn unit() -> Self {
        Self {
            variables: Vec::new(),
            weights: vec![1.0],
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_count(&self) -> usize {
        self.weights.len()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.label == label)
            .ok_or_else(|| ProbabilityError::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.variables.iter().any(|v| v.label == label)
    }

    pub fn size_of(&self, label: &str) -> Result<usize> {
        Ok(self.variables[self.position(label)?].size)
    }

    /// Probability of one full assignment, symbols in variable order.
    pub fn prob(&self, symbols: &[usize]) -> f64 {
        let sizes: Vec<usize> = self.variables.iter().map(|v| v.size).collect();
        self.weights[encode_index(symbols, &sizes)]
    }

    /// Appends `kernel`'s output variable, conditioned on its inputs.
    pub fn extend(&self, kernel: &Kernel) -> Result<Self> {
        self.extend_with_cap(kernel, DEFAULT_CELL_CAP)
    }

    pub fn extend_with_cap(&self, kernel: &Kernel, cap: usize) -> Result<Self> {
        if self.contains(&kernel.output.label) {
            return Err(ProbabilityError::DuplicateLabel(kernel.output.label.clone()));
        }
        let input_pos = kernel
            .inputs
            .iter()
            .map(|v| {
                let pos = self.position(&v.label)?;
                if self.variables[pos].size != v.size {
                    return Err(ProbabilityError::ShapeMismatch {
                        expected: self.variables[pos].size,
                        got: v.size,
                    });
                }
                Ok(pos)
            })
            .collect::<Result<Vec<_>>>()?;
        let out_size = kernel.output.size;
        let cells = checked_cells([self.weights.len(), out_size], cap)?;
        let sizes: Vec<usize> = self.variables.iter().map(|v| v.size).collect();
        let in_sizes: Vec<usize> = kernel.inputs.iter().map(|v| v.size).collect();
        let mut symbols = vec![0usize; sizes.len()];
        let mut in_symbols = vec![0usize; in_sizes.len()];
        let mut weights = Vec::with_capacity(cells);
        for (cell, &w) in self.weights.iter().enumerate() {
            decode_index(cell, &sizes, &mut symbols);
            for (k, &p) in input_pos.iter().enumerate() {
                in_symbols[k] = symbols[p];
            }
            let row = encode_index(&in_symbols, &in_sizes);
            let kr = &kernel.weights[row * out_size..(row + 1) * out_size];
            weights.extend(kr.iter().map(|&k| w * k));
        }
        let mut variables = self.variables.clone();
        variables.push(kernel.output.clone());
        Ok(Self { variables, weights })
    }

    /// Sums out every variable not in `keep`. The result lists variables in
    /// the order given by `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(ProbabilityError::EmptyLabelSet);
        }
        let weights = self.marginal_weights(keep)?;
        let variables = keep
            .iter()
            .map(|l| Ok(self.variables[self.position(l)?].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { variables, weights })
    }

    /// Dense marginal over `labels` (in that order); duplicates are rejected.
    pub fn marginal_weights(&self, labels: &[&str]) -> Result<Vec<f64>> {
        let positions = self.positions(labels)?;
        let sizes: Vec<usize> = self.variables.iter().map(|v| v.size).collect();
        let out_sizes: Vec<usize> = positions.iter().map(|&p| sizes[p]).collect();
        let out_cells: usize = out_sizes.iter().product();
        // strides of the kept variables inside the output tensor
        let mut out_stride = vec![0usize; sizes.len()];
        let mut acc = 1;
        for k in (0..positions.len()).rev() {
            out_stride[positions[k]] = acc;
            acc *= out_sizes[k];
        }
        let mut out = vec![0.0; out_cells];
        let mut symbols = vec![0usize; sizes.len()];
        let mut target = 0usize;
        for &w in &self.weights {
            if w != 0.0 {
                out[target] += w;
            }
            // odometer increment, keeping `target` in sync
            for k in (0..sizes.len()).rev() {
                symbols[k] += 1;
                target += out_stride[k];
                if symbols[k] < sizes[k] {
                    break;
                }
                target -= out_stride[k] * sizes[k];
                symbols[k] = 0;
            }
        }
        Ok(out)
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l)?;
            if out.contains(&p) {
                return Err(ProbabilityError::DuplicateLabel(l.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    fn joint_entropy(&self, labels: &[&str]) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let m = self.marginal_weights(labels)?;
        Ok(neumaier_sum(
            m.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()),
        ))
    }

    /// H(target | given) in bits.
    pub fn entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        if target.is_empty() {
            return Err(ProbabilityError::EmptyLabelSet);
        }
        disjoint(target, given)?;
        let both: Vec<&str> = target.iter().chain(given).copied().collect();
        let h = self.joint_entropy(&both)? - self.joint_entropy(given)?;
        Ok(h.max(0.0))
    }

    /// I(a; b | given) in bits.
    pub fn mutual_information(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(ProbabilityError::EmptyLabelSet);
        }
        disjoint(a, b)?;
        disjoint(a, given)?;
        disjoint(b, given)?;
        let ag: Vec<&str> = a.iter().chain(given).copied().collect();
        let bg: Vec<&str> = b.iter().chain(given).copied().collect();
        let abg: Vec<&str> = a.iter().chain(b).chain(given).copied().collect();
        let mi = self.joint_entropy(&ag)? + self.joint_entropy(&bg)?
            - self.joint_entropy(&abg)?
            - self.joint_entropy(given)?;
        if mi < -NEGATIVE_INFO_ERROR {
            return Err(ProbabilityError::NegativeInformation(mi));
        }
        Ok(mi.max(0.0))
    }
}

fn disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    match a.iter().find(|l| b.contains(l)) {
        Some(l) => Err(ProbabilityError::OverlappingSets(l.to_string())),
        None => Ok(()),
    }
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}
