//! Finite-alphabet subshifts of finite type with Markov measures.
//!
//! Symbols are dense integers `0..A`. A [`MarkovShift`] bundles the 0/1
//! transition matrix, a stationary [`MarkovMeasure`] supported on allowed
//! transitions, the Lyapunov exponent of the ultrametric and the sidedness
//! of its balls. Balls of radius `r` are cylinders of generation
//! `m = floor(-log r / λ)`: indices `0..=m` for one-sided shifts and
//! `-m..=m` for two-sided ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = u8;

const PERRON_TOL: f64 = 1e-13;
const PERRON_MAX_ITER: usize = 100_000;
const STOCHASTIC_TOL: f64 = 1e-12;

/// Slack applied before flooring `-log r / λ`, so that radii placed exactly on
/// a cylinder boundary do not lose a generation to rounding.
const GENERATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sided {
    OneSided,
    TwoSided,
}

/// Square 0/1 matrix of allowed transitions, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    size: usize,
    allowed: Vec<bool>,
}

impl TransitionMatrix {
    pub fn new(rows: &[Vec<u8>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 || size > Symbol::MAX as usize {
            return Err(Error::InvalidShift(format!(
                "alphabet size {size} outside 1..=255"
            )));
        }
        let mut allowed = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidShift(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            for &e in row {
                match e {
                    0 => allowed.push(false),
                    1 => allowed.push(true),
                    _ => {
                        return Err(Error::InvalidShift(format!(
                            "row {i} contains {e}; entries must be 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(Self { size, allowed })
    }

    pub fn full(size: usize) -> Self {
        Self {
            size,
            allowed: vec![true; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn allowed(&self, a: usize, b: usize) -> bool {
        self.allowed[a * self.size + b]
    }

    fn from_support(size: usize, kernel: &[f64]) -> Self {
        Self {
            size,
            allowed: kernel.iter().map(|&p| p > 0.0).collect(),
        }
    }

    /// Checks irreducibility and aperiodicity of the transition graph.
    ///
    /// On failure the error carries a witness: an unreachable pair of states
    /// or the period of the irreducible class.
    pub fn check_primitive(&self) -> Result<()> {
        let n = self.size;
        for from in 0..n {
            let reach = self.reachable_from(from);
            if let Some(to) = reach.iter().position(|&r| !r) {
                return Err(Error::Reducible { from, to });
            }
        }
        // BFS depths from state 0; the period is the gcd of depth defects
        // over all edges.
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for b in 0..n {
                if self.allowed(a, b) && depth[b] == usize::MAX {
                    depth[b] = depth[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        let mut period = 0usize;
        for a in 0..n {
            for b in 0..n {
                if self.allowed(a, b) {
                    let defect = (depth[a] as i64 + 1 - depth[b] as i64).unsigned_abs() as usize;
                    period = gcd(period, defect);
                }
            }
        }
        if period > 1 {
            return Err(Error::Periodic { period });
        }
        Ok(())
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let n = self.size;
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if self.allowed(a, b) && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.size)
            .map(|a| (0..self.size).map(|b| self.allowed(a, b) as u8).collect())
            .collect()
    }
}

pub(crate) fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Stationary Markov measure on a subshift of finite type.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMeasure {
    size: usize,
    initial: Vec<f64>,
    kernel: Vec<f64>,
    entropy: f64,
    parry: Option<PerronData>,
}

/// Perron eigendata of a primitive 0/1 matrix, normalised so that `u·v = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub eigenvalue: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl MarkovMeasure {
    /// Markov measure with an explicit kernel.
    ///
    /// When `initial` is `None` the stationary vector is computed; otherwise
    /// it is checked for stationarity.
    pub fn markov(
        transitions: &TransitionMatrix,
        kernel_rows: &[Vec<f64>],
        initial: Option<&[f64]>,
    ) -> Result<Self> {
        let n = transitions.size();
        if kernel_rows.len() != n {
            return Err(Error::InvalidShift(format!(
                "kernel has {} rows, expected {n}",
                kernel_rows.len()
            )));
        }
        let mut kernel = Vec::with_capacity(n * n);
        for (a, row) in kernel_rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidShift(format!(
                    "kernel row {a} has {} entries, expected {n}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (b, &p) in row.iter().enumerate() {
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidShift(format!(
                        "kernel entry ({a},{b}) = {p} is not a probability"
                    )));
                }
                if p > 0.0 && !transitions.allowed(a, b) {
                    return Err(Error::InvalidShift(format!(
                        "kernel puts mass {p} on forbidden transition {a}->{b}"
                    )));
                }
                sum += p;
                kernel.push(p);
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidShift(format!(
                    "kernel row {a} sums to {sum}"
                )));
            }
        }
        TransitionMatrix::from_support(n, &kernel).check_primitive()?;

        let initial = match initial {
            Some(p) => {
                if p.len() != n {
                    return Err(Error::InvalidShift(format!(
                        "initial vector has {} entries, expected {n}",
                        p.len()
                    )));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > STOCHASTIC_TOL || p.iter().any(|&x| x < 0.0) {
                    return Err(Error::InvalidShift(format!(
                        "initial vector is not a probability vector (sum {total})"
                    )));
                }
                let moved = left_multiply(p, &kernel, n);
                let defect = moved
                    .iter()
                    .zip(p)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if defect > STOCHASTIC_TOL {
                    return Err(Error::InvalidShift(format!(
                        "initial vector is not stationary (|pP - p| = {defect:e})"
                    )));
                }
                p.to_vec()
            }
            None => stationary_vector(&kernel, n)?,
        };
        let entropy = markov_entropy(&initial, &kernel, n);
        Ok(Self {
            size: n,
            initial,
            kernel,
            entropy,
            parry: None,
        })
    }

    /// Uniform Bernoulli measure on the full shift over `size` symbols.
    pub fn uniform(size: usize) -> Self {
        let p = 1.0 / size as f64;
        Self {
            size,
            initial: vec![p; size],
            kernel: vec![p; size * size],
            entropy: (size as f64).ln(),
            parry: Some(PerronData {
                eigenvalue: size as f64,
                left: vec![1.0 / (size as f64).sqrt(); size],
                right: vec![1.0 / (size as f64).sqrt(); size],
            }),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn kernel(&self, a: usize, b: usize) -> f64 {
        self.kernel[a * self.size + b]
    }

    pub fn kernel_rows(&self) -> Vec<Vec<f64>> {
        self.kernel.chunks(self.size).map(|r| r.to_vec()).collect()
    }

    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn is_parry(&self) -> bool {
        self.parry.is_some()
    }

    pub fn perron(&self) -> Option<&PerronData> {
        self.parry.as_ref()
    }

    /// Kernel of the time-reversed chain, `p_b P_ba / p_a`.
    pub fn reversed_kernel(&self) -> Vec<Vec<f64>> {
        let n = self.size;
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| self.initial[b] * self.kernel(b, a) / self.initial[a])
                    .collect()
            })
            .collect()
    }
}

fn left_multiply(p: &[f64], kernel: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for a in 0..n {
        for b in 0..n {
            out[b] += p[a] * kernel[a * n + b];
        }
    }
    out
}

fn stationary_vector(kernel: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..PERRON_MAX_ITER {
        let next = left_multiply(&p, kernel, n);
        let total: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().map(|x| x / total).collect();
        let delta = next
            .iter()
            .zip(&p)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        p = next;
        if delta < PERRON_TOL {
            return Ok(p);
        }
    }
    Err(Error::InvalidShift(
        "stationary vector did not converge".into(),
    ))
}

fn markov_entropy(p: &[f64], kernel: &[f64], n: usize) -> f64 {
    let mut h = 0.0;
    for a in 0..n {
        for b in 0..n {
            let q = kernel[a * n + b];
            if q > 0.0 {
                h -= p[a] * q * q.ln();
            }
        }
    }
    h
}

/// Perron eigenvector of `m` (or of its transpose) by power iteration from
/// the all-ones vector, L1-normalised at every step.
fn perron_vector(transitions: &TransitionMatrix, transpose: bool) -> Result<(f64, Vec<f64>)> {
    let n = transitions.size();
    let mut v = vec![1.0; n];
    let mut eigenvalue = 0.0;
    for _ in 0..PERRON_MAX_ITER {
        let mut next = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                let on = if transpose {
                    transitions.allowed(b, a)
                } else {
                    transitions.allowed(a, b)
                };
                if on {
                    next[a] += v[b];
                }
            }
        }
        let norm_in: f64 = v.iter().sum();
        let norm_out: f64 = next.iter().sum();
        eigenvalue = norm_out / norm_in;
        let next: Vec<f64> = next.iter().map(|x| x / norm_out).collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y / norm_in).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < PERRON_TOL {
            return Ok((eigenvalue, v));
        }
    }
    Err(Error::InvalidShift(format!(
        "power iteration did not reach tolerance {PERRON_TOL:e} (last eigenvalue {eigenvalue})"
    )))
}

/// Parry (maximal entropy) measure of a primitive subshift of finite type.
pub fn parry_measure(transitions: &TransitionMatrix) -> Result<MarkovMeasure> {
    transitions.check_primitive()?;
    let n = transitions.size();
    let (eigenvalue, right) = perron_vector(transitions, false)?;
    let (_, mut left) = perron_vector(transitions, true)?;
    let dot: f64 = left.iter().zip(&right).map(|(u, v)| u * v).sum();
    for u in &mut left {
        *u /= dot;
    }
    let initial: Vec<f64> = left.iter().zip(&right).map(|(u, v)| u * v).collect();
    let mut kernel = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if transitions.allowed(a, b) {
                kernel[a * n + b] = right[b] / (eigenvalue * right[a]);
            }
        }
    }
    Ok(MarkovMeasure {
        size: n,
        initial,
        kernel,
        entropy: eigenvalue.ln(),
        parry: Some(PerronData {
            eigenvalue,
            left,
            right,
        }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovShift {
    transitions: TransitionMatrix,
    measure: MarkovMeasure,
    lyapunov: f64,
    sided: Sided,
}

impl MarkovShift {
    pub fn new(
        transitions: TransitionMatrix,
        measure: MarkovMeasure,
        lyapunov: f64,
        sided: Sided,
    ) -> Result<Self> {
        if measure.size() != transitions.size() {
            return Err(Error::InvalidShift(format!(
                "measure over {} symbols, transitions over {}",
                measure.size(),
                transitions.size()
            )));
        }
        if !(lyapunov > 0.0 && lyapunov.is_finite()) {
            return Err(Error::InvalidShift(format!(
                "lyapunov exponent must be positive, got {lyapunov}"
            )));
        }
        transitions.check_primitive()?;
        Ok(Self {
            transitions,
            measure,
            lyapunov,
            sided,
        })
    }

    /// Full shift on `size` symbols with the uniform Bernoulli measure.
    pub fn full(size: usize, lyapunov: f64, sided: Sided) -> Result<Self> {
        Self::new(
            TransitionMatrix::full(size),
            MarkovMeasure::uniform(size),
            lyapunov,
            sided,
        )
    }

    pub fn alphabet_size(&self) -> usize {
        self.transitions.size()
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }

    pub fn measure(&self) -> &MarkovMeasure {
        &self.measure
    }

    pub fn lyapunov(&self) -> f64 {
        self.lyapunov
    }

    pub fn sided(&self) -> Sided {
        self.sided
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        let n = self.alphabet_size();
        word.iter().all(|&s| (s as usize) < n)
            && word
                .windows(2)
                .all(|w| self.transitions.allowed(w[0] as usize, w[1] as usize))
    }

    /// Number of symbols in a ball of generation `m`.
    pub fn ball_word_len(&self, m: usize) -> usize {
        match self.sided {
            Sided::OneSided => m + 1,
            Sided::TwoSided => 2 * m + 1,
        }
    }

    pub fn ball(&self, radius: f64, base_word: Vec<Symbol>) -> Result<CylinderBall> {
        let generation = ball_generation(radius, self.lyapunov)?;
        let expected = self.ball_word_len(generation);
        if base_word.len() != expected {
            return Err(Error::Domain(format!(
                "base word has {} symbols, a generation-{generation} ball needs {expected}",
                base_word.len()
            )));
        }
        if !self.is_admissible(&base_word) {
            return Err(Error::Domain("base word is not admissible".into()));
        }
        Ok(CylinderBall {
            base_word,
            generation,
            radius,
            sided: self.sided,
        })
    }
}

/// A metric ball, identified with the cylinder on its base word.
///
/// For two-sided balls `base_word[i]` is the symbol at index `i - generation`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderBall {
    pub base_word: Vec<Symbol>,
    pub generation: usize,
    pub radius: f64,
    pub sided: Sided,
}

/// Measure of the cylinder on `word`: `p_{a_0} ∏ P_{a_i a_{i+1}}`.
///
/// Inadmissible words (including out-of-range symbols) have measure 0 and the
/// empty word has measure 1.
pub fn cylinder_measure(shift: &MarkovShift, word: &[Symbol]) -> f64 {
    let Some((&first, _)) = word.split_first() else {
        return 1.0;
    };
    let n = shift.alphabet_size();
    if word.iter().any(|&s| s as usize >= n) {
        return 0.0;
    }
    let measure = shift.measure();
    let mut prob = measure.initial()[first as usize];
    for w in word.windows(2) {
        if !shift.transitions().allowed(w[0] as usize, w[1] as usize) {
            return 0.0;
        }
        prob *= measure.kernel(w[0] as usize, w[1] as usize);
    }
    prob
}

/// Generation of the cylinder equal to the open ball of radius `r` under the
/// metric with Lyapunov exponent `lyapunov`.
pub fn ball_generation(r: f64, lyapunov: f64) -> Result<usize> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius must lie in (0,1), got {r}")));
    }
    if !(lyapunov > 0.0 && lyapunov.is_finite()) {
        return Err(Error::Domain(format!(
            "lyapunov exponent must be positive, got {lyapunov}"
        )));
    }
    Ok((-r.ln() / lyapunov + GENERATION_SLACK).floor() as usize)
}

/// Radius of the exact cylinder boundary of generation `m`.
pub fn boundary_radius(m: usize, lyapunov: f64) -> f64 {
    (-(m as f64) * lyapunov).exp()
}

/// Pointwise dimension of the shift's measure: `h/λ` for one-sided balls and
/// `2h/λ` for two-sided ones.
pub fn dimension(shift: &MarkovShift) -> f64 {
    let d = shift.measure().entropy() / shift.lyapunov();
    match shift.sided() {
        Sided::OneSided => d,
        Sided::TwoSided => 2.0 * d,
    }
}

fn thresholds(probs: &[f64]) -> Vec<u64> {
    let total: f64 = probs.iter().sum();
    let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut acc = 0.0;
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            acc += p / total;
            if i >= last_positive {
                1u64 << 32
            } else {
                ((acc * 4_294_967_296.0).round() as u64).min(1u64 << 32)
            }
        })
        .collect()
}

/// Inverse-CDF draw from 32-bit cumulative thresholds: the symbol is the
/// number of thresholds not exceeding the draw (branch-free).
#[inline]
fn draw<R: Rng + ?Sized>(thresholds: &[u64], rng: &mut R) -> Symbol {
    let x = rng.next_u32() as u64;
    thresholds.iter().map(|&t| (x >= t) as u32).sum::<u32>() as Symbol
}

/// Per-state samplers for one step of a Markov chain.
#[derive(Debug, Clone)]
pub(crate) struct ChainSampler {
    size: usize,
    initial: Vec<u64>,
    rows: Vec<u64>,
    /// All rows equal the initial law: draws need not wait for the previous
    /// symbol.
    iid: bool,
}

impl ChainSampler {
    fn from_rows(initial: &[f64], rows: &[Vec<f64>]) -> Self {
        let initial = thresholds(initial);
        let rows: Vec<u64> = rows.iter().flat_map(|r| thresholds(r)).collect();
        let iid = rows.chunks(initial.len()).all(|r| r == initial.as_slice());
        Self {
            size: initial.len(),
            initial,
            rows,
            iid,
        }
    }

    pub(crate) fn forward(measure: &MarkovMeasure) -> Self {
        Self::from_rows(measure.initial(), &measure.kernel_rows())
    }

    pub(crate) fn backward(measure: &MarkovMeasure) -> Self {
        Self::from_rows(measure.initial(), &measure.reversed_kernel())
    }

    #[inline]
    pub(crate) fn first<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        draw(&self.initial, rng)
    }

    #[inline]
    pub(crate) fn next<R: Rng + ?Sized>(&self, from: Symbol, rng: &mut R) -> Symbol {
        let start = from as usize * self.size;
        draw(&self.rows[start..start + self.size], rng)
    }

    /// Continues the chain from `last`, writing one symbol per slot; consumes
    /// the rng exactly as repeated [`ChainSampler::next`] would.
    pub(crate) fn fill<R: Rng + ?Sized>(&self, mut last: Symbol, rng: &mut R, out: &mut [Symbol]) {
        let mut draws = [0u32; 256];
        for chunk in out.chunks_mut(draws.len()) {
            let draws = &mut draws[..chunk.len()];
            for d in draws.iter_mut() {
                *d = rng.next_u32();
            }
            if self.iid {
                let t = &self.initial[..];
                for (slot, &x) in chunk.iter_mut().zip(draws.iter()) {
                    let x = x as u64;
                    *slot = t.iter().map(|&t| (x >= t) as u32).sum::<u32>() as Symbol;
                }
            } else {
                for (slot, &x) in chunk.iter_mut().zip(draws.iter()) {
                    let x = x as u64;
                    let start = last as usize * self.size;
                    last = self.rows[start..start + self.size]
                        .iter()
                        .map(|&t| (x >= t) as u32)
                        .sum::<u32>() as Symbol;
                    *slot = last;
                }
            }
        }
    }
}

/// Stationary sample path of the given length.
pub fn sample_path<R: Rng + ?Sized>(shift: &MarkovShift, length: usize, rng: &mut R) -> Vec<Symbol> {
    let sampler = ChainSampler::forward(shift.measure());
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return out;
    }
    let mut s = sampler.first(rng);
    out.push(s);
    for _ in 1..length {
        s = sampler.next(s, rng);
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn golden() -> TransitionMatrix {
        TransitionMatrix::new(&[vec![1, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn parry_full_two_shift() {
        let m = parry_measure(&TransitionMatrix::full(2)).unwrap();
        assert_relative_eq!(m.entropy(), 2f64.ln(), epsilon = 1e-13);
        for a in 0..2 {
            assert_relative_eq!(m.initial()[a], 0.5, epsilon = 1e-13);
            for b in 0..2 {
                assert_relative_eq!(m.kernel(a, b), 0.5, epsilon = 1e-13);
            }
        }
        let pd = m.perron().unwrap();
        let dot: f64 = pd.left.iter().zip(&pd.right).map(|(u, v)| u * v).sum();
        assert_relative_eq!(dot, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn parry_golden_mean_entropy() {
        let m = parry_measure(&golden()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_relative_eq!(m.entropy(), phi.ln(), epsilon = 1e-12);
        assert_eq!(m.kernel(1, 1), 0.0);
    }

    #[test]
    fn golden_mean_cylinder_measures() {
        let shift = MarkovShift::new(golden(), parry_measure(&golden()).unwrap(), 1.0, Sided::OneSided)
            .unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_relative_eq!(
            cylinder_measure(&shift, &[0, 0]),
            phi / (phi * phi + 1.0),
            max_relative = 1e-12
        );
        assert_eq!(cylinder_measure(&shift, &[1, 1]), 0.0);
        assert_eq!(cylinder_measure(&shift, &[]), 1.0);
        assert_eq!(cylinder_measure(&shift, &[0, 7]), 0.0);
    }

    #[test]
    fn full_shift_cylinders_are_uniform() {
        let shift = MarkovShift::full(2, 2f64.ln(), Sided::OneSided).unwrap();
        assert_relative_eq!(cylinder_measure(&shift, &[0, 1, 1]), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn primitivity_diagnostics() {
        let swap = TransitionMatrix::new(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(parry_measure(&swap), Err(Error::Periodic { period: 2 }));
        let split = TransitionMatrix::new(&[vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(
            parry_measure(&split),
            Err(Error::Reducible { from: 1, to: 0 })
        );
        assert!(TransitionMatrix::new(&[vec![1, 2], vec![1, 1]]).is_err());
    }

    #[test]
    fn ball_generation_examples() {
        assert_eq!(ball_generation(0.1, 2f64.ln()).unwrap(), 3);
        assert_eq!(ball_generation((-5f64).exp(), 1.0).unwrap(), 5);
        assert_eq!(ball_generation(0.5, 2f64.ln()).unwrap(), 1);
        assert!(ball_generation(1.0, 1.0).is_err());
        assert!(ball_generation(0.0, 1.0).is_err());
        assert!(ball_generation(-0.5, 1.0).is_err());
    }

    #[test]
    fn ball_generation_on_boundaries() {
        for lambda in [0.3, 2f64.ln(), 3f64.ln(), 1.7] {
            for m in 0..40 {
                let r = boundary_radius(m, lambda);
                if r < 1.0 {
                    assert_eq!(ball_generation(r, lambda).unwrap(), m);
                }
            }
        }
    }

    #[test]
    fn dimensions() {
        let one = MarkovShift::full(2, 2f64.ln(), Sided::OneSided).unwrap();
        let two = MarkovShift::full(2, 2f64.ln(), Sided::TwoSided).unwrap();
        assert_relative_eq!(dimension(&one), 1.0, epsilon = 1e-14);
        assert_relative_eq!(dimension(&two), 2.0, epsilon = 1e-14);
        let g = MarkovShift::new(golden(), parry_measure(&golden()).unwrap(), 1.0, Sided::OneSided)
            .unwrap();
        assert_relative_eq!(dimension(&g), 0.48121182505960347, epsilon = 1e-12);
    }

    #[test]
    fn markov_measure_validation() {
        let t = golden();
        let ok = MarkovMeasure::markov(&t, &[vec![0.5, 0.5], vec![1.0, 0.0]], None).unwrap();
        assert_relative_eq!(ok.initial()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert!(MarkovMeasure::markov(&t, &[vec![0.5, 0.5], vec![0.5, 0.5]], None).is_err());
        assert!(MarkovMeasure::markov(&t, &[vec![0.5, 0.4], vec![1.0, 0.0]], None).is_err());
        assert!(
            MarkovMeasure::markov(&t, &[vec![0.5, 0.5], vec![1.0, 0.0]], Some(&[0.5, 0.5]))
                .is_err()
        );
    }

    #[test]
    fn sample_path_is_reproducible_and_admissible() {
        let shift = MarkovShift::new(golden(), parry_measure(&golden()).unwrap(), 1.0, Sided::OneSided)
            .unwrap();
        let a = sample_path(&shift, 10_000, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_path(&shift, 10_000, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| !(w[0] == 1 && w[1] == 1)));
        assert!(sample_path(&shift, 0, &mut ChaCha8Rng::seed_from_u64(7)).is_empty());
    }

    #[test]
    fn single_symbol_frequencies_match_initial() {
        let shift = MarkovShift::new(golden(), parry_measure(&golden()).unwrap(), 1.0, Sided::OneSided)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let zeros = (0..draws)
            .filter(|_| sample_path(&shift, 1, &mut rng)[0] == 0)
            .count();
        let p = shift.measure().initial()[0];
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((zeros as f64 / draws as f64 - p).abs() < 3.0 * se);
    }
}
