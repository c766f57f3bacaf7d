//! Integer cocycles constant on 0-cylinders, their walks and spectral data.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbolic::{cylinder_measure, gcd, MarkovShift, Symbol};

const CENTERING_TOL: f64 = 1e-12;
const WALK_CELL_LIMIT: u128 = 100_000_000;
const GREEN_KUBO_TOL: f64 = 1e-17;
const GREEN_KUBO_MAX_TERMS: usize = 10_000_000;

/// Step function `h` on symbols, validated against a shift's measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cocycle {
    values: Vec<i64>,
    sigma2: f64,
    lattice_span: u64,
}

impl Cocycle {
    /// Validates centering and computes `σ²` and the lattice span.
    pub fn new(shift: &MarkovShift, values: Vec<i64>) -> Result<Self> {
        if values.len() != shift.alphabet_size() {
            return Err(Error::InvalidShift(format!(
                "cocycle has {} values for an alphabet of {} symbols",
                values.len(),
                shift.alphabet_size()
            )));
        }
        let sum = centering_sum(shift, &values);
        if sum.abs() > CENTERING_TOL {
            return Err(Error::NotCentered { sum });
        }
        let sigma2 = green_kubo(shift, &values);
        let lattice_span = lattice_span(shift, &values);
        Ok(Self {
            values,
            sigma2,
            lattice_span,
        })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, s: Symbol) -> i64 {
        self.values[s as usize]
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Index of the lattice spanned by `(length, h-sum)` over cycles of the
    /// transition graph in `Z²`; 1 means non-arithmetic, 0 means the cycle
    /// vectors are collinear (e.g. a coboundary).
    pub fn lattice_span(&self) -> u64 {
        self.lattice_span
    }

    pub fn is_arithmetic(&self) -> bool {
        self.lattice_span != 1
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn max_abs(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).max().unwrap_or(0)
    }
}

fn centering_sum(shift: &MarkovShift, values: &[i64]) -> f64 {
    shift
        .measure()
        .initial()
        .iter()
        .zip(values)
        .map(|(p, &h)| p * h as f64)
        .sum()
}

/// `Var(h) + 2 Σ_k Cov(h, h∘f^k)`, summing `⟨h, P^k h⟩_p` until the
/// (re-centred) iterate is negligible.
fn green_kubo(shift: &MarkovShift, values: &[i64]) -> f64 {
    let measure = shift.measure();
    let p = measure.initial();
    let n = values.len();
    let h: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let inner = |w: &[f64]| -> f64 { (0..n).map(|a| p[a] * h[a] * w[a]).sum() };
    let var = inner(&h);
    let mut w = h.clone();
    let mut tail = 0.0;
    for _ in 0..GREEN_KUBO_MAX_TERMS {
        let mut next = vec![0.0; n];
        for a in 0..n {
            next[a] = (0..n).map(|b| measure.kernel(a, b) * w[b]).sum();
        }
        let mean: f64 = (0..n).map(|a| p[a] * next[a]).sum();
        for x in &mut next {
            *x -= mean;
        }
        w = next;
        tail += inner(&w);
        if w.iter().fold(0.0f64, |m, v| m.max(v.abs())) < GREEN_KUBO_TOL * scale {
            break;
        }
    }
    (var + 2.0 * tail).max(0.0)
}

/// Asymptotic variance `lim E[h_n²]/n` of a centred cocycle.
pub fn sigma2(shift: &MarkovShift, values: &[i64]) -> Result<f64> {
    let sum = centering_sum(shift, values);
    if sum.abs() > CENTERING_TOL {
        return Err(Error::NotCentered { sum });
    }
    Ok(green_kubo(shift, values))
}

/// Each edge `a → b` contributes the defect `φ(a) + (1, h(a)) − φ(b)` against
/// BFS-tree potentials `φ`; these generate the cycle lattice, whose index is
/// the gcd of their 2×2 minors.
fn lattice_span(shift: &MarkovShift, values: &[i64]) -> u64 {
    let t = shift.transitions();
    let n = t.size();
    let mut phi: Vec<Option<(i64, i64)>> = vec![None; n];
    phi[0] = Some((0, 0));
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(a) = queue.pop_front() {
        let (len, sum) = phi[a].expect("visited");
        for b in 0..n {
            if t.allowed(a, b) && phi[b].is_none() {
                phi[b] = Some((len + 1, sum + values[a]));
                queue.push_back(b);
            }
        }
    }
    let mut defects = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if t.allowed(a, b) {
                let (la, sa) = phi[a].expect("irreducible");
                let (lb, sb) = phi[b].expect("irreducible");
                let d = (la + 1 - lb, sa + values[a] - sb);
                if d != (0, 0) {
                    defects.push(d);
                }
            }
        }
    }
    let mut index = 0usize;
    for i in 0..defects.len() {
        for j in i + 1..defects.len() {
            let det = defects[i].0 * defects[j].1 - defects[i].1 * defects[j].0;
            index = gcd(index, det.unsigned_abs() as usize);
        }
    }
    index as u64
}

/// Prefix sums `h_0 = 0, h_1, …, h_n` of the cocycle along `word`.
pub fn birkhoff_sums(word: &[Symbol], c: &Cocycle) -> Vec<i64> {
    let mut out = Vec::with_capacity(word.len() + 1);
    let mut acc = 0i64;
    out.push(0);
    for &s in word {
        acc += c.value(s);
        out.push(acc);
    }
    out
}

/// Joint law of `(x_n, h_n)` under the stationary measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkDistribution {
    horizon: usize,
    alphabet: usize,
    min_level: i64,
    width: usize,
    table: Vec<f64>,
}

impl WalkDistribution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn min_level(&self) -> i64 {
        self.min_level
    }

    pub fn max_level(&self) -> i64 {
        self.min_level + self.width as i64 - 1
    }

    /// `P(x_n = a, h_n = k)`.
    pub fn prob(&self, a: Symbol, k: i64) -> f64 {
        if k < self.min_level || k > self.max_level() || a as usize >= self.alphabet {
            return 0.0;
        }
        self.table[a as usize * self.width + (k - self.min_level) as usize]
    }

    /// `P(h_n = k)`.
    pub fn level_prob(&self, k: i64) -> f64 {
        (0..self.alphabet).map(|a| self.prob(a as Symbol, k)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.table.iter().sum()
    }

    /// `E[h_n^power]`.
    pub fn level_moment(&self, power: i32) -> f64 {
        (self.min_level..=self.max_level())
            .map(|k| self.level_prob(k) * (k as f64).powi(power))
            .sum()
    }
}

struct WalkDp<'a> {
    shift: &'a MarkovShift,
    values: &'a [i64],
    min_level: i64,
    width: usize,
    table: Vec<f64>,
}

impl<'a> WalkDp<'a> {
    fn new(shift: &'a MarkovShift, c: &'a Cocycle, walk_steps: usize, positions: usize) -> Result<Self> {
        let a = shift.alphabet_size();
        let reach = walk_steps as i64 * c.max_abs();
        let width = (2 * reach + 1) as usize;
        let needed = positions.max(1) as u128 * a as u128 * width as u128;
        if needed > WALK_CELL_LIMIT {
            return Err(Error::SizeGuard {
                what: "walk distribution",
                needed,
                limit: WALK_CELL_LIMIT,
            });
        }
        let mut table = vec![0.0; a * width];
        let origin = reach as usize;
        for (s, &p) in shift.measure().initial().iter().enumerate() {
            table[s * width + origin] = p;
        }
        Ok(Self {
            shift,
            values: c.values(),
            min_level: -reach,
            width,
            table,
        })
    }

    fn restrict(&mut self, allowed: Symbol) {
        let w = self.width;
        for s in 0..self.shift.alphabet_size() {
            if s != allowed as usize {
                self.table[s * w..(s + 1) * w].fill(0.0);
            }
        }
    }

    /// Advances one position; the walk moves by `h(current symbol)` when
    /// `accumulate` is set.
    fn step(&mut self, accumulate: bool) {
        let n = self.shift.alphabet_size();
        let w = self.width;
        let measure = self.shift.measure();
        let mut next = vec![0.0; n * w];
        for a in 0..n {
            let row = &self.table[a * w..(a + 1) * w];
            let shift = if accumulate { self.values[a] } else { 0 };
            let (lo, hi) = if shift >= 0 {
                (0, w - shift as usize)
            } else {
                ((-shift) as usize, w)
            };
            for b in 0..n {
                let pab = measure.kernel(a, b);
                if pab == 0.0 {
                    continue;
                }
                let dst = &mut next[b * w..(b + 1) * w];
                for k in lo..hi {
                    let v = row[k];
                    if v != 0.0 {
                        dst[(k as i64 + shift) as usize] += v * pab;
                    }
                }
            }
        }
        self.table = next;
    }
}

/// Exact joint law of `(x_n, h_n)` by dynamic programming over
/// `(symbol, level)`.
pub fn exact_walk_distribution(shift: &MarkovShift, c: &Cocycle, n: usize) -> Result<WalkDistribution> {
    let mut dp = WalkDp::new(shift, c, n, n)?;
    for _ in 0..n {
        dp.step(true);
    }
    Ok(WalkDistribution {
        horizon: n,
        alphabet: shift.alphabet_size(),
        min_level: dp.min_level,
        width: dp.width,
        table: dp.table,
    })
}

/// Leading (modulus-maximal) eigenvalue of `P_ab e^{iu h(b)}`.
pub fn fourier_eigenvalue(shift: &MarkovShift, c: &Cocycle, u: f64) -> Complex64 {
    let n = shift.alphabet_size();
    let measure = shift.measure();
    let m = DMatrix::from_fn(n, n, |a, b| {
        Complex64::from_polar(measure.kernel(a, b), u * c.values()[b] as f64)
    });
    let eig = m
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    eig.iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .expect("nonempty alphabet")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LltCheck {
    pub exact: f64,
    pub prediction: f64,
    pub normalized_error: f64,
    /// Set when the cocycle is lattice-supported; the prediction is then not
    /// the right local asymptotics.
    pub arithmetic: bool,
}

/// Compares `μ(A ∩ {h_n = k} ∩ f^{-n}B)` with its Gaussian local limit.
///
/// `A` occupies positions `0..|A|`, `B` positions `n..n+|B|`; empty words
/// stand for the whole space.
pub fn llt_check(
    shift: &MarkovShift,
    c: &Cocycle,
    a_word: &[Symbol],
    b_word: &[Symbol],
    n: usize,
    k: i64,
) -> Result<LltCheck> {
    let mu_a = cylinder_measure(shift, a_word);
    let mu_b = cylinder_measure(shift, b_word);
    if mu_a == 0.0 || mu_b == 0.0 {
        return Err(Error::Domain("cylinder words must be admissible".into()));
    }
    let last = (n + b_word.len()).max(a_word.len()).max(n + 1) - 1;
    let mut dp = WalkDp::new(shift, c, n, last + 1)?;
    for pos in 0..=last {
        if pos > 0 {
            dp.step(pos <= n);
        }
        if let Some(&s) = a_word.get(pos) {
            dp.restrict(s);
        }
        if pos >= n {
            if let Some(&s) = b_word.get(pos - n) {
                dp.restrict(s);
            }
        }
    }
    let exact = if k < dp.min_level || k >= dp.min_level + dp.width as i64 {
        0.0
    } else {
        let idx = (k - dp.min_level) as usize;
        (0..shift.alphabet_size())
            .map(|s| dp.table[s * dp.width + idx])
            .sum()
    };
    let s2 = c.sigma2();
    let nf = n as f64;
    let prediction = mu_a * mu_b * (-(k * k) as f64 / (2.0 * s2 * nf)).exp()
        / (2.0 * std::f64::consts::PI * s2 * nf).sqrt();
    let m = a_word.len().max(b_word.len()).max(1) as f64;
    let arithmetic = c.is_arithmetic();
    if arithmetic {
        log::warn!(
            "cocycle has lattice span {}; the Gaussian prediction is not the local limit",
            c.lattice_span()
        );
    }
    Ok(LltCheck {
        exact,
        prediction,
        normalized_error: (exact - prediction).abs() * nf / (mu_a * mu_b * m),
        arithmetic,
    })
}
