//! Poisson and Poisson-integral moments, and the joint interval-count
//! moments of `Z_{α,β}` expanded over coloured partitions.
//!
//! `E[∏_v Z(t_{v-1}, t_v]^{m̄_v}]` is a finite sum over `q_v ≤ m̄_v`,
//! `q_0 ≤ q` and maps `ψ: {1..q} → {0..q_0}` whose image contains
//! `{1..q_0}` (value 0, the fixed atom at the origin, is optional). Each map
//! contributes `α^{(q−q_0)/2} β^{q_0}/q_0! · ∏ S(m̄_v, q_v)` times the
//! local-time integral `H` of its colouring matrix. Terms sharing a
//! colouring up to relabelling of the values `1..q_0` are merged, and all
//! `H` values are estimated on one shared ensemble of Brownian paths.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::{local_time_snapshots, sample_brownian, sample_z, LimitGrid, ZParams};
use crate::par::{map_trials, trial_rng};
use crate::stats::mean_and_se;

/// Largest total order accepted by the expanded formula.
pub const FORMULA_MAX_ORDER: u32 = 6;
/// Largest total order accepted by direct Monte Carlo.
pub const MC_MAX_ORDER: u32 = 8;
const STIRLING_MAX: u32 = 30;
/// Stream offset separating direct-simulation draws from formula paths.
const DIRECT_STREAM: u64 = 1 << 40;

/// Stirling number of the second kind `S(m, q)`.
pub fn stirling2(m: u32, q: u32) -> Result<u128> {
    if m > STIRLING_MAX || q > m {
        return Err(Error::Domain(format!(
            "S(m, q) needs 0 ≤ q ≤ m ≤ {STIRLING_MAX}, got ({m}, {q})"
        )));
    }
    let (m, q) = (m as usize, q as usize);
    // row[j] = S(i, j), built up over i
    let mut row = vec![0u128; q + 1];
    row[0] = 1;
    for i in 1..=m {
        for j in (1..=q.min(i)).rev() {
            row[j] = j as u128 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    Ok(row[q])
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// All maps `{1..q} → {0..len-1}` in lexicographic order, filtered.
fn maps_where<F: Fn(&[u8]) -> bool>(q: usize, len: usize, keep: F) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    if len == 0 {
        if q == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    let mut map = vec![0u8; q];
    loop {
        if keep(&map) {
            out.push(map.clone());
        }
        // odometer, last position fastest
        let mut i = q;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if (map[i] as usize) + 1 < len {
                map[i] += 1;
                map[i + 1..].iter_mut().for_each(|v| *v = 0);
                break;
            }
        }
    }
}

fn covers(map: &[u8], from: u8, to: u8) -> bool {
    let mut seen = 0u32;
    for &v in map {
        seen |= 1 << v;
    }
    (from..=to).all(|v| seen & (1 << v) != 0)
}

/// Surjections `{1..q} → {0..q0}` (entry `i` is the image of `i+1`), in
/// lexicographic order; empty when `q0 + 1 > q`.
pub fn enumerate_surjections(q: usize, q0: usize) -> Vec<Vec<u8>> {
    if q0 + 1 > q || q0 >= 31 {
        return Vec::new();
    }
    maps_where(q, q0 + 1, |m| covers(m, 0, q0 as u8))
}

/// Maps `{1..q} → {0..q0}` whose image contains `{1..q0}`: the index maps
/// of the moment expansion, where 0 labels the atom at the origin.
pub fn anchored_maps(q: usize, q0: usize) -> Vec<Vec<u8>> {
    if q0 > q || q0 >= 31 {
        return Vec::new();
    }
    if q0 == 0 {
        return vec![vec![0u8; q]];
    }
    maps_where(q, q0 + 1, |m| covers(m, 1, q0 as u8))
}

/// `E[P^m]` for `P ~ Poisson(λ)`: `Σ_q S(m, q) λ^q`.
pub fn poisson_moment(lambda: f64, m: u32) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("Poisson mean must be ≥ 0, got {lambda}")));
    }
    (0..=m).try_fold(0.0, |acc, q| Ok(acc + stirling2(m, q)? as f64 * lambda.powi(q as i32)))
}

/// Piecewise-constant function, zero outside `[breaks[0], breaks[last])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Domain("step function needs len(breaks) = len(values) + 1 ≥ 2".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("step function breaks must increase, values be finite".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= x);
        if i == 0 || i == self.breaks.len() {
            0.0
        } else {
            self.values[i - 1]
        }
    }
}

/// `∫ ∏_j g_j dη` for piecewise-constant integrands and density, exactly.
pub fn step_product_integral(gs: &[&StepFunction], density: &StepFunction) -> f64 {
    let mut cuts: Vec<f64> = density.breaks.clone();
    for g in gs {
        cuts.extend_from_slice(&g.breaks);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let f: f64 = gs.iter().map(|g| g.eval(mid)).product();
            f * density.eval(mid) * (w[1] - w[0])
        })
        .sum()
}

/// `E[∏_j ∫ g_j dP]` for a Poisson process `P` with intensity density `η`:
/// `Σ_q (1/q!) Σ_χ ∏_{i≤q} ∫ ∏_{χ(j)=i} g_j dη` over surjections
/// `χ: {1..m} → {1..q}`.
pub fn poisson_integral_moment(gs: &[StepFunction], density: &StepFunction) -> Result<f64> {
    let m = gs.len();
    if m == 0 {
        return Ok(1.0);
    }
    if m > FORMULA_MAX_ORDER as usize {
        return Err(Error::Domain(format!(
            "Poisson-integral moments implemented up to order {FORMULA_MAX_ORDER}, got {m}"
        )));
    }
    let mut total = 0.0;
    for q in 1..=m {
        let mut sum = 0.0;
        for chi in enumerate_surjections(m, q - 1) {
            let mut prod = 1.0;
            for block in 0..q as u8 {
                let members: Vec<&StepFunction> =
                    (0..m).filter(|&j| chi[j] == block).map(|j| &gs[j]).collect();
                prod *= step_product_integral(&members, density);
            }
            sum += prod;
        }
        total += sum / factorial(q as u32);
    }
    Ok(total)
}

/// Grid of times `0 = t_0 < t_1 < … < t_K` with exponents `m̄_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub times: Vec<f64>,
    pub exponents: Vec<u32>,
}

impl MomentSpec {
    pub fn new(times: Vec<f64>, exponents: Vec<u32>) -> Result<Self> {
        let s = Self { times, exponents };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.exponents.len() {
            return Err(Error::Domain("moment spec needs K ≥ 1 times and as many exponents".into()));
        }
        if !(self.times[0] > 0.0) || self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("moment times must satisfy 0 < t_1 < … < t_K".into()));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("moment times must be finite".into()));
        }
        if self.exponents.iter().any(|&e| e == 0) {
            return Err(Error::Domain("moment exponents must be positive".into()));
        }
        if self.order() > MC_MAX_ORDER {
            return Err(Error::Domain(format!(
                "total order {} exceeds {MC_MAX_ORDER}",
                self.order()
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    /// Total order `m = Σ m̄_v`.
    pub fn order(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated")
    }

    pub fn interval(&self, v: usize) -> (f64, f64) {
        (if v == 0 { 0.0 } else { self.times[v - 1] }, self.times[v])
    }

    /// `∏_v count_v^{m̄_v}` for per-interval counts.
    pub fn monomial(&self, counts: &[usize]) -> f64 {
        counts
            .iter()
            .zip(&self.exponents)
            .map(|(&c, &e)| (c as f64).powi(e as i32))
            .product()
    }
}

/// Exponents `z_{u,w}`: row `u = 0` is the origin, rows `1..=q_0` the
/// distinct spatial atoms, columns the time intervals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColoringMatrix {
    rows: Vec<Vec<u32>>,
}

impl ColoringMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Domain("colouring rows must be nonempty and of equal length".into()));
        }
        if rows[1..].iter().any(|r| r.iter().all(|&z| z == 0)) {
            return Err(Error::Domain("every row after the origin row needs a positive sum".into()));
        }
        Ok(Self { rows })
    }

    /// Colouring induced by `ψ` when position `j` lies in interval `col[j]`.
    fn from_map(psi: &[u8], col: &[usize], q0: usize, k: usize) -> Self {
        let mut rows = vec![vec![0u32; k]; q0 + 1];
        for (&u, &w) in psi.iter().zip(col) {
            rows[u as usize][w] += 1;
        }
        rows[1..].sort();
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn q0(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn k(&self) -> usize {
        self.rows[0].len()
    }

    /// Column sums `q_w`.
    pub fn column_sums(&self) -> Vec<u32> {
        (0..self.k()).map(|w| self.rows.iter().map(|r| r[w]).sum()).collect()
    }

    pub fn total(&self) -> u32 {
        self.rows.iter().flatten().sum()
    }
}

/// One merged term of the expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTerm {
    pub coloring: ColoringMatrix,
    /// Number of maps `ψ` producing this colouring.
    pub multiplicity: u64,
    /// `multiplicity · ∏ S(m̄_v, q_v) / q_0!`.
    pub combinatorial: f64,
}

impl MomentTerm {
    /// Full coefficient `combinatorial · α^{(q−q_0)/2} β^{q_0}`.
    pub fn weight(&self, params: &ZParams) -> f64 {
        let q = self.coloring.total() as i32;
        let q0 = self.coloring.q0() as i32;
        let a = if q == q0 { 1.0 } else { params.alpha.sqrt().powi(q - q0) };
        self.combinatorial * a * params.beta.powi(q0)
    }
}

/// All merged terms of the expansion for `spec`, in canonical order.
pub fn moment_terms(spec: &MomentSpec) -> Result<Vec<MomentTerm>> {
    spec.validate()?;
    if spec.order() > FORMULA_MAX_ORDER {
        return Err(Error::Domain(format!(
            "moment formula implemented up to order {FORMULA_MAX_ORDER}, got {}",
            spec.order()
        )));
    }
    let k = spec.k();
    let mut acc: BTreeMap<ColoringMatrix, (u64, f64)> = BTreeMap::new();
    let mut qs = vec![1u32; k];
    loop {
        let stirling: f64 = spec
            .exponents
            .iter()
            .zip(&qs)
            .map(|(&m, &q)| stirling2(m, q).map(|s| s as f64))
            .product::<Result<f64>>()?;
        let col: Vec<usize> = qs
            .iter()
            .enumerate()
            .flat_map(|(w, &q)| std::iter::repeat_n(w, q as usize))
            .collect();
        let q = col.len();
        for q0 in 0..=q {
            let per_map = stirling / factorial(q0 as u32);
            for psi in anchored_maps(q, q0) {
                let entry = acc
                    .entry(ColoringMatrix::from_map(&psi, &col, q0, k))
                    .or_insert((0, 0.0));
                entry.0 += 1;
                entry.1 += per_map;
            }
        }
        // next q vector, q_v ≤ m̄_v
        let mut v = 0;
        while v < k && qs[v] == spec.exponents[v] {
            qs[v] = 1;
            v += 1;
        }
        if v == k {
            break;
        }
        qs[v] += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(coloring, (multiplicity, combinatorial))| MomentTerm {
            coloring,
            multiplicity,
            combinatorial,
        })
        .collect())
}

/// Monte Carlo settings for limit-process moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentMc {
    pub paths: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub grid: LimitGrid,
    /// Warn when the achieved standard error exceeds this.
    #[serde(default)]
    pub target_se: Option<f64>,
}

fn default_workers() -> usize {
    crate::par::default_workers()
}

impl MomentMc {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            workers: default_workers(),
            grid: LimitGrid::default(),
            target_se: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Domain("Monte Carlo needs at least 2 paths".into()));
        }
        Ok(())
    }

    fn warn_if_coarse(&self, what: &str, se: f64) {
        if let Some(target) = self.target_se {
            if se > target {
                log::warn!("{what}: achieved standard error {se:e} exceeds target {target:e}");
            }
        }
    }
}

/// Estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    fn from_samples(x: &[f64]) -> Self {
        let (value, se) = mean_and_se(x);
        Self { value, se }
    }

    /// `|a − b| / √(se_a² + se_b²)`; infinite when both are exact and differ.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let d = (self.value - other.value).abs();
        let s = self.se.hypot(other.se);
        if d == 0.0 {
            0.0
        } else {
            d / s
        }
    }
}

/// Local-time increments `ΔL_w(x_k) = L_{t_w}(x_k) − L_{t_{w−1}}(x_k)` of
/// one path on the node grid.
struct Increments {
    eps: f64,
    origin: usize,
    delta: Vec<Vec<f64>>,
}

impl Increments {
    fn sample(sigma: f64, spec: &MomentSpec, grid: &LimitGrid, trial: u64, seed: u64) -> Result<Self> {
        let idx = grid_indices(spec, grid)?;
        let mut rng = trial_rng(seed, trial);
        let path = sample_brownian(sigma, spec.horizon(), *idx.last().expect("K ≥ 1"), &mut rng)?;
        let eps = grid.eps(sigma);
        let (first, snaps) = local_time_snapshots(&path, eps, &idx)?;
        let mut delta = Vec::with_capacity(snaps.len());
        for (w, row) in snaps.iter().enumerate() {
            delta.push(if w == 0 {
                row.clone()
            } else {
                row.iter().zip(&snaps[w - 1]).map(|(a, b)| a - b).collect()
            });
        }
        Ok(Self {
            eps,
            origin: (-first) as usize,
            delta,
        })
    }

    fn origin_factor(&self, z: &[u32]) -> f64 {
        z.iter()
            .enumerate()
            .map(|(w, &e)| self.delta[w][self.origin].powi(e as i32))
            .product()
    }

    fn row_integral(&self, z: &[u32]) -> f64 {
        let nodes = self.delta[0].len();
        let mut sum = 0.0;
        for j in 0..nodes {
            let mut p = 1.0;
            for (w, &e) in z.iter().enumerate() {
                if e > 0 {
                    p *= self.delta[w][j].powi(e as i32);
                }
            }
            sum += p;
        }
        self.eps * sum
    }
}

fn grid_indices(spec: &MomentSpec, grid: &LimitGrid) -> Result<Vec<usize>> {
    spec.times
        .iter()
        .map(|&t| {
            let x = t * grid.steps_per_unit as f64;
            if (x - x.round()).abs() > 1e-6 * x.max(1.0) {
                Err(Error::Domain(format!(
                    "time {t} is not on the grid of {} steps per unit",
                    grid.steps_per_unit
                )))
            } else {
                Ok(x.round() as usize)
            }
        })
        .collect()
}

/// Distinct origin rows and atom rows appearing in a set of colourings,
/// so each path evaluates every factor once.
struct FactorTable {
    origin_rows: Vec<Vec<u32>>,
    atom_rows: Vec<Vec<u32>>,
    /// Per colouring: origin-row index and atom-row indices.
    plan: Vec<(usize, Vec<usize>)>,
}

impl FactorTable {
    fn new<'a>(colorings: impl Iterator<Item = &'a ColoringMatrix>) -> Self {
        let colorings: Vec<&ColoringMatrix> = colorings.collect();
        let origin_set: BTreeSet<&Vec<u32>> = colorings.iter().map(|c| &c.rows[0]).collect();
        let atom_set: BTreeSet<&Vec<u32>> =
            colorings.iter().flat_map(|c| c.rows[1..].iter()).collect();
        let origin_rows: Vec<Vec<u32>> = origin_set.into_iter().cloned().collect();
        let atom_rows: Vec<Vec<u32>> = atom_set.into_iter().cloned().collect();
        let find = |rows: &[Vec<u32>], r: &Vec<u32>| rows.binary_search(r).expect("collected");
        let plan = colorings
            .iter()
            .map(|c| {
                (
                    find(&origin_rows, &c.rows[0]),
                    c.rows[1..].iter().map(|r| find(&atom_rows, r)).collect(),
                )
            })
            .collect();
        Self {
            origin_rows,
            atom_rows,
            plan,
        }
    }

    /// `H` integrands of every colouring on one path.
    fn evaluate(&self, inc: &Increments) -> Vec<f64> {
        let o: Vec<f64> = self.origin_rows.iter().map(|z| inc.origin_factor(z)).collect();
        let a: Vec<f64> = self.atom_rows.iter().map(|z| inc.row_integral(z)).collect();
        self.plan
            .iter()
            .map(|(oi, ai)| o[*oi] * ai.iter().map(|&i| a[i]).product::<f64>())
            .collect()
    }
}

/// `H(Z′) = E[∫ ∏_{u,w} ΔL_w(s_u)^{z_{u,w}} ds_1..ds_{q_0}]` with `s_0 = 0`,
/// by Monte Carlo over paths and Riemann sums on the node grid.
#[allow(non_snake_case)]
pub fn H_integral(z: &ColoringMatrix, spec: &MomentSpec, sigma: f64, mc: &MomentMc) -> Result<Estimate> {
    spec.validate()?;
    mc.check()?;
    if z.k() != spec.k() {
        return Err(Error::Domain(format!(
            "colouring has {} columns but the spec has {} intervals",
            z.k(),
            spec.k()
        )));
    }
    if z.total() == 0 {
        return Ok(Estimate::exact(1.0));
    }
    let table = FactorTable::new(std::iter::once(z));
    let samples = map_trials(mc.workers, mc.paths, |i| {
        Increments::sample(sigma, spec, &mc.grid, i, mc.seed).map(|inc| table.evaluate(&inc)[0])
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let est = Estimate::from_samples(&samples);
    mc.warn_if_coarse("H integral", est.se);
    Ok(est)
}

/// Formula value of a joint moment of `Z_{α,β}` with its `q_0` breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub se: f64,
    /// Contribution of the terms with `q_0 = i`.
    pub by_q0: Vec<Estimate>,
    pub exact: bool,
}

impl MomentEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            se: self.se,
        }
    }
}

/// `E[∏_v Z(t_{v−1}, t_v]^{m̄_v}]` from the expansion over colourings.
///
/// At `(α, β) = (0, 1)` the process is a standard Poisson process and the
/// value is the exact product of Poisson moments.
pub fn limit_moment(params: &ZParams, spec: &MomentSpec, mc: &MomentMc) -> Result<MomentEstimate> {
    params.validate()?;
    spec.validate()?;
    if params.is_standard_poisson() {
        return standard_poisson_moment(spec);
    }
    mc.check()?;
    let terms = moment_terms(spec)?;
    let weights: Vec<f64> = terms.iter().map(|t| t.weight(params)).collect();
    let live: Vec<usize> = (0..terms.len()).filter(|&i| weights[i] != 0.0).collect();
    let table = FactorTable::new(live.iter().map(|&i| &terms[i].coloring));
    let max_q0 = spec.order() as usize;
    let per_path = map_trials(mc.workers, mc.paths, |i| {
        let inc = Increments::sample(params.sigma, spec, &mc.grid, i, mc.seed)?;
        let h = table.evaluate(&inc);
        let mut parts = vec![0.0; max_q0 + 1];
        for (slot, &ti) in live.iter().enumerate() {
            parts[terms[ti].coloring.q0()] += weights[ti] * h[slot];
        }
        Ok(parts)
    })
    .into_iter()
    .collect::<Result<Vec<Vec<f64>>>>()?;
    let totals: Vec<f64> = per_path.iter().map(|p| p.iter().sum()).collect();
    let total = Estimate::from_samples(&totals);
    let by_q0 = (0..=max_q0)
        .map(|q0| Estimate::from_samples(&per_path.iter().map(|p| p[q0]).collect::<Vec<_>>()))
        .collect();
    mc.warn_if_coarse("limit moment", total.se);
    Ok(MomentEstimate {
        value: total.value,
        se: total.se,
        by_q0,
        exact: false,
    })
}

fn standard_poisson_moment(spec: &MomentSpec) -> Result<MomentEstimate> {
    // Only q = q_0 survives; split the product of Poisson moments by Σ q_v.
    let m = spec.order() as usize;
    let mut by = vec![1.0];
    for v in 0..spec.k() {
        let (a, b) = spec.interval(v);
        let mv = spec.exponents[v];
        let mut next = vec![0.0; by.len() + mv as usize];
        for (i, &c) in by.iter().enumerate() {
            for q in 1..=mv {
                next[i + q as usize] += c * stirling2(mv, q)? as f64 * (b - a).powi(q as i32);
            }
        }
        by = next;
    }
    by.resize(m + 1, 0.0);
    let value = spec
        .exponents
        .iter()
        .enumerate()
        .map(|(v, &mv)| {
            let (a, b) = spec.interval(v);
            poisson_moment(b - a, mv)
        })
        .product::<Result<f64>>()?;
    Ok(MomentEstimate {
        value,
        se: 0.0,
        by_q0: by.into_iter().map(Estimate::exact).collect(),
        exact: true,
    })
}

/// Direct Monte Carlo of the same moment from realisations of `Z_{α,β}`,
/// on draws independent of the formula's paths.
pub fn direct_moment(params: &ZParams, spec: &MomentSpec, mc: &MomentMc) -> Result<Estimate> {
    params.validate()?;
    spec.validate()?;
    mc.check()?;
    let samples = map_trials(mc.workers, mc.paths, |i| {
        let mut rng = trial_rng(mc.seed, DIRECT_STREAM + i);
        let z = sample_z(params, spec.horizon(), &mc.grid, &mut rng)?;
        let counts: Vec<usize> = (0..spec.k())
            .map(|v| {
                let (a, b) = spec.interval(v);
                z.count_in(a, b)
            })
            .collect();
        Ok(spec.monomial(&counts))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let est = Estimate::from_samples(&samples);
    mc.warn_if_coarse("direct moment", est.se);
    Ok(est)
}
