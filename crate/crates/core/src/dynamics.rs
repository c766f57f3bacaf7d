//! Orbits of `F(x, y) = (f x, g^{h(x)} y)` and of the Z-extension, and the
//! return statistics built from them.
//!
//! An orbit is driven by three independent random streams: the forward
//! continuation of `x`, and the right and left extensions of the bi-infinite
//! `y` line. The `y` line is generated lazily outward from its initial window,
//! each direction from its own stream, so the realisation does not depend on
//! the order in which levels are queried.
//!
//! Returns to `B_r^X(x) × B_r^Y(y)` happen at times `n ≥ 1` where the
//! `x`-word of generation `m_X` recurs at position `n` and the walk level
//! `h_n` lies in `G_r(y)`, the set of shifts `k` for which `g^k y` is again in
//! `B_r^Y(y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::par;
use crate::symbolic::{
    ball_generation, cylinder_measure, sample_path, ChainSampler, MarkovShift, Sided, Symbol,
};

/// Upper bound on the number of `y` symbols materialised by one orbit.
pub const Y_WINDOW_LIMIT: usize = 1 << 28;

const SCAN_BLOCK: usize = 4096;

/// Pair of shifts and the cocycle coupling them.
#[derive(Debug, Clone)]
pub struct TTSystem {
    x: MarkovShift,
    y: MarkovShift,
    cocycle: Cocycle,
}

impl TTSystem {
    pub fn new(x: MarkovShift, y: MarkovShift, cocycle_values: Vec<i64>) -> Result<Self> {
        if x.sided() != Sided::OneSided {
            return Err(Error::InvalidShift(
                "the base shift must use one-sided cylinders".into(),
            ));
        }
        let cocycle = Cocycle::new(&x, cocycle_values)?;
        Ok(Self { x, y, cocycle })
    }

    pub fn x(&self) -> &MarkovShift {
        &self.x
    }

    pub fn y(&self) -> &MarkovShift {
        &self.y
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    /// `(m_X, m_Y)` for radius `r`.
    pub fn generations(&self, r: f64) -> Result<(usize, usize)> {
        Ok((
            ball_generation(r, self.x.lyapunov())?,
            ball_generation(r, self.y.lyapunov())?,
        ))
    }
}

/// Normalisation data of a product ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallPairData {
    pub mu_ball: f64,
    pub nu_ball: f64,
    pub n_r: f64,
    pub alpha_r: f64,
    pub beta_r: f64,
}

impl BallPairData {
    pub fn from_measures(mu_ball: f64, nu_ball: f64) -> Self {
        let n_r = 1.0 / (mu_ball * mu_ball).max(mu_ball * nu_ball);
        let (alpha_r, beta_r) = if mu_ball > nu_ball {
            (1.0, nu_ball / mu_ball)
        } else {
            (mu_ball / nu_ball, 1.0)
        };
        Self {
            mu_ball,
            nu_ball,
            n_r,
            alpha_r,
            beta_r,
        }
    }
}

/// Ball data for the product ball of radius `r` with the given base words.
///
/// The `y` word covers indices `-m_Y..=m_Y` for two-sided shifts and
/// `0..=m_Y` otherwise.
pub fn ball_pair_data(
    system: &TTSystem,
    r: f64,
    x_word: &[Symbol],
    y_word: &[Symbol],
) -> Result<BallPairData> {
    let (mx, my) = system.generations(r)?;
    check_word(system.x(), x_word, mx, "x")?;
    check_word(system.y(), y_word, my, "y")?;
    Ok(BallPairData::from_measures(
        cylinder_measure(system.x(), x_word),
        cylinder_measure(system.y(), y_word),
    ))
}

fn check_word(shift: &MarkovShift, word: &[Symbol], m: usize, which: &str) -> Result<()> {
    let expected = shift.ball_word_len(m);
    if word.len() != expected {
        return Err(Error::Domain(format!(
            "{which} base word has {} symbols, generation {m} needs {expected}",
            word.len()
        )));
    }
    if !shift.is_admissible(word) {
        return Err(Error::Domain(format!("{which} base word is not admissible")));
    }
    Ok(())
}

/// Prefactor `ζ_r` multiplying the ratio of Parry ball measures when the two
/// Lyapunov exponents differ.
pub fn zeta_prefactor(r: f64, lambda_x: f64, lambda_y: f64, h_mu: f64, h_nu: f64) -> f64 {
    let l = -r.ln();
    let kx = (l / lambda_x).floor();
    let ky = (l / lambda_y).floor();
    (-(kx * lambda_x - ky * lambda_y) * h_mu / h_nu).exp()
}

/// Initial coordinates of an orbit: `x_0..x_{M_X}` and a window of `y`
/// containing index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub x_prefix: Vec<Symbol>,
    pub y_window: Vec<Symbol>,
    /// Index of `y_window[0]` on the `y` line.
    pub y_first: i64,
}

impl StartPoint {
    /// Stationary point, with enough coordinates for balls of generations
    /// up to `(mx, my)`.
    pub fn sample<R: Rng + ?Sized>(system: &TTSystem, mx: usize, my: usize, rng: &mut R) -> Self {
        let x_prefix = sample_path(system.x(), mx + 1, rng);
        let len = system.y().ball_word_len(my);
        let y_window = sample_path(system.y(), len, rng);
        let y_first = match system.y().sided() {
            Sided::OneSided => 0,
            Sided::TwoSided => -(my as i64),
        };
        Self {
            x_prefix,
            y_window,
            y_first,
        }
    }

    /// Start inside the given ball; coordinates outside the base words are
    /// filled in by the orbit's streams.
    pub fn in_ball(system: &TTSystem, x_word: Vec<Symbol>, y_word: Vec<Symbol>) -> Result<Self> {
        if x_word.is_empty() || y_word.is_empty() {
            return Err(Error::Domain("base words must be nonempty".into()));
        }
        if !system.x().is_admissible(&x_word) || !system.y().is_admissible(&y_word) {
            return Err(Error::Domain("base words must be admissible".into()));
        }
        let y_first = match system.y().sided() {
            Sided::OneSided => 0,
            Sided::TwoSided => {
                if y_word.len() % 2 == 0 {
                    return Err(Error::Domain(
                        "two-sided y word must have odd length".into(),
                    ));
                }
                -((y_word.len() / 2) as i64)
            }
        };
        Ok(Self {
            x_prefix: x_word,
            y_window: y_word,
            y_first,
        })
    }

    pub fn x_word(&self, mx: usize) -> Result<&[Symbol]> {
        self.x_prefix
            .get(..=mx)
            .ok_or_else(|| Error::Domain(format!("start point lacks x generation {mx}")))
    }

    /// The `y` base word of generation `my` under the given sidedness.
    pub fn y_word(&self, my: usize, sided: Sided) -> Result<&[Symbol]> {
        let lo = match sided {
            Sided::OneSided => 0,
            Sided::TwoSided => -(my as i64),
        };
        let start = lo - self.y_first;
        let end = my as i64 - self.y_first;
        if start < 0 || end >= self.y_window.len() as i64 {
            return Err(Error::Domain(format!(
                "start point lacks y generation {my}"
            )));
        }
        Ok(&self.y_window[start as usize..=end as usize])
    }
}

/// Seeds of the three streams driving an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitSeeds {
    pub x: u64,
    pub y_right: u64,
    pub y_left: u64,
}

impl OrbitSeeds {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            x: rng.random(),
            y_right: rng.random(),
            y_left: rng.random(),
        }
    }
}

/// A start point together with its stream seeds: everything that determines
/// one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub start: StartPoint,
    pub seeds: OrbitSeeds,
}

/// How the initial point of each trial is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StartMode {
    /// Fresh stationary point per trial; each trial uses its own ball.
    Annealed,
    /// Every trial starts inside the same ball (given by its base words).
    Conditional { x_word: Vec<Symbol>, y_word: Vec<Symbol> },
}

impl Trial {
    pub fn annealed<R: Rng + ?Sized>(system: &TTSystem, mx: usize, my: usize, rng: &mut R) -> Self {
        let start = StartPoint::sample(system, mx, my, rng);
        Self {
            start,
            seeds: OrbitSeeds::sample(rng),
        }
    }

    /// Trial for scenarios that only follow `x` (the `y` window is empty).
    pub fn base_only<R: Rng + ?Sized>(x: &MarkovShift, mx: usize, rng: &mut R) -> Self {
        let start = StartPoint {
            x_prefix: sample_path(x, mx + 1, rng),
            y_window: Vec::new(),
            y_first: 0,
        };
        Self {
            start,
            seeds: OrbitSeeds::sample(rng),
        }
    }

    pub fn new<R: Rng + ?Sized>(
        system: &TTSystem,
        mode: &StartMode,
        mx: usize,
        my: usize,
        rng: &mut R,
    ) -> Result<Self> {
        match mode {
            StartMode::Annealed => Ok(Self::annealed(system, mx, my, rng)),
            StartMode::Conditional { x_word, y_word } => Ok(Self {
                start: StartPoint::in_ball(system, x_word.clone(), y_word.clone())?,
                seeds: OrbitSeeds::sample(rng),
            }),
        }
    }
}

/// The forward `x` sequence: a fixed prefix followed by the Markov chain.
pub struct XSource {
    prefix: Vec<Symbol>,
    pos: usize,
    last: Symbol,
    sampler: ChainSampler,
    rng: ChaCha8Rng,
}

impl XSource {
    pub fn new(shift: &MarkovShift, prefix: &[Symbol], seed: u64) -> Self {
        Self {
            prefix: prefix.to_vec(),
            pos: 0,
            last: 0,
            sampler: ChainSampler::forward(shift.measure()),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[allow(clippy::should_implement_trait)]
    #[inline]
    pub fn next(&mut self) -> Symbol {
        let s = if self.pos < self.prefix.len() {
            self.prefix[self.pos]
        } else if self.pos == 0 {
            self.sampler.first(&mut self.rng)
        } else {
            self.sampler.next(self.last, &mut self.rng)
        };
        self.pos += 1;
        self.last = s;
        s
    }

    /// Fills `out` with the next symbols; same sequence as repeated `next`.
    pub fn fill(&mut self, out: &mut [Symbol]) {
        let mut i = 0;
        while i < out.len() && (self.pos < self.prefix.len() || self.pos == 0) {
            out[i] = self.next();
            i += 1;
        }
        let rest = &mut out[i..];
        if !rest.is_empty() {
            self.sampler.fill(self.last, &mut self.rng, rest);
            self.last = rest[rest.len() - 1];
        }
        self.pos += rest.len();
    }

    pub fn take_vec(&mut self, n: usize) -> Vec<Symbol> {
        (0..n).map(|_| self.next()).collect()
    }
}

/// The bi-infinite `y` sequence, extended lazily to the right with the
/// kernel and to the left with the time-reversed kernel.
pub struct YLine {
    right: Vec<Symbol>,
    left: Vec<Symbol>,
    forward: ChainSampler,
    backward: ChainSampler,
    rng_right: ChaCha8Rng,
    rng_left: ChaCha8Rng,
    limit: usize,
}

impl YLine {
    pub fn new(shift: &MarkovShift, start: &StartPoint, seeds: &OrbitSeeds) -> Result<Self> {
        Self::with_limit(shift, start, seeds, Y_WINDOW_LIMIT)
    }

    pub fn with_limit(
        shift: &MarkovShift,
        start: &StartPoint,
        seeds: &OrbitSeeds,
        limit: usize,
    ) -> Result<Self> {
        let last = start.y_first + start.y_window.len() as i64 - 1;
        if start.y_first > 0 || last < 0 {
            return Err(Error::Domain(
                "initial y window must contain index 0".into(),
            ));
        }
        let zero = (-start.y_first) as usize;
        let right = start.y_window[zero..].to_vec();
        let left = start.y_window[..zero].iter().rev().copied().collect();
        Ok(Self {
            right,
            left,
            forward: ChainSampler::forward(shift.measure()),
            backward: ChainSampler::backward(shift.measure()),
            rng_right: ChaCha8Rng::seed_from_u64(seeds.y_right),
            rng_left: ChaCha8Rng::seed_from_u64(seeds.y_left),
            limit,
        })
    }

    /// Number of materialised symbols.
    pub fn materialised(&self) -> usize {
        self.right.len() + self.left.len()
    }

    pub fn get(&mut self, i: i64) -> Result<Symbol> {
        if i >= 0 {
            let i = i as usize;
            if i >= self.right.len() {
                self.guard(i + 1 - self.right.len())?;
                while self.right.len() <= i {
                    let last = *self.right.last().expect("index 0 is present");
                    let s = self.forward.next(last, &mut self.rng_right);
                    self.right.push(s);
                }
            }
            Ok(self.right[i])
        } else {
            let j = (-1 - i) as usize;
            if j >= self.left.len() {
                self.guard(j + 1 - self.left.len())?;
                while self.left.len() <= j {
                    let last = self.left.last().copied().unwrap_or(self.right[0]);
                    let s = self.backward.next(last, &mut self.rng_left);
                    self.left.push(s);
                }
            }
            Ok(self.left[j])
        }
    }

    fn guard(&self, extra: usize) -> Result<()> {
        if self.materialised() + extra > self.limit {
            return Err(Error::WindowGuard { limit: self.limit });
        }
        Ok(())
    }
}

/// Decides whether a walk level counts as a return of the second coordinate.
pub trait LevelSet {
    fn contains(&mut self, level: i64) -> Result<bool>;
}

/// `G_r(y)`: levels `k` whose `y` window matches the base word; each level
/// is examined once.
pub struct ReturnLevels {
    line: YLine,
    base: Vec<Symbol>,
    /// Index of the first base symbol relative to the level.
    offset: i64,
    cache_pos: Vec<u8>,
    cache_neg: Vec<u8>,
}

const UNKNOWN: u8 = 0;
const OUT: u8 = 1;
const IN: u8 = 2;

impl ReturnLevels {
    pub fn new(line: YLine, base: Vec<Symbol>, sided: Sided) -> Self {
        let offset = match sided {
            Sided::OneSided => 0,
            Sided::TwoSided => -((base.len() / 2) as i64),
        };
        Self {
            line,
            base,
            offset,
            cache_pos: Vec::new(),
            cache_neg: Vec::new(),
        }
    }

    fn slot(&mut self, level: i64) -> &mut u8 {
        let (cache, idx) = if level >= 0 {
            (&mut self.cache_pos, level as usize)
        } else {
            (&mut self.cache_neg, (-1 - level) as usize)
        };
        if idx >= cache.len() {
            let new_len = (idx + 1).max(2 * cache.len()).max(64);
            cache.resize(new_len, UNKNOWN);
        }
        &mut cache[idx]
    }

    pub fn line_mut(&mut self) -> &mut YLine {
        &mut self.line
    }
}

impl LevelSet for ReturnLevels {
    fn contains(&mut self, level: i64) -> Result<bool> {
        let known = *self.slot(level);
        if known != UNKNOWN {
            return Ok(known == IN);
        }
        let mut hit = true;
        for i in 0..self.base.len() {
            if self.line.get(level + self.offset + i as i64)? != self.base[i] {
                hit = false;
                break;
            }
        }
        *self.slot(level) = if hit { IN } else { OUT };
        Ok(hit)
    }
}

/// The single level `{0}`: returns of the Z-extension to the origin.
pub struct Origin;

impl LevelSet for Origin {
    #[inline]
    fn contains(&mut self, level: i64) -> Result<bool> {
        Ok(level == 0)
    }
}

/// Every level: returns of the base map `f` alone.
pub struct AllLevels;

impl LevelSet for AllLevels {
    #[inline]
    fn contains(&mut self, _level: i64) -> Result<bool> {
        Ok(true)
    }
}

/// Streaming detector for occurrences of a fixed word (KMP automaton).
#[derive(Debug, Clone)]
pub struct WordMatcher {
    alphabet: usize,
    len: u32,
    delta: Vec<u32>,
}

impl WordMatcher {
    pub fn new(word: &[Symbol], alphabet: usize) -> Self {
        let len = word.len();
        let mut fail = vec![0usize; len + 1];
        let mut k = 0usize;
        for i in 1..len {
            while k > 0 && word[i] != word[k] {
                k = fail[k];
            }
            if word[i] == word[k] {
                k += 1;
            }
            fail[i + 1] = k;
        }
        let mut delta = vec![0u32; (len + 1) * alphabet];
        for state in 0..=len {
            for a in 0..alphabet {
                let next = if state < len && word[state] as usize == a {
                    state + 1
                } else if state == 0 {
                    0
                } else {
                    delta[fail[state] * alphabet + a] as usize
                };
                delta[state * alphabet + a] = next as u32;
            }
        }
        Self {
            alphabet,
            len: len as u32,
            delta,
        }
    }

    #[inline]
    pub fn step(&self, state: u32, s: Symbol) -> u32 {
        self.delta[state as usize * self.alphabet + s as usize]
    }

    #[inline]
    pub fn is_match(&self, state: u32) -> bool {
        state == self.len
    }
}

/// Scans an orbit for return times `1 ≤ n ≤ horizon`; stops after the first
/// one when `first_only` is set.
fn scan_returns<L: LevelSet>(
    x_shift: &MarkovShift,
    cocycle: &Cocycle,
    x_word: &[Symbol],
    xs: &mut XSource,
    levels: &mut L,
    horizon: u64,
    first_only: bool,
) -> Result<Vec<u64>> {
    let mut events = Vec::new();
    if horizon == 0 {
        return Ok(events);
    }
    let matcher = WordMatcher::new(x_word, x_shift.alphabet_size());
    let mx = x_word.len() as u64 - 1;
    let word_sum: i64 = x_word.iter().map(|&s| cocycle.value(s)).sum();
    let values = cocycle.values();
    let mut state = 0u32;
    // walk = h_{j+1} after reading x_j
    let mut walk = 0i64;
    for _ in 0..=mx {
        let s = xs.next();
        walk += values[s as usize];
        state = matcher.step(state, s);
    }
    let last_j = horizon + mx;
    let mut j = mx;
    let mut buf = vec![0 as Symbol; SCAN_BLOCK];
    'outer: while j < last_j {
        let len = (last_j - j).min(SCAN_BLOCK as u64) as usize;
        xs.fill(&mut buf[..len]);
        for &s in &buf[..len] {
            j += 1;
            walk += values[s as usize];
            state = matcher.step(state, s);
            if matcher.is_match(state) && levels.contains(walk - word_sum)? {
                events.push(j - mx);
                if first_only {
                    break 'outer;
                }
            }
        }
    }
    Ok(events)
}

/// Orbit machinery for one trial at one radius.
struct BallOrbit<'a> {
    system: &'a TTSystem,
    x_word: Vec<Symbol>,
    y_word: Vec<Symbol>,
    trial: &'a Trial,
}

impl<'a> BallOrbit<'a> {
    fn new(system: &'a TTSystem, trial: &'a Trial, r: f64) -> Result<Self> {
        let (mx, my) = system.generations(r)?;
        Ok(Self {
            system,
            x_word: trial.start.x_word(mx)?.to_vec(),
            y_word: trial.start.y_word(my, system.y().sided())?.to_vec(),
            trial,
        })
    }

    fn data(&self) -> BallPairData {
        BallPairData::from_measures(
            cylinder_measure(self.system.x(), &self.x_word),
            cylinder_measure(self.system.y(), &self.y_word),
        )
    }

    fn scan(&self, horizon: u64, first_only: bool) -> Result<Vec<u64>> {
        let mut xs = XSource::new(
            self.system.x(),
            &self.trial.start.x_prefix,
            self.trial.seeds.x,
        );
        let line = YLine::new(self.system.y(), &self.trial.start, &self.trial.seeds)?;
        let mut levels = ReturnLevels::new(line, self.y_word.clone(), self.system.y().sided());
        scan_returns(
            self.system.x(),
            self.system.cocycle(),
            &self.x_word,
            &mut xs,
            &mut levels,
            horizon,
            first_only,
        )
    }
}

/// Unnormalised return times `1 ≤ n ≤ horizon` of the trial's orbit to its
/// own ball of radius `r`.
pub fn returns(system: &TTSystem, trial: &Trial, r: f64, horizon: u64) -> Result<Vec<u64>> {
    BallOrbit::new(system, trial, r)?.scan(horizon, false)
}

/// Unnormalised returns of the Z-extension `(x, 0)` to `B_r^X(x) × {0}`.
pub fn z_returns(
    x_shift: &MarkovShift,
    cocycle: &Cocycle,
    trial: &Trial,
    r: f64,
    horizon: u64,
) -> Result<Vec<u64>> {
    let mx = ball_generation(r, x_shift.lyapunov())?;
    let x_word = trial.start.x_word(mx)?;
    let mut xs = XSource::new(x_shift, &trial.start.x_prefix, trial.seeds.x);
    scan_returns(x_shift, cocycle, x_word, &mut xs, &mut Origin, horizon, false)
}

/// Return times of `f` alone to `B_r^X(x)`.
pub fn base_returns(
    x_shift: &MarkovShift,
    cocycle: &Cocycle,
    trial: &Trial,
    r: f64,
    horizon: u64,
) -> Result<Vec<u64>> {
    let mx = ball_generation(r, x_shift.lyapunov())?;
    let x_word = trial.start.x_word(mx)?;
    let mut xs = XSource::new(x_shift, &trial.start.x_prefix, trial.seeds.x);
    scan_returns(x_shift, cocycle, x_word, &mut xs, &mut AllLevels, horizon, false)
}

/// Result of a capped first-return search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirstReturn {
    Hit(u64),
    Censored(u64),
}

impl FirstReturn {
    pub fn is_censored(&self) -> bool {
        matches!(self, FirstReturn::Censored(_))
    }

    /// Return time, or the cap for censored trials.
    pub fn value_or_cap(&self) -> u64 {
        match *self {
            FirstReturn::Hit(n) | FirstReturn::Censored(n) => n,
        }
    }
}

/// First return time `τ_r` of the trial's orbit, searched up to `cap`.
pub fn first_return(system: &TTSystem, trial: &Trial, r: f64, cap: u64) -> Result<FirstReturn> {
    if cap == 0 {
        return Err(Error::Domain("cap must be at least 1".into()));
    }
    let events = BallOrbit::new(system, trial, r)?.scan(cap, true)?;
    Ok(match events.first() {
        Some(&n) => FirstReturn::Hit(n),
        None => FirstReturn::Censored(cap),
    })
}

/// Normalised event times of a return point process on `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub normalization: f64,
    pub raw_count: usize,
    pub horizon: f64,
}

impl EventSeries {
    pub fn from_raw(raw: &[u64], normalization: f64, horizon: f64) -> Self {
        let times: Vec<f64> = raw
            .iter()
            .map(|&n| n as f64 / normalization)
            .filter(|&t| t <= horizon)
            .collect();
        Self {
            raw_count: times.len(),
            times,
            normalization,
            horizon,
        }
    }

    /// Number of events in `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.times.partition_point(|&t| t <= a);
        let hi = self.times.partition_point(|&t| t <= b);
        hi.saturating_sub(lo)
    }
}

fn steps_for(t: f64, normalization: f64) -> u64 {
    (t * normalization).floor().max(0.0) as u64
}

/// Return point process `Σ δ_{n/n_r}` on `(0, T]` for one trial.
pub fn point_process(
    system: &TTSystem,
    trial: &Trial,
    r: f64,
    t: f64,
) -> Result<(BallPairData, EventSeries)> {
    let orbit = BallOrbit::new(system, trial, r)?;
    let data = orbit.data();
    let raw = orbit.scan(steps_for(t, data.n_r), false)?;
    Ok((data, EventSeries::from_raw(&raw, data.n_r, t)))
}

/// Z-extension point process `Σ δ_{n μ(B_r^X)²}` on `(0, T]` for one trial.
pub fn z_extension_process(
    x_shift: &MarkovShift,
    cocycle: &Cocycle,
    trial: &Trial,
    r: f64,
    t: f64,
) -> Result<EventSeries> {
    if cocycle.is_zero() {
        log::warn!("zero cocycle: the Z-extension process reduces to returns of the base map");
    }
    let mx = ball_generation(r, x_shift.lyapunov())?;
    let mu = cylinder_measure(x_shift, trial.start.x_word(mx)?);
    let norm = 1.0 / (mu * mu);
    let raw = z_returns(x_shift, cocycle, trial, r, steps_for(t, norm))?;
    Ok(EventSeries::from_raw(&raw, norm, t))
}

/// Per-trial regression slopes of `log τ_r` on `-log r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub standard_error: f64,
    pub trial_slopes: Vec<f64>,
    /// Radii actually used (those with at least one uncensored trial).
    pub radii: Vec<f64>,
    pub censored_per_radius: Vec<usize>,
    /// Per trial, per requested radius (including excluded ones).
    pub samples: Vec<Vec<RadiusSample>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusSample {
    pub first_return: FirstReturn,
    pub ball: BallPairData,
}

/// Recurrence rate estimate over independent annealed trials.
///
/// Censored return times enter the regression at the cap
/// `cap_factor · n_r`.
pub fn recurrence_rate(
    system: &TTSystem,
    radii: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
    cap_factor: f64,
) -> Result<RateEstimate> {
    if radii.len() < 4 {
        return Err(Error::Domain("at least four radii are needed".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("radii must be strictly decreasing".into()));
    }
    if trials < 2 {
        return Err(Error::Domain("at least two trials are needed".into()));
    }
    let smallest = *radii.last().expect("nonempty");
    let (mx, my) = system.generations(smallest)?;
    let per_trial: Vec<Result<Vec<RadiusSample>>> = par::map_trials(workers, trials, |t| {
        let mut rng = par::trial_rng(seed, t);
        let trial = Trial::annealed(system, mx, my, &mut rng);
        radii
            .iter()
            .map(|&r| {
                let orbit = BallOrbit::new(system, &trial, r)?;
                let cap = (cap_factor * orbit.data().n_r).ceil().max(1.0) as u64;
                let events = orbit.scan(cap, true)?;
                let first_return = match events.first() {
                    Some(&n) => FirstReturn::Hit(n),
                    None => FirstReturn::Censored(cap),
                };
                Ok(RadiusSample {
                    first_return,
                    ball: orbit.data(),
                })
            })
            .collect()
    });
    let per_trial: Vec<Vec<RadiusSample>> = per_trial.into_iter().collect::<Result<_>>()?;
    let censored: Vec<usize> = (0..radii.len())
        .map(|i| per_trial.iter().filter(|t| t[i].first_return.is_censored()).count())
        .collect();
    let keep: Vec<usize> = (0..radii.len()).filter(|&i| censored[i] < trials).collect();
    for (i, &c) in censored.iter().enumerate() {
        if c == trials {
            log::warn!("radius {} excluded: every trial censored", radii[i]);
        }
    }
    if keep.len() < 2 {
        return Err(Error::Domain(
            "fewer than two radii with uncensored returns".into(),
        ));
    }
    let xs: Vec<f64> = keep.iter().map(|&i| -radii[i].ln()).collect();
    let trial_slopes: Vec<f64> = per_trial
        .iter()
        .map(|t| {
            let ys: Vec<f64> = keep
                .iter()
                .map(|&i| (t[i].first_return.value_or_cap() as f64).ln())
                .collect();
            crate::stats::ols_slope(&xs, &ys)
        })
        .collect();
    let (slope, standard_error) = crate::stats::mean_and_se(&trial_slopes);
    Ok(RateEstimate {
        slope,
        standard_error,
        trial_slopes,
        radii: keep.iter().map(|&i| radii[i]).collect(),
        censored_per_radius: keep.iter().map(|&i| censored[i]).collect(),
        samples: per_trial,
    })
}

/// `min(2 d_μ, d_μ + d_ν)`.
pub fn recurrence_target(system: &TTSystem) -> f64 {
    let dmu = crate::symbolic::dimension(system.x());
    let dnu = crate::symbolic::dimension(system.y());
    (2.0 * dmu).min(dmu + dnu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn system(lx: usize, ly: usize, y_sided: Sided, values: Vec<i64>) -> TTSystem {
        let x = MarkovShift::full(lx, (lx as f64).ln(), Sided::OneSided).unwrap();
        let y = MarkovShift::full(ly, (ly as f64).ln(), y_sided).unwrap();
        TTSystem::new(x, y, values).unwrap()
    }

    /// Straightforward scan over a materialised orbit.
    fn naive(system: &TTSystem, trial: &Trial, r: f64, horizon: u64) -> Vec<u64> {
        let (mx, my) = system.generations(r).unwrap();
        let xw = trial.start.x_word(mx).unwrap().to_vec();
        let yw = trial.start.y_word(my, system.y().sided()).unwrap().to_vec();
        let mut xs = XSource::new(system.x(), &trial.start.x_prefix, trial.seeds.x);
        let x = xs.take_vec(horizon as usize + mx + 1);
        let walk = crate::cocycle::birkhoff_sums(&x, system.cocycle());
        let mut line = YLine::new(system.y(), &trial.start, &trial.seeds).unwrap();
        let lo = match system.y().sided() {
            Sided::OneSided => 0,
            Sided::TwoSided => -(my as i64),
        };
        (1..=horizon)
            .filter(|&n| {
                let n = n as usize;
                x[n..=n + mx] == xw[..]
                    && (0..yw.len()).all(|i| {
                        line.get(walk[n] + lo + i as i64).unwrap() == yw[i]
                    })
            })
            .collect()
    }

    #[test]
    fn ball_pair_examples() {
        let a = BallPairData::from_measures(0.01, 0.1);
        assert_relative_eq!(a.n_r, 1000.0, max_relative = 1e-12);
        assert_relative_eq!(a.alpha_r, 0.1, max_relative = 1e-12);
        assert_eq!(a.beta_r, 1.0);
        let b = BallPairData::from_measures(0.1, 0.01);
        assert_relative_eq!(b.n_r, 100.0, max_relative = 1e-12);
        assert_eq!(b.alpha_r, 1.0);
        assert_relative_eq!(b.beta_r, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn full_shift_pairs_give_power_of_l() {
        for l in [2usize, 3] {
            let lam = (l as f64).ln();
            let x2 = MarkovShift::full(l * l, lam, Sided::OneSided).unwrap();
            let y2 = MarkovShift::full(l, lam, Sided::TwoSided).unwrap();
            let s2 = TTSystem::new(x2, y2, vec![0; l * l]).unwrap();
            let x1 = MarkovShift::full(l, lam, Sided::OneSided).unwrap();
            let y1 = MarkovShift::full(l, lam, Sided::OneSided).unwrap();
            let s1 = TTSystem::new(x1, y1, vec![0; l]).unwrap();
            for m in 1..6 {
                let r = crate::symbolic::boundary_radius(m, lam);
                let d2 = ball_pair_data(&s2, r, &vec![0; m + 1], &vec![1; 2 * m + 1]).unwrap();
                assert_relative_eq!(d2.alpha_r, 1.0 / l as f64, max_relative = 1e-12);
                assert_eq!(d2.beta_r, 1.0);
                let d1 = ball_pair_data(&s1, r, &vec![0; m + 1], &vec![1; m + 1]).unwrap();
                assert_relative_eq!(d1.alpha_r, 1.0, max_relative = 1e-12);
                assert_eq!(d1.beta_r, 1.0);
            }
        }
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_prefactor(0.01, 0.7, 0.7, 1.0, 2.0), 1.0);
        assert_relative_eq!(
            zeta_prefactor((-3f64).exp(), 1.0, 2.0, 1.0, 1.0),
            (-1f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn matcher_finds_overlapping_occurrences() {
        let m = WordMatcher::new(&[0, 1, 0], 2);
        let text = [0u8, 1, 0, 1, 0, 0, 1, 0];
        let mut state = 0;
        let mut ends = vec![];
        for (i, &s) in text.iter().enumerate() {
            state = m.step(state, s);
            if m.is_match(state) {
                ends.push(i);
            }
        }
        assert_eq!(ends, vec![2, 4, 7]);
    }

    #[test]
    fn y_line_is_independent_of_access_order() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trial = Trial::annealed(&sys, 3, 3, &mut rng);
        let mut a = YLine::new(sys.y(), &trial.start, &trial.seeds).unwrap();
        let mut b = YLine::new(sys.y(), &trial.start, &trial.seeds).unwrap();
        let fwd: Vec<_> = (-50..50).map(|i| a.get(i).unwrap()).collect();
        let mut bwd: Vec<_> = (-50..50).rev().map(|i| b.get(i).unwrap()).collect();
        bwd.reverse();
        assert_eq!(fwd, bwd);
        assert_eq!(&fwd[47..54], &trial.start.y_window[..]);
    }

    #[test]
    fn y_window_guard() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let trial = Trial::annealed(&sys, 1, 1, &mut ChaCha8Rng::seed_from_u64(1));
        let mut line = YLine::with_limit(sys.y(), &trial.start, &trial.seeds, 100).unwrap();
        assert!(line.get(90).is_ok());
        assert_eq!(line.get(-20), Err(Error::WindowGuard { limit: 100 }));
    }

    #[test]
    fn fast_scan_matches_naive() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let r = 2f64.powi(-3);
        for seed in 0..20 {
            let (mx, my) = sys.generations(r).unwrap();
            let trial = Trial::annealed(&sys, mx, my, &mut ChaCha8Rng::seed_from_u64(seed));
            let fast = returns(&sys, &trial, r, 20_000).unwrap();
            assert_eq!(fast, naive(&sys, &trial, r, 20_000), "seed {seed}");
        }
    }

    #[test]
    fn horizon_zero_is_empty() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let trial = Trial::annealed(&sys, 2, 2, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(returns(&sys, &trial, 0.3, 0).unwrap().is_empty());
        let (_, series) = point_process(&sys, &trial, 0.3, 0.0).unwrap();
        assert!(series.times.is_empty());
    }

    #[test]
    fn zero_cocycle_reduces_to_base_returns() {
        let sys = system(2, 2, Sided::TwoSided, vec![0, 0]);
        let r = 2f64.powi(-4);
        let trial = Trial::annealed(&sys, 4, 4, &mut ChaCha8Rng::seed_from_u64(8));
        let both = returns(&sys, &trial, r, 5000).unwrap();
        let base = base_returns(sys.x(), sys.cocycle(), &trial, r, 5000).unwrap();
        assert!(!base.is_empty());
        assert_eq!(both, base);
        let z = z_returns(sys.x(), sys.cocycle(), &trial, r, 5000).unwrap();
        assert_eq!(z, base);
    }

    #[test]
    fn z_returns_are_returns_and_radii_nest() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let (r1, r2) = (3f64.powi(-2), 3f64.powi(-3));
        let (mx, my) = sys.generations(r2).unwrap();
        for seed in 0..10 {
            let trial = Trial::annealed(&sys, mx, my, &mut ChaCha8Rng::seed_from_u64(seed));
            let coarse = returns(&sys, &trial, r1, 20_000).unwrap();
            let fine = returns(&sys, &trial, r2, 20_000).unwrap();
            assert!(fine.iter().all(|n| coarse.binary_search(n).is_ok()));
            let z = z_returns(sys.x(), sys.cocycle(), &trial, r2, 20_000).unwrap();
            assert!(z.iter().all(|n| fine.binary_search(n).is_ok()));
        }
    }

    #[test]
    fn first_return_is_first_event() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let r = 0.2;
        for seed in 0..10 {
            let (mx, my) = sys.generations(r).unwrap();
            let trial = Trial::annealed(&sys, mx, my, &mut ChaCha8Rng::seed_from_u64(seed));
            let all = returns(&sys, &trial, r, 100_000).unwrap();
            match first_return(&sys, &trial, r, 100_000).unwrap() {
                FirstReturn::Hit(n) => {
                    assert!(n >= 1);
                    assert_eq!(Some(&n), all.first());
                }
                FirstReturn::Censored(_) => assert!(all.is_empty()),
            }
        }
    }

    #[test]
    fn conditional_start_uses_given_ball() {
        let sys = system(3, 2, Sided::TwoSided, vec![-1, 0, 1]);
        let mode = StartMode::Conditional {
            x_word: vec![0, 1],
            y_word: vec![1, 0, 1],
        };
        let trial = Trial::new(&sys, &mode, 1, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let r = (-(3f64.ln())).exp().min(0.5);
        let (mx, my) = sys.generations(r).unwrap();
        assert_eq!(trial.start.x_word(mx).unwrap(), &[0, 1]);
        assert_eq!(trial.start.y_word(my, Sided::TwoSided).unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn event_series_counts() {
        let s = EventSeries::from_raw(&[1, 2, 5, 9], 4.0, 2.0);
        assert_eq!(s.times, vec![0.25, 0.5, 1.25]);
        assert_eq!(s.raw_count, 3);
        assert_eq!(s.count_in(0.0, 1.0), 2);
        assert_eq!(s.count_in(0.5, 0.5), 0);
    }
}
