//! Scenario runner: dispatches a config to the simulation and theory
//! modules, compares the two, and renders a JSON report plus CSV artifacts.
//!
//! Output depends only on the config text, the seed and the crate version:
//! all parallel work is keyed by trial index and assembled in order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cocycle::{llt_check, Cocycle};
use crate::config::{
    BaseDef, CorollaryConfig, ExperimentConfig, FirstReturnConfig, LimitMomentsConfig, LltConfig,
    PointProcessConfig, RecurrenceRateConfig, Scenario, StartDef, ZExtensionConfig,
};
use crate::dynamics::{
    ball_pair_data, first_return, point_process, recurrence_rate, recurrence_target,
    z_extension_process, BallPairData, EventSeries, FirstReturn, StartMode, TTSystem, Trial,
};
use crate::error::{Error, Result};
use crate::limit::{sample_first_return_limit, LimitGrid, ZParams};
use crate::moments::{direct_moment, limit_moment, Estimate, MomentMc, MomentSpec};
use crate::par::{map_trials, trial_rng};
use crate::stats::{jackknife_variance, ks_distance_below, mean_and_se, sorted};
use crate::symbolic::{ball_generation, dimension, MarkovShift};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FILE: &str = "report.json";
/// Stream used for theory-side reference samples.
const REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `|e − t| ≤ tol·|t|`
    Relative,
    /// `|e − t| ≤ tol`
    Absolute,
    /// `|e − t| ≤ tol·se`
    StandardErrors,
    /// `e ≤ tol`
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One comparison between a measured and a predicted quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub empirical: f64,
    pub theoretical: f64,
    pub standard_error: Option<f64>,
    pub ks_distance: Option<f64>,
    pub tolerance: f64,
    pub criterion: Criterion,
    /// Advisory rows are reported but never fail the run.
    pub hard: bool,
    pub verdict: Verdict,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Row {
    fn new(name: impl Into<String>, empirical: f64, theoretical: f64, tolerance: f64, criterion: Criterion) -> Self {
        let mut r = Self {
            name: name.into(),
            empirical,
            theoretical,
            standard_error: None,
            ks_distance: None,
            tolerance,
            criterion,
            hard: true,
            verdict: Verdict::Fail,
        };
        r.judge();
        r
    }

    pub fn relative(name: impl Into<String>, empirical: f64, theoretical: f64, tol: f64) -> Self {
        Self::new(name, empirical, theoretical, tol, Criterion::Relative)
    }

    pub fn absolute(name: impl Into<String>, empirical: f64, theoretical: f64, tol: f64) -> Self {
        Self::new(name, empirical, theoretical, tol, Criterion::Absolute)
    }

    pub fn within_se(name: impl Into<String>, empirical: f64, theoretical: f64, se: f64, k: f64) -> Self {
        let mut r = Self::new(name, empirical, theoretical, k, Criterion::StandardErrors);
        r.standard_error = finite(se);
        r.judge();
        r
    }

    pub fn ks(name: impl Into<String>, distance: f64, bound: f64) -> Self {
        let mut r = Self::new(name, distance, 0.0, bound, Criterion::AtMost);
        r.ks_distance = Some(distance);
        r
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.standard_error = finite(se);
        self
    }

    pub fn advisory(mut self) -> Self {
        self.hard = false;
        self
    }

    fn judge(&mut self) {
        let d = (self.empirical - self.theoretical).abs();
        let ok = match self.criterion {
            Criterion::Relative => d <= self.tolerance * self.theoretical.abs(),
            Criterion::Absolute => d <= self.tolerance,
            Criterion::StandardErrors => match self.standard_error {
                Some(se) => d <= self.tolerance * se,
                None => d == 0.0,
            },
            Criterion::AtMost => self.empirical <= self.tolerance,
        };
        self.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    /// The theoretical statement being tested.
    pub target: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub provenance: Provenance,
    pub rows: Vec<Row>,
    /// False iff a hard row failed or the run is incomplete.
    pub passed: bool,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn failed_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.hard && !r.passed())
    }
}

/// A CSV file produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ComparisonReport,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.content)?;
        }
        std::fs::write(dir.join(REPORT_FILE), self.report.to_json())?;
        Ok(())
    }
}

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(name: &'static str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { name, writer }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Artifact {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        Artifact {
            name: self.name.to_string(),
            content: String::from_utf8(bytes).expect("utf-8 fields"),
        }
    }
}

struct Sink {
    rows: Vec<Row>,
    artifacts: Vec<Artifact>,
}

/// Runs the experiment with `workers` threads.
///
/// Errors in the configuration are returned; failures while simulating
/// (resource guards) yield a report marked incomplete with the rows
/// gathered so far.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let workers = workers.max(1);
    let mut sink = Sink {
        rows: Vec::new(),
        artifacts: Vec::new(),
    };
    let base = cfg.base_dir.as_path();
    let outcome = match &cfg.scenario {
        Scenario::RecurrenceRate(c) => run_recurrence_rate(c, base, workers, &mut sink),
        Scenario::FirstReturn(c) => run_first_return(c, base, workers, &mut sink),
        Scenario::PointProcess(c) => run_point_process(c, base, workers, &mut sink),
        Scenario::ZExtension(c) => run_z_extension(c, base, workers, &mut sink),
        Scenario::Llt(c) => run_llt(c, base, &mut sink),
        Scenario::LimitMoments(c) => run_limit_moments(c, workers, &mut sink),
        Scenario::CorollaryCase(c) => run_corollary(c, base, workers, &mut sink),
    };
    let (status, error) = match outcome {
        Ok(()) => (Status::Complete, None),
        Err(e @ (Error::SizeGuard { .. } | Error::WindowGuard { .. })) => {
            log::warn!("run incomplete: {e}");
            (Status::Incomplete, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let passed = status == Status::Complete && sink.rows.iter().all(|r| !r.hard || r.passed());
    Ok(RunOutput {
        report: ComparisonReport {
            scenario: cfg.scenario.name().to_string(),
            target: target_text(&cfg.scenario).to_string(),
            status,
            error,
            provenance: Provenance {
                config_sha256: cfg.hash.clone(),
                seed: cfg.scenario.seed(),
                version: VERSION.to_string(),
            },
            rows: sink.rows,
            passed,
        },
        artifacts: sink.artifacts,
    })
}

fn target_text(s: &Scenario) -> &'static str {
    match s {
        Scenario::RecurrenceRate(_) => {
            "log tau_r / -log r -> min(2 d_mu, d_mu + d_nu) for almost every start point"
        }
        Scenario::FirstReturn(_) => {
            "case d_mu < d_nu: mu(B_r)^2 tau_r -> sigma^2 E^2 / N^2; case d_mu > d_nu: tau_r / n_r -> Exp(1)"
        }
        Scenario::PointProcess(_) => {
            "N_r = sum_n delta_{n/n_r} over returns converges to Z_{alpha,beta} with (alpha,beta) = lim (alpha_r, beta_r)"
        }
        Scenario::ZExtension(_) => {
            "returns of (x, 0) to B_r(x) x {0} at times n mu(B_r)^2 converge to P(L_t(0)); E count on (0,T] = sqrt(2T/pi)/sigma"
        }
        Scenario::Llt(_) => {
            "mu(A, h_n = k, f^-n B) ~ mu(A) mu(B) exp(-k^2/(2 n sigma^2)) / sqrt(2 pi n sigma^2)"
        }
        Scenario::LimitMoments(_) => {
            "E[prod Z(t_{v-1},t_v]^m_v] = sum_{q0} 1/q0! sum_q prod S(m_v,q_v) sum_psi alpha^{(q-q0)/2} beta^q0 H(Z^psi)"
        }
        Scenario::CorollaryCase(_) => {
            "pi = (1,0) if d_mu < d_nu; (0,1) if d_mu > d_nu; full L^d- and L-shifts with equal exponents: (L^{1-d}, 1)"
        }
    }
}

fn build_mode(start: &StartDef) -> StartMode {
    match start {
        StartDef::Annealed => StartMode::Annealed,
        StartDef::Conditional { x_word, y_word } => StartMode::Conditional {
            x_word: x_word.clone(),
            y_word: y_word.clone(),
        },
    }
}

/// Ball data of a trial's own ball at radius `r`.
fn trial_ball(system: &TTSystem, trial: &Trial, r: f64) -> Result<BallPairData> {
    let (mx, my) = system.generations(r)?;
    ball_pair_data(
        system,
        r,
        trial.start.x_word(mx)?,
        trial.start.y_word(my, system.y().sided())?,
    )
}

fn run_recurrence_rate(c: &RecurrenceRateConfig, base: &Path, workers: usize, sink: &mut Sink) -> Result<()> {
    let system = c.system.build(base)?;
    let est = recurrence_rate(&system, &c.radii, c.trials, c.seed, workers, c.cap_factor)?;
    let target = recurrence_target(&system);
    sink.rows.push(
        Row::relative("recurrence rate slope", est.slope, target, c.tolerance).with_se(est.standard_error),
    );
    for (r, &cens) in est.radii.iter().zip(&est.censored_per_radius) {
        sink.rows.push(
            Row::absolute(
                format!("censored fraction at r={}", fmt_f64(*r)),
                cens as f64 / c.trials as f64,
                0.0,
                0.5,
            )
            .advisory(),
        );
    }
    let mut csv = Csv::new("first_returns.csv", &["trial", "r", "tau", "alpha_r", "beta_r", "n_r"]);
    for (t, samples) in est.samples.iter().enumerate() {
        for (s, &r) in samples.iter().zip(&c.radii) {
            csv.row([
                t.to_string(),
                fmt_f64(r),
                tau_field(&s.first_return),
                fmt_f64(s.ball.alpha_r),
                fmt_f64(s.ball.beta_r),
                fmt_f64(s.ball.n_r),
            ]);
        }
    }
    sink.artifacts.push(csv.finish());
    Ok(())
}

fn tau_field(f: &FirstReturn) -> String {
    match f {
        FirstReturn::Hit(n) => n.to_string(),
        FirstReturn::Censored(_) => "CENSORED".into(),
    }
}

/// Reference law of the normalised first return for the system's case.
fn first_return_reference(system: &TTSystem, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (dmu, dnu) = (dimension(system.x()), dimension(system.y()));
    let mut rng = trial_rng(seed, REFERENCE_STREAM);
    if dmu < dnu {
        let sigma = system.cocycle().sigma();
        Ok(sorted((0..n).map(|_| sample_first_return_limit(sigma, &mut rng)).collect()))
    } else if dmu > dnu {
        use rand_distr::{Distribution, Exp1};
        Ok(sorted((0..n).map(|_| Exp1.sample(&mut rng)).collect()))
    } else {
        Err(Error::Config(format!(
            "first-return reference needs d_mu != d_nu (both are {dmu})"
        )))
    }
}

fn run_first_return(c: &FirstReturnConfig, base: &Path, workers: usize, sink: &mut Sink) -> Result<()> {
    let system = c.system.build(base)?;
    let reference = first_return_reference(&system, c.reference_samples, c.seed)?;
    let mode = build_mode(&c.start);
    let (mx, my) = system.generations(*c.radii.last().expect("validated"))?;
    let mut csv = Csv::new("first_returns.csv", &["trial", "r", "tau", "normalized", "n_r"]);
    let mut distances = Vec::with_capacity(c.radii.len());
    for (ri, &r) in c.radii.iter().enumerate() {
        let results = map_trials(workers, c.trials, |t| -> Result<(FirstReturn, BallPairData)> {
            let mut rng = trial_rng(c.seed, t);
            let trial = Trial::new(&system, &mode, mx, my, &mut rng)?;
            let data = trial_ball(&system, &trial, r)?;
            let cap = (c.cap_factor * data.n_r).ceil().max(1.0) as u64;
            Ok((first_return(&system, &trial, r, cap)?, data))
        });
        let results: Vec<(FirstReturn, BallPairData)> = results.into_iter().collect::<Result<_>>()?;
        let mut normalized = Vec::with_capacity(results.len());
        let mut censored = 0usize;
        for (t, (fr, data)) in results.iter().enumerate() {
            let v = match fr {
                FirstReturn::Hit(n) => *n as f64 / data.n_r,
                FirstReturn::Censored(_) => {
                    censored += 1;
                    f64::INFINITY
                }
            };
            normalized.push(v);
            csv.row([
                t.to_string(),
                fmt_f64(r),
                tau_field(fr),
                if v.is_finite() { fmt_f64(v) } else { "CENSORED".into() },
                fmt_f64(data.n_r),
            ]);
        }
        let normalized = sorted(normalized);
        let ks = ks_distance_below(&normalized, &reference, c.cap_factor)?;
        distances.push(ks);
        sink.rows.push(Row::ks(format!("KS distance at r={}", fmt_f64(r)), ks, c.ks_tolerance));
        sink.rows.push(
            Row::absolute(
                format!("censored fraction at r={}", fmt_f64(r)),
                censored as f64 / c.trials as f64,
                0.0,
                0.5,
            )
            .advisory(),
        );
        log::info!("first-return r={r}: KS {ks:.4} ({ri})");
    }
    if distances.len() >= 2 {
        let first = distances[0];
        let last = *distances.last().expect("nonempty");
        let mut row = Row::ks("KS distance at smallest r minus at largest r", last - first, 0.0);
        row.ks_distance = None;
        row.theoretical = 0.0;
        if !c.require_decreasing {
            row = row.advisory();
        }
        sink.rows.push(row);
    }
    sink.artifacts.push(csv.finish());
    Ok(())
}

/// Limit parameters predicted for the system; with equal dimensions, the
/// common `(α_r, β_r)` of all sampled balls.
fn limit_params(system: &TTSystem, balls: &[BallPairData]) -> Result<(f64, f64)> {
    let (dmu, dnu) = (dimension(system.x()), dimension(system.y()));
    if dmu < dnu - 1e-12 {
        Ok((1.0, 0.0))
    } else if dmu > dnu + 1e-12 {
        Ok((0.0, 1.0))
    } else {
        let b0 = balls[0];
        if balls
            .iter()
            .all(|b| (b.alpha_r - b0.alpha_r).abs() < 1e-12 && (b.beta_r - b0.beta_r).abs() < 1e-12)
        {
            Ok((b0.alpha_r, b0.beta_r))
        } else {
            Err(Error::Config(
                "equal dimensions with ball-dependent (alpha_r, beta_r): the limit is a mixture \
                 and has no single moment target"
                    .into(),
            ))
        }
    }
}

fn run_point_process(c: &PointProcessConfig, base: &Path, workers: usize, sink: &mut Sink) -> Result<()> {
    let system = c.system.build(base)?;
    let mode = build_mode(&c.start);
    let (mx, my) = system.generations(c.radius)?;
    let runs = map_trials(workers, c.trials, |t| -> Result<(BallPairData, EventSeries)> {
        let mut rng = trial_rng(c.seed, t);
        let trial = Trial::new(&system, &mode, mx, my, &mut rng)?;
        point_process(&system, &trial, c.radius, c.horizon)
    });
    let runs: Vec<(BallPairData, EventSeries)> = runs.into_iter().collect::<Result<_>>()?;
    let balls: Vec<BallPairData> = runs.iter().map(|r| r.0).collect();
    let counts: Vec<f64> = runs.iter().map(|r| r.1.times.len() as f64).collect();

    let (alpha, beta) = limit_params(&system, &balls)?;
    let params = ZParams::new(alpha.clamp(0.0, 1.0), beta.clamp(0.0, 1.0), system.cocycle().sigma())?;
    let spec1 = MomentSpec::new(vec![c.horizon], vec![1])?;
    let spec2 = MomentSpec::new(vec![c.horizon], vec![2])?;
    let grid = aligned_grid(&c.grid, c.horizon);
    let mc = MomentMc {
        paths: c.moment_paths.max(2),
        seed: c.seed,
        workers,
        grid,
        target_se: None,
    };
    let m1 = limit_moment(&params, &spec1, &mc)?;
    let m2 = limit_moment(&params, &spec2, &mc)?;
    // E[Z] is closed-form; the MC value only serves the variance
    let mean_theory = params.value_rate() * (2.0 * c.horizon / std::f64::consts::PI).sqrt() / params.sigma
        + params.beta * c.horizon;
    let var_theory = m2.value - m1.value * m1.value;

    let (mean, mean_se) = mean_and_se(&counts);
    let (var, var_se) = jackknife_variance(&counts);
    sink.rows.push(Row::relative("mean count on (0,T]", mean, mean_theory, c.mean_tolerance).with_se(mean_se));
    sink.rows.push(Row::relative("variance of count on (0,T]", var, var_theory, c.variance_tolerance).with_se(var_se));
    for (name, spec, theory) in [("first moment", &spec1, &m1), ("second moment", &spec2, &m2)] {
        let emp = moment_compare(&runs.iter().map(|r| &r.1).collect::<Vec<_>>(), &spec.times, &spec.exponents);
        sink.rows.push(
            Row::within_se(
                format!("{name} vs limit formula"),
                emp.value,
                theory.value,
                emp.se.hypot(theory.se),
                3.0,
            )
            .advisory(),
        );
    }
    let mean_alpha = balls.iter().map(|b| b.alpha_r).sum::<f64>() / balls.len() as f64;
    let mean_beta = balls.iter().map(|b| b.beta_r).sum::<f64>() / balls.len() as f64;
    sink.rows.push(Row::absolute("mean alpha_r vs limit alpha", mean_alpha, alpha, 0.1).advisory());
    sink.rows.push(Row::absolute("mean beta_r vs limit beta", mean_beta, beta, 0.1).advisory());

    let mut counts_csv = Csv::new("counts.csv", &["trial", "alpha_r", "beta_r", "n_r", "count"]);
    let mut events_csv = Csv::new("events.csv", &["trial", "index", "time"]);
    for (t, (b, s)) in runs.iter().enumerate() {
        counts_csv.row([
            t.to_string(),
            fmt_f64(b.alpha_r),
            fmt_f64(b.beta_r),
            fmt_f64(b.n_r),
            s.times.len().to_string(),
        ]);
        for (i, &time) in s.times.iter().enumerate() {
            events_csv.row([t.to_string(), i.to_string(), fmt_f64(time)]);
        }
    }
    sink.artifacts.push(counts_csv.finish());
    sink.artifacts.push(events_csv.finish());
    Ok(())
}

/// Grid whose resolution puts `t` on a grid time.
fn aligned_grid(grid: &LimitGrid, t: f64) -> LimitGrid {
    let x = t * grid.steps_per_unit as f64;
    if (x - x.round()).abs() <= 1e-6 * x.max(1.0) {
        return *grid;
    }
    // fall back to steps_per_unit = round(steps/t)/... keeping roughly the same resolution
    let steps = x.round().max(1.0);
    LimitGrid {
        steps_per_unit: (steps / t).round() as usize,
        ..*grid
    }
}

/// Empirical joint interval-count moment with its standard error.
///
/// `times` may start at 0, in which case the first interval is empty.
pub fn moment_compare(series: &[&EventSeries], times: &[f64], exponents: &[u32]) -> Estimate {
    let values: Vec<f64> = series
        .iter()
        .map(|s| {
            let mut prev = 0.0;
            let mut p = 1.0;
            for (&t, &e) in times.iter().zip(exponents) {
                p *= (s.count_in(prev, t) as f64).powi(e as i32);
                prev = t;
            }
            p
        })
        .collect();
    let (value, se) = mean_and_se(&values);
    Estimate { value, se }
}

fn base_shift(def: &BaseDef, base: &Path) -> Result<(MarkovShift, Cocycle)> {
    let x = def.x.resolve(base)?.build()?;
    let c = Cocycle::new(&x, def.cocycle.clone())?;
    Ok((x, c))
}

fn run_z_extension(c: &ZExtensionConfig, base: &Path, workers: usize, sink: &mut Sink) -> Result<()> {
    let (x, cocycle) = base_shift(&c.system, base)?;
    let mx = ball_generation(c.radius, x.lyapunov())?;
    let runs = map_trials(workers, c.trials, |t| {
        let mut rng = trial_rng(c.seed, t);
        let trial = Trial::base_only(&x, mx, &mut rng);
        z_extension_process(&x, &cocycle, &trial, c.radius, c.horizon)
    });
    let runs: Vec<EventSeries> = runs.into_iter().collect::<Result<_>>()?;
    let counts: Vec<f64> = runs.iter().map(|s| s.times.len() as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    let target = (2.0 * c.horizon / std::f64::consts::PI).sqrt() / cocycle.sigma();
    sink.rows.push(Row::within_se("mean count on (0,T] vs E[L_T(0)]", mean, target, se, c.z_tolerance));
    let mut csv = Csv::new("counts.csv", &["trial", "count"]);
    for (t, n) in counts.iter().enumerate() {
        csv.row([t.to_string(), (*n as u64).to_string()]);
    }
    sink.artifacts.push(csv.finish());
    Ok(())
}

fn run_llt(c: &LltConfig, base: &Path, sink: &mut Sink) -> Result<()> {
    let (x, cocycle) = base_shift(&c.system, base)?;
    let mut csv = Csv::new(
        "llt.csv",
        &["n", "k", "exact", "prediction", "relative_error", "normalized_error"],
    );
    let mut normalized = Vec::with_capacity(c.n.len());
    let mut last = None;
    for &n in &c.n {
        let chk = llt_check(&x, &cocycle, &c.a_word, &c.b_word, n, c.k)?;
        let rel = (chk.exact - chk.prediction).abs() / chk.prediction;
        normalized.push(chk.normalized_error);
        csv.row([
            n.to_string(),
            c.k.to_string(),
            fmt_f64(chk.exact),
            fmt_f64(chk.prediction),
            fmt_f64(rel),
            fmt_f64(chk.normalized_error),
        ]);
        if chk.arithmetic {
            log::warn!("cocycle is lattice-supported; the Gaussian prediction is not the local asymptotics");
        }
        last = Some((n, chk));
    }
    let (n, chk) = last.expect("validated nonempty");
    sink.rows.push(Row::relative(
        format!("exact vs Gaussian at n={n}, k={}", c.k),
        chk.exact,
        chk.prediction,
        c.relative_tolerance,
    ));
    let first = normalized[0];
    let worst = normalized.iter().copied().fold(0.0, f64::max);
    let row = Row::new(
        "largest normalised error over n relative to the first",
        if first > 0.0 { worst / first } else { f64::INFINITY },
        1.0,
        c.growth_tolerance,
        Criterion::AtMost,
    );
    sink.rows.push(row);
    sink.artifacts.push(csv.finish());
    Ok(())
}

fn run_limit_moments(c: &LimitMomentsConfig, workers: usize, sink: &mut Sink) -> Result<()> {
    let params = c.params()?;
    let formula_mc = MomentMc {
        paths: c.formula_paths,
        seed: c.seed,
        workers,
        grid: c.grid,
        target_se: None,
    };
    let direct_mc = MomentMc {
        paths: c.direct_samples,
        ..formula_mc
    };
    let mut csv = Csv::new(
        "moments.csv",
        &["spec", "times", "exponents", "formula", "formula_se", "direct", "direct_se", "exact"],
    );
    let mut terms = Csv::new("terms.csv", &["spec", "q0", "value", "se"]);
    for (i, spec) in c.specs.iter().enumerate() {
        let f = limit_moment(&params, spec, &formula_mc)?;
        let d = direct_moment(&params, spec, &direct_mc)?;
        let label = format!("times={:?} exponents={:?}", spec.times, spec.exponents);
        sink.rows.push(Row::within_se(
            format!("formula vs simulation, {label}"),
            d.value,
            f.value,
            f.se.hypot(d.se),
            c.z_tolerance,
        ));
        csv.row([
            i.to_string(),
            join(spec.times.iter().map(|&t| fmt_f64(t))),
            join(spec.exponents.iter().map(|e| e.to_string())),
            fmt_f64(f.value),
            fmt_f64(f.se),
            fmt_f64(d.value),
            fmt_f64(d.se),
            f.exact.to_string(),
        ]);
        for (q0, e) in f.by_q0.iter().enumerate() {
            terms.row([i.to_string(), q0.to_string(), fmt_f64(e.value), fmt_f64(e.se)]);
        }
    }
    sink.artifacts.push(csv.finish());
    sink.artifacts.push(terms.finish());
    Ok(())
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(";")
}

/// `Some((L, d))` when `X` is the full `L^d`-shift and `Y` the full
/// `L`-shift, both uniform and with equal exponents.
fn full_shift_pair(system: &TTSystem) -> Option<(usize, i32)> {
    let is_full = |s: &MarkovShift| {
        let n = s.alphabet_size();
        (0..n).all(|a| (0..n).all(|b| s.transitions().allowed(a, b)))
            && s.measure().initial().iter().all(|&p| (p - 1.0 / n as f64).abs() < 1e-12)
            && (0..n).all(|a| (0..n).all(|b| (s.measure().kernel(a, b) - 1.0 / n as f64).abs() < 1e-12))
    };
    let (x, y) = (system.x(), system.y());
    if !is_full(x) || !is_full(y) || (x.lyapunov() - y.lyapunov()).abs() > 1e-12 * x.lyapunov() {
        return None;
    }
    let d = match y.sided() {
        crate::symbolic::Sided::TwoSided => 2,
        crate::symbolic::Sided::OneSided => 1,
    };
    let l = y.alphabet_size();
    (x.alphabet_size() == l.pow(d as u32)).then_some((l, d))
}

fn run_corollary(c: &CorollaryConfig, base: &Path, workers: usize, sink: &mut Sink) -> Result<()> {
    let system = c.system.build(base)?;
    let (dmu, dnu) = (dimension(system.x()), dimension(system.y()));
    let (mx, my) = system.generations(*c.radii.last().expect("validated"))?;
    let mut csv = Csv::new("balls.csv", &["r", "trial", "mu_ball", "nu_ball", "alpha_r", "beta_r", "n_r"]);
    let mut per_radius = Vec::with_capacity(c.radii.len());
    for &r in &c.radii {
        let balls = map_trials(workers, c.trials, |t| {
            let mut rng = trial_rng(c.seed, t);
            let trial = Trial::annealed(&system, mx, my, &mut rng);
            trial_ball(&system, &trial, r)
        });
        let balls: Vec<BallPairData> = balls.into_iter().collect::<Result<_>>()?;
        for (t, b) in balls.iter().enumerate() {
            csv.row([
                fmt_f64(r),
                t.to_string(),
                fmt_f64(b.mu_ball),
                fmt_f64(b.nu_ball),
                fmt_f64(b.alpha_r),
                fmt_f64(b.beta_r),
                fmt_f64(b.n_r),
            ]);
        }
        per_radius.push(balls);
    }
    let mean = |v: &[BallPairData], f: fn(&BallPairData) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    if let Some((l, d)) = full_shift_pair(&system) {
        let alpha = (l as f64).powi(1 - d);
        for (&r, balls) in c.radii.iter().zip(&per_radius) {
            let worst = |f: fn(&BallPairData) -> f64, target: f64| {
                balls
                    .iter()
                    .map(f)
                    .max_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                    .expect("trials ≥ 1")
            };
            sink.rows.push(Row::absolute(
                format!("alpha_r at r={} (L={l}, d={d})", fmt_f64(r)),
                worst(|b| b.alpha_r, alpha),
                alpha,
                c.exact_tolerance,
            ));
            sink.rows.push(Row::absolute(
                format!("beta_r at r={}", fmt_f64(r)),
                worst(|b| b.beta_r, 1.0),
                1.0,
                c.exact_tolerance,
            ));
        }
    } else if (dmu - dnu).abs() > 1e-12 {
        let (alpha, beta) = if dmu < dnu { (1.0, 0.0) } else { (0.0, 1.0) };
        let balls = per_radius.last().expect("validated");
        let r = fmt_f64(*c.radii.last().expect("validated"));
        sink.rows.push(Row::absolute(
            format!("mean alpha_r at r={r}"),
            mean(balls, |b| b.alpha_r),
            alpha,
            c.limit_tolerance,
        ));
        sink.rows.push(Row::absolute(
            format!("mean beta_r at r={r}"),
            mean(balls, |b| b.beta_r),
            beta,
            c.limit_tolerance,
        ));
    } else {
        // equal dimensions without the full-shift structure: the limit
        // law of (α_r, β_r) is only reported
        let balls = per_radius.last().expect("validated");
        let share = balls.iter().filter(|b| b.alpha_r == 1.0).count() as f64 / balls.len() as f64;
        sink.rows.push(Row::absolute("share of balls with alpha_r = 1", share, 0.5, c.limit_tolerance).advisory());
    }
    sink.rows.push(Row::absolute("d_mu", dmu, dmu, 0.0).advisory());
    sink.rows.push(Row::absolute("d_nu", dnu, dnu, 0.0).advisory());
    sink.artifacts.push(csv.finish());
    Ok(())
}
