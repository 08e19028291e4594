//! End-to-end reconstruction: low-weight checks, grouping, code check,
//! ordering, interleaver, verification.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::bits::Columns;
use crate::channel::{Dataset, Interleaver};
use crate::classify::{classify_equations, Classification};
use crate::conv::{ConvCode, EquationClass, ParityCheck};
use crate::dual::{accept_threshold, estimate_p, find_parity_checks, Engine, RecoveryParams};
use crate::error::{Error, Result};
use crate::graph::{recover_equation, RecoverParams, StageCounts, Survivor, DEFAULT_WORK_LIMIT};
use crate::interleaver::{
    extend_short_reconstruction, fit_frame, interleaver_candidates, resolve_indeterminates,
    SlotChecks, CANDIDATE_CAP,
};
use crate::ordering::{complete_ordering_with_spares, seed_from_match, PooledOrdering};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug)]
pub struct ReconstructParams {
    pub t: usize,
    pub s_max: usize,
    /// Channel crossover estimate; `None` uses the plug-in estimate.
    pub p_est: Option<f64>,
    pub seed: u64,
    pub engine: Engine,
    pub work_limit: u64,
    pub candidate_cap: usize,
}

impl ReconstructParams {
    pub fn new(t: usize, s_max: usize) -> Self {
        ReconstructParams {
            t,
            s_max,
            p_est: None,
            seed: 0,
            engine: Engine::Auto,
            work_limit: DEFAULT_WORK_LIMIT,
            candidate_cap: CANDIDATE_CAP,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub dual_ms: u64,
    pub classify_ms: u64,
    pub recover_ms: u64,
    pub ordering_ms: u64,
    pub interleaver_ms: u64,
    pub verify_ms: u64,
}

impl Timings {
    /// Everything after the low-weight check search.
    pub fn reconstruction_ms(&self) -> u64 {
        self.classify_ms + self.recover_ms + self.ordering_ms + self.interleaver_ms + self.verify_ms
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Counts {
    pub duals_found: usize,
    pub groups: usize,
    pub group_sizes: Vec<usize>,
    pub unclassified: usize,
    pub recovery: StageCounts,
    pub recovery_attempts: usize,
    pub missing_slots: usize,
    pub rebuilt_checks: usize,
    pub unresolved_indeterminates: usize,
    pub shortfall: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateReport {
    pub e_hat: ParityCheck,
    pub mirror: bool,
    pub short: bool,
    pub unconstrained: usize,
    /// Smallest satisfaction count over the implied checks.
    pub min_satisfied: usize,
    pub blind_pass: bool,
    pub truth_pass: Option<bool>,
    pub interleaver: Interleaver,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Verdict {
    pub blind: bool,
    pub truth: Option<bool>,
    pub success: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub schema: u32,
    pub n_total: usize,
    pub m: usize,
    pub t: usize,
    pub s_max: usize,
    pub p_est: f64,
    pub recovered_n: Option<usize>,
    pub candidate_equations: Vec<ParityCheck>,
    pub candidates: Vec<CandidateReport>,
    pub counts: Counts,
    pub timings_ms: Timings,
    pub verdict: Verdict,
    pub failure: Option<Failure>,
    pub diagnostics: Vec<String>,
}

impl ReconstructionReport {
    fn new(data: &Dataset, params: &ReconstructParams) -> Self {
        ReconstructionReport {
            schema: SCHEMA,
            n_total: data.n,
            m: data.m(),
            t: params.t,
            s_max: params.s_max,
            p_est: params.p_est.unwrap_or(0.0),
            recovered_n: None,
            candidate_equations: Vec::new(),
            candidates: Vec::new(),
            counts: Counts::default(),
            timings_ms: Timings::default(),
            verdict: Verdict::default(),
            failure: None,
            diagnostics: Vec::new(),
        }
    }

    fn fail(&mut self, e: &Error) {
        self.failure = Some(Failure { stage: e.stage().to_string(), message: e.to_string() });
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "N={} M={} t={} s_max={} p_est={:.5}\nchecks found: {}, groups: {:?}, unclassified: {}\n",
            self.n_total,
            self.m,
            self.t,
            self.s_max,
            self.p_est,
            self.counts.duals_found,
            self.counts.group_sizes,
            self.counts.unclassified
        );
        if let Some(n) = self.recovered_n {
            s += &format!("recovered n: {n}\n");
        }
        let r = &self.counts.recovery;
        if r.tested > 0 {
            s += &format!(
                "candidates tested: {} of {} (stage 1: {}, stage 2: {}, stage 3: {}, attempts: {})\n",
                r.tested, r.unreduced, r.stage1, r.stage2, r.stage3, self.counts.recovery_attempts
            );
        }
        for e in &self.candidate_equations {
            s += &format!("code check candidate: {e}\n");
        }
        if !self.candidates.is_empty() {
            s += &format!(
                "interleaver candidates: {} ({} pass blind verification), missing slots: {}, rebuilt checks: {}\n",
                self.candidates.len(),
                self.candidates.iter().filter(|c| c.blind_pass).count(),
                self.counts.missing_slots,
                self.counts.rebuilt_checks
            );
        }
        for d in &self.diagnostics {
            s += &format!("note: {d}\n");
        }
        if let Some(f) = &self.failure {
            s += &format!("FAILED at {}: {}\n", f.stage, f.message);
        }
        s += &format!(
            "verdict: {} (blind {}, truth {})\n",
            if self.verdict.success { "success" } else { "failure" },
            self.verdict.blind,
            self.verdict.truth.map_or("n/a".to_string(), |b| b.to_string())
        );
        s
    }
}

/// Ground truth of a simulated dataset.
#[derive(Clone, Debug)]
pub struct Truth {
    pub code: ConvCode,
    pub interleaver: Interleaver,
}

fn ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn implied_checks(e_hat: &ParityCheck, n: usize, pi: &Interleaver) -> Vec<ParityCheck> {
    EquationClass::from_check(e_hat, n)
        .in_range_shifts(pi.len())
        .iter()
        .map(|e| pi.apply_check(e).expect("in range"))
        .collect()
}

fn min_satisfied(checks: &[ParityCheck], cols: &Columns) -> usize {
    checks
        .iter()
        .map(|e| cols.zero_parity_count(&e.positions().iter().map(|&p| p as usize - 1).collect::<Vec<_>>()))
        .min()
        .unwrap_or(0)
}

/// Whether the checks a candidate implies are, after undoing the true
/// interleaver, exactly the in-range shifts of one check of the true code.
pub fn truth_check(e_hat: &ParityCheck, n: usize, pi: &Interleaver, truth: &Truth) -> bool {
    if pi.len() != truth.interleaver.len() || n != truth.code.n() {
        return false;
    }
    let inv = truth.interleaver.inverse();
    let back: BTreeSet<ParityCheck> =
        implied_checks(e_hat, n, pi).iter().map(|e| inv.apply_check(e).expect("in range")).collect();
    let Some(first) = back.iter().next() else { return false };
    let class = EquationClass::from_check(first, n);
    let expected: BTreeSet<ParityCheck> = class.in_range_shifts(pi.len()).into_iter().collect();
    let blocks = pi.len() / n;
    expected == back && truth.code.is_dual(&class.representative, blocks)
}

/// Run the whole chain on a dataset.
pub fn reconstruct(data: &Dataset, params: &ReconstructParams, truth: Option<&Truth>) -> ReconstructionReport {
    let mut report = ReconstructionReport::new(data, params);
    let t0 = Instant::now();
    let mut dual = RecoveryParams::new(params.t);
    dual.p_est = params.p_est.unwrap_or(0.0);
    dual.seed = params.seed;
    dual.engine = params.engine;
    let checks = match find_parity_checks(data, &dual) {
        Ok(c) => c,
        Err(e) => {
            report.fail(&e);
            return report;
        }
    };
    report.timings_ms.dual_ms = ms(t0);
    continue_from_checks(data, &checks, params, truth, report)
}

/// Run everything after the low-weight check search on a given list of checks.
pub fn reconstruct_from_checks(
    data: &Dataset,
    checks: &[ParityCheck],
    params: &ReconstructParams,
    truth: Option<&Truth>,
) -> ReconstructionReport {
    continue_from_checks(data, checks, params, truth, ReconstructionReport::new(data, params))
}

fn continue_from_checks(
    data: &Dataset,
    checks: &[ParityCheck],
    params: &ReconstructParams,
    truth: Option<&Truth>,
    mut report: ReconstructionReport,
) -> ReconstructionReport {
    report.counts.duals_found = checks.len();
    let cols = data.columns();
    if params.p_est.is_none() {
        let best = checks
            .iter()
            .map(|e| cols.zero_parity_count(&e.positions().iter().map(|&p| p as usize - 1).collect::<Vec<_>>()))
            .max();
        if let Some(best) = best {
            report.p_est = estimate_p(best as f64 / data.m() as f64, params.t);
        }
    }
    let threshold = accept_threshold(params.t, report.p_est, data.m());

    let t = Instant::now();
    let classes = match classify_equations(checks, data.n) {
        Ok(c) => c,
        Err(e) => {
            report.fail(&e);
            return report;
        }
    };
    report.timings_ms.classify_ms = ms(t);
    report.recovered_n = Some(classes.n);
    report.counts.groups = classes.others.len() + 1;
    report.counts.group_sizes = classes.groups().map(|g| g.equations.len()).collect();
    report.counts.unclassified = classes.unclassified.len();
    report.diagnostics.extend(classes.diagnostics.iter().cloned());

    let t = Instant::now();
    let l1 = &classes.l1.equations;
    let rp = RecoverParams { seed: params.seed, retries: None, work_limit: params.work_limit };
    let recovery = match recover_equation(l1, classes.n, params.t, params.s_max, &rp) {
        Ok(r) => r,
        Err(e) => {
            report.timings_ms.recover_ms = ms(t);
            report.fail(&e);
            return report;
        }
    };
    report.timings_ms.recover_ms = ms(t);
    report.counts.recovery = recovery.counts.clone();
    report.counts.recovery_attempts = recovery.attempts;
    report.candidate_equations = recovery.survivors.iter().map(|s| s.equation.clone()).collect();

    let spare = spare_checks(&classes);
    let mut last_err = None;
    for survivor in &recovery.survivors {
        match survivor_candidates(data, &cols, l1, &spare, classes.n, survivor, params, threshold, &mut report) {
            Ok(()) => {}
            Err(e) => {
                report.diagnostics.push(format!("code check {} rejected: {e}", survivor.equation));
                last_err = Some(e);
            }
        }
    }

    let t = Instant::now();
    for c in &mut report.candidates {
        if let Some(truth) = truth {
            c.truth_pass = Some(truth_check(&c.e_hat, classes.n, &c.interleaver, truth));
        }
    }
    report.verdict.blind = report.candidates.iter().any(|c| c.blind_pass);
    report.verdict.truth = truth.map(|_| report.candidates.iter().any(|c| c.blind_pass && c.truth_pass == Some(true)));
    report.verdict.success = report.verdict.blind && report.verdict.truth.unwrap_or(true);
    report.timings_ms.verify_ms += ms(t);
    if report.candidates.is_empty() {
        let e = last_err.unwrap_or_else(|| Error::BijectionFailed("no interleaver candidate".into()));
        report.fail(&e);
    } else if !report.verdict.blind {
        report.failure = Some(Failure {
            stage: "verify".into(),
            message: format!("none of {} candidates satisfies all implied checks", report.candidates.len()),
        });
    }
    report
}

/// Checks outside the first group, usable to fill holes at group boundaries.
fn spare_checks(c: &Classification) -> Vec<ParityCheck> {
    let mut v: Vec<ParityCheck> = c.unclassified.clone();
    for g in &c.others {
        v.extend(g.equations.iter().cloned());
    }
    v
}

#[allow(clippy::too_many_arguments)]
fn survivor_candidates(
    data: &Dataset,
    cols: &Columns,
    l1: &[ParityCheck],
    spare: &[ParityCheck],
    n: usize,
    survivor: &Survivor,
    params: &ReconstructParams,
    threshold: usize,
    report: &mut ReconstructionReport,
) -> Result<()> {
    let t = Instant::now();
    let PooledOrdering { ordering, pool, unplaced, stall } =
        complete_ordering_with_spares(seed_from_match(&survivor.g2_match), l1, spare, &survivor.equation, n);
    report.timings_ms.ordering_ms += ms(t);
    if let Some(why) = stall {
        report.diagnostics.push(format!("ordering stalled, growing from the ends instead: {why}"));
    }
    // members the ordering could not place are the likeliest fills for the gap
    let fallback: Vec<ParityCheck> = unplaced.into_iter().chain(spare.iter().cloned()).collect();

    let t = Instant::now();
    let result = (|| {
        let sc = SlotChecks::from_ordering(&ordering, &pool, &survivor.equation, n);
        let missing = sc.missing().len();
        let cap = params.candidate_cap;
        let mut grown = Vec::new();
        for br in resolve_indeterminates(&sc, data.n, cols, threshold, &fallback, cap)? {
            grown.extend(extend_short_reconstruction(&br, data.n, cols, threshold, &fallback, cap)?);
        }
        let rebuilt = grown.iter().map(|b| b.rebuilt.len()).max().unwrap_or(0);
        let shortfall = grown.iter().map(|b| data.n as i64 - b.sc.frame_len()).min().unwrap_or(data.n as i64);
        let mut cands = Vec::new();
        let mut seen = BTreeSet::new();
        for br in grown.iter().take(cap.max(1)) {
            let sc = fit_frame(&br.sc, data.n);
            for c in interleaver_candidates(&sc, data.n, cap)? {
                if seen.insert(c.interleaver.map().to_vec()) {
                    cands.push(c);
                }
            }
        }
        cands.truncate(cap.max(1) * 2);
        Ok::<_, Error>((missing, rebuilt, shortfall, cands))
    })();
    report.timings_ms.interleaver_ms += ms(t);
    let (missing, rebuilt, shortfall, cands) = result?;
    report.counts.missing_slots += missing;
    report.counts.rebuilt_checks += rebuilt;
    report.counts.shortfall = shortfall;
    if shortfall >= n as i64 {
        report.diagnostics.push(format!("frame covers {} positions fewer than N", shortfall));
    }

    let t = Instant::now();
    for c in cands {
        let implied = implied_checks(&c.e_hat, n, &c.interleaver);
        let min_sat = min_satisfied(&implied, cols);
        report.candidates.push(CandidateReport {
            blind_pass: !implied.is_empty() && min_sat >= threshold && !c.short,
            min_satisfied: min_sat,
            e_hat: c.e_hat,
            mirror: c.mirror,
            short: c.short,
            unconstrained: c.unconstrained,
            truth_pass: None,
            interleaver: c.interleaver,
        });
    }
    report.timings_ms.verify_ms += ms(t);
    Ok(())
}

/// Blind verification of a stored candidate against a dataset.
pub fn verify_candidate(
    e_hat: &ParityCheck,
    n: usize,
    pi: &Interleaver,
    data: &Dataset,
    p_est: f64,
) -> Result<(bool, usize)> {
    if pi.len() != data.n {
        return Err(Error::Shape(format!("interleaver length {} != N={}", pi.len(), data.n)));
    }
    let implied = implied_checks(e_hat, n, pi);
    let min_sat = min_satisfied(&implied, &data.columns());
    Ok((!implied.is_empty() && min_sat >= accept_threshold(e_hat.weight(), p_est, data.m()), min_sat))
}
