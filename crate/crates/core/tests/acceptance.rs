//! Acceptance suite: one PASS/FAIL line per criterion, with measured values
//! and runtimes. Runs without the libtest harness so the lines always print.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use splice_lab::harness::config::{Experiment, ExperimentConfig};
use splice_lab::harness::experiments::{determinant_violation, run_one, Check, ExperimentOutcome};
use splice_lab::cutoffs::LengthVariant;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn timed(cfg: &ExperimentConfig, e: Experiment) -> (Option<ExperimentOutcome>, Duration, String) {
    let start = Instant::now();
    match run_one(cfg, e) {
        Ok(o) => (Some(o), start.elapsed(), String::new()),
        Err(err) => (None, start.elapsed(), err.to_string()),
    }
}

fn describe(checks: &[&Check]) -> String {
    checks.iter().map(|c| format!("{} = {:.3e} (limit {:.3e})", c.name, c.measured, c.threshold)).collect::<Vec<_>>().join("; ")
}

/// Verdict over the checks selected by `keep`, with a runtime limit.
fn verdict(
    id: u32,
    title: &'static str,
    run: &(Option<ExperimentOutcome>, Duration, String),
    keep: impl Fn(&Check) -> bool,
    limit: Option<Duration>,
) -> Verdict {
    let (outcome, elapsed, err) = run;
    let Some(o) = outcome else {
        return Verdict { id, title, pass: false, detail: format!("error: {err}") };
    };
    let checks: Vec<&Check> = o.checks.iter().filter(|c| keep(c)).collect();
    let in_time = limit.is_none_or(|l| *elapsed < l);
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass) && in_time;
    let time = match limit {
        Some(l) => format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    Verdict { id, title, pass, detail: format!("{}; {time}", describe(&checks)) }
}

fn main() -> ExitCode {
    let desk = ExperimentConfig::default();
    let paper = ExperimentConfig {
        variant: LengthVariant::Paper,
        r_list: vec![1e6],
        h_t: 256.0,
        ns: 16,
        pairs: 1,
        ..ExperimentConfig::default()
    };
    let secs = Duration::from_secs;
    let mut verdicts = Vec::new();

    let start = Instant::now();
    let det = determinant_violation(10_000);
    let det_time = start.elapsed();
    verdicts.push(Verdict {
        id: 1,
        title: "determinant bound and region pattern",
        pass: det <= 1e-12 && det_time < secs(1),
        detail: format!("max violation = {det:.3e} (limit 1e-12); {:.3} s (limit 1 s)", det_time.as_secs_f64()),
    });

    let roundtrip = timed(&desk, Experiment::Roundtrip);
    verdicts.push(verdict(2, "gluing roundtrip", &roundtrip, |_| true, Some(secs(30))));

    let regions = timed(&desk, Experiment::Regions);
    verdicts.push(verdict(3, "matrix form equals piecewise form", &regions, |c| c.name == "region_equivalence", Some(secs(300))));
    verdicts.push(verdict(4, "error term localization", &regions, |c| c.name == "error_localization", Some(secs(300))));

    let decay = timed(&desk, Experiment::Decay);
    verdicts.push(verdict(5, "decay of the error term", &decay, |_| true, Some(secs(600))));

    let derivs = timed(&desk, Experiment::DerivativeCheck);
    verdicts.push(verdict(6, "D_W N against finite differences", &derivs, |_| true, Some(secs(600))));

    let estimates = timed(&desk, Experiment::Estimates);
    verdicts.push(verdict(
        7,
        "estimates (I)-(IV) and lemma I-III with stable constants",
        &estimates,
        |c| c.name != "proposition_stable_constant",
        Some(secs(600)),
    ));
    verdicts.push(verdict(8, "operator-norm proposition", &estimates, |c| c.name == "proposition_stable_constant", None));

    let c1 = timed(&desk, Experiment::C1Limit);
    verdicts.push(verdict(9, "C^1 at infinity", &c1, |_| true, None));

    let comm = timed(&desk, Experiment::Commutativity);
    verdicts.push(verdict(10, "commutativity and unequal-blocks probe", &comm, |_| true, None));

    let smoke = timed(&paper, Experiment::Regions);
    verdicts.push(verdict(
        11,
        "paper-variant smoke test at R = 1e6",
        &smoke,
        |c| c.name == "region_ordering" || c.name == "error_localization",
        Some(secs(120)),
    ));

    for v in &verdicts {
        println!("{} criterion {:>2}: {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.title, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
