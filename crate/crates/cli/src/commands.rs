//! Subcommand implementations.

use serde::Serialize;

use qpuf_core::adversaries::{
    mu_margin_cap, ForgerPlan, PrivilegedReadout, QeForger, RandomGuesser, SubspaceAdversary, TomographyAdversary,
};
use qpuf_core::emulator::{run_full_against, stage1_closed_form, ClosedFormTerm};
use qpuf_core::games::{run_trials, Adversary, GameConfig, GameMode, TranscriptRecord, WinRate};
use qpuf_core::qpuf::{qeval, qgen, QPufGenParams};
use qpuf_core::testers::TestConfig;
use qpuf_core::verify::{forge_sweep, selective_bound_cell, verify_all, CheckReport, SelectiveRow, VerifyOptions};

use crate::args::{
    AdversaryKind, Command, ForgeSweepArgs, Format, GameArgs, ModeKind, QeDemoArgs, SelectiveBoundArgs, TestChoice,
    VerifyAllArgs,
};
use crate::table::{csv, float, json_line, json_pretty};
use crate::{CliError, CliResult, RunOutput};

/// Slack for the forger fidelity lower bound.
pub const FORGE_SLACK: f64 = 1e-8;

pub fn run(command: &Command) -> CliResult<RunOutput> {
    match command {
        Command::ForgeSweep(a) => cmd_forge_sweep(a),
        Command::SelectiveBound(a) => cmd_selective_bound(a),
        Command::VerifyAll(a) => cmd_verify_all(a),
        Command::Game(a) => cmd_game(a),
        Command::QeDemo(a) => cmd_qe_demo(a),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

pub fn mu_grid(args: &ForgeSweepArgs) -> CliResult<Vec<f64>> {
    if !args.mu.is_empty() {
        return Ok(args.mu.clone());
    }
    if args.mu_steps == 0 {
        return Err(CliError::Usage("--mu-steps must be positive".into()));
    }
    Ok((0..args.mu_steps).map(|i| i as f64 / args.mu_steps as f64).collect())
}

pub fn cmd_forge_sweep(args: &ForgeSweepArgs) -> CliResult<RunOutput> {
    let mus = mu_grid(args)?;
    let cap = mu_margin_cap(args.qubits);
    if let Some(mu) = mus.iter().find(|&&m| !(0.0..=cap).contains(&m)) {
        return Err(CliError::Usage(format!("mu {mu} outside [0, {cap}]")));
    }
    let rows = forge_sweep(args.qubits, &mus, args.trials, args.seed)?;
    let failed = rows
        .iter()
        .filter(|r| r.mean_fidelity < r.theory_bound - FORGE_SLACK)
        .count();
    let bytes = match args.output.format_or(Format::Csv) {
        Format::Json => json_pretty(&rows)?,
        Format::Csv => csv(
            &[
                "mu",
                "mean_fidelity",
                "min_fidelity",
                "theory_bound",
                "literal_bound",
                "p_succ_stage1",
                "trials",
            ],
            rows.iter().map(|r| {
                vec![
                    float(r.mu),
                    float(r.mean_fidelity),
                    float(r.min_fidelity),
                    float(r.theory_bound),
                    float(r.literal_bound),
                    float(r.p_succ_stage1),
                    r.trials.to_string(),
                ]
            }),
        )?,
    };
    Ok(RunOutput {
        bytes,
        passed: failed == 0,
        summary: format!("forge-sweep: {} rows, {} below the theory bound", rows.len(), failed),
    })
}

pub fn cmd_selective_bound(args: &SelectiveBoundArgs) -> CliResult<RunOutput> {
    let dim = QPufGenParams::new(args.qubits, 0)?.dim();
    let ds: Vec<usize> = if args.d.is_empty() {
        (0..dim).collect()
    } else {
        args.d.clone()
    };
    if let Some(d) = ds.iter().find(|&&d| d >= dim) {
        return Err(CliError::Usage(format!("d = {d} must be below D = {dim}")));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let mut rows: Vec<SelectiveRow> = Vec::new();
    for (i, &d) in ds.iter().enumerate() {
        for (j, &delta) in args.delta.iter().enumerate() {
            let seed = qpuf_core::rng::derive_seed(args.seed, (i * args.delta.len() + j) as u64);
            rows.push(selective_bound_cell(d, args.qubits, delta, args.trials, seed)?);
        }
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    let bytes = match args.output.format_or(Format::Csv) {
        Format::Json => json_pretty(&rows)?,
        Format::Csv => csv(
            &[
                "d",
                "D",
                "delta",
                "empirical_rate",
                "bound",
                "stderr",
                "sigma_at_bound",
                "trials",
                "passed",
            ],
            rows.iter().map(|r| {
                vec![
                    r.d.to_string(),
                    r.dim.to_string(),
                    float(r.delta),
                    float(r.empirical_rate),
                    float(r.bound),
                    float(r.stderr),
                    float(r.sigma_at_bound),
                    r.trials.to_string(),
                    r.passed.to_string(),
                ]
            }),
        )?,
    };
    Ok(RunOutput {
        bytes,
        passed: failed == 0,
        summary: format!(
            "selective-bound: {} cells, {} above (d+1)/D + 3 sigma",
            rows.len(),
            failed
        ),
    })
}

pub fn cmd_verify_all(args: &VerifyAllArgs) -> CliResult<RunOutput> {
    if args.trials == 0 || args.stat_trials == 0 {
        return Err(CliError::Usage("trial counts must be positive".into()));
    }
    let reports = verify_all(&VerifyOptions {
        seed: args.seed,
        pair_trials: args.trials,
        stat_trials: args.stat_trials,
        claim_epsilon: args.inject_epsilon,
    })?;
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| !r.passed).collect();
    let bytes = match args.output.format_or(Format::Json) {
        Format::Json => json_pretty(&reports)?,
        Format::Csv => csv(
            &["name", "trials", "violations", "worst_margin", "passed"],
            reports.iter().map(|r| {
                vec![
                    r.name.clone(),
                    r.trials.to_string(),
                    r.violations.to_string(),
                    float(r.worst_margin),
                    r.passed.to_string(),
                ]
            }),
        )?,
    };
    let mut summary = format!(
        "verify-all: {}/{} checks passed",
        reports.len() - failed.len(),
        reports.len()
    );
    for r in &failed {
        summary.push_str(&format!("\n  FAILED {} ({} violations)", r.name, r.violations));
    }
    Ok(RunOutput {
        bytes,
        passed: failed.is_empty(),
        summary,
    })
}

/// Learning budget each adversary needs.
fn budget_for(args: &GameArgs, dim: usize) -> usize {
    match args.adversary {
        AdversaryKind::Random => 0,
        AdversaryKind::Subspace => args.d,
        AdversaryKind::QeForger => 2,
        AdversaryKind::Tomography => dim,
    }
}

pub fn game_config(args: &GameArgs) -> CliResult<GameConfig> {
    match (args.adversary, args.mode) {
        (AdversaryKind::QeForger, ModeKind::Qsel) => {
            return Err(CliError::Usage("the qe-forger adversary requires --mode qex".into()))
        }
        (AdversaryKind::Subspace, ModeKind::Qex) => {
            return Err(CliError::Usage("the subspace adversary requires --mode qsel".into()))
        }
        (AdversaryKind::Tomography, _) if !args.privileged => {
            return Err(CliError::Usage("the tomography adversary requires --privileged".into()))
        }
        _ => {}
    }
    if args.adversary == AdversaryKind::QeForger && args.mu > mu_margin_cap(args.qubits) {
        return Err(CliError::Usage(format!(
            "mu {} exceeds the margin cap {}",
            args.mu,
            mu_margin_cap(args.qubits)
        )));
    }
    let gen = QPufGenParams::new(args.qubits, args.seed)?;
    let test = match args.test {
        TestChoice::Ideal => TestConfig::ideal(args.delta)?,
        TestChoice::Swap => TestConfig::swap(args.kappa1, args.kappa2)?,
    };
    let mode = match args.mode {
        ModeKind::Qex => GameMode::QEx { mu: args.mu },
        ModeKind::Qsel => GameMode::QSel,
    };
    Ok(GameConfig::new(
        mode,
        budget_for(args, gen.dim()),
        test,
        gen,
        args.seed,
    )?)
}

#[derive(Serialize)]
struct GameSummary<'a> {
    adversary: &'a str,
    mode: &'a str,
    qubits: u32,
    win_rate: f64,
    stderr: f64,
    wins: usize,
    trials: usize,
}

pub fn cmd_game(args: &GameArgs) -> CliResult<RunOutput> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let cfg = game_config(args)?;
    let (kind, d, mu) = (args.adversary, args.d, args.mu);
    let readout = args.privileged.then(PrivilegedReadout::grant);
    let factory = move || -> Box<dyn Adversary> {
        match kind {
            AdversaryKind::Random => Box::new(RandomGuesser::new()),
            AdversaryKind::Subspace => Box::new(SubspaceAdversary::new(d)),
            AdversaryKind::QeForger => Box::new(QeForger::new(mu)),
            AdversaryKind::Tomography => Box::new(TomographyAdversary::new(
                readout.expect("privilege checked in game_config"),
            )),
        }
    };
    let transcripts = run_trials(&cfg, factory, args.trials)?;
    let records: Vec<TranscriptRecord> = transcripts.iter().map(|t| t.record()).collect();
    let rate = WinRate::from_outcomes(records.iter().map(|r| r.b == 1))?;
    let name = records.first().map(|r| r.adversary.clone()).unwrap_or_default();
    let summary = GameSummary {
        adversary: &name,
        mode: cfg.mode.label(),
        qubits: args.qubits,
        win_rate: rate.rate,
        stderr: rate.stderr,
        wins: rate.wins,
        trials: rate.trials,
    };
    let bytes = match args.output.format_or(Format::Json) {
        Format::Json => {
            let mut text = String::new();
            for r in &records {
                text.push_str(&json_line(r)?);
                text.push('\n');
            }
            text.push_str(&json_line(&serde_json::json!({ "summary": summary }))?);
            text.push('\n');
            text.into_bytes()
        }
        Format::Csv => csv(
            &[
                "adversary",
                "mode",
                "mu",
                "n",
                "k",
                "queries_used",
                "d_spanned",
                "b",
                "fidelity_of_guess",
                "pass_count",
                "pairs_run",
            ],
            records.iter().map(|r| {
                vec![
                    r.adversary.clone(),
                    r.mode.clone(),
                    r.mu.map(float).unwrap_or_default(),
                    r.n.to_string(),
                    r.k.to_string(),
                    r.queries_used.to_string(),
                    r.d_spanned.to_string(),
                    r.b.to_string(),
                    float(r.fidelity_of_guess),
                    r.pass_count.to_string(),
                    r.pairs_run.to_string(),
                ]
            }),
        )?,
    };
    Ok(RunOutput {
        bytes,
        passed: true,
        summary: format!(
            "game: {name} in {} won {}/{} (rate {:.6}, stderr {:.6})",
            cfg.mode.label(),
            rate.wins,
            rate.trials,
            rate.rate,
            rate.stderr
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QeDemoReport {
    pub puf_id: String,
    pub qubits: u32,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub predicted_reference_overlap: f64,
    pub p_succ_stage1: f64,
    pub stage2_success_probability: f64,
    pub fidelity: f64,
    pub theory_bound: f64,
    pub stage1_terms: Vec<ClosedFormTerm>,
}

pub fn qe_demo(args: &QeDemoArgs) -> CliResult<QeDemoReport> {
    let cap = mu_margin_cap(args.qubits);
    if !(0.0..=cap).contains(&args.mu) {
        return Err(CliError::Usage(format!("mu {} outside [0, {cap}]", args.mu)));
    }
    let puf = qgen(QPufGenParams::new(args.qubits, args.seed)?)?;
    let plan = ForgerPlan::standard(puf.dim(), args.mu)?;
    let cfg = plan.emulator_config(qeval(&puf, plan.phi1())?, qeval(&puf, plan.phi2())?, true)?;
    let target = qeval(&puf, plan.phi3())?;
    let res = run_full_against(&cfg, plan.phi3(), &target)?;
    Ok(QeDemoReport {
        puf_id: puf.id().to_string(),
        qubits: args.qubits,
        mu: args.mu,
        alpha: plan.alpha(),
        beta: plan.beta(),
        predicted_reference_overlap: plan.predicted_reference_overlap(),
        p_succ_stage1: res.p_succ_stage1,
        stage2_success_probability: res.stage2_success_probability,
        fidelity: res.fidelity_vs_target.unwrap_or(0.0),
        theory_bound: plan.theory_bound(),
        stage1_terms: stage1_closed_form(&cfg, plan.phi3())?,
    })
}

pub fn cmd_qe_demo(args: &QeDemoArgs) -> CliResult<RunOutput> {
    let r = qe_demo(args)?;
    let passed = r.fidelity >= r.theory_bound - FORGE_SLACK;
    let bytes = match args.output.format_or(Format::Json) {
        Format::Json => json_pretty(&r)?,
        Format::Csv => csv(
            &["field", "value"],
            [
                ("puf_id", r.puf_id.clone()),
                ("qubits", r.qubits.to_string()),
                ("mu", float(r.mu)),
                ("alpha", float(r.alpha)),
                ("beta", float(r.beta)),
                ("predicted_reference_overlap", float(r.predicted_reference_overlap)),
                ("p_succ_stage1", float(r.p_succ_stage1)),
                ("stage2_success_probability", float(r.stage2_success_probability)),
                ("fidelity", float(r.fidelity)),
                ("theory_bound", float(r.theory_bound)),
                ("stage1_terms", r.stage1_terms.len().to_string()),
            ]
            .into_iter()
            .map(|(k, v)| vec![k.to_string(), v]),
        )?,
    };
    Ok(RunOutput {
        bytes,
        passed,
        summary: format!(
            "qe-demo: fidelity {:.12} against bound {:.12}, p_succ_stage1 {:.12}",
            r.fidelity, r.theory_bound, r.p_succ_stage1
        ),
    })
}
