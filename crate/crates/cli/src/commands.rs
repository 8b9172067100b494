use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use mbdiag::dpi::oracle::{brute_force_minimal_conflicts, brute_force_minimal_diagnoses};
use mbdiag::hitting_set::{
    best_of_random_with_stats, hstree, prior_product, rbf_hs, sample_diagnoses, Budget, CostModel, SampleError,
    SamplingStrategy, SearchConfig, SearchOrder, SearchOutcome,
};
use mbdiag::msmp::quickxplain_min_conflict;
use mbdiag::reasoner::{ConsistencyChecker, DpllReasoner};
use mbdiag::sequential::{
    parse_fault_spec, run_session, Answer, AnswerValue, SequentialError, SessionConfig, SessionState,
    SimulatedOracle, StopReason, Transcript,
};
use mbdiag::{ComponentId, Conflict, Diagnosis, Dpi};
use serde::Serialize;

use crate::cli::{
    BenchArgs, BestOfArgs, Cli, Command, ConflictsArgs, CostArg, DiagnoseArgs, Engine, ProblemArg, SampleArgs,
    ServeArgs, SessionArgs,
};
use crate::registry::{load_problem, Problem};
use crate::{bench, service, CliError, EXIT_BUDGET, EXIT_OK};

type CmdResult = Result<u8, CliError>;

pub fn dispatch(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let json = cli.json;
    match cli.command {
        Command::Diagnose(a) => diagnose(&a, json, out),
        Command::Conflicts(a) => conflicts(&a, json, out),
        Command::Sample(a) => sample(&a, json, out),
        Command::Bestof(a) => best_of(&a, json, out),
        Command::Session(a) => session(&a, json, input, out, err),
        Command::Serve(a) => serve(&a, err),
        Command::Bench(a) => bench_cmd(&a, json, out, err),
        Command::OracleBf(a) => oracle_bf(&a, json, out),
    }
}

pub fn run_engine(engine: Engine, dpi: &Dpi, cfg: &SearchConfig) -> SearchOutcome {
    match engine {
        Engine::Hstree => hstree(dpi, cfg),
        Engine::Rbfhs => rbf_hs(dpi, cfg),
    }
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Failed(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn with_probs(dpi: &Dpi, ds: &[Diagnosis]) -> Vec<Diagnosis> {
    ds.iter()
        .map(|d| {
            let mut d = d.clone();
            d.prob = prior_product(dpi, &d.indices(dpi));
            d
        })
        .collect()
}

fn write_diagnoses(out: &mut dyn Write, ds: &[Diagnosis]) -> Result<(), CliError> {
    for (i, d) in ds.iter().enumerate() {
        writeln!(out, "{:>3}. {d}  p={:.6e}", i + 1, d.prob)?;
    }
    Ok(())
}

fn oracle_error(e: mbdiag::dpi::oracle::OracleError) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Serialize)]
struct DiagnoseReport<'a> {
    problem: &'a str,
    engine: &'static str,
    order: SearchOrder,
    k: Option<usize>,
    #[serde(flatten)]
    outcome: &'a SearchOutcome,
}

fn diagnose(a: &DiagnoseArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem.problem)?;
    let cfg = SearchConfig {
        order: a.order,
        k: a.k,
        budget: Budget {
            max_checks: a.max_checks,
            max_nodes: a.max_nodes,
        },
    };
    let mut outcome = run_engine(a.engine, &p.dpi, &cfg);
    outcome.diagnoses = with_probs(&p.dpi, &outcome.diagnoses);
    if json {
        write_json(
            out,
            &DiagnoseReport {
                problem: &p.id,
                engine: a.engine.as_str(),
                order: a.order,
                k: a.k,
                outcome: &outcome,
            },
        )?;
    } else {
        let s = &outcome.stats;
        writeln!(out, "{} diagnoses ({:?})", outcome.diagnoses.len(), outcome.status)?;
        write_diagnoses(out, &outcome.diagnoses)?;
        let cs: Vec<String> = outcome.conflicts.iter().map(Conflict::to_string).collect();
        writeln!(out, "conflicts: {}", cs.join(" "))?;
        writeln!(
            out,
            "checks={} verification_checks={} conflicts_computed={} conflicts_reused={} nodes_expanded={} peak_open_nodes={}",
            s.consistency_checks,
            s.verification_checks,
            s.conflicts_computed,
            s.conflicts_reused,
            s.nodes_expanded,
            s.peak_open_nodes
        )?;
    }
    Ok(if outcome.exhausted() { EXIT_BUDGET } else { EXIT_OK })
}

#[derive(Serialize)]
struct ConflictReport<'a> {
    problem: &'a str,
    conflict: Option<Conflict>,
    checks: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal_conflicts: Option<Vec<Conflict>>,
}

fn conflicts(a: &ConflictsArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem.problem)?;
    let all: Vec<usize> = (0..p.dpi.num_components()).collect();
    let mut reasoner = DpllReasoner::new(&p.dpi);
    let conflict = quickxplain_min_conflict(&mut reasoner, &all).map(|c| Conflict::from_indices(&p.dpi, &c));
    let minimal_conflicts = if a.oracle {
        Some(brute_force_minimal_conflicts(&p.dpi).map_err(oracle_error)?)
    } else {
        None
    };
    let report = ConflictReport {
        problem: &p.id,
        conflict,
        checks: reasoner.stats().consistency_checks,
        minimal_conflicts,
    };
    if json {
        write_json(out, &report)?;
    } else {
        match &report.conflict {
            Some(c) => writeln!(out, "conflict {c} (checks={})", report.checks)?,
            None => writeln!(out, "no conflict: the instance is consistent (checks={})", report.checks)?,
        }
        if let Some(all) = &report.minimal_conflicts {
            writeln!(out, "all minimal conflicts:")?;
            for c in all {
                writeln!(out, "  {c}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SampleReport<'a> {
    problem: &'a str,
    strategy: SamplingStrategy,
    k: usize,
    seed: u64,
    complete: bool,
    diagnoses: Vec<Diagnosis>,
}

fn sample(a: &SampleArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem.problem)?;
    let (diagnoses, complete) = match sample_diagnoses(&p.dpi, a.strategy, a.k, a.seed, a.retry_cap) {
        Ok(ds) => (ds, true),
        Err(SampleError::RetryCapExceeded { found, .. }) => (found, false),
        Err(SampleError::NoDiagnosis) => return Err(CliError::Failed("the instance has no diagnosis".into())),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let report = SampleReport {
        problem: &p.id,
        strategy: a.strategy,
        k: a.k,
        seed: a.seed,
        complete,
        diagnoses: with_probs(&p.dpi, &diagnoses),
    };
    if json {
        write_json(out, &report)?;
    } else {
        writeln!(out, "{} diagnoses{}", report.diagnoses.len(), if complete { "" } else { " (retry cap reached)" })?;
        write_diagnoses(out, &report.diagnoses)?;
    }
    Ok(if complete { EXIT_OK } else { EXIT_BUDGET })
}

#[derive(Serialize)]
struct BestOfReport<'a> {
    problem: &'a str,
    samples: usize,
    seed: u64,
    cost_model: &'a CostModel,
    diagnosis: Diagnosis,
    cost: f64,
    checks: u64,
}

pub fn parse_weights(specs: &[String]) -> Result<BTreeMap<ComponentId, f64>, CliError> {
    let mut out = BTreeMap::new();
    for spec in specs.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || CliError::Input(format!("malformed weight {spec:?}; expected ID=NUMBER"));
        let (id, w) = spec.split_once('=').ok_or_else(bad)?;
        let id: ComponentId = id.trim().parse().map_err(|_| bad())?;
        let w: f64 = w.trim().parse().map_err(|_| bad())?;
        out.insert(id, w);
    }
    Ok(out)
}

fn best_of(a: &BestOfArgs, json: bool, out: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem.problem)?;
    let cost = match a.cost {
        CostArg::Cardinality => CostModel::Cardinality,
        CostArg::NegLogProb => CostModel::NegLogProb,
        CostArg::Weights => CostModel::Weights(parse_weights(&a.weights)?),
    };
    if a.samples == 0 {
        return Err(CliError::Input("--samples must be positive".into()));
    }
    let (best, stats) = best_of_random_with_stats(&p.dpi, &cost, a.samples, a.seed, a.threads);
    let mut diagnosis = best.ok_or_else(|| CliError::Failed("the instance has no diagnosis".into()))?;
    diagnosis.prob = prior_product(&p.dpi, &diagnosis.indices(&p.dpi));
    let report = BestOfReport {
        problem: &p.id,
        samples: a.samples,
        seed: a.seed,
        cost: cost.cost(&p.dpi, &diagnosis),
        cost_model: &cost,
        diagnosis,
        checks: stats.consistency_checks,
    };
    if json {
        write_json(out, &report)?;
    } else {
        writeln!(
            out,
            "{}  cost={} p={:.6e} (best of {}, checks={})",
            report.diagnosis, report.cost, report.diagnosis.prob, report.samples, report.checks
        )?;
    }
    Ok(EXIT_OK)
}

/// Maps session errors caused by the caller's input to exit code 2.
pub fn session_error(e: SequentialError) -> CliError {
    match e {
        SequentialError::UnknownWire(_)
        | SequentialError::UndefinedWire(_)
        | SequentialError::UnknownComponent(_)
        | SequentialError::InvalidFaultSpec(_)
        | SequentialError::WorldContradictsObservations(_)
        | SequentialError::Dpi(_)
        | SequentialError::Circuit(_) => CliError::Input(e.to_string()),
        other => CliError::Failed(other.to_string()),
    }
}

fn session_config(a: &SessionArgs) -> Result<SessionConfig, CliError> {
    if a.k < 2 {
        return Err(CliError::Input("-k must be at least 2".into()));
    }
    if !(a.sigma > 0.0 && a.sigma <= 1.0) {
        return Err(CliError::Input("--sigma must lie in (0, 1]".into()));
    }
    Ok(SessionConfig {
        k: a.k,
        sigma: a.sigma,
        max_queries: a.max_queries,
        heuristic: a.heuristic,
        mode: a.mode,
        sampler: a.sampler,
        posterior: a.posterior,
        seed: a.seed,
    })
}

fn simulated_oracle(p: &Problem, spec: &str) -> Result<SimulatedOracle, CliError> {
    let circuit = p
        .circuit
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("problem {} has no circuit to simulate", p.id)))?;
    let faults = match spec {
        "sim" => p
            .faults
            .clone()
            .ok_or_else(|| CliError::Input(format!("problem {} has no injected faults; use sim:GATE=FAULT,...", p.id)))?,
        s => match s.strip_prefix("sim:") {
            Some(rest) => parse_fault_spec(rest).map_err(session_error)?,
            None => return Err(CliError::Input(format!("unknown oracle {s:?}; expected sim or sim:GATE=FAULT,..."))),
        },
    };
    SimulatedOracle::new(circuit, faults).map_err(session_error)
}

fn session(a: &SessionArgs, json: bool, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem.problem)?;
    let config = session_config(a)?;
    let transcript = match &a.oracle {
        Some(spec) => {
            let mut oracle = simulated_oracle(&p, spec)?;
            run_session(p.dpi.clone(), config, &mut oracle).map_err(session_error)?
        }
        None => {
            let prompt: &mut dyn Write = if json { err } else { &mut *out };
            interactive(SessionState::new(p.dpi.clone(), config).map_err(session_error)?, input, prompt)?
        }
    };
    if let Some(path) = &a.transcript {
        std::fs::write(path, transcript.to_jsonl())?;
    }
    if json {
        write_json(out, &transcript)?;
    } else {
        for r in &transcript.records {
            writeln!(
                out,
                "step {}: {} -> {}; eliminated {}; {} remaining",
                r.step,
                r.query,
                r.answer,
                r.eliminated.len(),
                r.remaining.len()
            )?;
        }
        let stop = transcript.stop.map_or("aborted".to_string(), |s| format!("{s:?}"));
        writeln!(out, "stopped: {stop} after {} queries", transcript.queries_answered)?;
        write_diagnoses(out, &with_probs(&p.dpi, &transcript.final_diagnoses))?;
    }
    Ok(if transcript.stop == Some(StopReason::Budget) { EXIT_BUDGET } else { EXIT_OK })
}

enum Reply {
    Answer(AnswerValue),
    Propose(String),
    Quit,
    Unknown,
}

fn parse_reply(line: &str) -> Reply {
    let line = line.trim();
    if let Some(wire) = line.strip_prefix("w ") {
        return Reply::Propose(wire.trim().to_string());
    }
    match line.to_ascii_lowercase().as_str() {
        "1" | "y" | "yes" | "t" | "true" => Reply::Answer(AnswerValue::True),
        "0" | "n" | "no" | "f" | "false" => Reply::Answer(AnswerValue::False),
        "s" | "skip" => Reply::Answer(AnswerValue::Skip),
        "q" | "quit" => Reply::Quit,
        _ => Reply::Unknown,
    }
}

/// Reads answers line by line until the session stops, the user quits or input ends.
fn interactive(mut state: SessionState, input: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<Transcript, CliError> {
    let mut line = String::new();
    while let Some(q) = state.current_query().cloned() {
        let [yes, no, neither] = q.partition_sizes();
        write!(
            prompt,
            "measure {}? ({yes} diagnoses predict 1, {no} predict 0, {neither} undecided)\n[1/0/s(kip)/q(uit), or 'w WIRE' to measure another wire] > ",
            q.wire()
        )?;
        prompt.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        match parse_reply(&line) {
            Reply::Answer(v) => {
                let rec = state.answer(Answer::human(v)).map_err(session_error)?;
                writeln!(prompt, "eliminated {}, {} remaining", rec.eliminated.len(), rec.remaining.len())?;
            }
            Reply::Propose(wire) => {
                if let Err(e) = state.propose(&wire) {
                    writeln!(prompt, "{e}")?;
                }
            }
            Reply::Quit => break,
            Reply::Unknown => writeln!(prompt, "unrecognised answer {:?}", line.trim())?,
        }
    }
    Ok(state.transcript())
}

fn serve(a: &ServeArgs, err: &mut dyn Write) -> CmdResult {
    let extra = a.problems.iter().map(|name| load_problem(name)).collect::<Result<Vec<_>, _>>()?;
    let addr: std::net::SocketAddr = a
        .addr
        .parse()
        .map_err(|_| CliError::Input(format!("invalid listen address {:?}", a.addr)))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        writeln!(err, "listening on http://{}", listener.local_addr()?)?;
        axum::serve(listener, service::app(service::AppState::new(extra))).await?;
        Ok::<_, CliError>(())
    })?;
    Ok(EXIT_OK)
}

fn bench_cmd(a: &BenchArgs, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let report = bench::run(a, err)?;
    if json {
        write_json(out, &report.rows)?;
    } else {
        bench::write_csv(out, &report.rows)?;
    }
    if report.mismatches > 0 {
        return Err(CliError::Failed(format!("{} runs disagree with exhaustive enumeration", report.mismatches)));
    }
    Ok(if report.timeouts > 0 { EXIT_BUDGET } else { EXIT_OK })
}

#[derive(Serialize)]
struct OracleReport<'a> {
    problem: &'a str,
    diagnoses: Vec<Diagnosis>,
    conflicts: Vec<Conflict>,
}

fn oracle_bf(a: &ProblemArg, json: bool, out: &mut dyn Write) -> CmdResult {
    let p = load_problem(&a.problem)?;
    let diagnoses = brute_force_minimal_diagnoses(&p.dpi).map_err(oracle_error)?;
    let report = OracleReport {
        problem: &p.id,
        diagnoses: with_probs(&p.dpi, &diagnoses),
        conflicts: brute_force_minimal_conflicts(&p.dpi).map_err(oracle_error)?,
    };
    if json {
        write_json(out, &report)?;
    } else {
        writeln!(out, "{} minimal diagnoses", report.diagnoses.len())?;
        write_diagnoses(out, &report.diagnoses)?;
        writeln!(out, "{} minimal conflicts", report.conflicts.len())?;
        for c in &report.conflicts {
            writeln!(out, "  {c}")?;
        }
    }
    Ok(EXIT_OK)
}
