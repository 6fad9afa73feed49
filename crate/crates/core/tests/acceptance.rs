//! Acceptance criteria for the relay simulator.
//!
//! Every criterion is evaluated, one PASS/FAIL line is printed for each, and
//! the test fails if any criterion does. Criteria 3 and 8 are audits over
//! every in-process run made by the other criteria.
//!
//! Run with `cargo test -p relaymesh --test acceptance -- --nocapture` to
//! see the report lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaymesh::engine::{reachability_oracle, Flooding, GreedyRelay, Relay, Report, Simulator};
use relaymesh::model::{NodeId, TopologySnapshot, WorldConfig};
use relaymesh::protocol::{ProtocolConfig, SessionStatus};
use relaymesh::scenario::{
    generate_scenario, GeneratorParams, NodeEntry, NodeSpec, ScenarioConfig, SessionRequest, SessionSpec,
};
use relaymesh::sweep::map_runs;
use relaymesh::{run_comparison, SlotLog};

type Verdict = Result<String, String>;

#[derive(Debug, Default, Clone)]
struct Audit {
    runs: usize,
    greedy_sessions: usize,
    repeated_holders: usize,
    containment_violations: usize,
    conservation_violations: usize,
}

impl Audit {
    fn merge(&mut self, other: &Audit) {
        self.runs += other.runs;
        self.greedy_sessions += other.greedy_sessions;
        self.repeated_holders += other.repeated_holders;
        self.containment_violations += other.containment_violations;
        self.conservation_violations += other.conservation_violations;
    }
}

/// Forward holders per session rebuilt from successful transfers.
fn holders_from_trace(logs: &[SlotLog], report: &Report) -> BTreeMap<u64, Vec<NodeId>> {
    let mut out: BTreeMap<u64, Vec<NodeId>> =
        report.sessions.iter().map(|s| (s.session_id, vec![s.source])).collect();
    for log in logs {
        for t in log.transfers.iter().filter(|t| t.outcome.success) {
            out.entry(t.session_id).or_default().push(t.receiver);
        }
    }
    out
}

/// Drives a run slot by slot, checking containment after every slot.
fn audited<R: Relay>(config: &ScenarioConfig) -> (Report, Audit) {
    let mut sim = Simulator::<R>::new(config.clone()).expect("valid scenario");
    let world = *sim.world();
    let mut audit = Audit { runs: 1, ..Audit::default() };
    let outside = |t: &TopologySnapshot| t.nodes().iter().filter(|n| !world.contains(n.position)).count();
    audit.containment_violations += outside(sim.topology());
    while !sim.is_finished() {
        sim.step().expect("slot runs");
        audit.containment_violations += outside(sim.topology());
    }
    let report = sim.into_report();
    if !report.metrics.is_conserved() {
        audit.conservation_violations += 1;
    }
    if R::NAME == GreedyRelay::NAME {
        audit.greedy_sessions += report.sessions.len();
        for s in &report.sessions {
            let unique: BTreeSet<_> = s.path.iter().collect();
            if unique.len() != s.path.len() {
                audit.repeated_holders += 1;
            }
        }
        for (_, holders) in holders_from_trace(&report.trace, &report) {
            let unique: BTreeSet<_> = holders.iter().collect();
            if unique.len() != holders.len() {
                audit.repeated_holders += 1;
            }
        }
    }
    (report, audit)
}

fn static_params(seed: u64) -> GeneratorParams {
    GeneratorParams {
        speed_min: 0.0,
        speed_max: 0.0,
        seed,
        ..GeneratorParams::default()
    }
}

fn initial_topology(config: &ScenarioConfig) -> TopologySnapshot {
    TopologySnapshot::new(0, config.materialize_nodes(), config.world.range).unwrap()
}

fn within(started: Instant, limit: Duration) -> Result<Duration, String> {
    let took = started.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn criterion_1(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let configs: Vec<ScenarioConfig> = (0..200)
        .map(|k| {
            generate_scenario(&GeneratorParams {
                node_count: 30,
                width: 1000.0,
                height: 1000.0,
                range: 100.0,
                session_count: 5,
                max_slots: 200,
                ..static_params(10_000 + k)
            })
            .unwrap()
        })
        .collect();
    let runs = map_runs(&configs, audited::<GreedyRelay>);
    let mut violations = Vec::new();
    let mut delivered = 0;
    for (config, (report, a)) in configs.iter().zip(&runs) {
        audit.merge(a);
        let topo = initial_topology(config);
        for s in report.sessions.iter().filter(|s| s.status == SessionStatus::Delivered) {
            delivered += 1;
            match reachability_oracle(&topo, s.source, s.destination).unwrap() {
                None => violations.push(format!("seed {} session {}: oracle says unreachable", config.seed, s.session_id)),
                Some(d) if s.hop_count < d => violations.push(format!(
                    "seed {} session {}: {} hops < oracle {d}",
                    config.seed, s.session_id, s.hop_count
                )),
                Some(_) => {}
            }
        }
    }
    let took = within(started, Duration::from_secs(10))?;
    if !violations.is_empty() {
        return Err(format!("{} violations, first: {}", violations.len(), violations[0]));
    }
    if delivered == 0 {
        return Err("no session was delivered; the check is vacuous".into());
    }
    Ok(format!("{delivered} delivered sessions over 200 scenarios, 0 violations, {took:?}"))
}

fn grid(side: usize, spacing: f64) -> (WorldConfig, Vec<NodeEntry>) {
    let margin = 50.0;
    let extent = margin * 2.0 + spacing * (side - 1) as f64;
    let world = WorldConfig {
        width: extent,
        height: extent,
        range: 100.0,
        speed_min: 0.0,
        speed_max: 0.0,
        slot_duration: 1.0,
    };
    let nodes = (0..side * side)
        .map(|k| NodeEntry {
            id: k,
            x: margin + spacing * (k % side) as f64,
            y: margin + spacing * (k / side) as f64,
            vx: 0.0,
            vy: 0.0,
            priority: None,
        })
        .collect();
    (world, nodes)
}

fn criterion_2(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let mut pair_rng = ChaCha8Rng::seed_from_u64(0x6772_6964);
    let mut notes = Vec::new();
    for side in [5usize, 10] {
        let (world, nodes) = grid(side, 0.9 * 100.0);
        let n = nodes.len();
        let base = ScenarioConfig {
            world,
            protocol: ProtocolConfig::default(),
            nodes: NodeSpec::Explicit(nodes),
            sessions: SessionSpec::Explicit(vec![]),
            max_slots: 500,
            seed: side as u64,
        };
        // precondition: every node has a strictly closer neighbor toward every destination
        let topo = initial_topology(&base);
        for d in topo.ids() {
            for i in topo.ids().filter(|&i| i != d) {
                let here = topo.distance_between(i, d).unwrap();
                let closer = topo
                    .neighbors_of(i)
                    .unwrap()
                    .into_iter()
                    .any(|j| topo.distance_between(j, d).unwrap() < here);
                if !closer {
                    return Err(format!("grid {side}x{side} is not greedy-friendly at {i}->{d}"));
                }
            }
        }
        let configs: Vec<ScenarioConfig> = (0..50)
            .map(|_| {
                let source = pair_rng.gen_range(0..n);
                let mut destination = pair_rng.gen_range(0..n - 1);
                if destination >= source {
                    destination += 1;
                }
                ScenarioConfig {
                    sessions: SessionSpec::Explicit(vec![SessionRequest { start_slot: 0, source, destination }]),
                    ..base.clone()
                }
            })
            .collect();
        let runs = map_runs(&configs, audited::<GreedyRelay>);
        let mut delivered = 0;
        let mut recoveries = 0;
        for (report, a) in &runs {
            audit.merge(a);
            delivered += report.metrics.delivered;
            recoveries += report.metrics.total_recoveries;
        }
        let ratio = delivered as f64 / configs.len() as f64;
        if ratio != 1.0 || recoveries != 0 {
            return Err(format!("{side}x{side}: delivery_ratio {ratio}, recoveries {recoveries}"));
        }
        notes.push(format!("{side}x{side}: 50/50 delivered, 0 recoveries"));
    }
    let took = within(started, Duration::from_secs(5))?;
    Ok(format!("{}, {took:?}", notes.join("; ")))
}

fn criterion_3(audit: &Audit) -> Verdict {
    if audit.greedy_sessions < 500 {
        return Err(format!("only {} sessions audited, need at least 500", audit.greedy_sessions));
    }
    if audit.repeated_holders > 0 {
        return Err(format!("{} sessions with a repeated holder", audit.repeated_holders));
    }
    Ok(format!("{} sessions audited, 0 repeated holders", audit.greedy_sessions))
}

fn check_contention(report: &Report, priorities: &[f64]) -> Vec<String> {
    let mut problems = Vec::new();
    let terminal_by: BTreeMap<u64, u64> = report
        .sessions
        .iter()
        .filter_map(|s| s.end_slot.map(|e| (s.session_id, e)))
        .collect();
    for (k, log) in report.trace.iter().enumerate() {
        let receivers: BTreeSet<_> = log.transfers.iter().map(|t| t.receiver).collect();
        if receivers.len() != log.transfers.len() {
            problems.push(format!("slot {}: two transfers to one receiver", log.slot));
        }
        for r in &log.resolutions {
            let mut contenders: Vec<_> = log.intents.iter().filter(|t| t.receiver == r.receiver).copied().collect();
            if contenders.len() != 1 + r.deferred.len() {
                problems.push(format!("slot {}: {} contenders, 1 + {} deferred", log.slot, contenders.len(), r.deferred.len()));
            }
            let argmax = contenders
                .iter()
                .map(|t| t.sender)
                .max_by(|a, b| {
                    priorities[a.index()]
                        .partial_cmp(&priorities[b.index()])
                        .unwrap()
                        .then(b.cmp(a))
                })
                .unwrap();
            if r.winner.sender != argmax {
                problems.push(format!("slot {}: winner {} but argmax {}", log.slot, r.winner.sender, argmax));
            }
            let mut returned = r.deferred.clone();
            returned.push(r.winner);
            returned.sort();
            contenders.sort();
            if returned != contenders {
                problems.push(format!("slot {}: deferred + winner differ from contenders", log.slot));
            }
            // deferred intents come back next slot unless their session ended
            for d in &r.deferred {
                let ended = terminal_by.get(&d.session_id).is_some_and(|&e| e <= log.slot);
                let resubmitted = report
                    .trace
                    .get(k + 1)
                    .is_some_and(|next| next.intents.iter().any(|t| t.session_id == d.session_id));
                let last_slot = k + 1 == report.trace.len();
                if !ended && !resubmitted && !last_slot {
                    problems.push(format!("slot {}: deferred session {} not resubmitted", log.slot, d.session_id));
                }
            }
        }
    }
    problems
}

fn criterion_4(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let configs: Vec<ScenarioConfig> = (0..5)
        .map(|k| {
            generate_scenario(&GeneratorParams {
                node_count: 50,
                width: 300.0,
                height: 300.0,
                range: 100.0,
                speed_min: 0.0,
                speed_max: 5.0,
                session_count: 20,
                start_window: 1,
                max_slots: 200,
                seed: 4_000 + k,
            })
            .unwrap()
        })
        .collect();
    let runs = map_runs(&configs, audited::<GreedyRelay>);
    let mut resolutions = 0;
    let mut slots = 0;
    for (config, (report, a)) in configs.iter().zip(&runs) {
        audit.merge(a);
        let priorities: Vec<f64> = config.materialize_nodes().iter().map(|n| n.priority).collect();
        let problems = check_contention(report, &priorities);
        if let Some(first) = problems.first() {
            return Err(format!("seed {}: {} violations, first: {first}", config.seed, problems.len()));
        }
        resolutions += report.trace.iter().map(|l| l.resolutions.len()).sum::<usize>();
        slots += report.trace.len();
    }
    let took = within(started, Duration::from_secs(10))?;
    if resolutions == 0 {
        return Err("no contention occurred; the check is vacuous".into());
    }
    Ok(format!("{resolutions} contended receivers over {slots} slots (5 seeds), 0 violations, {took:?}"))
}

fn handoff_scenario() -> ScenarioConfig {
    // s=0, a=1, b=2 (greedy pick from a, drifts away), c=3 (alternate), d=4
    let node = |id, x, y, vy| NodeEntry { id, x, y, vx: 0.0, vy, priority: Some(0.5) };
    ScenarioConfig {
        world: WorldConfig { speed_max: 50.0, ..WorldConfig::default() },
        protocol: ProtocolConfig::default(),
        nodes: NodeSpec::Explicit(vec![
            node(0, 100.0, 500.0, 0.0),
            node(1, 190.0, 500.0, 0.0),
            node(2, 280.0, 500.0, 50.0),
            node(3, 245.0, 575.0, 0.0),
            node(4, 320.0, 520.0, 0.0),
        ]),
        sessions: SessionSpec::Explicit(vec![SessionRequest { start_slot: 0, source: 0, destination: 4 }]),
        max_slots: 20,
        seed: 5,
    }
}

fn criterion_5(audit: &mut Audit) -> Verdict {
    let config = handoff_scenario();
    let limit = config.protocol.recovery_limit;
    let (s, a, b, c, d) = (NodeId(0), NodeId(1), NodeId(2), NodeId(3), NodeId(4));

    let mut sim = Simulator::<GreedyRelay>::new(config.clone()).unwrap();
    sim.step().unwrap();
    let after_first = sim.relay().session(0).unwrap().clone();
    if after_first.holder != a || after_first.candidate != Some(b) {
        return Err(format!("setup: expected holder a, candidate b; got {:?}", after_first));
    }
    sim.step().unwrap();
    let handoff = sim.topology().clone();
    let log = sim.logs()[1].clone();

    // oracle side: b is gone, c is an eligible neighbor of a and reaches d
    if handoff.connected(a, b).unwrap() {
        return Err("setup: b still in range of a at the handoff slot".into());
    }
    let a_neighbors = handoff.neighbors_of(a).unwrap();
    let eligible: Vec<_> = a_neighbors.iter().filter(|n| ![s, a].contains(n)).copied().collect();
    if eligible != vec![c] || reachability_oracle(&handoff, c, d).unwrap() != Some(1) {
        return Err(format!("oracle: eligible {eligible:?}, c->d {:?}", reachability_oracle(&handoff, c, d)));
    }
    let recovered = log.recoveries.iter().any(|r| r.excluded == Some(b) && r.result == Some(c));
    if !recovered {
        return Err(format!("no recovery from b to c in slot 1: {:?}", log.recoveries));
    }

    let mut max_counter = 0;
    let mut overshoot = false;
    while !sim.is_finished() {
        let session = sim.relay().session(0).unwrap();
        max_counter = max_counter.max(session.recovery_counter);
        sim.step().unwrap();
    }
    for l in sim.logs() {
        for r in &l.recoveries {
            max_counter = max_counter.max(r.counter);
            overshoot |= r.counter > limit;
        }
    }
    let session = sim.relay().session(0).unwrap().clone();
    let (_, a5) = audited::<GreedyRelay>(&config);
    audit.merge(&a5);
    if session.status != SessionStatus::Delivered || session.path != vec![s, a, c, d] || overshoot {
        return Err(format!("status {:?}, path {:?}, max counter {max_counter}", session.status, session.path));
    }
    Ok(format!("delivered via alternate path {:?}, max recovery counter {max_counter} <= {limit}", session.path))
}

fn dense_connected(seed_base: u64) -> ScenarioConfig {
    for attempt in 0..1000 {
        let config = generate_scenario(&GeneratorParams {
            node_count: 100,
            width: 550.0,
            height: 550.0,
            range: 100.0,
            session_count: 10,
            max_slots: 200,
            ..static_params(seed_base * 1000 + attempt)
        })
        .unwrap();
        let topo = initial_topology(&config);
        let connected = topo.ids().all(|n| reachability_oracle(&topo, NodeId(0), n).unwrap().is_some());
        if connected && topo.mean_degree() >= 8.0 {
            return config;
        }
    }
    panic!("no connected dense layout for seed base {seed_base}");
}

fn criterion_6(audit: &mut Audit) -> Verdict {
    let started = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let configs: Vec<ScenarioConfig> = seeds.iter().map(|&k| dense_connected(k)).collect();
    let results = map_runs(&configs, |c| {
        let (_, pa) = audited::<GreedyRelay>(c);
        let (_, fa) = audited::<Flooding>(c);
        (run_comparison(c).unwrap(), pa, fa)
    });
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (config, (cmp, pa, fa)) in configs.iter().zip(&results) {
        audit.merge(pa);
        audit.merge(fa);
        let degree = initial_topology(config).mean_degree();
        match (cmp.protocol_transmissions_per_delivered, cmp.flooding_transmissions_per_delivered) {
            (Some(p), Some(f)) if p < f => lines.push(format!("{p:.2}<{f:.2}")),
            other => failures.push(format!("seed {} (degree {degree:.1}): {other:?}", config.seed)),
        }
    }
    let took = within(started, Duration::from_secs(30))?;
    if !failures.is_empty() {
        return Err(format!("{}/20 seeds failed: {}", failures.len(), failures.join(", ")));
    }
    Ok(format!("20/20 seeds, transmissions per delivered session [{}], {took:?}", lines.join(" ")))
}

fn criterion_7(audit: &mut Audit) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = generate_scenario(&GeneratorParams {
        node_count: 60,
        width: 500.0,
        height: 500.0,
        session_count: 25,
        start_window: 30,
        max_slots: 150,
        seed: 77,
        ..GeneratorParams::default()
    })
    .unwrap();
    config.protocol.link_loss_probability = 0.1;
    let scenario = dir.path().join("scenario.json");
    fs::write(&scenario, config.to_json()).map_err(|e| e.to_string())?;
    let (_, a7) = audited::<GreedyRelay>(&config);
    audit.merge(&a7);

    let mut outputs = Vec::new();
    for k in 0..3 {
        let out = dir.path().join(format!("report-{k}.json"));
        let trace = dir.path().join(format!("trace-{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_relaymesh"))
            .arg("run")
            .arg("--scenario")
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .arg("--trace")
            .arg(&trace)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run {k} exited with {status}"));
        }
        outputs.push((fs::read(&out).unwrap(), fs::read(&trace).unwrap()));
    }
    if outputs.windows(2).any(|w| w[0] != w[1]) {
        return Err("outputs differ between runs".into());
    }
    Ok(format!(
        "3 runs byte-identical (report {} B, trace {} B)",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn criterion_8(audit: &Audit) -> Verdict {
    if audit.containment_violations > 0 || audit.conservation_violations > 0 {
        return Err(format!(
            "{} positions outside the world, {} runs breaking conservation",
            audit.containment_violations, audit.conservation_violations
        ));
    }
    Ok(format!("{} runs audited, 0 violations", audit.runs))
}

#[test]
fn acceptance_criteria() {
    let mut audit = Audit::default();
    let mut verdicts: Vec<(&str, Verdict)> = vec![
        ("1 oracle delivery soundness", criterion_1(&mut audit)),
        ("2 greedy-friendly completeness", criterion_2(&mut audit)),
    ];
    let four = criterion_4(&mut audit);
    let five = criterion_5(&mut audit);
    let six = criterion_6(&mut audit);
    let seven = criterion_7(&mut audit);
    verdicts.push(("3 loop freedom", criterion_3(&audit)));
    verdicts.push(("4 single-winner contention", four));
    verdicts.push(("5 recovery-bound compliance", five));
    verdicts.push(("6 storm-mitigation comparison", six));
    verdicts.push(("7 determinism", seven));
    verdicts.push(("8 conservation and containment", criterion_8(&audit)));

    let mut failed = 0;
    for (name, verdict) in &verdicts {
        match verdict {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
