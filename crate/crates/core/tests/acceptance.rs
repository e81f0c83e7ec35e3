// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria 1 to 8. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use fbra_core::controller::{
    bounce_back, step, transition, undershoot, Action, CongestionCues, ControllerConfig,
    ControllerState, RateHistory, StepInput, Thresholds,
};
use fbra_core::fec::{encode_block, try_recover, FecBlockState};
use fbra_core::metrics;
use fbra_core::netsim::{run_detailed, Scenario, SimOutput, Topology};
use fbra_core::owd::{OwdCorrelation, OwdHistory};
use fbra_core::trace::{EventKind, FlowKind, SimTrace};
use fbra_core::types::{BitRate, MediaPacket, SimTime};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Want {
    Hold,
    StartFec,
    MoreFecInterval,
    Raise,
    Cut { pause: bool },
}

#[derive(Clone, Copy)]
struct Case {
    state: ControllerState,
    prev: ControllerState,
    losses: bool,
    recent_losses: bool,
    discards: bool,
    recent_discards: bool,
    high: f64,
    low: f64,
    near_max: bool,
}

type Guard = fn(&Case) -> bool;

// Thresholds transcribed by hand.
const STAY_T: f64 = 1.1;
const PROBE_DOWN_T: f64 = 1.6;
const UP_DOWN_T: f64 = 1.4;
const UNDERSHOOT_T: f64 = 2.0;
const LOW_T: f64 = 1.2;

/// First matching row wins.
fn table() -> Vec<(ControllerState, Guard, ControllerState, Want)> {
    use ControllerState::*;
    vec![
        // DOWN
        (Down, |c| (c.recent_losses || c.discards) && c.prev == Down, Stay, Want::Hold),
        (Down, |c| (c.recent_losses || c.discards) && c.discards && !c.losses, Down, Want::Cut { pause: false }),
        (Down, |c| c.recent_losses || c.discards, Down, Want::Cut { pause: true }),
        (Down, |c| c.high > UNDERSHOOT_T, Down, Want::Cut { pause: true }),
        (Down, |_| true, Stay, Want::Hold),
        // STAY
        (Stay, |c| c.losses && c.recent_losses, Down, Want::Cut { pause: true }),
        (Stay, |c| c.losses, Stay, Want::Hold),
        (Stay, |c| c.recent_discards, Down, Want::Cut { pause: true }),
        (Stay, |c| c.high > STAY_T && c.prev == Stay, Down, Want::Cut { pause: true }),
        (Stay, |c| c.high > STAY_T, Stay, Want::Hold),
        (Stay, |c| c.near_max, Stay, Want::Hold),
        (Stay, |_| true, Probe, Want::StartFec),
        // PROBE
        (Probe, |c| c.recent_losses || c.recent_discards, Down, Want::Cut { pause: true }),
        (Probe, |c| c.losses || c.discards, Stay, Want::Hold),
        (Probe, |c| c.high > PROBE_DOWN_T, Down, Want::Cut { pause: true }),
        (Probe, |c| c.high > STAY_T, Stay, Want::Hold),
        (Probe, |c| c.low > LOW_T, Probe, Want::MoreFecInterval),
        (Probe, |_| true, Up, Want::Raise),
        // UP
        (Up, |c| c.recent_losses || c.discards || c.high > UP_DOWN_T, Down, Want::Cut { pause: true }),
        (Up, |_| true, Stay, Want::Hold),
    ]
}

fn oracle(rows: &[(ControllerState, Guard, ControllerState, Want)], c: &Case) -> (ControllerState, Want) {
    rows.iter()
        .find(|(s, g, _, _)| *s == c.state && g(c))
        .map(|(_, _, n, w)| (*n, *w))
        .expect("table is total")
}

fn as_want(a: Action) -> Option<Want> {
    Some(match a {
        Action::Hold => Want::Hold,
        Action::EnableFec => Want::StartFec,
        Action::IncrementFecInterval => Want::MoreFecInterval,
        Action::RaiseRate => Want::Raise,
        Action::Undershoot { disable } => Want::Cut { pause: disable },
        Action::BounceBack | Action::FeedbackTimeout => return None,
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = table();
    let th = Thresholds::default();
    let cfg = ControllerConfig::default();
    let buckets = [1.0, 1.1, 1.15, 1.3, 1.5, 1.8, 2.5];
    // (losses, recent losses) and (discards, recent discards); recent implies any
    let pairs = [(false, false), (true, false), (true, true)];
    let mut cases = 0u32;
    let mut mismatches = Vec::new();
    for state in ControllerState::ALL {
        for prev in ControllerState::ALL {
            for (losses, recent_losses) in pairs {
                for (discards, recent_discards) in pairs {
                    for high in buckets {
                        for low in buckets {
                            for near_max in [false, true] {
                                let c = Case {
                                    state,
                                    prev,
                                    losses,
                                    recent_losses,
                                    discards,
                                    recent_discards,
                                    high,
                                    low,
                                    near_max,
                                };
                                cases += 1;
                                let cues = CongestionCues {
                                    losses,
                                    recent_losses,
                                    discards,
                                    recent_discards,
                                    corr: OwdCorrelation::ratios(low, high),
                                };
                                let got = transition(state, prev, &cues, &th, near_max);
                                let want = oracle(&rows, &c);
                                if (got.next, as_want(got.action)) != (want.0, Some(want.1)) {
                                    mismatches.push(format!(
                                        "{state}/{prev} l={losses} rl={recent_losses} d={discards} \
                                         rd={recent_discards} hi={high} lo={low} blk={near_max}: \
                                         got {:?} {:?}, want {:?} {:?}",
                                        got.next, got.action, want.0, want.1
                                    ));
                                }
                                // The full step agrees on FEC and the pause. An
                                // empty rate history never blocks probing.
                                if near_max {
                                    continue;
                                }
                                let rates = RateHistory::new(BitRate::from_kbps(128));
                                let d = step(
                                    &StepInput {
                                        state,
                                        prev_state: prev,
                                        cues,
                                        rates: &rates,
                                        current_rate: BitRate::from_kbps(200),
                                        current_fec_rate: BitRate::from_kbps(20),
                                        sending_rate: BitRate::from_kbps(200),
                                        goodput: BitRate::from_kbps(180),
                                        fec_interval: 5,
                                        now: SimTime::from_secs(1),
                                        disable_window: SimTime::from_millis(500),
                                    },
                                    &cfg,
                                );
                                let pause = matches!(want.1, Want::Cut { pause: true });
                                if d.fec_enabled != (want.0 == ControllerState::Probe)
                                    || d.rate_control_disabled_until.is_some() != pause
                                {
                                    mismatches.push(format!("step side effects differ for {state}/{prev}"));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(mismatches.is_empty(), || {
        format!("{} mismatches of {cases}; first: {}", mismatches.len(), mismatches[0])
    })?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} cases, 0 mismatches, {elapsed:.1?}"))
}

// ---------------------------------------------------------------- 2

fn random_block(rng: &mut ChaCha8Rng) -> Vec<MediaPacket> {
    let len = rng.random_range(2..=14usize);
    let base: u16 = rng.random();
    let ssrc: u32 = rng.random();
    (0..len)
        .map(|i| {
            let plen = rng.random_range(1..=1472usize);
            let payload = (0..plen).map(|_| rng.random()).collect();
            let count = rng.random_range(1..=4u16);
            MediaPacket {
                ssrc,
                seq: base.wrapping_add(i as u16),
                frame_id: rng.random(),
                frame_ts: SimTime(rng.random_range(0..1u64 << 40)),
                send_ts: SimTime(rng.random_range(0..1u64 << 40)),
                payload,
                is_fragment: count > 1,
                fragment_index: rng.random_range(0..count),
                fragment_count: count,
            }
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xFEC);
    let far = SimTime::from_secs(1 << 30);
    let blocks = 10_000;
    let mut singles = 0;
    for b in 0..blocks {
        let block = random_block(&mut rng);
        let fec = encode_block(&block, SimTime::ZERO).map_err(|e| e.to_string())?;
        let erased = rng.random_range(0..block.len());
        let mut st = FecBlockState::new(fec.clone(), far);
        for (i, p) in block.iter().enumerate() {
            if i != erased {
                st.insert(p.clone());
            }
        }
        let rebuilt = try_recover(&st, SimTime::ZERO);
        check(rebuilt.as_ref() == Some(&block[erased]), || {
            format!("block {b}: erasure {erased} of {} not rebuilt exactly", block.len())
        })?;
        singles += 1;

        let second = (erased + rng.random_range(1..block.len())) % block.len();
        let mut st = FecBlockState::new(fec, far);
        for (i, p) in block.iter().enumerate() {
            if i != erased && i != second {
                st.insert(p.clone());
            }
        }
        check(try_recover(&st, SimTime::ZERO).is_none(), || {
            format!("block {b}: double erasure claimed recovered")
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{singles}/{blocks} single erasures exact, 0 double claims, {elapsed:.1?}"))
}

// ---------------------------------------------------------------- 3

/// Sort, then take 1-based rank ceil(pct * n / 100).
fn nearest_rank(samples: &[u64], pct: u64) -> u64 {
    let mut s = samples.to_vec();
    s.sort();
    let n = s.len() as u64;
    let rank = (pct * n).div_ceil(100).max(1);
    s[(rank - 1) as usize]
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0D);
    for h in 0..1000 {
        let n = rng.random_range(1..=20usize);
        let samples: Vec<u64> = (0..n).map(|_| rng.random_range(1..2_000_000)).collect();
        let current = rng.random_range(1..4_000_000u64);
        let hist = OwdHistory::from_samples(samples.iter().map(|&v| SimTime(v)), 20);
        let lo = nearest_rank(&samples, 40);
        let hi = nearest_rank(&samples, 80);
        let p40 = hist.percentile(0.40).map_err(|e| e.to_string())?;
        let p80 = hist.percentile(0.80).map_err(|e| e.to_string())?;
        check((p40.0, p80.0) == (lo, hi), || {
            format!("history {h} (n={n}): got ({}, {}), oracle ({lo}, {hi})", p40.0, p80.0)
        })?;
        let c = hist.correlate(SimTime(current)).map_err(|e| e.to_string())?;
        check(
            c.corr_low == current as f64 / lo as f64 && c.corr_high == current as f64 / hi as f64,
            || format!("history {h}: correlation differs from oracle"),
        )?;
        for k in [2u64, 10, 1000] {
            let scaled = OwdHistory::from_samples(samples.iter().map(|&v| SimTime(v * k)), 20);
            let ck = scaled.correlate(SimTime(current * k)).map_err(|e| e.to_string())?;
            check(ck.corr_low == c.corr_low && ck.corr_high == c.corr_high, || {
                format!("history {h}: correlation changes under scale {k}")
            })?;
        }
    }
    Ok("1000 histories exact; scale k in {2, 10, 1000} invariant".into())
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4);
    let floor = 32_000i128;
    for i in 0..100_000 {
        let sr = rng.random_range(0..20_000_000u64);
        let gp = rng.random_range(0..=sr);
        let raw = (9 * (2 * gp as i128 - sr as i128)).div_euclid(10);
        let want = raw.min(sr as i128).max(floor) as u64;
        let got = undershoot(BitRate(sr), BitRate(gp)).bps();
        check(got == want, || format!("case {i}: undershoot({sr}, {gp}) = {got}, want {want}"))?;

        let stored = rng.random_range(0..20_000_000u64);
        let want_bb = (9 * stored / 10).max(floor as u64);
        let bb = bounce_back(BitRate(stored), true).map(|r| r.bps());
        check(bb == Some(want_bb), || format!("case {i}: bounce_back({stored}) = {bb:?}, want {want_bb}"))?;
        check(bounce_back(BitRate(stored), false).is_none(), || "bounce-back with congestion".into())?;
    }
    Ok("100000 random (sending rate, goodput) pairs exact".into())
}

// ---------------------------------------------------------------- 5

struct Run {
    label: &'static str,
    out: SimOutput,
    summary: metrics::RunSummary,
    wall: Duration,
}

fn sweep(label: &'static str, topo: Topology, delay_ms: u64, seeds: u64) -> Vec<(&'static str, Topology, u64, u64)> {
    (1..=seeds).map(|s| (label, topo, delay_ms, s)).collect()
}

fn run_all() -> Result<Vec<Run>, String> {
    let mut jobs = Vec::new();
    jobs.extend(sweep("var50", Topology::SingleVarLink, 50, 10));
    jobs.extend(sweep("var100", Topology::SingleVarLink, 100, 10));
    jobs.extend(sweep("var240", Topology::SingleVarLink, 240, 10));
    jobs.extend(sweep("tcp50", Topology::RtpVsTcp, 50, 10));
    jobs.extend(sweep("multi50", Topology::MultiRtpVsTcp, 50, 10));
    jobs.into_par_iter()
        .map(|(label, topo, delay, seed)| {
            let s = Scenario::preset(topo, delay).with_seed(seed);
            let t = Instant::now();
            let out = run_detailed(&s).map_err(|e| format!("{label} seed {seed}: {e}"))?;
            let wall = t.elapsed();
            let summary = metrics::summarize(&out.trace);
            Ok(Run {
                label,
                out,
                summary,
                wall,
            })
        })
        .collect()
}

fn of<'a>(runs: &'a [Run], label: &str) -> Vec<&'a Run> {
    runs.iter().filter(|r| r.label == label).collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_5a(runs: &[Run]) -> Outcome {
    let r = of(runs, "var50");
    let gp = mean(r.iter().map(|x| x.summary.rtp[0].goodput_bps)) / 1000.0;
    let loss = mean(r.iter().map(|x| x.summary.rtp[0].loss_rate));
    let frcc = mean(r.iter().map(|x| x.summary.rtp[0].frcc.unwrap_or(0.0)));
    let slowest = r.iter().map(|x| x.wall).max().unwrap_or_default();
    let msg = format!(
        "goodput {gp:.1} kbps, loss {:.2}%, FRCC {frcc:.3}, slowest run {slowest:.2?}",
        loss * 100.0
    );
    check((110.0..=230.0).contains(&gp), || format!("goodput out of band: {msg}"))?;
    check(loss < 0.05, || format!("loss too high: {msg}"))?;
    check(frcc > 0.75, || format!("FRCC too low: {msg}"))?;
    check(slowest < Duration::from_secs(30), || format!("too slow: {msg}"))?;
    Ok(msg)
}

fn criterion_5b(runs: &[Run]) -> Outcome {
    let gp = |l| mean(of(runs, l).iter().map(|x| x.summary.rtp[0].goodput_bps)) / 1000.0;
    let (g100, g240) = (gp("var100"), gp("var240"));
    let msg = format!("goodput {g240:.1} kbps at 240 ms vs {g100:.1} kbps at 100 ms");
    check(g240 < g100, || msg.clone())?;
    Ok(msg)
}

fn criterion_5c(runs: &[Run]) -> Outcome {
    let r = of(runs, "tcp50");
    let loss = mean(r.iter().map(|x| x.summary.rtp[0].loss_rate));
    let tfs = mean(r.iter().map(|x| x.summary.tfs.unwrap_or(f64::NAN)));
    let msg = format!("RTP loss {:.2}%, TFS {tfs:.3}", loss * 100.0);
    check(loss < 0.05, || format!("loss too high: {msg}"))?;
    check((0.5..=1.7).contains(&tfs), || format!("TFS out of band: {msg}"))?;
    let mut completed = 0;
    for x in &r {
        for (j, st) in x.out.tcp.iter().enumerate() {
            check(st.transfers_started >= st.transfers_completed && st.transfers_started - st.transfers_completed <= 1, || {
                format!("tcp{j}: {} started, {} completed", st.transfers_started, st.transfers_completed)
            })?;
            completed += st.transfers_completed;
        }
    }
    check(completed > 0, || "no TCP transfer completed".into())?;
    Ok(format!("{msg}, {completed} transfers completed"))
}

fn criterion_5d(runs: &[Run]) -> Outcome {
    let r = of(runs, "multi50");
    let g0 = mean(r.iter().map(|x| x.summary.rtp[0].goodput_bps));
    let g1 = mean(r.iter().map(|x| x.summary.rtp[1].goodput_bps));
    let spread = (g0 - g1).abs() / ((g0 + g1) / 2.0);
    let msg = format!(
        "goodputs {:.1} / {:.1} kbps, difference {:.1}% of mean",
        g0 / 1000.0,
        g1 / 1000.0,
        spread * 100.0
    );
    check(spread < 0.35, || msg.clone())?;
    Ok(msg)
}

// ---------------------------------------------------------------- 6, 8

/// Played and recovered packets delivered more than 400 ms after sending.
fn late_plays(trace: &SimTrace) -> usize {
    let mut late = 0;
    for (f, _) in trace.flows_of(FlowKind::Rtp) {
        let mut sent = HashMap::new();
        for e in trace.events_of(f) {
            match e.kind {
                EventKind::SendRtp => {
                    sent.insert(e.seq, e.time);
                }
                EventKind::Recv | EventKind::Recovered => {
                    let t0 = sent[&e.seq];
                    if e.time.saturating_sub(t0) > SimTime::from_millis(400) {
                        late += 1;
                    }
                }
                _ => {}
            }
        }
    }
    late
}

/// Parity packets sent while the flow's last announced state was not PROBE.
fn fec_outside_probe(trace: &SimTrace) -> usize {
    let mut bad = 0;
    for (f, _) in trace.flows_of(FlowKind::Rtp) {
        let mut state = "STAY".to_owned();
        for e in trace.events_of(f) {
            match e.kind {
                EventKind::State => state = e.extra.as_label().unwrap_or_default().to_owned(),
                EventKind::SendFec if state != "PROBE" => bad += 1,
                _ => {}
            }
        }
    }
    bad
}

fn criterion_6(runs: &[Run]) -> Outcome {
    let mut played = 0usize;
    let mut late = 0;
    for r in runs {
        late += late_plays(&r.out.trace);
        played += r.out.trace.events.iter().filter(|e| e.kind == EventKind::Recv && r.out.trace.flows[e.flow as usize].kind == FlowKind::Rtp).count();
    }
    check(late == 0, || format!("{late} packets played after 400 ms"))?;
    Ok(format!("{} traces, {played} played packets, none over 400 ms", runs.len()))
}

fn criterion_8(runs: &[Run]) -> Outcome {
    let mut fec = 0usize;
    let mut bad = 0;
    for r in runs {
        fec += r.out.trace.events.iter().filter(|e| e.kind == EventKind::SendFec).count();
        bad += fec_outside_probe(&r.out.trace);
    }
    check(bad == 0, || format!("{bad} of {fec} parity packets sent outside PROBE"))?;
    check(fec > 0, || "no parity packets at all".into())?;
    Ok(format!("{} traces, {fec} parity packets, all in PROBE", runs.len()))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let families = [
        ("single_var_link", 50, 300),
        ("rtp_vs_tcp", 100, 300),
        ("multi_rtp_vs_tcp", 240, 300),
    ];
    for (topo, delay, dur) in families {
        let conf = tmp.path().join(format!("{topo}.conf"));
        std::fs::write(&conf, format!("topology = {topo}\nbottleneck_delay_ms = {delay}\nduration_s = {dur}\n"))
            .map_err(|e| e.to_string())?;
        let digest = |dir: &Path| -> Result<Vec<u8>, String> {
            let st = Command::new(env!("CARGO_BIN_EXE_fbra"))
                .args(["run", "--seed", "5", "--scenario"])
                .arg(&conf)
                .arg("--out")
                .arg(dir)
                .output()
                .map_err(|e| e.to_string())?;
            check(st.status.success(), || String::from_utf8_lossy(&st.stderr).into_owned())?;
            let bytes = std::fs::read(dir.join("trace.csv")).map_err(|e| e.to_string())?;
            Ok(Sha256::digest(bytes).to_vec())
        };
        let a = digest(&tmp.path().join(format!("{topo}-a")))?;
        let b = digest(&tmp.path().join(format!("{topo}-b")))?;
        check(a == b, || format!("{topo}: trace hashes differ"))?;
    }
    Ok("3 scenario families, identical trace.csv hashes".into())
}

fn main() {
    // `cargo test -- --list` and filters are accepted but ignored.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1", criterion_1()),
        ("2", criterion_2()),
        ("3", criterion_3()),
        ("4", criterion_4()),
    ];
    let runs = run_all();
    match &runs {
        Ok(runs) => {
            let parts = [
                ("5a", criterion_5a(runs)),
                ("5b", criterion_5b(runs)),
                ("5c", criterion_5c(runs)),
                ("5d", criterion_5d(runs)),
            ];
            let failed: Vec<_> = parts.iter().filter(|(_, r)| r.is_err()).map(|(n, _)| *n).collect();
            let detail = parts
                .iter()
                .map(|(n, r)| match r {
                    Ok(m) => format!("\n    {n} PASS: {m}"),
                    Err(m) => format!("\n    {n} FAIL: {m}"),
                })
                .collect::<String>();
            let line = if failed.is_empty() { Ok(detail) } else { Err(format!("{failed:?} failed{detail}")) };
            results.push(("5", line));
            results.push(("6", criterion_6(runs)));
        }
        Err(e) => {
            results.push(("5", Err(e.clone())));
            results.push(("6", Err(e.clone())));
        }
    }
    results.push(("7", criterion_7()));
    match &runs {
        Ok(runs) => results.push(("8", criterion_8(runs))),
        Err(e) => results.push(("8", Err(e.clone()))),
    }

    let mut failures = 0;
    for (n, r) in &results {
        match r {
            Ok(m) => println!("criterion {n}: PASS  {m}"),
            Err(m) => {
                failures += 1;
                println!("criterion {n}: FAIL  {m}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
