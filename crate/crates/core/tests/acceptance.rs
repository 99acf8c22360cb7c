//! Acceptance suite. Runs without the libtest harness so that it prints one
//! PASS/FAIL line per criterion, with its wall-clock time against the budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use bodynet::calibration::{bundled_targets, calibrate, Role};
use bodynet::channel_select::{adaptive_policy, scan, select_channel, EnvironmentPhase, PolicyConfig, ScanReport, N_CHANNELS};
use bodynet::classifier::{detect_abnormal, ClassifierConfig};
use bodynet::energy::{active_only_components, battery_life_hours, Battery, DutyProfile, RADIO};
use bodynet::frame::{encode_log, replay_log};
use bodynet::link::{run_echo, run_echo_test, run_star_network, EchoLink, EchoTestConfig, StarConfig};
use bodynet::motion::{compose_schedule, generate_trace, AccelSample, AccelTrace, ActivityKind};
use bodynet::rf::{channel_center_freq, spectral_overlap, ChannelSpec, InterferenceModel, Standard};
use bodynet::scenario::preset;
use bodynet::sensor::{
    dequantize, quantize, rest_deviation, run_trace, select_range, MeasurementRange, Mode, SensorConfig, SensorState,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn echo_pct(scenario: &str, disable: &[&str], channel: u8, power: f64, model: &InterferenceModel, seed: u64) -> Result<f64, String> {
    let s = preset(scenario).map_err(e)?.with_disabled(disable).map_err(e)?;
    let cfg = EchoTestConfig::new(ChannelSpec::wpan(channel).map_err(e)?, power);
    let stats = run_echo_test(&cfg, &s.link_scenario(model), seed).map_err(e)?;
    Ok(100.0 * stats.mean_ratio)
}

fn energy() -> Outcome {
    let comps = active_only_components();
    let full = DutyProfile::uniform(&comps, 1.0);
    let radio10 = DutyProfile::uniform(&comps, 1.0).with(RADIO, 0.1);
    let cases = [
        (Battery::pack_6600(), &full, 128.7),
        (Battery::pack_6600(), &radio10, 611.1),
        (Battery::coin_230(), &full, 4.48),
        (Battery::coin_230(), &radio10, 21.3),
    ];
    let mut got = Vec::new();
    for (b, d, want) in cases {
        let h = battery_life_hours(&b, &comps, d).map_err(e)?;
        check((h - want).abs() <= 0.1, || format!("{} mAh: {h:.3} h, want {want} h", b.capacity_mah))?;
        got.push(format!("{h:.2}"));
    }
    Ok(format!("life {} h", got.join(" / ")))
}

fn geometry() -> Outcome {
    for (ch, f) in [(12, 2410.0), (19, 2445.0), (20, 2450.0), (21, 2455.0), (22, 2460.0)] {
        let got = channel_center_freq(Standard::Wpan154, ch).map_err(e)?;
        check(got == f, || format!("channel {ch}: {got} MHz, want {f}"))?;
    }
    let z12 = ChannelSpec::wpan(12).map_err(e)?;
    let w1 = ChannelSpec::wlan(1).map_err(e)?;
    let ov = spectral_overlap(&z12, &w1);
    check(ov == 2.0, || format!("overlap {ov} MHz"))?;
    check(z12.low_mhz() >= w1.low_mhz() && z12.high_mhz() <= w1.high_mhz(), || "ch12 not contained in ch1".into())?;
    Ok(format!("overlap {ov} MHz, contained"))
}

fn calibration() -> Outcome {
    let targets = bundled_targets();
    let rep = calibrate(&targets).map_err(e)?;
    let mut worst: f64 = 0.0;
    for t in &targets {
        let got = echo_pct(&t.scenario, &t.disabled_labels(), t.channel, t.power_dbm, &rep.model, 2024)?;
        let tol = if t.role == Role::Holdout { 1.0 } else { 0.5 };
        let err = (got - t.mean_pct).abs();
        check(err <= tol, || {
            format!("{} ch{} {} dBm {}: {got:.2}% vs {}% (tol {tol})", t.scenario, t.channel, t.power_dbm, t.condition, t.mean_pct)
        })?;
        if t.role == Role::Fit {
            worst = worst.max(err);
        }
    }
    Ok(format!("{} rows, worst fit-row error {worst:.2} pp", targets.len()))
}

fn attenuation() -> Outcome {
    let model = calibrate(&bundled_targets()).map_err(e)?.model;
    let run = |name: &str| -> Result<f64, String> {
        let s = preset(name).map_err(e)?;
        echo_pct(name, &[], s.channel, s.tx_power_dbm, &model, 7)
    };
    let siding = run("siding")?;
    let brick = run("brick_wall")?;
    let glass = run("glass_window")?;
    let stove = run("stove")?;
    let near = run("plant_near")?;
    let offset = run("plant_offset")?;
    check(siding < 1.0, || format!("siding {siding:.2}%"))?;
    check(brick > 99.5, || format!("brick {brick:.2}%"))?;
    check(glass > 99.5, || format!("glass {glass:.2}%"))?;
    check(stove < 75.0, || format!("stove {stove:.2}%"))?;
    for name in ["plant_near", "plant_offset"] {
        let p = preset(name).map_err(e)?.tx_power_dbm;
        check(p == 0.0, || format!("{name} runs at {p} dBm"))?;
    }
    check(near < 99.0 && near < offset, || format!("plant near {near:.2}% vs offset {offset:.2}%"))?;
    check(offset > 99.0, || format!("plant offset {offset:.2}%"))?;
    Ok(format!(
        "siding {siding:.2}, brick {brick:.2}, glass {glass:.2}, stove {stove:.2}, plant {near:.2} -> {offset:.2}"
    ))
}

const PROP_CASES: u32 = 10_000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: PROP_CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn fail<T: std::fmt::Debug>(name: &str, err: proptest::test_runner::TestError<T>) -> String {
    format!("{name}: {err}")
}

fn range() -> impl Strategy<Value = MeasurementRange> {
    (0u8..4).prop_map(|c| MeasurementRange::from_code(c).unwrap())
}

/// Gravity plus per-axis jitter well inside the activation threshold.
fn quiet_trace(seconds: f64, rate_hz: f64, jitter: [f64; 3]) -> AccelTrace {
    let n = (seconds * rate_hz).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let k = if i % 2 == 0 { 1.0 } else { -1.0 };
            AccelSample::new(i as f64 / rate_hz, k * jitter[0], -k * jitter[1], 1.0 + k * jitter[2])
        })
        .collect();
    AccelTrace {
        rate_hz,
        samples,
        activity_labels: vec![ActivityKind::Rest; n],
    }
}

fn sensor_properties() -> Outcome {
    runner()
        .run(&(prop::array::uniform3(-8.0f64..8.0), prop::array::uniform3(range())), |(g, cur)| {
            let sel = select_range(g, cur);
            for i in 0..3 {
                if g[i].abs() > cur[i].bound_g() {
                    prop_assert_eq!(sel[i], cur[i].step_up());
                } else {
                    prop_assert!(g[i].abs() <= sel[i].bound_g());
                    if let Some(lower) = sel[i].code().checked_sub(1).and_then(MeasurementRange::from_code) {
                        prop_assert!(g[i].abs() > lower.bound_g());
                    }
                }
            }
            Ok(())
        })
        .map_err(|x| fail("range minimality", x))?;

    runner()
        .run(
            &(prop::array::uniform3(-8.0f64..8.0), prop::array::uniform3(range()), 0usize..3, -8.0f64..8.0),
            |(g, cur, axis, v)| {
                let mut h = g;
                h[axis] = v;
                let a = select_range(g, cur);
                let b = select_range(h, cur);
                for i in (0..3).filter(|i| *i != axis) {
                    prop_assert_eq!(a[i], b[i]);
                }
                Ok(())
            },
        )
        .map_err(|x| fail("axis independence", x))?;

    runner()
        .run(&(-6.0f64..6.0, range()), |(a, r)| {
            let q = quantize(a, r).unwrap();
            if a.abs() <= r.bound_g() {
                prop_assert!(!q.clipped);
                prop_assert!((dequantize(&q) - a).abs() <= r.half_lsb_g() * (1.0 + 1e-9));
            }
            Ok(())
        })
        .map_err(|x| fail("quantize round trip", x))?;

    // A sleeping node on a rest trace converts once per wake period at most.
    runner()
        .run(&(any::<u64>(), 2.0f64..20.0, 0.25f64..2.0), |(seed, secs, wake)| {
            let tr = generate_trace(ActivityKind::Rest, secs, 20.0, seed).unwrap();
            let cfg = SensorConfig { wake_period_s: wake, sample_rate_hz: 20.0, ..SensorConfig::default() };
            let run = run_trace(&SensorState::new(cfg).unwrap(), &tr);
            let bound = (tr.duration() / wake).ceil() as usize;
            prop_assert_eq!(run.activations, 0);
            prop_assert!(run.frames.len() <= bound, "{} frames > {}", run.frames.len(), bound);
            Ok(())
        })
        .map_err(|x| fail("sleep duty bound", x))?;

    // Active -> Sleep exactly when 300 s of continuous rest have elapsed.
    runner()
        .run(&(10.0f64..12.0, prop::array::uniform3(0.0f64..0.25)), |(rate, jitter)| {
            let tr = quiet_trace(302.0, rate, jitter);
            let mut st = SensorState::new(SensorConfig { sample_rate_hz: rate, ..SensorConfig::default() }).unwrap();
            st.mode = Mode::Active;
            let mut slept = None;
            for s in &tr.samples {
                let (n, _) = st.step(s, tr.dt());
                if n.mode == Mode::Sleep {
                    slept = Some(s.t);
                    break;
                }
                st = n;
            }
            let t = slept.expect("node stayed active");
            // the timer reaches the window on the conversion that completes it
            prop_assert!((t + 1.0 / rate - 300.0).abs() < 1.0 / rate, "slept at {}", t);
            Ok(())
        })
        .map_err(|x| fail("active to sleep", x))?;

    // Sleep -> Active no later than one wake period after the first deviation.
    runner()
        .run(&(any::<u64>(), 1.0f64..6.0, 0.2f64..1.5), |(seed, rest, wake)| {
            let tr = compose_schedule(&[(ActivityKind::Rest, rest), (ActivityKind::Fall, 3.0)], 60.0, seed).unwrap();
            let cfg = SensorConfig { wake_period_s: wake, ..SensorConfig::default() };
            let mut st = SensorState::new(cfg).unwrap();
            let mut woke = None;
            for s in &tr.samples {
                let (n, _) = st.step(s, tr.dt());
                if n.mode == Mode::Active {
                    woke = Some(s.t);
                    break;
                }
                st = n;
            }
            let first = tr
                .samples
                .iter()
                .find(|s| rest_deviation(s.axes()).iter().any(|d| *d > cfg.activation_threshold_g))
                .map(|s| s.t)
                .expect("fall deviates from rest");
            let spike = tr.samples.iter().max_by(|a, b| a.total().total_cmp(&b.total())).unwrap().t;
            let woke = woke.expect("node never woke");
            prop_assert!(woke >= first && woke <= spike + wake + 1e-9, "first {} spike {} woke {}", first, spike, woke);
            Ok(())
        })
        .map_err(|x| fail("fall wakes node", x))?;

    Ok(format!("6 properties x {PROP_CASES} cases"))
}

fn classifier() -> Outcome {
    let cfg = ClassifierConfig::default();
    let quiet = [ActivityKind::Rest, ActivityKind::SitStand, ActivityKind::LeftRightRotation, ActivityKind::SlowWalk];
    for kind in quiet {
        for seed in 0..100 {
            let tr = generate_trace(kind, 20.0, 60.0, seed).map_err(e)?;
            let ev = detect_abnormal(&tr, &cfg).map_err(e)?;
            check(ev.is_empty(), || format!("{kind} seed {seed}: {} events", ev.len()))?;
        }
    }
    for kind in [ActivityKind::Fall, ActivityKind::Jump] {
        for seed in 0..100 {
            let tr = compose_schedule(&[(ActivityKind::Rest, 4.0), (kind, 3.0), (ActivityKind::Rest, 4.0)], 60.0, seed)
                .map_err(e)?;
            let ev = detect_abnormal(&tr, &cfg).map_err(e)?;
            for (k, start, end) in tr.segments().into_iter().filter(|(k, ..)| *k == kind) {
                check(ev.iter().any(|x| x.overlaps(start, end)), || format!("{k} seed {seed}: missed {start}..{end}"))?;
            }
        }
    }
    Ok("400 quiet traces clean, 200 abrupt segments all detected".into())
}

fn channel_selector() -> Outcome {
    let model = calibrate(&bundled_targets()).map_err(e)?.model;
    let s = preset("apartment").map_err(e)?;
    let env = s.environment(&model);
    let victim = s.victim(s.tx_power_dbm);
    let chosen = select_channel(&scan(&env, &victim).map_err(e)?);
    // every channel measured with the same seed
    let measured = (11u8..=26)
        .map(|ch| echo_pct("apartment", &[], ch, s.tx_power_dbm, &model, 99))
        .collect::<Result<Vec<_>, _>>()?;
    let best = measured[usize::from(chosen - 11)];
    for (i, m) in measured.iter().enumerate() {
        check(best >= *m, || format!("chose {chosen} ({best:.3}%) but ch{} measured {m:.3}%", 11 + i))?;
    }

    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(prop::array::uniform16(0.0f64..1.0), 1e-6f64..1e6), |(v, k)| {
            let a = select_channel(&ScanReport::new(v).unwrap());
            let b = select_channel(&ScanReport::new(v.map(|x| x * k)).unwrap());
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|x| format!("scale invariance: {x}"))?;

    let mut max_switches = 0;
    for start in [None, Some(11), Some(12), Some(20), Some(26)] {
        let cfg = PolicyConfig { initial_channel: start, ..PolicyConfig::new(10.0, 3600.0) };
        for name in ["apartment", "single_house", "kitchen"] {
            let sc = preset(name).map_err(e)?;
            let tl = [EnvironmentPhase { start_s: 0.0, env: sc.environment(&model) }];
            let steps = adaptive_policy(&tl, &sc.victim(sc.tx_power_dbm), &cfg).map_err(e)?;
            let n = steps.iter().filter(|s| s.switched).count();
            check(n <= 1, || format!("{name} from {start:?}: {n} switches"))?;
            max_switches = max_switches.max(n);
        }
    }
    check(N_CHANNELS == 16, || "channel count".into())?;
    Ok(format!("chose ch{chosen} at {best:.2}%, max {max_switches} switch in static runs"))
}

fn soundness() -> Outcome {
    let cfg = EchoTestConfig::new(ChannelSpec::wpan(20).map_err(e)?, 0.0);
    let n = f64::from(cfg.runs * cfg.n_messages);
    for p in [0.9, 0.99, 1.0] {
        let st = run_echo(&cfg, &EchoLink::fixed(p), 31).map_err(e)?;
        let q = p * p;
        let sigma = (q * (1.0 - q) / n).sqrt();
        check((st.mean_ratio - q).abs() <= 3.0 * sigma, || {
            format!("p={p}: {:.5} vs {q:.5} (3 sigma {:.5})", st.mean_ratio, 3.0 * sigma)
        })?;
        check(st == run_echo(&cfg, &EchoLink::fixed(p), 31).map_err(e)?, || format!("p={p}: stats differ across reruns"))?;
    }

    let s = preset("apartment").map_err(e)?;
    let model = InterferenceModel::default();
    let schedule = [(ActivityKind::Rest, 3.0), (ActivityKind::Fall, 3.0), (ActivityKind::Run, 6.0)];
    let traces = (0..s.nodes.sensors.len() as u64)
        .map(|i| compose_schedule(&schedule, 60.0, 40 + i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    let cfg = StarConfig::new(ChannelSpec::wpan(s.channel).map_err(e)?, s.tx_power_dbm, 12.0);
    let a = run_star_network(&s.link_scenario(&model), &traces, &cfg, 5).map_err(e)?;
    let b = run_star_network(&s.link_scenario(&model), &traces, &cfg, 5).map_err(e)?;
    let (la, lb) = (encode_log(&a.logged_frames()), encode_log(&b.logged_frames()));
    check(la == lb, || "frame logs differ for the same seed".into())?;
    check(a.nodes.iter().zip(&b.nodes).all(|(x, y)| x.stats == y.stats), || "node stats differ".into())?;
    let replayed = replay_log(&la).map_err(e)?;
    let bad = replayed.iter().filter(|r| r.is_err()).count();
    check(bad == 0, || format!("{bad} CRC errors"))?;
    check(!replayed.is_empty(), || "empty log".into())?;
    Ok(format!("3 pinned probabilities in 3 sigma, {} logged frames replay clean", replayed.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("energy arithmetic", Duration::from_secs(1), energy),
        ("channel geometry", Duration::from_secs(1), geometry),
        ("calibration fit", Duration::from_secs(30), calibration),
        ("attenuation outcomes", Duration::from_secs(10), attenuation),
        ("sensor properties", Duration::from_secs(30), sensor_properties),
        ("classifier contract", Duration::from_secs(60), classifier),
        ("channel selector", Duration::from_secs(60), channel_selector),
        ("simulation soundness", Duration::from_secs(30), soundness),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let outcome = f();
        let dt = t0.elapsed();
        let outcome = outcome.and_then(|msg| {
            if dt <= budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {:.2} s, budget {} s", dt.as_secs_f64(), budget.as_secs()))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS {} {name} ({:.2} s): {msg}", i + 1, dt.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name} ({:.2} s): {msg}", i + 1, dt.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
