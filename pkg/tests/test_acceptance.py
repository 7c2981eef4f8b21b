"""
Exit criteria for the detector. Each test prints one PASS/FAIL line; the
lines are repeated in the terminal summary.
"""

import math
import random
import time

import mpmath
import pytest

from ddos_entropy.alerts import AlertLog
from ddos_entropy.calibration import calibrate
from ddos_entropy.cli import main as cli_main
from ddos_entropy.config import DetectorConfig
from ddos_entropy.entropy import (
    FeatureDistribution,
    FeatureKind,
    build_distribution,
    entropy_rate,
    normalized_entropy,
    shannon_entropy,
)
from ddos_entropy.flows import FlowRecord, ip_to_int, iter_trace, windowize, write_trace
from ddos_entropy.pipeline import State, run_pipeline, verdicts_to_jsonl
from ddos_entropy.traffic_gen import AttackParams, LegitParams, gen_ddos, gen_legitimate, mix, standard_scenario

from conftest import ACCEPTANCE_LINES, window_of

TARGET_FPR = 0.01
TH2 = 0.2
SEEDS_C4 = range(20)
TRACES_C5 = 100


def verdict_line(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] C{number} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def mp_entropy_bits(counts):
    mpmath.mp.dps = 40
    m = mpmath.mpf(sum(counts))
    return float(-sum((c / m) * mpmath.log(c / m, 2) for c in counts))


def test_c1_entropy_correctness():
    r = random.Random(2024)
    dists = []
    for _ in range(1000):
        n = r.randint(1, 100)
        dists.append([r.randint(1, r.choice([1, 10, 1000, 100_000])) for _ in range(n)])
    start = time.perf_counter()
    computed = []
    for counts in dists:
        d = FeatureDistribution(None, dict(enumerate(counts)))
        computed.append((shannon_entropy(d, 2), normalized_entropy(d, 2)))
    elapsed = time.perf_counter() - start
    worst = 0.0
    bounds_ok = True
    for counts, (h, ne) in zip(dists, computed):
        worst = max(worst, abs(h - mp_entropy_bits(counts)))
        bounds_ok &= 0.0 <= h <= math.log2(len(counts)) + 1e-9 and 0.0 <= ne <= 1.0
    ok = worst <= 1e-9 and bounds_ok and elapsed < 5.0
    verdict_line(1, "entropy vs 40-digit oracle", ok,
                 f"max |dH| = {worst:.2e} (tol 1e-9), bounds {'hold' if bounds_ok else 'VIOLATED'}, "
                 f"{len(dists)} distributions in {elapsed:.3f} s (limit 5 s)")


def test_c2_extremes():
    failures = []
    for feature in (FeatureKind.SRC_ADDR, FeatureKind.DST_ADDR, FeatureKind.SRC_PORT, FeatureKind.DST_PORT):
        same = window_of([FlowRecord(i * 0.01, 1, 2, 3, 4, 6, 5, 100) for i in range(50)])
        h = shannon_entropy(build_distribution(same, feature))
        if h != 0.0:
            failures.append(f"{feature.value} same-value H={h}")
    for n in (2, 3, 7, 64, 1000):
        records = [FlowRecord(i * 0.001, ip_to_int("10.0.0.0") + i, 9, 1000 + i, 80, 6, 4, 100) for i in range(n)]
        d = build_distribution(window_of(records), FeatureKind.SRC_ADDR)
        h, ne = shannon_entropy(d), normalized_entropy(d)
        if abs(h - math.log2(n)) > 1e-9 or abs(ne - 1.0) > 1e-9:
            failures.append(f"n={n}: H={h}, NE={ne}")
    verdict_line(2, "entropy extremes", not failures,
                 "H=0 exactly for one value; H=log2 n and NE=1 within 1e-9 for n in {2,3,7,64,1000}"
                 if not failures else "; ".join(failures))


def test_c3_entropy_rate():
    const = entropy_rate([ip_to_int("198.18.0.1")] * 500, 2)
    # Odd length so the overlapping 2-blocks ab and ba occur equally often.
    alternating = entropy_rate("ab" * 500 + "a", 2)
    r = random.Random(31337)
    coin = entropy_rate([r.randrange(2) for _ in range(10_000)], 1)
    ok = const == 0.0 and abs(alternating - 0.5) <= 1e-9 and abs(coin - 1.0) <= 0.02
    verdict_line(3, "entropy rate", ok,
                 f"constant={const} (exact 0), abab k=2 -> {alternating:.12f} (0.5 +- 1e-9), "
                 f"fair coin k=1 -> {coin:.4f} (1.0 +- 0.02)")


def _flood_share(records, victim, windows):
    ws = windowize(records, 1.0)
    shares = []
    for i in windows:
        w = ws[i]
        shares.append(sum(r.packet_count for r in w.records if r.key == victim) / w.packet_total)
    return shares


def test_c4_detection_scenario():
    attacked_total = attack_windows = 0
    wrong_flow = []
    slowest = 0.0
    min_share = 1.0
    subset_ok = True
    for seed in SEEDS_C4:
        start = time.perf_counter()
        sc = standard_scenario(seed=seed)
        victim = sc.attack.victim
        assert sc.attack_windows == list(range(10, 20))
        prefix = [r for r in sc.records if r.timestamp < 10.0]
        cfg, _ = calibrate(prefix, DetectorConfig(th2=TH2), TARGET_FPR)
        summary = run_pipeline(sc.records, cfg)
        slowest = max(slowest, time.perf_counter() - start)
        min_share = min(min_share, min(_flood_share(sc.records, victim, sc.attack_windows)))
        for v in summary.verdicts:
            if v.state is State.ATTACKED:
                if v.attack_flow != victim:
                    wrong_flow.append((seed, v.window_index))
                subset_ok &= bool(v.triggering_features)
        attacked_total += sum(summary.verdicts[i].state is State.ATTACKED for i in sc.attack_windows)
        attack_windows += len(sc.attack_windows)
    rate = attacked_total / attack_windows
    ok = min_share >= 0.70 and rate >= 0.95 and not wrong_flow and slowest < 10.0 and subset_ok
    verdict_line(4, "flood detection over 20 seeds", ok,
                 f"{attacked_total}/{attack_windows} attack windows Attacked ({rate:.1%}, need >= 95%), "
                 f"min flood share {min_share:.3f} (need >= 0.70), wrong attack_flow {len(wrong_flow)}, "
                 f"slowest seed {slowest:.2f} s (limit 10 s)")


@pytest.mark.slow
def test_c5_false_positive_control():
    worst_excess = -1.0
    clean_confirm_traces = 0
    forced_confirm_traces = 0
    n_windows = set()
    for seed in range(TRACES_C5):
        records = gen_legitimate(LegitParams(records_per_second=100, duration=100, seed=1000 + seed))
        cfg, profiles = calibrate(records, DetectorConfig(th2=TH2), TARGET_FPR)
        n = len(next(iter(profiles.values())).ne_samples)
        n_windows.add(n)
        summary = run_pipeline(records, cfg)
        tripped = sum(v.state is not State.NORMAL for v in summary.verdicts)
        worst_excess = max(worst_excess, tripped / n - (TARGET_FPR + 1 / n))
        clean_confirm_traces += summary.attacked > 0
        # Stress: force every window through stage 2 (th1 = 1).
        forced = run_pipeline(records, cfg.with_thresholds(th1=1.0))
        forced_confirm_traces += forced.attacked > 0
    clean_traces = TRACES_C5 - clean_confirm_traces
    forced_clean = TRACES_C5 - forced_confirm_traces
    ok = worst_excess <= 0 and clean_traces >= 95 and forced_clean >= 95 and n_windows == {100}
    verdict_line(5, "false-positive control on 100 clean traces", ok,
                 f"worst stage-1 trip rate minus (1% + 1/N) = {worst_excess:+.4f} (must be <= 0); "
                 f"traces with zero confirmations: {clean_traces}/100 calibrated, "
                 f"{forced_clean}/100 with every window forced to stage 2 (need >= 95)")


def _sets(summary):
    sus = {v.window_index for v in summary.verdicts if v.state is not State.NORMAL}
    att = {v.window_index for v in summary.verdicts if v.state is State.ATTACKED}
    return sus, att


def test_c6_structural_invariants():
    problems = []
    for seed in range(5):
        sc = standard_scenario(seed=100 + seed)
        prefix = [r for r in sc.records if r.timestamp < 10.0]
        cfg, _ = calibrate(prefix, DetectorConfig(th2=TH2), TARGET_FPR)
        base = run_pipeline(sc.records, cfg)
        sus, att = _sets(base)
        if not att <= sus:
            problems.append(f"seed {seed}: Attacked not within Suspected")
        lo = _sets(run_pipeline(sc.records, cfg.with_thresholds(th1=max(0.0, cfg.th1 - 0.1))))
        hi = _sets(run_pipeline(sc.records, cfg.with_thresholds(th1=min(1.0, cfg.th1 + 0.1))))
        if not (lo[0] <= sus <= hi[0]):
            problems.append(f"seed {seed}: th1 +- 0.1 inclusion fails")
        for s, a in (lo, hi):
            if not a <= s:
                problems.append(f"seed {seed}: Attacked not within Suspected after th1 shift")
        th2_lo = _sets(run_pipeline(sc.records, cfg.with_thresholds(th2=max(0.0, cfg.th2 - 0.1))))[1]
        th2_hi = _sets(run_pipeline(sc.records, cfg.with_thresholds(th2=cfg.th2 + 0.1)))[1]
        if not (th2_lo <= att <= th2_hi):
            problems.append(f"seed {seed}: th2 +- 0.1 inclusion fails")
        one = verdicts_to_jsonl(run_pipeline(sc.records, cfg, workers=1).verdicts)
        many = verdicts_to_jsonl(run_pipeline(sc.records, cfg, workers=4, chunk_size=4).verdicts)
        if one.encode() != many.encode():
            problems.append(f"seed {seed}: verdict JSONL differs between 1 and 4 workers")
    verdict_line(6, "structural invariants", not problems,
                 "Attacked within Suspected, th1/th2 +- 0.1 set inclusion, byte-identical JSONL at 1 vs 4 threads "
                 "(5 seeds)" if not problems else "; ".join(problems))


@pytest.mark.slow
def test_c7_throughput(tmp_path):
    legit = gen_legitimate(LegitParams(records_per_second=10_000, duration=95, seed=7))
    flood = gen_ddos(AttackParams(records_per_second=10_000, start=40.0, duration=5.0, seed=8))
    records, _ = mix([legit, flood])
    assert len(records) == 1_000_000
    trace = tmp_path / "big.csv"
    write_trace(records, trace)
    del records, legit, flood
    start = time.perf_counter()
    with AlertLog.open(tmp_path / "alerts.jsonl") as sink:
        summary = run_pipeline(iter_trace(trace), DetectorConfig(th1=0.9, th2=TH2), sink)
    elapsed = time.perf_counter() - start
    alerts = (tmp_path / "alerts.jsonl").read_text().count("\n")
    ok = elapsed < 60.0 and summary.attacked > 0 and alerts == summary.suspected + summary.attacked
    verdict_line(7, "throughput", ok,
                 f"1,000,000 records parse -> verdicts -> alerts in {elapsed:.1f} s "
                 f"({1e6 / elapsed:,.0f} records/s, limit 60 s); {summary.windows} windows, {alerts} alerts")


def test_c8_closed_loop_cli(tmp_path):
    trace = tmp_path / "scenario.csv"
    labels = tmp_path / "scenario.labels.jsonl"
    cal = tmp_path / "thresholds.json"
    verdicts = tmp_path / "verdicts.jsonl"
    direct_report = tmp_path / "report_detect.json"
    rebuilt_report = tmp_path / "report_rebuilt.json"
    codes = [
        cli_main(["generate", "--seed", "11", "--out", str(trace), "--labels", str(labels)]),
        cli_main(["calibrate", "--trace", str(trace), "--prefix-windows", "10", "--target-fpr", "0.01",
                  "--out", str(cal)]),
        cli_main(["detect", "--config", str(cal), "--trace", str(trace), "--out", str(verdicts),
                  "--alerts-out", str(tmp_path / "alerts.jsonl"), "--notify-out", str(tmp_path / "notify.txt"),
                  "--report-out", str(direct_report)]),
        cli_main(["evaluate", "--config", str(cal), "--trace", str(trace), "--labels", str(labels),
                  "--out", str(tmp_path / "metrics.json")]),
        cli_main(["report", "--config", str(cal), "--verdicts", str(verdicts), "--trace", str(trace),
                  "--out", str(rebuilt_report)]),
    ]
    identical = direct_report.read_bytes() == rebuilt_report.read_bytes()
    ok = codes == [0, 0, 2, 0, 0] and identical
    verdict_line(8, "closed-loop CLI", ok,
                 f"exit codes generate/calibrate/detect/evaluate/report = {codes} (want [0, 0, 2, 0, 0]); "
                 f"report rebuilt from verdict JSONL {'byte-identical' if identical else 'DIFFERS'}")
