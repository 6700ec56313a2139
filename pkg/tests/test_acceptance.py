"""Acceptance suite.

One test per criterion; each prints a single PASS/FAIL line and then
asserts. Metric targets are frozen reference values for the pinned
confusion matrices; tolerances are pinned in the assertions.
"""

import json
import time
from pathlib import Path

import numpy as np

from cyclecast.cli import EXIT_OK, main as cli_main
from cyclecast.dataset import PhaseLabel
from cyclecast.evaluation import (
    ConfusionMatrix,
    accuracy,
    argmax_predictions,
    collapse_two_label,
    f_scores,
    report_from_json,
    topk_accuracy,
)
from cyclecast.indices import expanding_pca_index, pca_first_component
from cyclecast.models import _one_hot, mlp_loss_and_grads, mlr_loss_and_grads
from cyclecast.preprocess import newey_west_variance, zscore
from cyclecast.rbbcp import TrendDirection, rbbcp_predict

from conftest import make_panel, make_series

US_MLR_CONFUSION = [[9, 19, 0, 2], [2, 70, 2, 1], [0, 0, 6, 2], [0, 0, 7, 20]]
EZ_MLR_CONFUSION = [[12, 2, 0, 4], [8, 34, 4, 0], [2, 5, 11, 3], [5, 3, 5, 20]]


def report_line(criterion: int, description: str, failures: list[str]) -> None:
    status = "PASS" if not failures else "FAIL"
    print(f"[criterion {criterion}] {status}: {description}")
    assert not failures, f"criterion {criterion}: " + "; ".join(failures)


def check(failures: list[str], condition: bool, message: str) -> None:
    if not condition:
        failures.append(message)


# --- criteria 1-2: metric reproduction from reference confusion matrices ----


def _metric_failures(confusion, targets, tolerances, top1_target) -> list[str]:
    failures: list[str] = []
    start = time.perf_counter()
    cm = ConfusionMatrix.from_array(confusion)
    scores = f_scores(cm)
    arr = cm.as_array()
    preds = []
    truth = []
    for i in range(4):
        for j in range(4):
            preds.extend([i + 1] * arr[i, j])
            truth.extend([j + 1] * arr[i, j])
    top1 = accuracy(preds, truth)
    elapsed = time.perf_counter() - start
    order = ["recovery", "expansion", "slowdown", "recession"]
    for name, target, tol in zip(order, targets, tolerances):
        got = scores.per_class[order.index(name)] * 100
        check(failures, abs(got - target) <= tol, f"{name}: got {got:.4f}, want {target}±{tol}")
    check(
        failures,
        abs(scores.macro * 100 - targets[4]) <= tolerances[4],
        f"macro: got {scores.macro * 100:.4f}, want {targets[4]}",
    )
    check(
        failures,
        abs(top1 * 100 - top1_target) <= 0.01,
        f"top1: got {top1 * 100:.4f}, want {top1_target}",
    )
    check(failures, elapsed < 1.0, f"runtime {elapsed:.3f}s >= 1s")
    return failures


def test_criterion_1_us_metrics():
    failures = _metric_failures(
        US_MLR_CONFUSION,
        targets=[43.90, 85.36, 52.17, 76.92, 64.59],
        tolerances=[0.01, 0.01, 0.01, 0.01, 0.01],
        top1_target=75.00,
    )
    report_line(1, "US metric reproduction from the reference confusion matrix", failures)


def test_criterion_2_ez_metrics():
    failures = _metric_failures(
        EZ_MLR_CONFUSION,
        targets=[53.33, 75.55, 53.66, 66.66, 62.30],
        tolerances=[0.01, 0.02, 0.01, 0.01, 0.01],
        top1_target=65.25,
    )
    report_line(2, "EZ metric reproduction from the reference confusion matrix", failures)


# --- criterion 3: rule-based predictor truth table ---------------------------


def test_criterion_3_rbbcp_truth_table():
    failures: list[str] = []
    UP, DOWN = TrendDirection.UP, TrendDirection.DOWN
    expected = {
        (DOWN, DOWN): PhaseLabel.RECESSION,
        (DOWN, UP): PhaseLabel.RECOVERY,
        (UP, DOWN): PhaseLabel.SLOWDOWN,
        (UP, UP): PhaseLabel.EXPANSION,
    }
    for (inflation, growth), phase in expected.items():
        got = rbbcp_predict(inflation, growth)
        check(
            failures,
            got is phase,
            f"({inflation.value}, {growth.value}) -> {got.name}, want {phase.name}",
        )
    report_line(3, "rule-based predictor truth table (all 4 combinations)", failures)


# --- criterion 4: analytic gradients vs central differences ------------------


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def test_criterion_4_gradient_checks():
    failures: list[str] = []
    h = 1e-5
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, d = 8, 4
        X = rng.standard_normal((n, d))
        Y = _one_hot(rng.integers(1, 5, n))
        W = rng.standard_normal((4, d)) * 0.6
        b = rng.standard_normal(4) * 0.5
        l2 = float(rng.uniform(0.0, 0.05))
        _, gw, gb = mlr_loss_and_grads(W, b, X, Y, l2)
        num_w = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += h
            Wm[idx] -= h
            num_w[idx] = (
                mlr_loss_and_grads(Wp, b, X, Y, l2)[0]
                - mlr_loss_and_grads(Wm, b, X, Y, l2)[0]
            ) / (2 * h)
        num_b = np.zeros_like(gb)
        for i in range(4):
            bp, bm = b.copy(), b.copy()
            bp[i] += h
            bm[i] -= h
            num_b[i] = (
                mlr_loss_and_grads(W, bp, X, Y, l2)[0]
                - mlr_loss_and_grads(W, bm, X, Y, l2)[0]
            ) / (2 * h)
        err = max(_rel_err(gw, num_w), _rel_err(gb, num_b))
        check(failures, err < 1e-4, f"MLR seed {seed}: rel err {err:.2e}")

    for seed in range(20):
        rng = np.random.default_rng(10_000 + seed)
        n, d = 6, 3
        X = rng.standard_normal((n, d))
        Y = _one_hot(rng.integers(1, 5, n))
        sizes = [d, 5, 4, 4]
        weights = [rng.standard_normal((a, c)) * 0.7 for a, c in zip(sizes, sizes[1:])]
        biases = [rng.standard_normal(c) * 0.5 for c in sizes[1:]]
        mask = (rng.random((n, 4)) >= 0.2) / 0.8 if seed % 2 else None
        l2 = float(rng.uniform(0.0, 0.05))
        _, gws, gbs = mlp_loss_and_grads(weights, biases, X, Y, l2, mask)
        worst = 0.0
        for k in range(len(weights)):
            num = np.zeros_like(weights[k])
            for idx in np.ndindex(weights[k].shape):
                Wp = [w.copy() for w in weights]
                Wm = [w.copy() for w in weights]
                Wp[k][idx] += h
                Wm[k][idx] -= h
                num[idx] = (
                    mlp_loss_and_grads(Wp, biases, X, Y, l2, mask)[0]
                    - mlp_loss_and_grads(Wm, biases, X, Y, l2, mask)[0]
                ) / (2 * h)
            worst = max(worst, _rel_err(gws[k], num))
            num_b = np.zeros_like(biases[k])
            for idx in np.ndindex(biases[k].shape):
                Bp = [x.copy() for x in biases]
                Bm = [x.copy() for x in biases]
                Bp[k][idx] += h
                Bm[k][idx] -= h
                num_b[idx] = (
                    mlp_loss_and_grads(weights, Bp, X, Y, l2, mask)[0]
                    - mlp_loss_and_grads(weights, Bm, X, Y, l2, mask)[0]
                ) / (2 * h)
            worst = max(worst, _rel_err(gbs[k], num_b))
        check(failures, worst < 1e-4, f"MLP seed {seed}: rel err {worst:.2e}")
    report_line(4, "MLR and MLP gradients vs central differences (20 seeds each)", failures)


# --- criterion 5: PCA against an independent eigen oracle ---------------------


def _charpoly_coefficients(C: np.ndarray) -> list[float]:
    """Monic char-poly coefficients of det(lam*I - C), Faddeev-LeVerrier."""
    n = C.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(C)
    for k in range(1, n + 1):
        M = C @ M + coeffs[-1] * np.eye(n)
        coeffs.append(float(-np.trace(C @ M) / k))
    return coeffs


def _poly(coeffs: list[float], lam: float) -> float:
    out = 0.0
    for c in coeffs:
        out = out * lam + c
    return out


def _largest_eigenpair_bruteforce(C: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue by char-poly root search, eigenvector by inverse
    iteration (LU solves only; independent of power iteration and LAPACK eig)."""
    coeffs = _charpoly_coefficients(C)
    hi = float(np.trace(C)) + 1.0
    step = hi / 4000.0
    lam = hi
    while _poly(coeffs, lam) > 0.0:
        lam -= step
    lo, hi_b = lam, lam + step
    for _ in range(200):
        mid = 0.5 * (lo + hi_b)
        if _poly(coeffs, mid) > 0.0:
            hi_b = mid
        else:
            lo = mid
    eigenvalue = 0.5 * (lo + hi_b)
    v = np.ones(C.shape[0])
    v /= np.linalg.norm(v)
    shifted = C - (eigenvalue + 1e-9) * np.eye(C.shape[0])
    for _ in range(50):
        v = np.linalg.solve(shifted, v)
        v /= np.linalg.norm(v)
    return eigenvalue, v


def test_criterion_5_pca_oracle():
    failures: list[str] = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((20, 5)) * rng.uniform(0.5, 3.0, 5)
        result = pca_first_component(X)
        centered = X - X.mean(axis=0)
        cov = centered.T @ centered / X.shape[0]
        _, v = _largest_eigenpair_bruteforce(cov)
        ref = int(np.argmax(np.abs(v)))
        got = result.loadings if result.loadings[ref] * v[ref] > 0 else -result.loadings
        err = float(np.abs(got - v).max())
        check(failures, err < 1e-8, f"seed {seed}: loading mismatch {err:.2e}")

    rng = np.random.default_rng(77)
    panel = make_panel({f"s{j}": rng.standard_normal(90).cumsum() for j in range(4)})
    full = expanding_pca_index(panel, "growth", 60)
    from cyclecast.preprocess import Panel

    for cut in (60, 75, 90):
        truncated = Panel(
            months=panel.months[:cut],
            series_ids=panel.series_ids,
            categories=panel.categories,
            values=panel.values[:cut],
            fills=panel.fills,
            region=panel.region,
        )
        shorter = expanding_pca_index(truncated, "growth", 60)
        for m, value in zip(shorter.months, shorter.values):
            check(
                failures,
                abs(full.value_at(m) - value) < 1e-12,
                f"expanding index not causal at {m} (cut {cut})",
            )
    report_line(5, "PCA loadings vs char-poly brute force; expanding index causality", failures)


# --- criterion 6: preprocessing oracles ---------------------------------------


def test_criterion_6_preprocessing_oracles():
    failures: list[str] = []
    rng = np.random.default_rng(4)
    for _ in range(25):
        x = rng.standard_normal(int(rng.integers(3, 200))) * rng.uniform(0.01, 50)
        nw = newey_west_variance(x, 0)
        var = float(np.var(x))
        check(failures, abs(nw - var) <= 1e-12 * abs(var), "NW lag-0 != population variance")

        z = np.array(zscore(make_series(x), "full").values)
        check(failures, abs(z.mean()) < 1e-9, "zscore(full) mean out of tolerance")
        check(failures, abs(z.var() - 1.0) < 1e-9, "zscore(full) variance out of tolerance")

        rebuilt = np.concatenate([[x[0]], x[0] + np.cumsum(np.diff(x))])
        check(failures, np.abs(rebuilt - x).max() < 1e-12, "diff/cumsum round trip failed")
    report_line(6, "Newey-West lag-0, zscore moments, diff round-trip oracles", failures)


# --- criterion 7: evaluation laws ----------------------------------------------


def test_criterion_7_evaluation_laws():
    failures: list[str] = []
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        n = int(rng.integers(2, 40))
        dist = rng.random((n, 4)) + 1e-9
        dist /= dist.sum(axis=1, keepdims=True)
        truth = rng.integers(1, 5, n)
        top = [topk_accuracy(dist, truth, k) for k in (1, 2, 3, 4)]
        check(failures, top[1] >= top[0], f"trial {trial}: top2 < top1")
        check(failures, top[3] == 1.0, f"trial {trial}: top4 != 1")
        preds = argmax_predictions(dist)
        from cyclecast.evaluation import confusion_matrix, f_scores as fs

        cm = confusion_matrix(preds, truth)
        arr = cm.as_array()
        check(
            failures,
            arr.trace() / arr.sum() == top[0],
            f"trial {trial}: diagonal/total != top1",
        )
        scores = fs(cm)
        check(
            failures,
            abs(scores.macro - np.mean(scores.per_class)) <= 1e-12,
            f"trial {trial}: macro != mean per-class",
        )
        check(
            failures,
            collapse_two_label(preds, truth) >= accuracy(preds, truth),
            f"trial {trial}: two-label collapse below four-label accuracy",
        )
        if failures:
            break
    report_line(7, "evaluation laws on 1000 seeded random prediction sets", failures)


# --- criteria 8-9: end-to-end synthetic run and determinism --------------------


def _e2e_config(base: Path) -> Path:
    doc = {
        "region": "us",
        "seed": 0,
        "window": 4,
        "model": "mlr",
        "split": {
            "train_end": "1996-12",
            "validation_end": "2003-04",
            "test_end": "2019-12",
        },
        "paths": {"data_dir": str(base / "data"), "out_dir": str(base / "out")},
        "preprocess": {"stationarity": "none", "zscore_mode": "full"},
        "synth": {
            "months": 600,
            "n_series": 20,
            "noise_sigma": 0.05,
            "mean_durations": [28.0, 40.0, 22.0, 30.0],
            "start": "1970-01",
        },
    }
    path = base / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def _run_e2e(base: Path) -> dict:
    """Full pipeline; returns reports plus the bytes of every model/report file."""
    base.mkdir(parents=True, exist_ok=True)
    config = _e2e_config(base)
    out = base / "out"

    def run(*argv):
        assert cli_main(["--config", str(config), *argv]) == EXIT_OK, f"command failed: {argv}"

    run("synth")
    run("preprocess")
    run("build-indices")
    run("features")
    run("train")
    mlr_model = (out / "model.json").read_bytes()
    run("--format", "json", "evaluate")
    mlr_report_bytes = (out / "report.json").read_bytes()
    mlr_report = report_from_json(mlr_report_bytes.decode())
    run("train", "--model", "rbbcp")
    rbbcp_model = (out / "model.json").read_bytes()
    run("--format", "json", "evaluate")
    rbbcp_report_bytes = (out / "report.json").read_bytes()
    rbbcp_report = report_from_json(rbbcp_report_bytes.decode())
    return {
        "mlr_report": mlr_report,
        "rbbcp_report": rbbcp_report,
        "bytes": {
            "mlr_model": mlr_model,
            "mlr_report": mlr_report_bytes,
            "rbbcp_model": rbbcp_model,
            "rbbcp_report": rbbcp_report_bytes,
        },
    }


def test_criterion_8_end_to_end_synthetic(tmp_path):
    failures: list[str] = []
    start = time.perf_counter()
    result = _run_e2e(tmp_path / "run")
    elapsed = time.perf_counter() - start
    mlr = result["mlr_report"]
    rbbcp = result["rbbcp_report"]
    check(failures, mlr.top1 >= 0.90, f"MLR top1 {mlr.top1:.4f} < 0.90")
    check(failures, mlr.top2 >= 0.98, f"MLR top2 {mlr.top2:.4f} < 0.98")
    check(failures, rbbcp.top1 >= 0.80, f"RBBCP top1 {rbbcp.top1:.4f} < 0.80")
    check(failures, elapsed < 60.0, f"runtime {elapsed:.1f}s >= 60s")
    report_line(
        8,
        f"end-to-end synthetic run (MLR top1 {mlr.top1:.3f}, top2 {mlr.top2:.3f}, "
        f"RBBCP top1 {rbbcp.top1:.3f}, {elapsed:.1f}s)",
        failures,
    )


def test_criterion_9_determinism(tmp_path):
    failures: list[str] = []
    first = _run_e2e(tmp_path / "one")
    second = _run_e2e(tmp_path / "two")
    for name, blob in first["bytes"].items():
        check(failures, blob == second["bytes"][name], f"{name} differs between runs")
    report_line(9, "identical seeds give byte-identical model files and reports", failures)
