"""Acceptance runs A1-A9. Each test logs one PASS/FAIL line through ``record``.

The desk-scale settings come from the CLI's ``desk`` preset so that the
tests and ``swarmimpute --scale desk`` train the same models.
"""
import struct
import time
from dataclasses import replace

import numpy as np
import pytest

from swarmimpute import cli, modelstore
from swarmimpute.dataset import (
    RawImageSet,
    idx_image_bytes,
    idx_label_bytes,
    inject_mcar,
    load_idx_images,
    load_idx_labels,
    make_balanced_minibatches,
)
from swarmimpute.deepnet import (
    FineTuneConfig,
    Layer,
    Network,
    backprop,
    build_mlp_ae,
    fine_tune,
    flatten_grads,
    get_params,
    mse_loss,
    set_params,
    train_conjugate_gradient,
    unroll,
)
from swarmimpute.errors import BadMagic, ChecksumMismatch, TruncatedFile
from swarmimpute.evaluate import aggregate, mean_imputation_baseline
from swarmimpute.firefly import FireflyConfig, optimize
from swarmimpute.imputer import ImputationTask, impute_dataset, impute_sample
from swarmimpute.rbm import CdConfig, Rbm, cd_k_gradient, exact_gradient, exact_log_likelihood, train_stack

DESK = {**cli.DEFAULTS, **cli.PRESETS["desk"]}
TRAIN_COUNT = 2000
TEST_COUNT = 500
A6_SAMPLES = 100
A7_SAMPLES = 50
MCAR_SEED = 7


def tiny_rbms(count=10, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        rbm = Rbm(rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 3))
        out.append((rbm, (rng.random(4) < 0.5).astype(float)))
    return out


def fd_log_likelihood_gradient(rbm, v0, h=1e-5):
    n, m = rbm.W.shape
    theta = np.concatenate([rbm.W.ravel(), rbm.b, rbm.c])

    def ll(t):
        return exact_log_likelihood(Rbm(t[:n * m].reshape(n, m), t[n * m:n * m + m], t[n * m + m:]), v0)

    grad = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        grad[i] = (ll(theta + e) - ll(theta - e)) / (2 * h)
    return grad


def test_a1_exact_gradient_oracle(record):
    start = time.perf_counter()
    worst = 0.0
    for rbm, v0 in tiny_rbms():
        worst = max(worst, np.max(np.abs(exact_gradient(rbm, v0).flat() - fd_log_likelihood_gradient(rbm, v0))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 5
    record("A1", ok, f"max |exact - finite difference| = {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_a2_cd_agrees_with_exact_gradient(record):
    start = time.perf_counter()
    cosines = []
    for i, (rbm, v0) in enumerate(tiny_rbms()):
        chains = np.repeat(v0[None, :], 100_000, axis=0)
        mean_cd = cd_k_gradient(rbm, chains, 1, np.random.default_rng(i)).flat()
        exact = exact_gradient(rbm, v0).flat()
        cosines.append(mean_cd @ exact / (np.linalg.norm(mean_cd) * np.linalg.norm(exact)))
    elapsed = time.perf_counter() - start
    ok = min(cosines) > 0.8 and elapsed < 60
    record("A2", ok, f"min cosine {min(cosines):.4f} over 10 RBMs, {elapsed:.2f}s")
    assert ok


def test_a3_backprop_matches_finite_differences(record):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        depth = int(rng.integers(1, 5))
        width = int(rng.integers(1, 9))
        widths = [width] + [int(w) for w in rng.integers(1, 9, depth - 1)] + [width]
        net = Network([Layer(rng.normal(0, 1, (o, i)), rng.normal(0, 0.5, o))
                       for i, o in zip(widths[:-1], widths[1:])])
        batch = rng.random((4, width))
        analytic = flatten_grads(backprop(net, batch))
        theta = get_params(net)
        numeric = np.zeros_like(theta)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = 1e-5
            numeric[k] = (mse_loss(set_params(net, theta + e), batch)
                          - mse_loss(set_params(net, theta - e), batch)) / 2e-5
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10
    record("A3", ok, f"max relative error {worst:.2e} over 10 nets, {elapsed:.2f}s")
    assert ok


# -- desk-scale models shared by A4, A6 and A7 ----------------------------------------

@pytest.fixture(scope="module")
def desk_data(mnist):
    train, train_labels, test, _ = mnist
    return train[:TRAIN_COUNT], train_labels[:TRAIN_COUNT], test[:TEST_COUNT]


@pytest.fixture(scope="module")
def deep_run(desk_data):
    train, labels, _ = desk_data
    start = time.perf_counter()
    batches = make_balanced_minibatches(train, labels, DESK["batch_count"], DESK["batch_seed"])
    layers = [int(s) for s in DESK["layers"].split(",")]
    stack = train_stack(batches, layers, CdConfig(epochs=DESK["cd_epochs"], seed=DESK["cd_seed"]))
    losses = []
    net = fine_tune(unroll(stack), batches,
                    FineTuneConfig(epochs=DESK["finetune_epochs"], learning_rate=DESK["finetune_learning_rate"],
                                   momentum=DESK["finetune_momentum"], seed=DESK["finetune_seed"]),
                    callback=lambda epoch, loss: losses.append(loss))
    return net, stack, np.array(losses), time.perf_counter() - start


@pytest.fixture(scope="module")
def mlp_run(desk_data):
    train, _, _ = desk_data
    start = time.perf_counter()
    net = build_mlp_ae(train.shape[1], DESK["mlp_hidden"], DESK["mlp_seed"])
    net = train_conjugate_gradient(net, train, DESK["mlp_epochs"])
    return net, time.perf_counter() - start


def desk_fa(**overrides):
    cfg = FireflyConfig(iterations=DESK["fa_iterations"], alpha=DESK["fa_alpha"], beta0=DESK["fa_beta0"],
                        gamma=DESK["fa_gamma"], alpha_final_ratio=DESK["fa_alpha_final_ratio"],
                        seed=DESK["fa_seed"])
    return replace(cfg, **overrides)


def test_a4_scaled_pipeline(record, deep_run, desk_data):
    net, _, losses, elapsed = deep_run
    held_out = mse_loss(net, desk_data[2])
    trailing = np.convolve(losses, np.ones(10) / 10, mode="valid")
    monitored = bool(np.all(trailing[10:] <= trailing[:-10] + 1e-6))
    ok = held_out < 0.05 and elapsed < 15 * 60 and monitored
    record("A4", ok, f"held-out MSE {held_out:.5f} on {TEST_COUNT} images, final train loss {losses[-1]:.5f}, "
                     f"trailing-mean loss monotone: {monitored}, {elapsed:.0f}s")
    assert ok


def test_a5_firefly_sphere(record):
    start = time.perf_counter()
    best, monotone = [], True
    for seed in range(10):
        res = optimize(lambda x: np.sum(x ** 2, axis=1), 10,
                       FireflyConfig(population_size=20, iterations=1000, alpha=0.25, beta0=0.2, gamma=1.0,
                                     lower=-5.0, upper=5.0, seed=seed))
        best.append(res.best_cost)
        monotone &= bool(np.all(np.diff(res.trace) <= 0))
    elapsed = time.perf_counter() - start
    hits = sum(b < 1e-2 for b in best)
    ok = hits >= 9 and monotone and elapsed < 30
    record("A5", ok, f"{hits}/10 seeds below 1e-2 (worst {max(best):.2e}), traces monotone: {monotone}, "
                     f"{elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def a6_reports(deep_run, mlp_run, desk_data):
    train, _, test = desk_data
    masked = inject_mcar(test[:A6_SAMPLES], 0.1, MCAR_SEED)
    start = time.perf_counter()
    deep = impute_dataset(deep_run[0], masked, desk_fa(), method="deep_ae+fa")
    mlp = impute_dataset(mlp_run[0], masked, desk_fa(), method="mlp_ae+fa")
    mean = mean_imputation_baseline(train, masked)
    fa_seconds = time.perf_counter() - start
    return masked, deep, mlp, mean, fa_seconds + mlp_run[1]


def test_a6_imputation_ordering(record, a6_reports):
    _, deep, mlp, mean, elapsed = a6_reports
    d, m, b = (aggregate(r).mean_squared_error for r in (deep, mlp, mean))
    ok = d < m and d < b and elapsed < 30 * 60
    record("A6", ok, f"MSE per missing pixel: deep+FA {d:.5f}, mlp+FA {m:.5f}, mean {b:.5f}; "
                     f"deep<mlp {d < m}, deep<mean {d < b}; {elapsed:.0f}s")
    assert ok


def test_a7_tolerance_trades_accuracy_for_time(record, deep_run, a6_reports):
    net = deep_run[0]
    masked, deep_none = a6_reports[0], a6_reports[1]
    samples = list(range(A7_SAMPLES))
    runs = {None: ([s for i, s in deep_none.per_sample_times if i in samples],
                   [o for i, o in deep_none.per_sample_objectives if i in samples])}
    for tol in (0.05, 0.1):
        times, objectives = [], []
        for i in samples:
            out = impute_sample(net, ImputationTask.from_masked(masked, i), desk_fa(seed=DESK["fa_seed"] + i,
                                                                                  tolerance=tol))
            times.append(out.elapsed)
            objectives.append(out.final_objective)
        runs[tol] = (times, objectives)
    t = {k: float(np.mean(v[0])) for k, v in runs.items()}
    o = {k: float(np.mean(v[1])) for k, v in runs.items()}
    ok = t[0.05] <= t[None] and t[0.1] <= t[0.05] and o[None] <= o[0.05] <= o[0.1]
    record("A7", ok, f"mean seconds none/0.05/0.1 = {t[None]:.3f}/{t[0.05]:.4f}/{t[0.1]:.4f}; "
                     f"mean objective {o[None]:.4f}/{o[0.05]:.4f}/{o[0.1]:.4f} over {A7_SAMPLES} samples")
    assert ok


def test_a8_cli_determinism(record, tmp_path, mnist_dir, deep_run):
    a, b = tmp_path / "a", tmp_path / "b"
    model = tmp_path / "deep.model"
    modelstore.save(deep_run[0], model)

    def run(*argv, out):
        return cli.main([str(x) for x in argv] + ["--out", str(out)])

    codes = [
        run("ingest", "--images", mnist_dir / "mnist5k-train-images-idx3-ubyte",
            "--labels", mnist_dir / "mnist5k-train-labels-idx1-ubyte", "--limit", TRAIN_COUNT, out=a),
        run("ingest", "--images", mnist_dir / "mnist5k-test-images-idx3-ubyte",
            "--labels", mnist_dir / "mnist5k-test-labels-idx1-ubyte", "--name", "test", "--limit", 10, out=a),
        run("pretrain", "--train", a / "train", "--scale", "desk", out=a),
        run("corrupt", "--test", a / "test", "--samples", 3, "--seed", MCAR_SEED, "--scale", "desk", out=a),
        run("impute", "--model", model, "--masked", a / "masked", "--scale", "desk", out=a),
    ]
    # the second run takes every setting from the first run's manifests
    codes += [
        run("pretrain", "--config", a / "run-manifest-pretrain.txt", out=b),
        run("corrupt", "--config", a / "run-manifest-corrupt.txt", out=b),
        run("impute", "--config", a / "run-manifest-impute-deep_ae+fa.txt", "--masked", b / "masked", out=b),
    ]
    compared = ["rbm-0.model", "rbm-1.model", "masked/mask.csv", "masked/truth.csv", "masked/masked.meta",
                "deep_ae+fa-values.csv", "deep_ae+fa-objectives.csv"]
    same = {name: (a / name).exists() and (a / name).read_bytes() == (b / name).read_bytes()
            for name in compared}
    ok = all(c == 0 for c in codes) and all(same.values())
    record("A8", ok, f"exit codes {codes}; identical: {sum(same.values())}/{len(same)} artifacts")
    assert ok


def test_a9_formats(record, tmp_path, deep_run):
    checks = {}
    raw = RawImageSet(3, 2, 2, np.arange(12, dtype=np.uint8).reshape(3, 2, 2) * 21)
    (tmp_path / "img").write_bytes(idx_image_bytes(raw))
    back = load_idx_images(tmp_path / "img")
    checks["idx images round trip"] = np.array_equal(back.pixels, raw.pixels) and (back.rows, back.cols) == (2, 2)
    labels = np.array([0, 9, 5], dtype=np.uint8)
    (tmp_path / "lbl").write_bytes(idx_label_bytes(labels))
    checks["idx labels round trip"] = np.array_equal(load_idx_labels(tmp_path / "lbl"), labels)

    def rejects(exc, path):
        try:
            load_idx_images(path)
        except exc:
            return True
        return False

    (tmp_path / "magic").write_bytes(struct.pack(">4I", 0x801, 1, 1, 1) + b"\x00")
    checks["bad magic rejected"] = rejects(BadMagic, tmp_path / "magic")
    (tmp_path / "short").write_bytes(idx_image_bytes(raw)[:-1])
    checks["truncated file rejected"] = rejects(TruncatedFile, tmp_path / "short")

    net, stack = deep_run[0], deep_run[1]
    modelstore.save(net, tmp_path / "deep.model")
    loaded, _ = modelstore.load(tmp_path / "deep.model")
    checks["model identity"] = np.array_equal(get_params(loaded), get_params(net))
    modelstore.save(stack, tmp_path / "stack.model")
    loaded_stack, _ = modelstore.load(tmp_path / "stack.model")
    checks["stack identity"] = all(np.array_equal(x.W, y.W) and np.array_equal(x.c, y.c)
                                   for x, y in zip(stack, loaded_stack))
    data = (tmp_path / "deep.model").read_bytes()
    rng = np.random.default_rng(0)
    start = data.index(b"\n", data.index(b"version=")) + 1
    flagged = 0
    positions = rng.choice(np.arange(start, len(data)), size=25, replace=False)
    for pos in positions:
        bad = bytearray(data)
        bad[pos] ^= 0x01
        try:
            modelstore.loads(bytes(bad))
        except ChecksumMismatch:
            flagged += 1
    checks["single-byte corruption rejected"] = flagged == len(positions)
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record("A9", ok, f"{sum(checks.values())}/{len(checks)} format checks" + (f"; failed: {failed}" if failed else ""))
    assert ok
