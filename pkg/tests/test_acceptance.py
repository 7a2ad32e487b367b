"""Acceptance gate: eight numbered end-to-end criteria.

Each test prints one ``ACCEPTANCE <n>: PASS`` (or FAIL) line; run with
``pytest -s tests/test_acceptance.py`` to see them. Criteria 2, 3, and 6
are implemented as pure functions of pinned seeds that fold everything
they produce into a sha256 digest, so criterion 7 can re-run them from
scratch and demand bit-identical results.
"""
import hashlib
import os
import shutil
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from patchaug.attack import AttackConfig, fgsm_attack_batch
from patchaug.augment import (
    AugmentConfig,
    LabeledExample,
    PatchMode,
    augment_example,
    compute_lambda,
    mix_labels,
)
from patchaug.dataset import (
    Dataset,
    export_png,
    import_png,
    load_cifar10,
    make_synthetic,
    read_augmented,
    write_augmented,
    write_cifar10_archive,
)
from patchaug.experiments import run_attack, run_report, run_train
from patchaug.model import (
    PRED_FLOOR,
    TrainConfig,
    forward_batch,
    grad_input_batch,
    grad_params,
    init_params,
)
from patchaug.pipeline import augment_batch, augment_stream, epoch_batches, new_epoch
from patchaug.rng import RandomStream

_cache = {}


def _cached(key, fn):
    if key not in _cache:
        _cache[key] = fn()
    return _cache[key]


@contextmanager
def _verdict(n, label):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {n} ({label}): FAIL")
        raise
    print(f"\nACCEPTANCE {n} ({label}): PASS")


# ------------------------------------------------------- criterion 1


def test_criterion_1_label_algebra_exactness():
    with _verdict(1, "label algebra exactness"):
        t0 = time.perf_counter()
        assert compute_lambda(200 * 200, 400 * 400) == 0.25
        mixed = mix_labels(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.25)
        assert np.array_equal(mixed, np.array([0.75, 0.25]))
        mixed = mix_labels(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.15)
        assert np.array_equal(mixed, np.array([0.85, 0.15]))
        assert time.perf_counter() - t0 < 1.0


# ------------------------------------------------------- criterion 2

_DIMS = [(32, 32, 3), (17, 23, 1), (8, 8, 3), (1, 1, 3), (5, 40, 2), (40, 5, 1)]


def _case_config(i):
    if i % 7 == 3:
        return AugmentConfig(mode=PatchMode.FIXED_AREA,
                             area_frac=0.25 if i % 2 else 0.5)
    return AugmentConfig(mode=PatchMode.RANDOM_FRACTION, min_frac=0.3, max_frac=0.8)


def _criterion2_digest(cases=100_000):
    """Randomized augmentation sweep; returns a digest of every output.

    Host pixels live in [0, 0.41), donor pixels in [0.6, 1.0) with channel
    values that encode the pixel's own (row, col), so the two sources are
    disjoint and the placed block identifies exactly where it came from.
    """
    donors = {}
    for h, w, c in _DIMS:
        flat = np.arange(h * w, dtype=np.float64).reshape(h, w)
        img = np.repeat((0.6 + 0.4 * flat / (h * w))[:, :, None], c, axis=2)
        donors[(h, w, c)] = np.ascontiguousarray(img.astype(np.float32))
    host_label = np.array([1.0, 0.0])
    donor_label = np.array([0.0, 1.0])
    root = RandomStream(424242)
    digest = hashlib.sha256()
    for i in range(cases):
        h, w, c = _DIMS[i % len(_DIMS)]
        content = np.random.default_rng(900_000_000 + i)
        host_img = (content.random((h, w, c)) * 0.4).astype(np.float32)
        donor_img = donors[(h, w, c)]
        out = augment_example(
            LabeledExample(host_img, host_label),
            LabeledExample(donor_img, donor_label),
            root.child(i),
            _case_config(i),
        )

        assert abs(out.label.sum() - 1.0) <= 1e-9

        # The changed pixels must form one solid rectangle inside the image
        # (containment), because sources never share values.
        mask = np.any(out.image != host_img, axis=2)
        assert mask.any()
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        y0, y1, x0, x1 = rows[0], rows[-1], cols[0], cols[-1]
        ph, pw = int(y1 - y0 + 1), int(x1 - x0 + 1)
        assert int(mask.sum()) == ph * pw
        assert y1 < h and x1 < w

        # The donor weight in the mixed label is exactly the area fraction
        # of the rectangle actually placed.
        assert out.label[1] == compute_lambda(ph * pw, h * w)
        assert out.label[0] == 1.0 - out.label[1]

        # Provenance: the block is a verbatim donor rectangle whose origin
        # is decoded from its own top-left value; everything else is host.
        v00 = float(out.image[y0, x0, 0])
        src = int(round((v00 - 0.6) / 0.4 * (h * w)))
        ey, ex = divmod(src, w)
        assert np.array_equal(out.image[y0:y1 + 1, x0:x1 + 1],
                              donor_img[ey:ey + ph, ex:ex + pw])

        digest.update(out.label.tobytes())
        if i % 100 == 0:
            digest.update(out.image.tobytes())
    return digest.hexdigest()


def test_criterion_2_randomized_property_sweep():
    with _verdict(2, "randomized property sweep, 1e5 cases"):
        t0 = time.perf_counter()
        digest = _cached("c2", _criterion2_digest)
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        print(f"  100000 cases in {elapsed:.1f}s, digest {digest[:16]}")


# ------------------------------------------------------- criterion 3


def _criterion3_digest():
    n, batch_size, seed = 1000, 32, 31337
    data = make_synthetic(n, num_classes=4, height=8, width=8, seed=77, partition=0)
    digest = hashlib.sha256()
    for p in (0.0, 0.5, 1.0):
        config = AugmentConfig(probability=p, min_frac=0.3, max_frac=0.8)
        plan = new_epoch(data, batch_size, epoch=0, seed=seed)
        rng = augment_stream(seed, 0)
        seen = []
        changed = set()
        for batch in epoch_batches(data, plan):
            out = augment_batch(batch, data, config, rng)
            for row, idx in enumerate(out.indices):
                seen.append(int(idx))
                if not np.array_equal(out.images[row], data.images[idx]):
                    changed.add(int(idx))
            digest.update(out.images.tobytes())
            digest.update(out.labels.tobytes())
            digest.update(np.asarray(out.indices, dtype=np.int64).tobytes())
        # every index exactly once, at any augmentation probability
        assert sorted(seen) == list(range(n))
        # the set of modified examples matches the gate draws exactly
        expected = {
            i for i in range(n)
            if augment_stream(seed, 0).child(i).uniform() < p
        }
        assert changed == expected
        if p == 0.0:
            assert not changed
        if p == 1.0:
            assert changed == set(range(n))
    return digest.hexdigest()


def test_criterion_3_epoch_exactly_once():
    with _verdict(3, "exactly-once epochs at p in {0, 0.5, 1}"):
        t0 = time.perf_counter()
        digest = _cached("c3", _criterion3_digest)
        assert time.perf_counter() - t0 < 5.0
        print(f"  digest {digest[:16]}")


# ------------------------------------------------------- criterion 4


def _rel_err(a, f):
    if abs(a) < 1e-12 and abs(f) < 1e-12:
        return 0.0
    return abs(a - f) / max(abs(a), abs(f))


def test_criterion_4_gradient_oracle():
    with _verdict(4, "finite-difference gradient oracle"):
        t0 = time.perf_counter()
        step = 1e-5
        shape, k, hidden, b = (6, 5, 3), 4, 16, 8
        worst = 0.0
        for arch in ("linear", "mlp"):
            gen = np.random.default_rng(505 if arch == "linear" else 606)
            params = init_params(arch, shape, k, seed=9, hidden=hidden)
            for arr in (*params.weights, *params.biases):
                arr[...] = gen.normal(0.0, 0.5, size=arr.shape)
            x = gen.random((b, *shape))
            y = np.eye(k)[gen.integers(0, k, size=b)]
            assert forward_batch(params, x).min() > 1e-9  # log floor inactive
            if arch == "mlp":
                z1 = x.reshape(b, -1) @ params.weights[0] + params.biases[0]
                assert np.abs(z1).min() > 1e-3  # clear of relu kinks

            def mean_loss():
                p = forward_batch(params, x)
                return float(
                    (-(y * np.log(np.maximum(p, PRED_FLOOR))).sum(axis=1)).mean()
                )

            def example_loss(e):
                p = forward_batch(params, x[e])
                return float(-(y[e] * np.log(np.maximum(p, PRED_FLOOR))).sum())

            grad_w, grad_b = grad_params(params, x, y)
            analytic = grad_w + grad_b
            arrays = params.weights + params.biases
            for _ in range(100):
                a = int(gen.integers(0, len(arrays)))
                j = int(gen.integers(0, arrays[a].size))
                keep = arrays[a].flat[j]
                arrays[a].flat[j] = keep + step
                up = mean_loss()
                arrays[a].flat[j] = keep - step
                down = mean_loss()
                arrays[a].flat[j] = keep
                worst = max(worst, _rel_err(analytic[a].flat[j],
                                            (up - down) / (2 * step)))

            grad_x = grad_input_batch(params, x, y)
            flat = x.reshape(b, -1)
            for _ in range(100):
                e = int(gen.integers(0, b))
                j = int(gen.integers(0, flat.shape[1]))
                keep = flat[e, j]
                flat[e, j] = keep + step
                up = example_loss(e)
                flat[e, j] = keep - step
                down = example_loss(e)
                flat[e, j] = keep
                worst = max(worst, _rel_err(grad_x[e].flat[j],
                                            (up - down) / (2 * step)))
        assert worst < 1e-4
        assert time.perf_counter() - t0 < 30.0
        print(f"  max relative error {worst:.3e} over 400 coordinates")


# ------------------------------------------------------- criterion 5


def _per_example_ce(params, images, labels):
    probs = forward_batch(params, images)
    return -(labels * np.log(np.maximum(probs, PRED_FLOOR))).sum(axis=1)


def test_criterion_5_fgsm_contracts():
    with _verdict(5, "FGSM contracts over 1000 cases"):
        t0 = time.perf_counter()
        shape, k = (6, 5, 3), 4
        eps_cycle = (0.001, 0.01, 0.03, 0.1, 0.3)
        gen = np.random.default_rng(1789)
        norm_cases = 0
        for round_idx in range(10):
            arch = "linear" if round_idx % 2 == 0 else "mlp"
            params = init_params(arch, shape, k, seed=round_idx, hidden=12)
            for arr in (*params.weights, *params.biases):
                arr[...] = gen.normal(0.0, 0.4, size=arr.shape)
            x = gen.random((100, *shape))
            y = np.eye(k)[gen.integers(0, k, size=100)]
            eps = eps_cycle[round_idx % len(eps_cycle)]

            # zero budget is the identity
            adv0 = fgsm_attack_batch(params, x, y, AttackConfig(epsilon=0.0))
            assert np.array_equal(adv0, x)

            # max-norm bound holds, clipped output stays in range
            adv = fgsm_attack_batch(params, x, y, AttackConfig(epsilon=eps))
            assert np.abs(adv - x).max() <= eps * (1.0 + 1e-12)
            assert adv.min() >= 0.0 and adv.max() <= 1.0

            # unclipped, every pixel moves by exactly 0 or eps
            raw = fgsm_attack_batch(params, x, y,
                                    AttackConfig(epsilon=eps, clip=False))
            d = np.abs(raw - x)
            tol = 1e-15 + eps * 1e-12
            assert np.all((d <= tol) | (np.abs(d - eps) <= tol))
            norm_cases += 100

        # linear model, unclipped: the loss never decreases
        convex_cases = 0
        for round_idx in range(10):
            params = init_params("linear", shape, k)
            for arr in (*params.weights, *params.biases):
                arr[...] = gen.normal(0.0, 0.4, size=arr.shape)
            x = gen.random((100, *shape))
            y = np.eye(k)[gen.integers(0, k, size=100)]
            eps = eps_cycle[round_idx % len(eps_cycle)]
            raw = fgsm_attack_batch(params, x, y,
                                    AttackConfig(epsilon=eps, clip=False))
            before = _per_example_ce(params, x, y)
            after = _per_example_ce(params, raw, y)
            assert np.all(after >= before - 1e-12 * np.maximum(1.0, before))
            convex_cases += 100
        assert norm_cases == 1000 and convex_cases == 1000
        assert time.perf_counter() - t0 < 30.0


# ------------------------------------------------------- criterion 6


def _criterion6():
    """Pinned desk-scale robustness run; returns (digest, results).

    Everything happens under a throwaway working directory with relative
    paths only, so the bytes written are a pure function of the seeds.
    """
    base = Path(tempfile.mkdtemp(prefix="acc6_"))
    cwd = os.getcwd()
    try:
        os.chdir(base)
        train_full = make_synthetic(5000, num_classes=2, seed=1234, partition=0)
        test_full = make_synthetic(1000, num_classes=2, seed=1234, partition=1)
        data_dir = Path("data")
        data_dir.mkdir()
        for b in range(5):
            write_cifar10_archive(
                train_full.subset(range(b * 1000, (b + 1) * 1000)),
                data_dir / f"data_batch_{b + 1}.bin",
            )
        write_cifar10_archive(test_full, data_dir / "test_batch.bin")

        results = {}
        for mode, out_dir in (("none", "baseline"), ("patch", "augmented")):
            config = TrainConfig(
                epochs=20, batch_size=64, base_lr=0.05, seed=7, arch="linear",
                augment=AugmentConfig(probability=0.9, min_frac=0.3,
                                      max_frac=0.8)
                if mode == "patch" else None,
            )
            run_train("cifar10", "data", out_dir, mode, config)
            attack = run_attack(
                "cifar10", "data", f"{out_dir}/model.ckpt",
                epsilons=[0.001, 0.03], n_examples=1000, seed=7,
                out_path=f"{out_dir}/attack.csv",
            )
            results[mode] = {eps: (clean, adv) for eps, clean, adv in attack.rows}
        run_report(["baseline/metrics.csv", "augmented/metrics.csv"], "report.txt")

        digest = hashlib.sha256()
        for rel in (
            "baseline/model.ckpt", "baseline/metrics.csv", "baseline/attack.csv",
            "augmented/model.ckpt", "augmented/metrics.csv",
            "augmented/attack.csv", "report.txt",
        ):
            digest.update(rel.encode())
            digest.update(Path(rel).read_bytes())
        return digest.hexdigest(), results
    finally:
        os.chdir(cwd)
        shutil.rmtree(base, ignore_errors=True)


def test_criterion_6_desk_scale_experiment():
    with _verdict(6, "desk-scale robustness experiment"):
        t0 = time.perf_counter()
        _, results = _cached("c6", _criterion6)
        elapsed = time.perf_counter() - t0

        base_clean, base_adv = results["none"][0.03]
        aug_clean, aug_adv = results["patch"][0.03]
        _, base_adv_small = results["none"][0.001]
        _, aug_adv_small = results["patch"][0.001]

        print(
            "\n  NOTE: published full-scale reference numbers (ResNet-scale"
            "\n  training; e.g. 89.33% clean CIFAR-10 accuracy, or 72.5% vs"
            "\n  64.3% adversarial accuracy at eps=0.001) are NOT reproducible"
            "\n  at desk scale and are not targeted here. This run trains"
            "\n  softmax regression on a 5000-image two-class subset instead."
        )
        print(f"  baseline : clean {base_clean:.3f}  adv eps=0.001 "
              f"{base_adv_small:.3f}  adv eps=0.03 {base_adv:.3f}")
        print(f"  augmented: clean {aug_clean:.3f}  adv eps=0.001 "
              f"{aug_adv_small:.3f}  adv eps=0.03 {aug_adv:.3f}")
        direction = "above" if aug_adv > base_adv else "at or below"
        print(f"  paired comparison: augmented adversarial accuracy is "
              f"{direction} baseline at eps=0.03 (reported, not asserted)")

        assert base_clean > 0.60
        assert aug_clean > 0.60
        assert base_clean - base_adv >= 0.10
        assert elapsed < 600.0
        print(f"  completed in {elapsed:.1f}s")


# ------------------------------------------------------- criterion 7


def test_criterion_7_bit_identical_reruns():
    with _verdict(7, "bit-identical re-runs of criteria 2, 3, 6"):
        assert _criterion2_digest() == _cached("c2", _criterion2_digest)
        assert _criterion3_digest() == _cached("c3", _criterion3_digest)
        fresh_digest, _ = _criterion6()
        assert fresh_digest == _cached("c6", _criterion6)[0]


# ------------------------------------------------------- criterion 8


def test_criterion_8_io_round_trips():
    with _verdict(8, "container, PNG, and record round trips"):
        t0 = time.perf_counter()
        base = Path(tempfile.mkdtemp(prefix="acc8_"))
        try:
            gen = np.random.default_rng(88)

            # augmented-container round trip is bit exact
            images = gen.random((40, 12, 9, 3)).astype(np.float32)
            labels = gen.dirichlet(np.ones(5), size=40)
            data = Dataset(images=images, labels=labels, num_classes=5,
                           name="acc8")
            config = AugmentConfig(probability=0.65, min_frac=0.35,
                                   max_frac=0.7, seed=21)
            write_augmented(data, base / "r.paug", config=config)
            back, back_config = read_augmented(base / "r.paug")
            assert back.images.dtype == np.float32
            assert back.labels.dtype == np.float64
            assert np.array_equal(back.images, images)
            assert np.array_equal(back.labels, labels)
            assert back.name == "acc8"
            assert back_config == config

            # PNG round trip is within one byte step
            img = gen.random((16, 16, 3)).astype(np.float32)
            export_png(img, base / "x.png")
            again = import_png(base / "x.png")
            diff = np.abs(again.astype(np.float64) - img.astype(np.float64))
            assert diff.max() <= 1.0 / 255.0
            grid = np.arange(256, dtype=np.float32).reshape(16, 16)[..., None]
            grid = grid / np.float32(255.0)
            export_png(grid, base / "g.png")
            assert np.array_equal(import_png(base / "g.png"), grid)

            # record decoding matches hand-built bytes
            rec0 = bytes([3]) + bytes([10] * 1024) + bytes([20] * 1024) \
                + bytes([30] * 1024)
            plane = bytearray(3072)
            plane[2 * 32 + 5] = 200          # red, row 2, col 5
            plane[1024 + 7] = 111            # green, row 0, col 7
            plane[2048 + 31 * 32 + 31] = 255  # blue, row 31, col 31
            rec1 = bytes([9]) + bytes(plane)
            src = base / "data_batch_1.bin"
            src.write_bytes(rec0 + rec1)
            ds = load_cifar10([src])
            assert len(ds) == 2 and ds.num_classes == 10
            assert np.array_equal(ds.labels[0], np.eye(10)[3])
            assert np.array_equal(ds.labels[1], np.eye(10)[9])
            for ch, byte in ((0, 10), (1, 20), (2, 30)):
                expect = np.float32(byte) / np.float32(255.0)
                assert np.all(ds.images[0, :, :, ch] == expect)
            assert ds.images[1, 2, 5, 0] == np.float32(200) / np.float32(255.0)
            assert ds.images[1, 0, 7, 1] == np.float32(111) / np.float32(255.0)
            assert ds.images[1, 31, 31, 2] == np.float32(255) / np.float32(255.0)
            poked = {(2, 5, 0), (0, 7, 1), (31, 31, 2)}
            flat = np.argwhere(ds.images[1] != 0.0)
            assert {tuple(ix) for ix in flat} == poked
        finally:
            shutil.rmtree(base, ignore_errors=True)
        assert time.perf_counter() - t0 < 10.0
