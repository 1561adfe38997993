"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest tests/test_acceptance.py
-v -s`` to see them inline).  Directional effects that are out of reach at
desk scale (site-pattern compression, metric emergence) are reported by the
final test without assertion.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from phylodist import autodiff as ad
from phylodist.alignment import Alignment
from phylodist.audit import audit_metric
from phylodist.distances import (
    SaturationPolicy,
    d_hamming,
    distance_matrix,
    jc_correct,
    k2p_correct,
    transition_transversion_fractions,
)
from phylodist.embed import embedding_distortion, llr_embed
from phylodist.losses import logdet_divergence, von_neumann_divergence
from phylodist.matrices import DistanceMatrix, inverse_gromov
from phylodist.net.architectures import (
    ARCHITECTURES,
    build_architecture,
    forward_matrix,
    network_forward,
    pair_values,
    site_pattern_compression,
)
from phylodist.net.layers import (
    Attention,
    ChannelConv,
    DeepSetsMix,
    EquivariantPair,
    InvariantPair,
    PerMemberConv,
    ScalarMLP,
)
from phylodist.net.reference import JC_RANGE, K2P_RANGE, build_reference_net
from phylodist.nj import neighbor_join
from phylodist.simulate import BDParams, SubstModel, evolve_alignment, simulate_bd_tree
from phylodist.train import TrainConfig, fit_scalar_head, train, training_targets
from phylodist.tree import (
    covariance_matrix,
    patristic_matrix,
    rf_distance,
    scale_branches,
)

EYE4 = np.eye(4)


@contextmanager
def criterion(name, description):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"{name}: FAIL  {description}  [{time.perf_counter() - start:.1f}s]")
        raise
    print(f"{name}: PASS  {description}  [{time.perf_counter() - start:.1f}s]")


def onehot(states):
    return np.ascontiguousarray(np.moveaxis(EYE4[states], -1, -2))


def random_pairs(rng, count, length, max_divergence=1.0):
    x = rng.integers(0, 4, (count, length))
    y = x.copy()
    for b in range(count):
        k = int(rng.integers(0, int(max_divergence * length) + 1))
        idx = rng.choice(length, min(k, length), replace=False)
        y[b, idx] = (x[b, idx] + rng.integers(1, 4, idx.size)) % 4
    return x, y


# -- A1: reference-network exactness --------------------------------------------------


def test_a1_reference_network_exactness():
    with criterion("A1", "reference nets match d_H to 1e-6 and d_JC/d_K2P to 1e-3"):
        start = time.perf_counter()
        rng = np.random.default_rng(101)
        for length in (10, 500, 1000):
            net = build_reference_net("H", length)
            worst = 0.0
            for _ in range(40):  # 40 chunks of 250 pairs = 1e4 pairs per length
                x, y = random_pairs(rng, 250, length)
                vals = pair_values(net, onehot(x), onehot(y))
                ref = np.mean(x != y, axis=1)
                worst = max(worst, float(np.max(np.abs(vals - ref))))
            assert worst < 1e-6, (length, worst)

        length = 1000
        net_jc = build_reference_net("JC", length)
        worst = 0.0
        for _ in range(40):
            x, y = random_pairs(rng, 250, length, max_divergence=JC_RANGE)
            vals = pair_values(net_jc, onehot(x), onehot(y))
            hamming = np.mean(x != y, axis=1)
            in_range = hamming <= JC_RANGE
            formula = -0.75 * np.log1p(-4.0 * hamming[in_range] / 3.0)
            worst = max(worst, float(np.max(np.abs(vals[in_range] - formula))))
        assert worst < 1e-3

        net_k2p = build_reference_net("K2P", length)
        checked = 0
        worst = 0.0
        for _ in range(40):
            x, y = random_pairs(rng, 250, length, max_divergence=0.5)
            vals = pair_values(net_k2p, onehot(x), onehot(y))
            diff = x != y
            lo, hi = np.minimum(x, y), np.maximum(x, y)
            ts = diff & (((lo == 0) & (hi == 2)) | ((lo == 1) & (hi == 3)))
            p = ts.mean(axis=1)
            q = diff.mean(axis=1) - p
            ok = (2 * p + q <= K2P_RANGE) & (2 * q <= K2P_RANGE)
            formula = -0.5 * np.log1p(-(2 * p[ok] + q[ok])) - 0.25 * np.log1p(-2 * q[ok])
            worst = max(worst, float(np.max(np.abs(vals[ok] - formula))))
            checked += int(ok.sum())
        assert checked > 5000 and worst < 1e-3, (checked, worst)
        assert time.perf_counter() - start < 60.0


# -- A2: NJ exactness on additive metrics ----------------------------------------------


def test_a2_nj_exact_on_additive_metrics():
    with criterion("A2", "NJ recovers 500 random BD trees from additive matrices"):
        start = time.perf_counter()
        for n in (4, 10, 20, 50):
            for rep in range(125):
                tree = simulate_bd_tree(BDParams(1.0, 0.5, n), seed=1_000_000 + 1000 * n + rep)
                out = neighbor_join(patristic_matrix(tree))
                assert rf_distance(out, tree) == 0.0, (n, rep)
        assert time.perf_counter() - start < 120.0


# -- A3: Atteson robustness --------------------------------------------------------------


def test_a3_atteson_radius_robustness():
    with criterion("A3", "NJ correct under l-inf noise below half the min internal edge"):
        start = time.perf_counter()
        rng = np.random.default_rng(103)
        for rep in range(200):
            tree = simulate_bd_tree(BDParams(1.0, 0.5, 10), seed=2_000_000 + rep)
            d = patristic_matrix(tree)
            internal = [
                tree.branch_length(v)
                for v in range(tree.n_nodes)
                if not tree.is_leaf(v) and v != tree.root
            ]
            eps = 0.49 * min(internal)
            noise = np.triu(rng.uniform(-eps, eps, size=d.values.shape), 1)
            noisy = np.maximum(d.values + noise + noise.T, 0.0)
            np.fill_diagonal(noisy, 0.0)
            out = neighbor_join(DistanceMatrix(d.labels, noisy))
            assert rf_distance(out, tree) == 0.0, rep
        assert time.perf_counter() - start < 60.0


# -- A4: statistical consistency across sequence length ----------------------------------


A4_RATE = 0.2  # substitutions per diversification-time unit (see ledger)


def test_a4_consistency_across_sequence_length():
    with criterion("A4", "mean RF nonincreasing over L=100/1000/10000 and < 0.05 at 1e4"):
        start = time.perf_counter()
        means = []
        for length in (100, 1000, 10_000):
            rfs = []
            for rep in range(500):
                tree = simulate_bd_tree(BDParams(1.0, 0.5, 20), seed=3_000_000 + rep)
                scaled = scale_branches(tree, A4_RATE)
                aln = evolve_alignment(scaled, SubstModel("JC"), length, seed=3_000_000 + rep)
                d = distance_matrix(aln, "jc")
                rfs.append(rf_distance(neighbor_join(d), tree))
            means.append(float(np.mean(rfs)))
        print(f"    A4 mean RF by length: {dict(zip((100, 1000, 10000), means))}")
        assert means[0] > means[1] > means[2]
        assert means[2] < 0.05
        assert time.perf_counter() - start < 900.0


# -- A5: learned saturating distance correction ------------------------------------------


def test_a5_learned_jc_correction_with_plateau():
    with criterion("A5", "small ELU MLP learns the JC curve and a saturation plateau"):
        start = time.perf_counter()
        policy = SaturationPolicy("ceiling", 5.0)
        xs, ys = [], []
        for k, scale in enumerate((0.5, 1.0, 2.0, 4.0, 8.0)):
            for rep in range(8):
                seed = 10_000 + 100 * k + rep
                tree = scale_branches(simulate_bd_tree(BDParams(1.0, 0.5, 20), seed), scale)
                aln = evolve_alignment(tree, SubstModel("JC"), 500, seed)
                rows = aln.states
                for i in range(20):
                    for j in range(i + 1, 20):
                        x = float(np.mean(rows[i] != rows[j]))
                        xs.append(x)
                        ys.append(jc_correct(x, policy))
        mlp = fit_scalar_head(
            np.array(xs), np.array(ys), method="adam",
            hidden=(16, 16, 16, 16), epochs=4000, learning_rate=0.015, seed=0,
        )
        assert mlp.n_params() < 1000
        grid = np.linspace(0.0, 0.6, 601)
        pred = mlp.forward(ad.Tensor(grid[:, None])).data
        sup = float(np.max(np.abs(pred - (-0.75 * np.log1p(-4.0 * grid / 3.0)))))
        plateau = mlp.forward(ad.Tensor(np.linspace(0.8, 1.0, 201)[:, None])).data
        spread = float(plateau.max() - plateau.min())
        print(f"    A5 sup error on [0,0.6]: {sup:.4f}; range on [0.8,1.0]: {spread:.4f}; "
              f"plateau mean {plateau.mean():.3f}")
        assert sup < 5e-2
        assert spread < 0.2
        assert time.perf_counter() - start < 600.0


# -- A6: equivariance suite -----------------------------------------------------------------


def test_a6_equivariance_suite():
    with criterion("A6", "taxa equivariance of all six nets (1e-9); joint Eq.-layer exactness"):
        rng = np.random.default_rng(106)
        small = dict(channels=8, heads=2, embed_dim=6, g_hidden=(6,))
        for name in ARCHITECTURES:
            spec = build_architecture(name, seed=7, **small)
            for _ in range(100):
                states = rng.integers(0, 4, size=(5, 8), dtype=np.int8)
                aln = Alignment([f"x{i}" for i in range(5)], states)
                perm = rng.permutation(5)
                permuted = Alignment([aln.labels[i] for i in perm], states[perm])
                base = network_forward(spec, aln).values
                out = network_forward(spec, permuted).values
                assert np.max(np.abs(out - base[np.ix_(perm, perm)])) <= 1e-9, name

        for _ in range(100):
            layer = EquivariantPair(rng.normal(size=(2, 5)), activation="relu")
            t = ad.Tensor(rng.normal(size=(3, 8, 17)))
            perm = rng.permutation(17)
            direct = layer.forward(ad.Tensor(t.data[:, :, perm])).data
            after = layer.forward(t).data[:, :, perm]
            assert np.array_equal(direct, after)


# -- A7: gradient correctness -----------------------------------------------------------------


def _arch_gradcheck(spec, aln):
    params = spec.parameters()

    def loss():
        _, out = forward_matrix(spec, aln)
        return ad.tensor_sum(out * out)

    return ad.finite_difference_check(loss, params)


def test_a7_gradient_correctness():
    with criterion("A7", "finite differences confirm gradients for layers and networks"):
        rng = np.random.default_rng(107)
        pair = ad.Tensor(rng.normal(size=(2, 6, 5)))
        seq = ad.Tensor(rng.normal(size=(3, 4, 5)))
        checks = [
            (EquivariantPair(rng.normal(size=(2, 5)), activation="elu"), pair),
            (InvariantPair(0.4, -0.2), pair),
            (ChannelConv.random(4, 3, rng, "elu"), seq),
            (PerMemberConv.random(3, 3, rng, "elu"), pair),
            (DeepSetsMix.random(4, 4, rng, use_taxa=True), seq),
            (Attention.random(4, 2, rng, axis="site"), seq),
            (Attention.random(4, 2, rng, axis="taxa"), seq),
            (ScalarMLP.random(4, (5,), rng), ad.Tensor(rng.normal(size=(6, 4)))),
        ]
        for layer, tensor in checks:
            worst = ad.finite_difference_check(
                lambda: ad.tensor_sum(layer.forward(tensor) ** 2),
                [p for _, p in layer.params()],
            )
            assert worst < 1e-4, (type(layer).__name__, worst)

        states = rng.integers(0, 4, size=(4, 6), dtype=np.int8)
        aln = Alignment([f"x{i}" for i in range(4)], states)
        tiny = dict(channels=4, heads=2, embed_dim=4, g_hidden=(4,))
        for name in ARCHITECTURES:
            spec = build_architecture(name, seed=11, **tiny)
            worst = _arch_gradcheck(spec, aln)
            assert worst < 1e-4, (name, worst)


# -- A8: loss invariances -------------------------------------------------------------------


def test_a8_loss_invariances():
    with criterion("A8", "LogDet scaling/permutation invariance; D(X||X) ~ 0"):
        rng = np.random.default_rng(108)
        m = rng.normal(size=(6, 6))
        x = m @ m.T + 6 * np.eye(6)
        m = rng.normal(size=(6, 6))
        y = m @ m.T + 6 * np.eye(6)
        base_ld = float(logdet_divergence(x, y).data)
        base_vn = float(von_neumann_divergence(x, y).data)
        for alpha in (0.1, 10.0):
            assert abs(float(logdet_divergence(alpha * x, alpha * y).data) - base_ld) < 1e-8
        p = np.eye(6)[rng.permutation(6)]
        assert abs(float(logdet_divergence(p.T @ x @ p, p.T @ y @ p).data) - base_ld) < 1e-8
        assert abs(float(von_neumann_divergence(p.T @ x @ p, p.T @ y @ p).data) - base_vn) < 1e-8
        assert abs(float(logdet_divergence(x, x).data)) < 1e-9
        assert abs(float(von_neumann_divergence(x, x).data)) < 1e-9


# -- A9: inverse Gromov identity -----------------------------------------------------------


def test_a9_inverse_gromov_identity():
    with criterion("A9", "inverse_gromov(covariance) equals patristic for 500 trees"):
        rng = np.random.default_rng(109)
        for rep in range(500):
            n = int(rng.integers(4, 31))
            tree = simulate_bd_tree(BDParams(1.0, 0.5, n), seed=4_000_000 + rep)
            pat = patristic_matrix(tree)
            back = inverse_gromov(covariance_matrix(tree))
            assert back.labels == pat.labels
            assert np.max(np.abs(back.values - pat.values)) <= 1e-9, rep


# -- A10: low-distortion embedding ------------------------------------------------------------


def test_a10_llr_embedding():
    from util import random_binary_tree

    with criterion("A10", "exact per-coordinate non-expansion; sweep distortion within bound"):
        rng = np.random.default_rng(110)
        for n in (16, 32):
            # generic (non-ultrametric) tree metrics: ultrametric trees make
            # cherry leaves exactly equidistant from everything else, which
            # the single-subset-per-scale embedding cannot separate
            tree = random_binary_tree(rng, n)
            d = patristic_matrix(tree)
            emb = llr_embed(d, seed=42)
            for c in range(emb.shape[1]):
                col = emb[:, c]
                gap = np.abs(col[:, None] - col[None, :])
                assert np.max(gap - d.values) <= 1e-12
            rhos = np.array([embedding_distortion(d, seed=s).rho for s in range(100)])
            print(
                f"    A10 n={n}: distortion over 100 seeds min {rhos.min():.2f} "
                f"median {np.median(rhos):.2f} max {rhos.max():.2f} "
                f"(bound {4 * math.log2(n):.1f})"
            )
            assert rhos.min() <= 4.0 * math.log2(n)
        del rng


# -- desk-scale directional effects (reported, not asserted) -----------------------------------


def test_directional_effects_reported():
    with criterion("INFO", "desk-scale compression / metric emergence / estimator ordering"):
        spec = build_architecture("SitesAttentionP", channels=8, heads=2, g_hidden=(8,), seed=21)
        data = []
        for s in range(12):
            tree = simulate_bd_tree(BDParams(1.0, 0.5, 8), seed=400 + s)
            aln = evolve_alignment(tree, SubstModel("JC"), 100, seed=400 + s)
            data.append((aln, training_targets(spec, tree, aln.labels), tree))
        train(
            spec,
            [(a, t) for a, t, _ in data],
            TrainConfig(max_epochs=10, batch_size=4, seed=21, patience=100),
        )
        ratio = site_pattern_compression(spec, data[0][0])
        metric_frac = np.mean(
            [
                audit_metric(network_forward(spec, aln)).is_metric
                for aln, _, _ in data[:8]
            ]
        )
        means = {}
        for kind in ("hamming", "jc"):
            rfs = []
            for rep in range(60):
                tree = simulate_bd_tree(BDParams(1.0, 0.5, 20), seed=6_000_000 + rep)
                scaled = scale_branches(tree, A4_RATE)
                aln = evolve_alignment(scaled, SubstModel("JC"), 1000, seed=6_000_000 + rep)
                rfs.append(rf_distance(neighbor_join(distance_matrix(aln, kind)), tree))
            means[kind] = float(np.mean(rfs))
        print(
            f"    site-pattern compression after desk-scale training: {ratio:.3f} "
            "(collapse needs far longer large-data training; reported only)"
        )
        print(f"    fraction of trained P-net outputs passing the metric audit: {metric_frac:.2f}")
        print(
            f"    20-taxon JC data at L=1000: mean RF hamming {means['hamming']:.4f} "
            f"vs jc {means['jc']:.4f}"
        )
        assert 0 < means["hamming"] < 0.5 and 0 < means["jc"] < 0.5
