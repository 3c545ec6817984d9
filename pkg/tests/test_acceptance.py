"""End-to-end acceptance checks for the whole pipeline.

Each test exercises one externally meaningful guarantee, records a single
PASS/FAIL line (printed in the terminal summary), and then asserts. The
directional training study is computed once and shared by the tests that
consume it.
"""

import itertools
import time

import numpy as np
import pytest

import topomol.autodiff as ad
from conftest import random_graph, record_acceptance
from topomol.cli import EXIT_OK, main as cli_main
from topomol.encoder import (
    DESK_ENCODER,
    augment,
    batch_graphs,
    encode_graphs,
    init_encoder_params,
    init_head_params,
)
from topomol.evalprobe import covariance_singular_values, knn_probe, roc_auc
from topomol.filtration import (
    ATOMIC_NUMBER,
    build_sublevel_complex,
    graph_laplacian,
    heat_kernel_signature,
)
from topomol.losses import (
    LossConfig,
    combined_loss_t,
    distance_ranking,
    ntxent_loss_t,
    tdl_gradient_analytic,
    tdl_loss,
    tdl_loss_n_dot,
    tdl_loss_t,
)
from topomol.molio import Atom, Bond, MolGraph, parse_smiles
from topomol.persistence import (
    CYCLE1,
    ESSENTIAL0,
    ORDINARY0,
    PersistenceDiagram,
    PersistencePoint,
    diagram_w1,
    extended_persistence_fast,
    extended_persistence_oracle,
)
from topomol.trainer import TrainConfig, graph_embeddings, pretrain
from topomol.vectorize import (
    PIConfig,
    fingerprint_corpus,
    persistence_image,
    pi_stability_constant,
)


def _components(graph):
    seen, comps = set(), 0
    adj = [[] for _ in range(graph.num_nodes)]
    for b in graph.edges:
        adj[b.u].append(b.v)
        adj[b.v].append(b.u)
    for s in range(graph.num_nodes):
        if s in seen:
            continue
        comps += 1
        stack = [s]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(adj[x])
    return comps


# ---------------------------------------------------------------------------
# 1. Fast extended persistence equals the matrix-reduction oracle


def test_persistence_matches_oracle(rng):
    t0 = time.time()
    fixtures = [
        (MolGraph([Atom(6, 0)], []), [5.0]),
        (parse_smiles("CCC"), [1.0, 3.0, 2.0]),
        (
            MolGraph([Atom(6, i) for i in range(4)], [Bond(3, i, "single") for i in range(3)]),
            [1.0, 2.0, 3.0, 0.0],
        ),
        (
            MolGraph(
                [Atom(6, i) for i in range(3)],
                [Bond(0, 1, "single"), Bond(1, 2, "single"), Bond(0, 2, "single")],
            ),
            [1.0, 1.0, 1.0],
        ),
        (
            MolGraph(
                [Atom(6, i) for i in range(4)],
                [
                    Bond(0, 1, "single"),
                    Bond(1, 2, "single"),
                    Bond(2, 3, "single"),
                    Bond(0, 3, "single"),
                ],
            ),
            [1.0, 2.0, 3.0, 4.0],
        ),
        (MolGraph([Atom(6, 0), Atom(6, 1), Atom(6, 2)], [Bond(0, 1, "single")]), [2.0, 1.0, 7.0]),
    ]
    cases = [(g, list(v)) for g, v in fixtures]
    for _ in range(200):
        g = random_graph(rng, max_nodes=12, max_edges=16)
        cases.append((g, rng.standard_normal(g.num_nodes)))
    mismatches = 0
    for g, values in cases:
        cx = build_sublevel_complex(g, values)
        if extended_persistence_fast(cx).multiset() != extended_persistence_oracle(cx).multiset():
            mismatches += 1
    elapsed = time.time() - t0
    ok = mismatches == 0 and elapsed < 10.0
    record_acceptance(
        "persistence fast path == reduction oracle",
        ok,
        f"{len(cases)} graphs, {mismatches} mismatches, {elapsed:.1f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 2. Diagram point counts follow the graph invariants


def test_diagram_counting_identities(rng):
    bad = 0
    for _ in range(1000):
        g = random_graph(rng)
        d = extended_persistence_fast(
            build_sublevel_complex(g, rng.standard_normal(g.num_nodes))
        )
        c = _components(g)
        if not (
            d.count(ESSENTIAL0) == c
            and d.count(CYCLE1) == g.num_edges - g.num_nodes + c
            and d.count(ORDINARY0) == g.num_nodes - c
        ):
            bad += 1
    record_acceptance("diagram counts match component/cycle invariants", bad == 0, f"1000 fuzz cases, {bad} bad")
    assert bad == 0


# ---------------------------------------------------------------------------
# 3. Persistence images are stable against diagram perturbations


def test_image_stability_bound(rng):
    t0 = time.time()
    cfg = PIConfig(resolution=16, birth_range=(-2.0, 2.0), pers_range=(-2.0, 2.0), sigma=0.3)
    C = pi_stability_constant(cfg)
    worst = 0.0
    checked = 0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        pts = rng.uniform(-1.5, 1.5, size=(n, 2))
        moved = pts + rng.uniform(-0.1, 0.1, size=(n, 2))

        def img(bp):
            d = PersistenceDiagram(
                [PersistencePoint(b, b + p, 0, ORDINARY0) for b, p in bp]
            )
            return persistence_image(d, cfg).values

        lhs = float(np.linalg.norm(img(pts) - img(moved)))
        w1 = diagram_w1(
            [(b, b + p) for b, p in pts], [(b, b + p) for b, p in moved]
        )
        if w1 > 0:
            worst = max(worst, lhs / w1)
            checked += 1
    elapsed = time.time() - t0
    ok = worst <= 10.0 * C and elapsed < 30.0
    record_acceptance(
        "image perturbation ratio within stability bound",
        ok,
        f"{checked} pairs, worst ratio {worst:.3g} vs bound {10.0 * C:.3g}, {elapsed:.1f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. Closed-form contrastive gradient matches finite differences


def test_closed_form_gradient(rng):
    t0 = time.time()
    tau, eps = 0.5, 1e-6
    worst = 0.0
    for _ in range(50):
        N = int(rng.integers(3, 17))
        d = int(rng.integers(2, 9))
        Z = rng.uniform(-0.5, 0.5, size=(N, d))
        I = rng.standard_normal((N, d))
        n = int(rng.integers(0, N))
        i = int(rng.integers(1, N))
        target = distance_ranking(I, n)[i - 1]
        analytic = tdl_gradient_analytic(Z, I, tau, n, i)
        numeric = np.empty(d)
        for c in range(d):
            Zp, Zm = Z.copy(), Z.copy()
            Zp[target, c] += eps
            Zm[target, c] -= eps
            numeric[c] = (tdl_loss_n_dot(Zp, I, tau, n) - tdl_loss_n_dot(Zm, I, tau, n)) / (2 * eps)
        rel = np.linalg.norm(numeric - analytic) / max(
            np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-12
        )
        worst = max(worst, rel)

    sign_ok = 0
    for _ in range(100):
        N = int(rng.integers(3, 10))
        Z = rng.uniform(-0.5, 0.5, size=(N, 4))
        I = rng.standard_normal((N, 4))
        n = int(rng.integers(0, N))
        zn = Z[n]
        g_near = tdl_gradient_analytic(Z, I, 0.5, n, 1)
        g_far = tdl_gradient_analytic(Z, I, 0.5, n, N - 1)
        if float(g_near @ zn) < 0.0 < float(g_far @ zn):
            sign_ok += 1
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and sign_ok == 100 and elapsed < 10.0
    record_acceptance(
        "closed-form contrastive gradient vs finite differences",
        ok,
        f"worst rel err {worst:.2e}, signs {sign_ok}/100, {elapsed:.1f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 5. Autodiff through the full model matches finite differences


def _flatten_params(params):
    keys = sorted(params)
    vec = np.concatenate([params[k].ravel() for k in keys])
    shapes = [(k, params[k].shape) for k in keys]
    return vec, shapes


def _unflatten_params(vec, shapes):
    out, at = {}, 0
    for k, shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        out[k] = vec[at : at + size].reshape(shape)
        at += size
    return out


def test_full_model_gradient(rng):
    t0 = time.time()
    graphs = [random_graph(rng, max_nodes=8, max_edges=10) for _ in range(6)]
    graphs = [g for g in graphs if g.num_nodes >= 3][:4]
    views_a = [augment(g, "node-drop", 0.2, 11 + i)[0] for i, g in enumerate(graphs)]
    views_b = [augment(g, "node-drop", 0.2, 53 + i)[0] for i, g in enumerate(graphs)]
    I = rng.standard_normal((len(graphs), 12))
    tau, lam = 0.5, 1.0
    batch_all = batch_graphs(views_a + views_b + graphs, DESK_ENCODER)
    nb = len(graphs)

    def loss_fn(tape, lifted):
        Z_all, _ = encode_graphs(tape, batch_all, DESK_ENCODER, lifted)
        Za = ad.gather_rows(tape, Z_all, np.arange(nb))
        Zb = ad.gather_rows(tape, Z_all, np.arange(nb, 2 * nb))
        Z = ad.gather_rows(tape, Z_all, np.arange(2 * nb, 3 * nb))
        base = ntxent_loss_t(tape, Za, Zb, tau)
        return combined_loss_t(tape, base, tdl_loss_t(tape, Z, I, tau), lam)

    worst = 0.0
    checked = 0
    for point in range(5):
        params = init_encoder_params(DESK_ENCODER, 100 + point)
        params.update(init_head_params(DESK_ENCODER, DESK_ENCODER.hidden, 200 + point))
        vec, shapes = _flatten_params(params)

        tape = ad.Tape()
        tracked = {k: tape.tensor(v) for k, v in _unflatten_params(vec, shapes).items()}
        out = loss_fn(tape, tracked)
        tape.backward(out)
        grad_vec = np.concatenate(
            [
                (tracked[k].grad if tracked[k].grad is not None else np.zeros(shape)).ravel()
                for k, shape in shapes
            ]
        )

        def value(v):
            t = ad.Tape()
            lifted = {k: t.tensor(p) for k, p in _unflatten_params(v, shapes).items()}
            return float(loss_fn(t, lifted).data)

        eps = 1e-6
        coords = rng.choice(vec.size, size=20, replace=False)
        f0 = value(vec)
        for c in coords:
            step = np.zeros_like(vec)
            step[c] = eps
            fp, fm = value(vec + step), value(vec - step)
            d_plus, d_minus = (fp - f0) / eps, (f0 - fm) / eps
            if abs(d_plus - d_minus) > 1e-3 * (abs(d_plus) + abs(d_minus)) + 1e-7:
                continue  # relu kink
            numeric = (fp - fm) / (2 * eps)
            rel = abs(numeric - grad_vec[c]) / max(abs(numeric), abs(grad_vec[c]), 1e-8)
            worst = max(worst, rel)
            checked += 1
    elapsed = time.time() - t0
    ok = worst <= 1e-4 and checked >= 50 and elapsed < 60.0
    record_acceptance(
        "full-model autodiff vs finite differences",
        ok,
        f"{checked} coords over 5 points, worst rel err {worst:.2e}, {elapsed:.1f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. Contrastive-distance loss invariants


def test_contrastive_loss_invariants(rng):
    neg = 0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        Z = rng.standard_normal((n, 4))
        I = rng.standard_normal((n, 5))
        if tdl_loss(Z, I, 0.1) < 0.0:
            neg += 1

    pair_zero = all(
        tdl_loss(rng.standard_normal((2, 3)), rng.standard_normal((2, 4)), 0.1) == 0.0
        for _ in range(50)
    )

    rank_stable = 0
    for _ in range(100):
        n = int(rng.integers(3, 8))
        Z = rng.standard_normal((n, 4))
        I = rng.standard_normal((n, 3))
        base = tdl_loss(Z, I, 0.1)
        if base == tdl_loss(Z, 3.0 * I, 0.1) == tdl_loss(Z, 0.125 * I, 0.1):
            rank_stable += 1

    ok = neg == 0 and pair_zero and rank_stable == 100
    record_acceptance(
        "contrastive-distance loss invariants",
        ok,
        f"nonneg {1000 - neg}/1000, pair-zero {pair_zero}, rank-invariant {rank_stable}/100",
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. Heat-kernel signature trace identity


def test_hks_trace_identity(rng):
    worst = 0.0
    for _ in range(100):
        g = random_graph(rng, max_nodes=30, max_edges=40)
        t = 0.1
        hks = heat_kernel_signature(g, t)
        eigvals = np.linalg.eigvalsh(graph_laplacian(g))
        worst = max(worst, abs(float(hks.sum()) - float(np.exp(-t * eigvals).sum())))
    ok = worst <= 1e-8
    record_acceptance("heat-kernel trace identity", ok, f"worst abs err {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 8 & 9. Directional training study: distance correlation and collapse


_STUDY_ATOMS = [6, 6, 6, 7, 8, 9, 16]


def _study_graph(rng, extra_cycles):
    n = int(rng.integers(6, 11))
    nodes = [Atom(int(rng.choice(_STUDY_ATOMS)), i) for i in range(n)]
    edges = [Bond(int(rng.integers(0, i)), i, "single") for i in range(1, n)]
    present = {(e.u, e.v) for e in edges}
    added = 0
    while added < extra_cycles:
        u, v = sorted(rng.integers(0, n, size=2).tolist())
        if u == v or (u, v) in present:
            continue
        edges.append(Bond(u, v, "single"))
        present.add((u, v))
        added += 1
    return MolGraph(nodes, edges)


def _pearson(x, y):
    x = x - x.mean()
    y = y - y.mean()
    return float((x * y).sum() / np.sqrt((x * x).sum() * (y * y).sum()))


@pytest.fixture(scope="module")
def directional_study():
    """300 synthetic molecules in three topology families (trees, one cycle,
    two cycles); 200-epoch pre-training per mode and seed; correlation between
    embedding distances and topological-fingerprint distances, plus the
    embedding covariance spectrum."""
    t0 = time.time()
    rng = np.random.default_rng(12345)
    graphs = []
    for fam in (0, 1, 2):
        graphs += [_study_graph(rng, fam) for _ in range(100)]
    fps, _ = fingerprint_corpus(graphs, [ATOMIC_NUMBER])
    F = np.stack([fp.values for fp in fps])
    iu = np.triu_indices(len(graphs), k=1)
    df = np.sqrt(((F[:, None] - F[None]) ** 2).sum(-1))[iu]

    results = {"combined": [], "ntxent": []}
    for seed in (0, 1, 2):
        for mode in ("combined", "ntxent"):
            cfg = TrainConfig(
                epochs=200,
                batch_size=100,
                learning_rate=0.003,
                seed=seed,
                loss=LossConfig(mode=mode, tau=0.1, lam=10.0),
                aug_kind="node-drop",
                aug_ratio=0.2,
            )
            out = pretrain(graphs, fps, DESK_ENCODER, cfg)
            H = graph_embeddings(graphs, DESK_ENCODER, out.params)
            dh = np.sqrt(((H[:, None] - H[None]) ** 2).sum(-1))[iu]
            values, _, collapsed = covariance_singular_values(H)
            results[mode].append(
                {
                    "seed": seed,
                    "r": _pearson(dh, df),
                    "min_sv": float(values[-1]),
                    "n_collapsed": int(collapsed.sum()),
                }
            )
    return {"results": results, "elapsed": time.time() - t0}


def test_distance_correlation_direction(directional_study):
    res = directional_study["results"]
    elapsed = directional_study["elapsed"]
    wins = sum(
        1
        for c, n in zip(res["combined"], res["ntxent"])
        if c["r"] >= 0.6 and c["r"] > n["r"]
    )
    detail = ", ".join(
        f"seed {c['seed']}: r={c['r']:.3f} vs {n['r']:.3f}"
        for c, n in zip(res["combined"], res["ntxent"])
    )
    ok = wins >= 2 and elapsed < 600.0
    record_acceptance(
        "distance-matching objective raises correlation",
        ok,
        f"{detail}; {wins}/3 seeds, {elapsed:.0f}s total",
    )
    assert ok


def test_collapse_mitigation_direction(directional_study):
    res = directional_study["results"]
    med_c = float(np.median([x["min_sv"] for x in res["combined"]]))
    med_n = float(np.median([x["min_sv"] for x in res["ntxent"]]))
    col_c = float(np.median([x["n_collapsed"] for x in res["combined"]]))
    col_n = float(np.median([x["n_collapsed"] for x in res["ntxent"]]))
    ok = med_c >= med_n
    record_acceptance(
        "distance-matching objective mitigates collapse",
        ok,
        f"median min singular value {med_c:.3e} vs {med_n:.3e} "
        f"(median collapsed directions {col_c:.0f} vs {col_n:.0f} of 64)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 10. Evaluation metrics match brute-force oracles


def _brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def _brute_knn_scores(Z_train, y_train, Z_test, k):
    scores = []
    for x in Z_test:
        dists = [(float(np.linalg.norm(z - x)), i) for i, z in enumerate(Z_train)]
        nearest = [i for _, i in sorted(dists)[:k]]
        scores.append(float(np.mean([y_train[i] for i in nearest])))
    return scores


def _brute_w1(p1, p2):
    def diag(p):
        return abs(p[1] - p[0]) / 2.0

    def linf(a, b):
        return max(abs(a[0] - b[0]), abs(a[1] - b[1]))

    n1, n2 = len(p1), len(p2)
    best = np.inf
    for k in range(min(n1, n2) + 1):
        for sub1 in itertools.combinations(range(n1), k):
            for sub2 in itertools.permutations(range(n2), k):
                cost = sum(linf(p1[i], p2[j]) for i, j in zip(sub1, sub2))
                cost += sum(diag(p1[i]) for i in range(n1) if i not in sub1)
                cost += sum(diag(p2[j]) for j in range(n2) if j not in set(sub2))
                best = min(best, cost)
    return best


def test_metric_suite_oracles(rng):
    auc_exact = True
    for _ in range(30):
        n = int(rng.integers(6, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0], labels[1] = 0, 1
        scores = np.round(rng.standard_normal(n), 1)  # force ties
        if roc_auc(scores, labels) != _brute_auc(scores, labels):
            auc_exact = False

    knn_exact = True
    for _ in range(10):
        Z_train = rng.standard_normal((40, 3))
        y_train = rng.integers(0, 2, size=40)
        Z_test = rng.standard_normal((20, 3))
        y_test = rng.integers(0, 2, size=20)
        if y_test.sum() in (0, 20):
            y_test[0], y_test[1] = 0, 1
        lib = knn_probe(Z_train, y_train, Z_test, y_test, k=5)
        brute = _brute_auc(_brute_knn_scores(Z_train, y_train, Z_test, 5), y_test)
        if lib != brute:
            knn_exact = False

    w1_worst = 0.0
    for _ in range(25):
        p1 = [tuple(x) for x in rng.standard_normal((int(rng.integers(0, 5)), 2))]
        p2 = [tuple(x) for x in rng.standard_normal((int(rng.integers(0, 5)), 2))]
        w1_worst = max(w1_worst, abs(diagram_w1(p1, p2) - _brute_w1(p1, p2)))

    ok = auc_exact and knn_exact and w1_worst <= 1e-12
    record_acceptance(
        "metric suite vs brute-force oracles",
        ok,
        f"auc exact={auc_exact}, knn exact={knn_exact}, w1 worst diff {w1_worst:.1e}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 11. CLI runs are byte-identical under a fixed config and seed


def test_cli_byte_identical(tmp_path):
    data = tmp_path / "data.csv"
    smiles = ["CCO", "CCN", "CCCO", "CC(C)O", "c1ccncc1", "C1CCOCC1", "CCS", "CCCl",
              "CC(=O)O", "CCOC", "C1CCC1O", "NCCO", "CCCN", "CC(C)N", "OCCO", "CCF",
              "CCCS", "C1COC1", "CNC", "CCCF"]
    rows = [f"{s},{i % 2}" for i, s in enumerate(smiles * 2)]
    data.write_text("smiles,y\n" + "\n".join(rows) + "\n")

    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = cli_main(
            ["fingerprint", "--data", str(data), "--out", str(out), "--jobs", "1"]
        )
        code2 = cli_main(
            ["pretrain", "--data", str(data), "--out", str(out), "--loss", "tdl",
             "--epochs", "2", "--jobs", "1"]
        )
        assert code == EXIT_OK and code2 == EXIT_OK
        outputs.append(
            {
                name: open(out / name, "rb").read()
                for name in ("fingerprints.csv", "checkpoint.bin", "loss_curve.csv")
            }
        )
    same = {k for k in outputs[0] if outputs[0][k] == outputs[1][k]}
    ok = len(same) == len(outputs[0])
    record_acceptance(
        "command-line runs are byte-identical",
        ok,
        f"{len(same)}/{len(outputs[0])} artifacts identical",
    )
    assert ok
