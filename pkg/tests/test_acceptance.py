"""Acceptance gate: ten checks that pin the package's core guarantees.

Each test prints one summary line (PASS or FAIL) even under capture so
a full run reads as a checklist. Oracles are self-contained: exhaustive
enumeration, linear scans, exact rational arithmetic, or central finite
differences, never the code path under test.
"""

import contextlib
import itertools
import json
import time
from collections import Counter
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import random_dataset, random_ontology, toy_mentions, \
    toy_ontology
from termnorm.cli import main
from termnorm.contrastive import PairSample, TripleSample, \
    contrastive_pairs_and_triples, synonym_pairs_from_dataset, \
    synonym_pairs_from_ontology
from termnorm.data import dataset_stats, make_splits, round_half_up
from termnorm.metrics import evaluate
from termnorm.models import DualEncoder, HashingClassifier, PtIndex, \
    save_prompts
from termnorm.ontology import build_pretraining_corpus
from termnorm.synthetic import NoiseStyle, SynthConfig, gen_synthetic

GOLDEN_DIR = __file__.rsplit("/", 1)[0] + "/golden"


@pytest.fixture
def checkpoint(capsys):
    """Context manager that prints 'criterion N label: PASS/FAIL'."""
    @contextlib.contextmanager
    def _checkpoint(number, label):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"criterion {number:2d} {label}: FAIL")
            raise
        with capsys.disabled():
            print(f"criterion {number:2d} {label}: PASS")
    return _checkpoint


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    """One full default-configuration pipeline run, shared by the
    directional criteria. Timed so runtime bounds can be asserted."""
    root = tmp_path_factory.mktemp("acceptance_bench")
    start = time.perf_counter()
    rc = main(["pipeline", "--out-dir", str(root), "--seed", "0"])
    elapsed = time.perf_counter() - start
    assert rc == 0
    report = json.loads((root / "report.json").read_text())
    return SimpleNamespace(root=root, report=report, elapsed=elapsed)


# -- criterion 1: contrastive generation vs brute force ------------------

def brute_pairs_triples(dataset, ontology):
    samples = sorted(dataset.samples, key=lambda s: s.sample_id)
    pairs, negatives = [], []
    for i, j in itertools.combinations(range(len(samples)), 2):
        a, b = samples[i], samples[j]
        if a.label_pt_id == b.label_pt_id:
            pairs.append(PairSample(a.text, b.text, "positive"))
        else:
            pairs.append(PairSample(a.text, b.text, "negative"))
            negatives.append((a, b))
    triples = []
    for a, b in negatives:
        ha = ontology.concept(a.label_pt_id).hlt_id
        hb = ontology.concept(b.label_pt_id).hlt_id
        if ha is not None and ha == hb:
            triples.append(TripleSample(a.text, "RO", b.text))
    return pairs, triples


def brute_dataset_synonyms(dataset, ontology):
    return [PairSample(e.llt_text, s.text, "positive")
            for s in sorted(dataset.samples, key=lambda x: x.sample_id)
            for e in sorted(ontology.children_of(s.label_pt_id),
                            key=lambda e: e.llt_id)]


def brute_ontology_synonyms(ontology):
    out = []
    for concept in sorted(ontology.concepts, key=lambda c: c.pt_id):
        entries = sorted(ontology.children_of(concept.pt_id),
                         key=lambda e: e.llt_id)
        for a, b in itertools.combinations(entries, 2):
            out.append(PairSample(a.llt_text, b.llt_text, "positive"))
    return out


class TestCriterion1:

    def test_contrastive_generators_match_brute_force(self, checkpoint):
        with checkpoint(1, "contrastive generation matches brute force"):
            start = time.perf_counter()
            rs = np.random.RandomState(101)
            for _ in range(200):
                onto = random_ontology(rs, max_pt=4, max_hlt=2)
                ds = random_dataset(rs, onto, max_samples=12)
                want = brute_pairs_triples(ds, onto)
                got = contrastive_pairs_and_triples(ds, onto)
                assert got == want
                assert (synonym_pairs_from_dataset(ds, onto)
                        == brute_dataset_synonyms(ds, onto))
                assert (synonym_pairs_from_ontology(onto)
                        == brute_ontology_synonyms(onto))

            pairs, triples = contrastive_pairs_and_triples(
                toy_mentions(), toy_ontology())
            assert pairs == [
                PairSample("weak knees", "zap me of all energy",
                           "positive"),
                PairSample("weak knees", "feel like crap", "negative"),
                PairSample("zap me of all energy", "feel like crap",
                           "negative"),
            ]
            assert triples == [
                TripleSample("weak knees", "RO", "feel like crap"),
                TripleSample("zap me of all energy", "RO",
                             "feel like crap"),
            ]
            assert time.perf_counter() - start < 5.0


# -- criterion 2: retrieval vs linear scan -------------------------------

class TestCriterion2:

    def test_retrieval_matches_linear_scan(self, checkpoint):
        # Sub-ulp score differences are summation-order dependent, so
        # ties are probed with one-hot queries (every scheme returns the
        # exact column entries) and generic queries only assert when the
        # winner is unique by a margin far above rounding noise.
        with checkpoint(2, "retrieval matches the cosine-scan oracle"):
            start = time.perf_counter()
            rs = np.random.RandomState(202)
            n_ties = n_generic = 0
            for _ in range(500):
                k = int(rs.randint(2, 9))
                d = int(rs.randint(2, 17))
                m = rs.normal(size=(k, d))
                m /= np.linalg.norm(m, axis=1, keepdims=True)
                if rs.rand() < 0.3:
                    # duplicate rows give bit-exact score ties
                    m[int(rs.randint(1, k))] = m[0]
                pt_order = tuple(f"P{i:03d}" for i in range(k))
                index = PtIndex(pt_order, m)

                one_hot = np.zeros(d)
                one_hot[int(rs.randint(d))] = 1.0
                scores = [float(row @ one_hot) for row in m]
                top = max(scores)
                best = min(pt for pt, s in zip(pt_order, scores)
                           if s == top)
                assert index.retrieve(one_hot) == best
                n_ties += scores.count(top) > 1

                query = rs.normal(size=d)
                scores = [float(np.dot(row, query)) for row in m]
                top = max(scores)
                runners = [s for s in scores if s != top]
                if scores.count(top) == 1 and top - max(runners) > 1e-9:
                    best = pt_order[scores.index(top)]
                    assert index.retrieve(query) == best
                    n_generic += 1
            assert n_ties >= 30
            assert n_generic >= 400
            assert time.perf_counter() - start < 5.0


# -- criterion 3: gradients vs central finite differences ----------------

def random_word(rs, n_min=3, n_max=9):
    length = int(rs.randint(n_min, n_max + 1))
    return "".join(chr(97 + int(rs.randint(26))) for _ in range(length))


class TestCriterion3:

    def test_gradients_match_finite_differences(self, checkpoint):
        # Each point compares the whole analytic gradient vector to the
        # numeric one in relative L2 error; coordinate-wise comparison
        # drowns O(1e-9) finite-difference noise in the tiniest entries.
        with checkpoint(3, "loss gradients match finite differences"):
            start = time.perf_counter()
            h = 1e-6

            def rel_err(analytic, numeric):
                a = np.asarray(analytic)
                b = np.asarray(numeric)
                return (np.linalg.norm(a - b)
                        / max(np.linalg.norm(a), np.linalg.norm(b)))

            rs = np.random.RandomState(303)
            pt_order = ["P0", "P1", "P2"]
            m = HashingClassifier(pt_order, n_features=64, seed=0)
            m.init_params()
            for _ in range(100):
                scale = float(rs.choice([0.01, 0.1, 1.0]))
                m.coef_ = rs.normal(scale=scale, size=m.coef_.shape)
                m.intercept_ = rs.normal(scale=scale, size=3)
                enc = m.encode(random_word(rs))
                label = int(rs.randint(3))
                _, d_rows, dz = m.loss_grad(enc, label)
                analytic = np.concatenate([d_rows.ravel(), dz])
                numeric = []
                for r in range(len(enc[0])):
                    row = int(enc[0][r])
                    for c in range(3):
                        keep = m.coef_[row, c]
                        m.coef_[row, c] = keep + h
                        up = m.loss_grad(enc, label)[0]
                        m.coef_[row, c] = keep - h
                        down = m.loss_grad(enc, label)[0]
                        m.coef_[row, c] = keep
                        numeric.append((up - down) / (2 * h))
                for c in range(3):
                    keep = m.intercept_[c]
                    m.intercept_[c] = keep + h
                    up = m.loss_grad(enc, label)[0]
                    m.intercept_[c] = keep - h
                    down = m.loss_grad(enc, label)[0]
                    m.intercept_[c] = keep
                    numeric.append((up - down) / (2 * h))
                assert rel_err(analytic, numeric) <= 1e-4

            # moderate temperature keeps the softmax off its saturated
            # plateau, where the true gradient sinks below FD noise
            m = DualEncoder(n_features=64, embed_dim=4,
                            temperature=0.35, seed=0)
            m.init_params()
            for _ in range(100):
                scale = float(rs.choice([0.1, 0.5, 1.0]))
                m.projection_ = rs.normal(scale=scale,
                                          size=m.projection_.shape)
                anchor = m.encode(random_word(rs))
                positive = m.encode(random_word(rs))
                negs = [m.encode(random_word(rs))
                        for _ in range(int(rs.randint(1, 4)))]
                _, grads = m.contrastive_loss_grad(anchor, positive,
                                                   negs)
                rows = sorted(grads)
                analytic = np.concatenate([grads[r] for r in rows])
                numeric = []
                for r in rows:
                    for c in range(4):
                        keep = m.projection_[r, c]
                        m.projection_[r, c] = keep + h
                        up = m.contrastive_loss_grad(
                            anchor, positive, negs)[0]
                        m.projection_[r, c] = keep - h
                        down = m.contrastive_loss_grad(
                            anchor, positive, negs)[0]
                        m.projection_[r, c] = keep
                        numeric.append((up - down) / (2 * h))
                assert rel_err(analytic, numeric) <= 1e-4
            assert time.perf_counter() - start < 30.0


# -- criterion 4: metrics vs exact confusion-matrix oracle ---------------

def frac_metrics(predictions, split, dataset):
    """Accuracy and macro-F1 per subset as exact rationals."""
    def score(ids):
        if not ids:
            return None, None
        gold = [dataset.by_id(i).label_pt_id for i in ids]
        pred = [predictions[i] for i in ids]
        correct = sum(1 for g, p in zip(gold, pred) if g == p)
        acc = Fraction(correct, len(ids))
        total = Fraction(0)
        classes = sorted(set(gold))
        for cls in classes:
            tp = sum(1 for g, p in zip(gold, pred)
                     if g == cls and p == cls)
            fp = sum(1 for g, p in zip(gold, pred)
                     if g != cls and p == cls)
            fn = sum(1 for g, p in zip(gold, pred)
                     if g == cls and p != cls)
            if 2 * tp + fp + fn:
                total += Fraction(2 * tp, 2 * tp + fp + fn)
        return acc, total / len(classes)

    in_ids = [i for i in split.test if split.category[i] == "IN"]
    out_ids = [i for i in split.test if split.category[i] == "OUT"]
    return {
        "in": score(in_ids), "out": score(out_ids),
        "overall": score(list(split.test)),
        "support": (len(in_ids), len(out_ids)),
    }


class TestCriterion4:

    def test_metrics_match_confusion_oracle(self, checkpoint):
        with checkpoint(4, "metrics match the exact confusion oracle"):
            rs = np.random.RandomState(404)
            for _ in range(200):
                onto = random_ontology(rs, max_pt=10)
                ds = random_dataset(rs, onto, max_samples=100)
                split = make_splits(ds, [int(rs.randint(1 << 30))])[0]
                pt_ids = sorted(c.pt_id for c in onto.concepts)
                preds = {i: pt_ids[int(rs.randint(len(pt_ids)))]
                         for i in split.test}
                got = evaluate(preds, split, ds)
                want = frac_metrics(preds, split, ds)
                assert (got.support_in,
                        got.support_out) == want["support"]
                for name, (acc, f1) in (("in", want["in"]),
                                        ("out", want["out"]),
                                        ("overall", want["overall"])):
                    got_acc = getattr(got, f"accuracy_{name}")
                    got_f1 = getattr(got, f"macro_f1_{name}")
                    if acc is None:
                        assert got_acc is None
                        assert got_f1 is None
                        continue
                    assert abs(got_acc - acc) <= 1e-10
                    assert abs(got_f1 - f1) <= 1e-10
                # weighted-mean identity, exact in rationals
                acc_in = want["in"][0]
                acc_out = want["out"][0]
                n_in, n_out = want["support"]
                weighted = Fraction(0)
                if acc_in is not None:
                    weighted += acc_in * n_in
                if acc_out is not None:
                    weighted += acc_out * n_out
                assert weighted / (n_in + n_out) == want["overall"][0]
                assert got.accuracy_overall == float(
                    want["overall"][0])


# -- criterion 5: split contract -----------------------------------------

class TestCriterion5:

    def test_split_contract(self, checkpoint):
        with checkpoint(5, "splits partition, tag, and repeat exactly"):
            rs = np.random.RandomState(505)
            for _ in range(1000):
                onto = random_ontology(rs, max_pt=5)
                grouped = bool(rs.rand() < 0.4)
                ds = random_dataset(rs, onto, max_samples=25,
                                    grouped=grouped)
                seed = int(rs.randint(1 << 30))
                split = make_splits(ds, [seed], train_ratio=0.6)[0]
                again = make_splits(ds, [seed], train_ratio=0.6)[0]
                assert split == again

                ids = sorted(ds.ids())
                assert sorted(split.train + split.test) == ids
                assert not set(split.train) & set(split.test)
                train_labels = {ds.by_id(i).label_pt_id
                                for i in split.train}
                for i in split.test:
                    want = ("IN" if ds.by_id(i).label_pt_id
                            in train_labels else "OUT")
                    assert split.category[i] == want
                if not grouped:
                    assert len(split.train) == round_half_up(
                        0.6 * len(ds))
                    assert len(split.train) == round(
                        Fraction(3, 5) * len(ds))


# -- criterion 6: pretraining corpus -------------------------------------

class TestCriterion6:

    def test_corpus_covers_every_child_term(self, checkpoint):
        with checkpoint(6, "pretraining corpus covers each child term"):
            rs = np.random.RandomState(606)
            for _ in range(100):
                onto = random_ontology(rs)
                corpus = build_pretraining_corpus(onto)
                assert len(corpus) == onto.n_llts
                want = Counter((e.llt_text, e.parent_pt_id)
                               for e in onto.llts)
                got = Counter((s.text, s.label_pt_id)
                              for s in corpus.samples)
                assert got == want

            toy = build_pretraining_corpus(toy_ontology())
            assert Counter((s.text, s.label_pt_id)
                           for s in toy.samples) == Counter([
                               ("weakness", "asthenia"),
                               ("loss of energy", "asthenia"),
                               ("feeling unwell", "malaise")])


# -- criteria 7 and 8: directional claims on the default benchmark -------

def stat_mean(report, dataset, strategy, field):
    return report["results"][dataset][strategy]["stats"][field]["mean"]


def cell_mean(matrix, train, test, field="accuracy_overall"):
    return matrix["cells"][train][test]["stats"][field]["mean"]


class TestCriterion7:

    def test_pretraining_unlocks_unseen_concepts(self, checkpoint,
                                                 benchmark):
        with checkpoint(7, "pretraining lifts unseen-concept accuracy"):
            report = benchmark.report
            for name in ("synth-a", "synth-b"):
                ft_out = stat_mean(report, name, "finetune",
                                   "accuracy_out")
                opft_out = stat_mean(report, name, "pretrain_finetune",
                                     "accuracy_out")
                ft_all = stat_mean(report, name, "finetune",
                                   "accuracy_overall")
                opft_all = stat_mean(report, name, "pretrain_finetune",
                                     "accuracy_overall")
                assert ft_out <= 0.02
                assert opft_out - ft_out >= 0.10
                assert opft_all >= ft_all
            assert benchmark.elapsed < 300.0


class TestCriterion8:

    def test_pretraining_shrinks_transfer_drop(self, checkpoint,
                                               benchmark):
        with checkpoint(8, "pretraining shrinks the transfer drop"):
            report = benchmark.report
            drops = {}
            for strategy in ("finetune", "pretrain_finetune"):
                matrix = report["cross"][strategy]
                names = matrix["datasets"]
                deltas = [cell_mean(matrix, tr, tr)
                          - cell_mean(matrix, tr, te)
                          for tr in names for te in names if tr != te]
                drops[strategy] = sum(deltas) / len(deltas)
            assert drops["pretrain_finetune"] < drops["finetune"]
            assert benchmark.elapsed < 600.0


# -- criterion 9: byte stability -----------------------------------------

SMALL_PIPELINE = ["--n-pt", "24", "--n-samples", "160", "--n-hlt", "6",
                  "--children-min", "2", "--children-max", "4",
                  "--epoch-scale", "0.1"]


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestCriterion9:

    def test_prompts_match_goldens(self, checkpoint, tmp_path):
        with checkpoint(9, "prompt files and reports are byte-stable"):
            for style in ("gpt2", "sci5"):
                out = save_prompts(toy_mentions(), style,
                                   tmp_path / f"{style}.jsonl")
                golden = f"{GOLDEN_DIR}/prompts_{style}.jsonl"
                with open(golden, "rb") as fh:
                    assert out.read_bytes() == fh.read()

            for run in ("one", "two"):
                rc = main(["pipeline", "--out-dir",
                           str(tmp_path / run), "--seed", "7",
                           *SMALL_PIPELINE])
                assert rc == 0
            first = tree_bytes(tmp_path / "one")
            second = tree_bytes(tmp_path / "two")
            assert "report.json" in first
            assert first == second


# -- criterion 10: overlap stats vs set algebra --------------------------

class TestCriterion10:

    def test_overlap_stats_match_set_algebra(self, checkpoint):
        with checkpoint(10, "overlap stats match the set-algebra "
                            "oracle"):
            cfg = SynthConfig(
                n_pt=40, n_samples=200, n_hlt=5, seed=10,
                styles=(NoiseStyle(0.05, 0.35), NoiseStyle(0.25, 0.05),
                        NoiseStyle(0.15, 0.20)))
            _, datasets = gen_synthetic(cfg)
            assert len(datasets) == 3
            report = dataset_stats(datasets)

            label_sets = {ds.name: {s.label_pt_id for s in ds.samples}
                          for ds in datasets}
            union = set().union(*label_sets.values())
            presence = {lab: sum(1 for s in label_sets.values()
                                 if lab in s) for lab in union}
            assert report.union_size == len(union)
            assert report.shared_two_or_more == sum(
                1 for lab in union if presence[lab] >= 2)
            assert report.shared_all == sum(
                1 for lab in union if presence[lab] == len(datasets))
            for ds in datasets:
                assert report.unique_labels[ds.name] == sum(
                    1 for lab in label_sets[ds.name]
                    if presence[lab] == 1)
                assert report.label_counts[ds.name] == Counter(
                    s.label_pt_id for s in ds.samples)

            # the shipped docs must describe this report's shape
            with open(__file__.rsplit("/", 2)[0] + "/README.md") as fh:
                readme = fh.read()
            for field in ("unique_labels", "shared_two_or_more",
                          "shared_all", "union_size"):
                assert field in readme
