import json
from dataclasses import replace

import pytest

from lexst.classifier import TrainConfig, init_params, train
from lexst.corpus import Corpus
from lexst.harness import Dataset, generate_synthetic, make_split
from lexst.lexicon import LexiconConfig
from lexst.pseudolabel import PseudoLabel, SelectionConfig
from lexst.selftrain import (
    History,
    IterationRecord,
    Mode,
    SelfTrainConfig,
    converged,
    dev_accuracy,
    run,
    student_retrain,
)

SMALL_TRAIN = TrainConfig(learning_rate=5e-2, max_epochs=8, patience=3, emb_dim=16, attn_dim=8)


@pytest.fixture(scope="module")
def split():
    sd = generate_synthetic(3, 120, 60, 0.8, 0.0, 10, seed=3, keyword_slots=4)
    return make_split(Dataset(sd.corpus, sd.corpus, sd.kb), per_class=8, seed=0), sd.kb


def _config(mode=Mode.FULL_LST, **kw):
    return SelfTrainConfig(
        selection=SelectionConfig((0.6,), 1),
        lexicon_cfg=LexiconConfig(k_percent=50.0),
        train_cfg=SMALL_TRAIN,
        max_iterations=3,
        outer_patience=2,
        mode=mode,
        **kw,
    )


def _records(accs, accepted=None):
    accepted = accepted or [5] * len(accs)
    return History(
        [IterationRecord(i + 1, 10, 10 - n, n, 0, 0, 0, a, []) for i, (a, n) in enumerate(zip(accs, accepted))]
    )


@pytest.mark.parametrize(
    "accs, patience, expected",
    [
        ([70, 72, 72, 72], 2, True),
        ([70, 72, 72], 2, False),
        ([70, 72, 73], 1, False),
        ([70, 72, 71], 1, True),
        ([], 1, False),
    ],
)
def test_converged_patience(accs, patience, expected):
    assert converged(_records(accs), patience) is expected


def test_converged_on_zero_acceptances():
    assert converged(_records([70, 80], accepted=[5, 0]), 5)


def test_supervised_mode_returns_teacher(split):
    sp, kb = split
    model, _, history = run(sp.train, sp.dev, sp.unlabeled, kb, _config(Mode.SUPERVISED), sp.vocab)
    assert history.records == []
    teacher, _ = train(init_params(len(sp.vocab), 16, 8, 3, 0), sp.train, sp.dev, SMALL_TRAIN)
    assert model.equals(teacher)


def test_pool_bookkeeping(split):
    sp, kb = split
    seen = []
    _, _, history = run(
        sp.train, sp.dev, sp.unlabeled, kb, _config(), sp.vocab,
        on_selection=lambda it, recs: seen.append({r.doc_index for r in recs if r.chosen is not None}),
    )
    assert history.records
    pool = len(sp.unlabeled)
    for rec, taken in zip(history.records, seen):
        assert rec.pool_before == pool
        assert rec.pool_after == rec.pool_before - rec.newly_accepted == pool - len(taken)
        pool = rec.pool_after
    flat = [i for s in seen for i in s]
    assert len(flat) == len(set(flat))
    assert history.best_dev_accuracy == max([history.teacher_dev_accuracy] + history.dev_accuracies())


def test_classic_equals_full_with_tau0_no_augmentation(split):
    sp, kb = split
    classic = run(sp.train, sp.dev, sp.unlabeled, kb, _config(Mode.CLASSIC_ST), sp.vocab)[2]
    cfg = _config()
    cfg = replace(
        cfg,
        selection=replace(cfg.selection, tau=0),
        augment_cfg=replace(cfg.augment_cfg, enabled=False),
    )
    full = run(sp.train, sp.dev, sp.unlabeled, kb, cfg, sp.vocab)[2]
    assert classic.to_json() == full.to_json()


def test_empty_pool_degenerates_to_supervised(split):
    sp, kb = split
    empty = Corpus((), sp.train.num_classes, sp.train.class_names)
    _, _, history = run(sp.train, sp.dev, empty, kb, _config(), sp.vocab)
    assert [r.newly_accepted for r in history.records] == [0]
    assert history.best_dev_accuracy >= history.teacher_dev_accuracy


def test_student_with_no_pseudo_labels_is_plain_training(split):
    sp, _ = split
    student = student_retrain(sp.train, [], [], SMALL_TRAIN, sp.dev, seed=4, vocab_size=len(sp.vocab))
    direct, _ = train(init_params(len(sp.vocab), 16, 8, 3, 4), sp.train, sp.dev, replace(SMALL_TRAIN, seed=4))
    assert student.equals(direct)
    with pytest.raises(ValueError):
        student_retrain(sp.train, [(sp.dev.docs[0], PseudoLabel())], [], SMALL_TRAIN, sp.dev, 0, len(sp.vocab))


def test_checkpoints_and_history_json(split, tmp_path):
    sp, kb = split
    _, _, history = run(sp.train, sp.dev, sp.unlabeled, kb, _config(), sp.vocab, run_dir=tmp_path)
    assert (tmp_path / "iter_00" / "model.json").exists()
    assert (tmp_path / f"iter_{len(history.records):02d}" / "lexicon.json").exists()
    assert History.from_dict(json.loads(history.to_json())).to_json() == history.to_json()


def test_augmentation_requires_kb(split):
    sp, _ = split
    with pytest.raises(ValueError, match="knowledge base"):
        run(sp.train, sp.dev, sp.unlabeled, None, _config(), sp.vocab)


def test_config_roundtrip():
    cfg = _config(Mode.LEXICON_ST, warm_start=True)
    again = SelfTrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.effective_tau == 1 and not again.augments
    assert SelfTrainConfig(mode="classic_st").effective_tau == 0


def test_dev_accuracy_on_empty_dev(split):
    sp, _ = split
    empty = Corpus((), 3, sp.train.class_names)
    assert dev_accuracy(init_params(len(sp.vocab), 4, 2, 3, 0), empty) == 0.0
