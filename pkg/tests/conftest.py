import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from idiomspan.corpus import ExampleRecord, Label, Language, Partition, Setting, save_corpus

IDIOMATIC = {
    Language.EN: ["spill the beans", "big fish", "cold feet", "red tape"],
    Language.PT: ["pão duro", "olho gordo", "mão aberta"],
    Language.GL: ["pé frio", "cabeza dura", "lingua longa"],
}
LITERAL = {
    Language.EN: ["green apple", "wooden table", "fast car", "old bridge"],
    Language.PT: ["casa branca", "carro novo", "rua larga"],
    Language.GL: ["porta aberta", "auga fría", "pedra grande"],
}
HELD_OUT = {
    Language.EN: ["night owl", "hot potato", "blue moon"],
    Language.PT: ["sangue frio", "boca aberta"],
    Language.GL: ["corazón grande", "man esquerda"],
}
PREFIXES = ["Yesterday", "I think that", "She said the", "In the morning,", "Everyone knew the"]
SUFFIXES = ["was obvious.", "again today.", "in the end.", "for sure!", "at the party."]


def _sentence(rng, mwe):
    words = mwe.split()
    if rng.random() < 0.3:
        words[-1] = words[-1] + "s"
    return f"{rng.choice(PREFIXES)} {' '.join(words)} {rng.choice(SUFFIXES)}"


def make_records(n_train=28, n_dev=18, seed=0):
    """Synthetic Subtask-A rows (60 by default) whose training labels are a function of the MWE.

    Every held-out MWE gets one one-shot training row per label, as in the shared task.
    """
    rng = random.Random(seed)
    langs = list(Language)
    records = []

    def row(i, lang, mwe, label, setting, partition):
        return ExampleRecord(
            id=f"{partition.value}-{i}",
            language=lang,
            mwe=mwe,
            target=_sentence(rng, mwe),
            label=label,
            previous="The story began.",
            next="Nobody cared.",
            setting_tag=setting,
            partition=partition,
        )

    for i in range(n_train):
        lang = langs[i % 3]
        label = Label(i % 2)
        pool = IDIOMATIC if label is Label.IDIOMATIC else LITERAL
        records.append(row(i, lang, rng.choice(pool[lang]), label, Setting.ZERO_SHOT, Partition.TRAIN))
    i = n_train
    for lang, mwes in HELD_OUT.items():
        for mwe in mwes:
            for label in Label:
                records.append(row(i, lang, mwe, label, Setting.ONE_SHOT, Partition.TRAIN))
                i += 1
    for i in range(n_dev):
        lang = langs[i % 3]
        records.append(row(i, lang, rng.choice(HELD_OUT[lang]), Label(rng.randrange(2)), Setting.ZERO_SHOT, Partition.DEV))
    return records


def write_data_dir(path, records):
    path.mkdir(parents=True, exist_ok=True)
    train0 = [r for r in records if r.partition is Partition.TRAIN and r.setting_tag is Setting.ZERO_SHOT]
    train1 = [r for r in records if r.partition is Partition.TRAIN and r.setting_tag is Setting.ONE_SHOT]
    dev = [r for r in records if r.partition is Partition.DEV]
    save_corpus(train0, path / "train_zero_shot.csv")
    save_corpus(train1, path / "train_one_shot.csv")
    save_corpus(dev, path / "dev.csv")
    return path


@pytest.fixture
def records():
    return make_records()


@pytest.fixture
def data_dir(tmp_path):
    return write_data_dir(tmp_path / "data", make_records())


TINY_VOCAB = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", ".", ",", "!", "'"]
    + list("abcdefghijklmnopqrstuvwxyzáéíóúãõç")
    + ["##" + c for c in "abcdefghijklmnopqrstuvwxyzáéíóúãõç"]
    + ["the", "spill", "beans", "big", "fish", "cold", "feet", "red", "tape", "green", "apple", "in"]
)


@pytest.fixture(scope="session")
def tiny_registry(tmp_path_factory):
    """A local model registry holding a randomly initialized 2-layer BERT."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("registry")
    model_dir = root / "tiny-bert"
    model_dir.mkdir()
    vocab = {w: i for i, w in enumerate(TINY_VOCAB)}
    tokenizer = BertTokenizerFast(vocab=vocab, do_lower_case=True, strip_accents=False)
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(TINY_VOCAB),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return root


@pytest.fixture
def tiny_spec():
    from idiomspan.encoder import EncoderSpec, ModelName

    return EncoderSpec(name=ModelName.MBERT, num_layers=2, hidden_width=16, model_id="tiny-bert", max_pieces=62)


# ----------------------------------------------------------------------------- acceptance lines

_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        detail = ""
        if hasattr(report, "wasxfail"):
            status, detail = "FAIL", f" (expected in this environment: {report.wasxfail})"
        elif report.failed:
            detail = f" ({report.longrepr.reprcrash.message.splitlines()[0]})" if hasattr(report.longrepr, "reprcrash") else ""
        _CRITERIA.append(f"{status}  {marker.args[0]}{detail}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
