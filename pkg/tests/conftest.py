from __future__ import annotations

import pytest

from stapleforge.cli import fixtures_dir
from stapleforge.corpus import DEFAULT_POLICY, normalize, parse_gold, parse_prompts
from stapleforge.textproc import tokenize
from stapleforge.translator import train_toy


def load_toy_pairs(swap: bool = False) -> list[tuple[list[str], list[str]]]:
    pairs = []
    text = (fixtures_dir() / "toy_parallel.tsv").read_text(encoding="utf-8")
    for line in text.splitlines():
        if not line.strip():
            continue
        src, tgt = line.split("\t")
        if swap:
            src, tgt = tgt, src
        pairs.append(
            (tokenize(normalize(src, DEFAULT_POLICY)), tokenize(normalize(tgt, DEFAULT_POLICY)))
        )
    return pairs


@pytest.fixture(scope="session")
def fixtures_path():
    return fixtures_dir()


@pytest.fixture(scope="session")
def toy_fwd_series():
    return train_toy(load_toy_pairs(swap=False), 5, None, direction="fwd")


@pytest.fixture(scope="session")
def toy_bwd_series():
    return train_toy(load_toy_pairs(swap=True), 5, None, direction="bwd")


@pytest.fixture(scope="session")
def toy_prompts(fixtures_path):
    return parse_prompts((fixtures_path / "toy_prompts.txt").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def toy_golds(fixtures_path):
    return parse_gold((fixtures_path / "toy_gold.txt").read_text(encoding="utf-8"))
