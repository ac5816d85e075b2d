import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conceptspace.embed_io import save_embeddings, save_vocab  # noqa: E402

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = mark.args
        entry = _CRITERIA.setdefault(number, {"title": title, "outcomes": [], "seconds": 0.0, "why": []})
        entry["outcomes"].append(rep.outcome)
        entry["seconds"] += rep.duration
        if rep.skipped and isinstance(rep.longrepr, tuple):
            entry["why"].append(rep.longrepr[2])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        outs = e["outcomes"]
        if "failed" in outs:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outs):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        line = f"criterion {number}: {verdict}  {e['title']}  ({len(outs)} checks, {e['seconds']:.1f}s)"
        if verdict == "SKIP" and e["why"]:
            line += f"  [{e['why'][0]}]"
        terminalreporter.write_line(line)


# -- shared fixtures -------------------------------------------------------

@pytest.fixture
def workspace(tmp_path):
    """Small synthetic embedding set with vocab and scenario inputs on disk."""
    rng = np.random.default_rng(7)
    n = 200
    x = rng.standard_normal((n, 16)).astype(np.float32)
    save_embeddings(x, tmp_path / "a.npy")
    save_embeddings(x + 0.3 * rng.standard_normal((n, 16)).astype(np.float32), tmp_path / "b.npy")
    words = [f"w{i}" for i in range(n)]
    save_vocab(["▁" + w if i % 3 else w for i, w in enumerate(words)], tmp_path / "vocab.txt")
    (tmp_path / "groups.json").write_text(json.dumps(
        {"alpha": words[1:11], "beta": words[20:30], "RANDOM": None}), encoding="utf-8")
    with open(tmp_path / "rel.tsv", "w", encoding="utf-8") as fh:
        for i in range(30):
            fh.write(f"{words[i + 1]}\t{'AB'[i % 2]}\t{words[i + 50]}\n")
    (tmp_path / "concepts.txt").write_text("\n".join(words[100:120]) + "\n", encoding="utf-8")
    (tmp_path / "gt.tsv").write_text(
        "".join(f"{words[100 + i]}\t{words[101 + i]}\n" for i in range(0, 18, 2)), encoding="utf-8")
    return tmp_path
