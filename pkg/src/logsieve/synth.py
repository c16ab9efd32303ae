"""Seeded synthetic CI logs with known line relevance.

Used by the demos and the desk-scale test suites: relevant lines carry
error/exception/failed-task vocabulary, irrelevant lines come from setup
and progress boilerplate, mirroring the texture of real build logs.
"""

from __future__ import annotations

import numpy as np

from .corpus import LogDocument, LogLine, normalize_line

_RELEVANT_TEMPLATES = (
    "Execution failed for task ':app:{task}'.",
    "> Task :app:{task} FAILED",
    "FAILURE: Build failed with an exception.",
    "java.lang.{exc}: {detail} in module {module}",
    "Caused by: java.io.{exc}: {detail}",
    "error: cannot find symbol {symbol} in {module}",
    "AssertionError: expected {n} but was {m}",
    "{module}Test > test{task} FAILED",
    "Process 'command gradle' finished with non-zero exit value {m}",
    "e: {module}.kt: ({n}, {m}): unresolved reference: {symbol}",
)

_IRRELEVANT_TEMPLATES = (
    "Set up job",
    "Preparing environment for run {n}",
    "Loading package information...",
    "Downloading https://services.gradle.org/distributions/gradle-{n}.{m}-bin.zip",
    "[command]/usr/local/bin/{tool} --version",
    "Installing dependency {module} version {n}.{m}",
    "Progress: [{n} of 9] configuring {module}",
    "Restored cache entry for key gradle-{n}{m}",
    "Welcome to Gradle {n}.{m}!",
    "Starting a Gradle Daemon, ({n} busy Daemons could not be reused)",
)

_TASKS = ("compileDebugJava", "lintRelease", "testDebugUnitTest", "assembleRelease", "checkStyle")
_EXCEPTIONS = ("NullPointerException", "FileNotFoundException", "IllegalStateException", "OutOfMemoryError")
_DETAILS = ("resource missing", "connection reset", "value out of range", "manifest merge conflict")
_MODULES = ("core", "app", "network", "storage", "ui")
_SYMBOLS = ("buildFlavor", "apiClient", "dbHandle", "viewBinder")
_TOOLS = ("sdkmanager", "adb", "gradle", "javac")


def _fill(template: str, rng) -> str:
    return template.format(
        task=_TASKS[rng.integers(len(_TASKS))],
        exc=_EXCEPTIONS[rng.integers(len(_EXCEPTIONS))],
        detail=_DETAILS[rng.integers(len(_DETAILS))],
        module=_MODULES[rng.integers(len(_MODULES))],
        symbol=_SYMBOLS[rng.integers(len(_SYMBOLS))],
        tool=_TOOLS[rng.integers(len(_TOOLS))],
        n=int(rng.integers(1, 10)),
        m=int(rng.integers(1, 10)),
    )


def make_synthetic_corpus(
    n_lines: int = 5000,
    seed: int = 0,
    relevant_fraction: float = 0.5,
    repo: str = "synthetic/build",
    run_id: str = "1",
    with_timestamps: bool = True,
):
    """Build one labeled document.

    Returns (document, labels) where labels maps
    (repo, run_id, line_index) -> 0/1. The relevant share is exact:
    round(n_lines * relevant_fraction) lines, shuffled into place.
    """
    rng = np.random.default_rng(seed)
    n_relevant = int(round(n_lines * relevant_fraction))
    flags = np.zeros(n_lines, dtype=np.int64)
    flags[:n_relevant] = 1
    rng.shuffle(flags)
    lines = []
    labels = {}
    for i, flag in enumerate(flags):
        pool = _RELEVANT_TEMPLATES if flag else _IRRELEVANT_TEMPLATES
        body = _fill(pool[rng.integers(len(pool))], rng)
        if with_timestamps:
            second = i % 60
            minute = (i // 60) % 60
            hour = 4 + (i // 3600) % 20
            raw = f"2025-05-01T{hour:02d}:{minute:02d}:{second:02d}.{int(rng.integers(10**6)):07d}Z {body}"
        else:
            raw = body
        timestamp, content = normalize_line(raw)
        lines.append(LogLine(index=i, timestamp=timestamp, content=content, raw=raw))
        labels[(repo, run_id, i)] = int(flag)
    doc = LogDocument(repo=repo, run_id=run_id, conclusion="failure", lines=tuple(lines))
    return doc, labels
