"""Ingestion and normalization of CI run logs.

A run log is an ordered list of lines. GitHub Actions prefixes each line
with an ISO-8601 timestamp and may embed ANSI terminal escapes; both are
stripped into a normalized ``content`` while the verbatim ``raw`` text is
kept for lossless round-trips.
"""

from __future__ import annotations

import io
import json
import os
import re
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import AuthError, RetentionExpiredError, TransportError, ValidationError

TOKEN_ENV_VAR = "LOGSIEVE_GITHUB_TOKEN"

CONCLUSIONS = ("failure", "success", "cancelled", "skipped")

# Leading run-log timestamp: date T time Z, optional fraction up to 7 digits,
# followed by exactly one space. Anchored at column 0 only.
_TIMESTAMP_RE = re.compile(r"^(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d{1,7})?Z) ")

# CSI escape sequences: ESC [ params intermediates final-byte.
_ANSI_RE = re.compile(r"\x1b\[[0-?]*[ -/]*[@-~]")

_INSTANT_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,7}))?Z$"
)


@dataclass(frozen=True)
class LogLine:
    """One physical log line.

    ``timestamp`` holds the leading instant verbatim (fractional seconds in
    these logs can carry 7 digits, beyond datetime microsecond precision);
    use :func:`parse_instant` to get a datetime. ``raw`` round-trips
    byte-exactly to the source line.
    """

    index: int
    timestamp: str | None
    content: str
    raw: str


@dataclass(frozen=True)
class LogDocument:
    """An immutable run log plus run metadata."""

    repo: str
    run_id: str
    conclusion: str
    lines: tuple[LogLine, ...]

    def __post_init__(self):
        if self.conclusion not in CONCLUSIONS:
            raise ValidationError(
                f"conclusion must be one of {CONCLUSIONS}, got {self.conclusion!r}"
            )
        if not self.lines:
            raise ValidationError("document must be non-empty")
        for i, line in enumerate(self.lines):
            if line.index != i:
                raise ValidationError(
                    f"line indices must be 0-based and contiguous; "
                    f"position {i} has index {line.index}"
                )

    @property
    def key(self) -> tuple[str, str]:
        return (self.repo, self.run_id)

    def line_keys(self):
        return [(self.repo, self.run_id, line.index) for line in self.lines]


def normalize_line(raw: str) -> tuple[str | None, str]:
    """Split a raw line into (timestamp, normalized content).

    Strips the column-0 timestamp prefix, removes CSI escape sequences, and
    drops trailing carriage returns. Runs to a fixpoint so the result is
    idempotent; repeated leading timestamps (never emitted by the CI runner)
    are discarded to keep the no-leading-timestamp invariant.
    """
    timestamp = None
    content = raw
    while True:
        before = content
        m = _TIMESTAMP_RE.match(content)
        if m:
            if timestamp is None:
                timestamp = m.group(1)
            content = content[m.end():]
        content = _ANSI_RE.sub("", content)
        content = content.rstrip("\r")
        if content == before:
            return timestamp, content


def parse_instant(timestamp: str) -> datetime:
    """Parse a log timestamp to an aware UTC datetime.

    Fractional digits beyond microseconds are truncated.
    """
    m = _INSTANT_RE.match(timestamp)
    if m is None:
        raise ValidationError(f"not a log timestamp: {timestamp!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    frac = m.group(7) or ""
    micros = int(frac[:6].ljust(6, "0")) if frac else 0
    return datetime(year, month, day, hour, minute, second, micros, tzinfo=timezone.utc)


def _split_physical_lines(text: str) -> list[str]:
    parts = text.split("\n")
    if parts and parts[-1] == "" and text.endswith("\n"):
        parts.pop()
    return parts


def _document_from_text(text: str, repo: str, run_id: str, conclusion: str) -> LogDocument:
    if text == "":
        raise ValidationError(f"document must be non-empty: {repo} run {run_id}")
    lines = []
    for i, raw in enumerate(_split_physical_lines(text)):
        timestamp, content = normalize_line(raw)
        lines.append(LogLine(index=i, timestamp=timestamp, content=content, raw=raw))
    return LogDocument(repo=repo, run_id=run_id, conclusion=conclusion, lines=tuple(lines))


def load_local(path, repo: str, run_id: str, conclusion: str = "failure") -> LogDocument:
    """Load a run log from a local text file.

    Invalid UTF-8 bytes are replaced rather than rejected; CI logs often
    embed binary fragments. Raises on missing or empty files.
    """
    data = Path(path).read_bytes()
    text = data.decode("utf-8", errors="replace")
    return _document_from_text(text, repo, run_id, conclusion)


def _default_transport(url: str, headers: dict, timeout: float) -> tuple[int, bytes]:
    request = urllib.request.Request(url, headers=headers)
    try:
        with urllib.request.urlopen(request, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()
    except (urllib.error.URLError, OSError) as err:
        raise TransportError(f"could not reach {url}: {err}") from err


def fetch_run_logs(
    repo: str,
    run_id: str,
    auth_token: str | None = None,
    *,
    conclusion: str = "failure",
    transport=None,
    timeout: float = 60.0,
) -> LogDocument:
    """Download and assemble the log archive for one workflow run.

    The hosting API serves run logs as a zip of per-step text files; the
    step files are concatenated in lexicographic entry-name order (the API
    does not define an order). The token falls back to the
    ``LOGSIEVE_GITHUB_TOKEN`` environment variable.
    """
    token = auth_token or os.environ.get(TOKEN_ENV_VAR)
    url = f"https://api.github.com/repos/{repo}/actions/runs/{run_id}/logs"
    headers = {"Accept": "application/vnd.github+json", "User-Agent": "logsieve"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    send = transport or _default_transport
    status, body = send(url, headers, timeout)
    if status in (401, 403):
        raise AuthError(
            f"HTTP {status} fetching logs for {repo} run {run_id}: "
            f"check that the token grants actions read access",
            status=status,
        )
    if status == 404:
        raise RetentionExpiredError(
            f"HTTP 404 fetching logs for {repo} run {run_id}: the run was not "
            f"found; run logs are kept for 90 days, so this run has likely "
            f"expired",
            status=404,
        )
    if status == 410:
        raise TransportError(
            f"HTTP 410 fetching logs for {repo} run {run_id}: the logs were "
            f"deleted; re-run the workflow to produce fresh logs",
            status=410,
        )
    if status != 200:
        raise TransportError(
            f"HTTP {status} fetching logs for {repo} run {run_id}", status=status
        )
    try:
        archive = zipfile.ZipFile(io.BytesIO(body))
    except zipfile.BadZipFile as err:
        raise TransportError(
            f"log archive for {repo} run {run_id} is not a valid zip"
        ) from err
    names = sorted(n for n in archive.namelist() if not n.endswith("/"))
    text = "".join(
        archive.read(name).decode("utf-8", errors="replace") for name in names
    )
    return _document_from_text(text, repo, run_id, conclusion)


def write_jsonl(documents, path) -> None:
    """Write documents in the canonical corpus format (JSON Lines, UTF-8, LF).

    One object per log line: {repo, run_id, conclusion, line_index,
    timestamp, content, raw}.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in documents:
            for line in doc.lines:
                record = {
                    "repo": doc.repo,
                    "run_id": doc.run_id,
                    "conclusion": doc.conclusion,
                    "line_index": line.index,
                    "timestamp": line.timestamp,
                    "content": line.content,
                    "raw": line.raw,
                }
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
                fh.write("\n")


def read_jsonl(path) -> list[LogDocument]:
    """Read documents from the canonical corpus format."""
    groups: dict[tuple[str, str], dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as err:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {err}") from err
            try:
                key = (record["repo"], record["run_id"])
                entry = groups.setdefault(
                    key, {"conclusion": record["conclusion"], "lines": []}
                )
                entry["lines"].append(
                    LogLine(
                        index=record["line_index"],
                        timestamp=record["timestamp"],
                        content=record["content"],
                        raw=record["raw"],
                    )
                )
            except KeyError as err:
                raise ValidationError(f"{path}:{lineno}: missing field {err}") from err
    documents = []
    for (repo, run_id), entry in groups.items():
        lines = tuple(sorted(entry["lines"], key=lambda l: l.index))
        documents.append(
            LogDocument(
                repo=repo, run_id=run_id, conclusion=entry["conclusion"], lines=lines
            )
        )
    return documents
