"""Fidelity comparison of responses produced from full vs reduced logs.

Native metrics (cosine over TF-IDF, ROUGE-1/L F1, BLEU-4, exact match) need
no network. An optional chat-completion client generates responses and
judge scores against any OpenAI-compatible endpoint; every exchange is
archived so reports can be reproduced later in replay mode without network
access.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import socket
import time
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    AuthError,
    JudgeParseError,
    RateLimitError,
    TransportError,
    ValidationError,
)

PROMPT_KINDS = ("explain", "categorize")

_PROMPT_TEMPLATES = {
    "explain": (
        "Here is the log output from a GitHub Action workflow run: [log.txt]. "
        "In at most 500 words, please explain why this workflow failed."
    ),
    "categorize": (
        "Here is the log output from a GitHub Action workflow run: [log.txt]. "
        "Please provide a category for the run failure. Only provide the "
        "answer. Do not include any additional reasons or details."
    ),
}

RUBRIC_VERSION = "equivalence-rubric/1"

_RUBRIC_TEMPLATE = (
    "[{version}]\n"
    "You are scoring how semantically equivalent two responses are.\n"
    "Rate Response B against Response A on a scale from 0 to 10, where 10\n"
    "means the responses convey identical meaning and 0 means they are\n"
    "unrelated. Reply with a single number from 0 to 10 and nothing else.\n"
    "\n"
    "Response A:\n{full}\n"
    "\n"
    "Response B:\n{reduced}\n"
)

_REPROMPT_SUFFIX = "\n\nReply with only a single number between 0 and 10."


def build_prompt(kind: str, log_text: str) -> str:
    """Fill a task prompt with the log body. Byte-stable for equal inputs."""
    if kind not in PROMPT_KINDS:
        raise ValidationError(f"prompt kind must be one of {PROMPT_KINDS}")
    if not log_text:
        raise ValidationError("log_text must be non-empty (use the reduction sentinel)")
    return _PROMPT_TEMPLATES[kind].replace("[log.txt]", log_text, 1)


def cosine_similarity(u, v) -> float:
    """u.v / (|u||v|); zero vectors compare as 0 by convention."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    value = float(u @ v / (nu * nv))
    return min(1.0, max(-1.0, value))


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _metric_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def rouge1_f1(candidate: str, reference: str) -> float:
    """Unigram-overlap F1 with clipped counts."""
    cand = Counter(_metric_tokens(candidate))
    ref = Counter(_metric_tokens(reference))
    n_cand = sum(cand.values())
    n_ref = sum(ref.values())
    if n_cand == 0 or n_ref == 0:
        return 0.0
    overlap = sum(min(count, ref[token]) for token, count in cand.items())
    precision = overlap / n_cand
    recall = overlap / n_ref
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[-1]))
        previous = current
    return previous[-1]


def rougel_f1(candidate: str, reference: str) -> float:
    """Longest-common-subsequence F1."""
    cand = _metric_tokens(candidate)
    ref = _metric_tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """Single-reference BLEU-4.

    Geometric mean of modified n-gram precisions for n = 1..4; orders >= 2
    get add-one smoothing when their clipped count is zero, so short
    in-vocabulary candidates do not zero out. Brevity penalty
    min(1, e^(1 - r/c)).
    """
    cand = _metric_tokens(candidate)
    ref = _metric_tokens(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand_ngrams = _ngram_counts(cand, n)
        ref_ngrams = _ngram_counts(ref, n)
        clipped = sum(
            min(count, ref_ngrams[gram]) for gram, count in cand_ngrams.items()
        )
        total = sum(cand_ngrams.values())
        if n == 1:
            if clipped == 0:
                return 0.0
            precision = clipped / total
        elif clipped == 0:
            precision = (clipped + 1) / (total + 1)
        else:
            precision = clipped / total
        log_sum += np.log(precision)
    brevity = min(1.0, float(np.exp(1.0 - len(ref) / len(cand))))
    return min(1.0, brevity * float(np.exp(log_sum / 4.0)))


def _normalize_for_match(text: str) -> str:
    collapsed = re.sub(r"\s+", " ", text.strip())
    folded = collapsed.casefold()
    return folded.removesuffix(".")


def exact_match(a: str, b: str) -> int:
    """1 iff the texts agree after trimming, whitespace collapsing,
    casefolding, and trailing-period removal."""
    return int(_normalize_for_match(a) == _normalize_for_match(b))


@dataclass(frozen=True)
class SimilarityReport:
    """Metric vector comparing a reduced-log response (candidate) against
    the full-log response (reference)."""

    cosine: float
    rouge1_f1: float
    rougel_f1: float
    bleu: float
    exact_match: int
    judge_score: float | None = None
    bert_judge_f1: float | None = None


@dataclass(frozen=True)
class JudgeEndpoint:
    """An OpenAI-compatible chat-completion endpoint.

    The API key is read from the named environment variable and never
    logged or archived. Temperature is pinned to 0 so judged reports are as
    reproducible as the service allows.
    """

    base_url: str
    model: str
    api_key_env: str = "LOGSIEVE_JUDGE_KEY"
    timeout: float = 60.0
    temperature: float = 0.0


def request_hash(model: str, prompt: str) -> str:
    digest = hashlib.sha256()
    digest.update(model.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(prompt.encode("utf-8"))
    return digest.hexdigest()


class ResponseArchive:
    """Append-only JSON Lines archive of request/response exchanges.

    Each record is {request_hash, prompt, response, model, timestamp}.
    Replay mode serves responses from here so reports stay reproducible
    after the upstream model drifts or disappears.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._index: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        self._index[record["request_hash"]] = record
                    except (json.JSONDecodeError, KeyError) as err:
                        raise ValidationError(
                            f"{path}:{lineno}: malformed archive record: {err}"
                        ) from err

    def __len__(self) -> int:
        return len(self._index)

    def get(self, key: str) -> dict | None:
        return self._index.get(key)

    def record(self, *, prompt: str, response: str, model: str) -> dict:
        key = request_hash(model, prompt)
        if key in self._index:
            return self._index[key]
        entry = {
            "request_hash": key,
            "prompt": prompt,
            "response": response,
            "model": model,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
        self._index[key] = entry
        return entry


def _default_post(url: str, headers: dict, body: bytes, timeout: float):
    request = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()
    except (urllib.error.URLError, socket.timeout, OSError) as err:
        raise TransportError(f"could not reach {url}: {err}") from err


# Patchable for tests; exponential backoff between retries.
_sleep = time.sleep

_MAX_RETRIES = 3


def generate_response(
    endpoint: JudgeEndpoint,
    prompt: str,
    *,
    archive: ResponseArchive | None = None,
    transport=None,
    replay_only: bool = False,
) -> str:
    """Get the completion for a prompt, via archive replay when possible.

    Live requests retry transient failures (timeouts, 429, 5xx) up to three
    times with exponential backoff; auth failures do not retry. Successful
    exchanges are appended to the archive.
    """
    key = request_hash(endpoint.model, prompt)
    if archive is not None:
        cached = archive.get(key)
        if cached is not None:
            return cached["response"]
    if replay_only:
        raise TransportError(
            f"response {key[:12]} not in archive and replay mode forbids "
            f"network access"
        )
    post = transport or _default_post
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(endpoint.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = json.dumps(
        {
            "model": endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": endpoint.temperature,
        }
    ).encode("utf-8")
    last_error: Exception | None = None
    for attempt in range(1 + _MAX_RETRIES):
        if attempt:
            _sleep(2.0 ** (attempt - 1))
        try:
            status, payload = post(url, headers, body, endpoint.timeout)
        except TransportError as err:
            last_error = err
            continue
        if status in (401, 403):
            raise AuthError(
                f"HTTP {status} from {endpoint.base_url}: check the key in "
                f"${endpoint.api_key_env}",
                status=status,
            )
        if status == 429:
            last_error = RateLimitError(
                f"HTTP 429 from {endpoint.base_url}", status=429
            )
            continue
        if status >= 500:
            last_error = TransportError(
                f"HTTP {status} from {endpoint.base_url}", status=status
            )
            continue
        if status != 200:
            raise TransportError(
                f"HTTP {status} from {endpoint.base_url}", status=status
            )
        try:
            response_text = json.loads(payload)["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as err:
            raise TransportError(
                f"malformed completion payload from {endpoint.base_url}: {err}"
            ) from err
        if archive is not None:
            archive.record(prompt=prompt, response=response_text, model=endpoint.model)
        return response_text
    raise type(last_error)(
        f"giving up after {_MAX_RETRIES} retries: {last_error}",
        status=getattr(last_error, "status", None),
    )


_SCORE_RE = re.compile(r"(?<![\d.])(10(?:\.0+)?|\d(?:\.\d+)?)(?![\d.])")


def _parse_judge_score(text: str) -> float | None:
    m = _SCORE_RE.search(text)
    if m is None:
        return None
    value = float(m.group(1))
    if not 0.0 <= value <= 10.0:
        return None
    return value


def judge_rubric_prompt(full_response: str, reduced_response: str) -> str:
    return _RUBRIC_TEMPLATE.format(
        version=RUBRIC_VERSION, full=full_response, reduced=reduced_response
    )


def judge_score(
    endpoint: JudgeEndpoint,
    full_response: str,
    reduced_response: str,
    *,
    archive: ResponseArchive | None = None,
    transport=None,
    replay_only: bool = False,
) -> float:
    """Ask the judge model to rate semantic equivalence; returns score/10.

    The rubric text is versioned and archived with the exchange. An
    unparseable reply triggers one reprompt before raising JudgeParseError.
    """
    if not full_response or not reduced_response:
        raise ValidationError("judge_score requires two non-empty responses")
    prompt = judge_rubric_prompt(full_response, reduced_response)
    reply = generate_response(
        endpoint, prompt, archive=archive, transport=transport, replay_only=replay_only
    )
    value = _parse_judge_score(reply)
    if value is None:
        reply = generate_response(
            endpoint,
            prompt + _REPROMPT_SUFFIX,
            archive=archive,
            transport=transport,
            replay_only=replay_only,
        )
        value = _parse_judge_score(reply)
        if value is None:
            raise JudgeParseError(
                f"judge reply is not a 0-10 score after one reprompt: {reply[:80]!r}"
            )
    return value / 10.0


def _pair_cosine(full: str, reduced: str) -> float:
    from .features import fit_tfidf, transform_tfidf

    try:
        model = fit_tfidf([full, reduced], min_df=1)
    except ValidationError:
        # Neither text has any terms; identical-empty counts as aligned.
        return 1.0 if full == reduced else 0.0
    u = transform_tfidf(model, full).toarray().ravel()
    v = transform_tfidf(model, reduced).toarray().ravel()
    return cosine_similarity(u, v)


def compare_responses(
    full: str,
    reduced: str,
    *,
    vectors: tuple | None = None,
    judge_endpoint: JudgeEndpoint | None = None,
    archive: ResponseArchive | None = None,
    transport=None,
    replay_only: bool = False,
    bert_judge_f1: float | None = None,
) -> SimilarityReport:
    """Score a reduced-log response against the full-log response.

    The reduced response is always the candidate and the full response the
    reference for the asymmetric metrics. Cosine uses TF-IDF fitted on the
    pair unless precomputed ``vectors`` (full_vec, reduced_vec) are given.
    The judge field is filled only when an endpoint is configured; a judge
    reply that cannot be parsed leaves the field absent.
    """
    if vectors is not None:
        cosine = cosine_similarity(vectors[0], vectors[1])
    else:
        cosine = _pair_cosine(full, reduced)
    judge = None
    if judge_endpoint is not None and full and reduced:
        try:
            judge = judge_score(
                judge_endpoint,
                full,
                reduced,
                archive=archive,
                transport=transport,
                replay_only=replay_only,
            )
        except JudgeParseError:
            judge = None
    return SimilarityReport(
        cosine=cosine,
        rouge1_f1=rouge1_f1(reduced, full),
        rougel_f1=rougel_f1(reduced, full),
        bleu=bleu(reduced, full),
        exact_match=exact_match(full, reduced),
        judge_score=judge,
        bert_judge_f1=bert_judge_f1,
    )


def load_bert_scores(path) -> dict[tuple[str, str, str], float]:
    """Read an external contextual-scorer CSV: repo,run_id,strategy,bert_f1."""
    import csv

    out: dict[tuple[str, str, str], float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"repo", "run_id", "strategy", "bert_f1"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                value = float(row["bert_f1"])
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: bert_f1 must be a number"
                ) from None
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{path}:{lineno}: bert_f1 out of [0, 1]")
            out[(row["repo"], row["run_id"], row["strategy"])] = value
    return out
