"""Walk through log ingestion: normalization, timestamps, and the corpus format.

Run with: python demos/01_ingest_and_normalize.py
"""

import tempfile
from pathlib import Path

from logsieve import corpus

# A miniature CI run log the way the runner emits it: every line carries an
# ISO-8601 timestamp prefix, and failures often embed ANSI color codes.
RAW_LOG = """\
2025-05-01T04:19:28.9669135Z [command]/usr/local/lib/android/sdk/cmdline-tools/16.0/bin/sdkmanager tools
2025-05-01T04:19:29.6442057Z Loading package information...
2025-05-01T04:19:29.7185866Z [ ] 3
2025-05-01T04:23:19.7676299Z Execution failed for task ':app:compileOpenReleaseUnitTestJavaWithJavac'.
2025-05-01T04:23:19.9000000Z \x1b[31mFAILURE:\x1b[0m Build failed with an exception.
"""

work = Path(tempfile.mkdtemp(prefix="logsieve-demo-"))
log_path = work / "acme__widget__42.log"
log_path.write_text(RAW_LOG)

doc = corpus.load_local(log_path, repo="acme/widget", run_id="42")
print(f"loaded {doc.repo} run {doc.run_id}: {len(doc.lines)} lines\n")

for line in doc.lines:
    print(f"  [{line.index}] ts={line.timestamp}")
    print(f"      content: {line.content!r}")

# Timestamps are kept verbatim (they carry 7 fractional digits, more than a
# datetime can hold); parse_instant converts when you need arithmetic.
first = doc.lines[0]
print("\nfirst line instant:", corpus.parse_instant(first.timestamp))

# The canonical corpus format is JSON Lines, one object per log line.
corpus_path = work / "corpus.jsonl"
corpus.write_jsonl([doc], corpus_path)
print("\ncorpus file sample:")
print(corpus_path.read_text().splitlines()[0][:120], "...")

# Round trip: everything (raw bytes included) survives.
reloaded = corpus.read_jsonl(corpus_path)
assert reloaded == [doc]
print("\nround trip exact:", reloaded == [doc])
