"""Score how faithfully reduced-log responses track full-log responses.

Run with: python demos/05_response_similarity.py
"""

from logsieve import evaluate, reports

# The two downstream task prompts; the log body fills the [log.txt] slot.
print(evaluate.build_prompt("categorize", "<reduced log body goes here>"))
print()

# Response pairs as they would come back from an analysis model: one pair
# per run, full-log response first, reduced-log response second.
PAIRS = [
    (
        "acme/widget", "101",
        "The build failed because the task :app:compileDebugJava could not "
        "resolve the dependency com.squareup.moshi, so compilation aborted.",
        "The build failed: :app:compileDebugJava could not resolve a "
        "dependency (com.squareup.moshi).",
    ),
    (
        "acme/gadget", "102",
        "Unit tests failed: StorageManagerTest.testRestore expected 4 "
        "entries but found 3.",
        "Unit tests failed: StorageManagerTest.testRestore expected 4 "
        "entries but found 3.",
    ),
    (
        "acme/rotor", "103",
        "The failure is an environment error: the SDK license was not "
        "accepted on the runner.",
        "The release build could not be signed because the keystore secret "
        "was missing.",
    ),
]

entries = []
for repo, run_id, full, reduced in PAIRS:
    report = evaluate.compare_responses(full, reduced)
    entries.append((repo, run_id, "sieve", report))
    print(f"{repo} run {run_id}:")
    print(f"  cosine {report.cosine:.3f}  rouge1 {report.rouge1_f1:.3f}  "
          f"rougeL {report.rougel_f1:.3f}  bleu {report.bleu:.3f}  "
          f"exact {report.exact_match}")

# Category answers count as matching under whitespace/case/period
# normalization only.
print("\nexact match, normalized:",
      evaluate.exact_match("Compilation Error", "compilation error."))

# The report table adds Min/Mean/Median/Max summary rows and an
# exact-match tally.
rows = reports.similarity_rows(entries)
for row in rows[len(PAIRS):]:
    print(f"{row[0]:<7}", ["" if v is None else (f"{v:.3f}" if isinstance(v, float) else v) for v in row[3:]])
