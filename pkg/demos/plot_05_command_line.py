"""
End to end with the command line
================================

``hdoms synth`` writes a benchmark, ``hdoms encode`` turns the library into a
cache and ``hdoms search`` writes accepted matches as TSV.
"""

import csv
import json
import os
import tempfile

from hdoms.cli import main

workdir = tempfile.mkdtemp(prefix="hdoms_demo_")
main(["synth", "--out-dir", workdir, "--seed", "5"])
library, queries, truth = (os.path.join(workdir, n)
                           for n in ("library.mgf", "queries.mgf", "truth.tsv"))
cache = os.path.join(workdir, "library.homs")
output = os.path.join(workdir, "matches.tsv")
stats = os.path.join(workdir, "stats.json")

main(["encode", "--library", library, "--cache", cache])
main(["search", "--query", queries, "--cache", cache, "--output", output,
      "--stats", stats, "--benchmark-kernel"])

###############################################################################
# Score the output against the ground truth.

with open(truth) as handle:
    source = {r["query_id"]: r["source_id"] for r in csv.DictReader(handle, delimiter="\t")}
with open(output) as handle:
    rows = list(csv.DictReader(handle, delimiter="\t"))
correct = sum(source[r["query_id"]] == r["library_id"] for r in rows)
print(f"{correct}/{len(source)} queries matched to their source, "
      f"{len(rows) - correct} wrong among {len(rows)} accepted")
with open(stats) as handle:
    print("packed kernel speedup:", round(json.load(handle)["kernel"]["speedup"], 1))
