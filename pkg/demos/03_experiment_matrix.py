"""
Running an experiment matrix
============================

The runner expands datasets x tasks x filters x methods x seeds into
independent cells, writes one CSV row per metric, and aggregates with every
graph weighted equally. The same run is available as
``python -m fairfilter run demos/acceptance_config.json``.
"""

from pathlib import Path

from fairfilter.experiment import RunConfig, aggregate, enumerate_cells, read_rows, report, run

here = Path(__file__).resolve().parent
config = RunConfig.load(here / "acceptance_config.json")
print(len(enumerate_cells(config)), "cells")

path = run(config)
rows = read_rows(path)
print(path, len(rows), "rows")
print(report(aggregate(rows)))

# a second call finds every cell done and rewrites the same bytes
before = path.read_bytes()
run(config)
assert path.read_bytes() == before
