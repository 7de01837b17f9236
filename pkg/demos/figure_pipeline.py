"""End-to-end CSV pipeline at reduced scale.

Runs the first figure family's experiment with a small replication count,
writes the replication/summary CSVs, and shows the summary columns that
the plotting frontend consumes. Render the files afterwards with the
separate plots package:

    python -m ridgeiv_plots fig1 --in demo_results --out demo_figures
"""

from dataclasses import replace
from pathlib import Path

import ridgeiv as rv

OUT = Path("demo_results")
REPS = 40  # desk-scale preview; the published runs use 500

for config in rv.figure_configs():
    if config.figure_tag != "fig1":
        continue
    reduced = replace(config, replications=REPS)
    table = rv.run(reduced, workers=2)
    for path in rv.write_figure_csvs(table, OUT):
        print("wrote", path)

summary = (OUT / "fig1_0.75.csv").read_text().splitlines()
print("\nsummary header:", summary[0])
for line in summary[1:4]:
    print("  ", line)
print(f"\n{len(summary) - 1} summary rows; 'theory_value' carries the limit "
      "bias curve so plots never recompute it.")
