# %% [markdown]
# # Command-line workflow
#
# Each subcommand writes CSV/JSON artifacts and a `manifest.json` into `--out`.
# The same runs can be described in an INI file with `[params]` and `[run]`.

# %%
import json
import pathlib
import tempfile

from pucci_lane_emden.cli import main

out = pathlib.Path(tempfile.mkdtemp())
main(["shoot", "--lam", "1", "--Lam", "1", "--N", "3", "--p", "5", "--q", "5",
      "--xi", "1", "--eta", "1", "--out", str(out / "shoot")])
print(json.loads((out / "shoot" / "summary.json").read_text()))

# %%
main(["scan", "--lam", "1", "--Lam", "1", "--N", "3", "--theorem", "laplacian",
      "--grid", "2,7/2,7", "--out", str(out / "scan")])
print((out / "scan" / "scan.csv").read_text())

# %%
ini = out / "run.ini"
ini.write_text("[params]\nlam = 1\nLam = 2\nN = 3\np = 2\nq = 3\n"
               "[run]\ncommand = points\n")
main(["--config", str(ini), "--out", str(out / "points")])
print([p["name"] for p in json.loads((out / "points" / "points.json").read_text())])
