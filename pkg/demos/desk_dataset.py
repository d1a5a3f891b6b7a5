"""
A desk-scale dataset
====================

Generate the 128 x 128 fixture dataset (two synthetic layered models, five
samples each, the first of each an empty-network control) and score the
do-nothing baseline, which hands the degraded image back as the
"enhanced" one. Takes a few minutes on one core.

The same run from the shell::

    chimneysim generate --config fixtures/desk.toml --out demo_output/desk --workers 4
    chimneysim eval demo_output/desk/manifest.json demo_output/desk --pred-name gas.f32
"""
import json
from pathlib import Path

from chimneysim.config import load_config
from chimneysim.pipeline import eval_run, generate_dataset

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "fixtures" / "desk.toml").with_overrides(
    out="demo_output/desk", workers=4)

manifest = generate_dataset(cfg, lambda k, n, sid, status: print(f"[{k}/{n}] {sid} {status}"))
print(json.dumps(manifest["counts"]), manifest["splits"])

for row in manifest["samples"]:
    s = row["stats"]
    if s["mask_cells"]:
        ratio = s["mean_abs_diff_inside_mask"] / s["mean_abs_diff_outside_mask"]
        print(f"{row['sample_id']}: mask {s['mask_cells']} cells, |X-Y| inside/outside {ratio:.1f}")

report = eval_run(Path(cfg.dataset.out) / "manifest.json", cfg.dataset.out,
                  pred_name="gas.f32", split="test")
print("do-nothing baseline on the test split:",
      {k: round(v["mean"], 3) for k, v in report["aggregate"].items() if v["mean"] is not None})
