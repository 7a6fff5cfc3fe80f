"""Complexity accounting for both variants.

Prints the per-stage FLOPs-per-second and parameter tables behind the
headline numbers (~620 MFLOPS for nolace, ~220 MFLOPS and ~0.9M params
for lace at n_r=96, n_h=256), plus how the budget scales with the
hidden size.

Run: python3 demos/03_complexity.py
"""

from nolace import count_flops, default_config

for variant in ("lace", "nolace"):
    cfg = default_config(variant)
    report = count_flops(cfg)
    print(f"=== {variant}  (n_r={cfg.n_r}, n_h={cfg.n_h}) ===")
    print(report.format_table())
    print()

print("=== scaling with hidden size (nolace) ===")
print(f"{'n_h':>6} {'MFLOPS':>10} {'params':>12}")
for n_h in (64, 128, 192, 256, 384):
    r = count_flops(default_config("nolace", n_h=n_h))
    print(f"{n_h:>6} {r.total_mflops:>10.1f} {r.total_params:>12,}")

print()
print("=== where the nolace budget goes ===")
r = count_flops(default_config("nolace"))
groups = {"encoder": 0.0, "feature transforms": 0.0,
          "comb/conv filters": 0.0, "temporal shaping": 0.0}
for item in r.items:
    if item.name.startswith("encoder"):
        groups["encoder"] += item.mflops
    elif item.name.startswith("ftrans"):
        groups["feature transforms"] += item.mflops
    elif item.name.startswith("adashape"):
        groups["temporal shaping"] += item.mflops
    else:
        groups["comb/conv filters"] += item.mflops
for name, mflops in groups.items():
    print(f"{name:>20}: {mflops:7.1f} MFLOPS  ({mflops / r.total_mflops:5.1%})")
