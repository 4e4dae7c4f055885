"""
How the optimized sum SE responds to the design knobs
=====================================================

A few small sweeps at desk scale: surface size, element size and BS
transmit power. Each point is the best of five optimized starts.
"""

from starsfd import build_correlations, desk_config, make_variant, sum_se
from starsfd.cli import solve_mode
from starsfd.optimizer import best_restart, multi_start

cfg = desk_config()

print("N    lambda/4  lambda/6")
for side in (4, 6, 8):
    row = []
    for frac in (0.25, 1 / 6):
        ul, dl = solve_mode(cfg.replace(N_h=side, N_v=side, elem_size_frac=frac), "FD_STARS",
                            restarts=5, seed=0)
        row.append(ul + dl)
    print(f"{side * side:3d}  {row[0]:8.3f}  {row[1]:8.3f}")

# More BS power helps the downlink but leaks into the uplink receiver as
# self and loop interference.
print("\np_b [dBm]  UL SE   DL SE")
for p_b in (20, 25, 30, 35, 40):
    ul, dl = solve_mode(cfg.replace(p_b_dBm=float(p_b)), "FD_STARS", restarts=5, seed=0)
    print(f"{p_b:9d}  {ul:6.3f}  {dl:6.3f}")

# More receive antennas only touch the uplink: the downlink terms do not
# involve the receive array at all.
corr = build_correlations(cfg)
pbm = best_restart(multi_start(cfg, corr, make_variant(cfg, corr), 5, 0)).pbm
print("\nM_R   UL SE   DL SE")
for m in (16, 32, 64, 128):
    c = cfg.replace(M_R=m)
    rep = sum_se(c, build_correlations(c), pbm)
    print(f"{m:3d}  {rep.ul_se:6.3f}  {rep.dl_se:6.3f}")
