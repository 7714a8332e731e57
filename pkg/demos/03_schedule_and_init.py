"""
Learning-rate schedule and initial weight ranges
================================================

The three standard presets differ in how long they search at the initial
rate (tau) and how fast they decay afterwards (psi).
"""
from ncelm.config import preset
from ncelm.optim import TUNED_INIT_RANGES, glorot_range, learning_rate

for name in ("S", "M", "L"):
    cfg = preset(name)
    s = cfg.schedule
    rates = [learning_rate(t, s) for t in range(cfg.epochs)]
    print(f"{name}: tau={s.tau} psi={s.psi}  first decayed epoch {s.tau}: {rates[s.tau]:.6f}  last: {rates[-1]:.2e}")

###############################################################################
# Init ranges per hidden size
# ---------------------------
# Glorot with fan-in = fan-out = H, the quarter-width variant, and the
# hand-tuned ranges the presets actually use.

print(f"{'H':>5} {'glorot':>9} {'quarter':>9} {'tuned':>9}")
for name, h in (("S", 200), ("M", 650), ("L", 1500)):
    print(f"{h:>5} {glorot_range(h, h):9.5f} {glorot_range(h, h, quarter=True):9.5f} {TUNED_INIT_RANGES[name]:9.5f}")
