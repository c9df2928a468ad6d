"""Line errors for the numerical-study presets.

Each preset takes well under a minute on one core at the full 128 x 32 mesh
and 10^4 iterations.  Reports are written under ./results/<preset>.
"""
import sys

from carleman_cauchy.experiments import preset_config, run_preset

presets = sys.argv[1:] or ["fig1-s1", "fig4-linear"]
for name in presets:
    rep = run_preset(preset_config(name, output_dir=f"results/{name}"))
    print(f"{name} (wall {rep.wall_time:.0f}s)")
    for r in rep.runs:
        x, E = r.line_error.on(0.6, 1.0)
        print(f"  lambda = {r.lam:g}, start = {r.start}: E(0.6) = {r.line_error.at(0.6):.4f}, "
              f"mean E on [0.6, 1] = {E.mean():.4f}")
