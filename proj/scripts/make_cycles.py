#!/usr/bin/env python3
"""Generate the bundled drive-cycle CSVs.

Both cycles are synthesized approximations ("-like"): they match the
published duration, speed envelope, and stop pattern of the public
cycles they are named after, but are not the official second-by-second
traces. Column order: time_s,speed_mps on a uniform 1 s grid.
"""
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "cycles")


def trapezoid(profile, pulses):
    """Append accelerate/cruise/brake/idle pulses as (v_peak, t_acc, t_cruise, t_brake, t_idle)."""
    for v, ta, tc, tb, ti in pulses:
        v0 = profile[-1] if profile else 0.0
        for k in range(1, ta + 1):
            profile.append(v0 + (v - v0) * k / ta)
        profile.extend([v] * tc)
        for k in range(1, tb + 1):
            profile.append(max(0.0, v + (0.0 - v) * k / tb))
        profile.extend([0.0] * ti)
    return profile


def nycc_like():
    # Urban stop-and-go, ~600 s, peak 12.3 m/s (~44 km/h), many idle phases.
    p = [0.0] * 5
    pulses = [
        (6.0, 6, 8, 5, 9),
        (9.0, 9, 14, 7, 11),
        (5.0, 5, 6, 4, 8),
        (12.3, 12, 22, 9, 6),
        (7.5, 7, 10, 6, 13),
        (10.5, 10, 18, 8, 9),
        (4.5, 5, 5, 4, 12),
        (11.0, 11, 20, 8, 7),
        (8.0, 8, 12, 6, 10),
        (12.0, 12, 25, 9, 8),
        (6.5, 7, 9, 5, 11),
        (9.5, 9, 15, 7, 10),
        (11.5, 11, 21, 8, 6),
        (7.0, 7, 9, 5, 10),
        (10.0, 10, 16, 7, 30),
    ]
    trapezoid(p, pulses)
    p = p[:598]
    while len(p) < 598:
        p.append(0.0)
    p[-1] = 0.0
    return p


def ramp(profile, v, t):
    v0 = profile[-1] if profile else 0.0
    for k in range(1, t + 1):
        profile.append(max(0.0, v0 + (v - v0) * k / t))


def nedc_trunc_like():
    # Two urban blocks then a stepped extra-urban section, truncated before
    # the top-speed crest; 800 s, peak 27.8 m/s (~100 km/h).
    p = [0.0] * 11
    for _ in range(2):
        trapezoid(p, [
            (4.2, 4, 8, 5, 21),
            (8.9, 12, 24, 11, 21),
        ])
        ramp(p, 13.9, 26)
        p.extend([13.9] * 12)
        ramp(p, 0.0, 12)
        p.extend([0.0] * 14)
    # extra-urban: stepped cruises with a single peak plateau
    ramp(p, 19.4, 41)
    p.extend([19.4] * 50)
    ramp(p, 13.9, 8)
    p.extend([13.9] * 69)
    ramp(p, 19.4, 13)
    p.extend([19.4] * 50)
    ramp(p, 27.8, 35)
    p.extend([27.8] * 30)
    ramp(p, 0.0, 34)
    p = p[:800]
    while len(p) < 800:
        p.append(0.0)
    p[-1] = 0.0
    return p


def write(name, speeds):
    path = os.path.join(OUT, name)
    with open(path, "w") as f:
        f.write("# time_s,speed_mps\n")
        for t, v in enumerate(speeds):
            f.write(f"{t},{v:.4f}\n")
    print(f"{path}: {len(speeds)} s, vmax={max(speeds):.1f} m/s, "
          f"vmean={sum(speeds)/len(speeds):.2f} m/s, "
          f"dist={sum(speeds)/1000:.2f} km")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    write("nycc_like.csv", nycc_like())
    write("nedc_trunc_like.csv", nedc_trunc_like())
