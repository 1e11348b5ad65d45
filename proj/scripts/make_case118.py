#!/usr/bin/env python3
"""Generate data/case118_wind.m: a 118-bus network with 54 generators and
30 wind farms.

Layout: buses 1..112 form a meshed ring (adjacent links plus chords and a
few long ties); buses 113..118 are a wind pocket chain attached to the ring
at buses 30 and 90 through two rated feeder lines. One large wind farm sits
between two voltage-controlled buses; the remaining farms are small and
either scattered around the ring or concentrated in the pocket, so local
flow limits rather than system reserves decide how much wind uncertainty
the network can absorb.

All values are deterministic (fixed RNG seed); rerunning the script
reproduces the same file byte for byte.
"""
import random

RING = 112
NBUS = 118
POCKET = list(range(113, 119))
ATTACH_A, ATTACH_B = 30, 90       # ring buses holding the pocket feeders
FEEDER_RATE_MW = 55.0             # per feeder; sized against base wind swings
NGEN = 54

BIG_FARM_MW = 160.0
SMALL_FARM_MW = 16.0
N_SCATTERED = 23

rng = random.Random(118)


def u(lo, hi):
    return rng.uniform(lo, hi)


# --- generator placement: evenly spread over the ring, reference at bus 1
gen_buses = sorted({1 + round(k * (RING - 1) / (NGEN - 1)) for k in range(NGEN)})
while len(gen_buses) < NGEN:  # rounding collisions
    for b in range(1, RING + 1):
        if b not in gen_buses:
            gen_buses.append(b)
            break
    gen_buses.sort()
gen_set = set(gen_buses)
assert len(gen_buses) == NGEN and 1 in gen_set

# --- wind placement
big_farm_bus = next(
    b for b in range(2, RING)
    if b not in gen_set and (b - 1) in gen_set and (b + 1) in gen_set
    and b not in (ATTACH_A, ATTACH_B))
candidates = [b for b in range(2, RING + 1)
              if b not in gen_set and b != big_farm_bus
              and b not in (ATTACH_A, ATTACH_B)]
scattered = [candidates[round(k * (len(candidates) - 1) / (N_SCATTERED - 1))]
             for k in range(N_SCATTERED)]
assert len(set(scattered)) == N_SCATTERED

wind = [(big_farm_bus, BIG_FARM_MW)]
wind += [(b, SMALL_FARM_MW) for b in scattered]
wind += [(b, SMALL_FARM_MW) for b in POCKET]
assert len(wind) == 30

# --- loads
pd = {}
for b in range(1, NBUS + 1):
    if b in POCKET:
        pd[b] = u(2.0, 6.0)
    elif b in gen_set:
        pd[b] = u(10.0, 30.0)
    else:
        pd[b] = u(18.0, 52.0)
qd = {b: 0.3 * pd[b] for b in pd}

# --- branches: (f, t, r, x, b, rate)
branches = []
for i in range(1, RING + 1):
    j = i % RING + 1
    branches.append((i, j, u(0.008, 0.02), u(0.045, 0.08), 0.02, 0.0))
for i in range(1, RING - 10, 8):                     # chords
    branches.append((i, i + 10, u(0.02, 0.04), u(0.10, 0.16), 0.04, 0.0))
for f, t in [(5, 60), (20, 75), (35, 95), (50, 108)]:  # long ties
    branches.append((f, t, u(0.02, 0.04), u(0.10, 0.16), 0.04, 0.0))
branches.append((ATTACH_A, 113, 0.02, 0.10, 0.01, FEEDER_RATE_MW))
for k in range(len(POCKET) - 1):
    branches.append((POCKET[k], POCKET[k + 1], 0.02, 0.08, 0.01, 0.0))
branches.append((118, ATTACH_B, 0.02, 0.10, 0.01, FEEDER_RATE_MW))

# --- generators: a few large units, a mid tier, many small peakers
gens = []
for i, b in enumerate(gen_buses):
    if i % 7 == 0:
        pmax = u(280.0, 340.0)
    elif i % 3 == 0:
        pmax = u(130.0, 180.0)
    else:
        pmax = u(50.0, 80.0)
    if b == 1:
        pmax = 400.0
    # stiff voltage support on both sides of the large farm
    if b in (big_farm_bus - 1, big_farm_bus + 1):
        pmax = max(pmax, 300.0)
    qmax = 0.5 * pmax
    qmin = -0.4 * pmax
    vg = 1.01 + 0.04 * (i % 5) / 4.0
    gens.append((b, pmax, qmin, qmax, vg))

gencost = []
rescost = []
for b, pmax, *_ in gens:
    c2 = u(0.008, 0.06)
    c1 = u(18.0, 42.0)
    gencost.append((c2, c1))
    cr = u(8.0, 16.0) if pmax > 120 else u(15.0, 25.0)
    rescost.append(cr)

# --- emit
lines = []
lines.append("function mpc = case118_wind")
lines.append("% 118-bus network with 54 generators and 30 wind farms. One large")
lines.append("% farm sits between two voltage-controlled buses; six small farms")
lines.append("% form a pocket chain whose two feeder lines carry finite ratings.")
lines.append("% Generated by scripts/make_case118.py (deterministic).")
lines.append("mpc.version = '2';")
lines.append("mpc.baseMVA = 100;")
lines.append("")
lines.append("%% bus data")
lines.append("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
lines.append("mpc.bus = [")
for b in range(1, NBUS + 1):
    btype = 3 if b == 1 else (2 if b in gen_set else 1)
    lines.append(f"\t{b}\t{btype}\t{pd[b]:.2f}\t{qd[b]:.2f}\t0\t0\t1\t1\t0\t0\t1\t1.06\t0.94;")
lines.append("];")
lines.append("")
lines.append("%% generator data")
lines.append("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin")
lines.append("mpc.gen = [")
for b, pmax, qmin, qmax, vg in gens:
    lines.append(f"\t{b}\t0\t0\t{qmax:.1f}\t{qmin:.1f}\t{vg:.3f}\t100\t1\t{pmax:.1f}\t0;")
lines.append("];")
lines.append("")
lines.append("%% branch data")
lines.append("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus")
lines.append("mpc.branch = [")
for f, t, r, x, bb, rate in branches:
    lines.append(f"\t{f}\t{t}\t{r:.5f}\t{x:.5f}\t{bb:.4f}\t{rate:g}\t0\t0\t0\t0\t1;")
lines.append("];")
lines.append("")
lines.append("%% generator cost data")
lines.append("%\tmodel\tstartup\tshutdown\tn\tc2\tc1\tc0")
lines.append("mpc.gencost = [")
for c2, c1 in gencost:
    lines.append(f"\t2\t0\t0\t3\t{c2:.5f}\t{c1:.2f}\t0;")
lines.append("];")
lines.append("")
lines.append("%% wind farms")
lines.append("%\tbus\tcapacity_mw\tforecast_mw\tpower_factor")
lines.append("mpc.wind = [")
for b, cap in wind:
    pf = 1.0 if cap == BIG_FARM_MW else 0.98
    lines.append(f"\t{b}\t{cap:g}\t{cap / 2:g}\t{pf:g};")
lines.append("];")
lines.append("")
lines.append("%% reserve prices, $/MW/h")
lines.append("%\tcr_up\tcr_dn")
lines.append("mpc.reserve_cost = [")
for cr in rescost:
    lines.append(f"\t{cr:.2f}\t{cr:.2f};")
lines.append("];")

with open("data/case118_wind.m", "w") as f:
    f.write("\n".join(lines) + "\n")

total_pd = sum(pd.values())
total_cap = sum(c for _, c in wind)
print(f"buses={NBUS} branches={len(branches)} gens={len(gens)} "
      f"pmax={sum(g[1] for g in gens):.0f}MW load={total_pd:.0f}MW "
      f"wind_cap={total_cap:.0f}MW big_farm_bus={big_farm_bus}")
