"""Recomputes every cell of the golden outputs from the raw fixture.

Independent of the Rust code: scoring rules are re-implemented directly,
geometry goes through shapely, statistics through pandas and numpy, and
natural breaks by exhaustive search.

    python3 verify_golden.py ../../tests/golden/twelve
"""

import csv
import itertools
import json
import math
import pathlib
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd
from shapely.geometry import shape, Point
from shapely.ops import unary_union

HERE = pathlib.Path(__file__).resolve().parent
REGISTRY = HERE.parents[1].parent / "core" / "config" / "default_registry.toml"
TOL = 1e-6
AREAS = ["D", "ECR", "M", "W"]
SUB_COLS = ["d_score", "ecr_score", "m_score", "w_score"]

failures = []


def check(label, golden, expected):
    if expected is None:
        ok = golden == ""
    elif isinstance(expected, str):
        ok = golden == expected
    else:
        ok = golden != "" and abs(float(golden) - expected) <= TOL
    if not ok:
        failures.append(f"{label}: golden {golden!r}, oracle {expected!r}")


def parse(cell):
    t = cell.strip()
    if "," in t:
        t = t.replace(".", "").replace(",", ".")
    try:
        v = float(t)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


reg = tomllib.loads(REGISTRY.read_text())
kpis = reg["kpi"]
area_w = reg["areas"]
codes = [k["code"] for k in kpis]

roster = pd.read_csv(HERE / "roster.csv", dtype={"id": str})
ids = list(roster["id"])
pop = dict(zip(ids, roster["population"]))
land = dict(zip(ids, roster["land_area_km2"]))
hh = {i: (None if pd.isna(h) else int(h)) for i, h in zip(ids, roster["households"])}

values = {c: {i: None for i in ids} for c in codes}
with open(HERE / "manifest.csv") as f:
    manifest = list(csv.DictReader(f))
for row in manifest:
    with open(HERE / row["path"]) as f:
        table = {r["id"]: parse(r["value"]) for r in csv.DictReader(f)}
    if row["kpi"] == "renewable_capacity_kw":
        for i in ids:
            cap = table.get(i)
            values["ECR3"][i] = None if cap is None or not hh[i] else cap / (3.3 * hh[i])
    else:
        values[row["kpi"]].update(table)

# mobility through shapely
feats = json.loads((HERE / "features.geojson").read_text())["features"]
bounds = {f["properties"]["id"]: shape(f["geometry"]) for f in json.loads((HERE / "boundaries.geojson").read_text())["features"]}
by_topic = {}
for f in feats:
    g = shape(f["geometry"])
    parts = list(g.geoms) if g.geom_type.startswith("Multi") else [g]
    by_topic.setdefault(f["properties"]["topic"], []).extend(parts)
ped = unary_union(by_topic["pedestrian"])
cyc = by_topic["cycleway"]


def counted(topic, b):
    return sum(1 for g in by_topic[topic] if b.contains(g if g.geom_type == "Point" else g.representative_point()))


mobility = {}
for i in ids:
    b = bounds[i]
    area = ped.intersection(b).area
    length = sum(l.intersection(b).length for l in cyc)
    mobility[i] = {
        "M1": area * 100 / pop[i],
        "M2": counted("charging_station", b) * 1000 / pop[i],
        "M3": length / (10 * land[i]),
        "M4": counted("bus_stop", b) * 100 / pop[i],
    }
    for c in ("M1", "M2", "M3", "M4"):
        values[c][i] = mobility[i][c]


def score(k, v, cohort):
    f = k["function"]
    if f in ("binary",):
        return v
    if f == "levels_linear":
        return v / k["max_level"]
    if f == "threshold_up":
        return min(v / k["benchmark"], 1.0)
    if f == "threshold_down":
        b = k["benchmark"]
        for limit, s in ((b / 2, 1.0), (b, 0.75), (1.5 * b, 0.5), (2 * b, 0.25)):
            if v <= limit:
                return s
        return 0.0
    if f == "quartile_down":
        q1, q2, q3 = np.percentile(cohort, [25, 50, 75])
        return 1.0 if v <= q1 else 0.75 if v <= q2 else 0.25 if v <= q3 else 0.0
    if f == "percentage":
        b = k["benchmark"]
        if b > 0:
            return min(v / b, 1.0)
        lo, hi = min(cohort), max(cohort)
        if hi == lo:
            return 1.0
        return (hi - v) / (hi - lo) if k["orientation"] == "lower_is_better" else (v - lo) / (hi - lo)
    raise ValueError(f)


scores = {i: {} for i in ids}
for k in kpis:
    cohort = [v for v in values[k["code"]].values() if v is not None]
    for i in ids:
        v = values[k["code"]][i]
        scores[i][k["code"]] = 0.0 if v is None else score(k, v, cohort)


def subscores(i):
    out = []
    for a in AREAS:
        ks = [k for k in kpis if k["area"] == a]
        out.append(sum(k["weight"] * scores[i][k["code"]] for k in ks) / sum(k["weight"] for k in ks))
    return out


def index(i, weights):
    s = subscores(i)
    return 100 * sum(w * x for w, x in zip(weights, s)) / sum(weights)


base_w = [area_w[a] for a in AREAS]
cci = {i: index(i, base_w) for i in ids}


def jenks(vals, k):
    xs = sorted(set(vals))
    best = None
    for cuts in itertools.combinations(range(1, len(xs)), k - 1):
        bounds_ = (0,) + cuts + (len(xs),)
        cost = 0.0
        for a, b in zip(bounds_, bounds_[1:]):
            members = [v for v in vals if xs[a] <= v <= xs[b - 1]]
            m = sum(members) / len(members)
            cost += sum((v - m) ** 2 for v in members)
        if best is None or cost < best[0]:
            best = (cost, [xs[b - 1] for b in bounds_[1:]])
    return best[1]


breaks = jenks(list(cci.values()), 5)
likert = {i: next(n + 1 for n, b in enumerate(breaks) if cci[i] <= b) for i in ids}

out = pathlib.Path(sys.argv[1])

with open(out / "scores.csv") as f:
    rows = list(csv.DictReader(f))
check("scores rows", str(len(rows)), str(len(ids)))
for r in rows:
    i = r["id"]
    for c in codes:
        check(f"scores {i} {c}", r[c], scores[i][c])
    for col, s in zip(SUB_COLS, subscores(i)):
        check(f"scores {i} {col}", r[col], s)
    check(f"scores {i} cci", r["cci"], cci[i])
    check(f"scores {i} likert", r["likert"], str(likert[i]))
    check(f"scores {i} missing", r["missing"], ";".join(c for c in codes if values[c][i] is None))

with open(out / "mobility.csv") as f:
    for r in csv.DictReader(f):
        for c in ("M1", "M2", "M3", "M4"):
            check(f"mobility {r['id']} {c}", r[c], mobility[r["id"]][c])

frame = pd.DataFrame({c: [values[c][i] for i in ids] for c in codes if next(k for k in kpis if k["code"] == c)["type"] in ("percentage", "number")})
frame["CCI"] = [cci[i] for i in ids]
desc = frame.describe()
with open(out / "stats.csv") as f:
    for r in csv.DictReader(f):
        for c in frame.columns:
            expected = desc.loc[r["stat"], c]
            if r["stat"] == "count":
                check(f"stats count {c}", r[c], str(int(expected)))
            else:
                check(f"stats {r['stat']} {c}", r[c], float(expected))

corr_frame = pd.DataFrame({"cci": [cci[i] for i in ids]})
for col, n in zip(SUB_COLS, range(4)):
    corr_frame[col] = [subscores(i)[n] for i in ids]
corr_frame["log_population"] = [math.log(pop[i]) if pop[i] > 0 else None for i in ids]
corr = corr_frame.corr()
with open(out / "correlations.csv") as f:
    for r in csv.DictReader(f):
        for c in corr.columns:
            check(f"corr {r['variable']} {c}", r[c], float(corr.loc[r["variable"], c]))

grid = [n / 20 for n in range(1, 11)]
for n, a in enumerate(AREAS):
    def rescaled(g):
        factor = (1 - g) / (1 - base_w[n])
        return [g if m == n else w * factor for m, w in enumerate(base_w)]

    with open(out / "sweep" / f"{a}_cci.csv") as f:
        rows = list(csv.DictReader(f))
    deltas = []
    for r in rows:
        i = r["id"]
        check(f"sweep {a} {i} baseline", r["baseline"], cci[i])
        series = [index(i, rescaled(g)) for g in grid]
        for g, v in zip(grid, series):
            check(f"sweep {a} {i} w={g}", r[f"w={g:.6f}"], v)
        d = max(100 * abs(v - cci[i]) / cci[i] for v in series)
        deltas.append(d)
        check(f"sweep {a} {i} max_delta", r["max_delta"], d)
    with open(out / "sweep" / f"{a}_grid.csv") as f:
        for r, g in zip(csv.DictReader(f), grid):
            w = rescaled(g)
            for m, b in enumerate(AREAS):
                check(f"sweep {a} grid {g} w_{b}", r[f"w_{b}"], w[m])
            s = pd.Series([index(i, w) for i in ids]).describe()
            for stat in ("mean", "std", "min", "25%", "50%", "75%", "max"):
                check(f"sweep {a} grid {g} {stat}", r[f"cci_{stat}"], float(s[stat]))
    with open(out / "sweep" / f"{a}_hist.csv") as f:
        hist = list(csv.DictReader(f))
    bins = max(1, math.ceil(max(deltas) / 10))
    counts = [0] * bins
    for d in deltas:
        counts[min(int(d // 10), bins - 1)] += 1
    check(f"sweep {a} histogram bins", str(len(hist)), str(bins))
    for h, c in zip(hist, counts):
        check(f"sweep {a} histogram {h['bin_lo']}", h["count"], str(c))

layer = json.loads((out / "cci.geojson").read_text())
check("geojson features", str(len(layer["features"])), str(len(ids)))
for feat in layer["features"]:
    p = feat["properties"]
    i = p["id"]
    check(f"geojson {i} cci", str(p["cci"]), cci[i])
    check(f"geojson {i} likert", str(p["likert"]), str(likert[i]))
    for col, s in zip(SUB_COLS, subscores(i)):
        check(f"geojson {i} {col}", str(p[col]), s)
    if shape(feat["geometry"]).symmetric_difference(bounds[i]).area != 0:
        failures.append(f"geojson {i}: geometry changed")

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("all golden cells agree with the oracle")
