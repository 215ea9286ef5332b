#!/usr/bin/env python3
"""Regenerates the deterministic fixtures under data/.

    python3 tools/make_fixtures.py [--data DIR]

Writes feeds (forecasts, prices), simulator scenarios, sample farm profiles
and the 99-item benchmark. Output is byte-stable for a given script version.
"""

import argparse
import datetime as dt
import json
import math
import random
from pathlib import Path

METRICS = ["temperature", "moisture", "ph", "ec", "nitrogen", "phosphorus", "potassium"]

LOCATIONS = {
    "maize": (31.4, 73.1),      # Faisalabad
    "sugarcane": (27.7, 68.9),  # Khairpur
    "spinach": (31.5, 74.3),    # Lahore
    "cotton": (30.2, 71.5),     # Multan
}

BASELINES = {
    "maize": dict(temperature=31, moisture=42, ph=7.1, ec=950, nitrogen=130, phosphorus=38, potassium=190),
    "sugarcane": dict(temperature=33, moisture=50, ph=7.6, ec=1200, nitrogen=160, phosphorus=35, potassium=220),
    "spinach": dict(temperature=19, moisture=52, ph=6.6, ec=800, nitrogen=140, phosphorus=45, potassium=170),
}

NOISE = dict(temperature=0.6, moisture=0.8, ph=0.04, ec=25, nitrogen=3, phosphorus=1.5, potassium=4)


def ts_of(date: dt.date, hour: int = 0) -> int:
    return int(dt.datetime(date.year, date.month, date.day, hour, tzinfo=dt.timezone.utc).timestamp())


def dump(path: Path, obj, indent=2):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=indent, ensure_ascii=False) + "\n", encoding="utf-8")


def forecast(lat, lon, issued: dt.date, rain, tmin, tmax):
    days = []
    for i, (r, lo, hi) in enumerate(zip(rain, tmin, tmax)):
        d = issued + dt.timedelta(days=i)
        days.append({"date": d.isoformat(), "rain_mm": r, "t_min": lo, "t_max": hi})
    return {"location": {"lat": lat, "lon": lon}, "issued_at": issued.isoformat(), "days": days}


# ---------------------------------------------------------------------------
# feeds

def write_feeds(root: Path):
    issued = dt.date(2025, 6, 10)
    shapes = {
        "maize": ([0, 0, 3.5, 8.0, 0, 0, 0, 1.0, 0, 0, 0, 0, 0, 0], 26, 39),
        "sugarcane": ([0] * 14, 28, 42),
        "spinach": ([0, 1.5, 0, 0, 6.0, 2.0, 0, 0, 0, 0, 0, 0, 0, 0], 12, 26),
        "cotton": ([0] * 14, 29, 43),
    }
    for crop, (rain, lo, hi) in shapes.items():
        lat, lon = LOCATIONS[crop]
        tmin = [lo + (i % 3) * 0.5 for i in range(14)]
        tmax = [hi - (i % 4) * 0.5 for i in range(14)]
        w = forecast(lat, lon, issued, rain, tmin, tmax)
        dump(root / "forecast" / f"{lat:.1f}_{lon:.1f}" / f"{issued.isoformat()}.json", w)

    prices = {
        "maize": (2400.0, 12.0),
        "sugarcane": (425.0, 0.0),
        "spinach": (60.0, -1.5),
        "cotton": (8500.0, 40.0),
        "wheat": (3900.0, -8.0),
    }
    for crop, (start, slope) in prices.items():
        rng = random.Random(f"price-{crop}")
        points = []
        for i in range(30):
            d = issued - dt.timedelta(days=29 - i)
            p = start + slope * i + rng.uniform(-0.5, 0.5) * max(1.0, abs(slope))
            points.append({"date": d.isoformat(), "price": round(p, 1), "currency": "PKR"})
        dump(root / "prices" / f"{crop}.json", {"crop": crop, "points": points})


# ---------------------------------------------------------------------------
# scenarios and farms

def write_scenarios(root: Path):
    start = ts_of(dt.date(2025, 6, 1))
    link = {"p_max": 0.99, "d_knee": 100, "d_90": 425, "d_cutoff": 600}
    dump(root / "default.json", {
        "version": 1, "start_ts": start, "link": link,
        "nodes": [
            {"node_id": "n1", "seed": 11, "interval_s": 300},
            {"node_id": "n2", "seed": 12, "interval_s": 300, "distance_m": 250},
            {"node_id": "n3", "seed": 13, "interval_s": 300, "distance_m": 480},
        ],
    })
    dump(root / "cotton-dry.json", {
        "version": 1, "start_ts": ts_of(dt.date(2025, 6, 7)), "link": link,
        "nodes": [{"node_id": "cotton-1", "seed": 21, "interval_s": 300,
                   "metrics": {"moisture": {"baseline": 36, "drift_per_day": -2.0, "noise": 0.3},
                               "temperature": {"baseline": 36, "drift_per_day": 0.2, "noise": 0.5}}}],
    })
    dump(root / "spinach-acid.json", {
        "version": 1, "start_ts": ts_of(dt.date(2025, 11, 1)), "link": link,
        "nodes": [{"node_id": "spinach-1", "seed": 31, "interval_s": 300,
                   "metrics": {"ph": {"baseline": 4.5, "drift_per_day": 0.0, "noise": 0.05},
                               "temperature": {"baseline": 18, "drift_per_day": 0.0, "noise": 0.5},
                               "moisture": {"baseline": 55, "drift_per_day": 0.0, "noise": 0.5}}}],
    })


def write_farms(root: Path):
    farms = [
        {"phone": "+923001110001", "language": "ur", "crops": ["cotton"], "growth_stage": "vegetative",
         "location": dict(zip(("lat", "lon"), LOCATIONS["cotton"])), "summary_times": ["07:00"],
         "utc_offset_minutes": 300, "nodes": ["cotton-1"]},
        {"phone": "+923001110002", "language": "pa", "crops": ["spinach"], "growth_stage": "vegetative",
         "location": dict(zip(("lat", "lon"), LOCATIONS["spinach"])), "summary_times": ["07:00"],
         "utc_offset_minutes": 300, "nodes": ["spinach-1"]},
        {"phone": "+923001110003", "language": "en", "crops": ["maize", "wheat"], "growth_stage": "vegetative",
         "location": dict(zip(("lat", "lon"), LOCATIONS["maize"])), "summary_times": ["06:30", "18:00"],
         "utc_offset_minutes": 300, "nodes": ["n1", "n2", "n3"]},
    ]
    for f in farms:
        dump(root / f"{f['crops'][0]}.json", f)


# ---------------------------------------------------------------------------
# benchmark

EASY = {
    "maize": [
        ("What is the soil moisture in my maize field?", ["moisture"], ["soil moisture value"]),
        ("What is my soil pH?", ["ph"], ["soil ph value"]),
        ("What is the soil temperature right now?", ["temperature"], ["soil temperature value"]),
        ("How much nitrogen is in my soil?", ["nitrogen"], ["nitrogen reading", "split nitrogen application"]),
        ("Is it going to rain this week?", [], ["rain forecast"]),
        ("What is the EC of my soil?", ["ec"], ["electrical conductivity value"]),
        ("Is my soil too dry?", ["moisture"], ["soil moisture value"]),
        ("What is the phosphorus level?", ["phosphorus"], ["phosphorus reading"]),
        ("What is the potassium level in my field?", ["potassium"], ["potassium reading"]),
        ("What fertilizer does maize need?", ["nitrogen"], ["nitrogen splits", "phosphorus at sowing"]),
        ("When should I harvest maize?", [], ["husks dry black layer", "dry grain storage"]),
    ],
    "sugarcane": [
        ("What is the soil moisture in my sugarcane?", ["moisture"], ["soil moisture value"]),
        ("What is my soil pH?", ["ph"], ["soil ph value"]),
        ("What is the soil temperature?", ["temperature"], ["soil temperature value"]),
        ("How much potassium is in my soil?", ["potassium"], ["potassium reading", "potash for sugarcane"]),
        ("Will it rain in the next days?", [], ["rain forecast"]),
        ("What is the salinity of my field?", ["ec"], ["electrical conductivity value"]),
        ("Is my field wet enough?", ["moisture"], ["soil moisture value"]),
        ("What is the nitrogen level?", ["nitrogen"], ["nitrogen reading"]),
        ("What is the phosphorus reading?", ["phosphorus"], ["phosphorus reading"]),
        ("When should I plant sugarcane?", [], ["planting season setts"]),
        ("How do I control stem borer in sugarcane?", [], ["borer control trichogramma"]),
    ],
    "spinach": [
        ("What is the soil moisture for my spinach?", ["moisture"], ["soil moisture value"]),
        ("What is my soil pH?", ["ph"], ["soil ph value"]),
        ("What is the soil temperature today?", ["temperature"], ["soil temperature value"]),
        ("How much nitrogen does my soil have?", ["nitrogen"], ["nitrogen reading", "top dressing after cutting"]),
        ("Is rain expected this week?", [], ["rain forecast"]),
        ("What is the EC reading?", ["ec"], ["electrical conductivity value"]),
        ("Is the soil dry?", ["moisture"], ["soil moisture value"]),
        ("What is the phosphorus level?", ["phosphorus"], ["phosphorus reading"]),
        ("What is the potassium reading?", ["potassium"], ["potassium reading"]),
        ("When should I sow spinach?", [], ["cool season sowing"]),
        ("When is spinach ready to cut?", [], ["harvest days after sowing"]),
    ],
}

MEDIUM_TEMPLATES = [
    ("Should I irrigate my {crop} today?", ["moisture"], ["soil moisture value", "rain forecast", "irrigation decision"]),
    ("Is my soil becoming acidic this week?", ["ph"], ["soil ph trend", "lime for acid soil"]),
    ("Has the soil moisture been falling over the last week?", ["moisture"], ["soil moisture trend"]),
    ("Is it too hot for my {crop}?", ["temperature"], ["temperature value", "heat forecast"]),
    ("Is salt a problem in my field?", ["ec"], ["electrical conductivity value", "leaching salts"]),
    ("Do I need to add urea now?", ["nitrogen"], ["nitrogen reading", "urea on moist soil"]),
    ("Should I add lime to my soil?", ["ph"], ["soil ph value", "agricultural lime"]),
    ("Will rain be enough so I can skip watering?", ["moisture"], ["rain forecast", "soil moisture value"]),
    ("Are my nutrient levels balanced?", ["nitrogen", "phosphorus", "potassium"], ["npk readings"]),
    ("Is the soil waterlogged?", ["moisture"], ["soil moisture value", "drainage"]),
    ("What is the condition of my field?", ["moisture", "ph", "temperature"], ["sensor overview"]),
]

HARD_TEMPLATES = [
    ("My {crop} leaves look yellow and the soil feels dry. Should I irrigate or add fertilizer first?",
     ["moisture", "nitrogen"], ["soil moisture value", "nitrogen reading", "irrigation before urea"]),
    ("Given the weather this week and my soil moisture, when should I irrigate next?",
     ["moisture"], ["soil moisture trend", "rain forecast", "irrigation timing"]),
    ("The pH keeps dropping. How much lime should I apply and when?",
     ["ph"], ["soil ph trend", "lime rate", "lime before sowing"]),
    ("Is it a good time to sell my {crop} or should I wait?",
     [], ["market price trend", "storage advice"]),
    ("My field has high salinity and low moisture. What should I do?",
     ["ec", "moisture"], ["electrical conductivity value", "soil moisture value", "leaching with good water"]),
    ("A heat wave is coming. How should I protect my {crop}?",
     ["temperature", "moisture"], ["heat forecast", "evening irrigation", "delay spraying"]),
    ("Should I apply urea before the rain or after it?",
     ["nitrogen"], ["rain forecast", "urea on moist soil"]),
    ("Compare my nitrogen, phosphorus and potassium and tell me which fertilizer to buy.",
     ["nitrogen", "phosphorus", "potassium"], ["npk readings", "fertilizer choice"]),
    ("Over the last week is my soil getting wetter or drier, and does the forecast change that?",
     ["moisture"], ["soil moisture trend", "rain forecast"]),
    ("Pests are eating the leaves and the soil is dry. What should I do first?",
     ["moisture"], ["pest scouting", "soil moisture value"]),
    ("Plan irrigation and fertilizer for my {crop} for the coming week.",
     ["moisture", "nitrogen"], ["soil moisture value", "rain forecast", "nitrogen split"]),
]


def readings_for(crop: str, item_idx: int, end: dt.datetime, tweak: dict):
    rng = random.Random(f"{crop}-{item_idx}")
    base = dict(BASELINES[crop])
    base.update(tweak.get("base", {}))
    drift = tweak.get("drift", {})
    step = 3 * 3600
    n = 56  # seven days at three-hour cadence
    end_ts = int(end.timestamp())
    node = f"{crop[:2]}-{item_idx:02d}"
    out = []
    for i in range(n):
        ts = end_ts - (n - 1 - i) * step
        days_back = (n - 1 - i) * step / 86400.0
        values = {}
        for m in METRICS:
            v = base[m] - drift.get(m, 0.0) * days_back
            if m == "temperature":
                v += 4.0 * math.sin(2 * math.pi * ((ts % 86400) / 86400.0 - 0.25))
            v += rng.gauss(0, NOISE[m])
            values[m] = round(v, 2 if m == "ph" else 1)
        out.append({"node_id": node, "seq": i + 1, "ts": ts, "values": values})
    return out


def tweak_for(crop: str, query: str, idx: int):
    q = query.lower()
    t = {"base": {}, "drift": {}}
    if "dry" in q or "irrigat" in q or "watering" in q:
        t["base"]["moisture"] = BASELINES[crop]["moisture"] - 14 + (idx % 3)
        t["drift"]["moisture"] = -1.2
    if "acid" in q or "lime" in q or "ph keeps" in q:
        t["base"]["ph"] = 5.3 if crop != "spinach" else 4.6
        t["drift"]["ph"] = -0.05
    if "salin" in q or "salt" in q:
        t["base"]["ec"] = 2600
    if "waterlog" in q:
        t["base"]["moisture"] = 78
    if "hot" in q or "heat" in q:
        t["base"]["temperature"] = BASELINES[crop]["temperature"] + 6
    if "yellow" in q or "urea" in q:
        t["base"]["nitrogen"] = 70
    return t


def benchmark(feeds_root: Path):
    items = []
    end_day = dt.date(2025, 6, 10)
    for crop in ("maize", "sugarcane", "spinach"):
        lat, lon = LOCATIONS[crop]
        fc_path = feeds_root / "forecast" / f"{lat:.1f}_{lon:.1f}" / f"{end_day.isoformat()}.json"
        full_fc = json.loads(fc_path.read_text())
        tiers = [("easy", EASY[crop]), ("medium", MEDIUM_TEMPLATES), ("hard", HARD_TEMPLATES)]
        for tier, rows in tiers:
            for i, (query, _metrics, facets) in enumerate(rows):
                query = query.format(crop=crop)
                idx = len(items)
                end = dt.datetime(2025, 6, 10, 5, 0, tzinfo=dt.timezone.utc) - dt.timedelta(hours=idx % 5)
                readings = readings_for(crop, i + {"easy": 0, "medium": 20, "hard": 40}[tier], end,
                                        tweak_for(crop, query, i))
                # Two items in three carry a forecast; the rest exercise the missing-feed path.
                fc = None
                if i % 3 != 2:
                    fc = dict(full_fc)
                    fc["days"] = full_fc["days"][:7]
                items.append({
                    "id": f"{crop}-{tier}-{i + 1:02d}",
                    "crop": crop,
                    "tier": tier,
                    "query": query,
                    "sensor_context": {"readings": readings, "forecast": fc},
                    "expected_facets": facets,
                })
    return items


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args()
    data = args.data
    write_feeds(data / "feeds")
    write_scenarios(data / "scenarios")
    write_farms(data / "farms")
    items = benchmark(data / "feeds")
    out = data / "benchmark" / "benchmark.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as f:
        for it in items:
            f.write(json.dumps(it, ensure_ascii=False, separators=(",", ":")) + "\n")
    print(f"wrote {len(items)} benchmark items to {out}")


if __name__ == "__main__":
    main()
