#!/usr/bin/env python3
"""Derive the balanced 61-bus equivalent of the IEEE 123-node test feeder.

Writes fixtures/ieee123_balanced.json. See fixtures/README.md for the
reduction rules. Run from the repository root:

    python3 tools/derive_ieee123_fixture.py
"""

import json
import pathlib

FT_PER_MILE = 5280.0
BASE_KV = 4.16
BASE_MVA = 5.0

# Phase impedance matrices (ohm/mile), upper triangle, IEEE 123-node feeder
# line configurations. Configurations 1-6 share conductors and only differ
# in phasing, so their symmetric averages coincide.
_OH_3PH = {
    "self": [complex(0.4576, 1.0780), complex(0.4666, 1.0482), complex(0.4615, 1.0651)],
    "mutual": [complex(0.1560, 0.5017), complex(0.1535, 0.3849), complex(0.1580, 0.4236)],
}
_UG_3PH = {
    "self": [complex(1.5209, 0.7521), complex(1.5329, 0.7162), complex(1.5209, 0.7521)],
    "mutual": [complex(0.5198, 0.2775), complex(0.4924, 0.2157), complex(0.5198, 0.2775)],
}
CONFIGS = {c: _OH_3PH for c in (1, 2, 3, 4, 5, 6)}
CONFIGS[12] = _UG_3PH


def positive_sequence(cfg):
    zs = sum(cfg["self"]) / len(cfg["self"])
    zm = sum(cfg["mutual"]) / len(cfg["mutual"])
    return zs - zm


# Three-phase backbone segments (from, to, length ft, configuration).
# Switch and regulator nodes 152, 135, 160 and 197 are removed and the
# adjacent segments joined: 13-152-52, 18-135-35, 60-160-67, 97-197-101.
BACKBONE = [
    ("149", "1", 400, 1),
    ("1", "7", 300, 1),
    ("7", "8", 200, 1),
    ("8", "13", 300, 1),
    ("13", "52", 400, 1),
    ("52", "53", 200, 1),
    ("53", "54", 125, 1),
    ("54", "55", 275, 1),
    ("55", "56", 275, 1),
    ("54", "57", 350, 3),
    ("57", "60", 750, 3),
    ("60", "61", 550, 5),
    ("60", "62", 250, 12),
    ("62", "63", 175, 12),
    ("63", "64", 350, 12),
    ("64", "65", 425, 12),
    ("65", "66", 325, 12),
    ("60", "67", 350, 6),
    ("67", "72", 275, 3),
    ("67", "97", 250, 3),
    ("72", "76", 200, 3),
    ("76", "77", 400, 6),
    ("77", "78", 100, 6),
    ("78", "79", 225, 6),
    ("78", "80", 475, 6),
    ("80", "81", 475, 6),
    ("81", "82", 250, 6),
    ("82", "83", 250, 6),
    ("76", "86", 700, 3),
    ("86", "87", 450, 6),
    ("87", "89", 275, 6),
    ("89", "91", 225, 6),
    ("91", "93", 225, 6),
    ("93", "95", 300, 6),
    ("97", "98", 275, 3),
    ("98", "99", 550, 3),
    ("99", "100", 300, 3),
    ("100", "450", 800, 3),
    ("97", "101", 250, 3),
    ("101", "105", 275, 3),
    ("105", "108", 325, 3),
    ("108", "300", 1000, 3),
    ("13", "18", 825, 2),
    ("18", "21", 300, 2),
    ("21", "23", 250, 2),
    ("23", "25", 275, 2),
    ("25", "28", 200, 2),
    ("28", "29", 300, 2),
    ("29", "30", 350, 2),
    ("30", "250", 200, 2),
    ("18", "35", 375, 4),
    ("35", "40", 250, 1),
    ("40", "42", 250, 1),
    ("42", "44", 200, 1),
    ("44", "47", 250, 1),
    ("47", "48", 150, 4),
    ("47", "49", 250, 4),
    ("49", "50", 250, 4),
    ("50", "51", 250, 4),
    ("51", "151", 500, 4),
]

# Spot loads (kW, kvar) summed over phases, keyed by IEEE-123 node.
SPOT_LOADS = {
    "1": (40, 20), "2": (20, 10), "4": (40, 20), "5": (20, 10), "6": (40, 20),
    "7": (20, 10), "9": (40, 20), "10": (20, 10), "11": (40, 20), "12": (20, 10),
    "16": (40, 20), "17": (20, 10), "19": (40, 20), "20": (40, 20), "22": (40, 20),
    "24": (40, 20), "28": (40, 20), "29": (40, 20), "30": (40, 20), "31": (20, 10),
    "32": (20, 10), "33": (40, 20), "34": (40, 20), "35": (40, 20), "37": (40, 20),
    "38": (20, 10), "39": (20, 10), "41": (20, 10), "42": (20, 10), "43": (40, 20),
    "45": (20, 10), "46": (20, 10), "47": (105, 75), "48": (210, 150), "49": (140, 95),
    "50": (40, 20), "51": (20, 10), "52": (40, 20), "53": (40, 20), "55": (20, 10),
    "56": (20, 10), "58": (20, 10), "59": (20, 10), "60": (20, 10), "62": (40, 20),
    "63": (40, 20), "64": (75, 35), "65": (140, 100), "66": (75, 35), "68": (20, 10),
    "69": (40, 20), "70": (20, 10), "71": (40, 20), "73": (40, 20), "74": (40, 20),
    "75": (40, 20), "76": (245, 180), "77": (40, 20), "79": (40, 20), "80": (40, 20),
    "82": (40, 20), "83": (20, 10), "84": (20, 10), "85": (40, 20), "86": (20, 10),
    "87": (40, 20), "88": (40, 20), "90": (40, 20), "92": (40, 20), "94": (40, 20),
    "95": (20, 10), "96": (20, 10), "98": (40, 20), "99": (40, 20), "100": (40, 20),
    "102": (20, 10), "103": (40, 20), "104": (40, 20), "106": (40, 20), "107": (40, 20),
    "109": (40, 20), "111": (20, 10), "112": (20, 10), "113": (40, 20), "114": (20, 10),
}

# Single- and two-phase laterals (and the regulator-fed 9-14 and 25-26
# branches) lumped onto the backbone bus they hang from.
LATERALS = {
    "1": ["2", "3", "4", "5", "6"],
    "8": ["9", "10", "11", "12", "14"],
    "13": ["15", "16", "17", "34"],
    "18": ["19", "20"],
    "21": ["22"],
    "23": ["24"],
    "25": ["26", "27", "31", "32", "33"],
    "35": ["36", "37", "38", "39"],
    "40": ["41"],
    "42": ["43"],
    "44": ["45", "46"],
    "57": ["58", "59"],
    "67": ["68", "69", "70", "71"],
    "72": ["73", "74", "75"],
    "81": ["84", "85"],
    "87": ["88"],
    "89": ["90"],
    "91": ["92"],
    "93": ["94"],
    "95": ["96"],
    "101": ["102", "103", "104"],
    "105": ["106", "107"],
    "108": ["109", "110", "111", "112", "113", "114"],
}

# DG nameplate (kW) per bus.
DG_KW = {
    "1": 40, "13": 10, "23": 40, "25": 20, "28": 10, "29": 10, "30": 10,
    "35": 20, "40": 10, "42": 40, "44": 10, "47": 30, "48": 20, "50": 10,
    "51": 50, "53": 20, "54": 30, "55": 30, "56": 10, "57": 20, "60": 20,
    "61": 20, "62": 20, "63": 30, "64": 10, "65": 50, "66": 40, "67": 40,
    "72": 10, "76": 10, "78": 40, "79": 30, "80": 30, "86": 50, "87": 20,
    "89": 10, "91": 30, "93": 40, "95": 20, "97": 10, "98": 30, "99": 20,
    "100": 40, "105": 30, "108": 40, "151": 30, "250": 10, "300": 10, "450": 10,
}

SLACK = "149"


def natural_key(bus_id):
    return (0, int(bus_id), "") if bus_id.isdigit() else (1, 0, bus_id)


def derive():
    buses = sorted({b for seg in BACKBONE for b in seg[:2]}, key=natural_key)
    assert len(buses) == 61, len(buses)
    assert len(BACKBONE) == 60

    lumped = {}
    for bus in buses:
        p, q = SPOT_LOADS.get(bus, (0, 0))
        for node in LATERALS.get(bus, []):
            lp, lq = SPOT_LOADS.get(node, (0, 0))
            p += lp
            q += lq
        lumped[bus] = (p, q)
    total_p = sum(p for p, _ in lumped.values())
    total_q = sum(q for _, q in lumped.values())
    assert (total_p, total_q) == (sum(p for p, _ in SPOT_LOADS.values()),
                                  sum(q for _, q in SPOT_LOADS.values()))

    bus_rows = []
    for bus in buses:
        p, q = lumped[bus]
        bus_rows.append({
            "id": bus,
            "kind": "slack" if bus == SLACK else "pq",
            "load_p_kw": float(p),
            "load_q_kvar": float(q),
            "dg_p_kw": float(DG_KW.get(bus, 0)),
        })

    # Impedances keep full precision. Lines of one configuration then share
    # their X/R ratio exactly, and measurement sets that are singular because
    # of it are reported as such instead of passing as ill-conditioned.
    line_rows = []
    for k, (a, b, length_ft, config) in enumerate(BACKBONE, start=1):
        z = positive_sequence(CONFIGS[config]) * (length_ft / FT_PER_MILE)
        line_rows.append({
            "id": f"L{k}",
            "from": a,
            "to": b,
            "r_ohm": z.real,
            "x_ohm": z.imag,
        })

    return {
        "name": "ieee123_balanced",
        "base_mva": BASE_MVA,
        "base_kv": BASE_KV,
        "buses": bus_rows,
        "lines": line_rows,
    }


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    out = root / "fixtures" / "ieee123_balanced.json"
    doc = derive()
    out.write_text(json.dumps(doc, indent=2) + "\n")
    dg = sum(1 for b in doc["buses"] if b["dg_p_kw"] > 0)
    print(f"wrote {out}: {len(doc['buses'])} buses, {len(doc['lines'])} lines, {dg} DG buses")


if __name__ == "__main__":
    main()
