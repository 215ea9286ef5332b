#!/usr/bin/env python3
"""Independent BM25 scorer for the toy corpus.

Written without reference to the C++ index: parses the toy documents,
tokenizes with a regex and scores with exact rational term weights before
the final float conversion. The output table is frozen into
tests/data/bm25_toy_oracle.json and compared against the library's rankings.

    python3 tools/bm25_oracle.py data/kb/toy > tests/data/bm25_toy_oracle.json
"""

import json
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

K1 = Fraction(6, 5)
B = Fraction(3, 4)

QUERIES = [
    "lime acid soil",
    "irrigate soil moisture",
    "spinach",
    "soil",
    "salinity drainage water",
    "urea nitrogen irrigation",
    "acid spinach lime",
    "rain forecast",
    "pale spinach on acid soil",
    "harvest timing",
]


def parse(path):
    header, _, body = path.read_text(encoding="utf-8").partition("\n---\n")
    meta = dict(line.split(": ", 1) for line in header.splitlines() if ": " in line)
    return meta["doc_id"], body.strip()


def tokens(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def main(root):
    docs = [parse(p) for p in sorted(Path(root).glob("*.txt"))]
    toks = {doc_id: tokens(body) for doc_id, body in docs}
    n = len(toks)
    avgdl = Fraction(sum(len(t) for t in toks.values()), n)

    table = []
    for q in QUERIES:
        terms = sorted(set(tokens(q)))
        rows = []
        for doc_id, body_tokens in toks.items():
            score = 0.0
            for term in terms:
                tf = body_tokens.count(term)
                if tf == 0:
                    continue
                df = sum(1 for t in toks.values() if term in t)
                idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
                norm = K1 * (1 - B + B * Fraction(len(body_tokens)) / avgdl)
                weight = Fraction(tf) * (K1 + 1) / (tf + norm)
                score += idf * float(weight)
            if score > 0:
                rows.append({"doc_id": doc_id, "chunk_id": 1, "score": round(score, 9)})
        rows.sort(key=lambda r: (-r["score"], r["doc_id"], r["chunk_id"]))
        table.append({"query": q, "ranking": rows})

    json.dump({"k1": 1.2, "b": 0.75, "avgdl": float(avgdl), "queries": table}, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/kb/toy")
