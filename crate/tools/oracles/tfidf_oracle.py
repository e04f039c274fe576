"""Dense numpy TF-IDF cosine ranking for the baseline golden fixture.

weight = tf * ln(N / df), rows L2-normalized; ranking by descending cosine,
ties by bytewise id.
"""
import json
import math
import sys

import numpy as np

DOCS = {
    "a/serve.go": ["serv", "http", "handler", "serv"],
    "a/client.go": ["http", "client", "request"],
    "b/dial.go": ["tcp", "conn", "dial", "http"],
    "b/mux.go": ["http", "serv", "mux"],
    "c/listen.go": ["tcp", "listen", "serv"],
    "c/twin.go": ["tcp", "listen", "serv"],
}
QUERY = ["serv", "handler", "tcp", "unknown", "serv"]


def main():
    ids = sorted(DOCS)
    vocab = sorted({t for d in DOCS.values() for t in d})
    n = len(ids)
    df = {t: sum(1 for i in ids if t in DOCS[i]) for t in vocab}
    idf = np.array([math.log(n / df[t]) for t in vocab])

    def vec(tokens):
        tf = np.array([tokens.count(t) for t in vocab], dtype=float)
        v = tf * idf
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    q = vec(QUERY)
    scores = {i: float(vec(DOCS[i]) @ q) for i in ids}
    ranked = sorted(ids, key=lambda i: (-scores[i], i.encode()))
    json.dump(
        {
            "docs": DOCS,
            "query": QUERY,
            "idf": {t: float(x) for t, x in zip(vocab, idf)},
            "ranked": [{"id": i, "score": scores[i]} for i in ranked],
        },
        sys.stdout,
        indent=1,
        sort_keys=True,
    )
    print()


if __name__ == "__main__":
    main()
