"""Independent reference for the hashing embedder and VSS ranking.

Re-implements the embedder (tokens are maximal runs of ASCII alphanumerics
or bytes >= 0x80, lowercased, FNV-1a 64 mod 256, counted, L2-normalized) and
the relational summary of document-less nodes from the raw fixture files, then
prints the values frozen into tests/unit/test_vector_search.cpp.
"""
import json
import math
import pathlib
import sys

DIM = 256
FIXTURE = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "desk"


def tokens(text: str):
    out, cur = [], bytearray()
    for b in text.encode("utf-8"):
        if b >= 0x80 or chr(b).isascii() and chr(b).isalnum():
            cur.append(b + 32 if 65 <= b <= 90 else b)
        elif cur:
            out.append(bytes(cur))
            cur = bytearray()
    if cur:
        out.append(bytes(cur))
    return out


def bucket(token: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in token:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h % DIM


def embed(text: str):
    v = [0.0] * DIM
    for t in tokens(text):
        v[bucket(t)] += 1.0
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def load_fixture():
    nodes = {}
    for line in (FIXTURE / "nodes.jsonl").read_text().splitlines():
        if line.strip():
            n = json.loads(line)
            nodes[n["id"]] = n
    edges = [json.loads(l) for l in (FIXTURE / "edges.jsonl").read_text().splitlines() if l.strip()]
    return nodes, edges


def document(node_id, nodes, edges):
    n = nodes[node_id]
    if n.get("document"):
        return n["document"]
    pairs = set()
    for e in edges:
        if e["head"] == node_id:
            pairs.add(f'{e["type"]}: {nodes[e["tail"]]["aliases"][0]}')
        if e["tail"] == node_id:
            pairs.add(f'{e["type"]} (from): {nodes[e["head"]]["aliases"][0]}')
    return n["aliases"][0] + "." + "".join(f" {p}." for p in sorted(pairs)[:50])


def main():
    nodes, edges = load_fixture()
    ab = embed("alpha beta")
    print("alpha beta buckets:", [(i, repr(x)) for i, x in enumerate(ab) if x])
    print("bucket(alpha) =", bucket(b"alpha"), " bucket(beta) =", bucket(b"beta"))
    gg = embed("graph graph")
    print("graph graph buckets:", [(i, repr(x)) for i, x in enumerate(gg) if x])
    print("n2 document:", document("n2", nodes, edges))

    query = "Which papers did Alice Smith write?"
    q = embed(query)
    pool = ["n1", "n2", "n3", "n4", "n5"]
    scores = {n: cosine(q, embed(document(n, nodes, edges))) for n in pool}
    for n in pool:
        print(f"cos(query, {n}) = {scores[n]!r}")
    rest = sorted((n for n in pool if n != "n1"), key=lambda n: (-scores[n], n))
    print("vss filtered=[n1] additional(k_max=3) =", rest[:2])
    return 0


if __name__ == "__main__":
    sys.exit(main())
