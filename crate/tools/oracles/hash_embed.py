"""Reference signed trigram hashing embedder.

FNV-1a 64 (offset basis xor seed) over the UTF-8 bytes of each character
trigram of "\\x02" + payload + "\\x03"; bucket h % dim, sign -1 when the top
bit is set; counts L2-normalized in double precision, returned as float32.
"""
import json
import math
import sys

import numpy as np

OFFSET = 0xCBF29CE484222325
PRIME = 0x100000001B3
MASK = (1 << 64) - 1


def fnv1a(data, seed):
    h = OFFSET ^ seed
    for b in data:
        h = ((h ^ b) * PRIME) & MASK
    return h


def hash_embed(payload, dim, seed=0):
    counts = [0.0] * dim
    if payload:
        chars = ["\x02"] + list(payload) + ["\x03"]
        for i in range(len(chars) - 2):
            h = fnv1a("".join(chars[i:i + 3]).encode("utf-8"), seed)
            counts[h % dim] += -1.0 if h >> 63 else 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        return np.zeros(dim, dtype=np.float32)
    return np.array([c / norm for c in counts], dtype=np.float64).astype(np.float32)


CASES = [
    ("abc", 20, 7), ("", 8, 0), ("a", 5, 0), ("ab", 1, 0), ("' OR 1=1 --", 384, 0),
    ("<img src=x onerror=alert(1)>", 20, 0), ("東京タワー", 16, 42), ("a" * 200, 384, 123456789),
    ("😀x", 12, (1 << 63) + 5), ("; cat /etc/passwd", 384, 0), ("hello world", 3, 1),
]

if __name__ == "__main__":
    out = [{"payload": p, "dim": d, "seed": s, "vector": [float(x) for x in hash_embed(p, d, s)]} for p, d, s in CASES]
    json.dump(out, sys.stdout, ensure_ascii=False, indent=1)
    sys.stdout.write("\n")
