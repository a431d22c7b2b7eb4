"""Writes fixtures/payloads/corpus.json (300 payloads) and the oracle's
expected feature vectors in fixtures/payloads/features_expected.json."""

import json
import random
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(HERE / "oracles"))

import corpora  # noqa: E402
import features_oracle  # noqa: E402

ROOT = HERE.parent
OUT = ROOT / "fixtures" / "payloads"

EDGE = [
    "", " ", "ls; whoami | sudo chmod 777 /", "please list my orders", "' OR '1'='1' --",
    "SELECT name FROM t WHERE id IN (SELECT id FROM u)", "<script>alert(1)</script>",
    "I read the javascript tutorial at http://a.com", "1' UNION SELECT password FROM users--",
    "alice@example.com", "<img src=x onerror=alert(1)>", "a || b", "app.json", "app.js?v=1",
    "selection", "WAITFOR DELAY '0:0:5'", "< / ScRiPt >", "é✓", "LS WHOAMI", "SeLeCt(SeLeCt(1))",
    ")))select((select", "#", "##", "--#--", "&&&", "|||", "$(a)$(b)", "`a` `b` `", "%2d%2d%2d",
    "dbms_lock.sleep(1)", "<<script<script", "httphttps://http", "Kelvin ſelect İ",
    "tab\tseparated\vvertical\x0cform", "line1\nline2; ls\n", "0x270x27 0x27",
]


def main():
    rng = random.Random(7)
    payloads = list(EDGE)
    seen = set(payloads)
    plan = [("benign", 110), ("sqli", 55), ("osi", 50), ("xss", 49)]
    for kind, n in plan:
        made = 0
        while made < n:
            p = corpora.benign(rng) if kind == "benign" else corpora.attack(rng, kind)
            if p not in seen:
                seen.add(p)
                payloads.append(p)
                made += 1
    assert len(payloads) == 300, len(payloads)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "corpus.json").write_text(json.dumps(payloads, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    dicts = features_oracle.all_dicts()
    expected = [dict(payload=p, **features_oracle.features(p, dicts)) for p in payloads]
    (OUT / "features_expected.json").write_text(json.dumps(expected, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
