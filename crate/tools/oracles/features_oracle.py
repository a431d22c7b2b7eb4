"""Brute-force reimplementation of the payload feature definitions.

Reads the dictionary files directly and recomputes every feature with plain
Python string scanning and the `re` module. Usage:

    features_oracle.py PAYLOADS.json > EXPECTED.json
"""

import json
import re
import sys
from pathlib import Path

DICT_DIR = Path(__file__).resolve().parents[2] / "crates" / "core" / "dictionaries"

OSI = ["os_commands", "os_operators", "os_special_chars", "os_patterns", "os_pipes",
       "os_variable_exec", "os_remote", "os_sysinfo", "os_privesc"]
WORD = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def ascii_lower(s):
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in s)


def load(name):
    opts = {"ci": False, "boundary": True, "kind": "literal"}
    entries = []
    for raw in (DICT_DIR / (name + ".txt")).read_text(encoding="utf-8").split("\n"):
        line = raw.rstrip("\r")
        if line == "" or line[:2] == "# ":
            continue
        if line[:3] == "#@ ":
            d = line[3:].strip()
            if d == "case insensitive":
                opts["ci"] = True
            elif d == "boundary none":
                opts["boundary"] = False
            elif d.startswith("kind "):
                opts["kind"] = d[5:]
            else:
                raise ValueError(d)
            continue
        entries.append(ascii_lower(line) if opts["ci"] else line)
    opts["entries"] = entries
    return opts


def count(d, text):
    if d["ci"]:
        text = ascii_lower(text)
    if d["kind"] == "regex":
        return sum(len(re.findall(p, text)) for p in d["entries"])
    if d["kind"] == "tag":
        alt = "|".join(re.escape(t) for t in d["entries"])
        ws = "[ \\t\\n\\r\\f\\v]*"
        return len(re.findall("<" + ws + "/?" + ws + "(?:" + alt + ")(?![A-Za-z0-9_])", text))
    total = 0
    i = 0
    while i < len(text):
        candidates = []
        for tok in d["entries"]:
            if text[i:i + len(tok)] != tok:
                continue
            if d["boundary"]:
                before = text[i - 1] if i > 0 else ""
                after = text[i + len(tok)] if i + len(tok) < len(text) else ""
                if tok[0] in WORD and before in WORD and before != "":
                    continue
                if tok[-1] in WORD and after in WORD and after != "":
                    continue
            candidates.append(len(tok))
        if candidates:
            total += 1
            i += max(candidates)
        else:
            i += 1
    return total


def nested_select(text):
    low = ascii_lower(text)
    starts = [m.start() for m in re.finditer("(?<![A-Za-z0-9_])select(?![A-Za-z0-9_])", low)]
    n = 0
    for k, pos in enumerate(starts):
        depth = 0
        for c in low[:pos]:
            if c == "(":
                depth += 1
            elif c == ")":
                depth = max(0, depth - 1)
        if k > 0 and depth > 0:
            n += 1
    return n


def features(payload, dicts):
    osi = [count(dicts[n], payload) for n in OSI]
    c = lambda n: count(dicts[n], payload)
    sqli = [c("sql_keywords"), c("sql_operators"), c("sql_special_chars"), c("sql_boolean"),
            len(payload), c("sql_union_select"), c("sql_patterns"), c("sql_encoded"),
            c("sql_db_specific"), c("sql_time_based"), nested_select(payload)]
    xss = [c("xss_tags"), c("xss_methods"), c("xss_js_files"), c("xss_javascript"), len(payload),
           c("xss_obfuscated"), c("xss_special_chars"), c("xss_external")]
    return {"sqli": sqli, "osi": osi, "xss": xss}


def all_dicts():
    return {p.stem: load(p.stem) for p in DICT_DIR.glob("*.txt")}


def main():
    payloads = json.loads(Path(sys.argv[1]).read_text(encoding="utf-8"))
    dicts = all_dicts()
    out = [dict(payload=p, **features(p, dicts)) for p in payloads]
    json.dump(out, sys.stdout, ensure_ascii=False, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
