"""Independent SSRF verdict oracle built on the Python standard library.

Host notation is resolved by socket.inet_aton and ipaddress, URL parts by
urllib.parse, ranges by ipaddress networks. Usage: ssrf_oracle.py URL...
"""
import base64
import ipaddress
import json
import re
import socket
import sys
from urllib.parse import unquote, urlsplit

PRIVATE = [ipaddress.ip_network(n) for n in (
    "127.0.0.0/8", "10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16", "169.254.0.0/16",
    "0.0.0.0/32", "::1/128", "fc00::/7", "fe80::/10")]
META_HOSTS = ["169.254.169.254", "metadata.google.internal", "metadata.goog", "169.254.170.2", "fd00:ec2::254"]
META_PATHS = ["/latest/meta-data", "/computemetadata", "/metadata/instance"]
PARAMS = {"url", "uri", "redirect", "redirect_uri", "next", "dest", "destination", "target", "callback", "link", "fetch", "proxy"}
REBIND = ["nip.io", "sslip.io", "xip.io"]

URL_RE = re.compile(
    r"(?i)(?<![A-Za-z0-9+.\-])(?:https?|ftp|gopher|file|dict)://[^\s\"'<>`\\\x00-\x1f\x7f]*"
    r"|(?<![A-Za-z0-9/.\-_%:])//[A-Za-z0-9\[][^\s\"'<>`\\\x00-\x1f\x7f]*")


def b64(token):
    if len(token) < 12:
        return None
    body = token.rstrip("=")
    pad = len(token) - len(body)
    if "=" in body or pad > 2 or (pad and len(token) % 4) or len(body) % 4 == 1:
        return None
    safe = "-" in body or "_" in body
    if safe and ("+" in body or "/" in body):
        return None
    try:
        raw = (base64.urlsafe_b64decode if safe else base64.b64decode)(body + "=" * (-len(body) % 4))
    except ValueError:
        return None
    ok = sum(1 for b in raw if 0x20 <= b < 0x7F or b in (9, 10, 13))
    if not raw or ok * 5 < len(raw) * 4:
        return None
    return raw.decode("utf-8", "replace")


def decoders(s):
    d = unquote(s, errors="replace") if "%" in s else s
    yield "url_decode", (d if d != s else None)
    u = re.sub(r"\\u([0-9a-fA-F]{4})|\\x([0-9a-fA-F]{2})", lambda m: chr(int(m.group(1) or m.group(2), 16)), s)
    yield "unicode_escape", (u if u != s else None)
    changed = [False]

    def rep(m):
        t = b64(m.group(0))
        if t is None:
            return m.group(0)
        changed[0] = True
        return t
    r = re.sub(r"[A-Za-z0-9+/=_-]+", rep, s)
    yield "base64", (r if changed[0] else None)


def variants(text):
    out, seen, frontier = [(text, [])], {text}, [(text, [])]
    for _ in range(3):
        level = []
        for s, chain in frontier:
            for name, d in decoders(s):
                if len(level) == 3:
                    break
                if d is not None and d not in seen:
                    seen.add(d)
                    level.append((d, chain + [name]))
        if not level:
            break
        out += level
        frontier = level
    return out


def urls(text):
    for m in URL_RE.finditer(text):
        u = m.group(0).rstrip(".,;)]}!")
        if u.startswith("//") and len(u) < 3:
            continue
        yield u


def resolve(host):
    if ":" in host:
        try:
            ip = ipaddress.ip_address(host.split("%")[0])
        except ValueError:
            return None
        return ip.ipv4_mapped or ip
    host = host[:-1] if host.endswith(".") else host
    if not re.fullmatch(r"[0-9a-fA-FxX.]+", host):
        return None
    try:
        return ipaddress.ip_address(socket.inet_aton(host))
    except OSError:
        return None


def parts(u):
    s = urlsplit(u if "://" in u else "http:" + u)
    host = s.netloc.rsplit("@", 1)[-1]
    if host.startswith("["):
        host = host[1:host.index("]")]
    elif re.search(r":\d*$", host):
        host = host.rsplit(":", 1)[0]
    host = host.rstrip(".").lower()
    params = [p.split("=", 1) + [""] for p in s.query.split("&") if p]
    return host, s.path, [(p[0], p[1]) for p in params]


def local(host):
    ip = resolve(host)
    if ip is not None and any(ip in n for n in PRIVATE if n.version == ip.version):
        return True
    if host == "localhost" or host.endswith(".localhost") or host.endswith(".local"):
        return True
    for d in REBIND:
        if host.endswith("." + d):
            label = host[: -len(d) - 1]
            cands = [".".join(label.split(".")[-4:]), ".".join(label.split(".")[-1].split("-")[-4:])]
            last = label.split(".")[-1]
            if re.fullmatch(r"[0-9a-f]{8}", last):
                cands.append(str(ipaddress.IPv4Address(int(last, 16))))
            for c in cands:
                try:
                    ip = ipaddress.IPv4Address(socket.inet_aton(c)) if re.fullmatch(r"[0-9a-fA-FxX.]+", c) and c.count(".") == 3 else None
                except OSError:
                    ip = None
                if ip is not None and any(ip in n for n in PRIVATE if n.version == 4):
                    return True
    return False


def metadata(host, path):
    ip = resolve(host)
    for m in META_HOSTS:
        if host == m or (ip is not None and str(ip) == str(resolve(m))):
            return True
    return any(path.lower().startswith(p) for p in META_PATHS)


def param_hit(params, depth):
    if depth >= 3:
        return False
    for name, value in params:
        if name.lower() not in PARAMS:
            continue
        for v, _ in variants(value):
            for inner in urls(v):
                h, p, q = parts(inner)
                if local(h) or metadata(h, p) or param_hit(q, depth + 1):
                    return True
    return False


def verdict(text):
    hits, seen = set(), set()
    for v, chain in variants(text):
        for u in urls(v):
            host, path, params = parts(u)
            scheme = u.split("//")[0].rstrip(":").lower()
            if (scheme, host, path) in seen:
                continue
            seen.add((scheme, host, path))
            found = set()
            if local(host):
                found.add("local_ip")
            if metadata(host, path):
                found.add("cloud_metadata")
            if param_hit(params, 0):
                found.add("param_based")
            if chain and found:
                found.add("encoded_payload")
            hits |= found
    order = ["local_ip", "cloud_metadata", "param_based", "encoded_payload"]
    return [o for o in order if o in hits]


if __name__ == "__main__":
    for arg in sys.argv[1:]:
        print(json.dumps({"url": arg, "vectors": verdict(arg)}))
