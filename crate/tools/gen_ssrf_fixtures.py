"""Writes the curated SSRF URL corpora and their expected verdicts.

Each malicious URL carries a hand-assigned verdict; the script refuses to
write anything unless the independent oracle agrees with every label and
flags none of the benign URLs.
"""
import base64
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent / "oracles"))
import ssrf_oracle  # noqa: E402

L, M, P, E = "local_ip", "cloud_metadata", "param_based", "encoded_payload"


def b64(s):
    return base64.b64encode(s.encode()).decode()


MALICIOUS = [
    # local and private targets, including obfuscated notations
    ("http://127.0.0.1/admin", [L]),
    ("http://localhost:8080/", [L]),
    ("http://10.5.5.5/", [L]),
    ("http://172.16.0.1/", [L]),
    ("http://172.31.255.254/internal", [L]),
    ("http://192.168.1.1/router", [L]),
    ("http://2130706433/", [L]),
    ("http://0x7f000001/", [L]),
    ("http://0177.0.0.1/", [L]),
    ("http://017700000001/", [L]),
    ("http://0x7f.0x0.0x0.0x1/", [L]),
    ("http://0x7f.1/", [L]),
    ("http://[::1]/", [L]),
    ("http://[::ffff:127.0.0.1]/", [L]),
    ("http://0.0.0.0:22/", [L]),
    ("http://[fd12:3456::1]/", [L]),
    ("http://[fe80::1]/", [L]),
    ("http://printer.local/", [L]),
    ("http://10.0.0.1.nip.io/", [L]),
    ("gopher://127.0.0.1:6379/_INFO", [L]),
    # cloud metadata endpoints
    ("http://169.254.169.254/latest/meta-data/", [L, M]),
    ("http://169.254.169.254/latest/user-data", [L, M]),
    ("http://metadata.google.internal/computeMetadata/v1/", [M]),
    ("http://metadata.goog/computeMetadata/v1/instance", [M]),
    ("http://169.254.170.2/v2/credentials", [L, M]),
    ("http://[fd00:ec2::254]/latest/meta-data/", [L, M]),
    ("http://169.254.169.254/metadata/instance?api-version=2021-02-01", [L, M]),
    ("http://2852039166/latest/meta-data/", [L, M]),
    ("http://0xa9fea9fe/latest/", [L, M]),
    ("http://0251.0376.0251.0376/", [L, M]),
    ("http://example.com/latest/meta-data/iam", [M]),
    ("http://metadata.google.internal/", [M]),
    ("http://Metadata.Google.Internal/computeMetadata/v1beta1/", [M]),
    ("https://169.254.169.254/latest/api/token", [L, M]),
    ("http://[::ffff:169.254.169.254]/", [L, M]),
    ("http://169.254.169.254.nip.io/latest/meta-data/", [L, M]),
    ("http://internal.example.org/computeMetadata/v1/project", [M]),
    ("http://100.100.100.200/latest/meta-data", [M]),
    ("dict://169.254.169.254:80/", [L, M]),
    ("http://169.254.170.2.xip.io/", [L]),
    # parameter-borne and encoded payloads
    ("http://safe.com/?url=http://127.0.0.1/", [P]),
    ("http://a.com/?redirect=http%3A%2F%2F169.254.169.254%2F", [P]),
    ("https://shop.example.com/go?next=http://localhost/admin", [P]),
    ("http://img.example.net/fetch?target=http://10.0.0.5:8080/", [P]),
    ("http://proxy.example.org/?proxy=http://0x7f000001/", [P]),
    ("http://x.example.com/?callback=http://safe.example.com/?url=http://192.168.0.1/", [P]),
    ("http%3A%2F%2F127.0.0.1%2Fadmin", [L, E]),
    (b64("http://127.0.0.1/"), [L, E]),
    ("\\u0068ttp://10.0.0.1/", [L, E]),
    ("http%253A%252F%252F192.168.1.1%252F", [L, E]),
    (b64("http://169.254.169.254/latest/meta-data/"), [L, M, E]),
    ("http://dest.example.com/?dest=%2F%2F127.0.0.1%2F", [P]),
    ("http://example.com/?uri=" + b64("http://10.1.1.1/"), [P]),
    ("%2F%2F10.0.0.1%2F", [L, E]),
    ("http://site.example.com/redirect?redirect_uri=http://[::1]/cb", [P]),
    ("\\x68ttp://localhost/", [L, E]),
    ("https://ok.example.com/?link=http%253A%252F%252F172.16.5.4%252F", [P]),
    ("http://cdn.example.com/?fetch=http://metadata.google.internal/computeMetadata/v1/", [P]),
    (b64("Hello http://10.0.0.2/"), [L, E]),
    ("http://a.example.com/?destination=http%3A%2F%2F2130706433%2F", [P]),
]

HOSTS = [
    "www.google.com", "github.com", "en.wikipedia.org", "www.rust-lang.org", "docs.python.org",
    "stackoverflow.com", "www.mozilla.org", "news.ycombinator.com", "www.bbc.co.uk", "www.nytimes.com",
    "aws.amazon.com", "cloud.google.com", "azure.microsoft.com", "www.apple.com", "www.cloudflare.com",
    "graphql.org", "crates.io", "pypi.org", "www.npmjs.com", "registry.npmjs.org",
    "api.github.com", "raw.githubusercontent.com", "www.reddit.com", "twitter.com", "www.linkedin.com",
    "www.youtube.com", "maps.google.com", "www.openstreetmap.org", "archive.org", "www.gnu.org",
    "www.kernel.org", "www.debian.org", "ubuntu.com", "www.postgresql.org", "www.sqlite.org",
    "developer.mozilla.org", "www.w3.org", "www.ietf.org", "datatracker.ietf.org", "letsencrypt.org",
    "www.iana.org", "example.com", "www.example.org", "cdn.jsdelivr.net", "unpkg.com",
    "fonts.googleapis.com", "www.gravatar.com", "s3.amazonaws.com", "images.unsplash.com", "www.ebay.com",
]
BENIGN = []
for i, h in enumerate(HOSTS):
    BENIGN.append(f"https://{h}/")
    BENIGN.append([
        f"https://{h}/search?q=graphql+security&page=2",
        f"http://{h}/docs/index.html#intro",
        f"https://{h}/login?next=https://{h}/account",
        f"https://{h}/share?url=https%3A%2F%2Fexample.com%2Fpost%2F42",
        f"//{h}/static/app.js",
    ][i % 5])
BENIGN[-10:] = [
    "http://8.8.8.8/", "https://1.1.1.1/dns-query", "http://93.184.216.34/", "https://[2606:4700:4700::1111]/",
    "https://9.9.9.9:443/", "ftp://ftp.gnu.org/gnu/", "https://172.32.0.1/", "https://192.169.0.1/",
    "https://user@bitbucket.org/team/repo.git", "http://11.0.0.1/status",
]


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "ssrf"
    assert len(MALICIOUS) == 60 and len(BENIGN) == 100 and len(set(BENIGN)) == 100
    bad = [(u, want, ssrf_oracle.verdict(u)) for u, want in MALICIOUS if ssrf_oracle.verdict(u) != want]
    bad += [(u, [], ssrf_oracle.verdict(u)) for u in BENIGN if ssrf_oracle.verdict(u)]
    if bad:
        for b in bad:
            print("disagreement:", *b, file=sys.stderr)
        sys.exit(1)
    out.mkdir(parents=True, exist_ok=True)
    (out / "malicious.txt").write_text("".join(u + "\n" for u, _ in MALICIOUS))
    (out / "benign.txt").write_text("".join(u + "\n" for u in BENIGN))
    expected = [{"url": u, "vectors": v} for u, v in MALICIOUS]
    (out / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")


if __name__ == "__main__":
    main()
