"""Network TSV and model JSON persistence.

Network files are tab-separated edge lists with a ``#`` header::

    # N=3 L=2 directed=1
    # layer_labels=advice<TAB>friendship      (optional)
    # node_labels=a<TAB>b<TAB>c               (optional)
    0	1	2	1.0
    1	0	2

Each record is ``layer, i, j[, weight]`` with zero-based indices; the weight
defaults to 1 and repeated records add up. Undirected files list each edge
once and are mirrored on load.
"""

import json
import os
import tempfile

import numpy as np

from .model import MultilayerNetwork, NNTuckModel


class DataError(ValueError):
    """Malformed input file."""


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_header(line, lineno):
    fields = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if not sep:
            raise DataError(f"line {lineno}: malformed header token {token!r}")
        fields[key] = value
    try:
        return int(fields["N"]), int(fields["L"]), fields.get("directed", "1") not in ("0", "false")
    except (KeyError, ValueError) as exc:
        raise DataError(f"line {lineno}: header needs integer N and L ({exc})") from None


def parse_network(text, drop_diagonal=False, binarize=False):
    header = None
    labels = {}
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if header is None and body.startswith("N="):
                header = _parse_header(body, lineno)
            elif body.startswith(("node_labels=", "layer_labels=")):
                key, _, value = raw.lstrip("# ").rstrip("\n").partition("=")
                labels[key] = value.split("\t")
            continue
        if header is None:
            raise DataError(f"line {lineno}: edge record before the '# N=.. L=..' header")
        parts = line.split()
        if len(parts) not in (3, 4):
            raise DataError(f"line {lineno}: expected 'layer i j [weight]', got {line!r}")
        try:
            layer, i, j = (int(p) for p in parts[:3])
            weight = float(parts[3]) if len(parts) == 4 else 1.0
        except ValueError:
            raise DataError(f"line {lineno}: cannot parse {line!r}") from None
        records.append((lineno, layer, i, j, weight))
    if header is None:
        raise DataError("missing '# N=<int> L=<int> directed=<0|1>' header")

    N, L, directed = header
    A = np.zeros((N, N, L))
    seen = set()
    for lineno, layer, i, j, weight in records:
        if not (0 <= layer < L and 0 <= i < N and 0 <= j < N):
            raise DataError(f"line {lineno}: index out of range for N={N}, L={L}")
        if weight < 0 or not np.isfinite(weight):
            raise DataError(f"line {lineno}: weight must be finite and nonnegative")
        if not directed and i != j:
            if (layer, j, i) in seen:
                raise DataError(
                    f"line {lineno}: undirected edge ({i}, {j}) in layer {layer} listed in both directions"
                )
            seen.add((layer, i, j))
            A[j, i, layer] += weight
        A[i, j, layer] += weight
    if drop_diagonal:
        idx = np.arange(N)
        A[idx, idx, :] = 0.0
    if binarize:
        A = (A > 0).astype(float)
    return MultilayerNetwork(A, directed=directed,
                             node_labels=labels.get("node_labels"),
                             layer_labels=labels.get("layer_labels"))


def load_network(path, drop_diagonal=False, binarize=False):
    """Read a network TSV; ``drop_diagonal`` is applied before ``binarize``."""
    with open(path) as fh:
        return parse_network(fh.read(), drop_diagonal, binarize)


def format_network(network):
    A = network.adjacency
    N, _, L = A.shape
    lines = [f"# N={N} L={L} directed={int(network.directed)}"]
    if network.layer_labels != [str(k) for k in range(L)]:
        lines.append("# layer_labels=" + "\t".join(network.layer_labels))
    if network.node_labels != [str(i) for i in range(N)]:
        lines.append("# node_labels=" + "\t".join(network.node_labels))
    for layer in range(L):
        i, j = np.nonzero(A[:, :, layer])
        for a, b in zip(i.tolist(), j.tolist()):
            if not network.directed and b < a:
                continue
            w = A[a, b, layer]
            lines.append(f"{layer}\t{a}\t{b}" + ("" if w == 1.0 else f"\t{float(w)!r}"))
    return "\n".join(lines) + "\n"


def save_network(network, path):
    atomic_write(path, format_network(network))


def format_model(model, extra=None):
    d = model.to_dict()
    if extra:
        d.update(extra)
    return json.dumps(d, indent=1) + "\n"


def save_model(model, path, extra=None):
    """Write the model JSON; ``extra`` adds top-level keys such as the fit config."""
    atomic_write(path, format_model(model, extra))


def load_model(path):
    with open(path) as fh:
        try:
            return NNTuckModel.from_dict(json.load(fh))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: not a model file ({exc})") from None
