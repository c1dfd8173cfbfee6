"""Text model files for RBM stacks and networks.

Layout (one item per line, floats as ``float.hex`` so round trips are
exact)::

    swarmimpute-model
    version=1
    kind=network            # or rbm_stack
    arch=784,200,30,200,784
    netkind=deep_ae         # networks only
    meta.<key>=<value>      # training config echo, sorted by key
    layer=0 activation=sigmoid shape=200x784     # networks
    W <hex> <hex> ...
    b <hex> ...
    rbm=0 shape=200x784                           # stacks
    W ...
    b ...
    c ...
    checksum=<16 hex digits>

The checksum is XXH64 over every byte before the ``checksum=`` line.
"""
from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np
import xxhash

from .deepnet import Layer, Network
from .errors import ChecksumMismatch, ShapeMismatch, UnsupportedVersion
from .rbm import Rbm

FORMAT_VERSION = 1
MAGIC = "swarmimpute-model"
NETWORK = "network"
RBM_STACK = "rbm_stack"


def payload_checksum(payload: bytes) -> str:
    return xxhash.xxh64(payload).hexdigest()


def _vec(tag: str, values: np.ndarray) -> str:
    return tag + "".join(" " + float(v).hex() for v in np.ravel(values))


def _serialize(model, metadata: dict | None) -> str:
    lines = [MAGIC, f"version={FORMAT_VERSION}"]
    if isinstance(model, Network):
        lines += [f"kind={NETWORK}", "arch=" + ",".join(map(str, model.architecture)),
                  f"netkind={model.kind}"]
    else:
        stack = list(model)
        if not stack or not all(isinstance(r, Rbm) for r in stack):
            raise TypeError("model must be a Network or a sequence of Rbm")
        arch = [stack[0].m] + [r.n for r in stack]
        lines += [f"kind={RBM_STACK}", "arch=" + ",".join(map(str, arch))]
    for key in sorted(metadata or {}):
        value = str(metadata[key])
        if "\n" in value or "=" in key:
            raise ValueError(f"metadata entry {key!r} cannot be stored on one line")
        lines.append(f"meta.{key}={value}")
    if isinstance(model, Network):
        for i, layer in enumerate(model.layers):
            lines.append(f"layer={i} activation={layer.activation} shape={layer.n_out}x{layer.n_in}")
            lines.append(_vec("W", layer.weights))
            lines.append(_vec("b", layer.biases))
    else:
        for i, rbm in enumerate(model):
            lines.append(f"rbm={i} shape={rbm.n}x{rbm.m}")
            lines.append(_vec("W", rbm.W))
            lines.append(_vec("b", rbm.b))
            lines.append(_vec("c", rbm.c))
    return "\n".join(lines) + "\n"


def dumps(model, metadata: dict | None = None) -> bytes:
    payload = _serialize(model, metadata).encode("ascii")
    return payload + f"checksum={payload_checksum(payload)}\n".encode("ascii")


def save(model, path, metadata: dict | None = None) -> None:
    """Write ``model`` atomically (temp file in the same directory, then rename)."""
    path = Path(path)
    data = dumps(model, metadata)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(line: str, tag: str, count: int) -> np.ndarray:
    parts = line.split(" ")
    if parts[0] != tag:
        raise ShapeMismatch(f"expected a {tag} row, found {parts[0]!r}")
    values = parts[1:]
    if len(values) != count:
        raise ShapeMismatch(f"{tag} row has {len(values)} values, shape needs {count}")
    return np.array([float.fromhex(v) for v in values], dtype=np.float64)


def _shape(field: str) -> tuple[int, int]:
    rows, cols = field.split("=", 1)[1].split("x")
    return int(rows), int(cols)


_FOOTER = re.compile(rb"checksum=([0-9a-f]{16})\n\Z")


def loads(data: bytes):
    """Parse a model file; returns ``(model, metadata)``."""
    head = data.split(b"\n", 2)
    if len(head) < 3 or head[0] != MAGIC.encode():
        raise ShapeMismatch("not a swarmimpute model file")
    if not head[1].startswith(b"version=") or not head[1][8:].isdigit():
        raise ShapeMismatch("missing version line")
    version = int(head[1][8:])
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version}, this build reads {FORMAT_VERSION}")

    cut = data.rfind(b"checksum=")
    footer = _FOOTER.match(data, cut) if cut >= 0 else None
    if footer is None:
        raise ChecksumMismatch("missing or malformed checksum footer")
    if payload_checksum(data[:cut]) != footer.group(1).decode():
        raise ChecksumMismatch("payload checksum does not match the footer")

    text = data[:cut].decode("ascii")
    try:
        return _parse_body(text.rstrip("\n").split("\n")[2:])
    except ShapeMismatch:
        raise
    except (KeyError, ValueError, IndexError) as exc:
        raise ShapeMismatch(f"malformed model body: {exc}") from exc


def _parse_body(body):
    header, pos = {}, 0
    metadata = {}
    while pos < len(body) and not body[pos].startswith(("layer=", "rbm=")):
        key, value = body[pos].split("=", 1)
        if key.startswith("meta."):
            metadata[key[5:]] = value
        else:
            header[key] = value
        pos += 1
    arch = [int(a) for a in header["arch"].split(",")]
    blocks = body[pos:]

    if header["kind"] == NETWORK:
        layers = []
        step = 3
        if len(blocks) != step * (len(arch) - 1):
            raise ShapeMismatch(f"{len(blocks) // step} layers stored, architecture needs {len(arch) - 1}")
        for i in range(len(arch) - 1):
            head, wline, bline = blocks[step * i:step * i + step]
            fields = dict(f.split("=", 1) for f in head.split(" "))
            out, inp = _shape("shape=" + fields["shape"])
            if (out, inp) != (arch[i + 1], arch[i]):
                raise ShapeMismatch(f"layer {i} shape {out}x{inp} contradicts the architecture")
            W = _floats(wline, "W", out * inp).reshape(out, inp)
            b = _floats(bline, "b", out)
            layers.append(Layer(W, b, fields["activation"]))
        return Network(layers, header.get("netkind", "deep_ae")), metadata

    if header["kind"] == RBM_STACK:
        stack = []
        step = 4
        if len(blocks) != step * (len(arch) - 1):
            raise ShapeMismatch(f"{len(blocks) // step} RBMs stored, architecture needs {len(arch) - 1}")
        for i in range(len(arch) - 1):
            head, wline, bline, cline = blocks[step * i:step * i + step]
            n, m = _shape(head.split(" ")[1])
            if (n, m) != (arch[i + 1], arch[i]):
                raise ShapeMismatch(f"RBM {i} shape {n}x{m} contradicts the architecture")
            stack.append(Rbm(_floats(wline, "W", n * m).reshape(n, m),
                             _floats(bline, "b", m), _floats(cline, "c", n)))
        return stack, metadata

    raise ShapeMismatch(f"unknown model kind {header['kind']!r}")


def load(path):
    """Read a model file; returns ``(model, metadata)``."""
    return loads(Path(path).read_bytes())
