"""JSON files for matrices, channels, distributions and reports.

Every matrix-like object is one JSON document::

    {"format": "chancert-matrix/1", "kind": "choi", "dims": {...}, "labels": {...},
     "entries": [[[re, im], ...], ...]}

Complex numbers are always two-element arrays. Floats are written with ``repr`` precision,
so decimal inputs of at most 17 significant digits round-trip exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .channels import ChoiChannel
from .correlations import BellFunctional, ConditionalDistribution
from .protocols import MeasurementFamily, ProtocolSpec, QuantumStrategy

MATRIX_FORMAT = "chancert-matrix/1"
REPORT_FORMAT = "chancert-report/1"
PROTOCOL_FORMAT = "chancert-protocol/1"
KINDS = ("state", "choi", "gram", "stochastic", "povm-family", "strategy", "state-family", "functional")


class FileFormatError(ValueError):
    pass


def encode_array(a) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).astype(float).tolist()


def decode_array(entries) -> np.ndarray:
    try:
        arr = np.asarray(entries, dtype=float)
    except (TypeError, ValueError) as e:
        raise FileFormatError(f"entries are not a numeric array: {e}") from None
    if arr.size == 0:
        return np.zeros(0, dtype=complex)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise FileFormatError("entries must end in [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _real(a: np.ndarray, what: str) -> np.ndarray:
    if np.abs(a.imag).max(initial=0.0) > 0:
        raise FileFormatError(f"{what} must be real")
    return a.real


@dataclass
class MatrixFile:
    kind: str
    entries: np.ndarray
    dims: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"format": MATRIX_FORMAT, "kind": self.kind, "dims": self.dims, "labels": self.labels,
               "entries": encode_array(self.entries)}
        if self.parts:
            out["parts"] = {k: encode_array(v) for k, v in self.parts.items()}
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "MatrixFile":
        if not isinstance(doc, dict) or doc.get("format") != MATRIX_FORMAT:
            raise FileFormatError(f"not a {MATRIX_FORMAT} document")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise FileFormatError(f"unknown kind {kind!r}")
        if "entries" not in doc:
            raise FileFormatError("missing entries")
        parts = {k: decode_array(v) for k, v in doc.get("parts", {}).items()}
        return cls(kind, decode_array(doc["entries"]), dict(doc.get("dims", {})),
                   dict(doc.get("labels", {})), parts)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def to_object(self):
        """The core object this file describes."""
        try:
            return _TO_OBJECT[self.kind](self)
        except FileFormatError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise FileFormatError(f"invalid {self.kind} file: {e}") from None


def _square(e, what):
    if e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise FileFormatError(f"{what} must be a square matrix")
    return e


def _to_choi(f: MatrixFile) -> ChoiChannel:
    lab = f.labels or {}
    return ChoiChannel(_square(f.entries, "Choi matrix"), f.dims["in"], f.dims["out"],
                       lab.get("in"), lab.get("out"))


def _to_stochastic(f: MatrixFile):
    s = _real(f.entries, "stochastic matrix")
    if s.ndim != 2:
        raise FileFormatError("stochastic matrix must be 2-d")
    ins, outs = f.dims.get("in"), f.dims.get("out")
    if ins is not None and outs is not None and len(ins) == 2 and len(outs) == 2:
        return ConditionalDistribution.from_stochastic(s, outs[0], outs[1], ins[0], ins[1])
    return s


def _to_povms(f: MatrixFile) -> MeasurementFamily:
    e = f.entries
    if e.ndim != 4:
        raise FileFormatError("povm-family entries must have shape (settings, outcomes, d, d)")
    return MeasurementFamily(tuple(tuple(povm) for povm in e))


def _to_strategy(f: MatrixFile) -> QuantumStrategy:
    return QuantumStrategy(_square(f.entries, "shared state"), tuple(f.dims["state"]),
                           MeasurementFamily(tuple(tuple(p) for p in f.parts["alice"])),
                           MeasurementFamily(tuple(tuple(p) for p in f.parts["bob"])))


def _to_state_family(f: MatrixFile) -> tuple[list, list, tuple[int, int]]:
    return list(f.parts["alice"]), list(f.parts["bob"]), tuple(f.dims.get("ancilla", (1, 1)))


def _to_functional(f: MatrixFile) -> BellFunctional:
    return BellFunctional(_real(f.entries, "functional"))


_TO_OBJECT = {
    "state": lambda f: _square(f.entries, "state"),
    "gram": lambda f: _square(f.entries, "Gram matrix"),
    "choi": _to_choi,
    "stochastic": _to_stochastic,
    "povm-family": _to_povms,
    "strategy": _to_strategy,
    "state-family": _to_state_family,
    "functional": _to_functional,
}


def channel_file(ch: ChoiChannel) -> MatrixFile:
    return MatrixFile("choi", ch.choi, {"in": list(ch.in_dims), "out": list(ch.out_dims)},
                      {"in": list(ch.in_labels), "out": list(ch.out_labels)})


def stochastic_file(s: np.ndarray, in_dims=None, out_dims=None) -> MatrixFile:
    dims = {}
    if in_dims is not None:
        dims = {"in": list(in_dims), "out": list(out_dims)}
    return MatrixFile("stochastic", np.asarray(s, dtype=float), dims)


def distribution_file(p: ConditionalDistribution) -> MatrixFile:
    na, nb, nx, ny = p.cardinalities
    return stochastic_file(p.stochastic(), (nx, ny), (na, nb))


def state_file(rho, dims=None) -> MatrixFile:
    rho = np.asarray(rho)
    return MatrixFile("state", rho, {"state": list(dims or (rho.shape[0],))})


def gram_file(g) -> MatrixFile:
    g = np.asarray(g)
    return MatrixFile("gram", g, {"state": [g.shape[0]]})


def povm_file(fam: MeasurementFamily) -> MatrixFile:
    return MatrixFile("povm-family", fam.array(fam.n_settings), {"state": [fam.dim]})


def strategy_file(s: QuantumStrategy) -> MatrixFile:
    return MatrixFile("strategy", s.state, {"state": list(s.dims)},
                      parts={"alice": s.alice.array(s.alice.n_settings), "bob": s.bob.array(s.bob.n_settings)})


def state_family_file(alice, bob, ancilla_dims=(1, 1)) -> MatrixFile:
    """Input states rho^x and sigma^y; ``entries`` is empty and the families sit in ``parts``."""
    return MatrixFile("state-family", np.zeros(0), {"ancilla": list(ancilla_dims)},
                      parts={"alice": np.array(alice), "bob": np.array(bob)})


def functional_file(gamma: BellFunctional) -> MatrixFile:
    return MatrixFile("functional", gamma.coeffs)


def read_json(path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FileFormatError(f"cannot read {path}: {e}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path} is not valid JSON: {e}") from None


def read_matrix(path) -> MatrixFile:
    return MatrixFile.from_json(read_json(path))


def write_json(doc: dict, path=None) -> str:
    text = json.dumps(doc, indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# protocol files


def protocol_to_json(spec: ProtocolSpec, ch: ChoiChannel) -> dict:
    doc = {"format": PROTOCOL_FORMAT, "variant": spec.variant, "channel": channel_file(ch).to_json(),
           "ancilla_dims": list(spec.ancilla_dims)}
    if spec.variant == "computational":
        return doc
    doc["alice_meas"] = encode_array(spec.alice_meas.array(spec.alice_meas.n_settings))
    doc["bob_meas"] = encode_array(spec.bob_meas.array(spec.bob_meas.n_settings))
    if spec.variant == "general":
        doc["alice_inputs"] = [channel_file(c).to_json() for c in spec.alice_inputs]
        doc["bob_inputs"] = [channel_file(c).to_json() for c in spec.bob_inputs]
        doc["shared_state"] = encode_array(spec.shared_state)
        doc["shared_dims"] = list(spec.shared_dims)
    else:
        doc["alice_inputs"] = encode_array(np.array(spec.alice_inputs))
        doc["bob_inputs"] = encode_array(np.array(spec.bob_inputs))
    return doc


def protocol_from_json(doc: dict) -> tuple[ProtocolSpec, ChoiChannel]:
    if not isinstance(doc, dict) or doc.get("format") != PROTOCOL_FORMAT:
        raise FileFormatError(f"not a {PROTOCOL_FORMAT} document")
    try:
        ch = MatrixFile.from_json(doc["channel"]).to_object()
        if not isinstance(ch, ChoiChannel):
            raise FileFormatError("protocol channel must be a choi file")
        variant = doc["variant"]
        anc = tuple(doc.get("ancilla_dims", (1, 1)))
        if variant == "computational":
            return ProtocolSpec(variant, ancilla_dims=anc), ch
        fam = lambda key: MeasurementFamily(tuple(tuple(p) for p in decode_array(doc[key])))
        kw = {"alice_meas": fam("alice_meas"), "bob_meas": fam("bob_meas"), "ancilla_dims": anc}
        if variant in ("general", "a"):
            chans = lambda key: tuple(MatrixFile.from_json(c).to_object() for c in doc[key])
            spec = ProtocolSpec(variant, chans("alice_inputs"), chans("bob_inputs"),
                                shared_state=decode_array(doc["shared_state"]),
                                shared_dims=tuple(doc["shared_dims"]), **kw)
        else:
            spec = ProtocolSpec(variant, tuple(decode_array(doc["alice_inputs"])),
                                tuple(decode_array(doc["bob_inputs"])), **kw)
    except FileFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"invalid protocol file: {e}") from None
    return spec, ch


# ---------------------------------------------------------------------------
# reports


def report_json(command: list[str], results: dict, seed=None, wall_time: float | None = None) -> dict:
    return {"format": REPORT_FORMAT, "command": list(command), "seed": seed,
            "wall_time": wall_time, **_plain(results)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return encode_array(x)
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    if hasattr(x, "coeffs"):
        return _plain(x.coeffs)
    return x
