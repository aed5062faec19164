"""Model files.

A model file is one JSON document::

    {"format_version": "tesae-1", "checksum": "<crc32 hex>", "body": {...}}

``checksum`` is the CRC32 of the canonical body (sorted keys, no
whitespace). Arrays are stored as ``{"shape": [...], "data": "..."}`` with
row-major values printed to 17 significant digits, which round-trips
doubles exactly.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict
from typing import Union

import numpy as np

from .autoencoder import TesaeHyperParams, TesaeModel
from .errors import ChecksumError, SchemaError, VersionError
from .esae import EsaeHyperParams, EsaeModel
from .grammar import load_grammar
from .readout import KernelClassifier, LinearClassifier

READER_VERSION = 1
KINDS = ("tesae", "esae")


def _pack(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": " ".join(f"{v:.17g}" for v in a.ravel())}


def _unpack(d) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in d["shape"])
        text = d["data"]
        values = np.array(text.split(), dtype=float) if text else np.zeros(0)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed array: {exc}") from None
    if values.size != int(np.prod(shape)):
        raise SchemaError(f"array of shape {shape} holds {values.size} values")
    return values.reshape(shape)


def _canonical(body) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _checksum(body) -> str:
    return f"{zlib.crc32(_canonical(body).encode('utf-8')) & 0xFFFFFFFF:08x}"


def _classifier_body(c) -> dict:
    if isinstance(c, KernelClassifier):
        return {"kind": "rbf", "classes": list(c.classes), "C": c.C, "gamma": c.gamma,
                "support": _pack(c.support), "coefs": _pack(c.coefs), "biases": _pack(c.biases)}
    return {"kind": "linear", "classes": list(c.classes), "C": c.C,
            "weights": _pack(c.weights), "biases": _pack(c.biases)}


def _load_classifier(c: dict, dim: int):
    classes = tuple(int(k) for k in c["classes"])
    kind = c.get("kind", "linear")
    if kind == "rbf":
        support = _unpack(c["support"])
        coefs = _unpack(c["coefs"])
        if support.ndim != 2 or support.shape[1] != dim or coefs.shape != (len(classes), support.shape[0]):
            raise SchemaError("kernel classifier arrays have inconsistent shapes")
        return KernelClassifier(classes, support, coefs, _unpack(c["biases"]), float(c["gamma"]), float(c["C"]))
    if kind != "linear":
        raise SchemaError(f"unknown classifier kind {kind!r}")
    W = _unpack(c["weights"]).reshape(len(classes), dim)
    return LinearClassifier(classes, W, _unpack(c["biases"]), float(c["C"]))


def _tesae_body(m: TesaeModel) -> dict:
    arrays = {}
    shared = m.hyper.variant == "shared"
    for r in m.grammar.rules:
        mats, bias = m.enc_weights[r.index]
        dmats, dbiases = m.dec_weights[r.index]
        arrays[f"enc:b:{r.index}"] = _pack(bias)
        for j in range(r.arity):
            if shared:
                arrays["enc:W:shared"] = _pack(mats[j])
                arrays["dec:W:shared"] = _pack(dmats[j])
            else:
                arrays[f"enc:W:{r.index}:{j + 1}"] = _pack(mats[j])
                arrays[f"dec:W:{r.index}:{j + 1}"] = _pack(dmats[j])
            arrays[f"dec:b:{r.index}:{j + 1}"] = _pack(dbiases[j])
    classifiers = {a: _classifier_body(c) for a, c in sorted(m.classifiers.items())}
    return {
        "variant": m.hyper.variant,
        "hyperparameters": asdict(m.hyper),
        "grammar": m.grammar.source,
        "arrays": arrays,
        "classifiers": classifiers,
    }


def _esae_body(m: EsaeModel) -> dict:
    return {
        "variant": "esae",
        "hyperparameters": asdict(m.hyper),
        "grammar": m.grammar.source,
        "max_len": m.max_len,
        "arrays": {"U": _pack(m.U), "W": _pack(m.W), "V": _pack(m.V)},
    }


def dumps(m: Union[TesaeModel, EsaeModel]) -> str:
    if isinstance(m, TesaeModel):
        kind, body = "tesae", _tesae_body(m)
    elif isinstance(m, EsaeModel):
        kind, body = "esae", _esae_body(m)
    else:
        raise TypeError(f"cannot serialize {type(m).__name__}")
    doc = {"format_version": f"{kind}-{READER_VERSION}", "checksum": _checksum(body), "body": body}
    return _canonical(doc) + "\n"


def save_model(m, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(m))


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a model document: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise SchemaError("missing format_version")
    version = str(doc["format_version"])
    kind, _, number = version.rpartition("-")
    if kind not in KINDS:
        # bare numbers such as "2" are versions without a kind prefix
        kind, number = "", version
    if number != str(READER_VERSION):
        raise VersionError(f"model format version {version!r} is not supported (reader: {READER_VERSION})")
    if not kind:
        raise SchemaError(f"unknown model kind in {version!r}")
    try:
        body = doc["body"]
        stored = doc["checksum"]
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from None
    if _checksum(body) != stored:
        raise ChecksumError("model body does not match its checksum")
    try:
        return _load_tesae(body) if kind == "tesae" else _load_esae(body)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (SchemaError, VersionError, ChecksumError)):
            raise
        raise SchemaError(f"malformed model body: {exc!r}") from None


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _load_tesae(body) -> TesaeModel:
    grammar = load_grammar(body["grammar"])
    hyper = TesaeHyperParams(**body["hyperparameters"])
    arrays = body["arrays"]
    shared = hyper.variant == "shared"
    enc, dec = {}, {}
    if shared and "enc:W:shared" in arrays:
        enc_shared = _unpack(arrays["enc:W:shared"])
        dec_shared = _unpack(arrays["dec:W:shared"])
    for r in grammar.rules:
        positions = range(1, r.arity + 1)
        if shared:
            mats = [enc_shared for _ in positions]
            dmats = [dec_shared for _ in positions]
        else:
            mats = [_unpack(arrays[f"enc:W:{r.index}:{j}"]) for j in positions]
            dmats = [_unpack(arrays[f"dec:W:{r.index}:{j}"]) for j in positions]
        enc[r.index] = (mats, _unpack(arrays[f"enc:b:{r.index}"]))
        dec[r.index] = (dmats, [_unpack(arrays[f"dec:b:{r.index}:{j}"]) for j in positions])
    classifiers = {}
    for a, c in body["classifiers"].items():
        classifiers[a] = _load_classifier(c, hyper.dim)
    if set(classifiers) != set(grammar.nonterminals):
        raise SchemaError("classifiers do not cover the grammar's nonterminals")
    return TesaeModel(grammar, hyper, enc, dec, classifiers)


def _load_esae(body) -> EsaeModel:
    grammar = load_grammar(body["grammar"])
    hyper = EsaeHyperParams(**body["hyperparameters"])
    arrays = body["arrays"]
    return EsaeModel(grammar, hyper, _unpack(arrays["U"]), _unpack(arrays["W"]), _unpack(arrays["V"]),
                     int(body["max_len"]))
