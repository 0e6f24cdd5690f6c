"""Scene, association, and weights persistence.

Scenes and association records travel as canonical JSON documents: sorted
keys, compact separators, elements sorted by id, floats written in Python's
shortest round-trip decimal form.  Equal values therefore serialize to
identical bytes, which makes files diff, hash, and cache cleanly.  Multi-
scene containers are newline-delimited, one document per line, so large
benchmark suites stream without being held in memory as a single parse.

Weights use a small self-describing binary container: a magic line, one
canonical JSON manifest line listing every tensor (name, shape, dtype,
byte offset), then a single contiguous float32 little-endian blob.

Readers reject rather than repair: any malformed field raises before a
partially constructed value can escape, and the error names the offending
element or tensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

from .assocmatrix import AssocMatrix
from .errors import ConfigError, IntegrityError, ValidationError
from .geometry import (
    Association,
    Boundary,
    Centerline,
    DirVec,
    HdGraph,
    Point2,
    Road,
    Scene,
    SdGraph,
    validate_scene,
)

SCENE_VERSION = "1"
ASSOC_VERSION = "1"
WEIGHTS_MAGIC = b"MAPW1\n"


def _canonical(doc) -> str:
    # allow_nan=False: a non-finite number has no canonical JSON spelling.
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def _read_bytes(source: Union[str, IO]) -> bytes:
    if hasattr(source, "read"):
        data = source.read()
        return data.encode("utf-8") if isinstance(data, str) else data
    with open(source, "rb") as fh:
        return fh.read()


def _write_bytes(dest: Union[str, IO], data: bytes) -> None:
    if hasattr(dest, "write"):
        try:
            dest.write(data)
        except TypeError:  # text-mode handle
            dest.write(data.decode("utf-8"))
        return
    with open(dest, "wb") as fh:
        fh.write(data)


def _parse_line(text: str, where: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{where}: malformed JSON at column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object, got {type(doc).__name__}")
    return doc


def _point(value, where: str) -> Point2:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ValidationError(f"{where}: expected [x, y], got {value!r}")
    return Point2(float(value[0]), float(value[1]))


def _ident(obj, where: str) -> int:
    v = obj.get("id") if isinstance(obj, dict) else None
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValidationError(f"{where}: missing or non-integer id")
    return v


def _edges(value, where: str) -> tuple:
    if not isinstance(value, list):
        raise ValidationError(f"{where}: expected a list of [a, b] pairs")
    out = []
    for i, e in enumerate(value):
        if (
            not isinstance(e, (list, tuple))
            or len(e) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in e)
        ):
            raise ValidationError(f"{where}[{i}]: expected an [a, b] id pair, got {e!r}")
        out.append((e[0], e[1]))
    return tuple(out)


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where}: missing required field {key!r}")
    return doc[key]


# ---------------------------------------------------------------------------
# scenes


def scene_to_doc(scene: Scene) -> dict:
    """Plain-JSON document for a scene; inverse of scene_from_doc."""
    # graphs hold elements and edges in canonical sorted order already
    sd = {
        "roads": [{"id": r.id, "points": [[p.x, p.y] for p in r.points]} for r in scene.sd.roads],
        "edges": [list(e) for e in scene.sd.edges],
    }
    hd = {
        "centerlines": [
            {"id": c.id, "p1": [c.vector.p1.x, c.vector.p1.y], "p2": [c.vector.p2.x, c.vector.p2.y]}
            for c in scene.hd.centerlines
        ],
        "edges": [list(e) for e in scene.hd.edges],
        "boundaries": [
            {"id": b.id, "points": [[p.x, p.y] for p in b.points]} for b in scene.hd.boundaries
        ],
    }
    gt = None
    if scene.gt is not None:
        gt = {str(cl): int(rid) for cl, rid in scene.gt.labels.items()}
    return {"version": SCENE_VERSION, "meta": scene.meta, "sd": sd, "hd": hd, "gt": gt}


def scene_from_doc(doc: dict, where: str = "scene") -> Scene:
    """Rebuild and fully validate a Scene from its document form."""
    version = _field(doc, "version", where)
    if version != SCENE_VERSION:
        raise ValidationError(f"{where}: unsupported scene file version {version!r}")
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise ValidationError(f"{where}: meta must be an object")

    sd_doc = _field(doc, "sd", where)
    if not isinstance(sd_doc, dict):
        raise ValidationError(f"{where}: sd must be an object")
    roads = []
    for i, r in enumerate(_field(sd_doc, "roads", f"{where}.sd")):
        rid = _ident(r, f"{where}.sd.roads[{i}]")
        pts = _field(r, "points", f"{where}.sd.roads[{i}] (road {rid})")
        if not isinstance(pts, list):
            raise ValidationError(f"{where}.sd: road {rid}: points must be a list")
        roads.append(
            Road(
                id=rid,
                points=tuple(
                    _point(p, f"{where}.sd: road {rid} point {j}") for j, p in enumerate(pts)
                ),
            )
        )
    sd = SdGraph(roads=tuple(roads), edges=_edges(_field(sd_doc, "edges", f"{where}.sd"), f"{where}.sd.edges"))

    hd_doc = _field(doc, "hd", where)
    if not isinstance(hd_doc, dict):
        raise ValidationError(f"{where}: hd must be an object")
    cls = []
    for i, c in enumerate(_field(hd_doc, "centerlines", f"{where}.hd")):
        cid = _ident(c, f"{where}.hd.centerlines[{i}]")
        p1 = _point(_field(c, "p1", f"{where}.hd: centerline {cid}"), f"{where}.hd: centerline {cid} p1")
        p2 = _point(_field(c, "p2", f"{where}.hd: centerline {cid}"), f"{where}.hd: centerline {cid} p2")
        cls.append(Centerline(id=cid, vector=DirVec.from_points(p1, p2)))
    bounds = []
    for i, b in enumerate(hd_doc.get("boundaries") or ()):
        bid = _ident(b, f"{where}.hd.boundaries[{i}]")
        pts = _field(b, "points", f"{where}.hd: boundary {bid}")
        if not isinstance(pts, list):
            raise ValidationError(f"{where}.hd: boundary {bid}: points must be a list")
        bounds.append(
            Boundary(
                id=bid,
                points=tuple(
                    _point(p, f"{where}.hd: boundary {bid} point {j}") for j, p in enumerate(pts)
                ),
            )
        )
    hd = HdGraph(
        centerlines=tuple(cls),
        edges=_edges(_field(hd_doc, "edges", f"{where}.hd"), f"{where}.hd.edges"),
        boundaries=tuple(bounds),
    )

    gt_doc = doc.get("gt")
    gt = None
    if gt_doc is not None:
        if not isinstance(gt_doc, dict):
            raise ValidationError(f"{where}: gt must be an object or null")
        labels = {}
        for k, v in gt_doc.items():
            try:
                cl = int(k)
            except ValueError:
                raise ValidationError(f"{where}.gt: non-integer centerline key {k!r}") from None
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"{where}.gt: centerline {k}: road id must be an integer")
            labels[cl] = v
        gt = Association(labels=labels)

    return validate_scene(Scene(sd=sd, hd=hd, gt=gt, meta=meta))


def dumps_scene(scene: Scene) -> str:
    return _canonical(scene_to_doc(scene))


def write_scene(scene: Scene, dest: Union[str, IO]) -> None:
    """Write one scene as a canonical single-line JSON document."""
    _write_bytes(dest, dumps_scene(scene).encode("utf-8"))


def read_scene(source: Union[str, IO]) -> Scene:
    """Read and validate a single-scene file."""
    text = _read_bytes(source).decode("utf-8")
    return scene_from_doc(_parse_line(text, "scene"), "scene")


def write_scenes(scenes, dest: Union[str, IO]) -> None:
    """Write scenes as a newline-delimited container, one document per line."""
    data = "".join(dumps_scene(s) for s in scenes)
    _write_bytes(dest, data.encode("utf-8"))


def read_scenes(source: Union[str, IO]) -> list:
    """Read every scene from a newline-delimited container, in file order."""
    text = _read_bytes(source).decode("utf-8")
    scenes = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        scenes.append(scene_from_doc(_parse_line(line, where), where))
    return scenes


# ---------------------------------------------------------------------------
# association records


@dataclass(frozen=True)
class AssocRecord:
    """One association result tied to the scene it was computed on.

    scene_ref is an opaque identifier (by convention the scene meta's
    scene_id); probs is the full matrix when the producer kept it.
    """

    method: str
    scene_ref: str
    assoc: Association
    probs: Union[AssocMatrix, None] = None


def assoc_to_doc(rec: AssocRecord) -> dict:
    doc = {
        "version": ASSOC_VERSION,
        "method": rec.method,
        "scene_ref": rec.scene_ref,
        "labels": {str(cl): int(rid) for cl, rid in rec.assoc.labels.items()},
    }
    if rec.assoc.meta:
        doc["decode_meta"] = rec.assoc.meta
    if rec.probs is not None:
        doc["probs"] = {
            "road_ids": list(rec.probs.road_ids),
            "centerline_ids": list(rec.probs.centerline_ids),
            "rows": [[float(v) for v in row] for row in rec.probs.probs],
        }
    return doc


def assoc_from_doc(doc: dict, where: str = "assoc") -> AssocRecord:
    version = _field(doc, "version", where)
    if version != ASSOC_VERSION:
        raise ValidationError(f"{where}: unsupported association file version {version!r}")
    method = _field(doc, "method", where)
    scene_ref = _field(doc, "scene_ref", where)
    if not isinstance(method, str) or not isinstance(scene_ref, str):
        raise ValidationError(f"{where}: method and scene_ref must be strings")
    labels_doc = _field(doc, "labels", where)
    if not isinstance(labels_doc, dict):
        raise ValidationError(f"{where}: labels must be an object")
    labels = {}
    for k, v in labels_doc.items():
        try:
            cl = int(k)
        except ValueError:
            raise ValidationError(f"{where}.labels: non-integer centerline key {k!r}") from None
        if not isinstance(v, int) or isinstance(v, bool):
            raise ValidationError(f"{where}.labels: centerline {k}: road id must be an integer")
        labels[cl] = v
    meta = doc.get("decode_meta") or {}
    if not isinstance(meta, dict):
        raise ValidationError(f"{where}: decode_meta must be an object")

    probs = None
    probs_doc = doc.get("probs")
    if probs_doc is not None:
        if not isinstance(probs_doc, dict):
            raise ValidationError(f"{where}: probs must be an object")
        try:
            rows = np.asarray(_field(probs_doc, "rows", f"{where}.probs"), dtype=np.float32)
            probs = AssocMatrix(
                probs=rows,
                centerline_ids=tuple(_field(probs_doc, "centerline_ids", f"{where}.probs")),
                road_ids=tuple(_field(probs_doc, "road_ids", f"{where}.probs")),
            )
        except ValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{where}.probs: {exc}") from exc
    return AssocRecord(method=method, scene_ref=scene_ref, assoc=Association(labels=labels, meta=meta), probs=probs)


def write_assocs(records, dest: Union[str, IO]) -> None:
    """Write association records as a newline-delimited container."""
    data = "".join(_canonical(assoc_to_doc(r)) for r in records)
    _write_bytes(dest, data.encode("utf-8"))


def read_assocs(source: Union[str, IO]) -> list:
    text = _read_bytes(source).decode("utf-8")
    out = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        out.append(assoc_from_doc(_parse_line(line, where), where))
    return out


# ---------------------------------------------------------------------------
# weights


def save_weights(weights: dict, dest: Union[str, IO]) -> None:
    """Write a tensor dict as magic + manifest line + contiguous blob.

    Tensors are laid out sorted by name so the container is a pure
    function of the mapping, independent of dict insertion order.
    """
    entries = []
    blobs = []
    offset = 0
    for name in sorted(weights):
        arr = weights[name]
        if not isinstance(arr, np.ndarray) or arr.dtype != np.float32:
            raise ConfigError(f"tensor {name!r}: expected a float32 array")
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "<f4", "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    manifest = _canonical({"tensors": entries, "total_bytes": offset})
    _write_bytes(dest, WEIGHTS_MAGIC + manifest.encode("utf-8") + b"".join(blobs))


def load_weights(source: Union[str, IO], cfg=None) -> dict:
    """Read a weights container; validate against cfg when one is given.

    Raises IntegrityError for a damaged container (bad magic, malformed
    manifest, tensors that do not tile the blob, truncation) and, via
    validate_weights, ConfigError listing every name/shape discrepancy
    against the model configuration.
    """
    data = _read_bytes(source)
    if not data.startswith(WEIGHTS_MAGIC):
        raise IntegrityError("not a weights container: bad magic")
    body = data[len(WEIGHTS_MAGIC):]
    nl = body.find(b"\n")
    if nl < 0:
        raise IntegrityError("weights container: manifest line missing")
    try:
        manifest = json.loads(body[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"weights container: malformed manifest: {exc}") from exc
    if not isinstance(manifest, dict):
        raise IntegrityError("weights container: manifest must be an object")
    tensors = manifest.get("tensors")
    total = manifest.get("total_bytes")
    if not isinstance(tensors, list) or not isinstance(total, int) or isinstance(total, bool):
        raise IntegrityError("weights container: manifest needs tensors list and total_bytes")

    blob = body[nl + 1:]
    if len(blob) < total:
        raise IntegrityError(f"weights container: blob truncated: expected {total} bytes, got {len(blob)}")

    if cfg is not None:
        # check declared names and shapes against the model configuration
        # before trusting manifest offsets, so an edited shape reports as a
        # config mismatch naming the tensor rather than a broken tiling
        from .mat.weights import weight_spec

        spec = dict(weight_spec(cfg))
        declared = {
            t.get("name"): tuple(t.get("shape") or ())
            for t in tensors
            if isinstance(t, dict) and isinstance(t.get("name"), str)
        }
        problems = []
        for name, shape in spec.items():
            if name not in declared:
                problems.append(f"missing tensor {name!r}")
            elif declared[name] != shape:
                problems.append(f"tensor {name!r}: shape {list(declared[name])}, expected {list(shape)}")
        for name in declared:
            if name not in spec:
                problems.append(f"unexpected tensor {name!r}")
        if problems:
            raise ConfigError("weights do not match the model configuration: " + "; ".join(problems))

    weights = {}
    expect_offset = 0
    for i, t in enumerate(tensors):
        if not isinstance(t, dict):
            raise IntegrityError(f"weights container: tensor entry {i} must be an object")
        name = t.get("name")
        shape = t.get("shape")
        if not isinstance(name, str) or not isinstance(shape, list):
            raise IntegrityError(f"weights container: tensor entry {i}: missing name or shape")
        if t.get("dtype") != "<f4":
            raise IntegrityError(f"tensor {name!r}: unsupported dtype {t.get('dtype')!r}")
        if name in weights:
            raise IntegrityError(f"tensor {name!r}: duplicated in manifest")
        if not all(isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in shape):
            raise IntegrityError(f"tensor {name!r}: invalid shape {shape!r}")
        size = 4 * int(np.prod(shape, dtype=np.int64))
        # tensors must tile the blob exactly; an edited shape breaks the tiling
        if t.get("offset") != expect_offset:
            raise IntegrityError(
                f"tensor {name!r}: offset {t.get('offset')!r} does not follow the preceding tensor (expected {expect_offset})"
            )
        if expect_offset + size > total:
            raise IntegrityError(f"tensor {name!r}: extends past total_bytes")
        flat = np.frombuffer(blob, dtype="<f4", count=size // 4, offset=expect_offset)
        weights[name] = np.asarray(flat, dtype=np.float32).reshape(shape).copy()
        expect_offset += size
    if expect_offset != total:
        raise IntegrityError(f"weights container: tensors cover {expect_offset} bytes, manifest says {total}")

    if cfg is not None:
        from .mat.weights import validate_weights

        validate_weights(weights, cfg)
    return weights
