"""Binary persistence of a fitted pipeline.

Layout (all integers unsigned little-endian, all reals little-endian f64)::

    "TPM1"  u16 version  | u16 block_count  { u8 stage_id  u32 length  bytes[length] }*  | u32 crc32

The CRC covers everything between the version field and the checksum.
Stage ids must appear in strictly increasing order:
0 meta, 1 scaling, 2 selection, 3 pca, 4 lda, 5 svm.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .pipeline import FittedPipeline, parse_config
from .reduce import LdaModel, PcaModel
from .selection import ColumnScaling
from .svm import KernelSpec, SvmBinaryModel, SvmMulticlassModel

__all__ = ["CorruptModelError", "MAGIC", "VERSION", "STAGES", "dumps", "loads", "save", "load", "stage_ids"]

MAGIC = b"TPM1"
VERSION = 1
STAGES = {0: "meta", 1: "scaling", 2: "selection", 3: "pca", 4: "lda", 5: "svm"}
_KERNELS = ("linear", "poly", "rbf")


class CorruptModelError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.parts = []

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def f64(self, v):
        self.parts.append(struct.pack("<d", float(v)))

    def reals(self, arr):
        self.parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def ints(self, arr):
        self.parts.append(np.ascontiguousarray(arr, dtype="<u4").tobytes())

    def text(self, s):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.parts.append(raw)

    def strings(self, items):
        self.u32(len(items))
        for s in items:
            self.text(s)

    def getvalue(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data, what):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptModelError(f"{self.what} block truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return struct.unpack("<B", self.take(1))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64(self):
        return struct.unpack("<d", self.take(8))[0]

    def reals(self, n, shape=None):
        arr = np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)
        return arr.reshape(shape) if shape is not None else arr

    def ints(self, n):
        return np.frombuffer(self.take(4 * n), dtype="<u4").astype(np.int64)

    def text(self):
        return self.take(self.u32()).decode("utf-8")

    def strings(self):
        return tuple(self.text() for _ in range(self.u32()))

    def done(self):
        if self.pos != len(self.data):
            raise CorruptModelError(f"{self.what} block has {len(self.data) - self.pos} trailing bytes")


def _meta(p: FittedPipeline):
    w = _Writer()
    w.text(p.config.to_text())
    w.strings(p.feature_names)
    w.strings(p.label_names)
    return w.getvalue()


def _scaling(s: ColumnScaling):
    w = _Writer()
    w.u32(s.mins.size)
    w.reals(s.mins)
    w.reals(s.maxs)
    return w.getvalue()


def _selection(sel, n_features):
    w = _Writer()
    w.u32(n_features)
    w.u32(len(sel))
    w.ints(sel)
    return w.getvalue()


def _pca(m: PcaModel):
    w = _Writer()
    f, k = m.basis.shape
    w.u32(f)
    w.u32(k)
    w.reals(m.mean)
    w.reals(m.basis)
    w.reals(m.eigenvalues)
    w.u32(m.spectrum.size)
    w.reals(m.spectrum)
    return w.getvalue()


def _lda(m: LdaModel):
    w = _Writer()
    f, d = m.basis.shape
    c = len(m.classes)
    w.u32(f)
    w.u32(d)
    w.u32(c)
    w.reals(m.mean)
    w.reals(m.basis)
    w.reals(m.eigenvalues)
    w.reals(m.class_means)
    w.ints(m.classes)
    return w.getvalue()


def _svm(m: SvmMulticlassModel):
    w = _Writer()
    first = m.machines[0]
    w.u8(_KERNELS.index(first.kernel.kind))
    w.u32(first.kernel.degree)
    w.f64(first.kernel.coef)
    w.f64(first.kernel.gamma)
    w.f64(first.C)
    w.u32(len(m.classes))
    w.ints(m.classes)
    w.u32(len(m.machines))
    for mach in m.machines:
        n, dim = mach.support_vectors.shape
        w.u32(n)
        w.u32(dim)
        w.reals(mach.support_vectors)
        w.reals(mach.alphas)
        w.reals(mach.sv_labels)
        w.f64(mach.bias)
    return w.getvalue()


def stage_blocks(p: FittedPipeline) -> list[tuple[int, bytes]]:
    blocks = [(0, _meta(p)), (1, _scaling(p.scaling))]
    if p.selected is not None:
        blocks.append((2, _selection(p.selected, p.n_features)))
    if p.pca is not None:
        blocks.append((3, _pca(p.pca)))
    if p.lda is not None:
        blocks.append((4, _lda(p.lda)))
    blocks.append((5, _svm(p.svm)))
    return blocks


def dumps(p: FittedPipeline) -> bytes:
    blocks = stage_blocks(p)
    body = [struct.pack("<H", len(blocks))]
    for sid, payload in blocks:
        body.append(struct.pack("<BI", sid, len(payload)))
        body.append(payload)
    payload = b"".join(body)
    return MAGIC + struct.pack("<H", VERSION) + payload + struct.pack("<I", zlib.crc32(payload))


def _split(data: bytes) -> list[tuple[int, bytes]]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CorruptModelError("not a model file (bad magic bytes)")
    if len(data) < 12:
        raise CorruptModelError("model file truncated")
    (version,) = struct.unpack("<H", data[4:6])
    if version != VERSION:
        raise CorruptModelError(f"unsupported model format version {version}")
    payload, (crc,) = data[6:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise CorruptModelError("checksum mismatch (file truncated or corrupted)")
    r = _Reader(payload, "header")
    count = struct.unpack("<H", r.take(2))[0]
    blocks, last = [], -1
    for _ in range(count):
        sid = r.u8()
        length = r.u32()
        if sid not in STAGES:
            raise CorruptModelError(f"unknown stage id {sid}")
        if sid <= last:
            raise CorruptModelError(f"stage {STAGES[sid]} out of order")
        last = sid
        blocks.append((sid, r.take(length)))
    r.done()
    return blocks


def stage_ids(data: bytes) -> list[int]:
    return [sid for sid, _ in _split(data)]


def loads(data: bytes) -> FittedPipeline:
    blocks = dict(_split(data))
    for required in (0, 1, 5):
        if required not in blocks:
            raise CorruptModelError(f"missing {STAGES[required]} block")

    r = _Reader(blocks[0], "meta")
    config = parse_config(r.text())
    names = r.strings()
    labels = r.strings()
    r.done()

    r = _Reader(blocks[1], "scaling")
    n = r.u32()
    scaling = ColumnScaling(r.reals(n), r.reals(n))
    r.done()

    selected = None
    if 2 in blocks:
        r = _Reader(blocks[2], "selection")
        r.u32()
        selected = r.ints(r.u32())
        r.done()

    pca = None
    if 3 in blocks:
        r = _Reader(blocks[3], "pca")
        f, k = r.u32(), r.u32()
        mean = r.reals(f)
        basis = r.reals(f * k, (f, k))
        eig = r.reals(k)
        spectrum = r.reals(r.u32())
        pca = PcaModel(mean, basis, eig, spectrum)
        r.done()

    lda = None
    if 4 in blocks:
        r = _Reader(blocks[4], "lda")
        f, d, c = r.u32(), r.u32(), r.u32()
        mean = r.reals(f)
        basis = r.reals(f * d, (f, d))
        eig = r.reals(d)
        cm = r.reals(c * d, (c, d))
        classes = tuple(int(v) for v in r.ints(c))
        lda = LdaModel(mean, basis, eig, cm, classes)
        r.done()

    r = _Reader(blocks[5], "svm")
    kind = r.u8()
    if kind >= len(_KERNELS):
        raise CorruptModelError(f"unknown kernel code {kind}")
    degree, coef, gamma, C = r.u32(), r.f64(), r.f64(), r.f64()
    kernel = KernelSpec(_KERNELS[kind], degree, coef, gamma)
    classes = tuple(int(v) for v in r.ints(r.u32()))
    machines = []
    for _ in range(r.u32()):
        n_sv, dim = r.u32(), r.u32()
        sv = r.reals(n_sv * dim, (n_sv, dim))
        alphas = r.reals(n_sv)
        ys = r.reals(n_sv)
        bias = r.f64()
        machines.append(
            SvmBinaryModel(sv, alphas, ys, bias, kernel, C, support_indices=np.arange(n_sv))
        )
    r.done()
    return FittedPipeline(
        config=config,
        feature_names=names,
        label_names=labels,
        scaling=scaling,
        svm=SvmMulticlassModel(tuple(machines), classes),
        selected=selected,
        pca=pca,
        lda=lda,
    )


def save(path, p: FittedPipeline) -> None:
    Path(path).write_bytes(dumps(p))


def load(path) -> FittedPipeline:
    return loads(Path(path).read_bytes())
