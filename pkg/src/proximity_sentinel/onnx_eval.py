"""Minimal ONNX model loader and numpy graph executor.

The classification backend contract is an ONNX file, but this
environment may not have onnxruntime available, so this module can load
and execute the op subset that exported mask models use:

    Transpose, Conv (group 1, dilation 1), Relu, MaxPool, AveragePool
    (count_include_pad), Concat, Reshape, Softmax, MatMul, Gemm

Models are standard ONNX protobuf (IR >= 7); both packed and unpacked
repeated scalar fields are accepted. Anything outside the subset raises
:class:`OnnxFormatError` at load time. When onnxruntime is importable
the backend prefers it and this module is not used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class OnnxFormatError(Exception):
    """Model file is malformed or uses unsupported features."""


# ---------------------------------------------------------------------------
# protobuf wire format


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise OnnxFormatError("truncated varint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxFormatError("varint too long")


def _iter_fields(data: bytes):
    pos = 0
    while pos < len(data):
        key, pos = _read_varint(data, pos)
        fieldnum, wire = key >> 3, key & 7
        if wire == 0:
            value, pos = _read_varint(data, pos)
        elif wire == 1:
            value, pos = data[pos : pos + 8], pos + 8
        elif wire == 2:
            length, pos = _read_varint(data, pos)
            value, pos = data[pos : pos + length], pos + length
            if len(value) != length:
                raise OnnxFormatError("truncated length-delimited field")
        elif wire == 5:
            value, pos = data[pos : pos + 4], pos + 4
        else:
            raise OnnxFormatError(f"unsupported wire type {wire}")
        yield fieldnum, wire, value


def _varints(blob: bytes) -> list[int]:
    out = []
    pos = 0
    while pos < len(blob):
        v, pos = _read_varint(blob, pos)
        out.append(v)
    return out


def _int_field(wire: int, value) -> list[int]:
    # repeated int64: wire 0 = single value, wire 2 = packed
    if wire == 0:
        return [value]
    return _varints(value)


def _signed(v: int) -> int:
    # two's-complement interpretation of a 64-bit varint
    return v - (1 << 64) if v >= (1 << 63) else v


# ---------------------------------------------------------------------------
# ONNX message parsing (field numbers from onnx.proto)

_DTYPES = {1: np.float32, 7: np.int64}


def _parse_tensor(blob: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = None
    raw = None
    float_data: list[float] = []
    int64_data: list[int] = []
    name = ""
    for fieldnum, wire, value in _iter_fields(blob):
        if fieldnum == 1:
            dims.extend(_signed(v) for v in _int_field(wire, value))
        elif fieldnum == 2:
            data_type = value
        elif fieldnum == 4:
            if wire == 5:
                float_data.append(np.frombuffer(value, "<f4")[0])
            else:
                float_data.extend(np.frombuffer(value, "<f4").tolist())
        elif fieldnum == 7:
            int64_data.extend(_signed(v) for v in _int_field(wire, value))
        elif fieldnum == 8:
            name = value.decode("utf-8")
        elif fieldnum == 9:
            raw = value
    if data_type not in _DTYPES:
        raise OnnxFormatError(f"unsupported tensor data type {data_type}")
    dtype = _DTYPES[data_type]
    if raw is not None:
        arr = np.frombuffer(raw, dtype="<f4" if dtype is np.float32 else "<i8")
    elif float_data and dtype is np.float32:
        arr = np.array(float_data, dtype=np.float32)
    elif int64_data and dtype is np.int64:
        arr = np.array(int64_data, dtype=np.int64)
    else:
        arr = np.zeros(0, dtype=dtype)
    return name, arr.reshape(dims).astype(dtype, copy=False)


def _parse_attribute(blob: bytes) -> tuple[str, object]:
    name = ""
    out: object = None
    ints: list[int] = []
    floats: list[float] = []
    for fieldnum, wire, value in _iter_fields(blob):
        if fieldnum == 1:
            name = value.decode("utf-8")
        elif fieldnum == 2:
            out = float(np.frombuffer(value, "<f4")[0])
        elif fieldnum == 3:
            out = _signed(value)
        elif fieldnum == 4:
            out = value.decode("utf-8")
        elif fieldnum == 5:
            out = _parse_tensor(value)[1]
        elif fieldnum == 7:
            if wire == 5:
                floats.append(float(np.frombuffer(value, "<f4")[0]))
            else:
                floats.extend(np.frombuffer(value, "<f4").tolist())
        elif fieldnum == 8:
            ints.extend(_signed(v) for v in _int_field(wire, value))
    if ints:
        out = ints
    elif floats:
        out = floats
    return name, out


@dataclass
class _Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict


def _parse_node(blob: bytes) -> _Node:
    inputs: list[str] = []
    outputs: list[str] = []
    op_type = ""
    attrs: dict = {}
    for fieldnum, _wire, value in _iter_fields(blob):
        if fieldnum == 1:
            inputs.append(value.decode("utf-8"))
        elif fieldnum == 2:
            outputs.append(value.decode("utf-8"))
        elif fieldnum == 4:
            op_type = value.decode("utf-8")
        elif fieldnum == 5:
            k, v = _parse_attribute(value)
            attrs[k] = v
    return _Node(op_type=op_type, inputs=inputs, outputs=outputs, attrs=attrs)


def _parse_value_info(blob: bytes) -> tuple[str, list[int | None]]:
    name = ""
    shape: list[int | None] = []
    for fieldnum, _wire, value in _iter_fields(blob):
        if fieldnum == 1:
            name = value.decode("utf-8")
        elif fieldnum == 2:  # TypeProto
            for f2, _w2, v2 in _iter_fields(value):
                if f2 != 1:  # tensor_type
                    continue
                for f3, _w3, v3 in _iter_fields(v2):
                    if f3 != 2:  # shape
                        continue
                    for f4, _w4, v4 in _iter_fields(v3):
                        if f4 != 1:  # dim
                            continue
                        dim_value: int | None = None
                        for f5, _w5, v5 in _iter_fields(v4):
                            if f5 == 1:
                                dim_value = _signed(v5)
                        shape.append(dim_value)
    return name, shape


_SUPPORTED_OPS = {
    "Transpose",
    "Conv",
    "Relu",
    "MaxPool",
    "AveragePool",
    "Concat",
    "Reshape",
    "Softmax",
    "MatMul",
    "Gemm",
}


@dataclass
class LoadedGraph:
    nodes: list[_Node]
    initializers: dict[str, np.ndarray]
    input_names: list[str]
    input_shapes: dict[str, list[int | None]]
    output_names: list[str]

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        values: dict[str, np.ndarray] = dict(self.initializers)
        for name in self.input_names:
            if name not in feeds:
                raise OnnxFormatError(f"missing graph input {name!r}")
            values[name] = np.asarray(feeds[name], dtype=np.float32)
        for node in self.nodes:
            args = [values[n] for n in node.inputs if n]
            results = _OPS[node.op_type](node, args)
            for out_name, result in zip(node.outputs, results):
                values[out_name] = result
        return {name: values[name] for name in self.output_names}


def load_model(path) -> LoadedGraph:
    with open(path, "rb") as fh:
        data = fh.read()
    graph_blob = None
    for fieldnum, _wire, value in _iter_fields(data):
        if fieldnum == 7:
            graph_blob = value
    if graph_blob is None:
        raise OnnxFormatError("model has no graph")

    nodes: list[_Node] = []
    initializers: dict[str, np.ndarray] = {}
    inputs: list[tuple[str, list[int | None]]] = []
    outputs: list[str] = []
    for fieldnum, _wire, value in _iter_fields(graph_blob):
        if fieldnum == 1:
            nodes.append(_parse_node(value))
        elif fieldnum == 5:
            name, arr = _parse_tensor(value)
            initializers[name] = arr
        elif fieldnum == 11:
            inputs.append(_parse_value_info(value))
        elif fieldnum == 12:
            outputs.append(_parse_value_info(value)[0])

    unsupported = {n.op_type for n in nodes} - _SUPPORTED_OPS
    if unsupported:
        raise OnnxFormatError(f"unsupported ops: {sorted(unsupported)}")
    input_names = [name for name, _ in inputs if name not in initializers]
    return LoadedGraph(
        nodes=nodes,
        initializers=initializers,
        input_names=input_names,
        input_shapes={name: shape for name, shape in inputs},
        output_names=outputs,
    )


# ---------------------------------------------------------------------------
# op kernels (NCHW, float32)


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    sn, sc, srow, scol = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, oh, ow, kh, kw),
        strides=(sn, sc, srow * sh, scol * sw, srow, scol),
        writeable=False,
    )


def _pool_attrs(node: _Node) -> tuple[list[int], list[int], list[int]]:
    kernel = node.attrs["kernel_shape"]
    strides = node.attrs.get("strides", [1] * len(kernel))
    pads = node.attrs.get("pads", [0] * 2 * len(kernel))
    return list(kernel), list(strides), list(pads)


def _op_conv(node: _Node, args) -> tuple[np.ndarray]:
    x, w = args[0], args[1]
    b = args[2] if len(args) > 2 else None
    if node.attrs.get("group", 1) != 1:
        raise OnnxFormatError("grouped Conv not supported")
    if any(d != 1 for d in node.attrs.get("dilations", [1, 1])):
        raise OnnxFormatError("dilated Conv not supported")
    kh, kw = w.shape[2], w.shape[3]
    strides = node.attrs.get("strides", [1, 1])
    pads = node.attrs.get("pads", [0, 0, 0, 0])
    pt, pl, pb, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = _windows(xp, kh, kw, strides[0], strides[1])
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(w.shape[0], -1).T
    out = out.reshape(n, oh, ow, w.shape[0]).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b[None, :, None, None]
    return (np.ascontiguousarray(out, dtype=np.float32),)


def _op_maxpool(node: _Node, args) -> tuple[np.ndarray]:
    (x,) = args
    kernel, strides, pads = _pool_attrs(node)
    pt, pl, pb, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=-np.inf)
    win = _windows(xp, kernel[0], kernel[1], strides[0], strides[1])
    return (win.max(axis=(4, 5)).astype(np.float32),)


def _op_averagepool(node: _Node, args) -> tuple[np.ndarray]:
    (x,) = args
    kernel, strides, pads = _pool_attrs(node)
    if any(pads) and not node.attrs.get("count_include_pad", 0):
        raise OnnxFormatError("AveragePool with excluded padding not supported")
    pt, pl, pb, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = _windows(xp, kernel[0], kernel[1], strides[0], strides[1])
    return (win.mean(axis=(4, 5), dtype=np.float32),)


def _op_relu(_node: _Node, args) -> tuple[np.ndarray]:
    return (np.maximum(args[0], 0),)


def _op_transpose(node: _Node, args) -> tuple[np.ndarray]:
    return (np.transpose(args[0], node.attrs["perm"]),)


def _op_concat(node: _Node, args) -> tuple[np.ndarray]:
    return (np.concatenate(args, axis=node.attrs["axis"]),)


def _op_reshape(_node: _Node, args) -> tuple[np.ndarray]:
    x, shape = args
    dims = []
    for i, d in enumerate(shape.tolist()):
        dims.append(x.shape[i] if d == 0 else int(d))
    return (x.reshape(dims),)


def _op_softmax(node: _Node, args) -> tuple[np.ndarray]:
    (x,) = args
    axis = node.attrs.get("axis", -1)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return ((e / e.sum(axis=axis, keepdims=True)).astype(np.float32),)


def _op_matmul(_node: _Node, args) -> tuple[np.ndarray]:
    return (np.matmul(args[0], args[1]).astype(np.float32),)


def _op_gemm(node: _Node, args) -> tuple[np.ndarray]:
    a, b = args[0], args[1]
    c = args[2] if len(args) > 2 else None
    if node.attrs.get("transA", 0):
        a = a.T
    if node.attrs.get("transB", 0):
        b = b.T
    out = node.attrs.get("alpha", 1.0) * (a @ b)
    if c is not None:
        out = out + node.attrs.get("beta", 1.0) * c
    return (out.astype(np.float32),)


_OPS = {
    "Conv": _op_conv,
    "MaxPool": _op_maxpool,
    "AveragePool": _op_averagepool,
    "Relu": _op_relu,
    "Transpose": _op_transpose,
    "Concat": _op_concat,
    "Reshape": _op_reshape,
    "Softmax": _op_softmax,
    "MatMul": _op_matmul,
    "Gemm": _op_gemm,
}
