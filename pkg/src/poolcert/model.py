"""Network representation, on-disk model/input formats, and affine materialization.

A network is an ordered list of layers of five kinds: affine, conv2d, flatten,
activation (relu / adaptive_relu / sigmoid / tanh / arctan) and maxpool.
Normalization (batchnorm) may appear in model files but is folded into the
preceding affine/conv layer at load time, so it never exists in memory.

Spatial tensors use (height, width, channels) layout; flat indices are the
C-order flattening of that layout. Weights in the optional binary sidecar are
raw little-endian float64 in row-major order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATION_KINDS = ("relu", "adaptive_relu", "sigmoid", "tanh", "arctan")
LAYER_KINDS = ("affine", "conv2d", "flatten", "maxpool") + ACTIVATION_KINDS

# parameter-count threshold above which save_model spills weights to a sidecar
INLINE_WEIGHT_LIMIT = 100_000


class ModelFormatError(ValueError):
    """Raised when a model or input file fails to parse or validate."""


class ShapeError(ModelFormatError):
    """Shape chain broken between consecutive layers; carries the layer index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"layer {index}: {message}")
        self.index = index


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    a, b = v
    return (int(a), int(b))


@dataclass(frozen=True)
class Layer:
    """One network layer. Payload fields are populated per kind.

    affine:  weight (out, in), bias (out,)
    conv2d:  filters (out_ch, in_ch, kh, kw), bias (out_ch,), stride, padding
    maxpool: window (ph, pw), stride
    flatten: shapes only
    activations: no payload except adaptive_relu's lower slope
    """

    kind: str
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    filters: np.ndarray | None = None
    stride: tuple[int, int] | None = None
    padding: tuple[int, int] | None = None
    window: tuple[int, int] | None = None
    slope: float | None = None

    @property
    def size_in(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def size_out(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def is_activation(self) -> bool:
        return self.kind in ACTIVATION_KINDS

    @property
    def is_linear(self) -> bool:
        return self.kind in ("affine", "conv2d", "flatten")

    @staticmethod
    def affine(weight, bias, input_shape=None) -> "Layer":
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ModelFormatError("affine layer needs (out, in) weights and (out,) bias")
        in_shape = tuple(input_shape) if input_shape else (weight.shape[1],)
        if int(np.prod(in_shape)) != weight.shape[1]:
            raise ModelFormatError(f"affine weights have {weight.shape[1]} columns "
                                   f"but the input shape holds {int(np.prod(in_shape))}")
        return Layer("affine", in_shape, (weight.shape[0],), weight=weight, bias=bias)

    @staticmethod
    def conv2d(filters, bias, stride, padding, input_shape) -> "Layer":
        filters = np.asarray(filters, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if filters.ndim != 4:
            raise ModelFormatError("conv2d filters must be (out_ch, in_ch, kh, kw)")
        h, w, c = input_shape
        oc, ic, kh, kw = filters.shape
        if ic != c:
            raise ModelFormatError(f"conv2d expects {c} input channels, filters have {ic}")
        sh, sw = _pair(stride)
        ph, pw = _pair(padding)
        oh = (h + 2 * ph - kh) // sh + 1
        ow = (w + 2 * pw - kw) // sw + 1
        if oh < 1 or ow < 1:
            raise ModelFormatError("conv2d window does not fit the padded input")
        return Layer("conv2d", (h, w, c), (oh, ow, oc), filters=filters, bias=bias,
                     stride=(sh, sw), padding=(ph, pw))

    @staticmethod
    def maxpool(window, stride, input_shape) -> "Layer":
        h, w, c = input_shape
        ph, pw = _pair(window)
        sh, sw = _pair(stride)
        oh = (h - ph) // sh + 1
        ow = (w - pw) // sw + 1
        if oh < 1 or ow < 1:
            raise ModelFormatError("maxpool window does not fit the input")
        return Layer("maxpool", (h, w, c), (oh, ow, c), window=(ph, pw), stride=(sh, sw))

    @staticmethod
    def flatten(input_shape) -> "Layer":
        n = int(np.prod(input_shape))
        return Layer("flatten", tuple(input_shape), (n,))

    @staticmethod
    def activation(kind, input_shape, slope=None) -> "Layer":
        if kind not in ACTIVATION_KINDS:
            raise ModelFormatError(f"unknown activation kind {kind!r}")
        if kind == "adaptive_relu":
            if slope is None or not (0.0 <= slope <= 1.0):
                raise ModelFormatError("adaptive_relu needs a lower slope in [0, 1]")
        return Layer(kind, tuple(input_shape), tuple(input_shape), slope=slope)


@dataclass(frozen=True)
class Network:
    """Immutable ordered stack of layers ending in the logit layer."""

    layers: tuple[Layer, ...]
    input_shape: tuple[int, ...]
    num_classes: int
    name: str = "net"

    def __post_init__(self):
        if not self.layers:
            raise ModelFormatError("network must contain at least one layer")
        if self.layers[-1].kind != "affine":
            raise ModelFormatError("last layer must be affine (logit layer)")
        prev = tuple(self.input_shape)
        for k, layer in enumerate(self.layers):
            if layer.kind in ("conv2d", "maxpool"):
                # spatial layers must see the exact declared spatial shape
                if tuple(layer.input_shape) != prev and layer.size_in != int(np.prod(prev)):
                    raise ShapeError(k, f"expects input {layer.input_shape}, got {prev}")
            if layer.size_in != int(np.prod(prev)):
                raise ShapeError(k, f"expects {layer.size_in} inputs, got {int(np.prod(prev))}")
            prev = tuple(layer.output_shape)
        if int(np.prod(prev)) != self.num_classes:
            raise ShapeError(len(self.layers) - 1,
                             f"final layer emits {int(np.prod(prev))} values, "
                             f"num_classes is {self.num_classes}")

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class VerificationQuery:
    """One robustness query: a center point, its label, a norm, optional radius."""

    x0: np.ndarray
    label: int
    norm: float = math.inf
    eps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=np.float64).ravel())
        if self.norm not in (1.0, 2.0, math.inf):
            raise ModelFormatError(f"norm must be 1, 2 or inf, got {self.norm}")
        if self.eps is not None and self.eps < 0:
            raise ModelFormatError("eps must be nonnegative")
        if self.label < 0:
            raise ModelFormatError("label must be a class index")


def materialize_affine(layer: Layer) -> tuple[np.ndarray, np.ndarray]:
    """Dense (W, b) equivalent to an affine, conv2d or flatten layer.

    Row i holds exactly the fan-in weights of output neuron i; conv rows are
    the filter unrolled over the padded input, flatten is the identity.
    """
    if layer.kind == "affine":
        return layer.weight, layer.bias
    if layer.kind == "flatten":
        n = layer.size_in
        return np.eye(n), np.zeros(n)
    if layer.kind != "conv2d":
        raise ValueError(f"cannot materialize layer kind {layer.kind!r}")

    h, w, c = layer.input_shape
    oh, ow, oc = layer.output_shape
    kh, kw = layer.filters.shape[2], layer.filters.shape[3]
    sh, sw = layer.stride
    ph, pw = layer.padding
    W = np.zeros((oh * ow * oc, h * w * c))
    b = np.zeros(oh * ow * oc)
    in_idx = np.arange(h * w * c).reshape(h, w, c)
    for oy in range(oh):
        for ox in range(ow):
            for f in range(oc):
                row = (oy * ow + ox) * oc + f
                b[row] = layer.bias[f]
                for ky in range(kh):
                    iy = oy * sh - ph + ky
                    if iy < 0 or iy >= h:
                        continue  # zero padding contributes nothing
                    for kx in range(kw):
                        ix = ox * sw - pw + kx
                        if ix < 0 or ix >= w:
                            continue
                        for ic in range(c):
                            W[row, in_idx[iy, ix, ic]] = layer.filters[f, ic, ky, kx]
    return W, b


def pool_index_sets(layer: Layer) -> list[np.ndarray]:
    """Flat input indices pooled by each maxpool output, in output order.

    Windows never cross the input boundary (valid pooling only), so every set
    has cardinality ph*pw.
    """
    if layer.kind != "maxpool":
        raise ValueError("pool_index_sets needs a maxpool layer")
    h, w, c = layer.input_shape
    oh, ow, _ = layer.output_shape
    ph, pw = layer.window
    sh, sw = layer.stride
    in_idx = np.arange(h * w * c).reshape(h, w, c)
    sets = []
    for oy in range(oh):
        for ox in range(ow):
            for ch in range(c):
                block = in_idx[oy * sh:oy * sh + ph, ox * sw:ox * sw + pw, ch]
                sets.append(block.ravel().copy())
    return sets


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _resolve_weights(value, blob: bytes | None, path: Path, shape=None) -> np.ndarray:
    """Inline JSON array or "@blob:offset:len" sidecar reference (len = count of f64)."""
    if isinstance(value, str):
        if not value.startswith("@blob:"):
            raise ModelFormatError(f"bad weight reference {value!r}")
        if blob is None:
            raise ModelFormatError(f"{path.name} references a sidecar but {path.stem}.bin is missing")
        _, off, count = value.split(":")
        off, count = int(off), int(count)
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(np.float64)
    else:
        arr = np.asarray(value, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def _fold_batchnorm(layer: Layer, scale: np.ndarray, shift: np.ndarray) -> Layer:
    """Fold per-channel scale/shift into the preceding affine or conv layer."""
    if layer.kind == "affine":
        if scale.size not in (1, layer.size_out):
            raise ModelFormatError("batchnorm scale length does not match preceding layer")
        s = np.broadcast_to(scale, (layer.size_out,))
        t = np.broadcast_to(shift, (layer.size_out,))
        return Layer.affine(layer.weight * s[:, None], layer.bias * s + t, layer.input_shape)
    if layer.kind == "conv2d":
        oc = layer.output_shape[2]
        if scale.size not in (1, oc):
            raise ModelFormatError("batchnorm scale length does not match conv channels")
        s = np.broadcast_to(scale, (oc,))
        t = np.broadcast_to(shift, (oc,))
        return Layer.conv2d(layer.filters * s[:, None, None, None], layer.bias * s + t,
                            layer.stride, layer.padding, layer.input_shape)
    raise ModelFormatError("batchnorm must follow an affine or conv2d layer")


def load_model(path) -> Network:
    """Parse a model manifest (plus optional .bin sidecar) into a Network."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc

    blob_path = path.with_suffix(".bin")
    blob = blob_path.read_bytes() if blob_path.exists() else None

    try:
        input_shape = tuple(int(v) for v in manifest["input_shape"])
        num_classes = int(manifest["num_classes"])
        raw_layers = manifest["layers"]
        name = manifest.get("name", path.stem)
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"model manifest missing field: {exc}") from exc

    layers: list[Layer] = []
    shape = input_shape
    for k, spec in enumerate(raw_layers):
        kind = spec.get("kind")
        try:
            if kind == "affine":
                out = spec.get("out_features")
                W = _resolve_weights(spec["weights"], blob, path,
                                     (out, int(np.prod(shape))) if out else None)
                if W.ndim == 1:
                    raise ModelFormatError("affine weights need an out_features hint or nesting")
                bias = _resolve_weights(spec["bias"], blob, path, (W.shape[0],))
                layer = Layer.affine(W, bias, shape)
            elif kind == "conv2d":
                if len(shape) != 3:
                    raise ModelFormatError(f"conv2d needs a (h, w, c) input, got {shape}")
                kshape = spec.get("filter_shape")
                F = _resolve_weights(spec["filters"], blob, path, kshape)
                if F.ndim != 4:
                    raise ModelFormatError("conv2d filters need filter_shape or full nesting")
                bias = _resolve_weights(spec["bias"], blob, path, (F.shape[0],))
                layer = Layer.conv2d(F, bias, spec.get("stride", 1),
                                     spec.get("padding", 0), shape)
            elif kind == "maxpool":
                # flat vectors pool as a single column
                pool_shape = spec.get("input_shape", shape if len(shape) == 3
                                      else (int(np.prod(shape)), 1, 1))
                if int(np.prod(pool_shape)) != int(np.prod(shape)):
                    raise ModelFormatError(f"maxpool input_shape {pool_shape} does not "
                                           f"match predecessor size {int(np.prod(shape))}")
                layer = Layer.maxpool(spec["window"], spec.get("stride", spec["window"]),
                                      tuple(pool_shape))
            elif kind == "flatten":
                layer = Layer.flatten(shape)
            elif kind in ACTIVATION_KINDS:
                layer = Layer.activation(kind, shape, spec.get("slope"))
            elif kind == "batchnorm":
                if not layers or layers[-1].kind not in ("affine", "conv2d"):
                    raise ModelFormatError("batchnorm must follow an affine or conv2d layer")
                scale = _resolve_weights(spec["scale"], blob, path)
                shift = _resolve_weights(spec["shift"], blob, path)
                layers[-1] = _fold_batchnorm(layers[-1], scale, shift)
                continue
            else:
                raise ModelFormatError(f"unsupported layer kind {kind!r}")
        except ShapeError:
            raise
        except ModelFormatError as exc:
            raise ShapeError(k, str(exc)) from exc
        except KeyError as exc:
            raise ShapeError(k, f"missing field {exc}") from exc

        if layer.size_in != int(np.prod(shape)):
            raise ShapeError(k, f"expects {layer.size_in} inputs, predecessor emits "
                                f"{int(np.prod(shape))}")
        layers.append(layer)
        shape = layer.output_shape

    return Network(tuple(layers), input_shape, num_classes, name)


def save_model(net: Network, path) -> None:
    """Write a Network back to the manifest format (inline or sidecar weights)."""
    path = Path(path)
    total_params = sum(int(l.weight.size + l.bias.size) if l.kind == "affine"
                       else int(l.filters.size + l.bias.size) if l.kind == "conv2d"
                       else 0 for l in net.layers)
    use_blob = total_params > INLINE_WEIGHT_LIMIT
    blob = bytearray()

    def encode(arr: np.ndarray):
        if not use_blob:
            return arr.tolist()
        off = len(blob)
        blob.extend(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return f"@blob:{off}:{arr.size}"

    out_layers = []
    for layer in net.layers:
        if layer.kind == "affine":
            out_layers.append({"kind": "affine", "out_features": layer.size_out,
                               "weights": encode(layer.weight), "bias": encode(layer.bias)})
        elif layer.kind == "conv2d":
            out_layers.append({"kind": "conv2d", "filter_shape": list(layer.filters.shape),
                               "filters": encode(layer.filters), "bias": encode(layer.bias),
                               "stride": list(layer.stride), "padding": list(layer.padding)})
        elif layer.kind == "maxpool":
            out_layers.append({"kind": "maxpool", "window": list(layer.window),
                               "stride": list(layer.stride)})
        elif layer.kind == "flatten":
            out_layers.append({"kind": "flatten"})
        elif layer.kind == "adaptive_relu":
            out_layers.append({"kind": "adaptive_relu", "slope": layer.slope})
        else:
            out_layers.append({"kind": layer.kind})

    manifest = {"name": net.name, "input_shape": list(net.input_shape),
                "num_classes": net.num_classes, "layers": out_layers}
    path.write_text(json.dumps(manifest, indent=2))
    if use_blob:
        path.with_suffix(".bin").write_bytes(bytes(blob))


def load_queries(path, norm: float = math.inf, eps: float | None = None) -> list[VerificationQuery]:
    """Read queries from JSON ({x0, label} or a list of those) or CSV rows.

    CSV rows hold the input vector with the label as trailing column.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read input file {path}: {exc}") from exc

    if path.suffix.lower() == ".csv":
        queries = []
        for line in text.strip().splitlines():
            if not line.strip():
                continue
            values = [float(v) for v in line.split(",")]
            queries.append(VerificationQuery(np.array(values[:-1]), int(values[-1]), norm, eps))
        return queries

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"cannot parse input file {path}: {exc}") from exc
    if isinstance(data, dict):
        data = [data]
    return [VerificationQuery(np.asarray(d["x0"], dtype=np.float64), int(d["label"]), norm, eps)
            for d in data]
