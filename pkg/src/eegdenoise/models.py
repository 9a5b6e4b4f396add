"""Declarative sequential networks: the Novel CNN and a plain FCNN baseline.

A :class:`ModelGraph` is a validated chain of :class:`LayerSpec` entries.
Building a graph only checks that shapes compose; parameters are allocated
by :func:`init_params` (or by loading a checkpoint), so the full-size
network can be inspected without materialising its 34M weights.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import layers
from .exceptions import ShapeError

NOVEL_CNN_WIDTHS = (32, 64, 128, 256, 512, 1024, 2048)
N_POOLED_BLOCKS = 6

PARAM_KINDS = ("conv1d", "dense")
LAYER_KINDS = ("conv1d", "relu", "avgpool2", "flatten", "dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int | None = None
    kernel: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in PARAM_KINDS and (self.units is None or self.units < 1):
            raise ValueError(f"{self.kind} layer needs a positive unit count")

    def to_dict(self):
        return {"kind": self.kind, "units": self.units, "kernel": self.kernel, "name": self.name}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], units=d.get("units"), kernel=d.get("kernel"), name=d.get("name", ""))


def _infer_shapes(specs, input_shape):
    """Output shape of every layer; raises ShapeError on the first mismatch."""
    shapes = []
    shape = tuple(input_shape)
    for spec in specs:
        if spec.kind == "conv1d":
            if len(shape) != 2:
                raise ShapeError(f"{spec.name}: conv1d needs a (C, T) input, got {shape}")
            if spec.kernel != layers.KERNEL_SIZE:
                raise ShapeError(f"{spec.name}: only kernel size {layers.KERNEL_SIZE} is supported")
            shape = (spec.units, shape[1])
        elif spec.kind == "relu":
            pass
        elif spec.kind == "avgpool2":
            if len(shape) != 2 or shape[1] % 2:
                raise ShapeError(f"{spec.name}: average pooling needs an even length, got {shape}")
            shape = (shape[0], shape[1] // 2)
        elif spec.kind == "flatten":
            if len(shape) != 2:
                raise ShapeError(f"{spec.name}: flatten needs a (C, T) input, got {shape}")
            shape = (shape[0] * shape[1],)
        elif spec.kind == "dense":
            if len(shape) != 1:
                raise ShapeError(f"{spec.name}: dense needs a flat input, got {shape}")
            shape = (spec.units,)
        shapes.append(shape)
    return shapes


@dataclass
class ModelGraph:
    """Sequential network: layer specs, their shapes, and (once set) parameters.

    ``params`` holds one ``{"weight", "bias"}`` dict per parametrised layer,
    in layer order, or ``None`` before initialisation.
    """

    specs: list
    input_shape: tuple
    widths: tuple = ()
    params: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.specs = list(self.specs)
        self.input_shape = tuple(self.input_shape)
        self.shapes = _infer_shapes(self.specs, self.input_shape)

    # -- structure -------------------------------------------------------
    @property
    def input_len(self):
        return self.input_shape[-1]

    @property
    def output_shape(self):
        return self.shapes[-1] if self.shapes else self.input_shape

    def param_layers(self):
        return [i for i, s in enumerate(self.specs) if s.kind in PARAM_KINDS]

    def param_shapes(self):
        """``[(name, weight_shape, bias_shape), ...]`` from shapes alone."""
        out = []
        prev = [self.input_shape] + self.shapes
        for i in self.param_layers():
            spec, in_shape = self.specs[i], prev[i]
            if spec.kind == "conv1d":
                w = (spec.units, in_shape[0], spec.kernel)
            else:
                w = (spec.units, in_shape[0])
            out.append((spec.name, w, (spec.units,)))
        return out

    def n_params(self):
        return sum(int(np.prod(w)) + int(np.prod(b)) for _, w, b in self.param_shapes())

    def block_lengths(self):
        """Time length entering each conv block (input, then after every pool)."""
        lengths = [self.input_len]
        for spec, shape in zip(self.specs, self.shapes):
            if spec.kind == "avgpool2":
                lengths.append(shape[1])
        return lengths

    def flatten_size(self):
        for spec, shape in zip(self.specs, self.shapes):
            if spec.kind == "flatten":
                return shape[0]
        return None

    def named_params(self):
        """Yields ``(qualified_name, array)`` in declaration order."""
        self._require_params()
        for (name, _, _), p in zip(self.param_shapes(), self.params):
            yield f"{name}.weight", p["weight"]
            yield f"{name}.bias", p["bias"]

    def _require_params(self):
        if self.params is None:
            raise RuntimeError("model parameters are not initialised; call init_params first")

    # -- passes ----------------------------------------------------------
    def forward(self, x, tape=None):
        """Runs the network on one input ``input_shape`` or a batch of them."""
        self._require_params()
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == len(self.input_shape) + 1
        if x.shape[batched:] != self.input_shape:
            raise ShapeError(f"model expects input shape {self.input_shape}, got {x.shape}")
        h = x if batched else x[np.newaxis]
        pi = 0
        for spec in self.specs:
            if spec.kind == "conv1d":
                h = layers.conv1d_forward(h, self.params[pi], tape)
                pi += 1
            elif spec.kind == "dense":
                h = layers.dense_forward(h, self.params[pi], tape)
                pi += 1
            elif spec.kind == "relu":
                h = layers.relu_forward(h, tape)
            elif spec.kind == "avgpool2":
                h = layers.avgpool1d_forward(h, tape)
            elif spec.kind == "flatten":
                h = layers.flatten_forward(h, tape)
        return h if batched else h[0]

    def backward(self, grad_out, tape):
        """Backpropagates through the tape of the last forward.

        Returns ``(grad_input, grads)`` where ``grads`` mirrors ``params``.
        """
        self._require_params()
        g = np.asarray(grad_out, dtype=np.float64)
        batched = g.ndim == len(self.output_shape) + 1
        if not batched:
            g = g[np.newaxis]
        grads = [None] * len(self.params)
        pi = len(self.params)
        for spec in reversed(self.specs):
            if spec.kind == "conv1d":
                pi -= 1
                g, gw, gb = layers.conv1d_backward(g, tape, self.params[pi])
                grads[pi] = {"weight": gw, "bias": gb}
            elif spec.kind == "dense":
                pi -= 1
                g, gw, gb = layers.dense_backward(g, tape, self.params[pi])
                grads[pi] = {"weight": gw, "bias": gb}
            elif spec.kind == "relu":
                g = layers.relu_backward(g, tape)
            elif spec.kind == "avgpool2":
                g = layers.avgpool1d_backward(g, tape)
            elif spec.kind == "flatten":
                g = layers.flatten_backward(g, tape)
        return (g if batched else g[0]), grads

    def predict_normalized(self, x_hat, batch_size=256):
        """Forward on a stack of 1-D inputs without recording a tape."""
        x_hat = np.asarray(x_hat, dtype=np.float64)
        if x_hat.ndim == 1:
            return self.predict_normalized(x_hat[np.newaxis], batch_size)[0]
        out = np.empty((x_hat.shape[0],) + self.output_shape)
        for start in range(0, x_hat.shape[0], batch_size):
            chunk = x_hat[start:start + batch_size]
            out[start:start + batch_size] = self.forward(chunk.reshape((-1,) + self.input_shape))
        return out

    def copy(self):
        params = None
        if self.params is not None:
            params = [{k: v.copy() for k, v in p.items()} for p in self.params]
        return ModelGraph(self.specs, self.input_shape, self.widths, params, dict(self.meta))


def _check_scale(width_scale):
    scale = Fraction(width_scale).limit_denominator(1 << 20)
    if scale <= 0:
        raise ValueError("width_scale must be positive")
    widths = []
    for w in NOVEL_CNN_WIDTHS:
        scaled = w * scale
        if scaled < 1 or scaled.denominator != 1:
            raise ValueError(f"width_scale {width_scale} does not give an integer width for {w}")
        widths.append(int(scaled))
    return tuple(widths)


def build_novel_cnn(input_len=1024, width_scale=1):
    """Seven conv blocks with widths 32..2048 (times ``width_scale``) and a dense head.

    Blocks 1-6 are conv-relu-conv-relu-avgpool2; block 7 replaces the pool by
    a flatten. The linear dense head maps back to ``input_len`` samples.
    """
    if input_len % (2 ** N_POOLED_BLOCKS):
        raise ShapeError(f"input length {input_len} is not divisible by {2 ** N_POOLED_BLOCKS}")
    widths = _check_scale(width_scale)
    specs = []
    for b, w in enumerate(widths, start=1):
        specs += [
            LayerSpec("conv1d", w, layers.KERNEL_SIZE, f"block{b}.conv1"),
            LayerSpec("relu", name=f"block{b}.relu1"),
            LayerSpec("conv1d", w, layers.KERNEL_SIZE, f"block{b}.conv2"),
            LayerSpec("relu", name=f"block{b}.relu2"),
        ]
        if b <= N_POOLED_BLOCKS:
            specs.append(LayerSpec("avgpool2", name=f"block{b}.pool"))
        else:
            specs.append(LayerSpec("flatten", name=f"block{b}.flatten"))
    specs.append(LayerSpec("dense", input_len, name="head"))
    return ModelGraph(specs, (1, input_len), widths,
                      meta={"arch": "novel_cnn", "width_scale": str(Fraction(width_scale).limit_denominator(1 << 20))})


def build_fcnn_baseline(input_len=1024, hidden_layers=0, hidden_width=1024):
    """Stack of dense+ReLU layers ending in a linear dense(input_len).

    A generic stand-in for harness comparisons, not any published baseline.
    """
    if input_len < 1 or hidden_layers < 0 or (hidden_layers and hidden_width < 1):
        raise ValueError("FCNN dimensions must be positive")
    specs = []
    for h in range(1, hidden_layers + 1):
        specs += [LayerSpec("dense", hidden_width, name=f"hidden{h}"),
                  LayerSpec("relu", name=f"hidden{h}.relu")]
    specs.append(LayerSpec("dense", input_len, name="head"))
    return ModelGraph(specs, (input_len,), (hidden_width,) * hidden_layers,
                      meta={"arch": "fcnn", "hidden_layers": hidden_layers, "hidden_width": hidden_width})


def init_params(model, seed):
    """Fan-in scaled uniform weights ``U(-b, b)``, ``b = sqrt(6 / fan_in)``; zero biases.

    Draws happen in layer order from one generator, so the result depends
    only on the architecture and ``seed``. Returns ``model`` for chaining.
    """
    rng = np.random.default_rng(seed)
    params = []
    for _, w_shape, b_shape in model.param_shapes():
        fan_in = int(np.prod(w_shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        params.append({"weight": rng.uniform(-bound, bound, size=w_shape),
                       "bias": np.zeros(b_shape)})
    model.params = params
    model.meta["init"] = "uniform_fan_in_sqrt6"
    model.meta["init_seed"] = int(seed)
    return model
