"""Symbolic layered architectures: shape tracing, tail surgery and accounting.

Layers form a chain; skip edges add extra inputs. An edge ``(src, dst, merge)``
combines the output of layer ``dst`` with the output of layer ``src``::

    out[dst] = merge(f_dst(out[dst - 1]), out[src])

Convolution and pooling use same-padding, so a layer with stride ``s`` maps
``(H, W, C)`` to ``(ceil(H / s), ceil(W / s), C')``. Search-generated layers always
use stride 1; hand-authored base layers keep their canonical strides.

Tail surgery (:func:`apply_configuration`) counts tunable units from the right:
unit 1 is the classifier head (trailing dense/dropout layers plus the output
layer), units 2..k are the last k-1 convolution/pooling layers, which are
replaced in place so skip connectivity is untouched. Shape mismatches created
by the surgery are repaired with 1x1 convolutions (depth) and nearest-neighbour
upsampling (spatial).
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import search_space as ss

SPATIAL_KINDS = ("conv", "maxpool", "avgpool")
HEAD_KINDS = ("dense", "dropout")
KINDS = ("conv", "maxpool", "avgpool", "dense", "dropout", "flatten", "global_avgpool",
         "upsample", "output")
MERGES = ("add", "concat")

Shape = tuple


class ArchitectureError(ValueError):
    """Malformed architecture or a surgery request that cannot be honoured."""


class IrreparableMismatch(ArchitectureError):
    def __init__(self, mismatch: "Mismatch"):
        super().__init__(f"irreparable mismatch at layer {mismatch.position}: {mismatch.message}")
        self.mismatch = mismatch


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    hp: Mapping[str, Any] = field(default_factory=dict)
    frozen: bool = False
    role: str = "base"  # base | generated | adapter

    def __getitem__(self, key: str) -> Any:
        return self.hp[key]

    def describe(self) -> str:
        hp = self.hp
        if self.kind == "conv":
            return f"conv {hp['filter_size']}x{hp['filter_size']}/{hp.get('stride', 1)}, {hp['n_filters']}"
        if self.kind in ("maxpool", "avgpool"):
            return f"{self.kind} {hp['window']}x{hp['window']}/{hp.get('stride', 1)}"
        if self.kind in ("dense", "output"):
            return f"{self.kind} {hp['n_neurons']}"
        if self.kind == "dropout":
            return f"dropout {hp['rate']}"
        if self.kind == "upsample":
            return f"upsample x{hp['factor']}"
        return self.kind


@dataclass(frozen=True)
class SkipEdge:
    src: int
    dst: int
    merge: str
    expect_channels: int | None = None
    adapters: tuple[int, ...] = ()  # upsample factors applied to the skip operand


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_shape: tuple[int, int, int]
    class_count: int
    layers: tuple[LayerSpec, ...]
    skip_edges: tuple[SkipEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "skip_edges", tuple(self.skip_edges))

    def __len__(self) -> int:
        return len(self.layers)


# ---------------------------------------------------------------------------
# constructors and IO


def conv(filter_size: int, n_filters: int, stride: int = 1, **kw) -> LayerSpec:
    return LayerSpec("conv", {"filter_size": filter_size, "stride": stride,
                              "n_filters": n_filters}, **kw)


def pool(kind: str, window: int, stride: int = 1, **kw) -> LayerSpec:
    return LayerSpec(kind, {"window": window, "stride": stride}, **kw)


def dense(n: int, **kw) -> LayerSpec:
    return LayerSpec("dense", {"n_neurons": n}, **kw)


def dropout(rate: float, **kw) -> LayerSpec:
    return LayerSpec("dropout", {"rate": rate}, **kw)


def output(n: int, **kw) -> LayerSpec:
    return LayerSpec("output", {"n_neurons": n}, **kw)


def flatten(**kw) -> LayerSpec:
    return LayerSpec("flatten", {}, **kw)


def global_avgpool(**kw) -> LayerSpec:
    return LayerSpec("global_avgpool", {}, **kw)


def upsample(factor: int, **kw) -> LayerSpec:
    return LayerSpec("upsample", {"factor": factor}, **kw)


def arch_to_dict(arch: ArchitectureSpec) -> dict:
    layers = []
    for layer in arch.layers:
        d = {"kind": layer.kind, **layer.hp}
        if layer.frozen:
            d["frozen"] = True
        if layer.role != "base":
            d["role"] = layer.role
        layers.append(d)
    edges = []
    for e in arch.skip_edges:
        d = {"from": e.src, "to": e.dst, "merge": e.merge}
        if e.expect_channels is not None:
            d["expect_channels"] = e.expect_channels
        if e.adapters:
            d["adapters"] = list(e.adapters)
        edges.append(d)
    return {"name": arch.name, "input_shape": list(arch.input_shape),
            "class_count": arch.class_count, "layers": layers, "skip_edges": edges}


def arch_from_dict(doc: Mapping[str, Any]) -> ArchitectureSpec:
    layers = []
    for d in doc["layers"]:
        d = dict(d)
        kind = d.pop("kind")
        if kind not in KINDS:
            raise ArchitectureError(f"unknown layer kind {kind!r}")
        frozen = bool(d.pop("frozen", False))
        role = d.pop("role", "base")
        layers.append(LayerSpec(kind, d, frozen, role))
    edges = [SkipEdge(int(e["from"]), int(e["to"]), e["merge"], e.get("expect_channels"),
                      tuple(e.get("adapters", ()))) for e in doc.get("skip_edges", [])]
    return ArchitectureSpec(doc["name"], tuple(doc["input_shape"]), int(doc["class_count"]),
                            tuple(layers), tuple(edges))


def load_architecture(path: str | Path) -> ArchitectureSpec:
    """Read an architecture file; bare bundled names (``vgg16_like.json``) also work."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("autotune") / "data" / p.name
        if not bundled.is_file():
            raise FileNotFoundError(path)
        return arch_from_dict(json.loads(bundled.read_text()))
    return arch_from_dict(json.loads(p.read_text()))


def save_architecture(arch: ArchitectureSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(arch_to_dict(arch), indent=1) + "\n")


# ---------------------------------------------------------------------------
# shape tracing


@dataclass(frozen=True)
class Mismatch:
    position: int
    kind: str  # spatial | channels | input | edge | output
    message: str
    main: Shape | None = None
    other: Shape | None = None
    edge: int | None = None


@dataclass
class ShapeTrace:
    inputs: list[Shape]
    outputs: list[Shape]
    mismatch: Mismatch | None = None

    @property
    def ok(self) -> bool:
        return self.mismatch is None

    @property
    def final(self) -> Shape | None:
        return self.outputs[-1] if self.outputs else None


def _layer_output(layer: LayerSpec, shape: Shape) -> Shape | str:
    k, hp = layer.kind, layer.hp
    spatial = len(shape) == 3
    if k in ("conv", "maxpool", "avgpool", "global_avgpool", "flatten", "upsample"):
        if not spatial:
            return f"{k} needs an (H, W, C) input, got {shape}"
        H, W, C = shape
        if k == "conv":
            s = hp.get("stride", 1)
            return (math.ceil(H / s), math.ceil(W / s), hp["n_filters"])
        if k in ("maxpool", "avgpool"):
            s = hp.get("stride", 1)
            return (math.ceil(H / s), math.ceil(W / s), C)
        if k == "global_avgpool":
            return (C,)
        if k == "flatten":
            return (H * W * C,)
        f = hp["factor"]
        return (H * f, W * f, C)
    if k in ("dense", "output"):
        if spatial:
            return f"{k} needs a flat input, got {shape}"
        return (hp["n_neurons"],)
    if k == "dropout":
        return shape
    return f"unknown layer kind {k!r}"


def _merge(main: Shape, skip: Shape, edge: SkipEdge) -> tuple[Shape | None, str, str]:
    """Merged shape, or ``(None, mismatch kind, message)``."""
    if len(main) != len(skip):
        return None, "input", f"cannot merge {main} with {skip}"
    if len(main) == 3 and main[:2] != skip[:2]:
        return None, "spatial", f"spatial mismatch: {main[:2]} vs {skip[:2]}"
    if edge.expect_channels is not None and main[-1] != edge.expect_channels:
        return None, "channels", (f"depth mismatch: channels {main[-1]} vs "
                                  f"{edge.expect_channels} expected")
    if edge.merge == "add":
        if main[-1] != skip[-1]:
            return None, "channels", f"depth mismatch: channels {main[-1]} vs {skip[-1]}"
        return main, "", ""
    return (*main[:-1], main[-1] + skip[-1]), "", ""


def check_shapes(arch: ArchitectureSpec) -> ShapeTrace:
    """Forward-propagate shapes, stopping at the first mismatch."""
    n = len(arch.layers)
    by_dst: dict[int, list[int]] = defaultdict(list)
    for j, e in enumerate(arch.skip_edges):
        if not (0 <= e.src < e.dst < n) or e.merge not in MERGES:
            return ShapeTrace([], [], Mismatch(e.dst, "edge", f"invalid skip edge {e}", edge=j))
        by_dst[e.dst].append(j)

    shape: Shape = tuple(arch.input_shape)
    inputs: list[Shape] = []
    outputs: list[Shape] = []
    for i, layer in enumerate(arch.layers):
        inputs.append(shape)
        out = _layer_output(layer, shape)
        if isinstance(out, str):
            return ShapeTrace(inputs, outputs, Mismatch(i, "input", out, main=shape))
        for j in by_dst[i]:
            e = arch.skip_edges[j]
            skip = outputs[e.src]
            for f in e.adapters:
                if len(skip) != 3:
                    return ShapeTrace(inputs, outputs,
                                      Mismatch(i, "input", "upsample on a flat operand", edge=j))
                skip = (skip[0] * f, skip[1] * f, skip[2])
            merged, kind, msg = _merge(out, skip, e)
            if merged is None:
                return ShapeTrace(inputs, outputs,
                                  Mismatch(i, kind, f"layer {i}: {msg}", main=out, other=skip, edge=j))
            out = merged
        outputs.append(out)
        shape = out

    last = arch.layers[-1] if arch.layers else None
    if last is None or last.kind != "output" or shape != (arch.class_count,):
        return ShapeTrace(inputs, outputs,
                          Mismatch(max(n - 1, 0), "output",
                                   f"network must end in an output layer of {arch.class_count} "
                                   f"units, ends with {shape}"))
    return ShapeTrace(inputs, outputs)


# ---------------------------------------------------------------------------
# adapters


@dataclass(frozen=True)
class Adapter:
    position: int  # layer index (main side) or edge index (skip side)
    kind: str  # conv1x1 | upsample
    size: int  # output channels or upsample factor
    side: str = "main"


def _insert_after(arch: ArchitectureSpec, p: int, layer: LayerSpec, edge_idx: int) -> ArchitectureSpec:
    """Insert ``layer`` at ``p + 1`` and move edge ``edge_idx`` (plus later merges
    into ``p``) so they merge into the inserted layer."""
    layers = list(arch.layers)
    layers.insert(p + 1, layer)
    edges = []
    for j, e in enumerate(arch.skip_edges):
        src = e.src + 1 if e.src >= p else e.src
        if e.dst > p or (e.dst == p and j >= edge_idx):
            dst = e.dst + 1
        else:
            dst = e.dst
        edges.append(replace(e, src=src, dst=dst))
    return replace(arch, layers=tuple(layers), skip_edges=tuple(edges))


def insert_adapters(arch: ArchitectureSpec, max_rounds: int | None = None) -> ArchitectureSpec:
    """Repair merge mismatches, one adapter per detected mismatch.

    Raises :class:`IrreparableMismatch` for anything an adapter cannot fix.
    """
    max_rounds = max_rounds or 4 * len(arch.skip_edges) + 4
    for _ in range(max_rounds):
        trace = check_shapes(arch)
        if trace.ok:
            return arch
        m = trace.mismatch
        if m.edge is None or m.kind not in ("spatial", "channels"):
            raise IrreparableMismatch(m)
        edge = arch.skip_edges[m.edge]
        if m.kind == "channels":
            target = edge.expect_channels if edge.expect_channels is not None else m.other[-1]
            arch = _insert_after(arch, m.position, conv(1, target, role="adapter"), m.edge)
            continue
        (hm, wm), (hs, ws) = m.main[:2], m.other[:2]
        if hm < hs and hs % hm == 0 and ws == wm * (hs // hm):
            arch = _insert_after(arch, m.position, upsample(hs // hm, role="adapter"), m.edge)
        elif hs < hm and hm % hs == 0 and wm == ws * (hm // hs):
            edges = list(arch.skip_edges)
            edges[m.edge] = replace(edge, adapters=edge.adapters + (hm // hs,))
            arch = replace(arch, skip_edges=tuple(edges))
        else:
            raise IrreparableMismatch(m)
    trace = check_shapes(arch)
    if not trace.ok:
        raise IrreparableMismatch(trace.mismatch)
    return arch


def list_adapters(arch: ArchitectureSpec) -> list[Adapter]:
    out = []
    for i, layer in enumerate(arch.layers):
        if layer.role == "adapter":
            if layer.kind == "conv":
                out.append(Adapter(i, "conv1x1", layer.hp["n_filters"]))
            else:
                out.append(Adapter(i, "upsample", layer.hp["factor"]))
    for j, e in enumerate(arch.skip_edges):
        for f in e.adapters:
            out.append(Adapter(j, "upsample", f, side="skip"))
    return out


def remove_adapter(arch: ArchitectureSpec, adapter: Adapter) -> ArchitectureSpec:
    """Undo one adapter (used to check that every adapter is necessary)."""
    if adapter.side == "skip":
        edges = list(arch.skip_edges)
        e = edges[adapter.position]
        rest = list(e.adapters)
        rest.remove(adapter.size)
        edges[adapter.position] = replace(e, adapters=tuple(rest))
        return replace(arch, skip_edges=tuple(edges))
    q = adapter.position
    if arch.layers[q].role != "adapter":
        raise ArchitectureError(f"layer {q} is not an adapter")
    layers = list(arch.layers)
    del layers[q]
    edges = [replace(e, src=e.src - 1 if e.src >= q else e.src,
                     dst=e.dst - 1 if e.dst >= q else e.dst) for e in arch.skip_edges]
    return replace(arch, layers=tuple(layers), skip_edges=tuple(edges))


# ---------------------------------------------------------------------------
# search space and surgery


def head_start(arch: ArchitectureSpec) -> int:
    """Index of the first layer of the classifier head (dense/dropout run + output)."""
    if not arch.layers or arch.layers[-1].kind != "output":
        raise ArchitectureError("architecture must end with an output layer")
    i = len(arch.layers) - 1
    while i > 0 and arch.layers[i - 1].kind in HEAD_KINDS:
        i -= 1
    return i


def tunable_positions(arch: ArchitectureSpec) -> list[int]:
    """Convolution/pooling layers ahead of the head, left to right."""
    h = head_start(arch)
    return [i for i, layer in enumerate(arch.layers[:h])
            if layer.kind in SPATIAL_KINDS and layer.role != "adapter"]


def max_depth(arch: ArchitectureSpec) -> int:
    return 1 + len(tunable_positions(arch))


def build_space_for_tail(arch: ArchitectureSpec, k_max: int) -> ss.SearchSpace:
    """Search space for replacing the last ``depth`` tunable units.

    ``depth = 1`` tunes only the FC head; ``depth = j + 1`` additionally
    regenerates the j-th convolution/pooling layer from the right, whose
    parameters are named ``tail{j}_*``.
    """
    trace = check_shapes(arch)
    if not trace.ok:
        raise ArchitectureError(f"invalid architecture: {trace.mismatch.message}")
    if not 1 <= k_max <= max_depth(arch):
        raise ArchitectureError(f"k_max must be in 1..{max_depth(arch)}, got {k_max}")
    positions = tunable_positions(arch)
    params = [ss.ParamSpec("depth", ss.IntegerRange(1, k_max))]
    for j in range(1, k_max):
        layer = arch.layers[positions[-j]]
        cond = ss.Condition("depth", tuple(range(j + 1, k_max + 1)))
        if layer.kind == "conv":
            params.append(ss.ParamSpec(f"tail{j}_filter_size",
                                       ss.OrdinalGrid(ss.CONV_FILTER_SIZES), cond))
            params.append(ss.ParamSpec(f"tail{j}_n_filters",
                                       ss.OrdinalGrid(ss.CONV_FILTER_COUNTS), cond))
        else:
            params.append(ss.ParamSpec(f"tail{j}_pool_size", ss.OrdinalGrid(ss.POOL_SIZES), cond))
    params.extend(ss.fc_stack_params())
    return ss.SearchSpace(tuple(params), name=f"{arch.name}_tail{k_max}")


@dataclass(frozen=True)
class TuningPlan:
    k: int
    replaced: tuple[int, ...]  # positions of regenerated conv/pool layers in the base
    generated_layers: tuple[LayerSpec, ...]
    adapters: tuple[Adapter, ...]


def _generated_unit(layer: LayerSpec, j: int, config: Mapping[str, Any]) -> LayerSpec:
    if layer.kind == "conv":
        return conv(int(config[f"tail{j}_filter_size"]), int(config[f"tail{j}_n_filters"]),
                    stride=1, role="generated")
    return pool(layer.kind, int(config[f"tail{j}_pool_size"]), stride=1, role="generated")


def apply_configuration(arch: ArchitectureSpec, config: Mapping[str, Any]
                        ) -> tuple[ArchitectureSpec, TuningPlan]:
    """Regenerate the tail of ``arch`` according to ``config``.

    Retained layers are frozen, generated layers and adapters are trainable.
    """
    depth = int(config.get("depth", 1))
    positions = tunable_positions(arch)
    if not 1 <= depth <= len(positions) + 1:
        raise ArchitectureError(f"depth {depth} outside 1..{len(positions) + 1}")
    h = head_start(arch)
    for e in arch.skip_edges:
        if e.dst >= h or e.src >= h:
            raise ArchitectureError("skip edges into the classifier head are not supported")

    units = {positions[-j]: j for j in range(1, depth)}
    layers = []
    generated = []
    for i, layer in enumerate(arch.layers[:h]):
        if i in units:
            new = _generated_unit(layer, units[i], config)
            generated.append(new)
            layers.append(new)
        else:
            layers.append(replace(layer, frozen=True))

    # repair the body first (with a bare output as placeholder) so the head
    # sees the body's final shape
    body = insert_adapters(replace(arch, layers=tuple(layers) + (output(arch.class_count),)))
    last_shape = check_shapes(body).inputs[-1]
    head: list[LayerSpec] = []
    if len(last_shape) == 3:
        head.append(flatten(role="generated"))
    for i in range(1, int(config["fc_layers"])):
        head.append(dense(int(config[f"neurons_{i}"]), role="generated"))
        head.append(dropout(float(config[f"dropout_{i}"]), role="generated"))
    head.append(output(arch.class_count, role="generated"))
    generated.extend(head)

    new_arch = replace(body, layers=body.layers[:-1] + tuple(head))
    plan = TuningPlan(depth, tuple(sorted(units)), tuple(generated),
                      tuple(list_adapters(new_arch)))
    return new_arch, plan


def config_rows(config: Mapping[str, Any]) -> list[tuple[str, str, str]]:
    """Render a configuration as (layer, parameter, value) rows."""
    rows = []
    n_fc = int(config.get("fc_layers", 1)) - 1
    if "fc_layers" in config:
        rows.append(("FC", "#layers", str(n_fc)))
    if n_fc:
        neurons = [str(config[f"neurons_{i}"]) for i in range(1, n_fc + 1)]
        drops = [str(config[f"dropout_{i}"]) for i in range(1, n_fc + 1)]
        rows.append(("FC", "#neurons", ", ".join(neurons)))
        rows.append(("FC", "dropout factor", ", ".join(drops)))
    conv_sizes, conv_counts, pools = [], [], []
    depth = int(config.get("depth", 1))
    for j in range(1, depth):
        if f"tail{j}_filter_size" in config:
            s = config[f"tail{j}_filter_size"]
            conv_sizes.append(f"{s}x{s}")
            conv_counts.append(str(config[f"tail{j}_n_filters"]))
        elif f"tail{j}_pool_size" in config:
            s = config[f"tail{j}_pool_size"]
            pools.append(f"{s}x{s}")
    if "conv_filter_size" in config:
        s = config["conv_filter_size"]
        conv_sizes.append(f"{s}x{s}")
        conv_counts.append(str(config["conv_n_filters"]))
    if "pool_size" in config:
        s = config["pool_size"]
        pools.append(f"{config.get('pool_type', 'max')} {s}x{s}")
    if conv_sizes:
        rows.append(("Convolution", "#layers", str(len(conv_sizes))))
        rows.append(("Convolution", "filter size", ", ".join(conv_sizes)))
        rows.append(("Convolution", "#filters", ", ".join(conv_counts)))
    if pools:
        rows.append(("Pooling", "#layers", str(len(pools))))
        rows.append(("Pooling", "filter size", ", ".join(pools)))
    known = {"depth", "fc_layers", "conv_filter_size", "conv_n_filters", "pool_type", "pool_size"}
    for key in sorted(config):
        if key in known or key.startswith(("neurons_", "dropout_", "tail")):
            continue
        rows.append(("-", key, str(config[key])))
    return rows


# ---------------------------------------------------------------------------
# accounting


@dataclass(frozen=True)
class LayerCount:
    index: int
    kind: str
    count: int
    frozen: bool


@dataclass(frozen=True)
class Accounting:
    per_layer: tuple[LayerCount, ...]

    @property
    def total(self) -> int:
        return sum(c.count for c in self.per_layer)

    @property
    def trainable(self) -> int:
        return sum(c.count for c in self.per_layer if not c.frozen)

    @property
    def frozen(self) -> int:
        return self.total - self.trainable

    # FLOP tables call the trainable share "learned layers"
    learned = trainable


def _require_trace(arch: ArchitectureSpec) -> ShapeTrace:
    trace = check_shapes(arch)
    if not trace.ok:
        raise ArchitectureError(f"shape trace failed: {trace.mismatch.message}")
    return trace


def layer_params(layer: LayerSpec, in_shape: Shape) -> int:
    if layer.kind == "conv":
        k = layer.hp["filter_size"]
        return (k * k * in_shape[-1] + 1) * layer.hp["n_filters"]
    if layer.kind in ("dense", "output"):
        return (in_shape[0] + 1) * layer.hp["n_neurons"]
    return 0


def layer_flops(layer: LayerSpec, in_shape: Shape, out_shape: Shape) -> int:
    """FLOPs of the layer itself (merges are free)."""
    if layer.kind == "conv":
        k = layer.hp["filter_size"]
        H, W = _pre_merge_hw(layer, in_shape)
        return 2 * k * k * in_shape[-1] * layer.hp["n_filters"] * H * W
    if layer.kind in ("dense", "output"):
        return 2 * in_shape[0] * layer.hp["n_neurons"]
    if layer.kind in ("maxpool", "avgpool"):
        w = layer.hp["window"]
        H, W = _pre_merge_hw(layer, in_shape)
        return w * w * H * W * in_shape[-1]
    if layer.kind == "global_avgpool":
        return in_shape[0] * in_shape[1] * in_shape[2]
    return 0


def _pre_merge_hw(layer: LayerSpec, in_shape: Shape) -> tuple[int, int]:
    s = layer.hp.get("stride", 1)
    return math.ceil(in_shape[0] / s), math.ceil(in_shape[1] / s)


def count_params(arch: ArchitectureSpec) -> Accounting:
    trace = _require_trace(arch)
    return Accounting(tuple(
        LayerCount(i, layer.kind, layer_params(layer, trace.inputs[i]), layer.frozen)
        for i, layer in enumerate(arch.layers)))


def count_flops(arch: ArchitectureSpec) -> Accounting:
    trace = _require_trace(arch)
    return Accounting(tuple(
        LayerCount(i, layer.kind, layer_flops(layer, trace.inputs[i], trace.outputs[i]),
                   layer.frozen)
        for i, layer in enumerate(arch.layers)))


# ---------------------------------------------------------------------------
# bundled base networks


def vgg16_like(class_count: int = 101) -> ArchitectureSpec:
    layers: list[LayerSpec] = []
    for n_convs, width in ((2, 64), (2, 128), (3, 256), (3, 512), (3, 512)):
        layers += [conv(3, width) for _ in range(n_convs)]
        layers.append(pool("maxpool", 2, stride=2))
    layers += [flatten(), dense(4096), dropout(0.5), dense(4096), dropout(0.5),
               output(class_count)]
    return ArchitectureSpec("vgg16_like", (224, 224, 3), class_count, tuple(layers))


def resnet50_like(class_count: int = 120) -> ArchitectureSpec:
    """Bottleneck ResNet-50 layout without batch norm. Identity shortcuts only:
    the first block of every stage (where the shape changes) has no skip edge."""
    layers = [conv(7, 64, stride=2), pool("maxpool", 3, stride=2)]
    edges = []
    for mid, out, blocks, stride in ((64, 256, 3, 1), (128, 512, 4, 2),
                                     (256, 1024, 6, 2), (512, 2048, 3, 2)):
        for b in range(blocks):
            block_in = len(layers) - 1
            layers += [conv(1, mid, stride=stride if b == 0 else 1), conv(3, mid), conv(1, out)]
            if b > 0:
                edges.append(SkipEdge(block_in, len(layers) - 1, "add"))
    layers += [global_avgpool(), output(class_count)]
    return ArchitectureSpec("resnet50_like", (224, 224, 3), class_count, tuple(layers),
                            tuple(edges))


def densenet121_like(class_count: int = 256, growth: int = 32) -> ArchitectureSpec:
    """DenseNet-121 without batch norm: every bottleneck pair concatenates its
    output with its input."""
    layers = [conv(7, 64, stride=2), pool("maxpool", 3, stride=2)]
    edges = []
    channels = 64
    block_sizes = (6, 12, 24, 16)
    for bi, n in enumerate(block_sizes):
        for _ in range(n):
            block_in = len(layers) - 1
            layers += [conv(1, 4 * growth), conv(3, growth)]
            edges.append(SkipEdge(block_in, len(layers) - 1, "concat"))
            channels += growth
        if bi < len(block_sizes) - 1:
            channels //= 2
            layers += [conv(1, channels), pool("avgpool", 2, stride=2)]
    layers += [global_avgpool(), output(class_count)]
    return ArchitectureSpec("densenet121_like", (224, 224, 3), class_count, tuple(layers),
                            tuple(edges))


BUNDLED = {"vgg16_like.json": vgg16_like, "resnet50_like.json": resnet50_like,
           "densenet121_like.json": densenet121_like}
