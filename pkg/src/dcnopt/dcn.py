"""Convolutional architecture genomes for 32x32 RGB, 10-class inputs.

:func:`build_space` encodes a layer-stack genome as a
:class:`~dcnopt.space.SearchSpace`: a conv-layer count plus per-layer
genes (filters, filter size, stride, padding fraction, optional
cross-map normalization, optional pooling, optional auxiliary softmax
head), then a hidden-layer count with per-layer node counts and optional
dropout.  Genes of layers beyond the active counts are still sampled but
ignored by :func:`decode`, which keeps the gene activation structure to
simple boolean gates.

Padding is stored as a fraction of the filter size and discretized to
``[0, filter_size - 1]``, so its domain never depends on the filter-size
gene.  :func:`decode` turns an assignment into a validated
:class:`ArchitectureDescription` or an :class:`InvalidArchitecture` value
when some spatial size collapses below 1; invalid genomes are data, not
errors, so callers can score them as failed trials.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .space import Assignment, Condition, ParamSpec, SearchSpace, SpaceError, validate

__all__ = [
    "RangeProfile",
    "ConvBlockSpec",
    "HiddenLayerSpec",
    "ArchitectureDescription",
    "InvalidArchitecture",
    "TrialConfigExporter",
    "build_space",
    "decode",
    "count_params",
    "export_config",
    "is_genome_space",
    "TRAINING_DEFAULTS",
]

INPUT_CHANNELS = 3
INPUT_SIZE = 32
NUM_CLASSES = 10

# Fixed backprop schedule carried as inert metadata in exported configs:
# three cooling steps, dividing the learning rate by 10 at each boundary.
TRAINING_DEFAULTS = {
    "learning_rate": 0.01,
    "momentum": 0.9,
    "weight_decay": 0.0005,
    "epoch_schedule": "120,20,10",
    "lr_decay_factor": 10,
}


@dataclass(frozen=True)
class RangeProfile:
    """Domains for every genome gene; widen or pin them per experiment."""

    num_conv_layers: tuple[int, int] = (2, 8)
    filters: tuple[int, ...] = (32, 64, 128, 256)
    filter_sizes: tuple[int, ...] = (3, 5, 7, 11)
    stride: tuple[int, int] = (1, 10)
    pad_frac: tuple[float, float] = (0.0, 1.0)
    norm_flag: tuple[bool, ...] = (False, True)
    norm_sizes: tuple[int, ...] = (3, 5, 9)
    pool_flag: tuple[bool, ...] = (False, True)
    pool_sizes: tuple[int, ...] = (2, 3)
    pool_strides: tuple[int, ...] = (1, 2)
    pool_types: tuple[str, ...] = ("max", "avg")
    aux_flag: tuple[bool, ...] = (False, True)
    num_hidden: tuple[int, int] = (0, 2)
    hidden_nodes: tuple[int, int] = (256, 5120)
    dropout_flag: tuple[bool, ...] = (False, True)
    dropout_values: tuple[float, ...] = (0.5,)


def _flag(name: str, choices: tuple[bool, ...], condition: Condition | None = None) -> ParamSpec:
    if tuple(choices) == (False, True):
        return ParamSpec(name, "boolean", condition=condition)
    return ParamSpec(name, "categorical", choices=tuple(choices), condition=condition)


def build_space(profile: RangeProfile = RangeProfile()) -> SearchSpace:
    """Emit the genome space for the given domains.

    Per-layer genes are unconditional (the layer-count genes gate them at
    decode time); the norm/pool/dropout child genes hang off their boolean
    presence flags.
    """
    params: list[ParamSpec] = [
        ParamSpec("num_conv_layers", "integer",
                  lo=profile.num_conv_layers[0], hi=profile.num_conv_layers[1]),
    ]
    for i in range(1, profile.num_conv_layers[1] + 1):
        p = f"conv{i}"
        params += [
            ParamSpec(f"{p}_filters", "categorical", choices=profile.filters),
            ParamSpec(f"{p}_filter_size", "categorical", choices=profile.filter_sizes),
            ParamSpec(f"{p}_stride", "integer", lo=profile.stride[0], hi=profile.stride[1]),
            ParamSpec(f"{p}_pad_frac", "real", lo=profile.pad_frac[0], hi=profile.pad_frac[1]),
            _flag(f"{p}_has_norm", profile.norm_flag),
        ]
        if True in profile.norm_flag:  # children of a never-true flag can never activate
            params.append(ParamSpec(f"{p}_norm_size", "categorical", choices=profile.norm_sizes,
                                    condition=Condition(f"{p}_has_norm", True)))
        params.append(_flag(f"{p}_has_pool", profile.pool_flag))
        if True in profile.pool_flag:
            params += [
                ParamSpec(f"{p}_pool_size", "categorical", choices=profile.pool_sizes,
                          condition=Condition(f"{p}_has_pool", True)),
                ParamSpec(f"{p}_pool_stride", "categorical", choices=profile.pool_strides,
                          condition=Condition(f"{p}_has_pool", True)),
                ParamSpec(f"{p}_pool_type", "categorical", choices=profile.pool_types,
                          condition=Condition(f"{p}_has_pool", True)),
            ]
        params.append(_flag(f"{p}_has_aux_head", profile.aux_flag))
    params.append(
        ParamSpec("num_hidden", "integer", lo=profile.num_hidden[0], hi=profile.num_hidden[1])
    )
    for j in range(1, profile.num_hidden[1] + 1):
        p = f"hidden{j}"
        params += [
            ParamSpec(f"{p}_nodes", "integer",
                      lo=profile.hidden_nodes[0], hi=profile.hidden_nodes[1]),
            _flag(f"{p}_has_dropout", profile.dropout_flag),
        ]
        if True in profile.dropout_flag:
            params.append(ParamSpec(f"{p}_dropout", "categorical", choices=profile.dropout_values,
                                    condition=Condition(f"{p}_has_dropout", True)))
    return SearchSpace(name="dcn-genome", params=tuple(params), version=1)


@dataclass(frozen=True)
class ConvBlockSpec:
    """One convolution block: conv, then optional pool, then optional norm."""

    num_filters: int
    filter_size: int
    stride: int
    padding: int
    has_norm: bool = False
    norm_size: int | None = None
    has_pool: bool = False
    pool_size: int | None = None
    pool_stride: int | None = None
    pool_type: str | None = None
    has_aux_head: bool = False

    def __post_init__(self):
        if min(self.num_filters, self.filter_size, self.stride) < 1:
            raise ValueError("filters, filter size and stride must be >= 1")
        if not 0 <= self.padding < self.filter_size:
            raise ValueError(f"padding {self.padding} must satisfy 0 <= pad < filter size")
        if self.has_norm and (self.norm_size is None or self.norm_size < 1):
            raise ValueError("norm block needs a size >= 1")
        if self.has_pool:
            if self.pool_size is None or self.pool_stride is None or self.pool_type is None:
                raise ValueError("pool block needs size, stride and type")
            if min(self.pool_size, self.pool_stride) < 1:
                raise ValueError("pool size and stride must be >= 1")


@dataclass(frozen=True)
class HiddenLayerSpec:
    nodes: int
    dropout: float | None = None


@dataclass(frozen=True)
class InvalidArchitecture:
    """Decode outcome for genomes whose layer stack is geometrically impossible."""

    reason: str


@dataclass(frozen=True)
class ArchitectureDescription:
    """A decoded layer stack with derived spatial sizes.

    ``conv_sizes[i]`` is the spatial side after block i's convolution;
    ``block_sizes[i]`` after its pooling (equal when the block has none).
    """

    blocks: tuple[ConvBlockSpec, ...]
    hidden: tuple[HiddenLayerSpec, ...]
    conv_sizes: tuple[int, ...]
    block_sizes: tuple[int, ...]
    input_channels: int = INPUT_CHANNELS
    input_size: int = INPUT_SIZE
    num_classes: int = NUM_CLASSES

    @property
    def flatten_dim(self) -> int:
        return self.blocks[-1].num_filters * self.block_sizes[-1] ** 2

    @property
    def trainable_param_count(self) -> int:
        return count_params(self)


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def decode(space: SearchSpace, assignment: Mapping[str, Any]) -> ArchitectureDescription | InvalidArchitecture:
    """Build the layer stack selected by a genome.

    The assignment must be valid in a space produced by
    :func:`build_space`.  Returns :class:`InvalidArchitecture` (a value,
    not an exception) when any derived spatial size drops below 1.
    """
    problems = validate(space, assignment)
    if problems:
        raise SpaceError("invalid assignment: " + "; ".join(problems))

    def gene(name: str) -> Any:
        if name not in assignment:
            raise SpaceError(f"assignment lacks genome gene {name!r}")
        return assignment[name]

    blocks: list[ConvBlockSpec] = []
    conv_sizes: list[int] = []
    block_sizes: list[int] = []
    size = INPUT_SIZE
    for i in range(1, gene("num_conv_layers") + 1):
        p = f"conv{i}"
        kernel = gene(f"{p}_filter_size")
        padding = min(kernel - 1, int(gene(f"{p}_pad_frac") * kernel))
        size = _conv_out(size, kernel, gene(f"{p}_stride"), padding)
        if size < 1:
            return InvalidArchitecture(f"{p}: spatial size {size} < 1")
        conv_size = size
        has_pool = bool(gene(f"{p}_has_pool"))
        if has_pool:
            size = _conv_out(size, gene(f"{p}_pool_size"), gene(f"{p}_pool_stride"), 0)
            if size < 1:
                return InvalidArchitecture(f"{p} pool: spatial size {size} < 1")
        has_norm = bool(gene(f"{p}_has_norm"))
        blocks.append(
            ConvBlockSpec(
                num_filters=gene(f"{p}_filters"),
                filter_size=kernel,
                stride=gene(f"{p}_stride"),
                padding=padding,
                has_norm=has_norm,
                norm_size=gene(f"{p}_norm_size") if has_norm else None,
                has_pool=has_pool,
                pool_size=gene(f"{p}_pool_size") if has_pool else None,
                pool_stride=gene(f"{p}_pool_stride") if has_pool else None,
                pool_type=gene(f"{p}_pool_type") if has_pool else None,
                has_aux_head=bool(gene(f"{p}_has_aux_head")),
            )
        )
        conv_sizes.append(conv_size)
        block_sizes.append(size)

    hidden: list[HiddenLayerSpec] = []
    for j in range(1, gene("num_hidden") + 1):
        p = f"hidden{j}"
        has_dropout = bool(gene(f"{p}_has_dropout"))
        hidden.append(
            HiddenLayerSpec(
                nodes=gene(f"{p}_nodes"),
                dropout=gene(f"{p}_dropout") if has_dropout else None,
            )
        )
    return ArchitectureDescription(
        blocks=tuple(blocks),
        hidden=tuple(hidden),
        conv_sizes=tuple(conv_sizes),
        block_sizes=tuple(block_sizes),
    )


def count_params(arch: ArchitectureDescription, parametric_activations: bool = False) -> int:
    """Trainable parameter total over the layer stack.

    Convolutions count ``k*k*in_ch*out_ch + out_ch`` (weights plus bias),
    fully-connected layers ``in*out + out``, and every softmax head (the
    main one and each auxiliary head) ``flattened_in*classes + classes``.
    Normalization and pooling are parameter-free (the norm scale is a
    fixed constant, not learned).

    ``parametric_activations`` adds one learnable slope per activation
    layer (each conv block and each hidden layer) for parametric
    rectifier variants; exported configs never emit such layers.
    """
    total = 0
    channels = arch.input_channels
    for block, out_size in zip(arch.blocks, arch.block_sizes):
        total += block.filter_size ** 2 * channels * block.num_filters + block.num_filters
        if block.has_aux_head:
            flat = block.num_filters * out_size * out_size
            total += flat * arch.num_classes + arch.num_classes
        channels = block.num_filters
    prev = arch.flatten_dim
    for layer in arch.hidden:
        total += prev * layer.nodes + layer.nodes
        prev = layer.nodes
    total += prev * arch.num_classes + arch.num_classes
    if parametric_activations:
        total += len(arch.blocks) + len(arch.hidden)
    return total


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_config(arch: ArchitectureDescription, training_meta: Mapping[str, Any] | None = None) -> str:
    """Layer-sectioned trainer config text; byte-deterministic per arch.

    One ``[section]`` per layer with ``key=value`` lines and LF endings,
    followed by a ``[training]`` metadata section carrying the fixed
    learning schedule plus any extra ``training_meta`` entries (sorted).
    """
    lines: list[str] = ["[input]", "type=data",
                        f"channels={arch.input_channels}", f"size={arch.input_size}"]
    last = "input"

    def section(name: str, kind: str, fields: dict[str, Any]) -> None:
        nonlocal last
        lines.append("")
        lines.append(f"[{name}]")
        lines.append(f"type={kind}")
        lines.append(f"inputs={last}")
        for key, value in fields.items():
            lines.append(f"{key}={_fmt(value)}")
        last = name

    for i, block in enumerate(arch.blocks, start=1):
        section(f"conv{i}", "conv", {
            "filters": block.num_filters,
            "filter_size": block.filter_size,
            "stride": block.stride,
            "padding": block.padding,
        })
        if block.has_pool:
            section(f"pool{i}", "pool", {
                "pool_type": block.pool_type,
                "size": block.pool_size,
                "stride": block.pool_stride,
            })
        if block.has_norm:
            section(f"norm{i}", "crossmapnorm", {"size": block.norm_size, "scale": 0.75})
        if block.has_aux_head:
            section(f"aux_softmax{i}", "softmax", {"outputs": arch.num_classes})
            last = f"norm{i}" if block.has_norm else (f"pool{i}" if block.has_pool else f"conv{i}")

    for j, layer in enumerate(arch.hidden, start=1):
        fields: dict[str, Any] = {"outputs": layer.nodes}
        if layer.dropout is not None:
            fields["dropout"] = layer.dropout
        section(f"fc{j}", "fc", fields)

    section("softmax", "softmax", {"outputs": arch.num_classes})

    lines.append("")
    lines.append("[training]")
    for key, value in TRAINING_DEFAULTS.items():
        lines.append(f"{key}={_fmt(value)}")
    for key in sorted(training_meta or {}):
        lines.append(f"{key}={_fmt(training_meta[key])}")
    lines.append("")
    return "\n".join(lines)


def is_genome_space(space: SearchSpace) -> bool:
    """True when ``space`` carries the genes :func:`decode` expects."""
    names = set(space.names)
    return {"num_conv_layers", "num_hidden", "conv1_filters"} <= names


@dataclass
class TrialConfigExporter:
    """Writes one trainer config per decodable trial under ``out_dir``."""

    space: SearchSpace
    out_dir: Path

    def __call__(self, assignment: Assignment, trial_id: int) -> Path | InvalidArchitecture:
        arch = decode(self.space, assignment)
        if isinstance(arch, InvalidArchitecture):
            return arch
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = Path(self.out_dir) / f"trial_{trial_id:05d}.cfg"
        path.write_text(export_config(arch), encoding="utf-8")
        return path
