##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Parameter accounting and the layer-by-layer model summary.

"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

from subband_shake.models.network import Model
from subband_shake.models.spec import LayerKind, LayerSpec, ModelSpec, Pooling


@dataclass
class ParameterCount:
    '''Learnable scalars per named stage, and their total.'''
    stages: Dict[str, int]
    total: int


def count_parameters(model: Model) -> ParameterCount:
    """
    Count every learnable scalar, grouped by top-level stage.

    Conv weights and biases, batch norm gamma and shift, and linear weights
    and biases count; running statistics do not.

    """
    stages: Dict[str, int] = {}
    for name, tensor in model.named_parameters():
        stage = name.split(".", 1)[0]
        stages[stage] = stages.get(stage, 0) + tensor.size
    return ParameterCount(stages=stages, total=sum(stages.values()))


def _layer_params(spec: LayerSpec, in_dim: int) -> int:
    if spec.kind is LayerKind.CONV:
        return spec.channels * in_dim * spec.kernel[0] * spec.kernel[1] + (spec.channels if spec.bias else 0)
    if spec.kind is LayerKind.BATCHNORM:
        return 2 * in_dim
    if spec.kind is LayerKind.LINEAR:
        return spec.channels * in_dim + (spec.channels if spec.bias else 0)
    return 0


def _layer_rows(layers, in_dim: int, indent: str) -> Tuple[List[Tuple[str, str, int]], int]:
    rows = []
    for layer in layers:
        rows.append((indent + layer.describe(), "", _layer_params(layer, in_dim)))
        if layer.kind in (LayerKind.CONV, LayerKind.LINEAR):
            in_dim = layer.channels
    return rows, in_dim


def spec_rows(spec: ModelSpec) -> List[Tuple[str, str, int]]:
    """
    (layer, output, parameters) rows describing a spec, stage headers included.

    """
    rows: List[Tuple[str, str, int]] = []
    frame = f"{spec.context}x{spec.bins}"

    prelim, channels = _layer_rows(spec.prelim, 1, "  ")
    rows.append(("prelim", f"{channels}x{frame}", sum(r[2] for r in prelim)))
    rows += prelim

    for stage in spec.stages:
        stage_rows = []
        for i, block in enumerate(stage.blocks):
            branch, out = _layer_rows(block.branch.layers, block.in_channels, "    ")
            branch_total = sum(r[2] for r in branch)
            shortcut = 0
            if block.in_channels != out:
                shortcut = block.in_channels * out + out
            stage_rows.append((f"  block {i}: shortcut {block.shortcut}, "
                               f"branch x{block.branch_count}, shake {block.shake_mode}", "",
                               shortcut + block.branch_count * branch_total))
            stage_rows.append(("    branch", "", branch_total))
            stage_rows += branch
            channels = out
        rows.append((stage.name, f"{channels}x{frame}", sum(r[2] for r in stage_rows if r[0].startswith("  block"))))
        rows += stage_rows

    head, _ = _layer_rows(spec.head.layers, spec.pooled_width, "  ")
    pooled = "mean-pool over time" if spec.head.pooling is Pooling.FLATTEN else \
        f"average over time, context and {spec.head.groups} spectral groups"
    rows.append(("head", f"{spec.class_count}", sum(r[2] for r in head)))
    rows.append(("  " + pooled, f"{spec.pooled_width}", 0))
    rows += head
    return rows


def model_summary(model: Model) -> str:
    """
    A plain text table of the layers and their parameter counts.

    """
    spec = model.spec
    rows = spec_rows(spec)
    width = max(len(r[0]) for r in rows) + 2
    lines = [f"{spec.name} model, shake mode {spec.shake_mode}, granularity {spec.granularity}",
             f"{'layer':<{width}}{'output':>14}{'params':>12}",
             "-" * (width + 26)]
    for name, output, params in rows:
        lines.append(f"{name:<{width}}{output:>14}{params:>12,}")
    counts = count_parameters(model)
    lines.append("-" * (width + 26))
    lines.append(f"{'total':<{width}}{'':>14}{counts.total:>12,}")
    return "\n".join(lines)
