from __future__ import annotations

from typing import Any, Union

from .. import nn
from ..tensor import Tensor

# "M" marks a 2x2 max pool
CONFIGS: dict[int, list[Union[int, str]]] = {
    11: [64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"],
    13: [64, 64, "M", 128, 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"],
    16: [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M"],
    19: [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M", 512, 512, 512, 512, "M"],
}


class VGG(nn.Module):
    """VGG without batch norm: 3x3 convs, five pooling stages, two 4096-wide hidden layers."""

    def __init__(self, depth: int, dim: int, in_channels: int, num_classes: int = 5, dtype: Any = None) -> None:
        if depth not in CONFIGS:
            raise ValueError(f"no VGG configuration of depth {depth}")
        kw = {} if dtype is None else {"dtype": dtype}
        layers: list[nn.Module] = []
        c = in_channels
        for v in CONFIGS[depth]:
            if v == "M":
                layers.append(nn.MaxPool(dim, 2, 2))
            else:
                layers += [nn.Conv(dim, c, int(v), 3, padding=1, **kw), nn.ReLU()]
                c = int(v)
        self.features = nn.Sequential(*layers)
        self.avgpool = nn.AdaptiveAvgPool(dim, 7)
        self.flatten = nn.Flatten()
        self.classifier = nn.Sequential(
            nn.Linear(512 * 7**dim, 4096, **kw),
            nn.ReLU(),
            nn.Dropout(0.5),
            nn.Linear(4096, 4096, **kw),
            nn.ReLU(),
            nn.Dropout(0.5),
            nn.Linear(4096, num_classes, **kw),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.classifier(self.flatten(self.avgpool(self.features(x))))
