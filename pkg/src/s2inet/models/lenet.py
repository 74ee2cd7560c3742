from __future__ import annotations

from typing import Any

from .. import nn
from ..tensor import Tensor


class LeNet(nn.Module):
    """Two conv/pool stages and a three-layer classifier.

    The adaptive pool squeezes any input down to the classic 5 (or 5x5)
    feature grid, so 178-sample signals and 178x178 images both fit.
    """

    def __init__(self, dim: int, in_channels: int, num_classes: int = 5, dtype: Any = None) -> None:
        kw = {} if dtype is None else {"dtype": dtype}
        self.features = nn.Sequential(
            ("conv1", nn.Conv(dim, in_channels, 6, 5, **kw)),
            ("relu1", nn.ReLU()),
            ("pool1", nn.MaxPool(dim, 2)),
            ("conv2", nn.Conv(dim, 6, 16, 5, **kw)),
            ("relu2", nn.ReLU()),
            ("pool2", nn.MaxPool(dim, 2)),
        )
        self.avgpool = nn.AdaptiveAvgPool(dim, 5)
        self.flatten = nn.Flatten()
        self.classifier = nn.Sequential(
            ("fc1", nn.Linear(16 * 5**dim, 120, **kw)),
            ("relu3", nn.ReLU()),
            ("fc2", nn.Linear(120, 84, **kw)),
            ("relu4", nn.ReLU()),
            ("fc3", nn.Linear(84, num_classes, **kw)),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.classifier(self.flatten(self.avgpool(self.features(x))))
