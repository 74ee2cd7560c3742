from __future__ import annotations

from typing import Any

from .. import nn
from ..tensor import Tensor


class AlexNet(nn.Module):
    def __init__(self, dim: int, in_channels: int, num_classes: int = 5, dtype: Any = None) -> None:
        kw = {} if dtype is None else {"dtype": dtype}
        self.features = nn.Sequential(
            nn.Conv(dim, in_channels, 64, 11, stride=4, padding=2, **kw),
            nn.ReLU(),
            nn.MaxPool(dim, 3, 2),
            nn.Conv(dim, 64, 192, 5, padding=2, **kw),
            nn.ReLU(),
            nn.MaxPool(dim, 3, 2),
            nn.Conv(dim, 192, 384, 3, padding=1, **kw),
            nn.ReLU(),
            nn.Conv(dim, 384, 256, 3, padding=1, **kw),
            nn.ReLU(),
            nn.Conv(dim, 256, 256, 3, padding=1, **kw),
            nn.ReLU(),
            nn.MaxPool(dim, 3, 2),
        )
        self.avgpool = nn.AdaptiveAvgPool(dim, 6)
        self.flatten = nn.Flatten()
        self.classifier = nn.Sequential(
            nn.Dropout(0.5),
            nn.Linear(256 * 6**dim, 4096, **kw),
            nn.ReLU(),
            nn.Dropout(0.5),
            nn.Linear(4096, 4096, **kw),
            nn.ReLU(),
            nn.Linear(4096, num_classes, **kw),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.classifier(self.flatten(self.avgpool(self.features(x))))
