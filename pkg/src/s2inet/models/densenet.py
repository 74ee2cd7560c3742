from __future__ import annotations

from typing import Any

from .. import functional as F
from .. import nn
from ..tensor import Tensor

# depth -> (growth rate, layers per dense block, initial feature count)
CONFIGS = {
    121: (32, (6, 12, 24, 16), 64),
    161: (48, (6, 12, 36, 24), 96),
    169: (32, (6, 12, 32, 32), 64),
    201: (32, (6, 12, 48, 32), 64),
}
BN_SIZE = 4


class DenseLayer(nn.Module):
    def __init__(self, dim: int, in_features: int, growth: int, drop_rate: float, kw) -> None:
        self.norm1 = nn.BatchNorm(dim, in_features, **kw)
        self.relu1 = nn.ReLU()
        self.conv1 = nn.Conv(dim, in_features, BN_SIZE * growth, 1, bias=False, **kw)
        self.norm2 = nn.BatchNorm(dim, BN_SIZE * growth, **kw)
        self.relu2 = nn.ReLU()
        self.conv2 = nn.Conv(dim, BN_SIZE * growth, growth, 3, padding=1, bias=False, **kw)
        self.dropout = nn.Dropout(drop_rate) if drop_rate > 0 else None

    def forward(self, features: list[Tensor]) -> Tensor:
        x = features[0] if len(features) == 1 else F.concat(features, axis=1)
        out = self.conv1(self.relu1(self.norm1(x)))
        out = self.conv2(self.relu2(self.norm2(out)))
        return out if self.dropout is None else self.dropout(out)


class DenseBlock(nn.Module):
    def __init__(self, dim: int, layers: int, in_features: int, growth: int, drop_rate: float, kw) -> None:
        for i in range(layers):
            setattr(self, f"denselayer{i + 1}", DenseLayer(dim, in_features + i * growth, growth, drop_rate, kw))

    def forward(self, x: Tensor) -> Tensor:
        features = [x]
        for _, layer in self.children():
            features.append(layer(features))
        return F.concat(features, axis=1)


class Transition(nn.Sequential):
    def __init__(self, dim: int, in_features: int, out_features: int, kw) -> None:
        super().__init__(
            ("norm", nn.BatchNorm(dim, in_features, **kw)),
            ("relu", nn.ReLU()),
            ("conv", nn.Conv(dim, in_features, out_features, 1, bias=False, **kw)),
            ("pool", nn.AvgPool(dim, 2, 2)),
        )


class DenseNet(nn.Module):
    def __init__(
        self,
        depth: int,
        dim: int,
        in_channels: int,
        num_classes: int = 5,
        drop_rate: float = 0.0,
        dtype: Any = None,
    ) -> None:
        if depth not in CONFIGS:
            raise ValueError(f"no DenseNet configuration of depth {depth}")
        kw = {} if dtype is None else {"dtype": dtype}
        growth, blocks, n = CONFIGS[depth]
        self.features = nn.Sequential(
            ("conv0", nn.Conv(dim, in_channels, n, 7, stride=2, padding=3, bias=False, **kw)),
            ("norm0", nn.BatchNorm(dim, n, **kw)),
            ("relu0", nn.ReLU()),
            ("pool0", nn.MaxPool(dim, 3, 2, padding=1)),
        )
        for i, layers in enumerate(blocks):
            self.features.add(f"denseblock{i + 1}", DenseBlock(dim, layers, n, growth, drop_rate, kw))
            n += layers * growth
            if i != len(blocks) - 1:
                self.features.add(f"transition{i + 1}", Transition(dim, n, n // 2, kw))
                n //= 2
        self.features.add("norm5", nn.BatchNorm(dim, n, **kw))
        self.relu = nn.ReLU()
        self.avgpool = nn.AdaptiveAvgPool(dim, 1)
        self.flatten = nn.Flatten()
        self.classifier = nn.Linear(n, num_classes, **kw)

    def forward(self, x: Tensor) -> Tensor:
        return self.classifier(self.flatten(self.avgpool(self.relu(self.features(x)))))
