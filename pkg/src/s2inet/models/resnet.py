from __future__ import annotations

from typing import Any, Optional

from .. import nn
from ..tensor import Tensor

# depth -> (block type, blocks per stage)
CONFIGS = {
    18: ("basic", (2, 2, 2, 2)),
    34: ("basic", (3, 4, 6, 3)),
    50: ("bottleneck", (3, 4, 6, 3)),
    101: ("bottleneck", (3, 4, 23, 3)),
    152: ("bottleneck", (3, 8, 36, 3)),
}


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, dim: int, inplanes: int, planes: int, stride: int, downsample: Optional[nn.Module], kw) -> None:
        self.conv1 = nn.Conv(dim, inplanes, planes, 3, stride=stride, padding=1, bias=False, **kw)
        self.bn1 = nn.BatchNorm(dim, planes, **kw)
        self.relu = nn.ReLU()
        self.conv2 = nn.Conv(dim, planes, planes, 3, padding=1, bias=False, **kw)
        self.bn2 = nn.BatchNorm(dim, planes, **kw)
        self.downsample = downsample

    def forward(self, x: Tensor) -> Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, dim: int, inplanes: int, planes: int, stride: int, downsample: Optional[nn.Module], kw) -> None:
        self.conv1 = nn.Conv(dim, inplanes, planes, 1, bias=False, **kw)
        self.bn1 = nn.BatchNorm(dim, planes, **kw)
        self.conv2 = nn.Conv(dim, planes, planes, 3, stride=stride, padding=1, bias=False, **kw)
        self.bn2 = nn.BatchNorm(dim, planes, **kw)
        self.conv3 = nn.Conv(dim, planes, planes * 4, 1, bias=False, **kw)
        self.bn3 = nn.BatchNorm(dim, planes * 4, **kw)
        self.relu = nn.ReLU()
        self.downsample = downsample

    def forward(self, x: Tensor) -> Tensor:
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


class ResNet(nn.Module):
    def __init__(self, depth: int, dim: int, in_channels: int, num_classes: int = 5, dtype: Any = None) -> None:
        if depth not in CONFIGS:
            raise ValueError(f"no ResNet configuration of depth {depth}")
        kw = {} if dtype is None else {"dtype": dtype}
        kind, stages = CONFIGS[depth]
        block = BasicBlock if kind == "basic" else Bottleneck
        self.conv1 = nn.Conv(dim, in_channels, 64, 7, stride=2, padding=3, bias=False, **kw)
        self.bn1 = nn.BatchNorm(dim, 64, **kw)
        self.relu = nn.ReLU()
        self.maxpool = nn.MaxPool(dim, 3, 2, padding=1)
        inplanes = 64
        for i, (planes, blocks) in enumerate(zip((64, 128, 256, 512), stages)):
            stride = 1 if i == 0 else 2
            layer = nn.Sequential()
            for j in range(blocks):
                s = stride if j == 0 else 1
                downsample = None
                if j == 0 and (s != 1 or inplanes != planes * block.expansion):
                    downsample = nn.Sequential(
                        nn.Conv(dim, inplanes, planes * block.expansion, 1, stride=s, bias=False, **kw),
                        nn.BatchNorm(dim, planes * block.expansion, **kw),
                    )
                layer.add(str(j), block(dim, inplanes, planes, s, downsample, kw))
                inplanes = planes * block.expansion
            setattr(self, f"layer{i + 1}", layer)
        self.avgpool = nn.AdaptiveAvgPool(dim, 1)
        self.flatten = nn.Flatten()
        self.fc = nn.Linear(512 * block.expansion, num_classes, **kw)

    def forward(self, x: Tensor) -> Tensor:
        x = self.maxpool(self.relu(self.bn1(self.conv1(x))))
        x = self.layer4(self.layer3(self.layer2(self.layer1(x))))
        return self.fc(self.flatten(self.avgpool(x)))
