#!/usr/bin/env python3
"""Writes layer-shape files for the bundled models into data/models/.

Only weight-bearing layers are listed. Pooling, activation and residual
additions carry no weights; a residual addition becomes extra producer
edges into the consuming layer.
"""

import argparse
import pathlib

BITS = 8


class Model:
    def __init__(self, name, channels, hw):
        self.name = name
        self.layers = []
        self.input_bits = channels * hw * hw * BITS

    def add(self, kind, cin, cout, k=1, hw=1, inputs=None, name=None):
        self.layers.append(dict(name=name, kind=kind, cin=cin, cout=cout, k=k, hw=hw, inputs=inputs))
        return len(self.layers) - 1

    def conv(self, cin, cout, k, hw, inputs=None, name=None):
        return self.add("conv", cin, cout, k, hw, inputs, name)

    def fc(self, cin, cout, inputs=None, name=None):
        return self.add("fc", cin, cout, inputs=inputs, name=name)

    def dw(self, c, k, hw, inputs=None, name=None):
        return self.add("depthwise-conv", c, c, k, hw, inputs, name)

    def toml(self):
        out = [
            "version = 1",
            f'name = "{self.name}"',
            f"bits_per_weight = {BITS}",
            f"bits_per_activation = {BITS}",
            f"input_bits = {self.input_bits}",
        ]
        for i, l in enumerate(self.layers):
            out.append("")
            out.append("[[layers]]")
            out.append(f'name = "{l["name"] or f"l{i}"}"')
            out.append(f'kind = "{l["kind"]}"')
            out.append(f"cin = {l['cin']}")
            out.append(f"cout = {l['cout']}")
            if l["kind"] != "fc":
                out.append(f"k = {l['k']}")
                out.append(f"hw = {l['hw']}")
            if l["inputs"] is not None:
                out.append("inputs = [" + ", ".join(str(s) for s in l["inputs"]) + "]")
        return "\n".join(out) + "\n"


def resnet_basic(name, blocks, classes=1000):
    m = Model(name, 3, 224)
    prev = [m.conv(3, 64, 7, 112, name="conv1")]
    cin, hw = 64, 56
    for stage, (n, cout) in enumerate(zip(blocks, [64, 128, 256, 512])):
        for b in range(n):
            stride = 2 if stage > 0 and b == 0 else 1
            out_hw = hw // stride
            a = m.conv(cin, cout, 3, out_hw, inputs=prev, name=f"s{stage}b{b}a")
            c = m.conv(cout, cout, 3, out_hw, name=f"s{stage}b{b}b")
            if stride != 1 or cin != cout:
                d = m.conv(cin, cout, 1, out_hw, inputs=prev, name=f"s{stage}b{b}ds")
                prev = [c, d]
            else:
                prev = [c, prev[0]]
            cin, hw = cout, out_hw
    m.fc(cin, classes, inputs=prev, name="fc")
    return m


def resnet_bottleneck(name, blocks, classes=1000):
    m = Model(name, 3, 224)
    prev = [m.conv(3, 64, 7, 112, name="conv1")]
    cin, hw = 64, 56
    for stage, (n, width) in enumerate(zip(blocks, [64, 128, 256, 512])):
        cout = width * 4
        for b in range(n):
            stride = 2 if stage > 0 and b == 0 else 1
            out_hw = hw // stride
            a = m.conv(cin, width, 1, hw, inputs=prev, name=f"s{stage}b{b}a")
            bb = m.conv(width, width, 3, out_hw, name=f"s{stage}b{b}b")
            c = m.conv(width, cout, 1, out_hw, name=f"s{stage}b{b}c")
            if b == 0:
                d = m.conv(cin, cout, 1, out_hw, inputs=prev, name=f"s{stage}b{b}ds")
                prev = [c, d]
            else:
                prev = [c, prev[0]]
            cin, hw = cout, out_hw
    m.fc(cin, classes, inputs=prev, name="fc")
    return m


def vgg(name, cfg, classes=1000):
    m = Model(name, 3, 224)
    cin, hw = 3, 224
    for i, v in enumerate(cfg):
        if v == "M":
            hw //= 2
            continue
        m.conv(cin, v, 3, hw, name=f"conv{i}")
        cin = v
    m.fc(cin * 7 * 7, 4096, name="fc1")
    m.fc(4096, 4096, name="fc2")
    m.fc(4096, classes, name="fc3")
    return m


def alexnet():
    m = Model("alexnet", 3, 224)
    m.conv(3, 64, 11, 55)
    m.conv(64, 192, 5, 27)
    m.conv(192, 384, 3, 13)
    m.conv(384, 256, 3, 13)
    m.conv(256, 256, 3, 13)
    m.fc(256 * 6 * 6, 4096)
    m.fc(4096, 4096)
    m.fc(4096, 1000)
    return m


def mobilenet_v1():
    m = Model("mobilenet_v1", 3, 224)
    m.conv(3, 32, 3, 112)
    spec = [(32, 64, 1), (64, 128, 2), (128, 128, 1), (128, 256, 2), (256, 256, 1), (256, 512, 2)]
    spec += [(512, 512, 1)] * 5 + [(512, 1024, 2), (1024, 1024, 1)]
    hw = 112
    for cin, cout, stride in spec:
        hw //= stride
        m.dw(cin, 3, hw)
        m.conv(cin, cout, 1, hw)
    m.fc(1024, 1000)
    return m


# small models for desk-scale experiments


def lenet5():
    m = Model("lenet5", 1, 32)
    m.conv(1, 6, 5, 28)
    m.conv(6, 16, 5, 10)
    m.fc(400, 120)
    m.fc(120, 84)
    m.fc(84, 10)
    return m


def resnet8():
    m = Model("resnet8", 3, 32)
    prev = [m.conv(3, 16, 3, 32, name="conv1")]
    cin, hw = 16, 32
    for stage, cout in enumerate([16, 32, 64]):
        stride = 1 if stage == 0 else 2
        out_hw = hw // stride
        a = m.conv(cin, cout, 3, out_hw, inputs=prev)
        c = m.conv(cout, cout, 3, out_hw)
        if stride != 1 or cin != cout:
            d = m.conv(cin, cout, 1, out_hw, inputs=prev)
            prev = [c, d]
        else:
            prev = [c, prev[0]]
        cin, hw = cout, out_hw
    m.fc(64, 10, inputs=prev)
    return m


def tiny_vgg():
    m = Model("tiny_vgg", 3, 32)
    m.conv(3, 32, 3, 32)
    m.conv(32, 32, 3, 32)
    m.conv(32, 64, 3, 16)
    m.conv(64, 64, 3, 16)
    m.conv(64, 128, 3, 8)
    m.fc(128 * 4 * 4, 256)
    m.fc(256, 10)
    return m


def mlp():
    m = Model("mlp", 1, 28)
    m.fc(784, 512)
    m.fc(512, 256)
    m.fc(256, 10)
    return m


def uniform_chain(name, layers, hw):
    """Equal conv layers of 32x32x3x3; every layer holds 72 Kb of weights."""
    m = Model(name, 32, hw)
    for _ in range(layers):
        m.conv(32, 32, 3, hw)
    return m


MODELS = [
    resnet_basic("resnet18", [2, 2, 2, 2]),
    resnet_basic("resnet34", [3, 4, 6, 3]),
    resnet_bottleneck("resnet50", [3, 4, 6, 3]),
    vgg("vgg16", [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M"]),
    vgg("vgg19", [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M", 512, 512, 512, 512, "M"]),
    alexnet(),
    mobilenet_v1(),
    lenet5(),
    resnet8(),
    tiny_vgg(),
    mlp(),
    uniform_chain("chain1", 1, 16),
    uniform_chain("chain2", 2, 16),
    uniform_chain("chain3", 3, 8),
    uniform_chain("chain3_wide", 3, 32),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=pathlib.Path(__file__).resolve().parent.parent / "data" / "models")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for m in MODELS:
        (out / f"{m.name}.shapes.toml").write_text(m.toml())
        print(f"{m.name}: {len(m.layers)} layers")


if __name__ == "__main__":
    main()
