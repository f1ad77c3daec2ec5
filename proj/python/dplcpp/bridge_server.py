"""Reference model server for the engine's bridge protocol, backed by torch.

Newline-delimited JSON on stdin/stdout. The engine sends a hello first, then
forward, backward and step requests; gradients accumulate between steps.

    python -m dplcpp.bridge_server [--arch linear|mnist] [--models a,b]
        [--inputs N] [--outputs K] [--optimizer adam|sgd] [--init default|sine]
        [--seed S] [--log FILE] [--bad-version]
"""

import argparse
import json
import math
import sys

import torch
from torch import nn

PROTOCOL_VERSION = 1


class MnistNet(nn.Module):
    """Two 5x5 convolutions (6 and 16 filters) with 2x2 max pooling, then
    fully connected layers of 120, 84 and 10 units and a softmax."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 6, 5), nn.MaxPool2d(2), nn.ReLU(),
            nn.Conv2d(6, 16, 5), nn.MaxPool2d(2), nn.ReLU(),
        )
        self.classifier = nn.Sequential(
            nn.Linear(16 * 4 * 4, 120), nn.ReLU(),
            nn.Linear(120, 84), nn.ReLU(),
            nn.Linear(84, 10), nn.Softmax(dim=-1),
        )

    def forward(self, x):
        x = self.features(x.view(-1, 1, 28, 28))
        return self.classifier(x.flatten(1)).squeeze(0)


class LinearSoftmax(nn.Module):
    def __init__(self, inputs, outputs, init):
        super().__init__()
        self.linear = nn.Linear(inputs, outputs, dtype=torch.float64)
        if init == "sine":
            # Same values as the engine-side test model: 0.5 sin(1 + o*n + i), bias 0.1 o.
            with torch.no_grad():
                for o in range(outputs):
                    for i in range(inputs):
                        self.linear.weight[o, i] = 0.5 * math.sin(1.0 + o * inputs + i)
                    self.linear.bias[o] = 0.1 * o

    def forward(self, x):
        return torch.softmax(self.linear(x), dim=-1)


class ServedModel:
    def __init__(self, args):
        if args.arch == "mnist":
            self.net = MnistNet().double()
        else:
            self.net = LinearSoftmax(args.inputs, args.outputs, args.init).double()
        params = self.net.parameters()
        if args.optimizer == "sgd":
            self.optimizer = torch.optim.SGD(params, lr=0.001)
        else:
            self.optimizer = torch.optim.Adam(params, lr=0.001)
        self.optimizer.zero_grad()

    def forward(self, x):
        with torch.no_grad():
            return self.net(x).tolist()

    def backward(self, x, grad):
        out = self.net(x)
        g = torch.tensor(grad, dtype=torch.float64)
        if g.shape != out.shape:
            raise ValueError(f"gradient has {g.numel()} entries, model has {out.numel()} outputs")
        (out * g).sum().backward()

    def step(self, lr):
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.optimizer.step()
        self.optimizer.zero_grad()


def flatten(inputs):
    values = []
    for field in inputs:
        if not isinstance(field, list):
            raise ValueError("inputs must be lists of numbers")
        values.extend(float(v) for v in field)
    return torch.tensor(values, dtype=torch.float64)


class Server:
    def __init__(self, args):
        self.args = args
        self.allowed = set(filter(None, args.models.split(","))) if args.models else None
        self.models = {}
        self.greeted = False

    def model(self, name):
        if self.allowed is not None and name not in self.allowed:
            raise KeyError(f"unknown model {name}")
        if name not in self.models:
            self.models[name] = ServedModel(self.args)
        return self.models[name]

    def handle(self, req):
        op = req["op"]
        if op == "hello":
            if req.get("version") != PROTOCOL_VERSION:
                raise SystemExit(f"protocol version {req.get('version')} is not supported")
            self.greeted = True
            version = PROTOCOL_VERSION + 1 if self.args.bad_version else PROTOCOL_VERSION
            return {"ok": True, "version": version}
        if not self.greeted:
            raise ValueError("expected hello first")
        if op == "forward":
            return {"dist": self.model(req["model"]).forward(flatten(req["inputs"]))}
        if op == "backward":
            self.model(req["model"]).backward(flatten(req["inputs"]), req["grad"])
            return {"ok": True}
        if op == "step":
            lr = float(req["lr"])
            targets = [self.model(req["model"])] if "model" in req else list(self.models.values())
            for m in targets:
                m.step(lr)
            return {"ok": True}
        raise ValueError(f"unknown op {op}")

    def serve(self, stdin, stdout, log=None):
        for line in stdin:
            line = line.rstrip("\n")
            if log is not None:
                log.write(line + "\n")
                log.flush()
            try:
                reply = self.handle(json.loads(line))
            except SystemExit as e:
                stdout.write(json.dumps({"error": str(e)}) + "\n")
                stdout.flush()
                return 1
            except Exception as e:  # every failure becomes an error reply
                reply = {"error": f"{type(e).__name__}: {e}"}
            stdout.write(json.dumps(reply) + "\n")
            stdout.flush()
        return 0


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--arch", choices=["linear", "mnist"], default="linear")
    p.add_argument("--models", default="", help="comma-separated model names to serve (default: any)")
    p.add_argument("--inputs", type=int, default=3)
    p.add_argument("--outputs", type=int, default=2)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--init", choices=["default", "sine"], default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", default=None, help="append every received line to this file")
    p.add_argument("--bad-version", action="store_true", help="announce an unsupported protocol version")
    return p.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    torch.manual_seed(args.seed)
    log = open(args.log, "a") if args.log else None
    try:
        return Server(args).serve(sys.stdin, sys.stdout, log)
    finally:
        if log is not None:
            log.close()


if __name__ == "__main__":
    sys.exit(main())
